//! `hfdump v1`: a one-line text header followed by little-endian `f64`s.
//!
//! ```text
//! hfdump v1 dim=2 nx=64 ny=64 dx=0.015625 origin=0,0 kind=cell\n
//! ```

use std::io::{Read, Write};

use super::GridDesc;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DumpKind {
    Cell,
    FaceX,
    FaceY,
    FaceZ,
}

impl DumpKind {
    fn as_str(self) -> &'static str {
        match self {
            DumpKind::Cell => "cell",
            DumpKind::FaceX => "faceX",
            DumpKind::FaceY => "faceY",
            DumpKind::FaceZ => "faceZ",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "cell" => DumpKind::Cell,
            "faceX" => DumpKind::FaceX,
            "faceY" => DumpKind::FaceY,
            "faceZ" => DumpKind::FaceZ,
            other => return Err(Error::Dump(format!("unknown kind {other:?}"))),
        })
    }

    pub fn value_count(self, desc: &GridDesc) -> usize {
        match self {
            DumpKind::Cell => desc.cell_count(),
            DumpKind::FaceX => desc.face_count(0),
            DumpKind::FaceY => desc.face_count(1),
            DumpKind::FaceZ => desc.face_count(2),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldDump {
    pub desc: GridDesc,
    pub kind: DumpKind,
    pub values: Vec<f64>,
}

fn header(desc: &GridDesc, kind: DumpKind) -> String {
    let mut h = format!("hfdump v1 dim={} nx={} ny={}", desc.dim, desc.counts[0], desc.counts[1]);
    if desc.dim == 3 {
        h.push_str(&format!(" nz={}", desc.counts[2]));
    }
    let origin: Vec<String> = desc.origin[..desc.dim].iter().map(|v| format!("{v}")).collect();
    h.push_str(&format!(
        " dx={} origin={} kind={}\n",
        desc.dx,
        origin.join(","),
        kind.as_str()
    ));
    h
}

pub fn write_dump<W: Write>(mut w: W, desc: &GridDesc, kind: DumpKind, values: &[f64]) -> Result<()> {
    if values.len() != kind.value_count(desc) {
        return Err(Error::Dump(format!(
            "{} values for kind {} (expected {})",
            values.len(),
            kind.as_str(),
            kind.value_count(desc)
        )));
    }
    let mut buf = header(desc, kind).into_bytes();
    buf.reserve(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf).map_err(|e| Error::io("writing field dump", e))
}

pub fn read_dump<R: Read>(mut r: R) -> Result<FieldDump> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::io("reading field dump", e))?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Dump("missing header line".into()))?;
    let head = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::Dump("header is not UTF-8".into()))?;
    let mut tokens = head.split(' ');
    if tokens.next() != Some("hfdump") || tokens.next() != Some("v1") {
        return Err(Error::Dump(format!("bad magic in {head:?}")));
    }
    let mut dim = None;
    let mut counts = [1usize; 3];
    let mut dx = None;
    let mut origin = [0.0; 3];
    let mut kind = None;
    for tok in tokens {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::Dump(format!("bad header token {tok:?}")))?;
        let bad = |_| Error::Dump(format!("bad value in {tok:?}"));
        match k {
            "dim" => dim = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "nx" => counts[0] = v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "ny" => counts[1] = v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "nz" => counts[2] = v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "dx" => dx = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "origin" => {
                for (a, part) in v.split(',').enumerate().take(3) {
                    origin[a] = part
                        .parse()
                        .map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
                }
            }
            "kind" => kind = Some(DumpKind::parse(v)?),
            _ => return Err(Error::Dump(format!("unknown header key {k:?}"))),
        }
    }
    let desc = GridDesc {
        dim: dim.ok_or_else(|| Error::Dump("missing dim".into()))?,
        counts,
        dx: dx.ok_or_else(|| Error::Dump("missing dx".into()))?,
        origin,
    };
    desc.validate()?;
    let kind = kind.ok_or_else(|| Error::Dump("missing kind".into()))?;
    let payload = &bytes[nl + 1..];
    let n = kind.value_count(&desc);
    if payload.len() != n * 8 {
        return Err(Error::Dump(format!(
            "payload has {} bytes, expected {}",
            payload.len(),
            n * 8
        )));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(FieldDump { desc, kind, values })
}

/// Binary greyscale image; `values` are row-major from the bottom row up and
/// mapped from [0, 1] to [0, 255]. Rows are flipped so +y points up.
pub fn write_pgm<W: Write>(mut w: W, width: usize, height: usize, values: &[f64]) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::Dump(format!(
            "pgm expects {} values, got {}",
            width * height,
            values.len()
        )));
    }
    let mut buf = format!("P5\n{width} {height}\n255\n").into_bytes();
    for row in (0..height).rev() {
        for col in 0..width {
            let v = values[row * width + col];
            let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
            buf.push((v * 255.0).round() as u8);
        }
    }
    w.write_all(&buf).map_err(|e| Error::io("writing pgm", e))
}
