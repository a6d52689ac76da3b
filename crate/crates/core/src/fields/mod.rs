//! Grid storage and the level-set queries shared by both discretizations.

mod dump;
mod grid;
mod levelset;

pub use dump::{read_dump, write_dump, write_pgm, DumpKind, FieldDump};
pub use grid::{GridDesc, NodeVectorField, ScalarField, StaggeredVelocityField};
pub use levelset::{reinitialize, LevelSet, ReinitParams};

use crate::mesh::{FaceFrame, HybridLayout};
use crate::{Error, Result};

/// Lower clamp on the ghost-fluid liquid fraction.
pub const THETA_MIN: f64 = 0.01;

/// Identifies one face of the staggered layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FaceId {
    pub axis: usize,
    pub index: [usize; 3],
}

/// Fraction of the segment `[a, b]` where the linear interpolant is negative.
pub fn segment_liquid_fraction(a: f64, b: f64) -> f64 {
    match (a < 0.0, b < 0.0) {
        (true, true) => 1.0,
        (false, false) => 0.0,
        (true, false) => (a / (a - b)).clamp(0.0, 1.0),
        (false, true) => (b / (b - a)).clamp(0.0, 1.0),
    }
}

/// Liquid area of the unit square from corner values given counter-clockwise
/// starting at the lower-left corner. The liquid polygon is traced with
/// linear zero crossings along each edge. In a saddle (alternating signs)
/// the liquid corners are connected only if the corner mean is negative,
/// so liquid and air fractions always sum to one.
pub fn square_liquid_fraction(corners: [f64; 4]) -> f64 {
    let wet = corners.map(|v| v < 0.0);
    if wet[0] == wet[2] && wet[1] == wet[3] && wet[0] != wet[1] && corners.iter().sum::<f64>() >= 0.0 {
        // two separate corner triangles
        let corner = |c: usize| {
            let v = corners[c];
            let a = v / (v - corners[(c + 1) % 4]);
            let b = v / (v - corners[(c + 3) % 4]);
            0.5 * a * b
        };
        let first = if wet[0] { 0 } else { 1 };
        return corner(first) + corner(first + 2);
    }
    let pos = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let mut poly: Vec<[f64; 2]> = Vec::with_capacity(8);
    for c in 0..4 {
        let n = (c + 1) % 4;
        let (pa, pb) = (pos[c], pos[n]);
        let (va, vb) = (corners[c], corners[n]);
        if va < 0.0 {
            poly.push(pa);
        }
        if (va < 0.0) != (vb < 0.0) {
            let t = va / (va - vb);
            poly.push([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
        }
    }
    if poly.len() < 3 {
        return 0.0;
    }
    let mut area = 0.0;
    for k in 0..poly.len() {
        let a = poly[k];
        let b = poly[(k + 1) % poly.len()];
        area += a[0] * b[1] - b[0] * a[1];
    }
    (0.5 * area).abs().clamp(0.0, 1.0)
}

/// Level set at a grid node, averaged from the cells that touch it.
fn node_phi(phi: &ScalarField, node: [usize; 3]) -> f64 {
    let d = &phi.desc;
    let mut sum = 0.0;
    let mut n = 0usize;
    let k_range = if d.dim == 3 { 0..2 } else { 0..1 };
    for dk in k_range {
        for dj in 0..2 {
            for di in 0..2 {
                let off = [di, dj, dk];
                let mut cell = [0usize; 3];
                let mut ok = true;
                for a in 0..d.dim {
                    if node[a] + off[a] == 0 || node[a] + off[a] > d.counts[a] {
                        ok = false;
                        break;
                    }
                    cell[a] = node[a] + off[a] - 1;
                }
                if ok {
                    sum += phi.values[d.cell_index(cell[0], cell[1], cell[2])];
                    n += 1;
                }
            }
        }
    }
    sum / n as f64
}

/// Fraction of a face covered by liquid (`phi < 0`), from node values
/// averaged out of the surrounding cell centers. In 2D the face is a segment
/// between two nodes; in 3D a square with four corner nodes.
pub fn liquid_fraction_face(phi: &ScalarField, face: FaceId) -> f64 {
    let d = &phi.desc;
    let a = face.axis;
    let base = face.index;
    if d.dim == 2 {
        let t = 1 - a;
        let mut n1 = base;
        n1[t] += 1;
        segment_liquid_fraction(node_phi(phi, base), node_phi(phi, n1))
    } else {
        let (t1, t2) = ((a + 1) % 3, (a + 2) % 3);
        let corner = |o1: usize, o2: usize| {
            let mut n = base;
            n[t1] += o1;
            n[t2] += o2;
            node_phi(phi, n)
        };
        square_liquid_fraction([corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)])
    }
}

/// Inverse liquid fraction along a face that crosses the free surface.
pub fn ghost_fluid_factor(phi_liquid: f64, phi_air: f64, theta_min: f64) -> Result<f64> {
    if phi_liquid >= 0.0 {
        return Err(Error::NotLiquid(phi_liquid));
    }
    let theta = phi_liquid / (phi_liquid - phi_air);
    Ok(1.0 / theta.max(theta_min))
}

/// Time-step bounds applied after the CFL estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DtLimits {
    pub min: f64,
    pub max: f64,
}

impl DtLimits {
    pub fn for_frame(dx: f64, frame_interval: f64) -> Self {
        DtLimits {
            min: 1e-6 * dx,
            max: frame_interval,
        }
    }
}

/// Speeds below this count as quiescent.
const SPEED_EPS: f64 = 1e-12;

/// CFL time step using velocities relative to the owning frame: moving-window
/// faces are measured against the window's grid velocity, seam elements
/// against the mean velocity of their nodes' frames.
///
/// When `liquid` is given, only faces touching a liquid cell (and elements
/// with a liquid node) are considered.
pub fn cfl_time_step(
    u: &StaggeredVelocityField,
    seam_u: Option<&NodeVectorField>,
    layout: &HybridLayout,
    cfl: f64,
    limits: DtLimits,
    liquid: Option<&ScalarField>,
) -> f64 {
    let d = &layout.desc;
    let is_liquid = |c: usize| liquid.is_none_or(|phi| phi.values[c] < 0.0);
    let mut speed = 0.0_f64;
    for axis in 0..2 {
        let fc = d.face_counts(axis);
        for j in 0..fc[1] {
            for i in 0..fc[0] {
                let frame = layout.face_frame(axis, i, j);
                let ug = match frame {
                    FaceFrame::Seam => continue,
                    FaceFrame::Static => 0.0,
                    FaceFrame::Moving(r) => layout.regions[r].u_g[axis],
                };
                let (lo, hi) = layout.face_cells(axis, i, j);
                let touches = lo.is_some_and(is_liquid) || hi.is_some_and(is_liquid);
                if !touches {
                    continue;
                }
                speed = speed.max((u.at(axis, i, j) - ug).abs());
            }
        }
    }
    if let Some(seam_u) = seam_u {
        for e in &layout.elements {
            if liquid.is_some() && !e.cells.iter().any(|&c| is_liquid(c)) {
                continue;
            }
            let frame_u = layout.element_frame_velocity(e);
            let v = seam_u.values[e.node];
            for a in 0..2 {
                speed = speed.max((v[a] - frame_u[a]).abs());
            }
        }
    }
    let dt = if speed < SPEED_EPS {
        limits.max
    } else {
        cfl * d.dx / speed
    };
    dt.clamp(limits.min, limits.max)
}
