//! Sampling of cell- and face-centered quantities across the hybrid layout.
//!
//! Cell values switch between bilinear interpolation (static or window frame)
//! and element-wise interpolation inside the seam band. Face values use
//! bilinear interpolation on the face lattice where the whole stencil belongs
//! to one frame, and moving least squares otherwise, mixing finite-volume face
//! samples with element-centered samples.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{Matrix3, Vector3};

use crate::fields::{NodeVectorField, ScalarField, StaggeredVelocityField};
use crate::mesh::{jacobian, map_point, shape, FaceFrame, HybridLayout, Zone};
use crate::{Error, Result, Vec2};

/// Safety floor for MLS weights.
pub const EPS_S: f64 = 1e-4;
/// Newton iteration cap for unit-coordinate inversion.
pub const NEWTON_MAX_ITERS: usize = 20;
/// MLS gathering radius in cells (per axis).
pub const MLS_RADIUS: f64 = 1.5;
/// Condition number above which the MLS normal matrix counts as singular.
pub const MLS_MAX_COND: f64 = 1e12;

const INSIDE_TOL: f64 = 1e-9;

/// Tent weight `prod_j max(1 - |r_j| / h, eps)`.
pub fn weight_fvm(r: Vec2, h: f64) -> f64 {
    r.iter().map(|c| (1.0 - c.abs() / h).max(EPS_S)).product()
}

/// Inverts the bilinear map of `nodes` at `x` by Newton's method. Points
/// slightly outside the quad return their unclamped unit coordinates.
pub fn newton_unit_coords(nodes: &[Vec2; 4], x: Vec2, dx: f64) -> Result<[f64; 2]> {
    let tol = 1e-10 * dx;
    let mut xi = [0.0, 0.0];
    let mut res = f64::INFINITY;
    for _ in 0..=NEWTON_MAX_ITERS {
        let r = map_point(nodes, xi) - x;
        res = r.norm();
        let j = jacobian(nodes, xi);
        let Some(inv) = j.try_inverse() else { break };
        let step = inv * r;
        if res < tol {
            // one more step costs little and takes xi to round-off
            let polished = [xi[0] - step[0], xi[1] - step[1]];
            let better = (map_point(nodes, polished) - x).norm() <= res;
            return Ok(if better { polished } else { xi });
        }
        xi[0] -= step[0];
        xi[1] -= step[1];
        if !(xi[0].is_finite() && xi[1].is_finite()) || xi[0].abs() > 1e3 || xi[1].abs() > 1e3 {
            break;
        }
    }
    Err(Error::NewtonDiverged {
        iterations: NEWTON_MAX_ITERS,
        residual: res,
    })
}

/// Bilinear coefficients of the virtual element spanned by `corners`,
/// evaluated at `x`.
pub fn weight_fem(corners: &[Vec2; 4], x: Vec2, dx: f64) -> Result<[f64; 4]> {
    let xi = newton_unit_coords(corners, x, dx)?;
    Ok(shape(xi))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MlsSample {
    pub position: Vec2,
    pub value: f64,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MlsFit {
    pub value: f64,
    /// The normal matrix was singular and the weighted mean was returned.
    pub degenerate: bool,
}

/// Weighted linear least-squares fit over `[x, y, 1]`, evaluated at `query`.
/// Positions are centered on the query and scaled by `h` before forming the
/// normal equations.
pub fn mls_fit(samples: &[MlsSample], query: Vec2, h: f64) -> MlsFit {
    let mut m = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    let mut wsum = 0.0;
    let mut wv = 0.0;
    for s in samples {
        let d = (s.position - query) / h;
        let z = Vector3::new(d.x, d.y, 1.0);
        m += z * z.transpose() * s.weight;
        rhs += z * (s.weight * s.value);
        wsum += s.weight;
        wv += s.weight * s.value;
    }
    let fallback = MlsFit {
        value: if wsum > 0.0 { wv / wsum } else { 0.0 },
        degenerate: true,
    };
    if samples.len() < 3 {
        return fallback;
    }
    let sv = m.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 0.0) || smax / smin > MLS_MAX_COND {
        return fallback;
    }
    match m.cholesky() {
        Some(ch) => MlsFit {
            value: ch.solve(&rhs)[2],
            degenerate: false,
        },
        None => fallback,
    }
}

/// An interpolated value with the range of the samples that produced it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounded {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Bounded {
    pub fn clamped(&self) -> f64 {
        self.value.clamp(self.lo, self.hi)
    }

    fn from_stencil(value: f64, vals: &[f64]) -> Self {
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Bounded { value, lo, hi }
    }
}

fn bilerp(v: [f64; 4], t: f64, s: f64) -> f64 {
    (1.0 - s) * ((1.0 - t) * v[0] + t * v[1]) + s * ((1.0 - t) * v[2] + t * v[3])
}

/// Lower stencil index and fraction for coordinate `f` on a lattice with
/// indices `[lo, hi]` (inclusive, `hi > lo`).
fn stencil(f: f64, lo: usize, hi: usize) -> (usize, f64) {
    let f = f.clamp(lo as f64, hi as f64);
    let i = (f.floor() as usize).min(hi - 1).max(lo);
    (i, f - i as f64)
}

/// Samplers bound to one layout. Counts MLS fallbacks.
pub struct Sampler<'a> {
    pub layout: &'a HybridLayout,
    mls_fallbacks: AtomicUsize,
}

impl<'a> Sampler<'a> {
    pub fn new(layout: &'a HybridLayout) -> Self {
        Sampler {
            layout,
            mls_fallbacks: AtomicUsize::new(0),
        }
    }

    pub fn mls_fallbacks(&self) -> usize {
        self.mls_fallbacks.load(Ordering::Relaxed)
    }

    /// Cell-centered value at `x`.
    pub fn cell(&self, field: &ScalarField, x: Vec2) -> f64 {
        self.cell_bounded(field, x).value
    }

    pub fn cell_bounded(&self, field: &ScalarField, x: Vec2) -> Bounded {
        let l = self.layout;
        let d = &l.desc;
        let x = d.clamp_to_domain(x);
        match l.zone(x) {
            Zone::Static => self.cell_bilinear(field, x, 0, d.nx() - 1, 0, d.ny() - 1),
            Zone::Region(r) => {
                let reg = &l.regions[r];
                let local = x - l.region_offset(r);
                self.cell_bilinear(field, local, reg.min[0], reg.max[0] - 1, reg.min[1], reg.max[1] - 1)
            }
            Zone::Ring(_) => match self.locate_element(x) {
                Some((e, xi)) => {
                    let el = &l.elements[e];
                    let xi = [xi[0].clamp(-1.0, 1.0), xi[1].clamp(-1.0, 1.0)];
                    let n = shape(xi);
                    let vals = el.cells.map(|c| field.values[c]);
                    let v = (0..4).map(|k| n[k] * vals[k]).sum();
                    Bounded::from_stencil(v, &vals)
                }
                None => self.cell_bilinear(field, x, 0, d.nx() - 1, 0, d.ny() - 1),
            },
        }
    }

    fn cell_bilinear(
        &self,
        field: &ScalarField,
        x: Vec2,
        i_lo: usize,
        i_hi: usize,
        j_lo: usize,
        j_hi: usize,
    ) -> Bounded {
        let d = &self.layout.desc;
        let fx = (x.x - d.origin[0]) / d.dx - 0.5;
        let fy = (x.y - d.origin[1]) / d.dx - 0.5;
        let (i, t) = stencil(fx, i_lo, i_hi);
        let (j, s) = stencil(fy, j_lo, j_hi);
        let vals = [
            field.at(i, j),
            field.at(i + 1, j),
            field.at(i, j + 1),
            field.at(i + 1, j + 1),
        ];
        Bounded::from_stencil(bilerp(vals, t, s), &vals)
    }

    /// Seam element containing `x` and the unit coordinates of `x` in it.
    pub fn locate_element(&self, x: Vec2) -> Option<(usize, [f64; 2])> {
        let l = self.layout;
        let d = &l.desc;
        let fa = ((x.x - d.origin[0]) / d.dx - 0.5).floor() as i64;
        let fb = ((x.y - d.origin[1]) / d.dx - 0.5).floor() as i64;
        let mut best: Option<(usize, [f64; 2], f64)> = None;
        for b in fb - 1..=fb + 1 {
            for a in fa - 1..=fa + 1 {
                if a < 0 || b < 0 || a + 1 >= d.nx() as i64 || b + 1 >= d.ny() as i64 {
                    continue;
                }
                let node = d.node_idx(a as usize + 1, b as usize + 1);
                let Some(e) = l.node_element[node] else { continue };
                let el = &l.elements[e];
                let (lo, hi) = el.bbox();
                let pad = 1e-9 * d.dx;
                if x.x < lo.x - pad || x.y < lo.y - pad || x.x > hi.x + pad || x.y > hi.y + pad {
                    continue;
                }
                if let Ok(xi) = newton_unit_coords(&el.positions, x, d.dx) {
                    let excess = xi[0].abs().max(xi[1].abs());
                    if excess <= 1.0 + INSIDE_TOL {
                        return Some((e, xi));
                    }
                    if best.is_none_or(|(_, _, b)| excess < b) {
                        best = Some((e, xi, excess));
                    }
                }
            }
        }
        best.map(|(e, xi, _)| (e, xi))
    }

    /// Face-centered component `axis` at `x`.
    pub fn face(&self, u: &StaggeredVelocityField, seam_u: &NodeVectorField, x: Vec2, axis: usize) -> f64 {
        self.face_bounded(u, seam_u, x, axis).value
    }

    pub fn velocity(&self, u: &StaggeredVelocityField, seam_u: &NodeVectorField, x: Vec2) -> Vec2 {
        Vec2::new(self.face(u, seam_u, x, 0), self.face(u, seam_u, x, 1))
    }

    pub fn face_bounded(&self, u: &StaggeredVelocityField, seam_u: &NodeVectorField, x: Vec2, axis: usize) -> Bounded {
        let l = self.layout;
        let x = l.desc.clamp_to_domain(x);
        let lattice = match l.zone(x) {
            Zone::Static => Some((FaceFrame::Static, x)),
            Zone::Region(r) => Some((FaceFrame::Moving(r), x - l.region_offset(r))),
            Zone::Ring(_) => None,
        };
        if let Some((frame, local)) = lattice {
            if let Some(b) = self.face_bilinear(u, local, axis, frame) {
                return b;
            }
        }
        self.face_mls(u, seam_u, x, axis)
    }

    fn face_bilinear(&self, u: &StaggeredVelocityField, local: Vec2, axis: usize, frame: FaceFrame) -> Option<Bounded> {
        let l = self.layout;
        let d = &l.desc;
        let fc = d.face_counts(axis);
        let (sx, sy) = if axis == 0 { (0.0, 0.5) } else { (0.5, 0.0) };
        let fx = (local.x - d.origin[0]) / d.dx - sx;
        let fy = (local.y - d.origin[1]) / d.dx - sy;
        let (i, t) = stencil(fx, 0, fc[0] - 1);
        let (j, s) = stencil(fy, 0, fc[1] - 1);
        let faces = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)];
        if faces.iter().any(|&(fi, fj)| l.face_frame(axis, fi, fj) != frame) {
            return None;
        }
        let vals = faces.map(|(fi, fj)| u.at(axis, fi, fj));
        Some(Bounded::from_stencil(bilerp(vals, t, s), &vals))
    }

    fn face_mls(&self, u: &StaggeredVelocityField, seam_u: &NodeVectorField, x: Vec2, axis: usize) -> Bounded {
        let h = self.layout.desc.dx;
        let mut samples = Vec::with_capacity(64);
        self.gather_fvm(u, x, axis, MLS_RADIUS, &mut samples);
        self.gather_fem(seam_u, x, axis, &mut samples);
        let well_posed = samples.iter().filter(|s| s.weight > EPS_S).count();
        if well_posed < 3 {
            let before = samples.len();
            let mut wide = Vec::new();
            self.gather_fvm(u, x, axis, MLS_RADIUS + 1.0, &mut wide);
            for mut s in wide {
                let d = s.position - x;
                if d.x.abs() > MLS_RADIUS * h || d.y.abs() > MLS_RADIUS * h {
                    s.weight = EPS_S;
                    samples.push(s);
                }
            }
            debug_assert!(samples.len() >= before);
        }
        let fit = mls_fit(&samples, x, h);
        if fit.degenerate {
            self.mls_fallbacks.fetch_add(1, Ordering::Relaxed);
        }
        let vals: Vec<f64> = samples.iter().map(|s| s.value).collect();
        if vals.is_empty() {
            return Bounded {
                value: fit.value,
                lo: fit.value,
                hi: fit.value,
            };
        }
        Bounded::from_stencil(fit.value, &vals)
    }

    fn gather_fvm(&self, u: &StaggeredVelocityField, x: Vec2, axis: usize, radius: f64, out: &mut Vec<MlsSample>) {
        let l = self.layout;
        let d = &l.desc;
        let h = d.dx;
        let fc = d.face_counts(axis);
        let (sx, sy) = if axis == 0 { (0.0, 0.5) } else { (0.5, 0.0) };
        let fx = ((x.x - d.origin[0]) / h - sx).round() as i64;
        let fy = ((x.y - d.origin[1]) / h - sy).round() as i64;
        let reach = radius.ceil() as i64 + 1;
        for j in (fy - reach).max(0)..=(fy + reach).min(fc[1] as i64 - 1) {
            for i in (fx - reach).max(0)..=(fx + reach).min(fc[0] as i64 - 1) {
                let (i, j) = (i as usize, j as usize);
                if l.face_frame(axis, i, j) == FaceFrame::Seam {
                    continue;
                }
                let p = l.face_position(axis, i, j);
                let r = p - x;
                if r.x.abs() > radius * h || r.y.abs() > radius * h {
                    continue;
                }
                out.push(MlsSample {
                    position: p,
                    value: u.at(axis, i, j),
                    weight: weight_fvm(r, MLS_RADIUS * h),
                });
            }
        }
    }

    fn gather_fem(&self, seam_u: &NodeVectorField, x: Vec2, axis: usize, out: &mut Vec<MlsSample>) {
        let l = self.layout;
        if l.elements.is_empty() {
            return;
        }
        let d = &l.desc;
        let h = d.dx;
        let fp = ((x.x - d.origin[0]) / h).floor() as i64;
        let fq = ((x.y - d.origin[1]) / h).floor() as i64;
        for q in fq - 1..=fq + 1 {
            for p in fp - 1..=fp + 1 {
                if p < 0 || q < 0 || p >= d.nx() as i64 || q >= d.ny() as i64 {
                    continue;
                }
                let (p, q) = (p as usize, q as usize);
                let nodes = [(p, q), (p + 1, q), (p + 1, q + 1), (p, q + 1)];
                if nodes.iter().all(|&(a, b)| l.node_element[d.node_idx(a, b)].is_none()) {
                    continue;
                }
                let corners = nodes.map(|(a, b)| l.virtual_node_position(a, b));
                let Ok(xi) = newton_unit_coords(&corners, x, h) else {
                    continue;
                };
                if xi[0].abs() > 1.0 + INSIDE_TOL || xi[1].abs() > 1.0 + INSIDE_TOL {
                    continue;
                }
                let w = shape([xi[0].clamp(-1.0, 1.0), xi[1].clamp(-1.0, 1.0)]);
                for (k, &(a, b)) in nodes.iter().enumerate() {
                    let node = d.node_idx(a, b);
                    if l.node_element[node].is_some() {
                        out.push(MlsSample {
                            position: corners[k],
                            value: seam_u.values[node][axis],
                            weight: w[k].max(EPS_S),
                        });
                    }
                }
                return;
            }
        }
    }
}

/// Cell-centered value at `x` (bilinear or element-wise).
pub fn sample_cell_value(field: &ScalarField, layout: &HybridLayout, x: Vec2) -> f64 {
    Sampler::new(layout).cell(field, x)
}

/// Face-centered component at `x` (bilinear or MLS near seams).
pub fn sample_face_value(
    u: &StaggeredVelocityField,
    seam_u: &NodeVectorField,
    layout: &HybridLayout,
    x: Vec2,
    axis: usize,
) -> f64 {
    Sampler::new(layout).face(u, seam_u, x, axis)
}
