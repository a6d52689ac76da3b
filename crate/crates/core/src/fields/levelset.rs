use super::ScalarField;
use crate::interp::Sampler;
use crate::mesh::HybridLayout;
use crate::Vec2;

/// A cell-centered signed distance, negative in the liquid.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSet {
    pub phi: ScalarField,
}

impl LevelSet {
    /// Samples `f` at every stored cell position of `layout` (displaced
    /// inside windows).
    pub fn from_fn(layout: &HybridLayout, f: impl Fn(Vec2) -> f64) -> Self {
        let d = layout.desc;
        let mut phi = ScalarField::new(d, 0.0);
        for c in 0..d.cell_count() {
            phi.values[c] = f(layout.cell_position(c));
        }
        LevelSet { phi }
    }

    pub fn is_liquid(&self, cell: usize) -> bool {
        self.phi.values[cell] < 0.0
    }

    pub fn liquid_count(&self) -> usize {
        self.phi.values.iter().filter(|v| **v < 0.0).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReinitParams {
    pub iterations: usize,
    /// Pseudo-time step as a fraction of `dx`.
    pub dtau_factor: f64,
    /// Cells farther than `band * dx` from the interface are left untouched.
    pub band: f64,
}

impl Default for ReinitParams {
    fn default() -> Self {
        ReinitParams {
            iterations: 10,
            dtau_factor: 0.5,
            band: 5.0,
        }
    }
}

/// Axis neighbour values of every active cell: `[x-, x+, y-, y+]` one cell
/// away, then the same two cells away. Samples are taken at `position ± k dx`
/// so that cells near a seam see neighbours in their own frame; outside the
/// grid the profile is extended linearly.
fn neighbours(phi: &ScalarField, layout: &HybridLayout, sampler: &Sampler, active: &[bool]) -> Vec<[f64; 8]> {
    use crate::mesh::CellLabel;
    let d = &layout.desc;
    let h = d.dx;
    let (nx, ny) = (d.nx() as i64, d.ny() as i64);
    let dirs = [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)];
    let mut out = vec![[0.0; 8]; d.cell_count()];
    for j in 0..ny {
        for i in 0..nx {
            let c = d.idx(i as usize, j as usize);
            if !active[c] {
                continue;
            }
            let own = layout.cell_region[c];
            let plain = |n: usize| layout.cell_region[n] == own && !matches!(layout.labels[n], CellLabel::FemBand);
            let p = layout.node_position(i as usize, j as usize);
            let v = phi.values[c];
            let fetch = |(di, dj): (i64, i64), k: i64| -> Option<f64> {
                let (a, b) = (i + k * di, j + k * dj);
                if a < 0 || b < 0 || a >= nx || b >= ny {
                    return None;
                }
                let direct = plain(c) && (1..=k).all(|s| plain(d.idx((i + s * di) as usize, (j + s * dj) as usize)));
                Some(if direct {
                    phi.values[d.idx(a as usize, b as usize)]
                } else {
                    sampler.cell(phi, p + Vec2::new((k * di) as f64 * h, (k * dj) as f64 * h))
                })
            };
            for (m, &dir) in dirs.iter().enumerate() {
                let back = || {
                    let o = fetch(dirs[m ^ 1], 1).expect("grid has at least two cells per axis");
                    v - o
                };
                let one = fetch(dir, 1);
                out[c][m] = one.unwrap_or_else(|| v + back());
                out[c][m + 4] = match (one, fetch(dir, 2)) {
                    (_, Some(w)) => w,
                    (Some(w), None) => 2.0 * w - v,
                    (None, None) => v + 2.0 * back(),
                };
            }
        }
    }
    out
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Interface cells whose estimated slope is within this of 1 are left as is.
pub const SLOPE_TOLERANCE: f64 = 0.1;

/// Redistances `phi` towards `|grad phi| = 1`: second-order ENO upwind
/// differences away from the front, and the sub-cell fix of Russo and
/// Smereka for cells next to a sign change.
pub fn reinitialize(phi: &mut ScalarField, layout: &HybridLayout, params: &ReinitParams) {
    let d = layout.desc;
    let h = d.dx;
    let dtau = params.dtau_factor * h;
    let phi0 = phi.clone();
    let sampler = Sampler::new(layout);
    let active: Vec<bool> = phi0.values.iter().map(|v| v.abs() < params.band * h).collect();
    let nb0 = neighbours(&phi0, layout, &sampler, &active);

    // Interface cells: sign change to an axis neighbour. Their update pulls
    // towards the distance estimate from the initial slope.
    let mut interface_dist = vec![None; d.cell_count()];
    for c in 0..d.cell_count() {
        if !active[c] {
            continue;
        }
        let v = phi0.values[c];
        let n = nb0[c];
        if n[..4].iter().any(|w| w * v <= 0.0 && *w != v) {
            let (mut central, mut widest) = (0.0, 0.0);
            for a in 0..2 {
                let (lo, hi) = (n[2 * a], n[2 * a + 1]);
                let s = ((hi - lo) * 0.5).abs();
                central += s * s;
                let w = s.max((hi - v).abs()).max((v - lo).abs());
                widest += w * w;
            }
            let (central, widest) = (f64::sqrt(central), f64::sqrt(widest));
            // the one-sided maximum guards against kinks but overestimates
            // the slope on curved fronts
            let g = if central > 0.5 * widest { central } else { widest }.max(1e-12 * h) / h;
            // fronts that are already close to unit slope keep their values;
            // re-estimating them every call makes the interface creep
            interface_dist[c] = Some(if (g - 1.0).abs() <= SLOPE_TOLERANCE { v } else { v / g });
        }
    }

    for _ in 0..params.iterations {
        let nb = neighbours(phi, layout, &sampler, &active);
        let mut next = phi.values.clone();
        for c in 0..d.cell_count() {
            if !active[c] {
                continue;
            }
            let v = phi.values[c];
            let s0 = phi0.values[c];
            let sgn = if s0 > 0.0 {
                1.0
            } else if s0 < 0.0 {
                -1.0
            } else {
                0.0
            };
            if let Some(dist) = interface_dist[c] {
                next[c] = v - dtau / h * (sgn * v.abs() - dist);
                continue;
            }
            let n = nb[c];
            let mut g2 = 0.0;
            for a in 0..2 {
                // second-order ENO one-sided differences
                let (m1, p1, m2, p2) = (n[2 * a], n[2 * a + 1], n[2 * a + 4], n[2 * a + 5]);
                let dd = (p1 - 2.0 * v + m1) / h;
                let dm = (v - m1) / h + 0.5 * minmod(dd, (v - 2.0 * m1 + m2) / h);
                let dp = (p1 - v) / h - 0.5 * minmod(dd, (p2 - 2.0 * p1 + v) / h);
                let t = if sgn > 0.0 {
                    dm.max(0.0).powi(2).max(dp.min(0.0).powi(2))
                } else {
                    dm.min(0.0).powi(2).max(dp.max(0.0).powi(2))
                };
                g2 += t;
            }
            next[c] = v - dtau * sgn * (g2.sqrt() - 1.0);
        }
        phi.values = next;
    }
}
