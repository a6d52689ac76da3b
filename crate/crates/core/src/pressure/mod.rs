//! Hybrid pressure projection.
//!
//! The unknown is the scaled pressure `p~ = dt p / rho` (rho = 1) at liquid
//! cells. Finite-volume rows come from the clipped face control volumes;
//! seam elements add Galerkin stiffness rows. Air values are eliminated with
//! ghost values so that the free surface is second-order accurate.

mod sparse;

use rayon::prelude::*;

use crate::fields::{ghost_fluid_factor, NodeVectorField, ScalarField, StaggeredVelocityField, THETA_MIN};
use crate::mesh::{Element, FaceFrame, HybridLayout};
use crate::{Error, Result, Vec2};

pub use sparse::{bicgstab, pcg, CsrMatrix, Ilu0, KrylovStats, Preconditioner, ResidualNorm, SolverSettings};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum SolverMode {
    /// Air pressure is zero at air cell centers; symmetric.
    #[serde(rename = "first")]
    FirstOrder,
    /// Ghost-fluid free surface in both discretizations; the seam part is
    /// nonsymmetric.
    #[serde(rename = "full2")]
    FullSecondOrder,
    /// The second-order matrix replaced by its symmetric part.
    #[serde(rename = "spd")]
    SpdProjected,
}

impl SolverMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverMode::FirstOrder => "first",
            SolverMode::FullSecondOrder => "full2",
            SolverMode::SpdProjected => "spd",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "first" => Some(SolverMode::FirstOrder),
            "full2" => Some(SolverMode::FullSecondOrder),
            "spd" => Some(SolverMode::SpdProjected),
            _ => None,
        }
    }

    fn second_order(self) -> bool {
        self != SolverMode::FirstOrder
    }
}

/// Unmerged triplets and right-hand side over the global unknowns.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PartialSystem {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub mode: SolverMode,
}

impl SparseSystem {
    pub fn n(&self) -> usize {
        self.matrix.n
    }
}

/// Scaled pressure per cell; zero in air.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledPressure {
    pub values: ScalarField,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
    pub n: usize,
    pub nnz: usize,
    pub mode: SolverMode,
}

fn check_unknowns(phi: &ScalarField, layout: &HybridLayout) -> Result<()> {
    let liquid = phi.values.iter().filter(|v| **v < 0.0).count();
    let consistent = liquid == layout.n_unknowns
        && phi
            .values
            .iter()
            .zip(&layout.pressure_index)
            .all(|(v, idx)| (*v < 0.0) == idx.is_some());
    if consistent {
        Ok(())
    } else {
        Err(Error::InvalidGrid(
            "pressure unknowns were not assigned for this level set".into(),
        ))
    }
}

/// Per-face coefficient data for the finite-volume part: the face's
/// liquid/air classification and its free-surface factor.
enum FaceKind {
    Skip,
    LiquidLiquid(usize, usize),
    /// Liquid cell below (`true`) or above the face, with factor `F`.
    Surface {
        liquid: usize,
        lower: bool,
        factor: f64,
    },
}

fn classify_face(
    phi: &ScalarField,
    layout: &HybridLayout,
    mode: SolverMode,
    axis: usize,
    i: usize,
    j: usize,
) -> FaceKind {
    if layout.face_frame(axis, i, j) == FaceFrame::Seam || layout.is_wall_face(axis, i, j) {
        return FaceKind::Skip;
    }
    let (Some(lo), Some(hi)) = layout.face_cells(axis, i, j) else {
        return FaceKind::Skip;
    };
    let (pl, ph) = (phi.values[lo], phi.values[hi]);
    match (pl < 0.0, ph < 0.0) {
        (true, true) => FaceKind::LiquidLiquid(lo, hi),
        (false, false) => FaceKind::Skip,
        (true, false) | (false, true) => {
            let (liquid, lower, pliq, pair) = if pl < 0.0 {
                (lo, true, pl, ph)
            } else {
                (hi, false, ph, pl)
            };
            let factor = if mode.second_order() {
                ghost_fluid_factor(pliq, pair, THETA_MIN).expect("liquid side has phi < 0")
            } else {
                1.0
            };
            FaceKind::Surface { liquid, lower, factor }
        }
    }
}

/// Finite-volume rows: per face, `V_f A_f F_f / dx^2` couplings and
/// `V_f A_f u*_f / dx` fluxes. Interior faces are fully open (`A_f = 1`);
/// walls and seam faces contribute nothing.
pub fn assemble_fvm(
    u_star: &StaggeredVelocityField,
    phi: &ScalarField,
    layout: &HybridLayout,
    mode: SolverMode,
) -> Result<PartialSystem> {
    layout.desc.require_2d()?;
    check_unknowns(phi, layout)?;
    let d = &layout.desc;
    let h = d.dx;
    let idx = |c: usize| layout.pressure_index[c].expect("liquid cell has an unknown");
    let mut sys = PartialSystem {
        n: layout.n_unknowns,
        entries: Vec::new(),
        rhs: vec![0.0; layout.n_unknowns],
    };
    for axis in 0..2 {
        let fc = d.face_counts(axis);
        for j in 0..fc[1] {
            for i in 0..fc[0] {
                let vol = layout.face_volume[axis][d.face_index(axis, i, j, 0)];
                if vol == 0.0 {
                    continue;
                }
                let coef = vol / (h * h);
                let flux = vol * u_star.at(axis, i, j) / h;
                match classify_face(phi, layout, mode, axis, i, j) {
                    FaceKind::Skip => {}
                    FaceKind::LiquidLiquid(lo, hi) => {
                        let (a, b) = (idx(lo), idx(hi));
                        sys.entries.push((a, a, coef));
                        sys.entries.push((b, b, coef));
                        sys.entries.push((a, b, -coef));
                        sys.entries.push((b, a, -coef));
                        sys.rhs[a] -= flux;
                        sys.rhs[b] += flux;
                    }
                    FaceKind::Surface { liquid, lower, factor } => {
                        let a = idx(liquid);
                        sys.entries.push((a, a, coef * factor));
                        if lower {
                            sys.rhs[a] -= flux;
                        } else {
                            sys.rhs[a] += flux;
                        }
                    }
                }
            }
        }
    }
    Ok(sys)
}

/// For each node of an element, its value as a combination of liquid node
/// values: itself if liquid; otherwise the ghost extrapolation
/// `p_k = mean_l p_l (1 - 1/theta_kl)` over edge-adjacent liquid nodes (the
/// diagonal node if no edge neighbour is liquid). First-order mode uses
/// `p_k = 0`.
fn node_combinations(e: &Element, phi: &ScalarField, mode: SolverMode) -> [Vec<(usize, f64)>; 4] {
    let vals = e.cells.map(|c| phi.values[c]);
    let mut out: [Vec<(usize, f64)>; 4] = Default::default();
    for k in 0..4 {
        if vals[k] < 0.0 {
            out[k].push((k, 1.0));
            continue;
        }
        if !mode.second_order() {
            continue;
        }
        let mut partners: Vec<usize> = [(k + 1) % 4, (k + 3) % 4]
            .into_iter()
            .filter(|&l| vals[l] < 0.0)
            .collect();
        if partners.is_empty() && vals[(k + 2) % 4] < 0.0 {
            partners.push((k + 2) % 4);
        }
        let m = partners.len() as f64;
        for l in partners {
            let theta = (vals[l] / (vals[l] - vals[k])).max(THETA_MIN);
            out[k].push((l, (1.0 - 1.0 / theta) / m));
        }
    }
    out
}

type ElementRows = (Vec<(usize, usize, f64)>, Vec<(usize, f64)>);

fn element_rows(
    e: &Element,
    phi: &ScalarField,
    layout: &HybridLayout,
    ue: [f64; 2],
    mode: SolverMode,
) -> Result<ElementRows> {
    let k = e.stiffness();
    let g = e.gradient_moments();
    if k.iter().flatten().any(|v| !v.is_finite()) || g.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
        return Err(Error::NonFiniteElement { node: e.node });
    }
    let combos = node_combinations(e, phi, mode);
    let ids = e.cells.map(|c| layout.pressure_index[c]);
    let u = Vec2::new(ue[0], ue[1]);
    let mut entries = Vec::with_capacity(16);
    let mut rhs = Vec::with_capacity(4);
    for a in 0..4 {
        let Some(row) = ids[a] else { continue };
        for b in 0..4 {
            for &(l, w) in &combos[b] {
                let col = ids[l].expect("combinations reference liquid nodes");
                entries.push((row, col, k[a][b] * w));
            }
        }
        rhs.push((row, g[a].dot(&u)));
    }
    Ok((entries, rhs))
}

/// Galerkin rows of the seam band: `K_e = sum_q w |J| B_q^T B_q` with air
/// nodes eliminated by ghost values, and `rhs_e = sum_q w |J| B_q^T u_e`
/// using the element's velocity.
pub fn assemble_fem(
    seam_u_star: &NodeVectorField,
    phi: &ScalarField,
    layout: &HybridLayout,
    mode: SolverMode,
) -> Result<PartialSystem> {
    layout.desc.require_2d()?;
    check_unknowns(phi, layout)?;
    let wet = layout.wet_elements(phi);
    let parts: Vec<Result<ElementRows>> = wet
        .par_iter()
        .map(|e| element_rows(e, phi, layout, seam_u_star.values[e.node], mode))
        .collect();
    let mut sys = PartialSystem {
        n: layout.n_unknowns,
        entries: Vec::new(),
        rhs: vec![0.0; layout.n_unknowns],
    };
    for part in parts {
        let (entries, rhs) = part?;
        sys.entries.extend(entries);
        for (r, v) in rhs {
            sys.rhs[r] += v;
        }
    }
    Ok(sys)
}

/// Concatenates both parts, merges duplicate coordinates and, in
/// `SpdProjected` mode, symmetrizes. Rows without any coupling (a liquid
/// cell with no open face and no wet element) are pinned to zero.
pub fn merge_systems(
    fvm: PartialSystem,
    fem: PartialSystem,
    layout: &HybridLayout,
    mode: SolverMode,
) -> Result<SparseSystem> {
    let n = layout.n_unknowns;
    if fvm.n != n || fem.n != n {
        return Err(Error::IndexOutOfRange {
            row: fvm.n.max(fem.n),
            col: 0,
            n,
        });
    }
    let mut entries = fvm.entries;
    entries.extend(fem.entries);
    let mut rhs = fvm.rhs;
    for (a, b) in rhs.iter_mut().zip(&fem.rhs) {
        *a += b;
    }
    let mut matrix = CsrMatrix::from_triplets(n, entries)?;
    let diag = matrix.diagonal();
    let pinned: Vec<usize> = (0..n).filter(|&r| !(diag[r] > 0.0)).collect();
    if !pinned.is_empty() {
        let mut t = Vec::with_capacity(matrix.nnz() + pinned.len());
        for r in 0..n {
            for (c, v) in matrix.row(r) {
                if pinned.binary_search(&r).is_err() && pinned.binary_search(&c).is_err() {
                    t.push((r, c, v));
                }
            }
        }
        for &r in &pinned {
            t.push((r, r, 1.0));
            rhs[r] = 0.0;
        }
        matrix = CsrMatrix::from_triplets(n, t)?;
    }
    if mode == SolverMode::SpdProjected {
        matrix = matrix.symmetrized();
    }
    Ok(SparseSystem { matrix, rhs, mode })
}

/// Solves for the scaled pressure: conjugate gradients for the symmetric
/// modes, BiCGSTAB for the full second-order system.
pub fn solve(
    system: &SparseSystem,
    phi: &ScalarField,
    layout: &HybridLayout,
    settings: &SolverSettings,
) -> Result<(ScaledPressure, SolveStats)> {
    let (x, st) = match system.mode {
        SolverMode::FirstOrder | SolverMode::SpdProjected => pcg(&system.matrix, &system.rhs, settings)?,
        SolverMode::FullSecondOrder => bicgstab(&system.matrix, &system.rhs, settings)?,
    };
    let mut values = ScalarField::new(phi.desc, 0.0);
    for (c, slot) in layout.pressure_index.iter().enumerate() {
        if let Some(k) = slot {
            values.values[c] = x[*k];
        }
    }
    Ok((
        ScaledPressure { values },
        SolveStats {
            iterations: st.iterations,
            residual: st.residual,
            n: system.n(),
            nnz: system.matrix.nnz(),
            mode: system.mode,
        },
    ))
}

/// Subtracts the pressure gradient. Finite-volume faces use the two-point
/// difference with the ghost factor at the surface; each seam element
/// subtracts its `|J|`-weighted mean quadrature gradient. Walls are set to
/// zero; faces with two air cells and seam faces are left unchanged.
pub fn project_velocity(
    u_star: &StaggeredVelocityField,
    seam_u_star: &NodeVectorField,
    p: &ScaledPressure,
    phi: &ScalarField,
    layout: &HybridLayout,
    mode: SolverMode,
) -> (StaggeredVelocityField, NodeVectorField) {
    let d = &layout.desc;
    let h = d.dx;
    let pv = &p.values.values;
    let mut u = u_star.clone();
    for axis in 0..2 {
        let fc = d.face_counts(axis);
        for j in 0..fc[1] {
            for i in 0..fc[0] {
                if layout.is_wall_face(axis, i, j) {
                    u.set(axis, i, j, 0.0);
                    continue;
                }
                let grad = match classify_face(phi, layout, mode, axis, i, j) {
                    FaceKind::Skip => continue,
                    FaceKind::LiquidLiquid(lo, hi) => (pv[hi] - pv[lo]) / h,
                    FaceKind::Surface { liquid, lower, factor } => {
                        // (ghost - p_liquid) = -factor * p_liquid
                        let jump = factor * pv[liquid];
                        if lower {
                            -jump / h
                        } else {
                            jump / h
                        }
                    }
                };
                u.set(axis, i, j, u_star.at(axis, i, j) - grad);
            }
        }
    }
    let mut seam = seam_u_star.clone();
    for e in layout.wet_elements(phi) {
        let g = element_mean_gradient(e, phi, pv, mode);
        let v = &mut seam.values[e.node];
        v[0] -= g.x;
        v[1] -= g.y;
    }
    (u, seam)
}

/// `|J|`-weighted mean of the pressure gradient over an element's Gauss
/// points, with air nodes at their ghost values.
pub fn element_mean_gradient(e: &Element, phi: &ScalarField, p: &[f64], mode: SolverMode) -> Vec2 {
    let combos = node_combinations(e, phi, mode);
    let nodal: [f64; 4] = std::array::from_fn(|k| combos[k].iter().map(|&(l, w)| w * p[e.cells[l]]).sum());
    let mut g = Vec2::zeros();
    let mut vol = 0.0;
    for q in &e.quad {
        let s = q.weight * q.det_j;
        for k in 0..4 {
            g += q.grad[k] * (s * nodal[k]);
        }
        vol += s;
    }
    g / vol
}

/// Flux balance per liquid cell divided by its volume (clipped control
/// volume plus its share of wet seam elements). Air cells get zero.
pub fn discrete_divergence(
    u: &StaggeredVelocityField,
    seam_u: &NodeVectorField,
    phi: &ScalarField,
    layout: &HybridLayout,
) -> Result<ScalarField> {
    let fvm = assemble_fvm(u, phi, layout, SolverMode::FirstOrder)?;
    let fem = assemble_fem(seam_u, phi, layout, SolverMode::FirstOrder)?;
    let mut vol = layout.control_volume.clone();
    for e in layout.wet_elements(phi) {
        for q in &e.quad {
            let n = crate::mesh::shape(q.xi);
            for k in 0..4 {
                vol[e.cells[k]] += q.weight * q.det_j * n[k];
            }
        }
    }
    let mut div = ScalarField::new(phi.desc, 0.0);
    for (c, slot) in layout.pressure_index.iter().enumerate() {
        if let Some(k) = slot {
            let b = fvm.rhs[*k] + fem.rhs[*k];
            div.values[c] = if vol[c] > 0.0 { -b / vol[c] } else { 0.0 };
        }
    }
    Ok(div)
}

/// Largest velocity component on finite-volume faces touching liquid and
/// on elements with a liquid node. Pure-air values are overwritten by
/// extrapolation, and seam faces are represented by the elements, so
/// neither counts.
pub fn max_liquid_speed(
    u: &StaggeredVelocityField,
    seam_u: &NodeVectorField,
    phi: &ScalarField,
    layout: &HybridLayout,
) -> f64 {
    let d = layout.desc;
    let wet = |c: Option<usize>| c.is_some_and(|c| phi.values[c] < 0.0);
    let mut m = 0.0f64;
    for axis in 0..2 {
        let fc = d.face_counts(axis);
        for j in 0..fc[1] {
            for i in 0..fc[0] {
                let (a, b) = layout.face_cells(axis, i, j);
                let skip = layout.is_wall_face(axis, i, j) || layout.face_frame(axis, i, j) == FaceFrame::Seam;
                if (wet(a) || wet(b)) && !skip {
                    m = m.max(u.at(axis, i, j).abs());
                }
            }
        }
    }
    for e in &layout.elements {
        if e.cells.iter().any(|&c| phi.values[c] < 0.0) {
            let v = seam_u.values[e.node];
            m = m.max(v[0].abs()).max(v[1].abs());
        }
    }
    m
}

/// Result of one full projection.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub u: StaggeredVelocityField,
    pub seam_u: NodeVectorField,
    pub pressure: ScaledPressure,
    pub stats: SolveStats,
}

/// Assemble, merge, solve and project. `layout` must have unknowns assigned
/// for `phi`.
pub fn pressure_project(
    u_star: &StaggeredVelocityField,
    seam_u_star: &NodeVectorField,
    phi: &ScalarField,
    layout: &HybridLayout,
    mode: SolverMode,
    settings: &SolverSettings,
) -> Result<Projection> {
    let fvm = assemble_fvm(u_star, phi, layout, mode)?;
    let fem = assemble_fem(seam_u_star, phi, layout, mode)?;
    let system = merge_systems(fvm, fem, layout, mode)?;
    let (pressure, stats) = solve(&system, phi, layout, settings)?;
    let (u, seam_u) = project_velocity(u_star, seam_u_star, &pressure, phi, layout, mode);
    Ok(Projection {
        u,
        seam_u,
        pressure,
        stats,
    })
}

#[cfg(test)]
mod tests;
