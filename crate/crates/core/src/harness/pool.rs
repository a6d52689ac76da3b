use std::io::Write;
use std::path::Path;

use super::{config_hash, create, write_text};
use crate::fields::{write_dump, DumpKind, GridDesc, NodeVectorField, ScalarField, StaggeredVelocityField, THETA_MIN};
use crate::mesh::{FaceFrame, HybridLayout, MovingRegion};
use crate::pressure::{
    discrete_divergence, max_liquid_speed, pressure_project, Projection, SolverMode, SolverSettings,
};
use crate::{Error, Result, Vec2};

/// One projection from rest of a still pool whose planar surface is tilted
/// by `tilt_deg`, with gravity normal to the surface. Walls stay
/// axis-aligned.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolParams {
    pub n: usize,
    pub tilt_deg: f64,
    pub mode: SolverMode,
    pub solver_tol: f64,
    /// Window offset in cells; the window covers the middle half.
    pub offset: [f64; 2],
    /// Height of the surface at `x = 0.5`.
    pub level: f64,
    pub gravity: f64,
    pub dt: f64,
}

impl PoolParams {
    pub fn new(tilt_deg: f64, mode: SolverMode) -> Self {
        PoolParams {
            n: 64,
            tilt_deg,
            mode,
            solver_tol: 1e-6,
            offset: [0.3, 0.2],
            level: 0.53,
            gravity: 100.0,
            dt: 0.01,
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "pool n={} tilt={} mode={} tol={:e} offset={:?} level={} g={} dt={}",
            self.n,
            self.tilt_deg,
            self.mode.as_str(),
            self.solver_tol,
            self.offset,
            self.level,
            self.gravity,
            self.dt
        )
    }

    /// Unit normal of the surface, pointing into the air.
    pub fn normal(&self) -> Vec2 {
        let t = self.tilt_deg.to_radians();
        Vec2::new(-t.sin(), t.cos())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoolReport {
    pub params: PoolParams,
    /// Largest liquid velocity component over `|g| dt`.
    pub max_speed: f64,
    /// Same, ignoring faces and elements that touch a liquid cell whose
    /// fraction towards some air neighbour is below `THETA_MIN`.
    pub max_speed_unclamped: f64,
    /// Number of such clamped cells.
    pub clamped_cells: usize,
    /// Largest `|div u| dx / |u*|` over liquid cells whose four neighbours
    /// are liquid.
    pub max_divergence_interior: f64,
    /// Same over every liquid cell.
    pub max_divergence_all: f64,
    pub iterations: usize,
    pub residual: f64,
    pub unknowns: usize,
    pub nnz: usize,
    pub config_hash: String,
}

pub struct PoolRun {
    pub report: PoolReport,
    pub layout: HybridLayout,
    pub phi: ScalarField,
    pub projection: Projection,
}

pub fn pool_test(params: &PoolParams) -> Result<PoolRun> {
    let n = params.n;
    let d = GridDesc::new_2d(n, n, 1.0 / n as f64, [0.0, 0.0])?;
    let mut r = MovingRegion::new([n / 4, n / 4], [3 * n / 4, 3 * n / 4], [true, true], [0.0, 0.0]);
    r.offset = [params.offset[0] * d.dx, params.offset[1] * d.dx];
    let mut layout = HybridLayout::build(d, &[r])?;

    let nrm = params.normal();
    let p0 = Vec2::new(0.5, params.level);
    let mut phi = ScalarField::new(d, 0.0);
    for c in 0..d.cell_count() {
        phi.values[c] = nrm.dot(&(layout.cell_position(c) - p0));
    }
    layout.assign_unknowns(&phi);

    let gdt = -params.gravity * params.dt * nrm;
    let mut u = StaggeredVelocityField::zeros(d);
    for axis in 0..2 {
        let fc = d.face_counts(axis);
        for j in 0..fc[1] {
            for i in 0..fc[0] {
                if !layout.is_wall_face(axis, i, j) {
                    u.set(axis, i, j, gdt[axis]);
                }
            }
        }
    }
    let mut seam = NodeVectorField::zeros(d);
    for e in &layout.elements {
        seam.values[e.node] = [gdt.x, gdt.y];
    }

    let settings = SolverSettings {
        tol: params.solver_tol,
        ..Default::default()
    };
    let proj = pressure_project(&u, &seam, &phi, &layout, params.mode, &settings)?;
    let scale = params.gravity * params.dt;
    let max_speed = max_liquid_speed(&proj.u, &proj.seam_u, &phi, &layout) / scale;
    let clamped = clamped_cells(&phi);
    let max_speed_unclamped = unclamped_speed(&proj, &phi, &layout, &clamped) / scale;

    let div = discrete_divergence(&proj.u, &proj.seam_u, &phi, &layout)?;
    let (mut interior, mut all) = (0.0f64, 0.0f64);
    for j in 0..n {
        for i in 0..n {
            let c = d.idx(i, j);
            if phi.values[c] >= 0.0 {
                continue;
            }
            let v = div.values[c].abs() * d.dx / scale;
            all = all.max(v);
            let wet = |a: i64, b: i64| {
                a < 0 || b < 0 || a >= n as i64 || b >= n as i64 || phi.values[d.idx(a as usize, b as usize)] < 0.0
            };
            let (ii, jj) = (i as i64, j as i64);
            if wet(ii - 1, jj) && wet(ii + 1, jj) && wet(ii, jj - 1) && wet(ii, jj + 1) {
                interior = interior.max(v);
            }
        }
    }

    let report = PoolReport {
        params: params.clone(),
        max_speed,
        max_speed_unclamped,
        clamped_cells: clamped.iter().filter(|c| **c).count(),
        max_divergence_interior: interior,
        max_divergence_all: all,
        iterations: proj.stats.iterations,
        residual: proj.stats.residual,
        unknowns: proj.stats.n,
        nnz: proj.stats.nnz,
        config_hash: config_hash(&params.describe()),
    };
    Ok(PoolRun {
        report,
        layout,
        phi,
        projection: proj,
    })
}

/// Liquid cells where the ghost-fluid fraction hits the clamp.
fn clamped_cells(phi: &ScalarField) -> Vec<bool> {
    let d = phi.desc;
    let (nx, ny) = (d.counts[0] as i64, d.counts[1] as i64);
    let mut out = vec![false; d.cell_count()];
    for j in 0..ny {
        for i in 0..nx {
            let pl = phi.values[d.idx(i as usize, j as usize)];
            if pl >= 0.0 {
                continue;
            }
            for (a, b) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
                if a < 0 || b < 0 || a >= nx || b >= ny {
                    continue;
                }
                let pa = phi.values[d.idx(a as usize, b as usize)];
                if pa >= 0.0 && pl / (pl - pa) < THETA_MIN {
                    out[d.idx(i as usize, j as usize)] = true;
                }
            }
        }
    }
    out
}

fn unclamped_speed(proj: &Projection, phi: &ScalarField, layout: &HybridLayout, clamped: &[bool]) -> f64 {
    let d = layout.desc;
    let wet = |c: Option<usize>| c.is_some_and(|c| phi.values[c] < 0.0);
    let hit = |c: Option<usize>| c.is_some_and(|c| clamped[c]);
    let mut m = 0.0f64;
    for axis in 0..2 {
        let fc = d.face_counts(axis);
        for j in 0..fc[1] {
            for i in 0..fc[0] {
                let (a, b) = layout.face_cells(axis, i, j);
                let skip = layout.is_wall_face(axis, i, j)
                    || layout.face_frame(axis, i, j) == FaceFrame::Seam
                    || hit(a)
                    || hit(b);
                if (wet(a) || wet(b)) && !skip {
                    m = m.max(proj.u.at(axis, i, j).abs());
                }
            }
        }
    }
    for e in &layout.elements {
        if e.cells.iter().any(|&c| phi.values[c] < 0.0) && !e.cells.iter().any(|&c| clamped[c]) {
            let v = proj.seam_u.values[e.node];
            m = m.max(v[0].abs()).max(v[1].abs());
        }
    }
    m
}

pub const POOL_CSV_HEADER: &str =
    "tilt_deg,mode,max_speed_over_g_dt,max_speed_unclamped,clamped_cells,max_div_interior,max_div_all,iterations,residual,unknowns,nnz,config_hash";

impl PoolReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6e},{:.6e},{},{:.6e},{:.6e},{},{:.3e},{},{},{}",
            self.params.tilt_deg,
            self.params.mode.as_str(),
            self.max_speed,
            self.max_speed_unclamped,
            self.clamped_cells,
            self.max_divergence_interior,
            self.max_divergence_all,
            self.iterations,
            self.residual,
            self.unknowns,
            self.nnz,
            self.config_hash
        )
    }
}

/// Writes `pool.csv` and, per run, the level set and projected face
/// velocities as field dumps.
pub fn write_pool_outputs(dir: &Path, runs: &[PoolRun]) -> Result<()> {
    let mut csv = format!("{POOL_CSV_HEADER}\n");
    for r in runs {
        csv.push_str(&r.report.csv_row());
        csv.push('\n');
        let stem = format!("pool_{}_{}", r.report.params.tilt_deg, r.report.params.mode.as_str());
        let d = r.layout.desc;
        let fields: [(&str, DumpKind, &[f64]); 3] = [
            ("phi", DumpKind::Cell, &r.phi.values),
            ("u", DumpKind::FaceX, &r.projection.u.faces[0]),
            ("v", DumpKind::FaceY, &r.projection.u.faces[1]),
        ];
        for (name, kind, values) in fields {
            let path = dir.join(format!("{stem}_{name}.hfd"));
            let mut w = create(&path)?;
            write_dump(&mut w, &d, kind, values)?;
            w.flush()
                .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        }
    }
    write_text(&dir.join("pool.csv"), &csv)
}
