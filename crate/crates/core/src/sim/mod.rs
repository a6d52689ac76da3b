//! Simulation state and the per-step pipeline.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub use config::{BacktraceName, GridConfig, LiquidShape, PreconditionerName, RegionConfig, SceneConfig, Tolerances};

use crate::fields::{
    cfl_time_step, reinitialize, write_dump, DtLimits, DumpKind, LevelSet, NodeVectorField, ReinitParams, ScalarField,
    StaggeredVelocityField,
};
use crate::mesh::{update_region_position, update_region_velocity, HybridLayout, MovingRegion};
use crate::pressure::{max_liquid_speed, pressure_project, SolveStats, SolverMode};
use crate::transport::{advect_levelset, advect_velocity, extrapolate_velocity, Flow};
use crate::{Error, Result};

/// Pipeline stages in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    ComputeTimeStep,
    ExtrapolateVelocity,
    UpdateRegionPositions,
    AdvectLevelSet,
    AdvectVelocity,
    Reinitialize,
    PressureProject,
    UpdateRegionVelocities,
}

#[derive(Clone, Debug)]
pub struct SimState {
    pub phi: ScalarField,
    pub u: StaggeredVelocityField,
    /// Element velocities, stored at each element's node.
    pub seam_u: NodeVectorField,
    pub regions: Vec<MovingRegion>,
    /// Regions that hit the domain margin; they stay put from then on.
    pub frozen: Vec<bool>,
    pub layout: HybridLayout,
    pub time: f64,
    pub step: usize,
}

#[derive(Clone, Debug)]
pub struct StepReport {
    pub dt: f64,
    pub stats: Option<SolveStats>,
    pub trace: Vec<Stage>,
    /// Human-readable notes, e.g. regions frozen this step.
    pub notes: Vec<String>,
}

impl SimState {
    pub fn initial(config: &SceneConfig) -> Result<Self> {
        config.validate()?;
        let desc = config.desc()?;
        let regions: Vec<MovingRegion> = config.regions.iter().map(RegionConfig::to_region).collect();
        let layout = HybridLayout::build(desc, &regions)?;
        let phi = LevelSet::from_fn(&layout, |x| config.initial_phi(x)).phi;
        Ok(SimState {
            phi,
            u: StaggeredVelocityField::zeros(desc),
            seam_u: NodeVectorField::zeros(desc),
            frozen: vec![false; regions.len()],
            regions,
            layout,
            time: 0.0,
            step: 0,
        })
    }

    /// See [`max_liquid_speed`].
    pub fn max_speed(&self) -> f64 {
        max_liquid_speed(&self.u, &self.seam_u, &self.phi, &self.layout)
    }

    pub fn liquid_cells(&self) -> usize {
        self.phi.values.iter().filter(|v| **v < 0.0).count()
    }
}

/// Advances one step of at most `max_dt`. The input state is never
/// modified, so a failed step leaves it intact.
pub fn step(state: &SimState, config: &SceneConfig, max_dt: f64) -> Result<(SimState, StepReport)> {
    let mut trace = Vec::with_capacity(8);
    let mut notes = Vec::new();
    let desc = state.layout.desc;

    trace.push(Stage::ComputeTimeStep);
    let limits = DtLimits::for_frame(desc.dx, config.frame_interval);
    let dt = cfl_time_step(
        &state.u,
        Some(&state.seam_u),
        &state.layout,
        config.cfl,
        limits,
        Some(&state.phi),
    )
    .min(max_dt);

    trace.push(Stage::ExtrapolateVelocity);
    let mut u = state.u.clone();
    let mut seam_u = state.seam_u.clone();
    extrapolate_velocity(
        &mut u,
        &mut seam_u,
        &state.phi,
        &state.layout,
        config.tolerances.extrapolation_layers,
    );

    trace.push(Stage::UpdateRegionPositions);
    let mut regions = state.regions.clone();
    let mut frozen = state.frozen.clone();
    for (k, r) in regions.iter_mut().enumerate() {
        if frozen[k] {
            continue;
        }
        match update_region_position(r, dt, &desc, k) {
            Ok((next, _)) => *r = next,
            Err(Error::RegionOutOfBounds { index, shift }) => {
                frozen[k] = true;
                r.u_g = [0.0, 0.0];
                notes.push(format!(
                    "region {index} frozen at step {}: shift {shift:?} leaves the valid margin",
                    state.step
                ));
            }
            Err(e) => return Err(e),
        }
    }
    let mut layout = HybridLayout::build(desc, &regions)?;

    let flow = Flow {
        layout: &state.layout,
        u: &u,
        seam_u: &seam_u,
    };
    trace.push(Stage::AdvectLevelSet);
    let mut phi = advect_levelset(&state.phi, flow, &layout, dt, config.backtrace());
    trace.push(Stage::AdvectVelocity);
    let (mut u_star, mut seam_star) = advect_velocity(flow, &layout, dt, config.backtrace());

    trace.push(Stage::Reinitialize);
    reinitialize(
        &mut phi,
        &layout,
        &ReinitParams {
            iterations: config.tolerances.reinit_iterations,
            ..Default::default()
        },
    );

    trace.push(Stage::PressureProject);
    let g = config.gravity();
    for axis in 0..2 {
        let fc = desc.face_counts(axis);
        for j in 0..fc[1] {
            for i in 0..fc[0] {
                if !layout.is_wall_face(axis, i, j) {
                    let v = u_star.at(axis, i, j) + g[axis] * dt;
                    u_star.set(axis, i, j, v);
                }
            }
        }
    }
    for e in &layout.elements {
        let v = &mut seam_star.values[e.node];
        v[0] += g.x * dt;
        v[1] += g.y * dt;
    }
    layout.assign_unknowns(&phi);
    let (u_new, seam_new, stats) = if layout.n_unknowns == 0 {
        (u_star, seam_star, None)
    } else {
        let p = pressure_project(
            &u_star,
            &seam_star,
            &phi,
            &layout,
            config.mode,
            &config.solver_settings(),
        )?;
        (p.u, p.seam_u, Some(p.stats))
    };

    trace.push(Stage::UpdateRegionVelocities);
    for (k, r) in regions.iter_mut().enumerate() {
        if !frozen[k] {
            *r = update_region_velocity(r, &u_new, &phi);
        }
    }
    // keep the layout's copy of the grid velocities in sync
    layout.regions = regions.clone();

    let next = SimState {
        phi,
        u: u_new,
        seam_u: seam_new,
        regions,
        frozen,
        layout,
        time: state.time + dt,
        step: state.step + 1,
    };
    Ok((
        next,
        StepReport {
            dt,
            stats,
            trace,
            notes,
        },
    ))
}

/// One row of the per-step diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub iterations: usize,
    pub residual: f64,
    pub n: usize,
    pub nnz: usize,
    pub mode: SolverMode,
    pub max_speed: f64,
    pub liquid_cells: usize,
}

pub const DIAGNOSTICS_HEADER: &str = "step,time,dt,iterations,residual,n,nnz,mode,max_speed,liquid_cells";

impl Diagnostics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.9e},{:.9e},{},{:.6e},{},{},{},{:.6e},{}",
            self.step,
            self.time,
            self.dt,
            self.iterations,
            self.residual,
            self.n,
            self.nnz,
            self.mode.as_str(),
            self.max_speed,
            self.liquid_cells
        )
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub state: SimState,
    pub diagnostics: Vec<Diagnostics>,
    pub notes: Vec<String>,
    pub config_hash: String,
    pub dumps: Vec<PathBuf>,
}

fn write_frame(dir: &Path, frame: usize, state: &SimState) -> Result<Vec<PathBuf>> {
    let d = state.layout.desc;
    let fields: [(&str, DumpKind, &[f64]); 3] = [
        ("phi", DumpKind::Cell, &state.phi.values),
        ("u", DumpKind::FaceX, &state.u.faces[0]),
        ("v", DumpKind::FaceY, &state.u.faces[1]),
    ];
    let mut out = Vec::new();
    for (name, kind, values) in fields {
        let path = dir.join(format!("frame_{frame:04}_{name}.hfd"));
        let f = File::create(&path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        let mut w = BufWriter::new(f);
        write_dump(&mut w, &d, kind, values)?;
        w.flush()
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        out.push(path);
    }
    Ok(out)
}

/// Runs `config.frames` frames. With `out_dir`, writes field dumps for the
/// initial state and every frame, `diagnostics.csv` and `manifest.txt`.
pub fn run(config: &SceneConfig, out_dir: Option<&Path>) -> Result<RunOutput> {
    let mut state = SimState::initial(config)?;
    let hash = config.hash();
    let mut dumps = Vec::new();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        dumps.extend(write_frame(dir, 0, &state)?);
    }
    let mut diagnostics = Vec::new();
    let mut notes = Vec::new();
    for frame in 1..=config.frames {
        let target = frame as f64 * config.frame_interval;
        // tiny remainders from rounding are folded into the previous step
        let eps = 1e-9 * config.frame_interval;
        while state.time < target - eps {
            let (next, report) = step(&state, config, target - state.time)?;
            state = next;
            if (target - state.time).abs() <= eps {
                state.time = target;
            }
            let st = report.stats;
            diagnostics.push(Diagnostics {
                step: state.step,
                time: state.time,
                dt: report.dt,
                iterations: st.map_or(0, |s| s.iterations),
                residual: st.map_or(0.0, |s| s.residual),
                n: st.map_or(0, |s| s.n),
                nnz: st.map_or(0, |s| s.nnz),
                mode: config.mode,
                max_speed: state.max_speed(),
                liquid_cells: state.liquid_cells(),
            });
            notes.extend(report.notes);
        }
        if let Some(dir) = out_dir {
            dumps.extend(write_frame(dir, frame, &state)?);
        }
    }
    if let Some(dir) = out_dir {
        let path = dir.join("diagnostics.csv");
        let mut text = String::from(DIAGNOSTICS_HEADER);
        text.push('\n');
        for d in &diagnostics {
            text.push_str(&d.csv_row());
            text.push('\n');
        }
        std::fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        let path = dir.join("manifest.txt");
        let mut text = format!("config_sha256 {hash}\nframes {}\nsteps {}\n", config.frames, state.step);
        for n in &notes {
            text.push_str(&format!("note {n}\n"));
        }
        std::fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    }
    Ok(RunOutput {
        state,
        diagnostics,
        notes,
        config_hash: hash,
        dumps,
    })
}
