use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{config_hash, write_text};
use crate::fields::{
    reinitialize, square_liquid_fraction, GridDesc, LevelSet, NodeVectorField, ReinitParams, ScalarField,
    StaggeredVelocityField,
};
use crate::interp::Sampler;
use crate::mesh::{update_region_position, CellLabel, HybridLayout, MovingRegion};
use crate::transport::{advect_levelset, Backtrace, Flow};
use crate::{Result, Vec2};

/// A circle carried by a uniform velocity that reverses direction every
/// `reverse_every` steps, so long runs stay inside the domain.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionParams {
    pub n: usize,
    pub steps: usize,
    /// `|c| dt / dx`.
    pub cfl: f64,
    pub speed: f64,
    pub angle_deg: f64,
    pub reverse_every: usize,
    pub center: [f64; 2],
    pub radius: f64,
    /// Window half-width in cells, centered on the circle.
    pub window_half: usize,
    pub with_region: bool,
    pub reinitialize: bool,
}

impl DiffusionParams {
    pub fn new(with_region: bool) -> Self {
        DiffusionParams {
            n: 128,
            steps: 100,
            cfl: 2.0,
            speed: 1.0,
            angle_deg: 20.0,
            reverse_every: 25,
            center: [0.3, 0.4],
            radius: 0.08,
            window_half: 20,
            with_region,
            reinitialize: true,
        }
    }

    pub fn describe(&self) -> String {
        format!("{self:?}")
    }

    pub fn dt(&self) -> f64 {
        let dx = 1.0 / self.n as f64;
        if self.speed > 0.0 {
            self.cfl * dx / self.speed
        } else {
            self.cfl * dx
        }
    }

    pub fn velocity(&self, step: usize) -> Vec2 {
        let a = self.angle_deg.to_radians();
        let sign = if (step / self.reverse_every.max(1)).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        sign * self.speed * Vec2::new(a.cos(), a.sin())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionSample {
    pub step: usize,
    pub time: f64,
    /// Area of `phi < 0`.
    pub area: f64,
    /// Largest `|grad phi|` among probes within one cell of the interface.
    pub max_grad: f64,
}

/// Area and sharpness from a lattice four times finer than the grid, using
/// the hybrid sampler so both frames are measured the same way.
fn measure(phi: &ScalarField, layout: &HybridLayout) -> (f64, f64) {
    let d = layout.desc;
    let h = d.dx;
    let q = 0.25 * h;
    let side = 4 * (d.nx() - 1) + 1;
    let s = Sampler::new(layout);
    let at = |k: usize| 0.5 * h + k as f64 * q;
    let vals: Vec<f64> = (0..side * side)
        .into_par_iter()
        .map(|k| s.cell(phi, Vec2::new(at(k % side), at(k / side))))
        .collect();
    let v = |i: usize, j: usize| vals[j * side + i];
    let (area, grad) = (0..side - 1)
        .into_par_iter()
        .map(|j| {
            let mut a = 0.0;
            let mut g = 0.0f64;
            for i in 0..side - 1 {
                a += square_liquid_fraction([v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)]);
                if i > 0 && j > 0 && v(i, j).abs() < h {
                    let gx = (v(i + 1, j) - v(i - 1, j)) / (2.0 * q);
                    let gy = (v(i, j + 1) - v(i, j - 1)) / (2.0 * q);
                    g = g.max((gx * gx + gy * gy).sqrt());
                }
            }
            (a, g)
        })
        .reduce(|| (0.0, 0.0), |x, y| (x.0 + y.0, x.1.max(y.1)));
    (area * q * q, grad)
}

fn uniform_velocity(layout: &HybridLayout, c: Vec2) -> (StaggeredVelocityField, NodeVectorField) {
    let d = layout.desc;
    let mut u = StaggeredVelocityField::zeros(d);
    for axis in 0..2 {
        u.faces[axis].iter_mut().for_each(|v| *v = c[axis]);
    }
    let mut seam = NodeVectorField::zeros(d);
    for e in &layout.elements {
        seam.values[e.node] = [c.x, c.y];
    }
    (u, seam)
}

fn window(p: &DiffusionParams, desc: &GridDesc) -> MovingRegion {
    let ci = (p.center[0] / desc.dx) as usize;
    let cj = (p.center[1] / desc.dx) as usize;
    let w = p.window_half;
    MovingRegion::new([ci - w, cj - w], [ci + w, cj + w], [true, true], [0.0, 0.0])
}

/// Advects the circle (and reinitializes, if enabled) for `params.steps`
/// steps and samples area and sharpness after each.
pub fn diffusion_compare(params: &DiffusionParams) -> Result<Vec<DiffusionSample>> {
    let n = params.n;
    let d = GridDesc::new_2d(n, n, 1.0 / n as f64, [0.0, 0.0])?;
    let mut regions = if params.with_region {
        vec![window(params, &d)]
    } else {
        vec![]
    };
    let mut layout = HybridLayout::build(d, &regions)?;
    let c0 = Vec2::new(params.center[0], params.center[1]);
    let mut phi = LevelSet::from_fn(&layout, |x| (x - c0).norm() - params.radius).phi;
    let dt = params.dt();
    let reinit = ReinitParams::default();

    let (area, max_grad) = measure(&phi, &layout);
    let mut out = vec![DiffusionSample {
        step: 0,
        time: 0.0,
        area,
        max_grad,
    }];
    for step in 0..params.steps {
        let c = params.velocity(step);
        for (k, r) in regions.iter_mut().enumerate() {
            r.u_g = [c.x, c.y];
            *r = update_region_position(r, dt, &d, k)?.0;
        }
        let next = HybridLayout::build(d, &regions)?;
        let (u, seam) = uniform_velocity(&layout, c);
        let flow = Flow {
            layout: &layout,
            u: &u,
            seam_u: &seam,
        };
        phi = advect_levelset(&phi, flow, &next, dt, Backtrace::Euler);
        if params.reinitialize {
            reinitialize(&mut phi, &next, &reinit);
        }
        layout = next;
        let (area, max_grad) = measure(&phi, &layout);
        out.push(DiffusionSample {
            step: step + 1,
            time: (step + 1) as f64 * dt,
            area,
            max_grad,
        });
    }
    Ok(out)
}

/// Relative area loss between the first and last sample.
pub fn area_loss(samples: &[DiffusionSample]) -> f64 {
    let a0 = samples.first().map_or(0.0, |s| s.area);
    let a1 = samples.last().map_or(0.0, |s| s.area);
    (a0 - a1) / a0
}

/// Pure advection of random data with the window moving at the flow
/// velocity. Returns the largest change of any window-interior value
/// relative to its value one step earlier (re-indexed by the window shift).
pub fn frame_exactness(params: &DiffusionParams, steps: usize) -> Result<f64> {
    let n = params.n;
    let d = GridDesc::new_2d(n, n, 1.0 / n as f64, [0.0, 0.0])?;
    let mut region = window(params, &d);
    region.offset = [0.31 * d.dx, -0.17 * d.dx];
    let mut layout = HybridLayout::build(d, std::slice::from_ref(&region))?;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let values = (0..d.cell_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut phi = ScalarField::from_values(d, values)?;
    let dt = params.dt();
    let mut worst = 0.0f64;
    for step in 0..steps {
        let c = params.velocity(step);
        region.u_g = [c.x, c.y];
        let (next_region, shift) = update_region_position(&region, dt, &d, 0)?;
        let next = HybridLayout::build(d, std::slice::from_ref(&next_region))?;
        let (u, seam) = uniform_velocity(&layout, c);
        let flow = Flow {
            layout: &layout,
            u: &u,
            seam_u: &seam,
        };
        let out = advect_levelset(&phi, flow, &next, dt, Backtrace::Euler);
        for j in next_region.min[1] + 2..next_region.max[1] - 2 {
            for i in next_region.min[0] + 2..next_region.max[0] - 2 {
                let cell = d.idx(i, j);
                if next.labels[cell] != CellLabel::FvmMoving {
                    continue;
                }
                let src = d.idx((i as i64 - shift[0]) as usize, (j as i64 - shift[1]) as usize);
                worst = worst.max((out.values[cell] - phi.values[src]).abs());
            }
        }
        phi = out;
        region = next_region;
        layout = next;
    }
    Ok(worst)
}

pub const DIFFUSION_CSV_HEADER: &str = "step,time,area,max_grad,config_hash";

/// Writes `diffusion_<static|region>.csv`.
pub fn write_diffusion_outputs(dir: &Path, params: &DiffusionParams, samples: &[DiffusionSample]) -> Result<()> {
    let hash = config_hash(&params.describe());
    let mut csv = format!("{DIFFUSION_CSV_HEADER}\n");
    for s in samples {
        csv.push_str(&format!(
            "{},{:.9e},{:.9e},{:.6e},{hash}\n",
            s.step, s.time, s.area, s.max_grad
        ));
    }
    let name = if params.with_region {
        "diffusion_region.csv"
    } else {
        "diffusion_static.csv"
    };
    write_text(&dir.join(name), &csv)
}
