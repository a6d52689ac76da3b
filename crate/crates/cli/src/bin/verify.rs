use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use hybrid_fluid::harness::{
    area_loss, diffusion_compare, frame_exactness, interp_convergence, pool_test, write_diffusion_outputs,
    write_interp_outputs, write_pool_outputs, AnalyticField, DiffusionParams, InterpKind, PoolParams,
    TABLE_RESOLUTIONS,
};
use hybrid_fluid::pressure::SolverMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Spd,
    Full2,
    First,
}

impl From<Mode> for SolverMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Spd => SolverMode::SpdProjected,
            Mode::Full2 => SolverMode::FullSecondOrder,
            Mode::First => SolverMode::FirstOrder,
        }
    }
}

/// Verification studies. Each writes CSV tables, field dumps or PGM heat
/// maps into the results directory.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    #[arg(long, default_value = "results", global = true)]
    out: PathBuf,
    #[command(subcommand)]
    study: Study,
}

#[derive(Subcommand, Debug)]
enum Study {
    /// Cell and face interpolation error across the window seam.
    Interp {
        #[arg(long, value_delimiter = ',', default_values_t = TABLE_RESOLUTIONS)]
        resolutions: Vec<usize>,
    },
    /// Single projection of a still pool with gravity normal to its surface.
    Pool {
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 15.0, 30.0])]
        tilt: Vec<f64>,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Mode::Full2, Mode::Spd, Mode::First])]
        mode: Vec<Mode>,
        #[arg(long, default_value_t = 64)]
        n: usize,
    },
    /// Area loss of a translated circle with and without a matched window.
    Diffusion {
        #[arg(long, default_value_t = 128)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
}

fn main() -> Result<()> {
    let args = Args::parse();
    let out = &args.out;
    match args.study {
        Study::Interp { resolutions } => {
            for kind in [InterpKind::Cell, InterpKind::Face] {
                for field in [AnalyticField::Linear, AnalyticField::Quadratic] {
                    let (rows, maps) = interp_convergence(kind, field, &resolutions)?;
                    write_interp_outputs(out, kind, field, &rows, &maps)?;
                    println!("{} {}", kind.as_str(), field.as_str());
                    for r in &rows {
                        println!(
                            "  {:>4}  {:.4e}  order {:>6}  reference {}",
                            r.resolution,
                            r.linf,
                            r.order.map_or("-".into(), |o| format!("{o:.3}")),
                            r.reference.map_or("-".into(), |e| format!("{e:.3e}"))
                        );
                    }
                }
            }
        }
        Study::Pool { tilt, mode, n } => {
            let mut runs = Vec::new();
            for &t in &tilt {
                for &m in &mode {
                    let params = PoolParams {
                        n,
                        ..PoolParams::new(t, m.into())
                    };
                    let run = pool_test(&params)?;
                    let r = &run.report;
                    println!(
                        "tilt {:>4} {:>5}: max speed {:.3e} (unclamped {:.3e}) g dt, interior div {:.3e}, {} iterations",
                        t,
                        r.params.mode.as_str(),
                        r.max_speed,
                        r.max_speed_unclamped,
                        r.max_divergence_interior,
                        r.iterations
                    );
                    runs.push(run);
                }
            }
            write_pool_outputs(out, &runs)?;
        }
        Study::Diffusion { n, steps } => {
            for with_region in [false, true] {
                let params = DiffusionParams {
                    n,
                    steps,
                    ..DiffusionParams::new(with_region)
                };
                let samples = diffusion_compare(&params)?;
                write_diffusion_outputs(out, &params, &samples)?;
                println!(
                    "{}: area loss {:.4e}",
                    if with_region { "region" } else { "static" },
                    area_loss(&samples)
                );
            }
            let params = DiffusionParams {
                n,
                ..DiffusionParams::new(true)
            };
            println!("frame exactness: {:.3e}", frame_exactness(&params, 20)?);
        }
    }
    println!("results in {}", out.display());
    Ok(())
}
