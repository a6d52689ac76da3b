use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};
use hybrid_fluid::pressure::SolverMode;
use hybrid_fluid::sim::{run, SceneConfig};

#[derive(Clone, Copy, Debug, ValueEnum)]
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

/// Runs a scene and writes per-frame field dumps, diagnostics and a manifest.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    /// Scene file (TOML).
    scene: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scene's pressure mode.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Overrides the scene's frame count.
    #[arg(long)]
    frames: Option<usize>,
}

fn main() -> Result<()> {
    let args = Args::parse();
    let mut cfg = SceneConfig::load(&args.scene).with_context(|| format!("loading {}", args.scene.display()))?;
    if let Some(m) = args.mode {
        cfg.mode = m.into();
    }
    if let Some(f) = args.frames {
        cfg.frames = f;
    }
    cfg.validate()?;
    let start = std::time::Instant::now();
    let out = run(&cfg, Some(&args.out))?;
    let last = out.diagnostics.last();
    println!(
        "{} frames, {} steps in {:.2?}; mode {}; max speed {:.4e}; liquid cells {}",
        cfg.frames,
        out.state.step,
        start.elapsed(),
        cfg.mode.as_str(),
        last.map_or(0.0, |d| d.max_speed),
        out.state.liquid_cells()
    );
    for n in &out.notes {
        println!("note: {n}");
    }
    println!("config sha256 {}", out.config_hash);
    println!("output in {}", args.out.display());
    Ok(())
}
