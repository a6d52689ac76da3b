use std::path::PathBuf;
use std::time::{Duration, Instant};

use hybrid_fluid::fields::{read_dump, DumpKind};
use hybrid_fluid::harness::{
    diffusion_compare, interp_convergence, pool_test, write_diffusion_outputs, write_interp_outputs,
    write_pool_outputs, AnalyticField, DiffusionParams, InterpKind, PoolParams,
};
use hybrid_fluid::pressure::SolverMode;
use hybrid_fluid::sim::{run, SceneConfig, DIAGNOSTICS_HEADER};

fn scene(name: &str) -> SceneConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenes")
        .join(name);
    SceneConfig::load(&path).unwrap()
}

#[test]
fn dam_break_runs_quickly_and_keeps_its_volume() {
    let cfg = scene("dam_break.toml");
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let out = run(&cfg, Some(dir.path())).unwrap();
    assert!(start.elapsed() < Duration::from_secs(60));

    let first = out.diagnostics.first().unwrap().liquid_cells as f64;
    for d in &out.diagnostics {
        assert!(d.max_speed.is_finite());
        assert!(
            d.residual <= cfg.tolerances.solver_tol,
            "step {} residual {}",
            d.step,
            d.residual
        );
        let drift = (d.liquid_cells as f64 - first).abs() / first;
        assert!(drift < 0.1, "step {}: liquid cell count drifted by {drift}", d.step);
    }
    // something actually fell
    assert!(out.diagnostics.iter().any(|d| d.max_speed > 1.0));

    let csv = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    assert!(csv.starts_with(DIAGNOSTICS_HEADER));
    assert_eq!(csv.lines().count(), out.diagnostics.len() + 1);
    let dump = std::fs::File::open(dir.path().join(format!("frame_{:04}_phi.hfd", cfg.frames))).unwrap();
    let phi = read_dump(dump).unwrap();
    assert_eq!(phi.kind, DumpKind::Cell);
    assert!(phi.values.iter().all(|v| v.is_finite()));
}

#[test]
fn every_mode_runs_the_falling_drop() {
    for mode in [
        SolverMode::FirstOrder,
        SolverMode::SpdProjected,
        SolverMode::FullSecondOrder,
    ] {
        let mut cfg = scene("falling_drop.toml");
        cfg.mode = mode;
        cfg.frames = 4;
        let out = run(&cfg, None).unwrap();
        assert!(out.state.step >= 4);
        assert!(out.state.max_speed().is_finite(), "{mode:?}");
        assert!(out.diagnostics.iter().all(|d| d.mode == mode));
    }
}

#[test]
fn harness_writers_produce_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();

    let (rows, maps) = interp_convergence(InterpKind::Face, AnalyticField::Quadratic, &[16, 32]).unwrap();
    write_interp_outputs(p, InterpKind::Face, AnalyticField::Quadratic, &rows, &maps).unwrap();
    let csv = std::fs::read_to_string(p.join("interp_face_quadratic.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let pgm = std::fs::read(p.join("interp_face_quadratic_32.pgm")).unwrap();
    assert!(pgm.starts_with(b"P"));

    let run = pool_test(&PoolParams {
        n: 32,
        ..PoolParams::new(0.0, SolverMode::FullSecondOrder)
    })
    .unwrap();
    assert!(run.report.max_speed < 1e-4, "{:?}", run.report);
    write_pool_outputs(p, &[run]).unwrap();
    assert_eq!(std::fs::read_to_string(p.join("pool.csv")).unwrap().lines().count(), 2);
    assert!(p.join("pool_0_full2_v.hfd").exists());

    let params = DiffusionParams {
        n: 64,
        steps: 10,
        window_half: 10,
        center: [0.4, 0.4],
        ..DiffusionParams::new(true)
    };
    let samples = diffusion_compare(&params).unwrap();
    assert_eq!(samples.len(), 11);
    write_diffusion_outputs(p, &params, &samples).unwrap();
    let csv = std::fs::read_to_string(p.join("diffusion_region.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
}

#[test]
fn harness_reports_carry_a_stable_hash() {
    let a = pool_test(&PoolParams::new(0.0, SolverMode::SpdProjected))
        .unwrap()
        .report;
    let b = pool_test(&PoolParams::new(0.0, SolverMode::SpdProjected))
        .unwrap()
        .report;
    assert_eq!(a, b);
    assert_eq!(a.config_hash.len(), 64);
    let c = pool_test(&PoolParams::new(0.0, SolverMode::FirstOrder)).unwrap().report;
    assert_ne!(a.config_hash, c.config_hash);
}
