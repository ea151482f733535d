//! End-to-end use of the public API: build data, compute coefficients, step,
//! diagnose, serialize.

use landau_core::coefficients::{compute_coefficients_direct, compute_coefficients_fast, max_relative_discrepancy};
use landau_core::diagnostics::hydrodynamic_fields;
use landau_core::field::{make_bump_sum, make_maxwellian, Bump};
use landau_core::grid::{PhaseGrid, SpatialGrid, VelocityGrid};
use landau_core::snapshot::{read_field, write_field};
use landau_core::solver::{run_simulation, Positivity, RunStatus};
use landau_core::{coefficients, CoefficientEngine, CollisionKernel, SolverConfig};

fn bumps() -> Vec<Bump<f64>> {
    let mut b = Bump::new(0.6, [0.8, 0.0, 0.0], 0.7);
    b.x_amplitude = 0.3;
    b.x_wave = [1.0, 0.0, 0.0];
    vec![Bump::new(1.0, [-0.8, 0.0, 0.0], 0.8), b]
}

#[test]
fn fast_and_direct_coefficients_agree_in_f32_and_f64() {
    let g64 = VelocityGrid::new(8, 4.0).unwrap();
    let f64_field = make_maxwellian(PhaseGrid::new(SpatialGrid::homogeneous(), g64), 1.0, 0.7).unwrap();
    let k64 = CollisionKernel::new(-2.0).unwrap();
    let fast = compute_coefficients_fast(&g64, f64_field.slice(0), &k64).unwrap();
    let direct = compute_coefficients_direct(&g64, f64_field.slice(0), &k64).unwrap();
    assert!(max_relative_discrepancy(&fast, &direct) < 1e-12);

    let g32 = VelocityGrid::<f32>::new(8, 4.0).unwrap();
    let f32_field = make_maxwellian(PhaseGrid::new(SpatialGrid::homogeneous(), g32), 1.0f32, 0.7).unwrap();
    let k32 = coefficients::CollisionKernel::<f32>::new(-2.0).unwrap();
    let fast32 = compute_coefficients_fast(&g32, f32_field.slice(0), &k32).unwrap();
    let direct32 = compute_coefficients_direct(&g32, f32_field.slice(0), &k32).unwrap();
    assert!(max_relative_discrepancy(&fast32, &direct32) < 1e-4);
    // Single precision tracks double precision to its own round-off.
    for i in 0..direct.len() {
        let (a, b) = (direct.a[i][0], direct32.a[i][0] as f64);
        assert!((a - b).abs() <= 1e-5 * a.abs().max(1e-3), "cell {i}: {a} vs {b}");
    }
}

#[test]
fn inhomogeneous_run_books_every_change_of_mass_as_clamping() {
    let grid = PhaseGrid::new(
        SpatialGrid::new(1, 8, 2.0 * std::f64::consts::PI).unwrap(),
        VelocityGrid::new(8, 4.0).unwrap(),
    );
    let f0 = make_bump_sum(grid, &bumps()).unwrap();
    let mut cfg = SolverConfig::new(-1.0, 0.005);
    cfg.dt = 0.0005;
    cfg.positivity = Positivity::Clamp;
    cfg.diag_every = 2;
    cfg.diagnostics.holder_pairs = 100;
    let rec = run_simulation(&f0, &cfg).unwrap();
    assert_eq!(rec.status, RunStatus::Completed);
    assert_eq!(rec.snapshots.len(), 6);
    assert!(rec.times.windows(2).all(|w| w[1] > w[0]));

    let m0 = f0.total_mass();
    let last = rec.snapshots.last().unwrap();
    // Transport and collision conserve mass; clamping is the only source.
    assert!(rec.clamped_mass > 0.0);
    assert!((last.total_mass() - m0 - rec.clamped_mass).abs() < 1e-10 * m0);
    let hydro = hydrodynamic_fields(last);
    assert!(hydro.mass.iter().all(|m| *m > 0.0));
}

#[test]
fn engine_results_survive_a_snapshot_round_trip() {
    let grid = PhaseGrid::new(
        SpatialGrid::new(1, 4, 2.0 * std::f64::consts::PI).unwrap(),
        VelocityGrid::new(8, 4.0).unwrap(),
    );
    let f = make_bump_sum(grid, &bumps()).unwrap().with_time(0.25);
    let mut buf = Vec::new();
    write_field(&mut buf, &f).unwrap();
    let back = read_field::<f64, _>(&mut buf.as_slice()).unwrap();
    assert_eq!(back, f);

    let kernel = CollisionKernel::new(-1.0).unwrap();
    let engine = CoefficientEngine::new();
    let a = engine.compute_all(&f, &kernel).unwrap();
    let b = engine.compute_all(&back, &kernel).unwrap();
    assert_eq!(a.len(), 4);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.a, y.a);
        assert_eq!(x.c, y.c);
    }
}
