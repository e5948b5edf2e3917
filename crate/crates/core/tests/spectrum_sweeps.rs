use dicke3::hamiltonians::Method;
use dicke3::hilbert::{FockSpace, ModelParams};
use dicke3::spectrum::{level_sweep, linspace, parity_crossings, solve};

fn params(delta: f64, g: f64) -> ModelParams {
    ModelParams::new(delta, 1.0, g).unwrap()
}

#[test]
fn level_crossings_present_in_exact_and_grwa() {
    // Three lowest levels of each parity over g/ω ∈ [0, 0.5].
    let grid = linspace(0.0, 0.5, 51);
    let f = FockSpace::new(40).unwrap();
    let exact = parity_crossings(Method::Exact, &params(1.0, 0.0), f, &grid, 3).unwrap();
    let grwa = parity_crossings(Method::Grwa, &params(1.0, 0.0), f, &grid, 3).unwrap();
    let zeroth = parity_crossings(Method::Zeroth, &params(1.0, 0.0), f, &grid, 3).unwrap();
    assert!(exact > 0);
    assert_eq!(exact, grwa);
    assert_ne!(zeroth, exact);
}

#[test]
fn zeroth_tracks_exact_where_rwa_fails() {
    let f = FockSpace::new(60).unwrap();
    let p = params(0.1, 1.0);
    let exact = solve(Method::Exact, &p, f).unwrap();
    let zeroth = solve(Method::Zeroth, &p, f).unwrap();
    let rwa = solve(Method::Rwa, &p, f).unwrap();
    let err = |es: &dicke3::spectrum::EigenSystem| {
        (0..8).map(|k| (es.energies()[k] - exact.energies()[k]).abs()).fold(0.0, f64::max)
    };
    assert!(err(&zeroth) < 0.05);
    assert!(err(&rwa) > 10.0 * err(&zeroth));
}

#[test]
fn every_method_is_complete_with_small_residuals() {
    let f = FockSpace::new(30).unwrap();
    for m in Method::ALL {
        for g in [0.05, 0.3, 1.0] {
            let es = solve(m, &params(0.7, g), f).unwrap();
            assert_eq!(es.len(), 4 * 31);
            assert!(es.energies().windows(2).all(|w| w[0] <= w[1]));
            let worst = es.residuals().into_iter().fold(0.0, f64::max);
            assert!(worst < 1e-8, "{m} g={g}: residual {worst:e}");
        }
    }
}

#[test]
fn truncation_convergence_up_to_g_03() {
    for g in [0.1, 0.2, 0.3] {
        let p = params(1.0, g);
        let a = solve(Method::Exact, &p, FockSpace::new(40).unwrap()).unwrap();
        let b = solve(Method::Exact, &p, FockSpace::new(80).unwrap()).unwrap();
        for k in 0..12 {
            assert!((a.energies()[k] - b.energies()[k]).abs() < 1e-8, "g={g} level {k}");
        }
    }
}

#[test]
fn grwa_beats_zeroth_at_resonance() {
    let grid = linspace(0.0, 0.3, 16);
    let t = level_sweep(&[Method::Zeroth, Method::Grwa], &params(1.0, 0.0), FockSpace::new(40).unwrap(), &grid, 6)
        .unwrap();
    let (gw, _, _) = t.max_deviation(Method::Grwa).unwrap();
    let (zw, _, _) = t.max_deviation(Method::Zeroth).unwrap();
    assert!(gw <= zw);
}

#[test]
fn single_point_at_zero_coupling_is_method_independent() {
    let t = level_sweep(&Method::ALL, &params(0.4, 0.0), FockSpace::new(10).unwrap(), &[0.0], 10).unwrap();
    let row = &t.energies[0];
    for col in row {
        for (a, b) in col.iter().zip(&row[0]) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn sweep_errors_name_the_grid_point() {
    let e = level_sweep(&[Method::Exact], &params(1.0, 0.0), FockSpace::new(5).unwrap(), &[0.1, -1.0], 2).unwrap_err();
    assert!(e.to_string().contains("g = -1"), "{e}");
}
