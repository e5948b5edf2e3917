use dicke3::dynamics::{dicke_populations, run_trajectory};
use dicke3::entanglement::{concurrence_collective, negativity, pairwise_concurrence, partial_transpose, QUBIT_A, QUBIT_B, QUBIT_C};
use dicke3::hamiltonians::Method;
use dicke3::hilbert::{displaced_fock_overlap, symmetric_embed, DensityKind, DensityMatrix, FockSpace, ModelParams, C64};
use dicke3::sdp::{hermitian_embed, hermitian_extract, partial_transpose_matrix};
use dicke3::spectrum::solve;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn complex_entries(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
}

/// Random full-rank density matrix `G G† / Tr`.
fn density(kind: DensityKind, raw: &[(f64, f64)]) -> DensityMatrix {
    let d = kind.dim();
    let g = DMatrix::from_fn(d, d, |r, c| {
        let (re, im) = raw[r * d + c];
        C64::new(re, im)
    });
    let m = &g * g.adjoint() + DMatrix::<C64>::identity(d, d) * C64::new(1e-3, 0.0);
    let tr = m.trace();
    DensityMatrix::new(kind, m / tr).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn negativity_is_bounded_and_complement_symmetric(raw in complex_entries(64)) {
        let rho = density(DensityKind::Qubits, &raw);
        for mask in [QUBIT_A, QUBIT_B, QUBIT_C] {
            let n = negativity(&rho, mask).unwrap();
            let nc = negativity(&rho, 7 & !mask).unwrap();
            prop_assert!((0.0..=0.5 + 1e-12).contains(&n));
            prop_assert!((n - nc).abs() < 1e-10);
            let pt = partial_transpose(&rho, mask).unwrap();
            prop_assert!((pt.trace().re - 1.0).abs() < 1e-12);
            prop_assert!((partial_transpose_matrix(&pt, mask).unwrap() - rho.entries()).camax() < 1e-15);
        }
    }

    #[test]
    fn pairwise_concurrence_is_bounded(raw in complex_entries(64)) {
        let rho = density(DensityKind::Qubits, &raw);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let c = pairwise_concurrence(&rho, i, j).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&c));
        }
    }

    #[test]
    fn collective_concurrence_bounded_by_spin_flip_value(raw in complex_entries(16)) {
        // For symmetric states the axis formulas never exceed the Wootters value.
        let rho4 = density(DensityKind::Spin, &raw);
        let c = concurrence_collective(&rho4).unwrap();
        let w = pairwise_concurrence(&symmetric_embed(&rho4).unwrap(), 0, 1).unwrap();
        prop_assert!(c >= 0.0);
        prop_assert!(c <= w + 1e-9, "formula {} > spin flip {}", c, w);
    }

    #[test]
    fn hermitian_embedding_round_trips(raw in complex_entries(64)) {
        let g = DMatrix::from_fn(8, 8, |r, c| C64::new(raw[r * 8 + c].0, raw[r * 8 + c].1));
        let h = (&g + g.adjoint()) * C64::new(0.5, 0.0);
        let e = hermitian_embed(&h).unwrap();
        prop_assert!((&e - e.transpose()).amax() < 1e-15);
        prop_assert!((hermitian_extract(&e).unwrap() - h).camax() < 1e-15);
    }

    #[test]
    fn displaced_states_are_normalized(alpha in -1.5f64..1.5, n in 0usize..6) {
        let sum: f64 = (0..160).map(|m| displaced_fock_overlap(m, n, alpha).powi(2)).sum();
        prop_assert!((sum - 1.0).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn trajectories_stay_physical(delta in 0.1f64..1.5, g in 0.0f64..0.4, t in 0.01f64..3.0) {
        let p = ModelParams::new(delta, 1.0, g).unwrap();
        let f = FockSpace::new(30).unwrap();
        for m in Method::ALL {
            let traj = run_trajectory(m, &p, f, &[0.0, t]).unwrap();
            let rho4 = &traj.spin_states[1];
            let pops = dicke_populations(rho4).unwrap();
            prop_assert!((pops.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            prop_assert!(traj.norm_error.iter().all(|&e| e < 1e-9), "{m}: {:?}", traj.norm_error);
            prop_assert!(rho4.eigenvalues()[0] > -1e-10);
            prop_assert!((traj.reduced_states[1].entries().trace().re - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn spectra_are_sorted_and_complete(delta in 0.0f64..1.5, g in 0.0f64..1.0) {
        let p = ModelParams::new(delta, 1.0, g).unwrap();
        let f = FockSpace::new(12).unwrap();
        for m in Method::ALL {
            let es = solve(m, &p, f).unwrap();
            prop_assert_eq!(es.len(), 52);
            prop_assert!(es.energies().windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(es.energies().iter().all(|e| e.is_finite()));
        }
    }
}
