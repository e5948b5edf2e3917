//! Entanglement measures for the three-qubit reduced state.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hilbert::{hermitian_eigenvalues, spin_matrices, DensityKind, DensityMatrix, C64, QUBIT_DIM};
use crate::sdp::{build_gme_program, partial_transpose_matrix, solve_sdp, QubitMask, SdpOptions, SdpStatus};

pub use crate::sdp::{QUBIT_A, QUBIT_B, QUBIT_C};

/// Radicands this far below zero are reported as invalid input.
const RADICAND_TOL: f64 = 1e-10;

fn require(rho: &DensityMatrix, kind: DensityKind, what: &str) -> Result<()> {
    if rho.kind() != kind {
        return Err(Error::InvalidDensity(format!("{what} expects a {0}x{0} state", kind.dim())));
    }
    Ok(())
}

/// Collective concurrence along one axis for a symmetric three-qubit state
/// given in the spin-3/2 sector. Negative values mean no pairwise
/// entanglement is detected along that axis.
pub fn concurrence_along(rho4: &DensityMatrix, axis: crate::dynamics::Axis) -> Result<f64> {
    require(rho4, DensityKind::Spin, "concurrence")?;
    let spins = spin_matrices();
    let s = match axis {
        crate::dynamics::Axis::X => spins.jx,
        crate::dynamics::Axis::Y => spins.jy,
        crate::dynamics::Axis::Z => spins.jz,
    };
    let s = s.entries();
    let id = DMatrix::<C64>::identity(4, 4);
    let s2 = (s * s).map(|z| z * 4.0);
    // (2S ± 1)(2S ± 3) = 4S² ± 8S + 3, positive semidefinite on spin 3/2.
    let f_plus = rho4.expectation(&(&s2 + s.map(|z| z * 8.0) + &id * C64::new(3.0, 0.0))).re;
    let f_minus = rho4.expectation(&(&s2 - s.map(|z| z * 8.0) + &id * C64::new(3.0, 0.0))).re;
    let mut radicand = f_plus * f_minus;
    if radicand < 0.0 {
        if radicand < -RADICAND_TOL {
            return Err(Error::InvalidDensity(format!("concurrence radicand {radicand:.3e} is negative")));
        }
        radicand = 0.0;
    }
    let sq = rho4.expectation(&s2).re;
    Ok((9.0 - sq - radicand.sqrt()) / 12.0)
}

/// `max(0, C_y, C_z)` for a symmetric three-qubit state in the spin sector.
///
/// Equals the pairwise Wootters concurrence for states without coherence
/// between the even and odd `m + 3/2` sectors and with `<J+²>` real and
/// non-negative.
pub fn concurrence_collective(rho4: &DensityMatrix) -> Result<f64> {
    let cy = concurrence_along(rho4, crate::dynamics::Axis::Y)?;
    let cz = concurrence_along(rho4, crate::dynamics::Axis::Z)?;
    Ok(cy.max(cz).max(0.0))
}

/// Two-qubit reduced state keeping qubits `i < j` (0 = A, 1 = B, 2 = C).
pub fn reduce_pair(rho8: &DensityMatrix, i: usize, j: usize) -> Result<DMatrix<C64>> {
    require(rho8, DensityKind::Qubits, "reduce_pair")?;
    if i >= j || j > 2 {
        return Err(Error::InvalidArgument(format!("qubit pair ({i}, {j}) must satisfy i < j <= 2")));
    }
    let k = 3 - i - j;
    let bit = |q: usize| 2 - q;
    let index = |a: usize, b: usize, t: usize| (a << bit(i)) | (b << bit(j)) | (t << bit(k));
    let m = rho8.entries();
    let out = DMatrix::from_fn(4, 4, |r, c| {
        let (ra, rb, ca, cb) = (r >> 1, r & 1, c >> 1, c & 1);
        (0..2).map(|t| m[(index(ra, rb, t), index(ca, cb, t))]).sum()
    });
    Ok(out)
}

/// Wootters concurrence of a two-qubit density matrix.
pub fn wootters_concurrence(rho2: &DMatrix<C64>) -> Result<f64> {
    if rho2.nrows() != 4 || rho2.ncols() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: rho2.nrows() });
    }
    let sy = DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), C64::new(0.0, 0.0)]);
    let yy = sy.kronecker(&sy);
    let flipped = &yy * rho2.conjugate() * &yy;
    let herm = (rho2 + rho2.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let sqrt_diag = eig.eigenvalues.map(|x| C64::new(x.max(0.0).sqrt(), 0.0));
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_diag) * eig.eigenvectors.adjoint();
    let mut lambda: Vec<f64> = hermitian_eigenvalues(&(&root * flipped * &root))
        .into_iter()
        .map(|x| x.max(0.0).sqrt())
        .collect();
    lambda.sort_by(|a, b| b.total_cmp(a));
    Ok((lambda[0] - lambda[1] - lambda[2] - lambda[3]).max(0.0))
}

/// Wootters concurrence between qubits `i < j` of a three-qubit state.
pub fn pairwise_concurrence(rho8: &DensityMatrix, i: usize, j: usize) -> Result<f64> {
    wootters_concurrence(&reduce_pair(rho8, i, j)?)
}

/// Parses a bipartition such as `A|BC` or `AB|C`; the left side is the
/// transposed subsystem.
pub fn parse_bipartition(s: &str) -> Result<QubitMask> {
    let bad = || Error::InvalidArgument(format!("bad bipartition '{s}', expected e.g. A|BC"));
    let (left, right) = s.split_once('|').ok_or_else(bad)?;
    let mask_of = |side: &str| -> Result<QubitMask> {
        let mut m = 0;
        for ch in side.trim().chars() {
            let bit = match ch.to_ascii_uppercase() {
                'A' => QUBIT_A,
                'B' => QUBIT_B,
                'C' => QUBIT_C,
                _ => return Err(bad()),
            };
            if m & bit != 0 {
                return Err(bad());
            }
            m |= bit;
        }
        Ok(m)
    };
    let (l, r) = (mask_of(left)?, mask_of(right)?);
    if l == 0 || r == 0 || l & r != 0 || l | r != 7 {
        return Err(bad());
    }
    Ok(l)
}

pub fn bipartition_label(mask: QubitMask) -> String {
    let side = |m: QubitMask| {
        [(QUBIT_A, 'A'), (QUBIT_B, 'B'), (QUBIT_C, 'C')]
            .iter()
            .filter(|(b, _)| m & b != 0)
            .map(|(_, c)| *c)
            .collect::<String>()
    };
    format!("{}|{}", side(mask), side(7 & !mask))
}

pub fn partial_transpose(rho8: &DensityMatrix, mask: QubitMask) -> Result<DMatrix<C64>> {
    require(rho8, DensityKind::Qubits, "partial_transpose")?;
    partial_transpose_matrix(rho8.entries(), mask)
}

/// Sum of the absolute negative eigenvalues of the partial transpose.
pub fn negativity(rho8: &DensityMatrix, mask: QubitMask) -> Result<f64> {
    let pt = partial_transpose(rho8, mask)?;
    Ok(hermitian_eigenvalues(&pt).iter().filter(|&&x| x < 0.0).map(|x| -x).sum())
}

/// Optimal fully decomposable witness and the resulting GME estimate.
#[derive(Debug, Clone)]
pub struct WitnessResult {
    /// `max(0, -Tr(Wρ))`.
    pub value: f64,
    pub witness_expectation: f64,
    pub witness: DMatrix<C64>,
    pub p: [DMatrix<C64>; 3],
    pub q: [DMatrix<C64>; 3],
    pub status: SdpStatus,
    pub iterations: usize,
    pub relative_gap: f64,
}

/// Genuine multipartite entanglement lower bound from the PPT-mixture witness
/// program. Errors unless the solver reaches the requested tolerance.
pub fn gme(rho8: &DensityMatrix, options: SdpOptions) -> Result<WitnessResult> {
    require(rho8, DensityKind::Qubits, "gme")?;
    let prog = build_gme_program(rho8)?;
    let sol = solve_sdp(&prog, options.tol, options.max_iter);
    if sol.status != SdpStatus::Optimal {
        return Err(Error::Solver(format!(
            "{} after {} iterations (gap {:.3e}, residuals {:.3e}/{:.3e})",
            sol.status, sol.iterations, sol.relative_gap, sol.primal_residual, sol.dual_residual
        )));
    }
    let parts = prog.witness_parts(&sol.y);
    let expectation = prog.witness_value(&sol.y);
    Ok(WitnessResult {
        value: (-expectation).max(0.0),
        witness_expectation: expectation,
        witness: parts.w,
        p: parts.p,
        q: parts.q,
        status: sol.status,
        iterations: sol.iterations,
        relative_gap: sol.relative_gap,
    })
}

/// Basis state of three qubits, `bits` read as A B C from the most
/// significant bit.
pub fn qubit_basis_state(bits: usize) -> Result<DensityMatrix> {
    if bits >= QUBIT_DIM {
        return Err(Error::InvalidArgument(format!("basis index {bits} out of range")));
    }
    let mut v = nalgebra::DVector::zeros(QUBIT_DIM);
    v[bits] = C64::new(1.0, 0.0);
    DensityMatrix::pure(DensityKind::Qubits, &v)
}

pub fn ghz_state() -> DensityMatrix {
    let mut v = nalgebra::DVector::zeros(QUBIT_DIM);
    v[0] = C64::new(1.0, 0.0);
    v[7] = C64::new(1.0, 0.0);
    DensityMatrix::pure(DensityKind::Qubits, &v).expect("valid state")
}

pub fn w_state() -> DensityMatrix {
    let mut v = nalgebra::DVector::zeros(QUBIT_DIM);
    for b in [1, 2, 4] {
        v[b] = C64::new(1.0, 0.0);
    }
    DensityMatrix::pure(DensityKind::Qubits, &v).expect("valid state")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::symmetric_embed;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const E_GHZ: f64 = 0.499999998820;
    const E_W: f64 = 0.442809041576;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_unitary2(rng: &mut ChaCha8Rng) -> DMatrix<C64> {
        let g = DMatrix::from_fn(2, 2, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        g.qr().q()
    }

    fn local_unitary(rng: &mut ChaCha8Rng) -> DMatrix<C64> {
        let (a, b, cc) = (random_unitary2(rng), random_unitary2(rng), random_unitary2(rng));
        a.kronecker(&b).kronecker(&cc)
    }

    /// Random spin-sector state with no coherence between the
    /// {m = -3/2, 1/2} and {m = -1/2, 3/2} sectors and `<J+²> >= 0`.
    fn random_parity_state(rng: &mut ChaCha8Rng) -> DensityMatrix {
        let mut m = DMatrix::<C64>::zeros(4, 4);
        for sector in [[0usize, 2], [1, 3]] {
            let rank = rng.gen_range(1..=2);
            for _ in 0..rank {
                let v: Vec<C64> = (0..2).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
                let w = rng.gen_range(0.0..1.0);
                for (a, &i) in sector.iter().enumerate() {
                    for (b, &j) in sector.iter().enumerate() {
                        m[(i, j)] += v[a] * v[b].conj() * w;
                    }
                }
            }
        }
        let tr = m.trace();
        let m = m / tr;
        // Collective z rotation making <J+²> real and non-negative.
        let jp = spin_matrices().jplus.entries().clone();
        let phi = -(&m * &jp * &jp).trace().arg() / 2.0;
        let u = DMatrix::from_diagonal(&DVector::from_fn(4, |s, _| C64::from_polar(1.0, -phi * (s as f64 - 1.5))));
        DensityMatrix::new(DensityKind::Spin, &u * m * u.adjoint()).unwrap()
    }

    #[test]
    fn w_state_concurrence_is_two_thirds() {
        let mut v = DVector::zeros(4);
        v[1] = c(1.0, 0.0);
        let rho4 = DensityMatrix::pure(DensityKind::Spin, &v).unwrap();
        assert_abs_diff_eq!(concurrence_collective(&rho4).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pairwise_concurrence(&w_state(), 0, 1).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pairwise_concurrence(&w_state(), 1, 2).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn ghz_and_product_have_no_pairwise_concurrence() {
        for s in [ghz_state(), qubit_basis_state(0).unwrap()] {
            assert!(pairwise_concurrence(&s, 0, 2).unwrap() < 1e-12);
        }
        let mut v = DVector::zeros(4);
        v[0] = c(1.0, 0.0);
        v[3] = c(1.0, 0.0);
        let rho4 = DensityMatrix::pure(DensityKind::Spin, &v).unwrap();
        assert!(concurrence_collective(&rho4).unwrap() < 1e-12);
    }

    #[test]
    fn collective_formula_matches_spin_flip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..60 {
            let rho4 = random_parity_state(&mut rng);
            let formula = concurrence_collective(&rho4).unwrap();
            let flip = pairwise_concurrence(&symmetric_embed(&rho4).unwrap(), 0, 1).unwrap();
            assert_abs_diff_eq!(formula, flip, epsilon = 1e-8);
        }
    }

    #[test]
    fn reduce_pair_traces_out_third_qubit() {
        // |0>_A |Φ+>_BC: the AB and AC reductions are product, BC is Bell.
        let mut v = DVector::zeros(8);
        v[0b000] = c(1.0, 0.0);
        v[0b011] = c(1.0, 0.0);
        let rho = DensityMatrix::pure(DensityKind::Qubits, &v).unwrap();
        assert_abs_diff_eq!(pairwise_concurrence(&rho, 1, 2).unwrap(), 1.0, epsilon = 1e-12);
        assert!(pairwise_concurrence(&rho, 0, 1).unwrap() < 1e-12);
        assert!(pairwise_concurrence(&rho, 0, 2).unwrap() < 1e-12);
        assert!(reduce_pair(&rho, 1, 1).is_err());
    }

    #[test]
    fn bipartition_parsing() {
        assert_eq!(parse_bipartition("A|BC").unwrap(), QUBIT_A);
        assert_eq!(parse_bipartition("AB|C").unwrap(), QUBIT_A | QUBIT_B);
        assert_eq!(parse_bipartition("b|ca").unwrap(), QUBIT_B);
        for bad in ["ABC", "A|B", "A|ABC", "|ABC", "AA|BC", "D|ABC"] {
            assert!(parse_bipartition(bad).is_err(), "{bad}");
        }
        assert_eq!(bipartition_label(QUBIT_C), "C|AB");
    }

    #[test]
    fn negativity_of_reference_states() {
        for mask in [QUBIT_A, QUBIT_B, QUBIT_C, QUBIT_A | QUBIT_B] {
            assert_abs_diff_eq!(negativity(&ghz_state(), mask).unwrap(), 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(negativity(&w_state(), mask).unwrap(), 2f64.sqrt() / 3.0, epsilon = 1e-12);
            assert!(negativity(&qubit_basis_state(5).unwrap(), mask).unwrap() < 1e-14);
        }
        assert!(negativity(&w_state(), 0).is_err());
        assert!(negativity(&w_state(), 7).is_err());
    }

    #[test]
    fn partial_transpose_is_an_involution_and_complements_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = local_unitary(&mut rng);
        let rho = w_state().conjugate_by(&u).unwrap();
        let pt = partial_transpose(&rho, QUBIT_B).unwrap();
        let back = partial_transpose_matrix(&pt, QUBIT_B).unwrap();
        assert!((back - rho.entries()).camax() < 1e-15);
        let full = partial_transpose_matrix(&pt, QUBIT_A | QUBIT_C).unwrap();
        assert!((full - rho.entries().transpose()).camax() < 1e-15);
    }

    #[test]
    fn negativity_is_local_unitary_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let base = negativity(&w_state(), QUBIT_C).unwrap();
        for _ in 0..5 {
            let rho = w_state().conjugate_by(&local_unitary(&mut rng)).unwrap();
            assert_abs_diff_eq!(negativity(&rho, QUBIT_C).unwrap(), base, epsilon = 1e-10);
        }
    }

    #[test]
    fn gme_reference_states() {
        let opts = SdpOptions::default();
        let ghz = gme(&ghz_state(), opts).unwrap();
        assert_abs_diff_eq!(ghz.value, E_GHZ, epsilon = 1e-6);
        let w = gme(&w_state(), opts).unwrap();
        assert_abs_diff_eq!(w.value, E_W, epsilon = 1e-6);
        let prod = gme(&qubit_basis_state(0).unwrap(), opts).unwrap();
        assert!(prod.value < 1e-6);
    }

    #[test]
    fn gme_witness_is_decomposable() {
        let r = gme(&w_state(), SdpOptions::default()).unwrap();
        for k in 0..3 {
            let recomposed = &r.p[k] + partial_transpose_matrix(&r.q[k], crate::sdp::BIPARTITIONS[k]).unwrap();
            assert!((recomposed - &r.witness).camax() < 1e-12);
            for m in [&r.p[k], &r.q[k]] {
                let ev = hermitian_eigenvalues(m);
                assert!(ev[0] > -1e-7 && ev[7] < 1.0 + 1e-7);
            }
        }
        assert_abs_diff_eq!(w_state().expectation(&r.witness).re, r.witness_expectation, epsilon = 1e-9);
    }

    #[test]
    fn gme_vanishes_on_biseparable_mixtures() {
        // Mixture of Bell pairs across different cuts.
        let bell = |bits: [usize; 2]| {
            let mut v = DVector::zeros(8);
            v[bits[0]] = c(1.0, 0.0);
            v[bits[1]] = c(1.0, 0.0);
            DensityMatrix::pure(DensityKind::Qubits, &v).unwrap()
        };
        let states = [bell([0b000, 0b011]), bell([0b000, 0b110]), bell([0b000, 0b101])];
        let mix = (states[0].entries() + states[1].entries() + states[2].entries()) / c(3.0, 0.0);
        let mix = DensityMatrix::new(DensityKind::Qubits, mix).unwrap();
        for s in states.iter().chain(std::iter::once(&mix)) {
            assert!(gme(s, SdpOptions::default()).unwrap().value < 1e-6);
        }
    }

    #[test]
    fn gme_is_local_unitary_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let u = local_unitary(&mut rng);
        let rho = ghz_state().conjugate_by(&u).unwrap();
        assert_abs_diff_eq!(gme(&rho, SdpOptions::default()).unwrap().value, E_GHZ, epsilon = 1e-6);
    }

    #[test]
    fn wrong_kind_rejected() {
        let rho4 = DensityMatrix::maximally_mixed(DensityKind::Spin);
        assert!(gme(&rho4, SdpOptions::default()).is_err());
        assert!(concurrence_collective(&w_state()).is_err());
        assert!(negativity(&rho4, QUBIT_A).is_err());
    }
}
