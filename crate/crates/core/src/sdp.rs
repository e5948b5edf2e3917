//! Small semidefinite-program solver.
//!
//! Standard form with block-diagonal cones:
//!
//! ```text
//! primal:  min <C, X>   s.t. <A_i, X> = b_i,  X ⪰ 0
//! dual:    max b·y      s.t. Z = C - Σ y_i A_i ⪰ 0
//! ```
//!
//! Solved by an infeasible-start primal-dual interior-point method with the
//! HKM search direction and a Mehrotra predictor-corrector step.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hilbert::{DensityKind, DensityMatrix, C64, QUBIT_DIM};

const SYMMETRY_TOL: f64 = 1e-12;
const STEP_FRACTION: f64 = 0.98;

/// One upper-triangle entry (`row <= col`) of a symmetric constraint matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseEntry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Symmetric block-diagonal matrix stored by its upper-triangle entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintMatrix {
    pub entries: Vec<SparseEntry>,
}

impl ConstraintMatrix {
    /// Collects the nonzero upper-triangle entries of symmetric dense blocks.
    pub fn from_dense(blocks: &[DMatrix<f64>]) -> Result<Self> {
        let mut entries = Vec::new();
        for (b, m) in blocks.iter().enumerate() {
            check_symmetric(m)?;
            for c in 0..m.ncols() {
                for r in 0..=c {
                    if m[(r, c)] != 0.0 {
                        entries.push(SparseEntry { block: b, row: r, col: c, value: m[(r, c)] });
                    }
                }
            }
        }
        Ok(ConstraintMatrix { entries })
    }

    /// `Tr(A G)` for any (not necessarily symmetric) block matrix `G`.
    pub fn dot(&self, g: &[DMatrix<f64>]) -> f64 {
        self.entries
            .iter()
            .map(|e| {
                let m = &g[e.block];
                if e.row == e.col {
                    e.value * m[(e.row, e.row)]
                } else {
                    e.value * (m[(e.row, e.col)] + m[(e.col, e.row)])
                }
            })
            .sum()
    }

    fn add_scaled(&self, alpha: f64, out: &mut [DMatrix<f64>]) {
        for e in &self.entries {
            out[e.block][(e.row, e.col)] += alpha * e.value;
            if e.row != e.col {
                out[e.block][(e.col, e.row)] += alpha * e.value;
            }
        }
    }

    pub fn to_dense(&self, sizes: &[usize]) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = sizes.iter().map(|&s| DMatrix::zeros(s, s)).collect();
        self.add_scaled(1.0, &mut out);
        out
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    let dev = (m - m.transpose()).amax();
    if dev > SYMMETRY_TOL {
        return Err(Error::NotHermitian(dev));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ConicProgram {
    blocks: Vec<usize>,
    c: Vec<DMatrix<f64>>,
    a: Vec<ConstraintMatrix>,
    b: DVector<f64>,
    dependent: bool,
}

impl ConicProgram {
    pub fn new(c: Vec<DMatrix<f64>>, a: Vec<ConstraintMatrix>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
        }
        if a.is_empty() || c.is_empty() {
            return Err(Error::InvalidArgument("program needs at least one block and one constraint".into()));
        }
        for m in &c {
            check_symmetric(m)?;
        }
        let blocks: Vec<usize> = c.iter().map(|m| m.nrows()).collect();
        for (i, ai) in a.iter().enumerate() {
            for e in &ai.entries {
                if e.block >= blocks.len() || e.col >= blocks[e.block] || e.row > e.col || !e.value.is_finite() {
                    return Err(Error::InvalidArgument(format!("constraint {i} has a malformed entry {e:?}")));
                }
            }
        }
        if b.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("right-hand side must be finite".into()));
        }
        let mut prog = ConicProgram { blocks, c, a, b: DVector::from_vec(b), dependent: false };
        prog.dependent = prog.min_gram_eigenvalue() < 1e-10 * prog.max_gram_diagonal().max(1.0);
        Ok(prog)
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.blocks
    }

    pub fn objective(&self) -> &[DMatrix<f64>] {
        &self.c
    }

    pub fn constraints(&self) -> &[ConstraintMatrix] {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn num_constraints(&self) -> usize {
        self.a.len()
    }

    /// True when the constraint matrices are numerically dependent.
    pub fn is_rank_deficient(&self) -> bool {
        self.dependent
    }

    fn gram(&self) -> DMatrix<f64> {
        let m = self.a.len();
        let dense: Vec<Vec<DMatrix<f64>>> = self.a.iter().map(|a| a.to_dense(&self.blocks)).collect();
        DMatrix::from_fn(m, m, |i, j| self.a[i].dot(&dense[j]))
    }

    fn min_gram_eigenvalue(&self) -> f64 {
        self.gram().symmetric_eigenvalues().min()
    }

    fn max_gram_diagonal(&self) -> f64 {
        self.gram().diagonal().max()
    }

    fn apply_a(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(self.a.len(), self.a.iter().map(|a| a.dot(x)))
    }

    fn apply_at(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out = self.zeros();
        for (a, &yi) in self.a.iter().zip(y.iter()) {
            a.add_scaled(yi, &mut out);
        }
        out
    }

    fn zeros(&self) -> Vec<DMatrix<f64>> {
        self.blocks.iter().map(|&s| DMatrix::zeros(s, s)).collect()
    }

    fn identity(&self, scale: f64) -> Vec<DMatrix<f64>> {
        self.blocks.iter().map(|&s| DMatrix::identity(s, s) * scale).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    MaxIter,
    NumericalFailure,
}

impl std::fmt::Display for SdpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SdpStatus::Optimal => "optimal",
            SdpStatus::MaxIter => "max_iter",
            SdpStatus::NumericalFailure => "numerical_failure",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateRecord {
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub relative_gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: Vec<DMatrix<f64>>,
    pub y: DVector<f64>,
    pub z: Vec<DMatrix<f64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub relative_gap: f64,
    /// `‖b - A(X)‖ / (1 + ‖b‖)`.
    pub primal_residual: f64,
    /// `‖C - Z - Aᵀy‖ / (1 + ‖C‖)`.
    pub dual_residual: f64,
    pub iterations: usize,
    pub status: SdpStatus,
    pub history: Vec<IterateRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions { tol: 1e-8, max_iter: 100 }
    }
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn frob(a: &[DMatrix<f64>]) -> f64 {
    inner(a, a).sqrt()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Largest step `α` keeping `X + α dX ⪰ 0`, infinite when unbounded.
fn max_step(x: &[DMatrix<f64>], dx: &[DMatrix<f64>]) -> Option<f64> {
    let mut alpha = f64::INFINITY;
    for (xb, db) in x.iter().zip(dx) {
        let l = Cholesky::new(xb.clone())?.unpack();
        let tmp = l.solve_lower_triangular(db)?;
        let mut s = l.solve_lower_triangular(&tmp.transpose())?;
        symmetrize(&mut s);
        let lmin = s.symmetric_eigenvalues().min();
        if lmin < 0.0 {
            alpha = alpha.min(-1.0 / lmin);
        }
    }
    Some(alpha)
}

fn inverse_spd(z: &[DMatrix<f64>]) -> Option<Vec<DMatrix<f64>>> {
    z.iter()
        .map(|m| {
            let mut inv = Cholesky::new(m.clone())?.inverse();
            symmetrize(&mut inv);
            Some(inv)
        })
        .collect()
}

enum Factor {
    Chol(Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Factor {
    fn new(m: DMatrix<f64>) -> Option<Self> {
        match Cholesky::new(m.clone()) {
            Some(c) => Some(Factor::Chol(c)),
            None => {
                let lu = m.lu();
                lu.is_invertible().then_some(Factor::Lu(lu))
            }
        }
    }

    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        let out = match self {
            Factor::Chol(c) => c.solve(rhs),
            Factor::Lu(lu) => lu.solve(rhs)?,
        };
        out.iter().all(|v| v.is_finite()).then_some(out)
    }
}

/// Entries `(row, col, value)` of one constraint within one block.
type BlockEntries = Vec<(usize, usize, f64)>;
/// Search direction `(dy, dX, dZ)`.
type Direction = (DVector<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>);

struct Workspace<'a> {
    prog: &'a ConicProgram,
    /// Per block: constraints touching it, with their entries in that block.
    by_block: Vec<Vec<(usize, BlockEntries)>>,
}

impl<'a> Workspace<'a> {
    fn new(prog: &'a ConicProgram) -> Self {
        let mut by_block: Vec<Vec<(usize, BlockEntries)>> = vec![Vec::new(); prog.blocks.len()];
        for (i, a) in prog.a.iter().enumerate() {
            for e in &a.entries {
                let list = &mut by_block[e.block];
                if list.last().map(|(j, _)| *j) != Some(i) {
                    list.push((i, Vec::new()));
                }
                list.last_mut().unwrap().1.push((e.row, e.col, e.value));
            }
        }
        Workspace { prog, by_block }
    }

    /// HKM Schur complement `M_ij = Tr(A_i X A_j Z⁻¹)`.
    fn schur(&self, x: &[DMatrix<f64>], zi: &[DMatrix<f64>]) -> DMatrix<f64> {
        let m = self.prog.a.len();
        let mut out = DMatrix::zeros(m, m);
        for (b, list) in self.by_block.iter().enumerate() {
            let (xb, zb) = (&x[b], &zi[b]);
            let s = xb.nrows();
            let mut g = DMatrix::zeros(s, s);
            for (k, (i, ent)) in list.iter().enumerate() {
                // G = X A_i Z⁻¹
                g.fill(0.0);
                for &(r, c, v) in ent {
                    g.ger(v, &xb.column(r), &zb.row(c).transpose(), 1.0);
                    if r != c {
                        g.ger(v, &xb.column(c), &zb.row(r).transpose(), 1.0);
                    }
                }
                for (j, entj) in &list[k..] {
                    let mut acc = 0.0;
                    for &(r, c, v) in entj {
                        acc += if r == c { v * g[(r, r)] } else { v * (g[(r, c)] + g[(c, r)]) };
                    }
                    out[(*i, *j)] += acc;
                }
            }
        }
        let upper = out.upper_triangle();
        &upper + upper.transpose() - DMatrix::from_diagonal(&upper.diagonal())
    }
}

fn mat_mul3(a: &[DMatrix<f64>], b: &[DMatrix<f64>], c: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    a.iter().zip(b).zip(c).map(|((x, y), z)| x * y * z).collect()
}

/// Solves `prog`; the returned status says whether tolerances were met.
pub fn solve_sdp(prog: &ConicProgram, tol: f64, max_iter: usize) -> SdpSolution {
    let ws = Workspace::new(prog);
    let n: f64 = prog.blocks.iter().sum::<usize>() as f64;
    let b = &prog.b;
    let b_norm = b.norm();
    let c_norm = frob(&prog.c);

    let a_norm_max = prog
        .a
        .iter()
        .map(|a| frob(&a.to_dense(&prog.blocks)))
        .fold(0.0, f64::max);
    let mut xi = (n.sqrt()).max(1.0);
    for (a, bi) in prog.a.iter().zip(b.iter()) {
        let an = frob(&a.to_dense(&prog.blocks));
        xi = xi.max(n.sqrt() * (1.0 + bi.abs()) / (1.0 + an));
    }
    let eta = (n.sqrt()).max(1.0).max((1.0 + c_norm.max(a_norm_max)) / n.sqrt());
    let mut x = prog.identity(xi);
    let mut z = prog.identity(eta);
    let mut y = DVector::zeros(prog.a.len());
    let mut history = Vec::new();
    let mut status = SdpStatus::MaxIter;
    let mut iterations = 0;

    let measure = |x: &[DMatrix<f64>], y: &DVector<f64>, z: &[DMatrix<f64>]| {
        let rp = b - prog.apply_a(x);
        let aty = prog.apply_at(y);
        let rd: Vec<DMatrix<f64>> = prog.c.iter().zip(z).zip(&aty).map(|((c, z), a)| c - z - a).collect();
        let pobj = inner(&prog.c, x);
        let dobj = b.dot(y);
        let rec = IterateRecord {
            primal_objective: pobj,
            dual_objective: dobj,
            relative_gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
            primal_residual: rp.norm() / (1.0 + b_norm),
            dual_residual: frob(&rd) / (1.0 + c_norm),
        };
        (rp, rd, rec)
    };

    loop {
        let (rp, rd, rec) = measure(&x, &y, &z);
        history.push(rec);
        if rec.relative_gap < tol && rec.primal_residual < tol && rec.dual_residual < tol {
            status = SdpStatus::Optimal;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        if !(rec.primal_objective.is_finite() && rec.dual_objective.is_finite()) {
            status = SdpStatus::NumericalFailure;
            break;
        }
        iterations += 1;

        let step = (|| {
            let zi = inverse_spd(&z)?;
            let factor = Factor::new(ws.schur(&x, &zi))?;
            let mu = inner(&x, &z) / n;
            let xrz = mat_mul3(&x, &rd, &zi);
            let base: DVector<f64> = DVector::from_iterator(prog.a.len(), prog.a.iter().map(|a| a.dot(&xrz))) + &rp;

            let direction = |k: &[DMatrix<f64>]| -> Option<Direction> {
                let rhs = &base - prog.apply_a(k);
                let dy = factor.solve(&rhs)?;
                let atdy = prog.apply_at(&dy);
                let dz: Vec<DMatrix<f64>> = rd.iter().zip(&atdy).map(|(r, a)| r - a).collect();
                let xdz = mat_mul3(&x, &dz, &zi);
                let dx = k
                    .iter()
                    .zip(&xdz)
                    .map(|(kb, t)| {
                        let mut d = kb - t;
                        symmetrize(&mut d);
                        d
                    })
                    .collect();
                Some((dy, dx, dz))
            };

            // predictor: K = -X
            let k_aff: Vec<DMatrix<f64>> = x.iter().map(|m| -m).collect();
            let (_, dxa, dza) = direction(&k_aff)?;
            let ap = max_step(&x, &dxa)?.min(1.0);
            let ad = max_step(&z, &dza)?.min(1.0);
            let xa: Vec<DMatrix<f64>> = x.iter().zip(&dxa).map(|(a, d)| a + d * ap).collect();
            let za: Vec<DMatrix<f64>> = z.iter().zip(&dza).map(|(a, d)| a + d * ad).collect();
            let mu_aff = inner(&xa, &za) / n;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // corrector: K = σμZ⁻¹ - X - dXa dZa Z⁻¹
            let k: Vec<DMatrix<f64>> = (0..x.len())
                .map(|i| &zi[i] * (sigma * mu) - &x[i] - &dxa[i] * &dza[i] * &zi[i])
                .collect();
            let (dy, dx, dz) = direction(&k)?;
            let ap = (STEP_FRACTION * max_step(&x, &dx)?).min(1.0);
            let ad = (STEP_FRACTION * max_step(&z, &dz)?).min(1.0);
            Some((dy, dx, dz, ap, ad))
        })();

        match step {
            Some((dy, dx, dz, ap, ad)) => {
                for (xb, d) in x.iter_mut().zip(&dx) {
                    *xb += d * ap;
                }
                for (zb, d) in z.iter_mut().zip(&dz) {
                    *zb += d * ad;
                }
                y += dy * ad;
            }
            None => {
                status = SdpStatus::NumericalFailure;
                break;
            }
        }
    }

    let last = *history.last().expect("at least one record");
    SdpSolution {
        x,
        y,
        z,
        primal_objective: last.primal_objective,
        dual_objective: last.dual_objective,
        relative_gap: last.relative_gap,
        primal_residual: last.primal_residual,
        dual_residual: last.dual_residual,
        iterations,
        status,
        history,
    }
}

/// Real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]`.
pub fn hermitian_embed(h: &DMatrix<C64>) -> Result<DMatrix<f64>> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch { expected: h.nrows(), found: h.ncols() });
    }
    let dev = (h - h.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if dev > SYMMETRY_TOL {
        return Err(Error::NotHermitian(dev));
    }
    Ok(embed_unchecked(h))
}

fn embed_unchecked(h: &DMatrix<C64>) -> DMatrix<f64> {
    let d = h.nrows();
    DMatrix::from_fn(2 * d, 2 * d, |r, c| {
        let z = h[(r % d, c % d)];
        match (r < d, c < d) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Inverse of [`hermitian_embed`], averaging the redundant copies.
pub fn hermitian_extract(m: &DMatrix<f64>) -> Result<DMatrix<C64>> {
    if !m.is_square() || m.nrows() % 2 != 0 {
        return Err(Error::InvalidArgument("embedding must be square with even size".into()));
    }
    let d = m.nrows() / 2;
    Ok(DMatrix::from_fn(d, d, |r, c| {
        let re = 0.5 * (m[(r, c)] + m[(r + d, c + d)]);
        let im = 0.5 * (m[(r + d, c)] - m[(r, c + d)]);
        C64::new(re, im)
    }))
}

/// Subset of the qubits {A, B, C} as a bit mask: A = 4, B = 2, C = 1.
pub type QubitMask = u8;

pub const QUBIT_A: QubitMask = 4;
pub const QUBIT_B: QubitMask = 2;
pub const QUBIT_C: QubitMask = 1;

/// Partial transpose of an 8×8 matrix on the qubits in `mask`, which must be
/// a nonempty proper subset.
pub fn partial_transpose_matrix(m: &DMatrix<C64>, mask: QubitMask) -> Result<DMatrix<C64>> {
    if mask == 0 || mask >= 7 {
        return Err(Error::InvalidArgument(format!("bipartition mask {mask:#05b} is not a nonempty proper subset")));
    }
    if m.nrows() != QUBIT_DIM || m.ncols() != QUBIT_DIM {
        return Err(Error::DimensionMismatch { expected: QUBIT_DIM, found: m.nrows() });
    }
    let mask = mask as usize;
    Ok(DMatrix::from_fn(QUBIT_DIM, QUBIT_DIM, |r, c| {
        let r2 = (r & !mask) | (c & mask);
        let c2 = (c & !mask) | (r & mask);
        m[(r2, c2)]
    }))
}

/// Orthonormal basis of 8×8 Hermitian matrices under `Tr(AB)`.
pub fn hermitian_basis(d: usize) -> Vec<DMatrix<C64>> {
    let mut out = Vec::with_capacity(d * d);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..d {
        let mut m = DMatrix::zeros(d, d);
        m[(j, j)] = C64::new(1.0, 0.0);
        out.push(m);
    }
    for j in 0..d {
        for k in j + 1..d {
            let mut m = DMatrix::zeros(d, d);
            m[(j, k)] = C64::new(s, 0.0);
            m[(k, j)] = C64::new(s, 0.0);
            out.push(m);
            let mut m = DMatrix::zeros(d, d);
            m[(j, k)] = C64::new(0.0, s);
            m[(k, j)] = C64::new(0.0, -s);
            out.push(m);
        }
    }
    out
}

/// The three bipartitions `M | rest`, with the transpose taken on `M`.
pub const BIPARTITIONS: [QubitMask; 3] = [QUBIT_A, QUBIT_B, QUBIT_C];

/// Witness program `min Tr(Wρ)` over `W = P_M + Q_M^{T_M}`, `0 ⪯ P_M, Q_M ⪯ I`.
///
/// The free variables are the coordinates of `W, P_A, P_B, P_C` in
/// [`hermitian_basis`]; they form the dual vector `y`. Each bipartition
/// contributes the cone blocks `P_M`, `I - P_M`, `Q_M`, `I - Q_M` with
/// `Q_M = (W - P_M)^{T_M}`, every block embedded as a real 16×16 matrix. The
/// dual objective is `-Tr(Wρ)`.
#[derive(Debug, Clone)]
pub struct GmeProgram {
    pub program: ConicProgram,
    basis: Vec<DMatrix<C64>>,
}

impl std::ops::Deref for GmeProgram {
    type Target = ConicProgram;

    fn deref(&self) -> &ConicProgram {
        &self.program
    }
}

/// Witness operators recovered from a dual vector.
#[derive(Debug, Clone)]
pub struct WitnessParts {
    pub w: DMatrix<C64>,
    pub p: [DMatrix<C64>; 3],
    pub q: [DMatrix<C64>; 3],
}

impl GmeProgram {
    fn combine(&self, coords: &[f64]) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(QUBIT_DIM, QUBIT_DIM);
        for (b, &c) in self.basis.iter().zip(coords) {
            m += b * C64::new(c, 0.0);
        }
        m
    }

    pub fn witness_parts(&self, y: &DVector<f64>) -> WitnessParts {
        let nb = self.basis.len();
        let w = self.combine(&y.as_slice()[..nb]);
        let p: [DMatrix<C64>; 3] = std::array::from_fn(|k| self.combine(&y.as_slice()[(k + 1) * nb..(k + 2) * nb]));
        let q = std::array::from_fn(|k| {
            partial_transpose_matrix(&(&w - &p[k]), BIPARTITIONS[k]).expect("valid bipartition")
        });
        WitnessParts { w, p, q }
    }

    /// `Tr(Wρ)` for the witness encoded by `y`.
    pub fn witness_value(&self, y: &DVector<f64>) -> f64 {
        -self.program.rhs().dot(y)
    }
}

pub fn build_gme_program(rho8: &DensityMatrix) -> Result<GmeProgram> {
    if rho8.kind() != DensityKind::Qubits {
        return Err(Error::InvalidDensity("witness program needs an 8x8 three-qubit state".into()));
    }
    let basis = hermitian_basis(QUBIT_DIM);
    let nb = basis.len();
    let e = 2 * QUBIT_DIM;
    let nblocks = 4 * BIPARTITIONS.len();
    let id = DMatrix::<f64>::identity(e, e);
    let zero = DMatrix::<f64>::zeros(e, e);
    let mut c = Vec::with_capacity(nblocks);
    for _ in BIPARTITIONS {
        c.extend([zero.clone(), id.clone(), zero.clone(), id.clone()]);
    }

    let embedded: Vec<DMatrix<f64>> = basis.iter().map(embed_unchecked).collect();
    let transposed: Vec<Vec<DMatrix<f64>>> = BIPARTITIONS
        .iter()
        .map(|&m| basis.iter().map(|b| embed_unchecked(&partial_transpose_matrix(b, m).expect("valid"))).collect())
        .collect();

    // A_i = -F_i where the cone blocks read F0 + Σ y_i F_i.
    let mut a = Vec::with_capacity(4 * nb);
    let mut b = Vec::with_capacity(4 * nb);
    for l in 0..nb {
        let mut blocks = vec![zero.clone(); nblocks];
        for k in 0..BIPARTITIONS.len() {
            blocks[4 * k + 2] = -&transposed[k][l];
            blocks[4 * k + 3] = transposed[k][l].clone();
        }
        a.push(ConstraintMatrix::from_dense(&blocks)?);
        b.push(-rho8.expectation(&basis[l]).re);
    }
    for k in 0..BIPARTITIONS.len() {
        for l in 0..nb {
            let mut blocks = vec![zero.clone(); nblocks];
            blocks[4 * k] = -&embedded[l];
            blocks[4 * k + 1] = embedded[l].clone();
            blocks[4 * k + 2] = transposed[k][l].clone();
            blocks[4 * k + 3] = -&transposed[k][l];
            a.push(ConstraintMatrix::from_dense(&blocks)?);
            b.push(0.0);
        }
    }
    Ok(GmeProgram { program: ConicProgram::new(c, a, b)?, basis })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_block_program(c: DMatrix<f64>, a: Vec<DMatrix<f64>>, b: Vec<f64>) -> ConicProgram {
        let a = a.into_iter().map(|m| ConstraintMatrix::from_dense(&[m]).unwrap()).collect();
        ConicProgram::new(vec![c], a, b).unwrap()
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<C64> {
        let a = DMatrix::from_fn(d, d, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    }

    #[test]
    fn two_by_two_determinant_program() {
        // min x  s.t. [[x, 1], [1, x]] ⪰ 0, written as the dual of a
        // primal with one equality.
        let c = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        let prog = single_block_program(c, vec![a], vec![-1.0]);
        let sol = solve_sdp(&prog, 1e-8, 100);
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert_abs_diff_eq!(sol.y[0], 1.0, epsilon = 1e-7);
    }

    #[test]
    fn trace_program() {
        // min Tr(X) s.t. X11 = 1
        let c = DMatrix::identity(2, 2);
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let prog = single_block_program(c, vec![a], vec![1.0]);
        let sol = solve_sdp(&prog, 1e-8, 100);
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert_abs_diff_eq!(sol.primal_objective, 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(sol.x[0][(0, 0)], 1.0, epsilon = 1e-6);
        assert!(sol.x[0][(1, 1)].abs() < 1e-6);
    }

    #[test]
    fn max_eigenvalue_program() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = DMatrix::from_fn(6, 6, |_, _| rng.gen_range(-1.0..1.0));
        let m = (&r + r.transpose()) * 0.5;
        // primal: min <-M, X>... written as max t: dual max -t with tI - M ⪰ 0
        // <=> primal min <M, X> with Tr X = 1 reversed; use min <-M, X> s.t. Tr X = 1.
        let prog = single_block_program(-&m, vec![DMatrix::identity(6, 6)], vec![1.0]);
        let sol = solve_sdp(&prog, 1e-8, 100);
        assert_eq!(sol.status, SdpStatus::Optimal);
        let lmax = m.symmetric_eigenvalues().max();
        assert_abs_diff_eq!(-sol.primal_objective, lmax, epsilon = 1e-7);
        assert_abs_diff_eq!(-sol.dual_objective, lmax, epsilon = 1e-7);
    }

    #[test]
    fn weak_duality_at_feasible_iterates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = DMatrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
        let m = (&r + r.transpose()) * 0.5;
        let prog = single_block_program(m, vec![DMatrix::identity(5, 5)], vec![1.0]);
        let sol = solve_sdp(&prog, 1e-8, 100);
        for rec in &sol.history {
            if rec.primal_residual < 1e-9 && rec.dual_residual < 1e-9 {
                assert!(rec.primal_objective >= rec.dual_objective - 1e-9);
            }
        }
        assert!(sol.history.iter().any(|r| r.primal_residual < 1e-9 && r.dual_residual < 1e-9));
    }

    #[test]
    fn solver_is_deterministic() {
        let rho = DensityMatrix::maximally_mixed(DensityKind::Qubits);
        let prog = build_gme_program(&rho).unwrap();
        let a = solve_sdp(&prog, 1e-8, 100);
        let b = solve_sdp(&prog, 1e-8, 100);
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.y, b.y);
    }

    #[test]
    fn dependent_constraints_flagged() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let prog = single_block_program(DMatrix::identity(2, 2), vec![a.clone(), a * 2.0], vec![1.0, 2.0]);
        assert!(prog.is_rank_deficient());
        let ok = single_block_program(
            DMatrix::identity(2, 2),
            vec![DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])],
            vec![1.0],
        );
        assert!(!ok.is_rank_deficient());
    }

    #[test]
    fn embed_real_and_pauli_y() {
        let h = DMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(2.0, 0.0), C64::new(-1.0, 0.0)]);
        let e = hermitian_embed(&h).unwrap();
        let re = h.map(|z| z.re);
        assert_eq!(e.view((0, 0), (2, 2)), re);
        assert_eq!(e.view((2, 2), (2, 2)), re);
        assert!(e.view((0, 2), (2, 2)).iter().all(|&x| x == 0.0));

        let y = DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0), C64::new(0.0, 0.0)]);
        let mut ev: Vec<f64> = hermitian_embed(&y).unwrap().symmetric_eigenvalues().iter().cloned().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        for (a, b) in ev.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        let bad = DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
        assert!(hermitian_embed(&bad).is_err());
    }

    #[test]
    fn embed_duplicates_spectrum_and_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(&mut rng, 8);
        let e = hermitian_embed(&h).unwrap();
        let mut want: Vec<f64> = h.clone().symmetric_eigenvalues().iter().flat_map(|&x| [x, x]).collect();
        want.sort_by(|a, b| a.total_cmp(b));
        let mut got: Vec<f64> = e.clone().symmetric_eigenvalues().iter().cloned().collect();
        got.sort_by(|a, b| a.total_cmp(b));
        for (a, b) in got.iter().zip(&want) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        let back = hermitian_extract(&e).unwrap();
        assert!((hermitian_embed(&back).unwrap() - e).amax() < 1e-10);
    }

    #[test]
    fn basis_is_orthonormal() {
        let basis = hermitian_basis(8);
        assert_eq!(basis.len(), 64);
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let t = (a * b).trace();
                assert_abs_diff_eq!(t.re, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-15);
                assert_abs_diff_eq!(t.im, 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn gme_program_structure() {
        let rho = DensityMatrix::maximally_mixed(DensityKind::Qubits);
        let prog = build_gme_program(&rho).unwrap();
        assert_eq!(prog.block_sizes(), &[16; 12]);
        assert_eq!(prog.num_constraints(), 256);
        assert!(!prog.is_rank_deficient());
    }

    #[test]
    fn maximally_mixed_has_no_witness() {
        let rho = DensityMatrix::maximally_mixed(DensityKind::Qubits);
        let prog = build_gme_program(&rho).unwrap();
        let sol = solve_sdp(&prog, 1e-8, 100);
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!(prog.witness_value(&sol.y) > -1e-7);
    }

    #[test]
    fn partial_transpose_rejects_trivial_masks() {
        let m = DMatrix::<C64>::identity(8, 8);
        assert!(partial_transpose_matrix(&m, 0).is_err());
        assert!(partial_transpose_matrix(&m, 7).is_err());
        assert!(partial_transpose_matrix(&DMatrix::<C64>::identity(4, 4), 1).is_err());
    }
}
