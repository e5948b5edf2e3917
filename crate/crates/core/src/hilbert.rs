//! Operator and state algebra for a spin-3/2 pseudospin coupled to a
//! truncated boson mode.
//!
//! Spin index `s` labels `m = s - 3/2`, so the spin basis runs
//! `|-3/2>, |-1/2>, |1/2>, |3/2>`. Composite states use the spin-major index
//! `s * (n_max + 1) + n`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const SPIN_DIM: usize = 4;
pub const QUBIT_DIM: usize = 8;
/// Smallest truncation for which every ladder block exists.
pub const MIN_N_MAX: usize = 3;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-9;
const NORM_TOL: f64 = 1e-12;

/// Magnetic quantum number of spin index `s`.
pub fn spin_m(s: usize) -> f64 {
    s as f64 - 1.5
}

/// Spin index of magnetic quantum number `m`.
pub fn spin_index(m: f64) -> Option<usize> {
    let s = m + 1.5;
    if s.fract() != 0.0 || !(0.0..=3.0).contains(&s) {
        return None;
    }
    Some(s as usize)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub delta: f64,
    pub omega: f64,
    pub g: f64,
}

impl ModelParams {
    pub fn new(delta: f64, omega: f64, g: f64) -> Result<Self> {
        let p = ModelParams { delta, omega, g };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::InvalidParams(format!("omega must be positive, got {}", self.omega)));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::InvalidParams(format!("delta must be non-negative, got {}", self.delta)));
        }
        if !(self.g.is_finite() && self.g >= 0.0) {
            return Err(Error::InvalidParams(format!("g must be non-negative, got {}", self.g)));
        }
        if !(self.delta / self.omega).is_finite() || !(self.g / self.omega).is_finite() {
            return Err(Error::InvalidParams("ratios delta/omega and g/omega must be finite".into()));
        }
        Ok(())
    }

    pub fn with_g(&self, g: f64) -> Result<Self> {
        ModelParams::new(self.delta, self.omega, g)
    }

    /// Displacement scale g/ω.
    pub fn ratio(&self) -> f64 {
        self.g / self.omega
    }

    /// Polaron shift g²/ω.
    pub fn shift(&self) -> f64 {
        self.g * self.g / self.omega
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FockSpace {
    n_max: usize,
}

impl FockSpace {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < MIN_N_MAX {
            return Err(Error::FockTooSmall { n_max, min: MIN_N_MAX });
        }
        Ok(FockSpace { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Number of retained Fock states.
    pub fn levels(&self) -> usize {
        self.n_max + 1
    }

    /// Composite dimension 4·(n_max+1).
    pub fn dim(&self) -> usize {
        SPIN_DIM * self.levels()
    }

    pub fn index(&self, s: usize, n: usize) -> usize {
        debug_assert!(s < SPIN_DIM && n <= self.n_max);
        s * self.levels() + n
    }

    /// Inverse of [`FockSpace::index`].
    pub fn label(&self, idx: usize) -> (usize, usize) {
        (idx / self.levels(), idx % self.levels())
    }
}

/// Reference frame of a composite state or Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    /// Qubit splitting along z: `-ΔJz + ωa†a + (g/2)(a†+a)(J+ + J-)`.
    Original,
    /// After the collective y-rotation: `ΔJx + ωa†a + g(a†+a)Jz`.
    Rotated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Spin,
    Fock { n_max: usize },
    Composite { n_max: usize },
    Qubits,
}

impl Basis {
    pub fn dim(&self) -> usize {
        match *self {
            Basis::Spin => SPIN_DIM,
            Basis::Fock { n_max } => n_max + 1,
            Basis::Composite { n_max } => SPIN_DIM * (n_max + 1),
            Basis::Qubits => QUBIT_DIM,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    basis: Basis,
    entries: DMatrix<C64>,
}

impl OperatorMatrix {
    pub fn new(basis: Basis, entries: DMatrix<C64>) -> Result<Self> {
        let d = basis.dim();
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: entries.nrows().max(entries.ncols()) });
        }
        Ok(OperatorMatrix { basis, entries })
    }

    pub fn from_real(basis: Basis, entries: &DMatrix<f64>) -> Result<Self> {
        OperatorMatrix::new(basis, entries.map(|x| C64::new(x, 0.0)))
    }

    pub fn identity(basis: Basis) -> Self {
        let d = basis.dim();
        OperatorMatrix { basis, entries: DMatrix::identity(d, d) }
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.entries[(r, c)]
    }

    pub fn adjoint(&self) -> Self {
        OperatorMatrix { basis: self.basis, entries: self.entries.adjoint() }
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn matmul(&self, rhs: &OperatorMatrix) -> Result<Self> {
        self.same_basis(rhs)?;
        Ok(OperatorMatrix { basis: self.basis, entries: &self.entries * &rhs.entries })
    }

    pub fn add(&self, rhs: &OperatorMatrix) -> Result<Self> {
        self.same_basis(rhs)?;
        Ok(OperatorMatrix { basis: self.basis, entries: &self.entries + &rhs.entries })
    }

    pub fn scale(&self, c: C64) -> Self {
        OperatorMatrix { basis: self.basis, entries: &self.entries * c }
    }

    /// Largest entrywise modulus of `M - M†`.
    pub fn hermiticity_deviation(&self) -> f64 {
        max_abs(&(&self.entries - self.entries.adjoint()))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    /// Real part, provided every imaginary part is below `tol`.
    pub fn to_real(&self, tol: f64) -> Option<DMatrix<f64>> {
        if self.entries.iter().any(|z| z.im.abs() > tol) {
            return None;
        }
        Some(self.entries.map(|z| z.re))
    }

    fn same_basis(&self, rhs: &OperatorMatrix) -> Result<()> {
        if self.basis != rhs.basis {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: rhs.dim() });
        }
        Ok(())
    }
}

pub(crate) fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    fock: FockSpace,
    frame: Frame,
    amplitudes: DVector<C64>,
}

impl StateVector {
    /// Validates the dimension and unit norm.
    pub fn new(fock: FockSpace, frame: Frame, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != fock.dim() {
            return Err(Error::DimensionMismatch { expected: fock.dim(), found: amplitudes.len() });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidArgument(format!("state norm is {norm}, expected 1")));
        }
        Ok(StateVector { fock, frame, amplitudes })
    }

    /// Normalizes `amplitudes` before validating.
    pub fn normalized(fock: FockSpace, frame: Frame, amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidArgument("cannot normalize a zero or non-finite vector".into()));
        }
        StateVector::new(fock, frame, amplitudes / C64::new(norm, 0.0))
    }

    /// Product state `|m(s)> ⊗ |n>`.
    pub fn product(fock: FockSpace, frame: Frame, s: usize, n: usize) -> Result<Self> {
        if s >= SPIN_DIM || n > fock.n_max() {
            return Err(Error::InvalidArgument(format!("label ({s}, {n}) outside the basis")));
        }
        let mut amps = DVector::zeros(fock.dim());
        amps[fock.index(s, n)] = C64::new(1.0, 0.0);
        Ok(StateVector { fock, frame, amplitudes: amps })
    }

    pub(crate) fn from_raw(fock: FockSpace, frame: Frame, amplitudes: DVector<C64>) -> Self {
        debug_assert_eq!(amplitudes.len(), fock.dim());
        StateVector { fock, frame, amplitudes }
    }

    pub fn fock(&self) -> FockSpace {
        self.fock
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn amplitude(&self, s: usize, n: usize) -> C64 {
        self.amplitudes[self.fock.index(s, n)]
    }

    /// Euclidean distance between amplitude vectors.
    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        if self.fock != other.fock || self.frame != other.frame {
            return Err(Error::DimensionMismatch { expected: self.amplitudes.len(), found: other.amplitudes.len() });
        }
        Ok((&self.amplitudes - &other.amplitudes).norm())
    }

    /// Expresses the state in `frame`.
    pub fn in_frame(&self, frame: Frame) -> StateVector {
        if frame == self.frame {
            return self.clone();
        }
        let v = collective_rotation();
        // psi_rot = (V ⊗ 1) psi_orig
        let rot = match frame {
            Frame::Rotated => v,
            Frame::Original => v.transpose(),
        };
        StateVector {
            fock: self.fock,
            frame,
            amplitudes: apply_spin_real(&rot, &self.amplitudes, self.fock),
        }
    }
}

/// Applies a real 4×4 spin matrix to the spin factor of a composite vector.
pub(crate) fn apply_spin_real(r: &DMatrix<f64>, v: &DVector<C64>, fock: FockSpace) -> DVector<C64> {
    let l = fock.levels();
    let mut out = DVector::zeros(v.len());
    for a in 0..SPIN_DIM {
        for b in 0..SPIN_DIM {
            let c = r[(a, b)];
            if c == 0.0 {
                continue;
            }
            for n in 0..l {
                out[a * l + n] += v[b * l + n] * c;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DensityKind {
    /// 4×4 collective spin sector.
    Spin,
    /// 8×8 three-qubit space, qubit A the most significant bit.
    Qubits,
}

impl DensityKind {
    pub fn dim(&self) -> usize {
        match self {
            DensityKind::Spin => SPIN_DIM,
            DensityKind::Qubits => QUBIT_DIM,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    kind: DensityKind,
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(kind: DensityKind, entries: DMatrix<C64>) -> Result<Self> {
        let d = kind.dim();
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: entries.nrows().max(entries.ncols()) });
        }
        let herm = max_abs(&(&entries - entries.adjoint()));
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidDensity(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = entries.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensity(format!("trace is {tr}, expected 1")));
        }
        let sym = (&entries + entries.adjoint()) * C64::new(0.5, 0.0);
        let min_eig = hermitian_eigenvalues(&sym).iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL {
            return Err(Error::InvalidDensity(format!("minimum eigenvalue {min_eig:.3e} is negative")));
        }
        Ok(DensityMatrix { kind, entries })
    }

    pub fn pure(kind: DensityKind, psi: &DVector<C64>) -> Result<Self> {
        if psi.len() != kind.dim() {
            return Err(Error::DimensionMismatch { expected: kind.dim(), found: psi.len() });
        }
        let norm = psi.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidDensity("zero or non-finite state vector".into()));
        }
        let v = psi / C64::new(norm, 0.0);
        DensityMatrix::new(kind, &v * v.adjoint())
    }

    /// Builds from `dim × dim` row-major entries.
    pub fn from_row_major(kind: DensityKind, entries: &[C64]) -> Result<Self> {
        let d = kind.dim();
        if entries.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, found: entries.len() });
        }
        DensityMatrix::new(kind, DMatrix::from_row_slice(d, d, entries))
    }

    pub fn maximally_mixed(kind: DensityKind) -> Self {
        let d = kind.dim();
        DensityMatrix { kind, entries: DMatrix::identity(d, d) / C64::new(d as f64, 0.0) }
    }

    pub fn kind(&self) -> DensityKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.entries[(r, c)]
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.entries)
    }

    /// Expectation value `Tr(ρ O)`.
    pub fn expectation(&self, op: &DMatrix<C64>) -> C64 {
        (&self.entries * op).trace()
    }

    /// `U ρ U†`; `u` must be unitary of matching size.
    pub fn conjugate_by(&self, u: &DMatrix<C64>) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: u.nrows() });
        }
        DensityMatrix::new(self.kind, u * &self.entries * u.adjoint())
    }
}

/// Ascending eigenvalues of a Hermitian matrix.
pub(crate) fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

#[derive(Debug, Clone)]
pub struct SpinMatrices {
    pub jz: OperatorMatrix,
    pub jplus: OperatorMatrix,
    pub jminus: OperatorMatrix,
    pub jx: OperatorMatrix,
    pub jy: OperatorMatrix,
}

/// Real J+ for spin 3/2: `J+|m> = sqrt(15/4 - m(m+1)) |m+1>`.
pub(crate) fn jplus_real() -> DMatrix<f64> {
    let mut jp = DMatrix::zeros(SPIN_DIM, SPIN_DIM);
    for s in 0..SPIN_DIM - 1 {
        let m = spin_m(s);
        jp[(s + 1, s)] = (3.75 - m * (m + 1.0)).sqrt();
    }
    jp
}

pub(crate) fn jz_real() -> DMatrix<f64> {
    DMatrix::from_fn(SPIN_DIM, SPIN_DIM, |r, c| if r == c { spin_m(r) } else { 0.0 })
}

pub(crate) fn jx_real() -> DMatrix<f64> {
    let jp = jplus_real();
    (&jp + jp.transpose()) * 0.5
}

/// `iJy = (J+ - J-)/2`, real antisymmetric.
pub(crate) fn ijy_real() -> DMatrix<f64> {
    let jp = jplus_real();
    (&jp - jp.transpose()) * 0.5
}

pub fn spin_matrices() -> SpinMatrices {
    let jp = jplus_real().map(|x| C64::new(x, 0.0));
    let jm = jp.adjoint();
    let jz = jz_real().map(|x| C64::new(x, 0.0));
    let jx = (&jp + &jm) * C64::new(0.5, 0.0);
    let jy = (&jp - &jm) * C64::new(0.0, -0.5);
    let wrap = |m| OperatorMatrix { basis: Basis::Spin, entries: m };
    SpinMatrices { jz: wrap(jz), jplus: wrap(jp), jminus: wrap(jm), jx: wrap(jx), jy: wrap(jy) }
}

#[derive(Debug, Clone)]
pub struct BosonMatrices {
    pub a: OperatorMatrix,
    pub a_dagger: OperatorMatrix,
    pub number: OperatorMatrix,
}

pub(crate) fn annihilation_real(levels: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(levels, levels);
    for n in 1..levels {
        a[(n - 1, n)] = (n as f64).sqrt();
    }
    a
}

/// Truncated ladder operators; `a†|n_max>` is cut to zero.
pub fn boson_matrices(fock: FockSpace) -> BosonMatrices {
    let l = fock.levels();
    let basis = Basis::Fock { n_max: fock.n_max() };
    let a = annihilation_real(l).map(|x| C64::new(x, 0.0));
    let number = DMatrix::from_fn(l, l, |r, c| if r == c { C64::new(r as f64, 0.0) } else { C64::new(0.0, 0.0) });
    BosonMatrices {
        a_dagger: OperatorMatrix { basis, entries: a.adjoint() },
        a: OperatorMatrix { basis, entries: a },
        number: OperatorMatrix { basis, entries: number },
    }
}

/// `spin_op ⊗ fock_op` in the spin-major composite basis.
pub fn tensor_lift(spin_op: &OperatorMatrix, fock_op: &OperatorMatrix) -> Result<OperatorMatrix> {
    if spin_op.basis != Basis::Spin {
        return Err(Error::DimensionMismatch { expected: SPIN_DIM, found: spin_op.dim() });
    }
    let n_max = match fock_op.basis {
        Basis::Fock { n_max } => n_max,
        _ => return Err(Error::InvalidArgument("second operand must act on the Fock factor".into())),
    };
    Ok(OperatorMatrix {
        basis: Basis::Composite { n_max },
        entries: spin_op.entries.kronecker(&fock_op.entries),
    })
}

/// Associated Laguerre polynomial `L_n^k(x)` by upward recurrence.
pub fn laguerre_assoc(n: i64, k: i64, x: f64) -> Result<f64> {
    if n < 0 {
        return Err(Error::InvalidArgument(format!("Laguerre degree must be non-negative, got {n}")));
    }
    Ok(laguerre(n as usize, k as f64, x))
}

pub(crate) fn laguerre(n: usize, k: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = 1.0 + k - x;
    for j in 1..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + k - x) * cur - (jf + k) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `<m| exp[α(a† - a)] |n>` in the untruncated Fock space.
pub fn displaced_fock_overlap(m: usize, n: usize, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return if m == n { 1.0 } else { 0.0 };
    }
    let (lo, hi) = if m >= n { (n, m) } else { (m, n) };
    let d = hi - lo;
    // sqrt(lo!/hi!) |α|^d as a running product keeps every factor O(1).
    let mut pref = 1.0;
    for j in lo + 1..=hi {
        pref *= alpha.abs() / (j as f64).sqrt();
    }
    let mut sign = if alpha < 0.0 && d % 2 == 1 { -1.0 } else { 1.0 };
    if m < n && d % 2 == 1 {
        sign = -sign;
    }
    let x = alpha * alpha;
    sign * pref * (-0.5 * x).exp() * laguerre(lo, d as f64, x)
}

/// Matrix of `exp[α(a† - a)]` restricted to `levels` Fock states.
pub fn displacement_matrix(levels: usize, alpha: f64) -> DMatrix<f64> {
    DMatrix::from_fn(levels, levels, |r, c| displaced_fock_overlap(r, c, alpha))
}

/// Isometry from the spin sector into three-qubit space. Column `s` is the
/// Dicke state with `k = s` qubits in state 1.
pub fn dicke_isometry() -> DMatrix<f64> {
    let mut iso = DMatrix::zeros(QUBIT_DIM, SPIN_DIM);
    for b in 0..QUBIT_DIM {
        let k = (b as u32).count_ones() as usize;
        iso[(b, k)] = 1.0;
    }
    for k in 0..SPIN_DIM {
        let norm = iso.column(k).norm();
        iso.column_mut(k).scale_mut(1.0 / norm);
    }
    iso
}

/// Maps a spin-sector density matrix onto the symmetric three-qubit subspace.
pub fn symmetric_embed(rho4: &DensityMatrix) -> Result<DensityMatrix> {
    if rho4.kind != DensityKind::Spin {
        return Err(Error::InvalidDensity("symmetric_embed expects a 4x4 spin-sector state".into()));
    }
    let iso = dicke_isometry().map(|x| C64::new(x, 0.0));
    let entries = &iso * &rho4.entries * iso.transpose();
    Ok(DensityMatrix { kind: DensityKind::Qubits, entries })
}

/// Partial trace over the Fock factor.
pub fn spin_density(psi: &StateVector) -> Result<DensityMatrix> {
    let l = psi.fock.levels();
    let amps = &psi.amplitudes;
    let mut rho = DMatrix::<C64>::zeros(SPIN_DIM, SPIN_DIM);
    for a in 0..SPIN_DIM {
        for b in a..SPIN_DIM {
            let mut acc = C64::new(0.0, 0.0);
            for n in 0..l {
                acc += amps[a * l + n] * amps[b * l + n].conj();
            }
            rho[(a, b)] = acc;
            rho[(b, a)] = acc.conj();
        }
    }
    let tr = rho.trace().re;
    if tr <= 0.0 {
        return Err(Error::InvalidDensity("state has zero norm".into()));
    }
    DensityMatrix::new(DensityKind::Spin, rho / C64::new(tr, 0.0))
}

/// Collective rotation `V = exp(iπJy/2)`, real orthogonal, with
/// `V(-Jz)Vᵀ = Jx` and `V Jx Vᵀ = Jz`.
pub fn collective_rotation() -> DMatrix<f64> {
    expm_real(&(ijy_real() * std::f64::consts::FRAC_PI_2))
}

/// Matrix exponential by scaling and squaring of a Taylor series.
fn expm_real(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = a.iter().fold(0.0f64, |m, x| m.max(x.abs())) * a.nrows() as f64;
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let b = a * scale;
    let n = a.nrows();
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &b / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}
