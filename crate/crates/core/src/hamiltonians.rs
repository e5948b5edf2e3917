//! Hamiltonian builders: the full model in either frame, and the ladder or
//! manifold blocks of the rotating-wave, zeroth-order and generalized
//! rotating-wave approximations.
//!
//! The zeroth-order and GRWA blocks live in the displaced frame reached by
//! `U = exp[(g/ω) Jz (a† - a)]` from the rotated frame. RWA blocks live in
//! the original frame.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation_real, ijy_real, jplus_real, jx_real, jz_real, laguerre, spin_m, Basis, FockSpace, Frame,
    ModelParams, OperatorMatrix, SPIN_DIM,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Exact,
    Rwa,
    Zeroth,
    Grwa,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Exact, Method::Rwa, Method::Zeroth, Method::Grwa];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Rwa => "rwa",
            Method::Zeroth => "zeroth",
            Method::Grwa => "grwa",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Method::Exact),
            "rwa" => Ok(Method::Rwa),
            "zeroth" => Ok(Method::Zeroth),
            "grwa" => Ok(Method::Grwa),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Real matrix of the full Hamiltonian.
pub(crate) fn full_real(params: &ModelParams, fock: FockSpace, frame: Frame) -> DMatrix<f64> {
    let l = fock.levels();
    let id_s = DMatrix::<f64>::identity(SPIN_DIM, SPIN_DIM);
    let id_f = DMatrix::<f64>::identity(l, l);
    let a = annihilation_real(l);
    let x = a.transpose() + &a;
    let num = a.transpose() * &a;
    let bare = id_s.kronecker(&num) * params.omega;
    match frame {
        Frame::Rotated => bare + jx_real().kronecker(&id_f) * params.delta + jz_real().kronecker(&x) * params.g,
        Frame::Original => {
            let jp = jplus_real();
            let jpm = &jp + jp.transpose();
            bare - jz_real().kronecker(&id_f) * params.delta + jpm.kronecker(&x) * (0.5 * params.g)
        }
    }
}

/// Full truncated Hamiltonian in the requested frame.
pub fn build_full(params: &ModelParams, fock: FockSpace, frame: Frame) -> OperatorMatrix {
    OperatorMatrix::from_real(Basis::Composite { n_max: fock.n_max() }, &full_real(params, fock, frame))
        .expect("dimensions follow from fock")
}

/// `G0(n) = e^{-x/2} L_n(x)` with `x = (g/ω)²`.
pub fn coeff_g0(n: usize, params: &ModelParams) -> f64 {
    let x = params.ratio().powi(2);
    (-0.5 * x).exp() * laguerre(n, 0.0, x)
}

/// `R_{n+1,n} = (g/ω) e^{-x/2} L_n^1(x) / (n+1)`.
pub fn coeff_r(n: usize, params: &ModelParams) -> f64 {
    let r = params.ratio();
    let x = r * r;
    r * (-0.5 * x).exp() * laguerre(n, 1.0, x) / (n as f64 + 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZerothCoefficients {
    pub n: usize,
    pub b: f64,
    pub chi: [f64; 2],
    pub k: [f64; 4],
    pub epsilon: [f64; 4],
}

impl ZerothCoefficients {
    pub fn compute(n: usize, params: &ModelParams) -> Self {
        let b = params.delta * coeff_g0(n, params);
        let x = params.shift();
        let base = params.omega * n as f64 - 1.25 * x;
        let chi1 = (0.25 * x * x - 0.25 * x * b + 0.25 * b * b).max(0.0).sqrt();
        let chi2 = (0.25 * x * x + 0.25 * x * b + 0.25 * b * b).max(0.0).sqrt();
        // Rationalized forms of K1, K2; finite as B -> 0.
        let s3 = 3f64.sqrt();
        let d1 = 4.0 * chi1 + 2.0 * x - b;
        let d2 = 4.0 * chi2 + 2.0 * x + b;
        let k1 = if d1 > 0.0 { s3 * b / d1 } else { s3 };
        let k2 = if d2 > 0.0 { s3 * b / d2 } else { 1.0 / s3 };
        let inv = |k: f64| if k == 0.0 { f64::INFINITY } else { -1.0 / k };
        ZerothCoefficients {
            n,
            b,
            chi: [chi1, chi2],
            k: [k1, k2, inv(k1), inv(k2)],
            epsilon: [
                base - 0.5 * b - 2.0 * chi1,
                base + 0.5 * b - 2.0 * chi2,
                base - 0.5 * b + 2.0 * chi1,
                base + 0.5 * b + 2.0 * chi2,
            ],
        }
    }

    /// Normalized eigenvectors in label order, as the columns of a 4×4 matrix.
    pub fn eigenvectors(&self) -> DMatrix<f64> {
        label_vectors(self.k[0], self.k[1])
    }
}

/// Columns `(-1, K1, -K1, 1)`, `(1, -K2, -K2, 1)` and their partners with
/// `K3 = -1/K1`, `K4 = -1/K2`, written without dividing by K1 or K2.
fn label_vectors(k1: f64, k2: f64) -> DMatrix<f64> {
    let sgn = |k: f64| if k < 0.0 { -1.0 } else { 1.0 };
    let n1 = (2.0 + 2.0 * k1 * k1).sqrt();
    let n2 = (2.0 + 2.0 * k2 * k2).sqrt();
    let (s1, s2) = (sgn(k1), sgn(k2));
    #[rustfmt::skip]
    let m = DMatrix::from_column_slice(4, 4, &[
        -1.0 / n1, k1 / n1, -k1 / n1, 1.0 / n1,
        1.0 / n2, -k2 / n2, -k2 / n2, 1.0 / n2,
        -s1 * k1 / n1, -s1 / n1, s1 / n1, s1 * k1 / n1,
        s2 * k2 / n2, s2 / n2, s2 / n2, s2 * k2 / n2,
    ]);
    m
}

/// Basis label `(spin index, Fock number)`.
pub type Label = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct BlockHamiltonian {
    pub method: Method,
    pub labels: Vec<Label>,
    pub matrix: DMatrix<f64>,
}

impl BlockHamiltonian {
    pub fn size(&self) -> usize {
        self.labels.len()
    }
}

/// Manifold-n block of the zeroth-order Hamiltonian and its analytic eigenpairs.
pub fn zeroth_block(n: usize, params: &ModelParams) -> (BlockHamiltonian, ZerothCoefficients) {
    let coeffs = ZerothCoefficients::compute(n, params);
    let mut h = jx_real() * coeffs.b;
    for s in 0..SPIN_DIM {
        let m = spin_m(s);
        h[(s, s)] = params.omega * n as f64 - params.shift() * m * m;
    }
    let block = BlockHamiltonian { method: Method::Zeroth, labels: (0..SPIN_DIM).map(|s| (s, n)).collect(), matrix: h };
    (block, coeffs)
}

pub fn zeroth_blocks(params: &ModelParams, fock: FockSpace) -> Vec<(BlockHamiltonian, ZerothCoefficients)> {
    (0..=fock.n_max()).map(|n| zeroth_block(n, params)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrwaCoefficients {
    pub params: ModelParams,
    /// `G0(0) = e^{-g²/2ω²}`.
    pub beta: f64,
    /// `K_{i,0}`.
    pub k: [f64; 4],
    /// Normalizers `sqrt(2 + 2K_i²)`.
    pub c: [f64; 4],
    /// Columns are the dressed spin states `s_1..s_4`.
    pub s: DMatrix<f64>,
    /// `ε_{i,0}`.
    pub epsilon0: [f64; 4],
    /// `<s_i|Jx|s_i>`.
    pub jx_diag: [f64; 4],
    /// `-<s_{i+1}|iJy|s_i>` for i = 1..3.
    pub couplings: [f64; 3],
}

impl GrwaCoefficients {
    pub fn compute(params: &ModelParams) -> Self {
        let z = ZerothCoefficients::compute(0, params);
        let s = z.eigenvectors();
        let jx = jx_real();
        let ijy = ijy_real();
        let mut jx_diag = [0.0; 4];
        for (i, d) in jx_diag.iter_mut().enumerate() {
            *d = (s.column(i).transpose() * &jx * s.column(i))[(0, 0)];
        }
        let mut couplings = [0.0; 3];
        for (i, c) in couplings.iter_mut().enumerate() {
            *c = -(s.column(i + 1).transpose() * &ijy * s.column(i))[(0, 0)];
        }
        let c = z.k.map(|k| if k.is_finite() { (2.0 + 2.0 * k * k).sqrt() } else { f64::INFINITY });
        GrwaCoefficients {
            params: *params,
            beta: coeff_g0(0, params),
            k: z.k,
            c,
            s,
            epsilon0: z.epsilon,
            jx_diag,
            couplings,
        }
    }

    /// `μ_i(n)` for zero-based label `i`.
    pub fn mu(&self, i: usize, n: usize) -> f64 {
        self.epsilon0[i] + self.params.delta * (coeff_g0(n, &self.params) - self.beta) * self.jx_diag[i]
    }

    /// `R'` linking `(s_i, f)` to `(s_{i+1}, f-1)`; the block entry is `Δ R'`.
    pub fn r_prime(&self, i: usize, f: usize) -> f64 {
        debug_assert!(f >= 1);
        self.couplings[i] * coeff_r(f - 1, &self.params) * (f as f64).sqrt()
    }

    /// Ground energy `-5g²/4ω - (Δ/2)e^{-g²/2ω²} - 2χ_{1,0}`.
    pub fn ground_energy(&self) -> f64 {
        self.epsilon0[0]
    }
}

/// Labels `(s, k + 2 - s)` inside the truncation; `k` runs from -2 to n_max + 1.
fn ladder_labels(k: i64, fock: FockSpace) -> Vec<Label> {
    (0..SPIN_DIM)
        .filter_map(|s| {
            let f = k + 2 - s as i64;
            (f >= 0 && f as usize <= fock.n_max()).then_some((s, f as usize))
        })
        .collect()
}

fn ladder_blocks(
    method: Method,
    fock: FockSpace,
    diag: impl Fn(usize, usize) -> f64,
    hop: impl Fn(usize, usize) -> f64,
) -> Vec<BlockHamiltonian> {
    (-2..=fock.n_max() as i64 + 1)
        .map(|k| {
            let labels = ladder_labels(k, fock);
            let d = labels.len();
            let mut h = DMatrix::zeros(d, d);
            for (r, &(s, f)) in labels.iter().enumerate() {
                h[(r, r)] = diag(s, f);
                if r + 1 < d {
                    let t = hop(s, f);
                    h[(r, r + 1)] = t;
                    h[(r + 1, r)] = t;
                }
            }
            BlockHamiltonian { method, labels, matrix: h }
        })
        .collect()
}

fn check_fock(fock: FockSpace) -> Result<()> {
    if fock.n_max() < crate::hilbert::MIN_N_MAX {
        return Err(Error::FockTooSmall { n_max: fock.n_max(), min: crate::hilbert::MIN_N_MAX });
    }
    Ok(())
}

/// GRWA blocks over the dressed labels `(s_i, f)`, ground block first.
pub fn grwa_blocks(params: &ModelParams, fock: FockSpace) -> Result<(Vec<BlockHamiltonian>, GrwaCoefficients)> {
    check_fock(fock)?;
    let co = GrwaCoefficients::compute(params);
    let blocks = ladder_blocks(
        Method::Grwa,
        fock,
        |i, f| params.omega * f as f64 + co.mu(i, f),
        |i, f| params.delta * co.r_prime(i, f),
    );
    Ok((blocks, co))
}

/// RWA blocks in the original frame, over labels `(s, f)` with `m = s - 3/2`.
pub fn rwa_blocks(params: &ModelParams, fock: FockSpace) -> Result<Vec<BlockHamiltonian>> {
    check_fock(fock)?;
    let jp = jplus_real();
    Ok(ladder_blocks(
        Method::Rwa,
        fock,
        |s, f| params.omega * f as f64 - params.delta * spin_m(s),
        |s, f| 0.5 * params.g * jp[(s + 1, s)] * (f as f64).sqrt(),
    ))
}

/// Scatters blocks into a full matrix over the composite index.
pub fn assemble(blocks: &[BlockHamiltonian], fock: FockSpace) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(fock.dim(), fock.dim());
    for b in blocks {
        for (r, &(sr, fr)) in b.labels.iter().enumerate() {
            for (c, &(sc, fc)) in b.labels.iter().enumerate() {
                h[(fock.index(sr, fr), fock.index(sc, fc))] = b.matrix[(r, c)];
            }
        }
    }
    h
}

/// True when every composite label appears in exactly one block.
pub fn is_partition(blocks: &[BlockHamiltonian], fock: FockSpace) -> bool {
    let mut seen = vec![0u32; fock.dim()];
    for b in blocks {
        for &(s, f) in &b.labels {
            if s >= SPIN_DIM || f > fock.n_max() {
                return false;
            }
            seen[fock.index(s, f)] += 1;
        }
    }
    seen.iter().all(|&c| c == 1)
}
