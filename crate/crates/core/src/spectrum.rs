//! Eigen-systems for every method, expressed in the rotated frame, and
//! parameter sweeps over the coupling.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hamiltonians::{
    assemble, full_real, grwa_blocks, rwa_blocks, zeroth_blocks, BlockHamiltonian, Method,
};
use crate::hilbert::{
    collective_rotation, displacement_matrix, spin_m, FockSpace, Frame, ModelParams, OperatorMatrix, StateVector,
    C64, SPIN_DIM,
};

const HERMITIAN_INPUT_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct EigenSystem {
    method: Method,
    params: ModelParams,
    fock: FockSpace,
    energies: Vec<f64>,
    vectors: DMatrix<f64>,
    native_vectors: DMatrix<f64>,
    native_hamiltonian: DMatrix<f64>,
    tail_mass: Vec<f64>,
}

impl EigenSystem {
    pub fn method(&self) -> Method {
        self.method
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn fock(&self) -> FockSpace {
        self.fock
    }

    /// Ascending energies, paired with [`EigenSystem::vector`].
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Eigenvectors as columns over the rotated-frame composite basis.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// Eigenvectors in the basis the method Hamiltonian is written in.
    pub fn native_vectors(&self) -> &DMatrix<f64> {
        &self.native_vectors
    }

    /// The method Hamiltonian assembled in its own basis.
    pub fn native_hamiltonian(&self) -> &DMatrix<f64> {
        &self.native_hamiltonian
    }

    pub fn vector(&self, i: usize) -> StateVector {
        let amps = self.vectors.column(i).map(|x| C64::new(x, 0.0));
        StateVector::from_raw(self.fock, Frame::Rotated, amps)
    }

    /// Norm lost by truncating the frame map for each level; zero for the
    /// exact and RWA methods.
    pub fn tail_mass(&self) -> &[f64] {
        &self.tail_mass
    }

    /// `‖H v - E v‖₂` per level against the method Hamiltonian.
    pub fn residuals(&self) -> Vec<f64> {
        let hv = &self.native_hamiltonian * &self.native_vectors;
        (0..self.len())
            .map(|i| (hv.column(i) - self.native_vectors.column(i) * self.energies[i]).norm())
            .collect()
    }

    /// Largest `|<v_i|v_j> - δ_ij|` among levels whose tail mass is below
    /// `max_tail`.
    pub fn orthonormality_error(&self, max_tail: f64) -> f64 {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.tail_mass[i] < max_tail).collect();
        let sub = self.vectors.select_columns(&keep);
        let gram = sub.transpose() * &sub;
        (gram - DMatrix::<f64>::identity(keep.len(), keep.len())).amax()
    }

    /// `<v|P|v>` per level with the parity `P = R ⊗ (-1)^n`, `R|m> = |-m>`.
    pub fn parities(&self) -> Vec<f64> {
        let l = self.fock.levels();
        (0..self.len())
            .map(|i| {
                let v = self.vectors.column(i);
                let mut acc = 0.0;
                for s in 0..SPIN_DIM {
                    for n in 0..l {
                        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                        acc += sign * v[s * l + n] * v[(SPIN_DIM - 1 - s) * l + n];
                    }
                }
                acc
            })
            .collect()
    }
}

/// Ascending eigenvalues and orthonormal eigenvectors of a Hermitian matrix.
pub fn dense_hermitian_eig(m: &OperatorMatrix) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let dev = m.hermiticity_deviation();
    if dev > HERMITIAN_INPUT_TOL {
        return Err(Error::NotHermitian(dev));
    }
    if let Some(real) = m.to_real(0.0) {
        let (e, v) = real_symmetric_eig(&real)?;
        return Ok((e, v.map(|x| C64::new(x, 0.0))));
    }
    let h = (m.entries() + m.entries().adjoint()) * C64::new(0.5, 0.0);
    let n = h.nrows();
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, 1000 * n.max(1))
        .ok_or_else(|| Error::Eigensolver(format!("no convergence for {n}x{n} Hermitian matrix")))?;
    let order = ascending_order(eig.eigenvalues.as_slice())?;
    let energies = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    Ok((energies, eig.eigenvectors.select_columns(&order)))
}

pub(crate) fn real_symmetric_eig(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let scale = m.amax();
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 1000 * n.max(1)).ok_or_else(|| {
        Error::Eigensolver(format!("no convergence for {n}x{n} symmetric matrix with max entry {scale:.3e}"))
    })?;
    let order = ascending_order(eig.eigenvalues.as_slice())?;
    let energies = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    Ok((energies, eig.eigenvectors.select_columns(&order)))
}

fn ascending_order(values: &[f64]) -> Result<Vec<usize>> {
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    Ok(order)
}

/// Solves the blocks and scatters their eigenvectors into composite columns.
fn solve_blocks(blocks: &[BlockHamiltonian], fock: FockSpace) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let dim = fock.dim();
    let mut energies = Vec::with_capacity(dim);
    let mut vectors = DMatrix::zeros(dim, dim);
    for b in blocks {
        let (e, v) = real_symmetric_eig(&b.matrix)?;
        for (j, ej) in e.into_iter().enumerate() {
            let col = energies.len();
            for (r, &(s, f)) in b.labels.iter().enumerate() {
                vectors[(fock.index(s, f), col)] = v[(r, j)];
            }
            energies.push(ej);
        }
    }
    Ok((energies, vectors))
}

/// Block-diagonal map `U† = ⊕_m D(-g m/ω)` from the displaced frame back to
/// the rotated frame, truncated to the retained Fock levels.
pub fn undisplace_matrix(params: &ModelParams, fock: FockSpace) -> DMatrix<f64> {
    let l = fock.levels();
    let mut out = DMatrix::zeros(fock.dim(), fock.dim());
    for s in 0..SPIN_DIM {
        let d = displacement_matrix(l, -params.ratio() * spin_m(s));
        out.view_mut((s * l, s * l), (l, l)).copy_from(&d);
    }
    out
}

fn spin_lift(r: &DMatrix<f64>, fock: FockSpace) -> DMatrix<f64> {
    r.kronecker(&DMatrix::<f64>::identity(fock.levels(), fock.levels()))
}

/// Eigen-system of `method` with eigenvectors in the rotated frame.
pub fn solve(method: Method, params: &ModelParams, fock: FockSpace) -> Result<EigenSystem> {
    params.validate()?;
    let dim = fock.dim();
    let (energies, native_vectors, native_hamiltonian, vectors) = match method {
        Method::Exact => {
            let h = full_real(params, fock, Frame::Rotated);
            let (e, v) = real_symmetric_eig(&h)?;
            (e, v.clone(), h, v)
        }
        Method::Rwa => {
            let blocks = rwa_blocks(params, fock)?;
            let (e, v) = solve_blocks(&blocks, fock)?;
            let mapped = spin_lift(&collective_rotation(), fock) * &v;
            (e, v, assemble(&blocks, fock), mapped)
        }
        Method::Zeroth => {
            let blocks = zeroth_blocks(params, fock);
            let mut e = Vec::with_capacity(dim);
            let mut v = DMatrix::zeros(dim, dim);
            for (block, co) in &blocks {
                let ev = co.eigenvectors();
                for i in 0..SPIN_DIM {
                    let col = e.len();
                    for (r, &(s, f)) in block.labels.iter().enumerate() {
                        v[(fock.index(s, f), col)] = ev[(r, i)];
                    }
                    e.push(co.epsilon[i]);
                }
            }
            let plain: Vec<BlockHamiltonian> = blocks.into_iter().map(|(b, _)| b).collect();
            let mapped = undisplace_matrix(params, fock) * &v;
            (e, v, assemble(&plain, fock), mapped)
        }
        Method::Grwa => {
            let (blocks, co) = grwa_blocks(params, fock)?;
            let (e, v) = solve_blocks(&blocks, fock)?;
            let mapped = undisplace_matrix(params, fock) * (spin_lift(&co.s, fock) * &v);
            (e, v, assemble(&blocks, fock), mapped)
        }
    };
    let order = ascending_order(&energies)?;
    let energies: Vec<f64> = order.iter().map(|&i| energies[i]).collect();
    let vectors = vectors.select_columns(&order);
    let native_vectors = native_vectors.select_columns(&order);
    let tail_mass = vectors.column_iter().map(|c| (1.0 - c.norm_squared()).max(0.0)).collect();
    Ok(EigenSystem { method, params: *params, fock, energies, vectors, native_vectors, native_hamiltonian, tail_mass })
}

/// Lowest levels per method over a coupling grid. Methods keep the order
/// given, with `Exact` prepended when missing.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelTable {
    pub methods: Vec<Method>,
    pub g: Vec<f64>,
    pub levels: usize,
    /// `energies[grid point][method][level]`, ascending per method.
    pub energies: Vec<Vec<Vec<f64>>>,
}

impl LevelTable {
    /// Largest `|E_method - E_exact|` over the table with its location
    /// `(value, g, level)`.
    pub fn max_deviation(&self, method: Method) -> Option<(f64, f64, usize)> {
        let mi = self.methods.iter().position(|&m| m == method)?;
        let ei = self.methods.iter().position(|&m| m == Method::Exact)?;
        let mut worst = (0.0, self.g[0], 0);
        for (gi, row) in self.energies.iter().enumerate() {
            for k in 0..self.levels {
                let d = (row[mi][k] - row[ei][k]).abs();
                if d > worst.0 {
                    worst = (d, self.g[gi], k);
                }
            }
        }
        Some(worst)
    }
}

/// Evenly spaced grid including both ends.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![start],
        _ => (0..count).map(|i| start + (stop - start) * i as f64 / (count - 1) as f64).collect(),
    }
}

pub fn level_sweep(
    methods: &[Method],
    template: &ModelParams,
    fock: FockSpace,
    g_grid: &[f64],
    k_levels: usize,
) -> Result<LevelTable> {
    if g_grid.is_empty() {
        return Err(Error::InvalidArgument("coupling grid is empty".into()));
    }
    if k_levels == 0 || k_levels > fock.dim() {
        return Err(Error::InvalidArgument(format!("k_levels must be in 1..={}, got {k_levels}", fock.dim())));
    }
    let mut list = Vec::with_capacity(methods.len() + 1);
    if !methods.contains(&Method::Exact) {
        list.push(Method::Exact);
    }
    for &m in methods {
        if !list.contains(&m) {
            list.push(m);
        }
    }
    let energies = g_grid
        .par_iter()
        .map(|&g| {
            let wrap = |e: Error| Error::AtGridPoint { g, source: Box::new(e) };
            let p = template.with_g(g).map_err(wrap)?;
            list.iter()
                .map(|&m| solve(m, &p, fock).map(|es| es.energies()[..k_levels].to_vec()).map_err(wrap))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LevelTable { methods: list, g: g_grid.to_vec(), levels: k_levels, energies })
}

/// Lowest `per_parity` levels of each parity at one coupling.
pub fn parity_levels(es: &EigenSystem, per_parity: usize) -> (Vec<f64>, Vec<f64>) {
    let par = es.parities();
    let mut even = Vec::new();
    let mut odd = Vec::new();
    for (i, &e) in es.energies().iter().enumerate() {
        if par[i] > 0.0 && even.len() < per_parity {
            even.push(e);
        } else if par[i] < 0.0 && odd.len() < per_parity {
            odd.push(e);
        }
        if even.len() == per_parity && odd.len() == per_parity {
            break;
        }
    }
    (even, odd)
}

/// Counts crossings between even- and odd-parity levels on a coupling grid:
/// sign changes of `E_even[i] - E_odd[j]` between neighbouring grid points.
pub fn parity_crossings(
    method: Method,
    template: &ModelParams,
    fock: FockSpace,
    g_grid: &[f64],
    per_parity: usize,
) -> Result<usize> {
    let levels = g_grid
        .par_iter()
        .map(|&g| {
            let wrap = |e: Error| Error::AtGridPoint { g, source: Box::new(e) };
            let p = template.with_g(g).map_err(wrap)?;
            let es = solve(method, &p, fock).map_err(wrap)?;
            Ok(parity_levels(&es, per_parity))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut count = 0;
    for w in levels.windows(2) {
        let ((e0, o0), (e1, o1)) = (&w[0], &w[1]);
        for i in 0..e0.len().min(e1.len()) {
            for j in 0..o0.len().min(o1.len()) {
                let a = e0[i] - o0[j];
                let b = e1[i] - o1[j];
                if a * b < 0.0 {
                    count += 1;
                }
            }
        }
    }
    Ok(count)
}
