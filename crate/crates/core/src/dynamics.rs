//! Time evolution from the W-state initial condition and reduction to the
//! three-qubit state.
//!
//! States evolve in the rotated frame. Reduced qubit states are reported in
//! the original frame, where the initial state is the W state.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hamiltonians::Method;
use crate::hilbert::{
    spin_density, spin_matrices, symmetric_embed, DensityKind, DensityMatrix, FockSpace, Frame, ModelParams,
    StateVector, C64, SPIN_DIM,
};
use crate::spectrum::{solve, EigenSystem};

/// Rotated-frame image of the W state, `(-√3, -1, 1, √3)/√8` over ascending m.
pub fn initial_spin_amplitudes() -> [f64; 4] {
    let r8 = 8f64.sqrt();
    let s3 = 3f64.sqrt();
    [-s3 / r8, -1.0 / r8, 1.0 / r8, s3 / r8]
}

/// Initial state with the cavity in vacuum, rotated frame.
pub fn initial_state(fock: FockSpace) -> StateVector {
    let mut amps = DVector::zeros(fock.dim());
    for (s, a) in initial_spin_amplitudes().into_iter().enumerate() {
        amps[fock.index(s, 0)] = C64::new(a, 0.0);
    }
    StateVector::from_raw(fock, Frame::Rotated, amps)
}

/// `Σ_k e^{-iE_k t} |v_k><v_k|ψ0>` at each physical time.
pub fn evolve(eig: &EigenSystem, psi0: &StateVector, times: &[f64]) -> Result<Vec<StateVector>> {
    if psi0.fock() != eig.fock() {
        return Err(Error::DimensionMismatch { expected: eig.fock().dim(), found: psi0.fock().dim() });
    }
    if psi0.frame() != Frame::Rotated {
        return Err(Error::InvalidArgument("initial state must be given in the rotated frame".into()));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("times must be finite".into()));
    }
    let v = eig.vectors();
    let vc = v.map(|x| C64::new(x, 0.0));
    let coeffs = vc.transpose() * psi0.amplitudes();
    let energies = eig.energies();
    Ok(times
        .par_iter()
        .map(|&t| {
            let phased = DVector::from_fn(coeffs.len(), |k, _| coeffs[k] * C64::from_polar(1.0, -energies[k] * t));
            StateVector::from_raw(eig.fock(), Frame::Rotated, &vc * phased)
        })
        .collect())
}

/// Cavity trace followed by the symmetric embedding, in the frame of `psi`.
pub fn reduce_to_qubits(psi: &StateVector) -> Result<DensityMatrix> {
    symmetric_embed(&spin_density(psi)?)
}

/// Diagonal of a spin-sector density matrix, ascending m.
pub fn dicke_populations(rho4: &DensityMatrix) -> Result<[f64; 4]> {
    if rho4.kind() != DensityKind::Spin {
        return Err(Error::InvalidDensity("populations need a 4x4 spin-sector state".into()));
    }
    let mut p = [0.0; 4];
    for (s, v) in p.iter_mut().enumerate() {
        *v = rho4.get(s, s).re;
    }
    Ok(p)
}

/// Populations of a composite state in its own frame.
pub fn state_populations(psi: &StateVector) -> Result<[f64; 4]> {
    dicke_populations(&spin_density(psi)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(Error::InvalidArgument(format!("invalid axis `{other}`"))),
        }
    }
}

/// `(<S_n>, <S_n²>)` of a spin-sector state.
pub fn collective_spin_moments(rho4: &DensityMatrix, axis: Axis) -> Result<(f64, f64)> {
    if rho4.kind() != DensityKind::Spin {
        return Err(Error::InvalidDensity("moments need a 4x4 spin-sector state".into()));
    }
    let sm = spin_matrices();
    let j = match axis {
        Axis::X => sm.jx,
        Axis::Y => sm.jy,
        Axis::Z => sm.jz,
    };
    let j = j.into_entries();
    let j2 = &j * &j;
    Ok((rho4.expectation(&j).re, rho4.expectation(&j2).re))
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub method: Method,
    /// Δt/2π.
    pub times: Vec<f64>,
    /// 8×8 qubit states in the original frame.
    pub reduced_states: Vec<DensityMatrix>,
    /// 4×4 spin states in the original frame.
    pub spin_states: Vec<DensityMatrix>,
    /// Rotated-frame populations, ascending m.
    pub populations: Vec<[f64; 4]>,
    /// `|‖ψ(t)‖ - 1|` per sample.
    pub norm_error: Vec<f64>,
}

/// `count` uniform samples of Δt/2π on `[0, t_max]`.
pub fn scaled_grid(t_max: f64, count: usize) -> Result<Vec<f64>> {
    if !(t_max.is_finite() && t_max > 0.0) || count < 2 {
        return Err(Error::InvalidArgument("time grid needs t_max > 0 and at least two samples".into()));
    }
    Ok(crate::spectrum::linspace(0.0, t_max, count))
}

/// Physical time of a scaled sample, `t = 2π s / Δ`.
pub fn physical_time(scaled: f64, params: &ModelParams) -> Result<f64> {
    if params.delta <= 0.0 {
        return Err(Error::InvalidParams("time in units of 2π/Δ needs Δ > 0".into()));
    }
    Ok(2.0 * std::f64::consts::PI * scaled / params.delta)
}

/// Evolves the initial state with an existing eigen-system.
pub fn trajectory_from(eig: &EigenSystem, scaled_times: &[f64]) -> Result<Trajectory> {
    if scaled_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("times must be strictly increasing".into()));
    }
    let t: Vec<f64> = scaled_times.iter().map(|&s| physical_time(s, eig.params())).collect::<Result<_>>()?;
    let states = evolve(eig, &initial_state(eig.fock()), &t)?;
    let per_sample = states
        .par_iter()
        .map(|psi| {
            let pops = state_populations(psi)?;
            let lab = psi.in_frame(Frame::Original);
            let rho4 = spin_density(&lab)?;
            let rho8 = symmetric_embed(&rho4)?;
            Ok((rho8, rho4, pops, (psi.norm() - 1.0).abs()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut traj = Trajectory {
        method: eig.method(),
        times: scaled_times.to_vec(),
        reduced_states: Vec::with_capacity(states.len()),
        spin_states: Vec::with_capacity(states.len()),
        populations: Vec::with_capacity(states.len()),
        norm_error: Vec::with_capacity(states.len()),
    };
    for (rho8, rho4, pops, ne) in per_sample {
        traj.reduced_states.push(rho8);
        traj.spin_states.push(rho4);
        traj.populations.push(pops);
        traj.norm_error.push(ne);
    }
    Ok(traj)
}

pub fn run_trajectory(
    method: Method,
    params: &ModelParams,
    fock: FockSpace,
    scaled_times: &[f64],
) -> Result<Trajectory> {
    let eig = solve(method, params, fock)?;
    trajectory_from(&eig, scaled_times)
}

/// Spin-sector W state `|m = -1/2>` as a projector.
pub fn w_spin_state() -> DensityMatrix {
    let mut e = DMatrix::<C64>::zeros(SPIN_DIM, SPIN_DIM);
    e[(1, 1)] = C64::new(1.0, 0.0);
    DensityMatrix::new(DensityKind::Spin, e).expect("projector is a valid state")
}
