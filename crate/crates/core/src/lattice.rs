//! Lattice state, parameters and the rotating-frame vector field.
//!
//! The field `w_j = p_j + i q_j` lives in the frame co-rotating with the
//! fast on-site phase, with coupling `epsilon` and damping `gamma` acting
//! on the last site only. States are stored flat as `(p_1..p_N, q_1..q_N)`.

use crate::error::{Error, Result};
use num::complex::Complex64;

/// Lattice size, coupling and damping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub n_sites: usize,
    pub epsilon: f64,
    pub gamma: f64,
}

impl SystemParams {
    pub fn new(n_sites: usize, epsilon: f64, gamma: f64) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_sites must be at least 2, got {n_sites}"
            )));
        }
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be finite and non-negative, got {epsilon}"
            )));
        }
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma must be finite and non-negative, got {gamma}"
            )));
        }
        Ok(Self {
            n_sites,
            epsilon,
            gamma,
        })
    }

    /// Same lattice and coupling with a different damping.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.n_sites, self.epsilon, gamma)
    }

    /// Effective damping rate `gamma * epsilon` on the last site.
    pub fn damping_rate(&self) -> f64 {
        self.gamma * self.epsilon
    }
}

/// Real and imaginary parts of the lattice field, stored as one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RealState {
    data: Vec<f64>,
}

impl RealState {
    pub fn new(p: &[f64], q: &[f64]) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                found: q.len(),
            });
        }
        let mut data = Vec::with_capacity(2 * p.len());
        data.extend_from_slice(p);
        data.extend_from_slice(q);
        Self::from_flat(data)
    }

    /// Builds a state from the flat `(p, q)` layout.
    pub fn from_flat(data: Vec<f64>) -> Result<Self> {
        if data.len() < 4 || !data.len().is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "flat state must hold 2N >= 4 entries, got {}",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "state has non-finite entries".into(),
            ));
        }
        Ok(Self { data })
    }

    pub fn zeros(n_sites: usize) -> Self {
        Self {
            data: vec![0.0; 2 * n_sites.max(2)],
        }
    }

    /// A real state `(p, 0)`.
    pub fn real(p: &[f64]) -> Result<Self> {
        Self::new(p, &vec![0.0; p.len()])
    }

    pub fn n_sites(&self) -> usize {
        self.data.len() / 2
    }

    pub fn p(&self) -> &[f64] {
        &self.data[..self.n_sites()]
    }

    pub fn q(&self) -> &[f64] {
        &self.data[self.n_sites()..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Complex amplitudes `p_j + i q_j`.
    pub fn to_complex(&self) -> Vec<Complex64> {
        self.p()
            .iter()
            .zip(self.q())
            .map(|(&p, &q)| Complex64::new(p, q))
            .collect()
    }

    /// Applies `w -> e^{i theta} w` on every site.
    pub fn rotated(&self, theta: f64) -> Self {
        Self {
            data: rotate_flat(&self.data, theta),
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn check_sites(&self, params: &SystemParams) -> Result<()> {
        if self.n_sites() != params.n_sites {
            return Err(Error::DimensionMismatch {
                expected: params.n_sites,
                found: self.n_sites(),
            });
        }
        Ok(())
    }
}

/// Rotates every `(p_j, q_j)` plane of a flat `2N` vector by `theta`.
pub fn rotate_flat(x: &[f64], theta: f64) -> Vec<f64> {
    let n = x.len() / 2;
    let (s, c) = theta.sin_cos();
    let mut out = vec![0.0; x.len()];
    for j in 0..n {
        let (p, q) = (x[j], x[n + j]);
        out[j] = c * p - s * q;
        out[n + j] = s * p + c * q;
    }
    out
}

/// Discrete Laplacian with free ends: `(Δu)_1 = u_2 - u_1`, `(Δu)_N = u_{N-1} - u_N`.
pub fn laplacian(u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    laplacian_into(u, &mut out);
    out
}

fn laplacian_into(u: &[f64], out: &mut [f64]) {
    let n = u.len();
    for j in 0..n {
        let mut acc = 0.0;
        if j > 0 {
            acc += u[j - 1] - u[j];
        }
        if j + 1 < n {
            acc += u[j + 1] - u[j];
        }
        out[j] = acc;
    }
}

/// Number of neighbours of site `j` (0-based) on the free-ended chain.
pub(crate) fn coordination(j: usize, n: usize) -> f64 {
    if j == 0 || j + 1 == n {
        1.0
    } else {
        2.0
    }
}

/// Evaluates the vector field into `out` on flat slices. No validation.
pub(crate) fn vector_field_into(x: &[f64], params: &SystemParams, out: &mut [f64]) {
    let n = x.len() / 2;
    let eps = params.epsilon;
    let (p, q) = x.split_at(n);
    let (dp, dq) = out.split_at_mut(n);
    for j in 0..n {
        let mut lap_p = 0.0;
        let mut lap_q = 0.0;
        if j > 0 {
            lap_p += p[j - 1] - p[j];
            lap_q += q[j - 1] - q[j];
        }
        if j + 1 < n {
            lap_p += p[j + 1] - p[j];
            lap_q += q[j + 1] - q[j];
        }
        let r2 = p[j] * p[j] + q[j] * q[j];
        dq[j] = -eps * lap_p - p[j] + r2 * p[j];
        dp[j] = eps * lap_q + q[j] - r2 * q[j];
    }
    let damp = params.damping_rate();
    dp[n - 1] -= damp * p[n - 1];
    dq[n - 1] -= damp * q[n - 1];
}

/// Time derivative `(ṗ, q̇)` of the damped lattice equations.
pub fn vector_field(state: &RealState, params: &SystemParams) -> Result<RealState> {
    state.check_sites(params)?;
    let mut out = vec![0.0; state.as_slice().len()];
    vector_field_into(state.as_slice(), params, &mut out);
    Ok(RealState { data: out })
}

/// Undamped energy. `gamma` is ignored.
pub fn hamiltonian(state: &RealState, params: &SystemParams) -> Result<f64> {
    state.check_sites(params)?;
    Ok(hamiltonian_flat(state.as_slice(), params.epsilon))
}

pub(crate) fn hamiltonian_flat(x: &[f64], epsilon: f64) -> f64 {
    let n = x.len() / 2;
    let (p, q) = x.split_at(n);
    let coupling: f64 = (0..n - 1)
        .map(|j| (p[j] - p[j + 1]).powi(2) + (q[j] - q[j + 1]).powi(2))
        .sum();
    let onsite: f64 = (0..n)
        .map(|j| {
            let r2 = p[j] * p[j] + q[j] * q[j];
            0.5 * r2 - 0.25 * r2 * r2
        })
        .sum();
    0.5 * epsilon * coupling - onsite
}

/// `½ Σ (p_j² + q_j²)`.
pub fn ell2_energy(state: &RealState) -> f64 {
    0.5 * state.as_slice().iter().map(|x| x * x).sum::<f64>()
}

/// Per-site energies `p_j² + q_j²`.
pub fn site_energies(state: &RealState) -> Vec<f64> {
    state
        .p()
        .iter()
        .zip(state.q())
        .map(|(p, q)| p * p + q * q)
        .collect()
}

/// Rate of change of the ℓ² energy, `-γε (p_N² + q_N²)`.
pub fn energy_flux(state: &RealState, params: &SystemParams) -> Result<f64> {
    state.check_sites(params)?;
    let n = state.n_sites();
    let (p, q) = (state.p()[n - 1], state.q()[n - 1]);
    Ok(-params.damping_rate() * (p * p + q * q))
}

/// Diagnostics recorded along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Observables {
    pub hamiltonian_value: f64,
    pub ell2_energy: f64,
    pub site_energies: Vec<f64>,
}

impl Observables {
    pub fn measure(state: &RealState, params: &SystemParams) -> Result<Self> {
        let site_energies = site_energies(state);
        Ok(Self {
            hamiltonian_value: hamiltonian(state, params)?,
            ell2_energy: 0.5 * site_energies.iter().sum::<f64>(),
            site_energies,
        })
    }
}

/// Maps a rotating-frame state at time `t` back to the original lattice
/// variables `u_j = ε^{-1/2} e^{it} w_j`, returning `(u, τ = εt)`.
pub fn to_physical_frame(
    state: &RealState,
    params: &SystemParams,
    t: f64,
) -> Result<(Vec<Complex64>, f64)> {
    state.check_sites(params)?;
    if params.epsilon == 0.0 {
        return Err(Error::UndefinedScaling);
    }
    let scale = params.epsilon.sqrt().recip();
    let phase = Complex64::from_polar(scale, t);
    let u = state.to_complex().into_iter().map(|w| phase * w).collect();
    Ok((u, params.epsilon * t))
}
