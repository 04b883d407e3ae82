//! Leading-order drift of the breather parameters under end damping, and
//! the projection that recovers `(φ, θ, W)` from a lattice state.
//!
//! A state near the breather family is written as
//! `R_{tφ+θ} (p*(φ), 0) + W` with `W` orthogonal to the rotated adjoint
//! frame. Damping drains energy at rate `γε^{2N-1}` to leading order, which
//! lowers `φ` linearly in time and makes the phase quadratic.

use crate::breather::{solve_breather, BreatherProfile};
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::lattice::{rotate_flat, RealState, SystemParams};
use crate::spectral::{adjoint_frame, build_linearization, AdjointFrame};
use std::f64::consts::PI;
use std::fmt::Write as _;

/// States farther than this from the breather circle are rejected.
pub const FIT_BASIN_RADIUS: f64 = 0.3;
pub const FIT_TOLERANCE: f64 = 1e-14;
pub const FIT_MAX_ITERATIONS: usize = 40;
const PHI_STEP: f64 = 1e-6;

/// Leading-order modulation constants for a parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationPrediction {
    /// `dφ/dt = -2γε^{2N-1}`.
    pub phi_rate: f64,
    /// Coefficient of `t²` in `θ(t)`.
    pub theta_coefficient: f64,
    /// `d𝓔/dt = -γε^{2N-1}`.
    pub energy_decay_rate: f64,
}

fn leading_rate(params: &SystemParams) -> f64 {
    params.gamma * params.epsilon.powi(2 * params.n_sites as i32 - 1)
}

impl ModulationPrediction {
    pub fn new(params: &SystemParams) -> Self {
        let r = leading_rate(params);
        Self {
            phi_rate: -2.0 * r,
            theta_coefficient: r,
            energy_decay_rate: -r,
        }
    }
}

/// `(φ(t), θ(t)) = (-2γε^{2N-1} t, γε^{2N-1} t²)`.
pub fn predicted_drift(params: &SystemParams, t: f64) -> (f64, f64) {
    let r = leading_rate(params);
    (-2.0 * r * t, r * t * t)
}

/// Time at which the predicted phase has turned `k` full times:
/// `γε^{2N-1} T_k² = 2πk`.
pub fn predicted_crossing_times(params: &SystemParams, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("crossing index starts at 1".into()));
    }
    let r = leading_rate(params);
    if r == 0.0 {
        return Err(Error::NoCrossing);
    }
    Ok((2.0 * PI * k as f64 / r).sqrt())
}

/// `-γε^{2N-1}`.
pub fn predicted_energy_decay(params: &SystemParams) -> f64 {
    -leading_rate(params)
}

/// `dφ/dt = -εγ p*_N (n2)_N` from the adjoint frame of the profile, without
/// the leading-order approximations.
pub fn exact_phi_rate(profile: &BreatherProfile, params: &SystemParams) -> Result<f64> {
    let n = params.n_sites;
    let lin = build_linearization(profile, &params.with_gamma(0.0)?)?;
    let frame = adjoint_frame(&lin)?;
    Ok(-params.damping_rate() * profile.amplitudes[n - 1] * frame.n2[n - 1])
}

/// `-γε (p*_N)²`, the energy flux of the exact breather.
pub fn exact_energy_decay(profile: &BreatherProfile, params: &SystemParams) -> f64 {
    let p_n = profile.amplitudes[params.n_sites - 1];
    -params.damping_rate() * p_n * p_n
}

/// Header `k,T_k_predicted`.
pub fn crossing_table(params: &SystemParams, k_max: usize) -> Result<String> {
    let mut out = String::from("k,T_k_predicted\n");
    for k in 1..=k_max {
        writeln!(out, "{k},{:.12e}", predicted_crossing_times(params, k)?).unwrap();
    }
    Ok(out)
}

/// Header `t,phi,theta`.
pub fn drift_table(params: &SystemParams, times: &[f64]) -> String {
    let mut out = String::from("t,phi,theta\n");
    for &t in times {
        let (phi, theta) = predicted_drift(params, t);
        writeln!(out, "{t:.12e},{phi:.12e},{theta:.12e}").unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationFit {
    pub t: f64,
    pub phi: f64,
    /// Phase offset, so the total phase is `t φ + θ`.
    pub theta: f64,
    pub residual: RealState,
    pub iterations: usize,
}

impl ModulationFit {
    pub fn total_phase(&self) -> f64 {
        self.t * self.phi + self.theta
    }
}

/// `R_ψ (p*(φ), 0)`.
pub fn breather_point(params: &SystemParams, phi: f64, psi: f64) -> Result<RealState> {
    let profile = solve_breather(&params.with_gamma(0.0)?, phi)?;
    let mut x = vec![0.0; 2 * params.n_sites];
    x[..params.n_sites].copy_from_slice(&profile.amplitudes);
    RealState::from_flat(rotate_flat(&x, psi))
}

struct Frame {
    base: Vec<f64>,
    adjoint: AdjointFrame,
}

fn frame_at(params: &SystemParams, phi: f64) -> Result<Frame> {
    let undamped = params.with_gamma(0.0)?;
    let profile = solve_breather(&undamped, phi)?;
    let lin = build_linearization(&profile, &undamped)?;
    let mut base = vec![0.0; 2 * params.n_sites];
    base[..params.n_sites].copy_from_slice(&profile.amplitudes);
    Ok(Frame {
        base,
        adjoint: adjoint_frame(&lin)?,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `J (p, q) = (-q, p)`, the generator of `R_ψ`.
fn generator(x: &[f64]) -> Vec<f64> {
    let n = x.len() / 2;
    let mut out = vec![0.0; x.len()];
    for j in 0..n {
        out[j] = -x[n + j];
        out[n + j] = x[j];
    }
    out
}

/// Orthogonality conditions `⟨R_ψ n_i, s - R_ψ X*⟩ = ⟨n_i, R_{-ψ} s - X*⟩`.
fn conditions(frame: &Frame, unrotated: &[f64]) -> [f64; 2] {
    let w: Vec<f64> = unrotated
        .iter()
        .zip(&frame.base)
        .map(|(s, x)| s - x)
        .collect();
    [dot(&frame.adjoint.n1, &w), dot(&frame.adjoint.n2, &w)]
}

/// Fits `(φ, θ)` at time `t`, starting from the site-one phase and `φ = 0`.
pub fn fit_modulation_parameters(
    state: &RealState,
    params: &SystemParams,
    t: f64,
) -> Result<ModulationFit> {
    let n = params.n_sites;
    let psi = state.as_slice()[n].atan2(state.as_slice()[0]);
    fit_modulation_parameters_from(state, params, t, 0.0, psi)
}

/// Fits `(φ, ψ = tφ + θ)` by Newton iteration from the guess `(phi, psi)`.
///
/// The `ψ` derivative of the conditions is analytic and the `φ` derivative
/// is a central difference through the breather solver. The adjoint frame
/// is re-evaluated at every trial `φ`.
pub fn fit_modulation_parameters_from(
    state: &RealState,
    params: &SystemParams,
    t: f64,
    phi: f64,
    psi: f64,
) -> Result<ModulationFit> {
    state.check_sites(params)?;
    let (mut phi, mut psi) = (phi, psi);
    let mut frame = frame_at(params, phi)?;
    let mut unrotated = rotate_flat(state.as_slice(), -psi);
    let distance = unrotated
        .iter()
        .zip(&frame.base)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    if distance > FIT_BASIN_RADIUS {
        return Err(Error::OutOfBasin(distance));
    }

    let mut last_step = f64::INFINITY;
    for iteration in 0..=FIT_MAX_ITERATIONS {
        let g = conditions(&frame, &unrotated);
        // the second test accepts a fit that has stalled at the rounding
        // level of the phase, which grows with |ψ|
        if g[0].abs().max(g[1].abs()) < FIT_TOLERANCE
            || last_step < 4.0 * f64::EPSILON * (1.0 + psi.abs())
        {
            let fitted = rotate_flat(&frame.base, psi);
            let residual = state
                .as_slice()
                .iter()
                .zip(&fitted)
                .map(|(s, x)| s - x)
                .collect();
            return Ok(ModulationFit {
                t,
                phi,
                theta: psi - t * phi,
                residual: RealState::from_flat(residual)?,
                iterations: iteration,
            });
        }
        if iteration == FIT_MAX_ITERATIONS {
            break;
        }
        // d/dψ ⟨n, R_{-ψ} s - X*⟩ = -⟨n, J R_{-ψ} s⟩
        let js = generator(&unrotated);
        let d_psi = [-dot(&frame.adjoint.n1, &js), -dot(&frame.adjoint.n2, &js)];
        let plus = conditions(&frame_at(params, phi + PHI_STEP)?, &unrotated);
        let minus = conditions(&frame_at(params, phi - PHI_STEP)?, &unrotated);
        let d_phi = [
            (plus[0] - minus[0]) / (2.0 * PHI_STEP),
            (plus[1] - minus[1]) / (2.0 * PHI_STEP),
        ];
        let det = d_phi[0] * d_psi[1] - d_psi[0] * d_phi[1];
        if det.abs() < 1e-12 || !det.is_finite() {
            return Err(Error::Fit(format!("singular fit Jacobian (det {det:e})")));
        }
        let step_phi = (g[0] * d_psi[1] - d_psi[0] * g[1]) / det;
        let step_psi = (d_phi[0] * g[1] - g[0] * d_phi[1]) / det;
        phi -= step_phi;
        psi -= step_psi;
        last_step = step_phi.abs().max(step_psi.abs());
        frame = frame_at(params, phi)
            .map_err(|e| Error::Fit(format!("breather solve failed at phi = {phi}: {e}")))?;
        unrotated = rotate_flat(state.as_slice(), -psi);
    }
    Err(Error::Fit(format!(
        "no convergence in {FIT_MAX_ITERATIONS} iterations"
    )))
}

/// Fits every sampled state of a trajectory, continuing each fit from the
/// previous one so the phase is unwrapped along the run.
pub fn fit_trajectory(trajectory: &Trajectory) -> Result<Vec<ModulationFit>> {
    let params = &trajectory.params;
    let mut fits: Vec<ModulationFit> = Vec::with_capacity(trajectory.times.len());
    for (&t, state) in trajectory.times.iter().zip(&trajectory.states) {
        let fit = match fits.last() {
            None => fit_modulation_parameters(state, params, t)?,
            Some(prev) => {
                let guess = prev.total_phase() + prev.phi * (t - prev.t);
                let measured = state.as_slice()[params.n_sites].atan2(state.as_slice()[0]);
                let psi = measured + 2.0 * PI * ((guess - measured) / (2.0 * PI)).round();
                fit_modulation_parameters_from(state, params, t, prev.phi, psi)?
            }
        };
        fits.push(fit);
    }
    Ok(fits)
}

/// Header `t,phi,theta,W_norm`.
pub fn fit_table(fits: &[ModulationFit]) -> String {
    let mut out = String::from("t,phi,theta,W_norm\n");
    for f in fits {
        writeln!(
            out,
            "{:.12e},{:.12e},{:.12e},{:.12e}",
            f.t,
            f.phi,
            f.theta,
            f.residual.norm()
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{breather_state, perturbed_breather};
    use crate::spectral::zero_chain;
    use approx::assert_relative_eq;

    fn params(n: usize, eps: f64, gamma: f64) -> SystemParams {
        SystemParams::new(n, eps, gamma).unwrap()
    }

    #[test]
    fn drift_formulas() {
        let p = params(3, 0.1, 0.02);
        let (phi, theta) = predicted_drift(&p, 1000.0);
        assert_relative_eq!(phi, -4e-4, max_relative = 1e-12);
        assert_relative_eq!(theta, 0.2, max_relative = 1e-12);
        assert_eq!(predicted_drift(&params(3, 0.1, 0.0), 1e6), (0.0, 0.0));
        let pred = ModulationPrediction::new(&p);
        assert!(pred.phi_rate <= 0.0 && pred.energy_decay_rate <= 0.0);
        assert_relative_eq!(pred.theta_coefficient, 2e-7, max_relative = 1e-12);
    }

    #[test]
    fn crossing_time_formulas() {
        let p = params(3, 0.1, 0.02);
        let t1 = predicted_crossing_times(&p, 1).unwrap();
        assert_relative_eq!(t1, 5604.991216397928, max_relative = 1e-12);
        assert_relative_eq!(
            predicted_crossing_times(&p, 4).unwrap(),
            2.0 * t1,
            max_relative = 1e-15
        );
        for k in 1..30 {
            let a = predicted_crossing_times(&p, k).unwrap();
            let b = predicted_crossing_times(&p, k + 1).unwrap();
            assert_relative_eq!(
                b / a,
                ((k + 1) as f64 / k as f64).sqrt(),
                max_relative = 1e-14
            );
            // the predicted phase has turned exactly k times
            let (_, theta) = predicted_drift(&p, a);
            assert_relative_eq!(theta, 2.0 * PI * k as f64, max_relative = 1e-13);
        }
        assert_eq!(
            predicted_crossing_times(&params(3, 0.1, 0.0), 1),
            Err(Error::NoCrossing)
        );
        assert!(predicted_crossing_times(&p, 0).is_err());
    }

    #[test]
    fn energy_decay_formulas() {
        assert_relative_eq!(
            predicted_energy_decay(&params(3, 0.1, 0.02)),
            -2e-7,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            predicted_energy_decay(&params(2, 0.1, 0.02)),
            -2e-5,
            max_relative = 1e-12
        );
        assert_eq!(predicted_energy_decay(&params(2, 0.1, 0.0)), 0.0);
    }

    #[test]
    fn exact_rates_approach_leading_order() {
        for n in 2..6 {
            let mut last = f64::INFINITY;
            for eps in [0.04, 0.02, 0.01] {
                let p = params(n, eps, 0.2);
                let profile = solve_breather(&p, 0.0).unwrap();
                let pred = ModulationPrediction::new(&p);
                let phi_err = (exact_phi_rate(&profile, &p).unwrap() / pred.phi_rate - 1.0).abs();
                let e_err = (exact_energy_decay(&profile, &p) / pred.energy_decay_rate - 1.0).abs();
                // relative mismatch shrinks with ε
                assert!(
                    phi_err < 20.0 * eps && e_err < 20.0 * eps,
                    "{n} {eps} {phi_err} {e_err}"
                );
                assert!(phi_err < last);
                last = phi_err;
            }
        }
    }

    #[test]
    fn fits_exact_breather() {
        let p = params(3, 0.05, 0.1);
        for (phi, psi, t) in [(0.0, 0.0, 0.0), (0.05, 0.7, 10.0), (-0.03, -2.9, 100.0)] {
            let state = breather_point(&p, phi, psi).unwrap();
            let fit = fit_modulation_parameters(&state, &p, t).unwrap();
            assert!((fit.phi - phi).abs() < 1e-12, "{} vs {phi}", fit.phi);
            assert!((fit.total_phase() - psi).abs() < 1e-12);
            assert!((fit.theta - (psi - t * phi)).abs() < 1e-10);
            assert!(fit.residual.norm() < 1e-10);
        }
    }

    #[test]
    fn fit_is_idempotent() {
        let p = params(4, 0.05, 0.2);
        let profile = solve_breather(&p, 0.0).unwrap();
        let state = perturbed_breather(&profile, &p, 0.05, 11)
            .unwrap()
            .rotated(1.3);
        let first = fit_modulation_parameters(&state, &p, 5.0).unwrap();
        let rebuilt = breather_point(&p, first.phi, first.total_phase()).unwrap();
        let second = fit_modulation_parameters(&rebuilt, &p, 5.0).unwrap();
        assert!((first.phi - second.phi).abs() < 1e-12);
        assert!((first.theta - second.theta).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_kick_leaves_parameters() {
        let p = params(3, 0.05, 0.0);
        let profile = solve_breather(&p, 0.0).unwrap();
        let delta = 1e-4;
        let state = perturbed_breather(&profile, &p, delta, 5).unwrap();
        let fit = fit_modulation_parameters(&state, &p, 0.0).unwrap();
        assert!(fit.phi.abs() < 10.0 * delta * delta, "{}", fit.phi);
        assert!(fit.theta.abs() < 10.0 * delta * delta, "{}", fit.theta);
        assert_relative_eq!(fit.residual.norm(), delta, max_relative = 1e-3);
    }

    #[test]
    fn kick_along_zero_modes_moves_parameters() {
        // ψ moves along v1 and φ along v2 at unit rate
        let p = params(3, 0.05, 0.0);
        let profile = solve_breather(&p, 0.0).unwrap();
        let lin = build_linearization(&profile, &p).unwrap();
        let chain = zero_chain(&lin).unwrap();
        let d = 1e-5;
        let x: Vec<f64> = breather_state(&profile)
            .as_slice()
            .iter()
            .zip(&chain.v1)
            .zip(&chain.v2)
            .map(|((x, a), b)| x + d * a + 2.0 * d * b)
            .collect();
        let fit = fit_modulation_parameters(&RealState::from_flat(x).unwrap(), &p, 0.0).unwrap();
        assert!(
            (fit.theta - d).abs() < 1e-8 && (fit.phi - 2.0 * d).abs() < 1e-8,
            "{fit:?}"
        );
    }

    #[test]
    fn far_states_are_rejected() {
        let p = params(3, 0.05, 0.0);
        let state = RealState::new(&[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            fit_modulation_parameters(&state, &p, 0.0),
            Err(Error::OutOfBasin(_))
        ));
    }

    #[test]
    fn tables() {
        let p = params(3, 0.1, 0.02);
        let ct = crossing_table(&p, 3).unwrap();
        assert!(ct.starts_with("k,T_k_predicted\n1,5.6049"));
        assert_eq!(ct.lines().count(), 4);
        let dt = drift_table(&p, &[0.0, 1000.0]);
        assert_eq!(
            dt.lines().nth(2).unwrap(),
            "1.000000000000e3,-4.000000000000e-4,2.000000000000e-1"
        );
        assert!(crossing_table(&params(3, 0.1, 0.0), 1).is_err());
    }
}
