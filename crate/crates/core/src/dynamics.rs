//! Fixed-step integration of the damped lattice with online detection of
//! phase crossings on the first site.

use crate::breather::BreatherProfile;
use crate::error::{Error, Result};
use crate::lattice::{vector_field_into, Observables, RealState, SystemParams};
use crate::spectral::{adjoint_frame, build_linearization, zero_chain};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::fmt::Write as _;

pub const DEFAULT_DT: f64 = 0.01;
/// Default size of the random kick added to initial states.
pub const DEFAULT_PERTURBATION: f64 = 1e-3;
/// Crossing refinement stops once the signal is this small...
pub const CROSSING_TOLERANCE: f64 = 1e-10;
/// ...or after this many bisections.
pub const MAX_BISECTIONS: usize = 60;
/// Default re-arming level for the crossing detector.
pub const DEFAULT_ARM_LEVEL: f64 = 0.1;

/// `min(0.01, 2π / (200 max(1, |φ|)))`.
pub fn default_dt(phi: f64) -> f64 {
    DEFAULT_DT.min(2.0 * std::f64::consts::PI / (200.0 * phi.abs().max(1.0)))
}

/// Which component of the first site is watched for downward zero crossings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CrossingChannel {
    /// `p_1`, the real part.
    P1,
    /// `q_1`, the imaginary part. A downcrossing here is a return of the
    /// first site to the positive real axis when the phase drifts clockwise.
    #[default]
    Q1,
}

impl CrossingChannel {
    fn index(self, n_sites: usize) -> usize {
        match self {
            Self::P1 => 0,
            Self::Q1 => n_sites,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::P1 => "p1",
            Self::Q1 => "q1",
        }
    }
}

impl std::str::FromStr for CrossingChannel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p1" => Ok(Self::P1),
            "q1" => Ok(Self::Q1),
            other => Err(Error::InvalidParameter(format!(
                "unknown crossing channel {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationConfig {
    pub t_end: f64,
    pub dt: f64,
    /// Observables are recorded every `sample_stride` steps.
    pub sample_stride: usize,
    pub channel: CrossingChannel,
    /// After each recorded crossing the detector stays disarmed until the
    /// signal rises above this level, so small oscillations about zero are
    /// not counted as separate crossings. Zero disables the hysteresis.
    pub arm_level: f64,
}

impl IntegrationConfig {
    pub fn new(t_end: f64, dt: f64, sample_stride: usize) -> Result<Self> {
        let config = Self {
            t_end,
            dt,
            sample_stride,
            channel: CrossingChannel::default(),
            arm_level: DEFAULT_ARM_LEVEL,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_channel(self, channel: CrossingChannel) -> Self {
        Self { channel, ..self }
    }

    pub fn with_arm_level(self, arm_level: f64) -> Self {
        Self { arm_level, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidParameter(
                "sample_stride must be at least 1".into(),
            ));
        }
        if !(self.arm_level.is_finite() && self.arm_level >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "arm_level must be non-negative, got {}",
                self.arm_level
            )));
        }
        Ok(())
    }

    /// Number of steps, rounding `t_end / dt` to the nearest integer.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }
}

/// Downcrossing times `T_1 < T_2 < ...`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CrossingLog {
    pub times: Vec<f64>,
}

impl CrossingLog {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `(k, T_k)` pairs with `k` starting at 1.
    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.times.iter().enumerate().map(|(i, &t)| (i + 1, t))
    }

    /// Header `k,T_k,X_k`; `X_1` is left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,T_k,X_k\n");
        let ratios = crossing_ratio_statistic(self).unwrap_or_default();
        for (k, t) in self.entries() {
            match k.checked_sub(2).and_then(|i| ratios.get(i)) {
                Some(x) => writeln!(out, "{k},{t:.12e},{x:.12e}").unwrap(),
                None => writeln!(out, "{k},{t:.12e},").unwrap(),
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: SystemParams,
    pub times: Vec<f64>,
    pub states: Vec<RealState>,
    pub observables: Vec<Observables>,
    pub crossings: CrossingLog,
}

impl Trajectory {
    pub fn final_state(&self) -> &RealState {
        self.states
            .last()
            .expect("a trajectory holds at least the initial sample")
    }

    /// Header `t,p_1..p_N,q_1..q_N,H,E,e_1..e_N`.
    pub fn to_csv(&self) -> String {
        let n = self.params.n_sites;
        let mut out = String::from("t");
        for prefix in ["p", "q"] {
            for j in 1..=n {
                write!(out, ",{prefix}_{j}").unwrap();
            }
        }
        out.push_str(",H,E");
        for j in 1..=n {
            write!(out, ",e_{j}").unwrap();
        }
        out.push('\n');
        for ((t, state), obs) in self.times.iter().zip(&self.states).zip(&self.observables) {
            write!(out, "{t:.12e}").unwrap();
            for x in state.as_slice() {
                write!(out, ",{x:.15e}").unwrap();
            }
            write!(
                out,
                ",{:.15e},{:.15e}",
                obs.hamiltonian_value, obs.ell2_energy
            )
            .unwrap();
            for e in &obs.site_energies {
                write!(out, ",{e:.15e}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

struct Stepper {
    params: SystemParams,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

impl Stepper {
    fn new(params: SystemParams) -> Self {
        let dim = 2 * params.n_sites;
        Self {
            params,
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            stage: vec![0.0; dim],
        }
    }

    /// One classical Runge–Kutta step of size `h` from `x` into `out`.
    fn step(&mut self, x: &[f64], h: f64, out: &mut [f64]) {
        let p = &self.params;
        vector_field_into(x, p, &mut self.k1);
        for i in 0..x.len() {
            self.stage[i] = x[i] + 0.5 * h * self.k1[i];
        }
        vector_field_into(&self.stage, p, &mut self.k2);
        for i in 0..x.len() {
            self.stage[i] = x[i] + 0.5 * h * self.k2[i];
        }
        vector_field_into(&self.stage, p, &mut self.k3);
        for i in 0..x.len() {
            self.stage[i] = x[i] + h * self.k3[i];
        }
        vector_field_into(&self.stage, p, &mut self.k4);
        for i in 0..x.len() {
            out[i] = x[i] + h / 6.0 * (self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
    }
}

/// Locates a downward zero crossing between two samples.
///
/// Returns `None` unless `prev > 0 >= curr`. Otherwise bisects on
/// `signal_at(t)` until `|signal| < CROSSING_TOLERANCE` or
/// `MAX_BISECTIONS` halvings, and returns the bracket midpoint.
pub fn detect_downcrossing<F>(
    prev: f64,
    curr: f64,
    t_prev: f64,
    t_curr: f64,
    mut signal_at: F,
) -> Option<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(prev > 0.0 && curr <= 0.0) {
        return None;
    }
    if curr == 0.0 {
        return Some(t_curr);
    }
    let (mut lo, mut hi) = (t_prev, t_curr);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let s = signal_at(mid);
        if s.abs() < CROSSING_TOLERANCE {
            return Some(mid);
        }
        if s > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Integrates from `initial` at `t = 0` to `config.t_end`.
///
/// Observables are sampled at step 0, every `sample_stride` steps and at the
/// final step. Crossings are checked on every step.
pub fn integrate(
    initial: &RealState,
    params: &SystemParams,
    config: &IntegrationConfig,
) -> Result<Trajectory> {
    initial.check_sites(params)?;
    config.validate()?;
    let n = params.n_sites;
    let channel = config.channel.index(n);
    let steps = config.steps();
    let dt = config.dt;

    let mut stepper = Stepper::new(*params);
    let mut probe = Stepper::new(*params);
    let mut x = initial.as_slice().to_vec();
    let mut next = vec![0.0; x.len()];
    let mut scratch = vec![0.0; x.len()];

    let mut trajectory = Trajectory {
        params: *params,
        times: vec![0.0],
        states: vec![initial.clone()],
        observables: vec![Observables::measure(initial, params)?],
        crossings: CrossingLog::default(),
    };
    let mut armed = x[channel] > config.arm_level || config.arm_level == 0.0;

    for step in 1..=steps {
        let t_prev = (step - 1) as f64 * dt;
        let t = step as f64 * dt;
        stepper.step(&x, dt, &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp {
                last_good_time: t_prev,
            });
        }

        let (prev, curr) = (x[channel], next[channel]);
        if armed {
            let crossing = detect_downcrossing(prev, curr, t_prev, t, |s| {
                probe.step(&x, s - t_prev, &mut scratch);
                scratch[channel]
            });
            if let Some(tc) = crossing {
                trajectory.crossings.times.push(tc);
                armed = config.arm_level == 0.0;
            }
        } else if curr > config.arm_level {
            armed = true;
        }

        std::mem::swap(&mut x, &mut next);
        if step % config.sample_stride == 0 || step == steps {
            let state = RealState::from_flat(x.clone())?;
            trajectory
                .observables
                .push(Observables::measure(&state, params)?);
            trajectory.states.push(state);
            trajectory.times.push(t);
        }
    }
    Ok(trajectory)
}

/// `X_k = (T_k / T_{k-1} - 1) / (√(k/(k-1)) - 1)` for `k >= 2`.
pub fn crossing_ratio_statistic(crossings: &CrossingLog) -> Result<Vec<f64>> {
    if crossings.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 crossings, have {}",
            crossings.len()
        )));
    }
    Ok(crossings
        .times
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let k = (i + 2) as f64;
            (w[1] / w[0] - 1.0) / ((k / (k - 1.0)).sqrt() - 1.0)
        })
        .collect())
}

/// Decay exponent `s` from two norm samples, assuming `m(t) ~ exp(-γ ε^s t)`:
/// `s = log(log(m_t / m_tp) / (γ (tp - t))) / log ε`.
pub fn decay_exponent(params: &SystemParams, m_t: f64, m_tp: f64, t: f64, tp: f64) -> Result<f64> {
    let eps = params.epsilon;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {eps}"
        )));
    }
    if params.gamma <= 0.0 {
        return Err(Error::InvalidParameter(
            "decay exponent needs gamma > 0".into(),
        ));
    }
    if tp.partial_cmp(&t) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidWindow(format!(
            "window end {tp} is not after start {t}"
        )));
    }
    if !(m_tp > 0.0 && m_tp < m_t) {
        return Err(Error::InvalidWindow(format!(
            "norm does not decay: {m_t} -> {m_tp}"
        )));
    }
    let rate = (m_t / m_tp).ln() / (params.gamma * (tp - t));
    Ok(rate.ln() / eps.ln())
}

/// `(p*, 0)`.
pub fn breather_state(profile: &BreatherProfile) -> RealState {
    RealState::real(&profile.amplitudes).expect("profile amplitudes are finite")
}

/// `p = (1, 0, ..., 0)`, `q = 0`.
pub fn site_one_state(n_sites: usize) -> RealState {
    let mut p = vec![0.0; n_sites];
    p[0] = 1.0;
    RealState::real(&p).expect("finite")
}

fn random_unit(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// `state + δ u` for a seeded random unit vector `u`.
pub fn perturbed(state: &RealState, delta: f64, seed: u64) -> Result<RealState> {
    let u = random_unit(state.as_slice().len(), seed);
    RealState::from_flat(
        state
            .as_slice()
            .iter()
            .zip(&u)
            .map(|(x, v)| x + delta * v)
            .collect(),
    )
}

/// Breather plus a seeded kick of size `delta` with no component along the
/// zero-eigenvalue chain, so the kick leaves the breather parameters
/// `(φ, θ)` unchanged to first order.
pub fn perturbed_breather(
    profile: &BreatherProfile,
    params: &SystemParams,
    delta: f64,
    seed: u64,
) -> Result<RealState> {
    let undamped = params.with_gamma(0.0)?;
    let lin = build_linearization(profile, &undamped)?;
    let chain = zero_chain(&lin)?;
    let frame = adjoint_frame(&lin)?;
    let mut u = random_unit(2 * params.n_sites, seed);
    let (a1, a2) = frame.project(&u);
    for ((x, v1), v2) in u.iter_mut().zip(&chain.v1).zip(&chain.v2) {
        *x -= a1 * v1 + a2 * v2;
    }
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let base = breather_state(profile);
    RealState::from_flat(
        base.as_slice()
            .iter()
            .zip(&u)
            .map(|(x, v)| x + delta * v / norm)
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::breather::solve_breather;
    use crate::lattice::{energy_flux, hamiltonian_flat};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn config_validation() {
        assert!(IntegrationConfig::new(1.0, 0.0, 1).is_err());
        assert!(IntegrationConfig::new(-1.0, 0.01, 1).is_err());
        assert!(IntegrationConfig::new(1.0, 0.01, 0).is_err());
        assert!(IntegrationConfig::new(1.0, 0.01, 1)
            .unwrap()
            .with_arm_level(-1.0)
            .validate()
            .is_err());
        assert_eq!(IntegrationConfig::new(1.0, 0.01, 1).unwrap().steps(), 100);
        assert_eq!(default_dt(0.0), 0.01);
        assert_relative_eq!(default_dt(10.0), PI / 1000.0);
        assert_eq!(
            "p1".parse::<CrossingChannel>().unwrap(),
            CrossingChannel::P1
        );
        assert!("x".parse::<CrossingChannel>().is_err());
    }

    #[test]
    fn crossing_detector() {
        assert_eq!(
            detect_downcrossing(0.5, 0.4, 0.0, 0.1, |_| unreachable!()),
            None
        );
        assert_eq!(
            detect_downcrossing(-0.5, 0.4, 0.0, 0.1, |_| unreachable!()),
            None
        );
        let t = detect_downcrossing(0.1, -0.1, 0.9, 1.1, |t| 1.0 - t).unwrap();
        assert!((t - 1.0).abs() < 1e-10);
        // bisection cap on a signal that never gets small
        let t =
            detect_downcrossing(1.0, -1.0, 0.0, 1.0, |t| if t < 0.3 { 1.0 } else { -1.0 }).unwrap();
        assert!((t - 0.3).abs() < 1e-15);
    }

    #[test]
    fn ratio_statistic() {
        let log = CrossingLog {
            times: vec![1.0, 2.0],
        };
        let x = crossing_ratio_statistic(&log).unwrap();
        assert_relative_eq!(x[0], 1.0 / (2f64.sqrt() - 1.0), epsilon = 1e-14);
        assert_relative_eq!(x[0], 2.414213562373095, epsilon = 1e-12);
        let law = CrossingLog {
            times: (1..20).map(|k| 3.7 * (k as f64).sqrt()).collect(),
        };
        for x in crossing_ratio_statistic(&law).unwrap() {
            assert_relative_eq!(x, 1.0, epsilon = 1e-9);
        }
        assert!(matches!(
            crossing_ratio_statistic(&CrossingLog { times: vec![1.0] }),
            Err(Error::InsufficientData(_))
        ));
        let csv = log.to_csv();
        assert!(csv.starts_with("k,T_k,X_k\n1,1.0"));
        assert_eq!(csv.lines().nth(1).unwrap().split(',').nth(2), Some(""));
    }

    #[test]
    fn decay_exponent_inverts_synthetic_decay() {
        for (eps, s) in [(0.1, 5.0), (0.1, 3.0), (0.05, 3.0)] {
            let params = SystemParams::new(3, eps, 0.2).unwrap();
            let m = |t: f64| (-0.2 * f64::powf(eps, s) * t).exp();
            let k = decay_exponent(&params, m(100.0), m(900.0), 100.0, 900.0).unwrap();
            assert_relative_eq!(k, s, epsilon = 1e-9);
        }
        let params = SystemParams::new(3, 0.1, 0.2).unwrap();
        assert!(matches!(
            decay_exponent(&params, 1.0, 1.0, 0.0, 1.0),
            Err(Error::InvalidWindow(_))
        ));
        assert!(matches!(
            decay_exponent(&params, 1.0, 0.5, 1.0, 1.0),
            Err(Error::InvalidWindow(_))
        ));
        let undamped = SystemParams::new(3, 0.1, 0.0).unwrap();
        assert!(decay_exponent(&undamped, 1.0, 0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn breather_is_a_fixed_point() {
        let params = SystemParams::new(3, 0.05, 0.0).unwrap();
        let profile = solve_breather(&params, 0.0).unwrap();
        let x0 = breather_state(&profile);
        let config = IntegrationConfig::new(1000.0, 0.01, 10_000).unwrap();
        let traj = integrate(&x0, &params, &config).unwrap();
        for s in &traj.states {
            let d = s
                .as_slice()
                .iter()
                .zip(x0.as_slice())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(d < 1e-8, "{d}");
        }
        assert!(traj.crossings.is_empty());
        assert_eq!(traj.times.len(), 11);
        assert_eq!(*traj.times.last().unwrap(), 1000.0);
    }

    #[test]
    fn detuned_breather_rotates_at_its_frequency() {
        let phi = 0.1;
        let params = SystemParams::new(3, 0.05, 0.0).unwrap();
        let profile = solve_breather(&params, phi).unwrap();
        let period = 2.0 * PI / phi;
        let config = IntegrationConfig::new(3.5 * period, default_dt(phi), 1000)
            .unwrap()
            .with_channel(CrossingChannel::P1);
        let traj = integrate(&breather_state(&profile), &params, &config).unwrap();
        // counterclockwise rotation: p1 falls through zero a quarter turn in
        let t = &traj.crossings.times;
        assert_eq!(t.len(), 4);
        assert!((t[0] - period / 4.0).abs() < 1e-3 * period);
        for w in t.windows(2) {
            assert!(((w[1] - w[0]) - period).abs() < 1e-3 * period);
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let params = SystemParams::new(3, 0.1, 0.0).unwrap();
        let x0 = RealState::new(&[0.9, 0.3, -0.2], &[0.1, 0.0, 0.4]).unwrap();
        let h0 = hamiltonian_flat(x0.as_slice(), 0.1);
        let drift = |dt: f64| {
            let config = IntegrationConfig::new(20.0, dt, 1_000_000).unwrap();
            let traj = integrate(&x0, &params, &config).unwrap();
            (traj.observables.last().unwrap().hamiltonian_value - h0).abs()
        };
        let ratio = drift(0.1) / drift(0.05);
        assert!(ratio > 12.0 && ratio < 40.0, "{ratio}");
    }

    #[test]
    fn dissipation_matches_integrated_flux() {
        let params = SystemParams::new(3, 0.1, 0.2).unwrap();
        let x0 = perturbed(&site_one_state(3), 0.05, 7).unwrap();
        let config = IntegrationConfig::new(200.0, 0.01, 1).unwrap();
        let traj = integrate(&x0, &params, &config).unwrap();
        let energy: Vec<f64> = traj.observables.iter().map(|o| o.ell2_energy).collect();
        for w in energy.windows(2) {
            assert!(w[1] <= w[0] + 1e-13);
        }
        let flux: Vec<f64> = traj
            .states
            .iter()
            .map(|s| energy_flux(s, &params).unwrap())
            .collect();
        let (a, b) = (5_000, 20_000);
        let quad: f64 = (a..b).map(|i| 0.5 * (flux[i] + flux[i + 1]) * 0.01).sum();
        let delta = energy[b] - energy[a];
        assert!(delta < 0.0);
        assert!(
            (quad - delta).abs() < 0.01 * delta.abs(),
            "{quad} vs {delta}"
        );
        // central differences agree pointwise to O(dt²)
        for i in (1..energy.len() - 1).step_by(997) {
            let fd = (energy[i + 1] - energy[i - 1]) / 0.02;
            assert!((fd - flux[i]).abs() < 1e-5, "{fd} vs {}", flux[i]);
        }
    }

    #[test]
    fn integration_is_deterministic() {
        let params = SystemParams::new(4, 0.05, 0.1).unwrap();
        let x0 = perturbed(&site_one_state(4), 1e-3, 42).unwrap();
        let config = IntegrationConfig::new(50.0, 0.01, 7).unwrap();
        let a = integrate(&x0, &params, &config).unwrap();
        let b = integrate(&x0, &params, &config).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a, b);
    }

    #[test]
    fn blow_up_is_reported() {
        let params = SystemParams::new(2, 0.1, 0.0).unwrap();
        let x0 = RealState::new(&[50.0, 0.0], &[0.0, 0.0]).unwrap();
        let config = IntegrationConfig::new(10.0, 0.5, 1).unwrap();
        assert!(matches!(
            integrate(&x0, &params, &config),
            Err(Error::BlowUp { .. })
        ));
    }

    #[test]
    fn projected_kick_is_off_the_zero_modes() {
        let params = SystemParams::new(4, 0.05, 0.2).unwrap();
        let profile = solve_breather(&params, 0.0).unwrap();
        let x = perturbed_breather(&profile, &params, 1e-3, 3).unwrap();
        let base = breather_state(&profile);
        let w: Vec<f64> = x
            .as_slice()
            .iter()
            .zip(base.as_slice())
            .map(|(a, b)| a - b)
            .collect();
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_relative_eq!(norm, 1e-3, epsilon = 1e-15);
        let lin = build_linearization(&profile, &params.with_gamma(0.0).unwrap()).unwrap();
        let (a1, a2) = adjoint_frame(&lin).unwrap().project(&w);
        assert!(a1.abs() < 1e-15 && a2.abs() < 1e-15, "{a1} {a2}");
        assert_eq!(x, perturbed_breather(&profile, &params, 1e-3, 3).unwrap());
        assert_ne!(x, perturbed_breather(&profile, &params, 1e-3, 4).unwrap());
    }

    #[test]
    fn trajectory_csv_layout() {
        let params = SystemParams::new(2, 0.1, 0.0).unwrap();
        let config = IntegrationConfig::new(0.1, 0.01, 5).unwrap();
        let traj = integrate(&site_one_state(2), &params, &config).unwrap();
        let csv = traj.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,p_1,p_2,q_1,q_2,H,E,e_1,e_2"));
        assert_eq!(lines.count(), 3);
    }
}
