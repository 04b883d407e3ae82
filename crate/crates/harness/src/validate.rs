//! Pre-flight diagnostics. Nothing here fails a run; problems are reported
//! as warnings.

use std::time::Instant;

use dnls_core::breather::{EPSILON_BASIN, PHI_BASIN};
use dnls_core::dynamics::{integrate, IntegrationConfig};
use dnls_core::lattice::{ell2_energy, hamiltonian};
use dnls_core::SystemParams;

use crate::experiments::{decay_horizon, initial_state, CROSSING_DEFAULT_K, LADDER_T_END};
use crate::{Experiment, ExperimentConfig, InitialKind};

pub const PROBE_T_END: f64 = 100.0;
pub const PROBE_DRIFT_LIMIT: f64 = 1e-6;
const MAX_HALVINGS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub warnings: Vec<String>,
    pub info: Vec<String>,
    /// Total RK4 steps across the sweep.
    pub steps: u64,
    pub estimated_seconds: f64,
}

impl Diagnostics {
    pub fn ok(&self) -> bool {
        self.warnings.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        for i in &self.info {
            out.push_str(&format!("{i}\n"));
        }
        if self.ok() {
            out.push_str("ok\n");
        }
        out
    }
}

/// Largest relative drift of `H` and `𝓔` over an undamped probe run.
pub fn conservation_drift(n: usize, eps: f64, dt: f64, t_end: f64) -> Option<f64> {
    let params = SystemParams::new(n, eps, 0.0).ok()?;
    let (x0, _) = initial_state(InitialKind::Breather, &params, 1e-3, 1).ok()?;
    let config = IntegrationConfig::new(t_end, dt, usize::MAX).ok()?;
    let traj = match integrate(&x0, &params, &config) {
        Ok(t) => t,
        Err(_) => return Some(f64::INFINITY),
    };
    let end = traj.final_state();
    let rel = |a: f64, b: f64| ((b - a) / a.abs().max(f64::MIN_POSITIVE)).abs();
    let h = rel(
        hamiltonian(&x0, &params).ok()?,
        hamiltonian(end, &params).ok()?,
    );
    let e = rel(ell2_energy(&x0), ell2_energy(end));
    Some(if h.is_finite() && e.is_finite() {
        h.max(e)
    } else {
        f64::INFINITY
    })
}

fn horizon(config: &ExperimentConfig, params: &SystemParams) -> f64 {
    if let Some(t) = config.t_end {
        return t;
    }
    match config.experiment {
        Experiment::Fig1Energies => LADDER_T_END,
        Experiment::Fig3Crossings => {
            dnls_core::modulation::predicted_crossing_times(params, CROSSING_DEFAULT_K)
                .unwrap_or(0.0)
        }
        Experiment::Fig4Decay => decay_horizon(params),
        _ => 0.0,
    }
}

pub fn validate(config: &ExperimentConfig) -> Diagnostics {
    let mut d = Diagnostics {
        warnings: Vec::new(),
        info: Vec::new(),
        steps: 0,
        estimated_seconds: 0.0,
    };
    if let Err(e) = config.validate() {
        d.warnings.push(e.to_string());
        return d;
    }
    for &eps in &config.epsilons {
        if eps >= EPSILON_BASIN {
            d.warnings.push(format!(
                "epsilon = {eps} is outside the breather solver basin (epsilon < {EPSILON_BASIN}, |phi| < {PHI_BASIN}); breather starts fall back to the site-one state"
            ));
        }
    }
    if !config.experiment.integrates() {
        d.info
            .push(format!("{}: no time integration", config.experiment));
        return d;
    }

    // time one probe step batch to calibrate the estimate
    let probe_n = *config.n_sites.iter().max().unwrap();
    let probe_eps = config.epsilons.iter().cloned().fold(0.0, f64::max).min(0.1);
    let start = Instant::now();
    let drift = conservation_drift(probe_n, probe_eps, config.dt, PROBE_T_END);
    let probe_steps = (PROBE_T_END / config.dt).ceil();
    let per_step = start.elapsed().as_secs_f64() / probe_steps;
    match drift {
        Some(drift) if drift > PROBE_DRIFT_LIMIT => {
            let mut dt = config.dt;
            let mut suggestion = None;
            for _ in 0..MAX_HALVINGS {
                dt *= 0.5;
                if conservation_drift(probe_n, probe_eps, dt, PROBE_T_END)
                    .is_some_and(|x| x <= PROBE_DRIFT_LIMIT)
                {
                    suggestion = Some(dt);
                    break;
                }
            }
            d.warnings.push(match suggestion {
                Some(s) => format!(
                    "dt = {} drifts {drift:.2e} > {PROBE_DRIFT_LIMIT:.0e} over t = {PROBE_T_END} without damping; suggested dt = {s}",
                    config.dt
                ),
                None => format!("dt = {} drifts {drift:.2e} over the conservation probe; no adequate dt found", config.dt),
            });
        }
        Some(drift) => d.info.push(format!(
            "conservation probe: relative drift {drift:.2e} over t = {PROBE_T_END}"
        )),
        None => d
            .info
            .push("conservation probe skipped: no starting state".into()),
    }

    for (n, eps, gamma) in config.points() {
        let Ok(params) = SystemParams::new(n, eps, gamma) else {
            continue;
        };
        let t = horizon(config, &params);
        let steps = (t / config.dt).ceil() as u64;
        d.steps += steps;
        d.info.push(format!(
            "N={n} eps={eps} gamma={gamma}: t_end = {t:.6e}, {steps} steps"
        ));
    }
    d.estimated_seconds = d.steps as f64 * per_step;
    d.info.push(format!(
        "total {} steps, estimated {:.1} s single-threaded",
        d.steps, d.estimated_seconds
    ));
    d
}
