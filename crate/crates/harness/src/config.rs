//! Experiment configuration: defaults per experiment, `key=value` overrides
//! from flags or a config file, and validation.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Experiment {
    Fig1Energies,
    Fig3Crossings,
    Fig4Decay,
    Fig5Spectrum,
    BreatherTable,
    SpectrumReport,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Fig1Energies,
        Experiment::Fig3Crossings,
        Experiment::Fig4Decay,
        Experiment::Fig5Spectrum,
        Experiment::BreatherTable,
        Experiment::SpectrumReport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig1Energies => "fig1-energies",
            Experiment::Fig3Crossings => "fig3-crossings",
            Experiment::Fig4Decay => "fig4-decay",
            Experiment::Fig5Spectrum => "fig5-spectrum",
            Experiment::BreatherTable => "breather-table",
            Experiment::SpectrumReport => "spectrum-report",
        }
    }

    /// Whether the experiment integrates trajectories.
    pub fn integrates(self) -> bool {
        matches!(
            self,
            Experiment::Fig1Energies | Experiment::Fig3Crossings | Experiment::Fig4Decay
        )
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment {s:?}")))
    }
}

/// How the `gamma` list is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaConvention {
    /// `gamma` values are used as given.
    Absolute,
    /// `gamma` values are factors of epsilon, so `0.2` means `γ = 0.2ε`.
    RelativeToEpsilon,
}

impl GammaConvention {
    pub fn name(self) -> &'static str {
        match self {
            GammaConvention::Absolute => "absolute",
            GammaConvention::RelativeToEpsilon => "relative",
        }
    }

    pub fn resolve(self, gamma: f64, epsilon: f64) -> f64 {
        match self {
            GammaConvention::Absolute => gamma,
            GammaConvention::RelativeToEpsilon => gamma * epsilon,
        }
    }
}

/// Starting state for integrating experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialKind {
    /// Breather at `φ = 0` plus a kick off its zero modes; falls back to
    /// the site-one state when no breather is found.
    Breather,
    /// `(1, 0, ..., 0)` plus an unprojected kick.
    SiteOne,
}

impl InitialKind {
    pub fn name(self) -> &'static str {
        match self {
            InitialKind::Breather => "breather",
            InitialKind::SiteOne => "site-one",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n_sites: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub gammas: Vec<f64>,
    pub gamma_convention: GammaConvention,
    /// `None` selects the experiment's own horizon.
    pub t_end: Option<f64>,
    pub dt: f64,
    pub seed: u64,
    pub perturbation: f64,
    pub initial: InitialKind,
    /// Series order for the breather table.
    pub order: usize,
    /// Damping grid for the spectrum sweep: `gamma_points` values on `[0, gamma_max]`.
    pub gamma_max: f64,
    pub gamma_points: usize,
    pub output_dir: PathBuf,
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, HarnessError> {
    let items: Result<Vec<T>, _> = value.split(',').map(|s| s.trim().parse::<T>()).collect();
    match items {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(HarnessError::Config(format!(
            "{key}: cannot parse list {value:?}"
        ))),
    }
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value
        .trim()
        .parse()
        .map_err(|_| HarnessError::Config(format!("{key}: cannot parse {value:?}")))
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl ExperimentConfig {
    /// Parameters of the corresponding figure, scaled to desk runtimes where
    /// the original horizon is out of reach.
    pub fn defaults(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            n_sites: vec![3],
            epsilons: vec![0.01],
            gammas: vec![0.2],
            gamma_convention: GammaConvention::Absolute,
            t_end: None,
            dt: dnls_core::dynamics::DEFAULT_DT,
            seed: 1,
            perturbation: dnls_core::dynamics::DEFAULT_PERTURBATION,
            initial: InitialKind::Breather,
            order: 3,
            gamma_max: 0.5,
            gamma_points: 11,
            output_dir: PathBuf::from("out").join(experiment.name()),
        };
        match experiment {
            Experiment::Fig1Energies => Self {
                n_sites: vec![4],
                initial: InitialKind::SiteOne,
                ..base
            },
            Experiment::Fig3Crossings => Self {
                epsilons: vec![0.05, 0.1],
                gamma_convention: GammaConvention::RelativeToEpsilon,
                ..base
            },
            Experiment::Fig4Decay => Self {
                n_sites: vec![2, 3],
                epsilons: vec![0.05, 0.1, 0.2],
                ..base
            },
            Experiment::Fig5Spectrum => base,
            Experiment::BreatherTable => Self {
                epsilons: vec![0.001, 0.005, 0.01, 0.05],
                ..base
            },
            Experiment::SpectrumReport => Self {
                gammas: vec![0.0],
                ..base
            },
        }
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        match key {
            "experiment" => {
                let e: Experiment = value.trim().parse()?;
                if e != self.experiment {
                    return Err(HarnessError::Config(format!(
                        "config file is for {e}, not {}",
                        self.experiment
                    )));
                }
            }
            "n_sites" => self.n_sites = parse_list(key, value)?,
            "epsilon" => self.epsilons = parse_list(key, value)?,
            "gamma" => self.gammas = parse_list(key, value)?,
            "gamma_convention" => {
                self.gamma_convention = match value.trim() {
                    "absolute" => GammaConvention::Absolute,
                    "relative" => GammaConvention::RelativeToEpsilon,
                    other => {
                        return Err(HarnessError::Config(format!(
                            "gamma_convention must be absolute or relative, got {other:?}"
                        )))
                    }
                }
            }
            "t_end" => self.t_end = Some(parse_one(key, value)?),
            "dt" => self.dt = parse_one(key, value)?,
            "seed" => self.seed = parse_one(key, value)?,
            "perturbation" => self.perturbation = parse_one(key, value)?,
            "initial" => {
                self.initial = match value.trim() {
                    "breather" => InitialKind::Breather,
                    "site-one" => InitialKind::SiteOne,
                    other => {
                        return Err(HarnessError::Config(format!(
                            "initial must be breather or site-one, got {other:?}"
                        )))
                    }
                }
            }
            "order" => self.order = parse_one(key, value)?,
            "gamma_max" => self.gamma_max = parse_one(key, value)?,
            "gamma_points" => self.gamma_points = parse_one(key, value)?,
            "out" | "output_dir" => self.output_dir = PathBuf::from(value.trim()),
            other => return Err(HarnessError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` file. Blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, text: &str) -> Result<(), HarnessError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("line {}: expected key=value, got {line:?}", i + 1))
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.n_sites.iter().any(|&n| n < 2) {
            return bad(format!("n_sites must be at least 2: {:?}", self.n_sites));
        }
        if self
            .epsilons
            .iter()
            .any(|e| !e.is_finite() || *e < 0.0 || *e >= 1.0)
        {
            return bad(format!("epsilon must lie in [0, 1): {:?}", self.epsilons));
        }
        if self.gammas.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return bad(format!("gamma must be non-negative: {:?}", self.gammas));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if let Some(t) = self.t_end {
            if !(t.is_finite() && t > 0.0) {
                return bad(format!("t_end must be positive, got {t}"));
            }
        }
        if !(self.perturbation.is_finite() && self.perturbation >= 0.0) {
            return bad(format!(
                "perturbation must be non-negative, got {}",
                self.perturbation
            ));
        }
        if !(self.gamma_max.is_finite() && self.gamma_max > 0.0) || self.gamma_points < 2 {
            return bad("damping grid needs gamma_max > 0 and at least 2 points".into());
        }
        if self.experiment.integrates() && self.epsilons.contains(&0.0) {
            return bad("integrating experiments need epsilon > 0".into());
        }
        if matches!(
            self.experiment,
            Experiment::Fig3Crossings | Experiment::Fig4Decay
        ) && self.gammas.contains(&0.0)
        {
            return bad(format!("{} needs gamma > 0", self.experiment));
        }
        Ok(())
    }

    /// Every `(N, ε, γ)` combination with `γ` resolved per the convention.
    pub fn points(&self) -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        for &n in &self.n_sites {
            for &eps in &self.epsilons {
                for &g in &self.gammas {
                    out.push((n, eps, self.gamma_convention.resolve(g, eps)));
                }
            }
        }
        out
    }

    pub fn gamma_grid(&self) -> Vec<f64> {
        let m = (self.gamma_points - 1) as f64;
        (0..self.gamma_points)
            .map(|i| self.gamma_max * i as f64 / m)
            .collect()
    }

    /// The resolved configuration as ordered `key=value` pairs.
    pub fn resolved(&self) -> Vec<(&'static str, String)> {
        vec![
            ("experiment", self.experiment.name().to_string()),
            ("n_sites", join(&self.n_sites)),
            ("epsilon", join(&self.epsilons)),
            ("gamma", join(&self.gammas)),
            ("gamma_convention", self.gamma_convention.name().to_string()),
            (
                "t_end",
                self.t_end
                    .map_or_else(|| "auto".to_string(), |t| t.to_string()),
            ),
            ("dt", self.dt.to_string()),
            ("seed", self.seed.to_string()),
            ("perturbation", self.perturbation.to_string()),
            ("initial", self.initial.name().to_string()),
            ("order", self.order.to_string()),
            ("gamma_max", self.gamma_max.to_string()),
            ("gamma_points", self.gamma_points.to_string()),
            ("out", self.output_dir.display().to_string()),
        ]
    }
}
