//! Experiment configuration: a TOML file with `[section]` headers, optional
//! command-line overrides, and per-experiment defaults.
//!
//! Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rwa_core::controls::{ControlProfile, HermitianSeries, PerturbationEntry, TrigSeries};
use rwa_core::schrodinger::StepPolicy;
use serde::Deserialize;

use crate::grid::parse_grid;
use crate::RunError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Experiment {
    Transfer,
    RwaGap,
    Scaling,
    DeltaSweep,
    ESweep,
    LemmaFast,
    KillOscillations,
    FrameCheck,
    VariationCheck,
    AdiabaticOrder,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::Transfer,
        Experiment::RwaGap,
        Experiment::Scaling,
        Experiment::DeltaSweep,
        Experiment::ESweep,
        Experiment::LemmaFast,
        Experiment::KillOscillations,
        Experiment::FrameCheck,
        Experiment::VariationCheck,
        Experiment::AdiabaticOrder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Transfer => "transfer",
            Experiment::RwaGap => "rwa-gap",
            Experiment::Scaling => "scaling",
            Experiment::DeltaSweep => "delta-sweep",
            Experiment::ESweep => "e-sweep",
            Experiment::LemmaFast => "lemma-fast",
            Experiment::KillOscillations => "kill-oscillations",
            Experiment::FrameCheck => "frame-check",
            Experiment::VariationCheck => "variation-check",
            Experiment::AdiabaticOrder => "adiabatic-order",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment {s:?}"))
    }
}

/// A scalar, a list, or a grid expression.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum GridValue {
    Scalar(f64),
    List(Vec<f64>),
    Expr(String),
}

impl GridValue {
    fn points(&self) -> Result<Vec<f64>, String> {
        match self {
            GridValue::Scalar(x) => Ok(vec![*x]),
            GridValue::List(v) if v.is_empty() => Err("empty grid".into()),
            GridValue::List(v) => Ok(v.clone()),
            GridValue::Expr(s) => parse_grid(s),
        }
    }
}

/// `constant + linear·τ + Σ sin[k−1]·sin(kπτ) + cos[k−1]·cos(kπτ)`.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SeriesSpec {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub linear: f64,
    #[serde(default)]
    pub sin: Vec<f64>,
    #[serde(default)]
    pub cos: Vec<f64>,
}

impl SeriesSpec {
    fn to_series(&self) -> TrigSeries {
        TrigSeries {
            constant: self.constant,
            linear: self.linear,
            sin: self.sin.clone(),
            cos: self.cos.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    pub name: Option<String>,
    pub v: Option<SeriesSpec>,
    pub phi: Option<SeriesSpec>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub epsilon: Option<GridValue>,
    pub alpha: Option<GridValue>,
    #[serde(rename = "E")]
    pub energy: Option<GridValue>,
    pub delta: Option<GridValue>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub n_osc: Option<u32>,
    pub h_max: Option<f64>,
    pub stride: Option<usize>,
    pub richardson: Option<bool>,
    pub max_steps: Option<u64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    pub min_fidelity: Option<f64>,
    pub max_jump: Option<f64>,
    pub norm_tolerance: Option<f64>,
    pub gap_floor: Option<f64>,
    pub window: Option<[f64; 2]>,
    pub spectral_points: Option<usize>,
    pub carrier_energy: Option<f64>,
    pub detuning: Option<f64>,
    pub detuned_max_fidelity: Option<f64>,
    pub tolerance_factor: Option<f64>,
    pub identity_tolerance: Option<f64>,
    pub pairs: Option<usize>,
    pub seed: Option<u64>,
    pub dim: Option<usize>,
    pub harmonics: Option<usize>,
    pub b_zero: Option<bool>,
    pub threshold: Option<f64>,
    pub min_slope: Option<f64>,
    pub slope_window: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub prefix: Option<String>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HermitianEntrySpec {
    pub j: usize,
    pub k: usize,
    #[serde(default)]
    pub re: SeriesSpec,
    #[serde(default)]
    pub im: SeriesSpec,
}

/// Slow generator `A = −i·H` of a general n-level system.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub dim: usize,
    #[serde(default)]
    pub entries: Vec<HermitianEntrySpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationEntrySpec {
    pub j: usize,
    pub k: usize,
    pub beta: f64,
    pub v: SeriesSpec,
    #[serde(default)]
    pub h: SeriesSpec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    pub entries: Vec<PerturbationEntrySpec>,
}

/// The file as written.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<String>,
    #[serde(default)]
    pub profile: ProfileSection,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub check: CheckSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub run: RunSection,
    pub system: Option<SystemSection>,
    pub perturbation: Option<PerturbationSection>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            RunError::Config(m) => RunError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub epsilon: Option<String>,
    pub alpha: Option<String>,
    pub energy: Option<String>,
    pub delta: Option<String>,
    pub profile: Option<String>,
    pub out: Option<String>,
    pub threads: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, file: &mut ConfigFile) {
        let grid = |s: &Option<String>| s.as_ref().map(|x| GridValue::Expr(x.clone()));
        if self.epsilon.is_some() {
            file.params.epsilon = grid(&self.epsilon);
        }
        if self.alpha.is_some() {
            file.params.alpha = grid(&self.alpha);
        }
        if self.energy.is_some() {
            file.params.energy = grid(&self.energy);
        }
        if self.delta.is_some() {
            file.params.delta = grid(&self.delta);
        }
        if let Some(name) = &self.profile {
            file.profile = ProfileSection {
                name: Some(name.clone()),
                v: None,
                phi: None,
            };
        }
        if let Some(out) = &self.out {
            file.output.prefix = Some(out.clone());
        }
        if let Some(t) = self.threads {
            file.run.threads = Some(t);
        }
    }
}

/// Thresholds and experiment-specific knobs after defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub min_fidelity: f64,
    pub max_jump: f64,
    pub norm_tolerance: f64,
    pub gap_floor: f64,
    pub window: (f64, f64),
    pub spectral_points: usize,
    pub carrier_energy: f64,
    pub detuning: f64,
    pub detuned_max_fidelity: f64,
    pub tolerance_factor: f64,
    pub identity_tolerance: f64,
    pub pairs: usize,
    pub seed: u64,
    pub dim: usize,
    pub harmonics: usize,
    pub b_zero: bool,
    pub threshold: f64,
    pub min_slope: Option<f64>,
    pub slope_window: f64,
}

/// Fully resolved configuration of one run.
#[derive(Clone, Debug)]
pub struct Config {
    pub experiment: Experiment,
    pub profile: ControlProfile,
    pub epsilon: Vec<f64>,
    pub alpha: Vec<f64>,
    pub energy: Vec<f64>,
    pub delta: Vec<f64>,
    pub policy: StepPolicy,
    /// Stored-point stride; `None` picks one automatically.
    pub stride: Option<usize>,
    pub check: Check,
    pub system: Option<HermitianSeries>,
    pub perturbation: Option<Vec<PerturbationEntry>>,
    pub prefix: PathBuf,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    pub warnings: Vec<String>,
}

struct Defaults {
    epsilon: &'static str,
    alpha: &'static str,
    energy: &'static str,
    delta: &'static str,
    min_fidelity: f64,
    h_max: f64,
}

fn defaults(e: Experiment) -> Defaults {
    let base = Defaults {
        epsilon: "0.01",
        alpha: "1.5",
        energy: "1",
        delta: "1",
        min_fidelity: 0.99,
        h_max: rwa_core::schrodinger::DEFAULT_H_MAX,
    };
    match e {
        Experiment::RwaGap => Defaults {
            epsilon: "0.08, 0.04, 0.02, 0.01",
            ..base
        },
        Experiment::Scaling => Defaults {
            epsilon: "0.08, 0.04, 0.02",
            alpha: "1.5, 2.5",
            ..base
        },
        Experiment::DeltaSweep => Defaults {
            delta: "linspace(0.2, 1, 50)",
            min_fidelity: 0.95,
            ..base
        },
        Experiment::ESweep => Defaults {
            energy: "linspace(0.5, 1.5, 21)",
            ..base
        },
        Experiment::LemmaFast => Defaults {
            epsilon: "0.2, 0.1, 0.05",
            ..base
        },
        Experiment::KillOscillations => Defaults {
            epsilon: "0.08, 0.04, 0.02",
            ..base
        },
        Experiment::VariationCheck => Defaults { h_max: 1e-4, ..base },
        Experiment::AdiabaticOrder => Defaults {
            epsilon: "0.04, 0.02, 0.01",
            ..base
        },
        Experiment::Transfer | Experiment::FrameCheck => base,
    }
}

fn cfg_err(msg: impl Into<String>) -> RunError {
    RunError::Config(msg.into())
}

fn resolve_grid(name: &str, value: &Option<GridValue>, default: &str) -> Result<Vec<f64>, RunError> {
    let points = match value {
        Some(v) => v.points(),
        None => parse_grid(default),
    }
    .map_err(|e| cfg_err(format!("{name}: {e}")))?;
    if let Some(x) = points.iter().find(|x| !x.is_finite()) {
        return Err(cfg_err(format!("{name}: {x} is not finite")));
    }
    Ok(points)
}

fn require_positive(name: &str, points: &[f64]) -> Result<(), RunError> {
    match points.iter().find(|&&x| !(x > 0.0)) {
        Some(x) => Err(cfg_err(format!("{name}: {x} must be positive"))),
        None => Ok(()),
    }
}

fn resolve_profile(section: &ProfileSection) -> Result<ControlProfile, RunError> {
    match (&section.v, &section.phi) {
        (None, None) => {
            let name = section.name.as_deref().unwrap_or("sine");
            ControlProfile::by_name(name).ok_or_else(|| {
                let known: Vec<String> = ControlProfile::catalog().iter().map(|p| p.name().to_string()).collect();
                cfg_err(format!("unknown profile {name:?}; known: {}", known.join(", ")))
            })
        }
        (Some(v), Some(phi)) => {
            let name = section.name.as_deref().unwrap_or("custom");
            if ControlProfile::by_name(name).is_some() {
                return Err(cfg_err(format!(
                    "custom profile may not reuse the catalog name {name:?}"
                )));
            }
            ControlProfile::new(name, v.to_series(), phi.to_series()).map_err(|e| cfg_err(e.to_string()))
        }
        _ => Err(cfg_err("profile: give both v and phi, or neither")),
    }
}

fn resolve_system(section: &SystemSection) -> Result<HermitianSeries, RunError> {
    let mut h = HermitianSeries::new(section.dim).map_err(|e| cfg_err(format!("system: {e}")))?;
    for e in &section.entries {
        h.set(e.j, e.k, e.re.to_series(), e.im.to_series())
            .map_err(|err| cfg_err(format!("system: {err}")))?;
    }
    Ok(h)
}

impl Config {
    /// Resolves `file` for `experiment`. The file's own `experiment` key, when
    /// present, must agree.
    pub fn resolve(experiment: Experiment, file: &ConfigFile) -> Result<Self, RunError> {
        if let Some(name) = &file.experiment {
            let declared: Experiment = name.parse().map_err(cfg_err)?;
            if declared != experiment {
                return Err(cfg_err(format!(
                    "config declares experiment {declared} but {experiment} was requested"
                )));
            }
        }
        let d = defaults(experiment);
        let mut warnings = Vec::new();

        let profile = resolve_profile(&file.profile)?;
        let p = &file.params;
        let epsilon = resolve_grid("epsilon", &p.epsilon, d.epsilon)?;
        let alpha = resolve_grid("alpha", &p.alpha, d.alpha)?;
        let energy = resolve_grid("E", &p.energy, d.energy)?;
        let delta = resolve_grid("delta", &p.delta, d.delta)?;
        require_positive("epsilon", &epsilon)?;
        require_positive("E", &energy)?;
        if let Some(d) = delta.iter().find(|&&d| !(d >= 0.0)) {
            return Err(cfg_err(format!("delta: {d} must be nonnegative")));
        }
        if let Some(a) = alpha.iter().find(|&&a| a <= -1.0) {
            return Err(cfg_err(format!("alpha: {a} must exceed -1")));
        }
        for &a in &alpha {
            if a <= 1.0 {
                warnings.push(format!("alpha = {a} is outside the proven regime alpha > 1"));
            }
        }
        for (name, grid) in [
            ("epsilon", &epsilon),
            ("alpha", &alpha),
            ("E", &energy),
            ("delta", &delta),
        ] {
            let mut sorted = grid.clone();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(cfg_err(format!("{name}: duplicate grid points")));
            }
        }

        let pol = &file.policy;
        let mut policy = StepPolicy::default().with_richardson(pol.richardson.unwrap_or(true));
        policy.h_max = pol.h_max.unwrap_or(d.h_max);
        if let Some(n) = pol.n_osc {
            policy.n_osc = n;
        }
        if let Some(m) = pol.max_steps {
            policy.max_steps = m;
        }
        policy.validate().map_err(|e| cfg_err(format!("policy: {e}")))?;
        if pol.stride == Some(0) {
            return Err(cfg_err("policy: stride must be positive"));
        }

        let c = &file.check;
        let check = Check {
            min_fidelity: c.min_fidelity.unwrap_or(d.min_fidelity),
            max_jump: c.max_jump.unwrap_or(0.05),
            norm_tolerance: c.norm_tolerance.unwrap_or(1e-9),
            gap_floor: c.gap_floor.unwrap_or(0.3),
            window: c.window.map(|w| (w[0], w[1])).unwrap_or((0.2, 1.0)),
            spectral_points: c.spectral_points.unwrap_or(rwa_core::adiabatic::DEFAULT_M),
            carrier_energy: c.carrier_energy.unwrap_or(1.0),
            detuning: c.detuning.unwrap_or(0.2),
            detuned_max_fidelity: c.detuned_max_fidelity.unwrap_or(0.5),
            tolerance_factor: c.tolerance_factor.unwrap_or(5.0),
            identity_tolerance: c.identity_tolerance.unwrap_or(1e-12),
            pairs: c.pairs.unwrap_or(8),
            seed: c.seed.unwrap_or(20_160_425),
            dim: c.dim.unwrap_or(3),
            harmonics: c.harmonics.unwrap_or(3),
            b_zero: c.b_zero.unwrap_or(false),
            threshold: c.threshold.unwrap_or(1e-6),
            min_slope: c.min_slope,
            slope_window: c.slope_window.unwrap_or(0.3),
        };
        if !(check.window.0 > 0.0 && check.window.0 <= check.window.1) {
            return Err(cfg_err(format!(
                "check.window: [{}, {}] must satisfy 0 < a <= b",
                check.window.0, check.window.1
            )));
        }
        if !(check.gap_floor > 0.0) {
            return Err(cfg_err("check.gap_floor must be positive"));
        }
        if check.spectral_points < rwa_core::adiabatic::MIN_M {
            return Err(cfg_err(format!(
                "check.spectral_points must be at least {}",
                rwa_core::adiabatic::MIN_M
            )));
        }
        if check.pairs == 0 {
            return Err(cfg_err("check.pairs must be positive"));
        }

        let system = file.system.as_ref().map(resolve_system).transpose()?;
        let perturbation = file.perturbation.as_ref().map(|s| {
            s.entries
                .iter()
                .map(|e| PerturbationEntry {
                    j: e.j,
                    k: e.k,
                    beta: e.beta,
                    v: e.v.to_series(),
                    h: e.h.to_series(),
                })
                .collect::<Vec<_>>()
        });
        if system.is_some() && perturbation.is_none() && experiment != Experiment::AdiabaticOrder {
            return Err(cfg_err("[system] requires a matching [perturbation]"));
        }

        let prefix = PathBuf::from(
            file.output
                .prefix
                .clone()
                .unwrap_or_else(|| format!("out/{}", experiment.name())),
        );
        let cfg = Config {
            experiment,
            profile,
            epsilon,
            alpha,
            energy,
            delta,
            policy,
            stride: pol.stride,
            check,
            system,
            perturbation,
            prefix,
            threads: file.run.threads.unwrap_or(0),
            warnings,
        };
        cfg.validate_for_experiment()?;
        Ok(cfg)
    }

    /// Loads `path`, applies `overrides`, resolves.
    pub fn load(experiment: Experiment, path: &Path, overrides: &Overrides) -> Result<Self, RunError> {
        let mut file = ConfigFile::load(path)?;
        overrides.apply(&mut file);
        Self::resolve(experiment, &file)
    }

    fn scalar(&self, name: &str, grid: &[f64]) -> Result<f64, RunError> {
        match grid {
            [x] => Ok(*x),
            _ => Err(cfg_err(format!(
                "{}: {name} must be a single value, got {} points",
                self.experiment,
                grid.len()
            ))),
        }
    }

    pub fn epsilon0(&self) -> f64 {
        self.epsilon[0]
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha[0]
    }

    pub fn energy0(&self) -> f64 {
        self.energy[0]
    }

    pub fn delta0(&self) -> f64 {
        self.delta[0]
    }

    fn validate_for_experiment(&self) -> Result<(), RunError> {
        use Experiment::*;
        let e = self.experiment;
        if self.system.is_some() && !matches!(e, Scaling | KillOscillations | AdiabaticOrder) {
            return Err(cfg_err(format!("{e}: [system] is not used by this experiment")));
        }
        if self.perturbation.is_some() && !matches!(e, Scaling | KillOscillations | LemmaFast) {
            return Err(cfg_err(format!("{e}: [perturbation] is not used by this experiment")));
        }
        match e {
            Transfer | FrameCheck => {
                self.scalar("epsilon", &self.epsilon)?;
                self.scalar("alpha", &self.alpha)?;
                self.scalar("E", &self.energy)?;
                self.scalar("delta", &self.delta)?;
            }
            RwaGap => {
                self.scalar("alpha", &self.alpha)?;
                self.scalar("E", &self.energy)?;
                self.scalar("delta", &self.delta)?;
            }
            Scaling | KillOscillations => {
                self.scalar("E", &self.energy)?;
                self.scalar("delta", &self.delta)?;
                if e == KillOscillations {
                    self.scalar("alpha", &self.alpha)?;
                }
            }
            DeltaSweep => {
                self.scalar("epsilon", &self.epsilon)?;
                self.scalar("alpha", &self.alpha)?;
                self.scalar("E", &self.energy)?;
                if let Some(d) = self.delta.iter().find(|&&d| !(d > 0.0 && d <= 1.0)) {
                    return Err(cfg_err(format!(
                        "delta-sweep: delta = {d} outside (0, 1]; the gap 2*delta*max|v| closes at delta = 0"
                    )));
                }
            }
            ESweep => {
                self.scalar("epsilon", &self.epsilon)?;
                self.scalar("alpha", &self.alpha)?;
                self.scalar("delta", &self.delta)?;
                if let Some(x) = self.energy.iter().find(|&&x| !(0.5..=1.5).contains(&x)) {
                    return Err(cfg_err(format!("e-sweep: E = {x} outside [0.5, 1.5]")));
                }
                if !self
                    .energy
                    .iter()
                    .any(|&x| (x - self.check.carrier_energy).abs() <= 1e-12)
                {
                    return Err(cfg_err(format!(
                        "e-sweep: the E grid must contain the carrier energy {}",
                        self.check.carrier_energy
                    )));
                }
            }
            LemmaFast => {
                self.scalar("alpha", &self.alpha)?;
                self.scalar("E", &self.energy)?;
            }
            VariationCheck => {
                if !(2..=rwa_core::smallmat::MAX_DIM).contains(&self.check.dim) {
                    return Err(cfg_err(format!("variation-check: dim {} out of range", self.check.dim)));
                }
            }
            AdiabaticOrder => {
                self.scalar("delta", &self.delta)?;
            }
        }
        Ok(())
    }

    /// Flat `key = value` listing of every resolved setting, in a fixed order.
    pub fn provenance(&self) -> Vec<(String, String)> {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",");
        let series = |s: &TrigSeries| {
            format!(
                "const:{:e} lin:{:e} sin:[{}] cos:[{}]",
                s.constant,
                s.linear,
                list(&s.sin),
                list(&s.cos)
            )
        };
        let c = &self.check;
        let mut out = vec![
            ("config.experiment".to_string(), self.experiment.to_string()),
            ("config.profile".to_string(), self.profile.name().to_string()),
            ("config.profile.v".to_string(), series(self.profile.v_series())),
            ("config.profile.phi".to_string(), series(self.profile.phi_series())),
            ("config.epsilon".to_string(), list(&self.epsilon)),
            ("config.alpha".to_string(), list(&self.alpha)),
            ("config.E".to_string(), list(&self.energy)),
            ("config.delta".to_string(), list(&self.delta)),
            ("config.policy.n_osc".to_string(), self.policy.n_osc.to_string()),
            ("config.policy.h_max".to_string(), format!("{:e}", self.policy.h_max)),
            (
                "config.policy.richardson".to_string(),
                self.policy.richardson_check.to_string(),
            ),
            ("config.policy.max_steps".to_string(), self.policy.max_steps.to_string()),
            (
                "config.policy.stride".to_string(),
                self.stride.map_or_else(|| "auto".to_string(), |s| s.to_string()),
            ),
            ("config.check.min_fidelity".to_string(), c.min_fidelity.to_string()),
            ("config.check.max_jump".to_string(), c.max_jump.to_string()),
            (
                "config.check.norm_tolerance".to_string(),
                format!("{:e}", c.norm_tolerance),
            ),
            ("config.check.gap_floor".to_string(), c.gap_floor.to_string()),
            (
                "config.check.window".to_string(),
                format!("{},{}", c.window.0, c.window.1),
            ),
            (
                "config.check.spectral_points".to_string(),
                c.spectral_points.to_string(),
            ),
            ("config.check.carrier_energy".to_string(), c.carrier_energy.to_string()),
            ("config.check.detuning".to_string(), c.detuning.to_string()),
            (
                "config.check.detuned_max_fidelity".to_string(),
                c.detuned_max_fidelity.to_string(),
            ),
            (
                "config.check.tolerance_factor".to_string(),
                c.tolerance_factor.to_string(),
            ),
            (
                "config.check.identity_tolerance".to_string(),
                format!("{:e}", c.identity_tolerance),
            ),
            ("config.check.pairs".to_string(), c.pairs.to_string()),
            ("config.check.seed".to_string(), c.seed.to_string()),
            ("config.check.dim".to_string(), c.dim.to_string()),
            ("config.check.harmonics".to_string(), c.harmonics.to_string()),
            ("config.check.b_zero".to_string(), c.b_zero.to_string()),
            ("config.check.threshold".to_string(), format!("{:e}", c.threshold)),
            (
                "config.check.min_slope".to_string(),
                c.min_slope.map_or_else(|| "default".to_string(), |m| m.to_string()),
            ),
            ("config.check.slope_window".to_string(), c.slope_window.to_string()),
            (
                "config.system".to_string(),
                self.system.as_ref().map_or("none".into(), |s| {
                    use rwa_core::schrodinger::Generator;
                    s.describe()
                }),
            ),
            (
                "config.perturbation.entries".to_string(),
                self.perturbation.as_ref().map_or(0, Vec::len).to_string(),
            ),
            ("config.output.prefix".to_string(), self.prefix.display().to_string()),
            ("config.run.threads".to_string(), self.threads.to_string()),
        ];
        for (i, w) in self.warnings.iter().enumerate() {
            out.push((format!("warning.{i}"), w.clone()));
        }
        out
    }
}
