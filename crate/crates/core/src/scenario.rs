//! Scenario files: a TOML description of one run, validated as a whole so
//! that every violation is reported with its field path.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hadamard::LogTimeWindow;
use crate::spectral::{modal_bank, Actuator, ActuatorSet, BasisKind, Distribution, Rect, Region, SpectralBasis};

pub const MAX_CUTOFF: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Simulate,
    Analyze,
    Synthesize,
    ReproduceExample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Json,
    Csv,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn json(self) -> bool {
        matches!(self, Self::Json | Self::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, Self::Csv | Self::Both)
    }
}

/// A box list: each box is one [lo, hi] pair per axis.
pub type Boxes = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorEntry {
    pub support: Boxes,
    #[serde(default = "unit_distribution")]
    pub distribution: Distribution,
}

fn unit_distribution() -> Distribution {
    Distribution::Constant { value: 1.0 }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ActuatorSpec {
    /// One constant zone actuator supported on ω.
    #[default]
    RegionZone,
    List {
        list: Vec<ActuatorEntry>,
    },
    /// One whole-domain actuator per mode.
    ModalBank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedField {
    /// F = exp(-|x - c|² / 0.1) with c the centre of ω.
    Bump,
    /// F = Π sin(π(x_d - lo_d)/len_d) over ω's bounding box.
    ProductSine,
}

/// Target on ω, expressed through basis coefficients c: f = p_ω∇Σ c_k φ_k.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetSpec {
    #[default]
    Zero,
    Coefficients {
        values: Vec<f64>,
    },
    /// Uniform(-1, 1) coefficients.
    Random {
        seed: u64,
    },
    /// p_ω∇F for an analytic F, fitted in the truncated gradient span.
    Field {
        name: NamedField,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ControlSpec {
    #[default]
    Zero,
    /// One constant per channel.
    Constant {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    /// Output times in (a, b]; empty means b only.
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default = "default_per_axis")]
    pub per_axis: usize,
}

impl Default for SimulateSpec {
    fn default() -> Self {
        Self { times: Vec::new(), per_axis: default_per_axis() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default = "default_pd")]
    pub positive_definite: f64,
    #[serde(default = "default_pd")]
    pub rank: f64,
    #[serde(default = "default_trials")]
    pub minimality_trials: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { positive_definite: default_pd(), rank: default_pd(), minimality_trials: default_trials(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: default_dir(), format: OutputFormat::default() }
    }
}

fn default_cutoff() -> usize {
    6
}
fn default_per_axis() -> usize {
    21
}
fn default_pd() -> f64 {
    1e-10
}
fn default_trials() -> usize {
    50
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    #[serde(default)]
    pub basis: BasisKind,
    pub domain: Vec<[f64; 2]>,
    pub region: Boxes,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<f64>>,
    pub window: LogTimeWindow,
    #[serde(default)]
    pub actuators: ActuatorSpec,
    #[serde(default)]
    pub target: TargetSpec,
    #[serde(default)]
    pub control: ControlSpec,
    #[serde(default)]
    pub simulate: SimulateSpec,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub output: OutputSpec,
}

const REQUIRED: [&str; 5] = ["task", "alpha", "domain", "region", "window"];

/// Reads and validates a scenario file.
pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    Scenario::from_toml_str(&text)
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Toml(e.to_string()))?;
        let mut missing: Vec<String> = REQUIRED
            .iter()
            .filter(|k| !table.contains_key(**k))
            .map(|k| format!("{k}: missing field"))
            .collect();
        if let Some(w) = table.get("window").and_then(|w| w.as_table()) {
            missing.extend(["a", "b"].iter().filter(|k| !w.contains_key(**k)).map(|k| format!("window.{k}: missing field")));
        }
        if !missing.is_empty() {
            return Err(Error::Scenario(missing));
        }
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Toml(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Toml(e.to_string()))
    }

    /// The square worked example: Ω = [-1,1]², ω = [0,1]², α = 1/2 with an
    /// energy cutoff, [a, b] = [2, 4].
    pub fn worked_example() -> Self {
        Self {
            task: Task::ReproduceExample,
            name: Some("square worked example".into()),
            alpha: 0.5,
            epsilon: Some(1e-3),
            cutoff: 8,
            basis: BasisKind::PaperBasis,
            domain: vec![[-1.0, 1.0], [-1.0, 1.0]],
            region: vec![vec![[0.0, 1.0], [0.0, 1.0]]],
            initial_state: None,
            window: LogTimeWindow { a: 2.0, b: 4.0 },
            actuators: ActuatorSpec::RegionZone,
            target: TargetSpec::Zero,
            control: ControlSpec::Zero,
            simulate: SimulateSpec::default(),
            thresholds: Thresholds::default(),
            output: OutputSpec::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.len()
    }

    pub fn mode_count(&self) -> usize {
        self.cutoff.pow(self.dim().max(1) as u32)
    }

    pub fn channel_count(&self) -> usize {
        match &self.actuators {
            ActuatorSpec::RegionZone => 1,
            ActuatorSpec::List { list } => list.len(),
            ActuatorSpec::ModalBank => self.mode_count(),
        }
    }

    pub fn domain_rect(&self) -> Result<Rect> {
        Rect::new(self.domain.clone())
    }

    pub fn region(&self) -> Region {
        to_region(&self.region)
    }

    pub fn actuator_set(&self, basis: &SpectralBasis) -> ActuatorSet {
        match &self.actuators {
            ActuatorSpec::RegionZone => ActuatorSet::new(vec![Actuator::zone(self.region())]),
            ActuatorSpec::List { list } => ActuatorSet::new(
                list.iter().map(|a| Actuator { support: to_region(&a.support), distribution: a.distribution.clone() }).collect(),
            ),
            ActuatorSpec::ModalBank => modal_bank(basis),
        }
    }

    /// Checks the whole scenario and reports every violation.
    pub fn validate(&self) -> Result<()> {
        let mut v: Vec<String> = Vec::new();
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            v.push(format!("alpha: must lie in (0, 1], got {}", self.alpha));
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                v.push(format!("epsilon: must be positive, got {eps}"));
            } else if self.window.a > 0.0 && self.window.b > self.window.a && eps >= self.window.log_length() {
                v.push(format!("epsilon: must be below ln(b/a) = {}", self.window.log_length()));
            }
        }
        if !(self.window.a > 0.0 && self.window.a.is_finite()) {
            v.push(format!("window.a: must be positive, got {}", self.window.a));
        }
        if !(self.window.b > self.window.a && self.window.b.is_finite()) {
            v.push(format!("window.b: must exceed a, got a={} b={}", self.window.a, self.window.b));
        }
        if self.cutoff == 0 || self.cutoff > MAX_CUTOFF {
            v.push(format!("cutoff: must lie in 1..={MAX_CUTOFF}, got {}", self.cutoff));
        }
        let domain = match Rect::new(self.domain.clone()) {
            Ok(d) => Some(d),
            Err(e) => {
                v.push(format!("domain: {e}"));
                None
            }
        };
        if self.basis == BasisKind::PaperBasis && !self.domain.iter().all(|b| b[0] == -1.0 && b[1] == 1.0) {
            v.push("basis: paper-basis requires domain [-1, 1] on every axis".into());
        }
        if self.region.is_empty() {
            v.push("region: needs at least one box".into());
        }
        if let Some(domain) = &domain {
            check_boxes(&self.region, domain, "region", &mut v);
            if let ActuatorSpec::List { list } = &self.actuators {
                for (i, a) in list.iter().enumerate() {
                    check_boxes(&a.support, domain, &format!("actuators.list[{i}].support"), &mut v);
                    if let Err(msg) = a.distribution.validate(domain.dim()) {
                        v.push(format!("actuators.list[{i}].distribution: {msg}"));
                    }
                }
            }
        }
        let n = self.mode_count();
        match &self.target {
            TargetSpec::Coefficients { values } if values.len() != n => {
                v.push(format!("target.values: {} coefficients for {n} modes", values.len()));
            }
            TargetSpec::Coefficients { values } if values.iter().any(|x| !x.is_finite()) => {
                v.push("target.values: must be finite".into());
            }
            _ => {}
        }
        if let Some(y0) = &self.initial_state {
            if y0.len() != n {
                v.push(format!("initial_state: {} coefficients for {n} modes", y0.len()));
            }
            if y0.iter().any(|x| !x.is_finite()) {
                v.push("initial_state: must be finite".into());
            }
        }
        if let ControlSpec::Constant { values } = &self.control {
            if values.len() != self.channel_count() {
                v.push(format!("control.values: {} values for {} channels", values.len(), self.channel_count()));
            }
        }
        for (i, &t) in self.simulate.times.iter().enumerate() {
            if !(t > self.window.a && t <= self.window.b) {
                v.push(format!("simulate.times[{i}]: {t} outside (a, b]"));
            }
        }
        for (name, x) in [("thresholds.positive_definite", self.thresholds.positive_definite), ("thresholds.rank", self.thresholds.rank)] {
            if !(x > 0.0 && x < 1.0) {
                v.push(format!("{name}: must lie in (0, 1), got {x}"));
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Scenario(v))
        }
    }
}

fn to_region(boxes: &Boxes) -> Region {
    Region::new(boxes.iter().map(|b| Rect { bounds: b.clone() }).collect())
}

fn check_boxes(boxes: &Boxes, domain: &Rect, path: &str, v: &mut Vec<String>) {
    if let Err(problems) = to_region(boxes).validate_in(domain) {
        for p in problems {
            // "box 3: ..." -> "region[3]: ..."
            match p.strip_prefix("box ").and_then(|rest| rest.split_once(':')) {
                Some((i, msg)) => v.push(format!("{path}[{i}]:{msg}")),
                None => v.push(format!("{path}: {p}")),
            }
        }
    }
}
