use bergman_lab::lattice::gamma_bounds;
use bergman_lab::quadrature::PanelScheme;
use bergman_lab::weights::{WeightConfig, WeightSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const EXPERIMENTS: [&str; 14] = [
    "weights-check",
    "interval-mass",
    "forelli-rudin",
    "hilbert-norm",
    "schur-check",
    "threshold-map",
    "bergman-project",
    "adjoint-witness",
    "lattice-audit",
    "sampling-check",
    "atomic-synthesize",
    "reconstruct",
    "derivative-check",
    "script-i",
];

/// One experiment per file, flat keys. Optional keys are resolved to
/// experiment-specific defaults by [`ExperimentConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default = "two")]
    pub q: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub k: f64,
    #[serde(default)]
    pub eps1: u8,
    #[serde(default)]
    pub eps2: u8,
    #[serde(default = "power")]
    pub family: String,
    #[serde(default = "one")]
    pub s: f64,
    #[serde(default = "one")]
    pub c: f64,
    /// Forelli–Rudin gap
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "half")]
    pub delta: f64,
    pub gamma: Option<f64>,
    pub lmax: Option<i64>,
    pub jmax: Option<i64>,
    #[serde(default = "samples")]
    pub samples: usize,
    #[serde(default = "atoms")]
    pub atoms: usize,
    /// builtin test-function index, or "all"
    #[serde(default = "all")]
    pub function: String,
    #[serde(default = "points")]
    pub points: Vec<[f64; 2]>,
    pub grid_lo: Option<f64>,
    pub grid_hi: Option<f64>,
    pub grid_step: Option<f64>,
    pub j_lo: Option<i32>,
    pub j_hi: Option<i32>,
    pub nodes: Option<usize>,
    pub panels_per_octave: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn half() -> f64 {
    0.5
}
fn power() -> String {
    "power".into()
}
fn all() -> String {
    "all".into()
}
fn samples() -> usize {
    10_000
}
fn atoms() -> usize {
    50
}
fn points() -> Vec<[f64; 2]> {
    vec![[0.0, 1.0], [1.0, 2.0], [-2.0, 0.5]]
}

fn bad(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Config { field: field.into(), reason: reason.into() }
}

impl ExperimentConfig {
    pub fn new(experiment: &str) -> Self {
        toml::from_str(&format!("experiment = {experiment:?}")).expect("defaults deserialize")
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.message().to_string()))
    }

    /// Fills every optional key with the experiment's default and validates.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut c = self.clone();
        let name = c.experiment.as_str();
        if !EXPERIMENTS.contains(&name) {
            return Err(bad("experiment", format!("unknown experiment `{name}`")));
        }
        let (lo, hi, step) = match name {
            "weights-check" => (-20.0, 20.0, 1.0),
            "interval-mass" => (-16.0, 16.0, 1.0),
            "forelli-rudin" | "schur-check" => (-8.0, 8.0, 1.0),
            "threshold-map" => (-0.9, 1.0, 0.1),
            _ => (0.0, 0.0, 1.0),
        };
        c.grid_lo.get_or_insert(lo);
        c.grid_hi.get_or_insert(hi);
        c.grid_step.get_or_insert(step);
        let scheme = match name {
            "hilbert-norm" => bergman_lab::hilbert::default_norm_scheme(),
            _ => PanelScheme::default(),
        };
        c.j_lo.get_or_insert(scheme.j_lo);
        c.j_hi.get_or_insert(scheme.j_hi);
        c.nodes.get_or_insert(scheme.nodes_per_panel);
        c.panels_per_octave.get_or_insert(scheme.panels_per_octave);

        let gb = gamma_bounds(c.delta).map_err(|e| bad("delta", e.to_string()))?;
        let gamma = *c.gamma.get_or_insert(gb.mid);
        let (lmax, jmax) = match name {
            "lattice-audit" => (200, 40),
            // footprint out to |x| ~ 2^19 rows and 2^{±14} in y
            "sampling-check" | "script-i" => {
                ((2f64.powi(19) * 8.0 / (c.delta * c.delta)).ceil() as i64, (14.0 / gamma).ceil() as i64)
            }
            // covers the default reconstruction footprint
            _ => ((8192.0 / (c.delta * c.delta)).ceil() as i64, (8.0 / gamma).ceil() as i64),
        };
        c.lmax.get_or_insert(lmax);
        c.jmax.get_or_insert(jmax);

        if !(c.grid_step.unwrap() > 0.0) {
            return Err(bad("grid_step", "must be positive"));
        }
        if c.grid_hi.unwrap() < c.grid_lo.unwrap() {
            return Err(bad("grid_hi", "must not be below grid_lo"));
        }
        if c.function != "all" && c.function.parse::<usize>().map_or(true, |i| i >= 6) {
            return Err(bad("function", "expected \"all\" or an index 0..=5"));
        }
        if c.points.iter().any(|z| !(z[1] > 0.0)) {
            return Err(bad("points", "imaginary parts must be positive"));
        }
        self.scheme_of(&c)?;
        c.spec()?;
        Ok(c)
    }

    fn scheme_of(&self, c: &ExperimentConfig) -> Result<PanelScheme, CliError> {
        let s = PanelScheme {
            j_lo: c.j_lo.unwrap_or(-20),
            j_hi: c.j_hi.unwrap_or(20),
            nodes_per_panel: c.nodes.unwrap_or(16),
            panels_per_octave: c.panels_per_octave.unwrap_or(4),
        };
        s.validate().map_err(|e| bad("j_lo", e.to_string()))?;
        Ok(s)
    }

    pub fn scheme(&self) -> PanelScheme {
        self.scheme_of(self).expect("validated scheme")
    }

    pub fn spec(&self) -> Result<WeightSpec, CliError> {
        WeightConfig { family: self.family.clone(), s: self.s, c: self.c, eps1: self.eps1, eps2: self.eps2, k: self.k }
            .to_spec()
            .map_err(CliError::from)
    }

    /// Grid `lo, lo+step, …, ≤ hi` (rounded to 12 digits against drift).
    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi, step) = (self.grid_lo.unwrap_or(0.0), self.grid_hi.unwrap_or(0.0), self.grid_step.unwrap_or(1.0));
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12).collect()
    }

    /// `key = value` lines in declaration order.
    pub fn echo(&self) -> Vec<String> {
        let table = toml::Table::try_from(self).expect("config serializes");
        let value = serde_json::to_value(self).expect("config serializes");
        let order = value.as_object().expect("object").keys().cloned().collect::<Vec<_>>();
        order.iter().filter_map(|k| table.get(k).map(|v| format!("{k} = {v}"))).collect()
    }

    /// Returns a copy with `field` set from its TOML literal (bare words are
    /// read as strings).
    pub fn with_field(&self, field: &str, literal: &str) -> Result<ExperimentConfig, CliError> {
        let mut table = toml::Table::try_from(self).expect("config serializes");
        let value = toml::from_str::<toml::Table>(&format!("v = {literal}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(literal.to_string()));
        if !table.contains_key(field) && !OPTIONAL.contains(&field) {
            return Err(bad(field, "not a config field"));
        }
        table.insert(field.to_string(), value);
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| bad(field, e.message().to_string()))
    }
}

const OPTIONAL: [&str; 10] =
    ["gamma", "lmax", "jmax", "grid_lo", "grid_hi", "grid_step", "j_lo", "j_hi", "nodes", "panels_per_octave"];
