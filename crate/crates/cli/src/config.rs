//! Scenario configuration, read from a single JSON document.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use qnd_core::{
    build_qnd_variable, make_params, Error, Grid, MeasurementWindow, OutputRecord, ParamOverrides,
    PhysicalParams, QndVariable, RecordFamily, Result, SampledSeries, SigmaChoice, UnitRegime,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    RiccatiCheck,
    Commutator,
    Probability,
    UniformCheck,
    LimitSweep,
    OracleCompare,
    QdContrast,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::RiccatiCheck => "riccati-check",
            Scenario::Commutator => "commutator",
            Scenario::Probability => "probability",
            Scenario::UniformCheck => "uniform-check",
            Scenario::LimitSweep => "limit-sweep",
            Scenario::OracleCompare => "oracle-compare",
            Scenario::QdContrast => "qd-contrast",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub params: ParamsBlock,
    #[serde(default)]
    pub window: WindowBlock,
    #[serde(default)]
    pub sigma: SigmaBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<RecordBlock>,
    #[serde(default)]
    pub sampling: SamplingBlock,
    #[serde(default)]
    pub oracle: OracleBlock,
    #[serde(default)]
    pub riccati: RiccatiBlock,
    /// Resolutions `Δa²` for limit-sweep and qd-contrast.
    #[serde(default)]
    pub resolutions: Vec<f64>,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ParamsBlock {
    #[serde(default)]
    pub regime: UnitRegime,
    #[serde(default)]
    pub overrides: ParamOverrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowBlock {
    #[serde(default)]
    pub tau_start: f64,
    #[serde(default = "one")]
    pub tau_end: f64,
    /// `None` selects the critical value `2mℏ/T`.
    #[serde(default)]
    pub delta_a_sq: Option<f64>,
    #[serde(default = "default_grid")]
    pub n_grid: usize,
    #[serde(default = "default_eps")]
    pub eps_offset: f64,
}

impl Default for WindowBlock {
    fn default() -> Self {
        Self {
            tau_start: 0.0,
            tau_end: 1.0,
            delta_a_sq: None,
            n_grid: default_grid(),
            eps_offset: default_eps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SigmaBlock {
    #[default]
    Cosh,
    Unit,
    /// Samples on a uniform grid over the window.
    Tabulated { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RecordBlock {
    Random(RandomRecords),
    Samples(SampleRecords),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomRecords {
    pub seed: u64,
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "default_count")]
    pub count: usize,
}

/// Each inner list is one record sampled uniformly over the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecords {
    pub samples: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SamplingBlock {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBlock {
    #[serde(default = "default_slices")]
    pub n_slices: usize,
    #[serde(default)]
    pub boundary: [f64; 2],
}

impl Default for OracleBlock {
    fn default() -> Self {
        Self {
            n_slices: default_slices(),
            boundary: [0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiccatiBlock {
    #[serde(default = "default_steps")]
    pub steps: usize,
}

impl Default for RiccatiBlock {
    fn default() -> Self {
        Self {
            steps: default_steps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}
fn default_grid() -> usize {
    801
}
fn default_eps() -> f64 {
    qnd_core::window::DEFAULT_EPS_OFFSET
}
fn default_modes() -> usize {
    3
}
fn default_count() -> usize {
    5
}
fn default_slices() -> usize {
    4096
}
fn default_steps() -> usize {
    10_000
}

/// Everything a scenario needs, validated.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub params: PhysicalParams,
    pub window: MeasurementWindow,
    pub qnd: QndVariable,
    pub records: Vec<OutputRecord>,
    pub seed: Option<u64>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let params = make_params(self.params.regime, &self.params.overrides)?;
        let wb = &self.window;
        let duration = wb.tau_end - wb.tau_start;
        let delta = wb
            .delta_a_sq
            .unwrap_or(params.critical_resolution() / duration);
        let window = MeasurementWindow {
            tau_start: wb.tau_start,
            tau_end: wb.tau_end,
            delta_a_sq: delta,
            n_grid: wb.n_grid,
            eps_offset: wb.eps_offset,
        }
        .validated()?;
        let sigma = match &self.sigma {
            SigmaBlock::Cosh => SigmaChoice::CoshDefault,
            SigmaBlock::Unit => SigmaChoice::UnitConstant,
            SigmaBlock::Tabulated { values } => SigmaChoice::Tabulated(on_window(&window, values)?),
        };
        let qnd = build_qnd_variable(sigma, &window, &params)?;
        let (records, seed) = match &self.record {
            None => (Vec::new(), None),
            Some(RecordBlock::Random(r)) => (
                RecordFamily::new(r.seed, r.modes, r.amplitude)?.generate(r.count, &window),
                Some(r.seed),
            ),
            Some(RecordBlock::Samples(SampleRecords { samples })) => (
                samples
                    .iter()
                    .map(|v| on_window(&window, v).map(OutputRecord::Samples))
                    .collect::<Result<_>>()?,
                None,
            ),
        };
        Ok(Resolved {
            params,
            window,
            qnd,
            records,
            seed: seed.or(self.sampling.seed),
        })
    }
}

fn on_window(window: &MeasurementWindow, values: &[f64]) -> Result<SampledSeries> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("sample lists must be finite".into()));
    }
    SampledSeries::new(Grid::new(window.tau_start, window.tau_end, values.len())?, values.to_vec())
}
