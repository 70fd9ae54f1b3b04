use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};
use twophoton::scan::linspace;
use twophoton::{
    DetectorConfig, Engine, Geometry, HistogramConfig, ScanConfig, ScanMode, SourceKind, SourceModel, SpdcModel,
    ThermalMixture, ThermalSourceConfig,
};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub kind: SourceKind,
    pub p_alpha: f64,
    pub p_beta: f64,
    pub p_gamma: f64,
    pub subsources_per_slit: usize,
    /// Seconds.
    pub coherence_time: f64,
    pub mean_intensity: f64,
    pub phase_difference: f64,
    /// Pairs per second.
    pub pair_rate: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        let thermal = ThermalSourceConfig::default();
        let mixture = ThermalMixture::equal();
        Self {
            kind: SourceKind::Thermal,
            p_alpha: mixture.p_alpha,
            p_beta: mixture.p_beta,
            p_gamma: mixture.p_gamma,
            subsources_per_slit: thermal.subsources_per_slit,
            coherence_time: thermal.coherence_time,
            mean_intensity: thermal.mean_intensity,
            phase_difference: 0.0,
            pair_rate: 5000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorsSection {
    pub d1: DetectorConfig,
    pub d2: DetectorConfig,
}

impl Default for DetectorsSection {
    fn default() -> Self {
        Self {
            d1: DetectorConfig::d1(),
            d2: DetectorConfig::d2(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub mode: ScanMode,
    pub engine: Engine,
    /// Metres.
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    /// Explicit positions; replaces `start`/`stop`/`points` when given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<f64>>,
    /// Realizations (`speckle_mc`) or seconds (`event_mc`) per point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    pub fixed_x2: f64,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            mode: ScanMode::DifferenceGrid,
            engine: Engine::Analytic,
            start: -10e-3,
            stop: 10e-3,
            points: 41,
            positions: None,
            budget: None,
            fixed_x2: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeckleSection {
    pub realizations: usize,
}

impl Default for SpeckleSection {
    fn default() -> Self {
        Self { realizations: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HbtSection {
    pub duration_s: f64,
    /// Constant-intensity source instead of the configured one.
    pub laser: bool,
    pub x1: f64,
    pub x2: f64,
}

impl Default for HbtSection {
    fn default() -> Self {
        Self {
            duration_s: 60.0,
            laser: false,
            x1: 0.0,
            x2: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub geometry: Geometry,
    pub source: SourceSection,
    pub detectors: DetectorsSection,
    pub histogram: HistogramConfig,
    pub scan: ScanSection,
    pub speckle: SpeckleSection,
    pub hbt: HbtSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            geometry: Geometry::default(),
            source: SourceSection::default(),
            detectors: DetectorsSection::default(),
            histogram: HistogramConfig::default(),
            scan: ScanSection::default(),
            speckle: SpeckleSection::default(),
            hbt: HbtSection::default(),
        }
    }
}

const EVENT_BUDGET_S: f64 = 5.0;

impl RunConfig {
    /// Defaults, overlaid with the file at `path` (if any), then with the
    /// dotted `section.key=value` overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut table = Table::try_from(RunConfig::default()).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let mut file: Table = text
                .parse()
                .map_err(|e: toml::de::Error| CliError::Config(format!("{}: {e}", path.display())))?;
            canonicalize(&mut file);
            merge(&mut table, file);
        }
        for (key, raw) in overrides {
            let mut patch = Table::new();
            let path: Vec<&str> = key.split('.').map(|k| canonical_key(key, k)).collect();
            insert_path(&mut patch, &path, parse_literal(raw));
            merge(&mut table, patch);
        }
        let config: RunConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.geometry.validate()?;
        self.source_model()?.validate()?;
        self.detectors.d1.validate()?;
        self.detectors.d2.validate()?;
        self.histogram.validate()?;
        if self.scan.positions.is_none() && self.scan.points < 5 {
            return Err(CliError::Config(format!("scan.points = {} (need at least 5)", self.scan.points)));
        }
        if !(self.hbt.duration_s > 0.0 && self.hbt.duration_s.is_finite()) {
            return Err(CliError::Config(format!("hbt.duration_s = {} must be > 0", self.hbt.duration_s)));
        }
        Ok(())
    }

    pub fn thermal_config(&self) -> ThermalSourceConfig {
        ThermalSourceConfig {
            subsources_per_slit: self.source.subsources_per_slit,
            coherence_time: self.source.coherence_time,
            mean_intensity: self.source.mean_intensity,
            seed: self.seed,
        }
    }

    pub fn source_model(&self) -> Result<SourceModel, CliError> {
        Ok(match self.source.kind {
            SourceKind::Thermal => SourceModel::Thermal {
                mixture: ThermalMixture::new(self.source.p_alpha, self.source.p_beta, self.source.p_gamma)?,
                config: self.thermal_config(),
            },
            SourceKind::Spdc => SourceModel::Spdc {
                model: SpdcModel::new(self.source.phase_difference)?,
                pair_rate: self.source.pair_rate,
            },
        })
    }

    pub fn positions(&self) -> Vec<f64> {
        match &self.scan.positions {
            Some(p) => p.clone(),
            None => linspace(self.scan.start, self.scan.stop, self.scan.points),
        }
    }

    pub fn scan_config(&self) -> ScanConfig {
        let budget = self.scan.budget.unwrap_or(match self.scan.engine {
            Engine::Analytic => 1.0,
            Engine::SpeckleMc => self.speckle.realizations as f64,
            Engine::EventMc => EVENT_BUDGET_S,
        });
        let mut scan = ScanConfig::new(self.scan.mode, self.positions(), self.scan.engine, budget);
        scan.fixed_x2 = self.scan.fixed_x2;
        scan.detectors = [self.detectors.d1.clone(), self.detectors.d2.clone()];
        scan.coincidence = self.histogram.clone();
        scan.seed = self.seed;
        scan
    }

    /// The resolved configuration as `# `-prefixed TOML lines.
    pub fn echo(&self) -> Vec<String> {
        let text = toml::to_string(self).unwrap_or_default();
        text.lines().filter(|l| !l.is_empty()).map(str::to_string).collect()
    }
}

fn canonical_key<'a>(full: &str, key: &'a str) -> &'a str {
    if full.starts_with("geometry.") {
        match key {
            "a" => "slit_width",
            "d" => "slit_separation",
            "z" => "distance",
            "lambda" => "wavelength",
            other => other,
        }
    } else {
        key
    }
}

fn canonicalize(file: &mut Table) {
    if let Some(Value::Table(geometry)) = file.get_mut("geometry") {
        for (short, long) in [
            ("a", "slit_width"),
            ("d", "slit_separation"),
            ("z", "distance"),
            ("lambda", "wavelength"),
        ] {
            if let Some(v) = geometry.remove(short) {
                geometry.insert(long.to_string(), v);
            }
        }
    }
}

fn merge(base: &mut Table, patch: Table) {
    for (key, value) in patch {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(p)) => merge(b, p),
            (Some(slot), Value::Integer(i)) if slot.is_float() => *slot = Value::Float(i as f64),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn insert_path(table: &mut Table, path: &[&str], value: Value) {
    match path {
        [] => {}
        [last] => {
            table.insert(last.to_string(), value);
        }
        [head, rest @ ..] => {
            let entry = table
                .entry(head.to_string())
                .or_insert_with(|| Value::Table(Table::new()));
            if let Value::Table(inner) = entry {
                insert_path(inner, rest, value);
            }
        }
    }
}

/// A TOML literal if the text parses as one, otherwise a bare string.
fn parse_literal(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Splits `--section.key value` and `--section.key=value` arguments out of
/// `args`, returning the remaining arguments and the overrides in order.
pub fn extract_overrides(args: Vec<String>) -> (Vec<String>, Vec<(String, String)>) {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let dotted = arg
            .strip_prefix("--")
            .filter(|body| body.split('=').next().is_some_and(|k| k.contains('.')));
        match dotted {
            Some(body) => match body.split_once('=') {
                Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
                None => {
                    let key = body.to_string();
                    match iter.next() {
                        Some(v) => overrides.push((key, v)),
                        None => overrides.push((key, String::new())),
                    }
                }
            },
            None => rest.push(arg),
        }
    }
    (rest, overrides)
}
