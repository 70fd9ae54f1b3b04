//! Command implementations behind the `twophoton` binary.

pub mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use twophoton::coincidence::{expected_accidentals, g2_tau};
use twophoton::events::{sample_correlated_thermal, sample_poisson_events, sample_spdc_pairs};
use twophoton::rng::{derive_seed, stream_rng};
use twophoton::speckle::{discretize_source, mutual_coherence};
use twophoton::{
    build_histogram, count_windowed, estimate_g2_spatial, first_order_pattern, fit_bunching_peak, fit_pattern,
    g2_finite_thermal, resolution_report, run_scan, DetectorId, DetectorPair, Engine, FitResult, ResolutionReport,
    ScanConfig, SourceKind, SourceModel,
};

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Run(twophoton::Error),
}

impl From<twophoton::Error> for CliError {
    fn from(e: twophoton::Error) -> Self {
        use twophoton::Error as E;
        match e {
            E::InvalidGeometry(_) | E::InvalidConfig(_) | E::EngineSourceMismatch { .. } => CliError::Config(e.to_string()),
            other => CliError::Run(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io { .. } | CliError::Run(_) => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(io_err(&path))?;
    Ok((path, BufWriter::new(file)))
}

fn write_with<F>(dir: &Path, name: &str, body: F) -> Result<PathBuf, CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let (path, mut w) = create(dir, name)?;
    body(&mut w).and_then(|_| w.flush()).map_err(io_err(&path))?;
    Ok(path)
}

fn header(config: &RunConfig, command: &str) -> Vec<String> {
    let mut lines = vec![format!("command={command} seed={}", config.seed)];
    lines.extend(config.echo());
    lines
}

fn write_json<T: Serialize>(dir: &Path, name: &str, config: &RunConfig, command: &str, value: &T) -> Result<PathBuf, CliError> {
    let json = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    write_with(dir, name, |w| {
        for line in header(config, command) {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "{json}")
    })
}

/// Writes the thermal, SPDC and first-order patterns over the configured grid.
pub fn cmd_analytic(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let dir = &config.output_dir;
    let echo = header(config, "analytic");
    let mut scan = config.scan_config();
    scan.engine = Engine::Analytic;
    let mut written = Vec::new();
    for (name, source) in [
        ("thermal.csv", config_with_kind(config, SourceKind::Thermal)?),
        ("spdc.csv", config_with_kind(config, SourceKind::Spdc)?),
    ] {
        let result = run_scan(&config.geometry, &source, &scan)?;
        written.push(write_with(dir, name, |w| result.write_csv(w, &echo))?);
    }
    let positions = config.positions();
    written.push(write_with(dir, "first_order.csv", |w| {
        for line in &echo {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "x,intensity")?;
        for &x in &positions {
            writeln!(w, "{x},{}", first_order_pattern(&config.geometry, x))?;
        }
        Ok(())
    })?);
    Ok(written)
}

fn config_with_kind(config: &RunConfig, kind: SourceKind) -> Result<SourceModel, CliError> {
    let mut c = config.clone();
    c.source.kind = kind;
    c.source_model()
}

fn thermal_only(config: &RunConfig, command: &str) -> Result<(), CliError> {
    match config.source.kind {
        SourceKind::Thermal => Ok(()),
        SourceKind::Spdc => Err(CliError::Config(format!("`{command}` needs a thermal source"))),
    }
}

/// Speckle Monte Carlo estimates of the normalized intensity correlation at
/// every scan position, next to the closed form.
pub fn cmd_speckle(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    thermal_only(config, "speckle")?;
    let scan = config.scan_config();
    let n = config.speckle.realizations;
    let mut rows = Vec::new();
    for (i, &p) in scan.positions.iter().enumerate() {
        let pair = scan.pair_at(SourceKind::Thermal, p);
        let thermal = twophoton::ThermalSourceConfig {
            seed: derive_seed(config.seed, i as u64),
            ..config.thermal_config()
        };
        let est = estimate_g2_spatial(&config.geometry, &thermal, &pair, n)?;
        rows.push((pair, est, g2_finite_thermal(&config.geometry, &pair)));
    }
    let echo = header(config, "speckle");
    let path = write_with(&config.output_dir, "speckle.csv", |w| {
        for line in &echo {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "x1,x2,value,std_error,closed_form,n_realizations")?;
        for (pair, est, exact) in &rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                pair.x1, pair.x2, est.value, est.std_error, exact, est.n_realizations
            )?;
        }
        Ok(())
    })?;
    Ok(vec![path])
}

#[derive(Debug, Clone, Serialize)]
pub struct HbtSummary {
    pub source: &'static str,
    pub duration_s: f64,
    pub singles1_per_s: f64,
    pub singles2_per_s: f64,
    /// Fitted `1 + A/B`; absent when no bunching peak was fitted.
    pub g2_zero: Option<f64>,
    pub g2_zero_channel: f64,
    /// Central-window coincidences over the independent-stream expectation.
    pub g2_window: f64,
    pub fit_baseline: Option<f64>,
    pub fit_decay_ns: Option<f64>,
    pub fit_converged: Option<bool>,
    pub configured_coherence_time_ns: f64,
    pub coincidences: u64,
    pub accidentals: u64,
    pub net: f64,
    pub net_error: f64,
    pub expected_accidentals: f64,
    pub accidentals_z: f64,
    pub accidentals_per_channel_expected: f64,
}

/// Bunching measurement: event streams, delay histogram, windowed counts and
/// a bunching-peak fit.
pub fn cmd_hbt(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let duration_ns = config.hbt.duration_s * 1e9;
    let d = [&config.detectors.d1, &config.detectors.d2];
    let pair = DetectorPair::new(config.hbt.x1, config.hbt.x2);
    let mut rng = stream_rng(config.seed, 0);
    let source = config.source_model()?;
    let (label, (s1, s2)) = if config.hbt.laser {
        let s1 = sample_poisson_events(DetectorId::D1, d[0], duration_ns, &mut rng)?;
        let s2 = sample_poisson_events(DetectorId::D2, d[1], duration_ns, &mut rng)?;
        ("laser", (s1, s2))
    } else {
        match &source {
            SourceModel::Thermal { config: thermal, .. } => {
                let positions = discretize_source(&config.geometry, thermal);
                let mu = mutual_coherence(&config.geometry, &positions, &pair);
                (
                    "thermal",
                    sample_correlated_thermal(mu, thermal.coherence_time_ns(), d, duration_ns, &mut rng)?,
                )
            }
            SourceModel::Spdc { model, pair_rate } => (
                "spdc",
                sample_spdc_pairs(&config.geometry, model, *pair_rate, duration_ns, &pair, &mut rng)?,
            ),
        }
    };

    let histogram = build_histogram(&s1, &s2, &config.histogram)?;
    let curve = g2_tau(&histogram, &s1, &s2)?;
    let fit = match label {
        "thermal" => Some(fit_bunching_peak(&curve)?),
        _ => None,
    };
    let counts = count_windowed(&s1, &s2, &config.histogram);
    let expected = expected_accidentals(&s1, &s2, config.histogram.window_ns);
    let per_channel = expected * config.histogram.channel_width_ns / config.histogram.window_ns;
    let summary = HbtSummary {
        source: label,
        duration_s: config.hbt.duration_s,
        singles1_per_s: s1.rate_per_s(),
        singles2_per_s: s2.rate_per_s(),
        g2_zero: fit.map(|f| f.g2_zero()),
        g2_zero_channel: histogram.count_at(0) as f64 / per_channel,
        g2_window: counts.coincidences as f64 / expected,
        fit_baseline: fit.map(|f| f.baseline),
        fit_decay_ns: fit.map(|f| f.decay_ns),
        fit_converged: fit.map(|f| f.converged),
        configured_coherence_time_ns: config.source.coherence_time * 1e9,
        coincidences: counts.coincidences,
        accidentals: counts.accidentals,
        net: counts.net,
        net_error: counts.net_error(),
        expected_accidentals: expected,
        accidentals_z: (counts.accidentals as f64 - expected) / expected.sqrt(),
        accidentals_per_channel_expected: per_channel,
    };

    let echo = header(config, "hbt");
    let dir = &config.output_dir;
    let hist_path = write_with(dir, "hbt_histogram.csv", |w| histogram.write_csv(w, &config.histogram, &echo))?;
    let summary_path = write_json(dir, "hbt_summary.json", config, "hbt", &summary)?;
    Ok(vec![hist_path, summary_path])
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub source: &'static str,
    pub engine: &'static str,
    pub points: usize,
    /// Visibility of the measured samples.
    pub visibility_data: Option<f64>,
    /// Visibility of the fitted model.
    pub visibility_fit: Option<f64>,
    pub resolution: ResolutionReport,
}

/// Runs the scan, fits the pattern, and writes the data, fit and report.
pub fn cmd_scan(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let source = config.source_model()?;
    let scan: ScanConfig = config.scan_config();
    let kind = source.kind();
    let result = run_scan(&config.geometry, &source, &scan)?;
    let fit: FitResult = fit_pattern(&result, kind, &config.geometry)?;
    let span = result
        .positions
        .iter()
        .map(|p| kind.pattern_variable(p).abs())
        .fold(0.0, f64::max);
    let report = ScanReport {
        source: kind.name(),
        engine: scan.engine.name(),
        points: result.len(),
        visibility_data: result.visibility().ok(),
        visibility_fit: fit.model_visibility(span, 4001).ok(),
        resolution: resolution_report(&fit, &config.geometry),
    };

    let echo = header(config, "scan");
    let dir = &config.output_dir;
    Ok(vec![
        write_with(dir, "scan.csv", |w| result.write_csv(w, &echo))?,
        write_json(dir, "fit.json", config, "scan", &fit)?,
        write_json(dir, "report.json", config, "scan", &report)?,
    ])
}
