//! Detector scans, pattern fits and the resolution comparison.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coincidence::{count_windowed, HistogramConfig};
use crate::error::{Error, Result};
use crate::events::{sample_correlated_thermal, sample_spdc_pairs, DetectorConfig};
use crate::fit::{gauss_newton, GaussNewtonOptions, Residuals};
use crate::optics::{g2_finite_spdc_phased, g2_finite_thermal, sinc, visibility, DetectorPair, Geometry};
use crate::rng::{derive_seed, map_indexed, stream_rng};
use crate::source::{SourceKind, SourceModel, ThermalSourceConfig};
use crate::speckle::{discretize_source, estimate_g2_spatial, mutual_coherence};

/// How the scan coordinate maps onto the two detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    /// D2 parked at `fixed_x2`, D1 at the scan coordinate.
    FixD2ScanD1,
    /// `x1 = p`, `x2 = −p`.
    Antisymmetric,
    /// The scan coordinate is the pattern variable itself (`x1 − x2` for
    /// thermal light, `x1 + x2` for SPDC), split evenly between detectors.
    DifferenceGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Analytic,
    SpeckleMc,
    EventMc,
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::SpeckleMc => "speckle_mc",
            Engine::EventMc => "event_mc",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub mode: ScanMode,
    pub positions: Vec<f64>,
    pub engine: Engine,
    /// Realizations per point for `speckle_mc`, seconds per point for
    /// `event_mc`; ignored by `analytic`.
    pub budget: f64,
    pub fixed_x2: f64,
    pub detectors: [DetectorConfig; 2],
    pub coincidence: HistogramConfig,
    pub seed: u64,
}

impl ScanConfig {
    pub fn new(mode: ScanMode, positions: Vec<f64>, engine: Engine, budget: f64) -> Self {
        Self {
            mode,
            positions,
            engine,
            budget,
            fixed_x2: 0.0,
            detectors: [DetectorConfig::d1(), DetectorConfig::d2()],
            coincidence: HistogramConfig::default(),
            seed: 0,
        }
    }

    pub fn pair_at(&self, kind: SourceKind, position: f64) -> DetectorPair {
        match self.mode {
            ScanMode::FixD2ScanD1 => DetectorPair::new(position, self.fixed_x2),
            ScanMode::Antisymmetric => DetectorPair::new(position, -position),
            ScanMode::DifferenceGrid => kind.pair_for(position),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.len() < 5 {
            return Err(Error::InvalidConfig(format!(
                "scan needs at least 5 positions, got {}",
                self.positions.len()
            )));
        }
        if self.positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig("non-finite scan position".into()));
        }
        if !(self.budget > 0.0 && self.budget.is_finite()) {
            return Err(Error::InvalidConfig(format!("budget {} must be > 0", self.budget)));
        }
        for d in &self.detectors {
            d.validate()?;
        }
        self.coincidence.validate()
    }
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub kind: SourceKind,
    pub mode: ScanMode,
    pub engine: Engine,
    pub positions: Vec<DetectorPair>,
    /// Analytic: the closed-form pattern. `speckle_mc`: normalized
    /// `⟨I1 I2⟩/(⟨I1⟩⟨I2⟩)`. `event_mc`: thermal coincidences divided by the
    /// shifted-window accidentals; SPDC net coincidences per emitted pair.
    pub coincidence: Vec<f64>,
    pub coincidence_err: Vec<f64>,
    /// Singles rates in counts per second.
    pub singles1: Vec<f64>,
    pub singles2: Vec<f64>,
}

impl ScanResult {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `(u, value)` pairs sorted by the pattern variable.
    pub fn pattern_samples(&self) -> Vec<(f64, f64)> {
        let mut samples: Vec<(f64, f64)> = self
            .positions
            .iter()
            .zip(&self.coincidence)
            .map(|(p, &v)| (self.kind.pattern_variable(p), v))
            .collect();
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        samples
    }

    /// Visibility of the measured central fringe.
    pub fn visibility(&self) -> Result<f64> {
        visibility(&self.pattern_samples())
    }

    /// CSV with `#` metadata lines, then
    /// `x1,x2,coincidence,coincidence_err,singles1,singles2`.
    pub fn write_csv<W: Write>(&self, mut w: W, extra_header: &[String]) -> std::io::Result<()> {
        writeln!(
            w,
            "# source={} mode={} engine={}",
            self.kind.name(),
            mode_name(self.mode),
            self.engine.name()
        )?;
        for line in extra_header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "x1,x2,coincidence,coincidence_err,singles1,singles2")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                self.positions[i].x1,
                self.positions[i].x2,
                self.coincidence[i],
                self.coincidence_err[i],
                self.singles1[i],
                self.singles2[i]
            )?;
        }
        Ok(())
    }

    /// Reads the CSV written by [`ScanResult::write_csv`]. Source, mode and
    /// engine come from the first metadata line when present.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut result = ScanResult {
            kind: SourceKind::Thermal,
            mode: ScanMode::DifferenceGrid,
            engine: Engine::Analytic,
            positions: vec![],
            coincidence: vec![],
            coincidence_err: vec![],
            singles1: vec![],
            singles2: vec![],
        };
        let mut saw_header = false;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(meta) = trimmed.strip_prefix('#') {
                for token in meta.split_whitespace() {
                    match token.split_once('=') {
                        Some(("source", "thermal")) => result.kind = SourceKind::Thermal,
                        Some(("source", "spdc")) => result.kind = SourceKind::Spdc,
                        Some(("mode", m)) => result.mode = parse_mode(m).unwrap_or(result.mode),
                        Some(("engine", e)) => result.engine = parse_engine(e).unwrap_or(result.engine),
                        _ => {}
                    }
                }
                continue;
            }
            if !saw_header {
                if trimmed != "x1,x2,coincidence,coincidence_err,singles1,singles2" {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("unexpected header `{trimmed}`"),
                    });
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<f64> = trimmed
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    line: line_no,
                    msg: e.to_string(),
                })?;
            if fields.len() != 6 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected 6 columns, got {}", fields.len()),
                });
            }
            result.positions.push(DetectorPair::new(fields[0], fields[1]));
            result.coincidence.push(fields[2]);
            result.coincidence_err.push(fields[3]);
            result.singles1.push(fields[4]);
            result.singles2.push(fields[5]);
        }
        if !saw_header {
            return Err(Error::Parse {
                line: 0,
                msg: "missing column header".into(),
            });
        }
        Ok(result)
    }
}

pub fn mode_name(mode: ScanMode) -> &'static str {
    match mode {
        ScanMode::FixD2ScanD1 => "fix_d2_scan_d1",
        ScanMode::Antisymmetric => "antisymmetric",
        ScanMode::DifferenceGrid => "difference_grid",
    }
}

fn parse_mode(s: &str) -> Option<ScanMode> {
    match s {
        "fix_d2_scan_d1" => Some(ScanMode::FixD2ScanD1),
        "antisymmetric" => Some(ScanMode::Antisymmetric),
        "difference_grid" => Some(ScanMode::DifferenceGrid),
        _ => None,
    }
}

fn parse_engine(s: &str) -> Option<Engine> {
    match s {
        "analytic" => Some(Engine::Analytic),
        "speckle_mc" => Some(Engine::SpeckleMc),
        "event_mc" => Some(Engine::EventMc),
        _ => None,
    }
}

struct PointOutcome {
    value: f64,
    error: f64,
    singles: [f64; 2],
}

fn run_point(
    geometry: &Geometry,
    source: &SourceModel,
    scan: &ScanConfig,
    pair: &DetectorPair,
    seed: u64,
) -> Result<PointOutcome> {
    let [d1, d2] = &scan.detectors;
    let nominal = [d1.mean_rate * d1.efficiency, d2.mean_rate * d2.efficiency];
    match (scan.engine, source) {
        (Engine::Analytic, SourceModel::Thermal { .. }) => Ok(PointOutcome {
            value: g2_finite_thermal(geometry, pair),
            error: 0.0,
            singles: nominal,
        }),
        (Engine::Analytic, SourceModel::Spdc { model, .. }) => Ok(PointOutcome {
            value: g2_finite_spdc_phased(geometry, pair, model),
            error: 0.0,
            singles: nominal,
        }),
        (Engine::SpeckleMc, SourceModel::Thermal { config, .. }) => {
            let point_config = ThermalSourceConfig {
                seed,
                ..config.clone()
            };
            let est = estimate_g2_spatial(geometry, &point_config, pair, scan.budget as usize)?;
            Ok(PointOutcome {
                value: est.value,
                error: est.std_error,
                singles: [
                    nominal[0] * est.mean_intensity[0] / config.mean_intensity,
                    nominal[1] * est.mean_intensity[1] / config.mean_intensity,
                ],
            })
        }
        (Engine::EventMc, SourceModel::Thermal { config, .. }) => {
            let positions = discretize_source(geometry, config);
            let mu = mutual_coherence(geometry, &positions, pair);
            let duration_ns = scan.budget * 1e9;
            let mut rng = stream_rng(seed, 0);
            let (s1, s2) = sample_correlated_thermal(mu, config.coherence_time_ns(), [d1, d2], duration_ns, &mut rng)?;
            let counts = count_windowed(&s1, &s2, &scan.coincidence);
            let (value, error) = counts.normalized().ok_or_else(|| {
                Error::Precondition(format!(
                    "no accidental coincidences at x1={}, x2={}; raise the per-point budget",
                    pair.x1, pair.x2
                ))
            })?;
            Ok(PointOutcome {
                value,
                error,
                singles: [s1.rate_per_s(), s2.rate_per_s()],
            })
        }
        (Engine::EventMc, SourceModel::Spdc { model, pair_rate }) => {
            let duration_ns = scan.budget * 1e9;
            let mut rng = stream_rng(seed, 0);
            let (s1, s2) = sample_spdc_pairs(geometry, model, *pair_rate, duration_ns, pair, &mut rng)?;
            let counts = count_windowed(&s1, &s2, &scan.coincidence);
            let emitted = pair_rate * scan.budget;
            Ok(PointOutcome {
                value: counts.net / emitted,
                error: counts.net_error() / emitted,
                singles: [s1.rate_per_s(), s2.rate_per_s()],
            })
        }
        (Engine::SpeckleMc, SourceModel::Spdc { .. }) => Err(Error::EngineSourceMismatch {
            engine: "speckle_mc",
            source_kind: "spdc",
        }),
    }
}

/// Evaluates the chosen engine at every scan position. Point `i` draws from
/// a seed derived from `(scan.seed, i)`, so results do not depend on
/// scheduling.
pub fn run_scan(geometry: &Geometry, source: &SourceModel, scan: &ScanConfig) -> Result<ScanResult> {
    geometry.validate()?;
    source.validate()?;
    scan.validate()?;
    if let (Engine::SpeckleMc, SourceModel::Spdc { .. }) = (scan.engine, source) {
        return Err(Error::EngineSourceMismatch {
            engine: "speckle_mc",
            source_kind: "spdc",
        });
    }
    if !geometry.is_far_field() {
        log::warn!("geometry is outside the far-field regime; closed forms are approximate");
    }
    let kind = source.kind();
    let pairs: Vec<DetectorPair> = scan.positions.iter().map(|&p| scan.pair_at(kind, p)).collect();
    let outcomes = map_indexed(pairs.len(), |i| {
        run_point(geometry, source, scan, &pairs[i], derive_seed(scan.seed, i as u64))
    });
    let mut result = ScanResult {
        kind,
        mode: scan.mode,
        engine: scan.engine,
        positions: pairs,
        coincidence: Vec::with_capacity(outcomes.len()),
        coincidence_err: Vec::with_capacity(outcomes.len()),
        singles1: Vec::with_capacity(outcomes.len()),
        singles2: Vec::with_capacity(outcomes.len()),
    };
    for outcome in outcomes {
        let o = outcome?;
        result.coincidence.push(o.value);
        result.coincidence_err.push(o.error);
        result.singles1.push(o.singles[0]);
        result.singles2.push(o.singles[1]);
    }
    Ok(result)
}

/// Fitted `background + amplitude · sinc²(πau/λz) cos²(πdu/λz)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub source: SourceKind,
    pub amplitude: f64,
    pub background: f64,
    pub a_fit: f64,
    pub d_fit: f64,
    /// Fixed during the fit.
    pub wavelength: f64,
    /// Fixed during the fit.
    pub distance: f64,
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn evaluate(&self, u: f64) -> f64 {
        pattern_model(self.amplitude, self.background, self.a_fit, self.d_fit, self.wavelength * self.distance, u)
    }

    /// Visibility of the fitted curve, sampled with `points` nodes over `u ∈ [−span, span]`.
    pub fn model_visibility(&self, span: f64, points: usize) -> Result<f64> {
        let samples: Vec<(f64, f64)> = linspace(-span, span, points).into_iter().map(|u| (u, self.evaluate(u))).collect();
        visibility(&samples)
    }
}

fn pattern_model(amplitude: f64, background: f64, a: f64, d: f64, fringe_scale: f64, u: f64) -> f64 {
    let scale = std::f64::consts::PI * u / fringe_scale;
    let s = sinc(a * scale);
    let c = (d * scale).cos();
    background + amplitude * s * s * c * c
}

struct PatternProblem<'a> {
    u: &'a [f64],
    y: &'a [f64],
    fringe_scale: f64,
}

impl Residuals for PatternProblem<'_> {
    /// Parameters: amplitude, background, a, d.
    fn evaluate(&self, p: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.u.len();
        let mut r = DVector::zeros(n);
        let mut j = DMatrix::zeros(n, 4);
        for i in 0..n {
            let k = std::f64::consts::PI * self.u[i] / self.fringe_scale;
            let alpha = p[2] * k;
            let beta = p[3] * k;
            let s = sinc(alpha);
            let ds = if alpha.abs() < 1e-4 {
                -alpha / 3.0
            } else {
                (alpha * alpha.cos() - alpha.sin()) / (alpha * alpha)
            };
            let (sin_b, cos_b) = beta.sin_cos();
            let env = s * s * cos_b * cos_b;
            r[i] = p[1] + p[0] * env - self.y[i];
            j[(i, 0)] = env;
            j[(i, 1)] = 1.0;
            j[(i, 2)] = p[0] * 2.0 * s * ds * k * cos_b * cos_b;
            j[(i, 3)] = -p[0] * s * s * 2.0 * sin_b * cos_b * k;
        }
        (r, j)
    }
}

/// Linear least squares for amplitude and background given fixed `(a, d)`.
fn linear_amplitudes(u: &[f64], y: &[f64], a: f64, d: f64, fringe_scale: f64) -> Option<(f64, f64, f64)> {
    let f: Vec<f64> = u.iter().map(|&ui| pattern_model(1.0, 0.0, a, d, fringe_scale, ui)).collect();
    let n = u.len() as f64;
    let (sf, sff, sy, sfy) = f.iter().zip(y).fold((0.0, 0.0, 0.0, 0.0), |acc, (&fi, &yi)| {
        (acc.0 + fi, acc.1 + fi * fi, acc.2 + yi, acc.3 + fi * yi)
    });
    let det = sff * n - sf * sf;
    if det.abs() <= 1e-14 * (sff * n).abs().max(f64::MIN_POSITIVE) {
        return None;
    }
    let amp = (sfy * n - sf * sy) / det;
    let bg = (sff * sy - sf * sfy) / det;
    let sse = f.iter().zip(y).map(|(&fi, &yi)| (bg + amp * fi - yi).powi(2)).sum();
    Some((amp, bg, sse))
}

const GRID_CELLS: usize = 31;
const GRID_SPAN: f64 = 0.3;

fn fit_samples(u: &[f64], y: &[f64], kind: SourceKind, init: &Geometry) -> Result<FitResult> {
    if u.len() < 8 {
        return Err(Error::Precondition(format!("fit needs at least 8 points, got {}", u.len())));
    }
    let lo = u.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let period = init.fringe_scale() / init.slit_separation;
    if hi - lo < period {
        return Err(Error::Precondition(format!(
            "scan spans {} m of the pattern variable, less than one fringe ({period} m)",
            hi - lo
        )));
    }
    let fringe_scale = init.fringe_scale();

    let mut best: Option<(f64, [f64; 4])> = None;
    for ia in 0..GRID_CELLS {
        let a = init.slit_width * (1.0 - GRID_SPAN + 2.0 * GRID_SPAN * ia as f64 / (GRID_CELLS - 1) as f64);
        for id in 0..GRID_CELLS {
            let d = init.slit_separation * (1.0 - GRID_SPAN + 2.0 * GRID_SPAN * id as f64 / (GRID_CELLS - 1) as f64);
            if let Some((amp, bg, sse)) = linear_amplitudes(u, y, a, d, fringe_scale) {
                if best.is_none_or(|b| sse < b.0) {
                    best = Some((sse, [amp, bg, a, d]));
                }
            }
        }
    }
    let start = match best {
        Some((_, p)) => p,
        None => {
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            [0.0, mean, init.slit_width, init.slit_separation]
        }
    };

    let y_scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let problem = PatternProblem { u, y, fringe_scale };
    let fit = gauss_newton(
        &problem,
        &start,
        &[y_scale, y_scale, init.slit_width, init.slit_separation],
        &GaussNewtonOptions::default(),
    );
    Ok(FitResult {
        source: kind,
        amplitude: fit.params[0],
        background: fit.params[1],
        a_fit: fit.params[2].abs(),
        d_fit: fit.params[3].abs(),
        wavelength: init.wavelength,
        distance: init.distance,
        residual_rms: (fit.sum_squares / u.len() as f64).sqrt(),
        iterations: fit.iterations,
        converged: fit.converged,
    })
}

/// Least-squares fit of the finite-slit pattern to scan data, with `λ` and
/// `z` held at the values of `init`.
///
/// A 31×31 grid over `a, d ∈ [0.7, 1.3] × init` (amplitude and background
/// solved linearly in each cell) picks the start point for Gauss–Newton
/// refinement of all four parameters.
pub fn fit_pattern(result: &ScanResult, kind: SourceKind, init: &Geometry) -> Result<FitResult> {
    init.validate()?;
    let u: Vec<f64> = result.positions.iter().map(|p| kind.pattern_variable(p)).collect();
    fit_samples(&u, &result.coincidence, kind, init)
}

/// Fringe periods of the fitted two-photon pattern under antisymmetric
/// scanning, compared with the first-order pattern of the reference geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionReport {
    /// `λz/(2 d_fit)`, the two-photon fringe period in the `x1` coordinate.
    pub two_photon_period: f64,
    /// `λz/d`, the first-order period.
    pub first_order_period: f64,
    pub ratio: f64,
    pub converged: bool,
}

/// For SPDC the antisymmetric reading of `x1 + x2` is `x2 = x1`; the
/// algebra is the same.
pub fn resolution_report(fit: &FitResult, first_order_reference: &Geometry) -> ResolutionReport {
    let two_photon_period = fit.wavelength * fit.distance / (2.0 * fit.d_fit);
    let first_order_period = first_order_reference.first_order_period();
    ResolutionReport {
        two_photon_period,
        first_order_period,
        ratio: two_photon_period / first_order_period,
        converged: fit.converged,
    }
}
