//! Timestamped detection events.
//!
//! Thermal detections come from Poisson thinning of an intensity process;
//! SPDC detections are simultaneous pair clicks. All times are in ns.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{g2_finite_spdc_phased, DetectorPair, Geometry, SpdcModel};
use crate::rng::complex_normal;

/// Intensity cap, in units of the mean, for thinning an unbounded
/// exponential intensity. The mean rate lost above it is `e^{-16}`.
pub const THERMAL_INTENSITY_CAP: f64 = 16.0;

/// `rate · τ_c` above which the two-photon regime no longer holds.
pub const LOW_RATE_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectorId {
    D1,
    D2,
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectorId::D1 => "D1",
            DetectorId::D2 => "D2",
        })
    }
}

impl FromStr for DetectorId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "D1" | "d1" | "1" => Ok(DetectorId::D1),
            "D2" | "d2" | "2" => Ok(DetectorId::D2),
            other => Err(format!("unknown detector `{other}`")),
        }
    }
}

/// Single-photon counting module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    /// Mean click rate before efficiency losses, per second.
    pub mean_rate: f64,
    pub dead_time_ns: f64,
    pub efficiency: f64,
}

impl DetectorConfig {
    pub fn with_rate(mean_rate: f64) -> Self {
        Self {
            mean_rate,
            dead_time_ns: 0.0,
            efficiency: 1.0,
        }
    }

    /// D1 singles rate of the reference measurement.
    pub fn d1() -> Self {
        Self::with_rate(45_000.0)
    }

    /// D2 singles rate of the reference measurement.
    pub fn d2() -> Self {
        Self::with_rate(25_000.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_rate > 0.0 && self.mean_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("mean rate {} must be > 0", self.mean_rate)));
        }
        if !(self.dead_time_ns >= 0.0 && self.dead_time_ns.is_finite()) {
            return Err(Error::InvalidConfig(format!("dead time {} must be ≥ 0", self.dead_time_ns)));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::InvalidConfig(format!("efficiency {} outside (0, 1]", self.efficiency)));
        }
        Ok(())
    }

    fn rate_per_ns(&self) -> f64 {
        self.mean_rate * 1e-9
    }
}

/// Warns when a detector leaves the two-photon regime.
pub fn check_low_rate(config: &DetectorConfig, coherence_time_ns: f64) -> bool {
    let product = config.rate_per_ns() * coherence_time_ns;
    if product > LOW_RATE_LIMIT {
        log::warn!(
            "rate × coherence time = {product:.3} exceeds {LOW_RATE_LIMIT}; more than two photons per coherence time"
        );
        false
    } else {
        true
    }
}

/// Ordered detection times of one detector over `[0, duration_ns]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    detector: DetectorId,
    timestamps: Vec<f64>,
    duration_ns: f64,
}

impl EventStream {
    /// Checks ordering and bounds.
    pub fn new(detector: DetectorId, timestamps: Vec<f64>, duration_ns: f64) -> Result<Self> {
        if !(duration_ns > 0.0 && duration_ns.is_finite()) {
            return Err(Error::InvalidConfig(format!("duration {duration_ns} ns must be > 0")));
        }
        if let Some(w) = timestamps.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig(format!(
                "timestamps not strictly increasing at {} → {}",
                w[0], w[1]
            )));
        }
        if let (Some(&first), Some(&last)) = (timestamps.first(), timestamps.last()) {
            if !(first >= 0.0 && last <= duration_ns) {
                return Err(Error::InvalidConfig(format!(
                    "timestamps [{first}, {last}] outside [0, {duration_ns}]"
                )));
            }
        }
        Ok(Self {
            detector,
            timestamps,
            duration_ns,
        })
    }

    pub fn detector(&self) -> DetectorId {
        self.detector
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn duration_ns(&self) -> f64 {
        self.duration_ns
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Mean rate in events per ns.
    pub fn rate_per_ns(&self) -> f64 {
        self.len() as f64 / self.duration_ns
    }

    /// Mean rate in events per second.
    pub fn rate_per_s(&self) -> f64 {
        self.rate_per_ns() * 1e9
    }

    /// Header line `# detector=<id> duration_ns=<T>`, then one timestamp per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# detector={} duration_ns={}", self.detector, self.duration_ns)?;
        for t in &self.timestamps {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ASCII output")
    }

    /// Parses the text format. Blank lines and further `#` lines are ignored.
    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut header: Option<(DetectorId, f64)> = None;
        let mut timestamps = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                if header.is_none() {
                    header = Some(parse_header(rest, line_no)?);
                }
                continue;
            }
            if header.is_none() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "timestamp before `# detector=… duration_ns=…` header".into(),
                });
            }
            let t: f64 = trimmed.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("invalid timestamp `{trimmed}`"),
            })?;
            timestamps.push(t);
        }
        let (detector, duration) = header.ok_or(Error::Parse {
            line: 0,
            msg: "missing header".into(),
        })?;
        Self::new(detector, timestamps, duration)
    }
}

impl FromStr for EventStream {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::read_text(s.as_bytes())
    }
}

fn parse_header(rest: &str, line: usize) -> Result<(DetectorId, f64)> {
    let mut detector = None;
    let mut duration = None;
    for token in rest.split_whitespace() {
        match token.split_once('=') {
            Some(("detector", v)) => detector = Some(v.parse::<DetectorId>().map_err(|msg| Error::Parse { line, msg })?),
            Some(("duration_ns", v)) => {
                duration = Some(v.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("invalid duration `{v}`"),
                })?)
            }
            _ => {}
        }
    }
    match (detector, duration) {
        (Some(d), Some(t)) => Ok((d, t)),
        _ => Err(Error::Parse {
            line,
            msg: "header needs detector=<id> and duration_ns=<T>".into(),
        }),
    }
}

/// Independent Bernoulli losses followed by non-paralyzable dead time.
fn detect<R: Rng + ?Sized>(candidates: Vec<f64>, config: &DetectorConfig, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(candidates.len());
    let mut last = f64::NEG_INFINITY;
    for t in candidates {
        if config.efficiency < 1.0 && rng.random::<f64>() >= config.efficiency {
            continue;
        }
        if t - last < config.dead_time_ns || t <= last {
            continue;
        }
        out.push(t);
        last = t;
    }
    out
}

/// Thinning of a piecewise-constant intensity series `(t_ns, I)`.
///
/// Sample `k` holds over `[t_k, t_{k+1})`; the last sample holds for one more
/// grid spacing, which ends the stream. Candidates arrive at
/// `mean_rate · max(I)/⟨I⟩` and survive with probability `I(t)/max(I)`, so the
/// click rate follows `mean_rate · I(t)/⟨I⟩`.
pub fn sample_thermal_events<R: Rng + ?Sized>(
    intensity_series: &[(f64, f64)],
    detector: DetectorId,
    config: &DetectorConfig,
    rng: &mut R,
) -> Result<EventStream> {
    config.validate()?;
    let n = intensity_series.len();
    if n < 2 {
        return Err(Error::DegenerateSeries(format!("{n} samples")));
    }
    let t0 = intensity_series[0].0;
    if !(t0 >= 0.0 && t0.is_finite()) {
        return Err(Error::DegenerateSeries(format!("series starts at {t0} ns")));
    }
    if intensity_series.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::DegenerateSeries("times not strictly increasing".into()));
    }
    if intensity_series.iter().any(|s| !(s.1 >= 0.0 && s.1.is_finite())) {
        return Err(Error::DegenerateSeries("negative or non-finite intensity".into()));
    }
    let end = intensity_series[n - 1].0 + (intensity_series[n - 1].0 - intensity_series[n - 2].0);
    let weighted: f64 = (0..n)
        .map(|k| {
            let next = if k + 1 < n { intensity_series[k + 1].0 } else { end };
            intensity_series[k].1 * (next - intensity_series[k].0)
        })
        .sum();
    let mean = weighted / (end - t0);
    let peak = intensity_series.iter().map(|s| s.1).fold(0.0, f64::max);
    if !(mean > 0.0) {
        return Err(Error::DegenerateSeries("zero mean intensity".into()));
    }

    let rate = config.rate_per_ns() * peak / mean;
    let gap = Exp::new(rate).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut candidates = Vec::new();
    let mut t = t0;
    let mut k = 0;
    loop {
        t += gap.sample(rng);
        if t >= end {
            break;
        }
        while k + 1 < n && intensity_series[k + 1].0 <= t {
            k += 1;
        }
        if rng.random::<f64>() * peak < intensity_series[k].1 {
            candidates.push(t);
        }
    }
    EventStream::new(detector, detect(candidates, config, rng), end)
}

/// Homogeneous Poisson clicks: a constant-intensity (laser-like) source.
pub fn sample_poisson_events<R: Rng + ?Sized>(
    detector: DetectorId,
    config: &DetectorConfig,
    duration_ns: f64,
    rng: &mut R,
) -> Result<EventStream> {
    config.validate()?;
    let times = poisson_times(config.rate_per_ns(), duration_ns, rng)?;
    EventStream::new(detector, detect(times, config, rng), duration_ns)
}

fn poisson_times<R: Rng + ?Sized>(rate_per_ns: f64, duration_ns: f64, rng: &mut R) -> Result<Vec<f64>> {
    let gap = Exp::new(rate_per_ns).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut times = Vec::with_capacity((rate_per_ns * duration_ns * 1.1) as usize + 16);
    let mut t = 0.0;
    loop {
        t += gap.sample(rng);
        if t >= duration_ns {
            return Ok(times);
        }
        if times.last().is_none_or(|&last| t > last) {
            times.push(t);
        }
    }
}

/// Two detectors watching a thermal field with normalized mutual coherence
/// `coherence = ⟨E1 E2*⟩/⟨I⟩` and field coherence time `τ_c`.
///
/// The detector fields are a two-mode complex Ornstein–Uhlenbeck process,
/// advanced exactly between candidate times. Each detector thins its own
/// candidate stream against `I_j(t)`, capped at [`THERMAL_INTENSITY_CAP`].
pub fn sample_correlated_thermal<R: Rng + ?Sized>(
    coherence: Complex64,
    coherence_time_ns: f64,
    detectors: [&DetectorConfig; 2],
    duration_ns: f64,
    rng: &mut R,
) -> Result<(EventStream, EventStream)> {
    for d in detectors {
        d.validate()?;
        check_low_rate(d, coherence_time_ns);
    }
    if !(coherence_time_ns > 0.0) {
        return Err(Error::InvalidConfig("coherence time must be > 0".into()));
    }
    if !(duration_ns > 0.0 && duration_ns.is_finite()) {
        return Err(Error::InvalidConfig(format!("duration {duration_ns} ns must be > 0")));
    }
    let mu = if coherence.norm() > 1.0 {
        coherence / coherence.norm()
    } else {
        coherence
    };
    let residual = (1.0 - mu.norm_sqr()).max(0.0).sqrt();
    let cap = THERMAL_INTENSITY_CAP;
    let gaps = [
        Exp::new(detectors[0].rate_per_ns() * cap).map_err(|e| Error::InvalidConfig(e.to_string()))?,
        Exp::new(detectors[1].rate_per_ns() * cap).map_err(|e| Error::InvalidConfig(e.to_string()))?,
    ];

    let mut modes = [complex_normal(rng, 1.0), complex_normal(rng, 1.0)];
    let mut now = 0.0;
    let mut next = [gaps[0].sample(rng), gaps[1].sample(rng)];
    let mut candidates: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    loop {
        let j = if next[0] <= next[1] { 0 } else { 1 };
        let t = next[j];
        if t >= duration_ns {
            break;
        }
        let rho = (-(t - now) / coherence_time_ns).exp();
        let kick = (1.0 - rho * rho).sqrt();
        for m in modes.iter_mut() {
            *m = *m * rho + complex_normal(rng, 1.0) * kick;
        }
        now = t;
        let field = if j == 0 {
            modes[0]
        } else {
            mu.conj() * modes[0] + residual * modes[1]
        };
        if rng.random::<f64>() * cap < field.norm_sqr() && candidates[j].last().is_none_or(|&last| t > last) {
            candidates[j].push(t);
        }
        next[j] += gaps[j].sample(rng);
    }
    let [c1, c2] = candidates;
    Ok((
        EventStream::new(DetectorId::D1, detect(c1, detectors[0], rng), duration_ns)?,
        EventStream::new(DetectorId::D2, detect(c2, detectors[1], rng), duration_ns)?,
    ))
}

/// Entangled pairs emitted as a Poisson process at `pair_rate` (per s).
/// A pair is detected jointly with probability equal to the finite-slit SPDC
/// pattern at `positions`; both clicks carry the same timestamp.
pub fn sample_spdc_pairs<R: Rng + ?Sized>(
    geometry: &Geometry,
    model: &SpdcModel,
    pair_rate: f64,
    duration_ns: f64,
    positions: &DetectorPair,
    rng: &mut R,
) -> Result<(EventStream, EventStream)> {
    if !(pair_rate > 0.0 && pair_rate.is_finite()) {
        return Err(Error::InvalidConfig(format!("pair rate {pair_rate} must be > 0")));
    }
    let acceptance = g2_finite_spdc_phased(geometry, positions, model);
    let times: Vec<f64> = poisson_times(pair_rate * 1e-9, duration_ns, rng)?
        .into_iter()
        .filter(|_| rng.random::<f64>() < acceptance)
        .collect();
    Ok((
        EventStream::new(DetectorId::D1, times.clone(), duration_ns)?,
        EventStream::new(DetectorId::D2, times, duration_ns)?,
    ))
}
