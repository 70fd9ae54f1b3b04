//! Time-tag correlation: delay histograms, windowed coincidence counts and
//! shifted-window accidental estimates.
//!
//! The delay is `τ = t1 − t2` (D1 minus D2). Every pair of events within the
//! range is counted, not only the first stop after each start.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::EventStream;
use crate::fit::{gauss_newton, GaussNewtonOptions, Residuals};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramConfig {
    pub channel_width_ns: f64,
    /// Half-width of the delay axis.
    pub range_ns: f64,
    /// Total width of the coincidence window, centered on zero delay.
    pub window_ns: f64,
    /// Offset of the accidental-coincidence window.
    pub accidental_shift_ns: f64,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        Self {
            channel_width_ns: 0.3,
            range_ns: 1500.0,
            window_ns: 600.0,
            accidental_shift_ns: 4000.0,
        }
    }
}

impl HistogramConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} = {v} must be > 0")))
            }
        };
        positive("channel_width_ns", self.channel_width_ns)?;
        positive("range_ns", self.range_ns)?;
        positive("window_ns", self.window_ns)?;
        if !(self.accidental_shift_ns > self.window_ns + self.range_ns) {
            return Err(Error::InvalidConfig(format!(
                "accidental shift {} ns must exceed window + range = {} ns",
                self.accidental_shift_ns,
                self.window_ns + self.range_ns
            )));
        }
        Ok(())
    }

    /// Highest channel index on either side of zero.
    pub fn max_channel(&self) -> i64 {
        (self.range_ns / self.channel_width_ns + 0.5).floor() as i64
    }

    /// Channel of a delay. Channels are centered on multiples of the width;
    /// ties at a boundary round away from zero so that `τ` and `−τ` always
    /// land in mirrored channels.
    pub fn channel_of(&self, tau: f64) -> i64 {
        let k = (tau.abs() / self.channel_width_ns + 0.5).floor() as i64;
        if tau < 0.0 {
            -k
        } else {
            k
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceHistogram {
    pub centers: Vec<f64>,
    pub counts: Vec<u64>,
    pub total_pairs_considered: u64,
    pub channel_width_ns: f64,
}

impl CoincidenceHistogram {
    /// Count in the channel centered at `k · width`.
    pub fn count_at(&self, channel: i64) -> u64 {
        let offset = (self.counts.len() as i64 - 1) / 2;
        let idx = channel + offset;
        if idx < 0 || idx as usize >= self.counts.len() {
            0
        } else {
            self.counts[idx as usize]
        }
    }

    /// CSV: `# config …` header, optional extra comment lines, then
    /// `tau_ns,counts` rows.
    pub fn write_csv<W: Write>(&self, mut w: W, config: &HistogramConfig, extra_header: &[String]) -> std::io::Result<()> {
        writeln!(
            w,
            "# config channel_width_ns={} range_ns={} window_ns={} accidental_shift_ns={}",
            config.channel_width_ns, config.range_ns, config.window_ns, config.accidental_shift_ns
        )?;
        for line in extra_header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "tau_ns,counts")?;
        for (c, n) in self.centers.iter().zip(&self.counts) {
            writeln!(w, "{c},{n}")?;
        }
        Ok(())
    }
}

fn check_durations(s1: &EventStream, s2: &EventStream) -> Result<()> {
    let (a, b) = (s1.duration_ns(), s2.duration_ns());
    if (a - b).abs() > 1e-9 * a.max(b) {
        return Err(Error::MismatchedDurations(a, b));
    }
    Ok(())
}

/// Calls `visit(τ)` for every pair with `lo ≤ τ ≤ hi`, by a two-pointer sweep
/// over the sorted streams.
fn sweep_pairs(s1: &[f64], s2: &[f64], lo: f64, hi: f64, mut visit: impl FnMut(f64)) {
    let mut start = 0;
    for &t1 in s1 {
        // τ shrinks as t2 grows, so the first admissible t2 only moves forward.
        while start < s2.len() && t1 - s2[start] > hi {
            start += 1;
        }
        for &t2 in &s2[start..] {
            let tau = t1 - t2;
            if tau < lo {
                break;
            }
            visit(tau);
        }
    }
}

/// Number of event pairs with `lo ≤ t1 − t2 ≤ hi`.
pub fn count_pairs(s1: &EventStream, s2: &EventStream, lo: f64, hi: f64) -> u64 {
    let mut n = 0;
    sweep_pairs(s1.timestamps(), s2.timestamps(), lo, hi, |_| n += 1);
    n
}

/// Multi-stop delay histogram over `|τ| ≤ range`.
pub fn build_histogram(s1: &EventStream, s2: &EventStream, config: &HistogramConfig) -> Result<CoincidenceHistogram> {
    check_durations(s1, s2)?;
    config.validate()?;
    let k_max = config.max_channel();
    let channels = (2 * k_max + 1) as usize;
    let mut counts = vec![0u64; channels];
    let mut total = 0;
    let range = config.range_ns;
    sweep_pairs(s1.timestamps(), s2.timestamps(), -range, range, |tau| {
        let idx = (config.channel_of(tau) + k_max) as usize;
        counts[idx] += 1;
        total += 1;
    });
    let centers = (-k_max..=k_max).map(|k| k as f64 * config.channel_width_ns).collect();
    Ok(CoincidenceHistogram {
        centers,
        counts,
        total_pairs_considered: total,
        channel_width_ns: config.channel_width_ns,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowedCounts {
    pub coincidences: u64,
    pub accidentals: u64,
    pub net: f64,
}

impl WindowedCounts {
    /// Poisson error on `net`, adding both windows in quadrature.
    pub fn net_error(&self) -> f64 {
        ((self.coincidences + self.accidentals) as f64).sqrt()
    }

    /// `coincidences / accidentals` with its propagated counting error.
    pub fn normalized(&self) -> Option<(f64, f64)> {
        if self.accidentals == 0 || self.coincidences == 0 {
            return None;
        }
        let c = self.coincidences as f64;
        let a = self.accidentals as f64;
        let ratio = c / a;
        Some((ratio, ratio * (1.0 / c + 1.0 / a).sqrt()))
    }
}

/// Counts in the central window `|τ| ≤ W/2` and in the window shifted by the
/// accidental offset, `|τ − shift| ≤ W/2`.
pub fn count_windowed(s1: &EventStream, s2: &EventStream, config: &HistogramConfig) -> WindowedCounts {
    let half = 0.5 * config.window_ns;
    let coincidences = count_pairs(s1, s2, -half, half);
    let shift = config.accidental_shift_ns;
    let accidentals = count_pairs(s1, s2, shift - half, shift + half);
    WindowedCounts {
        coincidences,
        accidentals,
        net: coincidences as f64 - accidentals as f64,
    }
}

/// Expected accidental coincidences `R1 R2 W T` of two independent streams.
pub fn expected_accidentals(s1: &EventStream, s2: &EventStream, window_ns: f64) -> f64 {
    s1.len() as f64 * s2.len() as f64 * window_ns / s1.duration_ns()
}

/// Normalized correlation `g2(τ) = counts(τ) / (R1 R2 T Δ)`.
pub fn g2_tau(histogram: &CoincidenceHistogram, s1: &EventStream, s2: &EventStream) -> Result<Vec<(f64, f64)>> {
    check_durations(s1, s2)?;
    for s in [s1, s2] {
        if s.is_empty() {
            return Err(Error::ZeroRate(s.detector().to_string()));
        }
    }
    let norm = s1.rate_per_ns() * s2.rate_per_ns() * s1.duration_ns() * histogram.channel_width_ns;
    Ok(histogram
        .centers
        .iter()
        .zip(&histogram.counts)
        .map(|(&tau, &n)| (tau, n as f64 / norm))
        .collect())
}

/// Mean of `exp(−2|τ|/τ_c)` over a window of total width `W` centered on zero.
/// A window-averaged thermal correlation is `1 + f · |μ|²` with this `f`.
pub fn window_averaged_bunching(window_ns: f64, coherence_time_ns: f64) -> f64 {
    let x = window_ns / coherence_time_ns;
    (1.0 - (-x).exp()) / x
}

/// Fit of `g2(τ) = B + A exp(−2|τ|/τ_c)` to a correlation curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BunchingFit {
    pub baseline: f64,
    pub amplitude: f64,
    pub decay_ns: f64,
    pub converged: bool,
}

impl BunchingFit {
    /// Peak value relative to the baseline, `1 + A/B`.
    pub fn g2_zero(&self) -> f64 {
        1.0 + self.amplitude / self.baseline
    }
}

struct BunchingProblem<'a> {
    curve: &'a [(f64, f64)],
}

impl Residuals for BunchingProblem<'_> {
    fn evaluate(&self, p: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.curve.len();
        let mut r = DVector::zeros(n);
        let mut j = DMatrix::zeros(n, 3);
        for (i, &(tau, g)) in self.curve.iter().enumerate() {
            let e = (-2.0 * tau.abs() / p[2]).exp();
            r[i] = p[0] + p[1] * e - g;
            j[(i, 0)] = 1.0;
            j[(i, 1)] = e;
            j[(i, 2)] = p[1] * e * 2.0 * tau.abs() / (p[2] * p[2]);
        }
        (r, j)
    }
}

/// Least-squares fit of the bunching peak. The start point comes from the
/// curve itself: baseline from the outer quarter of the delay range,
/// amplitude from the central channels, decay from the excess area.
pub fn fit_bunching_peak(curve: &[(f64, f64)]) -> Result<BunchingFit> {
    if curve.len() < 8 {
        return Err(Error::Precondition("bunching fit needs at least 8 points".into()));
    }
    let reach = curve.iter().map(|c| c.0.abs()).fold(0.0, f64::max);
    let outer: Vec<f64> = curve.iter().filter(|c| c.0.abs() > 0.75 * reach).map(|c| c.1).collect();
    let baseline = outer.iter().sum::<f64>() / outer.len().max(1) as f64;
    let width = curve.get(1).map(|c| c.0 - curve[0].0).unwrap_or(1.0).abs();
    let excess_area: f64 = curve.iter().map(|c| (c.1 - baseline) * width).sum();
    let central: Vec<f64> = curve.iter().filter(|c| c.0.abs() <= 0.02 * reach).map(|c| c.1).collect();
    let peak = central.iter().sum::<f64>() / central.len().max(1) as f64 - baseline;
    if !(peak > 0.0 && excess_area > 0.0) {
        return Err(Error::Precondition("no bunching excess to fit".into()));
    }
    // ∫ A e^{−2|τ|/τ_c} dτ = A τ_c.
    let decay0 = (excess_area / peak).clamp(2.0 * width, reach);
    let problem = BunchingProblem { curve };
    let fit = gauss_newton(
        &problem,
        &[baseline, peak, decay0],
        &[baseline.abs().max(1e-12), peak, decay0],
        &GaussNewtonOptions::default(),
    );
    Ok(BunchingFit {
        baseline: fit.params[0],
        amplitude: fit.params[1],
        decay_ns: fit.params[2].abs(),
        converged: fit.converged,
    })
}
