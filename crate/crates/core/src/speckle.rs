//! Monte Carlo model of the pseudo-thermal source.
//!
//! The illuminated slits are an ensemble of independent circular complex
//! Gaussian sub-sources. Far-field detector fields are their Fraunhofer
//! superposition, and second-order correlations are estimated from intensity
//! products alone.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::optics::{aperture_nodes, fraunhofer_factor, DetectorPair, Geometry};
use crate::rng::{complex_normal, map_indexed, stream_rng};
use crate::source::ThermalSourceConfig;

/// Minimum number of realizations accepted by [`estimate_g2_spatial`].
pub const MIN_REALIZATIONS: usize = 100;

/// Normalized intensity correlation `⟨I1 I2⟩ / (⟨I1⟩⟨I2⟩)` with a batch-means
/// standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_realizations: usize,
    /// Sample mean intensity at D1 and D2.
    pub mean_intensity: [f64; 2],
}

/// Sub-source positions: `subsources_per_slit` midpoints across each
/// aperture, slit A first.
pub fn discretize_source(geometry: &Geometry, config: &ThermalSourceConfig) -> Vec<f64> {
    aperture_nodes(geometry, config.subsources_per_slit)
        .into_iter()
        .map(|(s, _)| s)
        .collect()
}

/// One independent draw of every sub-source amplitude, each with
/// `⟨|E|²⟩ = mean_intensity / N`.
pub fn draw_realization<R: Rng + ?Sized>(
    subsource_positions: &[f64],
    config: &ThermalSourceConfig,
    rng: &mut R,
) -> Vec<Complex64> {
    let variance = config.mean_intensity / subsource_positions.len() as f64;
    subsource_positions.iter().map(|_| complex_normal(rng, variance)).collect()
}

/// Far-field detector field `Σ_s E_s exp(−i k s x / z)`.
pub fn propagate(realization: &[Complex64], subsource_positions: &[f64], detector_x: f64, geometry: &Geometry) -> Complex64 {
    realization
        .iter()
        .zip(subsource_positions)
        .map(|(&e, &s)| e * fraunhofer_factor(geometry, s, detector_x))
        .sum()
}

fn phase_factors(geometry: &Geometry, positions: &[f64], detector_x: f64) -> Vec<Complex64> {
    positions.iter().map(|&s| fraunhofer_factor(geometry, s, detector_x)).collect()
}

fn project(amplitudes: &[Complex64], factors: &[Complex64]) -> Complex64 {
    amplitudes.iter().zip(factors).map(|(a, f)| a * f).sum()
}

/// Normalized mutual coherence `⟨E1 E2*⟩ / ⟨I⟩` between two detector
/// positions for equal-power sub-sources.
pub fn mutual_coherence(geometry: &Geometry, subsource_positions: &[f64], pair: &DetectorPair) -> Complex64 {
    let n = subsource_positions.len() as f64;
    subsource_positions
        .iter()
        .map(|&s| fraunhofer_factor(geometry, s, pair.x1) * fraunhofer_factor(geometry, s, pair.x2).conj())
        .sum::<Complex64>()
        / n
}

/// Stored field samples: one row per realization, one column per detector
/// position.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeckleEnsemble {
    pub detector_positions: Vec<f64>,
    pub realizations: Vec<Vec<Complex64>>,
    pub seed: u64,
}

impl SpeckleEnsemble {
    /// Draws `n` realizations; realization `r` uses ChaCha stream `r` of
    /// `config.seed`.
    pub fn generate(geometry: &Geometry, config: &ThermalSourceConfig, detector_positions: &[f64], n: usize) -> Self {
        let sources = discretize_source(geometry, config);
        let factors: Vec<Vec<Complex64>> = detector_positions
            .iter()
            .map(|&x| phase_factors(geometry, &sources, x))
            .collect();
        let realizations = map_indexed(n, |r| {
            let mut rng = stream_rng(config.seed, r as u64);
            let amps = draw_realization(&sources, config, &mut rng);
            factors.iter().map(|f| project(&amps, f)).collect()
        });
        Self {
            detector_positions: detector_positions.to_vec(),
            realizations,
            seed: config.seed,
        }
    }

    pub fn intensities(&self, column: usize) -> Vec<f64> {
        self.realizations.iter().map(|row| row[column].norm_sqr()).collect()
    }
}

/// Ratio estimator with batch-means error over paired intensity samples.
pub(crate) fn correlation_from_samples(i1: &[f64], i2: &[f64]) -> CorrelationEstimate {
    let n = i1.len();
    let batches = (n / 10).clamp(10, 100);
    let ratio = |a: &[f64], b: &[f64]| {
        let (mut s1, mut s2, mut s12) = (0.0, 0.0, 0.0);
        for (&x, &y) in a.iter().zip(b) {
            s1 += x;
            s2 += y;
            s12 += x * y;
        }
        let m = a.len() as f64;
        (s12 / m) / ((s1 / m) * (s2 / m))
    };
    let value = ratio(i1, i2);
    let per_batch = n / batches;
    let batch_values: Vec<f64> = (0..batches)
        .map(|b| {
            let lo = b * per_batch;
            let hi = if b + 1 == batches { n } else { lo + per_batch };
            ratio(&i1[lo..hi], &i2[lo..hi])
        })
        .collect();
    let mean = batch_values.iter().sum::<f64>() / batches as f64;
    let var = batch_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    let m = n as f64;
    CorrelationEstimate {
        value,
        std_error: (var / batches as f64).sqrt(),
        n_realizations: n,
        mean_intensity: [i1.iter().sum::<f64>() / m, i2.iter().sum::<f64>() / m],
    }
}

/// Equal-time intensity correlation at a detector pair over
/// `n_realizations` independent source draws.
pub fn estimate_g2_spatial(
    geometry: &Geometry,
    config: &ThermalSourceConfig,
    pair: &DetectorPair,
    n_realizations: usize,
) -> Result<CorrelationEstimate> {
    if n_realizations < MIN_REALIZATIONS {
        return Err(Error::TooFewRealizations {
            min: MIN_REALIZATIONS,
            got: n_realizations,
        });
    }
    config.validate()?;
    let sources = discretize_source(geometry, config);
    let f1 = phase_factors(geometry, &sources, pair.x1);
    let f2 = phase_factors(geometry, &sources, pair.x2);
    let samples = map_indexed(n_realizations, |r| {
        let mut rng = stream_rng(config.seed, r as u64);
        let amps = draw_realization(&sources, config, &mut rng);
        (project(&amps, &f1).norm_sqr(), project(&amps, &f2).norm_sqr())
    });
    let (i1, i2): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
    Ok(correlation_from_samples(&i1, &i2))
}

fn check_time_grid(config: &ThermalSourceConfig, duration_ns: f64, dt_ns: f64) -> Result<()> {
    config.validate()?;
    let tau = config.coherence_time_ns();
    if !(dt_ns > 0.0 && dt_ns < tau / 10.0) {
        return Err(Error::Precondition(format!("time step {dt_ns} ns must be below τ_c/10 = {} ns", tau / 10.0)));
    }
    if !(duration_ns > 10.0 * tau) {
        return Err(Error::Precondition(format!(
            "duration {duration_ns} ns must exceed 10 τ_c = {} ns",
            10.0 * tau
        )));
    }
    Ok(())
}

/// Intensity time series at several detectors sharing one evolving source.
///
/// Each sub-source follows the exact first-order autoregressive update
/// `E ← ρE + √(1−ρ²)·ξ` with `ρ = exp(−dt/τ_c)`, so the field autocorrelation
/// is `exp(−τ/τ_c)` at every lag on the grid. The initial state is drawn from
/// the stationary distribution. Times are in ns; rows follow `detectors`.
pub fn speckle_time_series_multi<R: Rng + ?Sized>(
    geometry: &Geometry,
    config: &ThermalSourceConfig,
    subsource_positions: &[f64],
    detectors: &[f64],
    duration_ns: f64,
    dt_ns: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    check_time_grid(config, duration_ns, dt_ns)?;
    let steps = (duration_ns / dt_ns).floor() as usize;
    let rho = (-dt_ns / config.coherence_time_ns()).exp();
    let kick = (1.0 - rho * rho).sqrt();
    let variance = config.mean_intensity / subsource_positions.len() as f64;
    let factors: Vec<Vec<Complex64>> = detectors
        .iter()
        .map(|&x| phase_factors(geometry, subsource_positions, x))
        .collect();

    let mut amps = draw_realization(subsource_positions, config, rng);
    let mut times = Vec::with_capacity(steps);
    let mut series = vec![Vec::with_capacity(steps); detectors.len()];
    for step in 0..steps {
        times.push(step as f64 * dt_ns);
        for (row, f) in series.iter_mut().zip(&factors) {
            row.push(project(&amps, f).norm_sqr());
        }
        for a in amps.iter_mut() {
            *a = *a * rho + complex_normal(rng, variance) * kick;
        }
    }
    Ok((times, series))
}

/// Intensity time series `(t_ns, I)` at one detector.
pub fn speckle_time_series<R: Rng + ?Sized>(
    geometry: &Geometry,
    config: &ThermalSourceConfig,
    subsource_positions: &[f64],
    detector_x: f64,
    duration_ns: f64,
    dt_ns: f64,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    let (times, mut series) =
        speckle_time_series_multi(geometry, config, subsource_positions, &[detector_x], duration_ns, dt_ns, rng)?;
    Ok(times.into_iter().zip(series.swap_remove(0)).collect())
}
