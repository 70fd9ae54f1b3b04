//! WebAssembly bindings for the browser demo. Every export takes plain
//! numbers and returns a JSON string for the page to plot.

use serde::Serialize;
use twophoton::coincidence::g2_tau;
use twophoton::events::sample_correlated_thermal;
use twophoton::rng::{derive_seed, stream_rng};
use twophoton::scan::linspace;
use twophoton::{
    build_histogram, estimate_g2_spatial, first_order_pattern, fit_bunching_peak, g2_finite_spdc, g2_finite_thermal,
    visibility, DetectorConfig, Geometry, HistogramConfig, SourceKind, ThermalSourceConfig,
};
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Patterns {
    u_mm: Vec<f64>,
    thermal: Vec<f64>,
    spdc: Vec<f64>,
    first_order: Vec<f64>,
    visibility_thermal: Option<f64>,
    visibility_spdc: Option<f64>,
}

#[derive(Serialize)]
struct SpeckleScan {
    u_mm: Vec<f64>,
    value: Vec<f64>,
    std_error: Vec<f64>,
    closed_form: Vec<f64>,
}

#[derive(Serialize)]
struct Bunching {
    tau_ns: Vec<f64>,
    g2: Vec<f64>,
    g2_zero: Option<f64>,
    decay_ns: Option<f64>,
    singles: [f64; 2],
}

fn geometry(a_mm: f64, d_mm: f64, z_m: f64, lambda_nm: f64) -> twophoton::Result<Geometry> {
    Geometry::new(a_mm * 1e-3, d_mm * 1e-3, z_m, lambda_nm * 1e-9)
}

fn to_json<T: Serialize>(value: &T) -> twophoton::Result<String> {
    serde_json::to_string(value).map_err(|e| twophoton::Error::InvalidConfig(e.to_string()))
}

/// Thermal, SPDC and first-order patterns against the pattern variable `u`
/// (`x1 − x2`, `x1 + x2` and `x` respectively) on `[−span, span]`.
pub fn patterns_json(a_mm: f64, d_mm: f64, z_m: f64, lambda_nm: f64, span_mm: f64, points: usize) -> twophoton::Result<String> {
    let g = geometry(a_mm, d_mm, z_m, lambda_nm)?;
    let u_mm = linspace(-span_mm, span_mm, points.max(3));
    let u: Vec<f64> = u_mm.iter().map(|v| v * 1e-3).collect();
    let thermal: Vec<f64> = u.iter().map(|&v| g2_finite_thermal(&g, &SourceKind::Thermal.pair_for(v))).collect();
    let spdc: Vec<f64> = u.iter().map(|&v| g2_finite_spdc(&g, &SourceKind::Spdc.pair_for(v))).collect();
    let first_order = u.iter().map(|&v| first_order_pattern(&g, v)).collect();
    let samples = |values: &[f64]| u.iter().copied().zip(values.iter().copied()).collect::<Vec<_>>();
    to_json(&Patterns {
        visibility_thermal: visibility(&samples(&thermal)).ok(),
        visibility_spdc: visibility(&samples(&spdc)).ok(),
        u_mm,
        thermal,
        spdc,
        first_order,
    })
}

/// Speckle Monte Carlo of the thermal correlation at `points` values of `u`.
#[allow(clippy::too_many_arguments)]
pub fn speckle_json(
    a_mm: f64,
    d_mm: f64,
    z_m: f64,
    lambda_nm: f64,
    span_mm: f64,
    points: usize,
    realizations: usize,
    seed: u64,
) -> twophoton::Result<String> {
    let g = geometry(a_mm, d_mm, z_m, lambda_nm)?;
    let u_mm = linspace(-span_mm, span_mm, points.max(2));
    let mut out = SpeckleScan {
        u_mm: u_mm.clone(),
        value: vec![],
        std_error: vec![],
        closed_form: vec![],
    };
    for (i, &u) in u_mm.iter().enumerate() {
        let pair = SourceKind::Thermal.pair_for(u * 1e-3);
        let config = ThermalSourceConfig {
            seed: derive_seed(seed, i as u64),
            ..ThermalSourceConfig::default()
        };
        let est = estimate_g2_spatial(&g, &config, &pair, realizations)?;
        out.value.push(est.value);
        out.std_error.push(est.std_error);
        out.closed_form.push(g2_finite_thermal(&g, &pair));
    }
    to_json(&out)
}

/// Delay histogram of two detectors at the same point of a thermal field,
/// normalized to the independent-stream expectation, with a bunching fit.
pub fn bunching_json(
    coherence_time_ns: f64,
    rate1: f64,
    rate2: f64,
    duration_s: f64,
    channel_ns: f64,
    seed: u64,
) -> twophoton::Result<String> {
    let d1 = DetectorConfig::with_rate(rate1);
    let d2 = DetectorConfig::with_rate(rate2);
    let mut rng = stream_rng(seed, 0);
    let one = twophoton::optics::ComplexAmplitude::new(1.0, 0.0);
    let (s1, s2) = sample_correlated_thermal(one, coherence_time_ns, [&d1, &d2], duration_s * 1e9, &mut rng)?;
    let range = 8.0 * coherence_time_ns;
    let config = HistogramConfig {
        channel_width_ns: channel_ns,
        range_ns: range,
        window_ns: 3.0 * coherence_time_ns,
        accidental_shift_ns: 4.0 * range,
    };
    let histogram = build_histogram(&s1, &s2, &config)?;
    let curve = g2_tau(&histogram, &s1, &s2)?;
    let fit = fit_bunching_peak(&curve).ok();
    to_json(&Bunching {
        tau_ns: curve.iter().map(|c| c.0).collect(),
        g2: curve.iter().map(|c| c.1).collect(),
        g2_zero: fit.map(|f| f.g2_zero()),
        decay_ns: fit.map(|f| f.decay_ns),
        singles: [s1.rate_per_s(), s2.rate_per_s()],
    })
}

fn js(result: twophoton::Result<String>) -> Result<String, JsError> {
    result.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn analytic_patterns(a_mm: f64, d_mm: f64, z_m: f64, lambda_nm: f64, span_mm: f64, points: usize) -> Result<String, JsError> {
    js(patterns_json(a_mm, d_mm, z_m, lambda_nm, span_mm, points))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn speckle_scan(
    a_mm: f64,
    d_mm: f64,
    z_m: f64,
    lambda_nm: f64,
    span_mm: f64,
    points: usize,
    realizations: usize,
    seed: u64,
) -> Result<String, JsError> {
    js(speckle_json(a_mm, d_mm, z_m, lambda_nm, span_mm, points, realizations, seed))
}

#[wasm_bindgen]
pub fn hbt_histogram(
    coherence_time_ns: f64,
    rate1: f64,
    rate2: f64,
    duration_s: f64,
    channel_ns: f64,
    seed: u64,
) -> Result<String, JsError> {
    js(bunching_json(coherence_time_ns, rate1, rate2, duration_s, channel_ns, seed))
}
