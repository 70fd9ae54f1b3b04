//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use twophoton::coincidence::expected_accidentals;
use twophoton::events::sample_correlated_thermal;
use twophoton::optics::{g2_finite_by_quadrature, g2_finite_spdc};
use twophoton::rng::stream_rng;
use twophoton::scan::linspace;
use twophoton::speckle::{discretize_source, mutual_coherence};
use twophoton::{
    build_histogram, count_windowed, estimate_g2_spatial, fit_bunching_peak, fit_pattern, g2_finite_thermal,
    resolution_report, run_scan, DetectorConfig, DetectorId, DetectorPair, Engine, EventStream, Geometry,
    HistogramConfig, ScanConfig, ScanMode, ScanResult, SourceKind, SourceModel, ThermalSourceConfig,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within_time(o: Outcome, elapsed: Duration, limit: Duration) -> Outcome {
    let ok = elapsed <= limit;
    outcome(
        o.pass && ok,
        format!("{} [{:.2} s, limit {} s]", o.detail, elapsed.as_secs_f64(), limit.as_secs()),
    )
}

fn timed(limit_s: u64, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let o = f();
    within_time(o, start.elapsed(), Duration::from_secs(limit_s))
}

fn dense_grid(kind: SourceKind) -> ScanResult {
    let scan = ScanConfig::new(ScanMode::DifferenceGrid, linspace(-10e-3, 10e-3, 2001), Engine::Analytic, 1.0);
    let source = match kind {
        SourceKind::Thermal => SourceModel::default_thermal(),
        SourceKind::Spdc => SourceModel::default_spdc(),
    };
    run_scan(&Geometry::default(), &source, &scan).unwrap()
}

fn visibility_bound() -> Outcome {
    let thermal = dense_grid(SourceKind::Thermal).visibility().unwrap();
    let spdc = dense_grid(SourceKind::Spdc).visibility().unwrap();
    outcome(
        (thermal - 1.0 / 3.0).abs() < 1e-6 && (spdc - 1.0).abs() < 1e-6,
        format!("thermal V = {thermal:.9}, SPDC V = {spdc:.9}"),
    )
}

fn antisymmetric_scan(engine: Engine, budget: f64, points: usize) -> ScanConfig {
    let mut scan = ScanConfig::new(ScanMode::Antisymmetric, linspace(-6e-3, 6e-3, points), engine, budget);
    scan.seed = 2024;
    scan
}

fn resolution_doubling(event_result: &ScanResult) -> Outcome {
    let g = Geometry::default();
    let analytic = run_scan(&g, &SourceModel::default_thermal(), &antisymmetric_scan(Engine::Analytic, 1.0, 41)).unwrap();
    let exact = resolution_report(&fit_pattern(&analytic, SourceKind::Thermal, &g).unwrap(), &g);
    let noisy_fit = fit_pattern(event_result, SourceKind::Thermal, &g).unwrap();
    let noisy = resolution_report(&noisy_fit, &g);
    let pass = (exact.ratio - 0.5).abs() < 1e-9 && (noisy.ratio / 0.5 - 1.0).abs() < 0.02 && noisy.converged;
    outcome(
        pass,
        format!("analytic ratio = {:.12}, event_mc ratio = {:.5}", exact.ratio, noisy.ratio),
    )
}

fn variable_dependence() -> Outcome {
    let g = Geometry::default();
    let mut rng = stream_rng(7, 0);
    let mut worst_thermal: f64 = 0.0;
    let mut worst_spdc: f64 = 0.0;
    for _ in 0..2000 {
        let pair = DetectorPair::new(rng.random_range(-8e-3..8e-3), rng.random_range(-8e-3..8e-3));
        let delta = rng.random_range(-5e-3..5e-3);
        let t0 = g2_finite_thermal(&g, &pair);
        let t1 = g2_finite_thermal(&g, &pair.translated(delta));
        worst_thermal = worst_thermal.max((t1 - t0).abs() / t0.abs());
        let s0 = g2_finite_spdc(&g, &pair);
        let s1 = g2_finite_spdc(&g, &pair.spread(delta));
        worst_spdc = worst_spdc.max((s1 - s0).abs() / s0.abs().max(1e-300));
    }
    outcome(
        worst_thermal < 1e-9 && worst_spdc < 1e-9,
        format!("max relative change: thermal {worst_thermal:.2e}, SPDC {worst_spdc:.2e}"),
    )
}

fn monte_carlo_equivalence() -> Outcome {
    let g = Geometry::default();
    let config = ThermalSourceConfig {
        seed: 11,
        ..ThermalSourceConfig::default()
    };
    let grid = linspace(-10e-3, 10e-3, 11);
    let mut inside = 0;
    let mut worst: f64 = 0.0;
    for (i, &u) in grid.iter().enumerate() {
        let pair = SourceKind::Thermal.pair_for(u);
        let point = ThermalSourceConfig {
            seed: config.seed + i as u64,
            ..config.clone()
        };
        let est = estimate_g2_spatial(&g, &point, &pair, 100_000).unwrap();
        let z = (est.value - g2_finite_thermal(&g, &pair)).abs() / est.std_error;
        worst = worst.max(z);
        if z < 3.0 {
            inside += 1;
        }
    }
    outcome(
        inside as f64 >= 0.95 * grid.len() as f64,
        format!("{inside}/{} points within 3σ (max {worst:.2}σ)", grid.len()),
    )
}

fn thermal_statistics() -> Outcome {
    let hist = HistogramConfig::default();
    let defaults_exact = hist.channel_width_ns == 0.3 && hist.window_ns == 600.0 && hist.accidental_shift_ns == 4000.0;
    let g = Geometry::default();
    let thermal = ThermalSourceConfig::default();
    let pair = DetectorPair::new(0.0, 0.0);
    let mu = mutual_coherence(&g, &discretize_source(&g, &thermal), &pair);
    let (d1, d2) = (DetectorConfig::d1(), DetectorConfig::d2());
    let mut rng = stream_rng(5, 0);
    let (s1, s2) = sample_correlated_thermal(mu, thermal.coherence_time_ns(), [&d1, &d2], 60e9, &mut rng).unwrap();
    let histogram = build_histogram(&s1, &s2, &hist).unwrap();
    let curve = twophoton::coincidence::g2_tau(&histogram, &s1, &s2).unwrap();
    let fit = fit_bunching_peak(&curve).unwrap();
    let g2 = fit.g2_zero();
    let decay_err = fit.decay_ns / thermal.coherence_time_ns() - 1.0;
    let counts = count_windowed(&s1, &s2, &hist);
    let expected = expected_accidentals(&s1, &s2, hist.window_ns);
    let z = (counts.accidentals as f64 - expected) / expected.sqrt();
    outcome(
        defaults_exact && (1.9..=2.1).contains(&g2) && decay_err.abs() < 0.15 && z.abs() < 3.0,
        format!(
            "g2(0) = {g2:.4}, decay = {:.1} ns ({:+.1}%), accidentals {} vs {expected:.0} ({z:+.2}σ)",
            fit.decay_ns,
            100.0 * decay_err,
            counts.accidentals
        ),
    )
}

fn singles_flatness(result: &ScanResult) -> Outcome {
    let cv = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        var.sqrt() / m
    };
    let (c1, c2) = (cv(&result.singles1), cv(&result.singles2));
    outcome(c1 < 0.02 && c2 < 0.02, format!("CV D1 = {:.3}%, D2 = {:.3}%", 100.0 * c1, 100.0 * c2))
}

fn fit_recovery() -> Outcome {
    let g = Geometry::default();
    let mut rng = stream_rng(3, 0);
    let mut details = Vec::new();
    let mut pass = true;
    for (kind, source) in [
        (SourceKind::Thermal, SourceModel::default_thermal()),
        (SourceKind::Spdc, SourceModel::default_spdc()),
    ] {
        let scan = ScanConfig::new(ScanMode::DifferenceGrid, linspace(-12e-3, 12e-3, 81), Engine::Analytic, 1.0);
        let mut result = run_scan(&g, &source, &scan).unwrap();
        for v in result.coincidence.iter_mut() {
            let xi: f64 = StandardNormal.sample(&mut rng);
            *v *= 1.0 + 0.02 * xi;
        }
        let fit = fit_pattern(&result, kind, &g).unwrap();
        let ea = fit.a_fit / g.slit_width - 1.0;
        let ed = fit.d_fit / g.slit_separation - 1.0;
        pass &= ea.abs() < 0.02 && ed.abs() < 0.02;
        details.push(format!(
            "{}: a = {:.4} mm ({:+.2}%), d = {:.4} mm ({:+.2}%)",
            kind.name(),
            fit.a_fit * 1e3,
            100.0 * ea,
            fit.d_fit * 1e3,
            100.0 * ed
        ));
    }
    outcome(pass, details.join("; "))
}

fn random_stream<R: Rng>(rng: &mut R, detector: DetectorId, n: usize, duration: f64) -> EventStream {
    let mut t: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..duration)).collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    EventStream::new(detector, t, duration).unwrap()
}

fn small_instance_cross_check() -> Outcome {
    let mut rng = stream_rng(99, 0);
    let config = HistogramConfig {
        channel_width_ns: 0.3,
        range_ns: 30.0,
        window_ns: 10.0,
        accidental_shift_ns: 50.0,
    };
    let mut histograms_equal = true;
    for trial in 0..20 {
        let n1 = 200 + 40 * trial;
        let s1 = random_stream(&mut rng, DetectorId::D1, n1, 2000.0);
        let s2 = random_stream(&mut rng, DetectorId::D2, 1000 - n1 / 2, 2000.0);
        let hist = build_histogram(&s1, &s2, &config).unwrap();
        let k_max = config.max_channel();
        let mut brute = vec![0u64; (2 * k_max + 1) as usize];
        for &t1 in s1.timestamps() {
            for &t2 in s2.timestamps() {
                let tau = t1 - t2;
                if tau.abs() <= config.range_ns {
                    brute[(config.channel_of(tau) + k_max) as usize] += 1;
                }
            }
        }
        histograms_equal &= brute == hist.counts;
    }

    let g = Geometry::default();
    let mut worst: f64 = 0.0;
    for (kind, source) in [
        (SourceKind::Thermal, SourceModel::default_thermal()),
        (SourceKind::Spdc, SourceModel::default_spdc()),
    ] {
        for u in linspace(-10e-3, 10e-3, 21) {
            let pair = kind.pair_for(u);
            let exact = match kind {
                SourceKind::Thermal => g2_finite_thermal(&g, &pair),
                SourceKind::Spdc => g2_finite_spdc(&g, &pair),
            };
            let quad = g2_finite_by_quadrature(&g, &pair, &source, 201).unwrap();
            worst = worst.max((quad - exact).abs());
        }
    }
    outcome(
        histograms_equal && worst < 1e-4,
        format!("histograms equal: {histograms_equal}; max |quadrature − closed form| = {worst:.2e}"),
    )
}

fn main() -> ExitCode {
    let event_scan = Instant::now();
    let g = Geometry::default();
    let event_result = run_scan(&g, &SourceModel::default_thermal(), &antisymmetric_scan(Engine::EventMc, 5.0, 41));
    let event_elapsed = event_scan.elapsed();

    let mut results: Vec<(&str, Outcome)> = vec![("1 thermal visibility bound", timed(1, visibility_bound))];
    match &event_result {
        Ok(result) => {
            let start = Instant::now();
            let o = resolution_doubling(result);
            results.push((
                "2 resolution doubling",
                within_time(o, event_elapsed + start.elapsed(), Duration::from_secs(60)),
            ));
        }
        Err(e) => results.push(("2 resolution doubling", outcome(false, format!("event scan failed: {e}")))),
    }
    results.push(("3 variable-dependence laws", variable_dependence()));
    results.push(("4 Monte Carlo ↔ closed form", timed(300, monte_carlo_equivalence)));
    results.push(("5 thermal statistics", timed(300, thermal_statistics)));
    match &event_result {
        Ok(result) => results.push(("6 singles flatness", singles_flatness(result))),
        Err(e) => results.push(("6 singles flatness", outcome(false, format!("event scan failed: {e}")))),
    }
    results.push(("7 fit recovery", timed(60, fit_recovery)));
    results.push(("8 small-instance cross-check", small_instance_cross_check()));

    let mut all = true;
    for (name, o) in &results {
        all &= o.pass;
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
