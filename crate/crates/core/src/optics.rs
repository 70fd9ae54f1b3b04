//! Double-slit geometry and the first- and second-order interference patterns.
//!
//! Three routes evaluate the same physics:
//! - closed far-field forms ([`g2_finite_thermal`], [`g2_finite_spdc`],
//!   [`first_order_pattern`]), the primary evaluators;
//! - exact-path point-slit superpositions ([`g2_point_thermal`],
//!   [`g2_point_spdc`]);
//! - aperture quadrature over the two-photon amplitudes
//!   ([`g2_finite_by_quadrature`]).
//!
//! Slit A sits at `+d/2` and slit B at `-d/2`. Detector displacements are
//! measured from the symmetry axis of the slits.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::source::SourceModel;

/// A complex field or probability amplitude.
pub type ComplexAmplitude = Complex64;

/// Standard He-Ne line (m), the default wavelength.
pub const HENE_WAVELENGTH: f64 = 632.8e-9;

/// Double-slit geometry. All lengths in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    /// Slit width `a`.
    pub slit_width: f64,
    /// Center-to-center slit separation `d`.
    pub slit_separation: f64,
    /// Distance `z` from the slits to the detector plane.
    pub distance: f64,
    pub wavelength: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            slit_width: 0.043e-3,
            slit_separation: 0.135e-3,
            distance: 1.0,
            wavelength: HENE_WAVELENGTH,
        }
    }
}

impl Geometry {
    pub fn new(slit_width: f64, slit_separation: f64, distance: f64, wavelength: f64) -> Result<Self> {
        let g = Self {
            slit_width,
            slit_separation,
            distance,
            wavelength,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.slit_width, self.slit_separation, self.distance, self.wavelength]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidGeometry("non-finite length".into()));
        }
        if self.slit_width <= 0.0 {
            return Err(Error::InvalidGeometry(format!("slit width {} must be > 0", self.slit_width)));
        }
        if self.slit_separation <= self.slit_width {
            return Err(Error::InvalidGeometry(format!(
                "slit separation {} must exceed slit width {}",
                self.slit_separation, self.slit_width
            )));
        }
        if self.distance <= 0.0 {
            return Err(Error::InvalidGeometry(format!("distance {} must be > 0", self.distance)));
        }
        if self.wavelength <= 0.0 {
            return Err(Error::InvalidGeometry(format!("wavelength {} must be > 0", self.wavelength)));
        }
        Ok(())
    }

    /// Wavenumber `k = 2π/λ`.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// `λz`, the length scale of every far-field fringe.
    pub fn fringe_scale(&self) -> f64 {
        self.wavelength * self.distance
    }

    /// Far-field validity: `z ≥ 10 d²/λ`.
    pub fn is_far_field(&self) -> bool {
        self.distance >= 10.0 * self.slit_separation * self.slit_separation / self.wavelength
    }

    pub fn slit_center(&self, slit: Slit) -> f64 {
        match slit {
            Slit::A => 0.5 * self.slit_separation,
            Slit::B => -0.5 * self.slit_separation,
        }
    }

    /// Fringe period of the first-order pattern, `λz/d`.
    pub fn first_order_period(&self) -> f64 {
        self.fringe_scale() / self.slit_separation
    }
}

/// One of the two slits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slit {
    A,
    B,
}

/// Horizontal displacements of detectors D1 and D2 (m).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectorPair {
    pub x1: f64,
    pub x2: f64,
}

impl DetectorPair {
    pub fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn difference(&self) -> f64 {
        self.x1 - self.x2
    }

    pub fn sum(&self) -> f64 {
        self.x1 + self.x2
    }

    /// Both detectors moved by `delta` in the same direction.
    pub fn translated(&self, delta: f64) -> Self {
        Self::new(self.x1 + delta, self.x2 + delta)
    }

    /// Detectors moved by `delta` in opposite directions.
    pub fn spread(&self, delta: f64) -> Self {
        Self::new(self.x1 + delta, self.x2 - delta)
    }
}

/// Weights of the two-photon mixture: both photons from A, both from B, or
/// one from each slit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalMixture {
    pub p_alpha: f64,
    pub p_beta: f64,
    pub p_gamma: f64,
}

impl Default for ThermalMixture {
    fn default() -> Self {
        Self::equal()
    }
}

impl ThermalMixture {
    pub fn new(p_alpha: f64, p_beta: f64, p_gamma: f64) -> Result<Self> {
        let m = Self {
            p_alpha,
            p_beta,
            p_gamma,
        };
        m.validate()?;
        Ok(m)
    }

    /// The thermal-light mixture, 1/3 each.
    pub fn equal() -> Self {
        let third = 1.0 / 3.0;
        Self {
            p_alpha: third,
            p_beta: third,
            p_gamma: third,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_alpha", self.p_alpha), ("p_beta", self.p_beta), ("p_gamma", self.p_gamma)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} = {p} outside [0, 1]")));
            }
        }
        let total = self.p_alpha + self.p_beta + self.p_gamma;
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(())
    }
}

/// Entangled-pair source with a constant pump phase difference `φ_A − φ_B`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpdcModel {
    pub phase_difference: f64,
}

impl SpdcModel {
    pub fn new(phase_difference: f64) -> Result<Self> {
        if !phase_difference.is_finite() {
            return Err(Error::InvalidConfig("phase difference must be finite".into()));
        }
        Ok(Self { phase_difference })
    }

    /// Phase difference reduced to `[0, 2π)`.
    pub fn reduced_phase(&self) -> f64 {
        self.phase_difference.rem_euclid(2.0 * PI)
    }
}

/// Optical path from a point on the slit plane to a detector.
pub fn path_length(slit_center_x: f64, detector_x: f64, geometry: &Geometry) -> f64 {
    geometry.distance.hypot(detector_x - slit_center_x)
}

/// `r_A(x) − r_B(x)` without cancellation: `((x−d/2)² − (x+d/2)²) / (r_A + r_B)`.
fn slit_path_difference(geometry: &Geometry, x: f64) -> f64 {
    let ra = path_length(geometry.slit_center(Slit::A), x, geometry);
    let rb = path_length(geometry.slit_center(Slit::B), x, geometry);
    -2.0 * geometry.slit_separation * x / (ra + rb)
}

/// Unit amplitude `exp(i k (r_{path1→D1} + r_{path2→D2}))`.
pub fn two_photon_phase(geometry: &Geometry, pair: &DetectorPair, path1: Slit, path2: Slit) -> ComplexAmplitude {
    let r1 = path_length(geometry.slit_center(path1), pair.x1, geometry);
    let r2 = path_length(geometry.slit_center(path2), pair.x2, geometry);
    Complex64::from_polar(1.0, geometry.wavenumber() * (r1 + r2))
}

/// Mixture-weighted point-slit correlation with exact path lengths:
/// `p_α + p_β + p_γ · ½|e^{ik(r_A1+r_B2)} + e^{ik(r_B1+r_A2)}|²`.
///
/// The position-independent part sums to 1 for any normalized mixture, so
/// this equals `1 + p_γ cos(k(r_A1 − r_B1 − r_A2 + r_B2))`.
pub fn g2_point_thermal(geometry: &Geometry, pair: &DetectorPair, mixture: &ThermalMixture) -> f64 {
    // ½|e^{iψ1} + e^{iψ2}|² = 1 + cos(ψ1 − ψ2), with ψ1 − ψ2 built from
    // per-detector slit path differences.
    let delta = geometry.wavenumber() * (slit_path_difference(geometry, pair.x1) - slit_path_difference(geometry, pair.x2));
    mixture.p_alpha + mixture.p_beta + mixture.p_gamma * (1.0 + delta.cos())
}

/// Point-slit SPDC correlation `|e^{ik(r_A1+r_A2)} + e^{i(k(r_B1+r_B2)+Δφ)}|²`, in `[0, 4]`.
pub fn g2_point_spdc(geometry: &Geometry, pair: &DetectorPair, model: &SpdcModel) -> f64 {
    let psi = geometry.wavenumber() * (slit_path_difference(geometry, pair.x1) + slit_path_difference(geometry, pair.x2));
    2.0 + 2.0 * (psi - model.phase_difference).cos()
}

/// `sin(u)/u` with `sinc(0) = 1`.
pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        let u2 = u * u;
        1.0 - u2 / 6.0 + u2 * u2 / 120.0
    } else {
        u.sin() / u
    }
}

/// Coherent double-slit envelope `sinc²(πau/λz) · cos²(πdu/λz)`.
pub fn double_slit_envelope(geometry: &Geometry, u: f64) -> f64 {
    let scale = PI * u / geometry.fringe_scale();
    let s = sinc(geometry.slit_width * scale);
    let c = (geometry.slit_separation * scale).cos();
    s * s * c * c
}

/// Finite-slit thermal pattern `1 + sinc²(πa(x1−x2)/λz) cos²(πd(x1−x2)/λz)`, in `[1, 2]`.
pub fn g2_finite_thermal(geometry: &Geometry, pair: &DetectorPair) -> f64 {
    1.0 + double_slit_envelope(geometry, pair.difference())
}

/// Finite-slit SPDC pattern `sinc²(πa(x1+x2)/λz) cos²(πd(x1+x2)/λz)`, in `[0, 1]`.
pub fn g2_finite_spdc(geometry: &Geometry, pair: &DetectorPair) -> f64 {
    double_slit_envelope(geometry, pair.sum())
}

/// SPDC finite-slit pattern with a pump phase difference `Δφ` on slit B:
/// `sinc²(πa(x1+x2)/λz) cos²(πd(x1+x2)/λz + Δφ/2)`. Equals
/// [`g2_finite_spdc`] at `Δφ = 0`.
pub fn g2_finite_spdc_phased(geometry: &Geometry, pair: &DetectorPair, model: &SpdcModel) -> f64 {
    let scale = PI * pair.sum() / geometry.fringe_scale();
    let s = sinc(geometry.slit_width * scale);
    let c = (geometry.slit_separation * scale + 0.5 * model.phase_difference).cos();
    s * s * c * c
}

/// Classical single-detector pattern of coherent light through the same slits.
pub fn first_order_pattern(geometry: &Geometry, x: f64) -> f64 {
    double_slit_envelope(geometry, x)
}

/// Midpoint nodes across both apertures, slit A first. Each node carries the
/// slit it belongs to.
pub(crate) fn aperture_nodes(geometry: &Geometry, per_slit: usize) -> Vec<(f64, Slit)> {
    let a = geometry.slit_width;
    let mut nodes = Vec::with_capacity(2 * per_slit);
    for slit in [Slit::A, Slit::B] {
        let center = geometry.slit_center(slit);
        for j in 0..per_slit {
            let offset = -0.5 * a + (j as f64 + 0.5) * a / per_slit as f64;
            nodes.push((center + offset, slit));
        }
    }
    nodes
}

/// Fraunhofer phase factor from source point `s` to detector `x`.
pub(crate) fn fraunhofer_factor(geometry: &Geometry, s: f64, x: f64) -> Complex64 {
    Complex64::from_polar(1.0, -geometry.wavenumber() * s * x / geometry.distance)
}

/// Integrates the two-photon amplitudes over both apertures with a midpoint
/// rule of `nodes` points per slit, normalized to the zero-path-difference
/// value.
///
/// Thermal light sums `½|A(s→D1)A(s'→D2) + A(s'→D1)A(s→D2)|²` over every
/// pair of independent source points; SPDC sums the amplitude of both photons
/// leaving the same point, with the pump phase difference on slit B.
pub fn g2_finite_by_quadrature(
    geometry: &Geometry,
    pair: &DetectorPair,
    source: &SourceModel,
    nodes: usize,
) -> Result<f64> {
    if nodes < 2 {
        return Err(Error::TooFewNodes(nodes));
    }
    let points = aperture_nodes(geometry, nodes);
    let to_d1: Vec<Complex64> = points.iter().map(|&(s, _)| fraunhofer_factor(geometry, s, pair.x1)).collect();
    let to_d2: Vec<Complex64> = points.iter().map(|&(s, _)| fraunhofer_factor(geometry, s, pair.x2)).collect();
    let n = points.len() as f64;

    match source {
        SourceModel::Thermal { .. } => {
            let mut total = 0.0;
            for i in 0..points.len() {
                for j in 0..points.len() {
                    let amp = to_d1[i] * to_d2[j] + to_d1[j] * to_d2[i];
                    total += 0.5 * amp.norm_sqr();
                }
            }
            // Each pair contributes 2 at zero path difference.
            Ok(total / (n * n))
        }
        SourceModel::Spdc { model, .. } => {
            let pump_b = Complex64::from_polar(1.0, model.phase_difference);
            let amp: Complex64 = points
                .iter()
                .zip(to_d1.iter().zip(&to_d2))
                .map(|(&(_, slit), (&e1, &e2))| match slit {
                    Slit::A => e1 * e2,
                    Slit::B => e1 * e2 * pump_b,
                })
                .sum();
            Ok(amp.norm_sqr() / (n * n))
        }
    }
}

/// Vertex of the parabola through three points, if it is an extremum inside
/// the bracket.
fn parabolic_vertex(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> Option<f64> {
    let (x0, y0) = p0;
    let (x1, y1) = p1;
    let (x2, y2) = p2;
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curvature = (d12 - d01) / (x2 - x0);
    if !curvature.is_finite() || curvature == 0.0 {
        return None;
    }
    // y = y1 + b (x − x1) + c (x − x1)², with b the slope at x1.
    let b = d01 + curvature * (x1 - x0);
    let xv = x1 - b / (2.0 * curvature);
    if !(x0..=x2).contains(&xv) {
        return None;
    }
    Some(y1 - b * b / (4.0 * curvature))
}

fn refine(samples: &[(f64, f64)], i: usize) -> f64 {
    if i == 0 || i + 1 >= samples.len() {
        return samples[i].1;
    }
    parabolic_vertex(samples[i - 1], samples[i], samples[i + 1]).unwrap_or(samples[i].1)
}

/// Fringe visibility `(max − min)/(max + min)` of the central fringe.
///
/// The maximum is the largest sample; the minimum is the first local minimum
/// reached walking downhill from it on either side (the lower of the two when
/// both sides bracket one). Both extrema are refined by a three-point
/// parabola. Samples must be ordered by position.
pub fn visibility(samples: &[(f64, f64)]) -> Result<f64> {
    if samples.len() < 3 {
        return Err(Error::InsufficientSpan);
    }
    let n = samples.len();
    let imax = samples
        .iter()
        .enumerate()
        .fold(0, |best, (i, s)| if s.1 > samples[best].1 { i } else { best });
    let peak = samples[imax].1;
    let floor = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    if peak - floor <= 1e-15 * peak.abs().max(f64::MIN_POSITIVE) {
        return Ok(0.0);
    }

    let mut minima = Vec::with_capacity(2);
    let mut j = imax;
    while j + 1 < n && samples[j + 1].1 < samples[j].1 {
        j += 1;
    }
    if j > imax && j + 1 < n {
        minima.push(refine(samples, j));
    }
    let mut j = imax;
    while j > 0 && samples[j - 1].1 < samples[j].1 {
        j -= 1;
    }
    if j < imax && j > 0 {
        minima.push(refine(samples, j));
    }
    let min = minima.into_iter().reduce(f64::min).ok_or(Error::InsufficientSpan)?;
    let max = refine(samples, imax);
    Ok(((max - min) / (max + min)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometry() -> Geometry {
        Geometry::default()
    }

    #[test]
    fn geometry_rejects_bad_lengths() {
        assert!(Geometry::new(0.0, 1e-4, 1.0, 6e-7).is_err());
        assert!(Geometry::new(2e-4, 1e-4, 1.0, 6e-7).is_err());
        assert!(Geometry::new(1e-5, 1e-4, -1.0, 6e-7).is_err());
        assert!(Geometry::new(1e-5, 1e-4, 1.0, 0.0).is_err());
        assert!(Geometry::new(1e-5, 1e-4, f64::NAN, 6e-7).is_err());
        assert!(geometry().validate().is_ok());
    }

    #[test]
    fn far_field_predicate() {
        assert!(geometry().is_far_field());
        let near = Geometry {
            distance: 0.1,
            ..geometry()
        };
        assert!(!near.is_far_field());
    }

    #[test]
    fn path_length_examples() {
        let g = Geometry {
            distance: 1.0,
            ..geometry()
        };
        assert_eq!(path_length(0.0, 0.0, &g), 1.0);
        let g4 = Geometry {
            distance: 4.0,
            ..geometry()
        };
        assert!((path_length(0.0, 3.0, &g4) - 5.0).abs() < 1e-15);
        // sqrt(1 + (67.5e-6)^2), evaluated at 40 digits.
        let r = path_length(67.5e-6, 0.0, &g);
        assert!((r - 1.000000002278125).abs() < 1e-15);
        assert!(r >= g.distance);
    }

    #[test]
    fn two_photon_phase_examples() {
        let g = geometry();
        let pair = DetectorPair::new(1e-3, 0.0);
        assert!((two_photon_phase(&g, &pair, Slit::A, Slit::B).norm() - 1.0).abs() < 1e-15);

        let axis = DetectorPair::new(0.0, 0.0);
        let aa = two_photon_phase(&g, &axis, Slit::A, Slit::A);
        let bb = two_photon_phase(&g, &axis, Slit::B, Slit::B);
        assert!((aa - bb).norm() < 1e-12);

        // k (r_A1 + r_A2) = 19858364.98176989173 rad, i.e. 5.96005160661357692
        // mod 2π, from a 50-digit evaluation.
        let expected = Complex64::from_polar(1.0, 5.960_051_606_613_577);
        let got = two_photon_phase(&g, &pair, Slit::A, Slit::A);
        assert!((got - expected).norm() < 1e-7, "{got} vs {expected}");
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn sinc_examples() {
        assert_eq!(sinc(0.0), 1.0);
        assert!(sinc(PI).abs() < 1e-15);
        assert!((sinc(PI / 2.0) - 2.0 / PI).abs() < 1e-15);
        assert!((sinc(PI / 2.0) - 0.636_619_772).abs() < 1e-9);
        // Series branch joins the direct branch smoothly.
        assert!((sinc(0.99e-4) - (0.99e-4f64).sin() / 0.99e-4).abs() < 4e-16);
    }

    #[test]
    fn thermal_point_pattern() {
        let g = geometry();
        let mix = ThermalMixture::equal();
        let peak = g2_point_thermal(&g, &DetectorPair::new(0.7e-3, 0.7e-3), &mix);
        assert!((peak - 4.0 / 3.0).abs() < 1e-12);

        // Dense scan of x1 − x2 with x2 = 0 locates the first minimum.
        let mut best = (0.0, f64::INFINITY);
        let steps = 40_000;
        for i in 0..=steps {
            let u = 4e-3 * i as f64 / steps as f64;
            let v = g2_point_thermal(&g, &DetectorPair::new(u, 0.0), &mix);
            if v < best.1 {
                best = (u, v);
            }
        }
        let expected = g.fringe_scale() / (2.0 * g.slit_separation);
        assert!((best.0 - expected).abs() / expected < 1e-3, "minimum at {}", best.0);
        assert!((peak / best.1 - 2.0).abs() < 1e-6);
    }

    #[test]
    fn thermal_mixture_degeneracies() {
        let g = geometry();
        let none = ThermalMixture::new(0.5, 0.5, 0.0).unwrap();
        for x in [-3e-3, 0.0, 1.1e-3, 2.3e-3] {
            assert!((g2_point_thermal(&g, &DetectorPair::new(x, 0.0), &none) - 1.0).abs() < 1e-15);
        }
        let pure = ThermalMixture::new(0.0, 0.0, 1.0).unwrap();
        let samples: Vec<(f64, f64)> = (0..=400)
            .map(|i| {
                let u = -4e-3 + 8e-3 * i as f64 / 400.0;
                (u, g2_point_thermal(&g, &DetectorPair::new(u, 0.0), &pure))
            })
            .collect();
        assert!((visibility(&samples).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mixture_validation() {
        assert!(ThermalMixture::new(0.5, 0.6, 0.0).is_err());
        assert!(ThermalMixture::new(-0.1, 0.6, 0.5).is_err());
        assert!(ThermalMixture::equal().validate().is_ok());
    }

    #[test]
    fn spdc_point_pattern() {
        let g = geometry();
        let zero = SpdcModel::default();
        let v = g2_point_spdc(&g, &DetectorPair::new(1.3e-3, -1.3e-3), &zero);
        assert!((v - 4.0).abs() < 1e-12);
        let pi = SpdcModel::new(PI).unwrap();
        assert!(g2_point_spdc(&g, &DetectorPair::new(0.4e-3, -0.4e-3), &pi).abs() < 1e-12);
        assert!((SpdcModel::new(-PI / 2.0).unwrap().reduced_phase() - 1.5 * PI).abs() < 1e-15);
    }

    #[test]
    fn finite_thermal_examples() {
        let g = geometry();
        assert_eq!(g2_finite_thermal(&g, &DetectorPair::new(1e-3, 1e-3)), 2.0);
        let zero = g.fringe_scale() / (2.0 * g.slit_separation);
        assert!((g2_finite_thermal(&g, &DetectorPair::new(zero, 0.0)) - 1.0).abs() < 1e-15);
        // 1 + sinc²(0.426954753806451) cos²(1.340439343345835), 40 digits.
        let v = g2_finite_thermal(&g, &DetectorPair::new(2e-3, 0.0));
        assert!((v - 1.049_040_604_777_679_7).abs() < 1e-12);
    }

    #[test]
    fn finite_spdc_examples() {
        let g = geometry();
        assert_eq!(g2_finite_spdc(&g, &DetectorPair::new(2e-3, -2e-3)), 1.0);
        let sinc_zero = g.fringe_scale() / g.slit_width;
        assert!(g2_finite_spdc(&g, &DetectorPair::new(sinc_zero, 0.0)) < 1e-30);

        // Consecutive cos² zeros along x1 + x2, located by dense scan, are one
        // fringe period apart; the maxima sit slightly inside because of the
        // sinc² envelope.
        let steps = 200_000;
        let values: Vec<(f64, f64)> = (0..=steps)
            .map(|i| {
                let u = 12e-3 * i as f64 / steps as f64;
                (u, g2_finite_spdc(&g, &DetectorPair::new(u, 0.0)))
            })
            .collect();
        let minima: Vec<f64> = values
            .windows(3)
            .filter(|w| w[1].1 < w[0].1 && w[1].1 <= w[2].1)
            .map(|w| w[1].0)
            .collect();
        let maxima: Vec<f64> = values
            .windows(3)
            .filter(|w| w[1].1 > w[0].1 && w[1].1 >= w[2].1)
            .map(|w| w[1].0)
            .collect();
        let period = g.first_order_period();
        let step = 12e-3 / steps as f64;
        assert!(minima.len() >= 2, "{minima:?}");
        assert!((minima[1] - minima[0] - period).abs() <= 2.0 * step, "{minima:?}");
        assert!((maxima[0] - period).abs() / period < 0.05, "{maxima:?}");
    }

    #[test]
    fn first_order_examples() {
        let g = geometry();
        assert_eq!(first_order_pattern(&g, 0.0), 1.0);
        assert!(first_order_pattern(&g, g.first_order_period() / 2.0) < 1e-30);
        assert!((g.first_order_period() - 4.687_407_407_407e-3).abs() < 1e-14);
    }

    #[test]
    fn quadrature_rejects_single_node() {
        let g = geometry();
        let src = SourceModel::default_thermal();
        assert!(matches!(
            g2_finite_by_quadrature(&g, &DetectorPair::default(), &src, 1),
            Err(Error::TooFewNodes(1))
        ));
    }

    #[test]
    fn quadrature_thermal_zero_difference_is_two() {
        let g = geometry();
        let src = SourceModel::default_thermal();
        for nodes in [2, 3, 17] {
            let v = g2_finite_by_quadrature(&g, &DetectorPair::new(2.1e-3, 2.1e-3), &src, nodes).unwrap();
            assert!((v - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn visibility_examples() {
        let g = geometry();
        let grid: Vec<f64> = (0..=600).map(|i| -15e-3 + 30e-3 * i as f64 / 600.0).collect();
        let thermal: Vec<(f64, f64)> = grid
            .iter()
            .map(|&u| (u, g2_finite_thermal(&g, &DetectorPair::new(u / 2.0, -u / 2.0))))
            .collect();
        assert!((visibility(&thermal).unwrap() - 1.0 / 3.0).abs() < 1e-6);
        let spdc: Vec<(f64, f64)> = grid
            .iter()
            .map(|&u| (u, g2_finite_spdc(&g, &DetectorPair::new(u / 2.0, u / 2.0))))
            .collect();
        assert!((visibility(&spdc).unwrap() - 1.0).abs() < 1e-6);
        let flat: Vec<(f64, f64)> = grid.iter().map(|&u| (u, 1.5)).collect();
        assert_eq!(visibility(&flat).unwrap(), 0.0);
    }

    #[test]
    fn visibility_needs_a_bracketed_minimum() {
        let ramp: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, i as f64)).collect();
        assert!(matches!(visibility(&ramp), Err(Error::InsufficientSpan)));
        assert!(matches!(visibility(&[(0.0, 1.0), (1.0, 2.0)]), Err(Error::InsufficientSpan)));
    }
}
