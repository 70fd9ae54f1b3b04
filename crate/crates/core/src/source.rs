//! Light source models shared by every engine.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{DetectorPair, SpdcModel, ThermalMixture};

/// Stochastic model of the pseudo-thermal source: independent complex
/// Gaussian sub-sources spread uniformly over each slit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSourceConfig {
    pub subsources_per_slit: usize,
    /// Field coherence time `τ_c` in seconds.
    pub coherence_time: f64,
    pub mean_intensity: f64,
    pub seed: u64,
}

impl Default for ThermalSourceConfig {
    fn default() -> Self {
        Self {
            subsources_per_slit: 32,
            coherence_time: 200e-9,
            mean_intensity: 1.0,
            seed: 0,
        }
    }
}

impl ThermalSourceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subsources_per_slit < 1 {
            return Err(Error::InvalidConfig("subsources_per_slit must be ≥ 1".into()));
        }
        if !(self.coherence_time > 0.0 && self.coherence_time.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "coherence time {} must be > 0",
                self.coherence_time
            )));
        }
        if !(self.mean_intensity > 0.0 && self.mean_intensity.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "mean intensity {} must be > 0",
                self.mean_intensity
            )));
        }
        Ok(())
    }

    pub fn coherence_time_ns(&self) -> f64 {
        self.coherence_time * 1e9
    }

    pub fn total_subsources(&self) -> usize {
        2 * self.subsources_per_slit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Thermal,
    Spdc,
}

impl SourceKind {
    /// The detector coordinate the far-field pattern depends on:
    /// `x1 − x2` for thermal light, `x1 + x2` for SPDC.
    pub fn pattern_variable(&self, pair: &DetectorPair) -> f64 {
        match self {
            SourceKind::Thermal => pair.difference(),
            SourceKind::Spdc => pair.sum(),
        }
    }

    /// Detector pair placing the pattern variable at `u` symmetrically about
    /// the axis.
    pub fn pair_for(&self, u: f64) -> DetectorPair {
        match self {
            SourceKind::Thermal => DetectorPair::new(0.5 * u, -0.5 * u),
            SourceKind::Spdc => DetectorPair::new(0.5 * u, 0.5 * u),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SourceKind::Thermal => "thermal",
            SourceKind::Spdc => "spdc",
        }
    }
}

/// Either a pseudo-thermal source or an entangled-pair source.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceModel {
    Thermal {
        mixture: ThermalMixture,
        config: ThermalSourceConfig,
    },
    Spdc {
        model: SpdcModel,
        /// Pair emission rate in pairs per second.
        pair_rate: f64,
    },
}

impl SourceModel {
    pub fn default_thermal() -> Self {
        SourceModel::Thermal {
            mixture: ThermalMixture::equal(),
            config: ThermalSourceConfig::default(),
        }
    }

    pub fn default_spdc() -> Self {
        SourceModel::Spdc {
            model: SpdcModel::default(),
            pair_rate: 5_000.0,
        }
    }

    pub fn kind(&self) -> SourceKind {
        match self {
            SourceModel::Thermal { .. } => SourceKind::Thermal,
            SourceModel::Spdc { .. } => SourceKind::Spdc,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SourceModel::Thermal { mixture, config } => {
                mixture.validate()?;
                config.validate()
            }
            SourceModel::Spdc { model, pair_rate } => {
                SpdcModel::new(model.phase_difference)?;
                if !(*pair_rate > 0.0 && pair_rate.is_finite()) {
                    return Err(Error::InvalidConfig(format!("pair rate {pair_rate} must be > 0")));
                }
                Ok(())
            }
        }
    }
}
