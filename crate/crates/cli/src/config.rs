//! Run configuration: JSON schema, validation, and resolution into the
//! concrete inputs the commands consume.
//!
//! A configuration names the optical setup, the measurement settings
//! (explicit or auto-optimized), the input state (from the generation stage
//! or an explicit density matrix), the detector calibration (either ε
//! directly or the physical triple it derives from), the sequence length
//! and the seed. Everything downstream is a pure function of the resolved
//! form, which the reports embed verbatim.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use speqt_core::{
    generation_state, optimize_chsh_settings, ComplexMatrix, DensityState, DetectorSpec,
    DistributionMode, MeasurementSetting, SetupSpec,
};

/// Top-level run configuration, deserialized from a JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optical setup: both splitters, the mirror, and the generation stage.
    pub setup: SetupSpec,
    /// Measurement settings, or the auto-optimization marker.
    pub settings: SettingsConfig,
    /// Input state specification.
    pub state: StateConfig,
    /// Detector calibration.
    pub detector: DetectorConfig,
    /// Number of detection events to simulate.
    pub n_events: usize,
    /// Seed for every stochastic stage; `--seed` overrides it.
    pub seed: u64,
    /// Where `simulate` writes the binary sequence (`--out` overrides).
    #[serde(default)]
    pub sequence_path: Option<PathBuf>,
    /// Where reports go (`--out` overrides); stdout when absent.
    #[serde(default)]
    pub report_path: Option<PathBuf>,
}

/// Either the literal string `"auto-optimize"` or four explicit
/// `[phi, theta]` pairs in the CHSH order `[a₀b₀, a₀b₁, a₁b₀, a₁b₁]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SettingsConfig {
    Mode(String),
    Explicit([[f64; 2]; 4]),
}

/// Either the literal string `"from-generation"` or an explicit 4×4 density
/// matrix, row-major with `[re, im]` entries, over the channel basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateConfig {
    Named(String),
    Matrix([[[f64; 2]; 4]; 4]),
}

/// Detector calibration: either `epsilon` directly, or the physical triple
/// `(efficiency, rate, dead_time)` it derives from. The two forms are
/// mutually exclusive.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub efficiency: Option<f64>,
    #[serde(default)]
    pub rate: Option<f64>,
    #[serde(default)]
    pub dead_time: Option<f64>,
    pub afterpulse_prob: f64,
    pub dcr_fraction: f64,
    #[serde(default)]
    pub afterpulse_window_ratio: f64,
}

/// Detector calibration after resolution, with ε made explicit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedDetector {
    pub epsilon: f64,
    pub afterpulse_prob: f64,
    pub dcr_fraction: f64,
}

impl DetectorConfig {
    /// Derives ε and validates every range, whichever form was given.
    pub fn resolve(&self) -> Result<ResolvedDetector> {
        let epsilon = match (self.epsilon, self.efficiency, self.rate, self.dead_time) {
            (Some(eps), None, None, None) => eps,
            (None, Some(efficiency), Some(rate), Some(dead_time)) => {
                let spec = DetectorSpec {
                    efficiency,
                    rate,
                    dead_time,
                    afterpulse_prob: self.afterpulse_prob,
                    dcr_fraction: self.dcr_fraction,
                    afterpulse_window_ratio: self.afterpulse_window_ratio,
                };
                spec.validate()?;
                spec.epsilon()
            }
            _ => bail!(
                "detector must give either `epsilon` directly or all three of \
                 `efficiency`, `rate`, `dead_time`"
            ),
        };
        if !epsilon.is_finite() || !(0.0..=0.05).contains(&epsilon) {
            bail!("detector epsilon {epsilon} must lie in [0, 0.05]");
        }
        if !self.afterpulse_prob.is_finite() || !(0.0..=0.05).contains(&self.afterpulse_prob) {
            bail!(
                "afterpulse probability {} must lie in [0, 0.05]",
                self.afterpulse_prob
            );
        }
        if !self.dcr_fraction.is_finite() || !(0.0..1.0).contains(&self.dcr_fraction) {
            bail!("dark-count fraction {} must lie in [0, 1)", self.dcr_fraction);
        }
        Ok(ResolvedDetector {
            epsilon,
            afterpulse_prob: self.afterpulse_prob,
            dcr_fraction: self.dcr_fraction,
        })
    }
}

/// The configuration with every derived quantity made explicit; embedded in
/// every config-driven report so a run is reproducible from the report
/// alone.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub setup: SetupSpec,
    pub settings: SettingsConfig,
    pub state: StateConfig,
    pub detector: ResolvedDetector,
    pub n_events: usize,
    pub seed: u64,
}

impl RunConfig {
    /// Reads and parses a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config.setup.validate()?;
        Ok(config)
    }

    /// Validates and resolves the configuration; `seed_override` takes
    /// precedence over the configured seed.
    pub fn resolve(&self, seed_override: Option<u64>) -> Result<ResolvedConfig> {
        self.setup.validate()?;
        let detector = self.detector.resolve()?;
        if let SettingsConfig::Mode(mode) = &self.settings {
            if mode != "auto-optimize" {
                bail!("unknown settings mode {mode:?}; expected \"auto-optimize\"");
            }
        }
        if let StateConfig::Named(name) = &self.state {
            if name != "from-generation" {
                bail!("unknown state {name:?}; expected \"from-generation\"");
            }
        }
        Ok(ResolvedConfig {
            setup: self.setup,
            settings: self.settings.clone(),
            state: self.state.clone(),
            detector,
            n_events: self.n_events,
            seed: seed_override.unwrap_or(self.seed),
        })
    }

    /// The input state: generated by the configured source stage, or the
    /// explicitly given density matrix.
    pub fn resolve_state(&self) -> Result<DensityState> {
        match &self.state {
            StateConfig::Named(name) if name == "from-generation" => {
                Ok(generation_state(&self.setup.gen)?)
            }
            StateConfig::Named(name) => bail!("unknown state {name:?}"),
            StateConfig::Matrix(rows) => {
                let m = ComplexMatrix::from_fn(4, 4, |r, c| {
                    Complex64::new(rows[r][c][0], rows[r][c][1])
                });
                Ok(DensityState::from_matrix(&m)?)
            }
        }
    }

    /// The four measurement settings: as configured, or optimized for the
    /// post-selected CHSH value of the given state through this setup.
    pub fn resolve_settings(&self, rho: &DensityState) -> Result<[MeasurementSetting; 4]> {
        match &self.settings {
            SettingsConfig::Explicit(pairs) => {
                Ok(pairs.map(|[phi, theta]| MeasurementSetting { phi, theta }))
            }
            SettingsConfig::Mode(mode) if mode == "auto-optimize" => {
                let (_, settings) =
                    optimize_chsh_settings(rho, &self.setup, DistributionMode::Real)?;
                Ok(settings)
            }
            SettingsConfig::Mode(mode) => bail!("unknown settings mode {mode:?}"),
        }
    }
}

/// Settings as plain `[phi, theta]` pairs, for report embedding.
pub fn settings_to_pairs(settings: &[MeasurementSetting; 4]) -> [[f64; 2]; 4] {
    settings.map(|s| [s.phi, s.theta])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_json() -> serde_json::Value {
        serde_json::json!({
            "setup": {
                "bs1": {"t_h": 0.70710678, "r_h": 0.70710678,
                         "t_v": 0.70710678, "r_v": 0.70710678},
                "bs2": {"t_h": 0.70710678, "r_h": 0.70710678,
                         "t_v": 0.70710678, "r_v": 0.70710678},
                "mirror": {"eta_h": 1.0, "eta_v": 1.0},
                "gen": {"t_v0": 0.70710678, "r_v0": 0.70710678,
                         "eta_gen": 1.0, "xi": 1.5707963267948966}
            },
            "settings": "auto-optimize",
            "state": "from-generation",
            "detector": {"epsilon": 0.01, "afterpulse_prob": 0.01, "dcr_fraction": 0.0},
            "n_events": 1000,
            "seed": 7
        })
    }

    #[test]
    fn parses_auto_settings_and_generation_state() {
        let config: RunConfig = serde_json::from_value(base_json()).unwrap();
        let resolved = config.resolve(None).unwrap();
        assert_eq!(resolved.seed, 7);
        assert!(matches!(resolved.settings, SettingsConfig::Mode(ref m) if m == "auto-optimize"));
        assert!((resolved.detector.epsilon - 0.01).abs() < 1e-15);
        config.resolve_state().unwrap();
    }

    #[test]
    fn parses_explicit_settings_and_matrix_state() {
        let mut json = base_json();
        json["settings"] = serde_json::json!([[0.1, 0.2], [0.1, 1.2], [2.1, 0.2], [2.1, 1.2]]);
        // Maximally mixed state: 1/4 on the diagonal.
        let mut rows = [[[0.0; 2]; 4]; 4];
        for (k, row) in rows.iter_mut().enumerate() {
            row[k][0] = 0.25;
        }
        json["state"] = serde_json::to_value(rows).unwrap();
        let config: RunConfig = serde_json::from_value(json).unwrap();
        let settings = config
            .resolve_settings(&config.resolve_state().unwrap())
            .unwrap();
        assert!((settings[2].phi - 2.1).abs() < 1e-15);
        assert!((config.resolve_state().unwrap().alpha() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn seed_override_wins() {
        let config: RunConfig = serde_json::from_value(base_json()).unwrap();
        assert_eq!(config.resolve(Some(99)).unwrap().seed, 99);
    }

    #[test]
    fn detector_accepts_the_physical_triple() {
        let mut json = base_json();
        json["detector"] = serde_json::json!({
            "efficiency": 0.5, "rate": 2.0e6, "dead_time": 1.0e-8,
            "afterpulse_prob": 0.02, "dcr_fraction": 0.001
        });
        let config: RunConfig = serde_json::from_value(json).unwrap();
        let det = config.detector.resolve().unwrap();
        // ε = η·λ·T_d.
        assert!((det.epsilon - 0.5 * 2.0e6 * 1.0e-8).abs() < 1e-15);
    }

    #[test]
    fn detector_rejects_mixed_or_missing_forms() {
        let mut json = base_json();
        json["detector"] = serde_json::json!({
            "epsilon": 0.01, "efficiency": 0.5, "rate": 2.0e6, "dead_time": 1.0e-8,
            "afterpulse_prob": 0.01, "dcr_fraction": 0.0
        });
        let config: RunConfig = serde_json::from_value(json).unwrap();
        assert!(config.detector.resolve().is_err());

        let mut json = base_json();
        json["detector"] =
            serde_json::json!({"afterpulse_prob": 0.01, "dcr_fraction": 0.0});
        let config: RunConfig = serde_json::from_value(json).unwrap();
        assert!(config.detector.resolve().is_err());
    }

    #[test]
    fn unknown_fields_and_modes_are_rejected() {
        let mut json = base_json();
        json["extra_knob"] = serde_json::json!(1);
        assert!(serde_json::from_value::<RunConfig>(json).is_err());

        let mut json = base_json();
        json["settings"] = serde_json::json!("optimize-harder");
        let config: RunConfig = serde_json::from_value(json).unwrap();
        assert!(config.resolve(None).is_err());
    }
}
