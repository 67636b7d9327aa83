//! TOML experiment configuration.
//!
//! Every numeric key carries its unit in the name (`pressure_pa`, `power_w`,
//! `kappa_hz`...). Frequencies in the file are ordinary (Hz); internally
//! everything is SI with angular frequencies, converted exactly at this
//! boundary.

use crate::constants::PI2;
use crate::error::{Error, Result};
use crate::fields::{CavityModeSpec, FieldModel, ReflectorSpec, TweezerSpec};
use crate::quantities::{GasSpec, ParticleSpec};
use crate::readout::{DetectionChain, ProbeSpec};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ParticleConfig {
    pub radius_m: f64,
    pub density_kg_m3: f64,
    pub refractive_index: f64,
}

impl Default for ParticleConfig {
    fn default() -> Self {
        ParticleConfig {
            radius_m: 71.5e-9,
            density_kg_m3: 1850.0,
            refractive_index: 1.45,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GasConfig {
    pub pressure_pa: f64,
    pub temperature_k: f64,
    pub molecular_mass_kg: f64,
}

impl Default for GasConfig {
    fn default() -> Self {
        GasConfig {
            pressure_pa: 150.0,
            temperature_k: 300.0,
            molecular_mass_kg: 4.81e-26,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TweezerConfig {
    pub power_w: f64,
    pub wavelength_m: f64,
    pub numerical_aperture: f64,
    pub waist_x_m: f64,
    pub waist_y_m: f64,
    pub focus_position_m: [f64; 3],
}

impl Default for TweezerConfig {
    fn default() -> Self {
        TweezerConfig {
            power_w: 0.150,
            wavelength_m: 1.064e-6,
            numerical_aperture: 0.95,
            // waists and reflectivity fitted so the site-0 linearization
            // reproduces the observed (280.3, 228.3, 444.9) kHz triplet
            waist_x_m: 5.460813e-7,
            waist_y_m: 6.786933e-7,
            // focus at the nominal first lattice site
            focus_position_m: [0.0, 0.0, 380e-9],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ReflectorConfig {
    pub surface_z_m: f64,
    pub amplitude_reflectivity: f64,
    /// First-antinode distance used to calibrate the reflection phase.
    pub first_antinode_m: f64,
    /// Explicit phase override; when set, `first_antinode_m` is ignored.
    pub reflection_phase_rad: Option<f64>,
}

impl Default for ReflectorConfig {
    fn default() -> Self {
        ReflectorConfig {
            surface_z_m: 0.0,
            amplitude_reflectivity: 0.1742162,
            first_antinode_m: 380e-9,
            reflection_phase_rad: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CavityConfig {
    pub resonance_wavelength_m: f64,
    /// Loss rate kappa/2pi [Hz].
    pub kappa_hz: f64,
    /// Effective guided index setting the evanescent decay length.
    pub effective_index: f64,
    /// Explicit field decay length override [m].
    pub decay_length_field_m: Option<f64>,
    pub transverse_sigma_x_m: f64,
    pub transverse_sigma_y_m: f64,
    pub longitudinal_period_m: f64,
    /// Calibration target G_z/2pi at the first lattice site [Hz per m].
    pub gz_hz_per_m: f64,
    /// Explicit shift amplitude override [rad/s].
    pub shift_amplitude_rad_s: Option<f64>,
    pub mode_center_m: [f64; 3],
}

impl Default for CavityConfig {
    fn default() -> Self {
        CavityConfig {
            resonance_wavelength_m: 1538.72e-9,
            kappa_hz: 5.0e9,
            effective_index: 1.6,
            decay_length_field_m: None,
            transverse_sigma_x_m: 0.45e-6,
            transverse_sigma_y_m: 0.30e-6,
            longitudinal_period_m: 0.6e-6,
            gz_hz_per_m: 3.6e15,
            shift_amplitude_rad_s: None,
            mode_center_m: [0.0, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub input_power_w: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            input_power_w: 260e-9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionConfig {
    pub eta_cavity: f64,
    pub eta_path: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            eta_cavity: 0.32,
            eta_path: 0.28125,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub dt_s: f64,
    pub duration_s: f64,
    pub seed: u64,
    pub include_recoil: bool,
    pub gravity: bool,
    /// Keep every n-th integrator step in the stored trajectory.
    pub record_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt_s: 2.0e-8,
            duration_s: 0.1,
            seed: 1,
            include_recoil: false,
            gravity: false,
            record_stride: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectralConfig {
    pub segment_length: usize,
    pub overlap: f64,
    pub window: String,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            segment_length: 1 << 17,
            overlap: 0.5,
            window: "hann".to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceConfig {
    /// Far-field detected power for the per-photon sensitivity comparison [W].
    pub farfield_power_w: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig {
            farfield_power_w: 1.0e-3,
        }
    }
}

/// Optional additive cavity/fiber vibration tone in the homodyne record.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct VibrationConfig {
    pub enabled: bool,
    pub frequency_hz: f64,
    /// Amplitude in shot-noise signal units.
    pub amplitude: f64,
}

impl Default for VibrationConfig {
    fn default() -> Self {
        VibrationConfig {
            enabled: false,
            frequency_hz: 600e3,
            amplitude: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ExperimentConfig {
    pub particle: ParticleConfig,
    pub gas: GasConfig,
    pub tweezer: TweezerConfig,
    pub reflector: ReflectorConfig,
    pub cavity: CavityConfig,
    pub probe: ProbeConfig,
    pub detection: DetectionConfig,
    pub sim: SimConfig,
    pub spectral: SpectralConfig,
    pub reference: ReferenceConfig,
    pub vibration: VibrationConfig,
}

/// One validation finding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
    Defaulted,
}

#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

impl ExperimentConfig {
    /// The complete paper-parameter configuration shipped with the tool.
    pub fn paper_default() -> Self {
        ExperimentConfig::default()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 over the canonical serialized config (hex).
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml_string().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn particle_spec(&self) -> Result<ParticleSpec> {
        ParticleSpec::new(
            self.particle.radius_m,
            self.particle.density_kg_m3,
            self.particle.refractive_index,
        )
    }

    pub fn gas_spec(&self) -> Result<GasSpec> {
        GasSpec::new(
            self.gas.pressure_pa,
            self.gas.temperature_k,
            self.gas.molecular_mass_kg,
        )
    }

    pub fn probe_spec(&self) -> Result<ProbeSpec> {
        ProbeSpec::new(self.probe.input_power_w, self.cavity.resonance_wavelength_m)
    }

    pub fn detection_chain(&self) -> Result<DetectionChain> {
        DetectionChain::new(self.detection.eta_cavity, self.detection.eta_path)
    }

    pub fn field_model(&self) -> Result<FieldModel> {
        let t = &self.tweezer;
        let tweezer = TweezerSpec {
            power: t.power_w,
            wavelength: t.wavelength_m,
            numerical_aperture: t.numerical_aperture,
            waist_x: t.waist_x_m,
            waist_y: t.waist_y_m,
            focus_position: Vector3::from(t.focus_position_m),
        };
        let phase = self.reflector.reflection_phase_rad.unwrap_or_else(|| {
            ReflectorSpec::phase_for_first_antinode(self.reflector.first_antinode_m, t.wavelength_m)
        });
        let reflector = ReflectorSpec {
            surface_z: self.reflector.surface_z_m,
            amplitude_reflectivity: self.reflector.amplitude_reflectivity,
            reflection_phase: phase,
        };
        let c = &self.cavity;
        let decay = match c.decay_length_field_m {
            Some(d) => d,
            None => CavityModeSpec::decay_length_from_index(
                c.resonance_wavelength_m,
                c.effective_index,
            )?,
        };
        let mut cavity = CavityModeSpec {
            resonance_wavelength: c.resonance_wavelength_m,
            kappa: PI2 * c.kappa_hz,
            decay_length_field: decay,
            transverse_sigma_x: c.transverse_sigma_x_m,
            transverse_sigma_y: c.transverse_sigma_y_m,
            longitudinal_period: c.longitudinal_period_m,
            shift_amplitude: 0.0,
            mode_center: Vector3::from(c.mode_center_m),
        };
        cavity.shift_amplitude = match c.shift_amplitude_rad_s {
            Some(a) => a,
            None => {
                cavity.shift_amplitude_for_gz(PI2 * c.gz_hz_per_m, self.reflector.first_antinode_m)
            }
        };
        FieldModel::new(tweezer, reflector, cavity)
    }

    /// Full schema validation of a TOML document: per-field diagnostics,
    /// unknown keys as warnings, defaulted fields listed. Never mutates files.
    pub fn validate_toml(text: &str) -> Result<(Option<Self>, Vec<Diagnostic>)> {
        let value: toml::Value = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        let mut diags = Vec::new();

        let schema = Self::schema();
        if let toml::Value::Table(sections) = &value {
            for (section, v) in sections {
                match schema.iter().find(|(name, _)| name == section) {
                    None => diags.push(Diagnostic {
                        severity: Severity::Warning,
                        path: section.clone(),
                        message: "unknown section (ignored)".into(),
                    }),
                    Some((_, keys)) => {
                        if let toml::Value::Table(table) = v {
                            for key in table.keys() {
                                if !keys.contains(&key.as_str()) {
                                    diags.push(Diagnostic {
                                        severity: Severity::Warning,
                                        path: format!("{section}.{key}"),
                                        message: "unknown key (ignored)".into(),
                                    });
                                }
                            }
                            for key in keys.iter() {
                                if !table.contains_key(*key) {
                                    diags.push(Diagnostic {
                                        severity: Severity::Defaulted,
                                        path: format!("{section}.{key}"),
                                        message: "using default".into(),
                                    });
                                }
                            }
                        }
                    }
                }
            }
            for (section, keys) in &schema {
                if !sections.contains_key(*section) {
                    for key in keys.iter() {
                        diags.push(Diagnostic {
                            severity: Severity::Defaulted,
                            path: format!("{section}.{key}"),
                            message: "using default".into(),
                        });
                    }
                }
            }
        }

        let cfg: ExperimentConfig = match toml::from_str(text) {
            Ok(c) => c,
            Err(e) => {
                diags.push(Diagnostic {
                    severity: Severity::Error,
                    path: String::new(),
                    message: e.to_string(),
                });
                return Ok((None, diags));
            }
        };
        let mut check = |path: &str, r: Result<()>| {
            if let Err(e) = r {
                diags.push(Diagnostic {
                    severity: Severity::Error,
                    path: path.to_string(),
                    message: e.to_string(),
                });
            }
        };
        check("particle", cfg.particle_spec().map(|_| ()));
        check("gas", cfg.gas_spec().map(|_| ()));
        check("tweezer/reflector/cavity", cfg.field_model().map(|_| ()));
        check("probe", cfg.probe_spec().map(|_| ()));
        check("detection", cfg.detection_chain().map(|_| ()));
        if !(cfg.sim.dt_s > 0.0) {
            check("sim.dt_s", Err(Error::config("dt_s must be > 0")));
        }
        if cfg.sim.duration_s < cfg.sim.dt_s {
            check("sim.duration_s", Err(Error::config("duration_s must be >= dt_s")));
        }
        if cfg.sim.record_stride == 0 {
            check("sim.record_stride", Err(Error::config("record_stride must be >= 1")));
        }
        if !(0.0..=0.9).contains(&cfg.spectral.overlap) {
            check("spectral.overlap", Err(Error::config("overlap must be in [0, 0.9]")));
        }
        let ok = !diags.iter().any(|d| d.severity == Severity::Error);
        Ok((if ok { Some(cfg) } else { None }, diags))
    }

    fn schema() -> Vec<(&'static str, Vec<&'static str>)> {
        vec![
            ("particle", vec!["radius_m", "density_kg_m3", "refractive_index"]),
            ("gas", vec!["pressure_pa", "temperature_k", "molecular_mass_kg"]),
            (
                "tweezer",
                vec![
                    "power_w",
                    "wavelength_m",
                    "numerical_aperture",
                    "waist_x_m",
                    "waist_y_m",
                    "focus_position_m",
                ],
            ),
            (
                "reflector",
                vec![
                    "surface_z_m",
                    "amplitude_reflectivity",
                    "first_antinode_m",
                    "reflection_phase_rad",
                ],
            ),
            (
                "cavity",
                vec![
                    "resonance_wavelength_m",
                    "kappa_hz",
                    "effective_index",
                    "decay_length_field_m",
                    "transverse_sigma_x_m",
                    "transverse_sigma_y_m",
                    "longitudinal_period_m",
                    "gz_hz_per_m",
                    "shift_amplitude_rad_s",
                    "mode_center_m",
                ],
            ),
            ("probe", vec!["input_power_w"]),
            ("detection", vec!["eta_cavity", "eta_path"]),
            (
                "sim",
                vec![
                    "dt_s",
                    "duration_s",
                    "seed",
                    "include_recoil",
                    "gravity",
                    "record_stride",
                ],
            ),
            ("spectral", vec!["segment_length", "overlap", "window"]),
            ("reference", vec!["farfield_power_w"]),
            ("vibration", vec!["enabled", "frequency_hz", "amplitude"]),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let text = ExperimentConfig::paper_default().to_toml_string();
        let (cfg, diags) = ExperimentConfig::validate_toml(&text).unwrap();
        assert!(cfg.is_some());
        assert!(!diags.iter().any(|d| d.severity == Severity::Error), "{diags:?}");
    }

    #[test]
    fn negative_radius_is_a_single_particle_error() {
        let text = "[particle]\nradius_m = -1e-9\n";
        let (cfg, diags) = ExperimentConfig::validate_toml(text).unwrap();
        assert!(cfg.is_none());
        let errors: Vec<_> = diags
            .iter()
            .filter(|d| d.severity == Severity::Error)
            .collect();
        assert_eq!(errors.len(), 1);
        assert!(errors[0].path.contains("particle"));
    }

    #[test]
    fn unknown_key_is_warning_not_error() {
        let text = "[particle]\nradius_m = 71.5e-9\nflavor = \"vanilla\"\n";
        let (cfg, diags) = ExperimentConfig::validate_toml(text).unwrap();
        assert!(cfg.is_some());
        assert!(diags
            .iter()
            .any(|d| d.severity == Severity::Warning && d.path == "particle.flavor"));
    }

    #[test]
    fn hash_is_deterministic_and_sensitive() {
        let a = ExperimentConfig::paper_default();
        let mut b = ExperimentConfig::paper_default();
        assert_eq!(a.hash(), b.hash());
        b.gas.pressure_pa = 151.0;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn roundtrip_through_toml() {
        let a = ExperimentConfig::paper_default();
        let b = ExperimentConfig::from_toml_str(&a.to_toml_string()).unwrap();
        assert_eq!(a.hash(), b.hash());
    }
}
