//! Calibration chain: thermal-noise displacement calibration, shot-noise
//! referenced coupling extraction, and the single-photon coupling.
//!
//! The method: fit the mechanical peak of the (signal-unit) spectrum, anchor
//! the peak area to the equipartition variance k_B T / (m Omega0^2) to get
//! the meters-per-signal-unit scale c, then invert the displacement-equivalent
//! shot-noise floor c^2 * S_floor to read off G.

use crate::constants::KB;
use crate::error::{Error, Result};
use crate::quantities::zpf;
use crate::readout::{DetectionChain, HomodyneRecord, ProbeSpec};
use crate::spectral::{fit_lorentzian, welch, LorentzianFit, Psd, Window};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// Displacement scale c [m per signal unit].
    pub meters_per_unit: f64,
    /// Extracted coupling G [rad/s per m].
    pub g_extracted: f64,
    /// Extracted single-photon coupling g0 [rad/s].
    pub g0_extracted: f64,
    /// Shot-noise-floor displacement sensitivity [m/sqrt(Hz)].
    pub sensitivity: f64,
    /// Probe-power advantage over the far-field reference at equal floor.
    pub per_photon_power_ratio: f64,
    /// The mechanical-peak fit the calibration is anchored to.
    pub fit: LorentzianFit,
}

impl CalibrationResult {
    pub fn omega0(&self) -> f64 {
        self.fit.omega0
    }
}

/// Displacement scale from equipartition: c^2 = (k_B T / (m Omega0^2)) / area.
pub fn thermal_calibrate(fit: &LorentzianFit, temperature: f64, mass: f64) -> Result<f64> {
    if !(fit.area > 0.0) {
        return Err(Error::fit("negative area"));
    }
    if !(temperature > 0.0 && mass > 0.0) {
        return Err(Error::domain("temperature and mass must be > 0"));
    }
    Ok((KB * temperature / (mass * fit.omega0 * fit.omega0) / fit.area).sqrt())
}

/// Coupling from the calibrated shot-noise floor:
/// G = (kappa/4) sqrt(1 / (eta Phi * c^2 * floor)).
pub fn extract_g(
    floor_units: f64,
    meters_per_unit: f64,
    probe: &ProbeSpec,
    chain: &DetectionChain,
    kappa: f64,
) -> Result<f64> {
    if !(floor_units > 0.0) || !floor_units.is_finite() {
        return Err(Error::fit("floor not resolvable"));
    }
    let eta_flux = chain.eta_total() * probe.photon_flux();
    if !(eta_flux > 0.0) {
        return Err(Error::domain("eta * flux must be > 0"));
    }
    let s_floor_m2 = meters_per_unit * meters_per_unit * floor_units;
    Ok(kappa / 4.0 * (1.0 / (eta_flux * s_floor_m2)).sqrt())
}

/// g0 = z_zpf(m, Omega0) * G.
pub fn extract_g0(g: f64, mass: f64, omega0: f64) -> Result<f64> {
    if g < 0.0 {
        return Err(Error::domain("G must be >= 0"));
    }
    Ok(zpf(mass, omega0)? * g)
}

/// Median PSD level inside [f_lo, f_hi] — a robust shot-floor estimate away
/// from the mechanical peaks.
pub fn noise_floor(psd: &Psd, f_lo: f64, f_hi: f64) -> Result<f64> {
    let mut band: Vec<f64> = psd
        .frequencies
        .iter()
        .zip(&psd.values)
        .filter(|(f, _)| **f >= f_lo && **f <= f_hi)
        .map(|(_, v)| *v)
        .collect();
    if band.len() < 16 {
        return Err(Error::fit("floor not resolvable"));
    }
    band.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(band[band.len() / 2])
}

/// Full chain on one homodyne record: PSD -> peak fit in `peak_band` ->
/// thermal calibration -> floor in `floor_band` -> G, g0, sensitivity.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_record(
    record: &HomodyneRecord,
    segment_length: usize,
    peak_band: (f64, f64),
    floor_band: (f64, f64),
    temperature: f64,
    mass: f64,
    probe: &ProbeSpec,
    chain: &DetectionChain,
    kappa: f64,
    reference_power: f64,
) -> Result<CalibrationResult> {
    let psd = welch(&record.samples, record.dt, segment_length, 0.5, Window::Hann)?;
    let fit = fit_lorentzian(&psd, peak_band.0, peak_band.1)?;
    let c = thermal_calibrate(&fit, temperature, mass)?;
    let floor = noise_floor(&psd, floor_band.0, floor_band.1)?;
    let g = extract_g(floor, c, probe, chain, kappa)?;
    let g0 = extract_g0(g, mass, fit.omega0)?;
    let sensitivity = c * floor.sqrt();
    Ok(CalibrationResult {
        meters_per_unit: c,
        g_extracted: g,
        g0_extracted: g0,
        sensitivity,
        per_photon_power_ratio: reference_power / probe.input_power,
        fit,
    })
}
