//! Closed-form physical quantities and environment rates.
//!
//! Everything here is a pure function of its arguments. Power spectral
//! densities are one-sided in ordinary frequency f: integrating S(f) over
//! f in [0, inf) gives the variance.

use crate::constants::{C, EPS0, HBAR, KB};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Dielectric nanosphere.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ParticleSpec {
    /// Radius [m].
    pub radius: f64,
    /// Mass density [kg/m^3].
    pub density: f64,
    /// Refractive index at the trap wavelength.
    pub refractive_index: f64,
}

impl ParticleSpec {
    pub fn new(radius: f64, density: f64, refractive_index: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(Error::domain("particle radius must be >= 0"));
        }
        if !(density > 0.0) {
            return Err(Error::domain("particle density must be > 0"));
        }
        if !(refractive_index >= 1.0) {
            return Err(Error::domain("refractive index must be >= 1"));
        }
        Ok(ParticleSpec {
            radius,
            density,
            refractive_index,
        })
    }

    pub fn mass(&self) -> f64 {
        particle_mass(self)
    }

    pub fn polarizability(&self) -> f64 {
        polarizability(self)
    }
}

/// Residual gas bath.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GasSpec {
    /// Pressure [Pa].
    pub pressure: f64,
    /// Bath temperature [K].
    pub temperature: f64,
    /// Mean molecular mass [kg].
    pub molecular_mass: f64,
}

impl GasSpec {
    pub fn new(pressure: f64, temperature: f64, molecular_mass: f64) -> Result<Self> {
        if !(pressure >= 0.0) {
            return Err(Error::domain("gas pressure must be >= 0"));
        }
        if !(temperature > 0.0) {
            return Err(Error::domain("gas temperature must be > 0"));
        }
        if !(molecular_mass > 0.0) {
            return Err(Error::domain("molecular mass must be > 0"));
        }
        Ok(GasSpec {
            pressure,
            temperature,
            molecular_mass,
        })
    }
}

/// Derived figures of merit for the full platform.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MeritReport {
    /// Zero-point fluctuation along z [m].
    pub z_zpf: f64,
    /// Thermal phonon occupation.
    pub n_th: f64,
    /// Quantum cooperativity.
    pub c_q: f64,
    /// Asymptotic minimum detection efficiency for feedback ground-state
    /// cooling (the C_q -> inf limit, 1/9).
    pub eta_min: f64,
    /// Detection-efficiency threshold at the current cooperativity, clipped
    /// to 1 when cooling is impossible.
    pub eta_min_current: f64,
    /// True when the current-cooperativity threshold exceeds unity.
    pub cooling_impossible: bool,
    /// Thermal force noise, recoil-limited damping [N/sqrt(Hz)].
    pub force_noise: f64,
    /// Gas damping rate [rad/s].
    pub gamma_gas: f64,
    /// Recoil-equivalent damping rate [rad/s].
    pub gamma_recoil_equiv: f64,
}

/// m = (4/3) pi r^3 rho
pub fn particle_mass(spec: &ParticleSpec) -> f64 {
    4.0 / 3.0 * PI * spec.radius.powi(3) * spec.density
}

/// Rayleigh (Clausius-Mossotti) polarizability: alpha = 4 pi eps0 r^3 (n^2-1)/(n^2+2) [F m^2].
pub fn polarizability(spec: &ParticleSpec) -> f64 {
    let n2 = spec.refractive_index * spec.refractive_index;
    4.0 * PI * EPS0 * spec.radius.powi(3) * (n2 - 1.0) / (n2 + 2.0)
}

/// Epstein free-molecular drag rate [rad/s].
///
/// Gamma = (8/3)(1 + pi/8) (p pi r^2 / m) sqrt(2 m_gas / (pi kB T))
pub fn gas_damping(gas: &GasSpec, particle: &ParticleSpec) -> f64 {
    let m = particle_mass(particle);
    if m == 0.0 {
        return 0.0;
    }
    (8.0 / 3.0)
        * (1.0 + PI / 8.0)
        * (gas.pressure * PI * particle.radius * particle.radius / m)
        * (2.0 * gas.molecular_mass / (PI * KB * gas.temperature)).sqrt()
}

/// Rayleigh scattering cross section sigma_s = (8 pi / 3) k^4 (alpha / 4 pi eps0)^2 [m^2].
pub fn scattering_cross_section(particle: &ParticleSpec, wavelength: f64) -> f64 {
    let k = 2.0 * PI / wavelength;
    let alpha_cgs = polarizability(particle) / (4.0 * PI * EPS0);
    (8.0 * PI / 3.0) * k.powi(4) * alpha_cgs * alpha_cgs
}

/// Scattered power of a Rayleigh particle in intensity `intensity` [W].
pub fn scattered_power(particle: &ParticleSpec, wavelength: f64, intensity: f64) -> f64 {
    scattering_cross_section(particle, wavelength) * intensity
}

/// One-sided photon-recoil force PSD [N^2/Hz].
///
/// S_FF = (2/5) hbar k P_scatt / c, with the 2/5 dipole geometry factor for
/// motion perpendicular to the polarization.
pub fn recoil_force_psd(scattered_power: f64, wavelength: f64) -> f64 {
    let k = 2.0 * PI / wavelength;
    0.4 * HBAR * k * scattered_power / C
}

/// Recoil-equivalent damping rate [rad/s]: the white recoil force rethermalizes
/// the oscillator at rate Gamma_rec = (S_FF z_zpf^2 / hbar^2) / n_th.
pub fn recoil_equivalent_damping(s_ff: f64, m: f64, omega: f64, temperature: f64) -> Result<f64> {
    let z = zpf(m, omega)?;
    let heating = s_ff * z * z / (HBAR * HBAR);
    let n = thermal_occupation(temperature, omega)?;
    if n == 0.0 {
        return Err(Error::domain("zero thermal occupation"));
    }
    Ok(heating / n)
}

/// Zero-point fluctuation z_zpf = sqrt(hbar / (2 m Omega)) [m].
pub fn zpf(m: f64, omega: f64) -> Result<f64> {
    if !(m > 0.0) || !(omega > 0.0) {
        return Err(Error::domain("zpf requires m > 0 and omega > 0"));
    }
    Ok((HBAR / (2.0 * m * omega)).sqrt())
}

/// Thermal occupation in the high-temperature (Rayleigh-Jeans) form kB T / (hbar Omega).
pub fn thermal_occupation(temperature: f64, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::domain("thermal_occupation requires omega > 0"));
    }
    if temperature < 0.0 {
        return Err(Error::domain("temperature must be >= 0"));
    }
    Ok(KB * temperature / (HBAR * omega))
}

/// Quantum cooperativity C_q = 4 g0^2 n_cav / (kappa Gamma_m n_th).
///
/// All rates must share one convention (all angular or all ordinary); the 2 pi
/// factors cancel in the ratio.
pub fn cooperativity(g0: f64, n_cav: f64, kappa: f64, gamma_m: f64, n_th: f64) -> Result<f64> {
    if !(kappa > 0.0) || !(gamma_m > 0.0) || !(n_th > 0.0) {
        return Err(Error::domain(
            "cooperativity requires kappa, gamma_m, n_th > 0",
        ));
    }
    Ok(4.0 * g0 * g0 * n_cav / (kappa * gamma_m * n_th))
}

/// Minimum detection efficiency for feedback ground-state cooling,
/// eta_min = (1 + 1/C_q) / 9. Returns `(eta_min, clipped)`: when the threshold
/// exceeds unity it is reported as 1 with `clipped = true` (cooling impossible).
pub fn feedback_threshold(c_q: f64) -> Result<(f64, bool)> {
    if !(c_q > 0.0) {
        return Err(Error::domain("feedback_threshold requires C_q > 0"));
    }
    let eta = (1.0 + 1.0 / c_q) / 9.0;
    if eta > 1.0 {
        Ok((1.0, true))
    } else {
        Ok((eta, false))
    }
}

/// Thermal force noise sqrt(4 kB T m Gamma) [N/sqrt(Hz)] (one-sided).
pub fn force_noise(temperature: f64, m: f64, gamma: f64) -> f64 {
    (4.0 * KB * temperature * m * gamma).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const R: f64 = 71.5e-9;
    const RHO: f64 = 1850.0;

    fn silica() -> ParticleSpec {
        ParticleSpec::new(R, RHO, 1.45).unwrap()
    }

    #[test]
    fn mass_examples() {
        let z = ParticleSpec::new(0.0, RHO, 1.45).unwrap();
        assert_eq!(particle_mass(&z), 0.0);
        assert_relative_eq!(particle_mass(&silica()), 2.8325557288725526e-18, max_relative = 1e-12);
        let big = ParticleSpec::new(100e-9, 2000.0, 1.45).unwrap();
        assert_relative_eq!(particle_mass(&big), 8.37758040957278e-18, max_relative = 1e-12);
    }

    #[test]
    fn polarizability_examples() {
        let matched = ParticleSpec::new(R, RHO, 1.0).unwrap();
        assert_eq!(polarizability(&matched), 0.0);
        assert_relative_eq!(polarizability(&silica()), 1.092966190268703e-32, max_relative = 1e-12);
        // cubic scaling
        let doubled = ParticleSpec::new(2.0 * R, RHO, 1.45).unwrap();
        assert_relative_eq!(
            polarizability(&doubled),
            8.0 * polarizability(&silica()),
            max_relative = 1e-12
        );
    }

    #[test]
    fn gas_damping_examples() {
        let p = silica();
        let vac = GasSpec::new(0.0, 300.0, 4.81e-26).unwrap();
        assert_eq!(gas_damping(&vac, &p), 0.0);
        let mbar15 = GasSpec::new(150.0, 300.0, 4.81e-26).unwrap();
        let g = gas_damping(&mbar15, &p);
        assert_relative_eq!(g / (2.0 * PI), 1366.88, max_relative = 1e-3);
        // linear in pressure
        let tenth = GasSpec::new(15.0, 300.0, 4.81e-26).unwrap();
        assert_relative_eq!(gas_damping(&tenth, &p), g / 10.0, max_relative = 1e-12);
    }

    #[test]
    fn recoil_chain_reproduces_paper_scale() {
        let p = silica();
        assert_eq!(recoil_force_psd(0.0, 1.064e-6), 0.0);
        // 150 mW, round 0.5 um waist
        let intensity = 2.0 * 0.150 / (PI * 0.5e-6 * 0.5e-6);
        assert_relative_eq!(intensity, 3.8197e11, max_relative = 1e-4);
        let p_scatt = scattered_power(&p, 1.064e-6, intensity);
        assert_relative_eq!(p_scatt, 3.7549e-5, max_relative = 1e-4);
        let s_ff = recoil_force_psd(p_scatt, 1.064e-6);
        assert_relative_eq!(s_ff, 3.11999e-41, max_relative = 1e-4);
        // linearity
        assert_relative_eq!(
            recoil_force_psd(2.0 * p_scatt, 1.064e-6),
            2.0 * s_ff,
            max_relative = 1e-12
        );
        // recoil-equivalent linewidth ~ 2 pi x 2e-4 Hz
        let m = particle_mass(&p);
        let omega = 2.0 * PI * 444.9e3;
        let g_rec = recoil_equivalent_damping(s_ff, m, omega, 300.0).unwrap();
        assert_relative_eq!(g_rec / (2.0 * PI), 2.116e-4, max_relative = 1e-3);
    }

    #[test]
    fn zpf_examples() {
        let m = particle_mass(&silica());
        let omega = 2.0 * PI * 444.9e3;
        let z = zpf(m, omega).unwrap();
        assert_relative_eq!(z, 2.5805525889703893e-12, max_relative = 1e-12);
        // inverse-sqrt scaling
        assert_relative_eq!(zpf(m, 4.0 * omega).unwrap(), z / 2.0, max_relative = 1e-12);
        // g0 = z_zpf G_z reproduces the paper value
        let g_z = 2.0 * PI * 3.6e15;
        assert_relative_eq!(z * g_z / (2.0 * PI), 9290.0, max_relative = 1e-3);
        assert!(zpf(0.0, omega).is_err());
        assert!(zpf(m, -1.0).is_err());
    }

    #[test]
    fn thermal_occupation_examples() {
        let omega = 2.0 * PI * 444.9e3;
        assert_eq!(thermal_occupation(0.0, omega).unwrap(), 0.0);
        let n = thermal_occupation(300.0, omega).unwrap();
        assert_relative_eq!(n, 1.4050316e7, max_relative = 1e-6);
        assert_relative_eq!(
            thermal_occupation(600.0, omega).unwrap(),
            2.0 * n,
            max_relative = 1e-12
        );
    }

    #[test]
    fn cooperativity_examples() {
        let n_th = 1.4050316342612656e7;
        let cq = cooperativity(9.3e3, 800.0, 5e9, 1e3, n_th).unwrap();
        assert_relative_eq!(cq, 3.9397e-9, max_relative = 1e-4);
        assert_relative_eq!(
            cooperativity(2.0 * 9.3e3, 800.0, 5e9, 1e3, n_th).unwrap(),
            4.0 * cq,
            max_relative = 1e-12
        );
        assert_eq!(cooperativity(9.3e3, 0.0, 5e9, 1e3, n_th).unwrap(), 0.0);
        // invariant under ordinary <-> angular conversion of all rates
        let two_pi = 2.0 * PI;
        let cq_ang =
            cooperativity(two_pi * 9.3e3, 800.0, two_pi * 5e9, two_pi * 1e3, n_th).unwrap();
        assert_relative_eq!(cq_ang, cq, max_relative = 1e-12);
        assert!(cooperativity(1.0, 1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn feedback_threshold_examples() {
        let (eta, clip) = feedback_threshold(1e18).unwrap();
        assert!((eta - 1.0 / 9.0).abs() < 1e-12);
        assert!(!clip);
        let (eta, clip) = feedback_threshold(1.0).unwrap();
        assert_relative_eq!(eta, 2.0 / 9.0, max_relative = 1e-12);
        assert!(!clip);
        let (eta, clip) = feedback_threshold(0.125).unwrap();
        assert_relative_eq!(eta, 1.0, max_relative = 1e-12);
        assert!(!clip);
        let (eta, clip) = feedback_threshold(0.1).unwrap();
        assert_eq!(eta, 1.0);
        assert!(clip);
        assert!(feedback_threshold(0.0).is_err());
        // strictly decreasing, bounded below by 1/9
        let mut prev = f64::INFINITY;
        for cq in [0.2, 0.5, 1.0, 10.0, 1e6] {
            let (eta, _) = feedback_threshold(cq).unwrap();
            assert!(eta < prev && eta >= 1.0 / 9.0);
            prev = eta;
        }
    }

    #[test]
    fn force_noise_examples() {
        let m = particle_mass(&silica());
        assert_eq!(force_noise(300.0, m, 0.0), 0.0);
        assert_relative_eq!(force_noise(300.0, m, 1.33e-3), 7.9e-21, max_relative = 1e-2);
        assert_relative_eq!(force_noise(300.0, m, 8.6e3), 2.009e-17, max_relative = 1e-3);
        // half-power scaling in gamma
        assert_relative_eq!(
            force_noise(300.0, m, 4.0),
            2.0 * force_noise(300.0, m, 1.0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(ParticleSpec::new(-1.0, RHO, 1.45).is_err());
        assert!(ParticleSpec::new(R, 0.0, 1.45).is_err());
        assert!(ParticleSpec::new(R, RHO, 0.9).is_err());
        assert!(GasSpec::new(-1.0, 300.0, 4.81e-26).is_err());
        assert!(GasSpec::new(100.0, 0.0, 4.81e-26).is_err());
    }
}
