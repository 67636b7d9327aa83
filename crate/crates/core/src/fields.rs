//! Analytic optical field models.
//!
//! Geometry: the tweezer beam propagates along -z towards the reflector
//! surface at `z = surface_z`; the particle lives at `z > surface_z`. The
//! standing wave is the interference of the incident elliptical Gaussian with
//! its mirror image about the surface, so the lattice is phase-locked to the
//! surface, not to the focus. The cavity mode contributes a separable
//! evanescent profile whose dispersive shift and gradient are evaluated
//! analytically.

use crate::error::{Error, Result};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Focused tweezer beam (scalar elliptical Gaussian, no astigmatism).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TweezerSpec {
    /// Optical power at the focus [W].
    pub power: f64,
    /// Trap wavelength [m].
    pub wavelength: f64,
    /// Objective numerical aperture (bookkeeping only in the scalar model).
    pub numerical_aperture: f64,
    /// Focal waist along x [m].
    pub waist_x: f64,
    /// Focal waist along y [m].
    pub waist_y: f64,
    /// Focus position, lab frame [m].
    pub focus_position: Vector3<f64>,
}

impl TweezerSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.power >= 0.0) {
            return Err(Error::domain("tweezer power must be >= 0"));
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::domain("tweezer wavelength must be > 0"));
        }
        if !(self.numerical_aperture > 0.0 && self.numerical_aperture < 1.0) {
            return Err(Error::domain("numerical aperture must be in (0, 1)"));
        }
        if !(self.waist_x > 0.0 && self.waist_y > 0.0) {
            return Err(Error::domain("waists must be > 0"));
        }
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    fn rayleigh_range(&self, w0: f64) -> f64 {
        PI * w0 * w0 / self.wavelength
    }
}

/// Effective mirror standing in for the photonic-crystal slab.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReflectorSpec {
    /// Surface position along z [m].
    pub surface_z: f64,
    /// Amplitude reflectivity rho_r in [0, 1].
    pub amplitude_reflectivity: f64,
    /// Reflection phase phi_r [rad].
    pub reflection_phase: f64,
}

impl ReflectorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.amplitude_reflectivity) {
            return Err(Error::domain("amplitude reflectivity must be in [0, 1]"));
        }
        Ok(())
    }

    /// Reflection phase that places the first intensity antinode at distance
    /// `z0` from the surface for trap wavelength `wavelength`.
    pub fn phase_for_first_antinode(z0: f64, wavelength: f64) -> f64 {
        let k = 2.0 * PI / wavelength;
        (-2.0 * k * z0).rem_euclid(2.0 * PI)
    }
}

/// Parametric evanescent cavity mode: cos^2 along the cavity axis (x),
/// Gaussian transverse envelopes, exponential decay away from the surface.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CavityModeSpec {
    /// Cavity resonance wavelength [m].
    pub resonance_wavelength: f64,
    /// Optical loss rate kappa [rad/s].
    pub kappa: f64,
    /// Field decay length delta_E [m]; the intensity decays with delta_E / 2.
    pub decay_length_field: f64,
    /// Gaussian envelope sigma along the cavity axis x [m].
    pub transverse_sigma_x: f64,
    /// Gaussian envelope sigma along y [m].
    pub transverse_sigma_y: f64,
    /// Longitudinal (photonic-crystal) period a [m].
    pub longitudinal_period: f64,
    /// Peak |delta omega_cav| scale [rad/s].
    pub shift_amplitude: f64,
    /// Mode center in the lab frame [m]; the vertical decay is referenced to
    /// the reflector surface, so only x and y of the center are used.
    pub mode_center: Vector3<f64>,
}

impl CavityModeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(Error::domain("cavity kappa must be > 0"));
        }
        if !(self.decay_length_field > 0.0
            && self.transverse_sigma_x > 0.0
            && self.transverse_sigma_y > 0.0
            && self.longitudinal_period > 0.0
            && self.resonance_wavelength > 0.0)
        {
            return Err(Error::domain("cavity mode lengths must be > 0"));
        }
        Ok(())
    }

    /// Field decay length of a guided mode with effective index `n_eff`:
    /// delta_E = lambda / (2 pi sqrt(n_eff^2 - 1)).
    pub fn decay_length_from_index(wavelength: f64, n_eff: f64) -> Result<f64> {
        if !(n_eff > 1.0) {
            return Err(Error::domain("effective index must be > 1"));
        }
        Ok(wavelength / (2.0 * PI * (n_eff * n_eff - 1.0).sqrt()))
    }

    /// Intensity decay length delta_I = delta_E / 2 [m].
    pub fn intensity_decay_length(&self) -> f64 {
        self.decay_length_field / 2.0
    }

    /// Shift amplitude that calibrates |G_z| at a mode-center point a distance
    /// `z0` above the surface to `gz_target` [rad/s per m].
    pub fn shift_amplitude_for_gz(&self, gz_target: f64, z0: f64) -> f64 {
        let delta_i = self.intensity_decay_length();
        gz_target * delta_i * (z0 / delta_i).exp()
    }
}

/// Complete optical environment: tweezer + effective mirror + cavity mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldModel {
    pub tweezer: TweezerSpec,
    pub reflector: ReflectorSpec,
    pub cavity_mode: CavityModeSpec,
}

impl FieldModel {
    pub fn new(
        tweezer: TweezerSpec,
        reflector: ReflectorSpec,
        cavity_mode: CavityModeSpec,
    ) -> Result<Self> {
        tweezer.validate()?;
        reflector.validate()?;
        cavity_mode.validate()?;
        Ok(FieldModel {
            tweezer,
            reflector,
            cavity_mode,
        })
    }

    /// Free-beam intensity [W/m^2].
    pub fn tweezer_intensity(&self, pos: &Vector3<f64>) -> f64 {
        self.tweezer_intensity_and_gradient(pos).0
    }

    /// Intensity and its analytic gradient.
    pub fn tweezer_intensity_and_gradient(&self, pos: &Vector3<f64>) -> (f64, Vector3<f64>) {
        let t = &self.tweezer;
        let x = pos.x - t.focus_position.x;
        let y = pos.y - t.focus_position.y;
        let z = pos.z - t.focus_position.z;
        let zrx = t.rayleigh_range(t.waist_x);
        let zry = t.rayleigh_range(t.waist_y);
        let wx2 = t.waist_x * t.waist_x * (1.0 + (z / zrx).powi(2));
        let wy2 = t.waist_y * t.waist_y * (1.0 + (z / zry).powi(2));
        let wx = wx2.sqrt();
        let wy = wy2.sqrt();
        let intensity =
            2.0 * t.power / (PI * wx * wy) * (-2.0 * x * x / wx2 - 2.0 * y * y / wy2).exp();
        // dw/dz = w0^2 z / (zR^2 w)
        let dwx = t.waist_x * t.waist_x * z / (zrx * zrx * wx);
        let dwy = t.waist_y * t.waist_y * z / (zry * zry * wy);
        let gx = intensity * (-4.0 * x / wx2);
        let gy = intensity * (-4.0 * y / wy2);
        let gz = intensity
            * ((-1.0 / wx + 4.0 * x * x / (wx2 * wx)) * dwx
                + (-1.0 / wy + 4.0 * y * y / (wy2 * wy)) * dwy);
        (intensity, Vector3::new(gx, gy, gz))
    }

    fn check_side(&self, pos: &Vector3<f64>) -> Result<()> {
        if pos.z < self.reflector.surface_z {
            return Err(Error::physics(format!(
                "position z = {:.3e} m lies behind the reflector surface at {:.3e} m",
                pos.z, self.reflector.surface_z
            )));
        }
        Ok(())
    }

    /// Standing-wave trap intensity [W/m^2]. Reduces to `tweezer_intensity`
    /// when the reflectivity is zero.
    pub fn trap_intensity(&self, pos: &Vector3<f64>) -> Result<f64> {
        Ok(self.trap_intensity_and_gradient(pos)?.0)
    }

    /// Trap intensity and analytic gradient.
    pub fn trap_intensity_and_gradient(&self, pos: &Vector3<f64>) -> Result<(f64, Vector3<f64>)> {
        self.check_side(pos)?;
        let rho = self.reflector.amplitude_reflectivity;
        let (s1, g1) = self.tweezer_intensity_and_gradient(pos);
        if rho == 0.0 {
            return Ok((s1, g1));
        }
        let zs = self.reflector.surface_z;
        let mirrored = Vector3::new(pos.x, pos.y, 2.0 * zs - pos.z);
        let (s2, g2m) = self.tweezer_intensity_and_gradient(&mirrored);
        let g2 = Vector3::new(g2m.x, g2m.y, -g2m.z);
        let amp = (s1 * s2).sqrt();
        let grad_amp = (g1 * s2 + g2 * s1) / (2.0 * amp);
        let k = self.tweezer.wavenumber();
        let theta = 2.0 * k * (pos.z - zs) + self.reflector.reflection_phase;
        let (sin_t, cos_t) = theta.sin_cos();
        let intensity = s1 + rho * rho * s2 + 2.0 * rho * amp * cos_t;
        let mut grad = g1 + g2 * (rho * rho) + grad_amp * (2.0 * rho * cos_t);
        grad.z -= 2.0 * rho * amp * sin_t * 2.0 * k;
        Ok((intensity, grad))
    }

    /// Dispersive cavity resonance shift [rad/s] at `pos` (negative: red shift).
    pub fn cavity_shift(&self, pos: &Vector3<f64>) -> f64 {
        self.cavity_shift_and_gradient(pos).0
    }

    /// Shift and its analytic gradient G = (G_x, G_y, G_z) [rad/s per m].
    pub fn cavity_shift_and_gradient(&self, pos: &Vector3<f64>) -> (f64, Vector3<f64>) {
        let m = &self.cavity_mode;
        let u = pos.x - m.mode_center.x;
        let v = pos.y - m.mode_center.y;
        let zeta = pos.z - self.reflector.surface_z;
        let delta_i = m.intensity_decay_length();
        let sx2 = m.transverse_sigma_x * m.transverse_sigma_x;
        let sy2 = m.transverse_sigma_y * m.transverse_sigma_y;
        let envelope =
            (-u * u / (2.0 * sx2) - v * v / (2.0 * sy2) - zeta / delta_i).exp();
        let cos_u = (PI * u / m.longitudinal_period).cos();
        let cos2 = cos_u * cos_u;
        let value = -m.shift_amplitude * cos2 * envelope;
        let dcos2 =
            -(PI / m.longitudinal_period) * (2.0 * PI * u / m.longitudinal_period).sin();
        let gx = -m.shift_amplitude * envelope * (dcos2 + cos2 * (-u / sx2));
        let gy = value * (-v / sy2);
        let gz = value * (-1.0 / delta_i);
        (value, Vector3::new(gx, gy, gz))
    }

    pub fn coupling_gradient(&self, pos: &Vector3<f64>) -> Vector3<f64> {
        self.cavity_shift_and_gradient(pos).1
    }

    /// Distance of the first standing-wave antinode from the surface [m].
    pub fn first_antinode_offset(&self) -> f64 {
        let k = self.tweezer.wavenumber();
        let phi = self.reflector.reflection_phase.rem_euclid(2.0 * PI);
        let zeta = (2.0 * PI - phi) / (2.0 * k);
        if zeta <= 0.0 {
            PI / k
        } else {
            zeta
        }
    }

    /// Nominal axial lattice-site positions z_n = z_0 + n lambda/2 (absolute
    /// lab frame, on the tweezer axis). Empty when there is no reflection.
    pub fn trap_sites(&self, n_max: usize) -> Vec<f64> {
        if self.reflector.amplitude_reflectivity == 0.0 {
            return Vec::new();
        }
        let z0 = self.reflector.surface_z + self.first_antinode_offset();
        let half_lambda = self.tweezer.wavelength / 2.0;
        (0..=n_max).map(|n| z0 + n as f64 * half_lambda).collect()
    }

    /// Lab-frame position of site `n` on the tweezer axis.
    pub fn site_position(&self, n: usize) -> Vector3<f64> {
        let z0 = self.reflector.surface_z + self.first_antinode_offset();
        Vector3::new(
            self.tweezer.focus_position.x,
            self.tweezer.focus_position.y,
            z0 + n as f64 * self.tweezer.wavelength / 2.0,
        )
    }

    /// Rigidly translate reflector and cavity mode along z by `dz`, leaving
    /// the tweezer untouched. The lattice moves with the surface.
    pub fn translated_along_z(&self, dz: f64) -> FieldModel {
        let mut out = self.clone();
        out.reflector.surface_z += dz;
        out.cavity_mode.mode_center.z += dz;
        out
    }
}
