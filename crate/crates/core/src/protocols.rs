//! Experiment drivers built on the lower layers: lateral coupling maps,
//! cavity-to-focus distance sweeps, lattice-site loading, model fitting to
//! observed mechanical frequencies, and the platform merit report.

use crate::config::ExperimentConfig;
use crate::constants::{KB, PI2};
use crate::dynamics::{linearize_at, settle, simulate, SimParams};
use crate::error::{Error, Result};
use crate::fields::FieldModel;
use crate::quantities::{self, GasSpec, MeritReport, ParticleSpec};
use crate::readout::{detect, intracavity_photons, transduce, DetectionChain, ProbeSpec, TransduceMode};
use crate::spectral::{fit_lorentzian, welch, Window};
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapMode {
    Analytic,
    Simulated,
}

/// Lateral map of single-photon couplings, one layer per mechanical axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingMap {
    pub x_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    /// g0 magnitude [rad/s], indexed `maps[axis][iy][ix]`.
    pub g0_maps: [Vec<Vec<f64>>; 3],
    pub mode: MapMode,
    /// Grid points skipped because the trap was unstable there.
    pub flagged: Vec<(usize, usize)>,
}

/// Focus-distance sweep results, one entry per distance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRecord {
    pub cavity_focus_distance: Vec<f64>,
    /// |G| per axis [rad/s per m].
    pub g_per_axis: Vec<[f64; 3]>,
    pub omegas: Vec<[f64; 3]>,
    /// Equipartition position variances [m^2].
    pub variances: Vec<[f64; 3]>,
    /// Particle equilibrium height above the reflector surface [m].
    pub height_above_surface: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LoadResult {
    pub initial_cavity_offset: f64,
    pub final_site_index: usize,
    pub g0_z: f64,
    pub omega_z: f64,
}

/// Merit report plus the context it was computed in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlatformMerit {
    pub report: MeritReport,
    /// g0 along z [rad/s].
    pub g0_z: f64,
    pub omegas: [f64; 3],
    pub n_cav: f64,
    /// Analytic displacement imprecision [m/sqrt(Hz)].
    pub sensitivity: f64,
}

fn model_with_tweezer_at(model: &FieldModel, x: f64, y: f64) -> FieldModel {
    let mut m = model.clone();
    m.tweezer.focus_position.x = x;
    m.tweezer.focus_position.y = y;
    m
}

/// g0 per axis at one lateral offset from analytic linearization.
fn analytic_g0_at(
    model: &FieldModel,
    particle: &ParticleSpec,
    x: f64,
    y: f64,
) -> Result<[f64; 3]> {
    let local = model_with_tweezer_at(model, x, y);
    let lin = linearize_at(&local, particle, &local.site_position(0), false)?;
    let grad = local.coupling_gradient(&lin.equilibrium);
    let m = particle.mass();
    let mut g0 = [0.0; 3];
    for i in 0..3 {
        g0[i] = quantities::zpf(m, lin.omegas[i])? * grad[i].abs();
    }
    Ok(g0)
}

/// Fig.-2-style lateral map of g0 for the three mechanical axes (analytic
/// mode: settle + linearize + local coupling gradient per point).
pub fn map_coupling(
    model: &FieldModel,
    particle: &ParticleSpec,
    x_grid: &[f64],
    y_grid: &[f64],
) -> Result<CouplingMap> {
    let rows: Vec<(usize, Vec<Option<[f64; 3]>>)> = y_grid
        .par_iter()
        .enumerate()
        .map(|(iy, &y)| {
            let row = x_grid
                .iter()
                .map(|&x| analytic_g0_at(model, particle, x, y).ok())
                .collect();
            (iy, row)
        })
        .collect();

    let mut g0_maps: [Vec<Vec<f64>>; 3] =
        std::array::from_fn(|_| vec![vec![0.0; x_grid.len()]; y_grid.len()]);
    let mut flagged = Vec::new();
    for (iy, row) in rows {
        for (ix, point) in row.into_iter().enumerate() {
            match point {
                Some(g0) => {
                    for axis in 0..3 {
                        g0_maps[axis][iy][ix] = g0[axis];
                    }
                }
                None => flagged.push((ix, iy)),
            }
        }
    }
    Ok(CouplingMap {
        x_grid: x_grid.to_vec(),
        y_grid: y_grid.to_vec(),
        g0_maps,
        mode: MapMode::Analytic,
        flagged,
    })
}

/// Simulated-mode g0 at one lateral point: full pipeline
/// simulate -> transduce -> detect -> per-axis peak fit -> equipartition
/// conversion. Axes whose peak is buried under the shot floor report 0.
#[allow(clippy::too_many_arguments)]
pub fn simulated_g0_at(
    model: &FieldModel,
    particle: &ParticleSpec,
    gas: &GasSpec,
    probe: &ProbeSpec,
    chain: &DetectionChain,
    x: f64,
    y: f64,
    duration: f64,
    seed: u64,
) -> Result<[f64; 3]> {
    let local = model_with_tweezer_at(model, x, y);
    let lin = linearize_at(&local, particle, &local.site_position(0), false)?;
    let sim = SimParams {
        dt: 4e-8,
        duration,
        seed,
        include_recoil: false,
        gravity: false,
        record_stride: 4,
    };
    let traj = simulate(&local, particle, gas, &sim, &lin.equilibrium, &Vector3::zeros(), "")?;
    if traj.escaped {
        return Err(Error::physics("particle escaped during map point"));
    }
    let phase = transduce(&traj, &local, TransduceMode::Full)?;
    let kappa = local.cavity_mode.kappa;
    let record = detect(&phase, traj.dt, probe, chain, kappa, 1.0, seed ^ 0x5eed)?;
    let seg = (record.samples.len() / 8).next_power_of_two().min(1 << 15);
    let psd = welch(&record.samples, record.dt, seg, 0.5, Window::Hann)?;

    let m = particle.mass();
    let eta_flux = chain.eta_total() * probe.photon_flux();
    let mut g0 = [0.0; 3];
    for axis in 0..3 {
        let f_i = lin.omegas[axis] / PI2;
        match fit_lorentzian(&psd, 0.9 * f_i, 1.1 * f_i) {
            Ok(fit) => {
                // area_units = gain^2 Var = (sqrt(eta Phi) 4G/kappa)^2 kT/(m W^2)
                let g = kappa / 4.0
                    * (fit.area * m * fit.omega0 * fit.omega0
                        / (KB * gas.temperature * eta_flux))
                        .sqrt();
                g0[axis] = quantities::zpf(m, fit.omega0)? * g;
            }
            Err(Error::Fit(_)) => g0[axis] = 0.0,
            Err(e) => return Err(e),
        }
    }
    Ok(g0)
}

/// Fig.-3-style sweep: move reflector and cavity rigidly away from the focus
/// by each distance, re-settle into the surface-locked first site, and record
/// couplings, frequencies and equipartition variances.
pub fn sweep_focus(
    model: &FieldModel,
    particle: &ParticleSpec,
    distances: &[f64],
    temperature: f64,
) -> Result<SweepRecord> {
    let m = particle.mass();
    let mut rec = SweepRecord {
        cavity_focus_distance: distances.to_vec(),
        g_per_axis: Vec::with_capacity(distances.len()),
        omegas: Vec::with_capacity(distances.len()),
        variances: Vec::with_capacity(distances.len()),
        height_above_surface: Vec::with_capacity(distances.len()),
    };
    for &d in distances {
        let moved = model.translated_along_z(-d);
        let lin = linearize_at(&moved, particle, &moved.site_position(0), false)
            .map_err(|e| Error::physics(format!("trap lost at distance {d:.3e} m: {e}")))?;
        let grad = moved.coupling_gradient(&lin.equilibrium);
        rec.g_per_axis
            .push([grad.x.abs(), grad.y.abs(), grad.z.abs()]);
        rec.omegas.push(lin.omegas);
        let mut var = [0.0; 3];
        for i in 0..3 {
            var[i] = KB * temperature / (m * lin.omegas[i] * lin.omegas[i]);
        }
        rec.variances.push(var);
        rec.height_above_surface
            .push(lin.equilibrium.z - moved.reflector.surface_z);
    }
    Ok(rec)
}

/// Fig.-4 loading protocol, quasi-static:
/// I. standing wave off -> particle relaxes to the tweezer-only equilibrium;
/// II. cavity (and reflector) displaced away from the focus by `offset`;
/// III. standing wave restored;
/// IV. particle settles from the tweezer equilibrium into the displaced
///     lattice. Returns the final site with its g0_z and Omega_z.
pub fn load_site(
    model: &FieldModel,
    particle: &ParticleSpec,
    cavity_offset: f64,
) -> Result<LoadResult> {
    // I: no standing wave
    let mut free = model.clone();
    free.reflector.amplitude_reflectivity = 0.0;
    let (_, tweezer_eq) = settle(&free, particle, &free.tweezer.focus_position, false)?;

    // II + III: displaced lattice, full reflectivity
    let moved = model.translated_along_z(-cavity_offset);

    // IV
    let (site, _) = settle(&moved, particle, &tweezer_eq, false)
        .map_err(|_| Error::physics("no stable site found"))?;
    let lin = linearize_at(&moved, particle, &moved.site_position(site), false)
        .map_err(|_| Error::physics("no stable site found"))?;
    let grad = moved.coupling_gradient(&lin.equilibrium);
    let g0_z = quantities::zpf(particle.mass(), lin.omegas[2])? * grad.z.abs();
    Ok(LoadResult {
        initial_cavity_offset: cavity_offset,
        final_site_index: site,
        g0_z,
        omega_z: lin.omegas[2],
    })
}

/// Fit (waist_x, waist_y, amplitude_reflectivity) so the linearized site-0
/// frequencies match `targets` [rad/s, (x, y, z) order]. Fails when the best
/// relative residual stays above 1e-4.
pub fn fit_model(
    template: &FieldModel,
    particle: &ParticleSpec,
    targets: [f64; 3],
) -> Result<FieldModel> {
    if targets.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::domain("target frequencies must be > 0"));
    }
    let build = |p: &[f64]| -> FieldModel {
        let mut m = template.clone();
        m.tweezer.waist_x = p[0].exp();
        m.tweezer.waist_y = p[1].exp();
        // logistic keeps reflectivity in (0, 1)
        m.reflector.amplitude_reflectivity = 1.0 / (1.0 + (-p[2]).exp());
        m
    };
    let objective = |p: &[f64]| -> f64 {
        let m = build(p);
        match linearize_at(&m, particle, &m.site_position(0), false) {
            Ok(lin) => (0..3)
                .map(|i| ((lin.omegas[i] - targets[i]) / targets[i]).powi(2))
                .sum(),
            Err(_) => 1e6,
        }
    };
    let rho = template.reflector.amplitude_reflectivity.clamp(1e-3, 0.999);
    let p0 = [
        template.tweezer.waist_x.ln(),
        template.tweezer.waist_y.ln(),
        (rho / (1.0 - rho)).ln(),
    ];
    let result = crate::optim::nelder_mead(objective, &p0, &[0.2, 0.2, 0.5], 1e-12, 4_000);
    if result.fval >= 1e-4 {
        return Err(Error::fit(format!(
            "fit failed: best residual {:.3e} (>= 1e-4)",
            result.fval
        )));
    }
    Ok(build(&result.x))
}

/// Derived platform figures of merit at the configured operating point.
pub fn merit_report(cfg: &ExperimentConfig) -> Result<PlatformMerit> {
    let particle = cfg.particle_spec()?;
    let gas = cfg.gas_spec()?;
    let model = cfg.field_model()?;
    let probe = cfg.probe_spec()?;
    let chain = cfg.detection_chain()?;

    let lin = linearize_at(&model, &particle, &model.site_position(0), false)?;
    let m = particle.mass();
    let omega_z = lin.omegas[2];
    let grad = model.coupling_gradient(&lin.equilibrium);
    let g_z = grad.z.abs();
    let z_zpf = quantities::zpf(m, omega_z)?;
    let g0_z = z_zpf * g_z;

    let kappa = model.cavity_mode.kappa;
    let n_cav = intracavity_photons(&probe, kappa);
    let gamma_gas = quantities::gas_damping(&gas, &particle);
    let n_th = quantities::thermal_occupation(gas.temperature, omega_z)?;

    let (intensity, _) = model.trap_intensity_and_gradient(&lin.equilibrium)?;
    let p_scatt = quantities::scattered_power(&particle, model.tweezer.wavelength, intensity);
    let s_ff = quantities::recoil_force_psd(p_scatt, model.tweezer.wavelength);
    let gamma_recoil =
        quantities::recoil_equivalent_damping(s_ff, m, omega_z, gas.temperature)?;

    let c_q = quantities::cooperativity(g0_z, n_cav, kappa, gamma_gas, n_th)?;
    let (eta_min_current, clipped) = quantities::feedback_threshold(c_q)?;
    let force_noise = quantities::force_noise(gas.temperature, m, gamma_recoil);
    let sensitivity =
        crate::readout::imprecision_psd(&probe, &chain, kappa, g_z)?.sqrt();

    Ok(PlatformMerit {
        report: MeritReport {
            z_zpf,
            n_th,
            c_q,
            eta_min: 1.0 / 9.0,
            eta_min_current,
            cooling_impossible: clipped,
            force_noise,
            gamma_gas,
            gamma_recoil_equiv: gamma_recoil,
        },
        g0_z,
        omegas: lin.omegas,
        n_cav,
        sensitivity,
    })
}
