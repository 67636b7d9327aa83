//! Command-line driver: config-driven experiment runs with deterministic
//! outputs. Exit codes: 0 success, 1 config error, 2 runtime/physics error.

use clap::{Parser, Subcommand, ValueEnum};
use levcav::config::{ExperimentConfig, Severity};
use levcav::constants::PI2;
use levcav::dynamics::{linearize_at, simulate, Trajectory};
use levcav::error::Error;
use levcav::io::{homodyne_to_record, trajectory_to_record, write_csv};
use levcav::readout::{detect, transduce, HomodyneRecord, TransduceMode};
use levcav::spectral::{welch, Window};
use levcav::{calibration, protocols};
use nalgebra::Vector3;
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "levcav", version, about = "Levitated-nanoparticle cavity readout toolkit")]
struct Cli {
    /// Experiment configuration (TOML); defaults to built-in paper parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for grid/sweep fan-out (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output format for time series.
    #[arg(long, global = true, value_enum, default_value_t = Format::Binary)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Binary,
}

#[derive(Subcommand)]
enum Cmd {
    /// Derived figures of merit (g0, C_q, feedback bound, noise budget).
    Merit,
    /// Langevin trajectory at the configured operating point.
    Simulate,
    /// Trajectory -> homodyne record through the cavity readout.
    Readout,
    /// Welch PSD of the homodyne record.
    Psd,
    /// Thermal + shot-noise calibration chain on a synthetic record.
    Calibrate,
    /// Lateral g0 maps for the three mechanical axes.
    Map {
        /// Half-width of the square scan [m].
        #[arg(long, default_value_t = 0.4e-6)]
        half_width: f64,
        /// Points per axis.
        #[arg(long, default_value_t = 21)]
        points: usize,
    },
    /// Cavity-to-focus distance sweep.
    SweepFocus {
        #[arg(long, default_value_t = 5e-6)]
        max_distance: f64,
        #[arg(long, default_value_t = 26)]
        points: usize,
    },
    /// Lattice-site loading vs initial cavity offset.
    LoadSite {
        #[arg(long, default_value_t = 1.2e-6)]
        max_offset: f64,
        #[arg(long, default_value_t = 61)]
        points: usize,
    },
    /// Fit tweezer waists and reflectivity to target frequencies.
    Fit {
        #[arg(long, default_value_t = 280.3e3)]
        fx_hz: f64,
        #[arg(long, default_value_t = 228.3e3)]
        fy_hz: f64,
        #[arg(long, default_value_t = 444.9e3)]
        fz_hz: f64,
    },
    /// Validate a configuration file without running anything.
    Validate,
}

#[derive(Serialize)]
struct RunManifest {
    config_hash: String,
    tool_version: String,
    seed: u64,
    subcommand: String,
    timestamp: String,
    outputs: Vec<String>,
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let kind = match &e {
                Error::Config(_) => "config",
                Error::Io(_) | Error::Format(_) => "io",
                _ => "physics",
            };
            eprintln!("ERROR kind={kind} msg={:?}", e.to_string());
            match e {
                Error::Config(_) => 1,
                _ => 2,
            }
        }
    });
}

fn run(cli: Cli) -> levcav::Result<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config(e.to_string()))?;
    }

    // `validate` reports on the raw file instead of running
    if matches!(cli.cmd, Cmd::Validate) {
        let path = cli
            .config
            .as_ref()
            .ok_or_else(|| Error::config("validate requires --config PATH"))?;
        let text = std::fs::read_to_string(path)?;
        let (cfg, diags) = ExperimentConfig::validate_toml(&text)?;
        let mut errors = 0;
        for d in &diags {
            let tag = match d.severity {
                Severity::Error => {
                    errors += 1;
                    "error"
                }
                Severity::Warning => "warning",
                Severity::Defaulted => "default",
            };
            println!("{tag}: {}: {}", d.path, d.message);
        }
        println!(
            "{}: {} error(s), config {}",
            path.display(),
            errors,
            if cfg.is_some() { "valid" } else { "invalid" }
        );
        if cfg.is_none() {
            return Err(Error::config("configuration invalid"));
        }
        return Ok(());
    }

    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::paper_default(),
    };
    if let Some(seed) = cli.seed {
        cfg.sim.seed = seed;
    }
    std::fs::create_dir_all(&cli.out)?;

    let outputs = dispatch(&cli, &cfg)?;

    let manifest = RunManifest {
        config_hash: cfg.hash(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.sim.seed,
        subcommand: subcommand_name(&cli.cmd).to_string(),
        timestamp: utc_now(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    let manifest_json =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(cli.out.join("manifest.json"), manifest_json)?;
    for p in &outputs {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn subcommand_name(cmd: &Cmd) -> &'static str {
    match cmd {
        Cmd::Merit => "merit",
        Cmd::Simulate => "simulate",
        Cmd::Readout => "readout",
        Cmd::Psd => "psd",
        Cmd::Calibrate => "calibrate",
        Cmd::Map { .. } => "map",
        Cmd::SweepFocus { .. } => "sweep-focus",
        Cmd::LoadSite { .. } => "load-site",
        Cmd::Fit { .. } => "fit",
        Cmd::Validate => "validate",
    }
}

fn run_trajectory(cfg: &ExperimentConfig) -> levcav::Result<Trajectory> {
    let model = cfg.field_model()?;
    let particle = cfg.particle_spec()?;
    let gas = cfg.gas_spec()?;
    let lin = linearize_at(&model, &particle, &model.site_position(0), cfg.sim.gravity)?;
    let sim = levcav::dynamics::SimParams {
        dt: cfg.sim.dt_s,
        duration: cfg.sim.duration_s,
        seed: cfg.sim.seed,
        include_recoil: cfg.sim.include_recoil,
        gravity: cfg.sim.gravity,
        record_stride: cfg.sim.record_stride,
    };
    simulate(
        &model,
        &particle,
        &gas,
        &sim,
        &lin.equilibrium,
        &Vector3::zeros(),
        &cfg.hash(),
    )
}

fn run_homodyne(cfg: &ExperimentConfig) -> levcav::Result<(HomodyneRecord, Trajectory)> {
    let model = cfg.field_model()?;
    let particle = cfg.particle_spec()?;
    let probe = cfg.probe_spec()?;
    let chain = cfg.detection_chain()?;
    let traj = run_trajectory(cfg)?;
    let phase = transduce(&traj, &model, TransduceMode::Full)?;
    let lin = linearize_at(&model, &particle, &model.site_position(0), cfg.sim.gravity)?;
    let gz = model.coupling_gradient(&lin.equilibrium).z.abs();
    let mut record = detect(
        &phase,
        traj.dt,
        &probe,
        &chain,
        model.cavity_mode.kappa,
        gz,
        cfg.sim.seed ^ 0x4f70_7469_6373,
    )?;
    if cfg.vibration.enabled {
        for (i, s) in record.samples.iter_mut().enumerate() {
            *s += cfg.vibration.amplitude
                * (PI2 * cfg.vibration.frequency_hz * i as f64 * record.dt).sin();
        }
    }
    Ok((record, traj))
}

fn csv_to_file(
    path: &Path,
    cfg: &ExperimentConfig,
    columns: &[&str],
    rows: impl Iterator<Item = Vec<f64>>,
) -> levcav::Result<()> {
    let mut buf = Vec::new();
    write_csv(
        &mut buf,
        &[
            ("config_hash", cfg.hash()),
            ("tool_version", env!("CARGO_PKG_VERSION").to_string()),
            ("seed", cfg.sim.seed.to_string()),
        ],
        columns,
        rows,
    )?;
    std::fs::write(path, buf)?;
    Ok(())
}

fn dispatch(cli: &Cli, cfg: &ExperimentConfig) -> levcav::Result<Vec<PathBuf>> {
    let out = &cli.out;
    match &cli.cmd {
        Cmd::Validate => unreachable!("handled earlier"),
        Cmd::Merit => {
            let merit = protocols::merit_report(cfg)?;
            let path = out.join("merit.csv");
            let mut buf = Vec::new();
            write_csv(
                &mut buf,
                &[("config_hash", cfg.hash())],
                &["key", "value"],
                std::iter::empty(),
            )?;
            let mut text = String::from_utf8(buf).unwrap();
            let kv = [
                ("g0_hz", merit.g0_z / PI2),
                ("omega_x_hz", merit.omegas[0] / PI2),
                ("omega_y_hz", merit.omegas[1] / PI2),
                ("omega_z_hz", merit.omegas[2] / PI2),
                ("z_zpf_m", merit.report.z_zpf),
                ("n_cav", merit.n_cav),
                ("n_th", merit.report.n_th),
                ("c_q", merit.report.c_q),
                ("eta_min", merit.report.eta_min),
                ("eta_min_current", merit.report.eta_min_current),
                (
                    "cooling_impossible",
                    if merit.report.cooling_impossible { 1.0 } else { 0.0 },
                ),
                ("force_noise_n_sqrt_hz", merit.report.force_noise),
                ("gamma_gas_hz", merit.report.gamma_gas / PI2),
                ("gamma_recoil_hz", merit.report.gamma_recoil_equiv / PI2),
                ("sensitivity_m_sqrt_hz", merit.sensitivity),
            ];
            for (k, v) in kv {
                text.push_str(&format!("{k},{v:.6e}\n"));
            }
            std::fs::write(&path, text)?;
            Ok(vec![path])
        }
        Cmd::Simulate => {
            let traj = run_trajectory(cfg)?;
            match cli.format {
                Format::Binary => {
                    let path = out.join("trajectory.lvts");
                    trajectory_to_record(&traj).save(&path)?;
                    Ok(vec![path])
                }
                Format::Csv => {
                    let path = out.join("trajectory.csv");
                    let dt = traj.dt;
                    csv_to_file(
                        &path,
                        cfg,
                        &["t_s", "x_m", "y_m", "z_m", "vx_m_s", "vy_m_s", "vz_m_s"],
                        traj.positions.iter().zip(&traj.velocities).enumerate().map(
                            |(i, (p, v))| vec![i as f64 * dt, p.x, p.y, p.z, v.x, v.y, v.z],
                        ),
                    )?;
                    Ok(vec![path])
                }
            }
        }
        Cmd::Readout => {
            let (record, _) = run_homodyne(cfg)?;
            match cli.format {
                Format::Binary => {
                    let path = out.join("homodyne.lvts");
                    homodyne_to_record(&record).save(&path)?;
                    Ok(vec![path])
                }
                Format::Csv => {
                    let path = out.join("homodyne.csv");
                    let dt = record.dt;
                    csv_to_file(
                        &path,
                        cfg,
                        &["t_s", "signal"],
                        record
                            .samples
                            .iter()
                            .enumerate()
                            .map(|(i, &s)| vec![i as f64 * dt, s]),
                    )?;
                    Ok(vec![path])
                }
            }
        }
        Cmd::Psd => {
            let (record, _) = run_homodyne(cfg)?;
            let seg = cfg
                .spectral
                .segment_length
                .min(record.samples.len().next_power_of_two() / 4)
                .max(256);
            let psd = welch(
                &record.samples,
                record.dt,
                seg,
                cfg.spectral.overlap,
                Window::parse(&cfg.spectral.window)?,
            )?;
            let path = out.join("psd.csv");
            let mut buf = Vec::new();
            write_csv(
                &mut buf,
                &[
                    ("config_hash", cfg.hash()),
                    ("n_averages", psd.n_averages.to_string()),
                    ("transduction_gain_per_m", format!("{:e}", record.transduction_gain)),
                ],
                &["f_hz", "psd_per_hz"],
                psd.frequencies
                    .iter()
                    .zip(&psd.values)
                    .map(|(&f, &v)| vec![f, v]),
            )?;
            std::fs::write(&path, buf)?;
            Ok(vec![path])
        }
        Cmd::Calibrate => {
            let model = cfg.field_model()?;
            let particle = cfg.particle_spec()?;
            let gas = cfg.gas_spec()?;
            let probe = cfg.probe_spec()?;
            let chain = cfg.detection_chain()?;
            let (record, _) = run_homodyne(cfg)?;
            let lin = linearize_at(&model, &particle, &model.site_position(0), false)?;
            let fz = lin.omegas[2] / PI2;
            let f_nyq = 0.5 / record.dt;
            let seg = (record.samples.len() / 16).next_power_of_two().min(1 << 16);
            let result = calibration::calibrate_record(
                &record,
                seg,
                (0.9 * fz, 1.1 * fz),
                (1.3 * fz, (2.5 * fz).min(0.9 * f_nyq)),
                gas.temperature,
                particle.mass(),
                &probe,
                &chain,
                model.cavity_mode.kappa,
                cfg.reference.farfield_power_w,
            )?;
            let path = out.join("calibration.csv");
            let kv = [
                ("meters_per_unit", result.meters_per_unit),
                ("g_hz_per_m", result.g_extracted / PI2),
                ("g0_hz", result.g0_extracted / PI2),
                ("sensitivity_m_sqrt_hz", result.sensitivity),
                ("per_photon_power_ratio", result.per_photon_power_ratio),
                ("fit_omega0_hz", result.fit.omega0 / PI2),
                ("fit_gamma_hz", result.fit.gamma / PI2),
                ("fit_area", result.fit.area),
                ("fit_background", result.fit.background),
            ];
            let mut buf = Vec::new();
            write_csv(
                &mut buf,
                &[("config_hash", cfg.hash())],
                &["key", "value"],
                std::iter::empty(),
            )?;
            let mut text = String::from_utf8(buf).unwrap();
            for (k, v) in kv {
                text.push_str(&format!("{k},{v:.6e}\n"));
            }
            std::fs::write(&path, text)?;
            Ok(vec![path])
        }
        Cmd::Map { half_width, points } => {
            let model = cfg.field_model()?;
            let particle = cfg.particle_spec()?;
            let grid: Vec<f64> = (0..*points)
                .map(|i| -half_width + 2.0 * half_width * i as f64 / (*points - 1).max(1) as f64)
                .collect();
            let map = protocols::map_coupling(&model, &particle, &grid, &grid)?;
            let mut paths = Vec::new();
            for (axis, name) in ["x", "y", "z"].iter().enumerate() {
                let path = out.join(format!("map_g0_{name}.csv"));
                let rows = map.y_grid.iter().enumerate().flat_map(|(iy, &y)| {
                    let maps = &map.g0_maps[axis][iy];
                    map.x_grid
                        .iter()
                        .enumerate()
                        .map(move |(ix, &x)| vec![x, y, maps[ix] / PI2])
                        .collect::<Vec<_>>()
                });
                csv_to_file(&path, cfg, &["x_m", "y_m", "g0_hz"], rows)?;
                paths.push(path);
            }
            Ok(paths)
        }
        Cmd::SweepFocus {
            max_distance,
            points,
        } => {
            let model = cfg.field_model()?;
            let particle = cfg.particle_spec()?;
            let gas = cfg.gas_spec()?;
            let distances: Vec<f64> = (0..*points)
                .map(|i| max_distance * i as f64 / (*points - 1).max(1) as f64)
                .collect();
            let rec = protocols::sweep_focus(&model, &particle, &distances, gas.temperature)?;
            let path = out.join("sweep_focus.csv");
            csv_to_file(
                &path,
                cfg,
                &[
                    "distance_m",
                    "g_x_hz_per_m",
                    "g_y_hz_per_m",
                    "g_z_hz_per_m",
                    "omega_x_hz",
                    "omega_y_hz",
                    "omega_z_hz",
                    "var_x_m2",
                    "var_y_m2",
                    "var_z_m2",
                    "height_m",
                ],
                (0..distances.len()).map(|i| {
                    vec![
                        rec.cavity_focus_distance[i],
                        rec.g_per_axis[i][0] / PI2,
                        rec.g_per_axis[i][1] / PI2,
                        rec.g_per_axis[i][2] / PI2,
                        rec.omegas[i][0] / PI2,
                        rec.omegas[i][1] / PI2,
                        rec.omegas[i][2] / PI2,
                        rec.variances[i][0],
                        rec.variances[i][1],
                        rec.variances[i][2],
                        rec.height_above_surface[i],
                    ]
                }),
            )?;
            Ok(vec![path])
        }
        Cmd::LoadSite { max_offset, points } => {
            let model = cfg.field_model()?;
            let particle = cfg.particle_spec()?;
            let offsets: Vec<f64> = (0..*points)
                .map(|i| max_offset * i as f64 / (*points - 1).max(1) as f64)
                .collect();
            let results: Vec<levcav::Result<protocols::LoadResult>> = offsets
                .iter()
                .map(|&o| protocols::load_site(&model, &particle, o))
                .collect();
            let path = out.join("load_site.csv");
            let rows = results
                .into_iter()
                .collect::<levcav::Result<Vec<_>>>()?
                .into_iter()
                .map(|r| {
                    vec![
                        r.initial_cavity_offset,
                        r.final_site_index as f64,
                        r.g0_z / PI2,
                        r.omega_z / PI2,
                    ]
                });
            csv_to_file(&path, cfg, &["offset_m", "site", "g0_z_hz", "omega_z_hz"], rows)?;
            Ok(vec![path])
        }
        Cmd::Fit { fx_hz, fy_hz, fz_hz } => {
            let model = cfg.field_model()?;
            let particle = cfg.particle_spec()?;
            let targets = [PI2 * fx_hz, PI2 * fy_hz, PI2 * fz_hz];
            let fitted = protocols::fit_model(&model, &particle, targets)?;
            let mut fitted_cfg = cfg.clone();
            fitted_cfg.tweezer.waist_x_m = fitted.tweezer.waist_x;
            fitted_cfg.tweezer.waist_y_m = fitted.tweezer.waist_y;
            fitted_cfg.reflector.amplitude_reflectivity =
                fitted.reflector.amplitude_reflectivity;
            let path = out.join("fitted_config.toml");
            std::fs::write(&path, fitted_cfg.to_toml_string())?;
            Ok(vec![path])
        }
    }
}

/// ISO-8601 UTC timestamp from the system clock (no external time crate).
fn utc_now() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let days = secs / 86_400;
    let (h, m, s) = (secs % 86_400 / 3600, secs % 3600 / 60, secs % 60);
    // civil-from-days (Howard Hinnant's algorithm)
    let z = days as i64 + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    let year = if month <= 2 { y + 1 } else { y };
    format!("{year:04}-{month:02}-{d:02}T{h:02}:{m:02}:{s:02}Z")
}
