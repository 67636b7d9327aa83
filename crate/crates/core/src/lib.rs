//! Simulation and analysis toolkit for a levitated nanoparticle trapped in the
//! standing wave formed by an optical tweezer reflecting off a photonic crystal
//! cavity, with dispersive near-field readout of the particle motion.
//!
//! The crate is organized in layers:
//!
//! * [`quantities`] — closed-form physical quantities (mass, polarizability,
//!   damping and recoil rates, cooperativity, detection bounds).
//! * [`fields`] — analytic optical field models: focused tweezer, standing wave,
//!   evanescent cavity mode and its dispersive shift/gradient.
//! * [`dynamics`] — trap potential, forces, harmonic linearization and
//!   stochastic (Langevin) trajectory integration.
//! * [`readout`] — homodyne phase transduction through the cavity and
//!   shot-noise-limited detection.
//! * [`spectral`] — Welch PSD estimation, Lorentzian fitting, peak finding.
//! * [`calibration`] — thermal-noise/shot-noise calibration chain recovering
//!   displacement scale, coupling G and single-photon coupling g0.
//! * [`protocols`] — experiment drivers: coupling maps, focus sweeps,
//!   lattice-site loading, frequency-target model fitting.
//! * [`config`] / [`io`] — TOML configuration and on-disk formats.

pub mod calibration;
pub mod config;
pub mod constants;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod io;
pub mod optim;
pub mod protocols;
pub mod quantities;
pub mod readout;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
