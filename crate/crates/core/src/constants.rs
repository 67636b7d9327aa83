//! Physical constants (CODATA 2018, SI units).

/// Reduced Planck constant [J s].
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant [J s].
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant [J/K].
pub const KB: f64 = 1.380_649e-23;
/// Speed of light in vacuum [m/s].
pub const C: f64 = 299_792_458.0;
/// Vacuum permittivity [F/m].
pub const EPS0: f64 = 8.854_187_8128e-12;
/// Standard gravity [m/s^2].
pub const G_ACC: f64 = 9.806_65;
/// 2*pi, for ordinary-to-angular frequency conversion.
pub const PI2: f64 = 2.0 * std::f64::consts::PI;
