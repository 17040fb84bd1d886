//! Physical constants (SI).

pub const C0: f64 = 299_792_458.0;
pub const MU0: f64 = 1.256_637_062_12e-6;
pub const EPS0: f64 = 1.0 / (MU0 * C0 * C0);
/// Free-space wave impedance.
pub const ETA0: f64 = MU0 * C0;
