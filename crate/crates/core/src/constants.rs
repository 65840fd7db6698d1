//! Physical constants in the internal unit system.
//!
//! Lengths are nanometers, times femtoseconds, energies electron-volts and
//! masses multiples of the electron mass. Momenta are carried as wave-numbers
//! k (1/nm) with p = hbar k.

/// Reduced Planck constant (eV fs).
pub const HBAR: f64 = 0.658_211_956_9;

/// Speed of light (nm/fs).
pub const SPEED_OF_LIGHT: f64 = 299.792_458;

/// Electron rest energy (eV).
pub const ELECTRON_REST_ENERGY: f64 = 510_998.95;

/// Electron mass (eV fs^2/nm^2), i.e. rest energy divided by c^2.
///
/// Kinetic energy of a wave-number k at mass m (electron masses) is
/// `HBAR^2 k^2 / (2 m ELECTRON_MASS)` in eV.
pub const ELECTRON_MASS: f64 = ELECTRON_REST_ENERGY / (SPEED_OF_LIGHT * SPEED_OF_LIGHT);

/// Proton mass in electron masses.
pub const PROTON_MASS_RATIO: f64 = 1_836.152_673_43;

/// Coulomb coupling e^2/(4 pi eps_0) (eV nm).
pub const COULOMB_COUPLING: f64 = 1.439_96;

/// Bohr radius (nm).
pub const BOHR_RADIUS: f64 = 0.052_917_7;

/// Free-streaming velocity (nm/fs) of wave-number `k` (1/nm) at mass
/// `mass` in electron masses.
pub fn velocity(k: f64, mass: f64) -> f64 {
    HBAR * k / (mass * ELECTRON_MASS)
}

/// Kinetic energy (eV) of wave-number `k` (1/nm) at mass `mass` in
/// electron masses.
pub fn kinetic_energy(k: f64, mass: f64) -> f64 {
    HBAR * HBAR * k * k / (2.0 * mass * ELECTRON_MASS)
}
