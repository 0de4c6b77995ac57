//! Physical constants in the internal unit system.
//!
//! Energies are in meV, lengths in nm, times in ps, temperatures in K and
//! electric fields in V/nm. Angular frequencies are therefore in rad/ps.

/// Reduced Planck constant in meV·ps.
pub const HBAR: f64 = 0.658_211_956_9;

/// Boltzmann constant in meV/K.
pub const K_B: f64 = 0.086_173_332_62;

/// ħ²/(2 m₀) in meV·nm².
pub const HBAR2_OVER_2M0: f64 = 38.099_821_2;

/// e²/(4π ε₀) in meV·nm.
pub const COULOMB_MEV_NM: f64 = 1_439.964_548;

/// Energy gained by one elementary charge moved 1 nm in a 1 V/nm field.
pub const MEV_PER_V: f64 = 1_000.0;

/// SI constants used when assembling the phonon coupling prefactors.
pub mod si {
    pub const HBAR: f64 = 1.054_571_817e-34;
    pub const E_CHARGE: f64 = 1.602_176_634e-19;
    pub const EPS0: f64 = 8.854_187_812_8e-12;
}

/// Converts an energy in meV to an angular frequency in rad/ps.
#[inline]
pub fn mev_to_omega(e: f64) -> f64 {
    e / HBAR
}

/// Converts an angular frequency in rad/ps to an energy in meV.
#[inline]
pub fn omega_to_mev(w: f64) -> f64 {
    w * HBAR
}
