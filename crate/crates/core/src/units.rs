//! Physical constants and the named unit converters used across the crate.
//!
//! Internal conventions: angular frequency in rad/fs, time in fs, wavelength in
//! nm, transverse lengths in µm, optical path lengths in mm. SI values only
//! appear at the boundaries of the rate formulas.

use std::f64::consts::PI;

/// Vacuum speed of light, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Planck constant, J·s (exact).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in nm/fs.
pub const C_NM_PER_FS: f64 = SPEED_OF_LIGHT * 1e-6;
/// Speed of light in µm/fs.
pub const C_UM_PER_FS: f64 = SPEED_OF_LIGHT * 1e-9;

/// Angular frequency (rad/fs) of light with vacuum wavelength `nm`.
pub fn wavelength_to_omega(nm: f64) -> f64 {
    2.0 * PI * C_NM_PER_FS / nm
}

/// Vacuum wavelength (nm) of light with angular frequency `omega` (rad/fs).
pub fn omega_to_wavelength(omega: f64) -> f64 {
    2.0 * PI * C_NM_PER_FS / omega
}

/// Half width (rad/fs) of a band symmetric in frequency around the carrier of
/// wavelength `center_nm`, chosen so that its edges are exactly `width_nm`
/// apart on the wavelength axis.
pub fn wavelength_width_to_half_omega(center_nm: f64, width_nm: f64) -> f64 {
    let omega_c = wavelength_to_omega(center_nm);
    let k = 4.0 * PI * C_NM_PER_FS;
    // positive root of width·h² + k·h − width·ω_c² = 0, written without cancellation
    2.0 * width_nm * omega_c * omega_c / (k + (k * k + 4.0 * width_nm * width_nm * omega_c * omega_c).sqrt())
}

/// Wavelength distance (nm) between the two edges of the band
/// `omega_c ± half_omega`.
pub fn half_omega_to_wavelength_width(omega_c: f64, half_omega: f64) -> f64 {
    omega_to_wavelength(omega_c - half_omega) - omega_to_wavelength(omega_c + half_omega)
}

/// Photon energy in joules at wavelength `nm`.
pub fn photon_energy(nm: f64) -> f64 {
    PLANCK * SPEED_OF_LIGHT / (nm * 1e-9)
}

/// Photon flux (photons/s) of a beam of power `watts` at wavelength `nm`.
pub fn watts_to_photon_flux(watts: f64, nm: f64) -> f64 {
    watts / photon_energy(nm)
}

/// Optical frequency bandwidth (Hz) corresponding to `width_nm` around `center_nm`
/// to first order.
pub fn wavelength_width_to_hz(center_nm: f64, width_nm: f64) -> f64 {
    SPEED_OF_LIGHT * (width_nm * 1e-9) / (center_nm * 1e-9).powi(2)
}

pub fn um_to_m(um: f64) -> f64 {
    um * 1e-6
}

pub fn um2_to_cm2(um2: f64) -> f64 {
    um2 * 1e-8
}

pub fn fs_to_s(fs: f64) -> f64 {
    fs * 1e-15
}

/// FWHM of a Gaussian from its standard deviation.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;
