//! Physical constants and unit conversions used at the crate boundary.
//!
//! Internally every frequency is an angular frequency in rad/s, every delay
//! is in seconds and every length in metres.

use std::f64::consts::PI;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Ratio FWHM / standard deviation of a Gaussian, `2 sqrt(2 ln 2)`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Vacuum wavelength (m) to angular frequency (rad/s).
pub fn wavelength_to_omega(wavelength: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / wavelength
}

/// Angular frequency (rad/s) to vacuum wavelength (m).
pub fn omega_to_wavelength(omega: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / omega
}

/// Converts a wavelength-domain width `d_lambda` around `center_wavelength`
/// into an angular-frequency width, `2 pi c d_lambda / lambda^2`.
pub fn wavelength_width_to_omega(d_lambda: f64, center_wavelength: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT * d_lambda / (center_wavelength * center_wavelength)
}

/// Terahertz (ordinary frequency) to rad/s.
pub fn thz_to_omega(thz: f64) -> f64 {
    2.0 * PI * thz * 1e12
}

pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / FWHM_PER_SIGMA
}

pub fn sigma_to_fwhm(sigma: f64) -> f64 {
    sigma * FWHM_PER_SIGMA
}

/// Reference-mirror displacement (m) to optical delay (s); the beam
/// crosses the displaced path twice.
pub fn mirror_to_delay(displacement: f64) -> f64 {
    2.0 * displacement / SPEED_OF_LIGHT
}

/// Optical delay (s) to reference-mirror displacement (m).
pub fn delay_to_mirror(delay: f64) -> f64 {
    0.5 * delay * SPEED_OF_LIGHT
}

/// Optical delay (s) to delay-equivalent path length (m), `c tau`.
pub fn delay_to_path(delay: f64) -> f64 {
    delay * SPEED_OF_LIGHT
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifty_nm_at_1313_is_about_8p7_thz() {
        let w = wavelength_width_to_omega(50e-9, 1313e-9);
        let thz = w / (2.0 * PI) / 1e12;
        assert!((thz - 8.7).abs() < 0.01, "{thz}");
    }

    #[test]
    fn fwhm_constant() {
        assert!((FWHM_PER_SIGMA - 2.0 * (2.0 * 2f64.ln()).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mirror_delay_roundtrip() {
        let x = 12.345e-6;
        assert!((delay_to_mirror(mirror_to_delay(x)) - x).abs() < 1e-18);
    }
}
