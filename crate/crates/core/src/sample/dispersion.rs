//! Broadening of the interferogram terms by a dispersive window.
//!
//! With `kappa = (l / c) dn/d omega` evaluated at the degenerate frequency,
//! the HOM term broadens by `alpha_0 = sqrt(1 + delta^2 Delta^2 kappa^2)`
//! and the single-photon term by `alpha_1 = sqrt(1 + (delta^2 + Delta^2)^2 kappa^2 / 4)`.

use serde::{Deserialize, Serialize};

use super::Material;
use crate::error::{Error, Result};
use crate::spectra::SpdcSource;
use crate::units::SPEED_OF_LIGHT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionReport {
    /// `(l / c) dn/d omega` (s^2), `l` the round-trip path in the medium.
    pub kappa: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    /// `dn/d omega` at `omega_p / 2` (s).
    pub dn_domega: f64,
    /// Index at `omega_p / 2`.
    pub index: f64,
    /// Round-trip path in the medium (m).
    pub path_length: f64,
}

/// Broadening factors for a window of `thickness` traversed twice.
pub fn broadening_factors(
    src: &SpdcSource,
    material: &Material,
    thickness: f64,
) -> Result<DispersionReport> {
    if !(thickness >= 0.0 && thickness.is_finite()) {
        return Err(Error::invalid("thickness", format!("must be >= 0, got {thickness}")));
    }
    let omega0 = 0.5 * src.pump_center;
    let dn = material.dn_domega(omega0)?;
    let index = material.index(omega0)?;
    let l = 2.0 * thickness;
    let kappa = l / SPEED_OF_LIGHT * dn;
    let (d, p) = (src.phasematch_std, src.pump_std);
    let alpha0 = (1.0 + (p * d * kappa).powi(2)).sqrt();
    let alpha1 = (1.0 + ((p * p + d * d) * kappa).powi(2) / 4.0).sqrt();
    Ok(DispersionReport {
        kappa,
        alpha0,
        alpha1,
        dn_domega: dn,
        index,
        path_length: l,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{thz_to_omega, wavelength_to_omega};
    use proptest::prelude::*;

    fn source() -> SpdcSource {
        SpdcSource::new(
            wavelength_to_omega(656.5e-9),
            thz_to_omega(6.9e-3),
            thz_to_omega(8.7),
        )
        .unwrap()
    }

    #[test]
    fn zero_thickness_gives_unity() {
        let r = broadening_factors(&source(), &Material::silicon(), 0.0).unwrap();
        assert_eq!(r.alpha0, 1.0);
        assert_eq!(r.alpha1, 1.0);
    }

    #[test]
    fn five_mm_silicon() {
        let r = broadening_factors(&source(), &Material::silicon(), 5e-3).unwrap();
        assert!((r.alpha1 - 6.64).abs() <= 0.02 * 6.64, "{}", r.alpha1);
        assert!(((r.alpha0 - 1.0) - 5.5e-5).abs() <= 0.2 * 5.5e-5, "{}", r.alpha0 - 1.0);
    }

    #[test]
    fn window_violation_propagates() {
        let src = SpdcSource::new(wavelength_to_omega(400e-9), 1e9, 1e13).unwrap();
        assert!(matches!(
            broadening_factors(&src, &Material::silicon(), 1e-3),
            Err(Error::OutsideValidityWindow { .. })
        ));
    }

    proptest! {
        #[test]
        fn ordering_of_factors(t in 0.0f64..0.02, pm_thz in 1.0f64..20.0, pump_ghz in 0.1f64..100.0) {
            let src = SpdcSource::new(
                wavelength_to_omega(656.5e-9),
                thz_to_omega(pump_ghz * 1e-3),
                thz_to_omega(pm_thz),
            ).unwrap();
            let r = broadening_factors(&src, &Material::silicon(), t).unwrap();
            prop_assert!(r.alpha0 >= 1.0 && r.alpha1 >= 1.0);
            let dp = src.delta_plus();
            if src.pump_std <= dp * dp / (2.0 * src.phasematch_std) {
                prop_assert!(r.alpha0 <= r.alpha1);
            }
        }

        #[test]
        fn monotone_in_thickness(a in 0.0f64..0.01, b in 0.0f64..0.01) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let m = Material::silicon();
            let r0 = broadening_factors(&source(), &m, lo).unwrap();
            let r1 = broadening_factors(&source(), &m, hi).unwrap();
            prop_assert!(r0.alpha1 <= r1.alpha1 && r0.alpha0 <= r1.alpha0);
        }
    }
}
