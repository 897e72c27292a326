//! Shared fixtures for the benchmarks: the source and samples of the
//! reference experiments at their usual scan settings.

use qoct_core::acquisition::{ScanMode, ScanPlan};
use qoct_core::sample::{GapSample, Sample, SingleLayer};
use qoct_core::spectra::SpdcSource;
use qoct_core::units::{mirror_to_delay, thz_to_omega, wavelength_to_omega};

pub fn source() -> SpdcSource {
    SpdcSource::new(wavelength_to_omega(656.5e-9), thz_to_omega(6.9e-3), thz_to_omega(8.7))
        .expect("valid source")
}

pub fn mirror() -> Sample {
    SingleLayer::mirror(0.0).into()
}

pub fn gap() -> Sample {
    let r = 2.5 / 4.5;
    GapSample::new(r, r, (1.0 - r * r).sqrt(), 110.67e-6, 30e-6, 12)
        .expect("valid gap")
        .into()
}

/// Piezo step scan over `+-half` of mirror travel.
pub fn step_plan(half: f64) -> ScanPlan {
    ScanPlan::new(ScanMode::default_step(), mirror_to_delay(-half), mirror_to_delay(half)).expect("valid plan")
}

/// Stepper scan across the gap sample.
pub fn continuous_plan() -> ScanPlan {
    ScanPlan::new(ScanMode::default_continuous(), 0.0, mirror_to_delay(320e-6)).expect("valid plan")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_consistent() {
        assert!(step_plan(60e-6).positions().len() > 1000);
        assert_eq!(continuous_plan().positions().len(), 1066);
        assert!(gap().respond(source().pump_center / 2.0).unwrap().norm() <= 1.0);
    }
}
