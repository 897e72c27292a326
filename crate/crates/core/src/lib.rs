//! Simulation and analysis toolkit for Michelson-interferometer quantum
//! optical coherence tomography.
//!
//! The crate is organised bottom-up: [`spectra`] and [`sample`] describe the
//! light and the object, [`interferometer`] turns them into ideal
//! interferograms, [`acquisition`] adds the measurement, [`dsp`] and
//! [`reconstruct`] recover the structure again.

pub mod acquisition;
pub mod dsp;
pub mod error;
pub mod interferometer;
pub mod io;
pub mod reconstruct;
pub mod sample;
pub mod spectra;
pub mod units;

pub use acquisition::{
    acquire_runs,    apply_phase_jitter, average_phase_jitter, detection_rates, expected_rates, normalize_runs, simulate_scan,
    single_rates, Channel, Detector, MeasuredTrace, NoiseModel, NormalizedRuns, PhaseJitter,
    RateTrace, Run, RunSet, ScanMode, ScanPlan,
};
pub use dsp::{
    damped_least_squares, dft_magnitude, envelope_minmax, fit_gaussian_feature,
    fit_sinc_envelope, fit_two_gaussian_spectrum, lowpass_extract, savgol_smooth, FitOptions,
    FitResult, GaussianFeature, SpectrumTrace, TwoGaussianSpectralFit,
};
pub use error::{Error, Result};
pub use interferometer::{
    alpha_beta, closed_form_terms, compose, fourier_magnitudes, quadrature_terms,
    single_photon_interferogram, FourierMagnitudes, Interferogram, InterferogramKind,
    InterferogramTerms, QuadratureGrid, Scheme,
};
pub use reconstruct::{
    approximate_physical, extract_gap, fit_reconstruction, predict_amplitudes,
    refit_fixed_amplitudes, FeatureModel, PhysicalApproximation, ReconFit, Reconstruction,
};
pub use sample::{
    broadening_factors, DispersionReport, DispersiveSlab, GapSample, IndexModel, Material,
    Sample, SingleLayer,
};
pub use spectra::{
    fit_gaussian, gaussian_pdf, joint_density, load_tabulated, marginal, GaussianFit,
    GaussianSpectrum, SpdcSource, TabulatedSpectrum,
};
