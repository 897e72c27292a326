//! Signal processing for measured interferograms: transforms, filters,
//! smoothing and least-squares fits.

mod fft;
mod fit;
pub mod lm;
mod savgol;

pub use fft::{
    analytic_signal, dft_magnitude, lowpass_extract, mean_power_spectrum, nyquist, uniform_step,
    unitary_dft, unitary_idft, SpectrumTrace,
};
pub use fit::{
    envelope, fit_gaussian_feature, fit_sinc_envelope, fit_two_gaussian_spectrum, sinc,
    FeatureSign, GaussianFeature, SincEnvelopeFit, TwoGaussianSpectralFit, TWO_GAUSSIAN_WINDOW,
};
pub use lm::{damped_least_squares, finite_difference_jacobian, FitOptions, FitResult};
pub use savgol::{envelope_minmax, savgol_smooth};
