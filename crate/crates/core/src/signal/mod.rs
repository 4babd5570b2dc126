//! Epoch data model and the signal-processing primitives shared by every
//! other module: synthesis, IIR preprocessing, FFT, windowing and file I/O.

mod epoch;
pub mod filter;
pub mod io;
mod spectrum;
mod synth;
mod window;

pub use epoch::{Epoch, FrequencyTable, StimulusSpec};
pub use filter::{chebyshev_bandpass, discard_head, notch_50hz, Preprocess};
pub use spectrum::{
    amplitude_spectrum, fft_forward, ifft_inverse, ifft_inverse_with_residue, ComplexSpectrum,
};
pub use synth::{default_harmonic_amps, generate_ssvep, SsvepParams};
pub use window::{first_window, sliding_windows};
