//! MSE-optimal linear compensation.
//!
//! Two routes to the same objective are provided: the closed-form per-bin
//! gain on the sampled frequency responses ([`optimal_gain_freq`]) and the
//! stacked-convolution least-squares FIR in the time domain
//! ([`optimal_filter_time`]). [`fir_from_gain`] turns a per-bin gain into a
//! causal linear-phase FIR for processing audio.

mod fir;
mod freq;
mod time;

pub use fir::{fir_from_gain, Window};
pub use freq::{
    optimal_gain_freq, optimal_gain_from_specs, restoration_residual, GainOptions, DEFAULT_REGULARIZATION,
};
pub use time::{optimal_filter_time, ConvolutionMode, TimeSolverOptions, ToeplitzOperator, ILL_CONDITIONED};

use num_complex::Complex64;

use crate::dft;
use crate::error::{Error, Result};
use crate::io::fmt_sig;

/// Per-bin compensation gain on an `nfft`-point DFT grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensationGain {
    /// Complex gain per DFT bin; conjugate symmetric.
    pub bins: Vec<Complex64>,
    pub sample_rate: f64,
    /// Real FIR the gain was derived from, when it came from the time-domain solver.
    pub derived_fir: Option<Vec<f64>>,
    /// Condition number of the normal matrix, time-domain solutions only.
    pub condition: Option<f64>,
    /// Set when the normal matrix condition number exceeds [`ILL_CONDITIONED`].
    pub ill_conditioned: bool,
}

impl CompensationGain {
    pub fn from_bins(bins: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        if bins.len() < 2 {
            return Err(Error::input("gain needs at least 2 bins"));
        }
        if bins.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Numerical("gain has non-finite bins".into()));
        }
        Ok(CompensationGain {
            bins,
            sample_rate,
            derived_fir: None,
            condition: None,
            ill_conditioned: false,
        })
    }

    pub fn nfft(&self) -> usize {
        self.bins.len()
    }

    /// Bin frequencies of the positive half, `0..=nfft/2`.
    pub fn positive_freqs(&self) -> Vec<f64> {
        let n = self.nfft();
        (0..=n / 2).map(|i| dft::bin_frequency(i, n, self.sample_rate)).collect()
    }

    /// Gain magnitudes of the positive half.
    pub fn positive_magnitudes(&self) -> Vec<f64> {
        self.bins[..=self.nfft() / 2].iter().map(|c| c.norm()).collect()
    }

    /// CSV `freq_hz,gain_linear,gain_db,phase_rad` over the positive half.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("freq_hz,gain_linear,gain_db,phase_rad\n");
        for (f, c) in self.positive_freqs().iter().zip(&self.bins) {
            let mag = c.norm();
            s.push_str(&format!(
                "{},{},{},{}\n",
                fmt_sig(*f),
                fmt_sig(mag),
                fmt_sig(20.0 * mag.log10()),
                fmt_sig(c.arg())
            ));
        }
        s
    }
}
