use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;

use super::CompensationGain;
use crate::dft;
use crate::error::{Error, Result};

/// Truncation window for FIR design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Rectangular,
    Hann,
    Hamming,
    Blackman,
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rect" | "rectangular" | "boxcar" => Ok(Window::Rectangular),
            "hann" | "hanning" => Ok(Window::Hann),
            "hamming" => Ok(Window::Hamming),
            "blackman" => Ok(Window::Blackman),
            other => Err(Error::input(format!("unknown window '{other}'"))),
        }
    }
}

impl Window {
    /// Symmetric window of length `len`.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        if len == 1 {
            return vec![1.0];
        }
        let m = (len - 1) as f64;
        (0..len)
            .map(|i| {
                let x = 2.0 * PI * i as f64 / m;
                match self {
                    Window::Rectangular => 1.0,
                    Window::Hann => 0.5 - 0.5 * x.cos(),
                    Window::Hamming => 0.54 - 0.46 * x.cos(),
                    Window::Blackman => 0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos(),
                }
            })
            .collect()
    }
}

/// Linear-phase FIR of `taps` coefficients approximating `|gain|`.
///
/// The magnitude is given a delay of `(taps - 1) / 2` samples, transformed
/// back to the time domain, and the first `taps` samples are windowed.
pub fn fir_from_gain(gain: &CompensationGain, taps: usize, window: Window) -> Result<Vec<f64>> {
    let n = gain.nfft();
    if taps == 0 || taps > n {
        return Err(Error::input(format!("taps must be in 1..={n}, got {taps}")));
    }
    let delay = (taps as f64 - 1.0) / 2.0;
    let spectrum: Vec<Complex64> = gain
        .bins
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let k = dft::bin_frequency(i, n, n as f64);
            Complex64::from_polar(c.norm(), -2.0 * PI * k * delay / n as f64)
        })
        .collect();
    let impulse = dft::ifft(&spectrum);
    let w = window.coefficients(taps);
    Ok(impulse[..taps].iter().zip(w).map(|(h, w)| h.re * w).collect())
}
