use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::str::FromStr;

use super::SignalBuffer;
use crate::compensation::{fir_from_gain, CompensationGain, Window};
use crate::dft;
use crate::error::{Error, Result};
use crate::io::read_pair_table;
use crate::model::interp_log_freq;

const LTASS: &str = include_str!("../../data/ltass.csv");
/// Taps of the speech-shaping filter.
pub const SHAPING_TAPS: usize = 1025;
const SHAPING_NFFT: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    White,
    SpeechShaped,
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "white" => Ok(NoiseKind::White),
            "speech_shaped" | "speech" | "ssn" => Ok(NoiseKind::SpeechShaped),
            _ => Err(Error::input(format!("unknown noise kind '{s}'"))),
        }
    }
}

/// Linear-phase FIR whose magnitude follows the long-term average speech
/// spectrum, scaled to unit power gain.
pub fn speech_shaping_filter(sample_rate: f64) -> Result<Vec<f64>> {
    let table = read_pair_table(LTASS, "freq_hz", "level_db")?;
    let peak = table.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let rel: Vec<(f64, f64)> = table.iter().map(|&(f, l)| (f, l - peak)).collect();
    let bins: Vec<Complex64> = dft::frequency_grid(SHAPING_NFFT, sample_rate)
        .into_iter()
        .map(|f| {
            let f = f.abs().max(rel[0].0);
            Complex64::new(10f64.powf(interp_log_freq(&rel, f) / 20.0), 0.0)
        })
        .collect();
    let gain = CompensationGain::from_bins(bins, sample_rate)?;
    let mut h = fir_from_gain(&gain, SHAPING_TAPS, Window::Hann)?;
    let power: f64 = h.iter().map(|v| v * v).sum();
    let s = 1.0 / power.sqrt();
    h.iter_mut().for_each(|v| *v *= s);
    Ok(h)
}

/// Causal FIR filtering, output truncated to the input length.
pub fn convolve_fir(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return vec![0.0; x.len()];
    }
    let n = (x.len() + h.len() - 1).next_power_of_two();
    let pad = |v: &[f64]| {
        let mut b: Vec<Complex64> = v.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        b.resize(n, Complex64::new(0.0, 0.0));
        b
    };
    let mut a = pad(x);
    let mut b = pad(h);
    dft::fft_in_place(&mut a);
    dft::fft_in_place(&mut b);
    for (p, q) in a.iter_mut().zip(&b) {
        *p *= q;
    }
    dft::ifft(&a)[..x.len()].iter().map(|c| c.re).collect()
}

/// Deterministic noise for a given seed. White noise is unit-variance
/// Gaussian; speech-shaped noise is that passed through
/// [`speech_shaping_filter`].
pub fn make_noise(kind: NoiseKind, duration_s: f64, sample_rate: f64, seed: u64) -> Result<SignalBuffer> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::input(format!("duration must be positive, got {duration_s}")));
    }
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::input(format!("invalid sample rate {sample_rate}")));
    }
    let n = (duration_s * sample_rate).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let samples = match kind {
        NoiseKind::White => white,
        NoiseKind::SpeechShaped => convolve_fir(&white, &speech_shaping_filter(sample_rate)?),
    };
    SignalBuffer::new(samples, sample_rate)
}
