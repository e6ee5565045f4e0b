use num_complex::Complex64;

use super::SignalBuffer;
use crate::compensation::Window;
use crate::dft;
use crate::error::{Error, Result};
use crate::spacing::GainCurve;

/// Bins whose input amplitude estimate is below this fraction of the
/// maximum are excluded from a gain estimate.
pub const INPUT_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchParams {
    pub segment_len: usize,
    /// Fractional overlap of consecutive segments, in `[0, 1)`.
    pub overlap: f64,
    pub window: Window,
    pub nfft: usize,
}

impl WelchParams {
    /// Hann window, 50% overlap, `nfft = segment_len`.
    pub fn new(segment_len: usize) -> Self {
        WelchParams { segment_len, overlap: 0.5, window: Window::Hann, nfft: segment_len }
    }

    fn validate(&self, signal_len: usize) -> Result<()> {
        if self.segment_len < 2 {
            return Err(Error::input("Welch segment length must be >= 2"));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::input(format!("overlap must lie in [0, 1), got {}", self.overlap)));
        }
        if self.nfft < self.segment_len {
            return Err(Error::input("nfft must be >= segment length"));
        }
        if signal_len < self.segment_len {
            return Err(Error::input(format!(
                "signal has {signal_len} samples, one segment needs {}",
                self.segment_len
            )));
        }
        Ok(())
    }

    fn hop(&self) -> usize {
        ((self.segment_len as f64 * (1.0 - self.overlap)).round() as usize).max(1)
    }

    /// Positive-half bin frequencies.
    pub fn freqs(&self, sample_rate: f64) -> Vec<f64> {
        (0..=self.nfft / 2).map(|i| dft::bin_frequency(i, self.nfft, sample_rate)).collect()
    }
}

/// Windowed segment spectra, positive half, visited in order.
fn for_each_segment(x: &[f64], p: &WelchParams, mut visit: impl FnMut(&[Complex64])) -> usize {
    let w = p.window.coefficients(p.segment_len);
    let mut planner = rustfft::FftPlanner::new();
    let fft = planner.plan_fft_forward(p.nfft);
    let mut buf = vec![Complex64::new(0.0, 0.0); p.nfft];
    let mut count = 0;
    let mut start = 0;
    while start + p.segment_len <= x.len() {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = if i < p.segment_len {
                Complex64::new(x[start + i] * w[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        fft.process(&mut buf);
        visit(&buf[..=p.nfft / 2]);
        count += 1;
        start += p.hop();
    }
    count
}

/// Segment-averaged magnitude spectrum `E[|X|]`, positive half.
pub fn welch_amplitude(x: &[f64], p: &WelchParams) -> Result<Vec<f64>> {
    p.validate(x.len())?;
    let mut acc = vec![0.0; p.nfft / 2 + 1];
    let count = for_each_segment(x, p, |spec| {
        for (a, c) in acc.iter_mut().zip(spec) {
            *a += c.norm();
        }
    });
    Ok(acc.into_iter().map(|a| a / count as f64).collect())
}

/// One-sided power spectral density in units²/Hz.
pub fn welch_psd(x: &[f64], sample_rate: f64, p: &WelchParams) -> Result<Vec<f64>> {
    p.validate(x.len())?;
    let mut acc = vec![0.0; p.nfft / 2 + 1];
    let count = for_each_segment(x, p, |spec| {
        for (a, c) in acc.iter_mut().zip(spec) {
            *a += c.norm_sqr();
        }
    });
    let energy: f64 = p.window.coefficients(p.segment_len).iter().map(|w| w * w).sum();
    let scale = 1.0 / (count as f64 * sample_rate * energy);
    let last = acc.len() - 1;
    Ok(acc
        .into_iter()
        .enumerate()
        .map(|(i, a)| {
            let one_sided = if i == 0 || (i == last && p.nfft % 2 == 0) { 1.0 } else { 2.0 };
            a * scale * one_sided
        })
        .collect())
}

/// Gain estimate restricted to bins with usable input energy.
#[derive(Debug, Clone, PartialEq)]
pub struct LongTermGain {
    pub curve: GainCurve,
    /// Frequencies excluded by the input floor.
    pub invalid_freqs: Vec<f64>,
}

/// `E[|W y|] / E[|W x|]` per bin, both expectations estimated by averaging
/// Welch segments. Signals are trimmed to the shorter length.
pub fn long_term_gain(input: &SignalBuffer, output: &SignalBuffer, p: &WelchParams) -> Result<LongTermGain> {
    if input.sample_rate != output.sample_rate {
        return Err(Error::input(format!(
            "sample rates differ: {} vs {}",
            input.sample_rate, output.sample_rate
        )));
    }
    let len = input.len().min(output.len());
    let x = welch_amplitude(&input.samples[..len], p)?;
    let y = welch_amplitude(&output.samples[..len], p)?;
    let floor = INPUT_FLOOR * x.iter().cloned().fold(0.0, f64::max);
    let mut freqs = Vec::new();
    let mut gains = Vec::new();
    let mut invalid_freqs = Vec::new();
    for ((f, xa), ya) in p.freqs(input.sample_rate).into_iter().zip(&x).zip(&y) {
        if *xa > floor && *xa > 0.0 {
            freqs.push(f);
            gains.push(ya / xa);
        } else {
            invalid_freqs.push(f);
        }
    }
    Ok(LongTermGain { curve: GainCurve::new(freqs, gains)?, invalid_freqs })
}
