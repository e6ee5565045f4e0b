//! Linear auditory models: gammatone filterbanks sampled on a DFT grid.
//!
//! A [`Filterbank`] holds the complex frequency response of every channel on
//! the full `nfft`-point DFT grid (rows are channels, columns are bins). The
//! normal-hearing bank is built from a [`FilterbankSpec`]; the impaired bank
//! is derived from it with [`impair_filterbank`], which attenuates each
//! channel by the local hearing loss and broadens it by lowering its Q.

mod audiogram;
mod config;

pub(crate) use audiogram::interp_log_freq;
pub use audiogram::{audiogram_to_profile, smooth3, Audiogram, HearingLossProfile, BISGAARD_NAMES};
pub use config::{FilterbankConfig, QProfile, QScale, SpacingChoice};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dft;
use crate::error::{Error, Result};

/// Lower bound applied to normal-hearing Q values.
pub const MIN_NORMAL_Q: f64 = 0.5;

/// One channel of a gammatone filterbank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammatoneParams {
    /// Center frequency in Hz.
    pub cf: f64,
    /// Filter order.
    pub order: u32,
    /// Quality factor, `cf / bandwidth`.
    pub q: f64,
    /// Linear scalar gain.
    pub gain: f64,
}

impl GammatoneParams {
    pub fn new(cf: f64, order: u32, q: f64, gain: f64) -> Result<Self> {
        let p = GammatoneParams { cf, order, q, gain };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cf.is_finite() && self.cf > 0.0) {
            return Err(Error::input(format!("cf must be finite and > 0, got {}", self.cf)));
        }
        if self.order == 0 {
            return Err(Error::input("gammatone order must be >= 1"));
        }
        if !(self.q.is_finite() && self.q > 0.0) {
            return Err(Error::input(format!("q must be finite and > 0, got {}", self.q)));
        }
        if !(self.gain.is_finite() && self.gain >= 0.0) {
            return Err(Error::input(format!("gain must be finite and >= 0, got {}", self.gain)));
        }
        Ok(())
    }

    /// Bandwidth parameter `b = cf / q` in Hz.
    pub fn bandwidth(&self) -> f64 {
        self.cf / self.q
    }

    /// Response at a single frequency. No validation.
    #[inline]
    pub fn eval(&self, f: f64) -> Complex64 {
        eval_two_term(f, self.cf, self.bandwidth(), self.order) * self.gain
    }
}

/// `(1 + j(f - cf)/b)^-n + (1 + j(f + cf)/b)^-n`
#[inline]
pub(crate) fn eval_two_term(f: f64, cf: f64, b: f64, order: u32) -> Complex64 {
    let lower = Complex64::new(1.0, (f - cf) / b).inv();
    let upper = Complex64::new(1.0, (f + cf) / b).inv();
    if order == 1 {
        lower + upper
    } else {
        lower.powu(order) + upper.powu(order)
    }
}

/// Evaluate a gammatone channel at arbitrary frequencies.
pub fn gammatone_response(params: &GammatoneParams, freqs: &[f64]) -> Result<Vec<Complex64>> {
    params.validate()?;
    if let Some(f) = freqs.iter().find(|f| !f.is_finite()) {
        return Err(Error::input(format!("non-finite frequency {f}")));
    }
    Ok(freqs.iter().map(|&f| params.eval(f)).collect())
}

/// Channel layout plus the DFT grid it is sampled on.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterbankSpec {
    pub channels: Vec<GammatoneParams>,
    pub sample_rate: f64,
    pub nfft: usize,
}

impl FilterbankSpec {
    pub fn new(channels: Vec<GammatoneParams>, sample_rate: f64, nfft: usize) -> Result<Self> {
        let spec = FilterbankSpec { channels, sample_rate, nfft };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(Error::config("filterbank needs at least one channel"));
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::config(format!("invalid sample rate {}", self.sample_rate)));
        }
        if self.nfft < 2 {
            return Err(Error::config("nfft must be >= 2"));
        }
        let nyquist = self.sample_rate / 2.0;
        for (k, ch) in self.channels.iter().enumerate() {
            ch.validate()?;
            if ch.cf >= nyquist {
                return Err(Error::config(format!(
                    "channel {k}: cf {} Hz is not below Nyquist ({nyquist} Hz)",
                    ch.cf
                )));
            }
            if k > 0 && ch.cf <= self.channels[k - 1].cf {
                return Err(Error::config(format!(
                    "center frequencies must be strictly increasing (channel {k})"
                )));
            }
        }
        Ok(())
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn cfs(&self) -> Vec<f64> {
        self.channels.iter().map(|c| c.cf).collect()
    }

    pub fn qs(&self) -> Vec<f64> {
        self.channels.iter().map(|c| c.q).collect()
    }

    /// Positive-frequency half of one channel's sampled response, bins `0..=nfft/2`.
    ///
    /// The Nyquist bin of an even-length grid keeps only its real part so the
    /// full row is the DFT of a real sequence.
    pub(crate) fn half_row(&self, k: usize) -> Vec<Complex64> {
        let ch = &self.channels[k];
        let n = self.nfft;
        let mut row: Vec<Complex64> = (0..=n / 2)
            .map(|i| ch.eval(dft::bin_frequency(i, n, self.sample_rate)))
            .collect();
        row[0].im = 0.0;
        if n % 2 == 0 {
            row[n / 2].im = 0.0;
        }
        row
    }
}

/// A filterbank sampled on the full DFT grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Filterbank {
    pub spec: FilterbankSpec,
    /// Row-major `K x nfft` complex response.
    response: Vec<Complex64>,
    pub freq_grid: Vec<f64>,
}

impl Filterbank {
    pub fn num_channels(&self) -> usize {
        self.spec.channels.len()
    }

    pub fn nfft(&self) -> usize {
        self.spec.nfft
    }

    pub fn row(&self, k: usize) -> &[Complex64] {
        let n = self.spec.nfft;
        &self.response[k * n..(k + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Complex64]> {
        self.response.chunks_exact(self.spec.nfft)
    }

    pub fn at(&self, k: usize, bin: usize) -> Complex64 {
        self.response[k * self.spec.nfft + bin]
    }

    /// Build a bank directly from a response matrix. Used for synthetic
    /// models (ideal band filters, scaled copies) in analysis and tests.
    pub fn from_response(spec: FilterbankSpec, response: Vec<Complex64>) -> Result<Self> {
        if response.len() != spec.channels.len() * spec.nfft {
            return Err(Error::shape(format!(
                "response has {} entries, expected {} x {}",
                response.len(),
                spec.channels.len(),
                spec.nfft
            )));
        }
        let freq_grid = dft::frequency_grid(spec.nfft, spec.sample_rate);
        Ok(Filterbank { spec, response, freq_grid })
    }

    /// Copy with every response value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Filterbank {
        let mut out = self.clone();
        for v in &mut out.response {
            *v *= factor;
        }
        for ch in &mut out.spec.channels {
            ch.gain *= factor.abs();
        }
        out
    }

    /// Real impulse responses (inverse DFT of each row), `K x nfft`.
    pub fn impulse_responses(&self) -> Vec<Vec<f64>> {
        self.rows()
            .map(|row| dft::ifft(row).into_iter().map(|v| v.re).collect())
            .collect()
    }

    /// Largest ratio of imaginary to real energy over the inverse DFTs of all rows.
    pub fn impulse_imag_residue(&self) -> f64 {
        self.rows()
            .map(|row| {
                let t = dft::ifft(row);
                let re: f64 = t.iter().map(|v| v.re * v.re).sum::<f64>().sqrt();
                let im: f64 = t.iter().map(|v| v.im * v.im).sum::<f64>().sqrt();
                if re > 0.0 {
                    im / re
                } else {
                    im
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Sample every channel of `spec` on its DFT grid.
pub fn build_filterbank(spec: &FilterbankSpec) -> Result<Filterbank> {
    spec.validate()?;
    let n = spec.nfft;
    let rows: Vec<Vec<Complex64>> = (0..spec.channels.len())
        .into_par_iter()
        .map(|k| {
            let mut row = vec![Complex64::new(0.0, 0.0); n];
            row[..=n / 2].copy_from_slice(&spec.half_row(k));
            dft::mirror_conjugate(&mut row);
            row
        })
        .collect();
    let response = rows.concat();
    Ok(Filterbank {
        spec: spec.clone(),
        response,
        freq_grid: dft::frequency_grid(n, spec.sample_rate),
    })
}

/// Channel parameters of the impaired model: attenuated by the hearing loss
/// at each cf and broadened through the Q mapping of `profile`.
pub fn impair_spec(spec: &FilterbankSpec, profile: &HearingLossProfile) -> Result<FilterbankSpec> {
    let k = spec.channels.len();
    if profile.per_cf_hl.len() != k {
        return Err(Error::shape(format!(
            "profile has {} entries, filterbank has {k} channels",
            profile.per_cf_hl.len()
        )));
    }
    profile.validate()?;
    let q_hi = profile.impaired_q(&spec.qs())?;
    let channels = spec
        .channels
        .iter()
        .zip(&profile.per_cf_hl)
        .zip(q_hi)
        .map(|((ch, &hl), q)| GammatoneParams {
            cf: ch.cf,
            order: ch.order,
            q,
            gain: ch.gain * 10f64.powf(-hl / 20.0),
        })
        .collect();
    FilterbankSpec::new(channels, spec.sample_rate, spec.nfft)
}

/// Build the hearing-impaired counterpart of `bank`.
pub fn impair_filterbank(bank: &Filterbank, profile: &HearingLossProfile) -> Result<Filterbank> {
    build_filterbank(&impair_spec(&bank.spec, profile)?)
}
