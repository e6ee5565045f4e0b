//! Evaluation metrics: long-term gain, the segmented MAE loss family,
//! the low-frequency penalty, FMAE and per-channel SER.

mod loss;
mod noise;
mod welch;

pub use loss::{
    composite_loss, denormalize, estimate_fmae_weights, fmae, low_freq_penalty, plain_mae, segment_samples,
    segmented_mae, segmented_mae_samples, ser, FmaeWeights, COMPOSITE_SEGMENTS_MS, LOW_FREQ_CUTOFF_HZ, SER_CAP_DB,
};
pub use noise::{convolve_fir, make_noise, speech_shaping_filter, NoiseKind};
pub use welch::{long_term_gain, welch_amplitude, welch_psd, LongTermGain, WelchParams, INPUT_FLOOR};

use crate::error::{Error, Result};

/// Level in dB SPL assigned to a digital RMS of 1.0 unless stated otherwise.
pub const DEFAULT_FULL_SCALE_SPL: f64 = 100.0;

/// A mono waveform with its sample rate and level calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    /// dB SPL corresponding to an RMS of 1.0.
    pub spl_db: f64,
}

impl SignalBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        Self::with_calibration(samples, sample_rate, DEFAULT_FULL_SCALE_SPL)
    }

    pub fn with_calibration(samples: Vec<f64>, sample_rate: f64, spl_db: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::input(format!("invalid sample rate {sample_rate}")));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::input("signal contains non-finite samples"));
        }
        if !spl_db.is_finite() {
            return Err(Error::input("calibration level must be finite"));
        }
        Ok(SignalBuffer { samples, sample_rate, spl_db })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    /// Level in dB SPL under this buffer's calibration.
    pub fn spl(&self) -> f64 {
        self.spl_db + 20.0 * self.rms().log10()
    }

    /// Rescale in place so that [`spl`](Self::spl) equals `target_db`.
    pub fn normalize_spl(&mut self, target_db: f64) -> Result<()> {
        let rms = self.rms();
        if rms == 0.0 {
            return Err(Error::input("cannot set the level of a silent signal"));
        }
        let scale = 10f64.powf((target_db - self.spl_db) / 20.0) / rms;
        for s in &mut self.samples {
            *s *= scale;
        }
        Ok(())
    }
}

/// Auditory-model channel outputs, `K x T`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelResponseSet {
    data: Vec<f64>,
    k: usize,
    t: usize,
    pub sample_rate: f64,
    /// Segment lengths used by the composite loss.
    pub segment_lengths_ms: Vec<f64>,
}

impl ChannelResponseSet {
    pub fn new(data: Vec<f64>, k: usize, t: usize, sample_rate: f64) -> Result<Self> {
        if k == 0 || t == 0 {
            return Err(Error::input("channel responses need K >= 1 and T >= 1"));
        }
        if data.len() != k * t {
            return Err(Error::shape(format!("{} values for a {k} x {t} matrix", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("channel responses contain non-finite values"));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::input(format!("invalid sample rate {sample_rate}")));
        }
        Ok(ChannelResponseSet { data, k, t, sample_rate, segment_lengths_ms: COMPOSITE_SEGMENTS_MS.to_vec() })
    }

    pub fn from_rows(rows: &[Vec<f64>], sample_rate: f64) -> Result<Self> {
        let t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t) {
            return Err(Error::shape("rows differ in length"));
        }
        Self::new(rows.concat(), rows.len(), t, sample_rate)
    }

    /// `(K, T)`
    pub fn shape(&self) -> (usize, usize) {
        (self.k, self.t)
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.t..(k + 1) * self.t]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.t)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn same_shape(&self, other: &ChannelResponseSet) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!(
                "channel responses are {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }
}
