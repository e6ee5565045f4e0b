//! Mono WAV input and output.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Float32,
}

impl std::str::FromStr for WavFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.to_ascii_lowercase().as_str() {
            "pcm16" | "i16" => Ok(WavFormat::Pcm16),
            "float32" | "f32" => Ok(WavFormat::Float32),
            _ => Err(CliError::Config(format!("unknown WAV format '{s}' (pcm16 or float32)"))),
        }
    }
}

/// Samples scaled to [-1, 1) and the sample rate.
pub fn read_mono(path: &Path) -> Result<(Vec<f64>, f64), CliError> {
    let reader = WavReader::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(CliError::Config(format!(
            "{}: {} channels; only mono files are supported",
            path.display(),
            spec.channels
        )));
    }
    let bad = |e: hound::Error| CliError::Config(format!("{}: {e}", path.display()));
    let samples = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<Vec<_>, _>>()
            .map_err(bad)?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<Result<Vec<_>, _>>()
            .map_err(bad)?,
        (fmt, bits) => {
            return Err(CliError::Config(format!(
                "{}: {bits}-bit {fmt:?} samples; use 16-bit PCM or 32-bit float",
                path.display()
            )))
        }
    };
    Ok((samples, spec.sample_rate as f64))
}

pub fn write_mono(path: &Path, samples: &[f64], sample_rate: f64, format: WavFormat) -> Result<(), CliError> {
    if sample_rate.fract() != 0.0 || !(1.0..=u32::MAX as f64).contains(&sample_rate) {
        return Err(CliError::Config(format!("WAV needs an integer sample rate, got {sample_rate}")));
    }
    let (bits, sample_format) = match format {
        WavFormat::Pcm16 => (16, SampleFormat::Int),
        WavFormat::Float32 => (32, SampleFormat::Float),
    };
    let spec = WavSpec { channels: 1, sample_rate: sample_rate as u32, bits_per_sample: bits, sample_format };
    let io = |e: hound::Error| CliError::Config(format!("{}: {e}", path.display()));
    let mut w = WavWriter::create(path, spec).map_err(io)?;
    match format {
        WavFormat::Pcm16 => {
            if let Some(peak) = samples.iter().map(|v| v.abs()).reduce(f64::max).filter(|p| *p > 1.0) {
                return Err(CliError::Config(format!("peak {peak:.3} would clip in 16-bit PCM")));
            }
            for &v in samples {
                w.write_sample((v * 32767.0).round() as i16).map_err(io)?;
            }
        }
        WavFormat::Float32 => {
            for &v in samples {
                w.write_sample(v as f32).map_err(io)?;
            }
        }
    }
    w.finalize().map_err(io)
}
