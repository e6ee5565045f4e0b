use super::ChannelResponseSet;
use crate::dft;
use crate::error::{Error, Result};

/// Segment lengths of the composite loss, in milliseconds.
pub const COMPOSITE_SEGMENTS_MS: [f64; 3] = [1.0, 10.0, 100.0];
pub const LOW_FREQ_CUTOFF_HZ: f64 = 20.0;
pub const SER_CAP_DB: f64 = 300.0;

/// Samples per segment for a duration in milliseconds, at least one.
pub fn segment_samples(ms: f64, sample_rate: f64) -> Result<usize> {
    if !(ms.is_finite() && ms > 0.0) {
        return Err(Error::input(format!("segment length must be positive, got {ms} ms")));
    }
    Ok(((ms * sample_rate / 1000.0).round() as usize).max(1))
}

fn segment_means(row: &[f64], seg: usize) -> impl Iterator<Item = f64> + '_ {
    row.chunks(seg).map(|c| c.iter().sum::<f64>() / c.len() as f64)
}

/// Mean over channels of the mean absolute difference between
/// segment averages. The final segment may be shorter than `seg`.
pub fn segmented_mae_samples(nh: &ChannelResponseSet, hi: &ChannelResponseSet, seg: usize) -> Result<f64> {
    nh.same_shape(hi)?;
    if seg == 0 {
        return Err(Error::input("segment length must be >= 1 sample"));
    }
    let (k, t) = nh.shape();
    let n_seg = t.div_ceil(seg);
    let total: f64 = nh
        .rows()
        .zip(hi.rows())
        .map(|(a, b)| {
            segment_means(a, seg).zip(segment_means(b, seg)).map(|(x, y)| (x - y).abs()).sum::<f64>()
                / n_seg as f64
        })
        .sum();
    Ok(total / k as f64)
}

pub fn segmented_mae(nh: &ChannelResponseSet, hi: &ChannelResponseSet, segment_ms: f64) -> Result<f64> {
    if nh.sample_rate != hi.sample_rate {
        return Err(Error::input("channel responses have different sample rates"));
    }
    segmented_mae_samples(nh, hi, segment_samples(segment_ms, nh.sample_rate)?)
}

/// Elementwise mean absolute error.
pub fn plain_mae(nh: &ChannelResponseSet, hi: &ChannelResponseSet) -> Result<f64> {
    nh.same_shape(hi)?;
    let sum: f64 = nh.data().iter().zip(hi.data()).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / nh.data().len() as f64)
}

/// Sum of `|X_i - Y_i|` over non-negative DFT bins below `cutoff_hz`.
pub fn low_freq_penalty(x: &[f64], y: &[f64], sample_rate: f64, cutoff_hz: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::shape(format!("signals have {} and {} samples", x.len(), y.len())));
    }
    if x.is_empty() {
        return Err(Error::input("signals are empty"));
    }
    let n = x.len();
    let fx = dft::fft_real(x);
    let fy = dft::fft_real(y);
    Ok((0..=n / 2)
        .take_while(|&i| dft::bin_frequency(i, n, sample_rate) < cutoff_hz)
        .map(|i| (fx[i] - fy[i]).norm())
        .sum())
}

/// Sum of the segmented MAE at each of `nh.segment_lengths_ms` plus
/// `gamma` times the low-frequency penalty between `x` and `y`.
pub fn composite_loss(
    nh: &ChannelResponseSet,
    hi: &ChannelResponseSet,
    x: &[f64],
    y: &[f64],
    gamma: f64,
) -> Result<f64> {
    let mut loss = 0.0;
    for &ms in &nh.segment_lengths_ms {
        loss += segmented_mae(nh, hi, ms)?;
    }
    Ok(loss + gamma * low_freq_penalty(x, y, nh.sample_rate, LOW_FREQ_CUTOFF_HZ)?)
}

/// Per-channel scale `beta` and per-channel, per-level weights `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct FmaeWeights {
    pub beta: Vec<f64>,
    /// `alpha[k][level]`
    pub alpha: Vec<Vec<f64>>,
}

/// Estimate weights from reference responses grouped by level:
/// `beta_k` is the channel RMS over everything, `alpha[k][l]` the
/// reciprocal of the mean absolute output of channel `k` at level `l`.
pub fn estimate_fmae_weights(by_level: &[Vec<ChannelResponseSet>]) -> Result<FmaeWeights> {
    let first = by_level
        .iter()
        .flat_map(|v| v.first())
        .next()
        .ok_or_else(|| Error::input("no reference responses"))?;
    let k = first.shape().0;
    if by_level.iter().any(Vec::is_empty) {
        return Err(Error::input("every level needs at least one response"));
    }
    if by_level.iter().flatten().any(|s| s.shape().0 != k) {
        return Err(Error::shape("responses differ in channel count"));
    }
    let mut beta = Vec::with_capacity(k);
    let mut alpha = Vec::with_capacity(k);
    for ch in 0..k {
        let mut sq = 0.0;
        let mut n = 0usize;
        let mut row_alpha = Vec::with_capacity(by_level.len());
        for (l, sets) in by_level.iter().enumerate() {
            let mut abs = 0.0;
            let mut m = 0usize;
            for s in sets {
                let r = s.row(ch);
                sq += r.iter().map(|v| v * v).sum::<f64>();
                abs += r.iter().map(|v| v.abs()).sum::<f64>();
                n += r.len();
                m += r.len();
            }
            let mean = abs / m as f64;
            if mean == 0.0 {
                return Err(Error::input(format!("channel {ch} is silent at level {l}")));
            }
            row_alpha.push(1.0 / mean);
        }
        beta.push((sq / n as f64).sqrt());
        alpha.push(row_alpha);
    }
    Ok(FmaeWeights { beta, alpha })
}

/// Weighted absolute error between scaled reference responses
/// `beta_k f_k` and emulator outputs, averaged over `T K`.
pub fn fmae(truth: &ChannelResponseSet, emulated: &ChannelResponseSet, w: &FmaeWeights, level: usize) -> Result<f64> {
    truth.same_shape(emulated)?;
    let (k, t) = truth.shape();
    if w.beta.len() != k || w.alpha.len() != k {
        return Err(Error::shape(format!("weights cover {} channels, responses have {k}", w.beta.len())));
    }
    let mut total = 0.0;
    for ch in 0..k {
        let a = *w.alpha[ch]
            .get(level)
            .ok_or_else(|| Error::input(format!("no weight for level index {level}")))?;
        let b = w.beta[ch];
        let err: f64 = truth.row(ch).iter().zip(emulated.row(ch)).map(|(f, e)| (b * f - e).abs()).sum();
        total += a * err;
    }
    Ok(total / (t * k) as f64)
}

/// Undo the per-channel scaling: `f_k = emulated_k / beta_k`.
pub fn denormalize(emulated: &ChannelResponseSet, beta: &[f64]) -> Result<ChannelResponseSet> {
    let (k, t) = emulated.shape();
    if beta.len() != k {
        return Err(Error::shape(format!("{} scales for {k} channels", beta.len())));
    }
    if beta.iter().any(|b| !(b.is_finite() && *b != 0.0)) {
        return Err(Error::input("scales must be finite and non-zero"));
    }
    let data = emulated
        .rows()
        .zip(beta)
        .flat_map(|(r, b)| r.iter().map(move |v| v / b))
        .collect();
    let mut out = ChannelResponseSet::new(data, k, t, emulated.sample_rate)?;
    out.segment_lengths_ms = emulated.segment_lengths_ms.clone();
    Ok(out)
}

/// Signal-to-error ratio per channel in dB, `None` where the reference
/// channel is silent. Capped at `SER_CAP_DB` in both directions.
pub fn ser(truth: &ChannelResponseSet, estimate: &ChannelResponseSet) -> Result<Vec<Option<f64>>> {
    truth.same_shape(estimate)?;
    Ok(truth
        .rows()
        .zip(estimate.rows())
        .map(|(f, e)| {
            let sig: f64 = f.iter().map(|v| v * v).sum();
            if sig == 0.0 {
                return None;
            }
            let err: f64 = f.iter().zip(e).map(|(a, b)| (a - b) * (a - b)).sum();
            if err == 0.0 {
                return Some(SER_CAP_DB);
            }
            Some((10.0 * (sig / err).log10()).clamp(-SER_CAP_DB, SER_CAP_DB))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(rows: &[&[f64]], fs: f64) -> ChannelResponseSet {
        ChannelResponseSet::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), fs).unwrap()
    }

    #[test]
    fn segmented_mae_hand_example() {
        let a = set(&[&[1.0, 3.0, 0.0, 0.0]], 1000.0);
        let b = set(&[&[0.0, 0.0, 2.0, 2.0]], 1000.0);
        // Segments of 2: means (2, 0) vs (0, 2), mean abs diff = 2.
        assert_eq!(segmented_mae_samples(&a, &b, 2).unwrap(), 2.0);
        // One segment covering everything: means 1 vs 1.
        assert_eq!(segmented_mae_samples(&a, &b, 4).unwrap(), 0.0);
        // Segment length one is the plain MAE.
        assert_eq!(segmented_mae_samples(&a, &b, 1).unwrap(), plain_mae(&a, &b).unwrap());
    }

    #[test]
    fn partial_last_segment() {
        let a = set(&[&[1.0, 1.0, 1.0, 4.0, 0.0]], 1000.0);
        let b = set(&[&[0.0; 5]], 1000.0);
        // Means: 1, 2.5, 0
        assert!((segmented_mae_samples(&a, &b, 2).unwrap() - 3.5 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ms_to_samples() {
        assert_eq!(segment_samples(1.0, 16000.0).unwrap(), 16);
        assert_eq!(segment_samples(0.01, 16000.0).unwrap(), 1);
        assert!(segment_samples(0.0, 16000.0).is_err());
    }

    #[test]
    fn low_freq_penalty_oracle() {
        // Direct DFT sum over bins below the cutoff.
        let n = 64;
        let fs = 640.0;
        let x: Vec<f64> = (0..n).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let y: Vec<f64> = (0..n).map(|i| ((i * 3 % 13) as f64 - 6.0) / 4.0).collect();
        let mut expected = 0.0;
        for k in 0..=n / 2 {
            if k as f64 * fs / n as f64 >= 35.0 {
                break;
            }
            let (mut re, mut im) = (0.0, 0.0);
            for i in 0..n {
                let ph = -2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64;
                re += (x[i] - y[i]) * ph.cos();
                im += (x[i] - y[i]) * ph.sin();
            }
            expected += (re * re + im * im).sqrt();
        }
        let got = low_freq_penalty(&x, &y, fs, 35.0).unwrap();
        assert!((got - expected).abs() < 1e-10 * expected.max(1.0), "{got} {expected}");
        assert_eq!(low_freq_penalty(&x, &x, fs, 35.0).unwrap(), 0.0);
        assert!(low_freq_penalty(&x, &y[1..], fs, 35.0).is_err());
    }

    #[test]
    fn composite_is_sum_of_terms() {
        let a = set(&[&[0.5; 400], &[0.1; 400]], 16000.0);
        let mut rows = vec![vec![0.2; 400], vec![0.4; 400]];
        rows[0][17] = 3.0;
        let b = ChannelResponseSet::from_rows(&rows, 16000.0).unwrap();
        let x: Vec<f64> = (0..800).map(|i| (i as f64 * 0.01).sin()).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.8 * v).collect();
        let expected = segmented_mae(&a, &b, 1.0).unwrap()
            + segmented_mae(&a, &b, 10.0).unwrap()
            + segmented_mae(&a, &b, 100.0).unwrap()
            + 0.3 * low_freq_penalty(&x, &y, 16000.0, 20.0).unwrap();
        assert_eq!(composite_loss(&a, &b, &x, &y, 0.3).unwrap(), expected);
        assert!(composite_loss(&a, &a, &x, &x, 1.0).unwrap() == 0.0);
    }

    #[test]
    fn fmae_with_perfect_scaled_output_is_zero() {
        let truth = set(&[&[1.0, -2.0, 3.0], &[0.5, 0.5, -0.5]], 1000.0);
        let w = estimate_fmae_weights(&[vec![truth.clone()]]).unwrap();
        assert!((w.beta[0] - (14.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((w.alpha[0][0] - 0.5).abs() < 1e-15);
        assert!((w.alpha[1][0] - 2.0).abs() < 1e-15);
        let scaled: Vec<Vec<f64>> =
            truth.rows().zip(&w.beta).map(|(r, b)| r.iter().map(|v| v * b).collect()).collect();
        let em = ChannelResponseSet::from_rows(&scaled, 1000.0).unwrap();
        assert!(fmae(&truth, &em, &w, 0).unwrap() < 1e-15);
        let back = denormalize(&em, &w.beta).unwrap();
        for (a, b) in back.data().iter().zip(truth.data()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(fmae(&truth, &em, &w, 1).is_err());
    }

    #[test]
    fn fmae_hand_example() {
        let truth = set(&[&[1.0, 1.0]], 1000.0);
        let em = set(&[&[0.0, 4.0]], 1000.0);
        let w = FmaeWeights { beta: vec![2.0], alpha: vec![vec![0.5]] };
        // |2 - 0| + |2 - 4| = 4, times 0.5, over T K = 2.
        assert_eq!(fmae(&truth, &em, &w, 0).unwrap(), 1.0);
    }

    #[test]
    fn silent_level_is_rejected() {
        let z = set(&[&[0.0, 0.0]], 1000.0);
        assert!(estimate_fmae_weights(&[vec![z]]).is_err());
        assert!(estimate_fmae_weights(&[]).is_err());
    }

    #[test]
    fn ser_cases() {
        let truth = set(&[&[1.0, 0.0], &[0.0, 0.0], &[1.0, 1.0]], 1000.0);
        let est = set(&[&[1.0, 0.0], &[1.0, 0.0], &[1.1, 0.9]], 1000.0);
        let s = ser(&truth, &est).unwrap();
        assert_eq!(s[0], Some(SER_CAP_DB));
        assert_eq!(s[1], None);
        assert!((s[2].unwrap() - 20.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn segmented_mae_is_symmetric_and_nonnegative(
            a in prop::collection::vec(-10.0f64..10.0, 24),
            b in prop::collection::vec(-10.0f64..10.0, 24),
            seg in 1usize..30,
        ) {
            // The averaging bound needs whole segments.
            let whole = 12 % seg == 0;
            let sa = ChannelResponseSet::new(a, 2, 12, 1000.0).unwrap();
            let sb = ChannelResponseSet::new(b, 2, 12, 1000.0).unwrap();
            let ab = segmented_mae_samples(&sa, &sb, seg).unwrap();
            let ba = segmented_mae_samples(&sb, &sa, seg).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
            prop_assert_eq!(segmented_mae_samples(&sa, &sa, seg).unwrap(), 0.0);
            // Averaging cannot increase the error.
            if whole {
                prop_assert!(ab <= plain_mae(&sa, &sb).unwrap() + 1e-12);
            }
        }
    }
}
