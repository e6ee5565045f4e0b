//! Small FFT helpers shared by the model, compensation and metrics code.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Frequency in Hz of DFT bin `i` for an `n`-point transform.
///
/// Bins above `n / 2` map to negative frequencies; the Nyquist bin of an
/// even-length transform is reported as `+fs / 2`.
pub fn bin_frequency(i: usize, n: usize, sample_rate: f64) -> f64 {
    let df = sample_rate / n as f64;
    if i <= n / 2 {
        i as f64 * df
    } else {
        (i as f64 - n as f64) * df
    }
}

/// Signed frequency grid for an `n`-point DFT.
pub fn frequency_grid(n: usize, sample_rate: f64) -> Vec<f64> {
    (0..n).map(|i| bin_frequency(i, n, sample_rate)).collect()
}

/// Forward DFT of a real sequence (no normalization).
pub fn fft_real(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_in_place(&mut buf);
    buf
}

pub fn fft_in_place(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(buf.len()).process(buf);
}

/// Inverse DFT with `1/n` normalization.
pub fn ifft(spectrum: &[Complex64]) -> Vec<Complex64> {
    let mut buf = spectrum.to_vec();
    if buf.is_empty() {
        return buf;
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(buf.len()).process(&mut buf);
    let scale = 1.0 / buf.len() as f64;
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

/// Fill the negative-frequency half of `spectrum` from its positive half so
/// that the inverse transform is real. DC and Nyquist are made real.
pub fn mirror_conjugate(spectrum: &mut [Complex64]) {
    let n = spectrum.len();
    if n == 0 {
        return;
    }
    spectrum[0].im = 0.0;
    if n % 2 == 0 {
        spectrum[n / 2].im = 0.0;
    }
    for i in 1..n.div_ceil(2) {
        spectrum[n - i] = spectrum[i].conj();
    }
}

/// Largest |x(N-i) - conj(x(i))| over the spectrum.
pub fn conjugate_symmetry_error(spectrum: &[Complex64]) -> f64 {
    let n = spectrum.len();
    (1..n)
        .map(|i| (spectrum[n - i] - spectrum[i].conj()).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_signed() {
        let g = frequency_grid(8, 8.0);
        assert_eq!(g, vec![0.0, 1.0, 2.0, 3.0, 4.0, -3.0, -2.0, -1.0]);
        let g = frequency_grid(5, 5.0);
        assert_eq!(g, vec![0.0, 1.0, 2.0, -2.0, -1.0]);
    }

    #[test]
    fn fft_roundtrip() {
        let x = [1.0, -2.0, 0.5, 3.0, 0.0, 1.25];
        let back = ifft(&fft_real(&x));
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b.re).abs() < 1e-12);
            assert!(b.im.abs() < 1e-12);
        }
    }

    #[test]
    fn mirrored_spectrum_has_real_inverse() {
        let mut s: Vec<Complex64> = (0..9)
            .map(|i| Complex64::new(i as f64, 1.0 - i as f64))
            .collect();
        mirror_conjugate(&mut s);
        assert_eq!(conjugate_symmetry_error(&s), 0.0);
        assert!(ifft(&s).iter().all(|v| v.im.abs() < 1e-12));
    }
}
