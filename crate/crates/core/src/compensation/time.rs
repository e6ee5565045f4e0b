use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::CompensationGain;
use crate::dft;
use crate::error::{Error, Result};

/// Normal-matrix condition number above which a solution is flagged.
pub const ILL_CONDITIONED: f64 = 1e10;

/// Which convolution the stacked operator realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionMode {
    /// Lower-triangular Toeplitz: linear convolution truncated to `N`.
    #[default]
    Linear,
    /// Circulant: convolution modulo `N`. This is the operator the DFT
    /// diagonalizes, so it reproduces the per-bin solution exactly.
    Circular,
}

/// Matrix realization of convolution with a fixed sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzOperator {
    source: Vec<f64>,
}

impl ToeplitzOperator {
    pub fn new(source: Vec<f64>) -> Self {
        ToeplitzOperator { source }
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    /// `x * v` truncated to `N = len()`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.source.len();
        (0..n)
            .map(|i| {
                (0..=i.min(v.len().saturating_sub(1)))
                    .filter(|&j| j < v.len())
                    .map(|j| self.source[i - j] * v[j])
                    .sum()
            })
            .collect()
    }

    /// `x * v` modulo `N`.
    pub fn apply_circular(&self, v: &[f64]) -> Vec<f64> {
        let n = self.source.len();
        (0..n)
            .map(|i| (0..v.len().min(n)).map(|j| self.source[(i + n - j) % n] * v[j]).sum())
            .collect()
    }

    pub fn apply_mode(&self, v: &[f64], mode: ConvolutionMode) -> Vec<f64> {
        match mode {
            ConvolutionMode::Linear => self.apply(v),
            ConvolutionMode::Circular => self.apply_circular(v),
        }
    }

    /// Gram matrix `T^T T` restricted to the first `cols` columns.
    fn gram(&self, cols: usize, mode: ConvolutionMode) -> DMatrix<f64> {
        let y = &self.source;
        let n = y.len();
        let mut g = DMatrix::zeros(cols, cols);
        match mode {
            ConvolutionMode::Linear => {
                // G[p][q] = sum_{t=q}^{N-1} y[t-p] y[t-q], filled along diagonals from row 0.
                for d in 0..cols {
                    let mut acc: f64 = (d..n).map(|t| y[t] * y[t - d]).sum();
                    g[(0, d)] = acc;
                    for p in 1..cols - d {
                        acc -= y[n - p] * y[n - p - d];
                        g[(p, p + d)] = acc;
                    }
                }
            }
            ConvolutionMode::Circular => {
                let r: Vec<f64> = (0..cols)
                    .map(|d| (0..n).map(|t| y[t] * y[(t + n - d) % n]).sum())
                    .collect();
                for p in 0..cols {
                    for q in p..cols {
                        g[(p, q)] = r[q - p];
                    }
                }
            }
        }
        for p in 0..cols {
            for q in 0..p {
                g[(p, q)] = g[(q, p)];
            }
        }
        g
    }

    /// `T^T b` restricted to the first `cols` columns.
    fn correlate(&self, b: &[f64], cols: usize, mode: ConvolutionMode) -> DVector<f64> {
        let y = &self.source;
        let n = y.len();
        DVector::from_iterator(
            cols,
            (0..cols).map(|p| match mode {
                ConvolutionMode::Linear => (p..n).map(|t| y[t - p] * b[t]).sum::<f64>(),
                ConvolutionMode::Circular => (0..n).map(|t| y[(t + n - p) % n] * b[t]).sum::<f64>(),
            }),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSolverOptions {
    /// Common zero-padded length `N`. Defaults to the smallest length that
    /// holds every linear convolution without wrap-around.
    pub padded_len: Option<usize>,
    pub mode: ConvolutionMode,
    /// Eigenvalues of the normal matrix below `rcond * max` are treated as zero.
    pub rcond: f64,
}

impl Default for TimeSolverOptions {
    fn default() -> Self {
        TimeSolverOptions { padded_len: None, mode: ConvolutionMode::Linear, rcond: 1e-12 }
    }
}

fn padded(v: &[f64], n: usize) -> Vec<f64> {
    let mut out = v.to_vec();
    out.resize(n, 0.0);
    out
}

/// Least-squares compensation FIR of `filter_len` taps in the time domain.
///
/// Minimizes `sum_k || h^N_k * x - h^D_k * c * x ||^2` over `c`, where the
/// rows of `normal_ir` and `impaired_ir` are the channel impulse responses
/// and `x` is the probe. Without a probe `x` is a unit impulse, which is
/// also the expectation over white inputs; the solution is then the first
/// column of `D^+ N` for the stacked convolution matrices `D` and `N`.
///
/// The normal equations are solved through a symmetric eigendecomposition
/// with small eigenvalues discarded, which yields the minimal-norm solution
/// when the system is rank deficient.
pub fn optimal_filter_time(
    normal_ir: &[Vec<f64>],
    impaired_ir: &[Vec<f64>],
    probe: Option<&[f64]>,
    filter_len: usize,
    sample_rate: f64,
    opts: &TimeSolverOptions,
) -> Result<CompensationGain> {
    if filter_len == 0 {
        return Err(Error::input("filter length must be > 0"));
    }
    if normal_ir.is_empty() || normal_ir.len() != impaired_ir.len() {
        return Err(Error::shape(format!(
            "{} normal and {} impaired impulse responses",
            normal_ir.len(),
            impaired_ir.len()
        )));
    }
    let t_len = normal_ir[0].len();
    if t_len == 0 || normal_ir.iter().chain(impaired_ir).any(|h| h.len() != t_len) {
        return Err(Error::shape("impulse responses must share one non-zero length"));
    }
    let all = normal_ir.iter().chain(impaired_ir).flatten();
    if all.chain(probe.unwrap_or(&[]).iter()).any(|v| !v.is_finite()) {
        return Err(Error::input("impulse responses and probe must be finite"));
    }
    let probe_len = match probe {
        Some([]) => return Err(Error::input("probe is empty")),
        Some(x) => x.len(),
        None => 1,
    };
    let min_len = probe_len + t_len + filter_len - 2;
    let n = opts.padded_len.unwrap_or(min_len);
    if opts.mode == ConvolutionMode::Linear && n < min_len {
        return Err(Error::input(format!(
            "padded length {n} is below L + T + M - 2 = {min_len}"
        )));
    }
    if n < filter_len.max(t_len).max(probe_len) {
        return Err(Error::input(format!("padded length {n} is shorter than an operand")));
    }

    let mode = opts.mode;
    let probe_op = probe.map(|x| ToeplitzOperator::new(padded(x, n)));
    let drive = |h: &[f64]| -> Vec<f64> {
        let h = padded(h, n);
        match &probe_op {
            Some(x) => x.apply_mode(&h, mode),
            None => h,
        }
    };

    let mut gram = DMatrix::zeros(filter_len, filter_len);
    let mut rhs = DVector::zeros(filter_len);
    for (hn, hd) in normal_ir.iter().zip(impaired_ir) {
        let op = ToeplitzOperator::new(drive(hd));
        let target = drive(hn);
        gram += op.gram(filter_len, mode);
        rhs += op.correlate(&target, filter_len, mode);
    }

    let eig = SymmetricEigen::new(gram);
    let lmax = eig.eigenvalues.max();
    if !(lmax > 0.0) {
        return Err(Error::Numerical("impaired model has no energy".into()));
    }
    let lmin = eig.eigenvalues.min();
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    let cutoff = opts.rcond * lmax;
    let mut fir = DVector::zeros(filter_len);
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cutoff {
            let v = eig.eigenvectors.column(i);
            fir += v * (v.dot(&rhs) / lambda);
        }
    }
    let fir: Vec<f64> = fir.iter().cloned().collect();
    let bins = dft::fft_real(&padded(&fir, n));
    let mut gain = CompensationGain::from_bins(bins, sample_rate)?;
    gain.derived_fir = Some(fir);
    gain.condition = Some(condition);
    gain.ill_conditioned = condition > ILL_CONDITIONED;
    Ok(gain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_irs(k: usize, t: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..k).map(|_| (0..t).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
    }

    /// Explicit `n x cols` matrix of truncated linear convolution with `h`.
    fn dense_toeplitz(h: &[f64], n: usize, cols: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..cols).map(|j| if i >= j && i - j < h.len() { h[i - j] } else { 0.0 }).collect())
            .collect()
    }

    fn full_conv(a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    }

    /// Gaussian elimination with partial pivoting.
    fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, p);
            b.swap(c, p);
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                for j in c..n {
                    a[r][j] -= f * a[c][j];
                }
                b[r] -= f * b[c];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|j| a[r][j] * x[j]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    #[test]
    fn matches_dense_normal_equations() {
        let (k, t, m, n) = (3, 8, 8, 32);
        let normal = random_irs(k, t, 1);
        let impaired = random_irs(k, t, 2);
        let probe = random_irs(1, 5, 3).remove(0);
        // Stacked system A c = b with A_k = T(x * hD_k), b_k = x * hN_k.
        let mut ata = vec![vec![0.0; m]; m];
        let mut atb = vec![0.0; m];
        for (hn, hd) in normal.iter().zip(&impaired) {
            let a = dense_toeplitz(&full_conv(&probe, hd), n, m);
            let mut b = full_conv(&probe, hn);
            b.resize(n, 0.0);
            for i in 0..m {
                for j in 0..m {
                    ata[i][j] += (0..n).map(|r| a[r][i] * a[r][j]).sum::<f64>();
                }
                atb[i] += (0..n).map(|r| a[r][i] * b[r]).sum::<f64>();
            }
        }
        let oracle = solve(ata, atb);
        let opts = TimeSolverOptions { padded_len: Some(n), ..Default::default() };
        let g = optimal_filter_time(&normal, &impaired, Some(&probe), m, 16000.0, &opts).unwrap();
        let fir = g.derived_fir.unwrap();
        let scale = oracle.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (a, b) in fir.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9 * scale, "{a} vs {b}");
        }
        assert!(!g.ill_conditioned);
        assert_eq!(g.bins.len(), n);
    }

    #[test]
    fn identity_system_gives_unit_impulse() {
        let irs = random_irs(4, 16, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let probe: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = optimal_filter_time(&irs, &irs, Some(&probe), 12, 16000.0, &TimeSolverOptions::default()).unwrap();
        let fir = g.derived_fir.unwrap();
        assert!((fir[0] - 1.0).abs() < 1e-8);
        assert!(fir[1..].iter().all(|v| v.abs() <= 1e-8 * fir[0]));
    }

    #[test]
    fn scaled_impairment_gives_scalar_inverse() {
        let normal = random_irs(2, 10, 9);
        let impaired: Vec<Vec<f64>> = normal.iter().map(|h| h.iter().map(|v| 0.5 * v).collect()).collect();
        let g = optimal_filter_time(&normal, &impaired, None, 6, 16000.0, &TimeSolverOptions::default()).unwrap();
        let fir = g.derived_fir.unwrap();
        assert!((fir[0] - 2.0).abs() < 1e-9);
        assert!(fir[1..].iter().all(|v| v.abs() < 1e-9));
        assert!(g.bins.iter().all(|b| (b.re - 2.0).abs() < 1e-9 && b.im.abs() < 1e-9));
    }

    #[test]
    fn circular_full_length_matches_per_bin_solution() {
        let (k, t, n) = (4, 32, 128);
        let normal = random_irs(k, t, 11);
        let impaired = random_irs(k, t, 12);
        let spec = |h: &[f64]| dft::fft_real(&padded(h, n));
        let dn: Vec<_> = normal.iter().map(|h| spec(h)).collect();
        let dd: Vec<_> = impaired.iter().map(|h| spec(h)).collect();
        let opts = TimeSolverOptions { padded_len: Some(n), mode: ConvolutionMode::Circular, ..Default::default() };
        let g = optimal_filter_time(&normal, &impaired, None, n, 16000.0, &opts).unwrap();
        let den: Vec<f64> = (0..n).map(|i| dd.iter().map(|d| d[i].norm_sqr()).sum()).collect();
        let dmax = den.iter().cloned().fold(0.0, f64::max);
        for i in 0..n {
            if den[i] <= 1e-6 * dmax {
                continue;
            }
            let num: num_complex::Complex64 = dd.iter().zip(&dn).map(|(d, nn)| d[i].conj() * nn[i]).sum();
            let want = num / den[i];
            assert!((g.bins[i] - want).norm() <= 1e-6 * want.norm(), "bin {i}");
        }
    }

    #[test]
    fn spectral_null_is_flagged() {
        // [1, 1] vanishes at Nyquist, so the circulant normal matrix is singular.
        let hd = vec![vec![1.0, 1.0, 0.0, 0.0]];
        let hn = vec![vec![1.0, 0.0, 0.0, 0.0]];
        let opts = TimeSolverOptions { padded_len: Some(8), mode: ConvolutionMode::Circular, ..Default::default() };
        let g = optimal_filter_time(&hn, &hd, None, 8, 16000.0, &opts).unwrap();
        assert!(g.ill_conditioned);
        assert!(g.derived_fir.unwrap().iter().all(|v| v.is_finite()));
        // Minimal norm: nothing is put into the unobservable bin.
        assert!(g.bins[4].norm() < 1e-9);
    }

    #[test]
    fn argument_errors() {
        let h = vec![vec![1.0, 0.5]];
        let o = TimeSolverOptions::default();
        assert!(optimal_filter_time(&h, &h, None, 0, 1.0, &o).is_err());
        assert!(optimal_filter_time(&h, &[], None, 2, 1.0, &o).is_err());
        assert!(optimal_filter_time(&h, &[vec![1.0]], None, 2, 1.0, &o).is_err());
        assert!(optimal_filter_time(&h, &h, Some(&[]), 2, 1.0, &o).is_err());
        let short = TimeSolverOptions { padded_len: Some(2), ..Default::default() };
        assert!(optimal_filter_time(&h, &h, None, 2, 1.0, &short).is_err());
        let zero = vec![vec![0.0, 0.0]];
        assert!(matches!(optimal_filter_time(&h, &zero, None, 2, 1.0, &o), Err(Error::Numerical(_))));
    }

    proptest! {
        #[test]
        fn operator_matches_direct_convolution(
            x in prop::collection::vec(-5.0f64..5.0, 1..20),
            v in prop::collection::vec(-5.0f64..5.0, 1..20),
        ) {
            let op = ToeplitzOperator::new(x.clone());
            let full = full_conv(&x, &v);
            let lin = op.apply(&v);
            for (a, b) in lin.iter().zip(&full) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            let n = x.len();
            let mut wrapped = vec![0.0; n];
            for (i, val) in full_conv(&x, &v[..v.len().min(n)]).iter().enumerate() {
                wrapped[i % n] += val;
            }
            for (a, b) in op.apply_circular(&v).iter().zip(&wrapped) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn gram_matches_explicit_product(
            x in prop::collection::vec(-3.0f64..3.0, 4..16),
            cols in 1usize..4,
            circular in any::<bool>(),
        ) {
            let mode = if circular { ConvolutionMode::Circular } else { ConvolutionMode::Linear };
            let op = ToeplitzOperator::new(x.clone());
            let unit = |j: usize| (0..cols).map(|i| if i == j { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
            let columns: Vec<Vec<f64>> = (0..cols).map(|j| op.apply_mode(&unit(j), mode)).collect();
            let g = op.gram(cols, mode);
            for p in 0..cols {
                for q in 0..cols {
                    let want: f64 = columns[p].iter().zip(&columns[q]).map(|(a, b)| a * b).sum();
                    prop_assert!((g[(p, q)] - want).abs() < 1e-9);
                }
            }
        }
    }
}
