use num_complex::Complex64;
use rayon::prelude::*;

use super::CompensationGain;
use crate::dft;
use crate::error::{Error, Result};
use crate::model::{Filterbank, FilterbankSpec};

/// Relative floor on the per-bin impaired energy, as a fraction of its maximum.
pub const DEFAULT_REGULARIZATION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GainOptions {
    /// Input power spectrum on the full DFT grid. Flat when `None`.
    pub input_psd: Option<Vec<f64>>,
    /// Denominator floor relative to the largest denominator. `0` disables it.
    pub regularization: f64,
}

impl Default for GainOptions {
    fn default() -> Self {
        GainOptions { input_psd: None, regularization: DEFAULT_REGULARIZATION }
    }
}

fn check_banks(normal: &Filterbank, impaired: &Filterbank) -> Result<()> {
    if normal.num_channels() != impaired.num_channels() || normal.nfft() != impaired.nfft() {
        return Err(Error::shape(format!(
            "normal bank is {} x {}, impaired bank is {} x {}",
            normal.num_channels(),
            normal.nfft(),
            impaired.num_channels(),
            impaired.nfft()
        )));
    }
    if normal.freq_grid != impaired.freq_grid {
        return Err(Error::shape("banks are sampled on different frequency grids"));
    }
    Ok(())
}

/// Divide the accumulated positive-half sums and mirror to the full grid.
fn finish(
    mut cross: Vec<Complex64>,
    mut energy: Vec<f64>,
    nfft: usize,
    sample_rate: f64,
    opts: &GainOptions,
) -> Result<CompensationGain> {
    if let Some(psd) = &opts.input_psd {
        if psd.len() != nfft {
            return Err(Error::shape(format!("input PSD has {} bins, expected {nfft}", psd.len())));
        }
        if psd.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::input("input PSD must be finite and strictly positive"));
        }
        for ((c, e), p) in cross.iter_mut().zip(energy.iter_mut()).zip(psd) {
            *c *= *p;
            *e *= *p;
        }
    }
    let floor = opts.regularization * energy.iter().cloned().fold(0.0, f64::max);
    let mut bins = vec![Complex64::new(0.0, 0.0); nfft];
    for (i, (c, e)) in cross.iter().zip(&energy).enumerate() {
        let den = e.max(floor);
        if den <= 0.0 {
            return Err(Error::SingularBin { bin: i });
        }
        bins[i] = c / den;
    }
    dft::mirror_conjugate(&mut bins);
    CompensationGain::from_bins(bins, sample_rate)
}

/// Closed-form MSE-optimal gain: for each bin `i`,
/// `c_i = sum_k conj(D_ki) N_ki / sum_k |D_ki|^2`.
///
/// A strictly positive input PSD scales numerator and denominator alike, so
/// it only matters through the regularization floor.
pub fn optimal_gain_freq(normal: &Filterbank, impaired: &Filterbank, opts: &GainOptions) -> Result<CompensationGain> {
    check_banks(normal, impaired)?;
    let n = normal.nfft();
    let channels = normal.num_channels();
    let (cross, energy): (Vec<Complex64>, Vec<f64>) = (0..=n / 2)
        .into_par_iter()
        .map(|i| {
            let mut cross = Complex64::new(0.0, 0.0);
            let mut energy = 0.0;
            for k in 0..channels {
                let d = impaired.at(k, i);
                cross += d.conj() * normal.at(k, i);
                energy += d.norm_sqr();
            }
            (cross, energy)
        })
        .unzip();
    finish(cross, energy, n, normal.spec.sample_rate, opts)
}

/// Same result as [`optimal_gain_freq`] on the banks built from these
/// layouts, evaluated channel by channel without holding a `K x nfft` matrix.
pub fn optimal_gain_from_specs(
    normal: &FilterbankSpec,
    impaired: &FilterbankSpec,
    opts: &GainOptions,
) -> Result<CompensationGain> {
    normal.validate()?;
    impaired.validate()?;
    if normal.num_channels() != impaired.num_channels()
        || normal.nfft != impaired.nfft
        || normal.sample_rate != impaired.sample_rate
    {
        return Err(Error::shape("normal and impaired layouts differ"));
    }
    let half = normal.nfft / 2 + 1;
    let mut cross = vec![Complex64::new(0.0, 0.0); half];
    let mut energy = vec![0.0; half];
    for k in 0..normal.num_channels() {
        let nr = normal.half_row(k);
        let dr = impaired.half_row(k);
        for i in 0..half {
            cross[i] += dr[i].conj() * nr[i];
            energy[i] += dr[i].norm_sqr();
        }
    }
    finish(cross, energy, normal.nfft, normal.sample_rate, opts)
}

/// `||N - D diag(c)||_F^2 / ||N||_F^2` for a flat input.
pub fn restoration_residual(normal: &Filterbank, impaired: &Filterbank, gain: &CompensationGain) -> Result<f64> {
    check_banks(normal, impaired)?;
    if gain.nfft() != normal.nfft() {
        return Err(Error::shape(format!("gain has {} bins, banks have {}", gain.nfft(), normal.nfft())));
    }
    let mut err = 0.0;
    let mut total = 0.0;
    for (nrow, drow) in normal.rows().zip(impaired.rows()) {
        for ((nv, dv), c) in nrow.iter().zip(drow).zip(&gain.bins) {
            err += (nv - dv * c).norm_sqr();
            total += nv.norm_sqr();
        }
    }
    if total == 0.0 {
        return Err(Error::input("normal-hearing model has zero energy"));
    }
    Ok(err / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_filterbank, GammatoneParams};

    fn bank(cfs: &[f64], q: f64, gain: f64) -> Filterbank {
        let ch = cfs.iter().map(|&cf| GammatoneParams::new(cf, 1, q, gain).unwrap()).collect();
        build_filterbank(&FilterbankSpec::new(ch, 16000.0, 256).unwrap()).unwrap()
    }

    /// Two channels with disjoint rectangular supports.
    fn band_pair(g1: f64, g2: f64) -> Filterbank {
        let n = 64;
        let spec = FilterbankSpec::new(
            vec![
                GammatoneParams::new(1000.0, 1, 1.0, 1.0).unwrap(),
                GammatoneParams::new(3000.0, 1, 1.0, 1.0).unwrap(),
            ],
            8000.0,
            n,
        )
        .unwrap();
        let mut resp = vec![Complex64::new(0.0, 0.0); 2 * n];
        for i in 0..n {
            let f = dft::bin_frequency(i, n, 8000.0).abs();
            if f < 2000.0 {
                resp[i] = Complex64::new(g1, 0.0);
            } else {
                resp[n + i] = Complex64::new(g2, 0.0);
            }
        }
        Filterbank::from_response(spec, resp).unwrap()
    }

    #[test]
    fn identity_when_models_match() {
        let b = bank(&[300.0, 1000.0, 4000.0], 4.0, 1.0);
        let g = optimal_gain_freq(&b, &b, &GainOptions::default()).unwrap();
        assert!(g.bins.iter().all(|c| *c == Complex64::new(1.0, 0.0)));
        assert!(restoration_residual(&b, &b, &g).unwrap() <= 1e-12);
    }

    #[test]
    fn uniform_attenuation_doubles_gain() {
        let b = bank(&[300.0, 1000.0, 4000.0], 4.0, 1.0);
        let g = optimal_gain_freq(&b, &b.scaled(0.5), &GainOptions::default()).unwrap();
        assert!(g.bins.iter().all(|c| (c - 2.0).norm() < 1e-14));
    }

    #[test]
    fn disjoint_bands_match_brute_force_scan() {
        let normal = band_pair(1.0, 1.0);
        let impaired = band_pair(0.5, 0.25);
        let g = optimal_gain_freq(&normal, &impaired, &GainOptions::default()).unwrap();
        // Brute-force per-bin least squares over a real gain grid.
        let grid: Vec<f64> = (0..=8000).map(|i| i as f64 * 1e-3).collect();
        for i in [1usize, 5, 20, 40, 60] {
            let best = grid
                .iter()
                .cloned()
                .min_by(|a, b| {
                    let cost = |c: f64| {
                        (0..2)
                            .map(|k| (normal.at(k, i) - impaired.at(k, i) * c).norm_sqr())
                            .sum::<f64>()
                    };
                    cost(*a).partial_cmp(&cost(*b)).unwrap()
                })
                .unwrap();
            assert!((g.bins[i].re - best).abs() < 1e-9, "bin {i}: {} vs {best}", g.bins[i]);
        }
        assert!((g.bins[5].re - 2.0).abs() < 1e-14);
        assert!((g.bins[20].re - 4.0).abs() < 1e-14);
    }

    #[test]
    fn positive_psd_cancels() {
        let normal = bank(&[300.0, 1000.0, 4000.0], 4.0, 1.0);
        let impaired = bank(&[300.0, 1000.0, 4000.0], 2.0, 0.3);
        let flat = optimal_gain_freq(&normal, &impaired, &GainOptions::default()).unwrap();
        let psd: Vec<f64> = (0..256).map(|i| 0.1 + ((i * 37) % 11) as f64).collect();
        let weighted = optimal_gain_freq(
            &normal,
            &impaired,
            &GainOptions { input_psd: Some(psd), regularization: DEFAULT_REGULARIZATION },
        )
        .unwrap();
        for (a, b) in flat.bins.iter().zip(&weighted.bins) {
            assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
        }
    }

    #[test]
    fn non_positive_psd_rejected() {
        let b = bank(&[1000.0], 4.0, 1.0);
        let mut psd = vec![1.0; 256];
        psd[3] = 0.0;
        let opts = GainOptions { input_psd: Some(psd), regularization: 1e-12 };
        assert!(optimal_gain_freq(&b, &b, &opts).is_err());
    }

    #[test]
    fn singular_bin_without_regularization() {
        let normal = band_pair(1.0, 1.0);
        let mut resp: Vec<Complex64> = normal.rows().flatten().cloned().collect();
        resp[3] = Complex64::new(0.0, 0.0);
        let holes = Filterbank::from_response(normal.spec.clone(), resp).unwrap();
        let opts = GainOptions { input_psd: None, regularization: 0.0 };
        assert_eq!(
            optimal_gain_freq(&normal, &holes, &opts).unwrap_err(),
            Error::SingularBin { bin: 3 }
        );
        // The default floor resolves the bin.
        assert!(optimal_gain_freq(&normal, &holes, &GainOptions::default()).is_ok());
    }

    #[test]
    fn mismatched_banks_rejected() {
        let a = bank(&[300.0, 1000.0], 4.0, 1.0);
        let b = bank(&[300.0], 4.0, 1.0);
        assert!(matches!(
            optimal_gain_freq(&a, &b, &GainOptions::default()),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn zero_gain_residual_is_one() {
        let normal = bank(&[300.0, 1000.0], 4.0, 1.0);
        let impaired = bank(&[300.0, 1000.0], 2.0, 0.5);
        let zero = CompensationGain::from_bins(vec![Complex64::new(0.0, 0.0); 256], 16000.0).unwrap();
        assert_eq!(restoration_residual(&normal, &impaired, &zero).unwrap(), 1.0);
    }

    #[test]
    fn streaming_matches_materialized() {
        let cfs = [200.0, 600.0, 1500.0, 5000.0];
        let n = FilterbankSpec::new(
            cfs.iter().map(|&c| GammatoneParams::new(c, 1, 5.0, 1.0).unwrap()).collect(),
            16000.0,
            512,
        )
        .unwrap();
        let d = FilterbankSpec::new(
            cfs.iter().map(|&c| GammatoneParams::new(c, 1, 2.5, 0.1).unwrap()).collect(),
            16000.0,
            512,
        )
        .unwrap();
        let a = optimal_gain_from_specs(&n, &d, &GainOptions::default()).unwrap();
        let b = optimal_gain_freq(
            &build_filterbank(&n).unwrap(),
            &build_filterbank(&d).unwrap(),
            &GainOptions::default(),
        )
        .unwrap();
        assert_eq!(a, b);
    }
}
