//! Center-frequency placement and ripple measurement.
//!
//! [`log_cfs`] is the conventional geometric layout. [`propose_cfs`] places
//! each next channel where the current channel's normal-hearing response has
//! decayed by the factor `delta`, so sharply tuned channels end up closer
//! together. [`gnr`] scores a gain curve against a ripple-free reference.

mod ripple;
mod sweep;

pub use ripple::{ripple_peaks, RipplePeak, DEFAULT_PROMINENCE_DB};
pub use sweep::{compensation_curve, gnr_sweep, SpacingStrategy, SweepConfig, SweepRow, SweepTable};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GammatoneParams, QProfile};

/// Default number of points in the probe grid from DC to Nyquist.
pub const SPACING_GRID_BINS: usize = 1 << 15;
/// Default decay threshold.
pub const DEFAULT_DELTA: f64 = 0.5;
/// Upper bound on the gain-to-ripple ratio, reached when the error vanishes.
pub const GNR_CAP_DB: f64 = 300.0;

/// `k` geometrically spaced frequencies from `cf_min` to `cf_max` inclusive.
pub fn log_cfs(cf_min: f64, cf_max: f64, k: usize) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::input(format!("log spacing needs k >= 2, got {k}")));
    }
    if !(cf_min > 0.0 && cf_max > cf_min && cf_max.is_finite()) {
        return Err(Error::input("log spacing needs 0 < cf_min < cf_max"));
    }
    let ratio = (cf_max / cf_min).ln();
    let mut cfs: Vec<f64> = (0..k)
        .map(|i| cf_min * (ratio * i as f64 / (k - 1) as f64).exp())
        .collect();
    cfs[0] = cf_min;
    cfs[k - 1] = cf_max;
    Ok(cfs)
}

/// Normal-hearing channel shape used to probe decay during placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    pub q_profile: QProfile,
    pub order: u32,
    pub sample_rate: f64,
}

impl ProbeModel {
    fn channel(&self, cf: f64) -> GammatoneParams {
        GammatoneParams { cf, order: self.order, q: self.q_profile.q_at(cf), gain: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacingRequest {
    pub cf_min: f64,
    pub cf_max: f64,
    /// Decay threshold in `(0, 1)`.
    pub delta: f64,
    pub model: ProbeModel,
}

impl SpacingRequest {
    pub fn validate(&self) -> Result<()> {
        let nyquist = self.model.sample_rate / 2.0;
        if !(self.cf_min > 0.0 && self.cf_min <= self.cf_max && self.cf_max < nyquist) {
            return Err(Error::input(format!(
                "need 0 < cf_min <= cf_max < Nyquist ({nyquist} Hz)"
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::input(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.model.order == 0 {
            return Err(Error::input("probe order must be >= 1"));
        }
        self.model.q_profile.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacingOptions {
    /// Probe grid size, DC to Nyquist inclusive.
    pub grid_bins: usize,
    /// Locate the peak and the decay crossing between grid points instead of
    /// snapping both to the grid. Snapping errors otherwise accumulate over
    /// every step of the walk.
    pub refine: bool,
    /// Look for the decay crossing only above the response peak. When the
    /// peak sits above the center frequency, a threshold close to 1 is
    /// otherwise already crossed on the rising flank, giving a negative step.
    pub above_peak: bool,
}

impl Default for SpacingOptions {
    fn default() -> Self {
        SpacingOptions { grid_bins: SPACING_GRID_BINS, refine: true, above_peak: true }
    }
}

/// Channel placement driven by response decay, with default options.
pub fn propose_cfs(req: &SpacingRequest) -> Result<Vec<f64>> {
    propose_cfs_with(req, &SpacingOptions::default())
}

/// Walk upward from `cf_min`: at each center frequency `v`, find the
/// response peak and the first frequency above `v` (and, by default, above
/// the peak) where the response has fallen below `delta` times the peak, then advance `v` by the distance
/// between the two. `cf_max` itself is never emitted.
pub fn propose_cfs_with(req: &SpacingRequest, opts: &SpacingOptions) -> Result<Vec<f64>> {
    req.validate()?;
    if opts.grid_bins < 3 {
        return Err(Error::input("probe grid needs at least 3 points"));
    }
    let nyquist = req.model.sample_rate / 2.0;
    let df = nyquist / (opts.grid_bins - 1) as f64;
    let freq = |i: usize| i as f64 * df;
    let mut magnitude = vec![0.0; opts.grid_bins];
    let mut cfs = Vec::new();
    let mut v = req.cf_min;
    while v < req.cf_max {
        if cfs.len() >= 1_000_000 {
            return Err(Error::Stall { cf: v, reason: "more than 10^6 channels".into() });
        }
        let ch = req.model.channel(v);
        let mag = |f: f64| ch.eval(f).norm();
        for (i, m) in magnitude.iter_mut().enumerate() {
            *m = mag(freq(i));
        }
        let j_max = argmax(&magnitude);
        let peak = magnitude[j_max];
        if !(peak > 0.0) {
            return Err(Error::Stall { cf: v, reason: "probe response is zero".into() });
        }
        let mut first_above = ((v / df).floor() as usize + 1).min(opts.grid_bins);
        if opts.above_peak {
            first_above = first_above.max(j_max + 1);
        }
        let i_cross = (first_above..opts.grid_bins)
            .find(|&i| freq(i) > v && magnitude[i] / peak < req.delta)
            .ok_or_else(|| Error::Stall {
                cf: v,
                reason: format!("response never decays below {} before Nyquist", req.delta),
            })?;

        let (peak_freq, cross_freq) = if opts.refine {
            let lo = freq(j_max.saturating_sub(1));
            let hi = freq((j_max + 1).min(opts.grid_bins - 1));
            let peak_freq = golden_max(&mag, lo, hi);
            let peak = mag(peak_freq).max(peak);
            let below = |f: f64| mag(f) / peak < req.delta;
            let mut lo = freq(i_cross - 1).max(v);
            if opts.above_peak {
                lo = lo.max(peak_freq);
            }
            let cross = if below(lo) { lo } else { bisect_crossing(&below, lo, freq(i_cross)) };
            (peak_freq, cross)
        } else {
            (freq(j_max), freq(i_cross))
        };
        let step = cross_freq - peak_freq;
        if !(step > 0.0) {
            return Err(Error::Stall {
                cf: v,
                reason: format!("non-positive step {step} Hz (peak at {peak_freq} Hz)"),
            });
        }
        cfs.push(v);
        v += step;
    }
    Ok(cfs)
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a) <= 1e-12 * b.abs().max(1.0) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    // Keep an end point when the maximum sits on the boundary (e.g. at DC).
    [a, mid, b]
        .into_iter()
        .fold(mid, |best, x| if f(x) > f(best) { x } else { best })
}

/// Smallest `f` in `(lo, hi]` with `below(f)`, given `!below(lo) && below(hi)`.
fn bisect_crossing(below: &impl Fn(f64) -> bool, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// A proposed layout together with the threshold that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposedSpacing {
    pub cfs: Vec<f64>,
    pub delta: f64,
}

/// Search the decay threshold so that [`propose_cfs`] returns exactly `k`
/// channels. The channel count grows with the threshold, so the search is a
/// bisection on `delta`.
pub fn proposed_cfs_for_count(cf_min: f64, cf_max: f64, k: usize, model: &ProbeModel) -> Result<ProposedSpacing> {
    if k == 0 {
        return Err(Error::input("target channel count must be >= 1"));
    }
    // A stall means the threshold is never reached, i.e. too few channels.
    let run = |delta: f64| -> Result<Option<Vec<f64>>> {
        match propose_cfs(&SpacingRequest { cf_min, cf_max, delta, model: *model }) {
            Ok(cfs) => Ok(Some(cfs)),
            Err(Error::Stall { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let count = |r: &Option<Vec<f64>>| r.as_ref().map_or(0, Vec::len);
    // Bracket outward from the default threshold so that no probe run has
    // to place far more channels than requested.
    let (mut lo, mut hi) = (DEFAULT_DELTA, DEFAULT_DELTA);
    let mut r = run(DEFAULT_DELTA)?;
    let mut last = DEFAULT_DELTA;
    if count(&r) < k {
        while count(&r) < k {
            lo = hi;
            hi = 1.0 - (1.0 - hi) / 2.0;
            if 1.0 - hi < 1e-9 {
                return Err(Error::input(format!(
                    "at most {} channels are reachable between {cf_min} and {cf_max} Hz",
                    count(&r)
                )));
            }
            r = run(hi)?;
            last = hi;
        }
    } else {
        while count(&r) > k {
            hi = lo;
            lo /= 2.0;
            if lo < 1e-9 {
                return Err(Error::input(format!("no threshold yields as few as {k} channels")));
            }
            r = run(lo)?;
            last = lo;
        }
    }
    if count(&r) == k {
        return Ok(ProposedSpacing { cfs: r.unwrap_or_default(), delta: last });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = run(mid)?;
        match count(&r).cmp(&k) {
            std::cmp::Ordering::Equal => return Ok(ProposedSpacing { cfs: r.unwrap_or_default(), delta: mid }),
            std::cmp::Ordering::Less => lo = mid,
            std::cmp::Ordering::Greater => hi = mid,
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Err(Error::Numerical(format!("no threshold yields exactly {k} channels")))
}

/// Long-term linear magnitude gain on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainCurve {
    pub freqs: Vec<f64>,
    pub gains: Vec<f64>,
}

impl GainCurve {
    pub fn new(freqs: Vec<f64>, gains: Vec<f64>) -> Result<Self> {
        if freqs.len() != gains.len() {
            return Err(Error::shape(format!("{} freqs, {} gains", freqs.len(), gains.len())));
        }
        if gains.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::input("gains must be finite and non-negative"));
        }
        Ok(GainCurve { freqs, gains })
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Points with `lo <= f <= hi`.
    pub fn band(&self, lo: f64, hi: f64) -> GainCurve {
        let (freqs, gains) = self
            .freqs
            .iter()
            .zip(&self.gains)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(f, g)| (*f, *g))
            .unzip();
        GainCurve { freqs, gains }
    }

    pub fn gains_db(&self) -> Vec<f64> {
        self.gains.iter().map(|g| 20.0 * g.log10()).collect()
    }

    /// CSV `freq_hz,gain_linear,gain_db`.
    pub fn to_csv(&self) -> String {
        use crate::io::fmt_sig;
        let mut s = String::from("freq_hz,gain_linear,gain_db\n");
        for (f, g) in self.freqs.iter().zip(&self.gains) {
            s.push_str(&format!("{},{},{}\n", fmt_sig(*f), fmt_sig(*g), fmt_sig(20.0 * g.log10())));
        }
        s
    }
}

/// Gain-to-ripple ratio `10 log10(|g_ref|^2 / |g_ref - g|^2)` in dB,
/// clamped to `[-GNR_CAP_DB, GNR_CAP_DB]`.
pub fn gnr(g_ref: &GainCurve, g: &GainCurve) -> Result<f64> {
    if g_ref.freqs != g.freqs {
        return Err(Error::input("gain curves are on different frequency grids"));
    }
    let reference: f64 = g_ref.gains.iter().map(|v| v * v).sum();
    let error: f64 = g_ref.gains.iter().zip(&g.gains).map(|(a, b)| (a - b) * (a - b)).sum();
    if error == 0.0 {
        return Ok(GNR_CAP_DB);
    }
    let db = 10.0 * (reference / error).log10();
    Ok(db.clamp(-GNR_CAP_DB, GNR_CAP_DB))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::QScale;

    fn const_b_model(q_at_1k: f64) -> ProbeModel {
        // Q proportional to cf keeps b = cf / q fixed.
        ProbeModel {
            q_profile: QProfile {
                cf_lo: 1000.0,
                q_lo: q_at_1k,
                cf_hi: 2000.0,
                q_hi: 2.0 * q_at_1k,
                scale: QScale::Linear,
                floor: 1e-3,
            },
            order: 1,
            sample_rate: 32000.0,
        }
    }

    #[test]
    fn log_examples() {
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9 * y);
        assert!(close(&log_cfs(100.0, 10000.0, 3).unwrap(), &[100.0, 1000.0, 10000.0]));
        assert_eq!(log_cfs(125.0, 9900.0, 2).unwrap(), vec![125.0, 9900.0]);
        assert!(close(&log_cfs(100.0, 1600.0, 5).unwrap(), &[100.0, 200.0, 400.0, 800.0, 1600.0]));
        assert!(log_cfs(100.0, 1000.0, 1).is_err());
    }

    #[test]
    fn empty_when_range_is_empty() {
        let req = SpacingRequest { cf_min: 1000.0, cf_max: 1000.0, delta: 0.5, model: const_b_model(4.0) };
        assert!(propose_cfs(&req).unwrap().is_empty());
    }

    #[test]
    fn first_step_matches_grid_scan_oracle() {
        let model = const_b_model(4.0);
        let req = SpacingRequest { cf_min: 1000.0, cf_max: 1001.0, delta: 0.5, model };
        let cfs = propose_cfs(&req).unwrap();
        assert_eq!(cfs, vec![1000.0]);
        let req = SpacingRequest { cf_min: 1000.0, cf_max: 1800.0, delta: 0.5, model };
        let cfs = propose_cfs(&req).unwrap();
        // Oracle: 0.01 Hz scan of the two-term magnitude.
        let mag = |f: f64| {
            let z = 1.0 / num_complex::Complex64::new(1.0, (f - 1000.0) / 250.0)
                + 1.0 / num_complex::Complex64::new(1.0, (f + 1000.0) / 250.0);
            z.norm()
        };
        let scan: Vec<f64> = (0..300_000).map(|i| i as f64 * 0.01).collect();
        let (pk_f, pk) = scan.iter().map(|&f| (f, mag(f))).fold((0.0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        let cross = scan.iter().cloned().find(|&f| f > pk_f.max(1000.0) && mag(f) / pk < 0.5).unwrap();
        let oracle_step = cross - pk_f;
        // The far term adds in phase above cf, raising the peak and pushing
        // the half-peak point out, so the step exceeds the near-term value.
        assert!(pk_f > 1000.0 && oracle_step > 433.0, "oracle step {oracle_step}");
        // Near term alone: half-peak at (f - cf) / b = sqrt(3).
        let near = |f: f64| (1.0 / num_complex::Complex64::new(1.0, (f - 1000.0) / 250.0)).norm();
        let near_cross = scan.iter().cloned().find(|&f| f > 1000.0 && near(f) < 0.5).unwrap();
        assert!((near_cross - 1000.0 - 250.0 * 3f64.sqrt()).abs() < 0.011);
        assert_eq!(cfs.len(), 2);
        assert!((cfs[1] - (1000.0 + oracle_step)).abs() < 0.05, "{} vs {}", cfs[1], 1000.0 + oracle_step);
    }

    #[test]
    fn constant_q_gives_constant_ratio() {
        let model = ProbeModel { q_profile: QProfile::constant(6.0), order: 1, sample_rate: 32000.0 };
        let req = SpacingRequest { cf_min: 200.0, cf_max: 8000.0, delta: 0.5, model };
        let cfs = propose_cfs(&req).unwrap();
        assert!(cfs.len() > 5);
        let ratios: Vec<f64> = cfs.windows(2).map(|w| w[1] / w[0]).collect();
        let r0 = ratios[0];
        assert!(ratios.iter().all(|r| (r / r0 - 1.0).abs() < 0.01), "{ratios:?}");
    }

    #[test]
    fn output_is_increasing_and_in_range() {
        let cfg = crate::model::FilterbankConfig::default();
        let req = SpacingRequest { cf_min: 125.0, cf_max: 9900.0, delta: 0.7, model: cfg.probe_model() };
        let cfs = propose_cfs(&req).unwrap();
        assert_eq!(cfs[0], 125.0);
        assert!(cfs.windows(2).all(|w| w[1] > w[0]));
        assert!(cfs.iter().all(|&c| (125.0..9900.0).contains(&c)));
    }

    #[test]
    fn stall_is_reported() {
        // A probe this broad never falls below 1e-4 of its peak before Nyquist.
        let model = ProbeModel { q_profile: QProfile::constant(0.5), order: 1, sample_rate: 8000.0 };
        let req = SpacingRequest { cf_min: 1000.0, cf_max: 3000.0, delta: 1e-4, model };
        match propose_cfs(&req) {
            Err(Error::Stall { cf, .. }) => assert_eq!(cf, 1000.0),
            other => panic!("expected stall, got {other:?}"),
        }
    }

    #[test]
    fn count_search_hits_target() {
        let cfg = crate::model::FilterbankConfig::default();
        for k in [12usize, 40] {
            let p = proposed_cfs_for_count(125.0, 9900.0, k, &cfg.probe_model()).unwrap();
            assert_eq!(p.cfs.len(), k);
            assert!(p.delta > 0.0 && p.delta < 1.0);
        }
    }

    #[test]
    fn gnr_examples() {
        let grid = vec![1.0, 2.0];
        let r = GainCurve::new(grid.clone(), vec![1.0, 1.0]).unwrap();
        let g = GainCurve::new(grid.clone(), vec![1.0, 0.9]).unwrap();
        assert!((gnr(&r, &g).unwrap() - 10.0 * (2.0f64 / 0.01).log10()).abs() < 1e-9);
        assert!((gnr(&r, &g).unwrap() - 23.0103).abs() < 1e-3);
        assert_eq!(gnr(&r, &r).unwrap(), GNR_CAP_DB);
        let zero = GainCurve::new(grid.clone(), vec![0.0, 0.0]).unwrap();
        assert_eq!(gnr(&r, &zero).unwrap(), 0.0);
        let other = GainCurve::new(vec![1.0, 3.0], vec![1.0, 1.0]).unwrap();
        assert!(gnr(&r, &other).is_err());
    }

    #[test]
    fn gain_curve_validation() {
        assert!(GainCurve::new(vec![1.0], vec![]).is_err());
        assert!(GainCurve::new(vec![1.0], vec![-1.0]).is_err());
        assert!(GainCurve::new(vec![1.0], vec![f64::NAN]).is_err());
    }

    #[test]
    fn doubling_grid_moves_cfs_less_than_half_a_bin() {
        let cfg = crate::model::FilterbankConfig::default();
        let req = SpacingRequest { cf_min: 125.0, cf_max: 9900.0, delta: 0.7, model: cfg.probe_model() };
        let coarse = SpacingOptions { grid_bins: 1 << 15, ..Default::default() };
        let fine = SpacingOptions { grid_bins: 1 << 16, ..Default::default() };
        let a = propose_cfs_with(&req, &coarse).unwrap();
        let b = propose_cfs_with(&req, &fine).unwrap();
        let half_bin = 0.5 * 16000.0 / ((1 << 15) - 1) as f64;
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < half_bin, "{x} vs {y}");
        }
    }

    #[test]
    fn grid_mode_steps_are_whole_bins() {
        let req = SpacingRequest { cf_min: 1000.0, cf_max: 4000.0, delta: 0.5, model: const_b_model(4.0) };
        let opts = SpacingOptions { grid_bins: 4097, refine: false, above_peak: true };
        let cfs = propose_cfs_with(&req, &opts).unwrap();
        let df = 16000.0 / 4096.0;
        for w in cfs.windows(2) {
            let bins = (w[1] - w[0]) / df;
            assert!((bins - bins.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn rising_flank_crossing_stalls_without_peak_guard() {
        // The peak of this probe sits above its cf, so a threshold of 0.997
        // is already undershot at cf itself.
        let req = SpacingRequest { cf_min: 1000.0, cf_max: 2000.0, delta: 0.997, model: const_b_model(4.0) };
        let literal = SpacingOptions { above_peak: false, ..Default::default() };
        let r = propose_cfs_with(&req, &literal);
        assert!(matches!(r, Err(Error::Stall { .. })), "{r:?}");
        let cfs = propose_cfs(&req).unwrap();
        assert!(cfs.len() > 10);
    }

    proptest::proptest! {
        #[test]
        fn gnr_is_scale_invariant(
            pairs in proptest::collection::vec((0.1f64..10.0, 0.1f64..10.0), 2..20),
            scale in 0.01f64..100.0,
        ) {
            let freqs: Vec<f64> = (0..pairs.len()).map(|i| i as f64).collect();
            let r: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let g: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let a = gnr(&GainCurve::new(freqs.clone(), r.clone()).unwrap(), &GainCurve::new(freqs.clone(), g.clone()).unwrap()).unwrap();
            let rs = r.iter().map(|v| v * scale).collect();
            let gs = g.iter().map(|v| v * scale).collect();
            let b = gnr(&GainCurve::new(freqs.clone(), rs).unwrap(), &GainCurve::new(freqs, gs).unwrap()).unwrap();
            proptest::prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
