use super::GainCurve;

/// Minimum prominence for a local maximum to count as a ripple peak.
pub const DEFAULT_PROMINENCE_DB: f64 = 0.05;

/// A local maximum of a gain curve and the channel it sits next to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RipplePeak {
    pub freq: f64,
    pub gain_db: f64,
    pub prominence_db: f64,
    pub nearest_cf: f64,
    /// Smaller of the two gaps around `nearest_cf`.
    pub local_spacing: f64,
    /// Whether the peak lies within half the local spacing of `nearest_cf`.
    pub aligned: bool,
}

/// Local maxima of `curve` (in dB) within `[f_lo, f_hi]` whose topographic
/// prominence is at least `min_prominence_db`, each matched to the nearest
/// channel center frequency in `cfs` (sorted ascending, at least 2 entries).
pub fn ripple_peaks(curve: &GainCurve, cfs: &[f64], f_lo: f64, f_hi: f64, min_prominence_db: f64) -> Vec<RipplePeak> {
    let band = curve.band(f_lo, f_hi);
    let db = band.gains_db();
    let n = db.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if db[i] > db[i - 1] {
            // Walk across a plateau.
            let mut j = i;
            while j + 1 < n && db[j + 1] == db[i] {
                j += 1;
            }
            if j + 1 < n && db[j + 1] < db[i] {
                let centre = (i + j) / 2;
                let prominence = prominence(&db, i, j);
                if prominence >= min_prominence_db {
                    peaks.push(match_cf(band.freqs[centre], db[centre], prominence, cfs));
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

fn prominence(db: &[f64], start: usize, end: usize) -> f64 {
    let height = db[start];
    let mut left_min = height;
    for k in (0..start).rev() {
        if db[k] > height {
            break;
        }
        left_min = left_min.min(db[k]);
    }
    let mut right_min = height;
    for &v in &db[end + 1..] {
        if v > height {
            break;
        }
        right_min = right_min.min(v);
    }
    height - left_min.max(right_min)
}

fn match_cf(freq: f64, gain_db: f64, prominence_db: f64, cfs: &[f64]) -> RipplePeak {
    let j = cfs.partition_point(|&c| c < freq);
    let nearest = match (j.checked_sub(1), cfs.get(j)) {
        (Some(a), Some(&b)) if freq - cfs[a] <= b - freq => a,
        (Some(a), None) => a,
        _ => j,
    };
    let left = nearest.checked_sub(1).map(|a| cfs[nearest] - cfs[a]);
    let right = cfs.get(nearest + 1).map(|b| b - cfs[nearest]);
    let local_spacing = match (left, right) {
        (Some(l), Some(r)) => l.min(r),
        (Some(s), None) | (None, Some(s)) => s,
        (None, None) => f64::INFINITY,
    };
    let nearest_cf = cfs[nearest];
    RipplePeak {
        freq,
        gain_db,
        prominence_db,
        nearest_cf,
        local_spacing,
        aligned: (freq - nearest_cf).abs() <= local_spacing / 2.0,
    }
}
