use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::read_pair_table;

/// Names of the shipped standard audiograms.
pub const BISGAARD_NAMES: [&str; 7] = ["N1", "N2", "N3", "N4", "N5", "N6", "N7"];

const BISGAARD_FILES: [&str; 7] = [
    include_str!("../../data/audiograms/n1.csv"),
    include_str!("../../data/audiograms/n2.csv"),
    include_str!("../../data/audiograms/n3.csv"),
    include_str!("../../data/audiograms/n4.csv"),
    include_str!("../../data/audiograms/n5.csv"),
    include_str!("../../data/audiograms/n6.csv"),
    include_str!("../../data/audiograms/n7.csv"),
];

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct AudiogramPoint {
    freq_hz: f64,
    hl_db: f64,
}

/// Hearing level in dB HL as a function of frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Audiogram {
    points: Vec<(f64, f64)>,
}

impl Audiogram {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::input("audiogram is empty"));
        }
        for (i, &(f, hl)) in points.iter().enumerate() {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::input(format!("audiogram frequency {f} must be positive")));
            }
            if !hl.is_finite() {
                return Err(Error::input(format!("audiogram level at {f} Hz is not finite")));
            }
            if i > 0 && f <= points[i - 1].0 {
                return Err(Error::input("audiogram frequencies must be strictly increasing"));
            }
        }
        Ok(Audiogram { points })
    }

    /// One of the shipped Bisgaard standard audiograms (`"N1"`..`"N7"`, case-insensitive).
    pub fn standard(name: &str) -> Result<Self> {
        let idx = BISGAARD_NAMES
            .iter()
            .position(|n| n.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::input(format!("unknown standard audiogram '{name}'")))?;
        Self::from_csv(BISGAARD_FILES[idx])
    }

    /// CSV with header `freq_hz,hl_db`; `#` starts a comment line.
    pub fn from_csv(text: &str) -> Result<Self> {
        Self::new(read_pair_table(text, "freq_hz", "hl_db")?)
    }

    /// JSON array of `{"freq_hz": .., "hl_db": ..}` objects.
    pub fn from_json(text: &str) -> Result<Self> {
        let pts: Vec<AudiogramPoint> = serde_json::from_str(text)
            .map_err(|e| Error::input(format!("audiogram JSON: {e}")))?;
        Self::new(pts.into_iter().map(|p| (p.freq_hz, p.hl_db)).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("freq_hz,hl_db\n");
        for &(f, hl) in &self.points {
            s.push_str(&format!("{f},{hl}\n"));
        }
        s
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn min_freq(&self) -> f64 {
        self.points[0].0
    }

    pub fn max_freq(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    /// Hearing level at `freq`, linear in log-frequency between points and
    /// flat beyond the end points.
    pub fn level_at(&self, freq: f64) -> f64 {
        interp_log_freq(&self.points, freq)
    }

    /// Same frequencies, every level multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Audiogram {
        Audiogram {
            points: self.points.iter().map(|&(f, hl)| (f, hl * factor)).collect(),
        }
    }
}

/// Linear interpolation in `(log f, value)` with flat extrapolation.
/// `table` must be non-empty and sorted by strictly increasing frequency.
pub(crate) fn interp_log_freq(table: &[(f64, f64)], freq: f64) -> f64 {
    let (f0, v0) = table[0];
    let (fl, vl) = table[table.len() - 1];
    if freq <= f0 {
        return v0;
    }
    if freq >= fl {
        return vl;
    }
    let hi = table.partition_point(|&(f, _)| f <= freq);
    let (fa, va) = table[hi - 1];
    let (fb, vb) = table[hi];
    if freq == fa {
        return va;
    }
    let t = (freq / fa).ln() / (fb / fa).ln();
    va + t * (vb - va)
}

/// 3-point moving average, end points replicated.
pub fn smooth3(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let prev = values[i.saturating_sub(1)];
            let next = values[(i + 1).min(n - 1)];
            (prev + values[i] + next) / 3.0
        })
        .collect()
}

/// Per-channel hearing loss and the Q-broadening rule applied to it.
#[derive(Debug, Clone, PartialEq)]
pub struct HearingLossProfile {
    /// Loss in dB HL at each channel cf.
    pub per_cf_hl: Vec<f64>,
    /// Normalization constant of the broadening rule, dB HL.
    pub hl_max: f64,
    /// Keep the `+1` term of the broadening rule. With `false`, zero loss
    /// leaves Q unchanged.
    pub plus_one: bool,
}

impl HearingLossProfile {
    pub fn new(per_cf_hl: Vec<f64>, hl_max: f64, plus_one: bool) -> Result<Self> {
        let p = HearingLossProfile { per_cf_hl, hl_max, plus_one };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hl_max.is_finite() && self.hl_max > 0.0) {
            return Err(Error::input(format!("hl_max must be > 0, got {}", self.hl_max)));
        }
        for (k, &hl) in self.per_cf_hl.iter().enumerate() {
            if !hl.is_finite() || hl < 0.0 {
                return Err(Error::input(format!("channel {k}: hearing loss {hl} dB is not in [0, hl_max]")));
            }
            if hl > self.hl_max {
                return Err(Error::input(format!(
                    "channel {k}: hearing loss {hl} dB exceeds hl_max {} dB",
                    self.hl_max
                )));
            }
        }
        Ok(())
    }

    /// `max(Q_nh * (1 - HL/HL_max) + 1, 1)`, or without the `+1` when disabled.
    pub fn impaired_q_single(&self, q_nh: f64, hl: f64) -> f64 {
        let offset = if self.plus_one { 1.0 } else { 0.0 };
        (q_nh * (1.0 - hl / self.hl_max) + offset).max(1.0)
    }

    pub fn impaired_q(&self, q_nh: &[f64]) -> Result<Vec<f64>> {
        if q_nh.len() != self.per_cf_hl.len() {
            return Err(Error::shape(format!(
                "{} Q values for {} channels",
                q_nh.len(),
                self.per_cf_hl.len()
            )));
        }
        Ok(q_nh
            .iter()
            .zip(&self.per_cf_hl)
            .map(|(&q, &hl)| self.impaired_q_single(q, hl))
            .collect())
    }
}

/// Sample an audiogram at channel center frequencies.
///
/// Levels below 0 dB HL are treated as no loss. Levels above `hl_max` are
/// rejected.
pub fn audiogram_to_profile(
    audiogram: &Audiogram,
    cfs: &[f64],
    hl_max: f64,
    smooth: bool,
    plus_one: bool,
) -> Result<HearingLossProfile> {
    let mut hl: Vec<f64> = cfs.iter().map(|&cf| audiogram.level_at(cf).max(0.0)).collect();
    if smooth && !hl.is_empty() {
        hl = smooth3(&hl);
    }
    HearingLossProfile::new(hl, hl_max, plus_one)
}
