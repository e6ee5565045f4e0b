//! Conventional prescription baselines: NAL-R insertion gain and the
//! half-gain audiogram transform.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{fmt_sig, read_pair_table};
use crate::model::{interp_log_freq, Audiogram};
use crate::spacing::GainCurve;

const NALR_K: &str = include_str!("../data/nalr_k.csv");

/// Frequencies at which NAL-R is prescribed.
pub const NALR_FREQS: [f64; 9] = [250.0, 500.0, 750.0, 1000.0, 1500.0, 2000.0, 3000.0, 4000.0, 6000.0];

/// Per-frequency NAL-R correction `(freq_hz, k_db)`.
pub fn nalr_k_table() -> Vec<(f64, f64)> {
    // Checksummed at build time, so parsing cannot fail at runtime.
    read_pair_table(NALR_K, "freq_hz", "k_db").expect("bundled NAL-R table is valid")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrescriptionGain {
    pub freqs: Vec<f64>,
    pub insertion_gain_db: Vec<f64>,
}

impl PrescriptionGain {
    pub fn new(freqs: Vec<f64>, insertion_gain_db: Vec<f64>) -> Result<Self> {
        if freqs.len() != insertion_gain_db.len() {
            return Err(Error::shape(format!("{} freqs, {} gains", freqs.len(), insertion_gain_db.len())));
        }
        if freqs.is_empty() {
            return Err(Error::input("prescription is empty"));
        }
        if freqs.windows(2).any(|w| w[1] <= w[0]) || freqs[0] <= 0.0 {
            return Err(Error::input("prescription frequencies must be positive and increasing"));
        }
        if insertion_gain_db.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::input("insertion gains must be finite and non-negative"));
        }
        Ok(PrescriptionGain { freqs, insertion_gain_db })
    }

    /// CSV `freq_hz,insertion_gain_db`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("freq_hz,insertion_gain_db\n");
        for (f, g) in self.freqs.iter().zip(&self.insertion_gain_db) {
            s.push_str(&format!("{},{}\n", fmt_sig(*f), fmt_sig(*g)));
        }
        s
    }

    fn table(&self) -> Vec<(f64, f64)> {
        self.freqs.iter().cloned().zip(self.insertion_gain_db.iter().cloned()).collect()
    }
}

/// NAL-R insertion gain at [`NALR_FREQS`]. The audiogram must span
/// 500-2000 Hz; outside its range levels are extended flat. Negative
/// gains are clamped to 0 dB.
pub fn nalr_gain(a: &Audiogram) -> Result<PrescriptionGain> {
    if a.min_freq() > 500.0 || a.max_freq() < 2000.0 {
        return Err(Error::input(format!(
            "NAL-R needs thresholds from 500 to 2000 Hz, audiogram covers {}-{} Hz",
            a.min_freq(),
            a.max_freq()
        )));
    }
    let x = 0.05 * (a.level_at(500.0) + a.level_at(1000.0) + a.level_at(2000.0));
    let gains = nalr_k_table()
        .into_iter()
        .map(|(f, k)| (x + 0.31 * a.level_at(f) + k).max(0.0))
        .collect();
    PrescriptionGain::new(NALR_FREQS.to_vec(), gains)
}

/// Every threshold divided by two.
pub fn half_gain(a: &Audiogram) -> Audiogram {
    a.scaled(0.5)
}

/// Linear magnitude on `grid`, interpolating dB linearly in
/// log-frequency with flat extension at both ends.
pub fn prescription_to_gaincurve(p: &PrescriptionGain, grid: &[f64]) -> Result<GainCurve> {
    if grid.is_empty() {
        return Err(Error::input("frequency grid is empty"));
    }
    if grid.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
        return Err(Error::input("grid frequencies must be finite and non-negative"));
    }
    let table = p.table();
    let gains = grid
        .iter()
        .map(|&f| 10f64.powf(interp_log_freq(&table, f.max(table[0].0)) / 20.0))
        .collect();
    GainCurve::new(grid.to_vec(), gains)
}
