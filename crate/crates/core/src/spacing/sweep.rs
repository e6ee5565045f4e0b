use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gnr, log_cfs, proposed_cfs_for_count, GainCurve};
use crate::compensation::{optimal_gain_from_specs, GainOptions};
use crate::error::{Error, Result};
use crate::model::{audiogram_to_profile, impair_spec, Audiogram, FilterbankConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpacingStrategy {
    Log,
    Proposed,
}

impl SpacingStrategy {
    pub fn name(self) -> &'static str {
        match self {
            SpacingStrategy::Log => "log",
            SpacingStrategy::Proposed => "proposed",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "log" => Ok(SpacingStrategy::Log),
            "proposed" => Ok(SpacingStrategy::Proposed),
            other => Err(Error::input(format!("unknown spacing strategy '{other}'"))),
        }
    }

    /// `k` center frequencies over the config's range. For the proposed
    /// layout the threshold is searched; it is returned alongside.
    pub fn cfs(self, cfg: &FilterbankConfig, k: usize) -> Result<(Vec<f64>, Option<f64>)> {
        match self {
            SpacingStrategy::Log => Ok((log_cfs(cfg.cf_min_hz, cfg.cf_max_hz, k)?, None)),
            SpacingStrategy::Proposed => {
                let p = proposed_cfs_for_count(cfg.cf_min_hz, cfg.cf_max_hz, k, &cfg.probe_model())?;
                Ok((p.cfs, Some(p.delta)))
            }
        }
    }
}

/// Optimal-compensation gain magnitude for a channel layout, restricted to
/// the config's `[cf_min, cf_max]` band.
pub fn compensation_curve(cfg: &FilterbankConfig, cfs: &[f64], audiogram: &Audiogram, smooth: bool) -> Result<GainCurve> {
    let normal = cfg.spec_for_cfs(cfs)?;
    let profile = audiogram_to_profile(audiogram, cfs, cfg.hl_max_db, smooth, cfg.plus_one)?;
    let impaired = impair_spec(&normal, &profile)?;
    let gain = optimal_gain_from_specs(&normal, &impaired, &GainOptions::default())?;
    let curve = GainCurve::new(gain.positive_freqs(), gain.positive_magnitudes())?;
    Ok(curve.band(cfg.cf_min_hz, cfg.cf_max_hz))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub model: FilterbankConfig,
    pub k_values: Vec<usize>,
    pub strategies: Vec<SpacingStrategy>,
    pub ref_k: usize,
    pub smooth: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub strategy: SpacingStrategy,
    pub k: usize,
    pub gnr_db: f64,
    /// Threshold used for proposed layouts.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub warnings: Vec<String>,
}

impl SweepTable {
    /// CSV `strategy,k,gnr_db`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("strategy,k,gnr_db\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{}\n", r.strategy.name(), r.k, crate::io::fmt_sig(r.gnr_db)));
        }
        s
    }

    pub fn get(&self, strategy: SpacingStrategy, k: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.strategy == strategy && r.k == k).map(|r| r.gnr_db)
    }
}

/// GNR of each `(strategy, K)` layout against the same strategy at `ref_k`
/// channels. Rows follow the input order: strategies outer, K inner.
pub fn gnr_sweep(cfg: &SweepConfig, audiogram: &Audiogram) -> Result<SweepTable> {
    cfg.model.validate()?;
    if cfg.k_values.is_empty() || cfg.strategies.is_empty() {
        return Err(Error::input("sweep needs at least one K and one strategy"));
    }
    let max_k = *cfg.k_values.iter().max().expect("non-empty");
    if cfg.ref_k < max_k {
        return Err(Error::input(format!("ref_k {} is below the largest K {max_k}", cfg.ref_k)));
    }
    let mut warnings = Vec::new();
    if cfg.ref_k < 4 * max_k {
        warnings.push(format!(
            "ref_k {} is less than 4 x max K ({}); the reference may still carry ripple",
            cfg.ref_k,
            4 * max_k
        ));
    }

    let mut strategies = Vec::new();
    for s in &cfg.strategies {
        if strategies.contains(s) {
            warnings.push(format!("duplicate strategy '{}' ignored", s.name()));
        } else {
            strategies.push(*s);
        }
    }

    let curve = |s: SpacingStrategy, k: usize| -> Result<(GainCurve, Option<f64>)> {
        let (cfs, delta) = s.cfs(&cfg.model, k)?;
        Ok((compensation_curve(&cfg.model, &cfs, audiogram, cfg.smooth)?, delta))
    };

    let references: Vec<GainCurve> = strategies
        .par_iter()
        .map(|&s| curve(s, cfg.ref_k).map(|c| c.0))
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, usize)> = (0..strategies.len())
        .flat_map(|si| cfg.k_values.iter().map(move |&k| (si, k)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(si, k)| {
            let s = strategies[si];
            let (g, delta) = curve(s, k)?;
            Ok(SweepRow { strategy: s, k, gnr_db: gnr(&references[si], &g)?, delta })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { rows, warnings })
}
