use serde::{Deserialize, Serialize};

use super::{GammatoneParams, FilterbankSpec, MIN_NORMAL_Q};
use crate::error::{Error, Result};
use crate::spacing::{self, ProbeModel};

/// How Q moves between its two anchor frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum QScale {
    /// Linear in frequency.
    #[default]
    Linear,
    /// Linear in log-frequency.
    Log,
}

/// Normal-hearing Q as a function of center frequency.
///
/// `q_lo` at `cf_lo`, `q_hi` at `cf_hi`, continued linearly outside the
/// anchors and floored at `floor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QProfile {
    pub cf_lo: f64,
    pub q_lo: f64,
    pub cf_hi: f64,
    pub q_hi: f64,
    pub scale: QScale,
    pub floor: f64,
}

impl QProfile {
    pub fn constant(q: f64) -> Self {
        QProfile { cf_lo: 1.0, q_lo: q, cf_hi: 2.0, q_hi: q, scale: QScale::Linear, floor: MIN_NORMAL_Q.min(q) }
    }

    pub fn q_at(&self, cf: f64) -> f64 {
        let t = match self.scale {
            QScale::Linear => (cf - self.cf_lo) / (self.cf_hi - self.cf_lo),
            QScale::Log => (cf / self.cf_lo).ln() / (self.cf_hi / self.cf_lo).ln(),
        };
        (self.q_lo + t * (self.q_hi - self.q_lo)).max(self.floor)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.cf_lo > 0.0
            && self.cf_hi > self.cf_lo
            && self.q_lo.is_finite()
            && self.q_hi.is_finite()
            && self.floor > 0.0;
        if !ok {
            return Err(Error::config(format!("invalid Q profile {self:?}")));
        }
        Ok(())
    }
}

/// Channel placement named in a filterbank config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpacingChoice {
    Named(String),
    Explicit(Vec<f64>),
}

/// JSON filterbank configuration.
///
/// Defaults reproduce the reference setup: 128 first-order channels,
/// log-spaced from 100 Hz to 10 kHz, Q rising from 0 (floored at 0.5) to 10.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterbankConfig {
    pub k: usize,
    pub cf_min_hz: f64,
    pub cf_max_hz: f64,
    pub spacing: SpacingChoice,
    pub q_min: f64,
    pub q_max: f64,
    pub q_scale: QScale,
    pub order: u32,
    pub sample_rate_hz: f64,
    pub nfft: usize,
    pub hl_max_db: f64,
    pub plus_one: bool,
    /// Decay threshold for `"proposed"` spacing. When absent, the threshold
    /// is searched so that exactly `k` channels are produced.
    pub delta: Option<f64>,
}

impl Default for FilterbankConfig {
    fn default() -> Self {
        FilterbankConfig {
            k: 128,
            cf_min_hz: 100.0,
            cf_max_hz: 10_000.0,
            spacing: SpacingChoice::Named("log".into()),
            q_min: 0.0,
            q_max: 10.0,
            q_scale: QScale::Linear,
            order: 1,
            sample_rate_hz: 32_000.0,
            nfft: 1 << 15,
            hl_max_db: 105.0,
            plus_one: true,
            delta: None,
        }
    }
}

impl FilterbankConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: FilterbankConfig =
            serde_json::from_str(text).map_err(|e| Error::config(format!("filterbank config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cf_min_hz > 0.0 && self.cf_max_hz > self.cf_min_hz) {
            return Err(Error::config("need 0 < cf_min_hz < cf_max_hz"));
        }
        if self.cf_max_hz >= self.sample_rate_hz / 2.0 {
            return Err(Error::config("cf_max_hz must be below Nyquist"));
        }
        if self.order == 0 {
            return Err(Error::config("order must be >= 1"));
        }
        if self.nfft < 2 {
            return Err(Error::config("nfft must be >= 2"));
        }
        if !(self.hl_max_db > 0.0) {
            return Err(Error::config("hl_max_db must be > 0"));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::config("delta must lie in (0, 1)"));
            }
        }
        if let SpacingChoice::Named(name) = &self.spacing {
            if name != "log" && name != "proposed" {
                return Err(Error::config(format!("unknown spacing '{name}'")));
            }
        }
        self.q_profile().validate()
    }

    pub fn q_profile(&self) -> QProfile {
        QProfile {
            cf_lo: self.cf_min_hz,
            q_lo: self.q_min,
            cf_hi: self.cf_max_hz,
            q_hi: self.q_max,
            scale: self.q_scale,
            floor: MIN_NORMAL_Q,
        }
    }

    pub fn probe_model(&self) -> ProbeModel {
        ProbeModel {
            q_profile: self.q_profile(),
            order: self.order,
            sample_rate: self.sample_rate_hz,
        }
    }

    /// Center frequencies selected by the configured spacing.
    pub fn cfs(&self) -> Result<Vec<f64>> {
        match &self.spacing {
            SpacingChoice::Explicit(list) => Ok(list.clone()),
            SpacingChoice::Named(name) if name == "log" => spacing::log_cfs(self.cf_min_hz, self.cf_max_hz, self.k),
            SpacingChoice::Named(_) => {
                let model = self.probe_model();
                match self.delta {
                    Some(delta) => spacing::propose_cfs(&spacing::SpacingRequest {
                        cf_min: self.cf_min_hz,
                        cf_max: self.cf_max_hz,
                        delta,
                        model,
                    }),
                    None => spacing::proposed_cfs_for_count(self.cf_min_hz, self.cf_max_hz, self.k, &model)
                        .map(|r| r.cfs),
                }
            }
        }
    }

    /// Normal-hearing channel layout for the given center frequencies.
    pub fn spec_for_cfs(&self, cfs: &[f64]) -> Result<FilterbankSpec> {
        let profile = self.q_profile();
        let channels = cfs
            .iter()
            .map(|&cf| GammatoneParams::new(cf, self.order, profile.q_at(cf), 1.0))
            .collect::<Result<Vec<_>>>()?;
        FilterbankSpec::new(channels, self.sample_rate_hz, self.nfft)
    }

    pub fn normal_spec(&self) -> Result<FilterbankSpec> {
        self.spec_for_cfs(&self.cfs()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty_object() {
        let cfg = FilterbankConfig::from_json("{}").unwrap();
        assert_eq!(cfg, FilterbankConfig::default());
    }

    #[test]
    fn spacing_variants_parse() {
        let cfg = FilterbankConfig::from_json(r#"{"spacing":[200,400,800],"k":3}"#).unwrap();
        assert_eq!(cfg.cfs().unwrap(), vec![200.0, 400.0, 800.0]);
        let cfg = FilterbankConfig::from_json(r#"{"spacing":"proposed","delta":0.5}"#).unwrap();
        assert_eq!(cfg.spacing, SpacingChoice::Named("proposed".into()));
        assert!(FilterbankConfig::from_json(r#"{"spacing":"mel"}"#).is_err());
        assert!(FilterbankConfig::from_json(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn q_profile_floor_and_anchors() {
        let p = FilterbankConfig::default().q_profile();
        assert_eq!(p.q_at(100.0), MIN_NORMAL_Q);
        assert!((p.q_at(10_000.0) - 10.0).abs() < 1e-12);
        let mut log = p;
        log.scale = QScale::Log;
        assert!((log.q_at(1000.0) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn default_spec_builds() {
        let spec = FilterbankConfig::default().normal_spec().unwrap();
        assert_eq!(spec.num_channels(), 128);
        assert!((spec.channels[0].cf - 100.0).abs() < 1e-9);
        assert!((spec.channels[127].cf - 10_000.0).abs() < 1e-6);
        assert!(spec.channels.iter().all(|c| c.q >= MIN_NORMAL_Q));
    }
}
