//! Run configuration in `key = value` text form and hyperparameter grids
//! in `key = v1, v2, ...` form.
//!
//! ```text
//! # windows in seconds
//! short_s = 2
//! theta_pau = 0.25
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::ExtractConfig;
use crate::forest::{ClinicalRule, Hyperparameters, MaxFeatures, RowSampling};
use crate::metrics::CardiacSource;

/// Everything a run depends on besides its input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub extract: ExtractConfig,
    pub clinical_rule: ClinicalRule,
    /// Base hyperparameters; grid files vary some of them.
    pub hyperparameters: Hyperparameters,
    pub folds: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            extract: ExtractConfig::default(),
            clinical_rule: ClinicalRule::default(),
            hyperparameters: Hyperparameters::default(),
            folds: 5,
            seed: 0,
        }
    }
}

/// Non-empty, non-comment lines split at the first `=`.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    text.lines()
        .enumerate()
        .map(|(n, line)| (n, line.split('#').next().unwrap_or("").trim()))
        .filter(|(_, line)| !line.is_empty())
        .map(|(n, line)| {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn depth(key: &str, v: &str) -> Result<Option<usize>> {
    match v.to_ascii_lowercase().as_str() {
        "none" | "unlimited" => Ok(None),
        _ => num(key, v).map(Some),
    }
}

fn set_hyperparameter(hp: &mut Hyperparameters, key: &str, v: &str) -> Result<bool> {
    match key {
        "n_trees" => hp.n_trees = num(key, v)?,
        "max_features" => hp.max_features = v.parse::<MaxFeatures>()?,
        "max_depth" => hp.max_depth = depth(key, v)?,
        "min_leaf" => hp.min_leaf = num(key, v)?,
        "row_sampling" => {
            hp.row_sampling = match v {
                "bootstrap" => RowSampling::Bootstrap,
                "subsample" => RowSampling::Subsample,
                _ => return Err(Error::Config(format!("row_sampling: unknown mode {v:?}"))),
            }
        }
        "undersample_without_replacement" => hp.undersample_without_replacement = flag(key, v)?,
        _ => return Ok(false),
    }
    Ok(true)
}

impl RunConfig {
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let e = &mut self.extract;
        match key {
            "short_s" => e.windows.short_s = num(key, v)?,
            "long_s" => e.windows.long_s = num(key, v)?,
            "power_s" => e.windows.power_s = num(key, v)?,
            "stft_s" => e.windows.stft_s = num(key, v)?,
            "corr_s" => e.windows.corr_s = num(key, v)?,
            "theta_mvt" => e.thresholds.mvt = num(key, v)?,
            "theta_pau" => e.thresholds.pau = num(key, v)?,
            "theta_phase_deg" => e.thresholds.phase_deg = num(key, v)?,
            "brady_bpm" => e.thresholds.brady_bpm = num(key, v)?,
            "desat_pct" => e.thresholds.desat_pct = num(key, v)?,
            "smoothing_s" => e.thresholds.smoothing_s = num(key, v)?,
            "rho_source" => {
                e.rho_source = match v {
                    "ecg" => CardiacSource::Ecg,
                    "ppg" => CardiacSource::Ppg,
                    _ => return Err(Error::Config(format!("rho_source must be ecg or ppg, got {v:?}"))),
                }
            }
            "patterns_full_ettcpap" => e.patterns_full_ettcpap = flag(key, v)?,
            "min_valid_fraction" => e.min_valid_fraction = num(key, v)?,
            "ga_min_weeks" => self.clinical_rule.ga_min_weeks = num(key, v)?,
            "bw_min_g" => self.clinical_rule.bw_min_g = num(key, v)?,
            "folds" => self.folds = num(key, v)?,
            "seed" => {
                self.seed = num(key, v)?;
                self.hyperparameters.seed = self.seed;
            }
            _ => {
                if !set_hyperparameter(&mut self.hyperparameters, key, v)? {
                    return Err(Error::Config(format!("unknown key {key:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.extract.windows.validate()?;
        self.hyperparameters.validate()?;
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be at least 2, got {}", self.folds)));
        }
        if !(0.0..=1.0).contains(&self.extract.min_valid_fraction) {
            return Err(Error::Config("min_valid_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (k, v) in parse_pairs(text)? {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Cartesian product of comma-separated hyperparameter values over `base`.
/// Keys vary in file order, the last key fastest.
pub fn parse_grid(text: &str, base: &Hyperparameters) -> Result<Vec<Hyperparameters>> {
    let mut grid = vec![*base];
    for (key, values) in parse_pairs(text)? {
        let values: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(Error::Config(format!("{key}: no values")));
        }
        let mut next = Vec::with_capacity(grid.len() * values.len());
        for hp in &grid {
            for v in &values {
                let mut h = *hp;
                if !set_hyperparameter(&mut h, &key, v)? {
                    return Err(Error::Config(format!("{key} is not a hyperparameter")));
                }
                h.validate()?;
                next.push(h);
            }
        }
        grid = next;
    }
    Ok(grid)
}

pub fn load_grid(path: impl AsRef<Path>, base: &Hyperparameters) -> Result<Vec<Hyperparameters>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_grid(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = RunConfig::from_text("# comment\nshort_s = 3\ntheta_pau=0.3 # inline\nmax_depth = none\nseed = 9\n").unwrap();
        assert_eq!(cfg.extract.windows.short_s, 3.0);
        assert_eq!(cfg.extract.thresholds.pau, 0.3);
        assert_eq!(cfg.hyperparameters.max_depth, None);
        assert_eq!(cfg.hyperparameters.seed, 9);
        assert_eq!(RunConfig::from_text("").unwrap(), RunConfig::default());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::from_text("bogus = 1").is_err());
        assert!(RunConfig::from_text("short_s").is_err());
        assert!(RunConfig::from_text("short_s = abc").is_err());
        assert!(RunConfig::from_text("short_s = 40").is_err());
    }

    #[test]
    fn grid_product() {
        let g = parse_grid("n_trees = 10, 50\nmax_depth = 3, none\nmin_leaf = 1", &Hyperparameters::default()).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!((g[0].n_trees, g[0].max_depth), (10, Some(3)));
        assert_eq!((g[3].n_trees, g[3].max_depth), (50, None));
        assert!(parse_grid("seed = 1, 2", &Hyperparameters::default()).is_err());
        assert!(parse_grid("n_trees = 0", &Hyperparameters::default()).is_err());
    }
}
