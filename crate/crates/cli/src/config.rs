//! Run configuration: defaults, a flat `key = value` file, and overrides.
//!
//! ```text
//! # comments start with '#'
//! year = 2022
//! seed = 42
//! contamination = 0.05
//! lof.k = 20
//! iforest.trees = 300
//! iforest.subsample = 256
//! ocsvm.nu = 0.05
//! ocsvm.gamma = scale        # or a positive number
//! zscore.c = 3
//! mahalanobis = percentile:0.99   # or chi2:0.01
//! vote_threshold = 3
//! cache_dir = ~/.cache/regionscope
//! out_dir = out
//! offline = false
//! fixture = appendix_a1
//! dataset.unemployment.filter.age = Y20-64
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use regionscope_core::dataset::FIXTURE_NAMES;
use regionscope_core::detectors::{GammaMode, MahalanobisMode};
use regionscope_core::eurostat::{specs_from_entries, DatasetSpec};
use regionscope_core::pipeline::DetectionConfig;

use crate::error::CliError;

pub const CACHE_DIR_ENV: &str = "REGIONSCOPE_CACHE_DIR";
pub const DEFAULT_YEAR: u16 = 2022;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub year: u16,
    pub detection: DetectionConfig,
    pub datasets: Vec<DatasetSpec>,
    pub cache_dir: PathBuf,
    pub out_dir: PathBuf,
    pub offline: bool,
    pub fixture: Option<String>,
    dataset_entries: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            year: DEFAULT_YEAR,
            detection: DetectionConfig::default(),
            datasets: regionscope_core::eurostat::default_specs(DEFAULT_YEAR),
            cache_dir: default_cache_dir(),
            out_dir: PathBuf::from("out"),
            offline: false,
            fixture: None,
            dataset_entries: BTreeMap::new(),
        }
    }
}

fn default_cache_dir() -> PathBuf {
    std::env::var_os("XDG_CACHE_HOME")
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache")))
        .unwrap_or_else(|| PathBuf::from(".cache"))
        .join("regionscope")
}

/// Parses the flat config format into ordered `(line, key, value)` entries.
pub fn parse_entries(text: &str) -> Result<Vec<(usize, String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::config(format!("config line {}: expected key = value", i + 1))
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(CliError::config(format!(
                "config line {}: empty key",
                i + 1
            )));
        }
        out.push((i + 1, key.to_owned(), value.trim().to_owned()));
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::config(format!(
            "{key}: expected true or false, got {value:?}"
        ))),
    }
}

pub fn parse_gamma(value: &str) -> Result<GammaMode, CliError> {
    if value.eq_ignore_ascii_case("scale") {
        Ok(GammaMode::Scale)
    } else {
        Ok(GammaMode::Fixed(parse_num("ocsvm.gamma", value)?))
    }
}

/// `percentile:P` or `chi2:ALPHA`; a bare `percentile` or `chi2` uses the default level.
pub fn parse_mahalanobis(value: &str) -> Result<MahalanobisMode, CliError> {
    let (kind, level) = match value.split_once(':') {
        Some((k, l)) => (k, Some(l)),
        None => (value, None),
    };
    match kind {
        "percentile" => Ok(MahalanobisMode::EmpiricalPercentile {
            p: level.map_or(Ok(0.99), |l| parse_num("mahalanobis", l))?,
        }),
        "chi2" => Ok(MahalanobisMode::ChiSquare {
            alpha: level.map_or(Ok(0.01), |l| parse_num("mahalanobis", l))?,
        }),
        _ => Err(CliError::config(format!(
            "mahalanobis: expected percentile:P or chi2:ALPHA, got {value:?}"
        ))),
    }
}

fn expand_home(value: &str) -> PathBuf {
    match value.strip_prefix("~/") {
        Some(rest) => std::env::var_os("HOME")
            .map(|h| PathBuf::from(h).join(rest))
            .unwrap_or_else(|| PathBuf::from(value)),
        None => PathBuf::from(value),
    }
}

impl RunConfig {
    /// Applies one setting; `dataset.*` keys are collected and resolved in [`finish`](Self::finish).
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let d = &mut self.detection;
        match key {
            "year" => self.year = parse_num(key, value)?,
            "seed" => d.seed = parse_num(key, value)?,
            "contamination" => d.contamination = parse_num(key, value)?,
            "lof.k" => d.lof_k = parse_num(key, value)?,
            "iforest.trees" => d.iforest_trees = parse_num(key, value)?,
            "iforest.subsample" => {
                d.iforest_subsample = if value == "auto" {
                    None
                } else {
                    Some(parse_num(key, value)?)
                }
            }
            "ocsvm.nu" => d.nu = parse_num(key, value)?,
            "ocsvm.gamma" => d.gamma = parse_gamma(value)?,
            "zscore.c" => d.zscore_c = parse_num(key, value)?,
            "mahalanobis" => d.mahalanobis = parse_mahalanobis(value)?,
            "vote_threshold" => d.vote_threshold = parse_num(key, value)?,
            "cache_dir" => self.cache_dir = expand_home(value),
            "out_dir" => self.out_dir = expand_home(value),
            "offline" => self.offline = parse_bool(key, value)?,
            "fixture" => {
                self.fixture = if value.is_empty() || value == "none" {
                    None
                } else {
                    Some(value.to_owned())
                }
            }
            _ if key.starts_with("dataset.") => {
                self.dataset_entries
                    .insert(key.to_owned(), value.to_owned());
            }
            _ => return Err(CliError::config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        for (line, key, value) in parse_entries(&text)? {
            self.set(&key, &value).map_err(|e| {
                CliError::config(format!("{} line {line}: {}", path.display(), e.message))
            })?;
        }
        Ok(())
    }

    /// Applies `KEY=VALUE` override strings.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), CliError> {
        for item in overrides {
            let (key, value) = item.split_once('=').ok_or_else(|| {
                CliError::config(format!("--set expects KEY=VALUE, got {item:?}"))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(CACHE_DIR_ENV).filter(|d| !d.is_empty()) {
            self.cache_dir = PathBuf::from(dir);
        }
    }

    /// Resolves dataset specs for the final year and validates every parameter.
    pub fn finish(&mut self) -> Result<(), CliError> {
        self.datasets = specs_from_entries(&self.dataset_entries, self.year)
            .map_err(|e| CliError::config(e.to_string()))?;
        self.detection
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        if let Some(name) = &self.fixture {
            if !FIXTURE_NAMES.contains(&name.as_str()) {
                return Err(CliError::config(format!(
                    "unknown fixture {name:?}; available: {}",
                    FIXTURE_NAMES.join(", ")
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blank_lines() {
        let e = parse_entries("# top\n\nseed = 7 # trailing\n  lof.k=5\n").unwrap();
        assert_eq!(
            e,
            vec![
                (3, "seed".to_owned(), "7".to_owned()),
                (4, "lof.k".to_owned(), "5".to_owned())
            ]
        );
    }

    #[test]
    fn missing_equals_reports_line() {
        let err = parse_entries("seed = 1\nbogus\n").unwrap_err();
        assert!(err.message.contains("line 2"), "{}", err.message);
    }

    #[test]
    fn defaults_are_reference_configuration() {
        let mut c = RunConfig::default();
        c.finish().unwrap();
        let d = &c.detection;
        assert_eq!(
            (d.seed, d.lof_k, d.iforest_trees, d.vote_threshold),
            (42, 20, 300, 3)
        );
        assert_eq!((d.contamination, d.nu, d.zscore_c), (0.05, 0.05, 3.0));
        assert_eq!(c.datasets.len(), 4);
        assert_eq!(c.year, 2022);
    }

    #[test]
    fn contamination_out_of_range_is_config_error() {
        let mut c = RunConfig::default();
        c.set("contamination", "0.6").unwrap();
        assert!(c.finish().is_err());
    }

    #[test]
    fn mahalanobis_modes() {
        assert_eq!(
            parse_mahalanobis("chi2:0.05").unwrap(),
            MahalanobisMode::ChiSquare { alpha: 0.05 }
        );
        assert_eq!(
            parse_mahalanobis("percentile").unwrap(),
            MahalanobisMode::EmpiricalPercentile { p: 0.99 }
        );
        assert!(parse_mahalanobis("median").is_err());
    }

    #[test]
    fn dataset_override_changes_filter() {
        let mut c = RunConfig::default();
        c.set("dataset.unemployment.filter.age", "Y20-64").unwrap();
        c.set("year", "2021").unwrap();
        c.finish().unwrap();
        let u = c
            .datasets
            .iter()
            .find(|s| s.indicator_name == "unemployment")
            .unwrap();
        assert_eq!(u.extra_filters["age"], "Y20-64");
        assert!(c.datasets.iter().all(|s| s.year == 2021));
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(RunConfig::default().set("colour", "red").is_err());
    }
}
