//! Eurostat dissemination API client: query construction, cached fetching,
//! JSON-stat parsing and per-region value extraction.

mod fetch;
mod jsonstat;
mod query;
mod series;

pub use fetch::{
    Cache, CacheMeta, Fetcher, HttpResponse, HttpTransport, RetryPolicy, Transport, TransportError,
    REQUEST_TIMEOUT,
};
pub use jsonstat::{parse_jsonstat, JsonStatCube};
pub use query::{build_query, default_specs, DatasetSpec, RequestDescriptor, API_BASE};
pub use series::{extract_region_series, is_nuts2_code, RegionSeries};

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EurostatError {
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error("HTTP {code} from {url}")]
    HttpStatus { code: u16, url: String },
    #[error("network unavailable and no cached response for {url}")]
    NetworkUnavailable { url: String },
    #[error("request to {url} failed: {reason}")]
    Transport { url: String, reason: String },
    #[error("corrupt cache entry {path}: {reason}")]
    CacheCorrupt { path: String, reason: String },
    #[error("cache I/O error: {0}")]
    Io(String),
    #[error("malformed JSON-stat: {0}")]
    MalformedJson(String),
    #[error("JSON-stat field missing: {0}")]
    MissingField(String),
    #[error("JSON-stat size mismatch: {0}")]
    SizeMismatch(String),
    #[error("response has no geo dimension")]
    NoGeoDimension,
}

impl EurostatError {
    /// True for failures caused by the network rather than the data.
    pub fn is_network(&self) -> bool {
        matches!(
            self,
            Self::HttpStatus { .. } | Self::NetworkUnavailable { .. } | Self::Transport { .. }
        )
    }
}

/// Everything retrieved for one dataset.
#[derive(Debug, Clone)]
pub struct FetchedIndicator {
    pub spec: DatasetSpec,
    pub url: String,
    pub raw: Vec<u8>,
    pub series: RegionSeries,
}

/// Fetches, parses and extracts every spec, one thread per dataset.
/// Results come back in `specs` order; the first failure is returned with
/// its dataset id.
pub fn fetch_indicators(
    specs: &[DatasetSpec],
    fetcher: &Fetcher,
) -> Result<Vec<FetchedIndicator>, (String, EurostatError)> {
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = specs
            .iter()
            .map(|spec| scope.spawn(move || fetch_one(spec, fetcher)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("fetch thread panicked"))
            .collect()
    });
    specs
        .iter()
        .zip(results)
        .map(|(spec, r)| r.map_err(|e| (spec.dataset_id.clone(), e)))
        .collect()
}

fn fetch_one(spec: &DatasetSpec, fetcher: &Fetcher) -> Result<FetchedIndicator, EurostatError> {
    let request = build_query(spec)?;
    let raw = fetcher.fetch(&request)?;
    let cube = parse_jsonstat(&raw)?;
    let series = extract_region_series(&cube, spec)?;
    Ok(FetchedIndicator {
        spec: spec.clone(),
        url: request.url(),
        raw,
        series,
    })
}

/// Applies `dataset.<indicator>.{id,unit}` and `dataset.<indicator>.filter.<dim>`
/// overrides onto the default specs for `year`.
///
/// A filter value of `-` removes that filter.
pub fn specs_from_entries(
    entries: &BTreeMap<String, String>,
    year: u16,
) -> Result<Vec<DatasetSpec>, EurostatError> {
    let mut specs = default_specs(year);
    for (key, value) in entries {
        let Some(rest) = key.strip_prefix("dataset.") else {
            continue;
        };
        let (indicator, field) = rest
            .split_once('.')
            .ok_or_else(|| EurostatError::InvalidSpec(format!("bad key {key}")))?;
        let spec = specs
            .iter_mut()
            .find(|s| s.indicator_name == indicator)
            .ok_or_else(|| {
                EurostatError::InvalidSpec(format!("unknown indicator {indicator:?} in {key}"))
            })?;
        match field {
            "id" => spec.dataset_id = value.clone(),
            "unit" => spec.unit_code = value.clone(),
            _ => match field.strip_prefix("filter.") {
                Some(dim) if value == "-" => {
                    spec.extra_filters.remove(dim);
                }
                Some(dim) => {
                    spec.extra_filters.insert(dim.to_owned(), value.clone());
                }
                None => {
                    return Err(EurostatError::InvalidSpec(format!("unknown key {key}")));
                }
            },
        }
    }
    for spec in &specs {
        spec.validate()?;
    }
    Ok(specs)
}
