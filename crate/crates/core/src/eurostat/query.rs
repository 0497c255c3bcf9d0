use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EurostatError;

pub const API_BASE: &str = "https://ec.europa.eu/eurostat/api/dissemination/statistics/1.0/data";

/// One Eurostat dataset query: which table, unit, year and extra dimension filters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub dataset_id: String,
    pub unit_code: String,
    /// Additional `dimension -> category code` filters (age, sex, education level, ...).
    pub extra_filters: BTreeMap<String, String>,
    pub year: u16,
    /// Column name this dataset populates in the merged table.
    pub indicator_name: String,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), EurostatError> {
        if self.dataset_id.trim().is_empty() {
            return Err(EurostatError::InvalidSpec("dataset_id is empty".into()));
        }
        if self.unit_code.trim().is_empty() {
            return Err(EurostatError::InvalidSpec(format!(
                "{}: unit code is empty",
                self.dataset_id
            )));
        }
        if !(1990..=2100).contains(&self.year) {
            return Err(EurostatError::InvalidSpec(format!(
                "{}: year {} outside 1990..=2100",
                self.dataset_id, self.year
            )));
        }
        if self.indicator_name.trim().is_empty() {
            return Err(EurostatError::InvalidSpec(format!(
                "{}: indicator name is empty",
                self.dataset_id
            )));
        }
        let reserved = ["format", "time", "unit", "geo"];
        if let Some(key) = self
            .extra_filters
            .keys()
            .find(|k| k.is_empty() || reserved.contains(&k.as_str()))
        {
            return Err(EurostatError::InvalidSpec(format!(
                "{}: filter dimension {key:?} is not allowed",
                self.dataset_id
            )));
        }
        Ok(())
    }
}

/// The four indicator queries for a reference year, in merged-column order.
///
/// Category codes follow Eurostat's current coding; they are plain data and
/// can be overridden through the run configuration.
pub fn default_specs(year: u16) -> Vec<DatasetSpec> {
    let spec = |id: &str, unit: &str, filters: &[(&str, &str)], name: &str| DatasetSpec {
        dataset_id: id.into(),
        unit_code: unit.into(),
        extra_filters: filters
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
        year,
        indicator_name: name.into(),
    };
    vec![
        spec("nama_10r_2gdp", "PPS_HAB_EU27_2020", &[], "gdp_pps"),
        spec(
            "lfst_r_lfu3rt",
            "PC_ACT",
            &[("age", "Y15-74"), ("sex", "T")],
            "unemployment",
        ),
        spec(
            "edat_lfse_04",
            "PC",
            &[("age", "Y25-64"), ("isced11", "ED5-8"), ("sex", "T")],
            "tertiary",
        ),
        spec("demo_r_d3dens", "PER_KM2", &[], "density"),
    ]
}

/// A fully resolved GET request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestDescriptor {
    pub base_url: String,
    pub params: Vec<(String, String)>,
}

impl RequestDescriptor {
    /// Canonical URL; also the cache key.
    pub fn url(&self) -> String {
        let query: Vec<String> = self
            .params
            .iter()
            .map(|(k, v)| format!("{}={}", encode_component(k), encode_component(v)))
            .collect();
        format!("{}?{}", self.base_url, query.join("&"))
    }
}

/// `format`, `unit` and `time` lead in that order; extra filters follow sorted by dimension name.
pub fn build_query(spec: &DatasetSpec) -> Result<RequestDescriptor, EurostatError> {
    spec.validate()?;
    let mut params = vec![
        ("format".to_string(), "JSON".to_string()),
        ("unit".to_string(), spec.unit_code.clone()),
        ("time".to_string(), spec.year.to_string()),
    ];
    params.extend(
        spec.extra_filters
            .iter()
            .map(|(k, v)| (k.clone(), v.clone())),
    );
    Ok(RequestDescriptor {
        base_url: format!("{API_BASE}/{}", spec.dataset_id),
        params,
    })
}

fn encode_component(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => {
                out.push(b as char)
            }
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gdp_query() {
        let specs = default_specs(2022);
        let url = build_query(&specs[0]).unwrap().url();
        assert_eq!(
            url,
            "https://ec.europa.eu/eurostat/api/dissemination/statistics/1.0/data/nama_10r_2gdp?format=JSON&unit=PPS_HAB_EU27_2020&time=2022"
        );
    }

    #[test]
    fn unemployment_query_has_sorted_filters() {
        let url = build_query(&default_specs(2022)[1]).unwrap().url();
        assert!(url.contains("lfst_r_lfu3rt"));
        assert!(url.contains("unit=PC_ACT"));
        assert!(url.ends_with("&time=2022&age=Y15-74&sex=T"));
    }

    #[test]
    fn empty_dataset_id_is_invalid() {
        let mut spec = default_specs(2022).remove(0);
        spec.dataset_id.clear();
        assert!(matches!(
            build_query(&spec),
            Err(EurostatError::InvalidSpec(_))
        ));
    }

    #[test]
    fn year_out_of_range() {
        let mut spec = default_specs(2022).remove(3);
        spec.year = 1980;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn reserved_filter_rejected() {
        let mut spec = default_specs(2022).remove(3);
        spec.extra_filters.insert("time".into(), "2020".into());
        assert!(spec.validate().is_err());
    }

    #[test]
    fn deterministic() {
        for spec in default_specs(2021) {
            assert_eq!(
                build_query(&spec).unwrap().url(),
                build_query(&spec.clone()).unwrap().url()
            );
        }
    }
}
