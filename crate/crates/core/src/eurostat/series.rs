use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DatasetSpec, EurostatError, JsonStatCube};

/// One indicator value per NUTS2 region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSeries {
    pub indicator_name: String,
    pub entries: BTreeMap<String, f64>,
}

pub fn is_nuts2_code(code: &str) -> bool {
    code.len() == 4
        && code
            .bytes()
            .all(|b| b.is_ascii_uppercase() || b.is_ascii_digit())
}

/// Picks, for every four-character geo code, the first value in ascending
/// flat-index order. Other dimensions are left free; cells without a value
/// are skipped, so a region with no value at all is omitted.
pub fn extract_region_series(
    cube: &JsonStatCube,
    spec: &DatasetSpec,
) -> Result<RegionSeries, EurostatError> {
    let geo = cube
        .dimension_position("geo")
        .ok_or(EurostatError::NoGeoDimension)?;
    let codes = cube.categories(geo);
    let mut entries = BTreeMap::new();
    for (&flat, &value) in &cube.values {
        let code = codes[cube.decode_index(flat)[geo]];
        if is_nuts2_code(code) && value.is_finite() {
            entries.entry(code.to_owned()).or_insert(value);
        }
    }
    Ok(RegionSeries {
        indicator_name: spec.indicator_name.clone(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eurostat::{default_specs, parse_jsonstat};

    // geo x age, 2 x 4; flat index = geo * 4 + age
    const TWO_DIM: &str = r#"{
        "id": ["geo", "age"],
        "size": [3, 4],
        "dimension": {
            "geo": { "category": { "index": ["DE", "DE30", "ES63"] } },
            "age": { "category": { "index": ["A", "B", "C", "D"] } }
        },
        "value": { "0": 99.0, "7": 4.0, "5": 3.0, "1": 98.0 }
    }"#;

    #[test]
    fn first_non_missing_in_flat_order() {
        let cube = parse_jsonstat(TWO_DIM.as_bytes()).unwrap();
        let s = extract_region_series(&cube, &default_specs(2022)[0]).unwrap();
        // DE30 has values at flat positions 5 and 7; 5 wins. DE is NUTS1. ES63 has nothing.
        assert_eq!(s.entries.len(), 1);
        assert_eq!(s.entries["DE30"], 3.0);
        assert_eq!(s.indicator_name, "gdp_pps");
    }

    #[test]
    fn requires_geo() {
        let text = TWO_DIM.replace("\"geo\"", "\"reg\"");
        let cube = parse_jsonstat(text.as_bytes()).unwrap();
        assert_eq!(
            extract_region_series(&cube, &default_specs(2022)[0]),
            Err(EurostatError::NoGeoDimension)
        );
    }

    #[test]
    fn nuts2_filter() {
        assert!(is_nuts2_code("BE10"));
        assert!(is_nuts2_code("TR10"));
        assert!(!is_nuts2_code("DE"));
        assert!(!is_nuts2_code("DE300"));
        assert!(!is_nuts2_code("be10"));
    }
}
