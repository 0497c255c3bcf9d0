//! JSON-stat 2.0 dataset responses.
//!
//! Only the parts needed to address cells are modelled: dimension ids and
//! sizes, category positions, and the (possibly sparse) value map.

use std::collections::BTreeMap;

use serde_json::{Map, Value};

use super::EurostatError;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct JsonStatCube {
    pub dimension_ids: Vec<String>,
    pub dimension_sizes: Vec<usize>,
    /// Per dimension, category code to position.
    pub category_index: Vec<BTreeMap<String, usize>>,
    /// Flat row-major index to value; absent cells are missing data.
    pub values: BTreeMap<usize, f64>,
    pub label: String,
}

impl JsonStatCube {
    pub fn dimension_position(&self, id: &str) -> Option<usize> {
        self.dimension_ids.iter().position(|d| d == id)
    }

    /// Category codes of dimension `dim` ordered by position.
    pub fn categories(&self, dim: usize) -> Vec<&str> {
        let mut codes = vec![""; self.dimension_sizes[dim]];
        for (code, &pos) in &self.category_index[dim] {
            codes[pos] = code;
        }
        codes
    }

    pub fn cell_count(&self) -> usize {
        self.dimension_sizes.iter().product()
    }

    /// Splits a flat index into one coordinate per dimension (last dimension fastest).
    pub fn decode_index(&self, mut flat: usize) -> Vec<usize> {
        let mut coords = vec![0; self.dimension_sizes.len()];
        for (d, &size) in self.dimension_sizes.iter().enumerate().rev() {
            coords[d] = flat % size;
            flat /= size;
        }
        coords
    }

    /// Serializes back to a minimal JSON-stat document (object indices, sparse values).
    pub fn to_json(&self) -> Value {
        let mut dimension = Map::new();
        for (d, id) in self.dimension_ids.iter().enumerate() {
            let index: Map<String, Value> = self.category_index[d]
                .iter()
                .map(|(code, &pos)| (code.clone(), Value::from(pos)))
                .collect();
            dimension.insert(
                id.clone(),
                serde_json::json!({ "category": { "index": index } }),
            );
        }
        let values: Map<String, Value> = self
            .values
            .iter()
            .map(|(k, v)| (k.to_string(), Value::from(*v)))
            .collect();
        serde_json::json!({
            "version": "2.0",
            "class": "dataset",
            "label": self.label,
            "id": self.dimension_ids,
            "size": self.dimension_sizes,
            "dimension": dimension,
            "value": values,
        })
    }
}

pub fn parse_jsonstat(bytes: &[u8]) -> Result<JsonStatCube, EurostatError> {
    let root: Value =
        serde_json::from_slice(bytes).map_err(|e| EurostatError::MalformedJson(e.to_string()))?;
    let root = root
        .as_object()
        .ok_or_else(|| EurostatError::MalformedJson("top level is not an object".into()))?;

    let ids: Vec<String> = field(root, "id")?
        .as_array()
        .ok_or_else(|| malformed("id", "expected an array"))?
        .iter()
        .map(|v| {
            v.as_str()
                .map(str::to_owned)
                .ok_or_else(|| malformed("id", "expected strings"))
        })
        .collect::<Result<_, _>>()?;
    let sizes: Vec<usize> = field(root, "size")?
        .as_array()
        .ok_or_else(|| malformed("size", "expected an array"))?
        .iter()
        .map(|v| {
            v.as_u64()
                .map(|n| n as usize)
                .ok_or_else(|| malformed("size", "expected non-negative integers"))
        })
        .collect::<Result<_, _>>()?;
    if ids.len() != sizes.len() {
        return Err(EurostatError::SizeMismatch(format!(
            "{} dimension ids but {} sizes",
            ids.len(),
            sizes.len()
        )));
    }

    let dimension = field(root, "dimension")?
        .as_object()
        .ok_or_else(|| malformed("dimension", "expected an object"))?;
    let mut category_index = Vec::with_capacity(ids.len());
    for (id, &size) in ids.iter().zip(&sizes) {
        let name = format!("dimension.{id}.category");
        let category = dimension
            .get(id)
            .and_then(|d| d.get("category"))
            .and_then(Value::as_object)
            .ok_or_else(|| EurostatError::MissingField(name.clone()))?;
        let index = parse_category_index(category, &name)?;
        if index.len() != size {
            return Err(EurostatError::SizeMismatch(format!(
                "dimension {id} declares size {size} but has {} categories",
                index.len()
            )));
        }
        let mut seen = vec![false; size];
        for &pos in index.values() {
            if pos >= size || std::mem::replace(&mut seen[pos], true) {
                return Err(EurostatError::SizeMismatch(format!(
                    "dimension {id} has invalid category position {pos}"
                )));
            }
        }
        category_index.push(index);
    }

    let values = parse_values(field(root, "value")?)?;
    let cells: usize = sizes.iter().product();
    if let Some((&max, _)) = values.last_key_value() {
        if max >= cells {
            return Err(EurostatError::SizeMismatch(format!(
                "value index {max} outside a cube of {cells} cells"
            )));
        }
    }

    let label = root
        .get("label")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_owned();

    Ok(JsonStatCube {
        dimension_ids: ids,
        dimension_sizes: sizes,
        category_index,
        values,
        label,
    })
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str) -> Result<&'a Value, EurostatError> {
    obj.get(name)
        .ok_or_else(|| EurostatError::MissingField(name.to_owned()))
}

fn malformed(name: &str, what: &str) -> EurostatError {
    EurostatError::MalformedJson(format!("{name}: {what}"))
}

fn parse_category_index(
    category: &Map<String, Value>,
    name: &str,
) -> Result<BTreeMap<String, usize>, EurostatError> {
    match category.get("index") {
        Some(Value::Object(map)) => map
            .iter()
            .map(|(code, pos)| {
                pos.as_u64()
                    .map(|p| (code.clone(), p as usize))
                    .ok_or_else(|| malformed(name, "index positions must be integers"))
            })
            .collect(),
        Some(Value::Array(codes)) => codes
            .iter()
            .enumerate()
            .map(|(pos, code)| {
                code.as_str()
                    .map(|c| (c.to_owned(), pos))
                    .ok_or_else(|| malformed(name, "index entries must be strings"))
            })
            .collect(),
        Some(_) => Err(malformed(name, "index must be an object or array")),
        // A single-category dimension may omit the index and carry only a label.
        None => match category.get("label").and_then(Value::as_object) {
            Some(labels) if labels.len() == 1 => {
                Ok(labels.keys().map(|code| (code.clone(), 0)).collect())
            }
            _ => Err(EurostatError::MissingField(format!("{name}.index"))),
        },
    }
}

fn parse_values(value: &Value) -> Result<BTreeMap<usize, f64>, EurostatError> {
    let number = |v: &Value| -> Result<Option<f64>, EurostatError> {
        match v {
            Value::Null => Ok(None),
            Value::Number(n) => n
                .as_f64()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| malformed("value", "non-finite number")),
            _ => Err(malformed("value", "entries must be numbers or null")),
        }
    };
    let mut out = BTreeMap::new();
    match value {
        Value::Object(map) => {
            for (key, v) in map {
                let idx: usize = key
                    .parse()
                    .map_err(|_| malformed("value", &format!("key {key:?} is not an index")))?;
                if let Some(x) = number(v)? {
                    out.insert(idx, x);
                }
            }
        }
        Value::Array(items) => {
            for (idx, v) in items.iter().enumerate() {
                if let Some(x) = number(v)? {
                    out.insert(idx, x);
                }
            }
        }
        _ => return Err(malformed("value", "expected an object or array")),
    }
    Ok(out)
}
