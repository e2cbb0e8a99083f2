//! Canonical JSON: object keys sorted, compact separators, integers only in
//! ledger artifacts. Used for every byte-compared or hashed JSON blob.

use serde::Serialize;
use serde_json::{Map, Value};

pub fn to_canonical_vec<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<Vec<u8>> {
    let value = sort_keys(serde_json::to_value(value)?);
    serde_json::to_vec(&value)
}

pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let bytes = to_canonical_vec(value)?;
    Ok(String::from_utf8(bytes).expect("serde_json emits UTF-8"))
}

fn sort_keys(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut sorted = Map::new();
            for (k, v) in entries {
                sorted.insert(k, sort_keys(v));
            }
            Value::Object(sorted)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_sorted_recursively() {
        let v = json!({"b": 1, "a": {"z": [ {"y": 2, "x": 3} ], "c": null}});
        assert_eq!(
            to_canonical_string(&v).unwrap(),
            r#"{"a":{"c":null,"z":[{"x":3,"y":2}]},"b":1}"#
        );
    }
}
