//! Layered configuration: built-in defaults, then an optional JSON file,
//! then `key.path=value` overrides from the command line.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{LabError, Result};
use crate::formats::read_json;

/// Deep-merges `patch` into `base`.
///
/// Objects merge key by key, except that a single-key object whose key the
/// patch does not mention is replaced outright: that is how an externally
/// tagged enum switches variant (`{"absolute": 0.1}` over
/// `{"bmu-relative": 0.02}`).
pub fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            let switches_variant = b.len() == 1 && p.keys().all(|k| !b.contains_key(k));
            if switches_variant {
                *b = p;
                return;
            }
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, p) => *slot = p,
    }
}

/// Applies one `a.b.c=value` override. The value is parsed as JSON when it
/// can be and taken as a string otherwise.
pub fn apply_override(config: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| {
        LabError::malformed(
            "override",
            format!("expected KEY=VALUE, got {assignment:?}"),
        )
    })?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = config;
    for part in key.split('.') {
        slot = slot
            .as_object_mut()
            .ok_or_else(|| {
                LabError::malformed("override", format!("{key:?} does not name a config field"))
            })?
            .entry(part)
            .or_insert(Value::Null);
    }
    *slot = value;
    Ok(())
}

pub fn resolve<T: Serialize + DeserializeOwned + Default>(
    file: Option<&Path>,
    overrides: &[String],
) -> Result<T> {
    let mut config = serde_json::to_value(T::default())?;
    if let Some(path) = file {
        merge(&mut config, read_json(path)?);
    }
    for assignment in overrides {
        apply_override(&mut config, assignment)?;
    }
    Ok(serde_json::from_value(config)?)
}
