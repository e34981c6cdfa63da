//! Layered configuration: built-in defaults, then a section of a TOML file,
//! then command-line flags.
//!
//! ```toml
//! [sweep_k]
//! ks = [5, 10, 15]
//! m = 2000
//!
//! [sweep_k.gnn]
//! hidden_dim = 32
//! ```

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{LabError, Result};

pub fn load_config_file(path: &Path) -> Result<toml::Table> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    text.parse::<toml::Table>().map_err(|e| LabError::config(format!("{}: {e}", path.display())))
}

/// Recursively overlays `top` onto `base`; objects merge, anything else
/// replaces.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Resolves a command config. `flags` holds only the flags given on the
/// command line.
pub fn resolve<T>(section: &str, file: Option<&toml::Table>, flags: Map<String, Value>) -> Result<T>
where
    T: Default + Serialize + DeserializeOwned,
{
    let mut value = serde_json::to_value(T::default()).expect("defaults serialize");
    if let Some(table) = file {
        if let Some(sec) = table.get(section) {
            let sec = serde_json::to_value(sec).map_err(|e| LabError::config(format!("[{section}]: {e}")))?;
            if !sec.is_object() {
                return Err(LabError::config(format!("[{section}] must be a table")));
            }
            merge(&mut value, sec);
        }
    }
    merge(&mut value, Value::Object(flags));
    serde_json::from_value(value).map_err(|e| LabError::config(format!("[{section}]: {e}")))
}

/// Builds the flag overlay, skipping flags that were not given.
#[derive(Default)]
pub struct Flags(Map<String, Value>);

impl Flags {
    /// Dotted keys address nested tables, e.g. `gnn.hidden_dim`.
    pub fn set<T: Serialize>(mut self, key: &str, value: Option<T>) -> Self {
        if let Some(v) = value {
            let mut nested = serde_json::to_value(v).expect("flag value serializes");
            let parts: Vec<&str> = key.split('.').collect();
            for part in parts[1..].iter().rev() {
                let mut m = Map::new();
                m.insert((*part).to_string(), nested);
                nested = Value::Object(m);
            }
            let mut top = Map::new();
            top.insert(parts[0].to_string(), nested);
            let mut slot = Value::Object(std::mem::take(&mut self.0));
            merge(&mut slot, Value::Object(top));
            if let Value::Object(m) = slot {
                self.0 = m;
            }
        }
        self
    }

    pub fn into_map(self) -> Map<String, Value> {
        self.0
    }
}
