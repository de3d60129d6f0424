//! Parameter resolution and run digests.
//!
//! Every subcommand has a flag struct (all `Option`) and a parameter struct
//! with defaults. Values are taken from the flag when given, then from the
//! matching table of the `--config` TOML file, then from the default.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

/// Contents of an optional TOML defaults file, one table per subcommand.
#[derive(Debug, Default, Clone)]
pub struct FileDefaults(Map<String, Value>);

impl FileDefaults {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        match serde_json::to_value(table)? {
            Value::Object(m) => Ok(Self(m)),
            _ => unreachable!("a TOML document is a table"),
        }
    }

    pub fn section(&self, command: &str) -> Result<Map<String, Value>> {
        match self.0.get(command) {
            None => Ok(Map::new()),
            Some(Value::Object(m)) => Ok(m.clone()),
            Some(_) => bail!("config entry [{command}] must be a table"),
        }
    }
}

/// Overlays set flags on the config section and fills the rest from
/// `P::default()`. Keys unknown to `P` are rejected so typos do not pass
/// silently.
pub fn resolve<F, P>(flags: &F, mut section: Map<String, Value>, command: &str) -> Result<P>
where
    F: Serialize,
    P: Serialize + DeserializeOwned + Default,
{
    let known = match serde_json::to_value(P::default())? {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    for key in section.keys() {
        if !known.contains_key(key) {
            let mut names: Vec<&String> = known.keys().collect();
            names.sort();
            bail!("unknown key {key:?} in [{command}] config section (known: {names:?})");
        }
    }
    if let Value::Object(set) = serde_json::to_value(flags)? {
        for (k, v) in set {
            if !v.is_null() {
                section.insert(k, v);
            }
        }
    }
    let mut merged = known;
    merged.extend(section);
    serde_json::from_value(Value::Object(merged)).with_context(|| format!("invalid {command} parameters"))
}

#[derive(Serialize)]
struct RunConfig<'a, P: Serialize> {
    command: &'a str,
    params: &'a P,
    upstream: &'a [String],
}

/// SHA-256 over the canonical JSON of the command, its resolved parameters
/// and the digests of the inputs it consumed. Paths are not part of the
/// parameters, so the same run in another directory has the same digest.
pub fn run_digest<P: Serialize>(command: &str, params: &P, upstream: &[String]) -> String {
    // serde_json maps are ordered by key, which makes this canonical
    let value = serde_json::to_value(RunConfig {
        command,
        params,
        upstream,
    })
    .expect("parameters serialize to JSON");
    let bytes = serde_json::to_vec(&value).expect("JSON values serialize");
    hex::encode(Sha256::digest(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Serialize)]
    struct Flags {
        a: Option<u32>,
        b: Option<String>,
    }

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    #[serde(default)]
    struct Params {
        a: u32,
        b: String,
        c: f64,
    }

    impl Default for Params {
        fn default() -> Self {
            Self {
                a: 1,
                b: "x".into(),
                c: 0.5,
            }
        }
    }

    fn section(s: &str) -> Map<String, Value> {
        let t: toml::Table = toml::from_str(s).unwrap();
        match serde_json::to_value(t).unwrap() {
            Value::Object(m) => m,
            _ => unreachable!(),
        }
    }

    #[test]
    fn flags_override_file_overrides_default() {
        let flags = Flags {
            a: Some(7),
            b: None,
        };
        let p: Params = resolve(&flags, section("a = 3\nb = \"y\""), "t").unwrap();
        assert_eq!(
            p,
            Params {
                a: 7,
                b: "y".into(),
                c: 0.5
            }
        );
    }

    #[test]
    fn unknown_key_is_rejected() {
        let flags = Flags { a: None, b: None };
        let err = resolve::<_, Params>(&flags, section("epochz = 3"), "t").unwrap_err();
        assert!(err.to_string().contains("epochz"));
    }

    #[test]
    fn digest_depends_on_every_input() {
        let p = Params::default();
        let d = run_digest("train", &p, &[]);
        assert_eq!(d.len(), 64);
        assert_eq!(d, run_digest("train", &Params::default(), &[]));
        assert_ne!(d, run_digest("eval", &p, &[]));
        assert_ne!(d, run_digest("train", &p, &["abc".into()]));
        let q = Params {
            c: 0.25,
            ..Default::default()
        };
        assert_ne!(d, run_digest("train", &q, &[]));
    }
}
