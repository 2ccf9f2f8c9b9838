//! Layered settings: command-line flags over a TOML file over defaults.
//!
//! The file holds flat `key = value` pairs, optionally grouped under one
//! section per command (`[verify]`, `[polis]`, ...). A key inside a
//! section wins over the same key at the top level.

use std::path::Path;

use toml::{Table, Value};

use crate::CliError;

/// Keys accepted at the top level and inside every section.
const COMMON_KEYS: &[&str] = &["seed", "output"];

#[derive(Debug, Clone, Default)]
pub struct Settings {
    root: Table,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let root: Table = text
            .parse()
            .map_err(|e| CliError::Config(format!("bad config file: {e}")))?;
        Ok(Self { root })
    }

    /// View of one command's section; rejects keys the command does not use.
    pub fn section(&self, name: &str, allowed: &[&str]) -> Result<Section<'_>, CliError> {
        let own = match self.root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => return Err(CliError::Config(format!("`{name}` must be a section"))),
        };
        let known = |k: &str| allowed.contains(&k) || COMMON_KEYS.contains(&k);
        if let Some(t) = own {
            if let Some(k) = t.keys().find(|k| !known(k)) {
                return Err(CliError::Config(format!("unknown key `{k}` in [{name}]")));
            }
        }
        Ok(Section {
            name: name.to_string(),
            own,
            root: &self.root,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Section<'a> {
    name: String,
    own: Option<&'a Table>,
    root: &'a Table,
}

impl Section<'_> {
    fn raw(&self, key: &str) -> Option<&Value> {
        self.own
            .and_then(|t| t.get(key))
            .or_else(|| match self.root.get(key) {
                Some(Value::Table(_)) | None => None,
                Some(v) => Some(v),
            })
    }

    fn bad(&self, key: &str, want: &str) -> CliError {
        CliError::Config(format!("[{}] `{key}` must be {want}", self.name))
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(self.bad(key, "a number")),
        }
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => Err(self.bad(key, "a non-negative integer")),
        }
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        Ok(self.u64(key)?.map(|v| v as usize))
    }

    pub fn string(&self, key: &str) -> Result<Option<String>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(self.bad(key, "a string")),
        }
    }

    /// A list of number lists, e.g. `lambdas = [[1, 0], [0, 1]]`.
    pub fn vectors(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>, CliError> {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        let outer = v
            .as_array()
            .ok_or_else(|| self.bad(key, "a list of lists"))?;
        outer
            .iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| self.bad(key, "a list of lists"))?
                    .iter()
                    .map(|x| {
                        x.as_float()
                            .or_else(|| x.as_integer().map(|i| i as f64))
                            .ok_or_else(|| self.bad(key, "numeric"))
                    })
                    .collect()
            })
            .collect::<Result<_, _>>()
            .map(Some)
    }
}

/// Flag value if given, else the config value, else the default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn section_keys_shadow_top_level_keys() {
        let s = Settings::parse("seed = 3\ntrials = 9\n[verify]\nseed = 5\n").unwrap();
        let v = s.section("verify", &["trials"]).unwrap();
        assert_eq!(v.u64("seed").unwrap(), Some(5));
        assert_eq!(v.usize("trials").unwrap(), Some(9));
        let p = s.section("polis", &[]).unwrap();
        assert_eq!(p.u64("seed").unwrap(), Some(3));
    }

    #[test]
    fn rejects_unknown_keys_and_wrong_types() {
        let s = Settings::parse("[verify]\ntrails = 3\n").unwrap();
        assert!(s.section("verify", &["trials"]).is_err());
        let s = Settings::parse("[verify]\ntrials = -1\n").unwrap();
        assert!(s
            .section("verify", &["trials"])
            .unwrap()
            .usize("trials")
            .is_err());
    }

    #[test]
    fn reads_vector_lists() {
        let s = Settings::parse("[maze-ucrl2]\nlambdas = [[1, 0], [0.5, 0.5]]\n").unwrap();
        let m = s.section("maze-ucrl2", &["lambdas"]).unwrap();
        assert_eq!(
            m.vectors("lambdas").unwrap(),
            Some(vec![vec![1.0, 0.0], vec![0.5, 0.5]])
        );
    }
}
