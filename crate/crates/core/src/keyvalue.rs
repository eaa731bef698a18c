//! Flat `key = value` text: one setting per line, `#` starts a comment,
//! blank lines are ignored. Every key must be consumed by the reader, so a
//! misspelt key is reported rather than silently ignored.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
    used: std::cell::RefCell<std::collections::BTreeSet<String>>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::config(
                    format!("line {}", n + 1),
                    format!("expected `key = value`, found {line:?}"),
                ));
            };
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(Error::config(format!("line {}", n + 1), "empty key"));
            }
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::config(key, "given more than once"));
            }
        }
        Ok(KeyValues {
            entries,
            used: Default::default(),
        })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_string());
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| Error::config(key, format!("cannot parse {v:?}: {e}"))),
        }
    }

    pub fn require(&self, key: &str) -> Result<String> {
        self.raw(key)
            .map(str::to_string)
            .ok_or_else(|| Error::config(key, "missing required setting"))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>>
    where
        T::Err: Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse()
                        .map_err(|e| Error::config(key, format!("cannot parse {s:?}: {e}")))
                })
                .collect(),
        }
    }

    /// Fails on the first key that no reader asked for.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        match self.entries.keys().find(|k| !used.contains(*k)) {
            Some(k) => Err(Error::config(k.clone(), "unknown setting")),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_tracks_keys() {
        let kv = KeyValues::parse("# header\na = 3\n\nb=1, 2 ,3 # trailing\n").unwrap();
        assert_eq!(kv.get("a", 0usize).unwrap(), 3);
        assert_eq!(kv.list::<usize>("b", vec![]).unwrap(), vec![1, 2, 3]);
        assert_eq!(kv.get("c", 7u8).unwrap(), 7);
        kv.finish().unwrap();
    }

    #[test]
    fn errors_name_the_field() {
        let kv = KeyValues::parse("epochs = many\nextra = 1").unwrap();
        match kv.get("epochs", 1usize) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "epochs"),
            other => panic!("{other:?}"),
        }
        match kv.finish() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "extra"),
            other => panic!("{other:?}"),
        }
        assert!(KeyValues::parse("a = 1\na = 2").is_err());
        assert!(KeyValues::parse("novalue").is_err());
    }
}
