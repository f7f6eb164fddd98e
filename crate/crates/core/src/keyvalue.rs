//! Minimal `key = value` text format shared by the hyperparameter and
//! experiment configuration files. `#` starts a comment.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{GpError, Result};

#[derive(Debug, Default, Clone)]
pub struct KeyValues {
    entries: BTreeMap<String, (String, usize)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| GpError::Config {
                line: i + 1,
                message: format!("expected `key = value`, found {line:?}"),
            })?;
            let key = k.trim().to_string();
            if entries
                .insert(key.clone(), (v.trim().to_string(), i + 1))
                .is_some()
            {
                return Err(GpError::Config {
                    line: i + 1,
                    message: format!("duplicate key {key:?}"),
                });
            }
        }
        Ok(KeyValues { entries })
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), (value.into(), 0));
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<T>().map(Some).map_err(|e| GpError::Config {
                line: *line,
                message: format!("{key}: {e}"),
            }),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| GpError::Config {
            line: 0,
            message: format!("missing key {key:?}"),
        })
    }

    /// Comma-separated list of values.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some((v, line)) = self.entries.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| {
                s.trim().parse::<T>().map_err(|e| GpError::Config {
                    line: *line,
                    message: format!("{key}: {e}"),
                })
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// Keys not in `known`, for rejecting typos.
    pub fn unknown_keys<'a>(&'a self, known: &[&str]) -> Vec<&'a str> {
        self.entries
            .keys()
            .map(String::as_str)
            .filter(|k| !known.contains(k))
            .collect()
    }
}
