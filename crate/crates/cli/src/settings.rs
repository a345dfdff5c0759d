//! Flag / config-file merging. Flags win over `key = value` lines from
//! `--config`; anything left unset falls back to the subcommand's default.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use fch::{Error, Result};

pub struct FileValues {
    values: BTreeMap<String, String>,
    used: std::cell::RefCell<Vec<String>>,
}

impl FileValues {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let values = match path {
            Some(p) => fch::io::read_key_values(p)?,
            None => BTreeMap::new(),
        };
        Ok(FileValues {
            values,
            used: Default::default(),
        })
    }

    fn lookup<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.used.borrow_mut().push(key.to_string());
        match self.values.get(key) {
            None => Ok(None),
            Some(text) => text
                .parse()
                .map(Some)
                .map_err(|e| Error::Config(format!("config key '{key}' = '{text}': {e}"))),
        }
    }

    /// `flag`, else the file's `key`, else `default`.
    pub fn get<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get_opt(flag, key)?.unwrap_or(default))
    }

    pub fn get_opt<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let from_file = self.lookup(key)?;
        Ok(flag.or(from_file))
    }

    /// Flag-style `true`/`false` switch: set if the flag was given or the
    /// file says `true`.
    pub fn switch(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.lookup::<bool>(key)?.unwrap_or(false))
    }

    /// Rejects file keys no part of the command looked at.
    pub fn check_unused(&self) -> Result<()> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self
            .values
            .keys()
            .filter(|k| !used.iter().any(|u| u == *k))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown config keys: {}", unknown.join(", "))))
        }
    }
}

/// Comma-separated list, e.g. `0.2,0.4,1`.
pub fn parse_list<T>(text: &str) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|e| Error::Config(format!("bad list entry '{s}': {e}")))
        })
        .collect()
}
