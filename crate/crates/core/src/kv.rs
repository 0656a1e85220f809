//! Flat `key = value` configuration files.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KvFile {
    entries: Vec<(String, String, usize)>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(String, String, usize)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(line_no, "expected `key = value`"))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(line_no, "empty key"));
            }
            if entries.iter().any(|(k, _, _)| k == key) {
                return Err(Error::parse(line_no, format!("duplicate key `{key}`")));
            }
            entries.push((key.to_string(), value.trim().to_string(), line_no));
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, _)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _, _)| k.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }

    pub fn parse_opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`"))),
        }
    }

    pub fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parse_opt(key)?.unwrap_or(default))
    }

    pub fn parse_req<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.parse_opt(key)?
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }

    pub fn parse_bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true" | "yes" | "on" | "1") => Ok(true),
            Some("false" | "no" | "off" | "0") => Ok(false),
            Some(v) => Err(Error::Config(format!("invalid boolean `{v}` for `{key}`"))),
        }
    }

    /// Rejects any key not accepted by `known`.
    pub fn check_keys(&self, known: impl Fn(&str) -> bool) -> Result<()> {
        for (k, _, line) in &self.entries {
            if !known(k) {
                return Err(Error::parse(*line, format!("unknown key `{k}`")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects() {
        let kv = KvFile::parse("# c\na = 1\n\nb=x y\n").unwrap();
        assert_eq!(kv.get("a"), Some("1"));
        assert_eq!(kv.get("b"), Some("x y"));
        assert_eq!(kv.parse_req::<u32>("a").unwrap(), 1);
        assert!(kv.parse_req::<u32>("b").is_err());
        assert!(KvFile::parse("a = 1\na = 2").is_err());
        assert!(KvFile::parse("novalue").is_err());
        assert!(kv.check_keys(|k| k == "a").is_err());
    }
}
