//! Flat `key = value` run files. Flags given on the command line win over
//! file values; keys the chosen subcommand does not know are rejected.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use roughkit::{Error, Result};

#[derive(Debug, Default)]
pub struct FileConfig {
    entries: BTreeMap<String, (usize, String)>,
}

/// `--p-prime`, `p_prime` and `P-Prime` all name the same key.
pub fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)?;
        FileConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<FileConfig> {
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(Error::Parse { line, msg: format!("expected key = value, got {body:?}") });
            };
            let key = normalize_key(key);
            if key.is_empty() {
                return Err(Error::Parse { line, msg: "empty key".into() });
            }
            if let Some((first, _)) = entries.insert(key.clone(), (line, value.trim().to_string())) {
                return Err(Error::Parse { line, msg: format!("key {key} already set on line {first}") });
            }
        }
        Ok(FileConfig { entries })
    }

    /// Rejects any key outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.entries.iter().find(|(key, _)| !allowed.contains(&key.as_str())) {
            Some((key, (line, _))) => Err(Error::Usage(format!("unknown config key {key} on line {line}"))),
            None => Ok(()),
        }
    }

    /// The flag if given, else the parsed file value.
    pub fn pick<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, value)) => value
                .parse()
                .map(Some)
                .map_err(|e| Error::Usage(format!("config key {key} on line {line}: {e}"))),
        }
    }

    /// Boolean flags can only switch a setting on; the file may set it either way.
    pub fn pick_switch(&self, key: &str, flag: bool) -> Result<bool> {
        if flag {
            return Ok(true);
        }
        Ok(self.pick::<bool>(key, None)?.unwrap_or(false))
    }
}

/// `3:8` (inclusive) or `2,4,6,8`.
pub fn parse_levels(s: &str) -> Result<Vec<u32>> {
    let bad = |_| Error::Usage(format!("bad level list {s:?}"));
    if let Some((lo, hi)) = s.split_once(':') {
        let lo: u32 = lo.trim().parse().map_err(bad)?;
        let hi: u32 = hi.trim().parse().map_err(bad)?;
        if lo > hi {
            return Err(Error::Usage(format!("empty level range {s:?}")));
        }
        return Ok((lo..=hi).collect());
    }
    parse_list(s)
}

pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|v| v.trim().parse().map_err(|_| Error::Usage(format!("bad list entry {v:?} in {s:?}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_normalizes_keys() {
        let cfg = FileConfig::parse("# run\n p-prime = 3.5\n\nSEED=7 \n").unwrap();
        assert_eq!(cfg.pick::<f64>("p_prime", None).unwrap(), Some(3.5));
        assert_eq!(cfg.pick::<u64>("seed", None).unwrap(), Some(7));
        assert_eq!(cfg.pick::<u64>("seed", Some(9)).unwrap(), Some(9));
        assert_eq!(cfg.pick::<u64>("replicas", None).unwrap(), None);
    }

    #[test]
    fn rejects_unknown_and_repeated_keys() {
        let cfg = FileConfig::parse("seed = 1\nsede = 2\n").unwrap();
        let err = cfg.check_keys(&["seed"]).unwrap_err();
        assert!(err.to_string().contains("sede"));
        assert!(matches!(FileConfig::parse("a=1\na=2\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(FileConfig::parse("no equals\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn bad_values_are_usage_errors() {
        let cfg = FileConfig::parse("seed = seven\n").unwrap();
        assert!(matches!(cfg.pick::<u64>("seed", None), Err(Error::Usage(_))));
    }

    #[test]
    fn level_lists() {
        assert_eq!(parse_levels("3:6").unwrap(), vec![3, 4, 5, 6]);
        assert_eq!(parse_levels("2, 4,8").unwrap(), vec![2, 4, 8]);
        assert!(parse_levels("6:3").is_err());
        assert!(parse_levels("a").is_err());
    }
}
