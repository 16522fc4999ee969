//! `key = value` text shared by config and synthetic-spec files.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Parsed entries keyed by name, each with its 1-based line number.
pub(crate) type Entries = BTreeMap<String, (usize, String)>;

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub(crate) fn parse(text: &str) -> Result<Entries> {
    let mut entries = Entries::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = key.trim().to_string();
        if entries
            .insert(key.clone(), (line_no, value.trim().to_string()))
            .is_some()
        {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(entries)
}

/// Parses one value, reporting the key and line on failure.
pub(crate) fn value<T: std::str::FromStr>(key: &str, line: usize, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e| Error::Parse {
        line,
        msg: format!("bad value `{raw}` for `{key}`: {e}"),
    })
}
