//! Shared text-format helpers.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Writes `contents` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Shortest decimal representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn join_f64<'a>(values: impl IntoIterator<Item = &'a f64>) -> String {
    let mut out = String::new();
    for (i, v) in values.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&fmt_f64(*v));
    }
    out
}

pub fn parse_f64_list(text: &str, line: usize) -> Result<Vec<f64>> {
    text.split(',')
        .map(|tok| {
            let tok = tok.trim();
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(line, format!("invalid number `{tok}`")))?;
            if !v.is_finite() {
                return Err(Error::parse(line, format!("non-finite value `{tok}`")));
            }
            Ok(v)
        })
        .collect()
}

pub fn comment_block(lines: &[String]) -> String {
    lines.iter().map(|l| format!("# {l}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -1e-300, 1.0 / 3.0, 123456789.0, 5e-324, f64::MAX] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn rejects_non_finite() {
        assert!(parse_f64_list("1,NaN", 3).is_err());
        assert!(parse_f64_list("1,inf", 3).is_err());
        assert_eq!(parse_f64_list("1, 2.5", 3).unwrap(), vec![1.0, 2.5]);
    }
}
