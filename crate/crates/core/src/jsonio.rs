//! Canonical JSON writing: object keys sorted, pretty-printed, trailing
//! newline. Identical values always produce identical bytes, which the
//! run-level determinism guarantee depends on.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Renders `value` as canonical JSON text.
pub fn canonical_string<T: Serialize>(value: &T) -> Result<String> {
    // Round-tripping through `serde_json::Value` sorts object keys: the
    // default map representation is a BTreeMap.
    let v = serde_json::to_value(value).map_err(|e| Error::Parse(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes `value` as canonical JSON to `path`.
pub fn write_canonical<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, canonical_string(value)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::canonical_string;
    use serde::Serialize;

    #[derive(Serialize)]
    struct Demo {
        zeta: u32,
        alpha: u32,
    }

    #[test]
    fn keys_come_out_sorted() {
        let s = canonical_string(&Demo { zeta: 1, alpha: 2 }).unwrap();
        let a = s.find("\"alpha\"").unwrap();
        let z = s.find("\"zeta\"").unwrap();
        assert!(a < z);
        assert!(s.ends_with('\n'));
    }
}
