//! CSV emission helpers. All files are UTF-8 with a header row, a fixed
//! column order and full-precision floats (shortest round-trip formatting),
//! so re-running an experiment yields byte-identical tables.

use std::path::Path;

/// Writes one CSV table. Rows must match the header arity.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), std::io::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        assert_eq!(row.len(), header.len(), "row arity must match header");
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Full-precision decimal formatting: Rust's shortest representation that
/// round-trips the exact double.
pub fn f(v: f64) -> String {
    format!("{v}")
}
