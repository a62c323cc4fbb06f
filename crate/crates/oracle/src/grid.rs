use std::io::{self, Write};

/// Writes `(a, b, value)` rows with a header line; values in full precision.
pub fn write_grid_csv<W: Write>(
    mut out: W,
    header: [&str; 3],
    rows: impl IntoIterator<Item = (f64, f64, f64)>,
) -> io::Result<()> {
    writeln!(out, "{},{},{}", header[0], header[1], header[2])?;
    for (a, b, v) in rows {
        writeln!(out, "{a:.17e},{b:.17e},{v:.17e}")?;
    }
    Ok(())
}
