//! CSV output with 17 significant digits, so every `f64` round-trips.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Formats `x` with 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a header row and one row per index across `cols`.
pub fn write_columns<W: Write>(w: W, headers: &[&str], cols: &[&[f64]]) -> std::io::Result<()> {
    assert_eq!(headers.len(), cols.len(), "header/column count mismatch");
    let mut w = BufWriter::new(w);
    writeln!(w, "{}", headers.join(","))?;
    let n = cols.first().map_or(0, |c| c.len());
    let mut line = String::new();
    for i in 0..n {
        line.clear();
        for (j, c) in cols.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&fmt_num(c[i]));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()
}

pub fn write_columns_file(
    path: &Path,
    headers: &[&str],
    cols: &[&[f64]],
) -> std::io::Result<()> {
    write_columns(File::create(path)?, headers, cols)
}

/// Parses a numeric CSV written by [`write_columns`].
pub fn read_columns(text: &str) -> Option<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let headers: Vec<String> = lines.next()?.split(',').map(str::to_owned).collect();
    let mut cols = vec![Vec::new(); headers.len()];
    for line in lines.filter(|l| !l.is_empty()) {
        let vals: Vec<&str> = line.split(',').collect();
        if vals.len() != headers.len() {
            return None;
        }
        for (c, v) in cols.iter_mut().zip(vals) {
            c.push(v.trim().parse().ok()?);
        }
    }
    Some((headers, cols))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_round_trip() {
        let xs = [0.1, -1.0 / 3.0, 1e-300, 6.02e23, f64::MIN_POSITIVE, 0.0];
        let mut buf = Vec::new();
        write_columns(&mut buf, &["x"], &[&xs]).unwrap();
        let (h, c) = read_columns(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(h, vec!["x"]);
        assert_eq!(c[0], xs);
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_num(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_num(f64::NAN), "NaN");
    }
}
