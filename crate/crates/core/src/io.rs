//! CSV helpers with fixed 17-significant-digit formatting.

use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::CubicSpline;

pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_columns(path: &Path, cols: &[(&str, &[f64])]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(cols.iter().map(|c| c.0))?;
    let n = cols.first().map_or(0, |c| c.1.len());
    for i in 0..n {
        w.write_record(cols.iter().map(|c| fmt17(c.1[i])))?;
    }
    w.flush()?;
    Ok(())
}

/// Columns of a headed CSV file, by name.
pub fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h.trim() == *n)
                .ok_or_else(|| Error::Config(format!("{}: missing column {n}", path.display())))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![Vec::new(); names.len()];
    for rec in r.records() {
        let rec = rec?;
        for (k, &i) in idx.iter().enumerate() {
            let v: f64 = rec[i]
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{}: bad number {:?}", path.display(), &rec[i])))?;
            out[k].push(v);
        }
    }
    Ok(out)
}

/// Two-column numeric table (no header required) as a spline.
pub fn read_table(path: &Path) -> Result<CubicSpline> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).from_path(path)?;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::Config(format!("{}: expected two columns", path.display())));
        }
        let (a, b) = (rec[0].trim().parse::<f64>(), rec[1].trim().parse::<f64>());
        match (a, b) {
            (Ok(a), Ok(b)) => {
                x.push(a);
                y.push(b);
            }
            // a header line
            _ if x.is_empty() => continue,
            _ => return Err(Error::Config(format!("{}: bad row {:?}", path.display(), rec))),
        }
    }
    if x.len() < 2 {
        return Err(Error::Config(format!("{}: table needs at least two rows", path.display())));
    }
    CubicSpline::new(x, y).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
