//! CSV helpers shared by the exporters.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Writes equal-length columns under `header`.
pub fn write_columns<W: Write>(w: W, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    let rows = columns.first().map_or(0, |c| c.len());
    for r in 0..rows {
        out.write_record(columns.iter().map(|c| c[r].to_string()))?;
    }
    out.flush()?;
    Ok(())
}

/// All data rows of a headed CSV, parsed as floats.
pub fn read_float_rows<R: Read>(r: R) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Syntax { line: k + 2, message: format!("invalid number `{f}`") })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Header plus columns of a headed CSV.
pub fn read_columns<R: Read>(r: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::Reader::from_reader(r);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for (k, rec) in reader.records().enumerate() {
        for (c, f) in rec?.iter().enumerate() {
            let x = f
                .parse::<f64>()
                .map_err(|_| Error::Syntax { line: k + 2, message: format!("invalid number `{f}`") })?;
            cols[c].push(x);
        }
    }
    Ok((header, cols))
}
