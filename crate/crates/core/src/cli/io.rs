//! CSV reading and writing for the command-line tools.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::summary::TimeSeries;

/// Machine-readable float: 17 significant digits.
pub fn fmt_full(x: f64) -> String {
    format!("{x:.16e}")
}

/// Human-readable float: 4 digits after the point.
pub fn fmt_short(x: f64) -> String {
    format!("{x:.4}")
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::invalid(format!("{}: {e}", path.display()))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::invalid(format!("cannot open {}: {e}", path.display())))
}

/// Data file: one series per row, `dt, y0, y1, ...`, all rows the same
/// length. A first row starting with the literal `dt` is a header.
pub fn read_series(path: &Path) -> Result<Vec<TimeSeries>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let mut out = Vec::new();
    let mut width = None;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        if row == 0 && rec.get(0) == Some("dt") {
            continue;
        }
        let line = row + 1;
        if rec.len() < 2 {
            return Err(Error::invalid(format!("{} row {line}: need dt and at least one value", path.display())));
        }
        if *width.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::invalid(format!(
                "{} row {line}: {} columns, earlier rows have {}",
                path.display(),
                rec.len(),
                width.unwrap()
            )));
        }
        let vals = rec
            .iter()
            .enumerate()
            .map(|(col, s)| {
                s.parse::<f64>().map_err(|_| {
                    Error::invalid(format!("{} row {line} column {}: `{s}` is not a number", path.display(), col + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let ts = TimeSeries::new(vals[1..].to_vec(), vals[0])
            .map_err(|e| Error::invalid(format!("{} row {line}: {e}", path.display())))?;
        out.push(ts);
    }
    if out.is_empty() {
        return Err(Error::invalid(format!("{}: no data rows", path.display())));
    }
    Ok(out)
}

pub fn write_series(path: &Path, series: &[TimeSeries]) -> Result<()> {
    let mut rows = Vec::with_capacity(series.len());
    for ts in series {
        let mut row = vec![fmt_full(ts.dt())];
        row.extend(ts.values().iter().map(|&v| fmt_full(v)));
        rows.push(row);
    }
    let n = series.first().map_or(0, |ts| ts.len());
    let mut header = vec!["dt".to_string()];
    header.extend((0..n).map(|t| format!("y{t}")));
    write_csv(path, &header, &rows)
}

pub fn write_csv<S: AsRef<str>>(path: &Path, header: &[S], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header.iter().map(AsRef::as_ref)).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// Eligibility records as written by the `eligibility` command.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordRow {
    pub e: Vec<f64>,
    pub q_star: Option<f64>,
    pub threshold: f64,
    pub eligible: bool,
}

pub fn read_records(path: &Path) -> Result<Vec<RecordRow>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(open(path)?);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::invalid(format!("{}: missing column `{name}`", path.display())))
    };
    let (qc, tc, ec) = (col("q_star")?, col("threshold")?, col("eligible")?);
    let e_cols: Vec<usize> = (1..)
        .map_while(|d| header.iter().position(|h| h == format!("e{d}")))
        .collect();
    if e_cols.is_empty() {
        return Err(Error::invalid(format!("{}: no e1.. columns", path.display())));
    }
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = row + 2;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let parse = |c: usize| {
            field(c).parse::<f64>().map_err(|_| {
                Error::invalid(format!("{} row {line} column {}: `{}` is not a number", path.display(), c + 1, field(c)))
            })
        };
        let e = e_cols.iter().map(|&c| parse(c)).collect::<Result<Vec<_>>>()?;
        let q_star = if field(qc).is_empty() { None } else { Some(parse(qc)?) };
        let eligible = match field(ec) {
            "1" | "true" => true,
            "0" | "false" | "" => false,
            other => {
                return Err(Error::invalid(format!(
                    "{} row {line}: eligible flag `{other}` is not 0/1",
                    path.display()
                )))
            }
        };
        out.push(RecordRow {
            e,
            q_star,
            threshold: parse(tc)?,
            eligible,
        });
    }
    Ok(out)
}
