use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{FinanceError, SectorDataset, SummaryRow};
use crate::data::DataMatrix;

fn open(path: &Path) -> Result<File, FinanceError> {
    File::open(path).map_err(|source| FinanceError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn create(path: &Path) -> Result<File, FinanceError> {
    File::create(path).map_err(|source| FinanceError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_err(line: u64, message: impl Into<String>) -> FinanceError {
    FinanceError::Parse {
        line,
        message: message.into(),
    }
}

fn csv_err(e: csv::Error) -> FinanceError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => FinanceError::Io {
            path: "<stream>".into(),
            source,
        },
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => parse_err(line, format!("expected {expected_len} fields, found {len}")),
        csv::ErrorKind::Deserialize { err, .. } => parse_err(line, err.to_string()),
        csv::ErrorKind::Utf8 { .. } => parse_err(line, "invalid UTF-8"),
        other => parse_err(line, format!("{other:?}")),
    }
}

fn reader<R: Read>(r: R, headers: bool) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(headers)
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn is_missing(field: &str) -> bool {
    field.is_empty() || field.eq_ignore_ascii_case("na") || field.eq_ignore_ascii_case("nan")
}

/// Wide returns table: `Date,TICK1,TICK2,...`, one row per ISO date.
/// Returns `(dates, tickers, tickers × dates values)`.
pub fn parse_returns<R: Read>(
    r: R,
) -> Result<(Vec<String>, Vec<String>, DataMatrix), FinanceError> {
    let mut rdr = reader(r, false);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h.map_err(csv_err)?,
        None => return Err(parse_err(1, "empty file")),
    };
    if header.get(0) != Some("Date") {
        return Err(parse_err(1, "first header field must be Date"));
    }
    let tickers: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if tickers.is_empty() {
        return Err(parse_err(1, "no ticker columns"));
    }
    let mut seen = HashSet::new();
    for t in &tickers {
        if t.is_empty() {
            return Err(parse_err(1, "empty ticker name"));
        }
        if !seen.insert(t.as_str()) {
            return Err(parse_err(1, format!("duplicate ticker {t}")));
        }
    }

    let mut dates: Vec<String> = Vec::new();
    let mut prev: Option<NaiveDate> = None;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let raw_date = rec.get(0).unwrap_or_default();
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d")
            .map_err(|e| parse_err(line, format!("bad date {raw_date:?}: {e}")))?;
        if prev.is_some_and(|p| date <= p) {
            return Err(parse_err(line, format!("date {raw_date} out of order")));
        }
        prev = Some(date);
        let mut col = Vec::with_capacity(tickers.len());
        for (j, field) in rec.iter().skip(1).enumerate() {
            if is_missing(field) {
                return Err(FinanceError::MissingValue {
                    ticker: tickers[j].clone(),
                    date: raw_date.to_string(),
                });
            }
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("bad number {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite value {field:?}")));
            }
            col.push(v);
        }
        dates.push(raw_date.to_string());
        columns.push(col);
    }
    if dates.len() < 2 {
        return Err(FinanceError::TooFewDates(dates.len()));
    }
    let m = DMatrix::from_fn(tickers.len(), dates.len(), |i, j| columns[j][i]);
    Ok((dates, tickers, DataMatrix::new(m)?))
}

/// `ticker,sector` table.
pub fn parse_sectors<R: Read>(r: R) -> Result<BTreeMap<String, String>, FinanceError> {
    #[derive(Deserialize)]
    struct Row {
        ticker: String,
        sector: String,
    }
    let mut rdr = reader(r, true);
    let headers = rdr.headers().map_err(csv_err)?;
    if headers.iter().collect::<Vec<_>>() != ["ticker", "sector"] {
        return Err(parse_err(1, "header must be ticker,sector"));
    }
    let mut out = BTreeMap::new();
    for row in rdr.deserialize::<Row>() {
        let row = row.map_err(csv_err)?;
        if row.ticker.is_empty() || row.sector.is_empty() {
            return Err(parse_err(0, "empty ticker or sector"));
        }
        if let Some(old) = out.insert(row.ticker.clone(), row.sector.clone()) {
            if old != row.sector {
                return Err(parse_err(
                    0,
                    format!("ticker {} labelled {old} and {}", row.ticker, row.sector),
                ));
            }
        }
    }
    Ok(out)
}

fn join(
    (dates, tickers, returns): (Vec<String>, Vec<String>, DataMatrix),
    labels: BTreeMap<String, String>,
) -> Result<SectorDataset, FinanceError> {
    let mut sector_of = BTreeMap::new();
    for t in &tickers {
        let s = labels
            .get(t)
            .ok_or_else(|| FinanceError::MissingSector(t.clone()))?;
        sector_of.insert(t.clone(), s.clone());
    }
    Ok(SectorDataset {
        dates,
        tickers,
        returns,
        sector_of,
    })
}

/// Reads both tables from readers and joins them.
pub fn read_dataset<R1: Read, R2: Read>(
    returns: R1,
    sectors: R2,
) -> Result<SectorDataset, FinanceError> {
    join(parse_returns(returns)?, parse_sectors(sectors)?)
}

pub fn load_returns_csv(
    returns_path: impl AsRef<Path>,
    sectors_path: impl AsRef<Path>,
) -> Result<SectorDataset, FinanceError> {
    read_dataset(open(returns_path.as_ref())?, open(sectors_path.as_ref())?)
}

pub fn write_summary<W: Write>(w: W, rows: &[SummaryRow]) -> Result<(), FinanceError> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r).map_err(csv_err)?;
    }
    wtr.flush().map_err(|source| FinanceError::Io {
        path: "<stream>".into(),
        source,
    })
}

/// `(sector, lambda1_over_n)` pairs from any CSV carrying those columns.
pub fn read_summary<R: Read>(r: R) -> Result<Vec<(String, f64)>, FinanceError> {
    #[derive(Deserialize)]
    struct Row {
        sector: String,
        lambda1_over_n: f64,
    }
    reader(r, true)
        .deserialize::<Row>()
        .map(|row| {
            let row = row.map_err(csv_err)?;
            Ok((row.sector, row.lambda1_over_n))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoBarRow {
    pub sector: String,
    pub rho_bar: f64,
}

/// `(sector, rho_bar)` rows from any CSV carrying those columns.
pub fn read_rho_bar<R: Read>(r: R) -> Result<Vec<RhoBarRow>, FinanceError> {
    reader(r, true)
        .deserialize::<RhoBarRow>()
        .map(|row| row.map_err(csv_err))
        .collect()
}

fn check_permutation(order: &[usize], n: usize) -> Result<(), FinanceError> {
    let mut seen = vec![false; n];
    if order.len() != n {
        return Err(FinanceError::InvalidPermutation(n));
    }
    for &i in order {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(FinanceError::InvalidPermutation(n));
        }
    }
    Ok(())
}

/// Writes `c[order[i]][order[j]]` with labels on the header row and first
/// column. Values use the shortest round-trip representation.
pub fn write_heatmap<W: Write>(
    w: W,
    c: &DMatrix<f64>,
    order: &[usize],
    labels: &[String],
) -> Result<(), FinanceError> {
    let n = c.nrows();
    check_permutation(order, n)?;
    if labels.len() != n || c.ncols() != n {
        return Err(FinanceError::InvalidPermutation(n));
    }
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec![String::new()];
    header.extend(order.iter().map(|&i| labels[i].clone()));
    wtr.write_record(&header).map_err(csv_err)?;
    for &i in order {
        let mut rec = vec![labels[i].clone()];
        rec.extend(order.iter().map(|&j| format!("{}", c[(i, j)])));
        wtr.write_record(&rec).map_err(csv_err)?;
    }
    wtr.flush().map_err(|source| FinanceError::Io {
        path: "<stream>".into(),
        source,
    })
}

pub fn export_heatmap(
    c: &DMatrix<f64>,
    order: &[usize],
    labels: &[String],
    path: impl AsRef<Path>,
) -> Result<(), FinanceError> {
    let path = path.as_ref();
    write_heatmap(create(path)?, c, order, labels).map_err(|e| match e {
        FinanceError::Io { source, .. } => FinanceError::Io {
            path: path.display().to_string(),
            source,
        },
        other => other,
    })
}

/// Inverse of [`write_heatmap`]: labels in file order and the matrix.
pub fn read_heatmap<R: Read>(r: R) -> Result<(Vec<String>, DMatrix<f64>), FinanceError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h.map_err(csv_err)?,
        None => return Err(parse_err(1, "empty file")),
    };
    let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n = labels.len();
    let mut values = Vec::with_capacity(n * n);
    let mut rows = 0;
    for rec in records {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rows == n {
            return Err(parse_err(line, "more rows than labels"));
        }
        if rec.get(0) != Some(labels[rows].as_str()) {
            return Err(parse_err(line, "row label does not match header"));
        }
        for field in rec.iter().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("bad number {field:?}")))?;
            values.push(v);
        }
        rows += 1;
    }
    if rows != n {
        return Err(parse_err(0, format!("expected {n} rows, found {rows}")));
    }
    Ok((labels, DMatrix::from_row_slice(n, n, &values)))
}
