//! Daily-returns datasets with sector labels: per-sector correlation
//! spectra, the regression of time-averaged equi-correlation on `λ₁(C)/N`,
//! and cluster-ordered heatmap export.
//!
//! Inputs are returns, not prices. Tickers with any missing value are
//! rejected, never imputed.

mod cluster;
mod io;
mod regression;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{correlation, DataMatrix, SpectraError};
use crate::eigen::top_eigenvalue;

pub use cluster::cluster_order;
pub use io::{
    export_heatmap, load_returns_csv, parse_returns, parse_sectors, read_dataset, read_heatmap,
    read_rho_bar, read_summary, write_heatmap, write_summary, RhoBarRow,
};
pub use regression::{ols_fit, RegressionResult};

/// Label of the all-tickers row in [`sector_summary`].
pub const TOTAL_LABEL: &str = "total";

#[derive(Debug, Error)]
pub enum FinanceError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("ticker {0} has no sector label")]
    MissingSector(String),
    #[error("ticker {ticker} has a missing value on {date}")]
    MissingValue { ticker: String, date: String },
    #[error("need at least 2 dates, got {0}")]
    TooFewDates(usize),
    #[error("sector {sector} has {n} ticker(s); at least 2 are required")]
    SectorTooSmall { sector: String, n: usize },
    #[error("ticker {0} has constant returns over the window")]
    ConstantTicker(String),
    #[error("no rho_bar value for sector {0}")]
    MissingRhoBar(String),
    #[error("regression needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("regression inputs have different lengths ({xs} vs {ys})")]
    LengthMismatch { xs: usize, ys: usize },
    #[error("regressor values are all equal")]
    DegenerateX,
    #[error("order is not a permutation of 0..{0}")]
    InvalidPermutation(usize),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

/// Returns of `tickers` (rows) over `dates` (columns).
#[derive(Debug, Clone)]
pub struct SectorDataset {
    pub dates: Vec<String>,
    pub tickers: Vec<String>,
    pub returns: DataMatrix,
    pub sector_of: BTreeMap<String, String>,
}

impl SectorDataset {
    /// Row indices per sector, sectors in lexicographic order.
    pub fn sectors(&self) -> BTreeMap<String, Vec<usize>> {
        let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, t) in self.tickers.iter().enumerate() {
            out.entry(self.sector_of[t].clone()).or_default().push(i);
        }
        out
    }

    /// The sub-dataset of one sector.
    pub fn sector(&self, name: &str) -> Option<(Vec<String>, DataMatrix)> {
        let rows = self.sectors().remove(name)?;
        let tickers = rows.iter().map(|&i| self.tickers[i].clone()).collect();
        let data = self.returns.select_rows(&rows).ok()?;
        Some((tickers, data))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sector: String,
    pub n: usize,
    pub n_over_t: f64,
    pub lambda1_over_n: f64,
}

fn summarize_rows(
    label: &str,
    tickers: &[String],
    data: &DataMatrix,
) -> Result<SummaryRow, FinanceError> {
    let c = correlation(data).map_err(|e| match e {
        SpectraError::ConstantRow(i) => FinanceError::ConstantTicker(tickers[i].clone()),
        other => other.into(),
    })?;
    let lambda1 = top_eigenvalue(&c)?;
    let n = data.n();
    Ok(SummaryRow {
        sector: label.to_string(),
        n,
        n_over_t: n as f64 / data.t() as f64,
        lambda1_over_n: lambda1 / n as f64,
    })
}

/// One row per sector plus a [`TOTAL_LABEL`] row over every ticker.
pub fn sector_summary(ds: &SectorDataset) -> Result<Vec<SummaryRow>, FinanceError> {
    let groups: Vec<(String, Vec<usize>)> = ds.sectors().into_iter().collect();
    if let Some((sector, rows)) = groups.iter().find(|(_, rows)| rows.len() < 2) {
        return Err(FinanceError::SectorTooSmall {
            sector: sector.clone(),
            n: rows.len(),
        });
    }
    let mut out: Vec<SummaryRow> = groups
        .par_iter()
        .map(|(sector, rows)| {
            let tickers: Vec<String> = rows.iter().map(|&i| ds.tickers[i].clone()).collect();
            summarize_rows(sector, &tickers, &ds.returns.select_rows(rows)?)
        })
        .collect::<Result<_, _>>()?;
    out.push(summarize_rows(TOTAL_LABEL, &ds.tickers, &ds.returns)?);
    Ok(out)
}

/// Joins summary rows with `rho_bar` values by sector and regresses
/// `rho_bar` on `lambda1_over_n`.
pub fn regress_summary(
    summary: &[(String, f64)],
    rho_bar: &[RhoBarRow],
) -> Result<RegressionResult, FinanceError> {
    let lookup: BTreeMap<&str, f64> = rho_bar
        .iter()
        .map(|r| (r.sector.as_str(), r.rho_bar))
        .collect();
    let mut xs = Vec::with_capacity(summary.len());
    let mut ys = Vec::with_capacity(summary.len());
    for (sector, x) in summary {
        let y = lookup
            .get(sector.as_str())
            .ok_or_else(|| FinanceError::MissingRhoBar(sector.clone()))?;
        xs.push(*x);
        ys.push(*y);
    }
    ols_fit(&xs, &ys)
}
