//! Tabular output: CSV with a fixed header and a JSON mirror.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use coud_core::CostFamily;
use serde::Serialize;

use crate::CliError;

pub const CSV_HEADER: &str = "rho,lambda,mu,alpha,family,metric,source,value,seed,n_updates";

pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?} (expected csv or json)")),
        }
    }
}

/// `x` rounded to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("formatted float parses")
}

/// `x` with 12 significant digits, `.` as decimal separator, and no
/// trailing zeros.
pub fn fmt_num(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 || (1e-5..1e15).contains(&r.abs()) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Analytic,
    Bound,
    Sim,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Analytic => "analytic",
            Source::Bound => "bound",
            Source::Sim => "sim",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub rho: f64,
    pub lambda: f64,
    pub mu: f64,
    pub alpha: Option<f64>,
    pub family: Option<CostFamily>,
    pub metric: String,
    pub source: Source,
    /// `None` where the quantity does not exist for the parameters.
    pub value: Option<f64>,
    pub seed: Option<u64>,
    pub n_updates: Option<usize>,
}

impl Row {
    fn rounded(&self) -> Row {
        Row {
            rho: round_sig(self.rho),
            lambda: round_sig(self.lambda),
            mu: round_sig(self.mu),
            alpha: self.alpha.map(round_sig),
            value: self.value.map(round_sig),
            ..self.clone()
        }
    }

    fn csv_line(&self) -> String {
        let opt = |x: Option<f64>| x.map(fmt_num).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_num(self.rho),
            fmt_num(self.lambda),
            fmt_num(self.mu),
            opt(self.alpha),
            self.family.map(|f| f.name()).unwrap_or(""),
            self.metric,
            self.source,
            opt(self.value),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            self.n_updates.map(|n| n.to_string()).unwrap_or_default(),
        )
    }
}

/// Orders rows by family, metric, ρ, α and source.
pub fn sort_rows(rows: &mut [Row]) {
    rows.sort_by(|a, b| {
        let fam = |r: &Row| r.family.map(|f| f.name()).unwrap_or("");
        fam(a)
            .cmp(fam(b))
            .then_with(|| a.metric.cmp(&b.metric))
            .then_with(|| a.rho.partial_cmp(&b.rho).unwrap_or(Ordering::Equal))
            .then_with(|| a.alpha.partial_cmp(&b.alpha).unwrap_or(Ordering::Equal))
            .then_with(|| a.source.cmp(&b.source))
    });
}

pub fn write_rows(out: &mut dyn Write, rows: &[Row], format: Format) -> Result<(), CliError> {
    match format {
        Format::Csv => {
            writeln!(out, "{CSV_HEADER}")?;
            for r in rows {
                writeln!(out, "{}", r.csv_line())?;
            }
        }
        Format::Json => {
            let rounded: Vec<Row> = rows.iter().map(Row::rounded).collect();
            serde_json::to_writer_pretty(&mut *out, &rounded)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Writes any record type as CSV (given its header and line renderer) or
/// as a JSON array.
pub fn write_records<T: Serialize>(
    out: &mut dyn Write,
    records: &[T],
    format: Format,
    header: &str,
    line: impl Fn(&T) -> String,
) -> Result<(), CliError> {
    match format {
        Format::Csv => {
            writeln!(out, "{header}")?;
            for r in records {
                writeln!(out, "{}", line(r))?;
            }
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, records)?;
            writeln!(out)?;
        }
    }
    Ok(())
}
