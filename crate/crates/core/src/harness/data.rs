//! Readers for the empirical series.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Months from January 1850 to August 2018.
pub const HADCRUT4_EXPECTED_LEN: usize = 2024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// Single-column CSV, header optional.
    #[default]
    Series,
    /// Monthly global text file: `YYYY/MM anomaly ...` or `year month anomaly ...`.
    Hadcrut4,
    /// `date,close` CSV; the model series is the centered absolute log return.
    Prices,
}

/// Loads a series in the given format, turning prices into centered absolute returns.
pub fn load(path: &Path, format: DataFormat) -> Result<Vec<f64>> {
    let file = File::open(path)?;
    match format {
        DataFormat::Series => read_series_csv(file),
        DataFormat::Hadcrut4 => read_hadcrut4(BufReader::new(file)),
        DataFormat::Prices => centered_absolute_returns(&read_prices_csv(file)?),
    }
}

fn parse_num(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}: cannot read {s:?} as a number")))
}

/// First column of a CSV, skipping a non-numeric header row.
pub fn read_series_csv<R: Read>(input: R) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let Some(field) = rec.get(0) else { continue };
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => {}
            Err(_) => return Err(Error::Parse(format!("line {}: cannot read {field:?}", i + 1))),
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidInput("series file holds no observations".into()));
    }
    Ok(out)
}

/// Monthly anomalies from the HadCRUT4 global text format.
pub fn read_hadcrut4<R: BufRead>(input: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).collect();
        let value = if tokens[0].contains('/') {
            tokens.get(1).copied()
        } else if tokens.len() >= 3 && tokens[0].parse::<i32>().is_ok() && tokens[1].parse::<u32>().is_ok() {
            tokens.get(2).copied()
        } else if i == 0 {
            continue;
        } else {
            None
        };
        let Some(v) = value else {
            return Err(Error::Parse(format!("line {}: unrecognised layout", i + 1)));
        };
        out.push(parse_num(v, i + 1)?);
    }
    if out.is_empty() {
        return Err(Error::InvalidInput("temperature file holds no observations".into()));
    }
    Ok(out)
}

/// Closing prices from a `date,close` CSV with a header row. Rows whose
/// close is empty or `null` are skipped.
pub fn read_prices_csv<R: Read>(input: R) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(input);
    let headers = r.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("close"))
        .or_else(|| headers.iter().position(|h| h.eq_ignore_ascii_case("adj close")))
        .unwrap_or(1);
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        match rec.get(col) {
            None | Some("") => continue,
            Some(v) if v.eq_ignore_ascii_case("null") || v.eq_ignore_ascii_case("nan") => continue,
            Some(v) => out.push(parse_num(v, i + 2)?),
        }
    }
    Ok(out)
}

/// `r_t = |x_t - x̄|` with `x_t = ln p_t - ln p_{t-1}`.
pub fn centered_absolute_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if prices.len() < 3 {
        return Err(Error::SeriesTooShort { n: prices.len(), min: 3 });
    }
    if let Some(p) = prices.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
        return Err(Error::InvalidInput(format!("prices must be positive and finite, found {p}")));
    }
    let x: Vec<f64> = prices.windows(2).map(|w| w[1].ln() - w[0].ln()).collect();
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    Ok(x.iter().map(|v| (v - mean).abs()).collect())
}
