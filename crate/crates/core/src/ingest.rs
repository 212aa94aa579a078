//! Reference price series ingestion (date, close) for comparisons.

use std::path::Path;

use crate::error::{MarketError, Result};

pub const MIN_ROWS: usize = 5;

/// Log returns of consecutive closes.
pub fn log_returns(closes: &[f64]) -> Result<Vec<f64>> {
    if let Some(c) = closes.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
        return Err(MarketError::domain(format!("close must be positive, got {c}")));
    }
    Ok(closes.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// Calendar key of a date field: `YYYY-MM-DD`, `YYYY/MM/DD`, `MM/DD/YYYY`,
/// `YYYYMMDD`, or a plain integer index.
fn date_key(field: &str) -> Option<(i64, u32, u32)> {
    let parts: Vec<&str> = field.split(['-', '/', '.']).collect();
    match parts.as_slice() {
        [one] => one.parse::<i64>().ok().map(|v| {
            if one.len() == 8 {
                (v / 10_000, (v / 100 % 100) as u32, (v % 100) as u32)
            } else {
                (v, 0, 0)
            }
        }),
        [a, b, c] => {
            let (y, m, d) = if a.len() == 4 { (a, b, c) } else { (c, a, b) };
            let key = (y.parse().ok()?, m.parse().ok()?, d.parse().ok()?);
            ((1..=12).contains(&key.1) && (1..=31).contains(&key.2)).then_some(key)
        }
        _ => None,
    }
}

fn split_fields(line: &str) -> Vec<&str> {
    let fields: Vec<&str> = if line.contains(',') {
        line.split(',').collect()
    } else if line.contains(';') {
        line.split(';').collect()
    } else {
        line.split_whitespace().collect()
    };
    fields.into_iter().map(|f| f.trim().trim_matches('"')).collect()
}

/// Parses (date, close) text into chronological closes.
pub fn parse_reference_prices(text: &str, source: &str) -> Result<Vec<f64>> {
    let err = |line: usize, reason: String| MarketError::Parse {
        path: source.to_string(),
        reason: format!("line {line}: {reason}"),
    };

    let mut close_col = 1;
    let mut rows: Vec<((i64, u32, u32), f64)> = Vec::new();
    let mut first = true;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = split_fields(line);
        let is_first = std::mem::take(&mut first);
        if is_first && date_key(fields[0]).is_none() {
            // Header: prefer a column named "close" if there is one.
            if let Some(k) = fields.iter().position(|f| f.eq_ignore_ascii_case("close")) {
                close_col = k;
            }
            continue;
        }
        if fields.len() <= close_col {
            return Err(err(idx + 1, format!("expected date and close, got {line:?}")));
        }
        let date = date_key(fields[0]).ok_or_else(|| err(idx + 1, format!("unrecognized date {:?}", fields[0])))?;
        let close: f64 = fields[close_col]
            .parse()
            .map_err(|_| err(idx + 1, format!("non-numeric close {:?}", fields[close_col])))?;
        if !(close > 0.0 && close.is_finite()) {
            return Err(err(idx + 1, format!("close must be positive, got {close}")));
        }
        rows.push((date, close));
    }

    if rows.len() < MIN_ROWS {
        return Err(MarketError::Parse {
            path: source.to_string(),
            reason: format!("need at least {MIN_ROWS} rows, got {}", rows.len()),
        });
    }
    if rows[0].0 > rows[rows.len() - 1].0 {
        rows.reverse();
    }
    if let Some(w) = rows.windows(2).find(|w| w[0].0 >= w[1].0) {
        return Err(MarketError::Parse {
            path: source.to_string(),
            reason: format!("dates not strictly monotone near {:?} -> {:?}", w[0].0, w[1].0),
        });
    }
    Ok(rows.into_iter().map(|(_, c)| c).collect())
}

/// Chronological log returns of the closes in a (date, close) file.
pub fn ingest_reference_series(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| MarketError::io(path, e))?;
    log_returns(&parse_reference_prices(&text, &path.display().to_string())?)
}
