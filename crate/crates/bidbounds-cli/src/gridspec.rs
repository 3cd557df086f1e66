//! Grid level specifications on the command line.
//!
//! Two forms are accepted: an inclusive range `lo:hi:step` and an explicit
//! comma list `a,b,c`. Either way the result is a strictly increasing list
//! of finite levels ready to use as a value or bid grid. Range levels are
//! computed as `lo + k*step` (one multiplication per level, no running
//! sum) so the same specification always yields the same floats.

use thiserror::Error;

/// Hard cap on materialized levels; protects against `0:1:1e-12` typos.
pub const MAX_LEVELS: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum GridSpecError {
    #[error("empty grid specification")]
    Empty,
    #[error("grid level {0:?} is not a finite number")]
    BadNumber(String),
    #[error("range {0:?} must have exactly three parts, lo:hi:step")]
    BadRange(String),
    #[error("grid step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("range is empty: lo {lo} exceeds hi {hi}")]
    EmptyRange { lo: f64, hi: f64 },
    #[error("grid levels must be strictly increasing, got {prev} before {next}")]
    NotIncreasing { prev: f64, next: f64 },
    #[error("specification yields more than {MAX_LEVELS} levels")]
    TooManyLevels,
}

fn parse_number(token: &str) -> Result<f64, GridSpecError> {
    let token = token.trim();
    token
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| GridSpecError::BadNumber(token.to_string()))
}

fn parse_range(spec: &str) -> Result<Vec<f64>, GridSpecError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(GridSpecError::BadRange(spec.to_string()));
    }
    let lo = parse_number(parts[0])?;
    let hi = parse_number(parts[1])?;
    let step = parse_number(parts[2])?;
    if step <= 0.0 {
        return Err(GridSpecError::BadStep(step));
    }
    if hi < lo {
        return Err(GridSpecError::EmptyRange { lo, hi });
    }
    let span = (hi - lo) / step;
    if span > MAX_LEVELS as f64 {
        return Err(GridSpecError::TooManyLevels);
    }
    // Tolerate an endpoint that misses by float noise, e.g. 0:1:0.1.
    let count = (span + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| lo + k as f64 * step).collect())
}

fn parse_list(spec: &str) -> Result<Vec<f64>, GridSpecError> {
    let mut levels = Vec::new();
    for token in spec.split(',') {
        let x = parse_number(token)?;
        if let Some(&prev) = levels.last() {
            if x <= prev {
                return Err(GridSpecError::NotIncreasing { prev, next: x });
            }
        }
        levels.push(x);
    }
    Ok(levels)
}

/// Parses a level specification in either form.
pub fn parse_levels(spec: &str) -> Result<Vec<f64>, GridSpecError> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Err(GridSpecError::Empty);
    }
    if spec.contains(':') {
        parse_range(spec)
    } else {
        parse_list(spec)
    }
}
