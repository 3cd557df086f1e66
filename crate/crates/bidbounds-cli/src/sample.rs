//! Bridges ingested tables to grid-indexed bid samples.
//!
//! Identification commands expect bid data already on the analysis grid:
//! each auction contributes one profile, and every bid must sit on a grid
//! level. Matching is to the nearest level within a small relative
//! tolerance, since a decimal written to a file (`0.35`) and a level
//! computed as `7 * 0.05` differ in the last bits.

use thiserror::Error;

use bidbounds::inference::{BidSample, InferenceError};
use bidbounds::model::SupportGrid;

use crate::ingest::RawAuctionTable;

/// Relative slack for matching a data bid to a grid level.
const LEVEL_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SampleError {
    #[error(
        "auction {auction:?} has {got} bids, expected {expected}; \
         filter the data first (see ocs-prep)"
    )]
    WrongBidderCount { auction: String, got: usize, expected: usize },
    #[error("bid {bid} (auction {auction:?}, line {line}) is not on the bid grid")]
    OffGrid { auction: String, line: u64, bid: f64 },
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

/// Index of the grid level nearest to `x`, if within tolerance.
pub fn nearest_level(levels: &[f64], x: f64) -> Option<usize> {
    let split = levels.partition_point(|&l| l < x);
    let mut best: Option<usize> = None;
    for idx in [split.wrapping_sub(1), split] {
        if let Some(&level) = levels.get(idx) {
            if best.map_or(true, |b| (level - x).abs() < (levels[b] - x).abs()) {
                best = Some(idx);
            }
        }
    }
    let idx = best?;
    ((levels[idx] - x).abs() <= LEVEL_TOL * x.abs().max(1.0)).then_some(idx)
}

/// Converts a table of on-grid bids into a sample of index profiles, one
/// per auction, player slots in file order.
pub fn table_to_sample(
    table: &RawAuctionTable,
    grid: &SupportGrid,
) -> Result<BidSample, SampleError> {
    let mut profiles = Vec::with_capacity(table.len());
    for auction in &table.auctions {
        if auction.bids.len() != grid.n() {
            return Err(SampleError::WrongBidderCount {
                auction: auction.id.clone(),
                got: auction.bids.len(),
                expected: grid.n(),
            });
        }
        let mut profile = Vec::with_capacity(grid.n());
        for bid in &auction.bids {
            let idx = nearest_level(grid.bids(), bid.amount).ok_or_else(|| {
                SampleError::OffGrid {
                    auction: auction.id.clone(),
                    line: bid.line,
                    bid: bid.amount,
                }
            })?;
            profile.push(idx);
        }
        profiles.push(profile);
    }
    Ok(BidSample::new(grid, profiles, None)?)
}
