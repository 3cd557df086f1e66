//! Raw dollar records to grid-indexed bid profiles, with an audit trail.
//!
//! The pipeline is: keep auctions with exactly the required bidder count,
//! normalize bids per acre when asked, drop auctions containing a bid over
//! the outlier threshold, rescale so the largest retained bid lands on the
//! top of the bid grid, round to integer levels, and randomly assign
//! bidder identities to player slots. The audit log records every dropped
//! auction, the scale map, and summary statistics of the retained
//! normalized bids, and the counts always satisfy
//! `input = retained + dropped by bidder filter + dropped by threshold`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use thiserror::Error;

use bidbounds::inference::sample_variance;

use crate::ingest::RawAuctionTable;

#[derive(Debug, Error)]
pub enum PrepError {
    #[error("outlier threshold must be positive, got {0}")]
    BadThreshold(f64),
    #[error("grid size H must be at least 2, got {0}")]
    GridTooSmall(usize),
    #[error("required bidder count must be at least 1")]
    NoBidders,
    #[error("auction {auction:?} has no acreage on line {line}, needed for per-acre bids")]
    MissingAcreage { auction: String, line: u64 },
    #[error("no auctions retained: {input} read, none passed the bidder and threshold filters")]
    NoRetained { input: usize },
    #[error("retained bids are all zero; the scale map is undefined")]
    DegenerateScale,
}

/// Rounding rule mapping scaled bids to integer levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    #[default]
    Nearest,
    Floor,
}

impl Rounding {
    fn apply(self, x: f64) -> f64 {
        match self {
            Self::Nearest => x.round(),
            Self::Floor => x.floor(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Nearest => "nearest",
            Self::Floor => "floor",
        }
    }
}

/// Preparation parameters. `grid_h` is the value-grid size; bids are
/// scaled onto `0..=ceil(H/2)`.
#[derive(Debug, Clone)]
pub struct PreprocessSpec {
    /// Keep only auctions with exactly this many bids.
    pub bidders: usize,
    /// Divide each bid by the row's acreage before anything else.
    pub per_acre: bool,
    /// Drop auctions containing a normalized bid above this many dollars.
    pub threshold: f64,
    pub grid_h: usize,
    pub rounding: Rounding,
    /// Seed for the random assignment of bidders to player slots.
    pub seed: u64,
}

impl Default for PreprocessSpec {
    fn default() -> Self {
        Self {
            bidders: 2,
            per_acre: false,
            threshold: 20_000.0,
            grid_h: 200,
            rounding: Rounding::Nearest,
            seed: 0,
        }
    }
}

impl PreprocessSpec {
    /// Top of the bid grid.
    pub fn bid_cap(&self) -> usize {
        self.grid_h.div_ceil(2)
    }
}

/// One auction the pipeline dropped, and why.
#[derive(Debug, Clone, Serialize)]
pub struct DroppedAuction {
    pub id: String,
    /// `bidder_filter` or `over_threshold`.
    pub reason: &'static str,
    pub detail: String,
}

/// Everything the pipeline did, in emission order.
#[derive(Debug, Clone, Serialize)]
pub struct AuditLog {
    pub source: String,
    pub input_auctions: usize,
    pub retained: usize,
    pub dropped_bidder_filter: usize,
    pub dropped_threshold: usize,
    pub bidders: usize,
    pub per_acre: bool,
    pub threshold: f64,
    pub grid_h: usize,
    pub bid_cap: usize,
    pub rounding: &'static str,
    pub seed: u64,
    /// Largest retained normalized bid; it maps onto `bid_cap` exactly.
    pub max_retained_bid: f64,
    /// `bid_cap / max_retained_bid`.
    pub scale_factor: f64,
    /// Mean of the retained normalized bids.
    pub per_acre_mean: f64,
    /// Unbiased standard deviation of the retained normalized bids.
    pub per_acre_sd: f64,
    pub dropped_auctions: Vec<DroppedAuction>,
}

/// One retained auction on the integer grid, identities already assigned.
#[derive(Debug, Clone)]
pub struct PreparedAuction {
    pub id: String,
    /// Bidder label per player slot.
    pub bidder_ids: Vec<String>,
    /// Bid level per player slot, each in `0..=bid_cap`.
    pub levels: Vec<usize>,
}

/// The prepared sample: grid parameters plus one row per auction.
#[derive(Debug, Clone)]
pub struct PreparedSample {
    pub grid_h: usize,
    pub bid_cap: usize,
    pub scale_factor: f64,
    pub auctions: Vec<PreparedAuction>,
}

/// Runs the preparation pipeline; see the module doc for the stages.
pub fn preprocess(
    table: &RawAuctionTable,
    spec: &PreprocessSpec,
) -> Result<(PreparedSample, AuditLog), PrepError> {
    if !(spec.threshold > 0.0 && spec.threshold.is_finite()) {
        return Err(PrepError::BadThreshold(spec.threshold));
    }
    if spec.grid_h < 2 {
        return Err(PrepError::GridTooSmall(spec.grid_h));
    }
    if spec.bidders == 0 {
        return Err(PrepError::NoBidders);
    }

    let mut dropped = Vec::new();
    let mut kept: Vec<(usize, Vec<f64>)> = Vec::new();
    for (slot, auction) in table.auctions.iter().enumerate() {
        if auction.bids.len() != spec.bidders {
            dropped.push(DroppedAuction {
                id: auction.id.clone(),
                reason: "bidder_filter",
                detail: format!("{} bidders, need {}", auction.bids.len(), spec.bidders),
            });
            continue;
        }
        let mut normalized = Vec::with_capacity(auction.bids.len());
        for bid in &auction.bids {
            let x = if spec.per_acre {
                let acre = bid.acreage.ok_or_else(|| PrepError::MissingAcreage {
                    auction: auction.id.clone(),
                    line: bid.line,
                })?;
                bid.amount / acre
            } else {
                bid.amount
            };
            normalized.push(x);
        }
        let worst = normalized.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if worst > spec.threshold {
            dropped.push(DroppedAuction {
                id: auction.id.clone(),
                reason: "over_threshold",
                detail: format!("largest bid {worst}"),
            });
            continue;
        }
        kept.push((slot, normalized));
    }
    if kept.is_empty() {
        return Err(PrepError::NoRetained { input: table.len() });
    }

    let flat: Vec<f64> = kept.iter().flat_map(|(_, bids)| bids.iter().copied()).collect();
    let max_retained = flat.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max_retained <= 0.0 {
        return Err(PrepError::DegenerateScale);
    }
    let mean = flat.iter().sum::<f64>() / flat.len() as f64;
    let sd = sample_variance(&flat).sqrt();

    let cap = spec.bid_cap();
    let scale = cap as f64 / max_retained;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mut auctions = Vec::with_capacity(kept.len());
    for (slot, normalized) in &kept {
        let auction = &table.auctions[*slot];
        let mut order: Vec<usize> = (0..spec.bidders).collect();
        order.shuffle(&mut rng);
        let bidder_ids =
            order.iter().map(|&j| auction.bids[j].bidder_id.clone()).collect();
        let levels = order
            .iter()
            .map(|&j| {
                let level = spec.rounding.apply(normalized[j] * scale);
                (level.max(0.0) as usize).min(cap)
            })
            .collect();
        auctions.push(PreparedAuction { id: auction.id.clone(), bidder_ids, levels });
    }

    let audit = AuditLog {
        source: table.provenance.clone(),
        input_auctions: table.len(),
        retained: kept.len(),
        dropped_bidder_filter: dropped.iter().filter(|d| d.reason == "bidder_filter").count(),
        dropped_threshold: dropped.iter().filter(|d| d.reason == "over_threshold").count(),
        bidders: spec.bidders,
        per_acre: spec.per_acre,
        threshold: spec.threshold,
        grid_h: spec.grid_h,
        bid_cap: cap,
        rounding: spec.rounding.name(),
        seed: spec.seed,
        max_retained_bid: max_retained,
        scale_factor: scale,
        per_acre_mean: mean,
        per_acre_sd: sd,
        dropped_auctions: dropped,
    };
    assert_eq!(
        audit.input_auctions,
        audit.retained + audit.dropped_bidder_filter + audit.dropped_threshold,
        "audit counts must partition the input"
    );
    let sample =
        PreparedSample { grid_h: spec.grid_h, bid_cap: cap, scale_factor: scale, auctions };
    Ok((sample, audit))
}
