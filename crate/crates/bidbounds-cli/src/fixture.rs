//! Synthetic bid data shaped like the federal offshore oil and gas lease
//! records that motivate the preparation pipeline.
//!
//! None of the real data ships. This generator reproduces the published
//! summary shape instead: the auction count, the two-bidder subset, a few
//! auctions with a per-acre bid over the outlier threshold, and the mean
//! and standard deviation of the retained per-acre bids, hit exactly by an
//! affine correction of a seeded mixture draw. The output is a
//! deterministic function of the constants below, so schema and pipeline
//! tests can pin every count.

use std::io::{self, Write};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use bidbounds::inference::sample_variance;

use crate::emit::format_f64;

pub const AUCTIONS: usize = 3036;
pub const TWO_BIDDER: usize = 584;
/// Two-bidder auctions containing a per-acre bid over the threshold.
pub const OVER_THRESHOLD: usize = 4;
pub const RETAINED: usize = TWO_BIDDER - OVER_THRESHOLD;
pub const PER_ACRE_MEAN: f64 = 991.48;
pub const PER_ACRE_SD: f64 = 1825.43;
pub const THRESHOLD: f64 = 20_000.0;

const SEED: u64 = 809_756;
const FIRMS: usize = 60;
/// High-bid draws among the retained pool; the 10/90 uniform mixture has
/// enough spread that the affine correction stays positive.
const HIGH_DRAWS: usize = RETAINED * 2 / 10;

/// Counts the generator promises; the unit test pins them.
#[derive(Debug, Clone, Copy)]
pub struct OcsFixtureStats {
    pub auctions: usize,
    pub two_bidder: usize,
    pub over_threshold: usize,
    pub retained_bids: usize,
    pub per_acre_mean: f64,
    pub per_acre_sd: f64,
}

/// Retained per-acre bids with the documented mean and deviation, exactly.
fn retained_pool(rng: &mut ChaCha12Rng) -> Vec<f64> {
    let n = RETAINED * 2;
    let mut draws: Vec<f64> = Vec::with_capacity(n);
    for _ in 0..HIGH_DRAWS {
        draws.push(rng.gen_range(3_800.0..6_200.0));
    }
    for _ in HIGH_DRAWS..n {
        draws.push(rng.gen_range(0.0..400.0));
    }
    draws.shuffle(rng);
    let mean = draws.iter().sum::<f64>() / n as f64;
    let sd = sample_variance(&draws).sqrt();
    let a = PER_ACRE_SD / sd;
    let b = PER_ACRE_MEAN - a * mean;
    let pool: Vec<f64> = draws.iter().map(|&x| a * x + b).collect();
    assert!(
        pool.iter().all(|&y| y > 0.0 && y < THRESHOLD * 0.95),
        "seeded pool must stay inside (0, threshold)"
    );
    pool
}

/// Writes the fixture as CSV and reports the counts it was built to.
pub fn write_ocs_fixture(writer: &mut impl Write) -> io::Result<OcsFixtureStats> {
    let mut rng = ChaCha12Rng::seed_from_u64(SEED);

    // Bidder-count plan: the two-bidder subset plus a 1/3/4 rotation.
    let mut counts = vec![2usize; TWO_BIDDER];
    let others = [1usize, 3, 4];
    counts.extend((0..AUCTIONS - TWO_BIDDER).map(|k| others[k % others.len()]));
    counts.shuffle(&mut rng);
    // Ordinals, among two-bidder auctions, that get an outlier bid.
    let over: [usize; OVER_THRESHOLD] = [97, 233, 391, 550];

    let pool = retained_pool(&mut rng);
    let per_acre_mean = pool.iter().sum::<f64>() / pool.len() as f64;
    let per_acre_sd = sample_variance(&pool).sqrt();

    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["auction_id", "bidder_id", "bid", "acreage"])?;
    let mut two_seen = 0usize;
    let mut cursor = 0usize;
    for (i, &count) in counts.iter().enumerate() {
        let id = format!("ocs-{:04}", i + 1);
        // Tract acreage is an auction-level attribute, to two decimals.
        let acreage = (rng.gen_range(40.0_f64..5_760.0) * 100.0).round() / 100.0;
        let firms = index::sample(&mut rng, FIRMS, count);
        let per_acre: Vec<f64> = if count == 2 {
            let ordinal = two_seen;
            two_seen += 1;
            if over.contains(&ordinal) {
                vec![rng.gen_range(21_000.0..29_000.0), rng.gen_range(200.0..8_000.0)]
            } else {
                let pair = vec![pool[cursor], pool[cursor + 1]];
                cursor += 2;
                pair
            }
        } else {
            (0..count).map(|_| rng.gen_range(50.0..6_000.0)).collect()
        };
        for (slot, &rate) in per_acre.iter().enumerate() {
            let firm = format!("firm-{:02}", firms.index(slot) + 1);
            let bid = rate * acreage;
            csv.write_record([id.as_str(), &firm, &format_f64(bid), &format_f64(acreage)])?;
        }
    }
    csv.flush()?;
    assert_eq!(cursor, pool.len(), "every retained draw must be spent");

    Ok(OcsFixtureStats {
        auctions: AUCTIONS,
        two_bidder: TWO_BIDDER,
        over_threshold: OVER_THRESHOLD,
        retained_bids: pool.len(),
        per_acre_mean,
        per_acre_sd,
    })
}
