//! Regenerates the synthetic offshore-lease fixture checked in under
//! `tests/fixtures/ocs_synthetic.csv`. Usage:
//!
//! ```text
//! cargo run -p bidbounds-cli --example make_ocs_fixture -- <out.csv>
//! ```
//!
//! Generation is fully seeded, so the output is byte-identical on every
//! run; the test suite asserts the checked-in copy matches.

use std::fs::File;
use std::io::BufWriter;

use bidbounds_cli::fixture::write_ocs_fixture;

fn main() -> std::io::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| {
        eprintln!("usage: make_ocs_fixture <out.csv>");
        std::process::exit(1);
    });
    let mut out = BufWriter::new(File::create(&path)?);
    let stats = write_ocs_fixture(&mut out)?;
    println!(
        "{path}: {} auctions ({} two-bidder, {} over threshold), \
         {} retained bids, per-acre mean {:.2} sd {:.2}",
        stats.auctions,
        stats.two_bidder,
        stats.over_threshold,
        stats.retained_bids,
        stats.per_acre_mean,
        stats.per_acre_sd
    );
    Ok(())
}
