//! CSV ingestion for raw auction tables.
//!
//! The input is a headered CSV with required columns `auction_id`,
//! `bidder_id`, and `bid` (dollars), an optional `acreage` column, and any
//! number of extra covariate columns, carried through as text. Rows of the
//! same auction are grouped in order of first appearance, and every
//! rejected cell is reported with its line number. Lines starting with `#`
//! are comments, so files emitted by this tool can be read back.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing required column {0:?}")]
    MissingColumn(&'static str),
    #[error("empty {column} field on line {line}")]
    MissingField { column: &'static str, line: u64 },
    #[error("{column} field {value:?} on line {line} is not a finite number")]
    BadNumber { column: &'static str, line: u64, value: String },
    #[error("negative bid {bid} for auction {auction:?} on line {line}")]
    NegativeBid { auction: String, line: u64, bid: f64 },
    #[error("acreage {value} on line {line} must be positive")]
    BadAcreage { line: u64, value: f64 },
    #[error("no data rows")]
    EmptyTable,
}

/// One bid row as read from the file.
#[derive(Debug, Clone)]
pub struct RawBid {
    pub bidder_id: String,
    /// Dollar amount, nonnegative.
    pub amount: f64,
    pub acreage: Option<f64>,
    pub covariates: Vec<String>,
    /// 1-based line number in the source file.
    pub line: u64,
}

/// All bids that share an `auction_id`, in file order.
#[derive(Debug, Clone)]
pub struct RawAuction {
    pub id: String,
    pub bids: Vec<RawBid>,
}

/// A parsed bid data file. Auctions keep first-appearance order, so the
/// table is a deterministic function of the file bytes.
#[derive(Debug, Clone)]
pub struct RawAuctionTable {
    /// Where the rows came from, echoed into audit output.
    pub provenance: String,
    pub auctions: Vec<RawAuction>,
    pub covariate_names: Vec<String>,
}

impl RawAuctionTable {
    pub fn len(&self) -> usize {
        self.auctions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.auctions.is_empty()
    }

    /// Number of auctions with exactly `bidders` bids.
    pub fn auctions_with(&self, bidders: usize) -> usize {
        self.auctions.iter().filter(|a| a.bids.len() == bidders).count()
    }

    pub fn total_bids(&self) -> usize {
        self.auctions.iter().map(|a| a.bids.len()).sum()
    }
}

fn header_index(headers: &csv::StringRecord, name: &'static str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn required<'r>(
    record: &'r csv::StringRecord,
    idx: usize,
    column: &'static str,
) -> Result<&'r str, IngestError> {
    let cell = record.get(idx).unwrap_or("").trim();
    if cell.is_empty() {
        return Err(IngestError::MissingField { column, line: record_line(record) });
    }
    Ok(cell)
}

fn parse_finite(
    cell: &str,
    column: &'static str,
    line: u64,
) -> Result<f64, IngestError> {
    cell.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| IngestError::BadNumber { column, line, value: cell.to_string() })
}

/// Parses a bid data file; see the module doc for the schema.
pub fn ingest(path: &Path) -> Result<RawAuctionTable, IngestError> {
    let file = File::open(path)
        .map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    ingest_reader(file, &path.display().to_string())
}

/// As [`ingest`], from any reader; `provenance` labels the source.
pub fn ingest_reader(reader: impl Read, provenance: &str) -> Result<RawAuctionTable, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    let id_idx = header_index(&headers, "auction_id")
        .ok_or(IngestError::MissingColumn("auction_id"))?;
    let bidder_idx = header_index(&headers, "bidder_id")
        .ok_or(IngestError::MissingColumn("bidder_id"))?;
    let bid_idx = header_index(&headers, "bid").ok_or(IngestError::MissingColumn("bid"))?;
    let acreage_idx = header_index(&headers, "acreage");

    let covariate_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| i != id_idx && i != bidder_idx && i != bid_idx && Some(i) != acreage_idx)
        .collect();
    let covariate_names: Vec<String> =
        covariate_cols.iter().map(|&i| headers[i].to_string()).collect();

    let mut auctions: Vec<RawAuction> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        let id = required(&record, id_idx, "auction_id")?.to_string();
        let bidder_id = required(&record, bidder_idx, "bidder_id")?.to_string();
        let amount = parse_finite(required(&record, bid_idx, "bid")?, "bid", line)?;
        if amount < 0.0 {
            return Err(IngestError::NegativeBid { auction: id, line, bid: amount });
        }
        let acreage = match acreage_idx {
            Some(idx) => {
                let cell = record.get(idx).unwrap_or("").trim();
                if cell.is_empty() {
                    None
                } else {
                    let acre = parse_finite(cell, "acreage", line)?;
                    if acre <= 0.0 {
                        return Err(IngestError::BadAcreage { line, value: acre });
                    }
                    Some(acre)
                }
            }
            None => None,
        };
        let covariates =
            covariate_cols.iter().map(|&i| record.get(i).unwrap_or("").to_string()).collect();

        let bid = RawBid { bidder_id, amount, acreage, covariates, line };
        match by_id.get(&id) {
            Some(&slot) => auctions[slot].bids.push(bid),
            None => {
                by_id.insert(id.clone(), auctions.len());
                auctions.push(RawAuction { id, bids: vec![bid] });
            }
        }
    }
    if auctions.is_empty() {
        return Err(IngestError::EmptyTable);
    }
    Ok(RawAuctionTable { provenance: provenance.to_string(), auctions, covariate_names })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RawAuctionTable, IngestError> {
        ingest_reader(text.as_bytes(), "inline")
    }

    #[test]
    fn well_formed_rows_group_into_auctions() {
        let table = parse(
            "auction_id,bidder_id,bid\n\
             a1,alice,100\n\
             a2,bob,250.5\n\
             a3,carol,0\n",
        )
        .unwrap();
        assert_eq!(table.len(), 3);
        assert_eq!(table.total_bids(), 3);
        assert_eq!(table.auctions[1].bids[0].amount, 250.5);
    }

    #[test]
    fn rows_of_one_auction_need_not_be_adjacent() {
        let table = parse(
            "auction_id,bidder_id,bid\n\
             a1,alice,10\n\
             a2,bob,20\n\
             a1,carol,30\n",
        )
        .unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table.auctions[0].id, "a1");
        assert_eq!(table.auctions[0].bids.len(), 2);
        assert_eq!(table.auctions[0].bids[1].line, 4);
    }

    #[test]
    fn negative_bid_names_the_row() {
        let err = parse(
            "auction_id,bidder_id,bid\n\
             a1,alice,10\n\
             a2,bob,-3\n",
        )
        .unwrap_err();
        match err {
            IngestError::NegativeBid { auction, line, bid } => {
                assert_eq!(auction, "a2");
                assert_eq!(line, 3);
                assert_eq!(bid, -3.0);
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn non_numeric_bid_reports_the_line() {
        let err = parse(
            "auction_id,bidder_id,bid\n\
             a1,alice,oops\n",
        )
        .unwrap_err();
        match err {
            IngestError::BadNumber { column, line, value } => {
                assert_eq!(column, "bid");
                assert_eq!(line, 2);
                assert_eq!(value, "oops");
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let err = parse("auction_id,bidder_id,price\na1,alice,10\n").unwrap_err();
        assert!(matches!(err, IngestError::MissingColumn("bid")));
    }

    #[test]
    fn acreage_and_covariates_are_optional() {
        let table = parse(
            "auction_id,bidder_id,bid,acreage,region\n\
             a1,alice,10,2500,gulf\n\
             a1,bob,12,,gulf\n",
        )
        .unwrap();
        assert_eq!(table.covariate_names, vec!["region".to_string()]);
        assert_eq!(table.auctions[0].bids[0].acreage, Some(2500.0));
        assert_eq!(table.auctions[0].bids[1].acreage, None);
        assert_eq!(table.auctions[0].bids[0].covariates, vec!["gulf".to_string()]);
    }

    #[test]
    fn nonpositive_acreage_is_rejected() {
        let err = parse("auction_id,bidder_id,bid,acreage\na1,alice,10,0\n").unwrap_err();
        assert!(matches!(err, IngestError::BadAcreage { line: 2, .. }));
    }

    #[test]
    fn comment_lines_are_skipped() {
        let table = parse(
            "auction_id,bidder_id,bid\n\
             # scale_factor=2\n\
             a1,alice,10\n",
        )
        .unwrap();
        assert_eq!(table.len(), 1);
    }

    #[test]
    fn empty_table_is_an_error() {
        assert!(matches!(parse("auction_id,bidder_id,bid\n"), Err(IngestError::EmptyTable)));
    }
}
