//! Arbitrary bytes through the auction CSV reader: every input must
//! come back as a table or a typed error, never a panic.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = bidbounds_cli::ingest::ingest_reader(data, "fuzz");
});
