//! Arbitrary text through the grid specification parser; accepted level
//! lists small enough to matter are fed on into grid construction.

#![no_main]

use bidbounds::model::SupportGrid;
use bidbounds_cli::gridspec::parse_levels;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(levels) = parse_levels(text) else { return };
    if levels.len() <= 64 {
        let _ = SupportGrid::new(2, levels.clone(), levels);
    }
});
