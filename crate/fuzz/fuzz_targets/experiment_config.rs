//! Arbitrary text through the experiment configuration parser, and the
//! family lookup for configs that deserialize. Sizes are capped so the
//! harness exercises parsing, not allocation.

#![no_main]

use bidbounds::montecarlo::{family_by_name, ExperimentConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(config) = toml::from_str::<ExperimentConfig>(text) else { return };
    let _ = family_by_name(&config.family, config.grid.h.min(32) as f64);
});
