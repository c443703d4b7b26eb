#![no_main]

use cpsemi_cli::parse_model_str;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if text.len() > 1 << 16 {
        return;
    }
    if let Err(e) = parse_model_str(text) {
        assert!(!e.to_string().is_empty());
    }
});
