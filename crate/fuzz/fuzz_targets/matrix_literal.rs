#![no_main]

use cpsemi::matrixcore::parse_matrix_literal;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(m) = parse_matrix_literal(text) else {
        return;
    };
    assert!(m.rows() > 0 && m.cols() > 0);
    // serialized form parses back to the same matrix
    let back = parse_matrix_literal(&serde_json::to_string(&m).unwrap()).unwrap();
    assert_eq!(back, m);
});
