//! Batch front end for `cpsemi`.

pub mod commands;
pub mod model;
pub mod report;

use std::path::Path;

pub use commands::{run, Command, InputError, Options};
pub use model::{parse_model_str, Kind, Model, ParseError};
pub use report::{Report, Status};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

pub fn exit_code(status: Status) -> i32 {
    match status {
        Status::Pass => EXIT_PASS,
        Status::Fail | Status::Error => EXIT_FAIL,
    }
}

/// Reads a model file, mapping I/O and parse problems to a message.
pub fn load_model(path: &Path) -> Result<Model, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_model_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}
