//! Scenario files and the runner behind the `afcmem` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod run;
pub mod scenario;

pub use error::CliError;
pub use run::{prepare, run, validate, Artifacts};
pub use scenario::{builtin, Kind, Scenario, BUILTIN};

/// Load a scenario from a path, or by built-in name when no such file exists.
pub fn load(arg: &str) -> Result<Scenario, CliError> {
    let path = std::path::Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
        return Scenario::parse(&text, stem);
    }
    match builtin(arg) {
        Some(text) => Scenario::parse(text, arg),
        None => {
            let names: Vec<&str> = BUILTIN.iter().map(|(n, _)| *n).collect();
            Err(CliError::Usage(format!("`{arg}` is neither a file nor a built-in scenario ({})", names.join(", "))))
        }
    }
}
