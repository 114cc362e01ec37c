//! Model documents, command execution and reports behind the `noether` binary.

pub mod document;
pub mod fixtures;
pub mod report;
pub mod run;

pub use document::{normalize_whitespace, parse_model, Diagnostic, ModelDocument};
pub use report::Report;
pub use run::{run, Command, Options, Outcome, RunError};

/// Reads a model from a path, or from the bundled fixtures when the argument
/// has the form `case:<name>`. Returns the text and a label for reports.
pub fn load(source: &str) -> std::io::Result<(String, String)> {
    if let Some(name) = source.strip_prefix("case:") {
        return fixtures::fixture(name)
            .map(|t| (t.to_string(), name.to_string()))
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::NotFound, format!("no bundled case `{name}`")));
    }
    let text = std::fs::read_to_string(source)?;
    let stem = std::path::Path::new(source)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| source.to_string());
    Ok((text, stem))
}
