use crate::error::CliError;
use anfield_core::SourceSet;
use std::path::Path;

/// Parses a `--sources` spec against a graph of `n` vertices.
///
/// Accepted forms: `all`, `list:1,2,3` (empty list allowed), `file:PATH`.
/// A bare value of digits and commas is taken as a list, anything else as
/// a file path.
pub fn parse_sources(spec: &str, n: usize) -> Result<SourceSet, CliError> {
    if spec == "all" {
        return Ok(SourceSet::all(n));
    }
    if let Some(list) = spec.strip_prefix("list:") {
        return from_list(list, n);
    }
    if let Some(path) = spec.strip_prefix("file:") {
        return from_file(Path::new(path), n);
    }
    if !spec.is_empty() && spec.chars().all(|c| c.is_ascii_digit() || c == ',') {
        return from_list(spec, n);
    }
    from_file(Path::new(spec), n)
}

fn from_list(list: &str, n: usize) -> Result<SourceSet, CliError> {
    let mut ids = Vec::new();
    for token in list.split(',').filter(|t| !t.is_empty()) {
        let id: usize = token.parse().map_err(|_| {
            CliError::Parameter(format!("source id '{}' is not an integer", token))
        })?;
        ids.push(id);
    }
    SourceSet::from_ids(n, &ids)
        .map_err(|e| CliError::Parameter(format!("bad source set: {}", e)))
}

fn from_file(path: &Path, n: usize) -> Result<SourceSet, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut ids = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        for token in line.split_whitespace() {
            let id: usize = token.parse().map_err(|_| {
                CliError::parse(
                    path,
                    format!("line {}: '{}' is not a vertex id", idx + 1, token),
                )
            })?;
            ids.push(id);
        }
    }
    SourceSet::from_ids(n, &ids)
        .map_err(|e| CliError::Parameter(format!("bad source set: {}", e)))
}
