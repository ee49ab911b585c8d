use crate::error::CliError;
use std::io::Write;
use std::path::Path;

/// Writes the fully rendered output to `--out` or stdout. Rendering into a
/// string first keeps file and stdout bytes identical.
pub fn emit(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content).map_err(|e| CliError::io(path, e)),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(content.as_bytes())
                .and_then(|_| lock.flush())
                .map_err(|e| CliError::Io {
                    path: "<stdout>".into(),
                    source: e,
                })
        }
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Renders a JSON value with a trailing newline.
pub fn render_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types always serialize");
    s.push('\n');
    s
}

/// Minimal CSV builder: numeric cells only, so no quoting is ever needed.
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &str) -> Self {
        let mut buf = String::new();
        buf.push_str(header);
        buf.push('\n');
        Csv { buf }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    /// Starts a second table after a blank separator line.
    pub fn section(&mut self, header: &str) {
        self.buf.push('\n');
        self.buf.push_str(header);
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// Shortest round-trip decimal rendering; identical across runs.
pub fn fmt_f64(x: f64) -> String {
    format!("{}", x)
}
