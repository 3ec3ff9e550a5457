//! Output files: a header block followed by CSV or JSONL rows.
//!
//! CSV files start with `#` lines (tool version, `# config: <json>`,
//! `# timestamp: <unix seconds>`, optional `# note:` lines) and then a CSV
//! table with a header row. JSONL files carry the same header as JSON
//! objects (`{"ranksel":..,"config":..}`, `{"timestamp":..}`, `{"note":..}`),
//! one per line, followed by one flat object per row.
//!
//! Floats are written in shortest round-trip form. Only the timestamp line
//! varies between identical runs.

use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::error::CliError;

pub const CONFIG_PREFIX: &str = "# config: ";
pub const TIMESTAMP_PREFIX: &str = "# timestamp: ";
const JSON_TIMESTAMP_PREFIX: &str = "{\"timestamp\":";

pub fn render<R: Serialize>(
    config: &RunConfig,
    rows: &[R],
    notes: &[String],
    timestamp: u64,
) -> Result<String, CliError> {
    let version = env!("CARGO_PKG_VERSION");
    let mut out = String::new();
    match config.format {
        Format::Csv => {
            out.push_str(&format!("# ranksel {version} {}\n", config.command.name()));
            out.push_str(&format!("{CONFIG_PREFIX}{}\n", config.to_json()));
            out.push_str(&format!("{TIMESTAMP_PREFIX}{timestamp}\n"));
            for note in notes {
                out.push_str(&format!("# note: {note}\n"));
            }
            let mut wtr = csv::Writer::from_writer(Vec::new());
            for row in rows {
                wtr.serialize(row).map_err(encode_error)?;
            }
            let bytes = wtr.into_inner().map_err(|e| encode_error(e.into_error()))?;
            out.push_str(&String::from_utf8(bytes).expect("csv output is UTF-8"));
        }
        Format::Jsonl => {
            #[derive(Serialize)]
            struct Header<'a> {
                ranksel: &'a str,
                config: &'a RunConfig,
            }
            let header = serde_json::to_string(&Header {
                ranksel: version,
                config,
            })
            .map_err(|e| encode_error(std::io::Error::from(e)))?;
            out.push_str(&header);
            out.push('\n');
            out.push_str(&format!("{JSON_TIMESTAMP_PREFIX}{timestamp}}}\n"));
            for note in notes {
                out.push_str(&format!("{}\n", serde_json::json!({ "note": note })));
            }
            for row in rows {
                let line = serde_json::to_string(row).map_err(|e| encode_error(std::io::Error::from(e)))?;
                out.push_str(&line);
                out.push('\n');
            }
        }
    }
    Ok(out)
}

fn encode_error<E: Into<std::io::Error>>(e: E) -> CliError {
    CliError::Io {
        path: "<encoder>".into(),
        source: e.into(),
    }
}

/// The file with its timestamp line removed, for comparing runs.
pub fn without_timestamp(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with(TIMESTAMP_PREFIX) && !l.starts_with(JSON_TIMESTAMP_PREFIX))
        .map(|l| format!("{l}\n"))
        .collect()
}
