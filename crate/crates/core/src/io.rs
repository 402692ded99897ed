//! Output files: CSV tables prefixed by a commented configuration header.
//!
//! Every file starts with the resolved run configuration, one `# `-prefixed
//! line per config line, followed by an ordinary CSV table. Rows are flushed
//! as they are written so an interrupted scan keeps everything but the cell
//! in flight.

use crate::{Error, Result};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const HEADER_PREFIX: &str = "# ";

/// Prefix every line of `config` with [`HEADER_PREFIX`].
pub fn render_header(config: &str) -> String {
    let mut out = String::with_capacity(config.len() + 16);
    for line in config.lines() {
        out.push_str(HEADER_PREFIX.trim_end());
        if !line.is_empty() {
            out.push(' ');
            out.push_str(line);
        }
        out.push('\n');
    }
    out
}

/// Recover the configuration text from a file written by [`CsvSink`].
pub fn parse_header(content: &str) -> String {
    let mut out = String::new();
    for line in content.lines() {
        let Some(rest) = line.strip_prefix('#') else {
            break;
        };
        out.push_str(rest.strip_prefix(' ').unwrap_or(rest));
        out.push('\n');
    }
    out
}

/// Everything after the header.
pub fn payload(content: &str) -> &str {
    let mut offset = 0;
    for line in content.split_inclusive('\n') {
        if !line.starts_with('#') {
            break;
        }
        offset += line.len();
    }
    &content[offset..]
}

/// Shortest round-trip text for a float, `nan` for missing values.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x}")
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Output(format!("{}: {e}", path.display()))
}

/// A CSV file with a config header, flushed after every record.
pub struct CsvSink {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
    columns: usize,
}

impl CsvSink {
    pub fn create(path: impl AsRef<Path>, config: &str, columns: &[&str]) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        let mut file = BufWriter::new(File::create(&path).map_err(|e| io_err(&path, e))?);
        file.write_all(render_header(config).as_bytes())
            .map_err(|e| io_err(&path, e))?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(columns).map_err(|e| io_err(&path, e))?;
        writer.flush().map_err(|e| io_err(&path, e))?;
        Ok(Self {
            path,
            writer,
            columns: columns.len(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn record<S: AsRef<[u8]>>(&mut self, fields: &[S]) -> Result<()> {
        if fields.len() != self.columns {
            return Err(Error::InvalidParameter(format!(
                "{}: expected {} fields, got {}",
                self.path.display(),
                self.columns,
                fields.len()
            )));
        }
        self.writer
            .write_record(fields)
            .map_err(|e| io_err(&self.path, e))?;
        self.writer.flush().map_err(|e| io_err(&self.path, e))
    }

    pub fn floats(&mut self, values: &[f64]) -> Result<()> {
        let fields: Vec<String> = values.iter().map(|&v| fmt_float(v)).collect();
        self.record(&fields)
    }
}

/// One `(x, y, yerr)` point of a named series.
#[derive(Clone, Debug, PartialEq)]
pub struct Triplet {
    pub series: String,
    pub x: f64,
    pub y: f64,
    pub yerr: f64,
}

impl Triplet {
    pub fn new(series: impl Into<String>, x: f64, y: f64, yerr: f64) -> Self {
        Self {
            series: series.into(),
            x,
            y,
            yerr,
        }
    }
}

/// Write plot data as `series,x,y,yerr` to `dir/<name>.csv`.
pub fn write_plot_data(
    dir: impl AsRef<Path>,
    name: &str,
    config: &str,
    points: &[Triplet],
) -> Result<PathBuf> {
    let path = dir.as_ref().join(format!("{name}.csv"));
    let mut sink = CsvSink::create(&path, config, &["series", "x", "y", "yerr"])?;
    for p in points {
        sink.record(&[
            p.series.clone(),
            fmt_float(p.x),
            fmt_float(p.y),
            fmt_float(p.yerr),
        ])?;
    }
    Ok(path)
}

/// Write a plain-text report with the config header.
pub fn write_report(path: impl AsRef<Path>, config: &str, body: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut text = render_header(config);
    text.push_str(body);
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}
