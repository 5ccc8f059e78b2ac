//! CSV artifacts. Every file starts with `#` comment lines recording the
//! program version, the subcommand and the resolved configuration; floats
//! are written with 17 significant digits.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// Comment header shared by all artifacts of one run.
#[derive(Debug, Clone)]
pub struct Header {
    lines: Vec<String>,
}

impl Header {
    /// Header for `command` with the resolved configuration as TOML text.
    pub fn new(command: &str, resolved_toml: &str) -> Self {
        let mut lines = vec![
            format!("thinflow {} {command}", env!("CARGO_PKG_VERSION")),
            "resolved configuration:".to_string(),
        ];
        lines.extend(
            resolved_toml
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(str::to_string),
        );
        Self { lines }
    }

    fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        for l in &self.lines {
            writeln!(w, "# {l}")?;
        }
        Ok(())
    }
}

/// Float with 17 significant digits.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV file under construction.
pub struct CsvFile {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl CsvFile {
    /// Creates `dir/name`, writes the header comment and the column names.
    pub fn create(dir: &Path, name: &str, header: &Header, columns: &[&str]) -> io::Result<Self> {
        let path = dir.join(name);
        let mut file = File::create(&path)?;
        header.write_to(&mut file)?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(columns)?;
        Ok(Self { path, writer })
    }

    /// Appends a row of preformatted fields.
    pub fn row<I, S>(&mut self, fields: I) -> io::Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(io::Error::from)
    }

    /// Appends a row of floats.
    pub fn floats(&mut self, values: &[f64]) -> io::Result<()> {
        self.row(values.iter().map(|v| float(*v)))
    }

    /// Flushes the file and returns its path.
    pub fn finish(mut self) -> io::Result<PathBuf> {
        self.writer.flush()?;
        Ok(self.path)
    }
}

/// Writes the log-log plot script for `errors.csv`.
pub fn write_plot_script(dir: &Path, header: &Header) -> io::Result<PathBuf> {
    let path = dir.join("plot_errors.py");
    let mut f = File::create(&path)?;
    header.write_to(&mut f)?;
    f.write_all(PLOT_SCRIPT.as_bytes())?;
    Ok(path)
}

const PLOT_SCRIPT: &str = r##""""Log-log error curves of an epsilon sweep; reads errors.csv next to this file."""
import os

import matplotlib.pyplot as plt
import pandas as pd

here = os.path.dirname(os.path.abspath(__file__))
errors = pd.read_csv(os.path.join(here, "errors.csv"), comment="#")

fig, ax = plt.subplots(figsize=(7, 5))
for norm, group in errors.groupby("norm_id"):
    group = group.sort_values("eps")
    ax.loglog(group["eps"], group["value"], marker="o", label=norm)
ax.set_xlabel("epsilon")
ax.set_ylabel("scaled error")
ax.grid(True, which="both", alpha=0.3)
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(os.path.join(here, "plot_errors.png"), dpi=150)
"##;
