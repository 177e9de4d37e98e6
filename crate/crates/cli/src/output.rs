use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// One acceptance check: measured value against prediction and tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub prediction: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `|value − prediction| ≤ tolerance`.
    pub fn near(name: &str, value: f64, prediction: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            prediction,
            tolerance,
            pass: (value - prediction).abs() <= tolerance,
        }
    }

    /// Passes when `value ≤ bound`; the prediction is 0.
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            prediction: 0.0,
            tolerance: bound,
            pass: value <= bound,
        }
    }

    /// Passes when `value ≥ bound`; the prediction is 1.
    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            prediction: 1.0,
            tolerance: 1.0 - bound,
            pass: value >= bound,
        }
    }
}

/// A CSV table; cells are pre-formatted strings.
#[derive(Debug, Clone)]
pub struct Table {
    pub file: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, headers: &[&str]) -> Self {
        Self {
            file: file.into(),
            headers: headers.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|x| x.to_string()).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Everything a subcommand produces.
#[derive(Debug)]
pub struct Report {
    pub command: &'static str,
    pub checks: Vec<Check>,
    pub details: Value,
    pub tables: Vec<Table>,
    pub extra_json: Vec<(String, Value)>,
    pub console: Vec<String>,
}

impl Report {
    pub fn new(command: &'static str) -> Self {
        Self {
            command,
            checks: Vec::new(),
            details: json!({}),
            tables: Vec::new(),
            extra_json: Vec::new(),
            console: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Writes `<command>.json`, the CSV tables and, optionally, gnuplot scripts.
pub fn write_report(report: &Report, config: &Value, dir: &Path, gnuplot: bool) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "command": report.command,
        "config": config,
        "checks": report.checks,
        "pass": report.passed(),
        "report": report.details,
        "files": report.tables.iter().map(|t| t.file.clone()).collect::<Vec<_>>(),
    });
    written.push(write_json(&dir.join(format!("{}.json", report.command)), &summary)?);
    for (name, value) in &report.extra_json {
        written.push(write_json(&dir.join(name), value)?);
    }
    for table in &report.tables {
        let path = dir.join(&table.file);
        let mut w = csv::Writer::from_path(&path).map_err(csv_error)?;
        w.write_record(&table.headers).map_err(csv_error)?;
        for row in &table.rows {
            w.write_record(row).map_err(csv_error)?;
        }
        w.flush()?;
        written.push(path);
        if gnuplot && table.headers.len() >= 2 {
            let script = dir.join(table.file.replace(".csv", ".gp"));
            fs::write(&script, gnuplot_script(table))?;
            written.push(script);
        }
    }
    Ok(written)
}

fn write_json(path: &Path, value: &Value) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(path.to_path_buf())
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e.to_string()))
}

/// Plots every column against the first.
pub fn gnuplot_script(table: &Table) -> String {
    let stem = table.file.trim_end_matches(".csv");
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str("set terminal pngcairo size 900,600\n");
    s.push_str(&format!("set output '{stem}.png'\n"));
    s.push_str(&format!("set xlabel '{}'\n", table.headers[0]));
    let series: Vec<String> = (2..=table.headers.len())
        .map(|c| {
            let style = if table.headers[c - 1] == "prediction" {
                "lines"
            } else {
                "linespoints"
            };
            format!("'{}' using 1:{c} with {style}", table.file)
        })
        .collect();
    s.push_str(&format!("plot {}\n", series.join(", \\\n     ")));
    s
}
