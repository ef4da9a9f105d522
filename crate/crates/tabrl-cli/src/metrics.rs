//! Training metrics on disk. The CSV schema is versioned by its header
//! line: the column set and order never change within a version, floats
//! are written with fixed precision so identical runs produce identical
//! bytes, and every emitted row parses back.

use std::fs::{self, File};
use std::io::Write as _;
use std::path::{Path, PathBuf};

/// Column order is the struct field order.
pub const METRICS_HEADER: &str =
    "step,seed,epsilon,mean_eval_return,eval_success_rate,low_level_error_rate,llm_action_fraction,wall_clock_s";

/// One evaluation-boundary measurement for one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub seed: u64,
    /// Effective surrogate probability at this step (zero during warm-up).
    pub epsilon: f64,
    pub mean_eval_return: f64,
    pub eval_success_rate: f64,
    pub low_level_error_rate: f64,
    /// Fraction of executed actions since the previous boundary that came
    /// from the surrogate.
    pub llm_action_fraction: f64,
    pub wall_clock_s: f64,
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.6}")
    }
}

fn parse_field(s: &str, what: &str) -> Result<f64, String> {
    if s == "NaN" {
        return Ok(f64::NAN);
    }
    s.parse::<f64>().map_err(|e| format!("bad {what} {s:?}: {e}"))
}

impl MetricsRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.step,
            self.seed,
            fmt(self.epsilon),
            fmt(self.mean_eval_return),
            fmt(self.eval_success_rate),
            fmt(self.low_level_error_rate),
            fmt(self.llm_action_fraction),
            fmt(self.wall_clock_s),
        )
    }

    pub fn parse_csv_line(line: &str) -> Result<MetricsRow, String> {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 8 {
            return Err(format!("expected 8 fields, got {}", parts.len()));
        }
        let row = MetricsRow {
            step: parts[0].parse().map_err(|e| format!("bad step: {e}"))?,
            seed: parts[1].parse().map_err(|e| format!("bad seed: {e}"))?,
            epsilon: parse_field(parts[2], "epsilon")?,
            mean_eval_return: parse_field(parts[3], "mean_eval_return")?,
            eval_success_rate: parse_field(parts[4], "eval_success_rate")?,
            low_level_error_rate: parse_field(parts[5], "low_level_error_rate")?,
            llm_action_fraction: parse_field(parts[6], "llm_action_fraction")?,
            wall_clock_s: parse_field(parts[7], "wall_clock_s")?,
        };
        for (name, v) in [
            ("eval_success_rate", row.eval_success_rate),
            ("low_level_error_rate", row.low_level_error_rate),
            ("llm_action_fraction", row.llm_action_fraction),
        ] {
            if !v.is_nan() && !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} {v} outside [0, 1]"));
            }
        }
        Ok(row)
    }
}

/// Serialize rows under the schema header.
pub fn to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// Write the whole file through a temp sibling and an atomic rename, so a
/// reader never observes a torn file and an aborted run leaves the previous
/// version intact.
pub fn write_csv(path: &Path, rows: &[MetricsRow]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = tmp_sibling(path);
    {
        let mut f = File::create(&tmp)?;
        f.write_all(to_csv(rows).as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

fn tmp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricsRow>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {path:?}: {e}"))?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<Vec<MetricsRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == METRICS_HEADER => {}
        Some(h) => return Err(format!("unknown header {h:?}")),
        None => return Err("empty metrics file".into()),
    }
    lines
        .enumerate()
        .map(|(i, l)| MetricsRow::parse_csv_line(l).map_err(|e| format!("line {}: {e}", i + 2)))
        .collect()
}

/// Per-seed metrics file name inside a run directory.
pub fn seed_file(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("metrics_seed_{seed}.csv"))
}

/// Combined metrics over all seeds of a run.
pub fn aggregate_file(dir: &Path) -> PathBuf {
    dir.join("metrics.csv")
}
