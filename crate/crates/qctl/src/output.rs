//! `<prefix>.csv`, `<prefix>.svg` and `<prefix>.summary.txt`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::experiments::ExperimentResult;
use crate::{Config, RunError, VERSION};

pub struct Written {
    pub csv: PathBuf,
    pub svg: PathBuf,
    pub summary: PathBuf,
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn csv_text(result: &ExperimentResult) -> Result<String, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&result.columns)?;
    for row in &result.rows {
        w.write_record(row.iter().map(|x| format!("{x:e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| RunError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

/// Flat `key = value` lines: header, verdicts, measurements, then the
/// resolved configuration.
pub fn summary_text(cfg: &Config, result: &ExperimentResult) -> String {
    let mut lines = vec![
        format!("tool = qctl {VERSION}"),
        format!("experiment = {}", result.experiment),
        format!("status = {}", if result.partial { "partial" } else { "complete" }),
        format!("overall = {}", if result.passed() { "pass" } else { "fail" }),
    ];
    for v in &result.verdicts {
        let outcome = match v.pass {
            Some(true) => "pass",
            Some(false) => "fail",
            None => "none",
        };
        lines.push(format!("verdict.{} = {outcome}", v.name));
        lines.push(format!("verdict.{}.detail = {}", v.name, v.detail));
    }
    for (k, v) in &result.summary {
        lines.push(format!("{k} = {v}"));
    }
    for (k, v) in cfg.provenance() {
        lines.push(format!("{k} = {v}"));
    }
    lines.join("\n") + "\n"
}

pub fn write_outputs(cfg: &Config, result: &ExperimentResult) -> Result<Written, RunError> {
    if let Some(dir) = cfg.prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let out = Written {
        csv: with_suffix(&cfg.prefix, ".csv"),
        svg: with_suffix(&cfg.prefix, ".svg"),
        summary: with_suffix(&cfg.prefix, ".summary.txt"),
    };
    fs::write(&out.csv, csv_text(result)?)?;
    fs::write(&out.svg, result.plot.to_svg())?;
    fs::write(&out.summary, summary_text(cfg, result))?;
    Ok(out)
}
