use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::commands::Failure;

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("{}: {e}", path.display()))
}

pub fn write_report<T: Serialize>(path: Option<&Path>, report: &T) -> Result<(), Failure> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| Failure::Numeric(e.to_string()))?;
    s.push('\n');
    match path {
        Some(p) => fs::write(p, s).map_err(|e| io_err(p, e)),
        None => std::io::stdout()
            .write_all(s.as_bytes())
            .map_err(|e| Failure::Numeric(e.to_string())),
    }
}

pub fn write_svg(path: Option<&Path>, fig: &outer_billiards::svg::Figure) -> Result<(), Failure> {
    if let Some(p) = path {
        fs::write(p, fig.render(600.0)).map_err(|e| io_err(p, e))?;
    }
    Ok(())
}

pub fn write_csv(path: Option<&Path>, header: &[&str], rows: &[Vec<f64>]) -> Result<(), Failure> {
    let Some(p) = path else { return Ok(()) };
    let mut w = csv::Writer::from_path(p).map_err(|e| io_err(p, e))?;
    w.write_record(header).map_err(|e| io_err(p, e))?;
    for r in rows {
        w.write_record(r.iter().map(|x| x.to_string())).map_err(|e| io_err(p, e))?;
    }
    w.flush().map_err(|e| io_err(p, e))
}
