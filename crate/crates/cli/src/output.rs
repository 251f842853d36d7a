//! CSV, JSON and gnuplot-script writers. Numbers carry 17 significant digits
//! so files round-trip bit-exactly; line endings are LF; no wall-clock content
//! is ever written, so identical configs yield identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// 17 significant digits (1 before the point + 16 after).
pub fn fmt(x: f64) -> String {
    if x == 0.0 {
        // avoid "-0" leaking from signed zeros
        return "0.0000000000000000e0".into();
    }
    format!("{x:.16e}")
}

pub struct Emitter {
    dir: PathBuf,
    formats: Vec<String>,
    pub written: Vec<PathBuf>,
}

impl Emitter {
    pub fn new(outdir: &Path, subcommand: &str, formats: &[String]) -> std::io::Result<Self> {
        let dir = outdir.join(subcommand);
        fs::create_dir_all(&dir)?;
        Ok(Emitter { dir, formats: formats.to_vec(), written: Vec::new() })
    }

    fn enabled(&self, ext: &str) -> bool {
        self.formats.iter().any(|f| f == ext)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
        if !self.enabled("csv") {
            return Ok(());
        }
        let mut out = String::new();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        self.write(&format!("{name}.csv"), &out)
    }

    pub fn json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        if !self.enabled("json") {
            return Ok(());
        }
        let mut text = serde_json::to_string_pretty(value).expect("serializable report");
        text.push('\n');
        self.write(&format!("{name}.json"), &text)
    }

    pub fn gnuplot(&mut self, name: &str, body: &str) -> std::io::Result<()> {
        if !self.enabled("gp") {
            return Ok(());
        }
        let mut out = String::new();
        writeln!(out, "set datafile separator \",\"").unwrap();
        writeln!(out, "set key autotitle columnhead").unwrap();
        writeln!(out, "set grid").unwrap();
        out.push_str(body);
        self.write(&format!("{name}.gp"), &out)
    }

    fn write(&mut self, file: &str, content: &str) -> std::io::Result<()> {
        let path = self.dir.join(file);
        fs::write(&path, content)?;
        self.written.push(path);
        Ok(())
    }
}

/// Parse a profile CSV (header x,u,u_prime[,...]) back into a trace.
pub fn parse_profile_csv(text: &str) -> Result<ccbvp_core::Trace, String> {
    let mut x = Vec::new();
    let mut u = Vec::new();
    let mut du = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 3 {
            return Err(format!("row {i}: expected at least 3 columns"));
        }
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("row {i}: {e}"));
        x.push(parse(cols[0])?);
        u.push(parse(cols[1])?);
        du.push(parse(cols[2])?);
    }
    if x.len() < 2 {
        return Err("profile CSV needs at least two rows".into());
    }
    Ok(ccbvp_core::Trace::new(x, u, du))
}
