//! Plain-text snapshot files.
//!
//! ```text
//! # mobch-snapshot dim=1 n=4 h=2.5000000000000000e-1 t=0.0000000000000000e0
//! 1.0000000000000000e-1
//! ...
//! ```
//!
//! One value per line in row-major order, printed with 17 significant
//! digits so that reading a file back reproduces the doubles exactly.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};

const MAGIC: &str = "# mobch-snapshot";

/// Shortest format that round-trips every double: 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_snapshot(mut out: impl Write, u: &GridFunction, t: f64) -> Result<()> {
    let g = u.grid();
    writeln!(
        out,
        "{MAGIC} dim={} n={} h={} t={}",
        g.dim(),
        g.n(),
        format_f64(g.h()),
        format_f64(t)
    )?;
    for &x in u.values() {
        writeln!(out, "{}", format_f64(x))?;
    }
    Ok(())
}

/// Parse a snapshot, returning the field and its time.
pub fn read_snapshot(input: impl BufRead) -> Result<(GridFunction, f64)> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::Snapshot("empty file".into()))??;
    let rest = header
        .strip_prefix(MAGIC)
        .ok_or_else(|| Error::Snapshot(format!("missing `{MAGIC}` header")))?;
    let (mut dim, mut n, mut h, mut t) = (None, None, None, None);
    for field in rest.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::Snapshot(format!("bad header field `{field}`")))?;
        let bad = || Error::Snapshot(format!("bad value for `{key}`: `{value}`"));
        match key {
            "dim" => dim = Some(value.parse::<usize>().map_err(|_| bad())?),
            "n" => n = Some(value.parse::<usize>().map_err(|_| bad())?),
            "h" => h = Some(value.parse::<f64>().map_err(|_| bad())?),
            "t" => t = Some(value.parse::<f64>().map_err(|_| bad())?),
            _ => return Err(Error::Snapshot(format!("unknown header field `{key}`"))),
        }
    }
    let missing = |k: &str| Error::Snapshot(format!("header lacks `{k}`"));
    let grid = Grid::from_spacing(
        dim.ok_or_else(|| missing("dim"))?,
        n.ok_or_else(|| missing("n"))?,
        h.ok_or_else(|| missing("h"))?,
    )?;
    let t = t.ok_or_else(|| missing("t"))?;
    let mut values = Vec::with_capacity(grid.len());
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v = line
            .parse::<f64>()
            .map_err(|_| Error::Snapshot(format!("line {}: not a number: `{line}`", i + 2)))?;
        values.push(v);
    }
    Ok((GridFunction::new(grid, values).map_err(|e| Error::Snapshot(e.to_string()))?, t))
}
