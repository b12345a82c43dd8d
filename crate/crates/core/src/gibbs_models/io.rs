//! Plain-text loaders for observed configurations.
//!
//! Graphs arrive as undirected edge lists: a header line `n <count>`,
//! then one `i j` pair per line with 1-based node ids; `#` starts a
//! comment. Lattices arrive as whitespace-separated integers, one line
//! per lattice row.

use std::fs;
use std::path::Path;

use super::{GraphConfig, LatticeConfig};
use crate::error::{Error, Result};

/// Reads an undirected edge list.
pub fn read_graph(path: &Path) -> Result<GraphConfig> {
    let text = fs::read_to_string(path)?;
    let mut n: Option<usize> = None;
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match (n, fields.as_slice()) {
            (None, ["n", count]) => {
                n = Some(count.parse::<usize>().map_err(|e| {
                    Error::Parse(format!("line {}: bad node count: {e}", lineno + 1))
                })?);
            }
            (None, _) => {
                return Err(Error::Parse(format!(
                    "line {}: expected header `n <count>` before edges",
                    lineno + 1
                )));
            }
            (Some(count), [a, b]) => {
                let i: usize = a
                    .parse()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
                let j: usize = b
                    .parse()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
                if i == 0 || j == 0 || i > count || j > count {
                    return Err(Error::Parse(format!(
                        "line {}: node id outside 1..={count}",
                        lineno + 1
                    )));
                }
                if i == j {
                    return Err(Error::Parse(format!("line {}: self loop", lineno + 1)));
                }
                edges.push((i - 1, j - 1));
            }
            (Some(_), _) => {
                return Err(Error::Parse(format!(
                    "line {}: expected `i j`",
                    lineno + 1
                )));
            }
        }
    }
    let n = n.ok_or_else(|| Error::Parse("missing `n <count>` header".into()))?;
    GraphConfig::from_edges(n, &edges)
}

/// Reads a lattice configuration: `height` rows of `width` integers.
pub fn read_lattice(path: &Path, height: usize, width: usize, num_states: u8) -> Result<LatticeConfig> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<u8>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<u8> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<u8>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            })
            .collect::<Result<_>>()?;
        if row.len() != width {
            return Err(Error::Parse(format!(
                "line {}: {} entries, expected {width}",
                lineno + 1,
                row.len()
            )));
        }
        rows.push(row);
    }
    if rows.len() != height {
        return Err(Error::Parse(format!(
            "{} rows, expected {height}",
            rows.len()
        )));
    }
    let mut config = LatticeConfig::constant(height, width, num_states, 0);
    for (r, row) in rows.iter().enumerate() {
        for (c, state) in row.iter().enumerate() {
            if *state >= num_states {
                return Err(Error::Parse(format!(
                    "state {state} out of range 0..{num_states}"
                )));
            }
            config.set_site(r, c, *state);
        }
    }
    Ok(config)
}

/// Writes a lattice in the same row-per-line format `read_lattice` expects.
pub fn write_lattice(path: &Path, config: &LatticeConfig) -> Result<()> {
    let mut out = String::new();
    for r in 0..config.height {
        let row: Vec<String> = (0..config.width)
            .map(|c| config.site(r, c).to_string())
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
