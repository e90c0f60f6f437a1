//! Plain-text restart files.
//!
//! ```text
//! floodda-restart 1
//! t <seconds>
//! cells <n>
//! h <n values>
//! u <n values>
//! v <n values>
//! ```
//! Values use shortest round-trip formatting, so reloading is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::HydraulicState;

const MAGIC: &str = "floodda-restart 1";

pub fn write_restart(state: &HydraulicState) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "t {}", state.t);
    let _ = writeln!(out, "cells {}", state.h.len());
    for (name, field) in [("h", &state.h), ("u", &state.u), ("v", &state.v)] {
        out.push_str(name);
        for x in field.iter() {
            let _ = write!(out, " {x}");
        }
        out.push('\n');
    }
    out
}

pub fn read_restart(text: &str) -> Result<HydraulicState> {
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::format("restart: missing or unknown header"));
    }
    let mut keyed = |key: &str| -> Result<String> {
        let line = lines.next().ok_or_else(|| Error::format(format!("restart: truncated before '{key}'")))?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' ').or(if rest.is_empty() { Some("") } else { None }))
            .map(str::to_owned)
            .ok_or_else(|| Error::format(format!("restart: expected '{key}' line")))
    };
    let t: f64 = keyed("t")?.trim().parse().map_err(|_| Error::format("restart: bad time"))?;
    let n: usize = keyed("cells")?.trim().parse().map_err(|_| Error::format("restart: bad cell count"))?;
    let mut fields = Vec::with_capacity(3);
    for name in ["h", "u", "v"] {
        let values = keyed(name)?
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::format(format!("restart: bad value in '{name}'")))?;
        if values.len() != n {
            return Err(Error::format(format!("restart: '{name}' has {} values, expected {n}", values.len())));
        }
        fields.push(values);
    }
    let v = fields.pop().unwrap();
    let u = fields.pop().unwrap();
    let h = fields.pop().unwrap();
    Ok(HydraulicState { h, u, v, t })
}

pub fn save_restart(state: &HydraulicState, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_restart(state)).map_err(|e| Error::io(path, e))
}

pub fn load_restart(path: impl AsRef<Path>) -> Result<HydraulicState> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_restart(&text)
}
