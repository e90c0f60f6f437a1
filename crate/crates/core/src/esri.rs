//! ESRI ASCII grid reader and writer.
//!
//! Files are north-up: the first data row is the northern edge. In memory
//! the rows are flipped so that row 0 is the southern edge, which matches
//! the solver's `y` axis. Values are written with the shortest decimal
//! representation that parses back to the same `f64`, so a write/read
//! round trip is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const DEFAULT_NODATA: f64 = -9999.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AsciiGrid {
    pub ncols: usize,
    pub nrows: usize,
    pub xllcorner: f64,
    pub yllcorner: f64,
    pub cellsize: f64,
    pub nodata: f64,
    /// Row-major with row 0 at the south edge.
    pub data: Vec<f64>,
}

impl AsciiGrid {
    pub fn new(ncols: usize, nrows: usize, xllcorner: f64, yllcorner: f64, cellsize: f64) -> Self {
        AsciiGrid {
            ncols,
            nrows,
            xllcorner,
            yllcorner,
            cellsize,
            nodata: DEFAULT_NODATA,
            data: vec![0.0; ncols * nrows],
        }
    }

    pub fn get(&self, col: usize, row_from_south: usize) -> f64 {
        self.data[row_from_south * self.ncols + col]
    }

    pub fn is_nodata(&self, value: f64) -> bool {
        value == self.nodata || (value.is_nan() && self.nodata.is_nan())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.data.len() * 8 + 128);
        let _ = writeln!(out, "ncols {}", self.ncols);
        let _ = writeln!(out, "nrows {}", self.nrows);
        let _ = writeln!(out, "xllcorner {}", self.xllcorner);
        let _ = writeln!(out, "yllcorner {}", self.yllcorner);
        let _ = writeln!(out, "cellsize {}", self.cellsize);
        let _ = writeln!(out, "NODATA_value {}", self.nodata);
        for row in (0..self.nrows).rev() {
            let line = &self.data[row * self.ncols..(row + 1) * self.ncols];
            for (k, v) in line.iter().enumerate() {
                if k > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut ncols = None;
        let mut nrows = None;
        let mut xll = None;
        let mut yll = None;
        let mut cellsize = None;
        let mut nodata = None;

        let mut lines = text.lines().enumerate().peekable();
        while let Some((_, line)) = lines.peek() {
            let mut parts = line.split_whitespace();
            let Some(key) = parts.next() else {
                lines.next();
                continue;
            };
            if key.parse::<f64>().is_ok() {
                break;
            }
            let (lineno, line) = lines.next().unwrap();
            let value = parts
                .next()
                .ok_or_else(|| Error::format(format!("line {}: header key '{key}' has no value", lineno + 1)))?;
            let bad = |what: &str| Error::format(format!("line {}: invalid {what} '{value}'", lineno + 1));
            match key.to_ascii_lowercase().as_str() {
                "ncols" => ncols = Some(value.parse::<usize>().map_err(|_| bad("ncols"))?),
                "nrows" => nrows = Some(value.parse::<usize>().map_err(|_| bad("nrows"))?),
                "xllcorner" => xll = Some(value.parse::<f64>().map_err(|_| bad("xllcorner"))?),
                "yllcorner" => yll = Some(value.parse::<f64>().map_err(|_| bad("yllcorner"))?),
                "cellsize" => cellsize = Some(value.parse::<f64>().map_err(|_| bad("cellsize"))?),
                "nodata_value" => nodata = Some(value.parse::<f64>().map_err(|_| bad("NODATA_value"))?),
                _ => return Err(Error::format(format!("line {}: unknown header key '{key}' in {line:?}", lineno + 1))),
            }
        }

        let missing = |k: &str| Error::format(format!("missing header key '{k}'"));
        let ncols = ncols.ok_or_else(|| missing("ncols"))?;
        let nrows = nrows.ok_or_else(|| missing("nrows"))?;
        let xllcorner = xll.ok_or_else(|| missing("xllcorner"))?;
        let yllcorner = yll.ok_or_else(|| missing("yllcorner"))?;
        let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;
        let nodata = nodata.unwrap_or(DEFAULT_NODATA);
        if ncols == 0 || nrows == 0 {
            return Err(Error::format("ncols and nrows must be positive"));
        }
        if !(cellsize > 0.0) {
            return Err(Error::format("cellsize must be positive"));
        }

        let mut file_order = Vec::with_capacity(ncols * nrows);
        for (lineno, line) in lines {
            for tok in line.split_whitespace() {
                let v = tok
                    .parse::<f64>()
                    .map_err(|_| Error::format(format!("line {}: invalid value '{tok}'", lineno + 1)))?;
                file_order.push(v);
            }
        }
        if file_order.len() != ncols * nrows {
            return Err(Error::format(format!("expected {} values, found {}", ncols * nrows, file_order.len())));
        }

        let mut data = vec![0.0; ncols * nrows];
        for file_row in 0..nrows {
            let row = nrows - 1 - file_row;
            data[row * ncols..(row + 1) * ncols].copy_from_slice(&file_order[file_row * ncols..(file_row + 1) * ncols]);
        }
        Ok(AsciiGrid { ncols, nrows, xllcorner, yllcorner, cellsize, nodata, data })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str =
        "ncols 3\nnrows 2\nxllcorner 0\nyllcorner 10\ncellsize 5\nNODATA_value -9999\n1 2 3\n4 5 -9999\n";

    #[test]
    fn first_file_row_is_north() {
        let g = AsciiGrid::parse(SAMPLE).unwrap();
        assert_eq!(g.get(0, 1), 1.0);
        assert_eq!(g.get(0, 0), 4.0);
        assert!(g.is_nodata(g.get(2, 0)));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut g = AsciiGrid::new(4, 3, 1.5, -2.25, 0.1);
        for (k, v) in g.data.iter_mut().enumerate() {
            *v = (k as f64 * 0.1).sin() / 3.0;
        }
        let back = AsciiGrid::parse(&g.to_text()).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn missing_key_and_short_data_are_rejected() {
        let no_cellsize = SAMPLE.replace("cellsize 5\n", "");
        assert!(matches!(AsciiGrid::parse(&no_cellsize), Err(Error::Format(_))));
        let short = SAMPLE.replace("4 5 -9999\n", "4 5\n");
        assert!(matches!(AsciiGrid::parse(&short), Err(Error::Format(_))));
    }
}
