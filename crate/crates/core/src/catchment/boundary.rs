use serde::{Deserialize, Serialize};

use super::{Hydrograph, RatingCurve};
use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Edge of the rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    West,
    East,
    South,
    North,
}

impl Side {
    /// Number of cells along this edge.
    pub fn len(self, grid: &GridSpec) -> usize {
        match self {
            Side::West | Side::East => grid.ny,
            Side::South | Side::North => grid.nx,
        }
    }

    /// Cell index of position `p` along the edge.
    pub fn cell(self, grid: &GridSpec, p: usize) -> usize {
        match self {
            Side::West => grid.idx(0, p),
            Side::East => grid.idx(grid.nx - 1, p),
            Side::South => grid.idx(p, 0),
            Side::North => grid.idx(p, grid.ny - 1),
        }
    }

    /// Face length of a boundary face on this edge.
    pub fn face_length(self, grid: &GridSpec) -> f64 {
        match self {
            Side::West | Side::East => grid.dy,
            Side::South | Side::North => grid.dx,
        }
    }
}

/// How the upstream discharge is shared among inflow cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InflowSplit {
    /// Proportional to `h^(5/3)`; uniform while every inflow cell is dry.
    #[default]
    Conveyance,
    /// Equal share for every inflow cell, wet or dry.
    Uniform,
}

/// A contiguous-or-not set of boundary faces on one edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySegment {
    pub side: Side,
    /// Positions along the edge (row index for west/east, column for south/north).
    pub positions: Vec<usize>,
}

impl BoundarySegment {
    pub fn whole(side: Side, grid: &GridSpec) -> Self {
        BoundarySegment { side, positions: (0..side.len(grid)).collect() }
    }
}

/// Upstream hydrograph and downstream rating curve; walls elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDriver {
    pub upstream: BoundarySegment,
    pub hydrograph: Hydrograph,
    pub split: InflowSplit,
    pub downstream: BoundarySegment,
    pub rating: RatingCurve,
}

impl BoundaryDriver {
    pub fn new(
        upstream: BoundarySegment,
        hydrograph: Hydrograph,
        split: InflowSplit,
        downstream: BoundarySegment,
        rating: RatingCurve,
    ) -> Self {
        BoundaryDriver { upstream, hydrograph, split, downstream, rating }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        for seg in [&self.upstream, &self.downstream] {
            let n = seg.side.len(grid);
            if seg.positions.is_empty() {
                return Err(Error::Config("boundary segment has no cells".into()));
            }
            if let Some(p) = seg.positions.iter().find(|&&p| p >= n) {
                return Err(Error::Config(format!("boundary position {p} outside edge of length {n}")));
            }
            let mut sorted = seg.positions.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != seg.positions.len() {
                return Err(Error::Config("duplicate boundary positions".into()));
            }
        }
        if self.upstream.side == self.downstream.side
            && self.upstream.positions.iter().any(|p| self.downstream.positions.contains(p))
        {
            return Err(Error::Config("upstream and downstream boundary cells overlap".into()));
        }
        self.rating.validate()
    }

    /// Same driver with a different upstream hydrograph.
    pub fn with_hydrograph(&self, hydrograph: Hydrograph) -> Self {
        BoundaryDriver { hydrograph, ..self.clone() }
    }
}
