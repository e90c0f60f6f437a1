use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stage–discharge relation used at the downstream boundary.
///
/// The stage argument is a free-surface elevation in the same datum as the
/// grid's bottom elevation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RatingCurve {
    /// `Q = alpha * (h - h0)^beta` above `h0`, zero below.
    PowerLaw { alpha: f64, h0: f64, beta: f64 },
    /// Piecewise-linear `(h, Q)` table; `Q` is zero at and below the first stage.
    Table { points: Vec<(f64, f64)> },
}

impl RatingCurve {
    pub fn power_law(alpha: f64, h0: f64, beta: f64) -> Result<Self> {
        let c = RatingCurve::PowerLaw { alpha, h0, beta };
        c.validate()?;
        Ok(c)
    }

    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        let c = RatingCurve::Table { points };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RatingCurve::PowerLaw { alpha, h0, beta } => {
                if !(*alpha > 0.0 && *beta > 0.0 && h0.is_finite()) {
                    return Err(Error::Config(format!(
                        "power-law rating needs alpha > 0, beta > 0, finite h0 (got {alpha}, {beta}, {h0})"
                    )));
                }
            }
            RatingCurve::Table { points } => {
                if points.len() < 2 {
                    return Err(Error::Config("rating table needs at least two points".into()));
                }
                if points[0].1 != 0.0 {
                    return Err(Error::Config("rating table must start at zero discharge".into()));
                }
                for w in points.windows(2) {
                    let ((h_a, q_a), (h_b, q_b)) = (w[0], w[1]);
                    if !(h_b > h_a) || !(q_b > q_a) {
                        return Err(Error::Config(
                            "rating table stages and discharges must be strictly increasing".into(),
                        ));
                    }
                }
                if points.iter().any(|(h, q)| !h.is_finite() || !q.is_finite()) {
                    return Err(Error::Config("rating table values must be finite".into()));
                }
            }
        }
        Ok(())
    }

    /// Stage at which the discharge starts.
    pub fn datum(&self) -> f64 {
        match self {
            RatingCurve::PowerLaw { h0, .. } => *h0,
            RatingCurve::Table { points } => points[0].0,
        }
    }

    /// Largest discharge the curve can be inverted for.
    pub fn max_discharge(&self) -> f64 {
        match self {
            RatingCurve::PowerLaw { .. } => f64::INFINITY,
            RatingCurve::Table { points } => points[points.len() - 1].1,
        }
    }

    /// Discharge at stage `h`. Tables extrapolate linearly above the last point.
    pub fn eval(&self, h: f64) -> f64 {
        match self {
            RatingCurve::PowerLaw { alpha, h0, beta } => {
                if h > *h0 {
                    alpha * (h - h0).powf(*beta)
                } else {
                    0.0
                }
            }
            RatingCurve::Table { points } => {
                if h <= points[0].0 {
                    return 0.0;
                }
                let k = points.partition_point(|p| p.0 < h).clamp(1, points.len() - 1);
                let (h_a, q_a) = points[k - 1];
                let (h_b, q_b) = points[k];
                q_a + (q_b - q_a) * (h - h_a) / (h_b - h_a)
            }
        }
    }

    /// Stage producing discharge `q`.
    pub fn invert(&self, q: f64) -> Result<f64> {
        if !(q >= 0.0) {
            return Err(Error::Domain(format!("discharge must be non-negative, got {q}")));
        }
        match self {
            RatingCurve::PowerLaw { alpha, h0, beta } => {
                if q == 0.0 {
                    Ok(*h0)
                } else {
                    Ok(h0 + (q / alpha).powf(1.0 / beta))
                }
            }
            RatingCurve::Table { points } => {
                let max = self.max_discharge();
                if q > max {
                    return Err(Error::OutOfRange { value: q, max });
                }
                if q == 0.0 {
                    return Ok(points[0].0);
                }
                let k = points.partition_point(|p| p.1 < q).clamp(1, points.len() - 1);
                let (h_a, q_a) = points[k - 1];
                let (h_b, q_b) = points[k];
                Ok(h_a + (h_b - h_a) * (q - q_a) / (q_b - q_a))
            }
        }
    }

    /// Like [`invert`](Self::invert) but saturating at the top of a table.
    pub fn invert_clamped(&self, q: f64) -> f64 {
        let q = q.max(0.0).min(self.max_discharge());
        self.invert(q).unwrap_or_else(|_| self.datum())
    }
}
