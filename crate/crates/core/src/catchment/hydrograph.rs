use crate::error::{Error, Result};

/// Discharge time series, linearly interpolated, constant beyond the ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Hydrograph {
    times: Vec<f64>,
    flows: Vec<f64>,
}

impl Hydrograph {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        let (times, flows): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
        Self::from_parts(times, flows)
    }

    pub fn from_parts(times: Vec<f64>, flows: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != flows.len() {
            return Err(Error::Config("hydrograph needs at least one (t, Q) sample".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("hydrograph times must be strictly increasing".into()));
        }
        if let Some(q) = flows.iter().find(|q| !(**q >= 0.0 && q.is_finite())) {
            return Err(Error::Config(format!("hydrograph discharge must be finite and >= 0, got {q}")));
        }
        Ok(Hydrograph { times, flows })
    }

    pub fn constant(q: f64) -> Result<Self> {
        Self::new(vec![(0.0, q)])
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn flows(&self) -> &[f64] {
        &self.flows
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.flows.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Discharge at time `t`.
    pub fn at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.flows[0];
        }
        if t >= self.times[n - 1] {
            return self.flows[n - 1];
        }
        let k = self.times.partition_point(|&s| s <= t);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let (q0, q1) = (self.flows[k - 1], self.flows[k]);
        q0 + (q1 - q0) * (t - t0) / (t1 - t0)
    }

    pub fn peak(&self) -> f64 {
        self.flows.iter().copied().fold(0.0, f64::max)
    }
}

/// Free-function form of [`Hydrograph::at`].
pub fn inflow_at(hydro: &Hydrograph, t: f64) -> f64 {
    hydro.at(t)
}
