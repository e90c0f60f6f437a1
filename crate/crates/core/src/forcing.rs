//! Uncertain inputs: the seven-parameter control vector, its Gaussian prior,
//! and the multiplicative / additive / time-shift inflow perturbation.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::catchment::{FrictionZoning, Hydrograph, ZONE_COUNT};
use crate::error::{Error, Result};
use crate::grid::FrictionField;

pub const N_CONTROLS: usize = 7;
pub const CONTROL_NAMES: [&str; N_CONTROLS] = ["ks0", "ks1", "ks2", "ks3", "a", "b", "c"];

/// Lower bound applied to sampled and analysed Strickler values, m^(1/3)/s.
pub const KS_FLOOR: f64 = 1.0;
/// Lower bound applied to the inflow multiplier.
pub const A_FLOOR: f64 = 0.01;

/// Zone friction values plus inflow perturbation `Q'(t) = a Q(t - c) + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlVector {
    pub ks: [f64; ZONE_COUNT],
    pub a: f64,
    /// Additive discharge error, m³/s.
    pub b: f64,
    /// Time shift, s.
    pub c: f64,
}

impl Default for ControlVector {
    fn default() -> Self {
        ControlVector { ks: [17.0, 45.0, 38.0, 40.0], a: 1.0, b: 0.0, c: 0.0 }
    }
}

impl ControlVector {
    pub fn to_array(&self) -> [f64; N_CONTROLS] {
        [self.ks[0], self.ks[1], self.ks[2], self.ks[3], self.a, self.b, self.c]
    }

    pub fn from_array(x: [f64; N_CONTROLS]) -> Self {
        ControlVector { ks: [x[0], x[1], x[2], x[3]], a: x[4], b: x[5], c: x[6] }
    }

    /// Applies the validity floors. Values above the floors are untouched.
    pub fn clamped(mut self) -> Self {
        for k in &mut self.ks {
            *k = k.max(KS_FLOOR);
        }
        self.a = self.a.max(A_FLOOR);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let x = self.to_array();
        if x.iter().any(|v| !v.is_finite()) || self.ks.iter().any(|&k| k <= 0.0) || self.a <= 0.0 {
            return Err(Error::Domain(format!("invalid control vector {x:?}")));
        }
        Ok(())
    }

    pub fn friction(&self, zoning: &FrictionZoning) -> FrictionField {
        zoning.field_with(&self.ks)
    }

    pub fn perturb(&self, hydro: &Hydrograph) -> Hydrograph {
        perturb_hydrograph(hydro, self.a, self.b, self.c)
    }
}

/// Independent Gaussian prior per control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPrior {
    pub mean: ControlVector,
    /// Standard deviations, stored in the same layout as the means.
    pub std: ControlVector,
}

impl Default for ControlPrior {
    fn default() -> Self {
        ControlPrior {
            mean: ControlVector::default(),
            std: ControlVector { ks: [0.85, 2.25, 1.9, 2.0], a: 0.06, b: 100.0, c: 900.0 },
        }
    }
}

impl ControlPrior {
    pub fn validate(&self) -> Result<()> {
        if self.std.to_array().iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::Config("prior standard deviations must be finite and >= 0".into()));
        }
        self.mean.validate()
    }

    /// Same prior with the inflow parameters pinned at their means.
    pub fn restricted(&self, set: ControlSet) -> Self {
        let mut std = self.std;
        if set == ControlSet::Friction {
            std.a = 0.0;
            std.b = 0.0;
            std.c = 0.0;
        }
        ControlPrior { mean: self.mean, std }
    }
}

/// Which controls the filter is allowed to update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlSet {
    #[default]
    All,
    /// Zone friction values only; inflow held at `(a, b, c) = (1, 0, 0)`.
    Friction,
}

impl ControlSet {
    pub fn active(self) -> [bool; N_CONTROLS] {
        match self {
            ControlSet::All => [true; N_CONTROLS],
            ControlSet::Friction => [true, true, true, true, false, false, false],
        }
    }

    /// Pins inactive controls at their identity values.
    pub fn pin(self, x: ControlVector) -> ControlVector {
        match self {
            ControlSet::All => x,
            ControlSet::Friction => ControlVector { a: 1.0, b: 0.0, c: 0.0, ..x },
        }
    }
}

impl std::str::FromStr for ControlSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(ControlSet::All),
            "friction" => Ok(ControlSet::Friction),
            _ => Err(Error::Config(format!("unknown control set '{s}' (expected all|friction)"))),
        }
    }
}

/// `Q'(t) = max(0, a Q(t - c) + b)`.
///
/// Sample times move by `c`. Where the unclamped series crosses zero between
/// samples, the crossing is inserted so the result is exact under linear
/// interpolation.
pub fn perturb_hydrograph(hydro: &Hydrograph, a: f64, b: f64, c: f64) -> Hydrograph {
    let raw: Vec<(f64, f64)> = hydro.samples().map(|(t, q)| (t + c, a * q + b)).collect();
    let mut out = Vec::with_capacity(raw.len() + 2);
    for (k, &(t, q)) in raw.iter().enumerate() {
        if k > 0 {
            let (t0, q0) = raw[k - 1];
            if (q0 < 0.0 && q > 0.0) || (q0 > 0.0 && q < 0.0) {
                let tz = t0 + (t - t0) * q0 / (q0 - q);
                if tz > t0 && tz < t {
                    out.push((tz, 0.0));
                }
            }
        }
        out.push((t, q.max(0.0)));
    }
    Hydrograph::new(out).expect("shifted samples stay ordered and non-negative")
}

/// One draw from the prior, floored to valid values.
pub fn sample_control<R: Rng + ?Sized>(prior: &ControlPrior, rng: &mut R) -> ControlVector {
    let theta = sample_theta(prior, rng);
    let m = prior.mean.to_array();
    ControlVector::from_array(std::array::from_fn(|i| m[i] + theta[i])).clamped()
}

/// Zero-mean Gaussian perturbation with the prior's standard deviations.
pub fn sample_theta<R: Rng + ?Sized>(prior: &ControlPrior, rng: &mut R) -> [f64; N_CONTROLS] {
    let s = prior.std.to_array();
    std::array::from_fn(|i| {
        let z: f64 = rng.sample(StandardNormal);
        s[i] * z
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn ramp() -> Hydrograph {
        Hydrograph::new(vec![(0.0, 0.0), (3600.0, 3600.0)]).unwrap()
    }

    #[test]
    fn identity_parameters() {
        let h = Hydrograph::new(vec![(0.0, 5.0), (10.0, 7.0), (30.0, 1.0)]).unwrap();
        assert_eq!(perturb_hydrograph(&h, 1.0, 0.0, 0.0), h);
    }

    #[test]
    fn hand_value() {
        let p = perturb_hydrograph(&ramp(), 1.1, 50.0, 900.0);
        assert!((p.at(3600.0) - 3020.0).abs() < 1e-9);
    }

    #[test]
    fn negative_discharge_clamped() {
        let h = Hydrograph::constant(10.0).unwrap();
        let p = perturb_hydrograph(&h, 0.5, -20.0, 0.0);
        for t in [-100.0, 0.0, 1e6] {
            assert_eq!(p.at(t), 0.0);
        }
    }

    #[test]
    fn zero_crossing_is_exact() {
        let p = perturb_hydrograph(&ramp(), 1.0, -1800.0, 0.0);
        for t in [0.0, 900.0, 1800.0, 2000.0, 2700.0, 3600.0] {
            assert!((p.at(t) - (t - 1800.0).max(0.0)).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn degenerate_prior_gives_means() {
        let prior = ControlPrior { std: ControlVector::from_array([0.0; 7]), ..Default::default() };
        let mut rng = stream(3, "test", &[]);
        assert_eq!(sample_control(&prior, &mut rng).to_array(), [17.0, 45.0, 38.0, 40.0, 1.0, 0.0, 0.0]);
        assert_eq!(sample_theta(&prior, &mut rng), [0.0; 7]);
    }

    #[test]
    fn ks1_confidence_interval() {
        let prior = ControlPrior::default();
        let mut rng = stream(11, "test", &[]);
        let n = 100_000;
        let inside = (0..n).filter(|_| (sample_control(&prior, &mut rng).ks[1] - 45.0).abs() <= 4.41).count();
        let frac = inside as f64 / n as f64;
        assert!((frac - 0.95).abs() < 0.003, "{frac}");
    }

    #[test]
    fn a_moments() {
        let prior = ControlPrior::default();
        let mut rng = stream(12, "test", &[]);
        let xs: Vec<f64> = (0..100_000).map(|_| sample_control(&prior, &mut rng).a).collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let s = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
        assert!((m - 1.0).abs() < 0.001, "{m}");
        assert!((s - 0.06).abs() < 0.002, "{s}");
    }

    #[test]
    fn theta_b_std_and_determinism() {
        let prior = ControlPrior::default();
        let mut rng = stream(13, "test", &[]);
        let bs: Vec<f64> = (0..100_000).map(|_| sample_theta(&prior, &mut rng)[5]).collect();
        let s = (bs.iter().map(|x| x * x).sum::<f64>() / bs.len() as f64).sqrt();
        assert!((s - 100.0).abs() < 2.0, "{s}");
        let one = sample_theta(&prior, &mut stream(1, "theta", &[]));
        assert_eq!(one, sample_theta(&prior, &mut stream(1, "theta", &[])));
        assert_ne!(one, sample_theta(&prior, &mut stream(2, "theta", &[])));
    }

    #[test]
    fn friction_set_pins_inflow() {
        let x = ControlVector { a: 1.3, b: 40.0, c: -20.0, ..Default::default() };
        let p = ControlSet::Friction.pin(x);
        assert_eq!((p.a, p.b, p.c), (1.0, 0.0, 0.0));
        assert_eq!(p.ks, x.ks);
        assert_eq!(ControlSet::All.pin(x), x);
        assert_eq!("friction".parse::<ControlSet>().unwrap(), ControlSet::Friction);
        assert!("some".parse::<ControlSet>().is_err());
    }

    proptest! {
        #[test]
        fn composition(
            a1 in 0.5f64..1.5, b1 in 0.0f64..100.0, c1 in -900.0f64..900.0,
            a2 in 0.5f64..1.5, b2 in 0.0f64..100.0, c2 in -900.0f64..900.0,
            t in -2000.0f64..6000.0,
        ) {
            let h = Hydrograph::new(vec![(0.0, 100.0), (1800.0, 400.0), (3600.0, 250.0)]).unwrap();
            let twice = perturb_hydrograph(&perturb_hydrograph(&h, a1, b1, c1), a2, b2, c2);
            let once = perturb_hydrograph(&h, a1 * a2, a2 * b1 + b2, c1 + c2);
            prop_assert!((twice.at(t) - once.at(t)).abs() < 1e-9 * (1.0 + once.at(t)));
        }

        #[test]
        fn perturbation_matches_definition(a in 0.2f64..2.0, b in -300.0f64..300.0, c in -3000.0f64..3000.0, t in -5000.0f64..9000.0) {
            let h = Hydrograph::new(vec![(0.0, 100.0), (1800.0, 400.0), (3600.0, 250.0)]).unwrap();
            let p = perturb_hydrograph(&h, a, b, c);
            let expect = (a * h.at(t - c) + b).max(0.0);
            prop_assert!((p.at(t) - expect).abs() < 1e-9 * (1.0 + expect));
        }
    }
}
