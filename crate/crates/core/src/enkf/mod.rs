//! Cycled stochastic ensemble Kalman filter over the control vector.
//!
//! Each cycle draws forecast controls, integrates every member over the
//! window, compares bias-corrected model levels against perturbed gauge
//! observations, updates the controls and re-integrates with the analysed
//! values. The analysed member states at the next window's start seed the
//! following cycle.

mod model;
mod output;

pub use model::{HydraulicModel, LinearToyModel};
pub use output::{write_analysis_csv, write_controls_csv, write_diagnostics_csv};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcing::{sample_theta, ControlPrior, ControlSet, ControlVector, N_CONTROLS};
use crate::gauges::{GaugeSeries, GAUGE_CADENCE};
use crate::rng::stream;

pub type Controls = [f64; N_CONTROLS];

/// Overlapping assimilation windows `[t_start, t_start + window_length]`,
/// one every `shift` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclePlan {
    pub window_length: f64,
    pub shift: f64,
    pub windows: Vec<(f64, f64)>,
}

impl CyclePlan {
    /// Windows starting at `t0, t0 + shift, ...` that end no later than `t1`.
    pub fn new(t0: f64, t1: f64, window_length: f64, shift: f64) -> Result<Self> {
        if !(window_length > 0.0 && shift > 0.0 && shift <= window_length) {
            return Err(Error::Config(format!(
                "need 0 < shift <= window length, got shift {shift}, length {window_length}"
            )));
        }
        let mut windows = Vec::new();
        let mut k = 0;
        loop {
            let s = t0 + k as f64 * shift;
            if s + window_length > t1 + 1e-6 {
                break;
            }
            windows.push((s, s + window_length));
            k += 1;
        }
        if windows.is_empty() {
            return Err(Error::Config(format!("span [{t0}, {t1}] is shorter than one window")));
        }
        Ok(CyclePlan { window_length, shift, windows })
    }

    /// 12 h windows every 6 h.
    pub fn standard(t0: f64, t1: f64) -> Result<Self> {
        Self::new(t0, t1, 43_200.0, 21_600.0)
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Instant at which cycle `k`'s analysed states are handed to cycle `k + 1`
    /// (its own end for the final cycle).
    pub fn handover(&self, k: usize) -> f64 {
        self.windows.get(k + 1).map_or(self.windows[k].1, |w| w.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub ne: usize,
    /// Weight of the previous analysis anomalies in the forecast dispersion.
    pub lambda: f64,
    /// Observation error standard deviation as a fraction of the observed level.
    pub tau: f64,
    /// Per-station model minus observation bias, m (empty means none).
    pub bias: Vec<f64>,
    pub control_set: ControlSet,
    /// Background means and dispersion standard deviations.
    pub prior: ControlPrior,
    /// Lower bound on the observation error standard deviation, m.
    pub sigma_floor: f64,
    /// Spacing of the stitched analysed trajectory, s.
    pub output_cadence: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            ne: 24,
            lambda: 0.3,
            tau: 0.15,
            bias: Vec::new(),
            control_set: ControlSet::All,
            prior: ControlPrior::default(),
            sigma_floor: 1e-3,
            output_cadence: GAUGE_CADENCE,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ne < 2 {
            return Err(Error::Config(format!("ensemble needs at least 2 members, got {}", self.ne)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config(format!("tau {} outside (0, 1)", self.tau)));
        }
        if !(self.sigma_floor > 0.0 && self.output_cadence > 0.0) {
            return Err(Error::Config("sigma floor and output cadence must be positive".into()));
        }
        self.prior.validate()
    }

    fn bias_of(&self, station: usize) -> f64 {
        self.bias.get(station).copied().unwrap_or(0.0)
    }
}

/// Observations inside one window, flattened to `(station, time, level)` entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservationBatch {
    pub station: Vec<usize>,
    pub time: Vec<f64>,
    pub value: Vec<f64>,
}

impl ObservationBatch {
    /// Entries with `t0 < t <= t1`. Series index is the station index.
    pub fn from_series(obs: &[GaugeSeries], t0: f64, t1: f64) -> Self {
        let mut b = ObservationBatch::default();
        for (s, series) in obs.iter().enumerate() {
            for &(t, v) in series.samples() {
                if t > t0 && t <= t1 {
                    b.station.push(s);
                    b.time.push(t);
                    b.value.push(v);
                }
            }
        }
        b
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    /// `max(τ |y|, floor)` per entry.
    pub fn sigma(&self, tau: f64, floor: f64) -> Vec<f64> {
        self.value.iter().map(|y| (tau * y.abs()).max(floor)).collect()
    }
}

/// Everything the filter saw and produced in one cycle. Matrices hold one
/// member per column.
#[derive(Debug, Clone)]
pub struct EnsembleRecord<S> {
    pub cycle: usize,
    pub window: (f64, f64),
    /// Original indices of the members that took part.
    pub members: Vec<usize>,
    pub x_f: Vec<Controls>,
    pub x_a: Vec<Controls>,
    /// Bias-corrected model equivalents of the observations.
    pub y_f: DMatrix<f64>,
    pub y_o: Vec<f64>,
    pub gain: DMatrix<f64>,
    pub end_states: Vec<S>,
    /// Gauge RMSE of the forecast and analysed ensemble means against the
    /// observations of the window (NaN without observations).
    pub forecast_rmse: f64,
    pub analysis_rmse: f64,
    pub failed: Vec<usize>,
}

impl<S> EnsembleRecord<S> {
    pub fn n_obs(&self) -> usize {
        self.y_o.len()
    }

    pub fn forecast_mean(&self) -> Controls {
        mean_of(&self.x_f)
    }

    pub fn analysis_mean(&self) -> Controls {
        mean_of(&self.x_a)
    }

    /// Mean and standard deviation of the innovations `y_o - mean(y_f)`.
    pub fn innovation_stats(&self) -> (f64, f64) {
        let m = self.y_o.len();
        if m == 0 {
            return (f64::NAN, f64::NAN);
        }
        let d: Vec<f64> = (0..m).map(|j| self.y_o[j] - self.y_f.row(j).mean()).collect();
        let mean = d.iter().sum::<f64>() / m as f64;
        let std = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m as f64).sqrt();
        (mean, std)
    }
}

pub fn mean_of(xs: &[Controls]) -> Controls {
    let n = xs.len().max(1) as f64;
    std::array::from_fn(|p| xs.iter().map(|x| x[p]).sum::<f64>() / n)
}

pub fn std_of(xs: &[Controls]) -> Controls {
    let m = mean_of(xs);
    let n = xs.len().max(1) as f64;
    std::array::from_fn(|p| (xs.iter().map(|x| (x[p] - m[p]).powi(2)).sum::<f64>() / n).sqrt())
}

/// Forecast controls for cycle `k` (1-based): `x0 + θ_i` for the first cycle,
/// `mean + λ (x_a,i - mean) + (1 - λ) θ_i` afterwards.
pub fn forecast_controls(
    k: usize,
    x0: &Controls,
    prev_analysis: Option<&[Controls]>,
    theta: &[Controls],
    lambda: f64,
) -> Result<Vec<Controls>> {
    if k <= 1 {
        return Ok(theta.iter().map(|t| std::array::from_fn(|p| x0[p] + t[p])).collect());
    }
    let prev = prev_analysis.ok_or_else(|| Error::Shape("cycle > 1 needs the previous analysis".into()))?;
    if prev.len() != theta.len() {
        return Err(Error::Shape(format!("{} analysis members but {} θ draws", prev.len(), theta.len())));
    }
    let m = mean_of(prev);
    Ok(prev
        .iter()
        .zip(theta)
        // Same as m + λ(x - m) + (1 - λ)θ, arranged so λ = 0 and λ = 1 are exact.
        .map(|(x, t)| std::array::from_fn(|p| lambda * x[p] + (1.0 - lambda) * (m[p] + t[p])))
        .collect())
}

/// Subtracts each entry's station bias.
pub fn apply_bias(y_f: &[f64], station: &[usize], bias: &[f64]) -> Vec<f64> {
    y_f.iter().zip(station).map(|(y, &s)| y - bias.get(s).copied().unwrap_or(0.0)).collect()
}

/// One perturbed copy `y_o + ε`, `ε_j ~ N(0, σ_j²)`.
pub fn perturb_observations<R: Rng + ?Sized>(y_o: &[f64], sigma: &[f64], rng: &mut R) -> Vec<f64> {
    y_o.iter()
        .zip(sigma)
        .map(|(y, s)| {
            let z: f64 = rng.sample(StandardNormal);
            y + s * z
        })
        .collect()
}

fn anomalies(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mean: DVector<f64> = m.column_mean();
    let mut a = m.clone();
    for mut c in a.column_iter_mut() {
        c -= &mean;
    }
    a
}

/// `K = P_xy (P_yy + R)^-1` with `P_xy = X Yᵀ / N_e`, `P_yy = Y Yᵀ / N_e`.
/// `x_f` is `n × N_e`, `y_f` is `m × N_e`, `r_diag` holds the `m` variances.
pub fn kalman_gain(x_f: &DMatrix<f64>, y_f: &DMatrix<f64>, r_diag: &[f64]) -> Result<DMatrix<f64>> {
    let ne = x_f.ncols();
    if ne < 2 || y_f.ncols() != ne || r_diag.len() != y_f.nrows() {
        return Err(Error::Shape(format!(
            "gain inputs: x {}x{}, y {}x{}, R {}",
            x_f.nrows(),
            ne,
            y_f.nrows(),
            y_f.ncols(),
            r_diag.len()
        )));
    }
    let x = anomalies(x_f);
    let y = anomalies(y_f);
    let n = ne as f64;
    let pxy = &x * y.transpose() / n;
    let mut s = &y * y.transpose() / n;
    for (j, r) in r_diag.iter().enumerate() {
        s[(j, j)] += r;
    }
    let chol =
        s.clone().cholesky().ok_or_else(|| Error::Singular("innovation covariance is not positive definite".into()))?;
    let mut kt = chol.solve(&pxy.transpose());
    // One step of iterative refinement.
    let residual = pxy.transpose() - &s * &kt;
    kt += chol.solve(&residual);
    let k = kt.transpose();
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("gain has non-finite entries".into()));
    }
    Ok(k)
}

/// `x_a,i = x_f,i + K (y_o,i - y_f,i)`, one member per column. No clamping.
pub fn analysis_update(
    x_f: &DMatrix<f64>,
    y_o: &DMatrix<f64>,
    y_f: &DMatrix<f64>,
    gain: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if y_o.shape() != y_f.shape()
        || gain.ncols() != y_f.nrows()
        || gain.nrows() != x_f.nrows()
        || x_f.ncols() != y_f.ncols()
    {
        return Err(Error::Shape("analysis update inputs are not aligned".into()));
    }
    Ok(x_f + gain * (y_o - y_f))
}

/// What a member integration must deliver.
pub struct WindowRequest<'a> {
    pub t_start: f64,
    pub t_end: f64,
    /// Sorted instants at which gauge levels are returned.
    pub sample_times: &'a [f64],
    /// Sorted instants at which a field snapshot is returned.
    pub snapshot_times: &'a [f64],
    /// Instant whose state is returned as `restart`.
    pub restart_at: f64,
}

pub struct MemberRun<S> {
    /// Gauge levels (one entry per station) at each sample time.
    pub levels: Vec<Vec<f64>>,
    pub snapshots: Vec<Vec<f64>>,
    pub restart: S,
    pub end: S,
}

/// A forward model the filter can drive.
pub trait EnsembleModel: Sync {
    type State: Clone + Send + Sync;

    fn n_stations(&self) -> usize;

    fn propagate(&self, start: &Self::State, x: &ControlVector, req: &WindowRequest) -> Result<MemberRun<Self::State>>;
}

/// Ensemble-mean output of a run over time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Mean gauge levels per time.
    pub levels: Vec<Vec<f64>>,
    pub snapshot_times: Vec<f64>,
    /// Mean field per snapshot time.
    pub snapshots: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Per-station series, named by `stations`.
    pub fn gauge_series(&self, stations: &[String]) -> Result<Vec<GaugeSeries>> {
        stations
            .iter()
            .enumerate()
            .map(|(s, name)| {
                GaugeSeries::new(name.clone(), self.times.iter().zip(&self.levels).map(|(&t, l)| (t, l[s])).collect())
            })
            .collect()
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&[f64]> {
        self.snapshot_times.iter().position(|&s| (s - t).abs() < 1e-6).map(|k| self.snapshots[k].as_slice())
    }
}

pub struct AssimilationOutput<S> {
    pub records: Vec<EnsembleRecord<S>>,
    pub trajectory: Trajectory,
    /// Members dropped after a failed integration, with the cycle it happened in.
    pub dropped: Vec<(usize, usize)>,
}

fn merged_times(a: impl IntoIterator<Item = f64>, b: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = a.into_iter().chain(b).collect();
    v.sort_by(|x, y| x.total_cmp(y));
    v.dedup_by(|x, y| (*x - *y).abs() < 1e-6);
    v
}

fn cadence_times(t0: f64, t1: f64, origin: f64, cadence: f64) -> Vec<f64> {
    let first = ((t0 - origin) / cadence - 1e-9).ceil() as i64;
    let last = ((t1 - origin) / cadence + 1e-9).floor() as i64;
    (first..=last).map(|j| origin + j as f64 * cadence).collect()
}

fn index_of(times: &[f64], t: f64) -> usize {
    times.iter().position(|&s| (s - t).abs() < 1e-6).expect("time is in the sample set")
}

fn ensemble_mean(rows: impl Iterator<Item = Vec<f64>>) -> Vec<f64> {
    let mut acc: Vec<f64> = Vec::new();
    let mut n = 0.0;
    for r in rows {
        if acc.is_empty() {
            acc = vec![0.0; r.len()];
        }
        for (a, v) in acc.iter_mut().zip(&r) {
            *a += v;
        }
        n += 1.0;
    }
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

fn rmse_vs(y_o: &[f64], mean: &[f64]) -> f64 {
    if y_o.is_empty() {
        return f64::NAN;
    }
    (y_o.iter().zip(mean).map(|(o, m)| (o - m).powi(2)).sum::<f64>() / y_o.len() as f64).sqrt()
}

/// Runs every cycle of `plan`. `observations` holds one series per model
/// station, in station order. `snapshot_times` are instants (e.g. satellite
/// overpasses) at which ensemble-mean fields are kept.
pub fn run_assimilation<M: EnsembleModel>(
    model: &M,
    initial: &M::State,
    observations: &[GaugeSeries],
    plan: &CyclePlan,
    config: &EnsembleConfig,
    snapshot_times: &[f64],
    seed: u64,
) -> Result<AssimilationOutput<M::State>> {
    config.validate()?;
    if observations.len() != model.n_stations() {
        return Err(Error::Shape(format!(
            "{} observation series for {} model stations",
            observations.len(),
            model.n_stations()
        )));
    }
    let ne = config.ne;
    let set = config.control_set;
    let theta_prior = config.prior.restricted(set);
    let x0 = set.pin(config.prior.mean).to_array();
    let origin = plan.windows[0].0;

    let mut members: Vec<usize> = (0..ne).collect();
    let mut states: Vec<M::State> = vec![initial.clone(); ne];
    let mut prev_analysis: Option<Vec<Controls>> = None;
    let mut records = Vec::with_capacity(plan.len());
    let mut trajectory = Trajectory::default();
    let mut dropped = Vec::new();
    let abort_limit = ne / 4;

    for (k, &(t_start, t_end)) in plan.windows.iter().enumerate() {
        let handover = plan.handover(k);
        let last = k + 1 == plan.len();
        let batch = ObservationBatch::from_series(observations, t_start, t_end);
        let out_times = cadence_times(t_start, t_end, origin, config.output_cadence);
        let sample_times = merged_times(out_times.iter().copied(), batch.time.iter().copied());
        let snaps: Vec<f64> = snapshot_times.iter().copied().filter(|&s| s >= t_start && s <= t_end).collect();
        let req =
            WindowRequest { t_start, t_end, sample_times: &sample_times, snapshot_times: &snaps, restart_at: handover };
        let obs_index: Vec<usize> = batch.time.iter().map(|&t| index_of(&sample_times, t)).collect();

        let theta: Vec<Controls> = members
            .iter()
            .map(|&i| sample_theta(&theta_prior, &mut stream(seed, "theta", &[k as u64, i as u64])))
            .collect();
        let x_f: Vec<Controls> = forecast_controls(k + 1, &x0, prev_analysis.as_deref(), &theta, config.lambda)?
            .into_iter()
            .map(|x| set.pin(ControlVector::from_array(x).clamped()).to_array())
            .collect();

        let mut failed = Vec::new();
        let run_all = |xs: &[Controls], states: &[M::State]| -> Vec<Result<MemberRun<M::State>>> {
            xs.par_iter()
                .zip(states.par_iter())
                .map(|(x, s)| model.propagate(s, &ControlVector::from_array(*x), &req))
                .collect()
        };
        let split = |results: Vec<Result<MemberRun<M::State>>>, failed: &mut Vec<usize>, members: &[usize]| {
            let mut ok = Vec::with_capacity(results.len());
            let mut keep = Vec::with_capacity(results.len());
            for (pos, r) in results.into_iter().enumerate() {
                match r {
                    Ok(run) => {
                        ok.push(run);
                        keep.push(pos);
                    }
                    Err(_) => failed.push(members[pos]),
                }
            }
            (ok, keep)
        };
        let abort_if_needed = |failed: &[usize], dropped: &[(usize, usize)]| -> Result<()> {
            if dropped.len() + failed.len() > abort_limit {
                return Err(Error::CycleAborted { cycle: k + 1, failed: dropped.len() + failed.len(), total: ne });
            }
            Ok(())
        };

        let (forecast, keep) = split(run_all(&x_f, &states), &mut failed, &members);
        abort_if_needed(&failed, &dropped)?;
        let mut members_k: Vec<usize> = keep.iter().map(|&p| members[p]).collect();
        let states_k: Vec<M::State> = keep.iter().map(|&p| states[p].clone()).collect();
        let mut x_f_k: Vec<Controls> = keep.iter().map(|&p| x_f[p]).collect();

        let equivalents = |runs: &[MemberRun<M::State>]| -> DMatrix<f64> {
            let m = batch.len();
            DMatrix::from_fn(m, runs.len(), |j, c| {
                runs[c].levels[obs_index[j]][batch.station[j]] - config.bias_of(batch.station[j])
            })
        };
        let y_f = equivalents(&forecast);
        let forecast_rmse = rmse_vs(&batch.value, &(0..batch.len()).map(|j| y_f.row(j).mean()).collect::<Vec<_>>());

        let (x_a, gain, analysed) = if batch.is_empty() {
            (x_f_k.clone(), DMatrix::zeros(N_CONTROLS, 0), forecast)
        } else {
            let sigma = batch.sigma(config.tau, config.sigma_floor);
            let r: Vec<f64> = sigma.iter().map(|s| s * s).collect();
            let xf_mat = DMatrix::from_fn(N_CONTROLS, x_f_k.len(), |p, c| x_f_k[c][p]);
            let gain = kalman_gain(&xf_mat, &y_f, &r)?;
            let mut y_o_pert = DMatrix::zeros(batch.len(), members_k.len());
            for (c, &i) in members_k.iter().enumerate() {
                let draw = perturb_observations(&batch.value, &sigma, &mut stream(seed, "obs", &[k as u64, i as u64]));
                y_o_pert.set_column(c, &DVector::from_vec(draw));
            }
            let xa_mat = analysis_update(&xf_mat, &y_o_pert, &y_f, &gain)?;
            let x_a: Vec<Controls> = (0..members_k.len())
                .map(|c| {
                    let x: Controls = std::array::from_fn(|p| xa_mat[(p, c)]);
                    set.pin(ControlVector::from_array(x).clamped()).to_array()
                })
                .collect();
            let (analysed, keep2) = split(run_all(&x_a, &states_k), &mut failed, &members_k);
            abort_if_needed(&failed, &dropped)?;
            let x_a = keep2.iter().map(|&p| x_a[p]).collect();
            members_k = keep2.iter().map(|&p| members_k[p]).collect();
            x_f_k = keep2.iter().map(|&p| x_f_k[p]).collect();
            (x_a, gain, analysed)
        };

        let y_a = equivalents(&analysed);
        let analysis_rmse = rmse_vs(&batch.value, &(0..batch.len()).map(|j| y_a.row(j).mean()).collect::<Vec<_>>());

        for (t_idx, &t) in sample_times.iter().enumerate() {
            let owned = if last { t >= t_start } else { t >= t_start && t < handover };
            if owned && out_times.iter().any(|&o| (o - t).abs() < 1e-6) {
                trajectory.times.push(t);
                trajectory.levels.push(ensemble_mean(analysed.iter().map(|r| r.levels[t_idx].clone())));
            }
        }
        for (s_idx, &t) in snaps.iter().enumerate() {
            let owned = if last { t >= t_start } else { t >= t_start && t < handover };
            if owned {
                trajectory.snapshot_times.push(t);
                trajectory.snapshots.push(ensemble_mean(analysed.iter().map(|r| r.snapshots[s_idx].clone())));
            }
        }

        for &f in &failed {
            dropped.push((f, k + 1));
        }
        states = analysed.iter().map(|r| r.restart.clone()).collect();
        let end_states = analysed.into_iter().map(|r| r.end).collect();
        members = members_k.clone();
        prev_analysis = Some(x_a.clone());

        records.push(EnsembleRecord {
            cycle: k + 1,
            window: (t_start, t_end),
            members: members_k,
            x_f: x_f_k,
            x_a,
            y_f,
            y_o: batch.value.clone(),
            gain,
            end_states,
            forecast_rmse,
            analysis_rmse,
            failed,
        });
    }
    Ok(AssimilationOutput { records, trajectory, dropped })
}

/// Single integration over `[t0, t1]` with fixed controls, sampled at the
/// output cadence.
pub fn free_run<M: EnsembleModel>(
    model: &M,
    initial: &M::State,
    x: &ControlVector,
    t0: f64,
    t1: f64,
    cadence: f64,
    snapshot_times: &[f64],
) -> Result<(Trajectory, M::State)> {
    let times = cadence_times(t0, t1, t0, cadence);
    let snaps: Vec<f64> = snapshot_times.iter().copied().filter(|&s| s >= t0 && s <= t1).collect();
    let req = WindowRequest { t_start: t0, t_end: t1, sample_times: &times, snapshot_times: &snaps, restart_at: t1 };
    let run = model.propagate(initial, x, &req)?;
    Ok((Trajectory { times, levels: run.levels, snapshot_times: snaps, snapshots: run.snapshots }, run.end))
}


#[cfg(test)]
mod properties {
    use super::*;
    use crate::gauges::{diagnose_bias, Window};
    use proptest::prelude::*;
    use rand::Rng;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn metres_to_centimetres_leaves_analysis_unchanged(
            xs in prop::collection::vec(-3.0f64..3.0, 15),
            ys in prop::collection::vec(0.5f64..3.0, 10),
            noise in prop::collection::vec(-0.2f64..0.2, 10),
            r in prop::collection::vec(1e-3f64..0.1, 2),
        ) {
            let x = DMatrix::from_row_slice(3, 5, &xs);
            let y = DMatrix::from_row_slice(2, 5, &ys);
            let yo = &y + DMatrix::from_row_slice(2, 5, &noise);
            let xa = analysis_update(&x, &yo, &y, &kalman_gain(&x, &y, &r).unwrap()).unwrap();
            let r100: Vec<f64> = r.iter().map(|v| v * 1e4).collect();
            let (y100, yo100) = (&y * 100.0, &yo * 100.0);
            let xa100 = analysis_update(&x, &yo100, &y100, &kalman_gain(&x, &y100, &r100).unwrap()).unwrap();
            prop_assert!((&xa - &xa100).abs().max() <= 1e-9 * (1.0 + xa.abs().max()));
        }
    }

    fn toy_run(seed: u64) -> AssimilationOutput<()> {
        let h = DMatrix::from_fn(2, N_CONTROLS, |s, p| 0.01 * (1 + s + p) as f64);
        let model = super::model::LinearToyModel::new(h).unwrap();
        let obs: Vec<GaugeSeries> = (0..2)
            .map(|s| {
                GaugeSeries::new(format!("g{s}"), (1..=16).map(|k| (k as f64 * 900.0, 2.0 + 0.1 * s as f64)).collect())
                    .unwrap()
            })
            .collect();
        let plan = CyclePlan::new(0.0, 14_400.0, 7_200.0, 3_600.0).unwrap();
        let cfg = EnsembleConfig { ne: 8, ..Default::default() };
        run_assimilation(&model, &(), &obs, &plan, &cfg, &[], seed).unwrap()
    }

    #[test]
    fn assimilation_is_a_pure_function_of_its_inputs() {
        let (a, b) = (toy_run(5), toy_run(5));
        assert_eq!(a.trajectory, b.trajectory);
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.x_f, rb.x_f);
            assert_eq!(ra.x_a, rb.x_a);
        }
        assert_ne!(toy_run(6).records[0].x_a, a.records[0].x_a);
    }

    /// A model offset by a constant, corrected with the bias diagnosed over
    /// one quasi-stationary window, gives unbiased innovations over the next.
    #[test]
    fn diagnosed_bias_removes_the_offset() {
        let (sigma, offset) = (0.02, 0.37);
        let mut rng = stream(3, "bias", &[]);
        let times: Vec<f64> = (0..480).map(|k| k as f64 * 900.0).collect();
        let level = |t: f64| 2.0 + 1e-3 * (t / 43_200.0).sin();
        let model = GaugeSeries::new("g", times.iter().map(|&t| (t, level(t) + offset)).collect()).unwrap();
        let obs = GaugeSeries::new(
            "g",
            times.iter().map(|&t| (t, level(t) + sigma * rng.sample::<f64, _>(StandardNormal))).collect(),
        )
        .unwrap();
        let split = 384.0 * 900.0;
        let d = diagnose_bias(&model, &obs, Window::new(0.0, split)).unwrap().bias;
        let held_out: Vec<(f64, f64)> = model.in_window(Window::new(split, f64::INFINITY)).collect();
        let corrected = apply_bias(&held_out.iter().map(|s| s.1).collect::<Vec<_>>(), &vec![0; held_out.len()], &[d]);
        let o: Vec<f64> = obs.in_window(Window::new(split, f64::INFINITY)).map(|s| s.1).collect();
        let n = o.len() as f64;
        let mean = o.iter().zip(&corrected).map(|(o, m)| o - m).sum::<f64>() / n;
        assert!(mean.abs() <= 2.0 * sigma / n.sqrt(), "innovation mean {mean}");
    }
}
