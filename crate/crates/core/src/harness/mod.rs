//! Identical- (or fraternal-) twin experiments on the synthetic reach:
//! truth generation, free runs, assimilation runs and their verification.

mod report;

pub use report::{compare_experiments, read_csi_csv, write_comparison_csv, write_report, write_truth, CsiRow, RankRow};

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::catchment::{make_synthetic_catchment, Catchment, FloodEvent, Hydrograph, SyntheticSpec};
use crate::enkf::{
    free_run, mean_of, run_assimilation, std_of, Controls, CyclePlan, EnsembleConfig, EnsembleRecord, HydraulicModel,
    Trajectory,
};
use crate::error::{Error, Result};
use crate::flood_extent::{
    contingency, csi, make_reference_maps, rasterize_depth, wet_pixel_count, BinaryFloodRaster, MapNoise,
    RasterGeometry, VirtualBox, WET_THRESHOLD,
};
use crate::forcing::{ControlPrior, ControlSet, ControlVector};
use crate::gauges::{diagnose_bias, station_metrics, BiasEstimate, GaugeSeries, StationMetrics, Window, GAUGE_CADENCE};
use crate::grid::{HydraulicState, PhysicsParams};
use crate::rng::stream;
use crate::swe::run_window;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FreeRun,
    #[default]
    Da,
}

/// Which simulation the bias is diagnosed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasSource {
    /// The model driven by the true controls, i.e. a perfectly calibrated model.
    #[default]
    TruthModel,
    /// The free run with prior-mean controls.
    FreeRun,
}

/// How the synthetic observations are made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthSpec {
    pub controls: ControlVector,
    /// Relative standard deviation of the gauge noise.
    pub tau: f64,
    /// Constant offset added to each station's observations, m.
    pub offsets: Vec<f64>,
    pub map_noise: MapNoise,
}

impl Default for TruthSpec {
    fn default() -> Self {
        TruthSpec {
            controls: ControlVector { ks: [15.5, 41.0, 40.5, 37.5], a: 1.1, b: 50.0, c: 900.0 },
            tau: 0.005,
            offsets: Vec::new(),
            map_noise: MapNoise::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub mode: Mode,
    pub bias_correction: bool,
    pub members: usize,
    pub tau: f64,
    pub lambda: f64,
    pub controls: ControlSet,
    pub window_hours: f64,
    pub shift_hours: f64,
    pub seed: u64,
    pub spinup_hours: f64,
    /// Generate the truth on a twice finer grid.
    pub fraternal: bool,
    pub bias_window_hours: [f64; 2],
    pub bias_source: BiasSource,
    pub overpass_hours: Vec<f64>,
    pub wet_threshold: f64,
    pub boxes: Vec<VirtualBox>,
    pub synthetic: SyntheticSpec,
    pub truth: TruthSpec,
    pub prior: ControlPrior,
    pub physics: PhysicsParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "DA2".into(),
            mode: Mode::Da,
            bias_correction: true,
            members: 24,
            tau: 0.15,
            lambda: 0.3,
            controls: ControlSet::All,
            window_hours: 12.0,
            shift_hours: 6.0,
            seed: 1,
            spinup_hours: 48.0,
            fraternal: false,
            bias_window_hours: [0.0, 24.0],
            bias_source: BiasSource::TruthModel,
            overpass_hours: overpasses_around(&SyntheticSpec::default().event),
            wet_threshold: WET_THRESHOLD,
            boxes: Vec::new(),
            synthetic: SyntheticSpec::default(),
            truth: TruthSpec::default(),
            prior: ControlPrior::default(),
            physics: PhysicsParams::default(),
        }
    }
}

/// Overpasses before the flood, on the rising limb, at the peak and on the
/// recession, in hours.
fn overpasses_around(event: &FloodEvent) -> Vec<f64> {
    let peak = event.peak_time() / 3600.0;
    vec![12.0, peak - 6.0, peak, peak + 12.0]
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// The four-day event with overpasses before and at the flood peak.
    pub fn short() -> Self {
        let synthetic = SyntheticSpec { event: FloodEvent::short(), ..Default::default() };
        ExperimentConfig { overpass_hours: overpasses_around(&synthetic.event), synthetic, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == Mode::Da {
            if self.members < 2 {
                return Err(Error::Config(format!("assimilation needs at least 2 members, got {}", self.members)));
            }
            if !(self.tau > 0.0 && self.tau < 1.0) {
                return Err(Error::Config(format!("tau {} outside (0, 1)", self.tau)));
            }
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if !(self.spinup_hours >= 0.0 && self.truth.tau >= 0.0 && self.wet_threshold > 0.0) {
            return Err(Error::Config("spin-up, truth noise and wet threshold must be non-negative".into()));
        }
        let [b0, b1] = self.bias_window_hours;
        if !(b1 > b0) {
            return Err(Error::Config("bias window is empty".into()));
        }
        let duration = self.synthetic.event.duration_hours;
        if self.overpass_hours.iter().any(|&h| !(0.0..=duration).contains(&h)) {
            return Err(Error::Config("overpass outside the event".into()));
        }
        self.truth.controls.validate()?;
        self.prior.validate()?;
        self.physics.validate()?;
        if self.mode == Mode::Da {
            self.plan()?;
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.synthetic.event.duration()
    }

    pub fn overpasses(&self) -> Vec<f64> {
        self.overpass_hours.iter().map(|h| h * 3600.0).collect()
    }

    pub fn plan(&self) -> Result<CyclePlan> {
        CyclePlan::new(0.0, self.duration(), self.window_hours * 3600.0, self.shift_hours * 3600.0)
    }

    pub fn bias_window(&self) -> Window {
        Window::new(self.bias_window_hours[0] * 3600.0, self.bias_window_hours[1] * 3600.0)
    }

    /// Background controls of the model (prior means, inflow pinned for the
    /// friction-only set).
    pub fn background(&self) -> ControlVector {
        self.controls.pin(self.prior.mean)
    }

    pub fn ensemble(&self, bias: Vec<f64>) -> EnsembleConfig {
        EnsembleConfig {
            ne: self.members,
            lambda: self.lambda,
            tau: self.tau,
            bias,
            control_set: self.controls,
            prior: self.prior,
            output_cadence: GAUGE_CADENCE,
            ..Default::default()
        }
    }

    /// A copy describing another member of the experiment matrix.
    pub fn variant(&self, name: &str, mode: Mode, bias_correction: bool, tau: f64, controls: ControlSet) -> Self {
        ExperimentConfig { name: name.into(), mode, bias_correction, tau, controls, ..self.clone() }
    }

    /// FR1, FR2 and DA1–DA5 analogues built on this configuration.
    pub fn matrix(&self) -> Vec<ExperimentConfig> {
        use ControlSet::{All, Friction};
        vec![
            self.variant("FR1", Mode::FreeRun, false, self.tau, All),
            self.variant("FR2", Mode::FreeRun, true, self.tau, All),
            self.variant("DA1", Mode::Da, false, 0.15, All),
            self.variant("DA2", Mode::Da, true, 0.15, All),
            self.variant("DA3", Mode::Da, true, 0.01, All),
            self.variant("DA4", Mode::Da, true, 0.99, All),
            self.variant("DA5", Mode::Da, true, 0.15, Friction),
        ]
    }

    /// Same truth and seeds, for checking that two configs share one scenario.
    fn scenario_key(&self) -> String {
        let mut c = self.clone();
        c.name.clear();
        c.mode = Mode::Da;
        c.bias_correction = false;
        c.members = 0;
        c.tau = 0.0;
        c.lambda = 0.0;
        c.controls = ControlSet::All;
        c.window_hours = 0.0;
        c.shift_hours = 0.0;
        c.to_toml()
    }
}

/// Water in the river-bed zones only, then `hours` of steady inflow at the
/// controls' initial discharge. The returned state has `t = 0`.
pub fn spin_up(catchment: &Catchment, x: &ControlVector, params: &PhysicsParams, hours: f64) -> Result<HydraulicState> {
    let grid = &catchment.grid;
    let mut state = HydraulicState::dry(grid);
    for (k, &z) in catchment.zoning.zone_id.iter().enumerate() {
        if z > 0 {
            state.h[k] = 1.0;
        }
    }
    let q0 = x.perturb(&catchment.boundary.hydrograph).at(0.0);
    let steady = catchment.boundary.with_hydrograph(Hydrograph::constant(q0)?);
    let friction = x.friction(&catchment.zoning);
    let (mut state, _) = run_window(state, hours * 3600.0, grid, &friction, params, Some(&steady), &[], &[])?;
    state.t = 0.0;
    Ok(state)
}

/// Model and truth set-up shared by every experiment on one twin scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    key: String,
    pub catchment: Catchment,
    pub truth_catchment: Catchment,
    pub initial: HydraulicState,
    pub truth: TruthArtifacts,
    pub observations: Vec<GaugeSeries>,
    pub bias: Vec<BiasEstimate>,
    pub raster: RasterGeometry,
}

#[derive(Debug, Clone)]
pub struct TruthArtifacts {
    pub initial: HydraulicState,
    pub trajectory: Trajectory,
    /// Noise-free gauge levels.
    pub levels: Vec<GaugeSeries>,
    pub reference_maps: Vec<BinaryFloodRaster>,
    pub overpasses: Vec<f64>,
}

/// Runs the truth over the event and builds the reference flood maps.
pub fn generate_truth(
    config: &ExperimentConfig,
    truth_catchment: &Catchment,
    raster: &RasterGeometry,
) -> Result<TruthArtifacts> {
    let x = config.truth.controls;
    let initial = spin_up(truth_catchment, &x, &config.physics, config.spinup_hours)?;
    let model = HydraulicModel::new(truth_catchment, config.physics);
    let overpasses = config.overpasses();
    let (trajectory, _) = free_run(&model, &initial, &x, 0.0, config.duration(), GAUGE_CADENCE, &overpasses)?;
    let levels = trajectory.gauge_series(&truth_catchment.station_names())?;
    let snaps: Vec<&[f64]> = trajectory.snapshots.iter().map(Vec::as_slice).collect();
    let reference_maps = make_reference_maps(
        &snaps,
        &truth_catchment.grid,
        raster,
        config.wet_threshold,
        config.truth.map_noise,
        &mut stream(config.seed, "reference_maps", &[]),
    )?;
    Ok(TruthArtifacts { initial, trajectory, levels, reference_maps, overpasses })
}

/// `level + offset + N(0, (τ level)²)` per sample.
pub fn add_observation_noise<R: Rng + ?Sized>(
    series: &[GaugeSeries],
    tau: f64,
    offsets: &[f64],
    rng: &mut R,
) -> Result<Vec<GaugeSeries>> {
    series
        .iter()
        .enumerate()
        .map(|(s, g)| {
            let d = offsets.get(s).copied().unwrap_or(0.0);
            let samples = g
                .samples()
                .iter()
                .map(|&(t, v)| {
                    let z: f64 = rng.sample(StandardNormal);
                    (t, v + d + tau * v.abs() * z)
                })
                .collect();
            GaugeSeries::new(g.station.clone(), samples)
        })
        .collect()
}

/// Builds the model and truth catchments, the truth run, the observations and
/// the diagnosed bias.
pub fn prepare_scenario(config: &ExperimentConfig) -> Result<Scenario> {
    config.validate()?;
    let catchment = make_synthetic_catchment(&config.synthetic)?;
    let truth_catchment = if config.fraternal {
        make_synthetic_catchment(&SyntheticSpec { refine: 2 * config.synthetic.refine, ..config.synthetic.clone() })?
    } else {
        catchment.clone()
    };
    let raster = RasterGeometry::from_grid(&catchment.grid);
    let truth = generate_truth(config, &truth_catchment, &raster)?;
    let observations = add_observation_noise(
        &truth.levels,
        config.truth.tau,
        &config.truth.offsets,
        &mut stream(config.seed, "truth_noise", &[]),
    )?;

    let initial = spin_up(&catchment, &config.background(), &config.physics, config.spinup_hours)?;
    let reference_run = match config.bias_source {
        BiasSource::TruthModel => truth.levels.clone(),
        BiasSource::FreeRun => {
            let model = HydraulicModel::new(&catchment, config.physics);
            let (traj, _) =
                free_run(&model, &initial, &config.background(), 0.0, config.duration(), GAUGE_CADENCE, &[])?;
            traj.gauge_series(&catchment.station_names())?
        }
    };
    let bias = reference_run
        .iter()
        .zip(&observations)
        .map(|(m, o)| diagnose_bias(m, o, config.bias_window()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Scenario { key: config.scenario_key(), catchment, truth_catchment, initial, truth, observations, bias, raster })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverpassScore {
    pub time: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    /// `None` when both maps are dry.
    pub csi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCount {
    pub time: f64,
    pub box_id: String,
    pub model: usize,
    pub reference: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlStep {
    pub cycle: usize,
    pub time: f64,
    pub mean: Controls,
    pub std: Controls,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// Gauge levels as compared with the observations (bias removed when
    /// correction is on).
    pub series: Vec<GaugeSeries>,
    pub metrics: Vec<StationMetrics>,
    pub csi: Vec<OverpassScore>,
    pub boxes: Vec<BoxCount>,
    pub maps: Vec<BinaryFloodRaster>,
    pub controls: Vec<ControlStep>,
    /// Per-cycle filter records with member states removed.
    pub cycles: Vec<EnsembleRecord<HydraulicState>>,
    pub bias: Vec<BiasEstimate>,
    pub dropped: Vec<(usize, usize)>,
    /// Wall-clock seconds; kept out of the deterministic outputs.
    pub elapsed: f64,
}

impl ExperimentReport {
    pub fn rmse(&self, station: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.station == station).map(|m| m.rmse)
    }

    pub fn mean_rmse(&self) -> f64 {
        self.metrics.iter().map(|m| m.rmse).sum::<f64>() / self.metrics.len().max(1) as f64
    }

    pub fn csi_at(&self, t: f64) -> Option<f64> {
        self.csi.iter().find(|s| (s.time - t).abs() < 1e-6).and_then(|s| s.csi)
    }
}

/// Runs one free run or assimilation experiment on a prepared scenario.
pub fn run_experiment(config: &ExperimentConfig, scenario: &Scenario) -> Result<ExperimentReport> {
    config.validate()?;
    if config.scenario_key() != scenario.key {
        return Err(Error::Config(format!("experiment '{}' does not match the prepared scenario", config.name)));
    }
    let started = Instant::now();
    let catchment = &scenario.catchment;
    let stations = catchment.station_names();
    let model = HydraulicModel::new(catchment, config.physics);
    let overpasses = config.overpasses();
    let bias: Vec<f64> = scenario.bias.iter().map(|b| b.bias).collect();
    let applied = if config.bias_correction { bias.clone() } else { vec![0.0; bias.len()] };

    let (trajectory, cycles, dropped) = match config.mode {
        Mode::FreeRun => {
            let (traj, _) = free_run(
                &model,
                &scenario.initial,
                &config.background(),
                0.0,
                config.duration(),
                GAUGE_CADENCE,
                &overpasses,
            )?;
            (traj, Vec::new(), Vec::new())
        }
        Mode::Da => {
            let out = run_assimilation(
                &model,
                &scenario.initial,
                &scenario.observations,
                &config.plan()?,
                &config.ensemble(applied.clone()),
                &overpasses,
                config.seed,
            )?;
            let mut records = out.records;
            for r in &mut records {
                r.end_states.clear();
            }
            (out.trajectory, records, out.dropped)
        }
    };

    let series: Vec<GaugeSeries> =
        trajectory.gauge_series(&stations)?.iter().zip(&applied).map(|(s, b)| s.minus(*b)).collect();
    let metrics = station_metrics(&config.name, &series, &scenario.observations, Window::new(0.0, config.duration()))?;

    let mut csi_rows = Vec::new();
    let mut boxes = Vec::new();
    let mut maps = Vec::new();
    for (t, reference) in scenario.truth.overpasses.iter().zip(&scenario.truth.reference_maps) {
        let depth = trajectory
            .snapshot_at(*t)
            .ok_or_else(|| Error::Domain(format!("no model snapshot at overpass t = {t}")))?;
        let map = rasterize_depth(depth, &catchment.grid, &scenario.raster, config.wet_threshold)?;
        let table = contingency(&map, reference)?;
        csi_rows.push(OverpassScore {
            time: *t,
            tp: table.tp,
            fp: table.fp,
            tn: table.tn,
            fn_: table.fn_,
            csi: csi(&table).ok(),
        });
        for b in &config.boxes {
            boxes.push(BoxCount {
                time: *t,
                box_id: b.id.clone(),
                model: wet_pixel_count(&map, b)?,
                reference: wet_pixel_count(reference, b)?,
            });
        }
        maps.push(map);
    }

    let controls = cycles
        .iter()
        .map(|r| ControlStep { cycle: r.cycle, time: r.window.1, mean: mean_of(&r.x_a), std: std_of(&r.x_a) })
        .collect();

    Ok(ExperimentReport {
        config: config.clone(),
        series,
        metrics,
        csi: csi_rows,
        boxes,
        maps,
        controls,
        cycles,
        bias: scenario.bias.clone(),
        dropped,
        elapsed: started.elapsed().as_secs_f64(),
    })
}

/// Prepares the scenario once and runs every experiment of the matrix.
pub fn run_batch(base: &ExperimentConfig) -> Result<(Scenario, Vec<ExperimentReport>)> {
    let scenario = prepare_scenario(base)?;
    let reports = base.matrix().iter().map(|c| run_experiment(c, &scenario)).collect::<Result<Vec<_>>>()?;
    Ok((scenario, reports))
}
