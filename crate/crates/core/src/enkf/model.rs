use nalgebra::{DMatrix, DVector};

use super::{EnsembleModel, MemberRun, WindowRequest};
use crate::catchment::{Catchment, Hydrograph};
use crate::error::{Error, Result};
use crate::forcing::{ControlVector, N_CONTROLS};
use crate::grid::{HydraulicState, PhysicsParams};
use crate::swe::{gauge_levels, run_window_with};

/// The shallow-water model over a catchment. Controls set the zone
/// friction values and perturb the base upstream hydrograph.
pub struct HydraulicModel<'a> {
    pub catchment: &'a Catchment,
    pub params: PhysicsParams,
    pub base_hydrograph: Hydrograph,
}

impl<'a> HydraulicModel<'a> {
    pub fn new(catchment: &'a Catchment, params: PhysicsParams) -> Self {
        HydraulicModel { catchment, params, base_hydrograph: catchment.boundary.hydrograph.clone() }
    }
}

fn is_at(list: &[f64], next: &mut usize, t: f64) -> bool {
    if *next < list.len() && (list[*next] - t).abs() < 1e-6 {
        *next += 1;
        true
    } else {
        false
    }
}

impl EnsembleModel for HydraulicModel<'_> {
    type State = HydraulicState;

    fn n_stations(&self) -> usize {
        self.catchment.gauges.len()
    }

    fn propagate(
        &self,
        start: &HydraulicState,
        x: &ControlVector,
        req: &WindowRequest,
    ) -> Result<MemberRun<HydraulicState>> {
        if (start.t - req.t_start).abs() > 1e-6 {
            return Err(Error::Domain(format!("member state at t = {} but window starts at {}", start.t, req.t_start)));
        }
        x.validate()?;
        let c = self.catchment;
        let friction = x.friction(&c.zoning);
        let boundary = c.boundary.with_hydrograph(x.perturb(&self.base_hydrograph));
        let mut all: Vec<f64> = req.sample_times.iter().chain(req.snapshot_times).copied().collect();
        all.push(req.restart_at);

        let (mut ns, mut nn) = (0, 0);
        let mut levels = Vec::with_capacity(req.sample_times.len());
        let mut snapshots = Vec::with_capacity(req.snapshot_times.len());
        let mut restart = None;
        let mut state = start.clone();
        state.t = req.t_start;
        let end =
            run_window_with(state, req.t_end, &c.grid, &friction, &self.params, Some(&boundary), &all, |t, s| {
                if is_at(req.sample_times, &mut ns, t) {
                    levels.push(gauge_levels(s, &c.grid, &c.gauges));
                }
                if is_at(req.snapshot_times, &mut nn, t) {
                    snapshots.push(s.h.clone());
                }
                if restart.is_none() && (t - req.restart_at).abs() < 1e-6 {
                    restart = Some(s.clone());
                }
            })?;
        if levels.len() != req.sample_times.len() || snapshots.len() != req.snapshot_times.len() {
            return Err(Error::Domain("requested instants fall outside the window".into()));
        }
        let restart = restart.unwrap_or_else(|| end.clone());
        Ok(MemberRun { levels, snapshots, restart, end })
    }
}

/// `y = H x` at every instant: a stateless linear observation of the controls.
pub struct LinearToyModel {
    pub h: DMatrix<f64>,
}

impl LinearToyModel {
    pub fn new(h: DMatrix<f64>) -> Result<Self> {
        if h.ncols() != N_CONTROLS {
            return Err(Error::Shape(format!("operator needs {N_CONTROLS} columns, got {}", h.ncols())));
        }
        Ok(LinearToyModel { h })
    }
}

impl EnsembleModel for LinearToyModel {
    type State = ();

    fn n_stations(&self) -> usize {
        self.h.nrows()
    }

    fn propagate(&self, _: &(), x: &ControlVector, req: &WindowRequest) -> Result<MemberRun<()>> {
        let y = &self.h * DVector::from_row_slice(&x.to_array());
        let row: Vec<f64> = y.iter().copied().collect();
        Ok(MemberRun {
            levels: vec![row; req.sample_times.len()],
            snapshots: vec![Vec::new(); req.snapshot_times.len()],
            restart: (),
            end: (),
        })
    }
}
