//! First-order finite-volume shallow-water solver.
//!
//! Conserved variables `(h, hu, hv)` are advanced with explicit Euler and a
//! Rusanov (local Lax-Friedrichs) interface flux. Bed slope enters through
//! hydrostatic reconstruction at every face: the face bed is the higher of
//! the two cell beds, depths are cut to the free surface above it, and the
//! pressure deficit is returned to each cell as a source term. A flat free
//! surface at rest is therefore an exact discrete equilibrium, also across
//! wet/dry fronts.
//!
//! Strickler friction is applied after the flux update in semi-implicit
//! form, `hu / (1 + dt g |u| / (Ks^2 h^(4/3)))`, which is unconditionally
//! stable on thin floodplain layers.

use crate::catchment::{BoundaryDriver, BoundarySegment, GaugeStation, InflowSplit, Side};
use crate::error::{Error, Result};
use crate::grid::{FrictionField, GridSpec, HydraulicState, PhysicsParams};

/// Explicit Strickler friction acceleration `(Fx, Fy)` in m/s².
pub fn friction_acceleration(h: f64, u: f64, v: f64, ks: f64, g: f64) -> Result<(f64, f64)> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("friction needs positive depth, got {h}")));
    }
    if !(ks > 0.0) {
        return Err(Error::Domain(format!("Strickler coefficient must be positive, got {ks}")));
    }
    let coef = -g / (ks * ks) * (u * u + v * v).sqrt() / (h * h.cbrt());
    Ok((coef * u, coef * v))
}

/// Largest time step allowed by the CFL condition over the wet cells.
pub fn stable_dt(state: &HydraulicState, grid: &GridSpec, params: &PhysicsParams) -> Result<f64> {
    let mut max_speed = 0.0f64;
    let mut any_wet = false;
    for k in 0..grid.len() {
        let h = state.h[k];
        if h >= params.h_dry {
            any_wet = true;
            max_speed = max_speed.max(state.u[k].abs() + state.v[k].abs() + (params.g * h).sqrt());
        }
    }
    if !any_wet {
        return Err(Error::AllDry);
    }
    Ok(params.cfl * grid.dx.min(grid.dy) / max_speed)
}

/// One closed-domain step (walls on every edge).
pub fn step(
    state: &HydraulicState,
    grid: &GridSpec,
    friction: &FrictionField,
    params: &PhysicsParams,
    dt: f64,
) -> Result<HydraulicState> {
    let mut next = state.clone();
    Solver::new(grid, friction, *params, None)?.advance(&mut next, dt)?;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum FaceKind {
    Wall,
    /// Index into the upstream share vector.
    Inflow(usize),
    Outflow,
}

/// Rusanov flux in face-normal coordinates: `un` normal, `ut` tangential.
#[inline(always)]
fn rusanov(hl: f64, unl: f64, utl: f64, hr: f64, unr: f64, utr: f64, g: f64) -> [f64; 3] {
    let a = (unl.abs() + (g * hl).sqrt()).max(unr.abs() + (g * hr).sqrt());
    let (ql, qr) = (hl * unl, hr * unr);
    [
        0.5 * (ql + qr) - 0.5 * a * (hr - hl),
        0.5 * (ql * unl + 0.5 * g * hl * hl + qr * unr + 0.5 * g * hr * hr) - 0.5 * a * (qr - ql),
        0.5 * (ql * utl + qr * utr) - 0.5 * a * (hr * utr - hl * utl),
    ]
}

/// Well-balanced face flux between a left and right cell.
///
/// Returns the flux leaving the left cell and the flux entering the right
/// cell; they differ only in the hydrostatic pressure correction of the
/// normal momentum.
#[inline(always)]
fn interface(
    (hl, zl, unl, utl): (f64, f64, f64, f64),
    (hr, zr, unr, utr): (f64, f64, f64, f64),
    g: f64,
) -> ([f64; 3], [f64; 3]) {
    let zf = zl.max(zr);
    let hls = (hl + zl - zf).max(0.0);
    let hrs = (hr + zr - zf).max(0.0);
    let f = rusanov(hls, unl, utl, hrs, unr, utr, g);
    let left = [f[0], f[1] + 0.5 * g * (hl - hls) * (hl + hls), f[2]];
    let right = [f[0], f[1] + 0.5 * g * (hr - hrs) * (hr + hrs), f[2]];
    (left, right)
}

/// Reusable solver workspace bound to one grid, friction field and boundary.
pub struct Solver<'a> {
    grid: &'a GridSpec,
    friction: &'a FrictionField,
    params: PhysicsParams,
    boundary: Option<&'a BoundaryDriver>,
    faces: [Vec<FaceKind>; 4],
    upstream_cells: Vec<usize>,
    hu: Vec<f64>,
    hv: Vec<f64>,
    dh: Vec<f64>,
    dhu: Vec<f64>,
    dhv: Vec<f64>,
    weights: Vec<f64>,
    inflow: f64,
    outflow: f64,
}

const SIDES: [Side; 4] = [Side::West, Side::East, Side::South, Side::North];

fn side_slot(side: Side) -> usize {
    match side {
        Side::West => 0,
        Side::East => 1,
        Side::South => 2,
        Side::North => 3,
    }
}

impl<'a> Solver<'a> {
    pub fn new(
        grid: &'a GridSpec,
        friction: &'a FrictionField,
        params: PhysicsParams,
        boundary: Option<&'a BoundaryDriver>,
    ) -> Result<Self> {
        grid.validate()?;
        params.validate()?;
        if friction.ks.len() != grid.len() {
            return Err(Error::Shape("friction field does not match grid".into()));
        }
        let mut faces = SIDES.map(|s| vec![FaceKind::Wall; s.len(grid)]);
        let mut upstream_cells = Vec::new();
        if let Some(b) = boundary {
            b.validate(grid)?;
            let up: &BoundarySegment = &b.upstream;
            for (slot, &p) in up.positions.iter().enumerate() {
                faces[side_slot(up.side)][p] = FaceKind::Inflow(slot);
                upstream_cells.push(up.side.cell(grid, p));
            }
            for &p in &b.downstream.positions {
                faces[side_slot(b.downstream.side)][p] = FaceKind::Outflow;
            }
        }
        let n = grid.len();
        Ok(Solver {
            grid,
            friction,
            params,
            boundary,
            faces,
            upstream_cells,
            hu: vec![0.0; n],
            hv: vec![0.0; n],
            dh: vec![0.0; n],
            dhu: vec![0.0; n],
            dhv: vec![0.0; n],
            weights: Vec::new(),
            inflow: 0.0,
            outflow: 0.0,
        })
    }

    pub fn params(&self) -> &PhysicsParams {
        &self.params
    }

    /// Discharge entering through the upstream boundary during the last step, m³/s.
    pub fn last_inflow(&self) -> f64 {
        self.inflow
    }

    /// Discharge leaving through the downstream boundary during the last step, m³/s.
    pub fn last_outflow(&self) -> f64 {
        self.outflow
    }

    /// CFL step, falling back to a 1 m reference celerity while the domain is dry
    /// but water is being fed in.
    pub fn stable_dt(&self, state: &HydraulicState) -> Result<f64> {
        match stable_dt(state, self.grid, &self.params) {
            Err(Error::AllDry) if self.boundary.is_some() => {
                Ok(self.params.cfl * self.grid.dx.min(self.grid.dy) / self.params.g.sqrt())
            }
            other => other,
        }
    }

    /// Advances `state` in place by `dt`.
    pub fn advance(&mut self, state: &mut HydraulicState, dt: f64) -> Result<()> {
        let grid = self.grid;
        let (nx, ny) = (grid.nx, grid.ny);
        let g = self.params.g;
        let h_dry = self.params.h_dry;
        let z = &grid.bottom_elevation;
        let (h, u, v) = (&state.h, &state.u, &state.v);

        for k in 0..grid.len() {
            self.hu[k] = h[k] * u[k];
            self.hv[k] = h[k] * v[k];
        }
        self.dh.iter_mut().for_each(|x| *x = 0.0);
        self.dhu.iter_mut().for_each(|x| *x = 0.0);
        self.dhv.iter_mut().for_each(|x| *x = 0.0);

        let (dx, dy) = (grid.dx, grid.dy);
        let nu = self.params.nu_e;

        // x-faces between (i, j) and (i + 1, j); face length dy
        for j in 0..ny {
            for i in 0..nx.saturating_sub(1) {
                let l = j * nx + i;
                let r = l + 1;
                let (fl, fr) = interface((h[l], z[l], u[l], v[l]), (h[r], z[r], u[r], v[r]), g);
                self.dh[l] -= fl[0] * dy;
                self.dhu[l] -= fl[1] * dy;
                self.dhv[l] -= fl[2] * dy;
                self.dh[r] += fr[0] * dy;
                self.dhu[r] += fr[1] * dy;
                self.dhv[r] += fr[2] * dy;
                if nu > 0.0 && h[l] >= h_dry && h[r] >= h_dry {
                    let hf = 0.5 * (h[l] + h[r]) * nu / dx * dy;
                    let (du, dv) = (hf * (u[r] - u[l]), hf * (v[r] - v[l]));
                    self.dhu[l] += du;
                    self.dhv[l] += dv;
                    self.dhu[r] -= du;
                    self.dhv[r] -= dv;
                }
            }
        }
        // y-faces between (i, j) and (i, j + 1); face length dx
        for j in 0..ny.saturating_sub(1) {
            for i in 0..nx {
                let l = j * nx + i;
                let r = l + nx;
                let (fl, fr) = interface((h[l], z[l], v[l], u[l]), (h[r], z[r], v[r], u[r]), g);
                self.dh[l] -= fl[0] * dx;
                self.dhv[l] -= fl[1] * dx;
                self.dhu[l] -= fl[2] * dx;
                self.dh[r] += fr[0] * dx;
                self.dhv[r] += fr[1] * dx;
                self.dhu[r] += fr[2] * dx;
                if nu > 0.0 && h[l] >= h_dry && h[r] >= h_dry {
                    let hf = 0.5 * (h[l] + h[r]) * nu / dy * dx;
                    let (du, dv) = (hf * (u[r] - u[l]), hf * (v[r] - v[l]));
                    self.dhu[l] += du;
                    self.dhv[l] += dv;
                    self.dhu[r] -= du;
                    self.dhv[r] -= dv;
                }
            }
        }

        self.boundary_fluxes(state)?;

        let area = grid.cell_area();
        let scale = dt / area;
        for k in 0..grid.len() {
            let hk = (state.h[k] + scale * self.dh[k]).max(0.0);
            let mut qx = self.hu[k] + scale * self.dhu[k];
            let mut qy = self.hv[k] + scale * self.dhv[k];
            state.h[k] = hk;
            if hk >= h_dry {
                let mut uk = qx / hk;
                let mut vk = qy / hk;
                let hc = hk.max(h_dry);
                let ks = self.friction.ks[k];
                let speed = (uk * uk + vk * vk).sqrt();
                let damp = 1.0 + dt * g * speed / (ks * ks * hc * hc.cbrt());
                uk /= damp;
                vk /= damp;
                qx = uk;
                qy = vk;
            } else {
                qx = 0.0;
                qy = 0.0;
            }
            if !(hk.is_finite() && qx.is_finite() && qy.is_finite()) {
                return Err(Error::Instability {
                    time: state.t + dt,
                    detail: format!("non-finite state in cell ({}, {})", k % nx, k / nx),
                });
            }
            state.u[k] = qx;
            state.v[k] = qy;
        }
        state.t += dt;
        Ok(())
    }

    fn boundary_fluxes(&mut self, state: &HydraulicState) -> Result<()> {
        let grid = self.grid;
        let g = self.params.g;
        let h_dry = self.params.h_dry;
        let z = &grid.bottom_elevation;
        let (h, u, v) = (&state.h, &state.u, &state.v);

        // Upstream shares and downstream stage depend only on the current state.
        let mut inflow_q = 0.0;
        let mut stage = f64::NEG_INFINITY;
        if let Some(b) = self.boundary {
            inflow_q = b.hydrograph.at(state.t);
            let cells = &self.upstream_cells;
            self.weights.clear();
            let all_dry = cells.iter().all(|&k| h[k] < h_dry);
            match (b.split, all_dry) {
                (InflowSplit::Conveyance, false) => {
                    self.weights
                        .extend(cells.iter().map(|&k| if h[k] >= h_dry { h[k] * h[k].cbrt().powi(2) } else { 0.0 }))
                }
                _ => self.weights.extend(std::iter::repeat_n(1.0, cells.len())),
            }
            let total: f64 = self.weights.iter().sum();
            self.weights.iter_mut().for_each(|w| *w /= total);

            let side = b.downstream.side;
            let len = side.face_length(grid);
            let outward = matches!(side, Side::East | Side::North);
            let mut q_est = 0.0;
            for &p in &b.downstream.positions {
                let k = side.cell(grid, p);
                let un = match side {
                    Side::West | Side::East => u[k],
                    Side::South | Side::North => v[k],
                };
                let un = if outward { un } else { -un };
                q_est += (h[k] * un).max(0.0) * len;
            }
            stage = b.rating.invert_clamped(q_est);
        }

        self.inflow = 0.0;
        self.outflow = 0.0;
        for side in SIDES {
            let len = side.face_length(grid);
            // Cell sits right of the face on west/south edges, left on east/north.
            let cell_is_right = matches!(side, Side::West | Side::South);
            let normal_x = matches!(side, Side::West | Side::East);
            for p in 0..side.len(grid) {
                let kind = self.faces[side_slot(side)][p];
                let k = side.cell(grid, p);
                let (un, ut) = if normal_x { (u[k], v[k]) } else { (v[k], u[k]) };
                let flux = match kind {
                    FaceKind::Wall => {
                        let cell = (h[k], z[k], un, ut);
                        let ghost = (h[k], z[k], -un, ut);
                        if cell_is_right {
                            interface(ghost, cell, g).1
                        } else {
                            interface(cell, ghost, g).0
                        }
                    }
                    FaceKind::Inflow(slot) => {
                        let q = inflow_q * self.weights[slot] / len;
                        let hb = h[k].max(h_dry);
                        let ub = (q / hb).min((g * hb).sqrt());
                        let sign = if cell_is_right { 1.0 } else { -1.0 };
                        self.inflow += q * len;
                        [sign * q, q * ub + 0.5 * g * h[k] * h[k], 0.0]
                    }
                    FaceKind::Outflow => {
                        let hg = (stage - z[k]).max(0.0);
                        let cell = (h[k], z[k], un, ut);
                        let ghost = (hg, z[k], un, ut);
                        let f = if cell_is_right { interface(ghost, cell, g).1 } else { interface(cell, ghost, g).0 };
                        self.outflow += if cell_is_right { -f[0] } else { f[0] } * len;
                        f
                    }
                };
                let sign = if cell_is_right { 1.0 } else { -1.0 };
                self.dh[k] += sign * flux[0] * len;
                if normal_x {
                    self.dhu[k] += sign * flux[1] * len;
                    self.dhv[k] += sign * flux[2] * len;
                } else {
                    self.dhv[k] += sign * flux[1] * len;
                    self.dhu[k] += sign * flux[2] * len;
                }
            }
        }
        Ok(())
    }
}

/// Water levels at the gauges at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSample {
    pub time: f64,
    pub levels: Vec<f64>,
}

pub fn gauge_levels(state: &HydraulicState, grid: &GridSpec, gauges: &[GaugeStation]) -> Vec<f64> {
    gauges
        .iter()
        .map(|g| {
            let k = grid.idx(g.cell.0, g.cell.1);
            grid.bottom_elevation[k] + state.h[k] - g.datum
        })
        .collect()
}

/// Integrates from `state.t` to `t_end`, landing exactly on every requested
/// sample instant in `[state.t, t_end]` and calling `observe` there.
#[allow(clippy::too_many_arguments)]
pub fn run_window_with<F>(
    mut state: HydraulicState,
    t_end: f64,
    grid: &GridSpec,
    friction: &FrictionField,
    params: &PhysicsParams,
    boundary: Option<&BoundaryDriver>,
    sample_times: &[f64],
    mut observe: F,
) -> Result<HydraulicState>
where
    F: FnMut(f64, &HydraulicState),
{
    if !(t_end >= state.t) {
        return Err(Error::Domain(format!("window end {t_end} precedes state time {}", state.t)));
    }
    let mut times: Vec<f64> = sample_times.iter().copied().filter(|&s| s >= state.t && s <= t_end).collect();
    times.sort_by(|a, b| a.total_cmp(b));
    times.dedup();
    let mut next = 0;
    while next < times.len() && times[next] <= state.t {
        observe(times[next], &state);
        next += 1;
    }
    if t_end == state.t {
        return Ok(state);
    }

    let mut solver = Solver::new(grid, friction, *params, boundary)?;
    loop {
        let target = if next < times.len() { times[next].min(t_end) } else { t_end };
        let remaining = target - state.t;
        let mut dt = solver.stable_dt(&state)?;
        // Avoid a sliver step just before the target.
        let landing = dt >= remaining * (1.0 - 1e-9);
        if landing {
            dt = remaining;
        } else if dt > 0.5 * remaining {
            dt = 0.5 * remaining;
        }
        solver.advance(&mut state, dt)?;
        if landing {
            state.t = target;
        }
        while next < times.len() && times[next] <= state.t {
            observe(times[next], &state);
            next += 1;
        }
        if state.t >= t_end {
            return Ok(state);
        }
    }
}

/// Integrates to `t_end` and returns gauge levels at the requested instants.
#[allow(clippy::too_many_arguments)]
pub fn run_window(
    state: HydraulicState,
    t_end: f64,
    grid: &GridSpec,
    friction: &FrictionField,
    params: &PhysicsParams,
    boundary: Option<&BoundaryDriver>,
    gauges: &[GaugeStation],
    sample_times: &[f64],
) -> Result<(HydraulicState, Vec<LevelSample>)> {
    let mut samples = Vec::new();
    let end = run_window_with(state, t_end, grid, friction, params, boundary, sample_times, |t, s| {
        samples.push(LevelSample { time: t, levels: gauge_levels(s, grid, gauges) })
    })?;
    Ok((end, samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> PhysicsParams {
        PhysicsParams::default()
    }

    #[test]
    fn friction_hand_values() {
        assert_eq!(friction_acceleration(1.0, 0.0, 0.0, 40.0, 9.81).unwrap(), (0.0, 0.0));
        let (fx, fy) = friction_acceleration(1.0, 1.0, 0.0, 40.0, 9.81).unwrap();
        assert!((fx + 0.00613125).abs() < 1e-15);
        assert_eq!(fy, 0.0);
        let (fx, _) = friction_acceleration(1.0, -1.0, 0.0, 40.0, 9.81).unwrap();
        assert!((fx - 0.00613125).abs() < 1e-15);
        assert!(friction_acceleration(0.0, 1.0, 0.0, 40.0, 9.81).is_err());
        assert!(friction_acceleration(1.0, 1.0, 0.0, 0.0, 9.81).is_err());
    }

    #[test]
    fn friction_scaling() {
        let (a, _) = friction_acceleration(2.0, 1.0, 0.0, 30.0, 9.81).unwrap();
        let (b, _) = friction_acceleration(2.0, 2.0, 0.0, 30.0, 9.81).unwrap();
        assert!((b / a - 4.0).abs() < 1e-12);
        let (c, _) = friction_acceleration(16.0, 1.0, 0.0, 30.0, 9.81).unwrap();
        assert!((a / c - 8.0f64.powf(4.0 / 3.0)).abs() < 1e-9);
    }

    #[test]
    fn cfl_hand_values() {
        let grid = GridSpec::flat(5, 4, 10.0, 10.0).unwrap();
        let s = HydraulicState::lake_at_rest(&grid, 1.0);
        let p = PhysicsParams { cfl: 0.9, ..params() };
        let dt = stable_dt(&s, &grid, &p).unwrap();
        assert!((dt - 0.9 * 10.0 / 9.81f64.sqrt()).abs() < 1e-12);
        assert!((dt - 2.8734).abs() < 1e-4);

        let mut one = HydraulicState::dry(&grid);
        one.h[7] = 1.0;
        let p = PhysicsParams { cfl: 0.45, ..params() };
        assert!((stable_dt(&one, &grid, &p).unwrap() - 1.4367).abs() < 1e-4);
        assert!(matches!(stable_dt(&HydraulicState::dry(&grid), &grid, &p), Err(Error::AllDry)));
    }

    #[test]
    fn uniform_still_water_is_a_fixed_point() {
        let grid = GridSpec::flat(6, 5, 3.0, 3.0).unwrap();
        let fr = FrictionField::uniform(&grid, 30.0).unwrap();
        let s = HydraulicState::lake_at_rest(&grid, 2.0);
        let next = step(&s, &grid, &fr, &params(), 0.1).unwrap();
        assert_eq!(next.h, s.h);
        assert_eq!(next.u, s.u);
        assert_eq!(next.v, s.v);
    }

    #[test]
    fn lake_at_rest_over_bumps_and_dry_islands() {
        let (nx, ny) = (12, 9);
        let z: Vec<f64> = (0..nx * ny)
            .map(|k| {
                let (i, j) = ((k % nx) as f64, (k / nx) as f64);
                0.8 * (0.7 * i).sin() * (0.5 * j).cos() + 0.05 * i
            })
            .collect();
        let grid = GridSpec::new(nx, ny, 5.0, 5.0, 0.0, 0.0, z).unwrap();
        let fr = FrictionField::uniform(&grid, 25.0).unwrap();
        let s0 = HydraulicState::lake_at_rest(&grid, 0.6);
        assert!(s0.h.contains(&0.0));
        let mut s = s0.clone();
        for _ in 0..50 {
            let dt = stable_dt(&s, &grid, &params()).unwrap();
            let n = step(&s, &grid, &fr, &params(), dt).unwrap();
            for k in 0..grid.len() {
                assert!((n.h[k] - s.h[k]).abs() <= 1e-12);
            }
            s = n;
        }
    }

    #[test]
    fn closed_domain_conserves_mass_and_stays_positive() {
        let (nx, ny) = (20, 10);
        let z: Vec<f64> = (0..nx * ny).map(|k| 0.02 * (k % nx) as f64).collect();
        let grid = GridSpec::new(nx, ny, 2.0, 2.0, 0.0, 0.0, z).unwrap();
        let fr = FrictionField::uniform(&grid, 30.0).unwrap();
        let mut s = HydraulicState::dry(&grid);
        for j in 0..ny {
            for i in 0..5 {
                s.h[grid.idx(i, j)] = 1.0;
            }
        }
        let v0 = crate::grid::total_volume(&s, &grid);
        for _ in 0..500 {
            let dt = stable_dt(&s, &grid, &params()).unwrap();
            s = step(&s, &grid, &fr, &params(), dt).unwrap();
            assert!(s.h.iter().all(|&h| h >= 0.0));
        }
        let v1 = crate::grid::total_volume(&s, &grid);
        assert!(((v1 - v0) / v0).abs() < 1e-12);
        s.validate(&grid, &params()).unwrap();
    }

    #[test]
    fn zero_length_window_is_identity() {
        let grid = GridSpec::flat(3, 3, 1.0, 1.0).unwrap();
        let fr = FrictionField::uniform(&grid, 30.0).unwrap();
        let s = HydraulicState::lake_at_rest(&grid, 1.0);
        let (out, samples) = run_window(s.clone(), 0.0, &grid, &fr, &params(), None, &[], &[]).unwrap();
        assert_eq!(out, s);
        assert!(samples.is_empty());
    }

    #[test]
    fn window_lands_on_sample_times() {
        let grid = GridSpec::flat(8, 1, 1.0, 1.0).unwrap();
        let fr = FrictionField::uniform(&grid, 30.0).unwrap();
        let mut s = HydraulicState::lake_at_rest(&grid, 1.0);
        s.h[0] = 2.0;
        let gauges = [GaugeStation::new("g", (4, 0), 0.0)];
        let times = [0.0, 0.37, 1.0, 2.5];
        let (out, samples) = run_window(s, 2.5, &grid, &fr, &params(), None, &gauges, &times).unwrap();
        assert_eq!(out.t, 2.5);
        let got: Vec<f64> = samples.iter().map(|x| x.time).collect();
        assert_eq!(got, times);
    }
}
