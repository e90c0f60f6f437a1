use floodda::catchment::{make_synthetic_catchment, read_restart, write_restart, Hydrograph, SyntheticSpec};
use floodda::harness::spin_up;
use floodda::swe::{gauge_levels, run_window, Solver};
use floodda::{total_volume, ControlVector, PhysicsParams};

#[test]
fn steady_inflow_balances_storage_and_outflow() {
    let catchment = make_synthetic_catchment(&SyntheticSpec::default()).unwrap();
    let params = PhysicsParams::default();
    let x = ControlVector::default();
    let mut state = spin_up(&catchment, &x, &params, 6.0).unwrap();
    let boundary = catchment.boundary.with_hydrograph(Hydrograph::constant(400.0).unwrap());
    let friction = x.friction(&catchment.zoning);
    let mut solver = Solver::new(&catchment.grid, &friction, params, Some(&boundary)).unwrap();

    let v0 = total_volume(&state, &catchment.grid);
    let (mut v_in, mut v_out) = (0.0, 0.0);
    while state.t < 12.0 * 3600.0 {
        let dt = solver.stable_dt(&state).unwrap();
        solver.advance(&mut state, dt).unwrap();
        v_in += solver.last_inflow() * dt;
        v_out += solver.last_outflow() * dt;
    }
    let stored = total_volume(&state, &catchment.grid) - v0;
    let imbalance = (stored - (v_in - v_out)).abs() / v_in;
    assert!(imbalance <= 0.005, "imbalance {imbalance}");
    assert!((v_in / (12.0 * 3600.0) - 400.0).abs() < 4.0, "inflow {}", v_in / 43200.0);
}

#[test]
fn restart_continues_bit_for_bit() {
    let catchment = make_synthetic_catchment(&SyntheticSpec::default()).unwrap();
    let params = PhysicsParams::default();
    let x = ControlVector::default();
    let friction = x.friction(&catchment.zoning);
    let boundary = catchment.boundary.with_hydrograph(x.perturb(&catchment.boundary.hydrograph));
    let start = spin_up(&catchment, &x, &params, 2.0).unwrap();
    let gauges = &catchment.gauges;
    let run = |s, t, at: &[f64]| {
        run_window(s, t, &catchment.grid, &friction, &params, Some(&boundary), gauges, at).unwrap().0
    };

    // The straight run also stops at the restart instant so both see the same steps.
    let straight = run(start.clone(), 7200.0, &[3600.0]);
    let half = run(start, 3600.0, &[]);
    let resumed = run(read_restart(&write_restart(&half)).unwrap(), 7200.0, &[]);
    for (a, b) in straight.h.iter().zip(&resumed.h) {
        assert!((a - b).abs() <= 1e-12);
    }
    for (a, b) in straight.u.iter().zip(&resumed.u) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn gauge_cells_are_wet_under_base_flow() {
    let catchment = make_synthetic_catchment(&SyntheticSpec::default()).unwrap();
    let params = PhysicsParams::default();
    let state = spin_up(&catchment, &ControlVector::default(), &params, 48.0).unwrap();
    for (g, level) in catchment.gauges.iter().zip(gauge_levels(&state, &catchment.grid, &catchment.gauges)) {
        let k = catchment.grid.idx(g.cell.0, g.cell.1);
        assert!(state.h[k] > 0.3, "{} depth {}", g.name, state.h[k]);
        assert!(level > 0.3 && level < 1.2, "{} level {level}", g.name);
    }
}
