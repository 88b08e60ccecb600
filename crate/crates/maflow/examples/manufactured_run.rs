use maflow::field::{HermitianField, ScalarField};
use maflow::flow::{run, FlowConfig};
use maflow::grid::PeriodicGrid;
use maflow::linalg::CMat;
use maflow::operator::{operator_value, ProblemData};
use std::f64::consts::{PI, TAU};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let nx: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(16);
    let full: bool = args.get(2).map(|s| s == "full").unwrap_or(false);
    let safety: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.5);

    let points = if full { vec![nx, nx, nx, nx] } else { vec![nx, 1, nx, 1] };
    let grid = PeriodicGrid::new(2, &points, &[1.0; 4]).unwrap();
    println!("grid {:?} = {} points", points, grid.total_points());

    let omega = HermitianField::constant(&grid, &CMat::identity(2)).unwrap();
    let chi = omega.scale(2.0);
    let amp = 0.3 / (2.0 * PI * PI);
    let ustar = ScalarField::from_fn(&grid, move |x| {
        amp * ((TAU * x[0]).sin() + (TAU * x[2]).cos())
    });
    let probe = ProblemData::new(
        omega.clone(),
        chi.clone(),
        ScalarField::constant(&grid, 1.0),
        1,
    )
    .unwrap();
    let psi = operator_value(&probe, &ustar).unwrap().f.map(f64::exp);
    let data = ProblemData::new(omega, chi, psi, 1).unwrap();

    let cfg = FlowConfig {
        dt_safety: safety,
        t_max: 40.0,
        tol_osc: 1e-8,
        sample_every: 25,
        collect_harnack: true,
        ..Default::default()
    };
    let t0 = Instant::now();
    let traj = run(&data, &cfg, None).unwrap();
    let wall = t0.elapsed().as_secs_f64();
    let last = traj.rows.last().unwrap();
    println!(
        "termination {:?} t={:.3} steps={} wall={:.1}s per-step={:.3}ms",
        traj.termination,
        traj.final_state.t,
        traj.accepted_steps,
        wall,
        1e3 * wall / traj.accepted_steps as f64
    );
    println!("final osc_F = {:.3e}, b_est = {:.3e}", last.osc_f, last.b_estimate);
    println!(
        "max-principle slack: sup {:.3e}, inf {:.3e}; rejected {}",
        traj.sup_f_slack, traj.inf_f_slack, traj.rejected_steps
    );

    // Distance to the manufactured solution.
    let tilde_final = maflow::flow::normalize_tilde(&traj.final_state.u, &data).unwrap();
    let tilde_star = maflow::flow::normalize_tilde(&ustar, &data).unwrap();
    let err = tilde_final.sub(&tilde_star).unwrap().max_abs();
    println!("|tilde_u_inf - tilde_u*|_inf = {:.3e}", err);
}
