use maflow::continuity::{initialize, march, ContinuityConfig};
use maflow::field::{HermitianField, ScalarField};
use maflow::flow::FlowConfig;
use maflow::grid::PeriodicGrid;
use maflow::linalg::CMat;
use maflow::operator::{operator_value, ProblemData};
use std::f64::consts::{PI, TAU};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let nx: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(16);
    let full: bool = args.get(2).map(|s| s == "full").unwrap_or(false);

    let points = if full { vec![nx, nx, nx, nx] } else { vec![nx, 1, nx, 1] };
    let grid = PeriodicGrid::new(2, &points, &[1.0; 4]).unwrap();
    let omega = HermitianField::constant(&grid, &CMat::identity(2)).unwrap();
    let chi = omega.scale(2.0);
    let amp = 0.3 / (2.0 * PI * PI);
    let ustar = ScalarField::from_fn(&grid, move |x| {
        amp * ((TAU * x[0]).sin() + (TAU * x[2]).cos())
    });
    let probe =
        ProblemData::new(omega.clone(), chi.clone(), ScalarField::constant(&grid, 1.0), 1)
            .unwrap();
    let psi = operator_value(&probe, &ustar).unwrap().f.map(f64::exp);
    let data = ProblemData::new(omega, chi, psi, 1).unwrap();

    let cfg = ContinuityConfig {
        flow: FlowConfig {
            dt_safety: 1.0,
            t_max: 40.0,
            tol_osc: 1e-8,
            sample_every: 25,
            ..Default::default()
        },
        ..Default::default()
    };

    let t0 = Instant::now();
    let u_lower = ScalarField::zeros(&grid);
    let mut path = initialize(&data, &u_lower, &cfg).unwrap();
    println!(
        "init: delta={:.4} kappa={:.6} epsilon={:.4} b0={:+.6e} ({:.1}s)",
        path.delta,
        path.kappa,
        path.epsilon,
        path.b0,
        t0.elapsed().as_secs_f64()
    );
    let gap = path
        .psi0
        .zip_map(data.psi(), |a, b| a.ln() - b.ln())
        .unwrap();
    println!("ln(psi0/psi): inf={:.3e} sup={:.3e}", gap.inf(), gap.sup());

    march(&data, &cfg, &mut path).unwrap();
    println!("march done in {:.1}s total, {} nodes", t0.elapsed().as_secs_f64(), path.nodes.len());
    let lower = gap.inf() + path.b0 - 1e-6;
    for node in &path.nodes {
        let ok = node.b >= lower && node.b <= 1e-6;
        println!(
            "  s={:.4}  b={:+.6e}  residual={:.3e}  bound_ok={}",
            node.s, node.b, node.residual, ok
        );
    }
    println!(
        "b_lower_violation={:.3e} dominance_violation={:.3e}",
        path.b_lower_violation, path.target_dominance_violation
    );

    // Final node against the manufactured truth.
    let final_u = &path.nodes.last().unwrap().u;
    let tilde_star = maflow::flow::normalize_tilde(&ustar, &data).unwrap();
    let err = final_u.sub(&tilde_star).unwrap().max_abs();
    println!("|u_1 - tilde_u*|_inf = {:.3e}", err);
}
