use maflow::field::{HermitianField, ScalarField};
use maflow::grid::PeriodicGrid;
use maflow::linalg::CMat;
use maflow::operator::{chi_u_into, rhs_from_x, ProblemData};
use maflow::spectral::SpectralOps;
use std::f64::consts::TAU;
use std::time::Instant;

fn main() {
    let nx = 16usize;
    let grid = PeriodicGrid::new(2, &[nx, nx, nx, nx], &[1.0; 4]).unwrap();
    let omega = HermitianField::constant(&grid, &CMat::identity(2)).unwrap();
    let chi = omega.scale(2.0);
    let psi = ScalarField::constant(&grid, 1.0);
    let data = ProblemData::new(omega, chi, psi, 1).unwrap();
    let ops = SpectralOps::new(&grid);
    let u = ScalarField::from_fn(&grid, |x| {
        0.01 * ((TAU * x[0]).sin() + (TAU * (x[1] + x[3])).cos())
    });

    let mut scratch = ops.scratch();
    let mut x = HermitianField::zeros(&grid);
    let mut f = ScalarField::zeros(&grid);

    let reps = 50;
    // Full Hessian + chi add.
    let t0 = Instant::now();
    for _ in 0..reps {
        chi_u_into(&data, &u, &mut scratch, &mut x).unwrap();
    }
    println!("chi_u_into      : {:.3} ms", 1e3 * t0.elapsed().as_secs_f64() / reps as f64);

    // Pointwise operator evaluation.
    let t0 = Instant::now();
    for _ in 0..reps {
        let _ = rhs_from_x(&data, &x, &mut f);
    }
    println!("rhs_from_x      : {:.3} ms", 1e3 * t0.elapsed().as_secs_f64() / reps as f64);

    // Hessian alone.
    let mut h = HermitianField::zeros(&grid);
    let t0 = Instant::now();
    for _ in 0..reps {
        ops.hessian_into(&u, &mut scratch, &mut h).unwrap();
    }
    println!("hessian_into    : {:.3} ms", 1e3 * t0.elapsed().as_secs_f64() / reps as f64);

    // sup/inf of a field.
    let t0 = Instant::now();
    let mut acc = 0.0;
    for _ in 0..reps {
        acc += f.sup() + f.inf();
    }
    println!("sup+inf         : {:.3} ms (acc {acc:.3})", 1e3 * t0.elapsed().as_secs_f64() / reps as f64);

    // Single full forward+inverse transform estimate via derivative.
    let t0 = Instant::now();
    for _ in 0..reps {
        let _ = ops.derivative(&u, 0, maflow::spectral::DerivOrder::First).unwrap();
    }
    println!("axis derivative : {:.3} ms", 1e3 * t0.elapsed().as_secs_f64() / reps as f64);
}
