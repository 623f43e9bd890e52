//! The deformed Hermitian-Yang-Mills equation through its reduced form.

use formeq::dhym::{dhym_residuals, phase_in_range, DhymInstance};
use formeq::hermitian::HermitianMatrix;
use formeq::solver::{continuity_solve, Grid, SolveOptions};
use std::f64::consts::PI;

fn main() -> formeq::Result<()> {
    let rho = HermitianMatrix::identity(2);
    for c in [1.0, 1.5, 3.0] {
        let inst = DhymInstance::from_classes(rho.scale(c), rho.clone())?;
        println!("omega0 = {c} rho: theta = {:.6}, in range {}", inst.theta, phase_in_range(inst.theta, 2));
    }
    let inst = DhymInstance::from_classes(rho.clone(), rho.clone())?;
    let grid = Grid::new(2, 8)?;
    let p = inst.torus_problem(grid.clone())?;
    let start = grid.sample(|x| 0.02 * (2.0 * PI * (x[0] + x[3])).sin() + 0.01 * (2.0 * PI * x[2]).cos());
    let out = continuity_solve(&p, &SolveOptions::default(), Some(&start))?;
    let res = inst.residual_fields(&grid, &out.u)?;
    let worst = res.iter().map(|r| r.angle.abs()).fold(0.0, f64::max);
    println!("theta = pi/2 solve from a perturbed start: {:?}, sup |angle residual| = {worst:.3e}", out.trace.status);

    let omega = HermitianMatrix::from_real(2, &[2.0, 0.5, 0.5, 1.0])?;
    let r = dhym_residuals(&omega, &rho, 1.0)?;
    println!("pointwise residuals at theta = 1: direct {:.6} reduced {:?} angle {:.6}", r.direct, r.reduced, r.angle);
    Ok(())
}
