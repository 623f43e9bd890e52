//! The functional along paths of potentials and the regularized-max gluing.

use formeq::solver::{continuity_solve, SolveOptions};
use formeq::variational::{functional, glue_subsolutions, path_independence_check, regularized_max, MaskedPotential, PotentialPath};
use formeq::verify::functional_problem;
use std::f64::consts::PI;

fn main() -> formeq::Result<()> {
    let p = functional_problem()?;
    let grid = &p.grid;
    let phi = grid.sample(|x| 0.01 * (2.0 * PI * x[0]).sin());
    let mid = grid.sample(|x| 0.01 * (2.0 * PI * (x[1] + x[2])).cos());
    let shifted: Vec<f64> = phi.iter().map(|v| v + 2.0).collect();
    println!("F(phi) = {:.12}, F(phi + 2) = {:.12}", functional(&phi, &p)?, functional(&shifted, &p)?);
    let gap = path_independence_check(&phi, &PotentialPath::straight(&phi, 64), &PotentialPath::two_segment(&mid, &phi, 64), &p)?;
    println!("straight vs two-segment path integral gap: {gap:.3e}");
    let u = continuity_solve(&p, &SolveOptions::default(), None)?.into_result()?;
    println!("F at the solution {:.12} <= F(phi) {:.12}", functional(&u, &p)?, functional(&phi, &p)?);

    println!("regularized max of (0, 0.02) with eta 0.05: {:.6}", regularized_max(&[0.0, 0.02], &[0.05, 0.05])?);
    let bump = grid.sample(|x| 0.006 * (2.0 * PI * x[0]).sin());
    let all = vec![true; grid.len()];
    let pots = [
        MaskedPotential { u: bump.clone(), mask: all.clone() },
        MaskedPotential { u: bump.iter().map(|b| -b).collect(), mask: all },
    ];
    let rep = glue_subsolutions(&pots, &[0.002, 0.002], &p)?;
    println!("glued q_min {:.6} (inputs {:?})", rep.q_min, rep.input_q_min);
    Ok(())
}
