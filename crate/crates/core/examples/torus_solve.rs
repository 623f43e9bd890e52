//! Continuity solves on the torus: a manufactured n = 2 instance and a
//! negative control whose path leaves the cone.

use formeq::solver::{continuity_solve, SolveOptions};
use formeq::verify::{control_problem, manufactured_2d};

fn main() -> formeq::Result<()> {
    let (p, mut u_star) = manufactured_2d()?;
    let out = continuity_solve(&p, &SolveOptions::default(), None)?;
    p.grid.remove_mean(&mut u_star);
    let err = out.u.iter().zip(&u_star).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("manufactured J-equation on a 16^4 grid: status {:?}", out.trace.status);
    println!("{:>8} {:>6} {:>12} {:>10} {:>10}", "t", "newton", "residual", "min eig", "q_min");
    for s in &out.trace.steps {
        println!("{:8.4} {:6} {:12.3e} {:10.5} {:10.5}", s.t, s.newton_iters, s.residual_sup, s.min_eig, s.q_min);
    }
    println!("sup |u - u*| = {err:.3e} after {} Newton iterations", out.trace.total_newton);

    let bad = control_problem(-1.0)?;
    let out = continuity_solve(&bad, &SolveOptions::default(), None)?;
    println!("negative control: status {:?}", out.trace.status);
    Ok(())
}
