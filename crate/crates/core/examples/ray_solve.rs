//! Roots of F(A + tB) = kappa and ray limits, including rank-deficient B.

use formeq::cone::ray_limit;
use formeq::forms::{power_form, FormBundle};
use formeq::hermitian::HermitianMatrix;
use formeq::operator::OperatorContext;
use formeq::solver::solve_ray;

fn main() -> formeq::Result<()> {
    let rho = HermitianMatrix::identity(3);
    let ctx = OperatorContext::new(FormBundle::new(rho.clone(), vec![power_form(&rho, 2, 1.0)], 0.0)?, 2.0)?;
    let a = HermitianMatrix::identity(3);
    let full = HermitianMatrix::from_real_diag(&[1.0, 1.0, 1.0]);
    let rank_one = HermitianMatrix::from_real_diag(&[1.0, 0.0, 0.0]);
    let rank_two = HermitianMatrix::from_real_diag(&[1.0, 1.0, 0.0]);
    println!("F(I) = tr(I^-1) = {}", ctx.f(&a)?);
    for (name, b) in [("full rank", &full), ("rank one", &rank_one), ("rank two", &rank_two)] {
        let t = solve_ray(&a, b, &ctx)?;
        println!("  {name:9}: limit {:.6}, root {:?}", ray_limit(&a, b, &ctx)?, t);
    }
    Ok(())
}
