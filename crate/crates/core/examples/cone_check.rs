//! Cone-condition audits for the J-equation on C^2 and a sampled datum on C^3.

use formeq::cone::{p_lambda_exact, subsolution_check, subsolution_radius, SamplerConfig};
use formeq::forms::{power_form, FormBundle};
use formeq::hermitian::HermitianMatrix;
use formeq::operator::OperatorContext;

fn main() -> formeq::Result<()> {
    let rho = HermitianMatrix::identity(2);
    let ctx = OperatorContext::new(FormBundle::new(rho.clone(), vec![power_form(&rho, 1, 1.0)], 0.0)?, 1.0)?;
    let budget = SamplerConfig::with_seed(7);
    println!("J-equation, kappa = 1: the cone condition is a > 1 in every eigenvalue");
    for d in [[1.5, 1.5], [3.0, 0.9], [1.1, 4.0]] {
        let a = HermitianMatrix::from_real_diag(&d);
        let r = subsolution_check(&a, &ctx, &budget)?;
        println!("  diag{d:?}: pass {} q_min {:+.4} P sampled {:.6} exact {:.6}", r.pass, r.q_min, r.p_value, r.p_exact);
    }
    let a = HermitianMatrix::from_real_diag(&[1.5, 1.5]);
    println!("  radius bound R at diag(1.5, 1.5): {:.4}", subsolution_radius(&a, &ctx, &budget)?);

    let rho3 = HermitianMatrix::identity(3);
    let b = FormBundle::new(rho3.clone(), vec![power_form(&rho3, 1, 0.5), power_form(&rho3, 2, 1.0)], 0.2)?;
    let a = HermitianMatrix::from_real(3, &[2.0, 0.4, 0.0, 0.4, 1.5, 0.2, 0.0, 0.2, 1.2])?;
    let ctx = OperatorContext::new(b, 1.0)?;
    println!("C^3 datum, F(a) = {:.6}, exact hyperplane supremum {:.6}", ctx.f(&a)?, p_lambda_exact(&a, &ctx)?);
    for s in [1.0, 2.0] {
        let r = subsolution_check(&a.scale(s), &ctx, &budget)?;
        println!("  {s} a: pass {} with q_min {:+.4e}", r.pass, r.q_min);
    }
    Ok(())
}
