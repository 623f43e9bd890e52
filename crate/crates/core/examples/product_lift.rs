//! Lifting a factor datum to the product C^d x C^d and auditing the block metric.

use formeq::cone::SamplerConfig;
use formeq::forms::{power_form, FormBundle};
use formeq::hermitian::HermitianMatrix;
use formeq::lift::{lift_bundle, lifted_subsolution_check};
use formeq::solver::solve_ray;

fn main() -> formeq::Result<()> {
    let rho = HermitianMatrix::identity(3);
    let lhat = FormBundle::new(rho.clone(), vec![power_form(&rho, 2, 2.0)], 0.0)?;
    let inst = lift_bundle(&lhat, &rho)?;
    println!("lifted datum on C^{} with blocks {:?}", inst.bundle.dim(), inst.splitting.dims());
    // scale the factor metric until the factor equation F = 1 holds
    let t = solve_ray(&rho.scale(0.5), &rho, &inst.factor_x()?)?.expect("root along the identity");
    let omega_t = rho.scale(0.5 + t);
    println!("factor solution omega_t = {:.6} I", 0.5 + t);
    let rep = lifted_subsolution_check(&omega_t, &inst, &SamplerConfig::with_seed(7))?;
    println!("factor cone pass {} (q_min {:.4}), volume slack {:.3e}", rep.factor.pass, rep.factor.q_min, rep.factor_volume_slack);
    if let Some(l) = &rep.lifted {
        println!("lifted cone pass {} (q_min {:.4}, P exact {:.6} < 2)", l.pass, l.q_min, l.p_exact);
    }
    Ok(())
}
