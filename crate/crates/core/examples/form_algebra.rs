//! Wedge products, powers of a metric and the positivity probe.

use formeq::forms::{power_form, positivity_probe, FormComponent};
use formeq::hermitian::{sigma, HermitianMatrix};

fn main() -> formeq::Result<()> {
    let a = HermitianMatrix::from_real(3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 1.5])?;
    // a^3/3! is det(a) times the volume; a ^ a^2/2! = 3 a^3/3!
    let a1 = FormComponent::from_matrix(&a);
    let a2 = power_form(&a, 2, 1.0);
    let top = a1.wedge(&a2)?.top_coefficient();
    println!("det a = {:.12}, (a ^ a^2/2!) / 3 = {:.12}", a.det(), top / 3.0);
    println!("sigma_2 of the eigenvalues = {:.12}", sigma(&a, 2)?);

    let probe = positivity_probe(&a2, 512, 7);
    println!("a^2/2! strongly positive on sampled vectors: {} (min pairing {:.4e})", probe.pass, probe.min_value);
    let indefinite = a2.sub(&power_form(&HermitianMatrix::identity(3), 2, 3.0));
    let probe = positivity_probe(&indefinite, 512, 7);
    println!("a^2/2! - 3 rho^2/2! positive: {} (min pairing {:.4e})", probe.pass, probe.min_value);
    Ok(())
}
