//! Randomized checks of the pointwise inequalities behind the a priori estimates.

use formeq::inequalities::run_suite;

fn main() -> formeq::Result<()> {
    for c in run_suite(200, 7)? {
        println!("{:32} {:5} instances, worst violation {:+.3e}", c.name, c.instances, c.max_violation);
    }
    Ok(())
}
