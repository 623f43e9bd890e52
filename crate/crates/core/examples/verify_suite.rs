//! The pointwise acceptance checks, as run by `formeq verify`.

use formeq::verify::{run_suite, Suite};

fn main() -> formeq::Result<()> {
    for c in run_suite(Suite::Properties, 7)? {
        println!("{} criterion {:2} {}", if c.pass { "PASS" } else { "FAIL" }, c.id, c.title);
        for k in &c.checks {
            println!("    {:48} {:.3e} (tol {:.1e})", k.name, k.value, k.tolerance);
        }
    }
    Ok(())
}
