//! Acceptance gate: one PASS/FAIL line per criterion, with every measured
//! quantity against its tolerance and the wall time. Runs without the test
//! harness so the lines always reach the test log.

use std::time::Instant;

use formeq::verify::{self, CRITERIA};

const SEED: u64 = 7;

/// Wall-time budgets in seconds, where the criterion sets one.
fn budget(id: u32) -> Option<f64> {
    match id {
        1 => Some(10.0),
        7 => Some(60.0),
        8 => Some(300.0),
        _ => None,
    }
}

fn main() {
    let mut failed = Vec::new();
    for id in 1..=CRITERIA {
        let start = Instant::now();
        let result = verify::run(id, SEED);
        let secs = start.elapsed().as_secs_f64();
        let in_time = budget(id).is_none_or(|b| secs < b);
        match result {
            Ok(c) => {
                let pass = c.pass && in_time;
                println!("{} criterion {:>2} ({}) in {:.2} s", if pass { "PASS" } else { "FAIL" }, id, c.title, secs);
                for ch in &c.checks {
                    let rel = if ch.strict { "<" } else { "<=" };
                    println!("       {:<58} {:>12.4e} {rel} {:.1e}  [{} instances]", ch.name, ch.value, ch.tolerance, ch.instances);
                }
                if let Some(b) = budget(id) {
                    println!("       {:<58} {:>12.2} <  {b:.0} s", "runtime", secs);
                }
                if !pass {
                    failed.push(id);
                }
            }
            Err(e) => {
                println!("FAIL criterion {id:>2}: {e}");
                failed.push(id);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {CRITERIA} criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
