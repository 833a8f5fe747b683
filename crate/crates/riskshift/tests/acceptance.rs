//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines print in order and unbuffered.

use riskshift::acceptance::{run_criterion, CRITERIA};

fn main() {
    // `cargo test -- <filter>` runs the criteria whose id matches one of the filters.
    let filters: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, _, _) in CRITERIA {
        if !filters.is_empty() && !filters.contains(&id) {
            continue;
        }
        let r = run_criterion(id).expect("criterion id comes from the table");
        println!("{}", r.line());
        if !r.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
