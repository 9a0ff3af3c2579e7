//! Runs every numbered acceptance criterion at its stated tolerance and
//! prints one line per criterion. Exits nonzero if any fails.

use std::process::ExitCode;

use kirchhoff_core::verify::criterion;

const SEED: u64 = 0;

fn main() -> ExitCode {
    let mut failed = 0;
    for id in 1..=13 {
        let c = criterion(id, SEED);
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {status}  {}  [{}]", c.id, c.title, c.tolerance);
        println!("    measured: {}", c.measured);
        if let Some(e) = &c.error {
            println!("    error: {e}");
        }
        failed += usize::from(!c.passed);
    }
    println!("acceptance: {} passed, {failed} failed", 13 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
