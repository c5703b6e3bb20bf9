//! Acceptance suite. Prints one line per criterion and exits nonzero when
//! any criterion fails. Numeric arguments restrict the run to those ids.

use std::process::ExitCode;

use gmspde::acceptance::{run_all, run_selected};

fn main() -> ExitCode {
    let ids: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let outcomes = if ids.is_empty() { run_all() } else { run_selected(&ids) };
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    for o in &outcomes {
        println!("{o}");
    }
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
