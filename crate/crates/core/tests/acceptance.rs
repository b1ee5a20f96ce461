//! Runs the twelve acceptance criteria and prints one pass/fail line for each.

use std::process::ExitCode;

use pamlab::acceptance::{run_criterion, CRITERIA};

fn main() -> ExitCode {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut failed = 0;
    for (id, _) in CRITERIA {
        let report = run_criterion(id, workers, 20240601);
        println!("{report}");
        if !report.passed {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
