//! Runs selected acceptance criteria, e.g. `cargo run --release --example acceptance -- 3 6 12`.
use pamlab::acceptance::{run_criterion, CRITERIA};

fn main() {
    let ids: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let ids = if ids.is_empty() { vec![3, 4, 6, 11, 12] } else { ids };
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    for id in ids {
        if CRITERIA.iter().any(|(i, _)| *i == id) {
            println!("{}", run_criterion(id, workers, 20240601));
        }
    }
}
