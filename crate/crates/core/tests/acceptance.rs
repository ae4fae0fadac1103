//! Acceptance matrix: one line per criterion. Pass criterion numbers as
//! arguments to run a subset, e.g. `cargo test --test acceptance -- 1 2`.

use std::process::ExitCode;

use neural_automata::verify::{run, CRITERIA};

fn main() -> ExitCode {
    let mut ids: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if ids.is_empty() {
        ids = (1..=CRITERIA).collect();
    }
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut failed = 0;
    for id in ids {
        let Some(r) = run(id, jobs) else {
            eprintln!("no criterion {id}");
            return ExitCode::from(2);
        };
        println!("{r}");
        failed += usize::from(!r.passed);
    }
    println!("acceptance: {failed} failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
