//! Acceptance criteria 1–12 at full scale with pinned seeds. Prints one
//! pass/fail line per criterion; `ACCEPTANCE_ONLY=4,5` restricts the run.

use std::process::ExitCode;

use thermacro::verify::{criterion, Scale, PINNED_SEED};

fn main() -> ExitCode {
    let only: Option<Vec<u8>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    for id in 1..=12u8 {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let o = criterion(id, Scale::Full, PINNED_SEED);
        println!("{}", o.line());
        for n in &o.notes {
            println!("    {n}");
        }
        if !o.passed {
            failed += 1;
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
