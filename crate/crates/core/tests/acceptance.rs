//! Acceptance suite: one line per criterion with its measured quantities,
//! runtime and verdict. Pass a criterion number or a name substring to run a
//! subset.

use std::process::ExitCode;

use bumpy_core::verify::{criteria, run_criterion};

fn main() -> ExitCode {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    let mut ran = 0;
    for c in &criteria() {
        if let Some(f) = &filter {
            if !c.name.contains(f.as_str()) && c.id.to_string() != *f {
                continue;
            }
        }
        ran += 1;
        let report = run_criterion(c, 0);
        if !report.pass {
            failed += 1;
        }
        println!("{}", report.line());
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
