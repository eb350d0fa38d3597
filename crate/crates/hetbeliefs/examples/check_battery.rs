//! Runs the full randomized self-check battery in-process and prints every
//! line: hard invariants ([ok]/[VIOLATION]) and informational [finding]
//! lines. This is the same battery behind the CLI `check` mode.
//!
//! Run with `cargo run --example check_battery`.

use hetbeliefs::run::run_battery;

fn main() {
    let t0 = std::time::Instant::now();
    let report = run_battery();
    for line in &report.lines {
        println!("{line}");
    }
    println!(
        "\n{} violation(s) in {:.2?}",
        report.violations,
        t0.elapsed()
    );
    std::process::exit(if report.violations == 0 { 0 } else { 4 });
}
