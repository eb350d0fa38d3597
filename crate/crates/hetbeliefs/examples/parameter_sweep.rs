//! Sweeps risk aversion across the momentum/reversal boundary and writes
//! the measure values as CSV plus an SVG line chart, using the same code
//! path as the command-line `sweep` mode.
//!
//! Run with `cargo run --example parameter_sweep`.

use hetbeliefs::config::parse_config;
use hetbeliefs::run::execute;

fn main() {
    let dir = std::env::temp_dir().join("hetbeliefs_sweep");
    std::fs::create_dir_all(&dir).expect("create output directory");
    let csv = dir.join("alpha_sweep.csv");
    let svg = dir.join("alpha_sweep.svg");

    let config = format!(
        "\
mode = sweep
model.d_bar = 100
model.sigma_d2 = 4
model.sigma_s2 = 1
model.sigma_theta2_true = 1
model.sigma_theta2_informed = 4
model.alpha = 0.5
model.pi = 0.5
sweep.param = alpha
sweep.from = 0.05
sweep.to = 0.60
sweep.steps = 23
output.path = {}
output.chart = {}
",
        csv.display(),
        svg.display()
    );

    let cfg = parse_config(&config, false).expect("valid sweep config");
    execute(&cfg).expect("sweep run");

    let body = std::fs::read_to_string(&csv).expect("read sweep output");
    println!("alpha      gamma_m        momentum");
    let mut boundary: Option<(f64, f64)> = None;
    let mut prev: Option<(f64, bool)> = None;
    for line in body.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let alpha: f64 = cells[1].parse().unwrap();
        let gamma_m: f64 = cells[12].parse().unwrap();
        let holds = cells[14] == "true";
        println!("{alpha:<10.4} {gamma_m:+.6e} {holds}");
        if let Some((pa, ph)) = prev {
            if ph != holds {
                boundary = Some((pa, alpha));
            }
        }
        prev = Some((alpha, holds));
    }
    if let Some((lo, hi)) = boundary {
        println!("\nmomentum dies between alpha = {lo:.4} and {hi:.4}");
    }
    println!("\nwrote {}", csv.display());
    println!("wrote {}", svg.display());
}
