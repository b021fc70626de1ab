//! Growing populations of two-person clusters treated as blocks. Each unit
//! depends on one other, so b_N grows linearly, b_N c_N / N² shrinks, and
//! the RMSE of the contrast estimate falls.

use exposure_engine::montecarlo::SweepResult;
use exposure_engine::{consistency_sweep, EstimatorConfig, Generator, Label, Target};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let config = EstimatorConfig::new(Target::Aeed(Label(1), Label(0)));
    let sweep = consistency_sweep(
        &Generator::PartialInterference { cluster_size: 2 },
        &[20, 80, 320],
        &config,
        500,
        3,
    )?;
    println!("{}", SweepResult::CSV_HEADER.join("\t"));
    for row in sweep.csv_rows() {
        let cells: Vec<String> = row
            .iter()
            .map(|c| {
                if c.contains('.') {
                    c.parse::<f64>().map_or(c.clone(), |x| format!("{x:.4}"))
                } else {
                    c.clone()
                }
            })
            .collect();
        println!("{}", cells.join("\t"));
    }
    println!("{}", sweep.note);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
