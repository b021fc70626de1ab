//! Wald intervals from the conservative variance on a thousand units with
//! independent coin-flip assignment and heterogeneous effects.

use exposure_engine::scalar::ratio;
use exposure_engine::{coverage_study, Generator, Label, Target};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let inst = Generator::NoInterferenceBernoulli { p: ratio(1, 2) }.generate(1000, 1)?;
    for target in [Target::Aepo(Label(1)), Target::Aeed(Label(1), Label(0))] {
        for level in [0.8, 0.95, 0.999] {
            let c = coverage_study(
                &inst.design,
                &inst.mapping,
                &inst.schedule,
                target,
                level,
                400,
                2,
            )?;
            println!("{target:<9} level {level:<5} coverage {c:.3}");
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
