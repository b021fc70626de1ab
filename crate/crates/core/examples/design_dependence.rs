//! The same raw potential outcomes under three designs and two exposure
//! mappings. With the individualistic mapping the AEED moves with the
//! design; with the housemate mapping it does not.

use exposure_engine::corpus::swapped_mapping;
use exposure_engine::{aeed, check_nurva, load_corpus, Label};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let swapped = swapped_mapping()?;
    println!(
        "{:<16} {:>16} {:>16}",
        "design", "own assignment", "housemate"
    );
    for name in ["household", "household-alt1", "household-alt2"] {
        let inst = load_corpus(name)?;
        let own = aeed(
            &inst.design,
            &inst.mapping,
            &inst.schedule,
            Label(1),
            Label(0),
            None,
        )?;
        let mate = aeed(
            &inst.design,
            &swapped,
            &inst.schedule,
            Label(1),
            Label(0),
            None,
        )?;
        println!("{:<16} {:>16} {:>16}", inst.design.label(), own, mate);
        let nurva = check_nurva(&inst.design, &inst.mapping, &inst.schedule)?;
        if let Some(c) = nurva.counterexample {
            println!("  NURVA fails under this design: {c}");
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
