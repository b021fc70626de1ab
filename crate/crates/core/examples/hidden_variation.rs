//! Treatment comes in three versions but the exposure only records whether a
//! unit was treated. A coin-flip design only ever uses the first version, so
//! NURVA holds; the design space contains the other versions, so SUTVA fails.
//! Widening the design to every version breaks NURVA as well.

use exposure_engine::design::Design;
use exposure_engine::scalar::ratio;
use exposure_engine::{aepo, check_nurva, check_sutva, load_corpus, Label};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let inst = load_corpus("hidden-variation")?;
    let space = inst.space.clone().expect("corpus space");
    println!(
        "NURVA over the support: {}",
        check_nurva(&inst.design, &inst.mapping, &inst.schedule)?.holds
    );
    let sutva = check_sutva(&space, &inst.mapping, &inst.schedule)?;
    println!("SUTVA over the design space: {}", sutva.holds);
    if let Some(c) = &sutva.counterexample {
        println!("  {c}");
    }
    println!(
        "AEPO(treated) under the design = {}",
        aepo(&inst.design, &inst.mapping, &inst.schedule, Label(1), None)?
    );

    // Every version equally likely, independently per unit.
    let vectors = space.enumerate(Default::default())?;
    let mass = ratio(1, vectors.len() as i64);
    let wide = Design::explicit(
        inst.n(),
        "all versions",
        vectors.into_iter().map(|z| (z, mass.clone())),
    )?;
    let nurva = check_nurva(&wide, &inst.mapping, &inst.schedule)?;
    println!("NURVA under the widened design: {}", nurva.holds);
    println!(
        "AEPO(treated) under the widened design = {}",
        aepo(&wide, &inst.mapping, &inst.schedule, Label(1), None)?
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
