//! Effects measured in a split experiment need not carry over to universal
//! delivery: the job-training gain vanishes and the campaign-ad effect turns
//! negative once everyone is treated.

use exposure_engine::{aeed, check_nurva, check_sutva, load_corpus, Label};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    for base in ["job-training", "campaign-ad"] {
        for name in [base.to_string(), format!("{base}-uniform")] {
            let inst = load_corpus(&name)?;
            let tau = aeed(
                &inst.design,
                &inst.mapping,
                &inst.schedule,
                Label(1),
                Label(0),
                None,
            )?;
            let nurva = check_nurva(&inst.design, &inst.mapping, &inst.schedule)?.holds;
            println!("{name:<22} AEED(1,0) = {tau:>3}   NURVA {nurva}");
        }
        let inst = load_corpus(base)?;
        let sutva = check_sutva(
            inst.space.as_ref().expect("corpus space"),
            &inst.mapping,
            &inst.schedule,
        )?;
        println!("  SUTVA over the design space: {}", sutva.holds);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
