//! A radio spot aired on one random day of four. Counting the day after an
//! airing as exposed makes exposure probabilities unequal across days, which
//! the estimator has to account for.

use exposure_engine::estimands::exposure_probabilities;
use exposure_engine::{aeed, load_corpus, Label};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    for name in ["voter-registration", "voter-carryover"] {
        let inst = load_corpus(name)?;
        let probs = exposure_probabilities(&inst.design, &inst.mapping, &[Label(0), Label(1)])?;
        let pi: Vec<String> = probs
            .marginal(Label(1))?
            .iter()
            .map(|p| p.to_string())
            .collect();
        println!("{name}: Pr[exposed] by day = [{}]", pi.join(", "));
        let both: Vec<String> = (0..inst.n())
            .map(|j| probs.joint(0, Label(1), j, Label(1)).map(|p| p.to_string()))
            .collect::<Result<_, _>>()?;
        println!("  Pr[day 1 and day j exposed] = [{}]", both.join(", "));
        let tau = aeed(
            &inst.design,
            &inst.mapping,
            &inst.schedule,
            Label(1),
            Label(0),
            None,
        )?;
        println!("  AEED(1,0) = {tau}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
