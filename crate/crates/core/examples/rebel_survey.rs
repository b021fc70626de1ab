//! Surveying 3 of 10 rebel groups in a random order. Membership is only
//! observed for surveyed groups; the placeholder recorded for the others
//! never enters the estimate.

use exposure_engine::estimands::exposure_probabilities;
use exposure_engine::estimation::ht_estimate;
use exposure_engine::scalar::int;
use exposure_engine::{aepo, load_corpus, Label, ObservedData};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let inst = load_corpus("rebel-survey")?;
    let support = inst.design.support()?;
    println!(
        "{} ordered triples, each with mass {}",
        support.len(),
        support[0].mass
    );
    let probs = exposure_probabilities(&inst.design, &inst.mapping, &[Label(1)])?;
    println!(
        "Pr[surveyed] = {}, Pr[two given groups surveyed] = {}",
        probs.pi(0, Label(1))?,
        probs.joint(0, Label(1), 1, Label(1))?
    );
    println!(
        "mean membership = {}",
        aepo(&inst.design, &inst.mapping, &inst.schedule, Label(1), None)?
    );

    let z = inst.design.sample(2024);
    for placeholder in [0, -99] {
        let schedule = inst.schedule.with_placeholder(int(placeholder))?;
        let data = ObservedData::realize(&schedule, &inst.mapping, &z)?;
        let est = ht_estimate(&data.y, &data.d, &probs, Label(1))?;
        println!(
            "placeholder {placeholder:>3}: survey order {:?} gives estimate {est}",
            z.0
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
