//! When some pairs of units are never jointly observed in an exposure, the
//! unbiased variance estimator is unavailable. The conservative estimator
//! bounds those pairs and is never too small in expectation when NURVA holds.

use exposure_engine::corpus::partial_interference;
use exposure_engine::estimands::exposure_probabilities;
use exposure_engine::estimation::{contrast_variance_true, ht_variance_estimate, ht_variance_true};
use exposure_engine::montecarlo::{exact_expectation, EstimatorConfig, Statistic};
use exposure_engine::{load_corpus, EnumerationCap, Label, ObservedData, Target};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let h = load_corpus("household")?;
    let probs = exposure_probabilities(&h.design, &h.mapping, &[Label(1)])?;
    let data = ObservedData::realize(&h.schedule, &h.mapping, &[1, 0].into())?;
    match ht_variance_estimate(&data.y, &data.d, &probs, Label(1)) {
        Ok(v) => println!("household: unbiased variance estimate {v}"),
        Err(e) => println!("household: {e}"),
    }

    // Two of five clusters of two treated as blocks; outcomes count treated
    // cluster-mates.
    let inst = partial_interference(5, 2, 2, 7, EnumerationCap::DEFAULT)?;
    println!(
        "{}: {} assignments",
        inst.name,
        inst.design.support()?.len()
    );
    for target in [
        Target::Aepo(Label(1)),
        Target::Aepo(Label(0)),
        Target::Aeed(Label(1), Label(0)),
    ] {
        let cfg = EstimatorConfig::new(target);
        let expected = exact_expectation(
            &inst.design,
            &inst.mapping,
            &inst.schedule,
            &cfg,
            &Statistic::ConservativeVariance,
        )?;
        let truth = match target {
            Target::Aepo(d) => ht_variance_true(&inst.design, &inst.mapping, &inst.schedule, d)?,
            Target::Aeed(d, d2) => {
                contrast_variance_true(&inst.design, &inst.mapping, &inst.schedule, d, d2)?
            }
        };
        println!("{target:<9} E[conservative] = {expected:<12} exact variance = {truth}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
