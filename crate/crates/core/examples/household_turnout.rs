//! Two housemates, one of whom is asked to vote. The outcome depends on the
//! housemate's assignment, so the individualistic exposure misstates the
//! mechanism, yet the estimands stay well defined under the design.

use exposure_engine::estimands::{compute_estimands, exposure_probabilities, EstimandRequest};
use exposure_engine::estimation::{estimate, EstimateOptions, Target};
use exposure_engine::{check_nurva, check_sutva, load_corpus, Label, ObservedData};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let h = load_corpus("household")?;
    let request = EstimandRequest {
        labels: vec![],
        contrasts: vec![(Label(1), Label(0))],
        trim: false,
    };
    let report = compute_estimands(&h.design, &h.mapping, &h.schedule, &request)?;
    for l in &report.labels {
        let epos: Vec<String> = l
            .epo
            .iter()
            .map(|e| e.as_ref().map_or("-".into(), |e| e.0.to_string()))
            .collect();
        println!("EPO(d={}) per unit: [{}]", l.label, epos.join(", "));
    }
    println!(
        "AEED(1,0) = {}",
        report.aeed(Label(1), Label(0)).expect("positivity holds")
    );

    let nurva = check_nurva(&h.design, &h.mapping, &h.schedule)?;
    let sutva = check_sutva(
        h.space.as_ref().expect("corpus space"),
        &h.mapping,
        &h.schedule,
    )?;
    println!("NURVA holds: {}", nurva.holds);
    if let Some(c) = &sutva.counterexample {
        println!("SUTVA fails: {c}");
    }

    let probs = exposure_probabilities(&h.design, &h.mapping, &[Label(0), Label(1)])?;
    for seed in [1, 2] {
        let z = h.design.sample(seed);
        let data = ObservedData::realize(&h.schedule, &h.mapping, &z)?;
        let est = estimate(
            Target::Aeed(Label(1), Label(0)),
            &data,
            &probs,
            &EstimateOptions::default(),
        )?;
        println!(
            "draw z = {:?}: estimate {} with conservative variance {}",
            z.0, est.point, est.var_cons
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
