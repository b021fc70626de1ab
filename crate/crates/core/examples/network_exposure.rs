//! Volunteer recruitment on a ten-person network with two seeds. Exposure
//! distinguishes direct and indirect contact, so each label has its own
//! probabilities and several joint probabilities are zero.

use exposure_engine::estimands::{compute_estimands, exposure_probabilities, EstimandRequest};
use exposure_engine::estimation::{estimate, EstimateOptions, Target};
use exposure_engine::exposure::network;
use exposure_engine::{load_corpus, ObservedData};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let inst = load_corpus("network-volunteering")?;
    let labels = inst.mapping.label_codes();
    let probs = exposure_probabilities(&inst.design, &inst.mapping, &labels)?;
    for &d in &labels {
        let pi: Vec<String> = probs.marginal(d)?.iter().map(|p| p.to_string()).collect();
        let name = inst.mapping.label_name(d).unwrap_or("?");
        println!(
            "{name:<22} pi = [{}]  zero-joint pairs {}",
            pi.join(" "),
            probs.zero_joint_pairs(d)?
        );
    }

    let contrasts = labels
        .iter()
        .filter(|&&d| d != network::CONTROL)
        .map(|&d| (d, network::CONTROL))
        .collect();
    let request = EstimandRequest {
        labels: vec![],
        contrasts,
        trim: true,
    };
    let report = compute_estimands(&inst.design, &inst.mapping, &inst.schedule, &request)?;
    println!("averaging over units {:?}", report.included);
    for c in &report.contrasts {
        let tau = c
            .aeed
            .as_ref()
            .map_or("undefined".into(), |t| t.0.to_string());
        println!("AEED({}, control) = {tau}", c.d);
    }

    let data = ObservedData::realize(&inst.schedule, &inst.mapping, &inst.design.sample(5))?;
    let target = Target::Aeed(network::INDIRECT, network::CONTROL);
    let options = EstimateOptions {
        units: Some(report.included.clone()),
        ..Default::default()
    };
    let est = estimate(target, &data, &probs, &options)?;
    println!(
        "{target}: estimate {:.3}, 95% interval [{:.3}, {:.3}]",
        est.point, est.ci[0], est.ci[1]
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
