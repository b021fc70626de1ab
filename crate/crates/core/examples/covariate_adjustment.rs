//! Regression adjustment with coefficients fixed before the experiment keeps
//! the estimator unbiased for any prediction function, even when NURVA fails.
//! A good prediction shrinks the design variance.

use exposure_engine::estimands::exposure_probabilities;
use exposure_engine::estimation::{Estimator, Prediction, PredictionFunction};
use exposure_engine::scalar::ratio;
use exposure_engine::{aepo, load_corpus, Label, ObservedData};
use num::rational::BigRational;
use num::Zero;

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let inst = load_corpus("household-alt2")?;
    let d = Label(1);
    let probs = exposure_probabilities(&inst.design, &inst.mapping, &[d])?;
    let est = Estimator::new(&probs, &[d], None)?;
    let covariates = vec![
        vec![ratio(1, 1), ratio(1, 1)],
        vec![ratio(1, 1), ratio(0, 1)],
    ];
    let fits: [(&str, &dyn PredictionFunction<BigRational>, Vec<BigRational>); 3] = [
        ("none", &Prediction::Zero, vec![]),
        ("constant 1/2", &Prediction::Constant, vec![ratio(1, 2)]),
        (
            "linear",
            &Prediction::Linear,
            vec![ratio(1, 4), ratio(1, 2)],
        ),
    ];
    println!(
        "AEPO(1) = {}",
        aepo(&inst.design, &inst.mapping, &inst.schedule, d, None)?
    );
    for (name, f, beta) in fits {
        let (mut mean, mut second) = (BigRational::zero(), BigRational::zero());
        for p in inst.design.support()? {
            let data = ObservedData::realize(&inst.schedule, &inst.mapping, &p.z)?;
            let v = est.regression_adjusted(&data.y, &data.d, d, &covariates, f, &beta)?;
            mean += &p.mass * &v;
            second += &p.mass * &v * &v;
        }
        let var = second - &mean * &mean;
        println!("{name:<13} expectation {mean}, variance {var}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
