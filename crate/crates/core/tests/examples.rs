//! Every example runs to completion.

macro_rules! example {
    ($path:literal, $name:ident) => {
        #[path = $path]
        mod $name;

        #[test]
        fn $name() {
            $name::run().expect("example runs");
        }
    };
}

example!("../examples/household_turnout.rs", household_turnout);
example!("../examples/design_dependence.rs", design_dependence);
example!("../examples/general_equilibrium.rs", general_equilibrium);
example!("../examples/voter_carryover.rs", voter_carryover);
example!("../examples/rebel_survey.rs", rebel_survey);
example!("../examples/network_exposure.rs", network_exposure);
example!("../examples/hidden_variation.rs", hidden_variation);
example!(
    "../examples/conservative_variance.rs",
    conservative_variance
);
example!("../examples/covariate_adjustment.rs", covariate_adjustment);
example!("../examples/consistency_sweep.rs", consistency_sweep);
example!("../examples/coverage_study.rs", coverage_study);
