//! Compiled-in example instances and synthetic population generators.

use num::rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::design::{AssignmentVector, Design, DesignSpace, EnumerationCap};
use crate::error::{Error, Result};
use crate::exposure::{AdjacencyMatrix, ExposureMapping, Label};
use crate::outcomes::{OutcomeRule, OutcomeSchedule};
use crate::scalar::{int, ratio};

/// A fully specified problem: design, feasible space, exposure mapping and
/// raw potential outcomes.
#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub design: Design,
    pub space: Option<DesignSpace>,
    pub mapping: ExposureMapping,
    pub schedule: OutcomeSchedule,
}

impl Instance {
    /// Same problem under a different design.
    pub fn with_design(&self, design: Design) -> Self {
        Instance {
            design,
            ..self.clone()
        }
    }

    pub fn n(&self) -> usize {
        self.design.n()
    }
}

/// Names accepted by [`load_corpus`].
pub const CORPUS_NAMES: &[&str] = &[
    "household",
    "household-swapped",
    "household-alt1",
    "household-alt2",
    "job-training",
    "job-training-uniform",
    "campaign-ad",
    "campaign-ad-uniform",
    "rebel-survey",
    "voter-registration",
    "voter-carryover",
    "network-volunteering",
    "hidden-variation",
    "srswor",
];

pub fn load_corpus(name: &str) -> Result<Instance> {
    load_corpus_with_cap(name, EnumerationCap::from_env())
}

pub fn load_corpus_with_cap(name: &str, cap: EnumerationCap) -> Result<Instance> {
    let inst = match name {
        "household" => household(split_design()?)?,
        "household-swapped" => {
            let mut inst = household(split_design()?)?;
            inst.mapping = swapped_mapping()?;
            inst
        }
        "household-alt1" => household(uniform_delivery()?)?,
        "household-alt2" => household(uniform_square()?)?,
        "job-training" => two_person(job_training_table()?, split_design()?),
        "job-training-uniform" => two_person(job_training_table()?, uniform_delivery()?),
        "campaign-ad" => two_person(campaign_ad_table()?, split_design()?),
        "campaign-ad-uniform" => two_person(campaign_ad_table()?, uniform_delivery()?),
        "rebel-survey" => rebel_survey(cap)?,
        "voter-registration" => voter(false, cap)?,
        "voter-carryover" => voter(true, cap)?,
        "network-volunteering" => network_volunteering(cap)?,
        "hidden-variation" => hidden_variation(cap)?,
        "srswor" => srswor(cap)?,
        other => return Err(Error::UnknownCorpus(other.to_string())),
    };
    Ok(Instance {
        name: name.to_string(),
        ..inst
    })
}

fn table(rows: &[([u32; 2], [BigRational; 2])]) -> Result<OutcomeSchedule> {
    OutcomeSchedule::table(
        2,
        rows.iter()
            .map(|(z, y)| (AssignmentVector::from(*z), y.to_vec())),
    )
}

/// Treat exactly one of two people, chosen by a fair coin.
fn split_design() -> Result<Design> {
    Design::explicit(
        2,
        "split",
        [([0, 1].into(), ratio(1, 2)), ([1, 0].into(), ratio(1, 2))],
    )
}

/// Treat both or neither.
fn uniform_delivery() -> Result<Design> {
    Design::explicit(
        2,
        "uniform delivery",
        [([0, 0].into(), ratio(1, 2)), ([1, 1].into(), ratio(1, 2))],
    )
}

fn uniform_square() -> Result<Design> {
    Ok(Design::bernoulli(2, ratio(1, 2))?.with_label("uniform over {0,1}^2"))
}

fn two_person(schedule: OutcomeSchedule, design: Design) -> Instance {
    Instance {
        name: String::new(),
        design,
        space: Some(DesignSpace::binary(2)),
        mapping: ExposureMapping::individualistic(2),
        schedule,
    }
}

/// Person one votes iff person two is treated, and vice versa.
pub fn household_table() -> Result<OutcomeSchedule> {
    table(&[
        ([0, 0], [int(0), int(0)]),
        ([0, 1], [int(1), int(0)]),
        ([1, 0], [int(0), int(1)]),
        ([1, 1], [int(1), int(1)]),
    ])
}

pub fn job_training_table() -> Result<OutcomeSchedule> {
    table(&[
        ([0, 0], [ratio(1, 2), ratio(1, 2)]),
        ([0, 1], [int(0), int(1)]),
        ([1, 0], [int(1), int(0)]),
        ([1, 1], [ratio(1, 2), ratio(1, 2)]),
    ])
}

pub fn campaign_ad_table() -> Result<OutcomeSchedule> {
    table(&[
        ([0, 0], [int(0), int(0)]),
        ([0, 1], [int(0), int(0)]),
        ([1, 0], [int(0), int(0)]),
        ([1, 1], [int(-1), int(-1)]),
    ])
}

fn household(design: Design) -> Result<Instance> {
    Ok(two_person(household_table()?, design))
}

/// g_i(z) = z of the other household member.
pub fn swapped_mapping() -> Result<ExposureMapping> {
    let domain = DesignSpace::binary(2).enumerate(EnumerationCap::DEFAULT)?;
    ExposureMapping::tabulate(2, &domain, |z| vec![Label(z[1] as i64), Label(z[0] as i64)])
}

/// Current membership counts for the ten listed groups.
pub const REBEL_MEMBERS: [i64; 10] = [120, 45, 300, 80, 15, 200, 60, 95, 30, 150];

fn rebel_survey(cap: EnumerationCap) -> Result<Instance> {
    let space = DesignSpace::Ordered {
        n: 10,
        max_selected: 3,
    };
    let values = REBEL_MEMBERS.iter().map(|&v| int(v)).collect();
    Ok(Instance {
        name: String::new(),
        design: Design::ordered_sample_with_cap(10, 3, cap)?
            .with_label("survey first 3 of a random order"),
        mapping: ExposureMapping::survey_indicator(10)?,
        schedule: OutcomeSchedule::rule(OutcomeRule::Survey { values }, space.clone())?,
        space: Some(space),
    })
}

/// Daily registrations without the announcement, and the lift it brings
/// on the day it plays and the day after.
pub const VOTER_BASELINE: [i64; 4] = [12, 15, 9, 14];
pub const VOTER_LIFT: i64 = 5;

fn voter(carryover_mapping: bool, cap: EnumerationCap) -> Result<Instance> {
    let space = DesignSpace::binary(4);
    let rule = OutcomeRule::Carryover {
        baseline: VOTER_BASELINE.iter().map(|&v| int(v)).collect(),
        lift: int(VOTER_LIFT),
    };
    Ok(Instance {
        name: String::new(),
        design: Design::bernoulli_with_cap(4, ratio(1, 2), cap)?,
        mapping: if carryover_mapping {
            ExposureMapping::carryover(4)?
        } else {
            ExposureMapping::individualistic(4)
        },
        schedule: OutcomeSchedule::rule(rule, space.clone())?,
        space: Some(space),
    })
}

/// Ring of ten students with three chords.
pub fn volunteering_network() -> Result<AdjacencyMatrix> {
    let mut edges: Vec<(usize, usize)> = (0..10).map(|i| (i, (i + 1) % 10)).collect();
    edges.extend([(0, 5), (2, 7), (3, 8)]);
    AdjacencyMatrix::from_edges(10, &edges)
}

fn network_volunteering(cap: EnumerationCap) -> Result<Instance> {
    let adjacency = volunteering_network()?;
    let space = DesignSpace::binary(10);
    // Every other student is swayed by a treated friend.
    let susceptible = (0..10).map(|i| i % 2 == 0).collect();
    Ok(Instance {
        name: String::new(),
        design: Design::complete_with_cap(10, 2, cap)?.with_label("one fifth treated"),
        mapping: ExposureMapping::network(adjacency.clone()),
        schedule: OutcomeSchedule::rule(
            OutcomeRule::Spillover {
                adjacency,
                susceptible,
            },
            space.clone(),
        )?,
        space: Some(space),
    })
}

fn hidden_variation(cap: EnumerationCap) -> Result<Instance> {
    let space = DesignSpace::Product { n: 3, levels: 3 };
    // Columns: control, version 1, version 2 of the treatment.
    let values = vec![
        vec![int(2), int(5), int(8)],
        vec![int(1), int(3), int(1)],
        vec![int(4), int(4), int(6)],
    ];
    Ok(Instance {
        name: String::new(),
        design: Design::bernoulli_with_cap(3, ratio(1, 2), cap)?,
        mapping: ExposureMapping::survey_indicator(3)?,
        schedule: OutcomeSchedule::rule(OutcomeRule::Individualistic { values }, space.clone())?,
        space: Some(space),
    })
}

/// Outcomes unaffected by assignment, so the design is pure sampling.
pub const SRSWOR_VALUES: [i64; 4] = [3, 1, 4, 1];

fn srswor(cap: EnumerationCap) -> Result<Instance> {
    let space = DesignSpace::binary(4);
    let values = SRSWOR_VALUES
        .iter()
        .map(|&v| vec![int(v), int(v)])
        .collect();
    Ok(Instance {
        name: String::new(),
        design: Design::complete_with_cap(4, 2, cap)?,
        mapping: ExposureMapping::individualistic(4),
        schedule: OutcomeSchedule::rule(OutcomeRule::Individualistic { values }, space.clone())?,
        space: Some(space),
    })
}

/// Synthetic populations indexed by size, used by consistency sweeps.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    /// Clusters of `cluster_size`; half the clusters (rounded down) treated as
    /// blocks; outcome = baseline + #treated in own cluster.
    PartialInterference { cluster_size: usize },
    /// Independent Bernoulli(p) assignment, outcome depends only on own code.
    NoInterferenceBernoulli { p: BigRational },
}

impl Generator {
    pub fn name(&self) -> &'static str {
        match self {
            Generator::PartialInterference { .. } => "partial-interference",
            Generator::NoInterferenceBernoulli { .. } => "no-interference",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "partial-interference" => Ok(Generator::PartialInterference { cluster_size: 2 }),
            "no-interference" | "no-interference-bernoulli" => {
                Ok(Generator::NoInterferenceBernoulli { p: ratio(1, 2) })
            }
            other => Err(Error::UnknownRule(other.to_string())),
        }
    }

    pub fn generate(&self, n: usize, seed: u64) -> Result<Instance> {
        self.generate_with_cap(n, seed, EnumerationCap::from_env())
    }

    pub fn generate_with_cap(&self, n: usize, seed: u64, cap: EnumerationCap) -> Result<Instance> {
        let fail = |reason: String| Error::Generator { n, reason };
        match self {
            Generator::PartialInterference { cluster_size } => {
                if *cluster_size == 0 || !n.is_multiple_of(*cluster_size) || n / cluster_size < 2 {
                    return Err(fail(format!(
                        "N must be a multiple of {cluster_size} with at least two clusters"
                    )));
                }
                partial_interference(
                    n / cluster_size,
                    *cluster_size,
                    n / cluster_size / 2,
                    seed,
                    cap,
                )
            }
            Generator::NoInterferenceBernoulli { p } => {
                if n == 0 {
                    return Err(fail("empty population".into()));
                }
                no_interference_bernoulli(n, p.clone(), seed, cap)
            }
        }
    }
}

/// Cluster-aligned partial-interference instance with random baselines in
/// quarter steps on [0, 4].
pub fn partial_interference(
    clusters: usize,
    cluster_size: usize,
    treated_clusters: usize,
    seed: u64,
    cap: EnumerationCap,
) -> Result<Instance> {
    let n = clusters * cluster_size;
    let cluster_of: Vec<usize> = (0..n).map(|i| i / cluster_size).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let baseline = (0..n).map(|_| ratio(rng.gen_range(0..=16), 4)).collect();
    let space = DesignSpace::binary(n);
    let rule = OutcomeRule::PartialInterference {
        cluster_of: cluster_of.clone(),
        baseline,
        per_treated: int(1),
    };
    Ok(Instance {
        name: format!("partial-interference-{n}"),
        design: Design::cluster_complete_with_cap(cluster_of, treated_clusters, cap)?,
        mapping: ExposureMapping::individualistic(n),
        schedule: OutcomeSchedule::rule(rule, space.clone())?,
        space: Some(space),
    })
}

/// Heterogeneous no-interference instance: control outcomes in quarter steps
/// on [0, 4], effects in quarter steps on [0, 2].
pub fn no_interference_bernoulli(
    n: usize,
    p: BigRational,
    seed: u64,
    cap: EnumerationCap,
) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n)
        .map(|_| {
            let y0 = ratio(rng.gen_range(0..=16), 4);
            let effect = ratio(rng.gen_range(0..=8), 4);
            vec![y0.clone(), y0 + effect]
        })
        .collect();
    let space = DesignSpace::binary(n);
    Ok(Instance {
        name: format!("no-interference-{n}"),
        design: Design::bernoulli_with_cap(n, p, cap)?,
        mapping: ExposureMapping::individualistic(n),
        schedule: OutcomeSchedule::rule(OutcomeRule::Individualistic { values }, space.clone())?,
        space: Some(space),
    })
}
