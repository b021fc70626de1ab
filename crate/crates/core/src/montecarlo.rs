//! Replication harness: exact expectations over the design, seeded
//! replications, coverage studies and consistency sweeps.
//!
//! Draw `k` of a run with master seed `s` uses `split_seed(s, k)` as its
//! ChaCha8 seed. Per-draw results are collected in draw order and reduced by
//! pairwise summation, so summaries are bit-identical for any thread count.

use std::time::{Duration, Instant};

use num::rational::BigRational;
use num::traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assumptions::{dependence_sum, regularity_diagnostics};
use crate::corpus::Generator;
use crate::design::{split_seed, Design};
use crate::error::{Error, Result};
use crate::estimands::{
    aeed, aepo, resolve_epos, resolve_probabilities, ProbabilityOptions, Provenance,
};
use crate::estimation::{wald_ci, Estimator, Prediction, Target};
use crate::exposure::{ExposureMapping, Label};
use crate::outcomes::{ObservedData, OutcomeSchedule};
use crate::scalar::{Exact, Scalar};

/// Which statistic to average over the design.
#[derive(Debug, Clone, PartialEq)]
pub enum Statistic {
    Point,
    /// Unbiased variance estimate (AEPO targets; needs every π_ij > 0).
    HtVariance,
    ConservativeVariance,
    /// Regression-adjusted point estimate with fixed coefficients.
    RegressionAdjusted {
        covariates: Vec<Vec<BigRational>>,
        prediction: Prediction,
        beta: Vec<BigRational>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub target: Target,
    pub level: f64,
    /// Average over these units only (all units if `None`).
    pub units: Option<Vec<usize>>,
    pub probabilities: ProbabilityOptions,
    /// Also compute the exact expectation of the estimator by enumeration.
    pub exact: bool,
}

impl EstimatorConfig {
    pub fn new(target: Target) -> Self {
        EstimatorConfig {
            target,
            level: 0.95,
            units: None,
            probabilities: ProbabilityOptions::default(),
            exact: false,
        }
    }

    pub fn with_level(mut self, level: f64) -> Self {
        self.level = level;
        self
    }

    pub fn with_units(mut self, units: Vec<usize>) -> Self {
        self.units = Some(units);
        self
    }

    pub fn with_exact(mut self, exact: bool) -> Self {
        self.exact = exact;
        self
    }
}

fn statistic_value(
    est: &Estimator<BigRational>,
    target: Target,
    statistic: &Statistic,
    data: &ObservedData<BigRational>,
) -> Result<BigRational> {
    let (y, d) = (&data.y, &data.d);
    match (statistic, target) {
        (Statistic::Point, Target::Aepo(a)) => est.ht(y, d, a),
        (Statistic::Point, Target::Aeed(a, b)) => est.contrast(y, d, a, b),
        (Statistic::HtVariance, Target::Aepo(a)) => est.ht_variance(y, d, a),
        (Statistic::HtVariance, Target::Aeed(a, b)) if a == b => Ok(BigRational::zero()),
        (Statistic::HtVariance, Target::Aeed(..)) => Err(Error::InvalidParameter(
            "no unbiased variance estimator for a contrast; use the conservative one".into(),
        )),
        (Statistic::ConservativeVariance, Target::Aepo(a)) => est.conservative_variance(y, d, a),
        (Statistic::ConservativeVariance, Target::Aeed(a, b)) => {
            est.contrast_conservative_variance(y, d, a, b)
        }
        (
            Statistic::RegressionAdjusted {
                covariates,
                prediction,
                beta,
            },
            t,
        ) => {
            let ra = |l: Label| est.regression_adjusted(y, d, l, covariates, prediction, beta);
            match t {
                Target::Aepo(a) => ra(a),
                Target::Aeed(a, b) => Ok(ra(a)? - ra(b)?),
            }
        }
    }
}

/// Σ_z mass(z) · statistic(realization at z), exactly.
pub fn exact_expectation(
    design: &Design,
    mapping: &ExposureMapping,
    schedule: &OutcomeSchedule,
    config: &EstimatorConfig,
    statistic: &Statistic,
) -> Result<BigRational> {
    let support = design.support()?;
    let labels = config.target.labels();
    let probs = resolve_probabilities::<BigRational>(
        design,
        mapping,
        &labels,
        ProbabilityOptions::default(),
    )?;
    let est = Estimator::new(&probs, &labels, config.units.as_deref())?;
    let terms = support
        .par_iter()
        .map(|p| {
            let data = ObservedData::realize(schedule, mapping, &p.z)?;
            Ok(&p.mass * statistic_value(&est, config.target, statistic, &data)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(terms
        .into_iter()
        .fold(BigRational::zero(), |acc, t| acc + t))
}

/// The exact AEPO or AEED over `units`: by enumeration when possible, else
/// from closed-form EPOs. `None` when neither is available.
pub fn exact_estimand(
    design: &Design,
    mapping: &ExposureMapping,
    schedule: &OutcomeSchedule,
    target: Target,
    units: Option<&[usize]>,
) -> Result<Option<BigRational>> {
    if design.is_enumerable() {
        return match target {
            Target::Aepo(d) => aepo(design, mapping, schedule, d, units).map(Some),
            Target::Aeed(d, d2) => aeed(design, mapping, schedule, d, d2, units).map(Some),
        };
    }
    let mean = |d: Label| -> Result<Option<BigRational>> {
        let Some(epos) = resolve_epos(design, mapping, schedule, d)? else {
            return Ok(None);
        };
        let idx: Vec<usize> = units.map_or_else(|| (0..epos.len()).collect(), <[usize]>::to_vec);
        if idx.is_empty() {
            return Err(Error::EmptyTrim);
        }
        let total = idx
            .iter()
            .fold(BigRational::zero(), |acc, &i| acc + &epos[i]);
        Ok(Some(total / BigRational::from_integer(idx.len().into())))
    };
    Ok(match target {
        Target::Aepo(d) => mean(d)?,
        Target::Aeed(d, d2) if d == d2 => Some(BigRational::zero()),
        Target::Aeed(d, d2) => match (mean(d)?, mean(d2)?) {
            (Some(a), Some(b)) => Some(a - b),
            _ => None,
        },
    })
}

/// Sum with pairwise splitting; the order of operations depends only on the
/// length of the input.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// One replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub replication: u64,
    pub seed: u64,
    pub point: f64,
    pub var_cons: f64,
    pub ci: [f64; 2],
    pub covers: Option<bool>,
}

impl Draw {
    pub const CSV_HEADER: [&'static str; 7] = [
        "replication",
        "seed",
        "point",
        "var_cons",
        "ci_lo",
        "ci_hi",
        "covers",
    ];

    pub fn csv_row(&self) -> [String; 7] {
        [
            self.replication.to_string(),
            self.seed.to_string(),
            self.point.to_string(),
            self.var_cons.to_string(),
            self.ci[0].to_string(),
            self.ci[1].to_string(),
            self.covers.map_or(String::new(), |c| c.to_string()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub target: Target,
    #[serde(rename = "R")]
    pub r: u64,
    pub seed: u64,
    pub level: f64,
    pub mean: f64,
    /// Sample variance of the estimates; `None` when R = 1.
    pub variance: Option<f64>,
    /// sqrt(variance / R).
    pub std_error: Option<f64>,
    pub min: f64,
    pub max: f64,
    /// Exact estimand.
    pub truth: Option<Exact>,
    /// Exact expectation of the estimator over the design (when requested).
    pub exact_expectation: Option<Exact>,
    /// exact_expectation − truth.
    pub exact_bias: Option<Exact>,
    /// mean − truth.
    pub bias: Option<f64>,
    pub rmse: Option<f64>,
    /// Share of Wald intervals (conservative variance) covering the truth.
    pub coverage: Option<f64>,
    pub mean_var_cons: f64,
    /// Draws whose conservative variance estimate was negative (clamped to 0).
    pub negative_variance_draws: u64,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Never written to report files, so reruns stay byte-identical.
    #[serde(skip)]
    pub wall_time: Duration,
    #[serde(skip)]
    pub draws: Vec<Draw>,
}

impl ReplicationSummary {
    pub const CSV_HEADER: [&'static str; 13] = [
        "target",
        "R",
        "seed",
        "level",
        "mean",
        "variance",
        "std_error",
        "truth",
        "bias",
        "rmse",
        "coverage",
        "mean_var_cons",
        "negative_variance_draws",
    ];

    pub fn csv_row(&self) -> [String; 13] {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        [
            self.target.to_string(),
            self.r.to_string(),
            self.seed.to_string(),
            self.level.to_string(),
            self.mean.to_string(),
            opt(self.variance),
            opt(self.std_error),
            opt(self.truth.as_ref().map(|t| t.0.to_f64())),
            opt(self.bias),
            opt(self.rmse),
            opt(self.coverage),
            self.mean_var_cons.to_string(),
            self.negative_variance_draws.to_string(),
        ]
    }
}

/// `r` seeded replications of the HT estimator with conservative Wald
/// intervals. Coverage and bias are measured against the exact estimand
/// whenever it is available.
pub fn replicate(
    design: &Design,
    mapping: &ExposureMapping,
    schedule: &OutcomeSchedule,
    config: &EstimatorConfig,
    r: u64,
    seed: u64,
) -> Result<ReplicationSummary> {
    if r == 0 {
        return Err(Error::InvalidParameter("R must be at least 1".into()));
    }
    let started = Instant::now();
    let target = config.target;
    let labels = target.labels();
    let probs = resolve_probabilities::<f64>(design, mapping, &labels, config.probabilities)?;
    let est = Estimator::new(&probs, &labels, config.units.as_deref())?;
    let truth = exact_estimand(design, mapping, schedule, target, Some(est.units()))?;
    let truth_f = truth.as_ref().map(Scalar::to_f64);

    let draws = (0..r)
        .into_par_iter()
        .map(|k| {
            let s = split_seed(seed, k);
            let data = ObservedData::realize_f64(schedule, mapping, &design.sample(s))?;
            let (point, var_cons) = match target {
                Target::Aepo(d) => (
                    est.ht(&data.y, &data.d, d)?,
                    est.conservative_variance(&data.y, &data.d, d)?,
                ),
                Target::Aeed(d, d2) => (
                    est.contrast(&data.y, &data.d, d, d2)?,
                    est.contrast_conservative_variance(&data.y, &data.d, d, d2)?,
                ),
            };
            let (lo, hi) = wald_ci(point, var_cons.max(0.0), config.level)?;
            let covers = truth_f.map(|t| lo <= t && t <= hi);
            Ok(Draw {
                replication: k,
                seed: s,
                point,
                var_cons,
                ci: [lo, hi],
                covers,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let rf = r as f64;
    let points: Vec<f64> = draws.iter().map(|d| d.point).collect();
    let mean = pairwise_sum(&points) / rf;
    let mut notes = Vec::new();
    let variance = if r > 1 {
        let sq: Vec<f64> = points.iter().map(|p| (p - mean) * (p - mean)).collect();
        Some(pairwise_sum(&sq) / (rf - 1.0))
    } else {
        notes.push("empirical variance undefined for a single replication".to_string());
        None
    };
    let rmse = truth_f.map(|t| {
        let sq: Vec<f64> = points.iter().map(|p| (p - t) * (p - t)).collect();
        (pairwise_sum(&sq) / rf).sqrt()
    });
    let coverage =
        truth_f.map(|_| draws.iter().filter(|d| d.covers == Some(true)).count() as f64 / rf);
    if truth.is_none() {
        notes.push("no exact estimand available; bias, RMSE and coverage omitted".to_string());
    }
    let vars: Vec<f64> = draws.iter().map(|d| d.var_cons).collect();

    let exact_expectation = if config.exact {
        Some(exact_expectation(
            design,
            mapping,
            schedule,
            config,
            &Statistic::Point,
        )?)
    } else {
        None
    };
    let exact_bias = match (&exact_expectation, &truth) {
        (Some(e), Some(t)) => Some(Exact(e - t)),
        _ => None,
    };

    Ok(ReplicationSummary {
        target,
        r,
        seed,
        level: config.level,
        mean,
        variance,
        std_error: variance.map(|v| (v / rf).sqrt()),
        min: points.iter().copied().fold(f64::INFINITY, f64::min),
        max: points.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        bias: truth_f.map(|t| mean - t),
        truth: truth.map(Exact),
        exact_expectation: exact_expectation.map(Exact),
        exact_bias,
        rmse,
        coverage,
        mean_var_cons: pairwise_sum(&vars) / rf,
        negative_variance_draws: draws.iter().filter(|d| d.var_cons < 0.0).count() as u64,
        provenance: probs.provenance().clone(),
        notes,
        wall_time: started.elapsed(),
        draws,
    })
}

/// Share of conservative Wald intervals at `level` that cover the exact
/// estimand over `r` seeded draws.
pub fn coverage_study(
    design: &Design,
    mapping: &ExposureMapping,
    schedule: &OutcomeSchedule,
    target: Target,
    level: f64,
    r: u64,
    seed: u64,
) -> Result<f64> {
    let config = EstimatorConfig::new(target).with_level(level);
    replicate(design, mapping, schedule, &config, r, seed)?
        .coverage
        .ok_or_else(|| Error::InvalidParameter("coverage needs an exact estimand".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub truth: Option<f64>,
    pub mean: f64,
    pub bias: Option<f64>,
    pub rmse: Option<f64>,
    pub b_n: f64,
    pub c_n: Option<f64>,
    /// b_N · c_N / N².
    pub interaction: Option<f64>,
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub generator: String,
    pub target: Target,
    #[serde(rename = "R")]
    pub r: u64,
    pub seed: u64,
    pub level: f64,
    /// Ordered by N.
    pub rows: Vec<SweepRow>,
    pub note: String,
}

impl SweepResult {
    pub const CSV_HEADER: [&'static str; 9] = [
        "N",
        "truth",
        "mean",
        "bias",
        "rmse",
        "b_N",
        "c_N",
        "b_N*c_N/N^2",
        "coverage",
    ];

    pub fn csv_rows(&self) -> Vec<[String; 9]> {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        self.rows
            .iter()
            .map(|row| {
                [
                    row.n.to_string(),
                    opt(row.truth),
                    row.mean.to_string(),
                    opt(row.bias),
                    opt(row.rmse),
                    row.b_n.to_string(),
                    opt(row.c_n),
                    opt(row.interaction),
                    opt(row.coverage),
                ]
            })
            .collect()
    }
}

pub const SWEEP_CAVEAT: &str = "A finite sweep shows trends in RMSE and in the regularity ratios; \
     it cannot establish the limiting conditions, which concern sequences of populations.";

/// Runs `replicate` on generated populations of each size. Population `N`
/// is generated with seed `split_seed(seed, 2N)` and replicated with
/// `split_seed(seed, 2N + 1)`. c_N uses |ȳ_i(d)| as the outcome bound when
/// the design is too large to enumerate, which is exact when NURVA holds.
pub fn consistency_sweep(
    generator: &Generator,
    sizes: &[usize],
    config: &EstimatorConfig,
    r: u64,
    seed: u64,
) -> Result<SweepResult> {
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    let d = config.target.labels()[0];
    let mut rows = Vec::with_capacity(sizes.len());
    for n in sizes {
        let key = 2 * n as u64;
        let inst = generator.generate(n, split_seed(seed, key))?;
        let summary = replicate(
            &inst.design,
            &inst.mapping,
            &inst.schedule,
            config,
            r,
            split_seed(seed, key + 1),
        )?;
        let (b_n, c_n) = if inst.design.is_enumerable() {
            let diag = regularity_diagnostics(&inst.design, &inst.mapping, &inst.schedule, d)?;
            (diag.b_n, Some(diag.c_n))
        } else {
            let probs = resolve_probabilities::<f64>(
                &inst.design,
                &inst.mapping,
                &[d],
                config.probabilities,
            )?;
            let b = dependence_sum(&probs, d)?;
            let c = resolve_epos(&inst.design, &inst.mapping, &inst.schedule, d)?.map(|epos| {
                let pi = probs.marginal(d).expect("label requested");
                epos.iter()
                    .zip(pi)
                    .map(|(y, p)| Scalar::to_f64(y).abs() / p)
                    .fold(0.0, f64::max)
            });
            (b, c)
        };
        let n2 = (n * n) as f64;
        rows.push(SweepRow {
            n,
            truth: summary.truth.as_ref().map(|t| t.0.to_f64()),
            mean: summary.mean,
            bias: summary.bias,
            rmse: summary.rmse,
            b_n,
            c_n,
            interaction: c_n.map(|c| b_n * c / n2),
            coverage: summary.coverage,
        });
    }
    Ok(SweepResult {
        generator: generator.name().to_string(),
        target: config.target,
        r,
        seed,
        level: config.level,
        rows,
        note: SWEEP_CAVEAT.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{load_corpus, no_interference_bernoulli, partial_interference};
    use crate::design::EnumerationCap;
    use crate::estimation::ht_variance_true;
    use crate::scalar::{int, ratio};

    const L0: Label = Label(0);
    const L1: Label = Label(1);

    #[test]
    fn exact_expectations_match_estimands() {
        let h = load_corpus("household").unwrap();
        let cfg = EstimatorConfig::new(Target::Aepo(L0));
        assert_eq!(
            exact_expectation(&h.design, &h.mapping, &h.schedule, &cfg, &Statistic::Point).unwrap(),
            int(1)
        );
        assert_eq!(
            exact_expectation(
                &h.design,
                &h.mapping,
                &h.schedule,
                &cfg,
                &Statistic::ConservativeVariance
            )
            .unwrap(),
            int(1)
        );
        let alt2 = load_corpus("household-alt2").unwrap();
        let cfg = EstimatorConfig::new(Target::Aepo(L1));
        assert_eq!(
            exact_expectation(
                &alt2.design,
                &alt2.mapping,
                &alt2.schedule,
                &cfg,
                &Statistic::Point
            )
            .unwrap(),
            ratio(1, 2)
        );
    }

    #[test]
    fn household_contrast_is_constant() {
        let h = load_corpus("household").unwrap();
        let s = replicate(
            &h.design,
            &h.mapping,
            &h.schedule,
            &EstimatorConfig::new(Target::Aeed(L1, L0)),
            1000,
            3,
        )
        .unwrap();
        assert_eq!((s.min, s.max), (-1.0, -1.0));
        assert_eq!(s.coverage, Some(1.0));
        assert_eq!(s.bias, Some(0.0));
    }

    #[test]
    fn single_replication_flags_variance() {
        let h = load_corpus("household").unwrap();
        let s = replicate(
            &h.design,
            &h.mapping,
            &h.schedule,
            &EstimatorConfig::new(Target::Aepo(L0)),
            1,
            3,
        )
        .unwrap();
        assert!(s.variance.is_none() && !s.notes.is_empty());
        assert!(replicate(
            &h.design,
            &h.mapping,
            &h.schedule,
            &EstimatorConfig::new(Target::Aepo(L0)),
            0,
            3
        )
        .is_err());
    }

    #[test]
    fn replication_is_reproducible_and_thread_independent() {
        let inst = no_interference_bernoulli(40, ratio(1, 2), 9, EnumerationCap::DEFAULT).unwrap();
        let cfg = EstimatorConfig::new(Target::Aeed(L1, L0));
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                replicate(&inst.design, &inst.mapping, &inst.schedule, &cfg, 300, 17).unwrap()
            })
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(a.draws, b.draws);
    }

    #[test]
    fn bernoulli_bias_within_three_standard_errors() {
        let inst = no_interference_bernoulli(200, ratio(1, 2), 4, EnumerationCap::DEFAULT).unwrap();
        let s = replicate(
            &inst.design,
            &inst.mapping,
            &inst.schedule,
            &EstimatorConfig::new(Target::Aepo(L1)),
            2000,
            8,
        )
        .unwrap();
        assert!(s.bias.unwrap().abs() <= 3.0 * s.std_error.unwrap(), "{s:?}");
        assert_eq!(s.provenance, Provenance::Analytic);
    }

    #[test]
    fn exact_mode_reports_zero_bias() {
        let h = load_corpus("household").unwrap();
        let cfg = EstimatorConfig::new(Target::Aepo(L0)).with_exact(true);
        let s = replicate(&h.design, &h.mapping, &h.schedule, &cfg, 10, 1).unwrap();
        assert_eq!(s.exact_bias, Some(Exact(int(0))));
    }

    #[test]
    fn conservative_expectation_dominates_true_variance() {
        for seed in 0..5 {
            let inst = partial_interference(4, 2, 2, seed, EnumerationCap::DEFAULT).unwrap();
            let cfg = EstimatorConfig::new(Target::Aepo(L1));
            let e = exact_expectation(
                &inst.design,
                &inst.mapping,
                &inst.schedule,
                &cfg,
                &Statistic::ConservativeVariance,
            )
            .unwrap();
            assert!(
                e >= ht_variance_true(&inst.design, &inst.mapping, &inst.schedule, L1).unwrap()
            );
        }
    }

    #[test]
    fn sweep_rows_are_ordered_and_b_n_is_linear() {
        let cfg = EstimatorConfig::new(Target::Aepo(L1));
        let g = Generator::PartialInterference { cluster_size: 2 };
        let sweep = consistency_sweep(&g, &[40, 20, 10], &cfg, 50, 2).unwrap();
        let ns: Vec<usize> = sweep.rows.iter().map(|r| r.n).collect();
        assert_eq!(ns, vec![10, 20, 40]);
        let per_unit: Vec<f64> = sweep.rows.iter().map(|r| r.b_n / r.n as f64).collect();
        for w in per_unit.windows(2) {
            assert!(w[1] <= w[0] * 1.5 && w[1] >= w[0] / 1.5, "{per_unit:?}");
        }
        assert_eq!(sweep.note, SWEEP_CAVEAT);
    }

    #[test]
    fn pairwise_sum_is_accurate() {
        let v = vec![0.1; 1000];
        assert!((pairwise_sum(&v) - 100.0).abs() < 1e-12);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}
