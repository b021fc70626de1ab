//! Exposure probabilities and the design-dependent targets EPO, AEPO, EED
//! and AEED, computed by weighted enumeration of the design support.

pub mod probabilities;

use std::collections::BTreeMap;

use num::rational::BigRational;
use num::traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{Design, DesignKind};
use crate::error::{Error, Result};
use crate::exposure::{ExposureMapping, ExposureRule, Label};
use crate::outcomes::{OutcomeRule, OutcomeSchedule};
use crate::scalar::{decimal12, Exact, Scalar};

pub use probabilities::{
    analytic_probabilities, exposure_probabilities, monte_carlo_probabilities,
    resolve_probabilities, ExposureProbabilities, ProbabilitiesReport, ProbabilityOptions,
    Provenance,
};

/// Per-(unit, label) totals from one pass over the support: Pr[D_i = d],
/// Σ mass · y_i(z) over compatible z, and whether any compatible cell
/// holds a survey placeholder.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureCells {
    pub n: usize,
    pub labels: Vec<Label>,
    pub mass: Vec<Vec<BigRational>>,
    pub weighted: Vec<Vec<BigRational>>,
    pub touches_placeholder: Vec<Vec<bool>>,
}

impl ExposureCells {
    fn zero(n: usize, labels: Vec<Label>) -> Self {
        let k = labels.len();
        ExposureCells {
            n,
            labels,
            mass: vec![vec![BigRational::zero(); n]; k],
            weighted: vec![vec![BigRational::zero(); n]; k],
            touches_placeholder: vec![vec![false; n]; k],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for a in 0..self.labels.len() {
            for i in 0..self.n {
                self.mass[a][i] += &other.mass[a][i];
                self.weighted[a][i] += &other.weighted[a][i];
                self.touches_placeholder[a][i] |= other.touches_placeholder[a][i];
            }
        }
        self
    }

    fn index(&self, d: Label) -> Result<usize> {
        self.labels
            .iter()
            .position(|&l| l == d)
            .ok_or_else(|| Error::InvalidParameter(format!("exposure {d} was not accumulated")))
    }

    /// ȳ_i(d) for every unit; `None` where π_i(d) = 0.
    pub fn epos(&self, d: Label) -> Result<Vec<Option<BigRational>>> {
        let a = self.index(d)?;
        Ok((0..self.n)
            .map(|i| {
                let m = &self.mass[a][i];
                (!m.is_zero()).then(|| &self.weighted[a][i] / m)
            })
            .collect())
    }

    pub fn pi(&self, d: Label) -> Result<&[BigRational]> {
        Ok(&self.mass[self.index(d)?])
    }
}

/// Accumulates the EPO ingredients for `labels` in one support pass.
pub fn accumulate_cells(
    design: &Design,
    mapping: &ExposureMapping,
    schedule: &OutcomeSchedule,
    labels: &[Label],
) -> Result<ExposureCells> {
    let n = design.n();
    for found in [mapping.n(), schedule.n()] {
        if found != n {
            return Err(Error::LengthMismatch { expected: n, found });
        }
    }
    let mut labels = labels.to_vec();
    labels.sort();
    labels.dedup();
    let support = design.support()?;
    let chunk = (support.len() / (4 * rayon::current_num_threads()).max(1)).max(64);
    support
        .par_chunks(chunk)
        .map(|points| {
            let mut acc = ExposureCells::zero(n, labels.clone());
            for p in points {
                let d = mapping.apply(&p.z)?;
                let y = schedule.row(&p.z)?;
                for i in 0..n {
                    if let Some(a) = labels.iter().position(|&l| l == d[i]) {
                        acc.mass[a][i] += &p.mass;
                        acc.weighted[a][i] += &p.mass * &y[i];
                        acc.touches_placeholder[a][i] |= schedule.is_placeholder_cell(i, &p.z);
                    }
                }
            }
            Ok(acc)
        })
        .try_reduce(
            || ExposureCells::zero(n, labels.clone()),
            |a, b| Ok(a.merge(b)),
        )
}

/// ȳ_i(d) = E[y_i(Z) | D_i = d].
pub fn epo(
    design: &Design,
    mapping: &ExposureMapping,
    schedule: &OutcomeSchedule,
    i: usize,
    d: Label,
) -> Result<BigRational> {
    if i >= design.n() {
        return Err(Error::Dimension(format!(
            "unit {i} outside population of {}",
            design.n()
        )));
    }
    accumulate_cells(design, mapping, schedule, &[d])?.epos(d)?[i]
        .clone()
        .ok_or(Error::Positivity {
            label: d,
            units: vec![i],
        })
}

fn mean_over(
    epos: &[Option<BigRational>],
    d: Label,
    included: Option<&[usize]>,
) -> Result<BigRational> {
    let all: Vec<usize> = (0..epos.len()).collect();
    let units = included.unwrap_or(&all);
    if units.is_empty() {
        return Err(Error::EmptyTrim);
    }
    let missing: Vec<usize> = units
        .iter()
        .copied()
        .filter(|&i| epos.get(i).is_none_or(Option::is_none))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Positivity {
            label: d,
            units: missing,
        });
    }
    let total: BigRational = units
        .iter()
        .map(|&i| epos[i].clone().expect("checked"))
        .sum();
    Ok(total / BigRational::from_integer(units.len().into()))
}

/// ȳ(d), the mean EPO over all units or over `included`.
pub fn aepo(
    design: &Design,
    mapping: &ExposureMapping,
    schedule: &OutcomeSchedule,
    d: Label,
    included: Option<&[usize]>,
) -> Result<BigRational> {
    let cells = accumulate_cells(design, mapping, schedule, &[d])?;
    mean_over(&cells.epos(d)?, d, included)
}

/// τ(d, d') = ȳ(d) − ȳ(d').
pub fn aeed(
    design: &Design,
    mapping: &ExposureMapping,
    schedule: &OutcomeSchedule,
    d: Label,
    d2: Label,
    included: Option<&[usize]>,
) -> Result<BigRational> {
    let cells = accumulate_cells(design, mapping, schedule, &[d, d2])?;
    Ok(mean_over(&cells.epos(d)?, d, included)? - mean_over(&cells.epos(d2)?, d2, included)?)
}

/// Unit-level differences τ_i(d, d') = ȳ_i(d) − ȳ_i(d').
pub fn eed(
    design: &Design,
    mapping: &ExposureMapping,
    schedule: &OutcomeSchedule,
    d: Label,
    d2: Label,
) -> Result<Vec<Option<BigRational>>> {
    let cells = accumulate_cells(design, mapping, schedule, &[d, d2])?;
    Ok(cells
        .epos(d)?
        .into_iter()
        .zip(cells.epos(d2)?)
        .map(|(a, b)| Some(a? - b?))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositivityStatus {
    pub label: Label,
    pub holds: bool,
    /// Units with π_i(d) = 0.
    pub offending: Vec<usize>,
}

/// Individual positivity: min_i π_i(d) > 0.
pub fn check_positivity<T: Scalar>(
    probs: &ExposureProbabilities<T>,
    d: Label,
) -> Result<PositivityStatus> {
    let offending: Vec<usize> = probs
        .marginal(d)?
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_zero())
        .map(|(i, _)| i)
        .collect();
    Ok(PositivityStatus {
        label: d,
        holds: offending.is_empty(),
        offending,
    })
}

/// Units with π_i(d) > 0 and π_i(d') > 0.
pub fn trim_population<T: Scalar>(
    probs: &ExposureProbabilities<T>,
    d: Label,
    d2: Label,
) -> Result<Vec<usize>> {
    let (a, b) = (probs.marginal(d)?, probs.marginal(d2)?);
    let kept: Vec<usize> = (0..probs.n())
        .filter(|&i| !a[i].is_zero() && !b[i].is_zero())
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyTrim);
    }
    Ok(kept)
}

/// EPOs that follow from the structure of the instance without touching the
/// support, for designs too large to enumerate:
/// * own-code mapping with a no-interference rule: ȳ_i(d) = values_i[d];
/// * individualistic mapping, partial-interference rule and a design that
///   treats whole clusters of the same partition: ȳ_i(1) = baseline_i +
///   per_treated · |cluster_i|, ȳ_i(0) = baseline_i.
pub fn analytic_epos(
    design: &Design,
    mapping: &ExposureMapping,
    schedule: &OutcomeSchedule,
    d: Label,
) -> Option<Vec<BigRational>> {
    if schedule.is_survey() {
        return None;
    }
    let code = u32::try_from(d.0).ok()?;
    match (mapping.rule(), schedule.rule_spec()?) {
        (ExposureRule::Individualistic, OutcomeRule::Individualistic { values }) => values
            .iter()
            .map(|row| row.get(code as usize).cloned())
            .collect(),
        (
            ExposureRule::Individualistic,
            OutcomeRule::PartialInterference {
                cluster_of,
                baseline,
                per_treated,
            },
        ) => {
            let DesignKind::ClusterComplete {
                cluster_of: blocks, ..
            } = design.kind()
            else {
                return None;
            };
            if blocks != cluster_of || code > 1 {
                return None;
            }
            let mut sizes = BTreeMap::new();
            for c in cluster_of {
                *sizes.entry(*c).or_insert(0i64) += 1;
            }
            Some(
                (0..baseline.len())
                    .map(|i| {
                        let treated = if code == 1 { sizes[&cluster_of[i]] } else { 0 };
                        &baseline[i] + per_treated * BigRational::from_integer(treated.into())
                    })
                    .collect(),
            )
        }
        _ => None,
    }
}

/// EPO vector by enumeration when possible, else from [`analytic_epos`].
/// `None` when neither route applies or positivity fails somewhere.
pub fn resolve_epos(
    design: &Design,
    mapping: &ExposureMapping,
    schedule: &OutcomeSchedule,
    d: Label,
) -> Result<Option<Vec<BigRational>>> {
    if design.is_enumerable() {
        return Ok(accumulate_cells(design, mapping, schedule, &[d])?
            .epos(d)?
            .into_iter()
            .collect());
    }
    Ok(analytic_epos(design, mapping, schedule, d))
}

/// What to compute in [`compute_estimands`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EstimandRequest {
    pub labels: Vec<Label>,
    pub contrasts: Vec<(Label, Label)>,
    /// Restrict averages to units with positivity for every requested label.
    pub trim: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEstimands {
    pub label: Label,
    pub positivity: PositivityStatus,
    /// Per-unit ȳ_i(d); null where π_i(d) = 0.
    pub epo: Vec<Option<Exact>>,
    /// Mean over included units; null when positivity fails there.
    pub aepo: Option<Exact>,
    /// Some EPO for this label averages over placeholder-valued cells.
    pub touches_placeholder: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastEstimands {
    pub d: Label,
    pub d_prime: Label,
    pub eed: Vec<Option<Exact>>,
    pub aeed: Option<Exact>,
}

/// Every requested target for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimandReport {
    pub n: usize,
    pub design: String,
    /// Units the averages run over.
    pub included: Vec<usize>,
    /// Units dropped by trimming (empty unless trimming was requested).
    pub trimmed: Vec<usize>,
    /// Units to drop for positivity over all requested labels.
    pub trim_suggestion: Vec<usize>,
    pub labels: Vec<LabelEstimands>,
    pub contrasts: Vec<ContrastEstimands>,
}

impl EstimandReport {
    pub fn positivity_holds(&self) -> bool {
        self.labels.iter().all(|l| l.positivity.holds)
    }

    pub fn label(&self, d: Label) -> Option<&LabelEstimands> {
        self.labels.iter().find(|l| l.label == d)
    }

    pub fn aepo(&self, d: Label) -> Option<&BigRational> {
        self.label(d)?.aepo.as_ref().map(|e| &e.0)
    }

    pub fn aeed(&self, d: Label, d2: Label) -> Option<&BigRational> {
        self.contrasts
            .iter()
            .find(|c| c.d == d && c.d_prime == d2)?
            .aeed
            .as_ref()
            .map(|e| &e.0)
    }

    /// Rows of the per-unit EPO table: unit, label, num, den, decimal, included.
    pub fn epo_csv_rows(&self) -> Vec<[String; 6]> {
        let mut rows = Vec::new();
        for l in &self.labels {
            for (i, v) in l.epo.iter().enumerate() {
                let (num, den, dec) = match v {
                    Some(e) => (
                        e.0.numer().to_string(),
                        e.0.denom().to_string(),
                        decimal12(Scalar::to_f64(&e.0)),
                    ),
                    None => (String::new(), String::new(), String::new()),
                };
                rows.push([
                    i.to_string(),
                    l.label.to_string(),
                    num,
                    den,
                    dec,
                    self.included.contains(&i).to_string(),
                ]);
            }
        }
        rows
    }
}

/// EPOs, AEPOs and requested AEEDs in one support pass. Positivity failures
/// are reported, not raised, unless trimming empties the population.
pub fn compute_estimands(
    design: &Design,
    mapping: &ExposureMapping,
    schedule: &OutcomeSchedule,
    request: &EstimandRequest,
) -> Result<EstimandReport> {
    let mut labels = request.labels.clone();
    for &(d, d2) in &request.contrasts {
        labels.extend([d, d2]);
    }
    labels.sort();
    labels.dedup();
    let cells = accumulate_cells(design, mapping, schedule, &labels)?;
    let n = design.n();
    let keep: Vec<usize> = (0..n)
        .filter(|&i| {
            labels
                .iter()
                .all(|&d| !cells.pi(d).expect("accumulated")[i].is_zero())
        })
        .collect();
    let trim_suggestion: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
    let included = if request.trim { keep } else { (0..n).collect() };
    if included.is_empty() {
        return Err(Error::EmptyTrim);
    }
    let mut per_label = Vec::new();
    let mut epos = BTreeMap::new();
    for &d in &labels {
        let e = cells.epos(d)?;
        let a = cells.index(d)?;
        let offending: Vec<usize> = (0..n).filter(|&i| e[i].is_none()).collect();
        per_label.push(LabelEstimands {
            label: d,
            positivity: PositivityStatus {
                label: d,
                holds: offending.is_empty(),
                offending,
            },
            aepo: mean_over(&e, d, Some(&included)).ok().map(Exact),
            epo: e.iter().cloned().map(|v| v.map(Exact)).collect(),
            touches_placeholder: included.iter().any(|&i| cells.touches_placeholder[a][i]),
        });
        epos.insert(d, e);
    }
    let contrasts = request
        .contrasts
        .iter()
        .map(|&(d, d2)| {
            let (a, b) = (&epos[&d], &epos[&d2]);
            let aeed = match (
                mean_over(a, d, Some(&included)),
                mean_over(b, d2, Some(&included)),
            ) {
                (Ok(x), Ok(y)) => Some(Exact(x - y)),
                _ => None,
            };
            ContrastEstimands {
                d,
                d_prime: d2,
                eed: a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| Some(Exact(x.clone()? - y.clone()?)))
                    .collect(),
                aeed,
            }
        })
        .collect();
    Ok(EstimandReport {
        n,
        design: design.label().to_string(),
        trimmed: (0..n).filter(|i| !included.contains(i)).collect(),
        included,
        trim_suggestion,
        labels: per_label,
        contrasts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{load_corpus, Instance};
    use crate::scalar::{int, ratio};

    const L0: Label = Label(0);
    const L1: Label = Label(1);

    fn tau(inst: &Instance) -> BigRational {
        aeed(&inst.design, &inst.mapping, &inst.schedule, L1, L0, None).unwrap()
    }

    #[test]
    fn household_tables() {
        assert_eq!(tau(&load_corpus("household").unwrap()), int(-1));
        assert_eq!(tau(&load_corpus("household-alt1").unwrap()), int(1));
        assert_eq!(tau(&load_corpus("household-alt2").unwrap()), int(0));
        let swapped = load_corpus("household-swapped").unwrap();
        for alt in ["household-alt1", "household-alt2"] {
            let design = load_corpus(alt).unwrap().design;
            assert_eq!(tau(&swapped.with_design(design)), int(1));
        }
    }

    #[test]
    fn general_equilibrium_tables() {
        assert_eq!(tau(&load_corpus("job-training").unwrap()), int(1));
        assert_eq!(tau(&load_corpus("job-training-uniform").unwrap()), int(0));
        assert_eq!(tau(&load_corpus("campaign-ad").unwrap()), int(0));
        assert_eq!(tau(&load_corpus("campaign-ad-uniform").unwrap()), int(-1));
    }

    #[test]
    fn epo_and_aepo_examples() {
        let h = load_corpus("household").unwrap();
        assert_eq!(
            epo(&h.design, &h.mapping, &h.schedule, 0, L0).unwrap(),
            int(1)
        );
        assert_eq!(
            aepo(&h.design, &h.mapping, &h.schedule, L0, None).unwrap(),
            int(1)
        );
        assert_eq!(
            aepo(&h.design, &h.mapping, &h.schedule, L1, None).unwrap(),
            int(0)
        );
        let alt2 = load_corpus("household-alt2").unwrap();
        assert_eq!(
            epo(&alt2.design, &alt2.mapping, &alt2.schedule, 0, L1).unwrap(),
            ratio(1, 2)
        );
        let job = load_corpus("job-training-uniform").unwrap();
        assert_eq!(
            epo(&job.design, &job.mapping, &job.schedule, 0, L1).unwrap(),
            ratio(1, 2)
        );
        let ad = load_corpus("campaign-ad").unwrap();
        assert_eq!(
            aepo(&ad.design, &ad.mapping, &ad.schedule, L1, None).unwrap(),
            int(0)
        );
    }

    #[test]
    fn positivity_and_trimming() {
        let h = load_corpus("household").unwrap();
        let p = exposure_probabilities(&h.design, &h.mapping, &[L0, L1]).unwrap();
        assert!(check_positivity(&p, L1).unwrap().holds);
        assert_eq!(trim_population(&p, L1, L0).unwrap(), vec![0, 1]);

        let never = Design::point_mass([0, 0].into());
        let p = exposure_probabilities(&never, &h.mapping, &[L0, L1]).unwrap();
        let status = check_positivity(&p, L1).unwrap();
        assert!(!status.holds);
        assert_eq!(status.offending, vec![0, 1]);
        assert!(matches!(trim_population(&p, L1, L0), Err(Error::EmptyTrim)));
        let err = aepo(&never, &h.mapping, &h.schedule, L1, None).unwrap_err();
        assert!(matches!(err, Error::Positivity { label: L1, .. }));

        let first_always = Design::explicit(
            2,
            "",
            [([1, 0].into(), ratio(1, 2)), ([1, 1].into(), ratio(1, 2))],
        )
        .unwrap();
        let p = exposure_probabilities(&first_always, &h.mapping, &[L0, L1]).unwrap();
        assert_eq!(trim_population(&p, L1, L0).unwrap(), vec![1]);
        let trimmed = aeed(&first_always, &h.mapping, &h.schedule, L1, L0, Some(&[1])).unwrap();
        // Unit 1 votes iff unit 0 is treated, which is always.
        assert_eq!(trimmed, int(0));
    }

    #[test]
    fn swapped_mapping_passes_positivity_under_alt1() {
        let inst = load_corpus("household-swapped")
            .unwrap()
            .with_design(load_corpus("household-alt1").unwrap().design);
        let p = exposure_probabilities(&inst.design, &inst.mapping, &[L1]).unwrap();
        assert!(check_positivity(&p, L1).unwrap().holds);
    }

    #[test]
    fn report_flags_positivity_and_placeholders() {
        let h = load_corpus("household").unwrap();
        let never = h.with_design(Design::point_mass([0, 0].into()));
        let req = EstimandRequest {
            labels: vec![],
            contrasts: vec![(L1, L0)],
            trim: false,
        };
        let r = compute_estimands(&never.design, &never.mapping, &never.schedule, &req).unwrap();
        assert!(!r.positivity_holds());
        assert_eq!(r.trim_suggestion, vec![0, 1]);
        assert!(r.aeed(L1, L0).is_none());

        let rebel = load_corpus("rebel-survey").unwrap();
        let req = EstimandRequest {
            labels: vec![L0, L1],
            contrasts: vec![],
            trim: false,
        };
        let r = compute_estimands(&rebel.design, &rebel.mapping, &rebel.schedule, &req).unwrap();
        assert!(r.label(L0).unwrap().touches_placeholder);
        assert!(!r.label(L1).unwrap().touches_placeholder);
        assert_eq!(r.aepo(L1), Some(&ratio(1095, 10)));
    }

    #[test]
    fn report_serializes_exact_values() {
        let h = load_corpus("household").unwrap();
        let req = EstimandRequest {
            labels: vec![],
            contrasts: vec![(L1, L0)],
            trim: false,
        };
        let r = compute_estimands(&h.design, &h.mapping, &h.schedule, &req).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        let back: EstimandReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.aeed(L1, L0), Some(&int(-1)));
    }

    #[test]
    fn analytic_epos_agree_with_enumeration() {
        use crate::corpus::{no_interference_bernoulli, partial_interference};
        use crate::design::EnumerationCap;
        let cases = [
            no_interference_bernoulli(5, ratio(1, 2), 4, EnumerationCap::DEFAULT).unwrap(),
            partial_interference(3, 2, 1, 4, EnumerationCap::DEFAULT).unwrap(),
        ];
        for inst in cases {
            for d in [L0, L1] {
                let exact: Vec<BigRational> =
                    accumulate_cells(&inst.design, &inst.mapping, &inst.schedule, &[d])
                        .unwrap()
                        .epos(d)
                        .unwrap()
                        .into_iter()
                        .map(Option::unwrap)
                        .collect();
                assert_eq!(
                    analytic_epos(&inst.design, &inst.mapping, &inst.schedule, d).unwrap(),
                    exact
                );
            }
        }
    }
}
