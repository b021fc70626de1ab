//! NURVA and SUTVA checks with counterexample extraction, and the regularity
//! diagnostics used by consistency sweeps.
//!
//! Both checks build, for every (unit, exposure) cell, the set of outcome
//! values observed over a vector set: the design support for NURVA, the
//! design space for SUTVA. An assumption holds iff every cell is a singleton.

use num::rational::BigRational;
use num::traits::{Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{AssignmentVector, Design, DesignSpace, EnumerationCap};
use crate::error::{Error, Result};
use crate::estimands::{exposure_probabilities, ExposureProbabilities};
use crate::exposure::{ExposureMapping, Label};
use crate::outcomes::OutcomeSchedule;
use crate::scalar::{decimal12, Exact, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    Support,
    DesignSpace,
}

/// Unit i shares exposure d under z and z' but y_i(z) != y_i(z').
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub unit: usize,
    pub label: Label,
    pub z: AssignmentVector,
    pub z_prime: AssignmentVector,
    pub y: Exact,
    pub y_prime: Exact,
}

impl Counterexample {
    /// Re-evaluates mapping and schedule at the cited pair.
    pub fn reverifies(
        &self,
        mapping: &ExposureMapping,
        schedule: &OutcomeSchedule,
        tolerance: &BigRational,
    ) -> Result<bool> {
        let i = self.unit;
        let same_label = mapping.label_of(i, &self.z)? == self.label
            && mapping.label_of(i, &self.z_prime)? == self.label;
        let (y, y2) = (
            schedule.lookup(i, &self.z)?,
            schedule.lookup(i, &self.z_prime)?,
        );
        Ok(same_label && y == self.y.0 && y2 == self.y_prime.0 && (&y - &y2).abs() > *tolerance)
    }
}

impl std::fmt::Display for Counterexample {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "unit {} (exposure {}): y({}) = {} but y({}) = {}",
            self.unit, self.label, self.z, self.y.0, self.z_prime, self.y_prime.0
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionVerdict {
    pub holds: bool,
    pub scope: Scope,
    /// Canonical counterexample; see [`check_nurva`] for the ordering.
    pub counterexample: Option<Counterexample>,
    /// First counterexample in every violating (unit, exposure) cell.
    pub violations: Vec<Counterexample>,
    /// Outcome differences at or below this count as equal.
    pub tolerance: Exact,
    /// Vectors of the scanned set where the mapping is undefined; skipped.
    pub undefined_exposures: Vec<AssignmentVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOptions {
    pub tolerance: BigRational,
    /// Stop at the first violating unit instead of listing every cell.
    pub early_exit: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            tolerance: BigRational::zero(),
            early_exit: false,
        }
    }
}

struct Row {
    z: AssignmentVector,
    d: Vec<Label>,
    y: Vec<BigRational>,
}

fn scan(
    vectors: Vec<AssignmentVector>,
    mapping: &ExposureMapping,
    schedule: &OutcomeSchedule,
    scope: Scope,
    options: &CheckOptions,
) -> Result<AssumptionVerdict> {
    let n = mapping.n();
    if schedule.n() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: schedule.n(),
        });
    }
    let mut vectors = vectors;
    vectors.sort();
    // Ok(Err(z)) marks a vector where the mapping is undefined.
    let evaluated: Vec<Result<std::result::Result<Row, AssignmentVector>>> = vectors
        .into_par_iter()
        .map(|z| match mapping.apply(&z) {
            Ok(d) => Ok(Ok(Row {
                y: schedule.row(&z)?,
                d,
                z,
            })),
            Err(Error::ExposureUndefined { .. }) => Ok(Err(z)),
            Err(e) => Err(e),
        })
        .collect();
    let mut rows = Vec::new();
    let mut undefined = Vec::new();
    for r in evaluated {
        match r? {
            Ok(row) => rows.push(row),
            Err(z) => undefined.push(z),
        }
    }
    let tol = &options.tolerance;
    let per_unit: Vec<Vec<Counterexample>> = (0..n)
        .into_par_iter()
        .map(|i| unit_violations(&rows, i, tol))
        .collect();
    let mut violations = Vec::new();
    for v in per_unit {
        let stop = options.early_exit && !v.is_empty();
        violations.extend(v);
        if stop {
            break;
        }
    }
    Ok(AssumptionVerdict {
        holds: violations.is_empty(),
        scope,
        counterexample: violations.first().cloned(),
        violations,
        tolerance: Exact(tol.clone()),
        undefined_exposures: undefined,
    })
}

/// Violations for unit i, one per cell, cells in descending label order.
/// Within a cell the pair is (first vector, first vector whose outcome
/// differs from it) in lexicographic order.
fn unit_violations(rows: &[Row], i: usize, tol: &BigRational) -> Vec<Counterexample> {
    let mut labels: Vec<Label> = rows.iter().map(|r| r.d[i]).collect();
    labels.sort();
    labels.dedup();
    labels.reverse();
    let mut out = Vec::new();
    for d in labels {
        let mut cell = rows.iter().filter(|r| r.d[i] == d);
        let first = cell.next().expect("label seen");
        if let Some(other) = cell.find(|r| (&r.y[i] - &first.y[i]).abs() > *tol) {
            out.push(Counterexample {
                unit: i,
                label: d,
                z: first.z.clone(),
                z_prime: other.z.clone(),
                y: Exact(first.y[i].clone()),
                y_prime: Exact(other.y[i].clone()),
            });
        }
    }
    out
}

/// NURVA: outcomes constant within each (unit, exposure) cell over the
/// design support. The canonical counterexample is the one for the lowest
/// unit, scanning exposures from the highest code down, then the
/// lexicographically smallest pair.
pub fn check_nurva(
    design: &Design,
    mapping: &ExposureMapping,
    schedule: &OutcomeSchedule,
) -> Result<AssumptionVerdict> {
    check_nurva_with(design, mapping, schedule, &CheckOptions::default())
}

pub fn check_nurva_with(
    design: &Design,
    mapping: &ExposureMapping,
    schedule: &OutcomeSchedule,
    options: &CheckOptions,
) -> Result<AssumptionVerdict> {
    if design.n() != mapping.n() {
        return Err(Error::LengthMismatch {
            expected: design.n(),
            found: mapping.n(),
        });
    }
    let vectors = design.support()?.iter().map(|p| p.z.clone()).collect();
    let verdict = scan(vectors, mapping, schedule, Scope::Support, options)?;
    // The mapping must be total on the support.
    match verdict.undefined_exposures.first() {
        Some(z) => Err(Error::ExposureUndefined {
            vector: z.0.clone(),
        }),
        None => Ok(verdict),
    }
}

/// SUTVA: the same scan over the full design space. Vectors where the
/// mapping is undefined are listed and skipped; the schedule must be defined
/// everywhere.
pub fn check_sutva(
    space: &DesignSpace,
    mapping: &ExposureMapping,
    schedule: &OutcomeSchedule,
) -> Result<AssumptionVerdict> {
    check_sutva_with(
        space,
        mapping,
        schedule,
        &CheckOptions::default(),
        EnumerationCap::from_env(),
    )
}

pub fn check_sutva_with(
    space: &DesignSpace,
    mapping: &ExposureMapping,
    schedule: &OutcomeSchedule,
    options: &CheckOptions,
    cap: EnumerationCap,
) -> Result<AssumptionVerdict> {
    if space.n() != mapping.n() {
        return Err(Error::LengthMismatch {
            expected: space.n(),
            found: mapping.n(),
        });
    }
    scan(
        space.enumerate(cap)?,
        mapping,
        schedule,
        Scope::DesignSpace,
        options,
    )
}

/// Appendix-style regularity quantities for one exposure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityDiagnostics {
    pub n: usize,
    pub label: Label,
    /// max over units and compatible support vectors of |y_i(z)| / π_i(d).
    pub c_n: f64,
    /// Σ_ij |π_ij(d) − π_i(d) π_j(d)|.
    pub b_n: f64,
    pub interaction: f64,
    pub c_over_n: f64,
    pub b_over_n2: f64,
    pub interaction_over_n2: f64,
}

impl RegularityDiagnostics {
    fn new(n: usize, label: Label, c_n: f64, b_n: f64) -> Self {
        let nf = n as f64;
        RegularityDiagnostics {
            n,
            label,
            c_n,
            b_n,
            interaction: b_n * c_n,
            c_over_n: c_n / nf,
            b_over_n2: b_n / (nf * nf),
            interaction_over_n2: b_n * c_n / (nf * nf),
        }
    }

    pub const CSV_HEADER: [&'static str; 8] = [
        "N",
        "label",
        "c_N",
        "b_N",
        "b_N*c_N",
        "c_N/N",
        "b_N/N^2",
        "b_N*c_N/N^2",
    ];

    pub fn csv_row(&self) -> [String; 8] {
        [
            self.n.to_string(),
            self.label.to_string(),
            decimal12(self.c_n),
            decimal12(self.b_n),
            decimal12(self.interaction),
            decimal12(self.c_over_n),
            decimal12(self.b_over_n2),
            decimal12(self.interaction_over_n2),
        ]
    }
}

/// b_N from a probability table.
pub fn dependence_sum<T: Scalar>(probs: &ExposureProbabilities<T>, d: Label) -> Result<T> {
    let pi = probs.marginal(d)?;
    let mut total = T::zero();
    for i in 0..probs.n() {
        for j in 0..probs.n() {
            let cov = probs.joint(i, d, j, d)?.clone() - pi[i].clone() * pi[j].clone();
            total = total + cov.abs();
        }
    }
    Ok(total)
}

/// Exact diagnostics by support enumeration.
pub fn regularity_diagnostics(
    design: &Design,
    mapping: &ExposureMapping,
    schedule: &OutcomeSchedule,
    d: Label,
) -> Result<RegularityDiagnostics> {
    let probs = exposure_probabilities(design, mapping, &[d])?;
    let pi = probs.marginal(d)?;
    if let Some(i) = pi.iter().position(Zero::is_zero) {
        let units = (i..pi.len()).filter(|&j| pi[j].is_zero()).collect();
        return Err(Error::Positivity { label: d, units });
    }
    let mut c = BigRational::zero();
    for p in design.support()? {
        let labels = mapping.apply(&p.z)?;
        let y = schedule.row(&p.z)?;
        for i in 0..design.n() {
            if labels[i] == d {
                let v = y[i].abs() / &pi[i];
                if v > c {
                    c = v;
                }
            }
        }
    }
    let b = dependence_sum(&probs, d)?;
    Ok(RegularityDiagnostics::new(
        design.n(),
        d,
        Scalar::to_f64(&c),
        Scalar::to_f64(&b),
    ))
}

/// Diagnostics from a probability table and per-unit bounds on |y_i(z)| over
/// the cell, for designs too large to enumerate.
pub fn regularity_from_parts<T: Scalar>(
    probs: &ExposureProbabilities<T>,
    d: Label,
    max_abs_outcome: &[f64],
) -> Result<RegularityDiagnostics> {
    let pi = probs.marginal(d)?;
    if max_abs_outcome.len() != pi.len() {
        return Err(Error::Dimension(format!(
            "{} outcome bounds for {} units",
            max_abs_outcome.len(),
            pi.len()
        )));
    }
    let offending: Vec<usize> = (0..pi.len()).filter(|&i| pi[i].is_zero()).collect();
    if !offending.is_empty() {
        return Err(Error::Positivity {
            label: d,
            units: offending,
        });
    }
    let c = (0..pi.len())
        .map(|i| max_abs_outcome[i] / pi[i].to_f64())
        .fold(0.0, f64::max);
    Ok(RegularityDiagnostics::new(
        probs.n(),
        d,
        c,
        dependence_sum(probs, d)?.to_f64(),
    ))
}
