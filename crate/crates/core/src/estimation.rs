//! Horvitz–Thompson estimation of AEPOs and AEEDs from one realization.
//!
//! Estimators read precomputed [`ExposureProbabilities`], so the same code
//! serves exact tables, closed forms and Monte Carlo tables. [`Estimator`]
//! caches per-pair weights and zero-joint counts; the free functions are
//! one-shot wrappers around it.
//!
//! Conservative variance. With A_i(d) = Y_i² I[D_i = d] / π_i(d) and
//! w_ij = (π_ij − π_i π_j) / (π_ij π_i π_j),
//!
//! ```text
//! N² V̂_C(d) = Σ_{π_ij > 0} w_ij Y_i Y_j I[D_i = D_j = d]
//!           + Σ_{π_ij = 0} (A_i(d) + A_j(d)) / 2
//! ```
//!
//! For τ̂(d, d') = ŷ(d) − ŷ(d') the covariance term needs the cross
//! probabilities π_{id,jd'} = Pr[D_i = d, D_j = d']. Pairs with
//! π_{id,jd'} > 0 get plug-in terms; pairs with π_{id,jd'} = 0 (always
//! including i = j) are bounded by 2 ȳ_i(d) ȳ_j(d') ≤ ȳ_i(d)² + ȳ_j(d')²:
//!
//! ```text
//! N² V̂_C(d, d') = N² V̂_C(d) + N² V̂_C(d')
//!               − 2 Σ_{π_{id,jd'} > 0} w_{id,jd'} Y_i Y_j I[D_i = d, D_j = d']
//!               + Σ_{π_{id,jd'} = 0} (A_i(d) + A_j(d'))
//! ```

use std::fmt;
use std::str::FromStr;

use num::rational::BigRational;
use num::traits::Zero;
use serde::{Deserialize, Serialize};

use crate::assumptions::check_nurva;
use crate::design::Design;
use crate::error::{Error, Result};
use crate::estimands::{
    accumulate_cells, exposure_probabilities, ExposureProbabilities, Provenance,
};
use crate::exposure::{ExposureMapping, Label};
use crate::normal::two_sided_quantile;
use crate::outcomes::{ObservedData, OutcomeSchedule};
use crate::scalar::Scalar;

/// An inferential target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    Aepo(Label),
    Aeed(Label, Label),
}

impl Target {
    pub fn labels(&self) -> Vec<Label> {
        match *self {
            Target::Aepo(d) => vec![d],
            Target::Aeed(d, d2) => vec![d, d2],
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Aepo(d) => write!(f, "aepo:{d}"),
            Target::Aeed(d, d2) => write!(f, "aeed:{d},{d2}"),
        }
    }
}

impl FromStr for Target {
    type Err = Error;

    /// `aepo:d` or `aeed:d,d'`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("target must be 'aepo:d' or 'aeed:d,d2', got '{s}'"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind.trim() {
            "aepo" => Ok(Target::Aepo(rest.parse().map_err(|_| bad())?)),
            "aeed" => {
                let (a, b) = rest.split_once(',').ok_or_else(bad)?;
                Ok(Target::Aeed(
                    a.parse().map_err(|_| bad())?,
                    b.parse().map_err(|_| bad())?,
                ))
            }
            _ => Err(bad()),
        }
    }
}

impl Serialize for Target {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Target {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Prediction function f_d(X_i, β) for regression adjustment.
pub trait PredictionFunction<T> {
    fn predict(&self, d: Label, x: &[T], beta: &[T]) -> Result<T>;
}

/// Built-in prediction functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prediction {
    /// f ≡ 0; the estimator reduces to Horvitz–Thompson.
    Zero,
    /// f ≡ β_0.
    Constant,
    /// f = X_i · β.
    Linear,
}

impl<T: Scalar> PredictionFunction<T> for Prediction {
    fn predict(&self, _d: Label, x: &[T], beta: &[T]) -> Result<T> {
        match self {
            Prediction::Zero => Ok(T::zero()),
            Prediction::Constant => match beta {
                [c] => Ok(c.clone()),
                _ => Err(Error::Dimension(format!(
                    "constant prediction takes 1 parameter, got {}",
                    beta.len()
                ))),
            },
            Prediction::Linear => {
                if x.len() != beta.len() {
                    return Err(Error::Dimension(format!(
                        "{} covariates but {} coefficients",
                        x.len(),
                        beta.len()
                    )));
                }
                Ok(x.iter()
                    .zip(beta)
                    .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone()))
            }
        }
    }
}

/// Adapter for closures `(d, x, β) -> f`.
pub struct FnPrediction<F>(pub F);

impl<T, F: Fn(Label, &[T], &[T]) -> T> PredictionFunction<T> for FnPrediction<F> {
    fn predict(&self, d: Label, x: &[T], beta: &[T]) -> Result<T> {
        Ok((self.0)(d, x, beta))
    }
}

#[derive(Debug, Clone)]
struct PairWeights<T> {
    /// w_ij for π_ij > 0, zero elsewhere; row-major over all N units.
    w: Vec<T>,
    /// Per unit, the number of included partners with π_ij = 0 (as row / as column).
    row_zero: Vec<usize>,
    col_zero: Vec<usize>,
    zero_pairs: usize,
}

/// Horvitz–Thompson estimators over a fixed probability table and unit set.
#[derive(Debug, Clone)]
pub struct Estimator<T> {
    n: usize,
    units: Vec<usize>,
    included: Vec<bool>,
    labels: Vec<Label>,
    inv_pi: Vec<Vec<T>>,
    /// At `a * K + b` for a <= b, oriented as (labels[a] at i, labels[b] at j).
    pairs: Vec<Option<PairWeights<T>>>,
    provenance: Provenance,
}

impl<T: Scalar> Estimator<T> {
    /// Prepares estimators for `labels` over `units` (all units if `None`).
    /// Fails if some included unit has π_i(d) = 0.
    pub fn new(
        probs: &ExposureProbabilities<T>,
        labels: &[Label],
        units: Option<&[usize]>,
    ) -> Result<Self> {
        let n = probs.n();
        let units: Vec<usize> = match units {
            Some(u) => {
                let mut u = u.to_vec();
                u.sort_unstable();
                u.dedup();
                if let Some(&bad) = u.iter().find(|&&i| i >= n) {
                    return Err(Error::Dimension(format!(
                        "unit {bad} outside population of {n}"
                    )));
                }
                u
            }
            None => (0..n).collect(),
        };
        if units.is_empty() {
            return Err(Error::EmptyTrim);
        }
        let mut included = vec![false; n];
        for &i in &units {
            included[i] = true;
        }
        let mut labels = labels.to_vec();
        labels.sort();
        labels.dedup();
        let mut inv_pi = Vec::with_capacity(labels.len());
        for &d in &labels {
            let pi = probs.marginal(d)?;
            let offending: Vec<usize> =
                units.iter().copied().filter(|&i| pi[i].is_zero()).collect();
            if !offending.is_empty() {
                return Err(Error::Positivity {
                    label: d,
                    units: offending,
                });
            }
            inv_pi.push(
                (0..n)
                    .map(|i| {
                        if included[i] {
                            T::one() / pi[i].clone()
                        } else {
                            T::zero()
                        }
                    })
                    .collect(),
            );
        }
        let k = labels.len();
        let mut pairs = vec![None; k * k];
        for a in 0..k {
            for b in a..k {
                pairs[a * k + b] = Some(pair_weights(probs, labels[a], labels[b], &units, n)?);
            }
        }
        Ok(Estimator {
            n,
            units,
            included,
            labels,
            inv_pi,
            pairs,
            provenance: probs.provenance().clone(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Units the estimator averages over.
    pub fn units(&self) -> &[usize] {
        &self.units
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    fn index(&self, d: Label) -> Result<usize> {
        self.labels.iter().position(|&l| l == d).ok_or_else(|| {
            Error::InvalidParameter(format!("estimator was not prepared for exposure {d}"))
        })
    }

    fn size(&self) -> T {
        T::from_i64(self.units.len() as i64)
    }

    fn check(&self, y: &[T], dvec: &[Label]) -> Result<()> {
        for found in [y.len(), dvec.len()] {
            if found != self.n {
                return Err(Error::LengthMismatch {
                    expected: self.n,
                    found,
                });
            }
        }
        Ok(())
    }

    /// Included units with D_i = d.
    fn observed(&self, dvec: &[Label], d: Label) -> Vec<usize> {
        self.units
            .iter()
            .copied()
            .filter(|&i| dvec[i] == d)
            .collect()
    }

    /// Weights for (d at i, d2 at j) plus whether the stored block is transposed.
    fn block(&self, d: Label, d2: Label) -> Result<(&PairWeights<T>, bool)> {
        let (a, b) = (self.index(d)?, self.index(d2)?);
        let k = self.labels.len();
        Ok(if a <= b {
            (self.pairs[a * k + b].as_ref().expect("prepared"), false)
        } else {
            (self.pairs[b * k + a].as_ref().expect("prepared"), true)
        })
    }

    /// Ordered pairs (i, j) of included units with π_ij(d) = 0.
    pub fn zero_joint_pairs(&self, d: Label) -> Result<usize> {
        Ok(self.block(d, d)?.0.zero_pairs)
    }

    /// Ordered pairs with Pr[D_i = d, D_j = d'] = 0.
    pub fn cross_zero_pairs(&self, d: Label, d2: Label) -> Result<usize> {
        Ok(self.block(d, d2)?.0.zero_pairs)
    }

    /// ŷ(d) = N⁻¹ Σ Y_i I[D_i = d] / π_i(d).
    pub fn ht(&self, y: &[T], dvec: &[Label], d: Label) -> Result<T> {
        self.check(y, dvec)?;
        let inv = &self.inv_pi[self.index(d)?];
        let total = self
            .observed(dvec, d)
            .into_iter()
            .fold(T::zero(), |acc, i| acc + y[i].clone() * inv[i].clone());
        Ok(total / self.size())
    }

    /// ŷ(d) − ŷ(d').
    pub fn contrast(&self, y: &[T], dvec: &[Label], d: Label, d2: Label) -> Result<T> {
        if d == d2 {
            self.check(y, dvec)?;
            self.index(d)?;
            return Ok(T::zero());
        }
        Ok(self.ht(y, dvec, d)? - self.ht(y, dvec, d2)?)
    }

    /// Σ w_{id,jd'} Y_i Y_j over observed pairs with positive joint probability.
    fn plug_in(&self, y: &[T], dvec: &[Label], d: Label, d2: Label) -> Result<T> {
        let (block, transposed) = self.block(d, d2)?;
        let rows = self.observed(dvec, d);
        let cols = self.observed(dvec, d2);
        let n = self.n;
        let mut total = T::zero();
        for &i in &rows {
            let mut row = T::zero();
            for &j in &cols {
                let w = if transposed {
                    &block.w[j * n + i]
                } else {
                    &block.w[i * n + j]
                };
                if !w.is_zero() {
                    row = row + w.clone() * y[j].clone();
                }
            }
            total = total + row * y[i].clone();
        }
        Ok(total)
    }

    /// Σ_i A_i(d) · (zero partners of i), as row (`as_row`) or column.
    fn young(
        &self,
        y: &[T],
        dvec: &[Label],
        d: Label,
        d_row: Label,
        d_col: Label,
        as_row: bool,
    ) -> Result<T> {
        let (block, transposed) = self.block(d_row, d_col)?;
        let counts = if as_row != transposed {
            &block.row_zero
        } else {
            &block.col_zero
        };
        let inv = &self.inv_pi[self.index(d)?];
        Ok(self
            .observed(dvec, d)
            .into_iter()
            .fold(T::zero(), |acc, i| {
                if counts[i] == 0 {
                    acc
                } else {
                    acc + y[i].clone()
                        * y[i].clone()
                        * inv[i].clone()
                        * T::from_i64(counts[i] as i64)
                }
            }))
    }

    /// Unbiased plug-in variance estimate; refuses if any π_ij(d) = 0.
    pub fn ht_variance(&self, y: &[T], dvec: &[Label], d: Label) -> Result<T> {
        self.check(y, dvec)?;
        let zeros = self.zero_joint_pairs(d)?;
        if zeros > 0 {
            return Err(Error::ZeroJointProbability { pairs: zeros });
        }
        let n2 = self.size() * self.size();
        Ok(self.plug_in(y, dvec, d, d)? / n2)
    }

    /// V̂_C(d): plug-in terms where π_ij > 0, Young bounds where π_ij = 0.
    pub fn conservative_variance(&self, y: &[T], dvec: &[Label], d: Label) -> Result<T> {
        self.check(y, dvec)?;
        let n2 = self.size() * self.size();
        Ok((self.plug_in(y, dvec, d, d)? + self.young(y, dvec, d, d, d, true)?) / n2)
    }

    /// V̂_C(d, d') for the contrast; zero when d = d'.
    pub fn contrast_conservative_variance(
        &self,
        y: &[T],
        dvec: &[Label],
        d: Label,
        d2: Label,
    ) -> Result<T> {
        self.check(y, dvec)?;
        if d == d2 {
            self.index(d)?;
            return Ok(T::zero());
        }
        let n2 = self.size() * self.size();
        let two = T::from_i64(2);
        let cross = self.plug_in(y, dvec, d, d2)?;
        let bound = self.young(y, dvec, d, d, d2, true)? + self.young(y, dvec, d2, d, d2, false)?;
        Ok(self.conservative_variance(y, dvec, d)?
            + self.conservative_variance(y, dvec, d2)?
            + (bound - two * cross) / n2)
    }

    /// N⁻¹ Σ (Y_i − f_d(X_i, β)) I[D_i = d] / π_i(d) + N⁻¹ Σ f_d(X_i, β).
    pub fn regression_adjusted(
        &self,
        y: &[T],
        dvec: &[Label],
        d: Label,
        x: &[Vec<T>],
        f: &dyn PredictionFunction<T>,
        beta: &[T],
    ) -> Result<T> {
        self.check(y, dvec)?;
        if x.len() != self.n {
            return Err(Error::Dimension(format!(
                "{} covariate rows for {} units",
                x.len(),
                self.n
            )));
        }
        let inv = &self.inv_pi[self.index(d)?];
        let mut total = T::zero();
        for &i in &self.units {
            let fi = f.predict(d, &x[i], beta)?;
            if dvec[i] == d {
                total = total + (y[i].clone() - fi.clone()) * inv[i].clone();
            }
            total = total + fi;
        }
        Ok(total / self.size())
    }

    /// Whether unit i is among the averaged units.
    pub fn includes(&self, i: usize) -> bool {
        self.included.get(i).copied().unwrap_or(false)
    }
}

fn pair_weights<T: Scalar>(
    probs: &ExposureProbabilities<T>,
    d: Label,
    d2: Label,
    units: &[usize],
    n: usize,
) -> Result<PairWeights<T>> {
    let (pa, pb) = (probs.marginal(d)?, probs.marginal(d2)?);
    let mut w = vec![T::zero(); n * n];
    let mut row_zero = vec![0; n];
    let mut col_zero = vec![0; n];
    let mut zero_pairs = 0;
    for &i in units {
        for &j in units {
            let pij = probs.joint(i, d, j, d2)?;
            if pij.is_zero() {
                row_zero[i] += 1;
                col_zero[j] += 1;
                zero_pairs += 1;
            } else {
                let prod = pa[i].clone() * pb[j].clone();
                w[i * n + j] = (pij.clone() - prod.clone()) / (pij.clone() * prod);
            }
        }
    }
    Ok(PairWeights {
        w,
        row_zero,
        col_zero,
        zero_pairs,
    })
}

/// Horvitz–Thompson estimate of AEPO(d).
pub fn ht_estimate<T: Scalar>(
    y: &[T],
    dvec: &[Label],
    probs: &ExposureProbabilities<T>,
    d: Label,
) -> Result<T> {
    Estimator::new(probs, &[d], None)?.ht(y, dvec, d)
}

/// Unbiased variance estimate; refuses when some π_ij(d) = 0.
pub fn ht_variance_estimate<T: Scalar>(
    y: &[T],
    dvec: &[Label],
    probs: &ExposureProbabilities<T>,
    d: Label,
) -> Result<T> {
    Estimator::new(probs, &[d], None)?.ht_variance(y, dvec, d)
}

pub fn conservative_variance_estimate<T: Scalar>(
    y: &[T],
    dvec: &[Label],
    probs: &ExposureProbabilities<T>,
    d: Label,
) -> Result<T> {
    Estimator::new(probs, &[d], None)?.conservative_variance(y, dvec, d)
}

pub fn regression_adjusted_estimate<T: Scalar>(
    y: &[T],
    dvec: &[Label],
    probs: &ExposureProbabilities<T>,
    d: Label,
    x: &[Vec<T>],
    f: &dyn PredictionFunction<T>,
    beta: &[T],
) -> Result<T> {
    Estimator::new(probs, &[d], None)?.regression_adjusted(y, dvec, d, x, f, beta)
}

/// point ± Φ⁻¹((1 + level)/2) · sqrt(variance).
pub fn wald_ci(point: f64, variance: f64, level: f64) -> Result<(f64, f64)> {
    if variance < 0.0 || variance.is_nan() {
        return Err(Error::NegativeVariance(variance));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let half = two_sided_quantile(level) * variance.sqrt();
    Ok((point - half, point + half))
}

/// One estimate with its variances and interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub target: Target,
    pub point: f64,
    /// Unbiased variance estimate; null when some needed joint probability is zero.
    pub var_ht: Option<f64>,
    pub var_cons: f64,
    /// Wald interval from `var_cons` (clamped at 0 if negative).
    pub ci: [f64; 2],
    pub level: f64,
    /// Ordered unit pairs handled by Young bounds.
    pub zero_joint_pairs: usize,
    pub trimmed: Vec<usize>,
    pub provenance: Provenance,
    /// Mean of Y over units with D_i = d (AEPO targets only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOptions {
    pub level: f64,
    pub units: Option<Vec<usize>>,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            level: 0.95,
            units: None,
        }
    }
}

/// Point estimate, both variance estimates and the Wald interval for `target`.
pub fn estimate<T: Scalar>(
    target: Target,
    data: &ObservedData<T>,
    probs: &ExposureProbabilities<T>,
    options: &EstimateOptions,
) -> Result<EstimateReport> {
    let est = Estimator::new(probs, &target.labels(), options.units.as_deref())?;
    report_from(&est, target, &data.y, &data.d, options.level)
}

/// AEED estimate with the conservative contrast variance.
pub fn aeed_estimate_with_variance<T: Scalar>(
    y: &[T],
    dvec: &[Label],
    probs: &ExposureProbabilities<T>,
    d: Label,
    d2: Label,
) -> Result<EstimateReport> {
    let est = Estimator::new(probs, &[d, d2], None)?;
    report_from(&est, Target::Aeed(d, d2), y, dvec, 0.95)
}

pub(crate) fn report_from<T: Scalar>(
    est: &Estimator<T>,
    target: Target,
    y: &[T],
    dvec: &[Label],
    level: f64,
) -> Result<EstimateReport> {
    let mut notes = Vec::new();
    let (point, var_ht, var_cons, zero_pairs, sample_mean) = match target {
        Target::Aepo(d) => {
            let observed: Vec<f64> = (0..est.n())
                .filter(|&i| est.includes(i) && dvec[i] == d)
                .map(|i| y[i].to_f64())
                .collect();
            let mean = (!observed.is_empty())
                .then(|| observed.iter().sum::<f64>() / observed.len() as f64);
            (
                est.ht(y, dvec, d)?,
                est.ht_variance(y, dvec, d).ok().map(|v| v.to_f64()),
                est.conservative_variance(y, dvec, d)?,
                est.zero_joint_pairs(d)?,
                mean,
            )
        }
        Target::Aeed(d, d2) => {
            let zeros = if d == d2 {
                0
            } else {
                notes.push(
                    "contrast variance: per-exposure conservative variances, minus plug-in cross terms \
                     where Pr[D_i=d, D_j=d'] > 0, plus Young bounds (A_i(d) + A_j(d'))/N^2 where it is 0"
                        .to_string(),
                );
                est.zero_joint_pairs(d)?
                    + est.zero_joint_pairs(d2)?
                    + est.cross_zero_pairs(d, d2)?
            };
            (
                est.contrast(y, dvec, d, d2)?,
                (d == d2).then_some(0.0),
                est.contrast_conservative_variance(y, dvec, d, d2)?,
                zeros,
                None,
            )
        }
    };
    let (point, var_cons) = (point.to_f64(), var_cons.to_f64());
    if var_cons < 0.0 {
        notes.push(format!(
            "conservative variance estimate {var_cons} is negative; interval uses 0"
        ));
    }
    let (lo, hi) = wald_ci(point, var_cons.max(0.0), level)?;
    if !est.provenance().is_exact() {
        notes.push(format!(
            "exposure probabilities estimated by {}",
            est.provenance()
        ));
    }
    Ok(EstimateReport {
        target,
        point,
        var_ht,
        var_cons,
        ci: [lo, hi],
        level,
        zero_joint_pairs: zero_pairs,
        trimmed: (0..est.n()).filter(|&i| !est.includes(i)).collect(),
        provenance: est.provenance().clone(),
        sample_mean,
        notes,
    })
}

fn covariance_sum(
    probs: &ExposureProbabilities<BigRational>,
    d: Label,
    epo_d: &[BigRational],
    d2: Label,
    epo_d2: &[BigRational],
) -> Result<BigRational> {
    let (pa, pb) = (probs.marginal(d)?, probs.marginal(d2)?);
    let mut total = BigRational::zero();
    for i in 0..probs.n() {
        for j in 0..probs.n() {
            let prod = &pa[i] * &pb[j];
            total += (probs.joint(i, d, j, d2)? - &prod) / prod * &epo_d[i] * &epo_d2[j];
        }
    }
    Ok(total)
}

fn nurva_for(
    design: &Design,
    mapping: &ExposureMapping,
    schedule: &OutcomeSchedule,
    labels: &[Label],
) -> Result<()> {
    let verdict = check_nurva(design, mapping, schedule)?;
    match verdict
        .violations
        .iter()
        .find(|c| labels.contains(&c.label))
    {
        Some(c) => Err(Error::NurvaViolated { unit: c.unit }),
        None => Ok(()),
    }
}

fn exact_epos(
    design: &Design,
    mapping: &ExposureMapping,
    schedule: &OutcomeSchedule,
    d: Label,
) -> Result<Vec<BigRational>> {
    let epos = accumulate_cells(design, mapping, schedule, &[d])?.epos(d)?;
    let missing: Vec<usize> = (0..epos.len()).filter(|&i| epos[i].is_none()).collect();
    if !missing.is_empty() {
        return Err(Error::Positivity {
            label: d,
            units: missing,
        });
    }
    Ok(epos.into_iter().map(Option::unwrap).collect())
}

/// Exact Var[ŷ(d)] = N⁻² Σ_ij (π_ij − π_i π_j)/(π_i π_j) ȳ_i(d) ȳ_j(d).
/// Requires NURVA for the cells of exposure d.
pub fn ht_variance_true(
    design: &Design,
    mapping: &ExposureMapping,
    schedule: &OutcomeSchedule,
    d: Label,
) -> Result<BigRational> {
    nurva_for(design, mapping, schedule, &[d])?;
    let epo = exact_epos(design, mapping, schedule, d)?;
    let probs = exposure_probabilities(design, mapping, &[d])?;
    let n2 = BigRational::from_integer((design.n() * design.n()).into());
    Ok(covariance_sum(&probs, d, &epo, d, &epo)? / n2)
}

/// Exact Var[ŷ(d) − ŷ(d')] under NURVA for both exposures.
pub fn contrast_variance_true(
    design: &Design,
    mapping: &ExposureMapping,
    schedule: &OutcomeSchedule,
    d: Label,
    d2: Label,
) -> Result<BigRational> {
    if d == d2 {
        return Ok(BigRational::zero());
    }
    nurva_for(design, mapping, schedule, &[d, d2])?;
    let (ea, eb) = (
        exact_epos(design, mapping, schedule, d)?,
        exact_epos(design, mapping, schedule, d2)?,
    );
    let probs = exposure_probabilities(design, mapping, &[d, d2])?;
    let n2 = BigRational::from_integer((design.n() * design.n()).into());
    let two = BigRational::from_integer(2.into());
    Ok(
        (covariance_sum(&probs, d, &ea, d, &ea)? + covariance_sum(&probs, d2, &eb, d2, &eb)?
            - two * covariance_sum(&probs, d, &ea, d2, &eb)?)
            / n2,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::load_corpus;
    use crate::design::DesignSpace;
    use crate::design::{AssignmentVector, EnumerationCap};
    use crate::outcomes::OutcomeRule;
    use crate::scalar::{int, ratio};

    const L0: Label = Label(0);
    const L1: Label = Label(1);

    fn realize(
        name: &str,
        z: [u32; 2],
    ) -> (
        ObservedData<BigRational>,
        ExposureProbabilities<BigRational>,
    ) {
        let inst = load_corpus(name).unwrap();
        let data = ObservedData::realize(&inst.schedule, &inst.mapping, &AssignmentVector::from(z))
            .unwrap();
        let probs = exposure_probabilities(&inst.design, &inst.mapping, &[L0, L1]).unwrap();
        (data, probs)
    }

    #[test]
    fn household_point_estimates() {
        let (data, probs) = realize("household", [1, 0]);
        assert_eq!(ht_estimate(&data.y, &data.d, &probs, L0).unwrap(), int(1));
        assert_eq!(ht_estimate(&data.y, &data.d, &probs, L1).unwrap(), int(0));
    }

    #[test]
    fn household_conservative_variance_is_one() {
        let (data, probs) = realize("household", [1, 0]);
        assert_eq!(
            conservative_variance_estimate(&data.y, &data.d, &probs, L0).unwrap(),
            int(1)
        );
        let err = ht_variance_estimate(&data.y, &data.d, &probs, L1).unwrap_err();
        assert!(matches!(err, Error::ZeroJointProbability { pairs: 2 }));
        let zeros = vec![int(0); 2];
        assert_eq!(
            conservative_variance_estimate(&zeros, &data.d, &probs, L0).unwrap(),
            int(0)
        );
    }

    #[test]
    fn srswor_reduces_to_sample_mean() {
        let inst = load_corpus("srswor").unwrap();
        let probs = exposure_probabilities(&inst.design, &inst.mapping, &[L1]).unwrap();
        let data =
            ObservedData::realize(&inst.schedule, &inst.mapping, &[1, 0, 1, 0].into()).unwrap();
        assert_eq!(
            ht_estimate(&data.y, &data.d, &probs, L1).unwrap(),
            ratio(7, 2)
        );
        let report =
            estimate(Target::Aepo(L1), &data, &probs, &EstimateOptions::default()).unwrap();
        assert_eq!(report.sample_mean, Some(3.5));
        assert_eq!(report.point, 3.5);
    }

    #[test]
    fn aeed_reports() {
        let (data, probs) = realize("household", [0, 1]);
        let r = aeed_estimate_with_variance(&data.y, &data.d, &probs, L1, L0).unwrap();
        assert_eq!(r.point, -1.0);
        assert!(r.var_cons > 0.0);
        assert!(r.var_ht.is_none());
        let same = aeed_estimate_with_variance(&data.y, &data.d, &probs, L1, L1).unwrap();
        assert_eq!((same.point, same.var_cons), (0.0, 0.0));
        let (data, probs) = realize("job-training", [1, 0]);
        assert_eq!(
            aeed_estimate_with_variance(&data.y, &data.d, &probs, L1, L0)
                .unwrap()
                .point,
            1.0
        );
    }

    #[test]
    fn true_variances() {
        let h = load_corpus("household").unwrap();
        assert_eq!(
            ht_variance_true(&h.design, &h.mapping, &h.schedule, L1).unwrap(),
            int(0)
        );
        assert_eq!(
            ht_variance_true(&h.design, &h.mapping, &h.schedule, L0).unwrap(),
            int(0)
        );
        let alt2 = load_corpus("household-alt2").unwrap();
        assert!(matches!(
            ht_variance_true(&alt2.design, &alt2.mapping, &alt2.schedule, L1),
            Err(Error::NurvaViolated { unit: 0 })
        ));

        let space = DesignSpace::binary(2);
        let ones = OutcomeSchedule::rule(
            OutcomeRule::Individualistic {
                values: vec![vec![int(1), int(1)]; 2],
            },
            space,
        )
        .unwrap();
        let bern = Design::bernoulli(2, ratio(1, 2)).unwrap();
        let m = ExposureMapping::individualistic(2);
        assert_eq!(ht_variance_true(&bern, &m, &ones, L1).unwrap(), ratio(1, 2));
    }

    /// Oracle: variance by direct enumeration of the estimator's distribution.
    fn enumerated_variance(
        design: &Design,
        mapping: &ExposureMapping,
        schedule: &OutcomeSchedule,
        d: Label,
    ) -> BigRational {
        let probs = exposure_probabilities(design, mapping, &[d]).unwrap();
        let mut first = BigRational::zero();
        let mut second = BigRational::zero();
        for p in design.support().unwrap() {
            let data = ObservedData::realize(schedule, mapping, &p.z).unwrap();
            let v = ht_estimate(&data.y, &data.d, &probs, d).unwrap();
            first += &p.mass * &v;
            second += &p.mass * &v * &v;
        }
        second - &first * &first
    }

    #[test]
    fn true_variance_matches_enumeration_oracle() {
        for name in [
            "voter-carryover",
            "rebel-survey",
            "srswor",
            "job-training",
            "hidden-variation",
        ] {
            let inst = load_corpus(name).unwrap();
            for d in [L0, L1] {
                assert_eq!(
                    ht_variance_true(&inst.design, &inst.mapping, &inst.schedule, d).unwrap(),
                    enumerated_variance(&inst.design, &inst.mapping, &inst.schedule, d),
                    "{name} d={d}"
                );
            }
        }
        let inst =
            crate::corpus::partial_interference(3, 2, 1, 11, EnumerationCap::DEFAULT).unwrap();
        assert!(
            contrast_variance_true(&inst.design, &inst.mapping, &inst.schedule, L1, L0).unwrap()
                >= int(0)
        );
    }

    #[test]
    fn regression_adjustment() {
        let (data, probs) = realize("household", [1, 0]);
        let x = vec![vec![int(1)], vec![int(1)]];
        let zero =
            regression_adjusted_estimate(&data.y, &data.d, &probs, L0, &x, &Prediction::Zero, &[])
                .unwrap();
        assert_eq!(zero, ht_estimate(&data.y, &data.d, &probs, L0).unwrap());
        let err = regression_adjusted_estimate(
            &data.y,
            &data.d,
            &probs,
            L0,
            &x,
            &Prediction::Linear,
            &[int(1), int(2)],
        );
        assert!(matches!(err, Err(Error::Dimension(_))));
        let closure = FnPrediction(|_d: Label, x: &[BigRational], b: &[BigRational]| &x[0] * &b[0]);
        let a = regression_adjusted_estimate(&data.y, &data.d, &probs, L0, &x, &closure, &[int(3)])
            .unwrap();
        let b = regression_adjusted_estimate(
            &data.y,
            &data.d,
            &probs,
            L0,
            &x,
            &Prediction::Linear,
            &[int(3)],
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wald_intervals() {
        let (lo, hi) = wald_ci(0.0, 1.0, 0.95).unwrap();
        assert!((lo + 1.959964).abs() < 1e-5 && (hi - 1.959964).abs() < 1e-5);
        assert_eq!(wald_ci(5.0, 0.0, 0.95).unwrap(), (5.0, 5.0));
        let (lo, hi) = wald_ci(1.0, 4.0, 0.6827).unwrap();
        assert!((lo + 1.0).abs() < 2e-3 && (hi - 3.0).abs() < 2e-3);
        assert!(matches!(
            wald_ci(0.0, -1.0, 0.95),
            Err(Error::NegativeVariance(_))
        ));
    }

    #[test]
    fn targets_parse() {
        assert_eq!("aepo:0".parse::<Target>().unwrap(), Target::Aepo(L0));
        assert_eq!("aeed:1,0".parse::<Target>().unwrap(), Target::Aeed(L1, L0));
        assert!("ate".parse::<Target>().is_err());
        assert_eq!(
            serde_json::to_string(&Target::Aeed(L1, L0)).unwrap(),
            "\"aeed:1,0\""
        );
    }

    #[test]
    fn positivity_and_lengths_are_checked() {
        let (data, _) = realize("household", [1, 0]);
        let never = exposure_probabilities(
            &Design::point_mass([0, 0].into()),
            &ExposureMapping::individualistic(2),
            &[L0, L1],
        )
        .unwrap();
        assert!(matches!(
            ht_estimate(&data.y, &data.d, &never, L1),
            Err(Error::Positivity { .. })
        ));
        let (_, probs) = realize("household", [1, 0]);
        assert!(matches!(
            ht_estimate(&data.y[..1], &data.d, &probs, L1),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
