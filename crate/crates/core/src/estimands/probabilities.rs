//! Marginal and joint exposure probabilities.
//!
//! Three routes produce the same table type: full support enumeration (exact),
//! closed forms for the standard designs under own-code mappings (exact, any
//! N), and Monte Carlo counting (explicit opt-in, carries R and seed).

use std::ops::AddAssign;

use num::bigint::BigInt;
use num::integer::Integer;
use num::rational::BigRational;
use num::traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{split_seed, AssignmentVector, Design, DesignKind, SupportPoint};
use crate::error::{Error, Result};
use crate::exposure::{ExposureMapping, ExposureRule, Label};
use crate::scalar::{decimal12, Exact, Scalar};

/// Where a probability table came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    ExactEnumeration,
    /// Closed form for a constructor design; exact.
    Analytic,
    MonteCarlo {
        r: u64,
        seed: u64,
    },
}

impl Provenance {
    pub fn is_exact(&self) -> bool {
        !matches!(self, Provenance::MonteCarlo { .. })
    }
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provenance::ExactEnumeration => write!(f, "exact-enumeration"),
            Provenance::Analytic => write!(f, "analytic"),
            Provenance::MonteCarlo { r, seed } => write!(f, "monte-carlo(R={r}, seed={seed})"),
        }
    }
}

/// π_i(d) for each requested label and π_{id,jd'} = Pr[D_i = d, D_j = d']
/// for each pair of requested labels. π_ij(d) is the case d = d'.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureProbabilities<T> {
    n: usize,
    labels: Vec<Label>,
    /// `marginals[a][i]` for label index a.
    marginals: Vec<Vec<T>>,
    /// Row-major N x N matrix at `a * K + b` for a <= b; `None` otherwise.
    joints: Vec<Option<Vec<T>>>,
    provenance: Provenance,
}

impl<T: Scalar> ExposureProbabilities<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn has_label(&self, d: Label) -> bool {
        self.labels.contains(&d)
    }

    fn index(&self, d: Label) -> Result<usize> {
        self.labels.iter().position(|&l| l == d).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "exposure {d} was not included in the probability table"
            ))
        })
    }

    /// The vector π_·(d).
    pub fn marginal(&self, d: Label) -> Result<&[T]> {
        Ok(&self.marginals[self.index(d)?])
    }

    pub fn pi(&self, i: usize, d: Label) -> Result<&T> {
        Ok(&self.marginal(d)?[i])
    }

    /// Pr[D_i = d, D_j = d'].
    pub fn joint(&self, i: usize, d: Label, j: usize, d2: Label) -> Result<&T> {
        let (a, b) = (self.index(d)?, self.index(d2)?);
        let k = self.labels.len();
        let n = self.n;
        Ok(if a <= b {
            &self.joints[a * k + b].as_ref().expect("stored")[i * n + j]
        } else {
            &self.joints[b * k + a].as_ref().expect("stored")[j * n + i]
        })
    }

    /// The full N x N matrix of Pr[D_i = d, D_j = d'].
    pub fn joint_matrix(&self, d: Label, d2: Label) -> Result<Vec<Vec<T>>> {
        (0..self.n)
            .map(|i| {
                (0..self.n)
                    .map(|j| self.joint(i, d, j, d2).cloned())
                    .collect()
            })
            .collect()
    }

    /// Number of ordered pairs (i, j) with π_ij(d) = 0.
    pub fn zero_joint_pairs(&self, d: Label) -> Result<usize> {
        let a = self.index(d)?;
        let k = self.labels.len();
        Ok(self.joints[a * k + a]
            .as_ref()
            .expect("stored")
            .iter()
            .filter(|p| p.is_zero())
            .count())
    }

    pub fn to_f64(&self) -> ExposureProbabilities<f64> {
        let conv = |v: &Vec<T>| v.iter().map(Scalar::to_f64).collect::<Vec<f64>>();
        ExposureProbabilities {
            n: self.n,
            labels: self.labels.clone(),
            marginals: self.marginals.iter().map(conv).collect(),
            joints: self.joints.iter().map(|m| m.as_ref().map(conv)).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Builds a table from dense parts; used by tests and external callers.
    pub fn from_parts(
        labels: Vec<Label>,
        marginals: Vec<Vec<T>>,
        joint: impl Fn(usize, Label, usize, Label) -> T,
        provenance: Provenance,
    ) -> Result<Self> {
        let n = marginals.first().map_or(0, Vec::len);
        if marginals.len() != labels.len() || marginals.iter().any(|m| m.len() != n) {
            return Err(Error::Dimension(
                "one marginal vector of length N per label".into(),
            ));
        }
        let k = labels.len();
        let mut joints = vec![None; k * k];
        for a in 0..k {
            for b in a..k {
                let mut m = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        m.push(joint(i, labels[a], j, labels[b]));
                    }
                }
                joints[a * k + b] = Some(m);
            }
        }
        Ok(ExposureProbabilities {
            n,
            labels,
            marginals,
            joints,
            provenance,
        })
    }
}

impl ExposureProbabilities<BigRational> {
    /// Exact-valued conversion without the float detour.
    pub fn exact_convert<U: Scalar>(&self) -> ExposureProbabilities<U> {
        let conv = |v: &Vec<BigRational>| v.iter().map(U::from_rational).collect::<Vec<U>>();
        ExposureProbabilities {
            n: self.n,
            labels: self.labels.clone(),
            marginals: self.marginals.iter().map(conv).collect(),
            joints: self.joints.iter().map(|m| m.as_ref().map(conv)).collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn report(&self) -> ProbabilitiesReport {
        let mut joints = Vec::new();
        for (a, &d) in self.labels.iter().enumerate() {
            for &d2 in &self.labels[a..] {
                let matrix = self
                    .joint_matrix(d, d2)
                    .expect("labels are present")
                    .into_iter()
                    .map(|row| row.into_iter().map(Exact).collect())
                    .collect();
                joints.push(JointTable {
                    d,
                    d_prime: d2,
                    matrix,
                });
            }
        }
        let half_width = match self.provenance {
            Provenance::MonteCarlo { r, .. } => Some(
                self.marginals
                    .iter()
                    .map(|m| {
                        m.iter()
                            .map(|p| {
                                let p = Scalar::to_f64(p);
                                1.96 * (p * (1.0 - p) / r as f64).sqrt()
                            })
                            .collect()
                    })
                    .collect(),
            ),
            _ => None,
        };
        ProbabilitiesReport {
            n: self.n,
            provenance: self.provenance.clone(),
            marginals: self
                .labels
                .iter()
                .zip(&self.marginals)
                .map(|(&d, m)| MarginalTable {
                    d,
                    pi: m.iter().cloned().map(Exact).collect(),
                })
                .collect(),
            joints,
            mc_half_width_95: half_width,
        }
    }

    pub fn from_report(report: &ProbabilitiesReport) -> Result<Self> {
        let labels: Vec<Label> = report.marginals.iter().map(|m| m.d).collect();
        let marginals = report
            .marginals
            .iter()
            .map(|m| m.pi.iter().map(|e| e.0.clone()).collect())
            .collect();
        let lookup = |i: usize, d: Label, j: usize, d2: Label| {
            for t in &report.joints {
                if t.d == d && t.d_prime == d2 {
                    return t.matrix[i][j].0.clone();
                }
                if t.d == d2 && t.d_prime == d {
                    return t.matrix[j][i].0.clone();
                }
            }
            BigRational::zero()
        };
        ExposureProbabilities::from_parts(labels, marginals, lookup, report.provenance.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalTable {
    pub d: Label,
    pub pi: Vec<Exact>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTable {
    pub d: Label,
    pub d_prime: Label,
    /// `matrix[i][j]` = Pr[D_i = d, D_j = d'].
    pub matrix: Vec<Vec<Exact>>,
}

/// Serialized probability table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilitiesReport {
    pub n: usize,
    pub provenance: Provenance,
    pub marginals: Vec<MarginalTable>,
    pub joints: Vec<JointTable>,
    /// Per-label, per-unit 95% binomial half-widths for Monte Carlo tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_half_width_95: Option<Vec<Vec<f64>>>,
}

impl ProbabilitiesReport {
    /// Tidy rows: kind, d, d', i, j, num, den, decimal.
    pub fn csv_rows(&self) -> Vec<[String; 8]> {
        let mut rows = Vec::new();
        for m in &self.marginals {
            for (i, p) in m.pi.iter().enumerate() {
                rows.push(row("marginal", m.d, m.d, i, i, &p.0));
            }
        }
        for t in &self.joints {
            for (i, r) in t.matrix.iter().enumerate() {
                for (j, p) in r.iter().enumerate() {
                    rows.push(row("joint", t.d, t.d_prime, i, j, &p.0));
                }
            }
        }
        rows
    }
}

fn row(kind: &str, d: Label, d2: Label, i: usize, j: usize, p: &BigRational) -> [String; 8] {
    [
        kind.into(),
        d.to_string(),
        d2.to_string(),
        i.to_string(),
        j.to_string(),
        p.numer().to_string(),
        p.denom().to_string(),
        decimal12(Scalar::to_f64(p)),
    ]
}

/// Integer accumulator for mass counts scaled to a common denominator.
trait Weight: Clone + Zero + for<'a> AddAssign<&'a Self> + Send + Sync {
    fn into_bigint(self) -> BigInt;
}

impl Weight for u128 {
    fn into_bigint(self) -> BigInt {
        BigInt::from(self)
    }
}

impl Weight for BigInt {
    fn into_bigint(self) -> BigInt {
        self
    }
}

struct Counts<W> {
    marginals: Vec<W>,
    joints: Vec<W>,
}

impl<W: Weight> Counts<W> {
    fn zero(k: usize, n: usize) -> Self {
        Counts {
            marginals: vec![W::zero(); k * n],
            joints: vec![W::zero(); k * k * n * n],
        }
    }

    fn add(&mut self, idx: &[Option<usize>], k: usize, w: &W) {
        let n = idx.len();
        for (i, a) in idx.iter().enumerate() {
            let Some(a) = *a else { continue };
            self.marginals[a * n + i] += w;
            for (j, b) in idx.iter().enumerate() {
                if let Some(b) = *b {
                    if a <= b {
                        self.joints[((a * k + b) * n + i) * n + j] += w;
                    }
                }
            }
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (x, y) in self.marginals.iter_mut().zip(&other.marginals) {
            *x += y;
        }
        for (x, y) in self.joints.iter_mut().zip(&other.joints) {
            *x += y;
        }
        self
    }
}

fn label_indices(
    mapping: &ExposureMapping,
    z: &AssignmentVector,
    labels: &[Label],
) -> Result<Vec<Option<usize>>> {
    Ok(mapping
        .apply(z)?
        .into_iter()
        .map(|d| labels.iter().position(|&l| l == d))
        .collect())
}

fn chunk_len(total: usize) -> usize {
    (total / (4 * rayon::current_num_threads()).max(1)).max(256)
}

fn enumerate_counts<W: Weight>(
    support: &[SupportPoint],
    weights: &[W],
    mapping: &ExposureMapping,
    labels: &[Label],
    n: usize,
) -> Result<Counts<W>> {
    let k = labels.len();
    let chunk = chunk_len(support.len());
    support
        .par_chunks(chunk)
        .zip(weights.par_chunks(chunk))
        .map(|(points, ws)| {
            let mut acc = Counts::zero(k, n);
            for (p, w) in points.iter().zip(ws) {
                acc.add(&label_indices(mapping, &p.z, labels)?, k, w);
            }
            Ok(acc)
        })
        .try_reduce(|| Counts::zero(k, n), |a, b| Ok(a.merge(b)))
}

fn from_counts<W: Weight>(
    counts: Counts<W>,
    total: &BigInt,
    labels: Vec<Label>,
    n: usize,
    provenance: Provenance,
) -> ExposureProbabilities<BigRational> {
    let k = labels.len();
    let frac = |w: W| BigRational::new(w.into_bigint(), total.clone());
    let mut marginals: Vec<Vec<BigRational>> = Vec::with_capacity(k);
    let mut it = counts.marginals.into_iter();
    for _ in 0..k {
        marginals.push(it.by_ref().take(n).map(frac).collect());
    }
    let mut joints = vec![None; k * k];
    let mut it = counts.joints.into_iter();
    for (slot, joint) in joints.iter_mut().enumerate() {
        let block: Vec<BigRational> = it.by_ref().take(n * n).map(frac).collect();
        if slot / k <= slot % k {
            *joint = Some(block);
        }
    }
    ExposureProbabilities {
        n,
        labels,
        marginals,
        joints,
        provenance,
    }
}

fn sorted_labels(labels: &[Label]) -> Vec<Label> {
    let mut v = labels.to_vec();
    v.sort();
    v.dedup();
    v
}

/// Exact π and π_ij for `labels` by full support enumeration.
pub fn exposure_probabilities(
    design: &Design,
    mapping: &ExposureMapping,
    labels: &[Label],
) -> Result<ExposureProbabilities<BigRational>> {
    let support = design.support()?;
    let n = design.n();
    if mapping.n() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: mapping.n(),
        });
    }
    let labels = sorted_labels(labels);
    // Scale masses to integers over their common denominator.
    let lcm = support
        .iter()
        .fold(BigInt::one(), |acc, p| acc.lcm(p.mass.denom()));
    let scaled: Vec<BigInt> = support
        .iter()
        .map(|p| p.mass.numer() * (&lcm / p.mass.denom()))
        .collect();
    if lcm.bits() < 127 {
        let weights: Vec<u128> = scaled
            .iter()
            .map(|w| w.to_u128().expect("below the common denominator"))
            .collect();
        let counts = enumerate_counts(support, &weights, mapping, &labels, n)?;
        Ok(from_counts(
            counts,
            &lcm,
            labels,
            n,
            Provenance::ExactEnumeration,
        ))
    } else {
        let counts = enumerate_counts(support, &scaled, mapping, &labels, n)?;
        Ok(from_counts(
            counts,
            &lcm,
            labels,
            n,
            Provenance::ExactEnumeration,
        ))
    }
}

/// Closed-form π and π_ij when the mapping reads only the unit's own code
/// (individualistic or survey indicator) and the design is Bernoulli,
/// complete, cluster-complete, or (for the survey indicator) an ordered sample.
pub fn analytic_probabilities<T: Scalar>(
    design: &Design,
    mapping: &ExposureMapping,
    labels: &[Label],
) -> Option<ExposureProbabilities<T>> {
    let n = design.n();
    if mapping.n() != n {
        return None;
    }
    let survey = match mapping.rule() {
        ExposureRule::Individualistic => false,
        ExposureRule::SurveyIndicator => true,
        _ => return None,
    };
    let labels = sorted_labels(labels);
    let r = |a: usize, b: usize| BigRational::new(BigInt::from(a), BigInt::from(b));
    // Probability model on the binary "own code" event: p1 = Pr[own code = 1],
    // pair(s, t) = Pr[unit i in state s, unit j in state t] for i != j in
    // different blocks, same_block(s, t) for i != j in the same block.
    type Pair = Box<dyn Fn(bool, bool) -> BigRational>;
    let (p1, pair, cluster_of): (BigRational, Pair, Option<Vec<usize>>) = match design.kind() {
        DesignKind::Bernoulli { p } => {
            let p = p.clone();
            let q = BigRational::one() - &p;
            let (pp, qq) = (p.clone(), q.clone());
            (
                p,
                Box::new(move |s, t| {
                    (if s { pp.clone() } else { qq.clone() })
                        * (if t { pp.clone() } else { qq.clone() })
                }),
                None,
            )
        }
        DesignKind::Complete { treated } => {
            let m = *treated;
            (r(m, n.max(1)), complete_pairs(n, m), None)
        }
        DesignKind::OrderedSample { selected } if survey => {
            let m = *selected;
            (r(m, n.max(1)), complete_pairs(n, m), None)
        }
        DesignKind::ClusterComplete {
            cluster_of,
            treated,
        } => {
            let k = cluster_of.iter().max().map_or(0, |c| c + 1);
            (
                r(*treated, k.max(1)),
                complete_pairs(k, *treated),
                Some(cluster_of.clone()),
            )
        }
        _ => return None,
    };
    let state = |d: Label| -> Option<bool> {
        match d.0 {
            0 => Some(false),
            1 => Some(true),
            _ => None,
        }
    };
    let marginal_r = |d: Label| match state(d) {
        Some(true) => p1.clone(),
        Some(false) => BigRational::one() - &p1,
        None => BigRational::zero(),
    };
    let k = labels.len();
    let marginals: Vec<Vec<T>> = labels
        .iter()
        .map(|&d| vec![T::from_rational(&marginal_r(d)); n])
        .collect();
    let mut joints = vec![None; k * k];
    for a in 0..k {
        for b in a..k {
            let (da, db) = (labels[a], labels[b]);
            let diag = if da == db {
                T::from_rational(&marginal_r(da))
            } else {
                T::zero()
            };
            let (off, same) = match (state(da), state(db)) {
                (Some(s), Some(t)) => {
                    let same = if s == t {
                        marginal_r(da)
                    } else {
                        BigRational::zero()
                    };
                    (T::from_rational(&pair(s, t)), T::from_rational(&same))
                }
                _ => (T::zero(), T::zero()),
            };
            let mut m = vec![off.clone(); n * n];
            for i in 0..n {
                m[i * n + i] = diag.clone();
            }
            if let Some(c) = &cluster_of {
                for i in 0..n {
                    for j in 0..n {
                        if i != j && c[i] == c[j] {
                            m[i * n + j] = same.clone();
                        }
                    }
                }
            }
            joints[a * k + b] = Some(m);
        }
    }
    Some(ExposureProbabilities {
        n,
        labels,
        marginals,
        joints,
        provenance: Provenance::Analytic,
    })
}

/// Pair probabilities for m of n treated uniformly, distinct units.
fn complete_pairs(n: usize, m: usize) -> Box<dyn Fn(bool, bool) -> BigRational> {
    Box::new(move |s, t| {
        if n < 2 {
            return BigRational::zero();
        }
        let ones = (s as usize) + (t as usize);
        let zeros = 2 - ones;
        let falling = |a: usize, k: usize| {
            (0..k).fold(BigInt::one(), |acc, x| {
                acc * BigInt::from(a.saturating_sub(x))
            })
        };
        let num = match (ones, zeros) {
            (2, 0) => falling(m, 2),
            (0, 2) => falling(n - m, 2),
            _ => BigInt::from(m) * BigInt::from(n - m),
        };
        BigRational::new(num, falling(n, 2))
    })
}

/// Estimated π and π_ij from R draws: entries are counts / R.
pub fn monte_carlo_probabilities(
    design: &Design,
    mapping: &ExposureMapping,
    labels: &[Label],
    r: u64,
    seed: u64,
) -> Result<ExposureProbabilities<BigRational>> {
    if r == 0 {
        return Err(Error::InvalidParameter(
            "Monte Carlo probabilities need R >= 1".into(),
        ));
    }
    let n = design.n();
    let labels = sorted_labels(labels);
    let k = labels.len();
    let chunk = 1024u64;
    let chunks: Vec<u64> = (0..r.div_ceil(chunk)).collect();
    let counts = chunks
        .par_iter()
        .map(|&c| {
            let mut acc: Counts<u128> = Counts::zero(k, n);
            for idx in c * chunk..((c + 1) * chunk).min(r) {
                let z = design.sample(split_seed(seed, idx));
                acc.add(&label_indices(mapping, &z, &labels)?, k, &1);
            }
            Ok::<_, Error>(acc)
        })
        .try_reduce(|| Counts::zero(k, n), |a, b| Ok(a.merge(b)))?;
    Ok(from_counts(
        counts,
        &BigInt::from(r),
        labels,
        n,
        Provenance::MonteCarlo { r, seed },
    ))
}

/// Options for [`resolve_probabilities`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ProbabilityOptions {
    /// Monte Carlo fallback `(R, seed)` for designs that are neither
    /// enumerable nor covered by a closed form.
    pub monte_carlo: Option<(u64, u64)>,
}

/// Enumeration when the support is enumerable, else the closed form, else
/// Monte Carlo if opted in. Fails with `CapExceeded` otherwise.
pub fn resolve_probabilities<T: Scalar>(
    design: &Design,
    mapping: &ExposureMapping,
    labels: &[Label],
    options: ProbabilityOptions,
) -> Result<ExposureProbabilities<T>> {
    if design.is_enumerable() {
        return Ok(exposure_probabilities(design, mapping, labels)?.exact_convert());
    }
    if let Some(p) = analytic_probabilities(design, mapping, labels) {
        return Ok(p);
    }
    match options.monte_carlo {
        Some((r, seed)) => {
            Ok(monte_carlo_probabilities(design, mapping, labels, r, seed)?.exact_convert())
        }
        None => Err(design.support().err().unwrap_or(Error::MissingDesignSpace)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::load_corpus;
    use crate::design::EnumerationCap;
    use crate::scalar::{int, ratio};

    const L0: Label = Label(0);
    const L1: Label = Label(1);

    #[test]
    fn voter_carryover_marginals() {
        let inst = load_corpus("voter-carryover").unwrap();
        let p = exposure_probabilities(&inst.design, &inst.mapping, &[L1]).unwrap();
        assert_eq!(
            p.marginal(L1).unwrap(),
            &[ratio(1, 2), ratio(3, 4), ratio(3, 4), ratio(3, 4)]
        );
        assert_eq!(p.provenance(), &Provenance::ExactEnumeration);
    }

    #[test]
    fn rebel_marginals_are_three_tenths() {
        let inst = load_corpus("rebel-survey").unwrap();
        let p = exposure_probabilities(&inst.design, &inst.mapping, &[L1]).unwrap();
        assert!(p.marginal(L1).unwrap().iter().all(|x| *x == ratio(3, 10)));
        assert_eq!(*p.joint(0, L1, 1, L1).unwrap(), ratio(1, 15));
    }

    #[test]
    fn household_joint_is_zero() {
        let inst = load_corpus("household").unwrap();
        let p = exposure_probabilities(&inst.design, &inst.mapping, &[L0, L1]).unwrap();
        assert_eq!(p.marginal(L1).unwrap(), &[ratio(1, 2), ratio(1, 2)]);
        assert_eq!(*p.joint(0, L1, 1, L1).unwrap(), int(0));
        assert_eq!(*p.joint(0, L1, 1, L0).unwrap(), ratio(1, 2));
        assert_eq!(*p.joint(1, L0, 0, L1).unwrap(), ratio(1, 2));
        assert_eq!(*p.joint(0, L0, 0, L1).unwrap(), int(0));
        assert_eq!(p.zero_joint_pairs(L1).unwrap(), 2);
    }

    #[test]
    fn joint_table_invariants_hold_across_the_corpus() {
        for name in crate::corpus::CORPUS_NAMES {
            let inst = load_corpus(name).unwrap();
            let labels = inst.mapping.label_codes();
            let p = exposure_probabilities(&inst.design, &inst.mapping, &labels).unwrap();
            for &d in &labels {
                for i in 0..p.n() {
                    assert_eq!(p.joint(i, d, i, d).unwrap(), p.pi(i, d).unwrap(), "{name}");
                    for j in 0..p.n() {
                        let pij = p.joint(i, d, j, d).unwrap();
                        assert_eq!(pij, p.joint(j, d, i, d).unwrap());
                        assert!(*pij >= int(0));
                        assert!(pij <= p.pi(i, d).unwrap() && pij <= p.pi(j, d).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn analytic_route_matches_enumeration() {
        let designs = vec![
            (
                Design::bernoulli(4, ratio(1, 3)).unwrap(),
                crate::exposure::ExposureMapping::individualistic(4),
            ),
            (
                Design::complete(5, 2).unwrap(),
                crate::exposure::ExposureMapping::individualistic(5),
            ),
            (
                Design::complete(3, 3).unwrap(),
                crate::exposure::ExposureMapping::individualistic(3),
            ),
            (
                Design::cluster_complete(vec![0, 0, 1, 1, 2, 2], 1).unwrap(),
                crate::exposure::ExposureMapping::individualistic(6),
            ),
            (
                Design::ordered_sample(5, 2).unwrap(),
                crate::exposure::ExposureMapping::survey_indicator(5).unwrap(),
            ),
        ];
        for (design, mapping) in designs {
            let labels = [L0, L1, Label(2)];
            let exact = exposure_probabilities(&design, &mapping, &labels).unwrap();
            let closed: ExposureProbabilities<BigRational> =
                analytic_probabilities(&design, &mapping, &labels).unwrap();
            assert_eq!(exact.marginals, closed.marginals, "{:?}", design.kind());
            assert_eq!(exact.joints, closed.joints, "{:?}", design.kind());
        }
    }

    #[test]
    fn sampler_only_designs_resolve_analytically_or_refuse() {
        let design = Design::bernoulli_with_cap(30, ratio(1, 2), EnumerationCap(1000)).unwrap();
        let mapping = crate::exposure::ExposureMapping::individualistic(30);
        let p: ExposureProbabilities<f64> =
            resolve_probabilities(&design, &mapping, &[L1], ProbabilityOptions::default()).unwrap();
        assert_eq!(p.provenance(), &Provenance::Analytic);
        assert_eq!(*p.joint(0, L1, 1, L1).unwrap(), 0.25);

        let carry = crate::exposure::ExposureMapping::carryover(30).unwrap();
        let err =
            resolve_probabilities::<f64>(&design, &carry, &[L1], ProbabilityOptions::default())
                .unwrap_err();
        assert!(matches!(err, Error::CapExceeded { .. }));
        let mc = resolve_probabilities::<f64>(
            &design,
            &carry,
            &[L1],
            ProbabilityOptions {
                monte_carlo: Some((2000, 9)),
            },
        )
        .unwrap();
        assert_eq!(
            mc.provenance(),
            &Provenance::MonteCarlo { r: 2000, seed: 9 }
        );
        assert!((mc.pi(5, L1).unwrap() - 0.75).abs() < 0.05);
    }

    #[test]
    fn report_round_trips() {
        let inst = load_corpus("household").unwrap();
        let p = exposure_probabilities(&inst.design, &inst.mapping, &[L0, L1]).unwrap();
        let text = serde_json::to_string(&p.report()).unwrap();
        let back: ProbabilitiesReport = serde_json::from_str(&text).unwrap();
        assert_eq!(ExposureProbabilities::from_report(&back).unwrap(), p);
    }
}
