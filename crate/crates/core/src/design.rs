//! Designs: known probability distributions over assignment vectors.
//!
//! A [`Design`] carries its support with exact rational masses whenever the
//! support is small enough to enumerate. Larger constructions keep only their
//! parameters; they can still be sampled, and the exact operations downstream
//! refuse them with [`Error::CapExceeded`].

use std::collections::HashSet;
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use itertools::Itertools;
use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, ToPrimitive, Zero};
use rand::seq::index;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{bigint_from_json, bigint_to_json, rational_from_json, Scalar};

/// Length-N vector of assignment codes. 0 means control or unsampled; positive
/// codes are treatment levels or ordinal survey positions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AssignmentVector(pub Vec<u32>);

impl AssignmentVector {
    pub fn new(codes: Vec<u32>) -> Self {
        AssignmentVector(codes)
    }

    pub fn zeros(n: usize) -> Self {
        AssignmentVector(vec![0; n])
    }

    pub fn codes(&self) -> &[u32] {
        &self.0
    }
}

impl Deref for AssignmentVector {
    type Target = [u32];

    fn deref(&self) -> &[u32] {
        &self.0
    }
}

impl From<Vec<u32>> for AssignmentVector {
    fn from(v: Vec<u32>) -> Self {
        AssignmentVector(v)
    }
}

impl<const K: usize> From<[u32; K]> for AssignmentVector {
    fn from(v: [u32; K]) -> Self {
        AssignmentVector(v.to_vec())
    }
}

impl fmt::Display for AssignmentVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.0.iter().join(","))
    }
}

/// Upper bound on the number of support points a design may materialize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationCap(pub u64);

impl EnumerationCap {
    pub const DEFAULT: EnumerationCap = EnumerationCap(2_000_000);
    pub const ENV_VAR: &'static str = "EXPOSURE_ENGINE_CAP";

    /// Reads `EXPOSURE_ENGINE_CAP`, falling back to [`EnumerationCap::DEFAULT`].
    pub fn from_env() -> Self {
        std::env::var(Self::ENV_VAR)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .map(EnumerationCap)
            .unwrap_or(Self::DEFAULT)
    }

    fn admits(&self, count: &BigInt) -> bool {
        *count <= BigInt::from(self.0)
    }
}

impl Default for EnumerationCap {
    fn default() -> Self {
        Self::DEFAULT
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportPoint {
    pub z: AssignmentVector,
    pub mass: BigRational,
}

/// How a design was constructed. Constructor kinds can be sampled without an
/// enumerated support.
#[derive(Debug, Clone, PartialEq)]
pub enum DesignKind {
    Explicit,
    /// Independent coin flips with success probability `p`.
    Bernoulli {
        p: BigRational,
    },
    /// Exactly `treated` of N units treated, uniformly.
    Complete {
        treated: usize,
    },
    /// Ordered selection of `selected` distinct units; unit codes are the
    /// ordinal positions 1..=selected.
    OrderedSample {
        selected: usize,
    },
    /// `treated` of the clusters treated as whole blocks, uniformly.
    /// `cluster_of[i]` is the cluster index of unit i.
    ClusterComplete {
        cluster_of: Vec<usize>,
        treated: usize,
    },
}

/// Joint p.m.f. of the assignment vector. Immutable once built.
#[derive(Debug, Clone)]
pub struct Design {
    n: usize,
    label: String,
    kind: DesignKind,
    support: Option<Arc<Vec<SupportPoint>>>,
    support_size: BigInt,
    cap: EnumerationCap,
}

impl Design {
    /// A design given by its support, validated.
    pub fn explicit(
        n: usize,
        label: impl Into<String>,
        points: impl IntoIterator<Item = (AssignmentVector, BigRational)>,
    ) -> Result<Self> {
        let points: Vec<SupportPoint> = points
            .into_iter()
            .map(|(z, mass)| SupportPoint { z, mass })
            .collect();
        validate_support(n, &points)?;
        let support_size = BigInt::from(points.len());
        Ok(Design {
            n,
            label: label.into(),
            kind: DesignKind::Explicit,
            support: Some(Arc::new(points)),
            support_size,
            cap: EnumerationCap::DEFAULT,
        })
    }

    /// A single assignment with mass one.
    pub fn point_mass(z: AssignmentVector) -> Self {
        let n = z.len();
        Design::explicit(n, "point mass", [(z, BigRational::one())]).expect("point mass is valid")
    }

    pub fn bernoulli(n: usize, p: BigRational) -> Result<Self> {
        Self::bernoulli_with_cap(n, p, EnumerationCap::DEFAULT)
    }

    pub fn bernoulli_with_cap(n: usize, p: BigRational, cap: EnumerationCap) -> Result<Self> {
        if p <= BigRational::zero() || p >= BigRational::one() {
            return Err(Error::InvalidParameter(format!(
                "Bernoulli p must lie in (0, 1), got {p}"
            )));
        }
        let size = num::pow(BigInt::from(2), n);
        let label = format!("bernoulli(N={n}, p={p})");
        let support = cap.admits(&size).then(|| {
            let q = BigRational::one() - &p;
            let p_pow: Vec<BigRational> = (0..=n).map(|k| num::pow(p.clone(), k)).collect();
            let q_pow: Vec<BigRational> = (0..=n).map(|k| num::pow(q.clone(), k)).collect();
            let count = 1usize << n;
            (0..count)
                .map(|idx| {
                    let codes: Vec<u32> =
                        (0..n).map(|i| ((idx >> (n - 1 - i)) & 1) as u32).collect();
                    let ones = codes.iter().filter(|&&c| c == 1).count();
                    SupportPoint {
                        z: AssignmentVector(codes),
                        mass: &p_pow[ones] * &q_pow[n - ones],
                    }
                })
                .collect()
        });
        Ok(Self::constructed(
            n,
            label,
            DesignKind::Bernoulli { p },
            support,
            size,
            cap,
        ))
    }

    /// Complete randomization: exactly `treated` of `n` units get code 1.
    pub fn complete(n: usize, treated: usize) -> Result<Self> {
        Self::complete_with_cap(n, treated, EnumerationCap::DEFAULT)
    }

    pub fn complete_with_cap(n: usize, treated: usize, cap: EnumerationCap) -> Result<Self> {
        if treated > n {
            return Err(Error::InvalidParameter(format!(
                "cannot treat {treated} of {n} units"
            )));
        }
        let size = binomial(n, treated);
        let label = format!("complete(N={n}, m={treated})");
        let support = cap.admits(&size).then(|| {
            let mass = BigRational::new(BigInt::one(), size.clone());
            (0..n)
                .combinations(treated)
                .map(|chosen| {
                    let mut codes = vec![0; n];
                    for i in chosen {
                        codes[i] = 1;
                    }
                    SupportPoint {
                        z: AssignmentVector(codes),
                        mass: mass.clone(),
                    }
                })
                .collect()
        });
        Ok(Self::constructed(
            n,
            label,
            DesignKind::Complete { treated },
            support,
            size,
            cap,
        ))
    }

    /// Uniformly ordered selection of `selected` distinct units, each mass (N-n)!/N!.
    pub fn ordered_sample(n: usize, selected: usize) -> Result<Self> {
        Self::ordered_sample_with_cap(n, selected, EnumerationCap::DEFAULT)
    }

    pub fn ordered_sample_with_cap(n: usize, selected: usize, cap: EnumerationCap) -> Result<Self> {
        if selected == 0 || selected > n {
            return Err(Error::InvalidParameter(format!(
                "ordered sample needs 1 <= n <= N, got n={selected}, N={n}"
            )));
        }
        let size = falling_factorial(n, selected);
        let label = format!("ordered_sample(N={n}, n={selected})");
        let support = cap.admits(&size).then(|| {
            let mass = BigRational::new(BigInt::one(), size.clone());
            (0..n)
                .permutations(selected)
                .map(|order| {
                    let mut codes = vec![0; n];
                    for (pos, unit) in order.into_iter().enumerate() {
                        codes[unit] = pos as u32 + 1;
                    }
                    SupportPoint {
                        z: AssignmentVector(codes),
                        mass: mass.clone(),
                    }
                })
                .collect()
        });
        Ok(Self::constructed(
            n,
            label,
            DesignKind::OrderedSample { selected },
            support,
            size,
            cap,
        ))
    }

    /// Cluster-aligned complete randomization: `treated` whole clusters get code 1.
    pub fn cluster_complete(cluster_of: Vec<usize>, treated: usize) -> Result<Self> {
        Self::cluster_complete_with_cap(cluster_of, treated, EnumerationCap::DEFAULT)
    }

    pub fn cluster_complete_with_cap(
        cluster_of: Vec<usize>,
        treated: usize,
        cap: EnumerationCap,
    ) -> Result<Self> {
        let n = cluster_of.len();
        let clusters = cluster_count(&cluster_of)?;
        if treated > clusters {
            return Err(Error::InvalidParameter(format!(
                "cannot treat {treated} of {clusters} clusters"
            )));
        }
        let size = binomial(clusters, treated);
        let label = format!("cluster_complete(N={n}, K={clusters}, m={treated})");
        let support = cap.admits(&size).then(|| {
            let mass = BigRational::new(BigInt::one(), size.clone());
            (0..clusters)
                .combinations(treated)
                .map(|chosen| {
                    let mut on = vec![false; clusters];
                    for c in chosen {
                        on[c] = true;
                    }
                    let codes = cluster_of.iter().map(|&c| on[c] as u32).collect();
                    SupportPoint {
                        z: AssignmentVector(codes),
                        mass: mass.clone(),
                    }
                })
                .collect()
        });
        Ok(Self::constructed(
            n,
            label,
            DesignKind::ClusterComplete {
                cluster_of,
                treated,
            },
            support,
            size,
            cap,
        ))
    }

    fn constructed(
        n: usize,
        label: String,
        kind: DesignKind,
        support: Option<Vec<SupportPoint>>,
        support_size: BigInt,
        cap: EnumerationCap,
    ) -> Self {
        Design {
            n,
            label,
            kind,
            support: support.map(Arc::new),
            support_size,
            cap,
        }
    }

    /// Same support, different label.
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> &DesignKind {
        &self.kind
    }

    pub fn support_size(&self) -> &BigInt {
        &self.support_size
    }

    pub fn is_enumerable(&self) -> bool {
        self.support.is_some()
    }

    /// The enumerated support, or [`Error::CapExceeded`] for sampler-only designs.
    pub fn support(&self) -> Result<&[SupportPoint]> {
        self.support
            .as_deref()
            .map(Vec::as_slice)
            .ok_or_else(|| Error::CapExceeded {
                required: self.support_size.to_string(),
                cap: self.cap.0,
            })
    }

    /// Every support pair exactly once.
    pub fn enumerate_support(
        &self,
    ) -> Result<impl Iterator<Item = (&AssignmentVector, &BigRational)>> {
        Ok(self.support()?.iter().map(|p| (&p.z, &p.mass)))
    }

    /// Mass of `z`, zero off the support.
    pub fn mass(&self, z: &AssignmentVector) -> Result<BigRational> {
        Ok(self
            .support()?
            .iter()
            .find(|p| &p.z == z)
            .map(|p| p.mass.clone())
            .unwrap_or_else(BigRational::zero))
    }

    /// Deterministic draw for a given seed.
    pub fn sample(&self, seed: u64) -> AssignmentVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> AssignmentVector {
        let n = self.n;
        match &self.kind {
            DesignKind::Bernoulli { p } => {
                let p = Scalar::to_f64(p);
                AssignmentVector((0..n).map(|_| (rng.gen::<f64>() < p) as u32).collect())
            }
            DesignKind::Complete { treated } => {
                let mut codes = vec![0; n];
                for i in index::sample(rng, n, *treated) {
                    codes[i] = 1;
                }
                AssignmentVector(codes)
            }
            DesignKind::OrderedSample { selected } => {
                let mut codes = vec![0; n];
                // index::sample returns the indices in random order
                for (pos, unit) in index::sample(rng, n, *selected).into_iter().enumerate() {
                    codes[unit] = pos as u32 + 1;
                }
                AssignmentVector(codes)
            }
            DesignKind::ClusterComplete {
                cluster_of,
                treated,
            } => {
                let clusters = cluster_of.iter().max().map_or(0, |m| m + 1);
                let mut on = vec![false; clusters];
                for c in index::sample(rng, clusters, *treated) {
                    on[c] = true;
                }
                AssignmentVector(cluster_of.iter().map(|&c| on[c] as u32).collect())
            }
            DesignKind::Explicit => {
                let support = self
                    .support
                    .as_ref()
                    .expect("explicit designs are enumerated");
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for p in support.iter() {
                    acc += Scalar::to_f64(&p.mass);
                    if u < acc {
                        return p.z.clone();
                    }
                }
                support.last().expect("support is non-empty").z.clone()
            }
        }
    }
}

/// Returns a support vector with probability equal to its mass.
pub fn sample_assignment(design: &Design, seed: u64) -> AssignmentVector {
    design.sample(seed)
}

/// Seed for draw `index` of a run started from `master`: the SplitMix64
/// output at state `master + (index + 1) * 0x9E3779B97F4A7C15`. Stable across
/// versions; tests pin results to it.
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut x = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Re-checks every invariant of an enumerated design.
pub fn validate_design(design: &Design) -> Result<()> {
    match &design.support {
        Some(points) => validate_support(design.n, points),
        None => Ok(()),
    }
}

fn validate_support(n: usize, points: &[SupportPoint]) -> Result<()> {
    let mut seen = HashSet::with_capacity(points.len());
    let mut sum = BigRational::zero();
    for p in points {
        if p.z.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: p.z.len(),
            });
        }
        if !seen.insert(&p.z) {
            return Err(Error::DuplicateSupport {
                vector: p.z.0.clone(),
            });
        }
        if p.mass <= BigRational::zero() {
            return Err(Error::NonPositiveMass {
                vector: p.z.0.clone(),
                mass: p.mass.to_string(),
            });
        }
        sum += &p.mass;
    }
    if !sum.is_one() {
        return Err(Error::MassSum {
            sum: sum.to_string(),
        });
    }
    Ok(())
}

pub(crate) fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

pub(crate) fn falling_factorial(n: usize, k: usize) -> BigInt {
    (0..k).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i))
}

fn cluster_count(cluster_of: &[usize]) -> Result<usize> {
    let clusters = cluster_of.iter().max().map_or(0, |m| m + 1);
    let mut present = vec![false; clusters];
    for &c in cluster_of {
        present[c] = true;
    }
    if present.iter().any(|p| !p) {
        return Err(Error::InvalidParameter(
            "cluster indices must be contiguous from 0".into(),
        ));
    }
    Ok(clusters)
}

/// The set of feasible interventions. SUTVA quantifies over this set, NURVA
/// only over a design's support.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignSpace {
    Explicit {
        n: usize,
        vectors: Vec<AssignmentVector>,
    },
    /// All of `{0, .., levels-1}^N`.
    Product { n: usize, levels: u32 },
    /// Every ordered selection of at most `max_selected` distinct units, coded
    /// by ordinal position, including the empty selection.
    Ordered { n: usize, max_selected: usize },
}

impl DesignSpace {
    pub fn binary(n: usize) -> Self {
        DesignSpace::Product { n, levels: 2 }
    }

    pub fn n(&self) -> usize {
        match self {
            DesignSpace::Explicit { n, .. }
            | DesignSpace::Product { n, .. }
            | DesignSpace::Ordered { n, .. } => *n,
        }
    }

    pub fn size(&self) -> BigInt {
        match self {
            DesignSpace::Explicit { vectors, .. } => BigInt::from(vectors.len()),
            DesignSpace::Product { n, levels } => num::pow(BigInt::from(*levels), *n),
            DesignSpace::Ordered { n, max_selected } => {
                (0..=*max_selected).map(|k| falling_factorial(*n, k)).sum()
            }
        }
    }

    pub fn contains(&self, z: &AssignmentVector) -> bool {
        if z.len() != self.n() {
            return false;
        }
        match self {
            DesignSpace::Explicit { vectors, .. } => vectors.contains(z),
            DesignSpace::Product { levels, .. } => z.iter().all(|&c| c < *levels),
            DesignSpace::Ordered { max_selected, .. } => {
                let mut positions: Vec<u32> = z.iter().copied().filter(|&c| c > 0).collect();
                positions.sort_unstable();
                positions.len() <= *max_selected
                    && positions
                        .iter()
                        .enumerate()
                        .all(|(k, &c)| c == k as u32 + 1)
            }
        }
    }

    pub fn enumerate(&self, cap: EnumerationCap) -> Result<Vec<AssignmentVector>> {
        let size = self.size();
        if !cap.admits(&size) {
            return Err(Error::CapExceeded {
                required: size.to_string(),
                cap: cap.0,
            });
        }
        Ok(match self {
            DesignSpace::Explicit { vectors, .. } => vectors.clone(),
            DesignSpace::Product { n: 0, .. } => vec![AssignmentVector(vec![])],
            DesignSpace::Product { n, levels } => (0..*n)
                .map(|_| 0..*levels)
                .multi_cartesian_product()
                .map(AssignmentVector)
                .collect(),
            DesignSpace::Ordered { n, max_selected } => (0..=*max_selected)
                .flat_map(|k| {
                    (0..*n).permutations(k).map(move |order| {
                        let mut codes = vec![0; *n];
                        for (pos, unit) in order.into_iter().enumerate() {
                            codes[unit] = pos as u32 + 1;
                        }
                        AssignmentVector(codes)
                    })
                })
                .collect(),
        })
    }

    /// Fails with the first support vector the space does not contain.
    pub fn check_covers(&self, design: &Design) -> Result<()> {
        for p in design.support()? {
            if !self.contains(&p.z) {
                return Err(Error::OutsideDomain {
                    vector: p.z.0.clone(),
                });
            }
        }
        Ok(())
    }
}

/// On-disk design description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignFile {
    #[serde(rename = "N")]
    pub n: usize,
    pub kind: String,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    pub support: Vec<Vec<u32>>,
    #[serde(default)]
    pub mass_num: Vec<serde_json::Value>,
    #[serde(default)]
    pub mass_den: Vec<serde_json::Value>,
}

impl DesignFile {
    pub fn from_design(design: &Design) -> Self {
        let mut params = serde_json::Map::new();
        let mut file = DesignFile {
            n: design.n,
            kind: String::new(),
            params: serde_json::Map::new(),
            support: vec![],
            mass_num: vec![],
            mass_den: vec![],
        };
        match &design.kind {
            DesignKind::Explicit => {
                file.kind = "explicit".into();
                for p in design.support.as_deref().into_iter().flatten() {
                    file.support.push(p.z.0.clone());
                    file.mass_num.push(bigint_to_json(p.mass.numer()));
                    file.mass_den.push(bigint_to_json(p.mass.denom()));
                }
            }
            DesignKind::Bernoulli { p } => {
                file.kind = "bernoulli".into();
                params.insert("p".into(), p.to_string().into());
            }
            DesignKind::Complete { treated } => {
                file.kind = "complete".into();
                params.insert("m".into(), (*treated).into());
            }
            DesignKind::OrderedSample { selected } => {
                file.kind = "ordered_sample".into();
                params.insert("n".into(), (*selected).into());
            }
            DesignKind::ClusterComplete {
                cluster_of,
                treated,
            } => {
                file.kind = "cluster_complete".into();
                params.insert("clusters".into(), serde_json::to_value(cluster_of).unwrap());
                params.insert("m".into(), (*treated).into());
            }
        }
        file.params = params;
        file
    }

    pub fn into_design(self, cap: EnumerationCap) -> Result<Design> {
        let param = |key: &str| {
            self.params.get(key).ok_or_else(|| {
                Error::Parse(format!("design kind '{}' needs param '{key}'", self.kind))
            })
        };
        let usize_param = |key: &str| -> Result<usize> {
            param(key)?.as_u64().map(|v| v as usize).ok_or_else(|| {
                Error::Parse(format!("param '{key}' must be a non-negative integer"))
            })
        };
        match self.kind.as_str() {
            "explicit" => {
                if self.support.len() != self.mass_num.len()
                    || self.support.len() != self.mass_den.len()
                {
                    return Err(Error::Parse(
                        "support, mass_num and mass_den lengths differ".into(),
                    ));
                }
                let mut points = Vec::with_capacity(self.support.len());
                for ((z, num), den) in self.support.iter().zip(&self.mass_num).zip(&self.mass_den) {
                    let den = bigint_from_json(den)?;
                    if den.is_zero() {
                        return Err(Error::Parse("zero mass denominator".into()));
                    }
                    points.push((
                        AssignmentVector(z.clone()),
                        BigRational::new(bigint_from_json(num)?, den),
                    ));
                }
                Design::explicit(self.n, "explicit", points)
            }
            "bernoulli" => {
                Design::bernoulli_with_cap(self.n, rational_from_json(param("p")?)?, cap)
            }
            "complete" => Design::complete_with_cap(self.n, usize_param("m")?, cap),
            "ordered_sample" => Design::ordered_sample_with_cap(self.n, usize_param("n")?, cap),
            "cluster_complete" => {
                let clusters: Vec<usize> = serde_json::from_value(param("clusters")?.clone())?;
                if clusters.len() != self.n {
                    return Err(Error::LengthMismatch {
                        expected: self.n,
                        found: clusters.len(),
                    });
                }
                Design::cluster_complete_with_cap(clusters, usize_param("m")?, cap)
            }
            other => Err(Error::Parse(format!("unknown design kind '{other}'"))),
        }
    }
}

impl Design {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&DesignFile::from_design(
            self,
        ))?)
    }

    pub fn from_json(text: &str, cap: EnumerationCap) -> Result<Self> {
        serde_json::from_str::<DesignFile>(text)?.into_design(cap)
    }

    /// Number of support points as a u64, when it fits.
    pub fn support_len(&self) -> Option<u64> {
        self.support_size.to_u64()
    }
}
