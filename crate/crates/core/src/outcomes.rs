//! Raw potential outcome schedules y_i(z).
//!
//! A schedule is either an explicit table or a named rule evaluated lazily.
//! Both expose the same read interface, so estimand code never knows which
//! it has. Rules keep an `f64` mirror of their parameters for the Monte Carlo
//! path.

use std::collections::{BTreeMap, HashMap};

use num::rational::BigRational;
use num::traits::Zero;
use serde::{Deserialize, Serialize};

use crate::design::{AssignmentVector, DesignSpace};
use crate::error::{Error, Result};
use crate::exposure::{AdjacencyMatrix, ExposureMapping, Label};
use crate::scalar::{
    rational_from_json, rational_to_json, rationals_from_json, rationals_to_json, Scalar,
};

/// Named outcome-generating rules. `T` is the numeric type of the parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeRule<T> {
    /// Units come in consecutive pairs; a unit's outcome is 1 iff its partner is treated.
    PartnerTreated,
    /// One job: treated units split it if some but not all are treated,
    /// otherwise everyone gets an equal share.
    ComparativeAdvantage,
    /// Outcome -1 for every unit when all are treated, else 0.
    Backfire,
    /// y_i = baseline_i + per_treated * (# treated units in i's cluster).
    PartialInterference {
        cluster_of: Vec<usize>,
        baseline: Vec<T>,
        per_treated: T,
    },
    /// No interference: y_i(z) = values[i][z_i].
    Individualistic { values: Vec<Vec<T>> },
    /// y_i = baseline_i + lift * [z_i = 1 or z_{i-1} = 1].
    Carryover { baseline: Vec<T>, lift: T },
    /// Binary uptake: treated units take up; untreated susceptible units take
    /// up when a neighbor is treated.
    Spillover {
        adjacency: AdjacencyMatrix,
        susceptible: Vec<bool>,
    },
    /// Survey measurement: y_i = values_i for sampled units.
    Survey { values: Vec<T> },
}

impl<T: Scalar> OutcomeRule<T> {
    pub fn name(&self) -> &'static str {
        match self {
            OutcomeRule::PartnerTreated => "partner_treated",
            OutcomeRule::ComparativeAdvantage => "comparative_advantage",
            OutcomeRule::Backfire => "backfire",
            OutcomeRule::PartialInterference { .. } => "partial_interference",
            OutcomeRule::Individualistic { .. } => "individualistic",
            OutcomeRule::Carryover { .. } => "carryover",
            OutcomeRule::Spillover { .. } => "spillover",
            OutcomeRule::Survey { .. } => "survey",
        }
    }

    fn map<U>(&self, f: impl Fn(&T) -> U) -> OutcomeRule<U> {
        match self {
            OutcomeRule::PartnerTreated => OutcomeRule::PartnerTreated,
            OutcomeRule::ComparativeAdvantage => OutcomeRule::ComparativeAdvantage,
            OutcomeRule::Backfire => OutcomeRule::Backfire,
            OutcomeRule::PartialInterference {
                cluster_of,
                baseline,
                per_treated,
            } => OutcomeRule::PartialInterference {
                cluster_of: cluster_of.clone(),
                baseline: baseline.iter().map(&f).collect(),
                per_treated: f(per_treated),
            },
            OutcomeRule::Individualistic { values } => OutcomeRule::Individualistic {
                values: values
                    .iter()
                    .map(|row| row.iter().map(&f).collect())
                    .collect(),
            },
            OutcomeRule::Carryover { baseline, lift } => OutcomeRule::Carryover {
                baseline: baseline.iter().map(&f).collect(),
                lift: f(lift),
            },
            OutcomeRule::Spillover {
                adjacency,
                susceptible,
            } => OutcomeRule::Spillover {
                adjacency: adjacency.clone(),
                susceptible: susceptible.clone(),
            },
            OutcomeRule::Survey { values } => OutcomeRule::Survey {
                values: values.iter().map(&f).collect(),
            },
        }
    }

    /// Number of units the rule is defined for, if it fixes one.
    fn fixed_n(&self) -> Option<usize> {
        match self {
            OutcomeRule::PartnerTreated
            | OutcomeRule::ComparativeAdvantage
            | OutcomeRule::Backfire => None,
            OutcomeRule::PartialInterference { cluster_of, .. } => Some(cluster_of.len()),
            OutcomeRule::Individualistic { values } => Some(values.len()),
            OutcomeRule::Carryover { baseline, .. } => Some(baseline.len()),
            OutcomeRule::Spillover { susceptible, .. } => Some(susceptible.len()),
            OutcomeRule::Survey { values } => Some(values.len()),
        }
    }

    /// Full outcome vector at `z` (before any survey placeholder).
    fn row(&self, z: &AssignmentVector) -> Result<Vec<T>> {
        let n = z.len();
        let treated = |i: usize| z[i] == 1;
        Ok(match self {
            OutcomeRule::PartnerTreated => {
                if !n.is_multiple_of(2) {
                    return Err(Error::InvalidParameter(
                        "partner rule needs an even number of units".into(),
                    ));
                }
                (0..n)
                    .map(|i| if treated(i ^ 1) { T::one() } else { T::zero() })
                    .collect()
            }
            OutcomeRule::ComparativeAdvantage => {
                let k = (0..n).filter(|&i| treated(i)).count();
                if k == 0 || k == n {
                    vec![T::one() / T::from_i64(n as i64); n]
                } else {
                    let share = T::one() / T::from_i64(k as i64);
                    (0..n)
                        .map(|i| if treated(i) { share.clone() } else { T::zero() })
                        .collect()
                }
            }
            OutcomeRule::Backfire => {
                let all = n > 0 && (0..n).all(treated);
                vec![if all { -T::one() } else { T::zero() }; n]
            }
            OutcomeRule::PartialInterference {
                cluster_of,
                baseline,
                per_treated,
            } => {
                let clusters = cluster_of.iter().max().map_or(0, |m| m + 1);
                let mut counts = vec![0i64; clusters];
                for (i, &c) in cluster_of.iter().enumerate() {
                    if z[i] > 0 {
                        counts[c] += 1;
                    }
                }
                (0..n)
                    .map(|i| {
                        baseline[i].clone()
                            + per_treated.clone() * T::from_i64(counts[cluster_of[i]])
                    })
                    .collect()
            }
            OutcomeRule::Individualistic { values } => (0..n)
                .map(|i| {
                    values[i]
                        .get(z[i] as usize)
                        .cloned()
                        .ok_or_else(|| Error::OutsideDomain {
                            vector: z.0.clone(),
                        })
                })
                .collect::<Result<_>>()?,
            OutcomeRule::Carryover { baseline, lift } => (0..n)
                .map(|i| {
                    let exposed = treated(i) || (i > 0 && treated(i - 1));
                    if exposed {
                        baseline[i].clone() + lift.clone()
                    } else {
                        baseline[i].clone()
                    }
                })
                .collect(),
            OutcomeRule::Spillover {
                adjacency,
                susceptible,
            } => (0..n)
                .map(|i| {
                    let up = treated(i)
                        || (susceptible[i] && adjacency.neighbors(i).iter().any(|&j| treated(j)));
                    if up {
                        T::one()
                    } else {
                        T::zero()
                    }
                })
                .collect(),
            OutcomeRule::Survey { values } => values.clone(),
        })
    }
}

impl OutcomeRule<BigRational> {
    /// Parses a rule from its name and JSON parameters.
    pub fn from_spec(name: &str, params: &serde_json::Value) -> Result<Self> {
        let field = |key: &str| {
            params
                .get(key)
                .ok_or_else(|| Error::Parse(format!("rule '{name}' needs param '{key}'")))
        };
        Ok(match name {
            "partner_treated" => OutcomeRule::PartnerTreated,
            "comparative_advantage" => OutcomeRule::ComparativeAdvantage,
            "backfire" => OutcomeRule::Backfire,
            "partial_interference" => OutcomeRule::PartialInterference {
                cluster_of: serde_json::from_value(field("cluster_of")?.clone())?,
                baseline: rationals_from_json(field("baseline")?)?,
                per_treated: rational_from_json(field("per_treated")?)?,
            },
            "individualistic" => OutcomeRule::Individualistic {
                values: field("values")?
                    .as_array()
                    .ok_or_else(|| Error::Parse("'values' must be an array of arrays".into()))?
                    .iter()
                    .map(rationals_from_json)
                    .collect::<Result<_>>()?,
            },
            "carryover" => OutcomeRule::Carryover {
                baseline: rationals_from_json(field("baseline")?)?,
                lift: rational_from_json(field("lift")?)?,
            },
            "spillover" => OutcomeRule::Spillover {
                adjacency: AdjacencyMatrix::from_rows(&serde_json::from_value::<Vec<Vec<u8>>>(
                    field("adjacency")?.clone(),
                )?)?,
                susceptible: serde_json::from_value(field("susceptible")?.clone())?,
            },
            "survey" => OutcomeRule::Survey {
                values: rationals_from_json(field("values")?)?,
            },
            other => return Err(Error::UnknownRule(other.to_string())),
        })
    }

    pub fn params_json(&self) -> serde_json::Value {
        use serde_json::json;
        match self {
            OutcomeRule::PartnerTreated
            | OutcomeRule::ComparativeAdvantage
            | OutcomeRule::Backfire => json!({}),
            OutcomeRule::PartialInterference {
                cluster_of,
                baseline,
                per_treated,
            } => json!({
                "cluster_of": cluster_of,
                "baseline": rationals_to_json(baseline),
                "per_treated": rational_to_json(per_treated),
            }),
            OutcomeRule::Individualistic { values } => json!({
                "values": values.iter().map(|r| rationals_to_json(r)).collect::<Vec<_>>(),
            }),
            OutcomeRule::Carryover { baseline, lift } => json!({
                "baseline": rationals_to_json(baseline),
                "lift": rational_to_json(lift),
            }),
            OutcomeRule::Spillover {
                adjacency,
                susceptible,
            } => json!({
                "adjacency": adjacency.rows(),
                "susceptible": susceptible,
            }),
            OutcomeRule::Survey { values } => json!({ "values": rationals_to_json(values) }),
        }
    }
}

#[derive(Debug, Clone)]
enum Source {
    Table {
        exact: HashMap<AssignmentVector, Vec<BigRational>>,
        fast: HashMap<AssignmentVector, Vec<f64>>,
    },
    Rule {
        exact: OutcomeRule<BigRational>,
        fast: OutcomeRule<f64>,
    },
}

/// Raw potential outcomes over a design space.
#[derive(Debug, Clone)]
pub struct OutcomeSchedule {
    n: usize,
    domain: DesignSpace,
    source: Source,
    /// Present for survey schedules: the value recorded for unsampled units.
    placeholder: Option<BigRational>,
}

impl OutcomeSchedule {
    /// Tabular schedule; its domain is exactly the listed assignments.
    pub fn table(
        n: usize,
        rows: impl IntoIterator<Item = (AssignmentVector, Vec<BigRational>)>,
    ) -> Result<Self> {
        let mut exact = HashMap::new();
        for (z, y) in rows {
            if z.len() != n || y.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: if z.len() != n { z.len() } else { y.len() },
                });
            }
            if exact.insert(z.clone(), y).is_some() {
                return Err(Error::DuplicateSupport { vector: z.0 });
            }
        }
        let fast = exact
            .iter()
            .map(|(z, y)| (z.clone(), y.iter().map(Scalar::to_f64).collect()))
            .collect();
        let mut vectors: Vec<AssignmentVector> = exact.keys().cloned().collect();
        vectors.sort();
        Ok(OutcomeSchedule {
            n,
            domain: DesignSpace::Explicit { n, vectors },
            source: Source::Table { exact, fast },
            placeholder: None,
        })
    }

    /// Rule-backed schedule over `domain`. Survey rules get a placeholder of 0.
    pub fn rule(rule: OutcomeRule<BigRational>, domain: DesignSpace) -> Result<Self> {
        let n = domain.n();
        if let Some(k) = rule.fixed_n() {
            if k != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: k,
                });
            }
        }
        if let OutcomeRule::PartnerTreated = rule {
            if !n.is_multiple_of(2) {
                return Err(Error::InvalidParameter(
                    "partner rule needs an even number of units".into(),
                ));
            }
        }
        let placeholder = matches!(rule, OutcomeRule::Survey { .. }).then(BigRational::zero);
        let fast = rule.map(Scalar::to_f64);
        Ok(OutcomeSchedule {
            n,
            domain,
            source: Source::Rule { exact: rule, fast },
            placeholder,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn domain(&self) -> &DesignSpace {
        &self.domain
    }

    pub fn placeholder(&self) -> Option<&BigRational> {
        self.placeholder.as_ref()
    }

    pub fn is_survey(&self) -> bool {
        self.placeholder.is_some()
    }

    pub fn rule_spec(&self) -> Option<&OutcomeRule<BigRational>> {
        match &self.source {
            Source::Rule { exact, .. } => Some(exact),
            Source::Table { .. } => None,
        }
    }

    /// Marks a table schedule as a survey schedule with the given placeholder.
    pub fn into_survey(mut self, placeholder: BigRational) -> Self {
        self.placeholder = Some(placeholder);
        self
    }

    /// Same schedule with a new placeholder; fails for non-survey schedules.
    pub fn with_placeholder(&self, v: BigRational) -> Result<Self> {
        if !self.is_survey() {
            return Err(Error::NotSurvey);
        }
        Ok(OutcomeSchedule {
            placeholder: Some(v),
            ..self.clone()
        })
    }

    fn check(&self, z: &AssignmentVector) -> Result<()> {
        if z.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: z.len(),
            });
        }
        if let Source::Rule { .. } = self.source {
            if !self.domain.contains(z) {
                return Err(Error::OutsideDomain {
                    vector: z.0.clone(),
                });
            }
        }
        Ok(())
    }

    fn apply_placeholder<T: Scalar>(&self, z: &AssignmentVector, mut y: Vec<T>) -> Vec<T> {
        if let Some(ph) = &self.placeholder {
            let ph = T::from_rational(ph);
            for (i, v) in y.iter_mut().enumerate() {
                if z[i] == 0 {
                    *v = ph.clone();
                }
            }
        }
        y
    }

    /// Exact outcome vector at `z`.
    pub fn row(&self, z: &AssignmentVector) -> Result<Vec<BigRational>> {
        self.check(z)?;
        let y = match &self.source {
            Source::Table { exact, .. } => {
                exact.get(z).cloned().ok_or_else(|| Error::OutsideDomain {
                    vector: z.0.clone(),
                })?
            }
            Source::Rule { exact, .. } => exact.row(z)?,
        };
        Ok(self.apply_placeholder(z, y))
    }

    /// Floating-point outcome vector at `z`.
    pub fn row_f64(&self, z: &AssignmentVector) -> Result<Vec<f64>> {
        self.check(z)?;
        let y = match &self.source {
            Source::Table { fast, .. } => {
                fast.get(z).cloned().ok_or_else(|| Error::OutsideDomain {
                    vector: z.0.clone(),
                })?
            }
            Source::Rule { fast, .. } => fast.row(z)?,
        };
        Ok(self.apply_placeholder(z, y))
    }

    /// y_i(z).
    pub fn lookup(&self, i: usize, z: &AssignmentVector) -> Result<BigRational> {
        if i >= self.n {
            return Err(Error::Dimension(format!(
                "unit {i} outside population of {}",
                self.n
            )));
        }
        Ok(self.row(z)?.swap_remove(i))
    }

    /// Whether cell (i, z) is an unsampled survey cell carrying the placeholder.
    pub fn is_placeholder_cell(&self, i: usize, z: &AssignmentVector) -> bool {
        self.placeholder.is_some() && z[i] == 0
    }
}

/// y_i(z) from any schedule.
pub fn lookup(schedule: &OutcomeSchedule, i: usize, z: &AssignmentVector) -> Result<BigRational> {
    schedule.lookup(i, z)
}

/// Builds a rule schedule from a rule name and JSON parameters.
pub fn make_rule_schedule(
    name: &str,
    params: &serde_json::Value,
    domain: DesignSpace,
) -> Result<OutcomeSchedule> {
    OutcomeSchedule::rule(OutcomeRule::from_spec(name, params)?, domain)
}

/// New schedule identical to `schedule` except for the survey placeholder.
pub fn set_placeholder(schedule: &OutcomeSchedule, v: BigRational) -> Result<OutcomeSchedule> {
    schedule.with_placeholder(v)
}

/// One realization (Z, Y, D).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedData<T> {
    pub z: AssignmentVector,
    pub y: Vec<T>,
    pub d: Vec<Label>,
}

impl ObservedData<BigRational> {
    pub fn realize(
        schedule: &OutcomeSchedule,
        mapping: &ExposureMapping,
        z: &AssignmentVector,
    ) -> Result<Self> {
        Ok(ObservedData {
            y: schedule.row(z)?,
            d: mapping.apply(z)?,
            z: z.clone(),
        })
    }
}

impl ObservedData<f64> {
    pub fn realize_f64(
        schedule: &OutcomeSchedule,
        mapping: &ExposureMapping,
        z: &AssignmentVector,
    ) -> Result<Self> {
        Ok(ObservedData {
            y: schedule.row_f64(z)?,
            d: mapping.apply(z)?,
            z: z.clone(),
        })
    }
}

impl<T: Scalar> ObservedData<T> {
    /// Checks that the data agree with the schedule and mapping at `z`.
    pub fn is_consistent(
        &self,
        schedule: &OutcomeSchedule,
        mapping: &ExposureMapping,
    ) -> Result<bool> {
        let y = schedule.row(&self.z)?;
        let d = mapping.apply(&self.z)?;
        Ok(d == self.d && y.iter().map(T::from_rational).collect::<Vec<_>>() == self.y)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub z: Vec<u32>,
    pub y: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleFile {
    pub name: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

/// On-disk schedule description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placeholder: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rows: Vec<ScheduleRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<RuleFile>,
    /// Domain of a rule schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<DesignSpace>,
}

impl ScheduleFile {
    pub fn from_schedule(s: &OutcomeSchedule) -> Self {
        let placeholder = s.placeholder.as_ref().map(rational_to_json);
        match &s.source {
            Source::Table { exact, .. } => {
                let ordered: BTreeMap<_, _> = exact.iter().collect();
                ScheduleFile {
                    kind: "table".into(),
                    placeholder,
                    rows: ordered
                        .into_iter()
                        .map(|(z, y)| ScheduleRow {
                            z: z.0.clone(),
                            y: y.iter().map(rational_to_json).collect(),
                        })
                        .collect(),
                    rule: None,
                    space: None,
                }
            }
            Source::Rule { exact, .. } => ScheduleFile {
                kind: "rule".into(),
                placeholder,
                rows: vec![],
                rule: Some(RuleFile {
                    name: exact.name().into(),
                    params: exact.params_json(),
                }),
                space: Some(s.domain.clone()),
            },
        }
    }

    /// `space` supplies the rule domain when the file omits it.
    pub fn into_schedule(self, space: Option<&DesignSpace>) -> Result<OutcomeSchedule> {
        let schedule = match self.kind.as_str() {
            "table" => {
                let n = self.rows.first().map(|r| r.z.len()).unwrap_or(0);
                let rows = self
                    .rows
                    .iter()
                    .map(|r| {
                        Ok((
                            AssignmentVector(r.z.clone()),
                            r.y.iter()
                                .map(rational_from_json)
                                .collect::<Result<Vec<_>>>()?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                OutcomeSchedule::table(n, rows)?
            }
            "rule" => {
                let rule = self
                    .rule
                    .as_ref()
                    .ok_or_else(|| Error::Parse("rule schedule needs 'rule'".into()))?;
                let domain = self
                    .space
                    .clone()
                    .or_else(|| space.cloned())
                    .ok_or(Error::MissingDesignSpace)?;
                make_rule_schedule(&rule.name, &rule.params, domain)?
            }
            other => return Err(Error::Parse(format!("unknown schedule kind '{other}'"))),
        };
        match &self.placeholder {
            Some(v) => Ok(schedule.into_survey(rational_from_json(v)?)),
            None => Ok(schedule),
        }
    }
}

impl OutcomeSchedule {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ScheduleFile::from_schedule(
            self,
        ))?)
    }

    pub fn from_json(text: &str, space: Option<&DesignSpace>) -> Result<Self> {
        serde_json::from_str::<ScheduleFile>(text)?.into_schedule(space)
    }
}
