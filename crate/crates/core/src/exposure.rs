//! Exposure mappings g_i: assignment vector -> exposure label.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::design::AssignmentVector;
use crate::error::{Error, Result};

/// Exposure label code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub i64);

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .parse()
            .map(Label)
            .map_err(|_| Error::Parse(format!("invalid exposure label '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExposureLabel {
    pub code: Label,
    pub name: String,
}

impl ExposureLabel {
    pub fn new(code: i64, name: impl Into<String>) -> Self {
        ExposureLabel {
            code: Label(code),
            name: name.into(),
        }
    }
}

pub mod network {
    use super::Label;

    pub const CONTROL: Label = Label(0);
    pub const ISOLATED_DIRECT: Label = Label(1);
    pub const INDIRECT: Label = Label(2);
    pub const DIRECT_AND_INDIRECT: Label = Label(3);
}

/// Undirected peer network: symmetric, binary, zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    neighbors: Vec<Vec<usize>>,
}

impl AdjacencyMatrix {
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let mut neighbors = vec![Vec::new(); n];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!(
                    "adjacency row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, &a) in row.iter().enumerate() {
                match a {
                    0 => {}
                    1 if i == j => {
                        return Err(Error::InvalidParameter(format!(
                            "adjacency diagonal entry {i} is non-zero"
                        )))
                    }
                    1 => neighbors[i].push(j),
                    other => {
                        return Err(Error::InvalidParameter(format!(
                            "adjacency entry ({i},{j}) = {other} is not binary"
                        )))
                    }
                }
                if rows[j][i] != a {
                    return Err(Error::InvalidParameter(format!(
                        "adjacency is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(AdjacencyMatrix { neighbors })
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut rows = vec![vec![0u8; n]; n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Dimension(format!(
                    "edge ({a},{b}) outside {n} units"
                )));
            }
            rows[a][b] = 1;
            rows[b][a] = 1;
        }
        Self::from_rows(&rows)
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        let n = self.n();
        self.neighbors
            .iter()
            .map(|nb| {
                let mut row = vec![0u8; n];
                for &j in nb {
                    row[j] = 1;
                }
                row
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExposureRule {
    /// g_i(z) = z_i.
    Individualistic,
    /// 1 iff z_i = 1 or z_{i-1} = 1, with z_0 = 0.
    Carryover,
    /// 1 iff z_i > 0.
    SurveyIndicator,
    /// Four-way direct/indirect classification over a peer network.
    Network(AdjacencyMatrix),
    /// Explicit per-assignment exposure vectors.
    Table(HashMap<AssignmentVector, Vec<Label>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExposureMapping {
    n: usize,
    rule: ExposureRule,
    labels: Vec<ExposureLabel>,
}

impl ExposureMapping {
    pub fn individualistic(n: usize) -> Self {
        Self::individualistic_with_levels(n, 2)
    }

    /// Individualistic mapping over codes `0..levels`.
    pub fn individualistic_with_levels(n: usize, levels: u32) -> Self {
        let labels = (0..levels as i64)
            .map(|c| match c {
                0 => ExposureLabel::new(0, "control"),
                1 if levels == 2 => ExposureLabel::new(1, "treated"),
                c => ExposureLabel::new(c, format!("treatment {c}")),
            })
            .collect();
        ExposureMapping {
            n,
            rule: ExposureRule::Individualistic,
            labels,
        }
    }

    pub fn carryover(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "carryover mapping needs N >= 1".into(),
            ));
        }
        Ok(ExposureMapping {
            n,
            rule: ExposureRule::Carryover,
            labels: vec![
                ExposureLabel::new(0, "unexposed"),
                ExposureLabel::new(1, "exposed today or yesterday"),
            ],
        })
    }

    pub fn survey_indicator(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "survey mapping needs N >= 1".into(),
            ));
        }
        Ok(ExposureMapping {
            n,
            rule: ExposureRule::SurveyIndicator,
            labels: vec![
                ExposureLabel::new(0, "unsampled"),
                ExposureLabel::new(1, "sampled"),
            ],
        })
    }

    pub fn network(adjacency: AdjacencyMatrix) -> Self {
        ExposureMapping {
            n: adjacency.n(),
            rule: ExposureRule::Network(adjacency),
            labels: vec![
                ExposureLabel::new(network::CONTROL.0, "control"),
                ExposureLabel::new(network::ISOLATED_DIRECT.0, "isolated direct"),
                ExposureLabel::new(network::INDIRECT.0, "indirect"),
                ExposureLabel::new(network::DIRECT_AND_INDIRECT.0, "direct & indirect"),
            ],
        }
    }

    /// Mapping given by an explicit table. Labels default to the distinct codes in the table.
    pub fn table(
        n: usize,
        rows: impl IntoIterator<Item = (AssignmentVector, Vec<Label>)>,
        labels: Option<Vec<ExposureLabel>>,
    ) -> Result<Self> {
        let mut table = HashMap::new();
        for (z, d) in rows {
            if z.len() != n || d.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: z.len().max(d.len()),
                });
            }
            table.insert(z, d);
        }
        let labels = labels.unwrap_or_else(|| {
            let mut codes: Vec<Label> = table.values().flatten().copied().collect();
            codes.sort();
            codes.dedup();
            codes
                .into_iter()
                .map(|c| ExposureLabel::new(c.0, format!("label {c}")))
                .collect()
        });
        check_unique_codes(&labels)?;
        Ok(ExposureMapping {
            n,
            rule: ExposureRule::Table(table),
            labels,
        })
    }

    /// Tabulates `rule(z)` over `domain`; useful for one-off mappings such as
    /// the swapped household mapping g_i(z) = z_{3-i}.
    pub fn tabulate<F>(n: usize, domain: &[AssignmentVector], rule: F) -> Result<Self>
    where
        F: Fn(&AssignmentVector) -> Vec<Label>,
    {
        Self::table(n, domain.iter().map(|z| (z.clone(), rule(z))), None)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rule(&self) -> &ExposureRule {
        &self.rule
    }

    pub fn labels(&self) -> &[ExposureLabel] {
        &self.labels
    }

    pub fn label_codes(&self) -> Vec<Label> {
        self.labels.iter().map(|l| l.code).collect()
    }

    pub fn label_name(&self, code: Label) -> Option<&str> {
        self.labels
            .iter()
            .find(|l| l.code == code)
            .map(|l| l.name.as_str())
    }

    pub fn is_individualistic(&self) -> bool {
        matches!(self.rule, ExposureRule::Individualistic)
    }

    /// g_i(z) for one unit.
    pub fn label_of(&self, i: usize, z: &AssignmentVector) -> Result<Label> {
        self.check_len(z)?;
        Ok(match &self.rule {
            ExposureRule::Individualistic => Label(z[i] as i64),
            ExposureRule::Carryover => Label((z[i] == 1 || (i > 0 && z[i - 1] == 1)) as i64),
            ExposureRule::SurveyIndicator => Label((z[i] > 0) as i64),
            ExposureRule::Network(adj) => network_label(adj, z, i),
            ExposureRule::Table(table) => {
                table
                    .get(z)
                    .map(|d| d[i])
                    .ok_or_else(|| Error::ExposureUndefined {
                        vector: z.0.clone(),
                    })?
            }
        })
    }

    /// The exposure vector D = (g_1(z), ..., g_N(z)).
    pub fn apply(&self, z: &AssignmentVector) -> Result<Vec<Label>> {
        self.check_len(z)?;
        match &self.rule {
            ExposureRule::Table(table) => {
                table
                    .get(z)
                    .cloned()
                    .ok_or_else(|| Error::ExposureUndefined {
                        vector: z.0.clone(),
                    })
            }
            _ => (0..self.n).map(|i| self.label_of(i, z)).collect(),
        }
    }

    fn check_len(&self, z: &AssignmentVector) -> Result<()> {
        if z.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: z.len(),
            });
        }
        Ok(())
    }
}

/// Evaluates the mapping at `z`.
pub fn apply_exposure(mapping: &ExposureMapping, z: &AssignmentVector) -> Result<Vec<Label>> {
    mapping.apply(z)
}

fn network_label(adj: &AdjacencyMatrix, z: &AssignmentVector, i: usize) -> Label {
    let treated = z[i] == 1;
    let treated_neighbors = adj.neighbors(i).iter().any(|&j| z[j] == 1);
    match (treated, treated_neighbors) {
        (true, false) => network::ISOLATED_DIRECT,
        (false, true) => network::INDIRECT,
        (true, true) => network::DIRECT_AND_INDIRECT,
        (false, false) => network::CONTROL,
    }
}

fn check_unique_codes(labels: &[ExposureLabel]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for l in labels {
        if !seen.insert(l.code) {
            return Err(Error::InvalidParameter(format!(
                "duplicate exposure label code {}",
                l.code
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableRow {
    pub z: Vec<u32>,
    pub d: Vec<i64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MappingTable {
    pub rows: Vec<TableRow>,
}

/// On-disk mapping description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MappingFile {
    pub kind: String,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjacency: Option<Vec<Vec<u8>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<MappingTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<ExposureLabel>>,
}

impl MappingFile {
    pub fn from_mapping(m: &ExposureMapping) -> Self {
        let mut file = MappingFile {
            kind: String::new(),
            n: Some(m.n),
            adjacency: None,
            table: None,
            levels: None,
            labels: Some(m.labels.clone()),
        };
        file.kind = match &m.rule {
            ExposureRule::Individualistic => {
                file.levels = Some(m.labels.len() as u32);
                "individualistic"
            }
            ExposureRule::Carryover => "carryover",
            ExposureRule::SurveyIndicator => "survey",
            ExposureRule::Network(adj) => {
                file.adjacency = Some(adj.rows());
                "network"
            }
            ExposureRule::Table(t) => {
                let ordered: BTreeMap<_, _> = t.iter().collect();
                file.table = Some(MappingTable {
                    rows: ordered
                        .into_iter()
                        .map(|(z, d)| TableRow {
                            z: z.0.clone(),
                            d: d.iter().map(|l| l.0).collect(),
                        })
                        .collect(),
                });
                "table"
            }
        }
        .into();
        file
    }

    /// `n_hint` supplies N when the file omits it (usually the design's N).
    pub fn into_mapping(self, n_hint: Option<usize>) -> Result<ExposureMapping> {
        let n = self.n.or(n_hint);
        let need_n =
            || n.ok_or_else(|| Error::Parse(format!("mapping kind '{}' needs N", self.kind)));
        if self.adjacency.is_some() != (self.kind == "network") {
            return Err(Error::Parse(
                "adjacency is required iff kind = network".into(),
            ));
        }
        let mapping = match self.kind.as_str() {
            "individualistic" => {
                ExposureMapping::individualistic_with_levels(need_n()?, self.levels.unwrap_or(2))
            }
            "carryover" => ExposureMapping::carryover(need_n()?)?,
            "survey" => ExposureMapping::survey_indicator(need_n()?)?,
            "network" => ExposureMapping::network(AdjacencyMatrix::from_rows(
                self.adjacency.as_ref().unwrap(),
            )?),
            "table" => {
                let table = self
                    .table
                    .clone()
                    .ok_or_else(|| Error::Parse("table mapping needs 'table'".into()))?;
                let n = match n {
                    Some(n) => n,
                    None => table.rows.first().map(|r| r.z.len()).unwrap_or(0),
                };
                return ExposureMapping::table(
                    n,
                    table
                        .rows
                        .into_iter()
                        .map(|r| (AssignmentVector(r.z), r.d.into_iter().map(Label).collect())),
                    self.labels,
                );
            }
            other => return Err(Error::Parse(format!("unknown mapping kind '{other}'"))),
        };
        if let Some(n) = n {
            if mapping.n != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: mapping.n,
                });
            }
        }
        Ok(match self.labels {
            Some(labels) => {
                check_unique_codes(&labels)?;
                ExposureMapping { labels, ..mapping }
            }
            None => mapping,
        })
    }
}

impl ExposureMapping {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MappingFile::from_mapping(
            self,
        ))?)
    }

    pub fn from_json(text: &str, n_hint: Option<usize>) -> Result<Self> {
        serde_json::from_str::<MappingFile>(text)?.into_mapping(n_hint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{DesignSpace, EnumerationCap};
    use network::*;

    fn labels(codes: &[i64]) -> Vec<Label> {
        codes.iter().map(|&c| Label(c)).collect()
    }

    #[test]
    fn individualistic_copies_codes() {
        let m = ExposureMapping::individualistic(2);
        assert_eq!(m.apply(&[1, 0].into()).unwrap(), labels(&[1, 0]));
        assert!(matches!(
            m.apply(&[1].into()),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn swapped_household_mapping() {
        let space = DesignSpace::binary(2)
            .enumerate(EnumerationCap::DEFAULT)
            .unwrap();
        let m =
            ExposureMapping::tabulate(2, &space, |z| vec![Label(z[1] as i64), Label(z[0] as i64)])
                .unwrap();
        assert_eq!(m.apply(&[0, 1].into()).unwrap(), labels(&[1, 0]));
        assert!(matches!(
            m.apply(&[2, 0].into()),
            Err(Error::ExposureUndefined { .. })
        ));
    }

    #[test]
    fn carryover_mapping() {
        let m = ExposureMapping::carryover(4).unwrap();
        assert_eq!(
            m.apply(&[0, 1, 0, 0].into()).unwrap(),
            labels(&[0, 1, 1, 0])
        );
        assert_eq!(
            m.apply(&[1, 0, 0, 0].into()).unwrap(),
            labels(&[1, 1, 0, 0])
        );
        assert_eq!(
            m.apply(&[0, 0, 0, 0].into()).unwrap(),
            labels(&[0, 0, 0, 0])
        );
        assert_eq!(
            m.apply(&[1, 1, 1, 1].into()).unwrap(),
            labels(&[1, 1, 1, 1])
        );
        assert!(ExposureMapping::carryover(0).is_err());
    }

    #[test]
    fn survey_indicator_mapping() {
        let m = ExposureMapping::survey_indicator(10).unwrap();
        let a = m.apply(&[1, 2, 3, 0, 0, 0, 0, 0, 0, 0].into()).unwrap();
        assert_eq!(a, labels(&[1, 1, 1, 0, 0, 0, 0, 0, 0, 0]));
        assert_eq!(m.apply(&[3, 2, 1, 0, 0, 0, 0, 0, 0, 0].into()).unwrap(), a);
        assert_eq!(
            m.apply(&AssignmentVector::zeros(10)).unwrap(),
            labels(&[0; 10])
        );
    }

    #[test]
    fn network_mapping_examples() {
        let path =
            ExposureMapping::network(AdjacencyMatrix::from_edges(3, &[(0, 1), (1, 2)]).unwrap());
        assert_eq!(
            path.apply(&[1, 0, 0].into()).unwrap(),
            vec![ISOLATED_DIRECT, INDIRECT, CONTROL]
        );
        let empty = ExposureMapping::network(AdjacencyMatrix::from_edges(2, &[]).unwrap());
        assert_eq!(
            empty.apply(&[1, 0].into()).unwrap(),
            vec![ISOLATED_DIRECT, CONTROL]
        );
        let k2 = ExposureMapping::network(AdjacencyMatrix::from_edges(2, &[(0, 1)]).unwrap());
        assert_eq!(
            k2.apply(&[1, 1].into()).unwrap(),
            vec![DIRECT_AND_INDIRECT, DIRECT_AND_INDIRECT]
        );
    }

    #[test]
    fn adjacency_validation() {
        assert!(AdjacencyMatrix::from_rows(&[vec![1, 0], vec![0, 0]]).is_err());
        assert!(AdjacencyMatrix::from_rows(&[vec![0, 1], vec![0, 0]]).is_err());
        assert!(AdjacencyMatrix::from_rows(&[vec![0, 2], vec![2, 0]]).is_err());
        assert!(AdjacencyMatrix::from_rows(&[vec![0, 1], vec![1]]).is_err());
    }

    #[test]
    fn mapping_file_round_trip() {
        let adj = AdjacencyMatrix::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        for m in [
            ExposureMapping::individualistic(3),
            ExposureMapping::carryover(3).unwrap(),
            ExposureMapping::survey_indicator(3).unwrap(),
            ExposureMapping::network(adj),
        ] {
            let back = ExposureMapping::from_json(&m.to_json().unwrap(), None).unwrap();
            assert_eq!(back, m);
        }
        let bad = r#"{"kind": "individualistic", "N": 2, "adjacency": [[0,1],[1,0]]}"#;
        assert!(ExposureMapping::from_json(bad, None).is_err());
    }
}
