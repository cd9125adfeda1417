//! Embedding tables, triplet judgments and the 2-of-8 trial expansion.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Which of the two references the rater picked as more similar to the query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Choice {
    Ref1,
    Ref2,
}

impl Choice {
    /// 1 or 2, as written in `triplets.csv`.
    pub fn index(self) -> u8 {
        match self {
            Choice::Ref1 => 1,
            Choice::Ref2 => 2,
        }
    }

    pub fn from_index(i: u8) -> Option<Choice> {
        match i {
            1 => Some(Choice::Ref1),
            2 => Some(Choice::Ref2),
            _ => None,
        }
    }
}

/// Identifier-indexed matrix of embedding vectors, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingTable {
    /// Builds a table from ids and a row-major `ids.len() × dim` buffer.
    pub fn new(ids: Vec<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid(
                "dim",
                "embedding dimensionality must be at least 1",
            ));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::invalid(
                "vectors",
                format!(
                    "{} values for {} ids of dimension {dim}",
                    data.len(),
                    ids.len()
                ),
            ));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(
                "vectors",
                format!(
                    "non-finite value in row {} ({:?})",
                    pos / dim,
                    ids[pos / dim]
                ),
            ));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::invalid("ids", format!("duplicate id {id:?}")));
            }
        }
        Ok(EmbeddingTable {
            ids,
            index,
            dim,
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.position(id).map(|i| self.row(i))
    }
}

/// One triplet inequality constraint: `query` is more similar to the chosen reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TripletConstraint {
    pub query: String,
    pub ref1: String,
    pub ref2: String,
    pub chosen: Choice,
}

impl TripletConstraint {
    pub fn new(
        query: impl Into<String>,
        ref1: impl Into<String>,
        ref2: impl Into<String>,
        chosen: Choice,
    ) -> Result<Self> {
        let c = TripletConstraint {
            query: query.into(),
            ref1: ref1.into(),
            ref2: ref2.into(),
            chosen,
        };
        if let Some(reason) = c.duplicate_item() {
            return Err(Error::invalid("triplet", reason));
        }
        Ok(c)
    }

    fn duplicate_item(&self) -> Option<String> {
        if self.ref1 == self.ref2 {
            Some(format!("ref1 and ref2 are both {:?}", self.ref1))
        } else if self.query == self.ref1 || self.query == self.ref2 {
            Some(format!(
                "query {:?} also appears as a reference",
                self.query
            ))
        } else {
            None
        }
    }

    pub fn items(&self) -> [&str; 3] {
        [&self.query, &self.ref1, &self.ref2]
    }
}

/// A trial where the rater saw eight references and picked the two most similar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedTrial {
    query: String,
    references: [String; 8],
    chosen: [String; 2],
}

impl RankedTrial {
    pub fn new(query: String, references: [String; 8], chosen: [String; 2]) -> Result<Self> {
        for (i, r) in references.iter().enumerate() {
            if *r == query {
                return Err(Error::invalid(
                    "references",
                    format!("reference {} equals the query {query:?}", i + 1),
                ));
            }
            if references[..i].contains(r) {
                return Err(Error::invalid(
                    "references",
                    format!("reference {r:?} appears more than once"),
                ));
            }
        }
        if chosen[0] == chosen[1] {
            return Err(Error::invalid(
                "chosen",
                format!("both chosen references are {:?}", chosen[0]),
            ));
        }
        for c in &chosen {
            if !references.contains(c) {
                return Err(Error::invalid(
                    "chosen",
                    format!("chosen id {c:?} is not among the eight references"),
                ));
            }
        }
        Ok(RankedTrial {
            query,
            references,
            chosen,
        })
    }

    pub fn query(&self) -> &str {
        &self.query
    }

    pub fn references(&self) -> &[String; 8] {
        &self.references
    }

    pub fn chosen(&self) -> &[String; 2] {
        &self.chosen
    }
}

/// Expands a 2-of-8 trial into its 12 triplet constraints.
///
/// Each chosen reference beats each of the six non-chosen references. Output
/// is ordered by position of the chosen reference in the trial, then by
/// position of the non-chosen one.
pub fn expand_ranked_trial(trial: &RankedTrial) -> Vec<TripletConstraint> {
    let is_chosen = |r: &String| trial.chosen.contains(r);
    let mut out = Vec::with_capacity(12);
    for winner in trial.references.iter().filter(|r| is_chosen(r)) {
        for loser in trial.references.iter().filter(|r| !is_chosen(r)) {
            out.push(TripletConstraint {
                query: trial.query.clone(),
                ref1: winner.clone(),
                ref2: loser.clone(),
                chosen: Choice::Ref1,
            });
        }
    }
    out
}

/// A list of judgments over items of one embedding table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripletDataset {
    pub constraints: Vec<TripletConstraint>,
}

/// Constraint with items resolved to table rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexedTriplet {
    pub query: usize,
    pub ref1: usize,
    pub ref2: usize,
    pub chosen: Choice,
}

impl IndexedTriplet {
    /// (chosen reference, rejected reference)
    pub fn winner_loser(&self) -> (usize, usize) {
        match self.chosen {
            Choice::Ref1 => (self.ref1, self.ref2),
            Choice::Ref2 => (self.ref2, self.ref1),
        }
    }

    pub fn touches(&self, item: usize) -> bool {
        self.query == item || self.ref1 == item || self.ref2 == item
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Issue {
    UnknownId { constraint: usize, id: String },
    DuplicateItem { constraint: usize, detail: String },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::UnknownId { constraint, id } => {
                write!(f, "constraint {constraint}: unknown id {id:?}")
            }
            Issue::DuplicateItem { constraint, detail } => {
                write!(f, "constraint {constraint}: duplicate item: {detail}")
            }
        }
    }
}

impl TripletDataset {
    pub fn new(constraints: Vec<TripletConstraint>) -> Self {
        TripletDataset { constraints }
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Every problem that would stop this dataset being used with `table`.
    pub fn validate(&self, table: &EmbeddingTable) -> Vec<Issue> {
        let mut issues = Vec::new();
        for (i, c) in self.constraints.iter().enumerate() {
            for id in c.items() {
                if table.position(id).is_none() {
                    issues.push(Issue::UnknownId {
                        constraint: i,
                        id: id.to_string(),
                    });
                }
            }
            if let Some(detail) = c.duplicate_item() {
                issues.push(Issue::DuplicateItem {
                    constraint: i,
                    detail,
                });
            }
        }
        issues
    }

    pub fn resolve(&self, table: &EmbeddingTable) -> Result<Vec<IndexedTriplet>> {
        let lookup = |id: &str| {
            table
                .position(id)
                .ok_or_else(|| Error::UnknownId(id.to_string()))
        };
        self.constraints
            .iter()
            .map(|c| {
                if let Some(reason) = c.duplicate_item() {
                    return Err(Error::invalid("triplet", reason));
                }
                Ok(IndexedTriplet {
                    query: lookup(&c.query)?,
                    ref1: lookup(&c.ref1)?,
                    ref2: lookup(&c.ref2)?,
                    chosen: c.chosen,
                })
            })
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> TripletDataset {
        TripletDataset {
            constraints: indices
                .iter()
                .map(|&i| self.constraints[i].clone())
                .collect(),
        }
    }
}

/// Free-function form of [`TripletDataset::validate`].
pub fn validate_dataset(dataset: &TripletDataset, table: &EmbeddingTable) -> Vec<Issue> {
    dataset.validate(table)
}
