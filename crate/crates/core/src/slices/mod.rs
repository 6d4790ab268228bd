//! Slice builders for the four evaluation idioms.
//!
//! Every builder call returns a [`BuildOutput`]: the (unchanged) input
//! dataset, the slices it produced, and a membership matrix relating input
//! rows to slices. Each slice records its lineage as the source dataset
//! identifier plus one canonical identifier per builder application; a step
//! identifier carries everything needed to re-run it (columns, intervals,
//! seeds), so [`replay`] can rebuild any slice from its source.

mod attack;
mod evalset;
mod interval;
mod subpop;
mod transform;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cache::{CacheStore, CachedOperation};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::identifier::Identifier;
use crate::ops;

pub use attack::{fixed_suffix, Perturbation, PerturbFn};
pub use evalset::wrap_eval_set;
pub use interval::{Bound, Interval};
pub use subpop::{HasPhrase, HasTokenAt, ScoreSubpopulation, NEGATION_WORDS};
pub use transform::{keyboard_neighbors, KeyboardAug, Lexicon, SplitMix64, SynonymAug};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SliceCategory {
    Subpopulation,
    Transformation,
    Attack,
    Evalset,
}

impl SliceCategory {
    pub const ALL: [SliceCategory; 4] = [
        SliceCategory::Subpopulation,
        SliceCategory::Transformation,
        SliceCategory::Attack,
        SliceCategory::Evalset,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SliceCategory::Subpopulation => "subpopulation",
            SliceCategory::Transformation => "transformation",
            SliceCategory::Attack => "attack",
            SliceCategory::Evalset => "evalset",
        }
    }
}

impl fmt::Display for SliceCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SliceCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SliceCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown slice category `{s}`")))
    }
}

/// Origin dataset plus the builder steps applied to it, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Identifier,
    pub steps: Vec<Identifier>,
}

impl Provenance {
    pub fn new(source: Identifier) -> Self {
        Provenance {
            source,
            steps: Vec::new(),
        }
    }

    pub fn then(&self, step: Identifier) -> Self {
        let mut next = self.clone();
        next.steps.push(step);
        next
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub data: Dataset,
    pub category: SliceCategory,
    pub lineage: Provenance,
    pub display_name: String,
}

impl Slice {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.display_name = name.into();
        self
    }
}

/// Row-by-slice membership: `matrix[row][slice]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceMembership {
    pub matrix: Vec<Vec<bool>>,
    pub slice_ids: Vec<String>,
}

impl SliceMembership {
    pub fn from_columns(columns: &[Vec<bool>], n_rows: usize, slice_ids: Vec<String>) -> Self {
        let matrix = (0..n_rows)
            .map(|r| columns.iter().map(|c| c[r]).collect())
            .collect();
        SliceMembership { matrix, slice_ids }
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.len()
    }

    pub fn n_slices(&self) -> usize {
        self.slice_ids.len()
    }

    pub fn column_sum(&self, slice: usize) -> usize {
        self.matrix.iter().filter(|row| row[slice]).count()
    }

    pub fn rows_in(&self, slice: usize) -> Vec<usize> {
        (0..self.matrix.len()).filter(|&r| self.matrix[r][slice]).collect()
    }
}

#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub dataset: Dataset,
    pub slices: Vec<Slice>,
    pub membership: SliceMembership,
}

pub trait SliceBuilder: Send + Sync {
    /// Canonical spec of the builder, without the columns it is applied to.
    fn identifier(&self) -> Identifier;

    fn category(&self) -> SliceCategory;

    /// Builds slices whose lineage extends `parent` by one step.
    fn build_with_lineage(&self, dataset: &Dataset, columns: &[&str], parent: &Provenance) -> Result<BuildOutput>;

    fn build(&self, dataset: &Dataset, columns: &[&str]) -> Result<BuildOutput> {
        self.build_with_lineage(dataset, columns, &Provenance::new(dataset.identifier().clone()))
    }

    /// Applies the builder to an existing slice, composing lineages.
    fn build_on(&self, slice: &Slice, columns: &[&str]) -> Result<BuildOutput> {
        self.build_with_lineage(&slice.data, columns, &slice.lineage)
    }
}

pub(crate) fn with_columns(id: Identifier, columns: &[&str]) -> Identifier {
    id.with("columns", columns.join(","))
}

fn split_columns(id: &Identifier) -> Result<Vec<String>> {
    let cols = id
        .get("columns")
        .and_then(|p| p.as_str())
        .ok_or_else(|| Error::InvalidParameter(format!("builder spec `{id}` has no `columns`")))?;
    Ok(cols.split(',').map(str::trim).filter(|c| !c.is_empty()).map(String::from).collect())
}

fn str_param<'a>(id: &'a Identifier, key: &str) -> Result<&'a str> {
    id.get(key)
        .and_then(|p| p.as_str())
        .ok_or_else(|| Error::InvalidParameter(format!("builder spec `{id}` needs string `{key}`")))
}

fn f64_param(id: &Identifier, key: &str) -> Result<f64> {
    id.get(key)
        .and_then(|p| p.as_f64())
        .ok_or_else(|| Error::InvalidParameter(format!("builder spec `{id}` needs number `{key}`")))
}

fn u64_param(id: &Identifier, key: &str) -> Result<u64> {
    id.get(key)
        .and_then(|p| p.as_u64())
        .ok_or_else(|| Error::InvalidParameter(format!("builder spec `{id}` needs unsigned `{key}`")))
}

/// Resolves builder specs to builders. Score operations beyond the built-in
/// set can be registered so specs naming them can be replayed.
#[derive(Default, Clone)]
pub struct BuilderRegistry {
    ops: Vec<CachedOperation>,
    cache: Option<Arc<CacheStore>>,
}

impl BuilderRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_op(mut self, op: CachedOperation) -> Self {
        self.ops.push(op);
        self
    }

    pub fn with_cache(mut self, cache: Arc<CacheStore>) -> Self {
        self.cache = Some(cache);
        self
    }

    fn score_op(&self, id: &Identifier) -> Result<CachedOperation> {
        if let Some(op) = self.ops.iter().find(|op| op.identifier() == id) {
            return Ok(op.clone());
        }
        ops::builtin_op(id)
    }

    fn attach_cache(&self, b: ScoreSubpopulation) -> ScoreSubpopulation {
        match &self.cache {
            Some(c) => b.with_cache(c.clone()),
            None => b,
        }
    }

    /// Parses a builder spec such as
    /// `Length(intervals="[0%,10%];[90%,100%]", columns=text)` into the
    /// builder and the columns it applies to.
    pub fn resolve(&self, spec: &Identifier) -> Result<(Box<dyn SliceBuilder>, Vec<String>)> {
        let columns = split_columns(spec)?;
        let builder: Box<dyn SliceBuilder> = match spec.name() {
            "EvalSet" => Box::new(evalset::EvalSetStep {
                name: str_param(spec, "name")?.to_string(),
            }),
            "HasPhrase" => Box::new(HasPhrase::from_joined(str_param(spec, "phrases")?)?),
            "HasNegation" => Box::new(HasPhrase::negation()),
            "HasTokenAt" => {
                let position = spec
                    .get("position")
                    .and_then(|p| p.as_u64())
                    .ok_or_else(|| Error::InvalidParameter(format!("`{spec}` needs `position`")))?;
                Box::new(HasTokenAt::new(str_param(spec, "token")?, position as usize))
            }
            "SynonymAug" => {
                let lexicon = str_param(spec, "lexicon").unwrap_or("default");
                if lexicon != "default" {
                    return Err(Error::InvalidParameter(format!(
                        "cannot rebuild SynonymAug with custom lexicon {lexicon}"
                    )));
                }
                Box::new(SynonymAug::new(u64_param(spec, "seed")?, f64_param(spec, "rate")?)?)
            }
            "KeyboardAug" => Box::new(KeyboardAug::new(u64_param(spec, "seed")?, f64_param(spec, "rate")?)?),
            "FixedSuffix" => Box::new(fixed_suffix(str_param(spec, "suffix")?)?),
            _ => Box::new(self.attach_cache(self.score_builder(spec)?)),
        };
        Ok((builder, columns))
    }

    fn score_builder(&self, spec: &Identifier) -> Result<ScoreSubpopulation> {
        let intervals = Interval::parse_list(str_param(spec, "intervals")?)?;
        let variant = |key: &str| -> Result<Identifier> {
            // re-express the builder's own params as the score op's identifier
            let mut op = Identifier::new(spec.name().to_lowercase());
            if let Some(p) = spec.get(key) {
                op = op.with(key, p.clone());
            }
            Ok(op)
        };
        let (name, score) = match spec.name() {
            "Length" => ("Length", ops::length_op()),
            "LexicalOverlap" => ("LexicalOverlap", ops::lexical_overlap_op()),
            "Abstractiveness" => ("Abstractiveness", self.score_op(&variant("variant")?)?),
            "Distillation" => ("Distillation", self.score_op(&variant("variant")?)?),
            "Position" => ("Position", self.score_op(&variant("metric")?)?),
            "Dispersion" => ("Dispersion", self.score_op(&variant("metric")?)?),
            "Order" => ("Order", self.score_op(&variant("metric")?)?),
            "ScoreSubpopulation" => {
                let op = self.score_op(&Identifier::parse(str_param(spec, "score")?)?)?;
                return ScoreSubpopulation::new(op, intervals);
            }
            other => return Err(Error::InvalidParameter(format!("unknown slice builder `{other}`"))),
        };
        ScoreSubpopulation::named(name, score, intervals)
    }
}

/// Parses a builder spec with the default registry.
pub fn resolve_builder(spec: &Identifier) -> Result<(Box<dyn SliceBuilder>, Vec<String>)> {
    BuilderRegistry::new().resolve(spec)
}

/// Re-executes `lineage` on `source`, returning the reconstructed slice data.
/// Each step must yield exactly one slice, which step identifiers guarantee.
pub fn replay(lineage: &Provenance, source: &Dataset, registry: &BuilderRegistry) -> Result<Dataset> {
    let mut current = source.clone();
    for step in &lineage.steps {
        let (builder, columns) = registry.resolve(step)?;
        let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
        let out = builder.build(&current, &cols)?;
        match <[Slice; 1]>::try_from(out.slices) {
            Ok([slice]) => current = slice.data,
            Err(v) => {
                return Err(Error::InvalidParameter(format!(
                    "step `{step}` produced {} slices, expected 1",
                    v.len()
                )))
            }
        }
    }
    Ok(current)
}
