use std::sync::Arc;

use super::{with_columns, BuildOutput, Interval, Provenance, Slice, SliceBuilder, SliceCategory, SliceMembership};
use crate::cache::{compute_cached, text_arg, CacheStore, CachedOperation};
use crate::dataset::{Dataset, Example};
use crate::error::{Error, Result};
use crate::identifier::Identifier;
use crate::ops;
use crate::summ::RougeVariant;
use crate::text;

/// Negation cues. Contracted forms such as `don't` stay one token, so any
/// token ending in `n't` also counts.
pub const NEGATION_WORDS: [&str; 10] = [
    "no", "not", "never", "n't", "none", "nobody", "nothing", "neither", "nor", "cannot",
];

/// One slice per row mask, sharing a membership matrix.
fn output(
    dataset: &Dataset,
    category: SliceCategory,
    parts: Vec<(Identifier, String, Vec<bool>)>,
    parent: &Provenance,
) -> Result<BuildOutput> {
    let mut slices = Vec::with_capacity(parts.len());
    let mut masks = Vec::with_capacity(parts.len());
    for (step, display_name, mask) in parts {
        let rows: Vec<usize> = (0..mask.len()).filter(|&r| mask[r]).collect();
        let data = dataset.select_rows(&rows)?.with_identifier(step.clone());
        slices.push(Slice {
            data,
            category,
            lineage: parent.then(step),
            display_name,
        });
        masks.push(mask);
    }
    let ids = slices.iter().map(|s| s.display_name.clone()).collect();
    Ok(BuildOutput {
        dataset: dataset.clone(),
        membership: SliceMembership::from_columns(&masks, dataset.len(), ids),
        slices,
    })
}

/// Slices by score intervals. Scores come from a cached operation and
/// percentile bounds resolve against the scores of the dataset being sliced.
#[derive(Clone)]
pub struct ScoreSubpopulation {
    name: Option<String>,
    score: CachedOperation,
    intervals: Vec<Interval>,
    cache: Arc<CacheStore>,
}

impl ScoreSubpopulation {
    /// Generic form over any numeric operation.
    pub fn new(score: CachedOperation, intervals: Vec<Interval>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InvalidParameter("score subpopulation needs at least one interval".into()));
        }
        Ok(ScoreSubpopulation {
            name: None,
            score,
            intervals,
            cache: Arc::new(CacheStore::in_memory()),
        })
    }

    /// Named form: the identifier is `name(<score params>, intervals=..)`.
    pub fn named(name: &str, score: CachedOperation, intervals: Vec<Interval>) -> Result<Self> {
        let mut b = Self::new(score, intervals)?;
        b.name = Some(name.to_string());
        Ok(b)
    }

    pub fn length(intervals: Vec<Interval>) -> Result<Self> {
        Self::named("Length", ops::length_op(), intervals)
    }

    pub fn lexical_overlap(intervals: Vec<Interval>) -> Result<Self> {
        Self::named("LexicalOverlap", ops::lexical_overlap_op(), intervals)
    }

    pub fn abstractiveness(variant: RougeVariant, intervals: Vec<Interval>) -> Result<Self> {
        Self::named("Abstractiveness", ops::abstractiveness_op(variant), intervals)
    }

    pub fn distillation(variant: RougeVariant, intervals: Vec<Interval>) -> Result<Self> {
        Self::named("Distillation", ops::distillation_op(variant), intervals)
    }

    pub fn position(variant: RougeVariant, intervals: Vec<Interval>) -> Result<Self> {
        Self::named("Position", ops::position_op(variant), intervals)
    }

    pub fn dispersion(variant: RougeVariant, intervals: Vec<Interval>) -> Result<Self> {
        Self::named("Dispersion", ops::dispersion_op(variant), intervals)
    }

    pub fn order(variant: RougeVariant, intervals: Vec<Interval>) -> Result<Self> {
        Self::named("Order", ops::order_op(variant), intervals)
    }

    pub fn with_cache(mut self, cache: Arc<CacheStore>) -> Self {
        self.cache = cache;
        self
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    fn identifier_for(&self, intervals: &[Interval]) -> Identifier {
        let list = Interval::format_list(intervals);
        match &self.name {
            Some(name) => {
                let mut id = Identifier::new(name.clone());
                for (k, v) in self.score.identifier().params() {
                    id = id.with(k.clone(), v.clone());
                }
                id.with("intervals", list)
            }
            None => Identifier::new("ScoreSubpopulation")
                .with("score", self.score.identifier().canonical())
                .with("intervals", list),
        }
    }

    fn display_name(&self, interval: &Interval) -> String {
        match &self.name {
            Some(name) => format!("{name}{interval}"),
            None => format!("{}{interval}", self.score.identifier()),
        }
    }

    /// Per-row scores, computed through the cache.
    pub fn scores(&self, dataset: &Dataset, columns: &[&str]) -> Result<Vec<f64>> {
        let values = compute_cached(&self.score, dataset, columns, &self.cache)?;
        values
            .iter()
            .enumerate()
            .map(|(row, v)| match v.as_f64() {
                Some(x) if x.is_finite() => Ok(x),
                _ => Err(Error::NonFiniteScore(row)),
            })
            .collect()
    }
}

impl SliceBuilder for ScoreSubpopulation {
    fn identifier(&self) -> Identifier {
        self.identifier_for(&self.intervals)
    }

    fn category(&self) -> SliceCategory {
        SliceCategory::Subpopulation
    }

    fn build_with_lineage(&self, dataset: &Dataset, columns: &[&str], parent: &Provenance) -> Result<BuildOutput> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let scores = self.scores(dataset, columns)?;
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        let parts = self
            .intervals
            .iter()
            .map(|interval| {
                let (lo, hi) = interval.resolve(&sorted);
                if lo > hi {
                    return Err(Error::InvalidInterval {
                        interval: interval.to_string(),
                        reason: format!("resolves to [{lo},{hi}]"),
                    });
                }
                let mask = scores.iter().map(|&s| lo <= s && s <= hi).collect();
                let step = with_columns(self.identifier_for(std::slice::from_ref(interval)), columns);
                Ok((step, self.display_name(interval), mask))
            })
            .collect::<Result<_>>()?;
        output(dataset, SliceCategory::Subpopulation, parts, parent)
    }
}

fn folded_tokens(example: &Example, column: &str) -> Result<Vec<String>> {
    text_arg(example, column)
        .map(text::tokenize_folded)
        .map_err(|_| Error::InvalidParameter(format!("column `{column}` is not text")))
}

fn row_matches(dataset: &Dataset, columns: &[&str], pred: impl Fn(&[String]) -> bool) -> Result<Vec<bool>> {
    dataset.check_columns(columns)?;
    let mut mask = Vec::with_capacity(dataset.len());
    for row in 0..dataset.len() {
        let ex = dataset.row(row);
        let mut hit = false;
        for c in columns {
            if pred(&folded_tokens(&ex, c)?) {
                hit = true;
                break;
            }
        }
        mask.push(hit);
    }
    Ok(mask)
}

/// Examples where any selected column contains any of the phrases as a
/// contiguous run of case-folded tokens.
#[derive(Debug, Clone)]
pub struct HasPhrase {
    phrases: Vec<String>,
    tokenized: Vec<Vec<String>>,
    negation: bool,
}

impl HasPhrase {
    pub fn new<I, S>(phrases: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let phrases: Vec<String> = phrases.into_iter().map(Into::into).collect();
        if phrases.is_empty() {
            return Err(Error::InvalidParameter("HasPhrase needs at least one phrase".into()));
        }
        let mut tokenized = Vec::with_capacity(phrases.len());
        for p in &phrases {
            if p.contains('|') {
                return Err(Error::InvalidParameter(format!("phrase `{p}` contains `|`")));
            }
            let toks = text::tokenize_folded(p);
            if toks.is_empty() {
                return Err(Error::InvalidParameter(format!("phrase `{p}` has no tokens")));
            }
            tokenized.push(toks);
        }
        Ok(HasPhrase {
            phrases,
            tokenized,
            negation: false,
        })
    }

    /// Parses `|`-joined phrases.
    pub fn from_joined(joined: &str) -> Result<Self> {
        Self::new(joined.split('|'))
    }

    pub fn negation() -> Self {
        let mut b = Self::new(NEGATION_WORDS).expect("negation words are valid phrases");
        b.negation = true;
        b
    }

    fn matches(&self, tokens: &[String]) -> bool {
        if self.negation && tokens.iter().any(|t| t.ends_with("n't") || t.ends_with("n\u{2019}t")) {
            return true;
        }
        self.tokenized
            .iter()
            .any(|p| p.len() <= tokens.len() && tokens.windows(p.len()).any(|w| w == p.as_slice()))
    }

    fn display_name(&self) -> String {
        if self.negation {
            "HasNegation".into()
        } else {
            format!("HasPhrase({})", self.phrases.join("|"))
        }
    }
}

impl SliceBuilder for HasPhrase {
    fn identifier(&self) -> Identifier {
        if self.negation {
            Identifier::new("HasNegation")
        } else {
            Identifier::new("HasPhrase").with("phrases", self.phrases.join("|"))
        }
    }

    fn category(&self) -> SliceCategory {
        SliceCategory::Subpopulation
    }

    fn build_with_lineage(&self, dataset: &Dataset, columns: &[&str], parent: &Provenance) -> Result<BuildOutput> {
        let mask = row_matches(dataset, columns, |t| self.matches(t))?;
        let step = with_columns(self.identifier(), columns);
        output(dataset, SliceCategory::Subpopulation, vec![(step, self.display_name(), mask)], parent)
    }
}

/// Examples whose token at 0-based `position` (case-folded) equals `token`
/// in any selected column.
#[derive(Debug, Clone)]
pub struct HasTokenAt {
    token: String,
    position: usize,
}

impl HasTokenAt {
    pub fn new(token: &str, position: usize) -> Self {
        HasTokenAt {
            token: token.to_string(),
            position,
        }
    }
}

impl SliceBuilder for HasTokenAt {
    fn identifier(&self) -> Identifier {
        Identifier::new("HasTokenAt")
            .with("token", self.token.clone())
            .with("position", self.position as i64)
    }

    fn category(&self) -> SliceCategory {
        SliceCategory::Subpopulation
    }

    fn build_with_lineage(&self, dataset: &Dataset, columns: &[&str], parent: &Provenance) -> Result<BuildOutput> {
        let want = text::fold(&text::nfc(&self.token));
        let mask = row_matches(dataset, columns, |t| t.get(self.position) == Some(&want))?;
        let step = with_columns(self.identifier(), columns);
        let name = format!("HasTokenAt({},{})", self.token, self.position);
        output(dataset, SliceCategory::Subpopulation, vec![(step, name, mask)], parent)
    }
}
