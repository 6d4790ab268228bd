//! Summarization slice metrics.
//!
//! ROUGE here is the asymmetric form used for characterizing reference
//! summaries: precision is taken over the summary's n-grams and recall over
//! the article's. Abstractiveness and distillation are their complements,
//! and position, dispersion and order are decoded from a sentence-similarity
//! matrix through the per-summary-sentence argmax `match`.
//!
//! Zero denominators give precision/recall 0, so abstractiveness and
//! distillation are total functions (1.0 for degenerate inputs).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum RougeVariant {
    #[default]
    R1,
    R2,
    RL,
}

impl fmt::Display for RougeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RougeVariant::R1 => "R1",
            RougeVariant::R2 => "R2",
            RougeVariant::RL => "RL",
        })
    }
}

impl FromStr for RougeVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "R1" | "ROUGE1" => Ok(RougeVariant::R1),
            "R2" | "ROUGE2" => Ok(RougeVariant::R2),
            "RL" | "ROUGEL" => Ok(RougeVariant::RL),
            _ => Err(Error::InvalidParameter(format!("unknown rouge variant `{s}`"))),
        }
    }
}

/// Integer ingredients of a ROUGE score, kept so callers can compare exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RougeCounts {
    pub overlap: usize,
    pub summary_total: usize,
    pub article_total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub variant: RougeVariant,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl RougeScores {
    pub fn from_counts(counts: RougeCounts, variant: RougeVariant) -> Self {
        let precision = ratio(counts.overlap, counts.summary_total);
        let recall = ratio(counts.overlap, counts.article_total);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        RougeScores {
            precision,
            recall,
            f1,
            variant,
        }
    }
}

/// Contiguous `n`-token windows with multiplicities.
pub fn ngram_multiset<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut out = HashMap::new();
    if n == 0 || tokens.len() < n {
        return out;
    }
    for w in tokens.windows(n) {
        *out.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
    }
    out
}

pub fn lcs_len<T: AsRef<str>>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_counts<T: AsRef<str>>(article: &[T], summary: &[T], variant: RougeVariant) -> RougeCounts {
    let n = match variant {
        RougeVariant::R1 => 1,
        RougeVariant::R2 => 2,
        RougeVariant::RL => {
            return RougeCounts {
                overlap: lcs_len(article, summary),
                summary_total: summary.len(),
                article_total: article.len(),
            }
        }
    };
    let a = ngram_multiset(article, n);
    let s = ngram_multiset(summary, n);
    let overlap = s
        .iter()
        .map(|(g, &c)| a.get(g).map_or(0, |&ca| ca.min(c)))
        .sum();
    RougeCounts {
        overlap,
        summary_total: s.values().sum(),
        article_total: a.values().sum(),
    }
}

/// ROUGE of `summary` against `article` over already-tokenized input.
pub fn rouge<T: AsRef<str>>(article: &[T], summary: &[T], variant: RougeVariant) -> RougeScores {
    RougeScores::from_counts(rouge_counts(article, summary, variant), variant)
}

/// ROUGE over raw text, tokenized and case-folded.
pub fn rouge_text(article: &str, summary: &str, variant: RougeVariant) -> RougeScores {
    rouge(&text::tokenize_folded(article), &text::tokenize_folded(summary), variant)
}

pub fn abstractiveness(article: &str, summary: &str, variant: RougeVariant) -> f64 {
    1.0 - rouge_text(article, summary, variant).precision
}

pub fn distillation(article: &str, summary: &str, variant: RougeVariant) -> f64 {
    1.0 - rouge_text(article, summary, variant).recall
}

/// `values[i][j]` is the similarity of article sentence `i` to summary
/// sentence `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceSimilarityMatrix {
    pub values: Vec<Vec<f64>>,
    pub article_sentences: usize,
    pub summary_sentences: usize,
    pub metric: String,
}

impl SentenceSimilarityMatrix {
    pub fn from_rows(values: Vec<Vec<f64>>, metric: impl Into<String>) -> Result<Self> {
        let article_sentences = values.len();
        let summary_sentences = values.first().map_or(0, Vec::len);
        if values.iter().any(|r| r.len() != summary_sentences) {
            return Err(Error::InvalidParameter("ragged similarity matrix".into()));
        }
        Ok(SentenceSimilarityMatrix {
            values,
            article_sentences,
            summary_sentences,
            metric: metric.into(),
        })
    }

    pub fn get(&self, article: usize, summary: usize) -> f64 {
        self.values[article][summary]
    }
}

/// Builds the sentence-similarity matrix from raw article and summary text,
/// using ROUGE F1 of the given variant between case-folded sentence tokens.
pub fn similarity_matrix(article: &str, summary: &str, variant: RougeVariant) -> SentenceSimilarityMatrix {
    similarity_matrix_from_sentences(
        &text::split_sentences(article),
        &text::split_sentences(summary),
        variant,
    )
}

pub fn similarity_matrix_from_sentences<S: AsRef<str>>(
    article: &[S],
    summary: &[S],
    variant: RougeVariant,
) -> SentenceSimilarityMatrix {
    let a: Vec<Vec<String>> = article.iter().map(|s| text::tokenize_folded(s.as_ref())).collect();
    let s: Vec<Vec<String>> = summary.iter().map(|s| text::tokenize_folded(s.as_ref())).collect();
    let values = a
        .iter()
        .map(|ai| s.iter().map(|sj| rouge(ai, sj, variant).f1).collect())
        .collect();
    SentenceSimilarityMatrix {
        values,
        article_sentences: a.len(),
        summary_sentences: s.len(),
        metric: format!("rouge_f1(variant={variant})"),
    }
}

/// For each summary sentence, the article sentence with the highest
/// similarity; ties go to the lowest index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchVector(pub Vec<usize>);

pub fn match_vector(m: &SentenceSimilarityMatrix) -> Result<MatchVector> {
    if m.article_sentences == 0 {
        return Err(Error::NoArticleSentences);
    }
    let matches = (0..m.summary_sentences)
        .map(|j| {
            let mut best = 0;
            for i in 1..m.article_sentences {
                if m.get(i, j) > m.get(best, j) {
                    best = i;
                }
            }
            best
        })
        .collect();
    Ok(MatchVector(matches))
}

/// Order score; `degenerate` marks summaries with fewer than two sentences,
/// for which the value is defined as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderScore {
    pub value: f64,
    pub degenerate: bool,
}

impl MatchVector {
    fn require_nonempty(&self) -> Result<()> {
        if self.0.is_empty() {
            Err(Error::InvalidParameter("no summary sentences".into()))
        } else {
            Ok(())
        }
    }

    pub fn position(&self) -> Result<f64> {
        self.require_nonempty()?;
        Ok(self.0.iter().sum::<usize>() as f64 / self.0.len() as f64)
    }

    /// Population variance of the matched positions.
    pub fn dispersion(&self) -> Result<f64> {
        let mu = self.position()?;
        let n = self.0.len() as f64;
        Ok(self.0.iter().map(|&m| (m as f64 - mu).powi(2)).sum::<f64>() / n)
    }

    pub fn order(&self) -> Result<OrderScore> {
        self.require_nonempty()?;
        if self.0.len() < 2 {
            return Ok(OrderScore {
                value: 0.0,
                degenerate: true,
            });
        }
        let xs: Vec<f64> = self.0.iter().map(|&m| m as f64).collect();
        let ys: Vec<f64> = (1..=self.0.len()).map(|j| j as f64).collect();
        Ok(OrderScore {
            value: spearman(&xs, &ys)?,
            degenerate: false,
        })
    }
}

pub fn position(m: &SentenceSimilarityMatrix) -> Result<f64> {
    match_vector(m)?.position()
}

pub fn dispersion(m: &SentenceSimilarityMatrix) -> Result<f64> {
    match_vector(m)?.dispersion()
}

pub fn order(m: &SentenceSimilarityMatrix) -> Result<OrderScore> {
    match_vector(m)?.order()
}

/// 1-based ranks, ties sharing the mean of the ranks they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1
        let r = (i + j + 2) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman rank correlation: Pearson correlation of average ranks. Returns
/// 0 when either side is constant (including fewer than two points).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            expected: xs.len(),
            actual: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Ok(0.0);
    }
    Ok(pearson(&average_ranks(xs), &average_ranks(ys)))
}

/// The first three sentences of the article, joined with single spaces.
pub fn lead3(article: &str) -> String {
    text::split_sentences(article)
        .into_iter()
        .take(3)
        .collect::<Vec<_>>()
        .join(" ")
}
