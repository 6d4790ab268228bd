//! Built-in cached operations.
//!
//! Each constructor returns a [`CachedOperation`] whose identifier fully
//! determines its behavior, so identifiers double as provenance and as cache
//! namespaces. Score operations (`length`, `lexical_overlap` and the
//! summarization metrics) produce one number per example and back the
//! score-based subpopulations.

use std::collections::HashSet;

use serde_json::json;

use crate::cache::{text_arg, CachedOperation};
use crate::dataset::{ColumnKind, Example};
use crate::error::{Error, Result};
use crate::identifier::Identifier;
use crate::summ::{self, RougeVariant};
use crate::text;

/// Share of the distinct case-folded tokens of `b` that also occur in `a`;
/// 0 when `b` is empty.
pub fn lexical_overlap<S: AsRef<str>>(a: &[S], b: &[S]) -> f64 {
    let b: HashSet<String> = b.iter().map(|t| text::fold(t.as_ref())).collect();
    if b.is_empty() {
        return 0.0;
    }
    let a: HashSet<String> = a.iter().map(|t| text::fold(t.as_ref())).collect();
    a.intersection(&b).count() as f64 / b.len() as f64
}

/// Token lists of the given columns, concatenated in call order.
pub fn tokenize_op() -> CachedOperation {
    CachedOperation::new(Identifier::new("tokenize"), ColumnKind::SequenceOfText, |ex, cols| {
        let mut out = Vec::new();
        for c in cols {
            out.extend(text::tokenize(text_arg(ex, c)?));
        }
        Ok(json!(out))
    })
}

pub fn split_sentences_op() -> CachedOperation {
    CachedOperation::new(Identifier::new("split_sentences"), ColumnKind::SequenceOfText, |ex, cols| {
        let mut out = Vec::new();
        for c in cols {
            out.extend(text::split_sentences(text_arg(ex, c)?));
        }
        Ok(json!(out))
    })
}

fn similarity_metric_name(variant: RougeVariant) -> &'static str {
    match variant {
        RougeVariant::R1 => "rouge1-f1",
        RougeVariant::R2 => "rouge2-f1",
        RougeVariant::RL => "rougeL-f1",
    }
}

pub fn parse_similarity_metric(name: &str) -> Result<RougeVariant> {
    match name {
        "rouge1-f1" => Ok(RougeVariant::R1),
        "rouge2-f1" => Ok(RougeVariant::R2),
        "rougeL-f1" => Ok(RougeVariant::RL),
        other => Err(Error::InvalidParameter(format!("unknown similarity metric `{other}`"))),
    }
}

fn two_texts<'a>(ex: &'a Example, cols: &[&str]) -> std::result::Result<(&'a str, &'a str), String> {
    match cols {
        [article, summary] => Ok((text_arg(ex, article)?, text_arg(ex, summary)?)),
        _ => Err(format!("expected two columns (article, summary), got {}", cols.len())),
    }
}

/// Sentence-similarity matrix between columns `[article, summary]`.
pub fn similarity_matrix_op(variant: RougeVariant) -> CachedOperation {
    let id = Identifier::new("similarity_matrix").with("metric", similarity_metric_name(variant));
    CachedOperation::new(id, ColumnKind::OpaqueJson, move |ex, cols| {
        let (article, summary) = two_texts(ex, cols)?;
        serde_json::to_value(summ::similarity_matrix(article, summary, variant)).map_err(|e| e.to_string())
    })
}

/// Total token count over the given columns.
pub fn length_op() -> CachedOperation {
    CachedOperation::new(Identifier::new("length"), ColumnKind::Scalar, |ex, cols| {
        let mut n = 0usize;
        for c in cols {
            n += text::tokenize(text_arg(ex, c)?).len();
        }
        Ok(json!(n))
    })
}

/// Lexical overlap of columns `[a, b]`, normalized by `b`'s vocabulary.
pub fn lexical_overlap_op() -> CachedOperation {
    CachedOperation::new(Identifier::new("lexical_overlap"), ColumnKind::Scalar, |ex, cols| {
        let (a, b) = two_texts(ex, cols)?;
        Ok(json!(lexical_overlap(&text::tokenize(a), &text::tokenize(b))))
    })
}

fn matrix_score(
    name: &'static str,
    variant: RougeVariant,
    f: fn(&summ::MatchVector) -> Result<f64>,
) -> CachedOperation {
    let id = Identifier::new(name).with("metric", similarity_metric_name(variant));
    CachedOperation::new(id, ColumnKind::Scalar, move |ex, cols| {
        let (article, summary) = two_texts(ex, cols)?;
        let m = summ::similarity_matrix(article, summary, variant);
        let matches = summ::match_vector(&m).map_err(|e| e.to_string())?;
        f(&matches).map(|v| json!(v)).map_err(|e| e.to_string())
    })
}

/// Score operations over `[article, summary]` columns.
pub fn abstractiveness_op(variant: RougeVariant) -> CachedOperation {
    let id = Identifier::new("abstractiveness").with("variant", variant.to_string());
    CachedOperation::new(id, ColumnKind::Scalar, move |ex, cols| {
        let (article, summary) = two_texts(ex, cols)?;
        Ok(json!(summ::abstractiveness(article, summary, variant)))
    })
}

pub fn distillation_op(variant: RougeVariant) -> CachedOperation {
    let id = Identifier::new("distillation").with("variant", variant.to_string());
    CachedOperation::new(id, ColumnKind::Scalar, move |ex, cols| {
        let (article, summary) = two_texts(ex, cols)?;
        Ok(json!(summ::distillation(article, summary, variant)))
    })
}

pub fn position_op(variant: RougeVariant) -> CachedOperation {
    matrix_score("position", variant, summ::MatchVector::position)
}

pub fn dispersion_op(variant: RougeVariant) -> CachedOperation {
    matrix_score("dispersion", variant, summ::MatchVector::dispersion)
}

pub fn order_op(variant: RougeVariant) -> CachedOperation {
    matrix_score("order", variant, |m| m.order().map(|o| o.value))
}

fn variant_param(id: &Identifier, key: &str, default: RougeVariant) -> Result<RougeVariant> {
    match id.get(key) {
        None => Ok(default),
        Some(p) => {
            let s = p
                .as_str()
                .ok_or_else(|| Error::InvalidParameter(format!("`{key}` must be a string in {id}")))?;
            if key == "metric" {
                parse_similarity_metric(s)
            } else {
                s.parse()
            }
        }
    }
}

/// Rebuilds a built-in operation from its canonical identifier.
pub fn builtin_op(id: &Identifier) -> Result<CachedOperation> {
    let op = match id.name() {
        "tokenize" => tokenize_op(),
        "split_sentences" => split_sentences_op(),
        "length" => length_op(),
        "lexical_overlap" => lexical_overlap_op(),
        "similarity_matrix" => similarity_matrix_op(variant_param(id, "metric", RougeVariant::R1)?),
        "abstractiveness" => abstractiveness_op(variant_param(id, "variant", RougeVariant::R1)?),
        "distillation" => distillation_op(variant_param(id, "variant", RougeVariant::R1)?),
        "position" => position_op(variant_param(id, "metric", RougeVariant::R1)?),
        "dispersion" => dispersion_op(variant_param(id, "metric", RougeVariant::R1)?),
        "order" => order_op(variant_param(id, "metric", RougeVariant::R1)?),
        other => return Err(Error::InvalidParameter(format!("unknown operation `{other}`"))),
    };
    Ok(op)
}
