//! Deterministic tokenizer and sentence splitter.
//!
//! These are the built-in stand-ins for external NLP pipelines. Rules:
//! text is NFC-normalized, split on runs of whitespace, and each chunk has
//! its leading and trailing punctuation (general category P) peeled off one
//! character per token. Case is preserved; metrics fold case themselves.

use unicode_normalization::UnicodeNormalization;
use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

fn is_punct(c: char) -> bool {
    c.general_category_group() == GeneralCategoryGroup::Punctuation
}

pub fn nfc(text: &str) -> String {
    text.nfc().collect()
}

pub fn fold(token: &str) -> String {
    token.to_lowercase()
}

/// Byte spans of the tokens of `text`, which must already be NFC.
pub fn token_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut chunk_start: Option<usize> = None;
    for (i, c) in text.char_indices().chain(std::iter::once((text.len(), ' '))) {
        if c.is_whitespace() {
            if let Some(start) = chunk_start.take() {
                split_chunk(text, start, i, &mut spans);
            }
        } else if chunk_start.is_none() {
            chunk_start = Some(i);
        }
    }
    spans
}

fn split_chunk(text: &str, start: usize, end: usize, spans: &mut Vec<(usize, usize)>) {
    let chunk = &text[start..end];
    let mut lead = start;
    for (i, c) in chunk.char_indices() {
        if !is_punct(c) {
            break;
        }
        spans.push((start + i, start + i + c.len_utf8()));
        lead = start + i + c.len_utf8();
    }
    if lead == end {
        return;
    }
    let mut trail = Vec::new();
    let mut core_end = end;
    for (i, c) in text[lead..end].char_indices().rev() {
        if !is_punct(c) {
            break;
        }
        trail.push((lead + i, lead + i + c.len_utf8()));
        core_end = lead + i;
    }
    spans.push((lead, core_end));
    spans.extend(trail.into_iter().rev());
}

pub fn tokenize(text: &str) -> Vec<String> {
    let text = nfc(text);
    token_spans(&text)
        .into_iter()
        .map(|(s, e)| text[s..e].to_string())
        .collect()
}

pub fn tokenize_folded(text: &str) -> Vec<String> {
    tokenize(text).iter().map(|t| fold(t)).collect()
}

/// Splits after `.`, `!` or `?` when followed by whitespace and an uppercase
/// letter, or by the end of the text. Sentences are trimmed; empty ones are
/// dropped.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    for (k, &(i, c)) in chars.iter().enumerate() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let mut j = k + 1;
        while j < chars.len() && chars[j].1.is_whitespace() {
            j += 1;
        }
        let boundary = if j == chars.len() {
            true
        } else {
            j > k + 1 && chars[j].1.is_uppercase()
        };
        if boundary {
            let end = i + c.len_utf8();
            push_trimmed(&text[start..end], &mut out);
            start = end;
        }
    }
    push_trimmed(&text[start..], &mut out);
    out
}

fn push_trimmed(s: &str, out: &mut Vec<String>) {
    let t = s.trim();
    if !t.is_empty() {
        out.push(t.to_string());
    }
}
