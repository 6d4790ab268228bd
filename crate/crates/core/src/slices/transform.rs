use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use serde_json::Value;

use super::{with_columns, BuildOutput, Provenance, Slice, SliceBuilder, SliceCategory, SliceMembership};
use crate::canonical;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::identifier::Identifier;
use crate::text;

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index below `n` by multiply-shift.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

/// Lowercase word to replacement candidates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon(BTreeMap<String, Vec<String>>);

impl Lexicon {
    pub fn new(entries: BTreeMap<String, Vec<String>>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, v) in entries {
            if v.is_empty() {
                return Err(Error::InvalidParameter(format!("lexicon entry `{k}` has no replacements")));
            }
            map.insert(text::fold(&text::nfc(&k)), v);
        }
        Ok(Lexicon(map))
    }

    /// Parses `word<TAB>a,b,c` lines; `#` starts a comment line.
    pub fn parse_tsv(src: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in src.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, reps) = line
                .split_once('\t')
                .ok_or_else(|| Error::InvalidParameter(format!("lexicon line {}: expected a tab", i + 1)))?;
            let reps: Vec<String> = reps.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
            map.insert(word.trim().to_string(), reps);
        }
        Lexicon::new(map)
    }

    /// The bundled English lexicon.
    pub fn bundled() -> Arc<Lexicon> {
        static BUNDLED: OnceLock<Arc<Lexicon>> = OnceLock::new();
        BUNDLED
            .get_or_init(|| {
                Arc::new(Lexicon::parse_tsv(include_str!("../../data/synonyms.tsv")).expect("bundled lexicon parses"))
            })
            .clone()
    }

    pub fn get(&self, folded: &str) -> Option<&[String]> {
        self.0.get(folded).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Short content digest, used to name custom lexicons in identifiers.
    pub fn digest(&self) -> String {
        let bytes = canonical::to_vec_from(&self.0).expect("lexicon serializes");
        canonical::sha256_hex(&bytes)[..16].to_string()
    }
}

/// Neighbors of a lowercase key on a US QWERTY layout.
pub fn keyboard_neighbors(key: char) -> Option<&'static [char]> {
    static TABLE: OnceLock<BTreeMap<char, Vec<char>>> = OnceLock::new();
    TABLE
        .get_or_init(|| {
            include_str!("../../data/qwerty.tsv")
                .lines()
                .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
                .filter_map(|l| {
                    let (k, n) = l.split_once('\t')?;
                    Some((k.chars().next()?, n.trim().chars().collect()))
                })
                .collect()
        })
        .get(&key)
        .map(Vec::as_slice)
}

/// Copies the case of `like`'s first character onto `word`.
fn match_case(like: &str, word: &str) -> String {
    match (like.chars().next(), word.chars().next()) {
        (Some(l), Some(w)) if l.is_uppercase() && !w.is_uppercase() => {
            let mut out: String = w.to_uppercase().collect();
            out.push_str(&word[w.len_utf8()..]);
            out
        }
        _ => word.to_string(),
    }
}

/// Rewrites tokens of the NFC text; `f` returns a replacement or
/// `None` to keep the token.
fn rewrite_tokens(input: &str, mut f: impl FnMut(&str) -> Option<String>) -> String {
    let t = text::nfc(input);
    let mut out = String::with_capacity(t.len());
    let mut last = 0;
    for (s, e) in text::token_spans(&t) {
        if let Some(rep) = f(&t[s..e]) {
            out.push_str(&t[last..s]);
            out.push_str(&rep);
            last = e;
        }
    }
    if last == 0 {
        // untouched text keeps its original normalization
        return input.to_string();
    }
    out.push_str(&t[last..]);
    out
}

pub(super) type TextRewrite<'a> = dyn Fn(&str, &mut SplitMix64) -> String + Sync + 'a;

/// Applies a per-row text rewrite to `columns` and wraps the result as a
/// single slice covering every input row.
#[allow(clippy::too_many_arguments)]
pub(super) fn rewrite_dataset(
    dataset: &Dataset,
    columns: &[&str],
    seed: u64,
    rewrite: &TextRewrite<'_>,
    category: SliceCategory,
    step: Identifier,
    display_name: String,
    parent: &Provenance,
) -> Result<BuildOutput> {
    dataset.check_columns(columns)?;
    let mut new_cols: Vec<Vec<Value>> = columns
        .iter()
        .map(|c| dataset.column_values(c).map(|v| v.to_vec()))
        .collect::<Result<_>>()?;
    for row in 0..dataset.len() {
        let mut rng = SplitMix64::new(seed ^ dataset.row_fingerprint(row, columns)?.low_u64());
        for (values, col) in new_cols.iter_mut().zip(columns) {
            match &mut values[row] {
                Value::Null => {}
                Value::String(s) => *s = rewrite(s, &mut rng),
                _ => return Err(Error::InvalidParameter(format!("column `{col}` is not text at row {row}"))),
            }
        }
    }
    let mut data = dataset.clone();
    for (col, values) in columns.iter().zip(new_cols) {
        data = data.replace_column(col, values)?;
    }
    let data = data.with_identifier(step.clone());
    Ok(BuildOutput {
        dataset: dataset.clone(),
        membership: SliceMembership::from_columns(&[vec![true; dataset.len()]], dataset.len(), vec![display_name.clone()]),
        slices: vec![Slice {
            data,
            category,
            lineage: parent.then(step),
            display_name,
        }],
    })
}

fn check_rate(rate: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&rate) {
        Ok(rate)
    } else {
        Err(Error::InvalidParameter(format!("rate must be in [0, 1], got {rate}")))
    }
}

fn seed_param(seed: u64) -> crate::identifier::Param {
    match i64::try_from(seed) {
        Ok(s) => s.into(),
        Err(_) => seed.to_string().into(),
    }
}

/// Replaces lexicon words with a random synonym. Each token that has a
/// lexicon entry draws once to decide replacement, and once more to pick the
/// synonym when replaced. The generator is seeded per example with
/// `seed ^ fingerprint(selected columns)`.
#[derive(Debug, Clone)]
pub struct SynonymAug {
    seed: u64,
    rate: f64,
    lexicon: Arc<Lexicon>,
    custom: bool,
}

impl SynonymAug {
    pub fn new(seed: u64, rate: f64) -> Result<Self> {
        Ok(SynonymAug {
            seed,
            rate: check_rate(rate)?,
            lexicon: Lexicon::bundled(),
            custom: false,
        })
    }

    pub fn with_lexicon(mut self, lexicon: Lexicon) -> Self {
        self.lexicon = Arc::new(lexicon);
        self.custom = true;
        self
    }

    /// Transforms one text with an already seeded generator.
    pub fn transform_text(&self, input: &str, rng: &mut SplitMix64) -> String {
        rewrite_tokens(input, |tok| {
            let candidates = self.lexicon.get(&text::fold(tok))?;
            if rng.next_f64() < self.rate {
                Some(match_case(tok, &candidates[rng.below(candidates.len())]))
            } else {
                None
            }
        })
    }
}

impl SliceBuilder for SynonymAug {
    fn identifier(&self) -> Identifier {
        let lexicon = if self.custom { self.lexicon.digest() } else { "default".into() };
        Identifier::new("SynonymAug")
            .with("seed", seed_param(self.seed))
            .with("rate", self.rate)
            .with("lexicon", lexicon)
    }

    fn category(&self) -> SliceCategory {
        SliceCategory::Transformation
    }

    fn build_with_lineage(&self, dataset: &Dataset, columns: &[&str], parent: &Provenance) -> Result<BuildOutput> {
        let id = self.identifier();
        let name = format!("SynonymAug(seed={}, rate={})", self.seed, self.rate);
        rewrite_dataset(
            dataset,
            columns,
            self.seed,
            &|s, rng| self.transform_text(s, rng),
            SliceCategory::Transformation,
            with_columns(id, columns),
            name,
            parent,
        )
    }
}

/// Simulated typos: in each token of three or more characters, with
/// probability `rate`, one interior character becomes a QWERTY neighbor.
/// Draws per eligible token: the decision, then (if replacing) the position,
/// then (if that character has neighbors) the neighbor.
#[derive(Debug, Clone)]
pub struct KeyboardAug {
    seed: u64,
    rate: f64,
}

impl KeyboardAug {
    pub fn new(seed: u64, rate: f64) -> Result<Self> {
        Ok(KeyboardAug {
            seed,
            rate: check_rate(rate)?,
        })
    }

    pub fn transform_text(&self, input: &str, rng: &mut SplitMix64) -> String {
        rewrite_tokens(input, |tok| {
            let mut chars: Vec<char> = tok.chars().collect();
            if chars.len() < 3 || rng.next_f64() >= self.rate {
                return None;
            }
            let pos = 1 + rng.below(chars.len() - 2);
            let c = chars[pos];
            let lower = c.to_lowercase().next().filter(|_| c.to_lowercase().count() == 1)?;
            let neighbors = keyboard_neighbors(lower)?;
            let mut k = neighbors[rng.below(neighbors.len())];
            if c.is_uppercase() {
                k = k.to_ascii_uppercase();
            }
            chars[pos] = k;
            Some(chars.into_iter().collect())
        })
    }
}

impl SliceBuilder for KeyboardAug {
    fn identifier(&self) -> Identifier {
        Identifier::new("KeyboardAug")
            .with("seed", seed_param(self.seed))
            .with("rate", self.rate)
    }

    fn category(&self) -> SliceCategory {
        SliceCategory::Transformation
    }

    fn build_with_lineage(&self, dataset: &Dataset, columns: &[&str], parent: &Provenance) -> Result<BuildOutput> {
        let id = self.identifier();
        let name = format!("KeyboardAug(seed={}, rate={})", self.seed, self.rate);
        rewrite_dataset(
            dataset,
            columns,
            self.seed,
            &|s, rng| self.transform_text(s, rng),
            SliceCategory::Transformation,
            with_columns(id, columns),
            name,
            parent,
        )
    }
}
