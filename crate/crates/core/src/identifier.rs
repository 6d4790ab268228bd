//! Named, parameterized identifiers for datasets, operations and builders.
//!
//! The canonical form is `name(key1=val1, key2=val2)` with parameters in
//! declaration order, or the bare `name` when there are none. Strings that
//! could be mistaken for another scalar, or that contain separators, are
//! written as JSON string literals; floats always carry a `.`, an exponent, or
//! are `inf`/`-inf`, so they never read back as integers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum Param {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
}

impl Param {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Param::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Param::Int(i) => Some(*i as f64),
            Param::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_u64(&self) -> Option<u64> {
        match self {
            Param::Int(i) if *i >= 0 => Some(*i as u64),
            // seeds above i64::MAX are stored as their decimal string
            Param::Str(s) => s.parse().ok(),
            _ => None,
        }
    }

    fn render(&self, out: &mut String) {
        match self {
            Param::Int(i) => out.push_str(&i.to_string()),
            Param::Float(f) => out.push_str(&render_float(*f)),
            Param::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Param::Str(s) => {
                if is_bare_safe(s) {
                    out.push_str(s);
                } else {
                    out.push_str(&serde_json::to_string(s).expect("string serialization"));
                }
            }
        }
    }
}

impl From<i64> for Param {
    fn from(v: i64) -> Self {
        Param::Int(v)
    }
}
impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Float(v)
    }
}
impl From<bool> for Param {
    fn from(v: bool) -> Self {
        Param::Bool(v)
    }
}
impl From<&str> for Param {
    fn from(v: &str) -> Self {
        Param::Str(v.to_string())
    }
}
impl From<String> for Param {
    fn from(v: String) -> Self {
        Param::Str(v)
    }
}

fn render_float(f: f64) -> String {
    if f.is_nan() {
        return "nan".into();
    }
    if f.is_infinite() {
        return if f > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{f:?}");
    if s.contains(['.', 'e', 'E']) {
        s
    } else {
        format!("{s}.0")
    }
}

fn is_bare_safe(s: &str) -> bool {
    !s.is_empty()
        && s
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '%' | '-' | '+' | '/'))
        && parse_scalar(s).is_none()
}

fn parse_scalar(s: &str) -> Option<Param> {
    match s {
        "true" => return Some(Param::Bool(true)),
        "false" => return Some(Param::Bool(false)),
        _ => {}
    }
    if let Ok(i) = s.parse::<i64>() {
        return Some(Param::Int(i));
    }
    if let Ok(f) = s.parse::<f64>() {
        return Some(Param::Float(f));
    }
    None
}

#[derive(Debug, Clone)]
pub struct Identifier {
    name: String,
    params: Vec<(String, Param)>,
}

impl Identifier {
    pub fn new(name: impl Into<String>) -> Self {
        Identifier {
            name: name.into(),
            params: Vec::new(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Into<Param>) -> Self {
        self.params.push((key.into(), value.into()));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[(String, Param)] {
        &self.params
    }

    pub fn get(&self, key: &str) -> Option<&Param> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn canonical(&self) -> String {
        let mut out = self.name.clone();
        if self.params.is_empty() {
            return out;
        }
        out.push('(');
        for (i, (k, v)) in self.params.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(k);
            out.push('=');
            v.render(&mut out);
        }
        out.push(')');
        out
    }

    pub fn parse(input: &str) -> Result<Self> {
        Parser::new(input).parse()
    }
}

impl PartialEq for Identifier {
    fn eq(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }
}

impl Eq for Identifier {}

impl std::hash::Hash for Identifier {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.canonical().hash(state)
    }
}

impl fmt::Display for Identifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl FromStr for Identifier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Identifier::parse(s)
    }
}

impl Serialize for Identifier {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.canonical())
    }
}

impl<'de> Deserialize<'de> for Identifier {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Identifier::parse(&s).map_err(serde::de::Error::custom)
    }
}

struct Parser<'a> {
    input: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(input: &'a str) -> Self {
        Parser { input, pos: 0 }
    }

    fn err(&self, reason: impl Into<String>) -> Error {
        Error::InvalidIdentifier {
            input: self.input.to_string(),
            reason: reason.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.input[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.input.len() - trimmed.len();
    }

    fn eat(&mut self, c: char) -> bool {
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn parse(mut self) -> Result<Identifier> {
        let end = self.rest().find('(').unwrap_or(self.input.len());
        let name = self.input[..end].trim();
        if name.is_empty() || name.contains([')', ',', '=', '"']) {
            return Err(self.err("missing or malformed name"));
        }
        let mut id = Identifier::new(name);
        self.pos = end;
        if !self.eat('(') {
            return Ok(id);
        }
        self.skip_ws();
        if self.eat(')') {
            return self.finish(id);
        }
        loop {
            self.skip_ws();
            let eq = self
                .rest()
                .find('=')
                .ok_or_else(|| self.err("expected `key=value`"))?;
            let key = self.rest()[..eq].trim().to_string();
            if key.is_empty() || key.contains([',', '(', ')', '"']) {
                return Err(self.err("malformed parameter key"));
            }
            self.pos += eq + 1;
            self.skip_ws();
            let value = self.value()?;
            id.params.push((key, value));
            self.skip_ws();
            if self.eat(',') {
                continue;
            }
            if self.eat(')') {
                return self.finish(id);
            }
            return Err(self.err("expected `,` or `)`"));
        }
    }

    fn finish(&mut self, id: Identifier) -> Result<Identifier> {
        if !self.rest().trim().is_empty() {
            return Err(self.err("trailing input after `)`"));
        }
        Ok(id)
    }

    fn value(&mut self) -> Result<Param> {
        if self.rest().starts_with('"') {
            let mut de = serde_json::Deserializer::from_str(self.rest()).into_iter::<String>();
            let s = match de.next() {
                Some(Ok(s)) => s,
                _ => return Err(self.err("unterminated string literal")),
            };
            self.pos += de.byte_offset();
            return Ok(Param::Str(s));
        }
        let end = self
            .rest()
            .find([',', ')'])
            .ok_or_else(|| self.err("unterminated parameter list"))?;
        let raw = self.rest()[..end].trim();
        if raw.is_empty() {
            return Err(self.err("empty parameter value"));
        }
        self.pos += end;
        Ok(parse_scalar(raw).unwrap_or_else(|| Param::Str(raw.to_string())))
    }
}
