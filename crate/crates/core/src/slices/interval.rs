use std::fmt;

use crate::error::{Error, Result};

/// One end of an interval: an absolute score or a percentile of the
/// dataset's score distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum Bound {
    Abs(f64),
    /// `num / den` percent, kept exact.
    Pct { num: u64, den: u64 },
}

impl Bound {
    /// Parses `"12.5%"` or an absolute number (`inf` allowed).
    pub fn parse(s: &str) -> Result<Bound> {
        let s = s.trim();
        let bad = |reason: &str| Error::InvalidInterval {
            interval: s.to_string(),
            reason: reason.to_string(),
        };
        if let Some(p) = s.strip_suffix('%') {
            let (int, frac) = p.split_once('.').unwrap_or((p, ""));
            if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad("malformed percentile"));
            }
            if frac.len() > 9 || int.len() > 9 {
                return Err(bad("percentile has too many digits"));
            }
            let den = 10u64.pow(frac.len() as u32);
            let num: u64 = format!("{int}{frac}").parse().map_err(|_| bad("malformed percentile"))?;
            if num > 100 * den {
                return Err(bad("percentile above 100%"));
            }
            return Ok(Bound::Pct { num, den });
        }
        let v: f64 = match s {
            "inf" | "+inf" | "∞" => f64::INFINITY,
            "-inf" | "-∞" => f64::NEG_INFINITY,
            _ => s.parse().map_err(|_| bad("not a number or percentile"))?,
        };
        if v.is_nan() {
            return Err(bad("NaN bound"));
        }
        Ok(Bound::Abs(v))
    }

    pub fn pct(p: f64) -> Result<Bound> {
        Bound::parse(&format!("{p}%"))
    }

    /// Nearest-rank resolution against ascending `sorted` scores:
    /// rank `ceil(P * n / 100)`, with 0% mapping to the minimum.
    pub fn resolve(&self, sorted: &[f64]) -> f64 {
        match *self {
            Bound::Abs(v) => v,
            Bound::Pct { num, den } => {
                let n = sorted.len() as u128;
                let (num, den) = (num as u128, den as u128 * 100);
                let rank = (num * n).div_ceil(den).max(1);
                sorted[(rank - 1) as usize]
            }
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Bound::Abs(v) if v == f64::INFINITY => f.write_str("inf"),
            Bound::Abs(v) if v == f64::NEG_INFINITY => f.write_str("-inf"),
            Bound::Abs(v) => write!(f, "{v}"),
            Bound::Pct { num, den } => {
                let int = num / den;
                let frac = num % den;
                if den == 1 || frac == 0 {
                    write!(f, "{int}%")
                } else {
                    let width = den.ilog10() as usize;
                    let digits = format!("{frac:0width$}");
                    write!(f, "{int}.{}%", digits.trim_end_matches('0'))
                }
            }
        }
    }
}

/// Closed interval over scores. Intervals of one builder may overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub lo: Bound,
    pub hi: Bound,
}

impl Interval {
    pub fn new(lo: Bound, hi: Bound) -> Result<Interval> {
        let interval = Interval { lo, hi };
        let reject = |reason: &str| Error::InvalidInterval {
            interval: interval.to_string(),
            reason: reason.to_string(),
        };
        match (&interval.lo, &interval.hi) {
            (Bound::Abs(a), Bound::Abs(b)) if a > b => return Err(reject("lower bound exceeds upper bound")),
            (Bound::Pct { num: a, den: da }, Bound::Pct { num: b, den: db })
                if (*a as u128) * (*db as u128) > (*b as u128) * (*da as u128) =>
            {
                return Err(reject("lower percentile exceeds upper percentile"))
            }
            _ => {}
        }
        Ok(interval)
    }

    pub fn abs(lo: f64, hi: f64) -> Result<Interval> {
        Interval::new(Bound::Abs(lo), Bound::Abs(hi))
    }

    pub fn pct(lo: &str, hi: &str) -> Result<Interval> {
        Interval::new(Bound::parse(lo)?, Bound::parse(hi)?)
    }

    /// Ten decile intervals `[0%,10%] .. [90%,100%]`.
    pub fn deciles() -> Vec<Interval> {
        (0..10)
            .map(|i| Interval {
                lo: Bound::Pct { num: i * 10, den: 1 },
                hi: Bound::Pct { num: i * 10 + 10, den: 1 },
            })
            .collect()
    }

    /// Parses `[lo,hi]`; round brackets are accepted and mean the same.
    pub fn parse(s: &str) -> Result<Interval> {
        let t = s.trim();
        let inner = t
            .strip_prefix(['[', '('])
            .and_then(|r| r.strip_suffix([']', ')']))
            .ok_or_else(|| Error::InvalidInterval {
                interval: s.to_string(),
                reason: "expected `[lo,hi]`".into(),
            })?;
        let (lo, hi) = inner.split_once(',').ok_or_else(|| Error::InvalidInterval {
            interval: s.to_string(),
            reason: "expected two bounds".into(),
        })?;
        Interval::new(Bound::parse(lo)?, Bound::parse(hi)?)
    }

    /// Parses a `;`-separated list of intervals.
    pub fn parse_list(s: &str) -> Result<Vec<Interval>> {
        let list: Vec<Interval> = s
            .split(';')
            .filter(|p| !p.trim().is_empty())
            .map(Interval::parse)
            .collect::<Result<_>>()?;
        if list.is_empty() {
            return Err(Error::InvalidInterval {
                interval: s.to_string(),
                reason: "no intervals".into(),
            });
        }
        Ok(list)
    }

    pub fn format_list(list: &[Interval]) -> String {
        list.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
    }

    /// Absolute bounds against ascending `sorted` scores.
    pub fn resolve(&self, sorted: &[f64]) -> (f64, f64) {
        (self.lo.resolve(sorted), self.hi.resolve(sorted))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}
