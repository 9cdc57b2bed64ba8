//! 4:2 compressor cells as 5-input / 3-output truth tables.
//!
//! Inputs are `(x1, x2, x3, x4, cin)`; outputs are `(sum, carry, cout)` with
//! `sum` at the cell's column weight and `carry`/`cout` one column up. A cell
//! is exact when `sum + 2 * (carry + cout) == x1 + x2 + x3 + x4 + cin`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Direction of a cell's mean arithmetic error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Exact,
    Positive,
    Negative,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Exact => "exact",
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        })
    }
}

impl FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(Polarity::Exact),
            "positive" | "pc" | "+" => Ok(Polarity::Positive),
            "negative" | "nc" | "-" => Ok(Polarity::Negative),
            other => Err(Error::Parse(format!("unknown polarity `{other}`"))),
        }
    }
}

/// Measured error direction; `Unbiased` means errors exist but cancel on average.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Exact,
    Positive,
    Negative,
    Unbiased,
}

impl Direction {
    pub fn matches(self, polarity: Polarity) -> bool {
        matches!(
            (self, polarity),
            (Direction::Exact, Polarity::Exact)
                | (Direction::Positive, Polarity::Positive)
                | (Direction::Negative, Polarity::Negative)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorProfile {
    pub error_rate: f64,
    pub mean_signed_error: f64,
    pub max_abs_error: u32,
    pub direction: Direction,
}

/// Packs `(x1, x2, x3, x4, cin)` into a table index; `x1` is the MSB so the
/// index reads like the bit string in table files.
#[inline]
pub fn input_index(x1: u8, x2: u8, x3: u8, x4: u8, cin: u8) -> usize {
    ((x1 as usize) << 4) | ((x2 as usize) << 3) | ((x3 as usize) << 2) | ((x4 as usize) << 1) | cin as usize
}

#[inline]
fn input_bits(index: usize) -> [u8; 5] {
    [4, 3, 2, 1, 0].map(|s| ((index >> s) & 1) as u8)
}

/// Packed output: bit 0 sum, bit 1 carry, bit 2 cout.
#[inline]
fn pack(sum: u8, carry: u8, cout: u8) -> u8 {
    sum | carry << 1 | cout << 2
}

#[inline]
fn unpack(out: u8) -> (u8, u8, u8) {
    (out & 1, (out >> 1) & 1, (out >> 2) & 1)
}

#[inline]
fn output_value(out: u8) -> u32 {
    let (s, c, o) = unpack(out);
    s as u32 + 2 * (c as u32 + o as u32)
}

fn maj(a: u8, b: u8, c: u8) -> u8 {
    (a & b) | (a & c) | (b & c)
}

/// The standard exact cell built from two chained full adders.
pub fn exact_compress(x1: u8, x2: u8, x3: u8, x4: u8, cin: u8) -> (u8, u8, u8) {
    let cout = maj(x1, x2, x3);
    let s1 = x1 ^ x2 ^ x3;
    (s1 ^ x4 ^ cin, maj(s1, x4, cin), cout)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressorTable {
    name: String,
    polarity: Polarity,
    entries: [u8; 32],
}

impl CompressorTable {
    /// Builds a table, rejecting it when its measured error direction
    /// disagrees with the declared polarity.
    pub fn new(name: impl Into<String>, polarity: Polarity, entries: [u8; 32]) -> Result<Self> {
        let name = name.into();
        if let Some(i) = entries.iter().position(|&e| e > 0b111) {
            return Err(Error::InvalidTable(format!("{name}: entry {i} has output {:#b}", entries[i])));
        }
        let table = CompressorTable { name, polarity, entries };
        let profile = table.error_profile();
        if !profile.direction.matches(polarity) {
            return Err(Error::InvalidTable(format!(
                "{}: declared {polarity} but measured {:?} (mean error {})",
                table.name, profile.direction, profile.mean_signed_error
            )));
        }
        Ok(table)
    }

    fn from_fn(name: &str, polarity: Polarity, f: impl Fn([u8; 5]) -> (u8, u8, u8)) -> Result<Self> {
        let mut entries = [0u8; 32];
        for (i, e) in entries.iter_mut().enumerate() {
            let (s, c, o) = f(input_bits(i));
            *e = pack(s, c, o);
        }
        Self::new(name, polarity, entries)
    }

    pub fn exact() -> Self {
        Self::from_fn("exact", Polarity::Exact, |[a, b, c, d, e]| exact_compress(a, b, c, d, e))
            .expect("exact cell is exact")
    }

    /// Default positive cell: the second-stage sum XOR is replaced by an OR,
    /// over-reporting by one whenever exactly two of its inputs are set.
    pub fn default_positive() -> Self {
        Self::from_fn("pc_sum_or", Polarity::Positive, |[a, b, c, d, e]| {
            let (_, carry, cout) = exact_compress(a, b, c, d, e);
            let s1 = a ^ b ^ c;
            (s1 | d | e, carry, cout)
        })
        .expect("default PC is positive")
    }

    /// Default negative cell: the second-stage sum XOR is replaced by an AND,
    /// under-reporting by one whenever exactly one of its inputs is set.
    pub fn default_negative() -> Self {
        Self::from_fn("nc_sum_and", Polarity::Negative, |[a, b, c, d, e]| {
            let (_, carry, cout) = exact_compress(a, b, c, d, e);
            let s1 = a ^ b ^ c;
            (s1 & d & e, carry, cout)
        })
        .expect("default NC is negative")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    /// Packed outputs indexed by [`input_index`].
    pub fn entries(&self) -> &[u8; 32] {
        &self.entries
    }

    #[inline]
    pub fn lookup(&self, index: usize) -> u8 {
        self.entries[index & 31]
    }

    pub fn compress(&self, x1: u8, x2: u8, x3: u8, x4: u8, cin: u8) -> (u8, u8, u8) {
        unpack(self.lookup(input_index(x1, x2, x3, x4, cin)))
    }

    /// Signed arithmetic error of one entry.
    pub fn entry_error(&self, index: usize) -> i32 {
        let exact = input_bits(index).iter().map(|&b| b as i32).sum::<i32>();
        output_value(self.entries[index]) as i32 - exact
    }

    pub fn error_profile(&self) -> ErrorProfile {
        let errors: Vec<i32> = (0..32).map(|i| self.entry_error(i)).collect();
        let wrong = errors.iter().filter(|&&e| e != 0).count();
        let total: i32 = errors.iter().sum();
        let direction = match (wrong, total.signum()) {
            (0, _) => Direction::Exact,
            (_, 1) => Direction::Positive,
            (_, -1) => Direction::Negative,
            _ => Direction::Unbiased,
        };
        ErrorProfile {
            error_rate: wrong as f64 / 32.0,
            mean_signed_error: total as f64 / 32.0,
            max_abs_error: errors.iter().map(|e| e.unsigned_abs()).max().unwrap_or(0),
            direction,
        }
    }

    /// Parses the text table format: a `polarity:` header, an optional
    /// `name:` header, then 32 lines `x1x2x3x4cin -> sum carry cout`.
    /// `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut name = None;
        let mut polarity = None;
        let mut entries = [None::<u8>; 32];
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| Error::Parse(format!("line {}: {msg}: `{raw}`", lineno + 1));
            if let Some(rest) = line.strip_prefix("polarity:") {
                polarity = Some(rest.parse::<Polarity>()?);
            } else if let Some(rest) = line.strip_prefix("name:") {
                name = Some(rest.trim().to_string());
            } else {
                let (lhs, rhs) = line.split_once("->").ok_or_else(|| err("expected `->`"))?;
                let lhs = lhs.trim();
                if lhs.len() != 5 || !lhs.bytes().all(|c| c == b'0' || c == b'1') {
                    return Err(err("input must be 5 bits"));
                }
                let index = usize::from_str_radix(lhs, 2).map_err(|_| err("bad input bits"))?;
                let outs: Vec<u8> = rhs
                    .split_whitespace()
                    .map(|t| match t {
                        "0" => Ok(0),
                        "1" => Ok(1),
                        _ => Err(err("output bits must be 0 or 1")),
                    })
                    .collect::<Result<_>>()?;
                if outs.len() != 3 {
                    return Err(err("expected three output bits"));
                }
                if entries[index].replace(pack(outs[0], outs[1], outs[2])).is_some() {
                    return Err(err("duplicate input pattern"));
                }
            }
        }
        let polarity = polarity.ok_or_else(|| Error::Parse("missing `polarity:` header".into()))?;
        let mut full = [0u8; 32];
        for (i, e) in entries.iter().enumerate() {
            full[i] = e.ok_or_else(|| Error::InvalidTable(format!("missing entry {i:05b}")))?;
        }
        Self::new(name.unwrap_or_else(|| "custom".into()), polarity, full)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("name: {}\npolarity: {}\n", self.name, self.polarity);
        for (i, &e) in self.entries.iter().enumerate() {
            let (s, c, o) = unpack(e);
            out.push_str(&format!("{i:05b} -> {s} {c} {o}\n"));
        }
        out
    }
}

/// The pair of approximate cells the interleaving schemes draw from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressorSet {
    pub positive: CompressorTable,
    pub negative: CompressorTable,
}

impl CompressorSet {
    pub fn new(positive: CompressorTable, negative: CompressorTable) -> Result<Self> {
        if positive.polarity() != Polarity::Positive || negative.polarity() != Polarity::Negative {
            return Err(Error::InvalidTable(format!(
                "compressor set needs a positive and a negative cell, got {} and {}",
                positive.polarity(),
                negative.polarity()
            )));
        }
        Ok(CompressorSet { positive, negative })
    }
}

impl Default for CompressorSet {
    fn default() -> Self {
        CompressorSet {
            positive: CompressorTable::default_positive(),
            negative: CompressorTable::default_negative(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_cell_contract() {
        for i in 0..32 {
            let [a, b, c, d, e] = input_bits(i);
            let (s, cy, co) = exact_compress(a, b, c, d, e);
            assert_eq!(s as u32 + 2 * (cy as u32 + co as u32), (a + b + c + d + e) as u32);
            // cout never depends on cin
            assert_eq!(co, exact_compress(a, b, c, d, 1 - e).2);
        }
        assert_eq!(exact_compress(0, 0, 0, 0, 0), (0, 0, 0));
        assert_eq!(exact_compress(1, 1, 1, 1, 1), (1, 1, 1));
        let (s, cy, co) = exact_compress(1, 1, 0, 0, 0);
        assert_eq!((s, cy + co), (0, 1));
    }

    #[test]
    fn exact_profile_is_zero() {
        let p = CompressorTable::exact().error_profile();
        assert_eq!((p.error_rate, p.mean_signed_error, p.direction), (0.0, 0.0, Direction::Exact));
    }

    #[test]
    fn default_profiles() {
        // 12 of 32 entries have exactly two (PC) or exactly one (NC) of
        // (x1^x2^x3, x4, cin) set.
        let pc = CompressorTable::default_positive().error_profile();
        assert_eq!((pc.error_rate, pc.mean_signed_error, pc.max_abs_error), (0.375, 0.375, 1));
        assert_eq!(pc.direction, Direction::Positive);
        let nc = CompressorTable::default_negative().error_profile();
        assert_eq!((nc.error_rate, nc.mean_signed_error, nc.max_abs_error), (0.375, -0.375, 1));
        assert_eq!(nc.direction, Direction::Negative);
    }

    #[test]
    fn default_cells_single_patterns() {
        let pc = CompressorTable::default_positive();
        let nc = CompressorTable::default_negative();
        assert_eq!(pc.compress(0, 0, 0, 0, 0), (0, 0, 0));
        assert_eq!(nc.compress(0, 0, 0, 0, 0), (0, 0, 0));
        // x4 and cin set: exact sum bit 0, PC reports 1.
        assert_eq!(pc.entry_error(input_index(0, 0, 0, 1, 1)), 1);
        // lone x1: NC drops it.
        assert_eq!(nc.entry_error(input_index(1, 0, 0, 0, 0)), -1);
        for i in 0..32 {
            assert!(pc.entry_error(i) >= 0);
            assert!(nc.entry_error(i) <= 0);
        }
    }

    #[test]
    fn text_roundtrip() {
        for t in [CompressorTable::exact(), CompressorTable::default_positive(), CompressorTable::default_negative()] {
            assert_eq!(CompressorTable::parse(&t.to_text()).unwrap(), t);
        }
    }

    #[test]
    fn parse_rejects_bad_tables() {
        let good = CompressorTable::default_positive().to_text();
        let missing: String = good.lines().filter(|l| !l.starts_with("11111")).map(|l| format!("{l}\n")).collect();
        assert!(matches!(CompressorTable::parse(&missing), Err(Error::InvalidTable(_))));
        let mislabeled = good.replace("polarity: positive", "polarity: negative");
        assert!(matches!(CompressorTable::parse(&mislabeled), Err(Error::InvalidTable(_))));
        let no_header = good.replace("polarity: positive\n", "");
        assert!(matches!(CompressorTable::parse(&no_header), Err(Error::Parse(_))));
        let bad_bits = good.replace("00000 -> 0 0 0", "00000 -> 0 2 0");
        assert!(CompressorTable::parse(&bad_bits).is_err());
    }

    #[test]
    fn set_requires_both_polarities() {
        let pc = CompressorTable::default_positive();
        assert!(CompressorSet::new(pc.clone(), pc).is_err());
    }
}
