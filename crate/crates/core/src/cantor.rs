//! Alphabets and the discrete Cantor sets they generate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::Limits;

/// A base `M >= 3` together with a non-empty set of digits in `0..M`.
///
/// Digits are kept sorted, so equality, hashing and ordering all follow the
/// set. The text form is `M:d0,d1,...`, e.g. `3:0,2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Alphabet {
    base: usize,
    digits: Vec<usize>,
    mask: Vec<bool>,
}

impl Alphabet {
    pub fn new(base: usize, digits: &[usize]) -> Result<Self> {
        if base < 3 {
            return Err(Error::BaseTooSmall(base));
        }
        if digits.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        let mut mask = vec![false; base];
        for &d in digits {
            if d >= base {
                return Err(Error::DigitOutOfRange { digit: d, base });
            }
            if mask[d] {
                return Err(Error::DuplicateDigit(d));
            }
            mask[d] = true;
        }
        let digits = (0..base).filter(|&d| mask[d]).collect();
        Ok(Self { base, digits, mask })
    }

    /// The alphabet `{0, .., M-1}`.
    pub fn full(base: usize) -> Result<Self> {
        Self::new(base, &(0..base).collect::<Vec<_>>())
    }

    pub fn singleton(base: usize, digit: usize) -> Result<Self> {
        Self::new(base, &[digit])
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn digits(&self) -> &[usize] {
        &self.digits
    }

    /// Number of digits `A`.
    pub fn card(&self) -> usize {
        self.digits.len()
    }

    pub fn contains_digit(&self, digit: usize) -> bool {
        digit < self.base && self.mask[digit]
    }

    /// Dimension `log A / log M` of the limiting Cantor set.
    pub fn dimension(&self) -> f64 {
        (self.card() as f64).ln() / (self.base as f64).ln()
    }

    pub fn is_trivial(&self) -> bool {
        self.card() == 1 || self.card() == self.base
    }
}

/// Convenience alias mirroring [`Alphabet::new`].
pub fn new_alphabet(base: usize, digits: &[usize]) -> Result<Alphabet> {
    Alphabet::new(base, digits)
}

pub fn dimension(alphabet: &Alphabet) -> f64 {
    alphabet.dimension()
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.base)?;
        for (i, d) in self.digits.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

fn parse_number(s: &str, offset: usize, what: &str) -> Result<usize> {
    let trimmed = s.trim();
    let lead = s.len() - s.trim_start().len();
    if trimmed.is_empty() {
        return Err(Error::Parse {
            pos: offset,
            msg: format!("expected {what}"),
        });
    }
    if let Some(bad) = trimmed.find(|c: char| !c.is_ascii_digit()) {
        return Err(Error::Parse {
            pos: offset + lead + bad,
            msg: format!("unexpected character in {what}"),
        });
    }
    trimmed.parse().map_err(|_| Error::Parse {
        pos: offset + lead,
        msg: format!("{what} does not fit in a machine integer"),
    })
}

impl FromStr for Alphabet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let colon = s.find(':').ok_or_else(|| Error::Parse {
            pos: s.len(),
            msg: "expected `M:d0,d1,...`".into(),
        })?;
        let base = parse_number(&s[..colon], 0, "base")?;
        let mut digits = Vec::new();
        let mut offset = colon + 1;
        for part in s[colon + 1..].split(',') {
            digits.push(parse_number(part, offset, "digit")?);
            offset += part.len() + 1;
        }
        Alphabet::new(base, &digits)
    }
}

impl Serialize for Alphabet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Alphabet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `M^k`, or `OrderTooLarge` if it overflows or exceeds `cap`.
pub fn checked_size(base: usize, k: u32, cap: u64) -> Result<u64> {
    (base as u64)
        .checked_pow(k)
        .filter(|&n| n <= cap)
        .ok_or(Error::OrderTooLarge { k, cap })
}

/// The discrete Cantor set `C_k(M, alphabet)` as a sorted index list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CantorSet {
    alphabet: Alphabet,
    order: u32,
    n: u64,
    indices: Vec<u64>,
}

impl CantorSet {
    pub fn new(alphabet: &Alphabet, k: u32) -> Result<Self> {
        Self::with_cap(alphabet, k, Limits::default().n_cap)
    }

    pub fn with_cap(alphabet: &Alphabet, k: u32, n_cap: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::OrderTooSmall { k, min: 1 });
        }
        let n = checked_size(alphabet.base(), k, n_cap)?;
        let m = alphabet.base() as u64;
        // Adding the next digit as the most significant one keeps the list sorted.
        let mut indices = vec![0u64];
        let mut scale = 1u64;
        for _ in 0..k {
            let mut next = Vec::with_capacity(indices.len() * alphabet.card());
            for &d in alphabet.digits() {
                let offset = d as u64 * scale;
                next.extend(indices.iter().map(|&x| x + offset));
            }
            indices = next;
            scale *= m;
        }
        Ok(Self {
            alphabet: alphabet.clone(),
            order: k,
            n,
            indices,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// The ambient size `N = M^k`.
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn indices(&self) -> &[u64] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Membership by digit expansion, `O(k)`.
    pub fn contains(&self, index: u64) -> Result<bool> {
        if index >= self.n {
            return Err(Error::IndexOutOfRange { index, n: self.n });
        }
        let m = self.alphabet.base() as u64;
        let mut rest = index;
        for _ in 0..self.order {
            if !self.alphabet.contains_digit((rest % m) as usize) {
                return Ok(false);
            }
            rest /= m;
        }
        Ok(true)
    }

    /// Dense 0/1 mask of length `N`.
    pub fn mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n as usize];
        for &i in &self.indices {
            mask[i as usize] = true;
        }
        mask
    }
}

pub fn build_cantor(alphabet: &Alphabet, k: u32) -> Result<CantorSet> {
    CantorSet::new(alphabet, k)
}

pub fn contains(set: &CantorSet, index: u64) -> Result<bool> {
    set.contains(index)
}
