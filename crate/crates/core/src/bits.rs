use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::Error;

/// A finite string over the binary alphabet, written as ASCII `0`/`1`.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn from_bits(bits: impl Into<Vec<bool>>) -> Self {
        Self(bits.into())
    }

    /// All strings of exactly `len` bits, in lexicographic order.
    pub fn all_of_len(len: usize) -> impl Iterator<Item = BitString> {
        assert!(len < 64, "enumeration length too large");
        (0u64..(1u64 << len)).map(move |code| {
            BitString((0..len).rev().map(|i| code >> i & 1 == 1).collect())
        })
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut bits = self.0.clone();
        bits.extend_from_slice(&other.0);
        BitString(bits)
    }

    pub fn with(&self, bit: bool) -> BitString {
        let mut bits = self.0.clone();
        bits.push(bit);
        BitString(bits)
    }

    pub fn is_prefix_of(&self, other: &[bool]) -> bool {
        other.len() >= self.0.len() && other[..self.0.len()] == self.0[..]
    }

    pub fn inverted(&self) -> BitString {
        BitString(self.0.iter().map(|b| !b).collect())
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.0
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Parse(format!("expected only 0/1, found `{c}` in `{s}`"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Renders a raw bit slice the same way [`BitString`] does.
pub fn render(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_ascii() {
        let s: BitString = "0110".parse().unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.to_string(), "0110");
        assert!("01a".parse::<BitString>().is_err());
        assert_eq!("".parse::<BitString>().unwrap(), BitString::new());
    }

    #[test]
    fn enumerates_in_lexicographic_order() {
        let all: Vec<String> = BitString::all_of_len(2).map(|b| b.to_string()).collect();
        assert_eq!(all, ["00", "01", "10", "11"]);
    }
}
