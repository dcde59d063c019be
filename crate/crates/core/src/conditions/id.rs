use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// One of the thirty-three characterizations, numbered `i` to `xxxiii`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConditionId(u8);

const TABLE: [(&str, &str); 33] = [
    ("i", "geometric-erg"),
    ("ii", "weak-geometric-erg"),
    ("iii", "gefslp"),
    ("iv", "gefalp"),
    ("v", "ssge"),
    ("vi", "tau-c"),
    ("vii", "dc-nomom"),
    ("viii", "dc-allj"),
    ("ix", "vuex-nomom"),
    ("x", "vuex-allj"),
    ("xi", "vuemu-nomom"),
    ("xii", "vuemu-allj"),
    ("xiii", "sg-inf-somej"),
    ("xiv", "sg-inf-allj"),
    ("xv", "srlinf-p-pi-somej"),
    ("xvi", "srlinf-p-pi-allj"),
    ("xvii", "srlinf-p-0-somej"),
    ("xviii", "srlinf-p-0-allj"),
    ("xix", "nlinf-p-pi-somej"),
    ("xx", "nlinf-p-pi-allj"),
    ("xxi", "voinf-somej"),
    ("xxii", "voinf-allj"),
    ("xxiii", "vinf-somej"),
    ("xxiv", "vinf-allj"),
    ("xxv", "vinf0-somej"),
    ("xxvi", "vinf0-allj"),
    ("xxvii", "l2ge-Cmu"),
    ("xxviii", "l2ge-noC"),
    ("xxix", "sg-l2"),
    ("xxx", "srl2-p-pi"),
    ("xxxi", "nl2-p-pi"),
    ("xxxii", "nl2-p-0"),
    ("xxxiii", "srl2-p-0"),
];

impl ConditionId {
    pub const COUNT: u8 = 33;

    /// Condition by number, `1..=33`.
    pub const fn new(number: u8) -> Option<Self> {
        if number >= 1 && number <= Self::COUNT {
            Some(Self(number))
        } else {
            None
        }
    }

    /// Condition by number; panics outside `1..=33`.
    pub const fn n(number: u8) -> Self {
        match Self::new(number) {
            Some(id) => id,
            None => panic!("condition number out of range"),
        }
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (1..=Self::COUNT).map(Self)
    }

    pub fn number(self) -> u8 {
        self.0
    }

    /// Lower-case roman numeral.
    pub fn roman(self) -> &'static str {
        TABLE[self.0 as usize - 1].0
    }

    /// Short mnemonic name.
    pub fn label(self) -> &'static str {
        TABLE[self.0 as usize - 1].1
    }

    /// Whether the condition is only meaningful for reversible chains.
    pub fn requires_reversible(self) -> bool {
        self.0 >= 27
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.roman())
    }
}

impl FromStr for ConditionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        TABLE
            .iter()
            .position(|(roman, label)| *roman == key || label.eq_ignore_ascii_case(&key))
            .map(|i| Self(i as u8 + 1))
            .ok_or_else(|| Error::BadParameters(format!("unknown condition `{s}`")))
    }
}

impl Serialize for ConditionId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.roman())
    }
}

impl<'de> Deserialize<'de> for ConditionId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbering_round_trips() {
        for id in ConditionId::all() {
            assert_eq!(id.roman().parse::<ConditionId>().unwrap(), id);
            assert_eq!(id.label().parse::<ConditionId>().unwrap(), id);
        }
        assert_eq!(ConditionId::n(19).roman(), "xix");
        assert_eq!(ConditionId::n(33).label(), "srl2-p-0");
        assert!("xxxiv".parse::<ConditionId>().is_err());
    }

    #[test]
    fn reversible_block_is_the_last_seven() {
        let count = ConditionId::all().filter(|c| c.requires_reversible()).count();
        assert_eq!(count, 7);
        assert!(!ConditionId::n(26).requires_reversible());
        assert!(ConditionId::n(27).requires_reversible());
    }
}
