use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which approximate cell leads the interleaving pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Lead {
    /// Positive multiplier: parity-0 positions get the positive cell.
    Pm,
    /// Negative multiplier: parity-0 positions get the negative cell.
    Nm,
}

/// Placement of positive and negative cells across the reduction tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    /// One cell type everywhere.
    Ni,
    /// Alternates stage by stage.
    Si,
    /// Alternates column by column.
    Ci,
    /// Stage and column alternation combined.
    Csi,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Ni, Scheme::Si, Scheme::Ci, Scheme::Csi];
}

/// One of the nine multiplier variants. The discriminant order is stable and
/// matches the hardware table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MultiplierConfig {
    Exact,
    Approx { lead: Lead, scheme: Scheme },
}

impl MultiplierConfig {
    pub const COUNT: usize = 9;

    pub const ALL: [MultiplierConfig; 9] = [
        MultiplierConfig::Exact,
        MultiplierConfig::Approx { lead: Lead::Pm, scheme: Scheme::Ni },
        MultiplierConfig::Approx { lead: Lead::Pm, scheme: Scheme::Si },
        MultiplierConfig::Approx { lead: Lead::Pm, scheme: Scheme::Ci },
        MultiplierConfig::Approx { lead: Lead::Pm, scheme: Scheme::Csi },
        MultiplierConfig::Approx { lead: Lead::Nm, scheme: Scheme::Ni },
        MultiplierConfig::Approx { lead: Lead::Nm, scheme: Scheme::Si },
        MultiplierConfig::Approx { lead: Lead::Nm, scheme: Scheme::Ci },
        MultiplierConfig::Approx { lead: Lead::Nm, scheme: Scheme::Csi },
    ];

    pub const PMNI: Self = Self::ALL[1];
    pub const PMSI: Self = Self::ALL[2];
    pub const PMCI: Self = Self::ALL[3];
    pub const PMCSI: Self = Self::ALL[4];
    pub const NMNI: Self = Self::ALL[5];
    pub const NMSI: Self = Self::ALL[6];
    pub const NMCI: Self = Self::ALL[7];
    pub const NMCSI: Self = Self::ALL[8];

    /// Approximate variants ordered by uniform-deployment CNN accuracy,
    /// best first.
    pub const ACCURACY_RANKING: [MultiplierConfig; 8] = [
        Self::PMCSI,
        Self::NMSI,
        Self::NMCSI,
        Self::NMNI,
        Self::PMSI,
        Self::PMCI,
        Self::PMNI,
        Self::NMCI,
    ];

    pub fn approximate() -> impl Iterator<Item = MultiplierConfig> {
        Self::ALL.into_iter().skip(1)
    }

    pub fn index(self) -> usize {
        match self {
            MultiplierConfig::Exact => 0,
            MultiplierConfig::Approx { lead, scheme } => {
                let l = match lead {
                    Lead::Pm => 0,
                    Lead::Nm => 4,
                };
                let s = match scheme {
                    Scheme::Ni => 0,
                    Scheme::Si => 1,
                    Scheme::Ci => 2,
                    Scheme::Csi => 3,
                };
                1 + l + s
            }
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn id(self) -> &'static str {
        ["exact", "pmni", "pmsi", "pmci", "pmcsi", "nmni", "nmsi", "nmci", "nmcsi"][self.index()]
    }

    pub fn is_exact(self) -> bool {
        self == MultiplierConfig::Exact
    }
}

impl fmt::Display for MultiplierConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for MultiplierConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        let key = key.strip_prefix("fp32_").unwrap_or(&key);
        Self::ALL
            .into_iter()
            .find(|c| c.id() == key)
            .ok_or_else(|| Error::UnknownConfig(s.to_string()))
    }
}

impl Serialize for MultiplierConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for MultiplierConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_stable_and_distinct() {
        for (i, c) in MultiplierConfig::ALL.into_iter().enumerate() {
            assert_eq!(c.index(), i);
            assert_eq!(MultiplierConfig::from_index(i), Some(c));
            assert_eq!(c.id().parse::<MultiplierConfig>().unwrap(), c);
        }
        assert_eq!("FP32_PMCSI".parse::<MultiplierConfig>().unwrap(), MultiplierConfig::PMCSI);
        assert!("pmxx".parse::<MultiplierConfig>().is_err());
        assert_eq!(MultiplierConfig::approximate().count(), 8);
    }

    #[test]
    fn ranking_covers_every_approximate_config() {
        let mut r = MultiplierConfig::ACCURACY_RANKING.to_vec();
        r.sort();
        assert_eq!(r, MultiplierConfig::approximate().collect::<Vec<_>>());
    }

    #[test]
    fn serde_uses_ids() {
        let json = serde_json::to_string(&MultiplierConfig::NMSI).unwrap();
        assert_eq!(json, "\"nmsi\"");
        assert_eq!(serde_json::from_str::<MultiplierConfig>(&json).unwrap(), MultiplierConfig::NMSI);
    }
}
