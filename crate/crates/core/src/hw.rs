//! Synthesized hardware cost of each multiplier and its aggregation over an
//! assignment sequence.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::booth::MultiplierConfig;
use crate::error::{Error, Result};
use crate::sequence::AssignmentSequence;

const BUILTIN_CSV: &str = include_str!("../data/hw_costs.csv");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardwareCost {
    /// um^2
    pub area: f64,
    /// uW
    pub power: f64,
    /// ps
    pub delay: f64,
    /// pJ
    pub pdp: f64,
}

/// How area is charged for a sequence mixing several multiplier types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AreaRule {
    /// Each distinct multiplier type is instantiated once and reused.
    #[default]
    DistinctTypes,
    /// Every slot pays for its own multiplier.
    PerSlot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateCost {
    pub total_pdp: f64,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    rows: [HardwareCost; MultiplierConfig::COUNT],
}

impl CostTable {
    pub fn builtin() -> Self {
        Self::parse_csv(BUILTIN_CSV).expect("built-in cost table parses")
    }

    /// Parses `config,area_um2,power_uw,delay_ps,pdp_pj` rows; every
    /// configuration must appear exactly once.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut rows: [Option<HardwareCost>; MultiplierConfig::COUNT] = [None; MultiplierConfig::COUNT];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("config") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(Error::Parse(format!("cost table line {}: expected 5 fields", lineno + 1)));
            }
            let cfg: MultiplierConfig = fields[0].parse()?;
            let num = |i: usize| -> Result<f64> {
                let v: f64 = fields[i]
                    .parse()
                    .map_err(|_| Error::Parse(format!("cost table line {}: bad number `{}`", lineno + 1, fields[i])))?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Parse(format!("cost table line {}: values must be positive", lineno + 1)));
                }
                Ok(v)
            };
            let cost = HardwareCost { area: num(1)?, power: num(2)?, delay: num(3)?, pdp: num(4)? };
            if rows[cfg.index()].replace(cost).is_some() {
                return Err(Error::Parse(format!("cost table: duplicate row for {cfg}")));
            }
        }
        let mut out = [HardwareCost { area: 0.0, power: 0.0, delay: 0.0, pdp: 0.0 }; MultiplierConfig::COUNT];
        for (cfg, row) in MultiplierConfig::ALL.iter().zip(rows) {
            out[cfg.index()] = row.ok_or_else(|| Error::Parse(format!("cost table: missing row for {cfg}")))?;
        }
        Ok(CostTable { rows: out })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_csv(&std::fs::read_to_string(path)?)
    }

    pub fn cost_of(&self, cfg: MultiplierConfig) -> HardwareCost {
        self.rows[cfg.index()]
    }

    /// Percentage PDP saving of an approximate multiplier over the exact one.
    pub fn pdp_benefit(&self, cfg: MultiplierConfig) -> Result<f64> {
        if cfg.is_exact() {
            return Err(Error::InvalidArgument("PDP benefit is defined for approximate configs".into()));
        }
        Ok(100.0 * (1.0 - self.cost_of(cfg).pdp / self.cost_of(MultiplierConfig::Exact).pdp))
    }

    /// Total PDP over all slots plus the area charged under `rule`.
    pub fn aggregate_cost(&self, seq: &AssignmentSequence, rule: AreaRule) -> AggregateCost {
        self.aggregate_composition(&seq.composition(), rule)
    }

    /// Same as [`CostTable::aggregate_cost`] from per-config slot counts.
    pub fn aggregate_composition(&self, counts: &[u16; MultiplierConfig::COUNT], rule: AreaRule) -> AggregateCost {
        let mut total_pdp = 0.0;
        let mut area = 0.0;
        for cfg in MultiplierConfig::ALL {
            let n = counts[cfg.index()];
            if n == 0 {
                continue;
            }
            let c = self.cost_of(cfg);
            total_pdp += n as f64 * c.pdp;
            area += match rule {
                AreaRule::DistinctTypes => c.area,
                AreaRule::PerSlot => n as f64 * c.area,
            };
        }
        AggregateCost { total_pdp, area }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("config,area_um2,power_uw,delay_ps,pdp_pj,pdp_benefit_pct\n");
        for cfg in MultiplierConfig::ALL {
            let c = self.cost_of(cfg);
            let benefit = self.pdp_benefit(cfg).map(|b| format!("{b:.2}")).unwrap_or_default();
            out.push_str(&format!("{cfg},{:.2},{:.3},{},{:.3},{benefit}\n", c.area, c.power, c.delay, c.pdp));
        }
        out
    }
}

impl Default for CostTable {
    fn default() -> Self {
        Self::builtin()
    }
}
