//! Assignment of multiplier configurations to convolution kernel taps.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::booth::MultiplierConfig;
use crate::error::{Error, Result};

pub const TAPS: usize = 9;
pub const CONV1_KERNELS: usize = 10;
pub const CONV2_KERNELS: usize = 12;
/// 22 kernels of 3x3 taps.
pub const SLOT_COUNT: usize = (CONV1_KERNELS + CONV2_KERNELS) * TAPS;

/// Where a slot lives in the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotPosition {
    pub layer: usize,
    pub kernel: usize,
    pub tap: usize,
}

/// One multiplier configuration per (kernel, tap) slot; slots `0..90` belong
/// to the first convolution and `90..198` to the second.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AssignmentSequence {
    slots: Vec<MultiplierConfig>,
}

impl AssignmentSequence {
    pub fn new(slots: Vec<MultiplierConfig>) -> Result<Self> {
        if slots.len() != SLOT_COUNT {
            return Err(Error::Shape(format!("sequence has {} slots, expected {SLOT_COUNT}", slots.len())));
        }
        Ok(AssignmentSequence { slots })
    }

    pub fn uniform(cfg: MultiplierConfig) -> Self {
        AssignmentSequence { slots: vec![cfg; SLOT_COUNT] }
    }

    pub fn slots(&self) -> &[MultiplierConfig] {
        &self.slots
    }

    pub fn set(&mut self, slot: usize, cfg: MultiplierConfig) {
        self.slots[slot] = cfg;
    }

    pub fn conv1(&self) -> &[MultiplierConfig] {
        &self.slots[..CONV1_KERNELS * TAPS]
    }

    pub fn conv2(&self) -> &[MultiplierConfig] {
        &self.slots[CONV1_KERNELS * TAPS..]
    }

    pub fn position(slot: usize) -> SlotPosition {
        assert!(slot < SLOT_COUNT);
        let (layer, local) = if slot < CONV1_KERNELS * TAPS { (0, slot) } else { (1, slot - CONV1_KERNELS * TAPS) };
        SlotPosition { layer, kernel: local / TAPS, tap: local % TAPS }
    }

    /// Count of slots per configuration, in config order.
    pub fn multiset(&self) -> BTreeMap<MultiplierConfig, usize> {
        let mut m = BTreeMap::new();
        for &c in &self.slots {
            *m.entry(c).or_insert(0) += 1;
        }
        m
    }

    /// Order-free key: counts indexed by config id.
    pub fn composition(&self) -> [u16; MultiplierConfig::COUNT] {
        let mut counts = [0u16; MultiplierConfig::COUNT];
        for &c in &self.slots {
            counts[c.index()] += 1;
        }
        counts
    }

    /// Canonical representative of the composition: slots sorted by config.
    pub fn canonical(&self) -> Self {
        let mut slots = self.slots.clone();
        slots.sort();
        AssignmentSequence { slots }
    }

    pub fn is_permutation_of(&self, other: &Self) -> bool {
        self.composition() == other.composition()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("sequence serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            slots: Vec<MultiplierConfig>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        Self::new(raw.slots)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
