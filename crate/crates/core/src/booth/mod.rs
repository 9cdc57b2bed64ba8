//! Radix-8 modified Booth significand multiplier with approximate 4:2
//! reduction.
//!
//! A [`ReductionTree`] fixes the wiring for a geometry; a [`Multiplier`]
//! binds that wiring to a [`MultiplierConfig`] and a [`CompressorSet`], and
//! a [`MultiplierBank`] holds all nine variants over one shared tree.

mod bitslice;

use bitslice::LaneScratch;
mod config;
mod ppm;
mod tree;

use std::sync::{Arc, OnceLock};

pub use bitslice::transpose64;
pub use config::{Lead, MultiplierConfig, Scheme};
pub use ppm::{radix8_digits, radix8_encode, BoothGeometry, DigitSelect, DotSource, PartialProductMatrix, PpmLayout};
pub use tree::{cell_kind, Cell, CellKind, ReductionTree, GROUND};

use crate::compressor::{CompressorSet, CompressorTable};
use crate::fp32::{self, Fp32Word, MantissaMultiplier, Screened, Significand24};

/// A reduction tree bound to one configuration's cell placement.
#[derive(Debug, Clone)]
pub struct Multiplier {
    config: MultiplierConfig,
    tree: Arc<ReductionTree>,
    /// Index into `tables`/`anf` per cell: 0 exact, 1 positive, 2 negative.
    kinds: Vec<u8>,
    tables: [[u8; 32]; 3],
    programs: [bitslice::CellProgram; 3],
}

fn kind_index(k: CellKind) -> u8 {
    match k {
        CellKind::Exact => 0,
        CellKind::Positive => 1,
        CellKind::Negative => 2,
    }
}

impl Multiplier {
    pub fn new(tree: Arc<ReductionTree>, config: MultiplierConfig, cells: &CompressorSet) -> Self {
        let kinds = tree.placement(config).into_iter().map(kind_index).collect();
        let tables = [*CompressorTable::exact().entries(), *cells.positive.entries(), *cells.negative.entries()];
        let programs = tables.map(|t| bitslice::CellProgram::new(&t));
        Multiplier { config, tree, kinds, tables, programs }
    }

    pub fn config(&self) -> MultiplierConfig {
        self.config
    }

    pub fn tree(&self) -> &ReductionTree {
        &self.tree
    }

    pub fn geometry(&self) -> BoothGeometry {
        self.tree.geometry()
    }

    pub(crate) fn kinds(&self) -> &[u8] {
        &self.kinds
    }

    pub(crate) fn programs(&self) -> &[bitslice::CellProgram; 3] {
        &self.programs
    }

    pub fn placement(&self) -> Vec<CellKind> {
        self.tree.placement(self.config)
    }

    /// Runs the staged compression on a matrix and returns the two final rows.
    pub fn reduce(&self, ppm: &PartialProductMatrix<'_>) -> (u64, u64) {
        let mut wires = vec![0u8; self.tree.wire_count()];
        wires[1..=ppm.bits().len()].copy_from_slice(ppm.bits());
        self.reduce_wires(&mut wires)
    }

    fn reduce_wires(&self, wires: &mut [u8]) -> (u64, u64) {
        for (cell, &kind) in self.tree.cells().iter().zip(&self.kinds) {
            let [x1, x2, x3, x4, cin] = cell.inputs.map(|w| wires[w as usize] as usize);
            let out = self.tables[kind as usize][x1 << 4 | x2 << 3 | x3 << 2 | x4 << 1 | cin];
            wires[cell.outputs[0] as usize] = out & 1;
            wires[cell.outputs[1] as usize] = (out >> 1) & 1;
            wires[cell.outputs[2] as usize] = (out >> 2) & 1;
        }
        let mut row_a = 0u64;
        let mut row_b = 0u64;
        for (col, pair) in self.tree.final_rows().iter().enumerate() {
            row_a |= (wires[pair[0] as usize] as u64) << col;
            row_b |= (wires[pair[1] as usize] as u64) << col;
        }
        (row_a, row_b)
    }

    /// Significand product of operands of the tree's width.
    pub fn multiply_raw(&self, a: u64, b: u64) -> u64 {
        let g = self.geometry();
        assert!(a <= g.operand_mask() && b <= g.operand_mask(), "operand exceeds {} bits", g.width());
        let layout = self.tree.layout();
        let mut wires = vec![0u8; self.tree.wire_count()];
        layout.fill_dots(a, b, &mut wires[1..=layout.len()]);
        let (row_a, row_b) = self.reduce_wires(&mut wires);
        final_add(row_a, row_b, g)
    }

    /// Batched significand products; same results as [`Multiplier::multiply_raw`].
    pub fn multiply_raw_batch(&self, a: &[u64], b: &[u64], out: &mut [u64]) {
        assert!(a.len() == b.len() && out.len() >= a.len());
        let mask = self.geometry().operand_mask();
        assert!(a.iter().chain(b).all(|&v| v <= mask), "operand exceeds {} bits", self.geometry().width());
        let mut scratch = LaneScratch::default();
        for ((ca, cb), co) in a.chunks(64).zip(b.chunks(64)).zip(out.chunks_mut(64)) {
            self.multiply_lanes(ca, cb, co, &mut scratch);
        }
    }

    pub fn fp32_multiply(&self, a: Fp32Word, b: Fp32Word) -> Fp32Word {
        fp32::fp32_multiply(a, b, self)
    }

    /// Elementwise FP32 products; bit-identical to [`Multiplier::fp32_multiply`].
    pub fn fp32_multiply_batch(&self, a: &[Fp32Word], b: &[Fp32Word], out: &mut [Fp32Word]) {
        assert!(a.len() == b.len() && out.len() >= a.len());
        assert_eq!(self.geometry(), BoothGeometry::FP32);
        let mut pending: Vec<(usize, u32, i32)> = Vec::with_capacity(64);
        let mut sa = Vec::with_capacity(64);
        let mut sb = Vec::with_capacity(64);
        let mut prod = [0u64; 64];
        let mut scratch = LaneScratch::default();
        let mut flush = |pending: &mut Vec<(usize, u32, i32)>, sa: &mut Vec<u64>, sb: &mut Vec<u64>, out: &mut [Fp32Word]| {
            self.multiply_lanes(sa, sb, &mut prod, &mut scratch);
            for (&(i, sign, exp_sum), &p) in pending.iter().zip(&prod) {
                out[i] = fp32::pack_product(sign, exp_sum, p);
            }
            pending.clear();
            sa.clear();
            sb.clear();
        };
        for i in 0..a.len() {
            match fp32::screen(a[i], b[i]) {
                Screened::Done(w) => out[i] = w,
                Screened::Product { sign, exp_sum, a, b } => {
                    pending.push((i, sign, exp_sum));
                    sa.push(a.value() as u64);
                    sb.push(b.value() as u64);
                    if pending.len() == 64 {
                        flush(&mut pending, &mut sa, &mut sb, out);
                    }
                }
            }
        }
        if !pending.is_empty() {
            flush(&mut pending, &mut sa, &mut sb, out);
        }
    }
}

impl MantissaMultiplier for Multiplier {
    fn mantissa_multiply(&self, a: Significand24, b: Significand24) -> u64 {
        self.multiply_raw(a.value() as u64, b.value() as u64)
    }
}

/// Exact carry-propagate addition of the two final rows.
pub fn final_add(row_a: u64, row_b: u64, geometry: BoothGeometry) -> u64 {
    row_a.wrapping_add(row_b) & geometry.product_mask()
}

/// Builds the partial product matrix of two significands.
pub fn generate_ppm(layout: &PpmLayout, a: Significand24, b: Significand24) -> PartialProductMatrix<'_> {
    PartialProductMatrix::generate(layout, a.value() as u64, b.value() as u64)
}

/// Reduces a matrix to two rows with the multiplier's cell placement.
pub fn reduce_ppm(ppm: &PartialProductMatrix<'_>, multiplier: &Multiplier) -> (u64, u64) {
    multiplier.reduce(ppm)
}

/// All nine configurations sharing one reduction tree and compressor set.
#[derive(Debug, Clone)]
pub struct MultiplierBank {
    cells: CompressorSet,
    multipliers: Vec<Multiplier>,
}

impl MultiplierBank {
    pub fn new(cells: CompressorSet) -> Self {
        Self::with_geometry(BoothGeometry::FP32, cells)
    }

    pub fn with_geometry(geometry: BoothGeometry, cells: CompressorSet) -> Self {
        let tree = Arc::new(ReductionTree::new(geometry));
        let multipliers = MultiplierConfig::ALL
            .into_iter()
            .map(|cfg| Multiplier::new(Arc::clone(&tree), cfg, &cells))
            .collect();
        MultiplierBank { cells, multipliers }
    }

    pub fn compressors(&self) -> &CompressorSet {
        &self.cells
    }

    pub fn get(&self, cfg: MultiplierConfig) -> &Multiplier {
        &self.multipliers[cfg.index()]
    }

    pub fn tree(&self) -> &ReductionTree {
        self.multipliers[0].tree()
    }

    pub fn multiply(&self, a: Fp32Word, b: Fp32Word, cfg: MultiplierConfig) -> Fp32Word {
        self.get(cfg).fp32_multiply(a, b)
    }

    pub fn mantissa_multiply(&self, a: Significand24, b: Significand24, cfg: MultiplierConfig) -> u64 {
        self.get(cfg).mantissa_multiply(a, b)
    }
}

impl Default for MultiplierBank {
    fn default() -> Self {
        MultiplierBank::new(CompressorSet::default())
    }
}

/// Process-wide bank built from the default compressor cells.
pub fn default_bank() -> &'static MultiplierBank {
    static BANK: OnceLock<MultiplierBank> = OnceLock::new();
    BANK.get_or_init(MultiplierBank::default)
}

/// 48-bit significand product with the default compressor cells.
pub fn mantissa_multiply(a: Significand24, b: Significand24, cfg: MultiplierConfig) -> u64 {
    default_bank().mantissa_multiply(a, b, cfg)
}

/// FP32 product with the default compressor cells.
pub fn fp32_multiply(a: Fp32Word, b: Fp32Word, cfg: MultiplierConfig) -> Fp32Word {
    default_bank().multiply(a, b, cfg)
}
