//! Greedy stage-wise 4:2 reduction of the partial product matrix.
//!
//! Each stage picks a target height from 2, 4, 8, 16, ... (the largest below
//! the current maximum) and walks the columns from LSB to MSB, adding cells
//! to a column until its next-stage height meets the target. A cell takes up
//! to four dots; cells with fewer inputs have the missing ones grounded (three
//! dots make a full adder). A cell's `cout` becomes the `cin` of the next cell
//! in the column above in the same stage; unused `cout`s pass to the next
//! stage as ordinary dots. Carries out of the top column are dropped, which is
//! exact modulo `2^columns`.

use std::collections::VecDeque;

use super::config::{Lead, MultiplierConfig, Scheme};
use super::ppm::{BoothGeometry, PpmLayout};

/// Column heights each stage reduces to, Dadda style for 4:2 cells.
const STAGE_TARGETS: [usize; 5] = [2, 4, 8, 16, 32];

/// Wire 0 is tied low.
pub const GROUND: u32 = 0;

/// Cell flavor at one tree position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    Exact,
    Positive,
    Negative,
}

impl CellKind {
    pub fn symbol(self) -> char {
        match self {
            CellKind::Exact => 'E',
            CellKind::Positive => 'P',
            CellKind::Negative => 'N',
        }
    }
}

/// Cell flavor at (`stage`, `column`) for a configuration.
///
/// Columns at or above the geometry's approximate boundary are always exact.
/// Otherwise the parity of the stage (SI), of the column (CI) or their XOR
/// (CSI) picks between the leading cell (parity 0) and the other polarity.
pub fn cell_kind(cfg: MultiplierConfig, geometry: BoothGeometry, stage: usize, column: u32) -> CellKind {
    let MultiplierConfig::Approx { lead, scheme } = cfg else {
        return CellKind::Exact;
    };
    if column >= geometry.approx_columns() {
        return CellKind::Exact;
    }
    let stage_odd = stage % 2 == 1;
    let column_odd = column % 2 == 1;
    let flip = match scheme {
        Scheme::Ni => false,
        Scheme::Si => stage_odd,
        Scheme::Ci => column_odd,
        Scheme::Csi => stage_odd ^ column_odd,
    };
    match (lead, flip) {
        (Lead::Pm, false) | (Lead::Nm, true) => CellKind::Positive,
        (Lead::Pm, true) | (Lead::Nm, false) => CellKind::Negative,
    }
}

/// One 4:2 cell: inputs `(x1, x2, x3, x4, cin)`, outputs `(sum, carry, cout)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub inputs: [u32; 5],
    pub outputs: [u32; 3],
    pub stage: usize,
    pub column: u32,
}

/// The config-independent wiring of the reduction.
#[derive(Debug, Clone)]
pub struct ReductionTree {
    layout: PpmLayout,
    cells: Vec<Cell>,
    wires: usize,
    stages: usize,
    /// Final two rows: up to two wires per column (missing entries are ground).
    final_rows: Vec<[u32; 2]>,
}

impl ReductionTree {
    pub fn new(geometry: BoothGeometry) -> Self {
        let layout = PpmLayout::new(geometry);
        let cols = geometry.columns() as usize;
        // Dot i of the layout lives on wire i + 1.
        let mut current: Vec<VecDeque<u32>> = (0..cols)
            .map(|c| layout.column(c as u32).map(|i| i as u32 + 1).collect())
            .collect();
        let mut next_wire = layout.len() as u32 + 1;
        let mut cells = Vec::new();
        let mut stage = 0;
        loop {
            let max_height = current.iter().map(VecDeque::len).max().unwrap_or(0);
            if max_height <= 2 {
                break;
            }
            let target = STAGE_TARGETS.iter().rev().copied().find(|&t| t < max_height).unwrap_or(2);
            let mut next: Vec<VecDeque<u32>> = vec![VecDeque::new(); cols];
            // couts from the column below, waiting for a cin
            let mut cins: VecDeque<u32> = VecDeque::new();
            for col in 0..cols {
                let dots = &mut current[col];
                let carries_in = next[col].len();
                let mut couts = VecDeque::new();
                let mut sums = 0;
                let height = |dots: usize, sums: usize, cins: usize| dots + sums + carries_in + cins;
                while height(dots.len(), sums, cins.len()) > target
                    && (dots.len() >= 2 || (dots.len() == 1 && !cins.is_empty()))
                {
                    let excess = height(dots.len(), sums, cins.len()) - target;
                    let absorbs = usize::from(!cins.is_empty());
                    // a cell taking k dots removes k - 1 + absorbs from the column
                    let k = (excess + 1).saturating_sub(absorbs).clamp(2 - absorbs, 4).min(dots.len());
                    let mut take = || if k > 0 { dots.pop_front() } else { None };
                    let mut inputs = [GROUND; 5];
                    for slot in inputs.iter_mut().take(k) {
                        *slot = take().expect("k bounded by column height");
                    }
                    inputs[4] = cins.pop_front().unwrap_or(GROUND);
                    let outputs = [next_wire, next_wire + 1, next_wire + 2];
                    next_wire += 3;
                    cells.push(Cell { inputs, outputs, stage, column: col as u32 });
                    next[col].push_back(outputs[0]);
                    sums += 1;
                    if col + 1 < cols {
                        next[col + 1].push_back(outputs[1]);
                        couts.push_back(outputs[2]);
                    }
                }
                next[col].extend(dots.drain(..));
                next[col].extend(cins.drain(..));
                cins = couts;
            }
            current = next;
            stage += 1;
            assert!(stage < 64, "reduction tree failed to converge");
        }
        let final_rows = current
            .iter()
            .map(|c| [c.front().copied().unwrap_or(GROUND), c.get(1).copied().unwrap_or(GROUND)])
            .collect();
        ReductionTree { layout, cells, wires: next_wire as usize, stages: stage, final_rows }
    }

    pub fn geometry(&self) -> BoothGeometry {
        self.layout.geometry()
    }

    pub fn layout(&self) -> &PpmLayout {
        &self.layout
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn wire_count(&self) -> usize {
        self.wires
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn final_rows(&self) -> &[[u32; 2]] {
        &self.final_rows
    }

    /// Cell kinds for every cell, in tree order.
    pub fn placement(&self, cfg: MultiplierConfig) -> Vec<CellKind> {
        self.cells.iter().map(|c| cell_kind(cfg, self.geometry(), c.stage, c.column)).collect()
    }

    /// Stage x column map of the cell kinds; `None` where no cell sits.
    pub fn placement_map(&self, cfg: MultiplierConfig) -> Vec<Vec<Option<CellKind>>> {
        let cols = self.geometry().columns() as usize;
        let mut map = vec![vec![None; cols]; self.stages];
        for c in &self.cells {
            map[c.stage][c.column as usize] = Some(cell_kind(cfg, self.geometry(), c.stage, c.column));
        }
        map
    }

    /// Number of cells per (stage, column).
    pub fn cell_counts(&self) -> Vec<Vec<usize>> {
        let cols = self.geometry().columns() as usize;
        let mut counts = vec![vec![0; cols]; self.stages];
        for c in &self.cells {
            counts[c.stage][c.column as usize] += 1;
        }
        counts
    }
}
