//! 64-lane bitsliced evaluation of a compiled multiplier.
//!
//! Every wire of the reduction tree becomes a `u64` whose bit `l` is the
//! wire's value for operand pair `l`. Cells are evaluated from the algebraic
//! normal form of their truth tables, so any 5-input table works unchanged.

use super::ppm::DotSource;
use super::Multiplier;

/// Transposes a 64x64 bit matrix in place: afterwards bit `l` of `m[j]` is
/// what bit `j` of `m[l]` was.
pub fn transpose64(m: &mut [u64; 64]) {
    let mut width = 32;
    let mut mask: u64 = 0x0000_0000_FFFF_FFFF;
    while width != 0 {
        let mut k = 0;
        while k < 64 {
            for i in k..k + width {
                let t = ((m[i] >> width) ^ m[i + width]) & mask;
                m[i] ^= t << width;
                m[i + width] ^= t;
            }
            k += 2 * width;
        }
        width >>= 1;
        mask ^= mask << width;
    }
}

/// ANF coefficient masks for the three outputs of a packed truth table.
pub(crate) fn anf_of(entries: &[u8; 32]) -> [u32; 3] {
    let mut out = [0u32; 3];
    for (o, mask) in out.iter_mut().enumerate() {
        let mut a: [u8; 32] = std::array::from_fn(|i| (entries[i] >> o) & 1);
        for k in 0..5 {
            for i in 0..32 {
                if i & (1 << k) != 0 {
                    a[i] ^= a[i ^ (1 << k)];
                }
            }
        }
        *mask = a.iter().enumerate().fold(0, |m, (i, &c)| m | (c as u32) << i);
    }
    out
}

/// A cell's truth table compiled for bitsliced evaluation.
///
/// Most 4:2 designs compute `cout` from `(x1, x2, x3)` alone and `sum`,
/// `carry` from `(x1 ^ x2 ^ x3, x4, cin)`. Such tables reduce to three
/// 3-input functions evaluated branch-free from their ANF; anything else
/// falls back to the sparse 5-input ANF.
#[derive(Debug, Clone)]
pub(crate) enum CellProgram {
    Split { cout: [u64; 8], sum: [u64; 8], carry: [u64; 8] },
    General {
        /// `mono[dst] = mono[src] & var[v]`, for monomials of degree two or more
        steps: Vec<(u8, u8, u8)>,
        terms: [Vec<u8>; 3],
    },
}

/// ANF coefficients of a 3-input function as all-ones/all-zeros lane masks;
/// bit `i` of `table` is the value at `(a, b, c) = (i >> 2, i >> 1, i) & 1`.
fn anf3(table: u8) -> [u64; 8] {
    let mut a: [u8; 8] = std::array::from_fn(|i| table >> i & 1);
    for k in 0..3 {
        for i in 0..8 {
            if i & (1 << k) != 0 {
                a[i] ^= a[i ^ (1 << k)];
            }
        }
    }
    a.map(|c| if c == 1 { !0 } else { 0 })
}

#[inline(always)]
fn monomials3(a: u64, b: u64, c: u64) -> [u64; 8] {
    let ab = a & b;
    [!0, c, b, b & c, a, a & c, ab, ab & c]
}

#[inline(always)]
fn apply3(coef: &[u64; 8], m: &[u64; 8]) -> u64 {
    let mut acc = 0;
    for i in 0..8 {
        acc ^= coef[i] & m[i];
    }
    acc
}

/// Splits a table into `(cout(x1,x2,x3), sum(s1,x4,cin), carry(s1,x4,cin))`.
fn split_tables(entries: &[u8; 32]) -> Option<[u8; 3]> {
    let mut known = [[None::<u8>; 8]; 3];
    for (i, &e) in entries.iter().enumerate() {
        let [x1, x2, x3, x4, cin] = std::array::from_fn(|k| (i >> (4 - k) & 1) as u8);
        let s1 = x1 ^ x2 ^ x3;
        let keys = [(x1 << 2 | x2 << 1 | x3) as usize, (s1 << 2 | x4 << 1 | cin) as usize];
        for (out, slot) in [(2usize, keys[0]), (0, keys[1]), (1, keys[1])] {
            let bit = e >> out & 1;
            match known[out][slot] {
                Some(b) if b != bit => return None,
                _ => known[out][slot] = Some(bit),
            }
        }
    }
    let pack = |t: &[Option<u8>; 8]| t.iter().enumerate().fold(0u8, |m, (i, b)| m | b.unwrap_or(0) << i);
    Some([pack(&known[0]), pack(&known[1]), pack(&known[2])])
}

impl CellProgram {
    pub(crate) fn new(entries: &[u8; 32]) -> Self {
        if let Some([sum, carry, cout]) = split_tables(entries) {
            return CellProgram::Split { cout: anf3(cout), sum: anf3(sum), carry: anf3(carry) };
        }
        Self::general(entries)
    }

    pub(crate) fn general(entries: &[u8; 32]) -> Self {
        let anf = anf_of(entries);
        let needed = anf.iter().fold(0u32, |m, &a| m | a);
        // close under dropping the lowest variable so each step has its source
        let mut closed = needed;
        for i in (1..32u32).rev() {
            if closed >> i & 1 == 1 {
                closed |= 1 << (i & (i - 1));
            }
        }
        let steps = (1..32u32)
            .filter(|&i| closed >> i & 1 == 1 && i.count_ones() >= 2)
            .map(|i| (i as u8, (i & (i - 1)) as u8, i.trailing_zeros() as u8))
            .collect();
        let terms = anf.map(|mask| (0..32u8).filter(|&i| mask >> i & 1 == 1).collect());
        CellProgram::General { steps, terms }
    }

    #[inline]
    pub(crate) fn eval(&self, [x1, x2, x3, x4, cin]: [u64; 5]) -> [u64; 3] {
        match self {
            CellProgram::Split { cout, sum, carry } => {
                let mx = monomials3(x1, x2, x3);
                let ms = monomials3(x1 ^ x2 ^ x3, x4, cin);
                [apply3(sum, &ms), apply3(carry, &ms), apply3(cout, &mx)]
            }
            CellProgram::General { steps, terms } => {
                // Index bit p of a monomial selects input 4 - p, matching the table index.
                let v = [cin, x4, x3, x2, x1];
                let mut mono = [0u64; 32];
                mono[0] = !0;
                for (p, &x) in v.iter().enumerate() {
                    mono[1 << p] = x;
                }
                for &(d, src, var) in steps {
                    mono[d as usize] = mono[src as usize] & v[var as usize];
                }
                std::array::from_fn(|o| terms[o].iter().fold(0, |acc, &t| acc ^ mono[t as usize]))
            }
        }
    }
}

/// Reusable per-call buffers for [`Multiplier::multiply_lanes`].
#[derive(Debug, Default)]
pub(crate) struct LaneScratch {
    rows: Vec<u64>,
    wires: Vec<u64>,
}

impl Multiplier {
    /// Significand products for up to 64 operand pairs at once.
    pub(crate) fn multiply_lanes(&self, a: &[u64], b: &[u64], out: &mut [u64], scratch: &mut LaneScratch) {
        let n = a.len();
        debug_assert!(n <= 64 && b.len() == n && out.len() >= n);
        let tree = self.tree();
        let g = tree.geometry();
        let width = g.width() as usize;

        let mut at = [0u64; 64];
        let mut bt = [0u64; 64];
        if n == 64 && a.iter().all(|&x| x == a[0]) {
            // common in convolutions: one weight against many activations
            for (j, w) in at.iter_mut().enumerate() {
                *w = if a[0] >> j & 1 == 1 { !0 } else { 0 };
            }
        } else {
            at[..n].copy_from_slice(a);
            transpose64(&mut at);
        }
        bt[..n].copy_from_slice(b);
        transpose64(&mut bt);

        // 3a over width + 2 bits.
        let mag_bits = g.row_bits() as usize - 1;
        let mut a3 = [0u64; 64];
        let mut carry = 0u64;
        for j in 0..mag_bits {
            let x = if j < width { at[j] } else { 0 };
            let y = if j >= 1 && j - 1 < width { at[j - 1] } else { 0 };
            a3[j] = x ^ y ^ carry;
            carry = (x & y) | (carry & (x ^ y));
        }
        let a_at = |j: isize| if j >= 0 && (j as usize) < width { at[j as usize] } else { 0 };

        let digits = g.digits();
        let rows = &mut scratch.rows;
        rows.resize(digits * mag_bits, 0);
        let mut negs = [0u64; 11];
        // lanes of the multiplier bit at position p (p = -1 is the appended zero)
        let b_at = |p: isize| if p >= 0 && (p as usize) < width { bt[p as usize] } else { 0 };
        for i in 0..digits {
            let base = 3 * i as isize;
            let top = b_at(base + 2);
            let x1 = b_at(base + 1) ^ top;
            let x0 = b_at(base) ^ top;
            let xm = b_at(base - 1) ^ top;
            let sel1 = !x1 & (x0 ^ xm);
            let sel2 = (!x1 & x0 & xm) | (x1 & !x0 & !xm);
            let sel3 = x1 & (x0 ^ xm);
            let sel4 = x1 & x0 & xm;
            let neg = top & (x1 | x0 | xm);
            negs[i] = neg;
            for j in 0..mag_bits {
                let jj = j as isize;
                let mag = (sel1 & a_at(jj)) | (sel2 & a_at(jj - 1)) | (sel3 & a3[j]) | (sel4 & a_at(jj - 2));
                rows[i * mag_bits + j] = mag ^ neg;
            }
        }

        // every wire past ground is written before it is read
        let wires = &mut scratch.wires;
        wires.resize(tree.wire_count(), 0);
        wires[0] = 0;
        for (w, &(src, _)) in wires[1..].iter_mut().zip(tree.layout().dots()) {
            *w = match src {
                DotSource::RowBit { row, bit } => rows[row * mag_bits + bit as usize],
                DotSource::InvertedSign { row } => !negs[row],
                DotSource::Correction { row } => negs[row],
                DotSource::One => !0,
            };
        }

        for (cell, &kind) in tree.cells().iter().zip(self.kinds()) {
            let vars = cell.inputs.map(|w| wires[w as usize]);
            let outs = self.programs()[kind as usize].eval(vars);
            for (&w, v) in cell.outputs.iter().zip(outs) {
                wires[w as usize] = v;
            }
        }

        // ripple-carry add of the two rows, then back to one word per lane
        let mut sum = [0u64; 64];
        let mut carry = 0u64;
        for (col, pair) in tree.final_rows().iter().enumerate() {
            let (x, y) = (wires[pair[0] as usize], wires[pair[1] as usize]);
            sum[col] = x ^ y ^ carry;
            carry = (x & y) | (carry & (x ^ y));
        }
        transpose64(&mut sum);
        out[..n].copy_from_slice(&sum[..n]);
    }
}
