//! Radix-8 Booth recoding and the partial product matrix.
//!
//! Operands are unsigned. The multiplier is zero-extended so its top digit
//! never carries a sign, and each partial product row is `digit * a` in
//! `width + 3` bit two's complement. Negative rows are formed as a one's
//! complement plus a correction dot at the row's LSB column. Sign extension
//! is folded into one `~sign` dot per row plus a precomputed constant, so the
//! matrix evaluates to the product modulo `2^(2 * width)`.

use crate::fp32::Significand24;

/// Shape parameters shared by the encoder, matrix and reduction tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoothGeometry {
    width: u32,
    approx_columns: u32,
}

impl BoothGeometry {
    /// The 24x24 significand multiplier, approximating the 24 low columns.
    pub const FP32: BoothGeometry = BoothGeometry { width: 24, approx_columns: 24 };

    /// `width` operand bits (2..=30); columns below `approx_columns` use
    /// approximate cells.
    pub fn new(width: u32, approx_columns: u32) -> Self {
        assert!((2..=30).contains(&width), "unsupported operand width {width}");
        assert!(approx_columns <= 2 * width);
        BoothGeometry { width, approx_columns }
    }

    pub fn width(self) -> u32 {
        self.width
    }

    pub fn approx_columns(self) -> u32 {
        self.approx_columns
    }

    /// Radix-8 digits needed to cover `width` bits plus a zero sign bit.
    pub fn digits(self) -> usize {
        (self.width as usize + 1).div_ceil(3)
    }

    /// Two's complement bits per partial product row, sign bit included.
    pub fn row_bits(self) -> u32 {
        self.width + 3
    }

    pub fn columns(self) -> u32 {
        2 * self.width
    }

    pub fn product_mask(self) -> u64 {
        (1u64 << self.columns()) - 1
    }

    pub fn operand_mask(self) -> u64 {
        (1u64 << self.width) - 1
    }

    /// Constant that completes the folded sign extension:
    /// `-sum_i 2^(row_bits - 1 + 3i)` modulo `2^columns`.
    pub fn sign_constant(self) -> u64 {
        let s: u64 = (0..self.digits())
            .map(|i| {
                let shift = self.row_bits() - 1 + 3 * i as u32;
                if shift < 64 { 1u64 << shift } else { 0 }
            })
            .fold(0u64, |acc, v| acc.wrapping_add(v));
        s.wrapping_neg() & self.product_mask()
    }
}

/// Magnitude (0..=4) and sign of one recoded digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DigitSelect {
    pub magnitude: u8,
    pub negative: bool,
}

impl DigitSelect {
    pub fn value(self) -> i8 {
        if self.negative { -(self.magnitude as i8) } else { self.magnitude as i8 }
    }
}

/// Recodes the overlapping bit group `(b[3i+2], b[3i+1], b[3i], b[3i-1])`.
///
/// Inverting the three low bits when the top bit is set turns the digit
/// magnitude into `2*x1 + x0 + x_1`; a `1111` group yields magnitude 0 with
/// no sign.
#[inline]
pub(crate) fn select_digit(group: u32) -> DigitSelect {
    let top = (group >> 3) & 1;
    let x = (group & 0b111) ^ if top == 1 { 0b111 } else { 0 };
    let magnitude = (2 * ((x >> 2) & 1) + ((x >> 1) & 1) + (x & 1)) as u8;
    DigitSelect { magnitude, negative: top == 1 && magnitude != 0 }
}

#[inline]
pub(crate) fn digit_group(value: u64, i: usize) -> u32 {
    // group bits: b[3i+2] b[3i+1] b[3i] b[3i-1]
    let padded = value << 1;
    ((padded >> (3 * i)) & 0b1111) as u32
}

/// Recoded digits of `value` for a geometry, least significant first.
pub fn radix8_digits(value: u64, geometry: BoothGeometry) -> Vec<i8> {
    assert!(value <= geometry.operand_mask());
    (0..geometry.digits()).map(|i| select_digit(digit_group(value, i)).value()).collect()
}

/// Radix-8 Booth digits of a 24-bit significand, each in `-4..=4`.
pub fn radix8_encode(m: Significand24) -> [i8; 9] {
    let v = radix8_digits(m.value() as u64, BoothGeometry::FP32);
    v.try_into().expect("nine digits for 24-bit operands")
}

/// What a dot in the matrix carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DotSource {
    /// Bit `bit` of row `row` (one's complemented for negative digits).
    RowBit { row: usize, bit: u32 },
    /// Inverted row sign at the row's top position.
    InvertedSign { row: usize },
    /// `+1` completing the two's complement of a negative row.
    Correction { row: usize },
    /// A one from the folded sign-extension constant.
    One,
}

/// Fixed dot positions of the matrix; independent of operand values.
#[derive(Debug, Clone)]
pub struct PpmLayout {
    geometry: BoothGeometry,
    /// Dots sorted by column, then by insertion order.
    dots: Vec<(DotSource, u32)>,
    column_starts: Vec<usize>,
}

impl PpmLayout {
    pub fn new(geometry: BoothGeometry) -> Self {
        let cols = geometry.columns();
        let mut dots = Vec::new();
        for row in 0..geometry.digits() {
            let base = 3 * row as u32;
            for bit in 0..geometry.row_bits() - 1 {
                dots.push((DotSource::RowBit { row, bit }, base + bit));
            }
            dots.push((DotSource::InvertedSign { row }, base + geometry.row_bits() - 1));
            dots.push((DotSource::Correction { row }, base));
        }
        let constant = geometry.sign_constant();
        for col in 0..cols {
            if constant >> col & 1 == 1 {
                dots.push((DotSource::One, col));
            }
        }
        dots.retain(|&(_, col)| col < cols);
        dots.sort_by_key(|&(_, col)| col);
        let mut column_starts = vec![0; cols as usize + 1];
        for &(_, col) in &dots {
            column_starts[col as usize + 1] += 1;
        }
        for c in 0..cols as usize {
            column_starts[c + 1] += column_starts[c];
        }
        PpmLayout { geometry, dots, column_starts }
    }

    pub fn geometry(&self) -> BoothGeometry {
        self.geometry
    }

    pub fn dots(&self) -> &[(DotSource, u32)] {
        &self.dots
    }

    pub fn len(&self) -> usize {
        self.dots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dots.is_empty()
    }

    /// Dot indices in column `col`.
    pub fn column(&self, col: u32) -> std::ops::Range<usize> {
        self.column_starts[col as usize]..self.column_starts[col as usize + 1]
    }

    pub fn column_height(&self, col: u32) -> usize {
        self.column(col).len()
    }

    /// Fills `out` with dot values for the operands.
    pub(crate) fn fill_dots(&self, a: u64, b: u64, out: &mut [u8]) {
        let g = self.geometry;
        let magnitude_mask = (1u64 << (g.row_bits() - 1)) - 1;
        let mut rows = [(0u64, false); 11];
        for (i, r) in rows.iter_mut().enumerate().take(g.digits()) {
            let d = select_digit(digit_group(b, i));
            let mag = d.magnitude as u64 * a;
            *r = (if d.negative { !mag & magnitude_mask } else { mag }, d.negative);
        }
        for (slot, &(src, _)) in out.iter_mut().zip(&self.dots) {
            *slot = match src {
                DotSource::RowBit { row, bit } => (rows[row].0 >> bit & 1) as u8,
                DotSource::InvertedSign { row } => !rows[row].1 as u8,
                DotSource::Correction { row } => rows[row].1 as u8,
                DotSource::One => 1,
            };
        }
    }
}

/// Dot values for one operand pair, aligned with a [`PpmLayout`].
#[derive(Debug, Clone)]
pub struct PartialProductMatrix<'a> {
    layout: &'a PpmLayout,
    bits: Vec<u8>,
}

impl<'a> PartialProductMatrix<'a> {
    pub fn generate(layout: &'a PpmLayout, a: u64, b: u64) -> Self {
        let g = layout.geometry();
        assert!(a <= g.operand_mask() && b <= g.operand_mask(), "operand exceeds {} bits", g.width());
        let mut bits = vec![0u8; layout.len()];
        layout.fill_dots(a, b, &mut bits);
        PartialProductMatrix { layout, bits }
    }

    pub fn layout(&self) -> &PpmLayout {
        self.layout
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// `sum(bit * 2^column)` modulo `2^columns`.
    pub fn evaluate(&self) -> u64 {
        self.layout
            .dots
            .iter()
            .zip(&self.bits)
            .fold(0u64, |acc, (&(_, col), &bit)| acc.wrapping_add((bit as u64) << col))
            & self.layout.geometry.product_mask()
    }

    /// Count of ones per column.
    pub fn column_ones(&self) -> Vec<usize> {
        (0..self.layout.geometry.columns())
            .map(|c| self.layout.column(c).map(|i| self.bits[i] as usize).sum())
            .collect()
    }
}
