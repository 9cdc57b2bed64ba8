//! IEEE-754 single precision words and the multiplication datapath.
//!
//! The datapath is split the way a hardware multiplier is: sign XOR,
//! exponent addition with bias correction, and a 24x24 significand product
//! supplied by a [`MantissaMultiplier`]. Everything after the product
//! (normalization, round-to-nearest-even, overflow and underflow handling)
//! is shared by exact and approximate multipliers.

use std::fmt;

pub const EXPONENT_BIAS: i32 = 127;
pub const MANTISSA_BITS: u32 = 23;
pub const SIGN_MASK: u32 = 0x8000_0000;
pub const EXPONENT_MASK: u32 = 0x7F80_0000;
pub const MANTISSA_MASK: u32 = 0x007F_FFFF;
pub const HIDDEN_BIT: u32 = 1 << MANTISSA_BITS;

/// Quiet NaN returned when an invalid operation (0 x inf) creates a NaN.
pub const DEFAULT_NAN: u32 = 0x7FC0_0000;
const QUIET_BIT: u32 = 0x0040_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FpClass {
    Zero,
    Subnormal,
    Normal,
    Infinity,
    Nan,
}

/// A raw 32-bit IEEE-754 pattern.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Fp32Word(pub u32);

impl fmt::Debug for Fp32Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fp32Word({:#010x} = {:e})", self.0, self.to_f32())
    }
}

/// Field view of an [`Fp32Word`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decoded {
    pub sign: u32,
    pub biased_exponent: u32,
    pub mantissa: u32,
    pub class: FpClass,
}

impl Decoded {
    pub fn encode(&self) -> Fp32Word {
        Fp32Word(
            (self.sign & 1) << 31
                | (self.biased_exponent & 0xFF) << MANTISSA_BITS
                | (self.mantissa & MANTISSA_MASK),
        )
    }
}

impl Fp32Word {
    pub const ZERO: Fp32Word = Fp32Word(0);
    pub const ONE: Fp32Word = Fp32Word(0x3F80_0000);
    pub const INFINITY: Fp32Word = Fp32Word(EXPONENT_MASK);
    pub const NAN: Fp32Word = Fp32Word(DEFAULT_NAN);

    pub fn from_f32(x: f32) -> Self {
        Fp32Word(x.to_bits())
    }

    pub fn to_f32(self) -> f32 {
        f32::from_bits(self.0)
    }

    pub fn sign(self) -> u32 {
        self.0 >> 31
    }

    pub fn biased_exponent(self) -> u32 {
        (self.0 & EXPONENT_MASK) >> MANTISSA_BITS
    }

    pub fn mantissa(self) -> u32 {
        self.0 & MANTISSA_MASK
    }

    pub fn class(self) -> FpClass {
        match (self.biased_exponent(), self.mantissa()) {
            (0, 0) => FpClass::Zero,
            (0, _) => FpClass::Subnormal,
            (0xFF, 0) => FpClass::Infinity,
            (0xFF, _) => FpClass::Nan,
            _ => FpClass::Normal,
        }
    }

    pub fn is_nan(self) -> bool {
        self.class() == FpClass::Nan
    }

    pub fn is_finite(self) -> bool {
        self.biased_exponent() != 0xFF
    }

    pub fn decode(self) -> Decoded {
        Decoded {
            sign: self.sign(),
            biased_exponent: self.biased_exponent(),
            mantissa: self.mantissa(),
            class: self.class(),
        }
    }

    /// Significand with the implicit bit made explicit.
    ///
    /// Panics on infinity or NaN, which have no significand.
    pub fn significand(self) -> Significand24 {
        match self.class() {
            FpClass::Normal => Significand24(HIDDEN_BIT | self.mantissa()),
            FpClass::Zero | FpClass::Subnormal => Significand24(self.mantissa()),
            class => panic!("significand of non-finite word {:#010x} ({class:?})", self.0),
        }
    }

    /// Exponent of the significand's LSB-aligned scale, with subnormals
    /// sharing the minimum normal exponent.
    fn effective_exponent(self) -> i32 {
        self.biased_exponent().max(1) as i32
    }
}

impl From<f32> for Fp32Word {
    fn from(x: f32) -> Self {
        Fp32Word::from_f32(x)
    }
}

/// 24-bit significand: `1.M` for normals, `0.M` for subnormals and zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Significand24(pub u32);

impl Significand24 {
    pub const MAX: u32 = (1 << 24) - 1;

    pub fn new(value: u32) -> Self {
        assert!(value <= Self::MAX, "significand {value:#x} exceeds 24 bits");
        Significand24(value)
    }

    pub fn value(self) -> u32 {
        self.0
    }
}

/// The significand product stage of a floating-point multiplier.
pub trait MantissaMultiplier {
    /// Product of two 24-bit significands as a 48-bit value.
    fn mantissa_multiply(&self, a: Significand24, b: Significand24) -> u64;
}

/// Reference significand product using the native integer multiplier.
#[derive(Debug, Clone, Copy, Default)]
pub struct IntegerMantissa;

impl MantissaMultiplier for IntegerMantissa {
    fn mantissa_multiply(&self, a: Significand24, b: Significand24) -> u64 {
        a.0 as u64 * b.0 as u64
    }
}

/// Outcome of the operand screening that precedes the significand product.
pub(crate) enum Screened {
    Done(Fp32Word),
    Product { sign: u32, exp_sum: i32, a: Significand24, b: Significand24 },
}

pub(crate) fn screen(a: Fp32Word, b: Fp32Word) -> Screened {
    let sign = a.sign() ^ b.sign();
    let signed = |bits: u32| Screened::Done(Fp32Word(sign << 31 | bits));
    let (ca, cb) = (a.class(), b.class());
    if ca == FpClass::Nan {
        return Screened::Done(Fp32Word(a.0 | QUIET_BIT));
    }
    if cb == FpClass::Nan {
        return Screened::Done(Fp32Word(b.0 | QUIET_BIT));
    }
    match (ca, cb) {
        (FpClass::Infinity, FpClass::Zero) | (FpClass::Zero, FpClass::Infinity) => {
            Screened::Done(Fp32Word::NAN)
        }
        (FpClass::Infinity, _) | (_, FpClass::Infinity) => signed(EXPONENT_MASK),
        (FpClass::Zero, _) | (_, FpClass::Zero) => signed(0),
        _ => Screened::Product {
            sign,
            exp_sum: a.effective_exponent() + b.effective_exponent(),
            a: a.significand(),
            b: b.significand(),
        },
    }
}

/// Round `value / 2^shift` to nearest, ties to even. Negative shifts are exact
/// left shifts.
pub(crate) fn round_shift_rne(value: u64, shift: i32) -> u64 {
    if shift <= 0 {
        return value << (-shift);
    }
    if shift >= 64 {
        return 0;
    }
    let q = value >> shift;
    let rem = value & ((1u64 << shift) - 1);
    let half = 1u64 << (shift - 1);
    if rem > half || (rem == half && q & 1 == 1) {
        q + 1
    } else {
        q
    }
}

/// Normalize and round a significand product `product * 2^(exp_sum - 300)`.
pub(crate) fn pack_product(sign: u32, exp_sum: i32, product: u64) -> Fp32Word {
    let sign_bits = sign << 31;
    if product == 0 {
        return Fp32Word(sign_bits);
    }
    // Unbiased exponent of the product's LSB: each significand LSB is
    // 2^(E - 127 - 23).
    let lsb_exp = exp_sum - 2 * (EXPONENT_BIAS + MANTISSA_BITS as i32);
    let lead = 63 - product.leading_zeros() as i32;
    let exp = lead + lsb_exp;
    if exp > EXPONENT_BIAS {
        return Fp32Word(sign_bits | EXPONENT_MASK);
    }
    let min_exp = 1 - EXPONENT_BIAS;
    let result_lsb = (exp - MANTISSA_BITS as i32).max(min_exp - MANTISSA_BITS as i32);
    let rounded = round_shift_rne(product, result_lsb - lsb_exp);
    let bits = if exp >= min_exp {
        // Hidden bit lands in the exponent field; a rounding carry into 2^24
        // bumps the exponent, reaching infinity when appropriate.
        (((exp + EXPONENT_BIAS - 1) as u64) << MANTISSA_BITS) + rounded
    } else {
        rounded
    };
    Fp32Word(sign_bits | (bits.min(EXPONENT_MASK as u64) as u32))
}

/// Multiply two FP32 words through the given significand multiplier.
pub fn fp32_multiply<M: MantissaMultiplier + ?Sized>(a: Fp32Word, b: Fp32Word, m: &M) -> Fp32Word {
    match screen(a, b) {
        Screened::Done(w) => w,
        Screened::Product { sign, exp_sum, a, b } => {
            pack_product(sign, exp_sum, m.mantissa_multiply(a, b))
        }
    }
}
