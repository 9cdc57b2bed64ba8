use approxfp::booth::{BoothGeometry, CellKind};
use approxfp::compressor::{exact_compress, input_index};
use approxfp::{CompressorSet, CompressorTable, MultiplierBank, MultiplierConfig, Polarity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MASK48: u64 = (1 << 48) - 1;

fn random_significands(n: usize, seed: u64) -> (Vec<u64>, Vec<u64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (rng.gen_range(0..1u64 << 24), rng.gen_range(0..1u64 << 24))).unzip()
}

/// Products are formed modulo 2^48; read the difference as a signed 48-bit value.
fn signed_error(approx: u64, exact: u64) -> i64 {
    ((approx.wrapping_sub(exact) & MASK48) << 16) as i64 >> 16
}

/// Sound error interval for a configuration: every cell adds its own signed
/// error at its column weight and the rest of the datapath is exact.
fn error_interval(bank: &MultiplierBank, cfg: MultiplierConfig) -> (i64, i64) {
    let m = bank.get(cfg);
    let cells = bank.compressors();
    let range = |t: &CompressorTable| {
        let errs: Vec<i64> = (0..32).map(|i| t.entry_error(i) as i64).collect();
        (*errs.iter().min().unwrap(), *errs.iter().max().unwrap())
    };
    let (mut lo, mut hi) = (0i64, 0i64);
    for (cell, kind) in bank.tree().cells().iter().zip(m.placement()) {
        let (emin, emax) = match kind {
            CellKind::Exact => (0, 0),
            CellKind::Positive => range(&cells.positive),
            CellKind::Negative => range(&cells.negative),
        };
        lo += emin << cell.column;
        hi += emax << cell.column;
    }
    (lo, hi)
}

#[test]
fn exact_matches_integer_product_24bit() {
    let bank = approxfp::default_bank();
    let (a, b) = random_significands(1_000_000, 1);
    let mut out = vec![0u64; a.len()];
    bank.get(MultiplierConfig::Exact).multiply_raw_batch(&a, &b, &mut out);
    for i in 0..a.len() {
        assert_eq!(out[i], a[i] * b[i], "{:#x} * {:#x}", a[i], b[i]);
    }
    let corners = [0u64, 1, 0x80_0000, 0xFF_FFFF, 0xAA_AAAA, 0x55_5555, 0x7F_FFFF];
    for &x in &corners {
        for &y in &corners {
            assert_eq!(bank.get(MultiplierConfig::Exact).multiply_raw(x, y), x * y);
        }
    }
}

#[test]
fn exact_exhaustive_8bit() {
    let bank = MultiplierBank::with_geometry(BoothGeometry::new(8, 8), CompressorSet::default());
    let m = bank.get(MultiplierConfig::Exact);
    let (a, b): (Vec<u64>, Vec<u64>) = (0..1u64 << 16).map(|i| (i >> 8, i & 0xFF)).unzip();
    let mut out = vec![0u64; a.len()];
    m.multiply_raw_batch(&a, &b, &mut out);
    for i in 0..a.len() {
        assert_eq!(out[i], a[i] * b[i]);
        assert_eq!(m.multiply_raw(a[i], b[i]), a[i] * b[i]);
    }
}

#[test]
fn approximate_errors_stay_inside_cell_bound() {
    let bank = approxfp::default_bank();
    let (a, b) = random_significands(1 << 18, 11);
    let mut out = vec![0u64; a.len()];
    for cfg in MultiplierConfig::approximate() {
        let (lo, hi) = error_interval(bank, cfg);
        bank.get(cfg).multiply_raw_batch(&a, &b, &mut out);
        let mut worst = 0i64;
        for i in 0..a.len() {
            let e = signed_error(out[i], a[i] * b[i]);
            assert!((lo..=hi).contains(&e), "{cfg}: {e} outside [{lo}, {hi}]");
            worst = worst.max(e.abs());
        }
        // columns >= 24 see only carries, so every config stays below 2^27
        assert!(hi.max(-lo) < 1 << 27, "{cfg}: interval [{lo}, {hi}]");
        assert!(worst > 0, "{cfg} never erred");
    }
}

/// Observed worst absolute errors on a fixed sample. Several configurations
/// exceed 2^25 by a small margin; the pin catches drift in the tree or cells.
#[test]
fn pinned_worst_errors_on_fixed_sample() {
    let bank = approxfp::default_bank();
    let (a, b) = random_significands(1 << 20, 11);
    let mut out = vec![0u64; a.len()];
    let mut got = Vec::new();
    for cfg in MultiplierConfig::approximate() {
        bank.get(cfg).multiply_raw_batch(&a, &b, &mut out);
        let worst = (0..a.len()).map(|i| signed_error(out[i], a[i] * b[i]).unsigned_abs()).max().unwrap();
        got.push((cfg.id(), worst));
    }
    let want = [
        ("pmni", 52_427_712),
        ("pmsi", 33_482_752),
        ("pmci", 43_370_888),
        ("pmcsi", 32_747_520),
        ("nmni", 59_170_072),
        ("nmsi", 32_536_736),
        ("nmci", 40_590_576),
        ("nmcsi", 32_098_048),
    ];
    assert_eq!(got, want);
}

/// 1.0 x 1.0: the folded sign-extension constants put several ones in the
/// low columns, so the approximate cells do see work and the result moves.
#[test]
fn one_times_one_recorded_offsets() {
    let bank = approxfp::default_bank();
    let want: [i64; 9] =
        [0, 6_291_456, -12_582_912, -4_194_304, -12_582_912, -16_777_216, -8_388_608, -6_291_456, -8_388_608];
    for (cfg, w) in MultiplierConfig::ALL.into_iter().zip(want) {
        assert_eq!(signed_error(bank.get(cfg).multiply_raw(0x80_0000, 0x80_0000), 1 << 46), w, "{cfg}");
    }
}

#[test]
fn custom_table_bitsliced_matches_scalar() {
    // Random cells with the right bias sign exercise the general evaluation path.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut random_table = |polarity: Polarity| loop {
        let mut entries = [0u8; 32];
        for (i, e) in entries.iter_mut().enumerate() {
            let [x1, x2, x3, x4, cin] = [4, 3, 2, 1, 0].map(|k| (i >> k & 1) as u8);
            let (sum, carry, cout) = exact_compress(x1, x2, x3, x4, cin);
            assert_eq!(input_index(x1, x2, x3, x4, cin), i);
            // cout stays a function of x1..x3, so only sum and carry are perturbed
            let noise = if rng.gen_bool(0.25) { rng.gen_range(0..4u8) } else { 0 };
            *e = (sum | carry << 1 | cout << 2) ^ noise;
        }
        if let Ok(t) = CompressorTable::new("random", polarity, entries) {
            return t;
        }
    };
    let set = CompressorSet::new(random_table(Polarity::Positive), random_table(Polarity::Negative)).unwrap();
    let bank = MultiplierBank::new(set);
    let (a, b) = random_significands(5000, 9);
    let mut out = vec![0u64; a.len()];
    for cfg in MultiplierConfig::ALL {
        let m = bank.get(cfg);
        m.multiply_raw_batch(&a, &b, &mut out);
        for i in 0..a.len() {
            assert_eq!(out[i], m.multiply_raw(a[i], b[i]), "{cfg}");
        }
    }
}
