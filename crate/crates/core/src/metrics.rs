//! Error characterization of a multiplier against exact IEEE-754 products.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::booth::{Multiplier, MultiplierConfig};
use crate::error::{Error, Result};
use crate::fp32::{fp32_multiply, Fp32Word, IntegerMantissa};

/// Number of sample pairs handled per work unit. Partial sums are formed per
/// chunk and combined in chunk order, so results do not depend on the
/// number of worker threads.
const CHUNK: usize = 4096;

/// Summary statistics for one configuration over one operand stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub config: MultiplierConfig,
    pub n_samples: usize,
    /// Samples contributing to the relative metrics.
    pub n_relative: usize,
    /// Samples whose exact product is zero, so no relative error exists.
    pub n_zero_exact: usize,
    /// Samples whose exact product overflowed to infinity.
    pub n_inf_exact: usize,
    /// Fraction of samples whose result bits differ from the exact result.
    pub error_rate: f64,
    /// Sum of per-sample Hamming distances.
    pub hamming_total: u64,
    /// Mean Hamming distance in bits.
    pub mabe: f64,
    /// Mean of `(exact - approx) / exact`.
    pub mre: f64,
    /// Root mean square of `(exact - approx) / exact`.
    pub rmsre: f64,
    /// Percentage of relative samples with `|relative error| <= tau`.
    pub pred: f64,
    pub tau: f64,
}

impl ErrorReport {
    pub const CSV_HEADER: &'static str = "config,error_rate_pct,mabe,mre,rmsre,pred_pct,tau,n,n_relative";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.3},{:.3},{:.6e},{:.6e},{:.2},{},{},{}",
            self.config,
            self.error_rate * 100.0,
            self.mabe,
            self.mre,
            self.rmsre,
            self.pred,
            self.tau,
            self.n_samples,
            self.n_relative
        )
    }
}

/// Bit positions in which two words differ.
pub fn hamming_distance(a: Fp32Word, b: Fp32Word) -> u32 {
    (a.0 ^ b.0).count_ones()
}

/// A finite operand drawn uniformly over bit patterns (NaN and infinity
/// patterns are redrawn).
pub fn sample_finite(rng: &mut impl Rng) -> Fp32Word {
    loop {
        let w = Fp32Word(rng.gen());
        if w.is_finite() {
            return w;
        }
    }
}

/// Deterministic operand stream for a seed.
pub fn operand_pairs(n: usize, seed: u64) -> (Vec<Fp32Word>, Vec<Fp32Word>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (sample_finite(&mut rng), sample_finite(&mut rng))).unzip()
}

#[derive(Default, Clone)]
struct Partial {
    differing: usize,
    hamming: u64,
    n_relative: usize,
    n_zero: usize,
    n_inf: usize,
    sum_rel: f64,
    sum_sq_rel: f64,
    within: Vec<usize>,
}

fn chunk_stats(m: &Multiplier, a: &[Fp32Word], b: &[Fp32Word], taus: &[f64]) -> Partial {
    let mut approx = vec![Fp32Word::ZERO; a.len()];
    m.fp32_multiply_batch(a, b, &mut approx);
    let mut p = Partial { within: vec![0; taus.len()], ..Default::default() };
    for ((&x, &y), &got) in a.iter().zip(b).zip(&approx) {
        let exact = fp32_multiply(x, y, &IntegerMantissa);
        let h = hamming_distance(exact, got);
        p.hamming += h as u64;
        p.differing += usize::from(h != 0);
        let e = exact.to_f32() as f64;
        if e == 0.0 {
            p.n_zero += 1;
            continue;
        }
        if !e.is_finite() {
            p.n_inf += 1;
            continue;
        }
        let rel = (e - got.to_f32() as f64) / e;
        p.n_relative += 1;
        // An approximate overflow next to an exact finite result has an
        // infinite relative error: it counts against PRED and the means.
        p.sum_rel += rel;
        p.sum_sq_rel += rel * rel;
        for (w, &tau) in p.within.iter_mut().zip(taus) {
            *w += usize::from(rel.abs() <= tau);
        }
    }
    p
}

/// Characterizes `m` over `n` seeded operand pairs, once per tolerance.
pub fn characterize_taus(m: &Multiplier, n: usize, seed: u64, taus: &[f64]) -> Result<Vec<ErrorReport>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    if taus.iter().any(|t| t.is_nan() || *t < 0.0) {
        return Err(Error::InvalidArgument("tolerance must be non-negative".into()));
    }
    let (a, b) = operand_pairs(n, seed);
    let partials: Vec<Partial> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(ca, cb)| chunk_stats(m, ca, cb, taus))
        .collect();
    let mut total = Partial { within: vec![0; taus.len()], ..Default::default() };
    for p in &partials {
        total.differing += p.differing;
        total.hamming += p.hamming;
        total.n_relative += p.n_relative;
        total.n_zero += p.n_zero;
        total.n_inf += p.n_inf;
        total.sum_rel += p.sum_rel;
        total.sum_sq_rel += p.sum_sq_rel;
        for (t, w) in total.within.iter_mut().zip(&p.within) {
            *t += w;
        }
    }
    let rel_n = total.n_relative.max(1) as f64;
    Ok(taus
        .iter()
        .zip(&total.within)
        .map(|(&tau, &within)| ErrorReport {
            config: m.config(),
            n_samples: n,
            n_relative: total.n_relative,
            n_zero_exact: total.n_zero,
            n_inf_exact: total.n_inf,
            error_rate: total.differing as f64 / n as f64,
            hamming_total: total.hamming,
            mabe: total.hamming as f64 / n as f64,
            mre: total.sum_rel / rel_n,
            rmsre: (total.sum_sq_rel / rel_n).sqrt(),
            pred: if total.n_relative == 0 { 100.0 } else { 100.0 * within as f64 / rel_n },
            tau,
        })
        .collect())
}

pub fn characterize(m: &Multiplier, n: usize, seed: u64, tau: f64) -> Result<ErrorReport> {
    Ok(characterize_taus(m, n, seed, &[tau])?.remove(0))
}
