//! Acceptance criteria. Each criterion prints one PASS or FAIL line; the
//! process exits non-zero when any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use approxfp::booth::BoothGeometry;
use approxfp::cnn::synthetic::{synthetic_split, SyntheticParams, TEST_SEED};
use approxfp::cnn::{conv2d_interleaved, evaluate_accuracy, fixture, load_cifar10, ConvLayer, DatasetDir, Engine, Tensor};
use approxfp::hw::{AreaRule, CostTable};
use approxfp::metrics::characterize_taus;
use approxfp::nsga2::{evolve, fast_nondominated_sort, permute_study, OptimizerParams};
use approxfp::{AssignmentSequence, CompressorSet, Fp32Word, MultiplierBank, MultiplierConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Accuracy of the bundled fixture with all-Exact multipliers on the first
/// 2000 images of the synthetic test split, in percent.
const PINNED_A_EXACT: f64 = 72.30;
const A_EXACT_FLOOR: f64 = 40.0;
const BENEFIT_TOLERANCE: f64 = 0.05;
const MABE_LIMIT: f64 = 4.0;
const PERMUTE_IMAGES: usize = 200;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("FP32 exactness", fp32_exactness),
        ("Booth oracle", booth_oracle),
        ("hardware table fidelity", hardware_table),
        ("error-metric properties", error_metrics),
        ("convolution oracle", convolution_oracle),
        ("end-to-end inference determinism", inference_determinism),
        ("NSGA-II correctness", nsga2_correctness),
        ("permutation study invariants", permutation_study),
        ("CLI reproducibility", cli_reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS [{}] {name}: {msg} ({secs:.1}s)", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL [{}] {name}: {msg} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn same_float(got: Fp32Word, want: f32) -> bool {
    if want.is_nan() {
        got.is_nan()
    } else {
        got.0 == want.to_bits()
    }
}

fn special_values() -> Vec<f32> {
    let base = [
        0.0f32,
        f32::INFINITY,
        f32::NAN,
        f32::from_bits(0x7F80_0001),
        f32::from_bits(1),
        f32::from_bits(2),
        f32::from_bits(0x0000_0FFF),
        f32::from_bits(0x0040_0000),
        f32::from_bits(0x007F_FFFF),
        f32::MIN_POSITIVE,
        f32::from_bits(0x0080_0001),
        f32::MAX,
        f32::from_bits(0x7F7F_FFFE),
        1.0,
        1.0 + f32::EPSILON,
        1.0 - f32::EPSILON / 2.0,
        0.5,
        2.0,
        3.0,
        0.1,
        1e-20,
        1e20,
        5.421_011e-20,
        1.844_674_4e19,
        std::f32::consts::PI,
    ];
    base.iter().flat_map(|&x| [x, -x]).collect()
}

fn fp32_exactness() -> Outcome {
    let m = approxfp::default_bank().get(MultiplierConfig::Exact);
    let mut rng = ChaCha8Rng::seed_from_u64(0xF32);
    let mut a = Vec::with_capacity(1_000_000);
    let mut b = Vec::with_capacity(1_000_000);
    while a.len() < 1_000_000 {
        let (x, y) = (f32::from_bits(rng.gen()), f32::from_bits(rng.gen()));
        if x.is_finite() && y.is_finite() {
            a.push(Fp32Word::from_f32(x));
            b.push(Fp32Word::from_f32(y));
        }
    }
    let specials = special_values();
    for &x in &specials {
        for &y in &specials {
            a.push(Fp32Word::from_f32(x));
            b.push(Fp32Word::from_f32(y));
        }
    }
    let mut out = vec![Fp32Word(0); a.len()];
    m.fp32_multiply_batch(&a, &b, &mut out);
    let mismatches = (0..a.len()).filter(|&i| !same_float(out[i], a[i].to_f32() * b[i].to_f32())).count();
    check(
        mismatches == 0,
        format!(
            "{mismatches} mismatches over 1000000 random finite pairs and {} special-value pairs",
            specials.len() * specials.len()
        ),
    )
}

fn booth_oracle() -> Outcome {
    let m = approxfp::default_bank().get(MultiplierConfig::Exact);
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let (a, b): (Vec<u64>, Vec<u64>) =
        (0..1_000_000).map(|_| (rng.gen_range(0..1u64 << 24), rng.gen_range(0..1u64 << 24))).unzip();
    let mut out = vec![0u64; a.len()];
    m.multiply_raw_batch(&a, &b, &mut out);
    let wide = (0..a.len()).filter(|&i| out[i] != a[i] * b[i]).count();

    let small = MultiplierBank::with_geometry(BoothGeometry::new(8, 8), CompressorSet::default());
    let sm = small.get(MultiplierConfig::Exact);
    let (a, b): (Vec<u64>, Vec<u64>) = (0..1u64 << 16).map(|i| (i >> 8, i & 0xFF)).unzip();
    let mut out = vec![0u64; a.len()];
    sm.multiply_raw_batch(&a, &b, &mut out);
    let narrow = (0..a.len()).filter(|&i| out[i] != a[i] * b[i]).count();
    check(wide + narrow == 0, format!("{wide} mismatches in 10^6 random 24x24, {narrow} in exhaustive 8x8"))
}

fn hardware_table() -> Outcome {
    // area um^2, power uW, delay ps, pdp pJ
    let table: [(MultiplierConfig, [f64; 4]); 9] = [
        (MultiplierConfig::Exact, [3864.60, 139.332, 11966.0, 1.667]),
        (MultiplierConfig::PMNI, [3627.59, 113.623, 11939.0, 1.357]),
        (MultiplierConfig::PMSI, [3585.19, 110.189, 11524.0, 1.270]),
        (MultiplierConfig::PMCI, [3589.29, 108.934, 11678.0, 1.272]),
        (MultiplierConfig::PMCSI, [3594.08, 108.736, 11681.0, 1.270]),
        (MultiplierConfig::NMNI, [3606.73, 115.427, 11933.0, 1.377]),
        (MultiplierConfig::NMSI, [3593.05, 109.351, 11604.0, 1.269]),
        (MultiplierConfig::NMCI, [3592.37, 109.838, 11588.0, 1.273]),
        (MultiplierConfig::NMCSI, [3603.65, 110.472, 11698.0, 1.292]),
    ];
    let benefits = [18.77, 23.96, 23.82, 23.94, 17.52, 24.02, 23.78, 22.62];
    let costs = CostTable::builtin();
    let mut problems = Vec::new();
    for (cfg, [area, power, delay, pdp]) in table {
        let c = costs.cost_of(cfg);
        if [c.area, c.power, c.delay, c.pdp] != [area, power, delay, pdp] {
            problems.push(format!("{cfg} cells differ"));
        }
    }
    let mut worst = 0.0f64;
    for (cfg, want) in MultiplierConfig::approximate().zip(benefits) {
        let got = costs.pdp_benefit(cfg).map_err(|e| e.to_string())?;
        worst = worst.max((got - want).abs());
        if (got - want).abs() > BENEFIT_TOLERANCE {
            problems.push(format!("{cfg} benefit {got:.2}% vs {want:.2}%"));
        }
    }
    let summary = format!("36 table cells checked, worst benefit deviation {worst:.2} points (tolerance {BENEFIT_TOLERANCE})");
    if problems.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; {}", problems.join(", ")))
    }
}

fn error_metrics() -> Outcome {
    let bank = approxfp::default_bank();
    let taus = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1];
    let mut problems = Vec::new();
    let mut notes = Vec::new();
    for cfg in MultiplierConfig::ALL {
        let reports = characterize_taus(bank.get(cfg), 400_000, 1, &taus).map_err(|e| e.to_string())?;
        let r = &reports[0];
        if cfg.is_exact() {
            let zero = r.error_rate == 0.0 && r.mabe == 0.0 && r.mre == 0.0 && r.rmsre == 0.0;
            if !zero || reports.iter().any(|r| r.pred != 100.0) {
                problems.push(format!("exact report not all-zero: {r:?}"));
            }
            continue;
        }
        if r.error_rate <= 0.0 {
            problems.push(format!("{cfg} ER = 0"));
        }
        if !(r.mabe.is_finite() && r.mabe < MABE_LIMIT) {
            problems.push(format!("{cfg} MABE {}", r.mabe));
        }
        if reports.windows(2).any(|w| w[1].pred < w[0].pred) {
            problems.push(format!("{cfg} PRED not monotone in tau"));
        }
        let pred = reports.iter().find(|r| r.tau == 1e-3).map_or(f64::NAN, |r| r.pred);
        notes.push(format!("{cfg} ER {:.2}% MABE {:.3} PRED(1e-3) {pred:.2}%", 100.0 * r.error_rate, r.mabe));
    }
    // logged against the published bands (MABE <= 1.7, PRED about 99.2%), not asserted
    println!("  error metrics at N=400000: {}", notes.join("; "));
    check(problems.is_empty(), if problems.is_empty() { "8 approximate configs and exact checked".into() } else { problems.join(", ") })
}

fn convolution_oracle() -> Outcome {
    let bank = approxfp::default_bank();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut mismatches = 0;
    let mut values = 0;
    for _ in 0..100 {
        let (c, h, w, k) = (rng.gen_range(1..6), rng.gen_range(3..12), rng.gen_range(3..12), rng.gen_range(1..6));
        let mut draw = |n: usize| (0..n).map(|_| rng.gen_range(-2.0f32..2.0)).collect::<Vec<_>>();
        let input = draw(c * h * w);
        let layer = ConvLayer::new(k, c, draw(k * c * 9), draw(k)).map_err(|e| e.to_string())?;
        let slots = vec![MultiplierConfig::Exact; k * 9];
        let tensor = Tensor::new((c, h, w), input.clone()).map_err(|e| e.to_string())?;
        let got = conv2d_interleaved(&tensor, &layer, &slots, bank).map_err(|e| e.to_string())?;
        let want = nested_loop_conv(&input, (c, h, w), &layer);
        values += want.len();
        mismatches += got.data().iter().zip(&want).filter(|(g, w)| g.to_bits() != w.to_bits()).count();
    }
    check(mismatches == 0, format!("{mismatches} mismatching outputs of {values} over 100 random instances"))
}

/// Valid 3x3 convolution with products and sums in platform FP32: sum over
/// channels, then taps, from zero, and the bias last.
fn nested_loop_conv(input: &[f32], (c, h, w): (usize, usize, usize), layer: &ConvLayer<f32>) -> Vec<f32> {
    let (oh, ow) = (h - 2, w - 2);
    let mut out = Vec::with_capacity(layer.kernels() * oh * ow);
    for k in 0..layer.kernels() {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = 0.0f32;
                for ch in 0..c {
                    for dy in 0..3 {
                        for dx in 0..3 {
                            acc += layer.weight(k, ch, dy * 3 + dx) * input[(ch * h + y + dy) * w + x + dx];
                        }
                    }
                }
                out.push(acc + layer.bias()[k]);
            }
        }
    }
    out
}

fn inference_determinism() -> Outcome {
    let net = fixture::network();
    let bank = approxfp::default_bank();
    let exact = AssignmentSequence::uniform(MultiplierConfig::Exact);
    let images = synthetic_split(TEST_SEED, 0, 2000, &SyntheticParams::default());
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
        pool.install(|| evaluate_accuracy(&images, &net, &exact, bank))
    };
    let first = run(1).map_err(|e| e.to_string())?;
    let second = run(1).map_err(|e| e.to_string())?;
    let threaded = run(4).map_err(|e| e.to_string())?;
    if let Some(dir) = std::env::var_os("APPROXFP_DATA_DIR") {
        let d = DatasetDir::new(dir);
        if let Ok(mut real) = load_cifar10(&d.test_path()) {
            real.truncate(2000);
            let acc = 100.0 * Engine::new(&net, &exact, bank).correct(&real) as f64 / real.len() as f64;
            println!("  dataset at {}: all-Exact accuracy {acc:.2}% on {} images", d.root().display(), real.len());
        }
    }
    let pinned = (first - PINNED_A_EXACT).abs() < 1e-9;
    check(
        pinned && first == second && first == threaded && first > A_EXACT_FLOOR,
        format!(
            "A_exact {first:.2}% (pinned {PINNED_A_EXACT:.2}%, floor {A_EXACT_FLOOR}%), rerun {second:.2}%, 4 workers {threaded:.2}% on 2000 synthetic test images"
        ),
    )
}

fn brute_force_fronts(points: &[[f64; 3]]) -> Vec<Vec<usize>> {
    let dom = |a: &[f64; 3], b: &[f64; 3]| a.iter().zip(b).all(|(x, y)| x <= y) && a != b;
    let mut left: Vec<usize> = (0..points.len()).collect();
    let mut fronts = Vec::new();
    while !left.is_empty() {
        let front: Vec<usize> =
            left.iter().copied().filter(|&i| !left.iter().any(|&j| dom(&points[j], &points[i]))).collect();
        left.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

fn nsga2_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut sort_mismatches = 0;
    for i in 0..100 {
        let n = rng.gen_range(1..=200);
        let points: Vec<[f64; 3]> = if i % 2 == 0 {
            (0..n).map(|_| [0; 3].map(|_: u8| rng.gen::<f64>())).collect()
        } else {
            (0..n).map(|_| [0; 3].map(|_: u8| rng.gen_range(0..6) as f64)).collect()
        };
        if fast_nondominated_sort(&points) != brute_force_fronts(&points) {
            sort_mismatches += 1;
        }
    }

    let table = CostTable::builtin();
    let hw = |s: &AssignmentSequence| {
        let c = table.aggregate_cost(s, AreaRule::DistinctTypes);
        [c.area, c.total_pdp, 0.0]
    };
    let mut p = OptimizerParams::top_k(2).map_err(|e| e.to_string())?;
    p.population = 50;
    p.generations = 40;
    let hw_run = evolve(&p, hw).map_err(|e| e.to_string())?;
    let cheapest = p
        .allowed
        .iter()
        .copied()
        .min_by(|a, b| table.cost_of(*a).pdp.total_cmp(&table.cost_of(*b).pdp))
        .expect("two allowed types");
    let found = hw_run.front.members.iter().any(|m| m.genome == AssignmentSequence::uniform(cheapest));

    // a position-dependent third objective keeps a wide front
    let mixed = |s: &AssignmentSequence| {
        let c = table.aggregate_cost(s, AreaRule::PerSlot);
        let pos: usize = s.slots().iter().enumerate().map(|(i, c)| c.index() * (i % 11)).sum();
        [c.area, c.total_pdp, pos as f64]
    };
    let mut q = OptimizerParams::top_k(5).map_err(|e| e.to_string())?;
    q.population = 40;
    q.generations = 20;
    q.order_sensitive = true;
    let mixed_run = evolve(&q, mixed).map_err(|e| e.to_string())?;
    let sound = hw_run.front.is_sound() && mixed_run.front.is_sound();
    check(
        sort_mismatches == 0 && found && sound,
        format!(
            "{sort_mismatches}/100 sort mismatches; fronts sound: {sound} ({} and {} members); uniform {cheapest} on the K=2 hardware front: {found}",
            hw_run.front.len(),
            mixed_run.front.len()
        ),
    )
}

fn permutation_study() -> Outcome {
    let net = fixture::network();
    let bank = approxfp::default_bank();
    let table = CostTable::builtin();
    let images = synthetic_split(TEST_SEED, 0, PERMUTE_IMAGES, &SyntheticParams::default());
    let accuracy = |s: &AssignmentSequence| 100.0 * Engine::new(&net, s, bank).correct(&images) as f64 / images.len() as f64;
    let exact = accuracy(&AssignmentSequence::uniform(MultiplierConfig::Exact));
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut problems = Vec::new();
    let mut above = 0;
    let mut total = 0;
    for k in [3, 5, 8] {
        let allowed = &MultiplierConfig::ACCURACY_RANKING[..k];
        let source = AssignmentSequence::new((0..198).map(|_| allowed[rng.gen_range(0..k)]).collect())
            .map_err(|e| e.to_string())?;
        let study = permute_study(&source, 10, k as u64, accuracy);
        if study.variants.len() != 10 {
            problems.push(format!("K={k}: {} variants", study.variants.len()));
        }
        for (v, acc) in &study.variants {
            let same_cost = [AreaRule::DistinctTypes, AreaRule::PerSlot]
                .iter()
                .all(|&r| table.aggregate_cost(v, r) == table.aggregate_cost(&source, r));
            if !v.is_permutation_of(&source) || !same_cost {
                problems.push(format!("K={k}: variant not multiset-equal or cost differs"));
            }
            above += usize::from(*acc > exact);
            total += 1;
        }
        let accs: Vec<String> = study.variants.iter().map(|(_, a)| format!("{a:.1}")).collect();
        println!("  K={k}: accuracies [{}], max {:.1}%", accs.join(", "), study.max().unwrap_or(f64::NAN));
    }
    println!("  observation: {above}/{total} permuted sequences beat all-Exact ({exact:.1}%) on {PERMUTE_IMAGES} images");
    check(
        problems.is_empty(),
        if problems.is_empty() { format!("{total} variants multiset-equal with identical cost") } else { problems.join(", ") },
    )
}

fn read_output(path: &Path) -> Vec<(String, Vec<u8>)> {
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)
            .expect("output dir")
            .map(|e| e.expect("dir entry").path())
            .collect();
        files.sort();
        files.iter().flat_map(|f| read_output(f)).collect()
    } else {
        vec![(path.display().to_string(), std::fs::read(path).unwrap_or_default())]
    }
}

fn cli_reproducibility() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let seq = dir.path().join("seq.json");
    let ranking = MultiplierConfig::ACCURACY_RANKING;
    let source = AssignmentSequence::new((0..198).map(|i| ranking[i % 3]).collect()).map_err(|e| e.to_string())?;
    std::fs::write(&seq, source.to_json()).map_err(|e| e.to_string())?;
    let seq = seq.to_str().expect("utf-8 path");
    let runs: [(&str, Vec<&str>); 8] = [
        ("characterize", vec!["characterize", "--all", "--n", "3000", "--tau", "0.001,0.01"]),
        ("costs", vec!["costs", "--format", "json"]),
        ("evaluate", vec!["evaluate", "--config", "exact", "--config", "nmsi", "--n", "20"]),
        (
            "optimize",
            vec!["optimize", "--k", "2", "--pop", "6", "--gens", "2", "--eval-subset", "8", "--final-n", "8"],
        ),
        ("permute", vec!["permute", "--seq", seq, "--n", "3", "--images", "8"]),
        ("train", vec!["train", "--synthetic-n", "64", "--epochs", "1", "--batch", "16"]),
        ("dump-placement", vec!["dump-placement", "--all"]),
        ("synth-data", vec!["synth-data", "--per-batch", "4", "--test", "4"]),
    ];
    let mut problems = Vec::new();
    for (name, args) in &runs {
        let out = dir.path().join(format!("{name}.out"));
        let mut seen = Vec::new();
        for threads in ["1", "2"] {
            let _ = std::fs::remove_dir_all(&out);
            let _ = std::fs::remove_file(&out);
            let status = Command::new(env!("CARGO_BIN_EXE_approxfp"))
                .args(args)
                .args(["--seed", "3", "--threads", threads, "--out"])
                .arg(&out)
                .env_remove("APPROXFP_DATA_DIR")
                .output()
                .map_err(|e| e.to_string())?;
            if !status.status.success() {
                problems.push(format!("{name} failed: {}", String::from_utf8_lossy(&status.stderr).trim()));
                break;
            }
            let mut files = read_output(&out);
            let manifest = dir.path().join(format!("{name}.out.manifest.json"));
            files.extend(read_output(&manifest));
            seen.push(files);
        }
        if seen.len() == 2 && seen[0] != seen[1] {
            problems.push(format!("{name} output differs between runs"));
        }
        if seen.first().is_some_and(|f| f.iter().any(|(_, b)| b.is_empty())) {
            problems.push(format!("{name} wrote an empty file"));
        }
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            format!("{} commands byte-identical across two runs (1 and 2 workers) with manifests", runs.len())
        } else {
            problems.join("; ")
        },
    )
}
