use std::io::Write;

use anyhow::{bail, Context, Result};
use approxfp::cnn::cifar::{load_cifar10, DatasetDir, Sample, TRAIN_FILES};
use approxfp::cnn::synthetic::{synthetic_split, write_synthetic_dataset, SyntheticParams, TEST_SEED, TRAIN_SEED};
use approxfp::cnn::{fixture, train_reference, Engine, TrainParams};
use approxfp::hw::{AreaRule, CostTable};
use approxfp::metrics::characterize_taus;
use approxfp::nsga2::{evolve, pick_candidate, permute_study, OptimizerParams};
use approxfp::{AssignmentSequence, CompressorSet, CompressorTable, MultiplierBank, MultiplierConfig, Network};
use serde::Serialize;
use serde_json::json;

use crate::manifest::{FileDigest, RunManifest};
use crate::{
    CharacterizeArgs, Cli, Command, Common, ConfigSelection, CostsArgs, DumpPlacementArgs, EvaluateArgs, Format,
    NetworkArgs, OptimizeArgs, PermuteArgs, SynthDataArgs, TrainArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Characterize(a) => characterize(c, a),
        Command::Costs(a) => costs(c, a),
        Command::Evaluate(a) => evaluate(c, a),
        Command::Optimize(a) => optimize(c, a),
        Command::Permute(a) => permute(c, a),
        Command::Train(a) => train(c, a),
        Command::DumpPlacement(a) => dump_placement(c, a),
        Command::SynthData(a) => synth_data(c, a),
    }
}

fn manifest_for<A: Serialize>(name: &str, common: &Common, args: &A) -> Result<RunManifest> {
    Ok(RunManifest::new(name, json!({ "common": common, "command": serde_json::to_value(args)? })))
}

fn render<T: Serialize>(rows: &[T], format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => {
            let mut bytes = serde_json::to_vec_pretty(rows)?;
            bytes.push(b'\n');
            Ok(bytes)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r)?;
            }
            Ok(w.into_inner().context("flushing csv")?)
        }
    }
}

/// Writes the command output to `--out` (plus manifest) or stdout.
fn finish(common: &Common, mut manifest: RunManifest, bytes: &[u8]) -> Result<()> {
    match &common.out {
        Some(path) => {
            std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
            manifest.outputs.push(FileDigest::of_bytes(path.display().to_string(), bytes));
            manifest.write(path)?;
        }
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn selected(sel: &ConfigSelection) -> Vec<MultiplierConfig> {
    if sel.all || sel.configs.is_empty() {
        MultiplierConfig::ALL.to_vec()
    } else {
        sel.configs.clone()
    }
}

fn load_network(args: &NetworkArgs, manifest: &mut RunManifest) -> Result<Network> {
    match &args.weights {
        Some(path) => {
            manifest.inputs.push(FileDigest::of_file(path)?);
            Network::load(path).with_context(|| format!("loading weights {}", path.display()))
        }
        None => {
            manifest.inputs.push(FileDigest::of_bytes("builtin:fixture", fixture::FIXTURE_BYTES));
            Ok(fixture::network())
        }
    }
}

/// The first `n` test images of the dataset directory, or of the synthetic
/// stand-in when no directory is configured.
fn test_images(common: &Common, n: usize, manifest: &mut RunManifest) -> Result<Vec<Sample>> {
    if n == 0 {
        bail!("image count must be positive");
    }
    match &common.data {
        Some(dir) => {
            let path = DatasetDir::new(dir).test_path();
            manifest.inputs.push(FileDigest::of_file(&path)?);
            let mut samples = load_cifar10(&path)?;
            if samples.len() < n {
                bail!("{} holds {} images, {n} requested", path.display(), samples.len());
            }
            samples.truncate(n);
            Ok(samples)
        }
        None => {
            eprintln!("note: no dataset directory; using the synthetic stand-in test split");
            Ok(synthetic_split(TEST_SEED, 0, n, &SyntheticParams::default()))
        }
    }
}

fn accuracy(engine: &Engine<'_>, samples: &[Sample]) -> f64 {
    100.0 * engine.correct(samples) as f64 / samples.len() as f64
}

fn join_slots(seq: &AssignmentSequence) -> String {
    seq.slots().iter().map(|c| c.id()).collect::<Vec<_>>().join(";")
}

#[derive(Serialize)]
struct ErrorRow {
    config: MultiplierConfig,
    error_rate_pct: f64,
    mabe: f64,
    mre: f64,
    rmsre: f64,
    pred_pct: f64,
    tau: f64,
    n: usize,
    n_relative: usize,
}

fn characterize(common: &Common, a: &CharacterizeArgs) -> Result<()> {
    let mut manifest = manifest_for("characterize", common, a)?;
    let mut cells = CompressorSet::default();
    if let Some(p) = &a.compressors.positive_table {
        manifest.inputs.push(FileDigest::of_file(p)?);
        cells.positive = CompressorTable::load(p)?;
    }
    if let Some(p) = &a.compressors.negative_table {
        manifest.inputs.push(FileDigest::of_file(p)?);
        cells.negative = CompressorTable::load(p)?;
    }
    let cells = CompressorSet::new(cells.positive, cells.negative)?;
    let bank = MultiplierBank::new(cells);
    let mut rows = Vec::new();
    for cfg in selected(&a.select) {
        for r in characterize_taus(bank.get(cfg), a.n, common.seed, &a.tau)? {
            rows.push(ErrorRow {
                config: r.config,
                error_rate_pct: 100.0 * r.error_rate,
                mabe: r.mabe,
                mre: r.mre,
                rmsre: r.rmsre,
                pred_pct: r.pred,
                tau: r.tau,
                n: r.n_samples,
                n_relative: r.n_relative,
            });
        }
    }
    finish(common, manifest, &render(&rows, common.format.unwrap_or(Format::Csv))?)
}

#[derive(Serialize)]
struct CostRow {
    config: MultiplierConfig,
    area_um2: f64,
    power_uw: f64,
    delay_ps: f64,
    pdp_pj: f64,
    pdp_benefit_pct: Option<f64>,
}

fn costs(common: &Common, a: &CostsArgs) -> Result<()> {
    let mut manifest = manifest_for("costs", common, a)?;
    let table = match &a.table {
        Some(p) => {
            manifest.inputs.push(FileDigest::of_file(p)?);
            CostTable::load(p)?
        }
        None => CostTable::builtin(),
    };
    let rows: Vec<CostRow> = MultiplierConfig::ALL
        .iter()
        .map(|&config| {
            let c = table.cost_of(config);
            CostRow {
                config,
                area_um2: c.area,
                power_uw: c.power,
                delay_ps: c.delay,
                pdp_pj: c.pdp,
                pdp_benefit_pct: table.pdp_benefit(config).ok(),
            }
        })
        .collect();
    finish(common, manifest, &render(&rows, common.format.unwrap_or(Format::Csv))?)
}

#[derive(Serialize)]
struct AccuracyRow {
    sequence: String,
    images: usize,
    accuracy_pct: f64,
    total_pdp: f64,
    area: f64,
}

fn evaluate(common: &Common, a: &EvaluateArgs) -> Result<()> {
    let mut manifest = manifest_for("evaluate", common, a)?;
    let net = load_network(&a.network, &mut manifest)?;
    let mut sequences: Vec<(String, AssignmentSequence)> = Vec::new();
    if let Some(path) = &a.seq {
        manifest.inputs.push(FileDigest::of_file(path)?);
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        sequences.push((name, AssignmentSequence::load(path)?));
    } else if a.select.all || !a.select.configs.is_empty() {
        for cfg in selected(&a.select) {
            sequences.push((cfg.id().to_owned(), AssignmentSequence::uniform(cfg)));
        }
    } else {
        sequences.push((MultiplierConfig::Exact.id().to_owned(), AssignmentSequence::uniform(MultiplierConfig::Exact)));
    }
    let samples = test_images(common, a.n, &mut manifest)?;
    let bank = approxfp::default_bank();
    let table = CostTable::builtin();
    let rule: AreaRule = a.area_rule.into();
    let rows: Vec<AccuracyRow> = sequences
        .iter()
        .map(|(name, seq)| {
            let cost = table.aggregate_cost(seq, rule);
            AccuracyRow {
                sequence: name.clone(),
                images: samples.len(),
                accuracy_pct: accuracy(&Engine::new(&net, seq, bank), &samples),
                total_pdp: cost.total_pdp,
                area: cost.area,
            }
        })
        .collect();
    finish(common, manifest, &render(&rows, common.format.unwrap_or(Format::Csv))?)
}

#[derive(Serialize)]
struct FrontRow {
    slots: Vec<MultiplierConfig>,
    area: f64,
    pdp: f64,
    accuracy_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy_loss_full: Option<f64>,
}

#[derive(Serialize)]
struct FrontCsvRow {
    slots: String,
    area: f64,
    pdp: f64,
    accuracy_loss: f64,
    accuracy_loss_full: Option<f64>,
}

fn optimize(common: &Common, a: &OptimizeArgs) -> Result<()> {
    let mut manifest = manifest_for("optimize", common, a)?;
    let mut params = OptimizerParams::top_k(a.k)?;
    params.population = a.pop;
    params.generations = a.gens;
    params.crossover_rate = a.crossover;
    if let Some(m) = a.mutation {
        params.mutation_rate = m;
    }
    params.seed = common.seed;
    params.eval_subset = a.eval_subset;
    params.order_sensitive = a.order_sensitive;

    let table = CostTable::builtin();
    let rule: AreaRule = a.area_rule.into();
    let bank = approxfp::default_bank();
    let exact = AssignmentSequence::uniform(MultiplierConfig::Exact);
    let baseline_pdp = table.aggregate_cost(&exact, rule).total_pdp;

    let outcome = if a.hw_only {
        evolve(&params, |s: &AssignmentSequence| {
            let c = table.aggregate_cost(s, rule);
            [c.area, c.total_pdp, 0.0]
        })?
    } else {
        let net = load_network(&a.network, &mut manifest)?;
        let samples = test_images(common, a.eval_subset.max(a.final_n), &mut manifest)?;
        let subset = &samples[..a.eval_subset.min(samples.len())];
        if subset.is_empty() {
            bail!("evaluation subset is empty");
        }
        let a_exact = accuracy(&Engine::new(&net, &exact, bank), subset);
        let mut outcome = evolve(&params, |s: &AssignmentSequence| {
            let c = table.aggregate_cost(s, rule);
            [c.area, c.total_pdp, a_exact - accuracy(&Engine::new(&net, s, bank), subset)]
        })?;
        if a.final_n > 0 {
            let full = &samples[..a.final_n];
            let a_full = accuracy(&Engine::new(&net, &exact, bank), full);
            eprintln!("A_exact over {} images: {a_full:.2}%", full.len());
            let losses: Vec<f64> = outcome
                .front
                .members
                .iter()
                .map(|m| a_full - accuracy(&Engine::new(&net, &m.genome, bank), full))
                .collect();
            let rows: Vec<FrontRow> = outcome
                .front
                .members
                .iter()
                .zip(&losses)
                .map(|(m, &l)| front_row(m, Some(l)))
                .collect();
            report_pick(&outcome.front, baseline_pdp);
            return finish(common, manifest, &render_front(rows, common.format.unwrap_or(Format::Json))?);
        }
        outcome.front.members.sort_by(|x, y| x.objectives.partial_cmp(&y.objectives).expect("finite"));
        outcome
    };
    report_pick(&outcome.front, baseline_pdp);
    let rows = outcome.front.members.iter().map(|m| front_row(m, None)).collect();
    finish(common, manifest, &render_front(rows, common.format.unwrap_or(Format::Json))?)
}

fn front_row(m: &approxfp::Individual, full: Option<f64>) -> FrontRow {
    FrontRow {
        slots: m.genome.slots().to_vec(),
        area: m.area(),
        pdp: m.pdp(),
        accuracy_loss: m.accuracy_loss(),
        accuracy_loss_full: full,
    }
}

fn render_front(mut rows: Vec<FrontRow>, format: Format) -> Result<Vec<u8>> {
    rows.sort_by(|x, y| {
        (x.area, x.pdp, x.accuracy_loss).partial_cmp(&(y.area, y.pdp, y.accuracy_loss)).expect("finite objectives")
    });
    match format {
        Format::Json => render(&rows, format),
        Format::Csv => {
            let flat: Vec<FrontCsvRow> = rows
                .into_iter()
                .map(|r| FrontCsvRow {
                    slots: r.slots.iter().map(|c| c.id()).collect::<Vec<_>>().join(";"),
                    area: r.area,
                    pdp: r.pdp,
                    accuracy_loss: r.accuracy_loss,
                    accuracy_loss_full: r.accuracy_loss_full,
                })
                .collect();
            render(&flat, format)
        }
    }
}

fn report_pick(front: &approxfp::Front, baseline_pdp: f64) {
    eprintln!("front: {} members", front.len());
    if let Ok(pick) = pick_candidate(front, baseline_pdp) {
        eprintln!(
            "picked: area {:.3}, pdp {:.3} (exact {baseline_pdp:.3}), accuracy loss {:.3}",
            pick.area(),
            pick.pdp(),
            pick.accuracy_loss()
        );
    }
}

#[derive(Serialize)]
struct PermuteRow {
    variant: usize,
    accuracy_pct: f64,
    total_pdp: f64,
    area: f64,
    slots: String,
}

fn permute(common: &Common, a: &PermuteArgs) -> Result<()> {
    let mut manifest = manifest_for("permute", common, a)?;
    manifest.inputs.push(FileDigest::of_file(&a.seq)?);
    let seq = AssignmentSequence::load(&a.seq)?;
    let net = load_network(&a.network, &mut manifest)?;
    let samples = test_images(common, a.images, &mut manifest)?;
    let bank = approxfp::default_bank();
    let table = CostTable::builtin();
    let rule: AreaRule = a.area_rule.into();
    let study = permute_study(&seq, a.n, common.seed, |v: &AssignmentSequence| {
        accuracy(&Engine::new(&net, v, bank), &samples)
    });
    let rows: Vec<PermuteRow> = study
        .variants
        .iter()
        .enumerate()
        .map(|(i, (v, acc))| {
            let cost = table.aggregate_cost(v, rule);
            PermuteRow { variant: i, accuracy_pct: *acc, total_pdp: cost.total_pdp, area: cost.area, slots: join_slots(v) }
        })
        .collect();
    if let Some(max) = study.max() {
        eprintln!("max accuracy over {} variants: {max:.2}%", rows.len());
    }
    finish(common, manifest, &render(&rows, common.format.unwrap_or(Format::Csv))?)
}

fn train(common: &Common, a: &TrainArgs) -> Result<()> {
    if common.out.is_none() {
        bail!("train needs --out for the weight file");
    }
    let mut manifest = manifest_for("train", common, a)?;
    let mut samples = match &common.data {
        Some(dir) => {
            let d = DatasetDir::new(dir);
            for name in TRAIN_FILES {
                let p = d.root().join(name);
                if p.is_file() {
                    manifest.inputs.push(FileDigest::of_file(&p)?);
                }
            }
            d.load_train()?
        }
        None => {
            eprintln!("note: no dataset directory; training on {} synthetic images", a.synthetic_n);
            synthetic_split(TRAIN_SEED, 0, a.synthetic_n, &SyntheticParams::default())
        }
    };
    if let Some(limit) = a.limit {
        samples.truncate(limit);
    }
    let params = TrainParams {
        epochs: a.epochs,
        batch_size: a.batch,
        learning_rate: a.lr,
        momentum: a.momentum,
        lr_decay: a.lr_decay,
        seed: common.seed,
    };
    let report = train_reference::<f32>(&samples, &params)?;
    eprintln!("initial loss {:.4}", report.initial_loss);
    for (e, l) in report.epoch_losses.iter().enumerate() {
        eprintln!("epoch {e}: mean loss {l:.4}");
    }
    finish(common, manifest, &report.net.to_bytes())
}

#[derive(Serialize)]
struct PlacementRow {
    config: MultiplierConfig,
    stage: usize,
    column: usize,
    kind: char,
    cells: usize,
}

fn dump_placement(common: &Common, a: &DumpPlacementArgs) -> Result<()> {
    let manifest = manifest_for("dump-placement", common, a)?;
    let bank = approxfp::default_bank();
    let counts = bank.tree().cell_counts();
    let mut rows = Vec::new();
    for cfg in selected(&a.select) {
        for (stage, cols) in bank.tree().placement_map(cfg).iter().enumerate() {
            for (column, kind) in cols.iter().enumerate() {
                if let Some(kind) = kind {
                    rows.push(PlacementRow { config: cfg, stage, column, kind: kind.symbol(), cells: counts[stage][column] });
                }
            }
        }
    }
    finish(common, manifest, &render(&rows, common.format.unwrap_or(Format::Csv))?)
}

fn synth_data(common: &Common, a: &SynthDataArgs) -> Result<()> {
    let Some(dir) = &common.out else {
        bail!("synth-data needs --out for the dataset directory");
    };
    let mut manifest = manifest_for("synth-data", common, a)?;
    write_synthetic_dataset(dir, a.per_batch, a.test, &SyntheticParams::default())?;
    let d = DatasetDir::new(dir);
    for name in TRAIN_FILES {
        manifest.outputs.push(FileDigest::of_file(&d.root().join(name))?);
    }
    manifest.outputs.push(FileDigest::of_file(&d.test_path())?);
    manifest.write(dir)?;
    Ok(())
}
