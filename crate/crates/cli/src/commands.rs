use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use caw_core::anonymization::{anonymize_aw, walk_shape, AnonymizedWalk, IcawTable};
use caw_core::data_io::{read_split_manifest, write_edge_list, write_split_manifest, Dataset, DatasetSpec, EventStream, Format};
use caw_core::encoder::{Aggregation, CawModel, EncoderConfig, EncoderError, LinkQuery, TimeScale};
use caw_core::evaluation::{
    chronological_split, evaluate, inductive_mask, motif_table, sample_negatives, train as fit, EvalError, Mode, Part, Split, TrainConfig,
    TrainSetup,
};
use caw_core::profiling::{iteration_profile, runtime_profile};
use caw_core::walk_sampler::{Walk, WalkSet};
use caw_core::{Execution, NodeId, SamplerConfig, WalkSampler};
use serde::{Deserialize, Serialize};

use crate::presets::Preset;
use crate::report::{opt, Table};
use crate::{BenchArgs, DataArgs, Failure, IngestArgs, MotifArgs, SampleArgs, SamplerArgs, SplitArgs, TrainArgs};

/// Resolved configuration of a training run; stored in every output file
/// and in the checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainRun {
    pub dataset: String,
    pub format: Option<String>,
    pub seed: u64,
    pub preset: Option<Preset>,
    pub sampler: SamplerConfig,
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub mode: Mode,
    pub r_train: f64,
    pub r_val: f64,
    pub mask_fraction: f64,
    pub out: PathBuf,
}

fn load_dataset(data: &DataArgs, seed: u64) -> Result<Dataset, Failure> {
    let format = data
        .format
        .as_deref()
        .map(str::parse::<Format>)
        .transpose()
        .map_err(|e| Failure::input("dataset format", e))?;
    let spec = DatasetSpec::parse(&data.dataset, format).map_err(|e| Failure::input("load dataset", e))?;
    let ds = spec.load(seed).map_err(|e| Failure::input("load dataset", e))?;
    if ds.stream.is_empty() {
        return Err(Failure::Input(format!("load dataset: {} holds no events", data.dataset)));
    }
    Ok(ds)
}

fn resolve_sampler(args: &SamplerArgs, stream: &EventStream, seed: u64) -> Result<SamplerConfig, Failure> {
    let grid = args.preset.map(Preset::grid);
    let tree_walks = args.tree.as_ref().map(|t| t.iter().product::<usize>());
    let walks = args.walks.or(tree_walks).unwrap_or(if grid.is_some() { 64 } else { 32 });
    let length = args
        .length
        .or_else(|| args.tree.as_ref().map(Vec::len))
        .or(grid.as_ref().map(|g| g.default_length))
        .unwrap_or(2);
    let alpha = match (args.alpha, &grid) {
        (Some(a), _) => a,
        (None, Some(g)) => g.default_alpha,
        (None, None) => stream.stats().and_then(|s| s.tau).unwrap_or(1.0),
    };
    let mut cfg = SamplerConfig::new(walks, length, alpha, seed);
    if let Some(tree) = &args.tree {
        cfg = cfg.with_branching(tree.clone());
    }
    cfg.validate().map_err(|e| Failure::input("sampler config", e))?;
    Ok(cfg)
}

fn make_split(stream: &EventStream, args: &SplitArgs, seed: u64) -> Result<Split, Failure> {
    let split = chronological_split(&stream.events, args.r_train, args.r_val).map_err(|e| Failure::input("split", e))?;
    match Mode::from(args.mode) {
        Mode::Transductive => Ok(split),
        Mode::Inductive => inductive_mask(&split, &stream.events, stream.n_nodes, args.mask_fraction, seed).map_err(|e| Failure::input("split", e)),
    }
}

fn eval_failure(stage: &str, e: EvalError) -> Failure {
    match e {
        EvalError::NonFiniteLoss { .. } | EvalError::Graph(_) => Failure::internal(stage, e),
        EvalError::Encoder(EncoderError::Tensor(_)) => Failure::internal(stage, e),
        _ => Failure::input(stage, e),
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::input(&format!("create {}", dir.display()), e))
}

fn write_file(path: &Path, f: impl FnOnce(&mut File) -> std::io::Result<()>) -> Result<(), Failure> {
    let mut file = File::create(path).map_err(|e| Failure::internal(&format!("create {}", path.display()), e))?;
    f(&mut file).map_err(|e| Failure::internal(&format!("write {}", path.display()), e))
}

pub fn ingest(args: IngestArgs) -> Result<(), Failure> {
    let ds = load_dataset(&args.data, args.seed)?;
    let s = &ds.stream;
    let split = make_split(s, &args.split, args.seed)?;
    let stats = s.stats().expect("non-empty stream");
    #[derive(Serialize)]
    struct IngestRun<'a> {
        dataset: &'a str,
        format: Option<&'a str>,
        seed: u64,
        mode: Mode,
        r_train: f64,
        r_val: f64,
        mask_fraction: f64,
        out: Option<&'a Path>,
    }
    let run = IngestRun {
        dataset: &args.data.dataset,
        format: args.data.format.as_deref(),
        seed: args.seed,
        mode: args.split.mode.into(),
        r_train: args.split.r_train,
        r_val: args.split.r_val,
        mask_fraction: args.split.mask_fraction,
        out: args.out.as_deref(),
    };
    if let Some(dir) = &args.out {
        create_dir(dir)?;
    }
    let mut t = Table::create(args.out.as_ref().map(|d| d.join("stats.tsv")).as_deref(), "ingest", &run)?;
    t.row(["key", "value"])?;
    t.row(["nodes".to_string(), stats.n_nodes.to_string()])?;
    t.row(["events".to_string(), stats.n_events.to_string()])?;
    t.row(["attr_dim".to_string(), s.attr_dim.to_string()])?;
    t.row(["time_span".to_string(), (stats.t_max - stats.t_min).to_string()])?;
    t.row(["time_offset".to_string(), s.time_offset.to_string()])?;
    t.row(["tau".to_string(), opt(stats.tau)])?;
    t.row(["reordered_rows".to_string(), s.warnings.reordered.to_string()])?;
    t.row(["self_loops_dropped".to_string(), s.warnings.self_loops.to_string()])?;
    t.row(["train_events".to_string(), split.train_indices(&s.events).len().to_string()])?;
    t.row(["val_events".to_string(), split.val.len().to_string()])?;
    t.row(["test_events".to_string(), split.test.len().to_string()])?;
    t.row(["masked_nodes".to_string(), split.masked.len().to_string()])?;
    t.finish()?;
    if let Some(dir) = &args.out {
        let header = format!("# caw ingest\n# config {}\n", serde_json::to_string(&run).expect("plain config"));
        write_file(&dir.join("events.txt"), |f| {
            f.write_all(header.as_bytes())?;
            write_edge_list(s, f)
        })?;
        write_file(&dir.join("split.manifest"), |f| write_split_manifest(&split, f))?;
    }
    Ok(())
}

pub fn train(args: TrainArgs) -> Result<(), Failure> {
    let ds = load_dataset(&args.data, args.seed)?;
    let s = &ds.stream;
    let sampler = resolve_sampler(&args.sampler, s, args.seed)?;
    let split = make_split(s, &args.split, args.seed)?;
    let mut enc = EncoderConfig::new(sampler.length).with_dims(args.dims);
    enc.agg = args.agg.into();
    enc.identity = args.identity.into();
    enc.cell = args.cell.into();
    enc.dropout = args.dropout;
    enc.d_attr = s.attr_dim;
    enc.validate().map_err(|e| Failure::input("encoder config", e))?;
    let tc = TrainConfig {
        batch_size: args.batch,
        lr: args.lr,
        max_epochs: args.epochs,
        patience: args.patience,
        seed: args.seed,
        restore: args.restore.into(),
        resample: true,
        exec: if args.sequential { Execution::Sequential } else { Execution::Parallel },
    };
    let run = TrainRun {
        dataset: args.data.dataset.clone(),
        format: args.data.format.clone(),
        seed: args.seed,
        preset: args.sampler.preset,
        sampler: sampler.clone(),
        encoder: enc.clone(),
        train: tc.clone(),
        mode: args.split.mode.into(),
        r_train: args.split.r_train,
        r_val: args.split.r_val,
        mask_fraction: args.split.mask_fraction,
        out: args.out.clone(),
    };
    create_dir(&args.out)?;

    let mut model = CawModel::new(enc, &TimeScale::from_times(&s.times()), args.seed).map_err(|e| Failure::input("encoder config", e))?;
    let setup = TrainSetup {
        events: &s.events,
        n_nodes: s.n_nodes,
        split: &split,
        positives: ds.positives.as_deref(),
        sampler,
    };
    let history = fit(&mut model, &setup, &tc).map_err(|e| eval_failure("train", e))?;

    let mut h = Table::create(Some(&args.out.join("history.tsv")), "train", &run)?;
    h.row(["epoch", "train_loss", "val_auc", "val_ap"])?;
    for r in &history.epochs {
        h.row([r.epoch.to_string(), format!("{:.6}", r.train_loss), opt(r.val_auc), opt(r.val_ap)])?;
    }
    h.line(&format!(
        "# restored_epoch {} stopped_early {}",
        history.restored_epoch.map_or_else(|| "NA".to_string(), |e| e.to_string()),
        history.stopped_early
    ))?;
    h.finish()?;

    let mut m = Table::create(Some(&args.out.join("metrics.tsv")), "train", &run)?;
    m.row(["part", "class", "n_pos", "n_neg", "auc", "ap"])?;
    for part in [Part::Val, Part::Test] {
        let report = evaluate(&model, &setup, part, args.seed, tc.exec).map_err(|e| eval_failure("evaluate", e))?;
        for (class, c) in &report.rows {
            m.row([part.to_string(), class.clone(), c.n_pos.to_string(), c.n_neg.to_string(), opt(c.auc), opt(c.ap)])?;
            if part == Part::Test && c.n_pos > 0 {
                println!("test {class}: auc {} ap {} (n={})", opt(c.auc), opt(c.ap), c.n_pos);
            }
        }
    }
    m.finish()?;

    let meta = serde_json::to_value(&run).map_err(|e| Failure::internal("serialize config", e))?;
    let ckpt = args.out.join("model.ckpt");
    let file = File::create(&ckpt).map_err(|e| Failure::internal(&format!("create {}", ckpt.display()), e))?;
    model
        .write_checkpoint(std::io::BufWriter::new(file), &meta)
        .map_err(|e| Failure::internal(&format!("write {}", ckpt.display()), e))?;
    write_file(&args.out.join("split.manifest"), |f| write_split_manifest(&split, f))?;
    Ok(())
}

fn render_raw(w: &Walk, stream: &EventStream) -> String {
    w.steps
        .iter()
        .map(|s| {
            let label = if s.node.is_sentinel() { "_" } else { stream.labels[s.node.index()].as_str() };
            format!("{label}@{}", s.t + stream.time_offset)
        })
        .collect::<Vec<_>>()
        .join("->")
}

fn render_anon(w: &Walk, table: &IcawTable, offset: f64) -> String {
    AnonymizedWalk::from_walk(w, table)
        .steps
        .iter()
        .map(|s| format!("{}@{}", s.identity.to_string().replace(' ', ""), s.t + offset))
        .collect::<Vec<_>>()
        .join("->")
}

fn render_aw(w: &Walk) -> String {
    let nodes: Vec<NodeId> = w.nodes().collect();
    nodes
        .iter()
        .zip(anonymize_aw(&nodes))
        .map(|(n, r)| if n.is_sentinel() { "_".to_string() } else { r.to_string() })
        .collect::<Vec<_>>()
        .join("-")
}

pub fn sample(args: SampleArgs) -> Result<(), Failure> {
    let ds = load_dataset(&args.data, args.seed)?;
    let s = &ds.stream;
    let cfg = resolve_sampler(&args.sampler, s, args.seed)?;
    let node = |label: &str| s.node(label).ok_or_else(|| Failure::Input(format!("sample: unknown node {label:?}")));
    let u = node(&args.node)?;
    let v = args.with.as_deref().map(node).transpose()?;
    let t = match args.t {
        Some(t) => t - s.time_offset,
        None => s.events.last().map_or(0.0, |e| e.t) + 1.0,
    };
    let store = s.store(cfg.alpha).map_err(|e| Failure::internal("build store", e))?;
    let sampler = WalkSampler::new(&store, cfg.clone()).map_err(|e| Failure::input("sampler config", e))?;
    let s_u = sampler.sample(u, t, &[args.seed, 0]);
    let s_v = v.map(|v| sampler.sample(v, t, &[args.seed, 1]));
    let empty: &[Walk] = &[];
    let table = IcawTable::new(&s_u.walks, s_v.as_ref().map_or(empty, |x| &x.walks)).map_err(|e| Failure::internal("anonymize", e))?;

    #[derive(Serialize)]
    struct SampleRun<'a> {
        dataset: &'a str,
        format: Option<&'a str>,
        node: &'a str,
        with: Option<&'a str>,
        t: f64,
        seed: u64,
        sampler: &'a SamplerConfig,
    }
    let run = SampleRun {
        dataset: &args.data.dataset,
        format: args.data.format.as_deref(),
        node: &args.node,
        with: args.with.as_deref(),
        t: t + s.time_offset,
        seed: args.seed,
        sampler: &cfg,
    };
    let mut out = Table::create(args.out.as_deref(), "sample", &run)?;
    out.row(["kind", "side", "walk", "value"])?;
    let mut sides: Vec<(&str, &WalkSet)> = vec![("u", &s_u)];
    if let Some(x) = &s_v {
        sides.push(("v", x));
    }
    for (side, set) in &sides {
        out.row(["calls".to_string(), side.to_string(), "-".to_string(), set.sampler_calls.to_string()])?;
        for (i, w) in set.walks.iter().enumerate() {
            out.row(["raw".to_string(), side.to_string(), i.to_string(), render_raw(w, s)])?;
            out.row(["anon".to_string(), side.to_string(), i.to_string(), render_anon(w, &table, s.time_offset)])?;
            out.row(["shape".to_string(), side.to_string(), i.to_string(), walk_shape(w, &table).to_string()])?;
            out.row(["aw".to_string(), side.to_string(), i.to_string(), render_aw(w)])?;
        }
    }
    out.finish()
}

pub fn motifs(args: MotifArgs) -> Result<(), Failure> {
    let file = File::open(&args.checkpoint).map_err(|e| Failure::input(&format!("read {}", args.checkpoint.display()), e))?;
    let (model, meta) = CawModel::read_checkpoint(std::io::BufReader::new(file)).map_err(|e| Failure::input(&format!("read {}", args.checkpoint.display()), e))?;
    if model.config.agg != Aggregation::Mean {
        return Err(Failure::input("motifs", EvalError::NotLinear));
    }
    let run: TrainRun = serde_json::from_value(meta).map_err(|e| Failure::input("checkpoint run config", e))?;
    let ds = load_dataset(&args.data, run.seed)?;
    let s = &ds.stream;
    let split = match &args.split {
        Some(p) => read_split_manifest(p).map_err(|e| Failure::input("split manifest", e))?,
        None => {
            let split_args = SplitArgs {
                r_train: run.r_train,
                r_val: run.r_val,
                mode: match run.mode {
                    Mode::Transductive => crate::ModeArg::Trans,
                    Mode::Inductive => crate::ModeArg::Ind,
                },
                mask_fraction: run.mask_fraction,
            };
            make_split(s, &split_args, run.seed)?
        }
    };
    if split.test.end > s.len() {
        return Err(Failure::Input(format!("split manifest covers {} events, dataset has {}", split.test.end, s.len())));
    }
    let positives: Vec<LinkQuery> = split
        .test
        .clone()
        .filter(|&i| ds.positives.as_ref().is_none_or(|p| p[i]))
        .map(|i| {
            let e = &s.events[i];
            LinkQuery {
                u: e.u,
                v: e.v,
                t: e.t,
                label: Some(true),
            }
        })
        .collect();
    let universe: Vec<NodeId> = s.nodes().collect();
    let negatives = sample_negatives(&positives, &universe, &[0x3071f], args.seed).map_err(|e| eval_failure("negatives", e))?;
    let queries: Vec<LinkQuery> = positives.into_iter().chain(negatives).collect();
    let store = s.store(run.sampler.alpha).map_err(|e| Failure::internal("build store", e))?;
    let sampler = WalkSampler::new(&store, run.sampler.clone()).map_err(|e| Failure::input("sampler config", e))?;
    let rows = motif_table(&model, &sampler, &queries, args.shape.into(), &[args.seed], Execution::Parallel).map_err(|e| eval_failure("motifs", e))?;

    #[derive(Serialize)]
    struct MotifRun<'a> {
        checkpoint: &'a Path,
        split: Option<&'a Path>,
        shape: &'a str,
        seed: u64,
        run: &'a TrainRun,
    }
    let cfg = MotifRun {
        checkpoint: &args.checkpoint,
        split: args.split.as_deref(),
        shape: match args.shape {
            crate::ShapeArg::Caw => "caw",
            crate::ShapeArg::Aw => "aw",
        },
        seed: args.seed,
        run: &run,
    };
    let mut out = Table::create(args.out.as_deref(), "motifs", &cfg)?;
    out.row(["shape", "mean_logit", "count_pos", "count_neg", "ratio_pos", "ratio_neg"])?;
    for r in rows {
        out.row([
            r.shape,
            format!("{:.6}", r.mean_logit),
            r.count_pos.to_string(),
            r.count_neg.to_string(),
            format!("{:.6}", r.ratio_pos),
            format!("{:.6}", r.ratio_neg),
        ])?;
    }
    out.finish()
}

pub fn bench(args: BenchArgs) -> Result<(), Failure> {
    let stream = caw_core::data_io::gen_poisson(args.nodes, args.tau, args.horizon, args.seed).map_err(|e| Failure::input("generate stream", e))?;
    if stream.is_empty() {
        return Err(Failure::Input("generate stream: no events; raise --tau or --horizon".into()));
    }
    let alpha = args.alpha.unwrap_or(args.tau / 5.0);
    let mut cfg = SamplerConfig::new(args.walks, args.length, alpha, args.seed);
    if let Some(tree) = &args.tree {
        cfg = cfg.with_branching(tree.clone());
    }
    cfg.validate().map_err(|e| Failure::input("sampler config", e))?;
    let store = stream.store(alpha).map_err(|e| Failure::input("sampler config", e))?;
    let it = iteration_profile(&store, &stream.events, args.tau, args.calls, args.seed);
    let curve = runtime_profile(&stream.events, &cfg, args.points).map_err(|e| Failure::internal("runtime profile", e))?;

    #[derive(Serialize)]
    struct BenchRun<'a> {
        nodes: usize,
        tau: f64,
        horizon: f64,
        calls: usize,
        points: usize,
        seed: u64,
        sampler: &'a SamplerConfig,
    }
    let run = BenchRun {
        nodes: args.nodes,
        tau: args.tau,
        horizon: args.horizon,
        calls: args.calls,
        points: args.points,
        seed: args.seed,
        sampler: &cfg,
    };
    let mut out = Table::create(args.out.as_deref(), "bench", &run)?;
    out.row(["metric", "value"])?;
    let fit = curve.fit;
    let kv: Vec<(&str, String)> = vec![
        ("events", stream.len().to_string()),
        ("tau_over_alpha", (args.tau / alpha).to_string()),
        ("mean_iterations", format!("{:.4}", it.mean_iterations)),
        ("rate_bound", format!("{:.4}", it.rate_bound)),
        ("mean_bound", format!("{:.4}", it.mean_bound)),
        ("mean_history", format!("{:.2}", it.mean_history)),
        ("fit_slope_s_per_event", fit.map_or("NA".into(), |f| format!("{:.4e}", f.slope))),
        ("fit_intercept_s", fit.map_or("NA".into(), |f| format!("{:.4e}", f.intercept))),
        ("fit_r2", fit.map_or("NA".into(), |f| format!("{:.6}", f.r2))),
    ];
    for (k, v) in kv {
        out.row([k.to_string(), v])?;
    }
    out.line("# runtime curve")?;
    out.row(["events_processed", "sampling_seconds"])?;
    for (n, secs) in &curve.points {
        out.row([n.to_string(), format!("{secs:.6}")])?;
    }
    out.finish()
}
