//! Command implementations. Each pipeline resolves its flags into a
//! configuration, runs it, writes CSVs and a manifest whose `args` replay
//! the run with every default made explicit.

use crate::cli::*;
use crate::manifest::{self, RunManifest};
use crate::output::{self, header, num, opt, write_csv};
use anyhow::{anyhow, bail, Context, Result};
use pgso_core::graph::{
    load_dataset, load_graph, planetoid_split, sample_sbm, split_indices, split_nodes, write_bundle, write_edge_list,
    AttributedGraph, Fractions, GraphFormat, SbmSpec, SplitAssignment,
};
use pgso_core::nn::{Architecture, Task};
use pgso_core::operator::{ClampEpsilon, ParamSet, Preset};
use pgso_core::rng::derive_seed;
use pgso_core::spectral::{spectral_report, SpectralMode, SpectralOptions};
use pgso_core::train::{self, SbmStudyConfig, TaskData, Telemetry, TrainConfig, TrainHistory};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Presets { action: PresetsAction::List } => presets_list(),
        Command::Analyze(a) => analyze(&a),
        Command::Train(a) => train_cmd(&a),
        Command::SbmStudy(a) => sbm_study(&a),
        Command::InitSweep(a) => init_sweep(&a),
        Command::Converge(a) => converge(&a),
        Command::Generate(a) => generate(&a),
        Command::Rerun(a) => rerun(&a),
    }
}

fn presets_list() -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{:<24} {:<24} params", "name", "formula")?;
    for p in Preset::ALL {
        writeln!(out, "{:<24} {:<24} {}", p.name(), p.formula(), p.params())?;
    }
    Ok(())
}

fn flag(name: &str, value: impl ToString) -> [String; 2] {
    [name.to_string(), value.to_string()]
}

fn absolute(path: &Path, flag: &str) -> Result<PathBuf> {
    std::fs::canonicalize(path).with_context(|| format!("{flag}: cannot open {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("--out: cannot create directory {}", dir.display()))
}

fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let path = absolute(&a.graph, "--graph")?;
    let g = load_graph(&path, a.format.into()).with_context(|| format!("--graph: {}", path.display()))?;
    let s = a.params.unwrap_or_else(|| a.operator.init.params());
    let clamp = ClampEpsilon::new(a.clamp).map_err(|e| anyhow!("--clamp: {e}"))?;
    let opts = SpectralOptions { dense_limit: a.dense_limit, clamp };
    let mode = match a.mode {
        ModeArg::Full => SpectralMode::Full,
        ModeArg::Bounds => SpectralMode::BoundsOnly,
    };
    let report = spectral_report(&g, s, mode, &opts).map_err(|e| anyhow!("--mode: {e}"))?;

    let stem = a.out.file_stem().and_then(|s| s.to_str()).ok_or_else(|| anyhow!("--out: {} has no file name", a.out.display()))?;
    let dir = a.out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    create_dir(dir)?;
    let mut outputs = vec![file_name(&a.out)];
    let head = header(&["lambda_min", "lambda_max", "support_lo", "support_hi", "n_clamped"]);
    let row = vec![
        opt(report.lambda_min()),
        opt(report.lambda_max()),
        num(report.gershgorin.support_lo),
        num(report.gershgorin.support_hi),
        report.clamp_count.to_string(),
    ];
    write_csv(&a.out, &head, &[row])?;
    if mode == SpectralMode::Full {
        let side = format!("{stem}.eigenvalues.csv");
        let rows: Vec<Vec<String>> =
            report.eigenvalues.iter().enumerate().map(|(i, &l)| vec![i.to_string(), num(l)]).collect();
        write_csv(&dir.join(&side), &header(&["index", "lambda"]), &rows)?;
        outputs.push(side);
    }

    let mut args: Vec<String> = Vec::new();
    args.extend(flag("--graph", path.display()));
    args.extend(flag("--format", a.format.name()));
    args.extend(flag("--operator", a.operator));
    if let Some(p) = a.params {
        args.extend(flag("--params", p));
    }
    args.extend(flag("--mode", if mode == SpectralMode::Full { "full" } else { "bounds" }));
    args.extend(flag("--clamp", num(a.clamp)));
    args.extend(flag("--dense-limit", a.dense_limit));
    let mut config = BTreeMap::new();
    config.insert("params".into(), s.to_string());
    config.insert("mode".into(), args[args.iter().position(|x| x == "--mode").unwrap() + 1].clone());
    config.insert("clamp".into(), num(a.clamp));
    config.insert("dense_limit".into(), a.dense_limit.to_string());
    config.insert("format".into(), a.format.name().into());
    let mut m = RunManifest::new("analyze", args, config, 0);
    m.add_input("--graph", &path)?;
    m.outputs = outputs;
    m.write(&dir.join(format!("{stem}.{}", manifest::FILE_NAME)))?;

    crate::say(format!(
        "support [{}, {}], spectrum [{}, {}], clamped {}",
        num(report.gershgorin.support_lo),
        num(report.gershgorin.support_hi),
        opt(report.lambda_min()),
        opt(report.lambda_max()),
        report.clamp_count
    ));
    if mode == SpectralMode::Full && !report.all_contained() {
        bail!("--operator: computed eigenvalues escape the Gershgorin bounds");
    }
    Ok(())
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Command-specific defaults for flags whose default depends on the pipeline.
struct Defaults {
    epochs: usize,
    telemetry: Telemetry,
}

fn task_of(t: TaskArg) -> Task {
    match t {
        TaskArg::Node => Task::Node,
        TaskArg::Graph => Task::Graph,
    }
}

fn resolve(task: Task, m: &ModelArgs, d: Defaults) -> Result<TrainConfig> {
    let base = match task {
        Task::Node => TrainConfig::node_default(),
        Task::Graph => TrainConfig::graph_default(),
    };
    let depth = m.depth.unwrap_or(base.depth);
    let epochs = m.epochs.unwrap_or(d.epochs);
    let checks = [
        (epochs == 0, "--epochs", "must be at least 1"),
        (depth == 0, "--depth", "must be at least 1"),
        (m.hidden == 0, "--hidden", "must be at least 1"),
        (m.batch_size == 0, "--batch-size", "must be at least 1"),
        (!(0.0..1.0).contains(&m.dropout), "--dropout", "must lie in [0, 1)"),
    ];
    if let Some((_, f, msg)) = checks.iter().find(|c| c.0) {
        bail!("{f}: {msg}");
    }
    let arch = match m.arch {
        None => base.arch,
        Some(ArchArg::Gcn) => Architecture::Gcn,
        Some(ArchArg::Gin) => Architecture::Gin,
        Some(ArchArg::Sgc) => Architecture::Sgc { hops: depth },
    };
    let clamp = ClampEpsilon::new(m.clamp).map_err(|e| anyhow!("--clamp: {e}"))?;
    let cfg = TrainConfig {
        task,
        arch,
        operator: m.operator,
        depth,
        hidden: m.hidden,
        epochs,
        seed: m.seed,
        telemetry: m.telemetry.unwrap_or(d.telemetry),
        features: m.features.unwrap_or(base.features),
        clamp,
        dropout: m.dropout,
        readout: m.readout,
        batch_size: m.batch_size,
        dense_limit: m.dense_limit,
        ..base
    };
    cfg.validate()?;
    Ok(cfg)
}

fn model_args(c: &TrainConfig) -> Vec<String> {
    let mut a = Vec::new();
    a.extend(flag("--seed", c.seed));
    a.extend(flag("--epochs", c.epochs));
    a.extend(flag("--hidden", c.hidden));
    a.extend(flag("--depth", c.depth));
    a.extend(flag("--operator", c.operator));
    a.extend(flag("--telemetry", c.telemetry));
    a.extend(flag("--arch", c.arch.name()));
    a.extend(flag("--dropout", num(c.dropout)));
    a.extend(flag("--clamp", num(c.clamp.get())));
    a.extend(flag("--features", c.features));
    a.extend(flag("--readout", c.readout));
    a.extend(flag("--batch-size", c.batch_size));
    a.extend(flag("--dense-limit", c.dense_limit));
    a
}

fn config_map(c: &TrainConfig) -> BTreeMap<String, String> {
    let entries: [(&str, String); 24] = [
        ("task", c.task.name().into()),
        ("arch", c.arch.name().into()),
        ("operator", c.operator.to_string()),
        ("operator_init", c.operator.init.params().to_string()),
        ("depth", c.depth.to_string()),
        ("hidden", c.hidden.to_string()),
        ("epochs", c.epochs.to_string()),
        ("seed", c.seed.to_string()),
        ("split_fractions", format!("{} {} {}", num(c.fractions.train), num(c.fractions.val), num(c.fractions.test))),
        ("telemetry", c.telemetry.to_string()),
        ("features", c.features.to_string()),
        ("clamp", num(c.clamp.get())),
        ("dropout", num(c.dropout)),
        ("readout", c.readout.to_string()),
        ("batch_size", c.batch_size.to_string()),
        ("dense_limit", c.dense_limit.to_string()),
        ("adam_lr_exponential", num(c.adam.lr_exponential)),
        ("adam_lr_other", num(c.adam.lr_other)),
        ("adam_beta1", num(c.adam.beta1)),
        ("adam_beta2", num(c.adam.beta2)),
        ("adam_eps", num(c.adam.eps)),
        ("adam_weight_decay", num(c.adam.weight_decay)),
        ("adam_decay_factor", num(c.adam.decay_factor)),
        ("adam_decay_period", c.adam.decay_period.to_string()),
    ];
    entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

struct Loaded {
    data: TaskData,
    args: Vec<String>,
    input: Option<PathBuf>,
}

fn split_seed(seed: u64) -> u64 {
    derive_seed(seed, &[0])
}

fn load_data(d: &DataArgs, task: Task, seed: u64, fractions: Fractions) -> Result<Loaded> {
    let mut args = Vec::new();
    args.extend(flag("--task", task.name()));
    args.extend(flag("--split", if d.split == SplitArg::Random { "random" } else { "planetoid" }));
    let Some(graph) = &d.graph else {
        if task == Task::Graph {
            bail!("--graph: graph classification needs a dataset file");
        }
        let spec = SbmSpec { k: d.sbm_k, community_size: d.sbm_size, p: d.sbm_p, q: d.sbm_q, seed };
        let g = sample_sbm(&spec).map_err(|e| anyhow!("--sbm-p: {e}"))?;
        let split = node_split(&g, d.split, fractions, seed)?;
        args.extend(flag("--sbm-k", d.sbm_k));
        args.extend(flag("--sbm-size", d.sbm_size));
        args.extend(flag("--sbm-p", num(d.sbm_p)));
        args.extend(flag("--sbm-q", num(d.sbm_q)));
        return Ok(Loaded { data: TaskData::Node { graph: g, split }, args, input: None });
    };
    let path = absolute(graph, "--graph")?;
    args.extend(flag("--graph", path.display()));
    args.extend(flag("--format", d.format.name()));
    let data = match task {
        Task::Node => {
            let g = load_graph(&path, d.format.into()).with_context(|| format!("--graph: {}", path.display()))?;
            if g.node_labels().is_none() {
                bail!("--graph: {} has no node labels", path.display());
            }
            let split = node_split(&g, d.split, fractions, seed)?;
            TaskData::Node { graph: g, split }
        }
        Task::Graph => {
            if GraphFormat::from(d.format) != GraphFormat::Bundle {
                bail!("--format: graph classification reads multi-graph bundles");
            }
            if d.split != SplitArg::Random {
                bail!("--split: planetoid splits apply to node classification only");
            }
            let dataset = load_dataset(&path).with_context(|| format!("--graph: {}", path.display()))?;
            let labels: Vec<usize> = dataset
                .iter()
                .enumerate()
                .map(|(i, g)| g.graph_label().ok_or_else(|| anyhow!("--graph: graph {i} has no label")))
                .collect::<Result<_>>()?;
            let split = split_indices(dataset.len(), Some(&labels), fractions, split_seed(seed))
                .map_err(|e| anyhow!("--split: {e}"))?;
            TaskData::Graph { dataset, split }
        }
    };
    Ok(Loaded { data, args, input: Some(path) })
}

fn node_split(g: &AttributedGraph, split: SplitArg, fractions: Fractions, seed: u64) -> Result<SplitAssignment> {
    let s = match split {
        SplitArg::Random => split_nodes(g, fractions, true, split_seed(seed)),
        SplitArg::Planetoid => planetoid_split(g, 20, 500, 1000, split_seed(seed)),
    };
    s.map_err(|e| anyhow!("--split: {e}"))
}

fn finish(out: &Path, mut m: RunManifest, input: Option<&Path>, outputs: Vec<String>) -> Result<()> {
    if let Some(p) = input {
        m.add_input("--graph", p)?;
    }
    m.outputs = outputs;
    m.write(&out.join(manifest::FILE_NAME))
}

fn summary_line(label: &str, h: &TrainHistory) {
    let best = h.best_epoch();
    crate::say(format!(
        "{label}: final loss {}, val_acc {}, test_acc {}; best epoch {} (val_acc {}, test_acc {})",
        num(h.final_loss().unwrap_or(f64::NAN)),
        num(h.final_val_acc),
        num(h.final_test_acc),
        best.map_or(0, |r| r.epoch),
        num(best.map_or(f64::NAN, |r| r.val_acc)),
        num(best.map_or(f64::NAN, |r| r.test_acc)),
    ));
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let task = task_of(a.data.task);
    let cfg = resolve(task, &a.model, Defaults { epochs: 200, telemetry: Telemetry::default() })?;
    let loaded = load_data(&a.data, task, cfg.seed, cfg.fractions)?;
    let run = train::run(&cfg, &loaded.data)?;
    let out = &a.model.out;
    create_dir(out)?;
    output::write_history(&out.join("history.csv"), &run.history)?;
    let mut outputs = vec!["history.csv".to_string()];
    if matches!(cfg.telemetry, Telemetry::Full { .. }) {
        output::write_spectra(&out.join("spectra.csv"), &run.history)?;
        outputs.push("spectra.csv".into());
    }
    std::fs::write(out.join("model.ckpt"), run.model.to_checkpoint()).context("--out: cannot write model.ckpt")?;
    outputs.push("model.ckpt".into());

    let mut args = loaded.args;
    args.extend(model_args(&cfg));
    let m = RunManifest::new("train", args, config_map(&cfg), cfg.seed);
    finish(out, m, loaded.input.as_deref(), outputs)?;
    summary_line("train", &run.history);
    Ok(())
}

fn sbm_study(a: &SbmStudyArgs) -> Result<()> {
    let mut study = if a.full { SbmStudyConfig::full() } else { SbmStudyConfig::desk() };
    if let Some(l) = &a.levels {
        study.levels = parse_levels(l).map_err(|e| anyhow!("--levels: {e}"))?;
    }
    if let Some(r) = a.repeats {
        study.repeats = r;
    }
    if let Some(c) = a.community_size {
        study.community_size = c;
    }
    study.k = a.k;
    let cfg = resolve(Task::Node, &a.model, Defaults { epochs: 200, telemetry: Telemetry::Off })?;
    study.seed = cfg.seed;
    study.train = cfg;
    if study.repeats == 0 {
        bail!("--repeats: must be at least 1");
    }
    let result = train::sbm_sparsity_study(&study).map_err(|e| match e {
        train::TrainError::Config(m) => anyhow!("--levels: {m}"),
        other => anyhow!(other),
    })?;

    let out = &a.model.out;
    create_dir(out)?;
    write_sweep(&out.join("sweep.csv"), &result)?;
    let mut head = header(&["level", "repeat"]);
    head.extend(ParamSet::NAMES.iter().map(|s| s.to_string()));
    head.extend(header(&["val_acc", "test_acc"]));
    let rows: Vec<Vec<String>> = result
        .cells
        .iter()
        .map(|c| {
            let mut r = vec![result.levels[c.level].label.clone(), c.repeat.to_string()];
            r.extend(c.final_params.to_array().iter().map(|&v| num(v)));
            r.push(num(c.final_val_acc));
            r.push(num(c.final_test_acc));
            r
        })
        .collect();
    write_csv(&out.join("cells.csv"), &head, &rows)?;

    let levels: Vec<String> = study.levels.iter().map(|(p, q)| format!("{}:{}", num(*p), num(*q))).collect();
    let mut args = Vec::new();
    args.extend(flag("--levels", levels.join(",")));
    args.extend(flag("--repeats", study.repeats));
    args.extend(flag("--community-size", study.community_size));
    args.extend(flag("--k", study.k));
    args.extend(model_args(&cfg));
    let mut config = config_map(&cfg);
    config.insert("levels".into(), levels.join(","));
    config.insert("repeats".into(), study.repeats.to_string());
    config.insert("community_size".into(), study.community_size.to_string());
    config.insert("k".into(), study.k.to_string());
    let m = RunManifest::new("sbm-study", args, config, cfg.seed);
    finish(out, m, None, vec!["sweep.csv".into(), "cells.csv".into()])?;

    let a_idx = 6;
    for l in &result.levels {
        crate::say(format!(
            "{}: a = {} +- {}, |e2-e3| = {}, test_acc = {}",
            l.label,
            num(l.mean[a_idx]),
            num(l.std[a_idx]),
            num(l.exponent_gap.0),
            num(l.test_acc.0)
        ));
    }
    let sparsity: Vec<f64> = (0..result.levels.len()).map(|i| i as f64).collect();
    let means: Vec<f64> = result.levels.iter().map(|l| l.mean[a_idx]).collect();
    crate::say(format!("spearman(a, sparsity) = {}", num(train::spearman(&means, &sparsity))));
    Ok(())
}

fn write_sweep(path: &Path, result: &train::SweepResult) -> Result<()> {
    let rows: Vec<Vec<String>> =
        result.rows().into_iter().map(|(level, param, mean, std)| vec![level, param.to_string(), num(mean), num(std)]).collect();
    write_csv(path, &header(&["level", "param", "mean", "std"]), &rows)
}

fn init_sweep(a: &InitSweepArgs) -> Result<()> {
    let inits = parse_inits(&a.inits).map_err(|e| anyhow!("--inits: {e}"))?;
    let task = task_of(a.data.task);
    let cfg = resolve(task, &a.model, Defaults { epochs: 150, telemetry: Telemetry::Bounds })?;
    let loaded = load_data(&a.data, task, cfg.seed, cfg.fractions)?;
    let sweep = train::init_sensitivity(&cfg, &loaded.data, &inits)?;
    let out = &a.model.out;
    create_dir(out)?;
    write_sweep(&out.join("sweep.csv"), &sweep.summary)?;
    let mut outputs = vec!["sweep.csv".to_string()];
    for r in &sweep.runs {
        let name = format!("history_{}.csv", r.init.name());
        output::write_history(&out.join(&name), &r.history)?;
        outputs.push(name);
    }
    let names: Vec<&str> = inits.iter().map(|p| p.name()).collect();
    let mut args = vec!["--inits".to_string(), names.join(",")];
    args.extend(loaded.args);
    args.extend(model_args(&cfg));
    let mut config = config_map(&cfg);
    config.insert("inits".into(), names.join(","));
    let m = RunManifest::new("init-sweep", args, config, cfg.seed);
    finish(out, m, loaded.input.as_deref(), outputs)?;
    for r in &sweep.runs {
        summary_line(r.init.name(), &r.history);
    }
    Ok(())
}

fn converge(a: &ConvergeArgs) -> Result<()> {
    let task = task_of(a.data.task);
    let cfg = resolve(task, &a.model, Defaults { epochs: 100, telemetry: Telemetry::Bounds })?;
    let loaded = load_data(&a.data, task, cfg.seed, cfg.fractions)?;
    let report = train::convergence_compare(&cfg, &loaded.data)?;
    let out = &a.model.out;
    create_dir(out)?;
    output::write_history(&out.join("history_baseline.csv"), &report.baseline)?;
    output::write_history(&out.join("history_pgso.csv"), &report.pgso)?;
    let head = header(&[
        "epoch",
        "baseline_loss",
        "pgso_loss",
        "baseline_val_acc",
        "pgso_val_acc",
        "baseline_test_acc",
        "pgso_test_acc",
    ]);
    let rows: Vec<Vec<String>> = report
        .baseline
        .records
        .iter()
        .zip(&report.pgso.records)
        .map(|(b, p)| {
            vec![
                b.epoch.to_string(),
                num(b.loss),
                num(p.loss),
                num(b.val_acc),
                num(p.val_acc),
                num(b.test_acc),
                num(p.test_acc),
            ]
        })
        .collect();
    write_csv(&out.join("converge.csv"), &head, &rows)?;
    let mut args = loaded.args;
    args.extend(model_args(&cfg));
    let m = RunManifest::new("converge", args, config_map(&cfg), cfg.seed);
    let outputs = vec!["history_baseline.csv".into(), "history_pgso.csv".into(), "converge.csv".into()];
    finish(out, m, loaded.input.as_deref(), outputs)?;
    summary_line("baseline", &report.baseline);
    summary_line("pgso", &report.pgso);
    crate::say(format!("final loss difference (baseline - pgso) = {}", num(report.final_loss_difference)));
    Ok(())
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let spec = SbmSpec { k: a.k, community_size: a.size, p: a.p, q: a.q, seed: a.seed };
    let g = sample_sbm(&spec).map_err(|e| anyhow!("--p: {e}"))?;
    let mut buf = Vec::new();
    match GraphFormat::from(a.format) {
        GraphFormat::Bundle => write_bundle(&g, &mut buf)?,
        GraphFormat::EdgeList => write_edge_list(&g, &mut buf)?,
    }
    if let Some(dir) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    std::fs::write(&a.out, buf).with_context(|| format!("--out: cannot write {}", a.out.display()))?;
    crate::say(format!("{} nodes, {} edges", g.n(), g.edge_count()));
    Ok(())
}

fn rerun(a: &RerunArgs) -> Result<()> {
    let m = RunManifest::read(&a.manifest)?;
    if m.tool != manifest::TOOL || m.command == "rerun" {
        bail!("--manifest: {} was not written by a pipeline run", a.manifest.display());
    }
    if m.version != env!("CARGO_PKG_VERSION") {
        bail!("--manifest: recorded by version {}, this is {}", m.version, env!("CARGO_PKG_VERSION"));
    }
    m.verify_inputs()?;
    let mut argv = vec!["pgso".to_string(), m.command.clone()];
    argv.extend(m.args.iter().cloned());
    argv.push("--out".into());
    argv.push(a.out.display().to_string());
    let cli = <Cli as clap::Parser>::try_parse_from(&argv)
        .map_err(|e| anyhow!("--manifest: recorded arguments do not parse: {}", crate::first_line(&e.to_string())))?;
    dispatch(cli.command)
}
