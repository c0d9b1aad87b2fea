use std::path::{Path, PathBuf};

use gvn_core::features::{PeKind, SfKind, Substructure};
use gvn_core::graph::{k_hop_link_subgraph, k_hop_node_subgraph, Graph, SplitSet};
use gvn_core::model::{graph_inputs, load_checkpoint, save_checkpoint, ModelKind};
use gvn_core::probes::{
    ablation_driver, isomorphic_pair_demo, pair_targets, pe_baseline_experiment, reproduction_ratio,
    substructure_experiment, AblationAxis, DemoConfig, PeBaselineConfig, ProbeInput, RrConfig, SubstructureConfig,
    SynthDataset,
};
use gvn_core::render::{render, RenderCache, RenderJob};
use gvn_core::train::{
    evaluate, message_repository, run_experiment, EvalReport, ExperimentContext, VisionProvider, VisualInput,
};
use gvn_core::vsf::{EncoderHandle, VsfRepository};
use gvn_core::{Error, Exec};

use crate::config::{parse_kind, parse_strategy, RunConfig};
use crate::args::{Cli, Command, PeArg, ProbeCommand, RenderMode, SubKind, SynthKind};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    /// 2 for usage and validation problems, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(Error::Config(_) | Error::Argument(_)) => 2,
            CliError::Core(_) => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.global.seed {
        cfg.seeds = vec![s];
    }
    if let Some(o) = &cli.global.out {
        cfg.out = o.clone();
    }
    if let Some(c) = &cli.global.cache {
        cfg.cache = Some(c.clone());
    }
    let exec = Exec::auto();
    match cli.command {
        Command::EncoderInit { path } => {
            let enc = EncoderHandle::init(cfg.encoder_arch(), cfg.encoder.seed)?;
            enc.save(&path)?;
            println!("{} -> {}", enc.id(), path.display());
            Ok(())
        }
        Command::Probe {
            probe: ProbeCommand::Isomorphic,
        } => {
            let rep = isomorphic_pair_demo(&DemoConfig {
                seed: cfg.seeds[0],
                ..DemoConfig::default()
            })?;
            write_probe(&cfg, "isomorphic", &rep)
        }
        Command::Probe {
            probe:
                ProbeCommand::Substructure {
                    kind,
                    dataset,
                    with_vsf,
                    graphs,
                    epochs,
                    full_scale,
                },
        } => {
            let mut sc = SubstructureConfig {
                kind: match kind {
                    SubKind::Triangle => Substructure::Triangle,
                    SubKind::ThreeStar => Substructure::ThreeStar,
                },
                dataset: match dataset {
                    SynthKind::ErdosRenyi => SynthDataset::ErdosRenyi,
                    SynthKind::RandomRegular => SynthDataset::RandomRegular,
                },
                with_vsf,
                ..SubstructureConfig::default()
            };
            if full_scale {
                sc.n_graphs = 5000;
                sc.seeds = (0..5).collect();
            } else if cli.global.seed.is_some() || cli.global.config.is_some() {
                sc.seeds = cfg.seeds.clone();
            }
            sc.n_graphs = graphs.unwrap_or(sc.n_graphs);
            sc.epochs = epochs.unwrap_or(sc.epochs);
            let rep = substructure_experiment(&sc, exec)?;
            write_probe(&cfg, "substructure", &rep)
        }
        command => {
            cfg.validate()?;
            let g = cfg.load_graph()?;
            let splits = cfg.load_splits(&g)?;
            let cache = RenderCache::new(cfg.cache_dir())?;
            match command {
                Command::Render { mode, k } => cmd_render(&cfg, &g, &splits, &cache, mode, k, exec),
                Command::VsfBuild => cmd_vsf_build(&cfg, &g, &splits, &cache, exec),
                Command::Train {
                    model,
                    integration,
                    epochs,
                } => {
                    if let Some(m) = model {
                        parse_kind(&m)?;
                        cfg.model.kind = m;
                    }
                    if let Some(i) = integration {
                        cfg.model.integration = parse_strategy(&i)?;
                    }
                    if let Some(e) = epochs {
                        cfg.train.epochs = e;
                    }
                    cfg.validate()?;
                    cmd_train(&cfg, &g, &splits, &cache, exec)
                }
                Command::Eval { checkpoint } => cmd_eval(&cfg, &g, &splits, &cache, checkpoint, exec),
                Command::Probe { probe } => cmd_probe(&cfg, &g, &splits, &cache, probe, exec),
                Command::EncoderInit { .. } => unreachable!("handled above"),
            }
        }
    }
}

fn write_probe(cfg: &RunConfig, name: &str, rep: &gvn_core::probes::ProbeReport) -> Result<()> {
    let path = cfg.out.join(format!("probe-{name}.json"));
    rep.write_json(&path)?;
    for (k, s) in &rep.scores {
        match s.value {
            Some(v) => println!("{k}: {v:.6} [{}]", s.criterion),
            None => println!("{k}: undefined [{}]", s.criterion),
        }
    }
    println!("report: {}", path.display());
    Ok(())
}

fn write_report(cfg: &RunConfig, name: &str, mut rep: EvalReport) -> Result<()> {
    rep.config = Some(cfg.to_toml());
    let path = cfg.out.join(format!("{name}.json"));
    rep.write_json(&path)?;
    for (k, m) in &rep.metrics {
        println!("{k}: {:.4} ± {:.4}", m.mean, m.std);
    }
    println!("report: {}", path.display());
    Ok(())
}

fn cmd_render(
    cfg: &RunConfig,
    g: &Graph,
    splits: &SplitSet,
    cache: &RenderCache,
    mode: RenderMode,
    k: Option<u64>,
    exec: Exec,
) -> Result<()> {
    let k = k.map_or(cfg.model.k, |k| k as usize);
    let msg = splits.message_graph(g)?;
    let style = cfg.model.style.to_style();
    let views = match mode {
        RenderMode::Node => (0..msg.num_nodes())
            .map(|v| k_hop_node_subgraph(&msg, v, k))
            .collect::<gvn_core::Result<Vec<_>>>()?,
        RenderMode::Link => splits
            .train_pos
            .iter()
            .chain(&splits.valid_pos)
            .chain(&splits.test_pos)
            .map(|&(u, v)| k_hop_link_subgraph(&msg, u.min(v), u.max(v), k, cfg.model.mask_center_link))
            .collect::<gvn_core::Result<Vec<_>>>()?,
    };
    let jobs: Vec<_> = views.into_iter().map(|v| RenderJob::new(v, style.clone())).collect();
    let out = cache.run(&jobs, exec)?;
    println!(
        "{} views, {} unique: {} cached, {} rendered",
        jobs.len(),
        out.cached + out.rendered,
        out.cached,
        out.rendered
    );
    println!("cache: {}", cache.dir().display());
    Ok(())
}

fn cmd_vsf_build(cfg: &RunConfig, g: &Graph, splits: &SplitSet, cache: &RenderCache, exec: Exec) -> Result<()> {
    let enc = cfg.load_encoder()?;
    let path = cfg.repository_path();
    let ctx = context(cfg, g, splits, Some(&enc), cache, Some(&path), exec);
    let model = cfg.model_config(g.feature_dim().max(1))?;
    let (repo, stats) = message_repository(&ctx, &model)?;
    println!(
        "{} rows x {}: {} rendered, {} cached, {} encoded{}",
        repo.num_rows(),
        repo.dim(),
        stats.rendered,
        stats.cached,
        stats.encoded,
        if stats.reused { " (reused)" } else { "" }
    );
    println!("repository: {}", path.display());
    Ok(())
}

fn context<'a>(
    cfg: &'a RunConfig,
    g: &'a Graph,
    splits: &'a SplitSet,
    enc: Option<&'a EncoderHandle>,
    cache: &'a RenderCache,
    repo: Option<&'a Path>,
    exec: Exec,
) -> ExperimentContext<'a> {
    ExperimentContext {
        dataset: &cfg.dataset.name,
        graph: g,
        splits,
        encoder: enc,
        cache,
        repo_path: repo,
        exec,
    }
}

fn needs_encoder(cfg: &RunConfig) -> gvn_core::Result<Option<EncoderHandle>> {
    match parse_kind(&cfg.model.kind)? {
        ModelKind::Baseline => Ok(None),
        _ => cfg.load_encoder().map(Some),
    }
}

fn checkpoint_path(cfg: &RunConfig, seed: u64) -> PathBuf {
    cfg.out.join(format!("model-seed{seed}.gvnc"))
}

fn cmd_train(cfg: &RunConfig, g: &Graph, splits: &SplitSet, cache: &RenderCache, exec: Exec) -> Result<()> {
    let enc = needs_encoder(cfg)?;
    let repo_path = cfg.repository_path();
    let ctx = context(cfg, g, splits, enc.as_ref(), cache, Some(&repo_path), exec);
    let model = cfg.model_config(g.feature_dim().max(1))?;
    let run = run_experiment(&ctx, &model, &cfg.train, &cfg.seeds)?;
    for (seed, out) in cfg.seeds.iter().zip(&run.outcomes) {
        let path = checkpoint_path(cfg, *seed);
        std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
        save_checkpoint(&out.model, &path)?;
        println!(
            "seed {seed}: best epoch {} of {}, checkpoint {}",
            out.best_epoch,
            out.history.len(),
            path.display()
        );
    }
    write_report(cfg, "report", run.report)
}

fn cmd_eval(
    cfg: &RunConfig,
    g: &Graph,
    splits: &SplitSet,
    cache: &RenderCache,
    checkpoint: Option<PathBuf>,
    exec: Exec,
) -> Result<()> {
    let path = checkpoint.unwrap_or_else(|| checkpoint_path(cfg, cfg.seeds[0]));
    if !path.is_file() {
        return Err(CliError::Usage(format!("checkpoint not found: {}", path.display())));
    }
    let start = std::time::Instant::now();
    let model = load_checkpoint(&path)?;
    let msg = splits.message_graph(g)?;
    let inputs = graph_inputs(&model, &msg, g.features())?;
    let enc = match model.kind() {
        ModelKind::Baseline => None,
        _ => Some(cfg.load_encoder()?),
    };
    let repo_path = cfg.repository_path();
    let repo: Option<VsfRepository> = match model.kind() {
        ModelKind::Egvn => {
            let ctx = context(cfg, g, splits, enc.as_ref(), cache, Some(&repo_path), exec);
            Some(message_repository(&ctx, &model.cfg)?.0)
        }
        _ => None,
    };
    let input = match (&repo, &enc) {
        (Some(r), _) => VisualInput::Repo(r),
        (None, Some(e)) => VisualInput::Encoder(e),
        _ => VisualInput::None,
    };
    let mut provider = VisionProvider::new(&model, &msg, input, exec)?;
    let test = evaluate(&model, &inputs, &mut provider, &splits.test_pos, &splits.test_neg)?;
    let rep = EvalReport::aggregate(
        &cfg.dataset.name,
        &gvn_core::train::model_label(&model.cfg),
        cfg.seeds[..1].to_vec(),
        &[test],
        provider.counters.encodes as u64,
        provider.counters.renders as u64,
        start.elapsed().as_secs_f64(),
    );
    write_report(cfg, "eval", rep)
}

fn parse_sf(s: &str) -> Result<SfKind> {
    SfKind::ALL
        .into_iter()
        .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
        .ok_or_else(|| CliError::Usage(format!("unknown structural feature '{s}'")))
}

fn cmd_probe(
    cfg: &RunConfig,
    g: &Graph,
    splits: &SplitSet,
    cache: &RenderCache,
    probe: ProbeCommand,
    exec: Exec,
) -> Result<()> {
    match probe {
        ProbeCommand::Reproduction {
            targets,
            pairs,
            finetune,
        } => {
            let kinds = targets.split(',').map(parse_sf).collect::<Result<Vec<_>>>()?;
            let msg = splits.message_graph(g)?;
            let probe_pairs: Vec<_> = splits.train_pos.iter().take(pairs).copied().collect();
            if probe_pairs.is_empty() {
                return Err(CliError::Usage("no training links to probe".into()));
            }
            let enc = cfg.load_encoder()?;
            let style = cfg.model.style.to_style();
            let k = cfg.model.k;
            let views = probe_pairs
                .iter()
                .map(|&(u, v)| k_hop_link_subgraph(&msg, u, v, k, cfg.model.mask_center_link))
                .collect::<gvn_core::Result<Vec<_>>>()?;
            let imgs = exec.try_map(&views, |v| render(v, &style, v.layout_seed()))?;
            let t = pair_targets(&msg, &probe_pairs, &kinds, k, 8.min(msg.num_nodes()))?;
            let rr = RrConfig {
                seed: cfg.seeds[0],
                ..RrConfig::default()
            };
            let rep = if finetune {
                let pre: Vec<_> = imgs.iter().map(|i| std::sync::Arc::new(enc.preprocess(i))).collect();
                reproduction_ratio(
                    ProbeInput::Finetune {
                        encoder: &enc,
                        images: &pre,
                    },
                    &t,
                    &rr,
                )?
            } else {
                let rows = enc.encode_batch(&imgs, exec);
                let x = ndarray::Array2::from_shape_fn((rows.len(), enc.output_dim()), |(i, j)| rows[i].0[j] as f64);
                reproduction_ratio(ProbeInput::Frozen(&x), &t, &rr)?
            };
            write_probe(cfg, "reproduction", &rep)
        }
        ProbeCommand::Pe { kind, dim } => {
            let pc = PeBaselineConfig {
                kind: match kind {
                    PeArg::Coords => PeKind::ImageCoords2D,
                    PeArg::Laplacian => PeKind::LaplacianPE,
                    PeArg::Distance => PeKind::DistanceVector,
                    PeArg::Degree => PeKind::DegreeCentrality,
                },
                dim,
                hidden: cfg.model.hidden,
                train: cfg.train.clone(),
                seeds: cfg.seeds.clone(),
                style: cfg.model.style.to_style(),
            };
            let rep = pe_baseline_experiment(&cfg.dataset.name, g, splits, &pc, exec)?;
            write_report(cfg, "probe-pe", rep)
        }
        ProbeCommand::Ablation { axis, grid } => {
            let axis: AblationAxis = axis.parse()?;
            let grid: Vec<String> = grid.split(',').map(|s| s.trim().to_string()).collect();
            let enc = cfg.load_encoder()?;
            let ctx = context(cfg, g, splits, Some(&enc), cache, None, exec);
            let base = cfg.model_config(g.feature_dim().max(1))?;
            let reports = ablation_driver(&ctx, axis, &grid, &base, &cfg.train, &cfg.seeds)?;
            for (value, rep) in grid.iter().zip(reports) {
                write_report(cfg, &format!("ablation-{}-{value}", axis.name()), rep)?;
            }
            Ok(())
        }
        ProbeCommand::Isomorphic | ProbeCommand::Substructure { .. } => unreachable!("handled before data loading"),
    }
}
