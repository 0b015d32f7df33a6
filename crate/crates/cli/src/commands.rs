//! Subcommand implementations.

use crate::{
    AblateArgs, Cli, ConvertArgs, EvalArgs, GroundArgs, ReportArgs, SampleFocusArgs,
    SeqRenderArgs, SynthArgs, TrainArgs,
};
use anyhow::{anyhow, bail, Context, Result};
use prsel_core::config::{resolve, CliOverrides, FileConfig, ResolvedConfig};
use prsel_core::corpus::synth::{synth_focus, synth_generic, synth_personachat, SynthConfig};
use prsel_core::corpus::{
    convert_focus_json, convert_personachat_txt, load_focus_dialogues, load_generic_dialogue,
    load_personachat, sample_focus_negatives, write_instances, LoadOptions, PersonaSide,
};
use prsel_core::data::{
    parse_speaker, DialogueRecord, PersonaVersion, SelectionInstance, Utterance, UtteranceRecord,
};
use prsel_core::encoder::{
    holdout_split, load_checkpoint, resolve_encoder, save_checkpoint, BuilderMode,
    CheckpointMeta, ClassificationHead, SelectionModel,
};
use prsel_core::evalab::{
    recall_at_1, recount_from_dump, render_csv, render_text_table, run_ablation, AblationModels,
    AblationSpec, GridCell, RunReport,
};
use prsel_core::fingerprint::fingerprint;
use prsel_core::grounding::{
    ground_topk, grounding_recall_at_k, resolve_similarity, EmbeddingCache, RecallRule,
};
use prsel_core::ranker::{Method, Ranker};
use prsel_core::run::{resolve_run_root, RunDir};
use prsel_core::seqbuild::{build_prompted, PersonaSeparator};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

fn resolved_config(cli: &Cli, overrides: CliOverrides) -> Result<ResolvedConfig> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mut overrides = overrides;
    if overrides.seed.is_none() {
        overrides.seed = cli.seed;
    }
    Ok(resolve(&overrides, &file)?)
}

fn parse_version(s: &str) -> Result<PersonaVersion> {
    Ok(s.parse::<PersonaVersion>()?)
}

// ---------------------------------------------------------------------------
// corpus
// ---------------------------------------------------------------------------

pub(crate) fn convert(_cli: &Cli, args: &ConvertArgs) -> Result<()> {
    match args.from.as_str() {
        "personachat-txt" => {
            let version = parse_version(&args.version)?;
            let side: PersonaSide = args.persona_side.parse()?;
            let n = convert_personachat_txt(&args.input, &args.output, version, side)?;
            println!("wrote {n} instances to {}", args.output.display());
        }
        "focus-json" => {
            let n = convert_focus_json(&args.input, &args.output)?;
            println!("wrote {n} dialogues to {}", args.output.display());
        }
        other => bail!("unknown raw format '{other}' (expected personachat-txt or focus-json)"),
    }
    Ok(())
}

pub(crate) fn sample_focus(cli: &Cli, args: &SampleFocusArgs) -> Result<()> {
    let seed = cli.seed.unwrap_or(args.seed);
    let dialogues = load_focus_dialogues(&args.input)?;
    let load = sample_focus_negatives(&dialogues, seed, args.n_context, args.n_random)?;
    for w in &load.warnings {
        tracing::debug!("{w}");
    }
    let n_warnings = load.warnings.len();
    if n_warnings > 0 {
        tracing::warn!(
            "{n_warnings} sampling warnings (short context histories backfilled); \
             rerun with RUST_LOG=debug for details"
        );
    }
    write_instances(&args.output, &load.instances)?;
    println!(
        "wrote {} instances to {} ({} warnings)",
        load.instances.len(),
        args.output.display(),
        n_warnings
    );
    Ok(())
}

pub(crate) fn synth(cli: &Cli, args: &SynthArgs) -> Result<()> {
    let seed = cli.seed.unwrap_or(args.seed);
    let cfg = SynthConfig {
        n_dialogues: args.n_dialogues,
        exchanges_per_dialogue: args.exchanges,
        n_candidates: 20,
        persona_version: parse_version(&args.persona)?,
        small_talk_fraction: args.small_talk,
        seed,
    };
    match args.kind.as_str() {
        "personachat" => {
            let instances = synth_personachat(&cfg)?;
            write_instances(&args.output, &instances)?;
            println!("wrote {} instances to {}", instances.len(), args.output.display());
        }
        "focus" => {
            let dialogues = synth_focus(&cfg)?;
            let mut out = std::fs::File::create(&args.output)
                .with_context(|| args.output.display().to_string())?;
            for d in &dialogues {
                let record = DialogueRecord {
                    id: d.dialogue_id.clone(),
                    persona: d.persona.sentences().to_vec(),
                    persona_version: Some(d.persona.version.to_string()),
                    turns: d
                        .turns
                        .iter()
                        .map(|u| UtteranceRecord {
                            speaker: u.speaker.to_string(),
                            text: u.text.clone(),
                        })
                        .collect(),
                    grounding_labels_per_turn: Some(d.grounding_labels_per_turn.clone()),
                };
                writeln!(out, "{}", serde_json::to_string(&record)?)?;
            }
            println!("wrote {} dialogues to {}", dialogues.len(), args.output.display());
        }
        "generic" => {
            let records = synth_generic(args.n_dialogues, args.exchanges, seed);
            let mut out = std::fs::File::create(&args.output)
                .with_context(|| args.output.display().to_string())?;
            for r in &records {
                writeln!(out, "{}", serde_json::to_string(r)?)?;
            }
            println!("wrote {} dialogues to {}", records.len(), args.output.display());
        }
        other => bail!("unknown synth kind '{other}'"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

pub(crate) fn train(cli: &Cli, args: &TrainArgs) -> Result<()> {
    let config = resolved_config(
        cli,
        CliOverrides {
            learning_rate: args.learning_rate,
            epochs: args.epochs,
            batch_size: args.batch_size,
            checkpoint_id: args.backend.clone(),
            ..CliOverrides::default()
        },
    )?;
    let version = parse_version(&args.persona)?;
    let prompted = match args.mode.as_str() {
        "standard" => false,
        "prompted" => true,
        other => bail!("unknown mode '{other}' (expected standard or prompted)"),
    };
    let mut train_cfg = config.train_config(prompted);
    train_cfg.neg_per_pos = args.neg_per_pos.or(train_cfg.neg_per_pos);

    let opts = LoadOptions {
        allow_variable_candidates: args.allow_variable_candidates,
    };
    let train_instances = match args.format.as_str() {
        "instances" => load_personachat(&args.train, version, opts)?.into_instances(),
        "dialogues" => {
            load_generic_dialogue(&args.train, args.n_negatives, train_cfg.seed)?.into_instances()
        }
        other => bail!("unknown format '{other}'"),
    };
    let (train_slice, val_slice) = match &args.val {
        Some(path) => {
            let val = load_personachat(path, version, opts)?.into_instances();
            (train_instances, val)
        }
        None => holdout_split(train_instances, config.train.val_fraction, train_cfg.seed),
    };

    let backend = resolve_encoder(&config.encoder.checkpoint_id, config.encoder.max_positions)?;
    let max_positions = backend.max_positions();
    let token_len = {
        let b = Arc::clone(&backend);
        move |t: &str| b.token_len(t)
    };

    // Sequence assembly for training examples. Prompted mode grounds each
    // candidate exactly the way inference does.
    let similarity = resolve_similarity(&config.grounding.similarity)?;
    let cache = EmbeddingCache::for_backend(similarity.as_ref());
    let ranker_cfg = config.ranker_config(Method::P5Finetuned, version);
    let assemble = |inst: &SelectionInstance, c: usize| -> prsel_core::Result<_> {
        let candidate = &inst.candidates[c];
        let seq = if prompted && !inst.persona.is_empty() {
            let grounded = ground_topk(
                similarity.as_ref(),
                &cache,
                candidate,
                &inst.persona,
                ranker_cfg.k,
            )?;
            let mut sentences = grounded.sentences();
            if ranker_cfg.order == prsel_core::ranker::PersonaOrder::Descending {
                sentences.reverse();
            }
            build_prompted(
                &ranker_cfg.prompt_question,
                &sentences,
                &inst.context,
                candidate,
                ranker_cfg.persona_separator,
            )?
        } else {
            prsel_core::seqbuild::build_standard(&inst.context, candidate)?
        };
        Ok(prsel_core::seqbuild::truncate(&seq, max_positions, &token_len)?.seq)
    };

    let started = std::time::Instant::now();
    let outcome = prsel_core::encoder::train(
        &backend,
        &train_slice,
        &val_slice,
        &train_cfg,
        &assemble,
    )?;
    for stats in &outcome.epochs {
        println!(
            "epoch {:>2}: loss {:.4}  val R@1 {:.2}",
            stats.epoch, stats.mean_loss, stats.val_r1
        );
    }

    let meta = CheckpointMeta {
        checkpoint_id: config.encoder.checkpoint_id.clone(),
        builder_mode: if prompted {
            BuilderMode::Prompted
        } else {
            BuilderMode::Standard
        },
        train_config_fingerprint: fingerprint(&train_cfg),
        best_epoch: outcome.best_epoch,
        validation_r1: outcome.best_val_r1,
        max_positions,
        hidden_size: backend.hidden_size(),
    };
    save_checkpoint(&args.out, &outcome.head, &meta)?;
    println!(
        "saved checkpoint to {} (best epoch {}, val R@1 {:.2}, {:.1}s)",
        args.out.display(),
        outcome.best_epoch,
        outcome.best_val_r1,
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// ground
// ---------------------------------------------------------------------------

pub(crate) fn ground(cli: &Cli, args: &GroundArgs) -> Result<()> {
    let config = resolved_config(
        cli,
        CliOverrides {
            similarity: args.sim.clone(),
            k: args.k,
            ..CliOverrides::default()
        },
    )?;
    let version = parse_version(&args.persona)?;
    let instances = load_personachat(
        &args.input,
        version,
        LoadOptions {
            allow_variable_candidates: args.allow_variable_candidates,
        },
    )?
    .into_instances();

    let backend = resolve_similarity(&config.grounding.similarity)?;
    let cache = match &args.cache {
        Some(path) if path.exists() => {
            let (cache, valid) = EmbeddingCache::load(path, backend.as_ref())?;
            if !valid {
                tracing::warn!("embedding cache invalidated (backend mismatch)");
            }
            cache
        }
        _ => EmbeddingCache::for_backend(backend.as_ref()),
    };

    if let Some(path) = &args.output {
        let mut out =
            std::fs::File::create(path).with_context(|| path.display().to_string())?;
        for inst in &instances {
            let grounded = ground_topk(
                backend.as_ref(),
                &cache,
                inst.gold_response(),
                &inst.persona,
                config.grounding.k,
            )?;
            let record = serde_json::json!({
                "id": inst.instance_id,
                "k": grounded.k_requested,
                "entries": grounded.entries,
            });
            writeln!(out, "{record}")?;
        }
        println!(
            "wrote grounded personas for {} instances to {}",
            instances.len(),
            path.display()
        );
    }

    if let Some(max_k) = args.recall_max {
        let rule = match args.rule.as_str() {
            "any" => RecallRule::Any,
            "all" => RecallRule::All,
            other => bail!("unknown rule '{other}'"),
        };
        for k in 1..=max_k {
            let r = grounding_recall_at_k(backend.as_ref(), &cache, &instances, k, rule)?;
            println!("grounding R@{k} = {r:.2}");
        }
    }

    if let Some(path) = &args.cache {
        cache.save(path)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

fn load_model(
    checkpoint: Option<&Path>,
    fallback_backend: &str,
    config: &ResolvedConfig,
) -> Result<(SelectionModel, String)> {
    match checkpoint {
        Some(dir) => {
            let (model, meta) = load_checkpoint(dir)?;
            Ok((model, meta.train_config_fingerprint))
        }
        None => {
            // Smoke mode: untrained backend with a seeded head.
            let backend = resolve_encoder(fallback_backend, config.encoder.max_positions)?;
            let head = ClassificationHead::seeded(backend.hidden_size(), config.seed);
            let model = SelectionModel::new(backend, head)?;
            Ok((model, format!("untrained-{fallback_backend}")))
        }
    }
}

pub(crate) fn eval(cli: &Cli, args: &EvalArgs) -> Result<()> {
    let order = match &args.order {
        Some(o) => Some(o.parse()?),
        None => None,
    };
    let config = resolved_config(
        cli,
        CliOverrides {
            similarity: args.sim.clone(),
            k: args.k,
            alpha: args.alpha,
            prompt_question: args.question.clone(),
            order,
            persona_enabled: args.persona_enabled,
            ..CliOverrides::default()
        },
    )?;
    let method: Method = args.method.parse()?;
    let version = parse_version(&args.persona)?;
    let instances = load_personachat(
        &args.dataset,
        version,
        LoadOptions {
            allow_variable_candidates: args.allow_variable_candidates,
        },
    )?
    .into_instances();
    if instances.is_empty() {
        bail!("dataset {} contains no instances", args.dataset.display());
    }

    if args.repeats == 0 {
        bail!("--repeats must be >= 1");
    }
    let similarity = resolve_similarity(&config.grounding.similarity)?;
    let mut ranker_cfg = config.ranker_config(method, version);
    ranker_cfg.sim_threshold = args.sim_threshold;

    let config_json = serde_json::to_value(&config)?;
    let seeds = BTreeMap::from([("run".to_string(), config.seed)]);
    let run_id = fingerprint(&(
        "eval",
        &config_json,
        &seeds,
        args.repeats,
        &method.to_string(),
        &version.to_string(),
        args.dataset.display().to_string(),
        args.checkpoint.as_ref().map(|p| p.display().to_string()),
        &args.backend,
    ));
    let root = resolve_run_root(cli.run_root.as_deref().and_then(|p| p.to_str()));
    let mut run = RunDir::create(&root, &run_id, "eval", config_json, seeds)?;

    let mut cells = Vec::new();
    let mut values = Vec::new();
    let mut model_fingerprint = String::new();
    for rep in 0..args.repeats {
        let mut rep_config = config.clone();
        rep_config.seed = config.seed + rep as u64;
        let (model, fp) = load_model(args.checkpoint.as_deref(), &args.backend, &rep_config)?;
        model_fingerprint = fp;
        let ranker = Ranker::new(model).with_similarity(Arc::clone(&similarity));
        let rankings = ranker.rank_all(&instances, &ranker_cfg)?;
        let cell_fp = fingerprint(&(&ranker_cfg, &rep_config, &model_fingerprint));
        let metric = recall_at_1(&rankings, &instances, &cell_fp)?;
        values.push(metric.value);

        let label = if args.repeats == 1 {
            method.to_string()
        } else {
            format!("{method}#rep{rep}")
        };
        run.write_ranking_dump(&label, method, &rankings)?;
        // The report must be recomputable from the dump alone; enforce it now.
        let dump_path = run.path.join(format!("rankings-{}.jsonl", sanitize(&label)));
        let recount = recount_from_dump(&prsel_core::ranker::read_rankings(&dump_path)?);
        if (recount - metric.value).abs() > 1e-9 {
            bail!("dump recount {recount} disagrees with metric {}", metric.value);
        }
        cells.push(GridCell { label, metric });
    }
    if args.repeats > 1 {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let fp = fingerprint(&(&ranker_cfg, &config, "summary"));
        for (name, value) in [("mean", mean), ("std", std)] {
            cells.push(GridCell {
                label: format!("{method} {name}"),
                metric: prsel_core::evalab::MetricResult {
                    name: format!("R20@1-{name}"),
                    value,
                    n_instances: instances.len(),
                    config_fingerprint: fp.clone(),
                },
            });
        }
    }
    let report = RunReport::from_cells(
        &run_id,
        args.dataset.display().to_string(),
        version.to_string(),
        &cells,
        BTreeMap::from([("run".to_string(), config.seed)]),
        BTreeMap::from([("model".to_string(), model_fingerprint)]),
    );
    run.write_report(&report)?;
    run.finish()?;

    print!("{}", render_text_table(&report));
    println!("run directory: {}", root.join(&run_id).display());
    Ok(())
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { '_' })
        .collect()
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

/// Ablation run description: dataset, model snapshots, and the grid axes.
#[derive(Debug, Deserialize)]
struct AblateFile {
    dataset: PathBuf,
    #[serde(default = "default_persona")]
    persona: String,
    /// Trained standard checkpoint; omit to use an untrained stub backend.
    checkpoint: Option<PathBuf>,
    #[serde(default = "default_backend")]
    backend: String,
    prompted_checkpoint: Option<PathBuf>,
    minus_d_checkpoint: Option<PathBuf>,
    #[serde(default = "default_similarity")]
    similarity: String,
    /// Training utterances for the random prompt variant (instance JSONL).
    training_utterances_from: Option<PathBuf>,
    #[serde(default)]
    allow_variable_candidates: bool,
    #[serde(flatten)]
    spec: AblationSpec,
}

fn default_persona() -> String {
    "original".into()
}
fn default_backend() -> String {
    "stub-hash-16".into()
}
fn default_similarity() -> String {
    "contrastive".into()
}

pub(crate) fn ablate(cli: &Cli, args: &AblateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.spec)
        .with_context(|| args.spec.display().to_string())?;
    let mut file: AblateFile = toml::from_str(&text)
        .with_context(|| format!("parsing {}", args.spec.display()))?;
    if let Some(seed) = cli.seed {
        file.spec.seed = seed;
    }
    let config = resolved_config(cli, CliOverrides::default())?;
    let version = parse_version(&file.persona)?;
    let instances = load_personachat(
        &file.dataset,
        version,
        LoadOptions {
            allow_variable_candidates: file.allow_variable_candidates,
        },
    )?
    .into_instances();

    let (standard, standard_fp) =
        load_model(file.checkpoint.as_deref(), &file.backend, &config)?;
    let prompted = match &file.prompted_checkpoint {
        Some(dir) => Some(load_checkpoint(dir)?.0),
        None => None,
    };
    let external = match &file.minus_d_checkpoint {
        Some(dir) => Some(load_checkpoint(dir)?.0),
        None => None,
    };
    let models = AblationModels {
        standard,
        prompted,
        external,
    };

    let training_utterances: Vec<String> = match &file.training_utterances_from {
        Some(path) => load_personachat(
            path,
            version,
            LoadOptions {
                allow_variable_candidates: true,
            },
        )?
        .into_instances()
        .iter()
        .flat_map(|i| i.context.iter().map(|u| u.text.clone()))
        .collect(),
        None => Vec::new(),
    };

    let base_cfg = config.ranker_config(Method::P5Zero, version);
    let outcome = run_ablation(
        &file.spec,
        &instances,
        &models,
        &base_cfg,
        &file.similarity,
        &training_utterances,
    )?;

    let config_json = serde_json::json!({
        "resolved": &config,
        "spec": &text,
    });
    let seeds = BTreeMap::from([("ablation".to_string(), file.spec.seed)]);
    let run_id = fingerprint(&("ablate", &config_json, &seeds, &standard_fp));
    let root = resolve_run_root(cli.run_root.as_deref().and_then(|p| p.to_str()));
    let mut run = RunDir::create(&root, &run_id, "ablate", config_json, seeds)?;
    for (label, rankings) in &outcome.rankings {
        run.write_ranking_dump(label, base_cfg.method, rankings)?;
    }
    let report = RunReport::from_cells(
        &run_id,
        file.dataset.display().to_string(),
        version.to_string(),
        &outcome.cells,
        BTreeMap::from([("ablation".to_string(), file.spec.seed)]),
        BTreeMap::from([("standard".to_string(), standard_fp)]),
    );
    run.write_report(&report)?;
    run.finish()?;
    print!("{}", render_text_table(&report));
    println!("run directory: {}", root.join(&run_id).display());
    Ok(())
}

// ---------------------------------------------------------------------------
// seq render
// ---------------------------------------------------------------------------

pub(crate) fn seq_render(_cli: &Cli, args: &SeqRenderArgs) -> Result<()> {
    let context: Vec<Utterance> = args
        .utterances
        .iter()
        .map(|raw| {
            let (speaker, text) = raw
                .split_once(':')
                .ok_or_else(|| anyhow!("utterance must look like 'A:text', got '{raw}'"))?;
            Ok(Utterance::new(parse_speaker(speaker)?, text)?)
        })
        .collect::<Result<_>>()?;
    let seq = build_prompted(
        &args.question,
        &args.personas,
        &context,
        &args.response,
        PersonaSeparator::SpaceJoined,
    )?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&seq)?);
    } else {
        println!("{}", seq.render());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

pub(crate) fn report(_cli: &Cli, args: &ReportArgs) -> Result<()> {
    if args.show_defaults {
        print!("{}", ResolvedConfig::default().to_toml()?);
        return Ok(());
    }
    let Some(dir) = &args.from else {
        bail!("pass --show-defaults or --from RUN_DIR");
    };
    let json = std::fs::read_to_string(dir.join("report.json"))
        .with_context(|| format!("{} is not a run directory", dir.display()))?;
    let report = RunReport::from_json(&json)?;
    if args.verify {
        let mut checked = 0;
        for entry in &report.grid {
            let dump = dir.join(format!("rankings-{}.jsonl", sanitize(&entry.config)));
            if dump.exists() {
                let records = prsel_core::ranker::read_rankings(&dump)?;
                let recount = recount_from_dump(&records);
                if (recount - entry.value).abs() > 1e-9 {
                    bail!(
                        "cell '{}': dump recount {recount} != reported {}",
                        entry.config,
                        entry.value
                    );
                }
                checked += 1;
            }
        }
        println!("verified {checked} cells against ranking dumps");
    }
    if args.csv {
        print!("{}", render_csv(&report)?);
    } else {
        print!("{}", render_text_table(&report));
    }
    Ok(())
}
