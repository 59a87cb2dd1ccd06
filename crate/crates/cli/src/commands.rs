use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use flowgnn_core::analysis::{run_oracle, TaskId};
use flowgnn_core::dataset::{
    dataset_stats, deserialize_examples, deserialize_graphs, encode_labels, filter_by_steps,
    generate_examples_parallel, read_text, serialize_examples, serialize_graphs, split_dataset, write_text,
    AnalysisExample,
};
use flowgnn_core::graph::{build_graph, graph_stats, to_dot, ProgramGraph};
use flowgnn_core::ir::{parse_module, print_module, validate};
use flowgnn_core::rng::derive_seed;
use flowgnn_core::synth::{synth_corpus, SynthConfig};
use flowgnn_core::vocab::{coverage, derive_vocab, Vocabulary};
use flowgnn_model::{check_model_gradients, evaluate, train, Counts, GraphStore, Metrics, ModelConfig, ModelParams};
use flowgnn_tensor::primitive_suite;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::{Cli, Command, VocabAction, VocabArgs};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Writes one line to standard output; a closed reader ends output quietly.
macro_rules! emit {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

/// The JSON file read by `train --config`. Relative paths resolve against
/// the file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRunConfig {
    pub train: PathBuf,
    pub val: PathBuf,
    pub graphs: Vec<PathBuf>,
    /// Derived from the training graphs when absent.
    #[serde(default)]
    pub vocab: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelConfig,
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    let out = cli.out.as_path();
    match &cli.command {
        Command::Parse { files } => parse(files),
        Command::Synth {
            count,
            prefix,
            max_functions,
            max_instructions,
        } => {
            let config = SynthConfig {
                max_functions: *max_functions,
                max_instructions: *max_instructions,
                ..SynthConfig::default()
            };
            for m in synth_corpus(cli.seed, *count, &config, prefix) {
                std::fs::write(out.join(format!("{}.ll", m.source_id)), print_module(&m))?;
            }
            log::info!("wrote {count} programs to {}", out.display());
            Ok(())
        }
        Command::Graph { files, dot, name, jobs } => graph(files, *dot, name, *jobs, out),
        Command::Analyze {
            task,
            root,
            graph,
            source_id,
        } => analyze(*task, *root, graph, source_id.as_deref()),
        Command::Dataset {
            task,
            ddf_steps,
            graphs,
            jobs,
            gzip,
        } => dataset(*task, *ddf_steps, graphs, *jobs, *gzip, cli.seed, out),
        Command::Vocab(args) => vocab(args, out),
        Command::Train { task, config } => train_command(*task, config, out),
        Command::Eval {
            checkpoint,
            examples,
            graphs,
            vocab,
            steps,
            mask,
            jobs,
        } => {
            let params = ModelParams::load(File::open(checkpoint)?)?;
            let examples = deserialize_examples(&read_text(examples)?)?;
            let store = graph_store(load_graphs(graphs)?)?;
            let vocab = Vocabulary::from_text(&read_text(vocab)?)?;
            if params.vocab_size() != vocab.size() {
                return Err(CliError::Data(format!(
                    "checkpoint has {} embedding rows but the vocabulary has {} entries",
                    params.vocab_size(),
                    vocab.size()
                )));
            }
            let metrics = evaluate_jobs(&params, &examples, &store, &vocab, *steps, (*mask).into(), *jobs)?;
            let line = serde_json::to_string(&metrics)?;
            std::fs::write(out.join("eval.metrics.json"), format!("{line}\n"))?;
            emit!("{line}");
            Ok(())
        }
        Command::Gradcheck {
            full_model,
            batches,
            tolerance,
        } => gradcheck(*full_model, *batches, *tolerance, cli.seed),
        Command::Replay { echo } => {
            let echo = crate::read_echo(echo)?;
            std::env::set_current_dir(&echo.cwd)?;
            let argv = std::iter::once("flowgnn".to_string()).chain(echo.argv);
            match crate::run(argv) {
                0 => Ok(()),
                code => Err(CliError::Data(format!(
                    "replayed `{}` exited with {code}",
                    echo.command
                ))),
            }
        }
    }
}

fn source_id_of(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.strip_suffix(".ll").unwrap_or(&name).to_string()
}

fn parse(files: &[PathBuf]) -> Result<()> {
    let mut dirty = 0;
    for path in files {
        let text = std::fs::read_to_string(path)?;
        let file = path.display().to_string();
        let diagnostics = match parse_module(&text, &source_id_of(path)) {
            Ok(m) => validate(&m),
            Err(d) => d,
        };
        for d in &diagnostics {
            eprintln!("{}", d.render(&file));
        }
        emit!("{}", json!({ "file": file, "diagnostics": diagnostics.len() }));
        dirty += usize::from(!diagnostics.is_empty());
    }
    if dirty > 0 {
        return Err(CliError::Data(format!(
            "{dirty} of {} files have diagnostics",
            files.len()
        )));
    }
    Ok(())
}

fn build_one(path: &Path) -> Result<ProgramGraph> {
    let text = std::fs::read_to_string(path)?;
    let file = path.display().to_string();
    let module = parse_module(&text, &source_id_of(path))
        .map_err(|d| CliError::Data(d.iter().map(|x| x.render(&file)).collect::<Vec<_>>().join("\n")))?;
    Ok(build_graph(&module)?)
}

/// Applies `f` to every item on up to `jobs` threads, keeping input order.
fn map_jobs<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if jobs <= 1 || items.len() < 2 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(f).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

fn graph(files: &[PathBuf], dot: bool, name: &str, jobs: usize, out: &Path) -> Result<()> {
    let graphs = map_jobs(files, jobs, |p| build_one(p))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let path = out.join(format!("{name}.graphs.jsonl"));
    write_text(&path, &serialize_graphs(&graphs))?;
    if dot {
        for g in &graphs {
            std::fs::write(out.join(format!("{}.dot", g.source_id)), to_dot(g))?;
        }
    }
    for g in &graphs {
        emit!("{}", json!({ "source_id": g.source_id, "stats": graph_stats(g) }));
    }
    log::info!("wrote {} graphs to {}", graphs.len(), path.display());
    Ok(())
}

fn load_graphs(paths: &[PathBuf]) -> Result<Vec<ProgramGraph>> {
    let mut graphs = Vec::new();
    for p in paths {
        graphs.extend(deserialize_graphs(&read_text(p)?)?);
    }
    Ok(graphs)
}

fn graph_store(graphs: Vec<ProgramGraph>) -> Result<GraphStore> {
    let mut store = GraphStore::with_capacity(graphs.len());
    for g in graphs {
        if let Some(dup) = store.insert(g.source_id.clone(), g) {
            return Err(CliError::Data(format!("duplicate source id `{}`", dup.source_id)));
        }
    }
    Ok(store)
}

fn analyze(task: TaskId, root: u32, path: &Path, source_id: Option<&str>) -> Result<()> {
    let graphs = load_graphs(&[path.to_path_buf()])?;
    let graph = match source_id {
        Some(id) => graphs.iter().find(|g| g.source_id == id),
        None if graphs.len() == 1 => graphs.first(),
        None => {
            return Err(CliError::Usage(format!(
                "{} graphs in file; pass --source-id",
                graphs.len()
            )))
        }
    }
    .ok_or_else(|| CliError::Data("no such graph".into()))?;
    let result = run_oracle(task, graph, root)?;
    emit!(
        "{}",
        json!({
            "source_id": graph.source_id,
            "task": task,
            "root": root,
            "labels": encode_labels(&result.labels),
            "positives": result.positives(),
            "step_count": result.step_count,
        })
    );
    Ok(())
}

fn dataset(task: TaskId, ddf: u32, graphs: &[PathBuf], jobs: usize, gzip: bool, seed: u64, out: &Path) -> Result<()> {
    let graphs = load_graphs(graphs)?;
    let examples = generate_examples_parallel(&graphs, task, derive_seed(seed, "roots"), jobs);
    // Split before filtering so a program's split never depends on N.
    let split = split_dataset(&examples, derive_seed(seed, "split"));
    let ext = if gzip { "jsonl.gz" } else { "jsonl" };
    for (name, part) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
        let kept = filter_by_steps(part, ddf);
        write_text(&out.join(format!("{task}.{name}.{ext}")), &serialize_examples(&kept))?;
        emit!("{}", json!({ "split": name, "stats": dataset_stats(&kept) }));
    }
    Ok(())
}

fn vocab(args: &VocabArgs, out: &Path) -> Result<()> {
    match &args.action {
        Some(VocabAction::Coverage { vocab, test }) => {
            let vocab = Vocabulary::from_text(&read_text(vocab)?)?;
            let c = coverage(&vocab, &load_graphs(test)?)?;
            emit!("{}", json!({ "coverage": c }));
        }
        None => {
            if args.train.is_empty() {
                return Err(CliError::Usage("vocab needs --train <graphs> or a subcommand".into()));
            }
            let vocab = derive_vocab(&load_graphs(&args.train)?);
            write_text(&out.join("vocab.txt"), &vocab.to_text())?;
            emit!("{}", json!({ "size": vocab.size() }));
        }
    }
    Ok(())
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_examples(path: &Path, task: TaskId) -> Result<Vec<AnalysisExample>> {
    let examples = deserialize_examples(&read_text(path)?)?;
    if let Some(e) = examples.iter().find(|e| e.task != task) {
        return Err(CliError::Data(format!(
            "{}: example for {} in a {task} run",
            path.display(),
            e.task
        )));
    }
    Ok(examples)
}

fn train_command(task: TaskId, config_path: &Path, out: &Path) -> Result<()> {
    let config: TrainRunConfig = serde_json::from_str(&std::fs::read_to_string(config_path)?)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let train_ex = read_examples(&resolve(base, &config.train), task)?;
    let val_ex = read_examples(&resolve(base, &config.val), task)?;
    let graph_paths: Vec<PathBuf> = config.graphs.iter().map(|p| resolve(base, p)).collect();
    let store = graph_store(load_graphs(&graph_paths)?)?;
    let vocab = match &config.vocab {
        Some(p) => Vocabulary::from_text(&read_text(&resolve(base, p))?)?,
        None => {
            let mut ids: Vec<&str> = train_ex.iter().map(|e| e.source_id.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            let train_graphs = ids
                .iter()
                .map(|id| {
                    store
                        .get(*id)
                        .cloned()
                        .ok_or_else(|| CliError::Data(format!("no graph `{id}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            let v = derive_vocab(&train_graphs);
            write_text(&out.join(format!("{task}.vocab.txt")), &v.to_text())?;
            v
        }
    };
    let outcome = train(&train_ex, &val_ex, &store, &vocab, &config.model)?;
    outcome
        .params
        .save(BufWriter::new(File::create(out.join(format!("{task}.ckpt")))?))?;
    let history: String = outcome
        .history
        .iter()
        .map(|h| serde_json::to_string(h).map(|s| s + "\n"))
        .collect::<std::result::Result<_, _>>()?;
    std::fs::write(out.join(format!("{task}.history.jsonl")), history)?;
    emit!(
        "{}",
        json!({ "task": task, "steps": outcome.steps, "examples_seen": outcome.examples_seen, "best_val_f1": outcome.best_f1 })
    );
    Ok(())
}

fn evaluate_jobs(
    params: &ModelParams,
    examples: &[AnalysisExample],
    store: &GraphStore,
    vocab: &Vocabulary,
    steps: usize,
    mask: flowgnn_model::MaskMode,
    jobs: usize,
) -> Result<Metrics> {
    let chunks: Vec<&[AnalysisExample]> = if examples.is_empty() {
        Vec::new()
    } else {
        examples.chunks(examples.len().div_ceil(jobs.max(1))).collect()
    };
    let mut counts = Counts::default();
    for m in map_jobs(&chunks, jobs, |part| evaluate(params, part, store, vocab, steps, mask)) {
        counts.merge(m?.counts);
    }
    Ok(Metrics::from_counts(counts))
}

fn gradcheck(full_model: bool, batches: usize, tolerance: f64, seed: u64) -> Result<()> {
    let mut failures = Vec::new();
    if full_model {
        for b in 0..batches {
            let steps = 1 + b % 3;
            let r = check_model_gradients(derive_seed(seed, &format!("batch{b}")), steps, Some(8))?;
            emit!(
                "{}",
                json!({ "batch": b, "steps": steps, "max_relative_error": r.max_relative_error, "checked": r.checked })
            );
            if r.max_relative_error >= tolerance {
                failures.push(format!("batch {b}"));
            }
        }
    } else {
        for (name, r) in primitive_suite(seed)? {
            emit!(
                "{}",
                json!({ "check": name, "max_relative_error": r.max_relative_error, "checked": r.checked })
            );
            if r.max_relative_error >= tolerance {
                failures.push(name.to_string());
            }
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(failures.join(", ")))
    }
}
