use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use relprobe_core::exec::{self, Execution};
use relprobe_core::harness::{self, HarnessConfig, RESULTS_FILE};
use relprobe_core::kg::{tsv, Dataset, LabeledFact, Proportion, SplitKind};
use relprobe_core::models::{checkpoint, ModelConfig, ModelKind};
use relprobe_core::oracle::{family_oracle_ap, property_oracle_ap, ClosureOptions};
use relprobe_core::synth::families::{build_family_dataset, generate_world};
use relprobe_core::synth::properties::{build_individual_datasets, build_joint_dataset, check_properties};
use relprobe_core::synth::{FamilySplit, PropertyCombo, SignMatrix};
use relprobe_core::trainer::{evaluate, train, TrainConfig};

#[derive(Parser)]
#[command(name = "relprobe", version, about = "Latent factor models against synthetic relational benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every pending cell of an experiment config.
    Run(RunArgs),
    /// Write a synthetic dataset as TSV.
    Generate(GenerateArgs),
    /// Verify the algebraic properties of each relation in a TSV file or dataset directory.
    Check { path: PathBuf },
    /// Train one (model, K, λ) cell on a dataset directory.
    Train(TrainArgs),
    /// Score a checkpoint against a TSV file or the test set of a dataset directory.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// TSV file or dataset directory.
        #[arg(long)]
        data: PathBuf,
    },
    /// Score the logic baseline on the test set of a dataset directory.
    Oracle(OracleArgs),
    /// Aggregate a results file into one CSV per (experiment, split, p).
    Plot {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Config whose grid cells should all appear, blank if missing.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `out_dir`, then `./results`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "RELPROBE_SEED")]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    jobs: Option<usize>,
    /// Run cells one after another on the calling thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenerateKind {
    /// One relation with declared properties, ten folds.
    Individual,
    /// Five relations learnt together.
    Joint,
    /// Five kinship families.
    Family,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    kind: GenerateKind,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "RELPROBE_SEED", default_value_t = 0)]
    seed: u64,
    /// Property combination, e.g. `reflexive+antisymmetric+transitive`.
    #[arg(long, default_value = "symmetric")]
    combo: PropertyCombo,
    #[arg(long, default_value_t = 50)]
    entities: usize,
    /// Training fraction for joint and family data.
    #[arg(long, default_value = "0.8")]
    p: Proportion,
    /// Family split: random, evidence or family.
    #[arg(long, default_value = "random")]
    split: SplitKind,
    /// Also write each family tree as Graphviz.
    #[arg(long)]
    dot: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: ModelKind,
    #[arg(long, default_value_t = 20)]
    rank: usize,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, env = "RELPROBE_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batches: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    /// Use the update `α/(g + ε)` without the square root.
    #[arg(long)]
    no_sqrt: bool,
    /// Family defaults: 100 batches, 1000 epochs.
    #[arg(long)]
    family: bool,
    /// Write the per-epoch log here as CSV.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    data: PathBuf,
    /// Kinship data; otherwise one property combination per relation.
    #[arg(long)]
    family: bool,
    /// Property combination of each relation, in relation order.
    #[arg(long, value_delimiter = ',')]
    combos: Vec<PropertyCombo>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run(a) => cmd_run(a),
        Command::Generate(a) => cmd_generate(a).map(|_| ExitCode::SUCCESS),
        Command::Check { path } => cmd_check(&path),
        Command::Train(a) => cmd_train(a).map(|_| ExitCode::SUCCESS),
        Command::Eval { checkpoint, data } => cmd_eval(&checkpoint, &data).map(|_| ExitCode::SUCCESS),
        Command::Oracle(a) => cmd_oracle(a).map(|_| ExitCode::SUCCESS),
        Command::Plot { results, out, config } => {
            let cfg = config.map(|p| HarnessConfig::load(&p)).transpose()?;
            for f in harness::emit_plot_data(&results, &out, cfg.as_ref())? {
                println!("{}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn cmd_run(a: RunArgs) -> Result<ExitCode> {
    let mut cfg = HarnessConfig::load(&a.config).with_context(|| format!("loading {}", a.config.display()))?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = a.jobs {
        cfg.jobs = jobs;
    }
    let out = a.out.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("results"));
    let mode = if a.sequential { Execution::Sequential } else { Execution::Parallel };
    let summary = exec::with_workers(cfg.jobs, || harness::run(&cfg, &out, mode))?;
    println!(
        "{} cells: {} skipped, {} completed, {} failed; results in {}",
        summary.total,
        summary.skipped,
        summary.completed,
        summary.failed,
        out.join(RESULTS_FILE).display()
    );
    Ok(if summary.failed > 0 { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    match a.kind {
        GenerateKind::Individual => {
            for (k, d) in build_individual_datasets(a.combo, a.entities, a.seed)?.iter().enumerate() {
                tsv::write_dataset(&a.out.join(format!("fold{k}")), d)?;
            }
        }
        GenerateKind::Joint => tsv::write_dataset(&a.out, &build_joint_dataset(a.p, a.entities, a.seed)?)?,
        GenerateKind::Family => {
            let data = build_family_dataset(FamilySplit::new(a.split, a.p)?, a.seed)?;
            tsv::write_dataset(&a.out, &data)?;
            if a.dot {
                // Same derivation as the dataset builder.
                for tree in generate_world(relprobe_core::seed::derive(a.seed, 0)) {
                    fs::write(a.out.join(format!("family{}.dot", tree.family)), tree.to_dot())?;
                }
            }
        }
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

/// Every fact of a dataset directory, or of a single TSV file.
fn load_facts(path: &Path) -> Result<(Vec<LabeledFact>, Option<Dataset>)> {
    if path.is_dir() {
        let d = tsv::read_dataset(path)?;
        let all = d.train().iter().chain(d.valid()).chain(d.test()).copied().collect();
        Ok((all, Some(d)))
    } else {
        let vocab = path.parent().map(tsv::read_vocab).transpose()?.flatten();
        let facts = tsv::read_facts(fs::File::open(path)?, vocab.as_ref())?;
        Ok((facts, None))
    }
}

fn cmd_check(path: &Path) -> Result<ExitCode> {
    let (facts, _) = load_facts(path)?;
    if facts.is_empty() {
        bail!("{} holds no facts", path.display());
    }
    let vocab = tsv::infer_vocab(facts.iter())?;
    let n = vocab.entity_count();
    let relations: std::collections::BTreeSet<usize> = facts.iter().map(|f| f.triple.relation).collect();
    for r in relations {
        let m = SignMatrix::from_facts(&facts, r, n).with_context(|| format!("relation {r}"))?;
        println!("relation {r}: {} positives of {}; {}", m.positives(), n * n, check_properties(&m));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let data = tsv::read_dataset(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let model = ModelConfig::new(a.model, a.rank, a.lambda)?;
    let base = if a.family { TrainConfig::families(a.seed) } else { TrainConfig::properties(a.seed) };
    let cfg = TrainConfig {
        max_epochs: a.epochs.unwrap_or(base.max_epochs),
        batch_count: a.batches.unwrap_or(base.batch_count),
        eval_every: a.eval_every.unwrap_or(base.eval_every),
        adagrad_sqrt: !a.no_sqrt,
        ..base
    };
    let out = train(&model, &cfg, &data)?;
    if let Some(path) = &a.log {
        out.history.write_csv(fs::File::create(path)?)?;
    }
    if let Some(path) = &a.checkpoint {
        checkpoint::save(&out.store, path)?;
    }
    let valid = evaluate(&out.store, data.valid())?;
    print!("{} K={} lambda={}: valid AP {valid:.6}", a.model, a.rank, a.lambda);
    if !data.test().is_empty() {
        print!(", test AP {:.6}", evaluate(&out.store, data.test())?);
    }
    println!(" (best epoch {:?})", out.history.best_epoch);
    Ok(())
}

fn cmd_eval(ckpt: &Path, data: &Path) -> Result<()> {
    let store = checkpoint::load(ckpt).with_context(|| format!("loading {}", ckpt.display()))?;
    let facts = match load_facts(data)? {
        (_, Some(d)) => d.test().to_vec(),
        (facts, None) => facts,
    };
    println!("AP {:.6} on {} facts", evaluate(&store, &facts)?, facts.len());
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> Result<()> {
    let data = tsv::read_dataset(&a.data)?;
    let ap = if a.family {
        family_oracle_ap(&data)?
    } else {
        let combos = if a.combos.is_empty() {
            // Generated datasets name each relation after its combination.
            let names = data.vocab().relation_names().context("no relation names; pass --combos")?;
            names.iter().map(|n| n.parse()).collect::<Result<Vec<PropertyCombo>, _>>()?
        } else {
            a.combos
        };
        property_oracle_ap(&data, &combos, ClosureOptions::default())?
    };
    println!("oracle AP {ap:.6}");
    Ok(())
}
