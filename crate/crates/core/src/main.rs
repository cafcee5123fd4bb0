use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use distreg::data::{generate_synthetic, load_dataset, save_dataset, Scenario, SyntheticSpec};
use distreg::experiment::{
    grad_check, read_trials, run_experiment, write_report, write_summaries, ExperimentConfig, GradCheckOptions,
};
use distreg::kg::{load_kg, save_attribute_map, save_triples};
use distreg::{Dataset64, Error, KnowledgeGraph};

#[derive(Parser)]
#[command(
    name = "distreg",
    version,
    about = "Factor analysis regularized by knowledge-graph embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a tuple-proportion × training-fraction sweep.
    Run(RunArgs),
    /// Finite-difference check of every analytic gradient.
    Gradcheck(GradcheckArgs),
    /// Write a synthetic dataset, triple file and attribute map.
    Synth(SynthArgs),
    /// Rebuild summary tables from a trials file.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; trial k uses seed + k.
    #[arg(long)]
    seed: u64,
    #[arg(long, env = "DISTREG_OUT_DIR")]
    out_dir: PathBuf,
    #[arg(long, value_enum)]
    scenario: Scenario,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    triples: Option<PathBuf>,
    #[arg(long)]
    attribute_map: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    tuple_proportions: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    train_fractions: Option<Vec<f64>>,
    #[arg(long)]
    n_trials: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    d_x: Option<usize>,
    #[arg(long)]
    d_e: Option<usize>,
    /// Resample negatives every epoch.
    #[arg(long)]
    resample_negatives: bool,
    /// Write per-trial epoch histories.
    #[arg(long)]
    histories: bool,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    #[arg(long, hide = true)]
    corrupt_block: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    /// TOML synthetic spec; flags below override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, env = "DISTREG_OUT_DIR")]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_objects: Option<usize>,
    #[arg(long)]
    noise_std: Option<f64>,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    trials: PathBuf,
    #[arg(long, env = "DISTREG_OUT_DIR")]
    out_dir: PathBuf,
}

fn load_inputs(config: &ExperimentConfig) -> distreg::Result<(Dataset64, KnowledgeGraph)> {
    if let Some(spec) = &config.synthetic {
        let inst = generate_synthetic::<f64>(spec)?;
        return Ok((inst.dataset, inst.kg));
    }
    let dataset_path = config.dataset.as_deref().expect("validated");
    let triples_path = config.triples.as_deref().expect("validated");
    let data: Dataset64 = load_dataset(dataset_path)?;
    let kg = load_kg(triples_path, config.attribute_map.as_deref(), &data.attribute_names)?;
    Ok((data, kg))
}

fn run(args: RunArgs) -> distreg::Result<ExitCode> {
    let mut config = match &args.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    config.base_seed = args.seed;
    config.scenario = args.scenario;
    config.output_dir = Some(args.out_dir.clone());
    if args.dataset.is_some() {
        config.dataset = args.dataset;
        config.synthetic = None;
    }
    if args.triples.is_some() {
        config.triples = args.triples;
    }
    if args.attribute_map.is_some() {
        config.attribute_map = args.attribute_map;
    }
    if let Some(v) = args.tuple_proportions {
        config.tuple_proportions = v;
    }
    if let Some(v) = args.train_fractions {
        config.train_fractions = v;
    }
    if let Some(v) = args.n_trials {
        config.n_trials = v;
    }
    if let Some(v) = args.max_epochs {
        config.train.max_epochs = v;
    }
    if let Some(v) = args.learning_rate {
        config.train.adam.learning_rate = v;
    }
    if let Some(v) = args.patience {
        config.train.patience = v;
    }
    if let Some(v) = args.d_x {
        config.train.d_x = v;
    }
    if let Some(v) = args.d_e {
        config.train.d_e = v;
    }
    config.train.resample_negatives |= args.resample_negatives;
    config.write_histories |= args.histories;
    config.validate()?;

    let (data, kg) = load_inputs(&config)?;
    log::info!(
        "{} objects × {} attributes; graph: {} entities, {} relations, {} tuples, {} tied attributes",
        data.n_objects(),
        data.n_attributes(),
        kg.n_entities(),
        kg.n_relations(),
        kg.positives().len(),
        kg.n_tied()
    );
    let report = run_experiment(&config, &data, &kg)?;
    write_report(&report, &args.out_dir, config.write_histories)?;
    let failed = report.results.iter().filter(|r| !r.succeeded()).count();
    println!(
        "{} trials, {} failed; results in {}",
        report.results.len(),
        failed,
        args.out_dir.display()
    );
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn gradcheck(args: GradcheckArgs) -> ExitCode {
    let report = grad_check(&GradCheckOptions {
        instances: args.instances,
        seed: args.seed,
        step: args.step,
        tolerance: args.tolerance,
        corrupt_block: args.corrupt_block,
    });
    println!("{report}");
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn synth(args: SynthArgs) -> distreg::Result<ExitCode> {
    let mut spec = match &args.spec {
        Some(p) => toml::from_str::<SyntheticSpec>(&std::fs::read_to_string(p).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        })?)
        .map_err(|e| Error::Config(e.to_string()))?,
        None => SyntheticSpec::default(),
    };
    if let Some(s) = args.seed {
        spec.ground_truth_seed = s;
    }
    if let Some(n) = args.n_objects {
        spec.n_objects = n;
    }
    if let Some(v) = args.noise_std {
        spec.noise_std = v;
    }
    let inst = generate_synthetic::<f64>(&spec)?;
    let dir: &Path = &args.out_dir;
    save_dataset(&inst.dataset, &dir.join("dataset.csv"))?;
    save_triples(&inst.kg, &dir.join("triples.tsv"))?;
    save_attribute_map(&inst.kg, &inst.dataset.attribute_names, &dir.join("attribute_map.tsv"))?;
    std::fs::write(
        dir.join("synthetic.toml"),
        toml::to_string(&spec).expect("spec serializes"),
    )
    .map_err(|e| Error::Io {
        path: dir.join("synthetic.toml"),
        source: e,
    })?;
    println!(
        "wrote {} objects × {} attributes, {} tuples over {} entities to {}",
        inst.dataset.n_objects(),
        inst.dataset.n_attributes(),
        inst.kg.positives().len(),
        inst.kg.n_entities(),
        dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn summarize(args: SummarizeArgs) -> distreg::Result<ExitCode> {
    let results = read_trials(&args.trials)?;
    let written = write_summaries(&results, &args.out_dir)?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Gradcheck(a) => Ok(gradcheck(a)),
        Command::Synth(a) => synth(a),
        Command::Summarize(a) => summarize(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
