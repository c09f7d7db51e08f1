//! Command-line interface wiring datagen -> anonymize -> attack ->
//! evaluate. Paper-default parameters are the flag defaults; every
//! experiment parameter is settable via flag or config file. Relative
//! output paths are resolved against ATHD_OUT_DIR when it is set.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::anonymize::{build_release, StructAnonConfig, StructMethod, TextMethod};
use crate::attack::{AttackConfig, Attacker, Metric};
use crate::datagen::{generate, GenConfig};
use crate::dp::{dp_anonymize, DPConfig};
use crate::error::{Error, Result};
use crate::eval::{render_csv, render_text, run_matrix, sample_seed_map, ExperimentPlan};
use crate::model::{
    load_dataset, load_network, load_truth, save_dataset, save_network, save_truth,
};
use crate::target::{MatchMode, SearchQuery, TargetConfig, TargetNetwork};

#[derive(Parser)]
#[command(
    name = "athd",
    about = "Anonymize heterogeneous social data and attack the releases with ATHD",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic social network with ground-truth metadata.
    Datagen(DatagenArgs),
    /// Structurally anonymize a network into a released dataset.
    Anonymize(AnonymizeArgs),
    /// Re-anonymize the textual part of a released dataset.
    AnonymizeText(AnonymizeTextArgs),
    /// Query the simulated target network's search engine.
    Query(QueryArgs),
    /// De-anonymize a released dataset against a target network.
    Attack(AttackArgs),
    /// Run the full anonymization x attack matrix and report.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct DatagenArgs {
    /// TOML generator config; see configs/gen-small.toml.
    #[arg(long)]
    config: PathBuf,
    /// Output network file; a .meta sidecar records topics and handles.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnonymizeArgs {
    #[arg(long)]
    method: StructMethod,
    /// Anonymization coefficient for sparsification/switching/perturbation.
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    /// k for the k-degree anonymity methods.
    #[arg(long = "k-anon", alias = "k", default_value_t = 10)]
    k_anon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "in")]
    input: PathBuf,
    /// Output dataset; a .truth sidecar records the pseudonym mapping.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnonymizeTextArgs {
    #[arg(long)]
    method: TextMethod,
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    /// Replaces the computed sensitivity.
    #[arg(long = "sensitivity-override")]
    sensitivity_override: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    network: PathBuf,
    /// Space-separated keywords.
    #[arg(long)]
    words: String,
    #[arg(long, default_value_t = 100)]
    limit: usize,
    /// all = conjunctive, any = disjunctive.
    #[arg(long, default_value = "all")]
    mode: String,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// The un-anonymized network standing in for the live platform.
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    metric: Metric,
    /// Optional TOML attack config; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ground-truth sidecar for the seed-based baselines
    /// (default: <dataset>.truth).
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "k-posts")]
    k_posts: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda: Option<usize>,
    #[arg(long)]
    theta: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long = "bin-width")]
    bin_width: Option<usize>,
    #[arg(long)]
    h: Option<usize>,
    /// Seed-set size for the baselines.
    #[arg(long, default_value_t = 20)]
    nu: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "query-limit", default_value_t = 100)]
    query_limit: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    network: PathBuf,
    /// TOML experiment plan; see configs/plan-default.toml.
    #[arg(long)]
    plan: PathBuf,
    /// Output directory for report.csv and report.txt.
    #[arg(long)]
    out: PathBuf,
}

impl clap::builder::ValueParserFactory for StructMethod {
    type Parser = clap::builder::ValueParser;
    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| s.parse::<StructMethod>().map_err(|e| e.to_string()))
    }
}

impl clap::builder::ValueParserFactory for TextMethod {
    type Parser = clap::builder::ValueParser;
    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| s.parse::<TextMethod>().map_err(|e| e.to_string()))
    }
}

impl clap::builder::ValueParserFactory for Metric {
    type Parser = clap::builder::ValueParser;
    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| s.parse::<Metric>().map_err(|e| e.to_string()))
    }
}

/// Resolves an output path against ATHD_OUT_DIR for relative paths.
fn out_path(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Ok(dir) = std::env::var("ATHD_OUT_DIR") {
            if !dir.is_empty() {
                return PathBuf::from(dir).join(path);
            }
        }
    }
    path.to_path_buf()
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

/// Parses argv and runs the matching pipeline. Exit codes: 0 success,
/// 1 runtime failure, 2 usage error.
pub fn parse_and_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Datagen(args) => run_datagen(args),
        Command::Anonymize(args) => run_anonymize(args),
        Command::AnonymizeText(args) => run_anonymize_text(args),
        Command::Query(args) => run_query(args),
        Command::Attack(args) => run_attack(args),
        Command::Evaluate(args) => run_evaluate(args),
    }
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{what} {}: {e}", path.display())))
}

fn run_datagen(args: DatagenArgs) -> Result<()> {
    let cfg: GenConfig = read_toml(&args.config, "generator config")?;
    let (network, topics) = generate(&cfg)?;
    let out = out_path(&args.out);
    save_network(&network, &out)?;

    let meta_path = sidecar(&out, ".meta");
    let mut meta = fs::File::create(&meta_path)?;
    writeln!(meta, "meta 1")?;
    writeln!(meta, "users {}", network.n_users())?;
    for (user, topic) in network.users().zip(&topics) {
        writeln!(
            meta,
            "{user} topic {topic} handle {}",
            network.handle_of(user).unwrap_or("-")
        )?;
    }
    println!(
        "wrote {} ({} users, {} edges, {} posts) and {}",
        out.display(),
        network.n_users(),
        network.n_edges(),
        network.n_posts(),
        meta_path.display()
    );
    Ok(())
}

fn run_anonymize(args: AnonymizeArgs) -> Result<()> {
    let network = load_network(&args.input)?;
    let struct_cfg = StructAnonConfig {
        method: args.method,
        p: args.p,
        k: args.k_anon,
        rng_seed: args.seed,
    };
    // The structural step releases a naive-text dataset; anonymize-text
    // upgrades it to the DP release.
    let release = build_release(
        &network,
        &struct_cfg,
        TextMethod::Naive,
        &DPConfig {
            epsilon: 1.0,
            rng_seed: args.seed,
            sensitivity_override: None,
        },
    )?;
    for w in &release.warnings {
        eprintln!("warning: {w}");
    }
    let out = out_path(&args.out);
    save_dataset(&release.dataset, &out)?;
    let truth_path = sidecar(&out, ".truth");
    save_truth(&release.truth, &truth_path)?;
    println!(
        "wrote {} ({} structural edits) and {}",
        out.display(),
        release.edits,
        truth_path.display()
    );
    Ok(())
}

fn run_anonymize_text(args: AnonymizeTextArgs) -> Result<()> {
    let mut dataset = load_dataset(&args.input)?;
    match args.method {
        TextMethod::Naive => {
            // The released matrix is already the naive-text pipeline
            // output; re-releasing it is the identity.
        }
        TextMethod::Dp => {
            let cfg = DPConfig {
                epsilon: args.epsilon,
                rng_seed: args.seed,
                sensitivity_override: args.sensitivity_override,
            };
            dataset.post_word = dp_anonymize(&dataset.post_word, &cfg)?;
        }
    }
    let out = out_path(&args.out);
    save_dataset(&dataset, &out)?;
    let truth_src = sidecar(&args.input, ".truth");
    if truth_src.exists() {
        fs::copy(&truth_src, sidecar(&out, ".truth"))?;
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn run_query(args: QueryArgs) -> Result<()> {
    let network = load_network(&args.network)?;
    let mode = match args.mode.as_str() {
        "all" => MatchMode::All,
        "any" => MatchMode::Any,
        other => return Err(Error::Config(format!("unknown query mode '{other}'"))),
    };
    let target = TargetNetwork::build(
        &network,
        TargetConfig {
            query_limit: args.limit,
            query_mode: mode,
            caps: Default::default(),
        },
    );
    let words: Vec<String> = args.words.split_whitespace().map(str::to_string).collect();
    let query = SearchQuery::new(words)?;
    let session = target.session();
    let results = session.search(&query, None)?;
    println!("{} users match {:?}", results.len(), query.words());
    for user in results {
        match network.handle_of(user) {
            Some(handle) => println!("{user} ({handle})"),
            None => println!("{user}"),
        }
    }
    Ok(())
}

fn run_attack(args: AttackArgs) -> Result<()> {
    let dataset = load_dataset(&args.dataset)?;
    let network = load_network(&args.target)?;

    let mut cfg: AttackConfig = match &args.config {
        Some(path) => read_toml(path, "attack config")?,
        None => AttackConfig::default(),
    };
    if let Some(v) = args.k_posts {
        cfg.k_posts = v;
    }
    if let Some(v) = args.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = args.beta {
        cfg.beta = v;
    }
    if let Some(v) = args.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = args.theta {
        cfg.theta = v;
    }
    if let Some(v) = args.bins {
        cfg.bins = v;
    }
    if let Some(v) = args.bin_width {
        cfg.bin_width = v;
    }
    if let Some(v) = args.h {
        cfg.h = v;
    }
    if let Some(v) = args.seed {
        cfg.rng_seed = v;
    }

    let seed_map = if matches!(args.metric, Metric::Narayanan | Metric::Ada) {
        let truth_path = args
            .truth
            .clone()
            .unwrap_or_else(|| sidecar(&args.dataset, ".truth"));
        if !truth_path.exists() {
            return Err(Error::Config(format!(
                "metric '{}' needs a seed set; ground truth sidecar {} not found",
                args.metric,
                truth_path.display()
            )));
        }
        let truth = load_truth(&truth_path)?;
        sample_seed_map(&truth, args.nu, cfg.rng_seed)
    } else {
        BTreeMap::new()
    };

    let target = TargetNetwork::build(
        &network,
        TargetConfig {
            query_limit: args.query_limit,
            query_mode: MatchMode::All,
            caps: Default::default(),
        },
    );
    let session = target.session();
    let attacker = Attacker::new(&dataset, &session, &cfg, args.metric, seed_map)?;
    let mapping = attacker.run_all()?;

    let out = out_path(&args.out);
    let mut file = fs::File::create(&out)?;
    writeln!(
        file,
        "pseudonym,rank,candidate,sim_total,sim_struct,sim_text,sim_neighbor"
    )?;
    let mut identified = 0usize;
    for (pseudonym, ranked) in &mapping {
        if !ranked.is_empty() {
            identified += 1;
        }
        for (rank, s) in ranked.iter().enumerate() {
            writeln!(
                file,
                "{pseudonym},{},{},{},{},{},{}",
                rank + 1,
                s.candidate,
                s.sim_total,
                s.sim_struct,
                s.sim_text,
                s.sim_neighbor
            )?;
        }
    }
    let totals = session.totals();
    println!(
        "wrote {} ({} of {} users got candidates; {} searches, {} post fetches, {} neighbor calls)",
        out.display(),
        identified,
        mapping.len(),
        totals.search_calls,
        totals.post_calls,
        totals.neighbor_calls
    );
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let network = load_network(&args.network)?;
    let plan = ExperimentPlan::from_toml(&fs::read_to_string(&args.plan)?)?;
    let report = run_matrix(&plan, &network)?;

    let out_dir = out_path(&args.out);
    fs::create_dir_all(&out_dir)?;
    let csv_path = out_dir.join("report.csv");
    let txt_path = out_dir.join("report.txt");
    fs::write(&csv_path, render_csv(&report))?;
    fs::write(&txt_path, render_text(&report))?;
    println!(
        "wrote {} and {} ({} cells)",
        csv_path.display(),
        txt_path.display(),
        report.cells.len()
    );
    print!("{}", render_text(&report));
    Ok(())
}
