use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mtdea_core::config::RunConfig;
use mtdea_core::data::{load_split, metafam_generate, write_metafam, MetaFamConfig, SplitRole};
use mtdea_core::eval::{evaluate, RankingScheme};
use mtdea_core::model::{checkpoint_load, checkpoint_save, ModelScorer};
use mtdea_core::train::{adapt, train_with_progress};
use mtdea_core::verify::{run_suite, Suite};
use mtdea_core::Error;

const SEED_ENV: &str = "MTDEA_SEED";

#[derive(Parser, Debug)]
#[command(name = "mtdea", version, about = "Multi-task double-equivariant link prediction")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the MetaFam kinship dataset into a directory.
    MetafamGen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train on `<data>/train_*` with early stopping on `<data>/valid_*`.
    Train(TrainArgs),
    /// Adapt attention to a test graph, then evaluate on its missing triplets.
    AdaptEval(AdaptEvalArgs),
    /// Run a property suite: gradcheck, equivariance, exchangeability,
    /// ranking, or all.
    Verify {
        suite: String,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint path to write.
    #[arg(long)]
    out: PathBuf,
    /// Flat `key = value` run config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// History CSV path (default: `<out>.history.csv`).
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Record wall-clock seconds in the history instead of 0.
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct AdaptEvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Directory holding `test_observable.tsv` and `test_missing.tsv`.
    #[arg(long)]
    test: PathBuf,
    /// dual, entity or relation.
    #[arg(long, default_value = "dual")]
    scheme: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluate the checkpoint's weights relation-blind.
    #[arg(long)]
    homogeneous: bool,
    /// Run config for the adaptation settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for `report.csv` and `alpha.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Parse { .. } | Error::Config(_) | Error::Checkpoint(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

/// Splits `--section.key value` and `--section.key=value` overrides off the
/// argument list; clap sees the rest.
fn split_overrides(args: Vec<OsString>) -> CliResult<(Vec<OsString>, Vec<(String, String)>)> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy().into_owned();
        let Some(body) = s.strip_prefix("--").filter(|b| b.split('=').next().is_some_and(|k| k.contains('.'))) else {
            rest.push(a);
            continue;
        };
        match body.split_once('=') {
            Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| Failure::Usage(format!("--{body} needs a value")))?;
                overrides.push((body.to_string(), v.to_string_lossy().into_owned()));
            }
        }
    }
    Ok((rest, overrides))
}

fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Usage(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn resolve_seed(flag: Option<u64>) -> CliResult<u64> {
    Ok(flag.or(env_seed()?).unwrap_or(0))
}

/// Defaults, then the seed from the environment, the config file, the
/// `--key value` overrides, and finally `--seed`.
fn run_config(file: Option<&Path>, overrides: &[(String, String)], seed: Option<u64>) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(s) = env_seed()? {
        cfg.train.seed = s;
    }
    if let Some(path) = file {
        cfg.apply_text(&fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?, path)?;
    }
    for (k, v) in overrides {
        cfg.set(k, v).map_err(|e| Failure::Usage(format!("--{k}: {e}")))?;
    }
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn require_dir(dir: &Path) -> CliResult {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{} is not a directory", dir.display())))
    }
}

fn cmd_metafam_gen(out: &Path, seed: Option<u64>) -> CliResult {
    let seed = resolve_seed(seed)?;
    fs::create_dir_all(out).map_err(|e| Failure::Usage(format!("{}: {e}", out.display())))?;
    let data = metafam_generate(&MetaFamConfig {
        seed,
        ..MetaFamConfig::default()
    })?;
    write_metafam(&data, out)?;
    let run = "# MetaFam uses a single GIN layer.\nmodel.num_gnn_layers = 1\n";
    fs::write(out.join("run.conf"), run).map_err(Error::from)?;
    print!("{}", fs::read_to_string(out.join("stats.tsv")).map_err(Error::from)?);
    Ok(())
}

fn cmd_train(args: &TrainArgs, overrides: &[(String, String)]) -> CliResult {
    require_dir(&args.data)?;
    let cfg = run_config(args.config.as_deref(), overrides, args.seed)?;
    let train = load_split(&args.data, SplitRole::Train)?;
    let valid = if args.data.join("valid_missing.tsv").exists() {
        Some(load_split(&args.data, SplitRole::Valid)?)
    } else {
        None
    };
    let (params, history) = train_with_progress(&train, valid.as_ref(), &cfg.train, &cfg.model, &mut |e| {
        println!(
            "epoch {:>2}  loss {:.4}  val_mrr {:.4}  lambda {:.4}  {:.1}s",
            e.epoch, e.loss, e.val_mrr, e.lambda1, e.seconds
        )
    })
    .map_err(|e| match e {
        Error::NonFiniteLoss { .. } => Failure::Runtime(format!("training aborted: {e}")),
        other => other.into(),
    })?;
    checkpoint_save(&params, &args.out)?;
    let hist_path = args.history.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".history.csv");
        PathBuf::from(p)
    });
    fs::write(&hist_path, history.to_csv(args.timing)).map_err(Error::from)?;
    if let Some(best) = history.best_epoch {
        let rec = history.epochs[best];
        println!("best epoch {best}: validation dual MRR {:.4}", rec.val_mrr);
    }
    println!("checkpoint written to {}", args.out.display());
    Ok(())
}

fn alpha_csv(alpha: &mtdea_core::numeric::Tensor) -> String {
    let (rows, cols) = alpha.dims2();
    let mut s = String::from("relation");
    for k in 0..cols {
        s.push_str(&format!(",task{k}"));
    }
    s.push('\n');
    for r in 0..rows {
        s.push_str(&r.to_string());
        for v in alpha.row(r) {
            s.push_str(&format!(",{v:.12}"));
        }
        s.push('\n');
    }
    s
}

fn cmd_adapt_eval(args: &AdaptEvalArgs, overrides: &[(String, String)]) -> CliResult {
    require_dir(&args.test)?;
    let scheme: RankingScheme = args.scheme.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
    let cfg = run_config(args.config.as_deref(), overrides, args.seed)?;
    let mut params = checkpoint_load(&args.ckpt)?;
    if args.homogeneous {
        params = params.into_homogeneous();
    }
    let test = load_split(&args.test, SplitRole::Test)?;
    let adapted = adapt(&params, test.observable(), &cfg.train)?;
    let params = adapted.apply_to(&params)?;
    let scorer = ModelScorer::new(&params, test.observable())?;
    let report = evaluate(&scorer, test.observable(), test.missing(), scheme, cfg.train.seed)?;
    print!("{}", report.table(scheme.name()));
    let alpha = params.attention.alpha();
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
        fs::write(dir.join("report.csv"), report.to_csv(scheme.name())).map_err(Error::from)?;
        fs::write(dir.join("alpha.csv"), alpha_csv(&alpha)).map_err(Error::from)?;
        println!("report and attention written to {}", dir.display());
    } else {
        print!("{}", report.to_csv(scheme.name()));
    }
    Ok(())
}

fn cmd_verify(suite: &str, seed: Option<u64>) -> CliResult {
    let seed = resolve_seed(seed)?;
    let suites: Vec<Suite> = if suite == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![suite.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?]
    };
    let mut failed = Vec::new();
    for s in suites {
        let report = run_suite(s, seed)?;
        print!("{}", report.render());
        if !report.passed() {
            failed.push(s.name());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("property failures in: {}", failed.join(", "))))
    }
}

fn run(cli: Cli, overrides: &[(String, String)]) -> CliResult {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("--threads: {e}")))?;
    }
    let takes_overrides = matches!(cli.command, Command::Train(_) | Command::AdaptEval(_));
    if !overrides.is_empty() && !takes_overrides {
        return Err(Failure::Usage("config overrides only apply to train and adapt-eval".into()));
    }
    match &cli.command {
        Command::MetafamGen { out, seed } => cmd_metafam_gen(out, *seed),
        Command::Train(a) => cmd_train(a, overrides),
        Command::AdaptEval(a) => cmd_adapt_eval(a, overrides),
        Command::Verify { suite, seed } => cmd_verify(suite, *seed),
    }
}

fn main() -> ExitCode {
    let (args, overrides) = match split_overrides(std::env::args_os().collect()) {
        Ok(x) => x,
        Err(Failure::Usage(m) | Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
