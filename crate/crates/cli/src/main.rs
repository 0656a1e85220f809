use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use anonvec_core::anonymizer::{anonymize_set, AnonymizationPolicy, SeedScope, DEFAULT_FARTHEST_K, DEFAULT_SELECT_N};
use anonvec_core::asv::{score_trials, ScoreReport};
use anonvec_core::coral::{
    coral_apply_set, coral_fit, coral_fit_sampled, load_transform, save_transform, DenormMode, DEFAULT_LAMBDA,
};
use anonvec_core::harness::{self, load_scenario_file, reports_to_text, Scenario};
use anonvec_core::projection::project_2d;
use anonvec_core::store::{load_vector_set, save_vector_set_with_comments};
use anonvec_core::synth::{generate, load_spec};
use anonvec_core::trials::{generate_trials, load_trials, save_trials, split_enroll_test, ImpostorPolicy};
use anonvec_core::{io, Error, FORMAT_VERSION};

/// Speaker-vector anonymization, CORAL alignment and privacy evaluation.
#[derive(Debug, Parser)]
#[command(name = "anonvec", version)]
struct Cli {
    /// Seed for randomized subcommands; required wherever randomness is used.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory that relative output paths are written under.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Warn)]
    log_level: LogLevel,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
enum LogLevel {
    Error,
    Warn,
    Info,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic multi-domain corpus, one dataset file per domain.
    Synth(SynthArgs),
    /// Replace each input vector by a pseudo-speaker composed from the pool.
    Anonymize(AnonymizeArgs),
    /// Fit a CORAL transform from source to target vectors.
    CoralFit(CoralFitArgs),
    /// Map vectors through a fitted CORAL transform.
    CoralApply(CoralApplyArgs),
    /// Build an enrollment/test trial list from a dataset.
    Trials(TrialsArgs),
    /// Cosine-score a trial list and compute the EER.
    Score(ScoreArgs),
    /// Run attack scenarios from a config file.
    Scenario(ScenarioArgs),
    /// Run the CORAL fit-size sweep from a config file.
    Sweep(SweepArgs),
    /// Project datasets onto their top two principal axes (TSV for plotting).
    Project(ProjectArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Spec file (`key = value`); its `seed` is replaced by --seed when given.
    #[arg(long)]
    spec: PathBuf,
}

#[derive(Debug, Args)]
struct AnonymizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    pool: PathBuf,
    /// Number of farthest pool vectors to consider.
    #[arg(long, default_value_t = DEFAULT_FARTHEST_K)]
    k: usize,
    /// Number of those vectors averaged into the pseudo-speaker.
    #[arg(long, default_value_t = DEFAULT_SELECT_N)]
    n: usize,
    /// Derive per-vector seeds from the utterance or the speaker id.
    #[arg(long, value_enum, default_value_t = ScopeArg::Utterance)]
    seed_scope: ScopeArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScopeArg {
    Utterance,
    Speaker,
}

impl From<ScopeArg> for SeedScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Utterance => SeedScope::Utterance,
            ScopeArg::Speaker => SeedScope::Speaker,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DenormArg {
    None,
    Target,
}

impl From<DenormArg> for DenormMode {
    fn from(d: DenormArg) -> Self {
        match d {
            DenormArg::None => DenormMode::None,
            DenormArg::Target => DenormMode::Target,
        }
    }
}

#[derive(Debug, Args)]
struct CoralFitArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Covariance regularization `C + lambda I`.
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    /// Fit on N randomly drawn vectors per domain (needs --seed); all vectors when omitted.
    #[arg(long = "fit-n")]
    fit_n: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CoralApplyArgs {
    #[arg(long)]
    transform: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    /// Return outputs to the target domain's scale (`target`) or leave them normalized (`none`).
    #[arg(long, value_enum, default_value_t = DenormArg::Target)]
    denorm: DenormArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrialsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// The first N utterances of each speaker enroll; the rest are test.
    #[arg(long, default_value_t = 2, conflicts_with = "enroll_ids")]
    enroll_per_speaker: usize,
    /// File with one enrollment utterance id per line; all others are test.
    #[arg(long)]
    enroll_ids: Option<PathBuf>,
    /// Keep this many impostor pairs, drawn with --seed; all when omitted.
    #[arg(long)]
    impostors: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    enroll: PathBuf,
    /// Test vectors; defaults to the enrollment file.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    trials: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Flat `key = value` scenario config (runs default 5).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// CORAL fit sizes; overrides `sweep.n_values` in the config.
    #[arg(long, value_delimiter = ',')]
    n_values: Vec<usize>,
    /// Runs per fit size; overrides `runs` in the config.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ProjectArgs {
    /// Dataset files pooled for the projection.
    #[arg(long = "in", required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

struct Ctx {
    seed: Option<u64>,
    out_dir: PathBuf,
    log_level: LogLevel,
    provenance: Vec<String>,
    inputs: Vec<PathBuf>,
}

type CliResult<T> = Result<T, String>;

fn err(e: Error) -> String {
    e.to_string()
}

impl Ctx {
    fn require_seed(&self, what: &str) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| format!("{what} is randomized and needs an explicit --seed"))
    }

    fn input(&mut self, path: &Path) -> PathBuf {
        self.inputs.push(path.to_path_buf());
        path.to_path_buf()
    }

    fn output(&self, path: &Path) -> CliResult<PathBuf> {
        let out = self.out_dir.join(path);
        if let Ok(out_abs) = std::fs::canonicalize(&out) {
            for input in &self.inputs {
                if std::fs::canonicalize(input).is_ok_and(|i| i == out_abs) {
                    return Err(format!(
                        "output {} would overwrite an input file",
                        out.display()
                    ));
                }
            }
        }
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)
                .map_err(|e| format!("{}: {e}", parent.display()))?;
        }
        Ok(out)
    }

    fn info(&self, msg: impl AsRef<str>) {
        if self.log_level >= LogLevel::Info {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let invocation: Vec<String> = std::env::args().skip(1).collect();
    let mut ctx = Ctx {
        seed: cli.seed,
        out_dir: cli.out_dir.clone(),
        log_level: cli.log_level,
        provenance: vec![
            format!("format_version={FORMAT_VERSION}"),
            format!("tool=anonvec {}", env!("CARGO_PKG_VERSION")),
            format!("invocation={}", invocation.join(" ")),
        ],
        inputs: Vec::new(),
    };
    match run(cli.command, &mut ctx) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            if ctx.log_level >= LogLevel::Error {
                eprintln!("error: {}", msg.replace('\n', " "));
            }
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command, ctx: &mut Ctx) -> CliResult<()> {
    match command {
        Command::Synth(a) => synth(a, ctx),
        Command::Anonymize(a) => anonymize(a, ctx),
        Command::CoralFit(a) => coral_fit_cmd(a, ctx),
        Command::CoralApply(a) => coral_apply_cmd(a, ctx),
        Command::Trials(a) => trials(a, ctx),
        Command::Score(a) => score(a, ctx),
        Command::Scenario(a) => scenario(a, ctx),
        Command::Sweep(a) => sweep(a, ctx),
        Command::Project(a) => project(a, ctx),
    }
}

fn synth(a: SynthArgs, ctx: &mut Ctx) -> CliResult<()> {
    let spec_path = ctx.input(&a.spec);
    let mut spec = load_spec(&spec_path).map_err(err)?;
    if let Some(seed) = ctx.seed {
        spec.seed = seed;
    }
    let sets = generate(&spec).map_err(err)?;
    for (label, set) in &sets {
        let out = ctx.output(Path::new(&format!("{label}.tsv")))?;
        let mut comments = ctx.provenance.clone();
        comments.push(format!("synth_domain={label}"));
        save_vector_set_with_comments(set, &out, &comments).map_err(err)?;
        ctx.info(format!("wrote {} ({} vectors)", out.display(), set.len()));
    }
    let sidecar = ctx.output(Path::new("synth.provenance"))?;
    let mut text = io::comment_block(&ctx.provenance);
    text.push_str(&format!("# rng={}\n", anonvec_core::seed::RNG_ALGORITHM));
    text.push_str(&spec.to_text());
    io::write_atomic(&sidecar, &text).map_err(err)
}

fn anonymize(a: AnonymizeArgs, ctx: &mut Ctx) -> CliResult<()> {
    let seed = ctx.require_seed("anonymize")?;
    let input = load_vector_set(ctx.input(&a.input)).map_err(err)?;
    let pool = load_vector_set(ctx.input(&a.pool)).map_err(err)?;
    let policy = AnonymizationPolicy::new(a.k, a.n, seed);
    let scope: SeedScope = a.seed_scope.into();
    let out_set = anonymize_set(&input, &pool, &policy, scope).map_err(err)?;
    let mut comments = ctx.provenance.clone();
    comments.push(format!(
        "k={} n={} seed={seed} seed_scope={scope} rng={}",
        a.k,
        a.n,
        anonvec_core::seed::RNG_ALGORITHM
    ));
    save_vector_set_with_comments(&out_set, ctx.output(&a.out)?, &comments).map_err(err)
}

fn coral_fit_cmd(a: CoralFitArgs, ctx: &mut Ctx) -> CliResult<()> {
    let source = load_vector_set(ctx.input(&a.source)).map_err(err)?;
    let target = load_vector_set(ctx.input(&a.target)).map_err(err)?;
    let transform = match a.fit_n {
        None => coral_fit(&source, &target, a.lambda),
        Some(n) => {
            let seed = ctx.require_seed("coral-fit with --fit-n")?;
            coral_fit_sampled(&source, &target, n, a.lambda, seed)
        }
    }
    .map_err(err)?;
    save_transform(&transform, ctx.output(&a.out)?, &ctx.provenance).map_err(err)
}

fn coral_apply_cmd(a: CoralApplyArgs, ctx: &mut Ctx) -> CliResult<()> {
    let transform = load_transform(ctx.input(&a.transform)).map_err(err)?;
    let input = load_vector_set(ctx.input(&a.input)).map_err(err)?;
    let mode: DenormMode = a.denorm.into();
    let out_set = coral_apply_set(&transform, &input, mode).map_err(err)?;
    let mut comments = ctx.provenance.clone();
    comments.push(format!("denorm={mode}"));
    save_vector_set_with_comments(&out_set, ctx.output(&a.out)?, &comments).map_err(err)
}

fn trials(a: TrialsArgs, ctx: &mut Ctx) -> CliResult<()> {
    let set = load_vector_set(ctx.input(&a.input)).map_err(err)?;
    let enroll_list;
    let (enroll, test): (Vec<&str>, Vec<&str>) = match &a.enroll_ids {
        Some(path) => {
            let path = ctx.input(path);
            enroll_list = io::read_to_string(&path).map_err(err)?;
            let enroll: Vec<&str> = enroll_list
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .collect();
            let test = set
                .iter()
                .map(|v| v.utterance_id.as_str())
                .filter(|id| !enroll.contains(id))
                .collect();
            (enroll, test)
        }
        None => split_enroll_test(&set, a.enroll_per_speaker),
    };
    let policy = match a.impostors {
        None => ImpostorPolicy::Exhaustive,
        Some(count) => ImpostorPolicy::Sampled {
            count,
            seed: ctx.require_seed("trials with --impostors")?,
        },
    };
    let t = generate_trials(&set, &enroll, &test, policy).map_err(err)?;
    save_trials(&t, ctx.output(&a.out)?, &ctx.provenance).map_err(err)
}

fn score(a: ScoreArgs, ctx: &mut Ctx) -> CliResult<()> {
    let enroll = load_vector_set(ctx.input(&a.enroll)).map_err(err)?;
    let test = match &a.test {
        Some(p) => load_vector_set(ctx.input(p)).map_err(err)?,
        None => enroll.clone(),
    };
    let trials = load_trials(ctx.input(&a.trials)).map_err(err)?;
    trials.check_both_classes().map_err(err)?;
    let report = ScoreReport::from_scores(score_trials(&enroll, &test, &trials).map_err(err)?)
        .map_err(err)?;
    ctx.info(report.summary_line());
    report.save(ctx.output(&a.out)?, &ctx.provenance).map_err(err)
}

fn scenario(a: ScenarioArgs, ctx: &mut Ctx) -> CliResult<()> {
    let file = load_scenario_file(ctx.input(&a.config)).map_err(err)?;
    let mut reports = Vec::new();
    for s in file.scenarios() {
        let cfg = file.config_for(s).map_err(err)?;
        let report = match s {
            Scenario::Resynthesized => harness::run_resynthesized(&cfg),
            _ => harness::run_scenario(&cfg),
        }
        .map_err(err)?;
        ctx.info(report.summary_line());
        reports.push(report);
    }
    io::write_atomic(&ctx.output(&a.out)?, &reports_to_text(&reports, &ctx.provenance)).map_err(err)
}

fn sweep(a: SweepArgs, ctx: &mut Ctx) -> CliResult<()> {
    let file = load_scenario_file(ctx.input(&a.config)).map_err(err)?;
    let n_values = if a.n_values.is_empty() {
        file.sweep_n_values.clone()
    } else {
        a.n_values.clone()
    };
    let cfg = file.config_for(Scenario::LazyInformed).map_err(err)?;
    let runs = a.runs.unwrap_or(cfg.runs);
    let reports = harness::coral_n_sweep(&cfg, &n_values, runs).map_err(err)?;
    for r in &reports {
        ctx.info(r.summary_line());
    }
    io::write_atomic(&ctx.output(&a.out)?, &reports_to_text(&reports, &ctx.provenance)).map_err(err)
}

fn project(a: ProjectArgs, ctx: &mut Ctx) -> CliResult<()> {
    let sets = a
        .inputs
        .iter()
        .map(|p| load_vector_set(ctx.input(p)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let refs: Vec<_> = sets.iter().collect();
    let projection = project_2d(&refs).map_err(err)?;
    projection.save(ctx.output(&a.out)?, &ctx.provenance).map_err(err)
}
