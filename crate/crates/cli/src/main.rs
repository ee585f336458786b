use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use forge_core::corpus::{
    assemble_corpus, generate_set, verify_corpus, write_corpus, AssembleConfig, Assembled, CorpusManifest, Split,
    Strictness, TestSpec, TrainSpec,
};
use forge_core::evaluator::{compare, confusion, load_predictions, metrics, ComparisonInput, ComparisonTable, ReportTable};
use forge_core::generator::GenParams;
use forge_core::modernizer::{modernize_batch, BatchOutcome};
use forge_core::taxonomy::{GenKind, SecurePattern, Subtype};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "forge", version, about = "Reentrancy corpus forge: generate, modernize, verify, assemble and evaluate")]
struct Cli {
    /// Master seed for every random choice.
    #[arg(long, global = true, env = "FORGE_SEED", default_value_t = 0)]
    seed: u64,
    /// Log format for diagnostics on stderr.
    #[arg(long, global = true, value_enum, default_value_t = LogFormat::Text)]
    log_format: LogFormat,
    /// Worker threads; defaults to available parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LogFormat {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic contracts with a manifest.
    Generate(GenerateArgs),
    /// Rewrite legacy contracts to 0.8.x conventions.
    Modernize(ModernizeArgs),
    /// Check manifest labels against the static detector.
    Verify(VerifyArgs),
    /// Build the full train/test corpus.
    Assemble(AssembleArgs),
    /// Score a predictions file against a manifest's test split.
    Eval(EvalArgs),
    /// Tabulate several metrics reports.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    kind: GenKind,
    /// Only for vuln_advanced; cycles through all subtypes when omitted.
    #[arg(long)]
    subtype: Option<Subtype>,
    /// Only for secure_basic; cycles through all patterns when omitted.
    #[arg(long)]
    pattern: Option<SecurePattern>,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ModernizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Line-delimited result log.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Treat every disagreement or inconclusive verdict as fatal.
    #[arg(long)]
    strict: bool,
    /// Write per-record results here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AssembleArgs {
    /// `default` or a JSON file overriding training counts.
    #[arg(long, default_value = "default")]
    train_spec: String,
    /// `default` or a JSON file overriding test counts.
    #[arg(long, default_value = "default")]
    test_spec: String,
    #[arg(long)]
    external_vuln: Option<PathBuf>,
    #[arg(long)]
    external_secure: Option<PathBuf>,
    /// Directory with `vulnerable/` and `secure/` subdirectories.
    #[arg(long)]
    study_dir: Option<PathBuf>,
    #[arg(long)]
    exploit_dir: Option<PathBuf>,
    /// Fill missing external contracts with generated stand-ins.
    #[arg(long, action = ArgAction::Set, default_value_t = true, num_args = 0..=1, default_missing_value = "true")]
    allow_standins: bool,
    #[arg(long, default_value_t = forge_core::balancer::DEFAULT_K)]
    smote_k: usize,
    #[arg(long, default_value = "corpus")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
    /// Model name recorded in the report.
    #[arg(long)]
    name: Option<String>,
    /// Parameter count recorded in the report, e.g. `3B`.
    #[arg(long)]
    params: Option<String>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Also write the rows as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Log(LogFormat);

impl Log {
    fn emit(&self, level: &str, message: &str) {
        let line = match self.0 {
            LogFormat::Text => format!("[{level}] {message}"),
            LogFormat::Json => serde_json::json!({ "level": level, "message": message }).to_string(),
        };
        let _ = writeln!(io::stderr(), "{line}");
    }

    fn info(&self, message: impl AsRef<str>) {
        self.emit("info", message.as_ref());
    }

    fn warn(&self, message: impl AsRef<str>) {
        self.emit("warn", message.as_ref());
    }

    fn error(&self, message: impl AsRef<str>) {
        self.emit("error", message.as_ref());
    }
}

enum Failure {
    Usage(String),
    Failed(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Failed(e.to_string())
    }
}

type Outcome = Result<bool, Failure>;

/// The command line that reproduces this run.
struct EffectiveConfig(Vec<String>);

impl EffectiveConfig {
    fn new(cli: &Cli, jobs: usize, sub: &str) -> Self {
        Self(vec![
            "forge".into(),
            format!("--seed {}", cli.seed),
            format!("--jobs {jobs}"),
            sub.into(),
        ])
    }

    fn flag(mut self, name: &str, value: impl fmt::Display) -> Self {
        self.0.push(format!("--{name} {value}"));
        self
    }

    fn opt<T: fmt::Display>(self, name: &str, value: Option<T>) -> Self {
        match value {
            Some(v) => self.flag(name, v),
            None => self,
        }
    }

    fn switch(mut self, name: &str, on: bool) -> Self {
        if on {
            self.0.push(format!("--{name}"));
        }
        self
    }

    fn arg(mut self, value: impl fmt::Display) -> Self {
        self.0.push(value.to_string());
        self
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let log = Log(cli.log_format);
    let jobs = cli.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        usage_error("--jobs must be at least 1");
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
        log.warn(format!("thread pool already initialized: {e}"));
    }
    let result = match &cli.command {
        Command::Generate(a) => generate(&cli, jobs, a, &log),
        Command::Modernize(a) => modernize(&cli, jobs, a, &log),
        Command::Verify(a) => verify(&cli, jobs, a, &log),
        Command::Assemble(a) => assemble(&cli, jobs, a, &log),
        Command::Eval(a) => eval(&cli, jobs, a, &log),
        Command::Compare(a) => compare_reports(&cli, jobs, a, &log),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILURE),
        Err(Failure::Usage(msg)) => usage_error(&msg),
        Err(Failure::Failed(msg)) => {
            log.error(msg);
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn usage_error(msg: &str) -> ! {
    let _ = Cli::command().error(clap::error::ErrorKind::ValueValidation, msg).print();
    std::process::exit(EXIT_USAGE.into())
}

fn print_config(log: &Log, cfg: EffectiveConfig) {
    log.info(format!("effective config: {}", cfg.0.join(" ")));
}

fn generate(cli: &Cli, jobs: usize, a: &GenerateArgs, log: &Log) -> Outcome {
    if a.subtype.is_some() && a.kind != GenKind::VulnAdvanced {
        return Err(Failure::Usage("--subtype applies only to --kind vuln_advanced".into()));
    }
    if a.pattern.is_some() && a.kind != GenKind::SecureBasic {
        return Err(Failure::Usage("--pattern applies only to --kind secure_basic".into()));
    }
    print_config(
        log,
        EffectiveConfig::new(cli, jobs, "generate")
            .flag("kind", a.kind)
            .opt("subtype", a.subtype)
            .opt("pattern", a.pattern)
            .flag("count", a.count)
            .flag("out", a.out.display()),
    );
    let kind = a.kind;
    let set = generate_set(cli.seed, a.count, |i, seed| {
        let mut p = GenParams::sampled(kind, seed);
        if kind == GenKind::VulnAdvanced {
            p = p.with_subtype(a.subtype.unwrap_or(Subtype::ALL[i % Subtype::ALL.len()]));
        }
        if kind == GenKind::SecureBasic {
            p = p.with_pattern(a.pattern.unwrap_or(SecurePattern::ALL[i % SecurePattern::ALL.len()]));
        }
        p
    })?;
    write_corpus(&a.out, &set.manifest, &set.sources)?;
    log.info(format!(
        "wrote {} contracts and {}",
        set.manifest.records.len(),
        a.out.join(forge_core::corpus::MANIFEST_FILE).display()
    ));
    Ok(true)
}

fn modernize(cli: &Cli, jobs: usize, a: &ModernizeArgs, log: &Log) -> Outcome {
    print_config(
        log,
        EffectiveConfig::new(cli, jobs, "modernize")
            .flag("in", a.input.display())
            .flag("out", a.out.display())
            .opt("log", a.log.as_ref().map(|p| p.display())),
    );
    let (summary, entries) = modernize_batch(&a.input, &a.out, a.log.as_deref()).map_err(|e| {
        Failure::Failed(format!("modernize {}: {e}", a.input.display()))
    })?;
    for e in &entries {
        if let BatchOutcome::Error { error } = &e.outcome {
            log.warn(format!("{}: {error}", e.file));
        }
    }
    log.info(format!("modernized {} files, {} failed", summary.ok, summary.failed));
    Ok(true)
}

fn corpus_root(manifest: &Path) -> &Path {
    manifest.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."))
}

fn verify(cli: &Cli, jobs: usize, a: &VerifyArgs, log: &Log) -> Outcome {
    print_config(
        log,
        EffectiveConfig::new(cli, jobs, "verify")
            .flag("manifest", a.manifest.display())
            .switch("strict", a.strict)
            .opt("report", a.report.as_ref().map(|p| p.display())),
    );
    let manifest = CorpusManifest::read(&a.manifest)?;
    let strictness = if a.strict { Strictness::Strict } else { Strictness::Permissive };
    let report = verify_corpus(&manifest, corpus_root(&a.manifest), strictness);
    let mut lines = String::new();
    for e in &report.entries {
        lines.push_str(&serde_json::to_string(e)?);
        lines.push('\n');
    }
    match &a.report {
        Some(path) => fs::write(path, lines).map_err(|e| Failure::Failed(format!("{}: {e}", path.display())))?,
        None => io::stdout().write_all(lines.as_bytes())?,
    }
    for e in report.entries.iter().filter(|e| e.fatal) {
        log.warn(format!("{} ({}): {:?}{}", e.id, e.label, e.agreement, e.error.as_ref().map(|m| format!(": {m}")).unwrap_or_default()));
    }
    let s = &report.summary;
    log.info(format!(
        "verified {}: {} agree, {} disagree, {} inconclusive, {} errors, {} fatal",
        s.total, s.agree, s.disagree, s.inconclusive, s.errors, s.fatal
    ));
    Ok(report.passed())
}

fn read_spec<T: Default + serde::de::DeserializeOwned>(what: &str, value: &str) -> Result<T, Failure> {
    if value == "default" {
        return Ok(T::default());
    }
    let text = fs::read_to_string(value).map_err(|e| Failure::Usage(format!("--{what} {value}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("--{what} {value}: {e}")))
}

fn assemble(cli: &Cli, jobs: usize, a: &AssembleArgs, log: &Log) -> Outcome {
    let train: TrainSpec = read_spec("train-spec", &a.train_spec)?;
    let test: TestSpec = read_spec("test-spec", &a.test_spec)?;
    print_config(
        log,
        EffectiveConfig::new(cli, jobs, "assemble")
            .flag("train-spec", &a.train_spec)
            .flag("test-spec", &a.test_spec)
            .opt("external-vuln", a.external_vuln.as_ref().map(|p| p.display()))
            .opt("external-secure", a.external_secure.as_ref().map(|p| p.display()))
            .opt("study-dir", a.study_dir.as_ref().map(|p| p.display()))
            .opt("exploit-dir", a.exploit_dir.as_ref().map(|p| p.display()))
            .flag("allow-standins", a.allow_standins)
            .flag("smote-k", a.smote_k)
            .flag("out", a.out.display()),
    );
    if a.allow_standins {
        log.warn(
            "STAND-INS ENABLED: missing external contracts are replaced by generated stand-ins marked needs_review; \
             pass --allow-standins false to require real datasets",
        );
    }
    let cfg = AssembleConfig {
        train,
        test,
        external_vuln_dir: a.external_vuln.clone(),
        external_secure_dir: a.external_secure.clone(),
        study_dir: a.study_dir.clone(),
        exploit_dir: a.exploit_dir.clone(),
        allow_standins: a.allow_standins,
        smote_k: a.smote_k,
        ..AssembleConfig::new(cli.seed)
    };
    let Assembled {
        manifest,
        sources,
        warnings,
    } = assemble_corpus(&cfg)?;
    for w in &warnings {
        log.warn(w);
    }
    write_corpus(&a.out, &manifest, &sources)?;
    for split in [Split::Train, Split::Test] {
        log.info(format!("{}: {} records", split.as_str(), manifest.split(split).count()));
    }
    for (k, n) in manifest.counts() {
        log.info(format!("  {} {} {}: {n}", k.split.as_str(), k.label, k.provenance));
    }
    log.info(format!("manifest sha256 {}", manifest.hash()));
    Ok(true)
}

fn eval(cli: &Cli, jobs: usize, a: &EvalArgs, log: &Log) -> Outcome {
    print_config(
        log,
        EffectiveConfig::new(cli, jobs, "eval")
            .flag("manifest", a.manifest.display())
            .flag("predictions", a.predictions.display())
            .flag("out", a.out.display())
            .opt("name", a.name.as_ref())
            .opt("params", a.params.as_ref()),
    );
    let manifest = CorpusManifest::read(&a.manifest)?;
    let predictions = load_predictions(&a.predictions, &manifest)?;
    let mut report = metrics(&confusion(&manifest, &predictions));
    report.name = a.name.clone();
    report.params = a.params.clone();
    if report.zero_division {
        log.warn("some ratios had a zero denominator and were reported as 0");
    }
    let text = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(dir) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&a.out, text).map_err(|e| Failure::Failed(format!("{}: {e}", a.out.display())))?;
    println!("{}", ReportTable(&report));
    Ok(true)
}

fn compare_reports(cli: &Cli, jobs: usize, a: &CompareArgs, log: &Log) -> Outcome {
    let cfg = a
        .reports
        .iter()
        .fold(EffectiveConfig::new(cli, jobs, "compare"), |c, p| c.arg(p.display()));
    print_config(log, cfg.opt("out", a.out.as_ref().map(|p| p.display())));
    let inputs = a.reports.iter().map(|p| ComparisonInput::load(p)).collect::<Result<Vec<_>, _>>()?;
    let rows = compare(&inputs)?;
    print!("{}", ComparisonTable(&rows));
    if let Some(path) = &a.out {
        fs::write(path, serde_json::to_string_pretty(&rows)? + "\n").map_err(|e| Failure::Failed(format!("{}: {e}", path.display())))?;
    }
    Ok(true)
}
