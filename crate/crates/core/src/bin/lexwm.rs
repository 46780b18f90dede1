use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use lexwm::bitmark::{self, BitUnit};
use lexwm::detector::{self, ReportEnvelope, VerifyParams, DEFAULT_ALPHA};
use lexwm::lexicon::{self, Lexicon};
use lexwm::service::{self, SecretSource, ServiceConfig, Upstream};
use lexwm::simulate::{self, NaturalEmissionModel, SurrogateConfig};
use lexwm::{WatermarkKey, Watermarker};

#[derive(Parser)]
#[command(name = "lexwm", version, about = "Lexical watermarking and extraction verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a lexicon from ranked lexemes or US/UK spelling pairs.
    BuildLexicon(BuildLexiconArgs),
    /// Check a lexicon file and report every invariant violation.
    ValidateLexicon { lexicon: PathBuf },
    /// Watermark newline-delimited generations.
    Watermark(WatermarkArgs),
    /// Verify a suspect corpus against a lexicon and key.
    Verify(VerifyArgs),
    /// Bit-level watermark baseline.
    Bitmark {
        #[command(subcommand)]
        command: BitmarkCommand,
    },
    /// Simulated innocent and extracted models.
    Simulate {
        #[command(subcommand)]
        command: SimulateCommand,
    },
    /// Run the watermarking proxy.
    Serve(ServeArgs),
}

#[derive(Args)]
struct KeyArgs {
    /// Environment variable holding the hex-encoded key.
    #[arg(long, default_value = service::DEFAULT_KEY_ENV)]
    key_env: String,
    /// File holding the hex-encoded key (overrides --key-env).
    #[arg(long)]
    key_file: Option<PathBuf>,
}

impl KeyArgs {
    fn source(&self) -> SecretSource {
        match &self.key_file {
            Some(path) => SecretSource::File(path.clone()),
            None => SecretSource::Env(self.key_env.clone()),
        }
    }

    fn key(&self) -> lexwm::Result<WatermarkKey> {
        self.source().read_key()
    }
}

#[derive(Args)]
struct BuildLexiconArgs {
    /// Lexeme TSV: lemma, pos, frequency, comma-separated synonyms.
    #[arg(long, conflicts_with = "spelling")]
    lexemes: Option<PathBuf>,
    /// Build a spelling lexicon; uses the bundled pairs unless --pairs is given.
    #[arg(long)]
    spelling: bool,
    /// US<TAB>UK pairs file for --spelling.
    #[arg(long, requires = "spelling")]
    pairs: Option<PathBuf>,
    /// Substitutes per candidate.
    #[arg(short = 'M', long = "m", default_value_t = 2)]
    m: usize,
    /// Number of groups to build.
    #[arg(long, default_value_t = 50)]
    size: usize,
    /// Part-of-speech tag to keep, or "any".
    #[arg(long, default_value = "ADJ")]
    pos: String,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct WatermarkArgs {
    #[arg(long)]
    lexicon: PathBuf,
    #[command(flatten)]
    key: KeyArgs,
    /// Input file (stdin when absent).
    input: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Write the replacement log as JSON lines.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    lexicon: PathBuf,
    #[command(flatten)]
    key: KeyArgs,
    /// Screening threshold (default: midpoint of 1/(M+1) and 1).
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Corpus file, one generation per line (stdin when absent).
    corpus: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BitmarkCommand {
    /// Pick the candidate with the most one bits for each input.
    Select {
        #[command(flatten)]
        key: KeyArgs,
        #[arg(long, default_value = "unigram")]
        unit: BitUnit,
        /// input_id<TAB>candidate lines (stdin when absent).
        candidates: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Test a corpus for the bit watermark.
    Verify {
        #[command(flatten)]
        key: KeyArgs,
        #[arg(long, default_value = "unigram")]
        unit: BitUnit,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        corpus: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct SimArgs {
    #[arg(long, default_value_t = 50)]
    groups: usize,
    #[arg(long, default_value_t = 20)]
    occurrences: usize,
    /// Natural probability of emitting the candidate.
    #[arg(long, default_value_t = NaturalEmissionModel::default().gamma)]
    gamma: f64,
    /// Surrogate fidelity.
    #[arg(long, default_value_t = 1.0)]
    phi: f64,
    #[arg(long, default_value_t = 8)]
    words_per_line: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SimArgs {
    fn config(&self, p: f64) -> SurrogateConfig {
        SurrogateConfig {
            watermarked_fraction: p,
            phi: self.phi,
            occurrences_per_group: self.occurrences,
            n_groups: self.groups,
            natural: NaturalEmissionModel { gamma: self.gamma },
            words_per_line: self.words_per_line,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct SweepOutput {
    /// CSV destination (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON config echo destination.
    #[arg(long)]
    config_out: Option<PathBuf>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
}

#[derive(Subcommand)]
enum SimulateCommand {
    /// Corpus from a model unaware of the watermark.
    Innocent {
        #[arg(long)]
        lexicon: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Corpus from a surrogate trained on partly watermarked data.
    Surrogate {
        #[arg(long)]
        lexicon: PathBuf,
        #[command(flatten)]
        key: KeyArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Watermarked share of the training data.
        #[arg(short = 'P', long = "P", default_value_t = 1.0)]
        p: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Hit and p-value across watermarked fractions.
    MixtureSweep {
        #[arg(long)]
        lexicon: PathBuf,
        #[command(flatten)]
        key: KeyArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(short = 'P', long = "P", value_delimiter = ',', required = true)]
        p: Vec<f64>,
        #[command(flatten)]
        output: SweepOutput,
    },
    /// p-value across group sizes M.
    MSweep {
        #[arg(long)]
        lexemes: PathBuf,
        #[arg(long, default_value = "ADJ")]
        pos: String,
        #[command(flatten)]
        key: KeyArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(short = 'M', long = "M", value_delimiter = ',', default_value = "1,2,3,4,5")]
        m: Vec<usize>,
        #[command(flatten)]
        output: SweepOutput,
    },
}

#[derive(Args)]
struct ServeArgs {
    /// key = value config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    listen: Option<SocketAddr>,
    /// "stub_echo" or an http(s) URL.
    #[arg(long)]
    upstream: Option<String>,
    #[arg(long)]
    key_env: Option<String>,
    #[arg(long)]
    key_file: Option<PathBuf>,
    #[arg(long)]
    verify_token_env: Option<String>,
    #[arg(long)]
    timeout_ms: Option<u64>,
    #[arg(long)]
    max_body_bytes: Option<usize>,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Usage(String),
    Data(String),
}

impl From<lexwm::Error> for Failure {
    fn from(e: lexwm::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn open_input(path: Option<&Path>) -> Result<Box<dyn BufRead>, Failure> {
    match path {
        Some(p) => {
            let f = File::open(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
            Ok(Box::new(BufReader::new(f)))
        }
        None => Ok(Box::new(BufReader::new(io::stdin()))),
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
    }
}

fn read_lines(path: Option<&Path>) -> Result<Vec<String>, Failure> {
    let mut text = String::new();
    open_input(path)?.read_to_string(&mut text)?;
    Ok(text.lines().map(str::to_owned).collect())
}

fn build_lexicon(args: BuildLexiconArgs) -> CliResult {
    let lexicon = if args.spelling {
        let pairs = match &args.pairs {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
                lexicon::parse_spelling_pairs(&text, p)?
            }
            None => lexicon::bundled_spelling_pairs(),
        };
        lexicon::build_spelling_lexicon(&pairs)?
    } else {
        let Some(path) = &args.lexemes else {
            return Err(Failure::Usage("either --lexemes or --spelling is required".into()));
        };
        let mut lexemes = lexicon::load_lexemes(path)?;
        if !args.pos.eq_ignore_ascii_case("any") {
            lexicon::retain_pos(&mut lexemes, &args.pos);
        }
        lexicon::build_synonym_lexicon(&lexemes, args.m, args.size)?
    };
    let mut out = open_output(args.output.as_deref())?;
    out.write_all(lexicon.to_tsv().as_bytes())?;
    out.flush()?;
    eprintln!("{} groups, M = {}, fingerprint {}", lexicon.len(), lexicon.m(), lexicon.fingerprint());
    Ok(())
}

fn validate_lexicon(path: &Path) -> CliResult {
    let lexicon = Lexicon::load(path)?;
    println!("ok: {} groups, M = {}, kind = {}, fingerprint {}", lexicon.len(), lexicon.m(), lexicon.kind(), lexicon.fingerprint());
    Ok(())
}

fn watermark(args: WatermarkArgs) -> CliResult {
    let wm = Watermarker::new(Lexicon::load(&args.lexicon)?, args.key.key()?);
    let input = open_input(args.input.as_deref())?;
    let mut out = open_output(args.output.as_deref())?;
    let mut log = args.log.as_deref().map(|p| open_output(Some(p))).transpose()?;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let marked = wm.apply(&line);
        writeln!(out, "{}", marked.text)?;
        if let Some(log) = log.as_mut() {
            for r in &marked.replacements {
                let entry = json!({
                    "line": i + 1,
                    "start": r.start,
                    "end": r.end,
                    "original": r.original,
                    "target": r.target,
                    "group": r.group,
                });
                writeln!(log, "{entry}")?;
            }
        }
    }
    out.flush()?;
    if let Some(mut log) = log {
        log.flush()?;
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> CliResult {
    let wm = Watermarker::new(Lexicon::load(&args.lexicon)?, args.key.key()?);
    let corpus = read_lines(args.corpus.as_deref())?;
    let params = VerifyParams {
        tau: args.tau,
        alpha: args.alpha,
    };
    let (report, stats) = detector::verify_with_stats(&wm, &corpus, &params)?;
    match args.format {
        Format::Json => {
            let fingerprint = wm.lexicon().fingerprint();
            let envelope = ReportEnvelope::new(&report, &fingerprint);
            println!("{}", serde_json::to_string_pretty(&envelope).expect("report serializes"));
        }
        Format::Text => print!("{}", detector::render_text(&report, &stats, &wm)),
    }
    Ok(())
}

fn bitmark_cmd(command: BitmarkCommand) -> CliResult {
    match command {
        BitmarkCommand::Select { key, unit, candidates, output } => {
            let key = key.key()?;
            let sets = bitmark::read_candidate_sets(open_input(candidates.as_deref())?)?;
            let mut out = open_output(output.as_deref())?;
            for set in sets {
                let (index, stats) = bitmark::select_bit_watermarked(&set.candidates, unit, &key)?;
                writeln!(out, "{}", bitmark::format_selection(&set.input_id, index, &stats))?;
            }
            out.flush()?;
        }
        BitmarkCommand::Verify { key, unit, alpha, corpus } => {
            let key = key.key()?;
            let corpus = read_lines(corpus.as_deref())?;
            let params = VerifyParams { tau: None, alpha };
            let report = bitmark::bit_verify(&corpus, unit, &key, &params)?;
            let mut value = json!({ "tool_version": lexwm::VERSION, "unit": unit });
            if let (Some(obj), serde_json::Value::Object(fields)) =
                (value.as_object_mut(), serde_json::to_value(&report).expect("report serializes"))
            {
                obj.extend(fields);
            }
            println!("{}", serde_json::to_string_pretty(&value).expect("json"));
        }
    }
    Ok(())
}

fn write_sweep(result: &simulate::SweepResult, output: &SweepOutput) -> CliResult {
    let mut out = open_output(output.out.as_deref())?;
    out.write_all(result.to_csv().as_bytes())?;
    out.flush()?;
    if let Some(path) = &output.config_out {
        std::fs::write(path, result.config_json() + "\n").map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn write_corpus(corpus: &[String], output: Option<&Path>) -> CliResult {
    let mut out = open_output(output)?;
    for line in corpus {
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

fn simulate_cmd(command: SimulateCommand) -> CliResult {
    match command {
        SimulateCommand::Innocent { lexicon, sim, output } => {
            let lexicon = Lexicon::load(&lexicon)?;
            let corpus = simulate::simulate_innocent_corpus(&sim.config(0.0), &lexicon)?;
            write_corpus(&corpus, output.as_deref())
        }
        SimulateCommand::Surrogate { lexicon, key, sim, p, output } => {
            let lexicon = Lexicon::load(&lexicon)?;
            let corpus = simulate::simulate_surrogate_corpus(&sim.config(p), &lexicon, &key.key()?)?;
            write_corpus(&corpus, output.as_deref())
        }
        SimulateCommand::MixtureSweep { lexicon, key, sim, p, output } => {
            let lexicon = Lexicon::load(&lexicon)?;
            let params = VerifyParams { tau: output.tau, alpha: output.alpha };
            let result = simulate::mixture_sweep(&sim.config(1.0), &p, &lexicon, &key.key()?, &params)?;
            write_sweep(&result, &output)
        }
        SimulateCommand::MSweep { lexemes, pos, key, sim, m, output } => {
            let mut lexemes = lexicon::load_lexemes(&lexemes)?;
            if !pos.eq_ignore_ascii_case("any") {
                lexicon::retain_pos(&mut lexemes, &pos);
            }
            let params = VerifyParams { tau: output.tau, alpha: output.alpha };
            let result = simulate::m_sweep(&sim.config(1.0), &m, &lexemes, &key.key()?, &params)?;
            write_sweep(&result, &output)
        }
    }
}

fn serve(args: ServeArgs) -> CliResult {
    let mut config = match (&args.config, &args.lexicon) {
        (Some(path), _) => ServiceConfig::load(path)?,
        (None, Some(lexicon)) => ServiceConfig::new(lexicon.clone()),
        (None, None) => return Err(Failure::Usage("serve needs --config or --lexicon".into())),
    };
    if let Some(lexicon) = args.lexicon {
        config.lexicon_path = lexicon;
    }
    if let Some(listen) = args.listen {
        config.listen = listen;
    }
    if let Some(upstream) = args.upstream {
        config.upstream = match upstream.as_str() {
            "stub_echo" => Upstream::StubEcho,
            url if url.starts_with("http://") || url.starts_with("https://") => Upstream::Http { url: url.to_owned() },
            other => return Err(Failure::Usage(format!("invalid upstream '{other}'"))),
        };
    }
    if let Some(var) = args.key_env {
        config.key_source = SecretSource::Env(var);
    }
    if let Some(path) = args.key_file {
        config.key_source = SecretSource::File(path);
    }
    if let Some(var) = args.verify_token_env {
        config.verify_token = Some(SecretSource::Env(var));
    }
    if let Some(ms) = args.timeout_ms {
        config.upstream_timeout = Duration::from_millis(ms);
    }
    if let Some(bytes) = args.max_body_bytes {
        config.max_body_bytes = bytes;
    }

    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(io::stderr)
        .init();
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(service::serve(config))?;
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::BuildLexicon(args) => build_lexicon(args),
        Command::ValidateLexicon { lexicon } => validate_lexicon(&lexicon),
        Command::Watermark(args) => watermark(args),
        Command::Verify(args) => verify(args),
        Command::Bitmark { command } => bitmark_cmd(command),
        Command::Simulate { command } => simulate_cmd(command),
        Command::Serve(args) => serve(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
