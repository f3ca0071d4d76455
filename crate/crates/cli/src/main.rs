//! `fairdiv`: batch runs of division protocols, the dual reduction, query
//! scaling sweeps and adversary games. Reports are JSON (CSV for scaling).

mod load;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fairdiv::adversary::{play_game, FinderStrategy, RefuteOutcome};
use fairdiv::dual::reduction_pipeline;
use fairdiv::protocols::{check_proportional, Allocation, Mode, ProportionalityReport, Protocol};
use fairdiv::referee::QueryReferee;
use fairdiv::valuation::{random_dense_valuation, DensityBounds, PiecewiseConstant};
use fairdiv::valuetree::TreeParams;
use fairdiv::Scalar;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Violation(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Violation(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}

impl From<fairdiv::Error> for CliError {
    fn from(e: fairdiv::Error) -> Self {
        use fairdiv::Error as E;
        match e {
            E::InvalidArgument(_)
            | E::NotPositive(_)
            | E::Parse(_)
            | E::PreconditionViolation(_) => CliError::Validation(e.to_string()),
            E::PartitionViolation(_) | E::ProtocolViolation(_) => {
                CliError::Violation(e.to_string())
            }
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "fairdiv",
    version,
    about = "Fair-division protocols, dual reduction and adversary games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProtocolArg {
    CutAndChoose,
    EvenPaz,
    LastDiminisher,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::CutAndChoose => Protocol::CutAndChoose,
            ProtocolArg::EvenPaz => Protocol::EvenPaz,
            ProtocolArg::LastDiminisher => Protocol::LastDiminisher,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Cake,
    Chore,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Cake => Mode::Cake,
            ModeArg::Chore => Mode::Chore,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    GreedyDense,
    CutProbe,
    RandomProbe,
    Blind,
}

impl From<StrategyArg> for FinderStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::GreedyDense => FinderStrategy::GreedyDense,
            StrategyArg::CutProbe => FinderStrategy::CutProbe,
            StrategyArg::RandomProbe => FinderStrategy::RandomProbe,
            StrategyArg::Blind => FinderStrategy::Blind,
        }
    }
}

#[derive(clap::Args)]
struct Output {
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(clap::Args)]
struct Source {
    /// Number of players; generated valuations unless --valuations is given.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON array of valuations.
    #[arg(long)]
    valuations: Option<PathBuf>,
    /// Segments per generated valuation.
    #[arg(long, default_value_t = 8)]
    segments: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run a protocol and check proportionality.
    Divide {
        #[arg(long, value_enum, default_value = "even-paz")]
        protocol: ProtocolArg,
        #[arg(long, value_enum, default_value = "cake")]
        mode: ModeArg,
        #[command(flatten)]
        source: Source,
        /// Maximum number of queries.
        #[arg(long)]
        budget: Option<usize>,
        /// Write the query log as JSON lines.
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Find heavy pieces through the dual chore reduction.
    Reduce {
        #[arg(long, value_enum, default_value = "even-paz")]
        protocol: ProtocolArg,
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        output: Output,
    },
    /// Query counts over a range of n.
    Scaling {
        /// Comma-separated player counts.
        #[arg(long, value_delimiter = ',', required = true)]
        ns: Vec<usize>,
        /// Protocols to measure; last-diminisher is always added for contrast.
        #[arg(long, value_enum, value_delimiter = ',', default_value = "even-paz")]
        protocol: Vec<ProtocolArg>,
        #[arg(long, value_enum, default_value = "chore")]
        mode: ModeArg,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 8)]
        segments: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Play a heavy-piece finder against the adversary on n = 3^k.
    Adversary {
        /// Tree depth; the game is on n = 3^k players.
        #[arg(long)]
        k: u32,
        #[arg(long, value_enum, default_value = "greedy-dense")]
        strategy: StrategyArg,
        /// Queries the finder may ask; defaults to the adversary threshold.
        #[arg(long)]
        budget: Option<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Allow 4 <= k < 11, outside the range where the bound applies.
        #[arg(long)]
        permissive_n: bool,
        /// Write the query transcript as JSON lines.
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fairdiv: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Divide {
            protocol,
            mode,
            source,
            budget,
            log,
            output,
        } => divide(
            protocol.into(),
            mode.into(),
            &source,
            budget,
            log.as_deref(),
            &output,
        ),
        Command::Reduce {
            protocol,
            source,
            output,
        } => reduce(protocol.into(), &source, &output),
        Command::Scaling {
            ns,
            protocol,
            mode,
            seeds,
            segments,
            output,
        } => scaling(&ns, &protocol, mode.into(), &seeds, segments, &output),
        Command::Adversary {
            k,
            strategy,
            budget,
            seed,
            permissive_n,
            transcript,
            output,
        } => adversary(
            k,
            strategy.into(),
            budget,
            seed,
            permissive_n,
            transcript.as_deref(),
            &output,
        ),
    }
}

fn emit(output: &Output, text: &str) -> Result<(), CliError> {
    match &output.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_json<T: Serialize>(output: &Output, value: &T) -> Result<(), CliError> {
    if output.format != Format::Json {
        return Err(CliError::Validation("this command only writes JSON".into()));
    }
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
    text.push('\n');
    emit(output, &text)
}

fn generate(
    n: usize,
    seed: u64,
    segments: usize,
    bounds: &DensityBounds,
) -> Result<Vec<PiecewiseConstant>, CliError> {
    (0..n)
        .map(|i| {
            random_dense_valuation(
                segments,
                bounds,
                true,
                seed.wrapping_mul(1_000_003).wrapping_add(i as u64),
            )
        })
        .collect::<Result<_, _>>()
        .map_err(CliError::from)
}

fn valuations(source: &Source, bounds: &DensityBounds) -> Result<Vec<PiecewiseConstant>, CliError> {
    let vs = match (&source.valuations, source.n) {
        (Some(path), n) => {
            let vs = load::load_valuations(path)?;
            if let Some(n) = n.filter(|&n| n != vs.len()) {
                return Err(CliError::Validation(format!(
                    "--n {n} but {} has {} valuations",
                    path.display(),
                    vs.len()
                )));
            }
            vs
        }
        (None, Some(n)) => generate(n, source.seed, source.segments, bounds)?,
        (None, None) => return Err(CliError::Validation("give --n or --valuations".into())),
    };
    if vs.is_empty() {
        return Err(CliError::Validation("need at least one player".into()));
    }
    Ok(vs)
}

fn positive() -> DensityBounds {
    DensityBounds::new(Scalar::from_integer(0.into()), None).expect("valid bounds")
}

#[derive(Serialize)]
struct QueryCounts {
    total: usize,
    per_player: Vec<usize>,
}

#[derive(Serialize)]
struct DivideReport {
    protocol: Protocol,
    mode: Mode,
    n: usize,
    seed: Option<u64>,
    queries: QueryCounts,
    allocation: Allocation,
    proportionality: ProportionalityReport,
}

fn divide(
    protocol: Protocol,
    mode: Mode,
    source: &Source,
    budget: Option<usize>,
    log: Option<&Path>,
    output: &Output,
) -> Result<(), CliError> {
    let vs = valuations(source, &positive())?;
    let mut referee = QueryReferee::new(vs.clone());
    if let Some(b) = budget {
        referee = referee.with_budget(b);
    }
    let result = protocol.run(&mut referee, mode);
    if let Some(path) = log {
        referee.write_log_jsonl(std::io::BufWriter::new(std::fs::File::create(path)?))?;
    }
    let allocation = result?;
    let proportionality = check_proportional(&allocation, &vs, mode)?;
    let ok = proportionality.proportional;
    let report = DivideReport {
        protocol,
        mode,
        n: vs.len(),
        seed: source.valuations.is_none().then_some(source.seed),
        queries: QueryCounts {
            total: referee.total(),
            per_player: referee.per_player().to_vec(),
        },
        allocation,
        proportionality,
    };
    emit_json(output, &report)?;
    if !ok {
        return Err(CliError::Violation("allocation is not proportional".into()));
    }
    Ok(())
}

fn reduce(protocol: Protocol, source: &Source, output: &Output) -> Result<(), CliError> {
    let vs = valuations(source, &DensityBounds::zero_two())?;
    let report = reduction_pipeline(&vs, protocol)?;
    emit_json(output, &report)?;
    if !report.meets_guarantee() {
        return Err(CliError::Violation(format!(
            "{} heavy certificates, {} required",
            report.heavy_count, report.required
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct ScalingRow {
    n: usize,
    protocol: Protocol,
    mode: Mode,
    seed: u64,
    queries: usize,
    /// `queries / (n log2 n)`.
    ratio_nlogn: f64,
    /// `queries / n^2`.
    ratio_n2: f64,
}

fn scaling(
    ns: &[usize],
    protocols: &[ProtocolArg],
    mode: Mode,
    seeds: &[u64],
    segments: usize,
    output: &Output,
) -> Result<(), CliError> {
    if let Some(&n) = ns.iter().find(|&&n| n < 2) {
        return Err(CliError::Validation(format!(
            "n = {n}: need at least two players"
        )));
    }
    let mut list: Vec<Protocol> = protocols.iter().map(|&p| p.into()).collect();
    if !list.contains(&Protocol::LastDiminisher) {
        list.push(Protocol::LastDiminisher);
    }
    let mut rows = Vec::new();
    for &n in ns {
        for &seed in seeds {
            let vs = generate(n, seed, segments, &positive())?;
            for &protocol in &list {
                if protocol == Protocol::CutAndChoose && n != 2 {
                    continue;
                }
                // Last diminisher divides cake only.
                let mode = if protocol == Protocol::LastDiminisher {
                    Mode::Cake
                } else {
                    mode
                };
                let mut referee = QueryReferee::new(vs.clone());
                protocol.run(&mut referee, mode)?;
                let q = referee.total();
                let nf = n as f64;
                rows.push(ScalingRow {
                    n,
                    protocol,
                    mode,
                    seed,
                    queries: q,
                    ratio_nlogn: q as f64 / (nf * nf.log2()),
                    ratio_n2: q as f64 / (nf * nf),
                });
            }
        }
    }
    match output.format {
        Format::Json => emit_json(output, &rows),
        Format::Csv => {
            let mut text = String::from("n,protocol,mode,seed,queries,ratio_nlogn,ratio_n2\n");
            for r in &rows {
                text += &format!(
                    "{},{},{},{},{},{:.6},{:.6}\n",
                    r.n,
                    serde_plain(&r.protocol),
                    serde_plain(&r.mode),
                    r.seed,
                    r.queries,
                    r.ratio_nlogn,
                    r.ratio_n2
                );
            }
            emit(output, &text)
        }
    }
}

/// Serde name of a unit enum variant.
fn serde_plain<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(str::to_owned))
        .unwrap_or_default()
}

#[derive(Serialize)]
struct AdversaryOutput {
    #[serde(flatten)]
    game: fairdiv::adversary::GameReport,
    notes: Vec<String>,
}

fn adversary(
    k: u32,
    strategy: FinderStrategy,
    budget: Option<u32>,
    seed: u64,
    permissive: bool,
    transcript: Option<&Path>,
    output: &Output,
) -> Result<(), CliError> {
    let params = TreeParams::with_mode(k, permissive)?;
    let budget = budget.unwrap_or_else(|| params.adversary_threshold());
    let (game, session) = play_game(params, strategy, budget, seed)?;
    if let Some(path) = transcript {
        session.write_transcript_jsonl(std::io::BufWriter::new(std::fs::File::create(path)?))?;
    }
    let mut notes = Vec::new();
    if game.vacuous {
        notes.push(format!(
            "threshold is {} at k = {k}: the lower bound is vacuous at this size",
            game.threshold
        ));
    }
    if game.queries_used > game.threshold {
        notes.push("more queries than the threshold: refutation is not guaranteed".into());
    }
    let refuted = game.refutation.is_refuted();
    let guaranteed = game.queries_used <= game.threshold && !game.vacuous;
    let reason = match &game.refutation {
        RefuteOutcome::CannotRefute { reason } => reason.clone(),
        RefuteOutcome::Refuted(_) => String::new(),
    };
    emit_json(output, &AdversaryOutput { game, notes })?;
    if guaranteed && !refuted {
        return Err(CliError::Violation(format!(
            "claim within the threshold was not refuted: {reason}"
        )));
    }
    Ok(())
}
