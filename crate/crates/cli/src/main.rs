use clap::{Args, Parser, Subcommand, ValueEnum};
use meyerstop::commands::{run_command, Command, Format, Options};
use meyerstop::enumerate::ENUMERATION_LIMIT;
use meyerstop::generate::{generate_instance, RandomInstanceParams, Regime, RewardShape};
use meyerstop::par::with_sequential;
use meyerstop::scenario::{parse_rational, parse_scenario, GKindChoice};
use meyerstop::Q;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "meyerstop", version, about = "Exact optimal stopping on finite Meyer lattices")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the lattice, Meyer structure, processes and representation bundle.
    Validate(Common),
    /// Lambda, optional and predictable projections and the envelopes.
    Project(Common),
    /// Snell envelope and root value, cross-checked by enumeration.
    Snell(Common),
    /// Mertens decomposition of the Snell envelope.
    Decompose(Common),
    /// delta_0, sigma_0 and the smallest / largest optimal times.
    Stop(Common),
    /// Solve for the signal L of the reward X, or evaluate X from L.
    Represent(Common),
    /// Level passage times of the signal over a grid of levels.
    Signal(Common),
    /// Brute-force values over all stopping times and divided stopping times.
    Oracle(Common),
    /// Every property check, one line each.
    Suite(Common),
    /// Write a seeded random scenario.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Process to use as the reward; defaults to the scenario's choice.
    #[arg(long)]
    process: Option<String>,
    /// Comma separated levels, e.g. `2,7/2,4`.
    #[arg(long, value_delimiter = ',', value_parser = rational)]
    ell_grid: Option<Vec<Q>>,
    #[arg(long, env = "MEYERSTOP_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    format: FormatArg,
    /// Reject unknown scenario keys instead of warning.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cap on enumerated stopping times.
    #[arg(long, default_value_t = ENUMERATION_LIMIT)]
    limit: u128,
    /// Run every map on the calling thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, env = "MEYERSTOP_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    epochs: usize,
    #[arg(long, default_value_t = 6)]
    max_paths: usize,
    #[arg(long, value_enum, default_value_t = RegimeArg::Between)]
    regime: RegimeArg,
    #[arg(long, value_enum, default_value_t = RewardArg::Free)]
    reward: RewardArg,
    #[arg(long, value_enum, default_value_t = GArg::Affine)]
    g_kind: GArg,
    #[arg(long, default_value_t = 0.5)]
    mu_density: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Machine,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Predictable,
    Optional,
    Between,
}

#[derive(Clone, Copy, ValueEnum)]
enum RewardArg {
    Free,
    Usc,
}

#[derive(Clone, Copy, ValueEnum)]
enum GArg {
    Affine,
    Monotone,
}

fn rational(s: &str) -> Result<Q, String> {
    parse_rational(s.trim())
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cmd: Command, a: &Common) -> Result<i32, String> {
    let text = std::fs::read_to_string(&a.scenario).map_err(|e| format!("{}: {e}", a.scenario.display()))?;
    let parsed = parse_scenario(&text, a.strict).map_err(|e| format!("{}: {e}", a.scenario.display()))?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    let format = match a.format {
        FormatArg::Table => Format::Table,
        FormatArg::Machine => Format::Machine,
    };
    let opts = Options {
        process: a.process.clone(),
        ell_grid: a.ell_grid.clone(),
        format,
        limit: a.limit,
        seed: a.seed,
    };
    let go = || run_command(&parsed.scenario, cmd, &opts);
    let report = if a.sequential { with_sequential(go) } else { go() }.map_err(|e| e.to_string())?;
    let space = parsed.scenario.space().ok();
    emit(&report.render(space.as_ref(), format), a.out.as_ref())?;
    Ok(report.status.exit_code())
}

fn generate(a: &GenerateArgs) -> Result<i32, String> {
    let params = RandomInstanceParams {
        seed: a.seed,
        epochs: a.epochs,
        max_paths: a.max_paths,
        regime: match a.regime {
            RegimeArg::Predictable => Regime::PredictableExtreme,
            RegimeArg::Optional => Regime::OptionalExtreme,
            RegimeArg::Between => Regime::RandomBetween,
        },
        reward: match a.reward {
            RewardArg::Free => RewardShape::Free,
            RewardArg::Usc => RewardShape::UscShaped,
        },
        g_kind: match a.g_kind {
            GArg::Affine => GKindChoice::Affine,
            GArg::Monotone => GKindChoice::Monotone,
        },
        mu_density: a.mu_density,
        ..RandomInstanceParams::default()
    };
    emit(&generate_instance(&params).render(), a.out.as_ref())?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Cmd::Validate(a) => run(Command::Validate, a),
        Cmd::Project(a) => run(Command::Project, a),
        Cmd::Snell(a) => run(Command::Snell, a),
        Cmd::Decompose(a) => run(Command::Decompose, a),
        Cmd::Stop(a) => run(Command::Stop, a),
        Cmd::Represent(a) => run(Command::Represent, a),
        Cmd::Signal(a) => run(Command::Signal, a),
        Cmd::Oracle(a) => run(Command::Oracle, a),
        Cmd::Suite(a) => run(Command::Suite, a),
        Cmd::Generate(a) => generate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
