use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use weylpair_cli::{run_scenario, CliError, Command, Counterexample, RunOptions};

#[derive(Parser)]
#[command(name = "weylpair", version, about = "Weak Weyl pair laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario JSON document.
    #[arg(long)]
    scenario: PathBuf,
    /// Directory for artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Defect tolerance; overrides the scenario value.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Enumerate the P-spaces of a window.
    PspaceEnum(Common),
    /// Build a pair and write it to pair.json.
    PairBuild(Common),
    /// Weyl relation, isometry and range-projection checks.
    PairCheck(Common),
    /// Minimal unitary dilation and its covariant representation.
    Dilate(Common),
    /// Split a pair into factorial components.
    Decompose(Common),
    /// Commutant, center and factor/irreducibility flags.
    Commutant(Common),
    /// Unitary equivalence of two pairs.
    Equiv(Common),
    /// The two-parameter counterexample.
    #[command(subcommand)]
    Counterexample(CxCmd),
}

#[derive(Subcommand)]
enum CxCmd {
    Increasing(Common),
    Plateau(Common),
    Pair(Common),
    Transfer(Common),
    Spec(Common),
}

impl Cmd {
    fn split(self) -> (Command, Common) {
        match self {
            Cmd::PspaceEnum(c) => (Command::PspaceEnum, c),
            Cmd::PairBuild(c) => (Command::PairBuild, c),
            Cmd::PairCheck(c) => (Command::PairCheck, c),
            Cmd::Dilate(c) => (Command::Dilate, c),
            Cmd::Decompose(c) => (Command::Decompose, c),
            Cmd::Commutant(c) => (Command::Commutant, c),
            Cmd::Equiv(c) => (Command::Equiv, c),
            Cmd::Counterexample(x) => {
                let (k, c) = match x {
                    CxCmd::Increasing(c) => (Counterexample::Increasing, c),
                    CxCmd::Plateau(c) => (Counterexample::Plateau, c),
                    CxCmd::Pair(c) => (Counterexample::Pair, c),
                    CxCmd::Transfer(c) => (Counterexample::Transfer, c),
                    CxCmd::Spec(c) => (Counterexample::Spec, c),
                };
                (Command::Counterexample(k), c)
            }
        }
    }
}

fn configure_threads() {
    if let Ok(v) = std::env::var("WEYLPAIR_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("ignoring WEYLPAIR_THREADS={v:?}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let (command, common) = cli.command.split();
    let opts = RunOptions { out: common.out, seed: common.seed, tolerance: common.tol };
    match run_scenario(command, &common.scenario, &opts) {
        Ok(report) => {
            println!("{}", report.to_json());
            match report.into_result() {
                Ok(_) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(1)
                }
            }
        }
        Err(e @ CliError::Parse(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
