use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use circtrack::metrics::{convergence_time, sweep, Convergence, CONVERGENCE_EPS, CONVERGENCE_HOLD};
use circtrack::scenario::{parse_grid, ConfigError, BUILTIN_NAMES};
use circtrack::trace::{read_csv, write_csv, write_plotdata, Figure};
use circtrack::{run_scenario, EstimatorMode, ScenarioConfig, SimError};

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "circtrack",
    version,
    about = "Three-camera circular line tracking simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trace as CSV.
    Run {
        /// Config file, or the name of a built-in scenario.
        config: String,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        mode: Option<EstimatorMode>,
        /// Exit with status 4 if the tracking errors do not converge.
        #[arg(long)]
        require_convergence: bool,
    },
    /// Run a scenario once per gain set in a grid file.
    Sweep {
        config: String,
        #[arg(long)]
        grid: PathBuf,
    },
    /// List the built-in scenarios.
    Scenarios,
    /// Extract the columns of one figure from a trace CSV.
    Plotdata {
        trace: PathBuf,
        /// One of 5 (paths), 6 (errors), 7 (wheel speeds), 12 (v/w).
        #[arg(long, value_parser = parse_figure)]
        fig: Figure,
    },
}

fn parse_figure(s: &str) -> Result<Figure, String> {
    s.parse::<u32>()
        .ok()
        .and_then(Figure::from_number)
        .ok_or_else(|| format!("unknown figure '{s}', expected 5, 6, 7 or 12"))
}

enum Failure {
    Config(ConfigError),
    Sim(SimError),
    NotConverged,
    Io(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => Failure::Config(c),
            e => Failure::Sim(e),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Io(e)
    }
}

fn output(path: Option<&PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn fmt_convergence(c: Convergence) -> String {
    match c {
        Convergence::At(t) => format!("{t:.3}"),
        Convergence::NotConverged => "not converged".to_owned(),
    }
}

fn run(
    config: &str,
    out: Option<&PathBuf>,
    mode: Option<EstimatorMode>,
    require_convergence: bool,
) -> Result<(), Failure> {
    let mut cfg = ScenarioConfig::resolve(config)?;
    if let Some(m) = mode {
        cfg.estimator_mode = m;
    }
    let trace = run_scenario(&cfg)?;
    let mut w = output(out)?;
    write_csv(&mut w, trace.decimated()).context("writing trace")?;
    w.flush().context("writing trace")?;

    let conv = convergence_time(&trace.rows, CONVERGENCE_EPS, CONVERGENCE_HOLD);
    eprintln!("{}: convergence time {}", cfg.name, fmt_convergence(conv));
    if require_convergence && conv == Convergence::NotConverged {
        return Err(Failure::NotConverged);
    }
    Ok(())
}

fn run_sweep(config: &str, grid: &PathBuf) -> Result<(), Failure> {
    let base = ScenarioConfig::resolve(config)?;
    let text = std::fs::read_to_string(grid).map_err(|source| ConfigError::Io {
        path: grid.display().to_string(),
        source,
    })?;
    let cells = parse_grid(&text, base.gains.phi)?;
    base.validate()?;
    let mut w = output(None)?;
    let write = |w: &mut Box<dyn Write>| -> io::Result<()> {
        writeln!(
            w,
            "k1,k2,k3,phi,convergence_time,max_abs_s,chattering_index,status"
        )?;
        for cell in sweep(&base, &cells) {
            let g = cell.gains;
            match cell.outcome {
                Ok(m) => writeln!(
                    w,
                    "{},{},{},{},{},{:.6e},{:.6e},ok",
                    g.k1,
                    g.k2,
                    g.k3,
                    g.phi,
                    m.convergence
                        .time()
                        .map_or("NaN".to_owned(), |t| format!("{t:.3}")),
                    m.max_abs_s,
                    m.chattering_index,
                )?,
                Err(e) => writeln!(
                    w,
                    "{},{},{},{},NaN,NaN,NaN,\"{}\"",
                    g.k1,
                    g.k2,
                    g.k3,
                    g.phi,
                    e.to_string().replace('"', "'")
                )?,
            }
        }
        w.flush()
    };
    write(&mut w).context("writing sweep table")?;
    Ok(())
}

fn plotdata(trace: &PathBuf, fig: Figure) -> Result<(), Failure> {
    let file = File::open(trace).with_context(|| format!("cannot open {}", trace.display()))?;
    let rows = read_csv(BufReader::new(file))
        .with_context(|| format!("cannot read {}", trace.display()))?;
    let mut w = output(None)?;
    write_plotdata(&mut w, &rows, fig).context("writing plot data")?;
    w.flush().context("writing plot data")?;
    Ok(())
}

fn scenarios() -> Result<(), Failure> {
    for name in BUILTIN_NAMES {
        let c = ScenarioConfig::builtin(name)?;
        println!(
            "{name:<13} start ({}, {}, {:.4} rad)  gains ({}, {}, {})",
            c.initial_pose.x,
            c.initial_pose.y,
            c.initial_pose.theta,
            c.gains.k1,
            c.gains.k2,
            c.gains.k3
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            config,
            out,
            mode,
            require_convergence,
        } => run(config, out.as_ref(), *mode, *require_convergence),
        Command::Sweep { config, grid } => run_sweep(config, grid),
        Command::Scenarios => scenarios(),
        Command::Plotdata { trace, fig } => plotdata(trace, *fig),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Sim(e)) => {
            eprintln!("simulation aborted: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(Failure::NotConverged) => {
            eprintln!("tracking errors did not converge");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_IO)
        }
    }
}
