//! `pulseprep`: command-line front end for pulse-level state preparation.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_grid_arg, Command, Grid, RunConfig, SearchChoice, TopologyChoice};
use error::CliError;

/// Environment variable fixing the number of worker threads.
const WORKERS_ENV: &str = "PULSEPREP_WORKERS";

#[derive(Parser)]
#[command(
    name = "pulseprep",
    version,
    about = "Pulse-level Schwinger-model state preparation on simulated transmons"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Exact spectrum, ground-state probabilities and thermal curves.
    Exact(Overrides),
    /// Optimise a pulse schedule for the ground state at a fixed duration.
    Ground(Overrides),
    /// Search the minimum evolution time.
    Met(Overrides),
    /// Minimum evolution time as a function of a uniform coupling.
    CouplingScan(Overrides),
    /// Energy variance over random pulse parameters.
    Variance(Overrides),
    /// Ground-state optimisation with and without Lindblad noise over theta.
    NoisyGround(Overrides),
    /// Variational thermal-state preparation over a beta grid.
    Thermal(Overrides),
    /// Gate-level Trotter and entangling-layer baselines.
    TrotterCompare(Overrides),
    /// Run the command named in a config file or in an output file's header.
    Run {
        file: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print an annotated example configuration for a command.
    ExampleConfig { command: Command },
}

#[derive(Args, Default)]
#[command(allow_negative_numbers = true)]
struct Overrides {
    /// TOML config; flags given here take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Device preset name or device file.
    #[arg(long)]
    device: Option<String>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long, value_enum)]
    topology: Option<TopologyChoice>,
    #[arg(long)]
    coupling_mhz: Option<f64>,
    #[arg(long)]
    sites: Option<usize>,
    /// Fermion mass.
    #[arg(long)]
    m: Option<f64>,
    /// Lattice spacing.
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    /// Coupling e.
    #[arg(long)]
    e: Option<f64>,
    /// Pulse duration (ns).
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    segments: Option<usize>,
    #[arg(long)]
    substep: Option<f64>,
    /// Per-segment phases instead of per-qubit detunings.
    #[arg(long)]
    phased: bool,
    /// Initial bitstring, qubit 1 first.
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    t_min: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long, value_enum)]
    search: Option<SearchChoice>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    detuning_span_ghz: Option<f64>,
    /// Enable Lindblad noise.
    #[arg(long)]
    noisy: bool,
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    thetas: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    couplings_mhz: Vec<f64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    durations: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    site_counts: Vec<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// Inverse temperatures, comma separated.
    #[arg(long, value_delimiter = ',')]
    beta: Vec<f64>,
    /// Inverse temperatures as start:stop:count.
    #[arg(long, value_parser = parse_grid_arg)]
    beta_grid: Option<Grid>,
    #[arg(long)]
    t1: Option<f64>,
    #[arg(long)]
    t2: Option<f64>,
    #[arg(long)]
    single_qubit_ns: Option<f64>,
    #[arg(long)]
    two_qubit_ns: Option<f64>,
    #[arg(long)]
    include_swaps: bool,
    #[arg(long)]
    trotter_step: Option<f64>,
    /// Pulse duration (ns) compared against the gate baselines.
    #[arg(long)]
    met: Option<f64>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_list<T>(slot: &mut Vec<T>, values: Vec<T>) {
    if !values.is_empty() {
        *slot = values;
    }
}

impl Overrides {
    fn resolve(
        self,
        command: Option<Command>,
        file: Option<PathBuf>,
    ) -> Result<RunConfig, CliError> {
        let mut c = match file.or(self.config.clone()) {
            Some(path) => RunConfig::load(&path, command)?,
            None => RunConfig::defaults(command.expect("subcommands name their command")),
        };
        set(&mut c.output, self.out);
        set(&mut c.device.name, self.device);
        set(&mut c.device.levels, self.levels);
        if self.topology.is_some() {
            c.device.topology = self.topology;
        }
        if self.coupling_mhz.is_some() {
            c.device.coupling_mhz = self.coupling_mhz;
        }
        let m = &mut c.model;
        set(&mut m.sites, self.sites);
        set(&mut m.mass, self.m);
        set(&mut m.spacing, self.a);
        set(&mut m.theta, self.theta);
        set(&mut m.charge, self.e);
        let s = &mut c.schedule;
        set(&mut s.duration, self.duration);
        set(&mut s.segments, self.segments);
        set(&mut s.substep, self.substep);
        s.phased |= self.phased;
        if self.init.is_some() {
            s.init = self.init;
        } else if self.sites.is_some() && s.init.as_ref().is_some_and(|b| b.len() != c.model.sites)
        {
            // A new site count invalidates an inherited initial state.
            s.init = None;
        }
        set(&mut s.t_min, self.t_min);
        set(&mut s.t_max, self.t_max);
        set(&mut s.resolution, self.resolution);
        set(&mut s.search, self.search);
        let o = &mut c.optimizer;
        set(&mut o.restarts, self.restarts);
        set(&mut o.seed, self.seed);
        set(&mut o.tol, self.tol);
        set(&mut o.max_iter, self.max_iter);
        if self.detuning_span_ghz.is_some() {
            o.detuning_span_ghz = self.detuning_span_ghz;
        }
        c.noise.enabled |= self.noisy;
        set(&mut c.noise.shots, self.shots);
        set_list(&mut c.noise.thetas, self.thetas);
        set_list(&mut c.scan.couplings_mhz, self.couplings_mhz);
        set(&mut c.scan.runs, self.runs);
        set_list(&mut c.scan.durations, self.durations);
        set_list(&mut c.scan.site_counts, self.site_counts);
        set(&mut c.scan.samples, self.samples);
        set_list(&mut c.thermal.betas, self.beta);
        set(&mut c.thermal.betas, self.beta_grid.map(|g| g.0));
        set(&mut c.thermal.t1, self.t1);
        set(&mut c.thermal.t2, self.t2);
        let g = &mut c.gates;
        if self.single_qubit_ns.is_some() {
            g.single_qubit_ns = self.single_qubit_ns;
        }
        if self.two_qubit_ns.is_some() {
            g.two_qubit_ns = self.two_qubit_ns;
        }
        g.include_swaps |= self.include_swaps;
        set(&mut g.trotter_step, self.trotter_step);
        if self.met.is_some() {
            g.met = self.met;
        }
        Ok(c)
    }
}

fn configure_workers() -> Result<(), CliError> {
    let Ok(text) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = text.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Validation(format!(
            "{WORKERS_ENV} must be a positive integer, got `{text}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (command, overrides, file) = match cli.command {
        Sub::ExampleConfig { command } => {
            print!("{}", RunConfig::annotated_example(command));
            return Ok(());
        }
        Sub::Run { file, overrides } => (None, overrides, Some(file)),
        Sub::Exact(o) => (Some(Command::Exact), o, None),
        Sub::Ground(o) => (Some(Command::Ground), o, None),
        Sub::Met(o) => (Some(Command::Met), o, None),
        Sub::CouplingScan(o) => (Some(Command::CouplingScan), o, None),
        Sub::Variance(o) => (Some(Command::Variance), o, None),
        Sub::NoisyGround(o) => (Some(Command::NoisyGround), o, None),
        Sub::Thermal(o) => (Some(Command::Thermal), o, None),
        Sub::TrotterCompare(o) => (Some(Command::TrotterCompare), o, None),
    };
    let config = overrides.resolve(command, file)?;
    configure_workers()?;
    let outcome = commands::dispatch(&config)?;
    print!("{}", outcome.report);
    eprintln!("wrote {}", commands::report_path(&config).display());
    if outcome.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(
            "optimisation did not reach its target; results were written".into(),
        ))
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
