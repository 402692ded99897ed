//! Run configuration: TOML file, per-command defaults, command-line overrides.

use std::f64::consts::PI;
use std::path::Path;

use pulseprep::device::{DeviceSpec, Topology};
use pulseprep::experiments::{MetOptions, SearchMode, VarianceOptions};
use pulseprep::num::{ghz_to_rad_per_ns, mhz_to_rad_per_ns};
use pulseprep::optim::{GroundStateOptions, MinimizeOptions};
use pulseprep::spin::{Bitstring, SchwingerParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Exact,
    Ground,
    Met,
    CouplingScan,
    Variance,
    NoisyGround,
    Thermal,
    TrotterCompare,
}

impl Command {
    #[cfg(test)]
    pub const ALL: [Command; 8] = [
        Command::Exact,
        Command::Ground,
        Command::Met,
        Command::CouplingScan,
        Command::Variance,
        Command::NoisyGround,
        Command::Thermal,
        Command::TrotterCompare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Exact => "exact",
            Command::Ground => "ground",
            Command::Met => "met",
            Command::CouplingScan => "coupling-scan",
            Command::Variance => "variance",
            Command::NoisyGround => "noisy-ground",
            Command::Thermal => "thermal",
            Command::TrotterCompare => "trotter-compare",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyChoice {
    Nn,
    All,
}

impl TopologyChoice {
    pub fn topology(self) -> Topology {
        match self {
            TopologyChoice::Nn => Topology::NearestNeighbor,
            TopologyChoice::All => Topology::AllToAll,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SearchChoice {
    Ascending,
    Bisection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSection {
    /// Preset name or path to a device TOML file.
    pub name: String,
    pub levels: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<TopologyChoice>,
    /// Uniform coupling replacing the device's couplings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_mhz: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub sites: usize,
    pub mass: f64,
    pub spacing: f64,
    pub theta: f64,
    pub charge: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub duration: f64,
    pub segments: usize,
    pub substep: f64,
    pub phased: bool,
    /// Initial bitstring; the alternating `0101…` pattern when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<String>,
    pub t_min: f64,
    pub t_max: f64,
    pub resolution: f64,
    pub search: SearchChoice,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub restarts: usize,
    pub seed: u64,
    /// Success threshold on `E − E_exact`.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial detunings drawn from `±span`; the full bound when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_span_ghz: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub enabled: bool,
    pub shots: usize,
    pub thetas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub couplings_mhz: Vec<f64>,
    pub runs: usize,
    pub durations: Vec<f64>,
    pub site_counts: Vec<usize>,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSection {
    pub betas: Vec<f64>,
    pub t1: f64,
    pub t2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single_qubit_ns: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_qubit_ns: Option<f64>,
    pub include_swaps: bool,
    pub trotter_step: f64,
    /// Pulse duration to compare against; no speedup rows when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub met: Option<f64>,
}

/// Fully resolved configuration of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub output: String,
    pub device: DeviceSection,
    pub model: ModelSection,
    pub schedule: ScheduleSection,
    pub optimizer: OptimizerSection,
    pub noise: NoiseSection,
    pub scan: ScanSection,
    pub thermal: ThermalSection,
    pub gates: GateSection,
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        let mut c = RunConfig {
            command,
            output: format!("out/{}", command.name()),
            device: DeviceSection {
                name: "falcon4q_nn".into(),
                levels: 2,
                topology: None,
                coupling_mhz: None,
            },
            model: ModelSection {
                sites: 3,
                mass: 0.5,
                spacing: 0.1,
                theta: 0.5,
                charge: 0.2,
            },
            schedule: ScheduleSection {
                duration: 53.0,
                segments: 100,
                substep: 0.1,
                phased: false,
                init: None,
                t_min: 10.0,
                t_max: 300.0,
                resolution: 0.5,
                search: SearchChoice::Ascending,
            },
            optimizer: OptimizerSection {
                restarts: 10,
                seed: 42,
                tol: 1e-3,
                max_iter: 500,
                detuning_span_ghz: Some(0.05),
            },
            noise: NoiseSection {
                enabled: false,
                shots: 8192,
                thetas: vec![0.0, PI / 3.0, 2.0 * PI / 3.0, PI],
            },
            scan: ScanSection {
                couplings_mhz: vec![5.0, 10.0, 15.0, 20.0, 25.0],
                runs: 10,
                durations: vec![10.0, 25.0, 50.0, 100.0],
                site_counts: vec![2, 3, 4],
                samples: 100,
            },
            thermal: ThermalSection {
                betas: vec![0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0],
                t1: 50.0,
                t2: 50.0,
            },
            gates: GateSection {
                single_qubit_ns: None,
                two_qubit_ns: None,
                include_swaps: false,
                trotter_step: 0.1,
                met: None,
            },
        };
        match command {
            Command::NoisyGround => {
                c.device.name = "ibm_kyoto".into();
                c.model.sites = 2;
                c.model.spacing = 0.5;
                c.schedule.duration = 70.0;
                c.schedule.segments = 70;
                c.schedule.phased = true;
                c.schedule.init = Some("00".into());
                c.noise.enabled = true;
                c.optimizer.restarts = 4;
                c.optimizer.tol = 1e-2;
            }
            Command::Thermal => {
                c.model.sites = 2;
                c.optimizer.restarts = 20;
            }
            Command::CouplingScan => {
                c.model.sites = 2;
                c.device.topology = Some(TopologyChoice::Nn);
            }
            _ => {}
        }
        c
    }

    /// Per-command defaults overlaid with a TOML document. A `command` key in
    /// the document must agree with `command` when that is given.
    pub fn from_toml(text: &str, command: Option<Command>) -> Result<Self, CliError> {
        let overlay: toml::Table = text
            .parse()
            .map_err(|e| CliError::Validation(format!("config: {e}")))?;
        let file_command = match overlay.get("command") {
            Some(v) => Some(
                Command::deserialize(v.clone())
                    .map_err(|e| CliError::Validation(format!("config: bad command: {e}")))?,
            ),
            None => None,
        };
        let command = match (command, file_command) {
            (Some(a), Some(b)) if a != b => {
                return Err(CliError::Validation(format!(
                    "config is for `{}`, not `{}`",
                    b.name(),
                    a.name()
                )))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => {
                return Err(CliError::Validation(
                    "config does not name a command".into(),
                ))
            }
        };
        let mut base = toml::Table::try_from(Self::defaults(command)).expect("defaults serialise");
        merge(&mut base, overlay);
        base.insert("command".into(), toml::Value::String(command.name().into()));
        base.try_into()
            .map_err(|e: toml::de::Error| CliError::Validation(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path, command: Option<Command>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read config `{}`: {e}", path.display()))
        })?;
        // Output files carry their config as a commented header.
        let header = pulseprep::io::parse_header(&text);
        if header.lines().any(|l| l.starts_with("command = ")) {
            Self::from_toml(&header, command)
        } else {
            Self::from_toml(&text, command)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Defaults for `command` as TOML with a comment on every key.
    pub fn annotated_example(command: Command) -> String {
        let mut out = format!(
            "# Example configuration for `pulseprep {}`.\n",
            command.name()
        );
        let mut section = String::new();
        for line in Self::defaults(command).to_toml().lines() {
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.to_string();
                out.push('\n');
            }
            if let Some((key, _)) = line.split_once(" = ") {
                if let Some(doc) = field_doc(&section, key.trim()) {
                    out.push_str("# ");
                    out.push_str(doc);
                    out.push('\n');
                }
            }
            out.push_str(line);
            out.push('\n');
        }
        out
    }

    /// Checks everything the dispatched command will rely on.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        self.params().validate().map_err(CliError::from)?;
        let d = &self.device;
        if !(2..=6).contains(&d.levels) {
            return bad(format!("device.levels must be in 2..=6, got {}", d.levels));
        }
        if let Some(g) = d.coupling_mhz {
            if !(g.is_finite() && g >= 0.0) {
                return bad(format!(
                    "device.coupling_mhz must be finite and >= 0, got {g}"
                ));
            }
        }
        let device = DeviceSpec::<f64>::load(&d.name).map_err(CliError::from)?;
        let needed = match self.command {
            Command::Variance => self.scan.site_counts.iter().copied().max().unwrap_or(0),
            Command::Exact | Command::TrotterCompare => 0,
            _ => self.model.sites,
        };
        if needed > device.n_qubits {
            return bad(format!(
                "model needs {needed} qubits but device `{}` has {}",
                device.name, device.n_qubits
            ));
        }
        let s = &self.schedule;
        for (name, v) in [
            ("duration", s.duration),
            ("substep", s.substep),
            ("resolution", s.resolution),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("schedule.{name} must be finite and > 0, got {v}"));
            }
        }
        if s.segments == 0 {
            return bad("schedule.segments must be >= 1".into());
        }
        if !(s.t_min > 0.0 && s.t_min < s.t_max) {
            return bad(format!(
                "need 0 < schedule.t_min < schedule.t_max, got {} and {}",
                s.t_min, s.t_max
            ));
        }
        self.init()?;
        let o = &self.optimizer;
        if o.restarts == 0 {
            return bad("optimizer.restarts must be >= 1".into());
        }
        if !(o.tol.is_finite() && o.tol > 0.0) {
            return bad(format!(
                "optimizer.tol must be finite and > 0, got {}",
                o.tol
            ));
        }
        if o.max_iter == 0 {
            return bad("optimizer.max_iter must be >= 1".into());
        }
        if let Some(span) = o.detuning_span_ghz {
            if !(span.is_finite() && span > 0.0) {
                return bad(format!(
                    "optimizer.detuning_span_ghz must be > 0, got {span}"
                ));
            }
        }
        if self.noise.shots == 0 {
            return bad("noise.shots must be >= 1".into());
        }
        if self.command == Command::NoisyGround && self.noise.thetas.is_empty() {
            return bad("noise.thetas must not be empty".into());
        }
        if self.noise.thetas.iter().any(|t| !t.is_finite()) {
            return bad("noise.thetas must be finite".into());
        }
        let sc = &self.scan;
        if self.command == Command::CouplingScan {
            if sc.couplings_mhz.is_empty()
                || sc
                    .couplings_mhz
                    .iter()
                    .any(|g| !(g.is_finite() && *g > 0.0))
            {
                return bad(
                    "scan.couplings_mhz must be a non-empty list of positive values".into(),
                );
            }
            if sc.runs == 0 {
                return bad("scan.runs must be >= 1".into());
            }
        }
        if self.command == Command::Variance {
            if sc.durations.is_empty() || sc.durations.iter().any(|t| !(t.is_finite() && *t > 0.0))
            {
                return bad("scan.durations must be a non-empty list of positive values".into());
            }
            if sc.site_counts.is_empty() || sc.site_counts.iter().any(|&n| n < 2) {
                return bad("scan.site_counts must be a non-empty list of values >= 2".into());
            }
            if sc.samples < 2 {
                return bad(format!("scan.samples must be >= 2, got {}", sc.samples));
            }
        }
        let th = &self.thermal;
        if let Some(b) = th.betas.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
            return bad(format!("thermal.betas must be finite and >= 0, got {b}"));
        }
        if self.command == Command::Thermal {
            if th.betas.contains(&0.0) || th.betas.is_empty() {
                return bad(
                    "thermal.betas must be non-empty and > 0 for the variational run".into(),
                );
            }
            if !(th.t1 > 0.0 && th.t2 > 0.0) {
                return bad(format!(
                    "thermal.t1 and thermal.t2 must be > 0, got {} and {}",
                    th.t1, th.t2
                ));
            }
        }
        let g = &self.gates;
        for (name, v) in [
            ("single_qubit_ns", g.single_qubit_ns),
            ("two_qubit_ns", g.two_qubit_ns),
            ("met", g.met),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return bad(format!("gates.{name} must be > 0, got {v}"));
                }
            }
        }
        if !(g.trotter_step.is_finite() && g.trotter_step > 0.0) {
            return bad(format!(
                "gates.trotter_step must be > 0, got {}",
                g.trotter_step
            ));
        }
        Ok(())
    }

    pub fn params(&self) -> SchwingerParams<f64> {
        let m = &self.model;
        SchwingerParams::new(m.sites, m.mass, m.spacing, m.theta, m.charge)
    }

    pub fn init(&self) -> Result<Bitstring, CliError> {
        let n = self.model.sites;
        match &self.schedule.init {
            None => Ok(Bitstring::alternating(n)),
            Some(s) => {
                let b: Bitstring = s.parse().map_err(|_| {
                    CliError::Validation(format!("schedule.init `{s}` is not a bitstring"))
                })?;
                if b.len() != n {
                    return Err(CliError::Validation(format!(
                        "schedule.init `{s}` has {} bits but the model has {n} sites",
                        b.len()
                    )));
                }
                Ok(b)
            }
        }
    }

    /// The configured device with all overrides applied, before truncation.
    pub fn template_device(&self) -> Result<DeviceSpec<f64>, CliError> {
        let mut spec = DeviceSpec::<f64>::load(&self.device.name)?.with_levels(self.device.levels);
        if let Some(t) = self.device.topology {
            let g = match self.device.coupling_mhz {
                Some(g) => mhz_to_rad_per_ns(g),
                None => {
                    spec.couplings.iter().map(|c| c.g).sum::<f64>()
                        / spec.couplings.len().max(1) as f64
                }
            };
            spec = spec.with_uniform_coupling(g, &t.topology());
        } else if let Some(g) = self.device.coupling_mhz {
            let topo = spec.topology();
            spec = spec.with_uniform_coupling(mhz_to_rad_per_ns(g), &topo);
        }
        Ok(spec)
    }

    /// The device truncated to the model's site count.
    pub fn device(&self) -> Result<DeviceSpec<f64>, CliError> {
        Ok(self.template_device()?.truncated(self.model.sites)?)
    }

    pub fn ground_options(&self) -> GroundStateOptions<f64> {
        let defaults = GroundStateOptions::default();
        GroundStateOptions {
            restarts: self.optimizer.restarts,
            n_segments: self.schedule.segments,
            substep: self.schedule.substep,
            phased: self.schedule.phased,
            noisy: self.noise.enabled,
            detuning_init_span: self.optimizer.detuning_span_ghz.map(ghz_to_rad_per_ns),
            minimize: MinimizeOptions {
                max_iter: self.optimizer.max_iter,
                ..defaults.minimize
            },
            ..defaults
        }
    }

    pub fn met_options(&self) -> MetOptions<f64> {
        let s = &self.schedule;
        MetOptions {
            t_min: s.t_min,
            t_max: s.t_max,
            resolution: s.resolution,
            tol: self.optimizer.tol,
            seed: self.optimizer.seed,
            mode: match s.search {
                SearchChoice::Ascending => SearchMode::Ascending,
                SearchChoice::Bisection => SearchMode::Bisection,
            },
            ground: self.ground_options(),
        }
    }

    pub fn variance_options(&self) -> VarianceOptions<f64> {
        VarianceOptions {
            samples: self.scan.samples,
            n_segments: self.schedule.segments,
            substep: self.schedule.substep,
            seed: self.optimizer.seed,
        }
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn field_doc(section: &str, key: &str) -> Option<&'static str> {
    Some(match (section, key) {
        ("", "command") => "Subcommand this file configures.",
        ("", "output") => "Directory receiving reports, CSV tables and plot data.",
        ("device", "name") => "Device preset name or path to a device TOML file.",
        ("device", "levels") => "Levels kept per transmon (2 = qubit).",
        ("device", "topology") => "Replace couplings by a uniform graph: \"nn\" or \"all\".",
        ("device", "coupling_mhz") => "Uniform coupling strength g/2pi in MHz.",
        ("model", "sites") => "Number of lattice sites N (= qubits).",
        ("model", "mass") => "Fermion mass m.",
        ("model", "spacing") => "Lattice spacing a.",
        ("model", "theta") => "Topological angle theta.",
        ("model", "charge") => "Coupling e.",
        ("schedule", "duration") => "Pulse duration T in ns.",
        ("schedule", "segments") => "Piecewise-constant segments per qubit.",
        ("schedule", "substep") => "Integrator substep in ns.",
        ("schedule", "phased") => "Per-segment phases instead of one detuning per qubit.",
        ("schedule", "init") => "Initial bitstring, qubit 1 first (default: 0101...).",
        ("schedule", "t_min") => "Shortest duration tried by the MET search (ns).",
        ("schedule", "t_max") => "Longest duration tried by the MET search (ns).",
        ("schedule", "resolution") => "MET search step (ns).",
        ("schedule", "search") => "MET search order: \"ascending\" or \"bisection\".",
        ("optimizer", "restarts") => "Random restarts per optimisation.",
        ("optimizer", "seed") => "Base seed; restart r uses seed + r.",
        ("optimizer", "tol") => "Success threshold on E - E_exact.",
        ("optimizer", "max_iter") => "Iteration cap per restart.",
        ("optimizer", "detuning_span_ghz") => "Initial detunings drawn from +-span (GHz).",
        ("noise", "enabled") => "Lindblad dynamics with the device's collapse rates.",
        ("noise", "shots") => "Shots assumed for measurement error bars.",
        ("noise", "thetas") => "Topological angles scanned by noisy-ground.",
        ("scan", "couplings_mhz") => "Coupling values for coupling-scan (MHz).",
        ("scan", "runs") => "Independent MET searches per coupling value.",
        ("scan", "durations") => "Durations for the variance scan (ns).",
        ("scan", "site_counts") => "Site counts for the variance scan.",
        ("scan", "samples") => "Random parameter samples per variance cell.",
        ("thermal", "betas") => "Inverse temperatures.",
        ("thermal", "t1") => "Duration of the ensemble-preparation pulse (ns).",
        ("thermal", "t2") => "Duration of the evolution pulse (ns).",
        ("gates", "single_qubit_ns") => "Single-qubit gate time; the device's when absent.",
        ("gates", "two_qubit_ns") => "Two-qubit gate time; the device's when absent.",
        ("gates", "include_swaps") => "Count routing SWAPs in the Trotter duration.",
        ("gates", "trotter_step") => "Trotter step size theta used for the rotation angles.",
        ("gates", "met") => "Pulse duration (ns) to compare the gate baselines against.",
        _ => return None,
    })
}

/// Evenly spaced values parsed from `start:stop:count`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid(pub Vec<f64>);

pub fn parse_grid_arg(text: &str) -> Result<Grid, String> {
    parse_grid(text).map(Grid)
}

/// `start:stop:count`, inclusive and evenly spaced.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, n] = parts[..] else {
        return Err(format!("expected start:stop:count, got `{text}`"));
    };
    let a: f64 = a.trim().parse().map_err(|_| format!("bad start `{a}`"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad stop `{b}`"))?;
    let n: usize = n.trim().parse().map_err(|_| format!("bad count `{n}`"))?;
    match n {
        0 => Err("count must be >= 1".into()),
        1 => Ok(vec![a]),
        _ => Ok((0..n)
            .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
            .collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        for c in Command::ALL {
            let cfg = RunConfig::defaults(c);
            let back = RunConfig::from_toml(&cfg.to_toml(), None).unwrap();
            assert_eq!(back, cfg);
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn overlay_keeps_unset_defaults() {
        let cfg = RunConfig::from_toml("[model]\nsites = 4\n", Some(Command::Ground)).unwrap();
        assert_eq!(cfg.model.sites, 4);
        assert_eq!(cfg.model.mass, 0.5);
        assert_eq!(cfg.command, Command::Ground);
        assert!(RunConfig::from_toml("command = \"met\"\n", Some(Command::Ground)).is_err());
        assert!(RunConfig::from_toml("[model]\nbogus = 1\n", Some(Command::Ground)).is_err());
        assert!(RunConfig::from_toml("", None).is_err());
    }

    #[test]
    fn annotated_example_parses() {
        for c in Command::ALL {
            let text = RunConfig::annotated_example(c);
            assert!(text.contains("# Pulse duration T in ns."));
            assert_eq!(
                RunConfig::from_toml(&text, None).unwrap(),
                RunConfig::defaults(c)
            );
        }
    }

    #[test]
    fn validation_names_the_invariant() {
        let mut c = RunConfig::defaults(Command::Exact);
        c.model.sites = 1;
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("N must be >= 2"), "{e}");
        let mut c = RunConfig::defaults(Command::Ground);
        c.schedule.init = Some("01".into());
        assert!(c.validate().unwrap_err().to_string().contains("3 sites"));
        c.schedule.init = None;
        c.model.sites = 5;
        assert!(c.validate().unwrap_err().to_string().contains("has 4"));
        let mut c = RunConfig::defaults(Command::Ground);
        c.device.name = "/nonexistent/device.toml".into();
        assert!(c.validate().is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0.5:5:10").unwrap().len(), 10);
        assert_eq!(parse_grid("1:3:3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_grid("2:9:1").unwrap(), vec![2.0]);
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("1:2:0").is_err());
    }

    #[test]
    fn noisy_defaults_match_the_kyoto_study() {
        let c = RunConfig::defaults(Command::NoisyGround);
        let o = c.ground_options();
        assert!(o.noisy && o.phased);
        assert_eq!((o.n_segments, c.schedule.duration), (70, 70.0));
        assert_eq!(c.init().unwrap().to_string(), "00");
        assert!(c.device().unwrap().collapse.is_some());
    }
}
