//! One function per subcommand. Each writes its files into the configured
//! output directory and returns the text report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pulseprep::device::Topology;
use pulseprep::engine::{
    leakage_from_populations, probability_trace, top_level_population, QuantumState,
};
use pulseprep::experiments::{
    coupling_scan_with, find_met, noise_study, speedup_report, variance_scan_with,
};
use pulseprep::gates::{
    circuit_duration, strongly_entangling_layer, trotter_layer, Circuit, GateKind, GateTimeTable,
};
use pulseprep::io::{fmt_float, write_report, CsvSink};
use pulseprep::num::{mhz_to_rad_per_ns, rad_per_ns_to_ghz, rad_per_ns_to_mhz};
use pulseprep::optim::{prepare_ground_state, RunResult};
use pulseprep::spin::{build_schwinger, exact_spectrum, thermal_from_energies};
use pulseprep::vqt::{prepare_thermal, VqtConfig};

use crate::config::{Command, RunConfig, TopologyChoice};
use crate::error::CliError;

/// Report text plus whether every optimisation met its target.
pub struct Outcome {
    pub report: String,
    pub converged: bool,
}

impl Outcome {
    fn done(report: String) -> Self {
        Self {
            report,
            converged: true,
        }
    }
}

/// Output directory and the header stamped on every file in it.
struct Out {
    dir: PathBuf,
    header: String,
}

impl Out {
    fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let dir = PathBuf::from(&cfg.output);
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Runtime(format!("cannot create `{}`: {e}", dir.display())))?;
        Ok(Self {
            dir,
            header: cfg.to_toml(),
        })
    }

    fn csv(&self, name: &str, columns: &[&str]) -> Result<CsvSink, CliError> {
        Ok(CsvSink::create(self.dir.join(name), &self.header, columns)?)
    }

    fn plot(&self, fig: &str) -> Result<CsvSink, CliError> {
        self.csv(&format!("{fig}.csv"), &["series", "x", "y", "yerr"])
    }

    fn text(&self, name: &str, body: &str) -> Result<(), CliError> {
        Ok(write_report(self.dir.join(name), &self.header, body)?)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

fn triplet(sink: &mut CsvSink, series: &str, x: f64, y: f64, yerr: f64) -> Result<(), CliError> {
    Ok(sink.record(&[
        series.to_string(),
        fmt_float(x),
        fmt_float(y),
        fmt_float(yerr),
    ])?)
}

pub fn dispatch(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let outcome = match cfg.command {
        Command::Exact => exact(cfg),
        Command::Ground => ground(cfg),
        Command::Met => met(cfg),
        Command::CouplingScan => coupling_scan(cfg),
        Command::Variance => variance(cfg),
        Command::NoisyGround => noisy_ground(cfg),
        Command::Thermal => thermal(cfg),
        Command::TrotterCompare => trotter_compare(cfg),
    }?;
    let out = Out::new(cfg)?;
    out.text("report.txt", &outcome.report)?;
    Ok(outcome)
}

fn exact(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let out = Out::new(cfg)?;
    let h = build_schwinger(&cfg.params())?;
    let n = cfg.model.sites;
    let spec = exact_spectrum(&h, 1 << n)?;

    let mut sink = out.csv("spectrum.csv", &["level", "energy"])?;
    for (k, e) in spec.energies.iter().enumerate() {
        sink.record(&[k.to_string(), fmt_float(*e)])?;
    }
    let mut sink = out.csv("ground.csv", &["bitstring", "probability"])?;
    for (b, p) in &spec.ground_probabilities {
        sink.record(&[b.clone(), fmt_float(*p)])?;
    }

    let mut report = String::new();
    let _ = writeln!(report, "sites = {n}");
    let _ = writeln!(report, "ground_energy = {:.10}", spec.ground_energy);
    if let Some(e1) = spec.energies.get(1) {
        let _ = writeln!(report, "gap = {:.10}", e1 - spec.ground_energy);
    }
    let _ = writeln!(report, "ground_probabilities:");
    for (b, p) in spec.ground_probabilities.iter().filter(|(_, p)| **p > 1e-3) {
        let _ = writeln!(report, "  {b} {p:.4}");
    }

    let mut sink = out.csv("thermal.csv", &["beta", "energy", "entropy", "free_energy"])?;
    let _ = writeln!(report, "thermal: beta energy entropy free_energy");
    for &beta in &cfg.thermal.betas {
        let t = thermal_from_energies(&spec.energies, beta)?;
        let f = t.free_energy.unwrap_or(f64::NAN);
        sink.floats(&[beta, t.energy, t.entropy, f])?;
        let _ = writeln!(
            report,
            "  {beta} {:.6} {:.6} {}",
            t.energy,
            t.entropy,
            fmt_float(f)
        );
    }
    Ok(Outcome::done(report))
}

fn run_summary(report: &mut String, run: &RunResult<f64>) {
    let _ = writeln!(report, "duration_ns = {}", run.duration);
    let _ = writeln!(report, "energy = {:.10}", run.energy);
    let _ = writeln!(report, "exact_energy = {:.10}", run.exact_energy);
    let _ = writeln!(report, "delta_e = {:.3e}", run.delta_e);
    let _ = writeln!(
        report,
        "restarts = {} (best seed {})",
        run.restarts.len(),
        run.seed
    );
    let _ = writeln!(
        report,
        "mean_energy = {:.10} +- {:.3e}",
        run.mean_energy, run.std_energy
    );
    if let Some(l) = &run.leakage {
        let _ = writeln!(report, "final_leakage = {:.3e}", l.total);
    }
    let _ = writeln!(report, "preparation_ns = {}", run.preparation_time);
    let _ = writeln!(report, "total_ns = {}", run.total_time());
    let _ = writeln!(
        report,
        "saturation_fraction = {:.3}",
        run.saturation_fraction
    );
    let det: Vec<String> = run
        .schedule
        .detunings
        .iter()
        .map(|d| format!("{:.4}", rad_per_ns_to_ghz(*d)))
        .collect();
    let _ = writeln!(report, "detunings_ghz = [{}]", det.join(", "));
    let _ = writeln!(report, "final_probabilities:");
    for (b, p) in run.final_probabilities.iter().filter(|(_, p)| **p > 1e-3) {
        let _ = writeln!(report, "  {b} {p:.4}");
    }
}

fn ground(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let out = Out::new(cfg)?;
    let spec = cfg.device()?;
    let h = build_schwinger(&cfg.params())?;
    let init = cfg.init()?;
    let opts = cfg.ground_options();
    let run = prepare_ground_state(
        &spec,
        &h,
        cfg.schedule.duration,
        &init,
        cfg.optimizer.seed,
        &opts,
    )?;

    let mut sink = out.csv(
        "restarts.csv",
        &["seed", "energy", "delta_e", "iterations", "converged"],
    )?;
    for r in &run.restarts {
        sink.record(&[
            r.seed.to_string(),
            fmt_float(r.value),
            fmt_float(r.delta_e),
            r.iterations.to_string(),
            r.converged.to_string(),
        ])?;
    }
    out.text("schedule.txt", &run.schedule.to_text())?;

    let mut fig2 = out.plot("fig2")?;
    let w = run.schedule.segment_width();
    for (q, row) in run.schedule.amplitudes.iter().enumerate() {
        for (k, a) in row.iter().enumerate() {
            triplet(
                &mut fig2,
                &format!("q{}", q + 1),
                (k as f64 + 0.5) * w,
                rad_per_ns_to_mhz(*a),
                0.0,
            )?;
        }
    }

    // Populations follow the unitary dynamics even for noisy runs.
    let psi = QuantumState::from_bitstring(&spec, &init)?;
    let trace = probability_trace(&psi, &run.schedule, &spec, cfg.schedule.substep)?;
    let mut fig3 = out.plot("fig3")?;
    for (t, label, p) in trace.rows(0.1) {
        triplet(&mut fig3, &label, t, p, 0.0)?;
    }

    let mut report = String::new();
    run_summary(&mut report, &run);
    if spec.levels > 2 {
        let mut fig5 = out.plot("fig5")?;
        let mut top: f64 = 0.0;
        for (t, pops) in trace.times.iter().zip(&trace.probabilities) {
            let l = leakage_from_populations(pops, &spec);
            for (q, v) in l.per_qubit.iter().enumerate() {
                triplet(&mut fig5, &format!("q{}", q + 1), *t, *v, 0.0)?;
            }
            triplet(&mut fig5, "total", *t, l.total, 0.0)?;
            top = top.max(top_level_population(pops, &spec));
        }
        let peaks = trace.peaks();
        let _ = writeln!(report, "peak_top_level_population = {top:.3e}");
        let _ = writeln!(report, "peak_populations (>= 0.1):");
        for label in trace.significant(0.1) {
            if let Some(k) = trace.index_of(&label) {
                let _ = writeln!(report, "  {label} {:.4}", peaks[k]);
            }
        }
    }
    let converged = run.delta_e <= cfg.optimizer.tol;
    if !converged {
        let _ = writeln!(
            report,
            "NOT CONVERGED: delta_e {:.3e} > tol {:.1e}",
            run.delta_e, cfg.optimizer.tol
        );
    }
    Ok(Outcome { report, converged })
}

fn met(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let out = Out::new(cfg)?;
    let spec = cfg.device()?;
    let h = build_schwinger(&cfg.params())?;
    let init = cfg.init()?;
    let r = find_met(&spec, &h, &init, &cfg.met_options())?;
    std::fs::write(
        out.path("attempts.csv"),
        pulseprep::io::render_header(&out.header) + &r.attempts_csv(),
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut report = String::new();
    if let Some(w) = &r.warning {
        let _ = writeln!(report, "warning: {w}");
    }
    let _ = writeln!(report, "attempts = {}", r.attempts.len());
    match (r.met, &r.run) {
        (Some(t), Some(run)) => {
            let _ = writeln!(report, "met_ns = {t} +- {}", r.resolution);
            run_summary(&mut report, run);
            out.text("schedule.txt", &run.schedule.to_text())?;
            Ok(Outcome::done(report))
        }
        _ => {
            let _ = writeln!(
                report,
                "NOT FOUND: no duration in [{}, {}] reached delta_e <= {:.1e}",
                cfg.schedule.t_min, cfg.schedule.t_max, cfg.optimizer.tol
            );
            Ok(Outcome {
                report,
                converged: false,
            })
        }
    }
}

fn coupling_scan(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let out = Out::new(cfg)?;
    let template = cfg.template_device()?.truncated(cfg.model.sites)?;
    let topology = cfg.device.topology.unwrap_or(TopologyChoice::Nn).topology();
    let h = build_schwinger(&cfg.params())?;
    let init = cfg.init()?;
    let gs: Vec<f64> = cfg
        .scan
        .couplings_mhz
        .iter()
        .map(|&g| mhz_to_rad_per_ns(g))
        .collect();
    let series = format!("{}-site", cfg.model.sites);
    let mut fig7 = out.plot("fig7")?;
    let mut runs = out.csv("runs.csv", &["g_mhz", "run", "met_ns"])?;
    let scan = coupling_scan_with(
        &template,
        &h,
        &gs,
        &topology,
        &init,
        &cfg.met_options(),
        cfg.scan.runs,
        |i, cell, mets| {
            let g = cfg.scan.couplings_mhz[i];
            for (k, m) in mets.iter().enumerate() {
                runs.record(&[
                    fmt_float(g),
                    k.to_string(),
                    fmt_float(m.unwrap_or(f64::NAN)),
                ])
                .map_err(|e| pulseprep::Error::Output(e.to_string()))?;
            }
            fig7.record(&[
                series.clone(),
                fmt_float(g),
                fmt_float(cell.value.unwrap_or(f64::NAN)),
                fmt_float(cell.error),
            ])
        },
    )?;
    let mut report = String::new();
    let _ = writeln!(report, "g_mhz met_ns err_ns found");
    let mut all_found = true;
    for (g, cell) in cfg.scan.couplings_mhz.iter().zip(&scan.grid.cells[0]) {
        all_found &= cell.value.is_some();
        let _ = writeln!(
            report,
            "  {g} {} {:.3} {}/{}",
            fmt_float(cell.value.unwrap_or(f64::NAN)),
            cell.error,
            cell.samples,
            cfg.scan.runs
        );
    }
    let _ = writeln!(report, "monotone_decreasing = {}", scan.monotone_decreasing);
    if let Some(fit) = &scan.fit {
        // The fit works in rad/ns; report the slope per MHz.
        let slope_per_mhz = fit.slope * mhz_to_rad_per_ns(1.0);
        let _ = writeln!(
            report,
            "fit: met = {:.3} + exp({:.4} + {:.5} * g_mhz), rms {:.3e}",
            fit.floor, fit.intercept, slope_per_mhz, fit.rms_residual
        );
    }
    if !all_found {
        let _ = writeln!(report, "NOT CONVERGED: some coupling values found no MET");
    }
    Ok(Outcome {
        report,
        converged: all_found,
    })
}

fn variance(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let out = Out::new(cfg)?;
    let template = cfg.template_device()?;
    let sites = &cfg.scan.site_counts;
    let durations = &cfg.scan.durations;
    let mut fig6 = out.plot("fig6")?;
    let grid = variance_scan_with(
        &template,
        &cfg.params(),
        durations,
        sites,
        &cfg.variance_options(),
        |r, c, cell| {
            fig6.record(&[
                format!("{}-site", sites[r]),
                fmt_float(durations[c]),
                fmt_float(cell.value.unwrap_or(f64::NAN)),
                fmt_float(cell.error),
            ])
        },
    )?;
    let mut report = String::from("sites duration_ns variance error\n");
    for (r, row) in grid.cells.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            let _ = writeln!(
                report,
                "  {} {} {:.6e} {:.3e}",
                sites[r],
                durations[c],
                cell.value.unwrap_or(f64::NAN),
                cell.error
            );
        }
    }
    Ok(Outcome::done(report))
}

fn noisy_ground(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let out = Out::new(cfg)?;
    let spec = cfg.device()?;
    if spec.collapse.is_none() {
        return Err(CliError::Validation(format!(
            "device `{}` has no collapse rates",
            spec.name
        )));
    }
    let init = cfg.init()?;
    let opts = cfg.ground_options();
    let mut fig8 = out.plot("fig8")?;
    let mut table = out.csv(
        "noisy.csv",
        &[
            "theta",
            "exact",
            "noiseless_energy",
            "noiseless_delta_e",
            "noiseless_shot_std",
            "noisy_energy",
            "noisy_delta_e",
            "noisy_shot_std",
            "noise_shift",
        ],
    )?;
    let mut report = String::from("theta exact noiseless noisy shift shot_std\n");
    let mut converged = true;
    for &theta in &cfg.noise.thetas {
        let p = noise_study(
            &spec,
            &cfg.params(),
            &[theta],
            cfg.schedule.duration,
            &init,
            cfg.noise.shots,
            cfg.optimizer.seed,
            &opts,
        )?
        .remove(0);
        triplet(&mut fig8, "exact", theta, p.exact_energy, 0.0)?;
        triplet(
            &mut fig8,
            "noiseless",
            theta,
            p.noiseless.energy,
            p.noiseless_shot_std,
        )?;
        triplet(&mut fig8, "noisy", theta, p.noisy.energy, p.shot_std)?;
        table.floats(&[
            theta,
            p.exact_energy,
            p.noiseless.energy,
            p.noiseless.delta_e,
            p.noiseless_shot_std,
            p.noisy.energy,
            p.noisy.delta_e,
            p.shot_std,
            p.noise_shift(),
        ])?;
        converged &=
            p.noiseless.delta_e <= cfg.optimizer.tol && p.noisy.delta_e <= cfg.optimizer.tol;
        let _ = writeln!(
            report,
            "  {theta:.4} {:.6} {:.6} {:.6} {:.3e} {:.3e}",
            p.exact_energy,
            p.noiseless.energy,
            p.noisy.energy,
            p.noise_shift(),
            p.shot_std
        );
    }
    if !converged {
        let _ = writeln!(
            report,
            "NOT CONVERGED: some delta_e exceed tol {:.1e}",
            cfg.optimizer.tol
        );
    }
    Ok(Outcome { report, converged })
}

fn thermal(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let out = Out::new(cfg)?;
    let spec = cfg.device()?;
    let h = build_schwinger(&cfg.params())?;
    let mut table = out.csv(
        "thermal.csv",
        &[
            "beta",
            "free_energy_mean",
            "free_energy_std",
            "energy_mean",
            "energy_std",
            "entropy_mean",
            "entropy_std",
            "free_energy_best",
            "free_energy_exact",
            "energy_exact",
            "entropy_exact",
            "bound_violations",
            "leaked",
        ],
    )?;
    let mut fig10 = out.plot("fig10")?;
    let mut report = String::from("beta F_mean F_exact E_mean E_exact S_mean S_exact violations\n");
    let mut converged = true;
    for &beta in &cfg.thermal.betas {
        let mut v = VqtConfig::new(spec.clone(), h.clone(), beta);
        v.t1 = cfg.thermal.t1;
        v.t2 = cfg.thermal.t2;
        v.n_segments = cfg.schedule.segments;
        v.restarts = cfg.optimizer.restarts;
        v.substep = cfg.schedule.substep;
        v.detuning_init_span = cfg
            .optimizer
            .detuning_span_ghz
            .map(pulseprep::num::ghz_to_rad_per_ns);
        v.minimize.max_iter = cfg.optimizer.max_iter;
        let r = prepare_thermal(&v, cfg.optimizer.seed)?;
        let f_exact = r.exact_free_energy();
        table.floats(&[
            beta,
            r.mean_free_energy,
            r.std_free_energy,
            r.mean_energy,
            r.std_energy,
            r.mean_entropy,
            r.std_entropy,
            r.free_energy,
            f_exact,
            r.exact.energy,
            r.exact.entropy,
            r.bound_violations as f64,
            r.leaked,
        ])?;
        for (name, y, err, exact) in [
            (
                "free_energy",
                r.mean_free_energy,
                r.std_free_energy,
                f_exact,
            ),
            ("energy", r.mean_energy, r.std_energy, r.exact.energy),
            ("entropy", r.mean_entropy, r.std_entropy, r.exact.entropy),
        ] {
            triplet(&mut fig10, name, beta, y, err)?;
            triplet(&mut fig10, &format!("{name}_exact"), beta, exact, 0.0)?;
        }
        let gap_ok = r.mean_free_energy - f_exact <= 0.05 * f_exact.abs() + 0.02;
        converged &= gap_ok && r.bound_violations == 0;
        let _ = writeln!(
            report,
            "  {beta} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {}",
            r.mean_free_energy,
            f_exact,
            r.mean_energy,
            r.exact.energy,
            r.mean_entropy,
            r.exact.entropy,
            r.bound_violations
        );
    }
    if !converged {
        let _ = writeln!(
            report,
            "NOT CONVERGED: mean free energy off the exact value or below it"
        );
    }
    Ok(Outcome { report, converged })
}

fn circuit_row(name: &str, c: &Circuit<f64>, duration: f64) -> Vec<String> {
    vec![
        name.to_string(),
        (c.gate_count() - c.count(GateKind::Swap)).to_string(),
        c.single_qubit_count().to_string(),
        c.two_qubit_count().to_string(),
        c.count(GateKind::Cnot).to_string(),
        c.count(GateKind::Swap).to_string(),
        c.depth().to_string(),
        c.single_qubit_layers().to_string(),
        fmt_float(duration),
    ]
}

fn trotter_compare(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let out = Out::new(cfg)?;
    let n = cfg.model.sites;
    let device = pulseprep::device::DeviceSpec::<f64>::load(&cfg.device.name)?;
    let mut times = device.gate_times;
    if let Some(t) = cfg.gates.single_qubit_ns {
        times.single_qubit = t;
    }
    if let Some(t) = cfg.gates.two_qubit_ns {
        times.two_qubit = t;
    }
    let table = GateTimeTable::from_gate_times(&times);
    let routing = match cfg.device.topology {
        Some(TopologyChoice::All) => Topology::AllToAll,
        _ => Topology::NearestNeighbor,
    };
    let h = build_schwinger(&cfg.params())?;
    let trotter = trotter_layer(&h, cfg.gates.trotter_step, Some(&routing))?;
    let entangling = strongly_entangling_layer(n, &vec![[0.0; 3]; n])?;
    let t_dur = circuit_duration(&trotter, &table, cfg.gates.include_swaps)?;
    let e_dur = circuit_duration(&entangling, &table, cfg.gates.include_swaps)?;
    out.text("trotter.txt", &trotter.to_text())?;
    out.text("entangling.txt", &entangling.to_text())?;

    let mut sink = out.csv(
        "gates.csv",
        &[
            "circuit",
            "gates_without_swaps",
            "single_qubit",
            "two_qubit",
            "cnot",
            "swap",
            "depth",
            "single_qubit_layers",
            "duration_ns",
        ],
    )?;
    sink.record(&circuit_row("trotter", &trotter, t_dur))?;
    sink.record(&circuit_row("entangling", &entangling, e_dur))?;

    let mut report = format!(
        "gate times: single {} ns, two-qubit {} ns, swaps {}\n",
        times.single_qubit,
        times.two_qubit,
        if cfg.gates.include_swaps {
            "included"
        } else {
            "excluded"
        }
    );
    for (name, c, d) in [
        ("trotter", &trotter, t_dur),
        ("entangling", &entangling, e_dur),
    ] {
        let _ = writeln!(
            report,
            "{name}: {} gates ({} single-qubit in {} layers, {} CNOT) + {} routing SWAP, depth {}, duration {:.0} ns",
            c.gate_count() - c.count(GateKind::Swap),
            c.single_qubit_count(),
            c.single_qubit_layers(),
            c.count(GateKind::Cnot),
            c.count(GateKind::Swap),
            c.depth(),
            d
        );
    }
    if let Some(met) = cfg.gates.met {
        let init = cfg.init()?;
        let r = speedup_report(
            met,
            &init,
            times.single_qubit,
            &[
                ("trotter".to_string(), t_dur),
                ("entangling".to_string(), e_dur),
            ],
        )?;
        let _ = writeln!(
            report,
            "pulse: {met} ns + {} x {} ns preparation = {} ns",
            r.preparation_gates,
            times.single_qubit,
            r.qoc_time()
        );
        for (name, _, ratio) in &r.rows {
            let _ = writeln!(report, "speedup {name} = {ratio:.2}x");
        }
    }
    Ok(Outcome::done(report))
}

/// Where `dispatch` writes the report for `cfg`.
pub fn report_path(cfg: &RunConfig) -> PathBuf {
    Path::new(&cfg.output).join("report.txt")
}
