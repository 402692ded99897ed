//! Study drivers: minimum-evolution-time search, coupling-strength scans,
//! variance landscapes, noise studies and speedup reports.
//!
//! Every driver is deterministic given its seed: restarts and scan cells may
//! run concurrently, but results are assembled in a fixed order.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::device::{DeviceSpec, Topology};
use crate::engine::{
    shot_standard_deviation, DensityMatrix, EmbeddedObservable, LindbladPropagator, Propagator,
    QuantumState,
};
use crate::num::{mean_std, sample_variance, Real};
use crate::optim::{
    prepare_ground_state_with_reference, random_init, GroundStateOptions, RunResult,
};
use crate::schedule::{segments_for_resolution, ParamLayout};
use crate::spin::{build_schwinger, exact_spectrum, Bitstring, SchwingerParams, SpinHamiltonian};
use crate::{Error, Result};

/// How candidate durations are visited.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMode {
    /// Every grid point from `t_min` upwards until the first success.
    Ascending,
    /// Bisection on the duration grid. Faster, but assumes success is
    /// monotone in the duration, which finite restart budgets do not
    /// guarantee.
    Bisection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetOptions<T> {
    pub t_min: T,
    pub t_max: T,
    pub resolution: T,
    /// `ΔE` accepted as reaching the ground state.
    pub tol: T,
    pub seed: u64,
    pub mode: SearchMode,
    /// Restart count, segment count and optimiser settings; the target `ΔE`
    /// is overridden by `tol`.
    pub ground: GroundStateOptions<T>,
}

impl<T: Real> Default for MetOptions<T> {
    fn default() -> Self {
        Self {
            t_min: T::lit(10.0),
            t_max: T::lit(300.0),
            resolution: T::lit(0.5),
            tol: T::lit(1e-3),
            seed: 42,
            mode: SearchMode::Ascending,
            ground: GroundStateOptions::default(),
        }
    }
}

/// One visited duration.
#[derive(Clone, Debug, PartialEq)]
pub struct MetAttempt<T> {
    pub duration: T,
    pub n_segments: usize,
    pub best_delta_e: T,
    pub restarts_used: usize,
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetResult<T> {
    /// Smallest successful duration, `None` if nothing up to `t_max` worked.
    pub met: Option<T>,
    pub resolution: T,
    /// Ascending in duration.
    pub attempts: Vec<MetAttempt<T>>,
    /// The successful run at `met`.
    pub run: Option<RunResult<T>>,
    pub warning: Option<String>,
}

impl<T: Real> MetResult<T> {
    pub fn found(&self) -> bool {
        self.met.is_some()
    }

    /// Attempt log as CSV (`duration_ns,n_segments,best_delta_e,restarts_used,success`).
    pub fn attempts_csv(&self) -> String {
        let mut out = String::from("duration_ns,n_segments,best_delta_e,restarts_used,success\n");
        for a in &self.attempts {
            let _ = writeln!(
                out,
                "{},{},{:.6e},{},{}",
                a.duration,
                a.n_segments,
                a.best_delta_e.to_f64_lossy(),
                a.restarts_used,
                a.success
            );
        }
        out
    }
}

fn duration_grid<T: Real>(opts: &MetOptions<T>) -> Result<Vec<T>> {
    if !(opts.t_min > T::zero() && opts.t_min < opts.t_max) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < t_min < t_max, got {} and {}",
            opts.t_min, opts.t_max
        )));
    }
    if !(opts.resolution > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "resolution must be positive, got {}",
            opts.resolution
        )));
    }
    let steps = ((opts.t_max - opts.t_min) / opts.resolution + T::lit(1e-9)).floor();
    let steps = steps.to_usize().unwrap_or(0);
    Ok((0..=steps)
        .map(|k| opts.t_min + T::from_usize_lossy(k) * opts.resolution)
        .collect())
}

fn attempt_at<T: Real>(
    spec: &DeviceSpec<T>,
    h: &SpinHamiltonian<T>,
    exact: T,
    init: &Bitstring,
    duration: T,
    opts: &MetOptions<T>,
) -> Result<(MetAttempt<T>, RunResult<T>)> {
    let mut ground = opts.ground.clone();
    ground.target_delta_e = Some(opts.tol);
    ground.n_segments =
        segments_for_resolution(duration, opts.ground.n_segments, spec.pulse_resolution);
    let run =
        prepare_ground_state_with_reference(spec, h, exact, duration, init, opts.seed, &ground)?;
    let attempt = MetAttempt {
        duration,
        n_segments: ground.n_segments,
        best_delta_e: run.delta_e,
        restarts_used: run.restarts.len(),
        success: run.delta_e <= opts.tol,
    };
    Ok((attempt, run))
}

/// Smallest duration on the grid `t_min + k·resolution` at which the best of
/// the restarts reaches `ΔE ≤ tol`.
pub fn find_met<T: Real>(
    spec: &DeviceSpec<T>,
    h: &SpinHamiltonian<T>,
    init: &Bitstring,
    opts: &MetOptions<T>,
) -> Result<MetResult<T>> {
    if opts.resolution < spec.pulse_resolution {
        return Err(Error::InvalidParameter(format!(
            "search resolution {} is finer than the device pulse resolution {}",
            opts.resolution, spec.pulse_resolution
        )));
    }
    let grid = duration_grid(opts)?;
    let exact = exact_spectrum(h, 1)?.ground_energy;
    let mut attempts = Vec::new();
    let mut found: Option<(T, RunResult<T>)> = None;
    let mut warning = None;

    match opts.mode {
        SearchMode::Ascending => {
            for &t in &grid {
                let (a, run) = attempt_at(spec, h, exact, init, t, opts)?;
                let ok = a.success;
                attempts.push(a);
                if ok {
                    found = Some((t, run));
                    break;
                }
            }
        }
        SearchMode::Bisection => {
            warning = Some("bisection assumes success is monotone in the duration".to_string());
            let (first, run) = attempt_at(spec, h, exact, init, grid[0], opts)?;
            let first_ok = first.success;
            attempts.push(first);
            if first_ok {
                found = Some((grid[0], run));
            } else {
                let last = grid.len() - 1;
                let (a, run) = attempt_at(spec, h, exact, init, grid[last], opts)?;
                let ok = a.success;
                attempts.push(a);
                if ok {
                    let (mut lo, mut hi) = (0, last);
                    let mut best = run;
                    while hi - lo > 1 {
                        let mid = (lo + hi) / 2;
                        let (a, run) = attempt_at(spec, h, exact, init, grid[mid], opts)?;
                        let ok = a.success;
                        attempts.push(a);
                        if ok {
                            hi = mid;
                            best = run;
                        } else {
                            lo = mid;
                        }
                    }
                    found = Some((grid[hi], best));
                }
            }
            attempts.sort_by(|a, b| {
                a.duration
                    .partial_cmp(&b.duration)
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
        }
    }

    let (met, run) = match found {
        Some((t, r)) => (Some(t), Some(r)),
        None => (None, None),
    };
    Ok(MetResult {
        met,
        resolution: opts.resolution,
        attempts,
        run,
        warning,
    })
}

/// Mean and standard error of the MET over `repeats` searches with seed bases
/// `seed, seed + 1000, …`. Searches that find nothing are counted separately.
#[derive(Clone, Debug, PartialEq)]
pub struct MetStatistics<T> {
    pub mets: Vec<Option<T>>,
    pub mean: Option<T>,
    pub std: Option<T>,
    pub sem: Option<T>,
    pub not_found: usize,
}

pub fn repeated_met<T: Real>(
    spec: &DeviceSpec<T>,
    h: &SpinHamiltonian<T>,
    init: &Bitstring,
    opts: &MetOptions<T>,
    repeats: usize,
) -> Result<MetStatistics<T>> {
    let mets: Vec<Option<T>> = (0..repeats)
        .map(|k| {
            let mut o = opts.clone();
            o.seed = opts.seed.wrapping_add(1000 * k as u64);
            find_met(spec, h, init, &o).map(|r| r.met)
        })
        .collect::<Result<_>>()?;
    let found: Vec<T> = mets.iter().flatten().copied().collect();
    let (mean, std, sem) = if found.is_empty() {
        (None, None, None)
    } else {
        let (m, s) = mean_std(&found);
        let sd = sample_variance(&found).sqrt();
        (
            Some(m),
            Some(s),
            Some(sd / T::from_usize_lossy(found.len()).sqrt()),
        )
    };
    Ok(MetStatistics {
        not_found: mets.len() - found.len(),
        mets,
        mean,
        std,
        sem,
    })
}

/// Named axis of a scan grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis<T> {
    pub name: String,
    pub values: Vec<T>,
}

/// One grid cell: a value with its error, or an explicit miss.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell<T> {
    pub value: Option<T>,
    pub error: T,
    pub samples: usize,
}

/// Complete rectangular grid; `cells[r][c]` sits at `rows.values[r]`,
/// `cols.values[c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanGrid<T> {
    pub rows: Axis<T>,
    pub cols: Axis<T>,
    pub cells: Vec<Vec<Cell<T>>>,
}

impl<T: Real> ScanGrid<T> {
    pub fn is_complete(&self) -> bool {
        self.cells.len() == self.rows.values.len()
            && self.cells.iter().all(|r| r.len() == self.cols.values.len())
    }

    pub fn cell(&self, r: usize, c: usize) -> &Cell<T> {
        &self.cells[r][c]
    }

    /// Long-format CSV: `row,col,value,error,samples`, `nan` for misses.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "{},{},value,error,samples\n",
            self.rows.name, self.cols.name
        );
        for (r, row) in self.cells.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                let v = cell
                    .value
                    .map_or("nan".to_string(), |v| format!("{:.9e}", v.to_f64_lossy()));
                let _ = writeln!(
                    out,
                    "{},{},{v},{:.9e},{}",
                    self.rows.values[r],
                    self.cols.values[c],
                    cell.error.to_f64_lossy(),
                    cell.samples
                );
            }
        }
        out
    }
}

/// `MET(g) ≈ c + exp(intercept + slope·g)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogLinearFit<T> {
    pub floor: T,
    pub slope: T,
    pub intercept: T,
    /// Root-mean-square residual of `log(MET − floor)`.
    pub rms_residual: T,
}

impl<T: Real> LogLinearFit<T> {
    pub fn predict(&self, g: T) -> T {
        self.floor + (self.intercept + self.slope * g).exp()
    }
}

fn linear_fit<T: Real>(x: &[T], y: &[T]) -> Option<(T, T, T)> {
    let n = T::from_usize_lossy(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let sxx: T = x.iter().map(|&a| (a - mx) * (a - mx)).sum();
    if !(sxx > T::zero()) {
        return None;
    }
    let sxy: T = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum::<T>()
        / n)
        .sqrt();
    Some((slope, intercept, rms))
}

/// Fits `log(MET − c)` linearly in `g`, scanning the floor `c` over
/// `[0, min MET)` and keeping the smallest residual. Needs three points.
pub fn fit_log_linear<T: Real>(g: &[T], met: &[T]) -> Option<LogLinearFit<T>> {
    if g.len() != met.len() || g.len() < 3 {
        return None;
    }
    let lowest = met.iter().copied().fold(T::infinity(), T::min);
    if !(lowest > T::zero()) {
        return None;
    }
    let mut best: Option<LogLinearFit<T>> = None;
    let steps = 200;
    for k in 0..steps {
        let floor = lowest * T::from_usize_lossy(k) / T::from_usize_lossy(steps);
        let y: Vec<T> = met.iter().map(|&m| (m - floor).ln()).collect();
        if let Some((slope, intercept, rms)) = linear_fit(g, &y) {
            if best.as_ref().is_none_or(|b| rms < b.rms_residual) {
                best = Some(LogLinearFit {
                    floor,
                    slope,
                    intercept,
                    rms_residual: rms,
                });
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingScan<T> {
    /// One row (the site count), one column per coupling value (rad/ns).
    pub grid: ScanGrid<T>,
    /// Individual MET per coupling value and run.
    pub runs: Vec<Vec<Option<T>>>,
    pub fit: Option<LogLinearFit<T>>,
    /// Mean MET never increases with the coupling over the scanned range.
    pub monotone_decreasing: bool,
}

/// MET as a function of a uniform coupling `g` on `topology`; `ω`, `δ` are
/// taken from `template`. Each point runs `runs` independent searches.
/// Errors combine the spread over runs and the search resolution in
/// quadrature.
pub fn coupling_scan<T: Real>(
    template: &DeviceSpec<T>,
    h: &SpinHamiltonian<T>,
    g_values: &[T],
    topology: &Topology,
    init: &Bitstring,
    opts: &MetOptions<T>,
    runs: usize,
) -> Result<CouplingScan<T>> {
    coupling_scan_with(
        template,
        h,
        g_values,
        topology,
        init,
        opts,
        runs,
        |_, _, _| Ok(()),
    )
}

/// [`coupling_scan`] with `on_point(index, cell, runs)` called as soon as
/// each coupling value is finished.
#[allow(clippy::too_many_arguments)]
pub fn coupling_scan_with<T: Real>(
    template: &DeviceSpec<T>,
    h: &SpinHamiltonian<T>,
    g_values: &[T],
    topology: &Topology,
    init: &Bitstring,
    opts: &MetOptions<T>,
    runs: usize,
    mut on_point: impl FnMut(usize, &Cell<T>, &[Option<T>]) -> Result<()>,
) -> Result<CouplingScan<T>> {
    if g_values.is_empty() || runs == 0 {
        return Err(Error::InvalidParameter(
            "coupling scan needs values and at least one run".into(),
        ));
    }
    let mut per_point = Vec::with_capacity(g_values.len());
    let mut cells = Vec::with_capacity(g_values.len());
    for (i, &g) in g_values.iter().enumerate() {
        let spec = template.clone().with_uniform_coupling(g, topology);
        let stats = repeated_met(&spec, h, init, opts, runs)?;
        let err = stats.std.map_or(T::zero(), |s| {
            (s * s + opts.resolution * opts.resolution).sqrt()
        });
        let cell = Cell {
            value: if stats.not_found == 0 {
                stats.mean
            } else {
                None
            },
            error: err,
            samples: runs - stats.not_found,
        };
        on_point(i, &cell, &stats.mets)?;
        cells.push(cell);
        per_point.push(stats.mets);
    }
    let means: Vec<Option<T>> = cells.iter().map(|c| c.value).collect();
    let mut order: Vec<usize> = (0..g_values.len()).collect();
    order.sort_by(|&a, &b| {
        g_values[a]
            .partial_cmp(&g_values[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let monotone_decreasing = order.windows(2).all(|w| match (means[w[0]], means[w[1]]) {
        (Some(a), Some(b)) => b <= a,
        _ => false,
    });
    let (fg, fm): (Vec<T>, Vec<T>) = g_values
        .iter()
        .zip(&means)
        .filter_map(|(&g, m)| m.map(|m| (g, m)))
        .unzip();
    Ok(CouplingScan {
        grid: ScanGrid {
            rows: Axis {
                name: "sites".into(),
                values: vec![T::from_usize_lossy(h.n_qubits())],
            },
            cols: Axis {
                name: "g_rad_per_ns".into(),
                values: g_values.to_vec(),
            },
            cells: vec![cells],
        },
        runs: per_point,
        fit: fit_log_linear(&fg, &fm),
        monotone_decreasing,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarianceOptions<T> {
    pub samples: usize,
    pub n_segments: usize,
    pub substep: T,
    pub seed: u64,
}

impl<T: Real> Default for VarianceOptions<T> {
    fn default() -> Self {
        Self {
            samples: 100,
            n_segments: 100,
            substep: T::lit(crate::engine::DEFAULT_ROTATING_SUBSTEP),
            seed: 42,
        }
    }
}

/// Sample variance of the Schwinger energy over uniformly random pulse
/// parameters (`N·(n+1)` per cell), for every site count and duration. The
/// device is `template` truncated to each site count; every run starts from
/// `|0…0⟩`.
pub fn variance_scan<T: Real>(
    template: &DeviceSpec<T>,
    params: &SchwingerParams<T>,
    durations: &[T],
    site_counts: &[usize],
    opts: &VarianceOptions<T>,
) -> Result<ScanGrid<T>> {
    variance_scan_with(template, params, durations, site_counts, opts, |_, _, _| {
        Ok(())
    })
}

/// [`variance_scan`] with `on_cell(row, col, cell)` called as each cell
/// completes.
pub fn variance_scan_with<T: Real>(
    template: &DeviceSpec<T>,
    params: &SchwingerParams<T>,
    durations: &[T],
    site_counts: &[usize],
    opts: &VarianceOptions<T>,
    mut on_cell: impl FnMut(usize, usize, &Cell<T>) -> Result<()>,
) -> Result<ScanGrid<T>> {
    if opts.samples < 2 {
        return Err(Error::InvalidParameter(
            "variance needs at least two samples".into(),
        ));
    }
    let mut cells = Vec::with_capacity(site_counts.len());
    for (r, &n) in site_counts.iter().enumerate() {
        let spec = template.clone().truncated(n)?;
        let mut p = *params;
        p.n_sites = n;
        let h = build_schwinger(&p)?;
        let prop = Propagator::new(&spec)?;
        let obs = EmbeddedObservable::new(&h, &spec)?;
        let init = QuantumState::from_bitstring(&spec, &Bitstring::zeros(n))?;
        let layout = ParamLayout::standard(n, opts.n_segments);
        let bounds = layout.bounds(&spec);
        let mut row = Vec::with_capacity(durations.len());
        for (c, &t) in durations.iter().enumerate() {
            let cell_seed = opts
                .seed
                .wrapping_add(((r as u64) << 32) + ((c as u64) << 16));
            let energies: Vec<T> = (0..opts.samples)
                .into_par_iter()
                .map(|k| {
                    let x = random_init(&bounds, cell_seed.wrapping_add(k as u64));
                    let s = layout.to_schedule(&x, t);
                    prop.energy(&init, &s, &obs, opts.substep.min(t))
                })
                .collect::<Result<_>>()?;
            let var = sample_variance(&energies);
            // standard error of a normal-sample variance
            let err = var * (T::lit(2.0) / T::from_usize_lossy(opts.samples - 1)).sqrt();
            let cell = Cell {
                value: Some(var),
                error: err,
                samples: opts.samples,
            };
            on_cell(r, c, &cell)?;
            row.push(cell);
        }
        cells.push(row);
    }
    Ok(ScanGrid {
        rows: Axis {
            name: "sites".into(),
            values: site_counts
                .iter()
                .map(|&n| T::from_usize_lossy(n))
                .collect(),
        },
        cols: Axis {
            name: "duration_ns".into(),
            values: durations.to_vec(),
        },
        cells,
    })
}

/// Ground-state preparation with and without decoherence at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisePoint<T> {
    pub theta: T,
    pub exact_energy: T,
    pub noiseless: RunResult<T>,
    pub noisy: RunResult<T>,
    /// Shot-noise standard deviation of the noisy estimate.
    pub shot_std: T,
    pub noiseless_shot_std: T,
}

impl<T: Real> NoisePoint<T> {
    /// `|E_noisy − E_noiseless|`.
    pub fn noise_shift(&self) -> T {
        (self.noisy.energy - self.noiseless.energy).abs()
    }
}

/// For each `θ`, optimises the same schedule family (phased segments) under
/// unitary and Lindblad dynamics from `init`.
#[allow(clippy::too_many_arguments)]
pub fn noise_study<T: Real>(
    spec: &DeviceSpec<T>,
    base: &SchwingerParams<T>,
    thetas: &[T],
    duration: T,
    init: &Bitstring,
    shots: usize,
    seed: u64,
    options: &GroundStateOptions<T>,
) -> Result<Vec<NoisePoint<T>>> {
    if spec.collapse.is_none() {
        return Err(Error::InvalidParameter(format!(
            "device `{}` has no collapse rates",
            spec.name
        )));
    }
    let clean_spec = spec.clone().without_collapse();
    thetas
        .iter()
        .map(|&theta| {
            let mut p = *base;
            p.theta = theta;
            let h = build_schwinger(&p)?;
            let exact = exact_spectrum(&h, 1)?.ground_energy;
            let mut clean_opts = options.clone();
            clean_opts.noisy = false;
            let noiseless = prepare_ground_state_with_reference(
                &clean_spec,
                &h,
                exact,
                duration,
                init,
                seed,
                &clean_opts,
            )?;
            let mut noisy_opts = options.clone();
            noisy_opts.noisy = true;
            let noisy = prepare_ground_state_with_reference(
                spec,
                &h,
                exact,
                duration,
                init,
                seed,
                &noisy_opts,
            )?;
            let lind = LindbladPropagator::new(spec)?;
            let rho0 = DensityMatrix::from_state(&QuantumState::from_bitstring(spec, init)?);
            let rho = lind.propagate(&rho0, &noisy.schedule, options.substep)?;
            let obs = EmbeddedObservable::new(&h, spec)?;
            let shot_std =
                shot_standard_deviation(&h, &obs.term_expectations_rho(&rho.matrix), shots);
            let psi0 = QuantumState::from_bitstring(&clean_spec, init)?;
            let psi = Propagator::new(&clean_spec)?.propagate(
                &psi0,
                &noiseless.schedule,
                options.substep,
            )?;
            let noiseless_shot_std =
                shot_standard_deviation(&h, &obs.term_expectations(&psi.amplitudes), shots);
            Ok(NoisePoint {
                theta,
                exact_energy: exact,
                noiseless,
                noisy,
                shot_std,
                noiseless_shot_std,
            })
        })
        .collect()
}

/// Pulse-level total time against gate-level baselines.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeedupReport<T> {
    pub met: T,
    pub preparation_gates: usize,
    pub preparation_time: T,
    /// `(name, baseline duration, baseline / (met + preparation))`.
    pub rows: Vec<(String, T, T)>,
}

impl<T: Real> SpeedupReport<T> {
    pub fn qoc_time(&self) -> T {
        self.met + self.preparation_time
    }

    pub fn ratio(&self, name: &str) -> Option<T> {
        self.rows.iter().find(|r| r.0 == name).map(|r| r.2)
    }
}

/// Ratios of each baseline duration to `met` plus one single-qubit gate per
/// set bit of `init`.
pub fn speedup_report<T: Real>(
    met: T,
    init: &Bitstring,
    single_qubit_time: T,
    baselines: &[(String, T)],
) -> Result<SpeedupReport<T>> {
    if baselines.is_empty() {
        return Err(Error::InvalidParameter(
            "speedup report needs at least one baseline".into(),
        ));
    }
    if !(met > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "MET must be positive, got {met}"
        )));
    }
    let preparation_gates = init.x_count();
    let preparation_time = single_qubit_time * T::from_usize_lossy(preparation_gates);
    let total = met + preparation_time;
    Ok(SpeedupReport {
        met,
        preparation_gates,
        preparation_time,
        rows: baselines
            .iter()
            .map(|(n, d)| (n.clone(), *d, *d / total))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::PauliString;

    fn quick_opts() -> MetOptions<f64> {
        let mut o = MetOptions::default();
        o.ground.restarts = 2;
        o.ground.n_segments = 10;
        o.ground.minimize.max_iter = 100;
        o
    }

    #[test]
    fn degenerate_target_has_met_at_t_min() {
        let spec = DeviceSpec::<f64>::preset("falcon4q_nn")
            .unwrap()
            .truncated(2)
            .unwrap()
            .with_levels(2);
        let mut h = SpinHamiltonian::new(2);
        h.add_term(-1.0, PauliString::identity(2)).unwrap();
        let mut o = quick_opts();
        o.t_min = 5.0;
        o.t_max = 8.0;
        let r = find_met(&spec, &h, &Bitstring::zeros(2), &o).unwrap();
        assert_eq!(r.met, Some(5.0));
        assert_eq!(r.attempts.len(), 1);
        assert!(r.attempts_csv().lines().count() == 2);
    }

    #[test]
    fn not_found_is_explicit() {
        let spec = DeviceSpec::<f64>::preset("falcon4q_nn")
            .unwrap()
            .truncated(2)
            .unwrap()
            .with_levels(2);
        let h = build_schwinger(&SchwingerParams::reference(2)).unwrap();
        let mut o = quick_opts();
        o.t_min = 0.5;
        o.t_max = 1.5;
        let r = find_met(&spec, &h, &Bitstring::zeros(2), &o).unwrap();
        assert!(!r.found());
        assert!(r.run.is_none());
        assert_eq!(r.attempts.len(), 3);
        assert!(r.attempts.windows(2).all(|w| w[0].duration < w[1].duration));
        assert!(r.attempts.iter().all(|a| !a.success));
    }

    #[test]
    fn bad_search_windows() {
        let spec = DeviceSpec::<f64>::preset("ibm_osaka")
            .unwrap()
            .with_levels(2);
        let h = build_schwinger(&SchwingerParams::reference(2)).unwrap();
        let mut o = quick_opts();
        assert!(find_met(&spec, &h, &Bitstring::zeros(2), &o).is_err());
        o.resolution = 3.0;
        o.t_min = 50.0;
        o.t_max = 20.0;
        assert!(find_met(&spec, &h, &Bitstring::zeros(2), &o).is_err());
    }

    #[test]
    fn bisection_brackets_success() {
        let spec = DeviceSpec::<f64>::preset("falcon4q_nn")
            .unwrap()
            .truncated(2)
            .unwrap()
            .with_levels(2);
        let h = build_schwinger(&SchwingerParams::reference(2)).unwrap();
        let mut o = quick_opts();
        o.t_min = 1.0;
        o.t_max = 33.0;
        o.resolution = 4.0;
        o.ground.n_segments = 20;
        o.ground.restarts = 3;
        o.ground.minimize.max_iter = 300;
        o.mode = SearchMode::Bisection;
        let r = find_met(&spec, &h, &Bitstring::from_index(0b01, 2), &o).unwrap();
        assert!(r.warning.is_some());
        let met = r.met.expect("2-site MET below 33 ns");
        let before = r
            .attempts
            .iter()
            .find(|a| (a.duration - (met - 4.0)).abs() < 1e-9)
            .unwrap();
        assert!(!before.success);
        assert!(r.attempts.windows(2).all(|w| w[0].duration < w[1].duration));
    }

    #[test]
    fn log_linear_fit_recovers_exponential() {
        let g: Vec<f64> = (0..6).map(|k| 0.05 + 0.02 * k as f64).collect();
        let met: Vec<f64> = g.iter().map(|&x| 20.0 + (6.0 - 15.0 * x).exp()).collect();
        let fit = fit_log_linear(&g, &met).unwrap();
        assert!((fit.slope + 15.0).abs() < 0.5, "{fit:?}");
        assert!((fit.predict(0.1f64) - (20.0 + (6.0f64 - 1.5).exp())).abs() < 2.0);
        assert!(fit_log_linear(&g[..2], &met[..2]).is_none());
    }

    #[test]
    fn speedups() {
        let r = speedup_report(
            53.0f64,
            &"010".parse().unwrap(),
            71.0,
            &[("trotter".to_string(), 4994.0)],
        )
        .unwrap();
        assert_eq!(r.qoc_time(), 124.0);
        assert!((r.ratio("trotter").unwrap() - 4994.0f64 / 124.0).abs() < 1e-12);
        assert!(r.ratio("missing").is_none());
        assert!(speedup_report(53.0, &"010".parse().unwrap(), 71.0, &[]).is_err());
    }

    #[test]
    fn variance_grid_shape_and_limits() {
        let spec = DeviceSpec::<f64>::preset("falcon4q_nn")
            .unwrap()
            .with_levels(2);
        let o = VarianceOptions {
            samples: 12,
            n_segments: 10,
            substep: 0.1,
            seed: 7,
        };
        let grid = variance_scan(
            &spec,
            &SchwingerParams::reference(2),
            &[0.1, 20.0],
            &[2, 3],
            &o,
        )
        .unwrap();
        assert!(grid.is_complete());
        for row in &grid.cells {
            assert!(row.iter().all(|c| c.value.unwrap() >= 0.0));
            assert!(row[0].value.unwrap() < 1e-2 * row[1].value.unwrap());
        }
        let again = variance_scan(
            &spec,
            &SchwingerParams::reference(2),
            &[0.1, 20.0],
            &[2, 3],
            &o,
        )
        .unwrap();
        assert_eq!(grid, again);
        assert_eq!(grid.to_csv().lines().count(), 5);
    }

    #[test]
    fn grid_csv_marks_misses() {
        let g = ScanGrid {
            rows: Axis {
                name: "sites".into(),
                values: vec![2.0],
            },
            cols: Axis {
                name: "g".into(),
                values: vec![0.1],
            },
            cells: vec![vec![Cell {
                value: None,
                error: 0.0,
                samples: 0,
            }]],
        };
        assert!(g.to_csv().contains("nan"));
    }
}
