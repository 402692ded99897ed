//! Bounded minimisation and multi-start ground-state preparation.
//!
//! [`minimize`] is a projected limited-memory BFGS method: the two-loop
//! recursion acts on the variables that are not pinned at a bound, and a
//! projected Armijo backtracking search keeps every iterate inside the box.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::device::DeviceSpec;
use crate::engine::{
    leakage, DensityMatrix, EmbeddedObservable, Leakage, LindbladPropagator, Propagator,
    QuantumState, DEFAULT_ROTATING_SUBSTEP,
};
use crate::num::{mean_std, Real};
use crate::schedule::{ParamLayout, PulseSchedule};
use crate::spin::{exact_spectrum, Bitstring, SpinHamiltonian};
use crate::{Error, Result};

/// Box constraints `lower ≤ x ≤ upper`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Real> Bounds<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension("bound vectors differ in length".into()));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i])) {
            return Err(Error::InvalidParameter(format!(
                "inverted bounds at index {i}: [{}, {}]",
                lower[i], upper[i]
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn uniform(n: usize, lo: T, hi: T) -> Result<Self> {
        Self::new(vec![lo; n], vec![hi; n])
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.len()
            && x.iter()
                .enumerate()
                .all(|(i, &v)| v >= self.lower[i] && v <= self.upper[i])
    }

    pub fn project(&self, x: &mut [T]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.max(self.lower[i]).min(self.upper[i]);
        }
    }
}

/// Scalar objective over a flat parameter vector.
pub trait Objective<T: Real>: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[T]) -> Result<T>;

    /// Defaults to central finite differences.
    fn value_and_gradient(&self, x: &[T]) -> Result<(T, Vec<T>)> {
        Ok((self.value(x)?, central_difference(|y| self.value(y), x)?))
    }
}

/// Central differences with step `h = 1e-6·max(1, |x_i|)`.
pub fn central_difference<T: Real>(f: impl Fn(&[T]) -> Result<T>, x: &[T]) -> Result<Vec<T>> {
    let mut y = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let h = T::lit(1e-6) * x[i].abs().max(T::one());
        y[i] = x[i] + h;
        let fp = f(&y)?;
        y[i] = x[i] - h;
        let fm = f(&y)?;
        y[i] = x[i];
        let d = (fp - fm) / (h + h);
        if !d.is_finite() {
            return Err(Error::NonFinite(format!(
                "finite-difference derivative {i} is not finite"
            )));
        }
        g.push(d);
    }
    Ok(g)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientMethod {
    CentralFd,
    Adjoint,
}

/// Gradient of `objective` at `x` by the requested method.
pub fn gradient<T: Real, O: Objective<T> + ?Sized>(
    objective: &O,
    x: &[T],
    method: GradientMethod,
) -> Result<Vec<T>> {
    match method {
        GradientMethod::CentralFd => central_difference(|y| objective.value(y), x),
        GradientMethod::Adjoint => Ok(objective.value_and_gradient(x)?.1),
    }
}

/// Closure-backed objective, optionally with an analytic gradient.
pub struct FnObjective<F, G> {
    pub dim: usize,
    pub f: F,
    pub grad: Option<G>,
}

type NoGrad<T> = fn(&[T]) -> Vec<T>;

impl<F> FnObjective<F, ()> {
    pub fn new<T: Real>(dim: usize, f: F) -> FnObjective<F, NoGrad<T>>
    where
        F: Fn(&[T]) -> T + Sync,
    {
        FnObjective { dim, f, grad: None }
    }
}

impl<F, G> FnObjective<F, G> {
    pub fn with_gradient(dim: usize, f: F, grad: G) -> Self {
        Self {
            dim,
            f,
            grad: Some(grad),
        }
    }
}

impl<T: Real, F, G> Objective<T> for FnObjective<F, G>
where
    F: Fn(&[T]) -> T + Sync,
    G: Fn(&[T]) -> Vec<T> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[T]) -> Result<T> {
        Ok((self.f)(x))
    }

    fn value_and_gradient(&self, x: &[T]) -> Result<(T, Vec<T>)> {
        match &self.grad {
            Some(g) => Ok(((self.f)(x), g(x))),
            None => Ok(((self.f)(x), central_difference(|y| Ok((self.f)(y)), x)?)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimizeOptions<T> {
    pub max_iter: usize,
    /// Stop when the projected-gradient norm drops below this.
    pub grad_tol: T,
    /// Stop when `(f_k − f_{k+1}) / max(|f_k|, |f_{k+1}|, 1)` drops below this.
    pub f_tol: T,
    pub memory: usize,
    /// Stop as soon as the objective reaches this value.
    pub stop_below: Option<T>,
    pub max_line_search: usize,
}

impl<T: Real> Default for MinimizeOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: T::lit(1e-8),
            f_tol: T::lit(1e-10),
            memory: 10,
            stop_below: None,
            max_line_search: 40,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    ObjectiveChange,
    MaxIterations,
    TargetReached,
    LineSearchFailed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptResult<T> {
    pub x: Vec<T>,
    pub value: T,
    pub initial_value: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub stop: StopReason,
    pub grad_norm: T,
    pub seed: Option<u64>,
    /// `(iteration, best objective, projected-gradient norm)`.
    pub trace: Vec<(usize, T, T)>,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn projected_gradient_norm<T: Real>(x: &[T], g: &[T], bounds: &Bounds<T>) -> T {
    x.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (&xi, &gi))| {
            let p = (xi - gi).max(bounds.lower[i]).min(bounds.upper[i]) - xi;
            p * p
        })
        .sum::<T>()
        .sqrt()
}

/// Variables pinned at a bound with the gradient pushing outward.
fn active_set<T: Real>(x: &[T], g: &[T], bounds: &Bounds<T>) -> Vec<bool> {
    x.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (&xi, &gi))| {
            (xi <= bounds.lower[i] && gi > T::zero()) || (xi >= bounds.upper[i] && gi < T::zero())
        })
        .collect()
}

/// Bounded limited-memory quasi-Newton minimisation from `x0`.
pub fn minimize<T: Real, O: Objective<T> + ?Sized>(
    objective: &O,
    x0: &[T],
    bounds: &Bounds<T>,
    options: &MinimizeOptions<T>,
) -> Result<OptResult<T>> {
    if x0.len() != bounds.len() || objective.dim() != x0.len() {
        return Err(Error::Dimension(format!(
            "x0 has {} entries, bounds {}, objective {}",
            x0.len(),
            bounds.len(),
            objective.dim()
        )));
    }
    if !bounds.contains(x0) {
        return Err(Error::InvalidParameter("x0 lies outside the bounds".into()));
    }
    let mut x = x0.to_vec();
    let (mut f, mut g) = objective.value_and_gradient(&x)?;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(
            "objective or gradient not finite at x0".into(),
        ));
    }
    let initial_value = f;
    let mut evaluations = 1;
    let mut memory: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(options.memory);
    let mut pg = projected_gradient_norm(&x, &g, bounds);
    let mut trace = vec![(0, f, pg)];
    let mut iterations = 0;
    let c1 = T::lit(1e-4);

    let stop = loop {
        if options.stop_below.is_some_and(|t| f <= t) {
            break StopReason::TargetReached;
        }
        if pg < options.grad_tol {
            break StopReason::GradientTolerance;
        }
        if iterations >= options.max_iter {
            break StopReason::MaxIterations;
        }
        iterations += 1;

        let active = active_set(&x, &g, bounds);
        let mut d = two_loop(&g, &active, &memory);
        let mut slope = dot(&d, &g);
        if !(slope < T::zero()) {
            memory.clear();
            d = g
                .iter()
                .zip(&active)
                .map(|(&gi, &a)| if a { T::zero() } else { -gi })
                .collect();
            slope = dot(&d, &g);
        }
        let dnorm = dot(&d, &d).sqrt();
        let mut alpha = if memory.is_empty() {
            T::one().min(T::one() / dnorm.max(T::min_positive_value()))
        } else {
            T::one()
        };

        let mut accepted = None;
        for _ in 0..options.max_line_search {
            let mut trial: Vec<T> = x.iter().zip(&d).map(|(&xi, &di)| xi + alpha * di).collect();
            bounds.project(&mut trial);
            let step: Vec<T> = trial.iter().zip(&x).map(|(&a, &b)| a - b).collect();
            let decrease = dot(&g, &step);
            if decrease >= T::zero() {
                alpha *= T::lit(0.5);
                continue;
            }
            let (ft, gt) = objective.value_and_gradient(&trial)?;
            evaluations += 1;
            if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && ft <= f + c1 * decrease {
                accepted = Some((trial, step, ft, gt));
                break;
            }
            alpha *= T::lit(0.5);
        }

        let Some((xn, s, fn_, gn)) = accepted else {
            if !memory.is_empty() {
                memory.clear();
                iterations -= 1;
                continue;
            }
            break StopReason::LineSearchFailed;
        };
        let y: Vec<T> = gn.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > T::epsilon() * dot(&y, &y) {
            if memory.len() == options.memory {
                memory.pop_front();
            }
            memory.push_back((s, y, T::one() / sy));
        }
        let f_old = f;
        x = xn;
        f = fn_;
        g = gn;
        pg = projected_gradient_norm(&x, &g, bounds);
        trace.push((iterations, f, pg));
        let scale = f_old.abs().max(f.abs()).max(T::one());
        if (f_old - f) / scale <= options.f_tol {
            break StopReason::ObjectiveChange;
        }
    };

    Ok(OptResult {
        converged: !matches!(
            stop,
            StopReason::MaxIterations | StopReason::LineSearchFailed
        ),
        x,
        value: f,
        initial_value,
        iterations,
        evaluations,
        stop,
        grad_norm: pg,
        seed: None,
        trace,
    })
}

fn two_loop<T: Real>(g: &[T], active: &[bool], memory: &VecDeque<(Vec<T>, Vec<T>, T)>) -> Vec<T> {
    let mask = |v: &mut [T]| {
        for (x, &a) in v.iter_mut().zip(active) {
            if a {
                *x = T::zero();
            }
        }
    };
    let mut q = g.to_vec();
    mask(&mut q);
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = *rho * dot(s, &q);
        for (qi, &yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        for (qi, &si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    mask(&mut q);
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Uniform sample over the bounds box.
pub fn random_init<T: Real>(bounds: &Bounds<T>, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_box(bounds, &mut rng)
}

fn sample_box<T: Real, R: Rng>(bounds: &Bounds<T>, rng: &mut R) -> Vec<T> {
    bounds
        .lower
        .iter()
        .zip(&bounds.upper)
        .map(|(&lo, &hi)| {
            if lo < hi {
                rng.random_range(lo..=hi)
            } else {
                lo
            }
        })
        .collect()
}

/// How the final state is evolved.
#[derive(Clone, Debug)]
pub enum Dynamics<T> {
    Unitary(Propagator<T>),
    Lindblad(LindbladPropagator<T>),
}

/// Energy of the embedded target after evolving a fixed initial state under
/// the schedule encoded by `x`.
#[derive(Clone, Debug)]
pub struct PulseObjective<T> {
    pub dynamics: Dynamics<T>,
    pub observable: EmbeddedObservable<T>,
    pub initial: QuantumState<T>,
    pub layout: ParamLayout,
    pub duration: T,
    pub substep: T,
}

impl<T: Real> PulseObjective<T> {
    pub fn new(
        spec: &DeviceSpec<T>,
        hamiltonian: &SpinHamiltonian<T>,
        initial: QuantumState<T>,
        layout: ParamLayout,
        duration: T,
        noisy: bool,
    ) -> Result<Self> {
        let dynamics = if noisy {
            Dynamics::Lindblad(LindbladPropagator::new(spec)?)
        } else {
            Dynamics::Unitary(Propagator::new(spec)?)
        };
        Ok(Self {
            dynamics,
            observable: EmbeddedObservable::new(hamiltonian, spec)?,
            initial,
            layout,
            duration,
            substep: T::lit(DEFAULT_ROTATING_SUBSTEP),
        })
    }

    pub fn schedule(&self, x: &[T]) -> PulseSchedule<T> {
        self.layout.to_schedule(x, self.duration)
    }

    pub fn spec(&self) -> &DeviceSpec<T> {
        match &self.dynamics {
            Dynamics::Unitary(p) => p.spec(),
            Dynamics::Lindblad(p) => p.spec(),
        }
    }
}

impl<T: Real> Objective<T> for PulseObjective<T> {
    fn dim(&self) -> usize {
        self.layout.len()
    }

    fn value(&self, x: &[T]) -> Result<T> {
        let s = self.schedule(x);
        match &self.dynamics {
            Dynamics::Unitary(p) => p.energy(&self.initial, &s, &self.observable, self.substep),
            Dynamics::Lindblad(p) => p.energy(
                &DensityMatrix::from_state(&self.initial),
                &s,
                &self.observable,
                self.substep,
            ),
        }
    }

    fn value_and_gradient(&self, x: &[T]) -> Result<(T, Vec<T>)> {
        let s = self.schedule(x);
        let (e, g) = match &self.dynamics {
            Dynamics::Unitary(p) => {
                p.energy_gradient(&self.initial, &s, &self.observable, self.substep)?
            }
            Dynamics::Lindblad(p) => p.energy_gradient(
                &DensityMatrix::from_state(&self.initial),
                &s,
                &self.observable,
                self.substep,
            )?,
        };
        Ok((e, self.layout.from_schedule(&g)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundStateOptions<T> {
    pub restarts: usize,
    pub n_segments: usize,
    pub substep: T,
    /// Per-segment phases instead of per-qubit detunings.
    pub phased: bool,
    pub noisy: bool,
    /// Initial detunings are drawn from `±span` rather than the full bound.
    pub detuning_init_span: Option<T>,
    /// Stop launching restarts once `ΔE` falls to this value.
    pub target_delta_e: Option<T>,
    pub minimize: MinimizeOptions<T>,
}

impl<T: Real> Default for GroundStateOptions<T> {
    fn default() -> Self {
        Self {
            restarts: 10,
            n_segments: 100,
            substep: T::lit(DEFAULT_ROTATING_SUBSTEP),
            phased: false,
            noisy: false,
            detuning_init_span: Some(crate::num::ghz_to_rad_per_ns(T::lit(0.05))),
            target_delta_e: None,
            minimize: MinimizeOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RestartSummary<T> {
    pub seed: u64,
    pub value: T,
    pub delta_e: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Outcome of a multi-start ground-state preparation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult<T> {
    pub best: OptResult<T>,
    pub schedule: PulseSchedule<T>,
    pub energy: T,
    pub exact_energy: T,
    pub delta_e: T,
    pub restarts: Vec<RestartSummary<T>>,
    pub mean_energy: T,
    pub std_energy: T,
    pub leakage: Option<Leakage<T>>,
    pub final_probabilities: BTreeMap<String, T>,
    pub duration: T,
    /// X gates needed to prepare the initial bitstring, at the device's
    /// single-qubit gate time.
    pub preparation_time: T,
    pub saturation_fraction: T,
    pub seed: u64,
}

impl<T: Real> RunResult<T> {
    pub fn total_time(&self) -> T {
        self.duration + self.preparation_time
    }
}

/// Seed used by restart `r` of a run seeded with `base`.
pub fn restart_seed(base: u64, r: usize) -> u64 {
    base.wrapping_add(r as u64)
}

/// Starting point for one restart: amplitudes uniform over the bounds,
/// detunings uniform over the (possibly narrower) initial span.
pub fn initial_point<T: Real>(
    layout: &ParamLayout,
    bounds: &Bounds<T>,
    span: Option<T>,
    seed: u64,
) -> Vec<T> {
    let mut narrowed = bounds.clone();
    if let Some(span) = span {
        for q in 0..layout.n_qubits {
            if let Some(i) = layout.detuning_index(q) {
                narrowed.lower[i] = narrowed.lower[i].max(-span);
                narrowed.upper[i] = narrowed.upper[i].min(span);
            }
        }
    }
    random_init(&narrowed, seed)
}

/// Optimises pulses that drive `init` towards the ground state of `h`.
pub fn prepare_ground_state<T: Real>(
    spec: &DeviceSpec<T>,
    h: &SpinHamiltonian<T>,
    duration: T,
    init: &Bitstring,
    seed: u64,
    options: &GroundStateOptions<T>,
) -> Result<RunResult<T>> {
    let exact_energy = exact_spectrum(h, 1)?.ground_energy;
    prepare_ground_state_with_reference(spec, h, exact_energy, duration, init, seed, options)
}

/// As [`prepare_ground_state`], with a precomputed exact ground energy.
pub fn prepare_ground_state_with_reference<T: Real>(
    spec: &DeviceSpec<T>,
    h: &SpinHamiltonian<T>,
    exact_energy: T,
    duration: T,
    init: &Bitstring,
    seed: u64,
    options: &GroundStateOptions<T>,
) -> Result<RunResult<T>> {
    if options.restarts == 0 {
        return Err(Error::InvalidParameter(
            "at least one restart is required".into(),
        ));
    }
    let layout = if options.phased {
        ParamLayout::phased(spec.n_qubits, options.n_segments)
    } else {
        ParamLayout::standard(spec.n_qubits, options.n_segments)
    };
    let initial = QuantumState::from_bitstring(spec, init)?;
    let mut objective =
        PulseObjective::new(spec, h, initial.clone(), layout, duration, options.noisy)?;
    objective.substep = options.substep;
    let bounds = layout.bounds(spec);
    // validates duration against the device before spending any work
    objective
        .schedule(&vec![T::zero(); layout.len()])
        .validate(spec)?;

    let mut min_opts = options.minimize.clone();
    if let Some(tol) = options.target_delta_e {
        min_opts.stop_below = Some(exact_energy + tol);
    }

    let run_one = |r: usize| -> Result<OptResult<T>> {
        let s = restart_seed(seed, r);
        let x0 = initial_point(&layout, &bounds, options.detuning_init_span, s);
        let mut res = minimize(&objective, &x0, &bounds, &min_opts)?;
        res.seed = Some(s);
        Ok(res)
    };

    // Restarts run in batches of the pool width; when a target is set, the
    // results are truncated at the first success so the outcome does not
    // depend on the number of workers.
    let batch = rayon::current_num_threads().max(1);
    let mut results: Vec<OptResult<T>> = Vec::new();
    let mut start = 0;
    while start < options.restarts {
        let end = (start + batch).min(options.restarts);
        let chunk: Vec<Result<OptResult<T>>> = (start..end).into_par_iter().map(run_one).collect();
        for r in chunk {
            results.push(r?);
        }
        if let Some(tol) = options.target_delta_e {
            if let Some(first) = results.iter().position(|r| r.value - exact_energy <= tol) {
                results.truncate(first + 1);
                break;
            }
        }
        start = end;
    }

    let values: Vec<T> = results.iter().map(|r| r.value).collect();
    let (mean_energy, std_energy) = mean_std(&values);
    let best_idx = (0..results.len())
        .min_by(|&a, &b| {
            results[a]
                .value
                .partial_cmp(&results[b].value)
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("at least one restart");
    let restarts = results
        .iter()
        .map(|r| RestartSummary {
            seed: r.seed.unwrap_or(seed),
            value: r.value,
            delta_e: (r.value - exact_energy).abs(),
            iterations: r.iterations,
            converged: r.converged,
        })
        .collect();
    let best = results.swap_remove(best_idx);
    let schedule = objective.schedule(&best.x);

    let (leak, final_probabilities) = match &objective.dynamics {
        Dynamics::Unitary(p) => {
            let out = p.propagate(&initial, &schedule, options.substep)?;
            let reg = spec.register();
            let probs = out
                .probabilities()
                .into_iter()
                .enumerate()
                .filter(|(_, v)| *v > T::lit(1e-6))
                .map(|(k, v)| (crate::engine::basis_label(&reg, k), v))
                .collect();
            ((spec.levels > 2).then(|| leakage(&out, spec)), probs)
        }
        Dynamics::Lindblad(p) => {
            let out = p.propagate(
                &DensityMatrix::from_state(&initial),
                &schedule,
                options.substep,
            )?;
            let reg = spec.register();
            let probs = out
                .populations()
                .into_iter()
                .enumerate()
                .filter(|(_, v)| *v > T::lit(1e-6))
                .map(|(k, v)| (crate::engine::basis_label(&reg, k), v))
                .collect();
            (
                (spec.levels > 2).then(|| crate::engine::leakage_rho(&out, spec)),
                probs,
            )
        }
    };

    Ok(RunResult {
        energy: best.value,
        delta_e: (best.value - exact_energy).abs(),
        saturation_fraction: schedule.saturation_fraction(spec.amp_bound, T::lit(0.05)),
        schedule,
        exact_energy,
        restarts,
        mean_energy,
        std_energy,
        leakage: leak,
        final_probabilities,
        duration,
        preparation_time: spec.gate_times.single_qubit * T::from_usize_lossy(init.x_count()),
        seed,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quad(target: f64) -> impl Fn(&[f64]) -> f64 + Sync {
        move |x: &[f64]| (x[0] - target).powi(2)
    }

    #[test]
    fn unconstrained_quadratic() {
        let obj = FnObjective::new(1, quad(3.0));
        let b = Bounds::uniform(1, -10.0, 10.0).unwrap();
        let r = minimize(&obj, &[0.0], &b, &MinimizeOptions::default()).unwrap();
        assert!((r.x[0] - 3.0).abs() < 1e-8);
        assert!(r.converged);
    }

    #[test]
    fn active_bound() {
        let obj = FnObjective::new(1, quad(3.0));
        let b = Bounds::uniform(1, -10.0, 2.0).unwrap();
        let r = minimize(&obj, &[0.0], &b, &MinimizeOptions::default()).unwrap();
        assert_eq!(r.x[0], 2.0);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let g = |x: &[f64]| {
            vec![
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ]
        };
        let obj = FnObjective::with_gradient(2, f, g);
        let b = Bounds::uniform(2, -5.0, 5.0).unwrap();
        let opts = MinimizeOptions {
            f_tol: 0.0,
            grad_tol: 1e-10,
            ..Default::default()
        };
        let r = minimize(&obj, &[-1.2, 1.0], &b, &opts).unwrap();
        assert!(
            (r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6,
            "{:?}",
            r.x
        );
    }

    #[test]
    fn rejects_bad_setup() {
        assert!(Bounds::new(vec![1.0], vec![0.0]).is_err());
        let obj = FnObjective::new(1, |_: &[f64]| f64::NAN);
        let b = Bounds::uniform(1, -1.0, 1.0).unwrap();
        assert!(matches!(
            minimize(&obj, &[0.0], &b, &MinimizeOptions::default()),
            Err(Error::NonFinite(_))
        ));
        let obj = FnObjective::new(1, quad(0.0));
        assert!(minimize(&obj, &[2.0], &b, &MinimizeOptions::default()).is_err());
    }

    #[test]
    fn linear_gradient_is_exact() {
        let c = [1.5, -2.0, 0.25];
        let obj = FnObjective::new(3, move |x: &[f64]| {
            c.iter().zip(x).map(|(a, b)| a * b).sum()
        });
        let g = gradient(&obj, &[0.3, 2.0, -7.0], GradientMethod::CentralFd).unwrap();
        for (a, b) in g.iter().zip(&c) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn random_init_statistics() {
        let b = Bounds::uniform(10_000, -1.0, 1.0).unwrap();
        let x = random_init(&b, 9);
        assert_eq!(x, random_init(&b, 9));
        assert!(b.contains(&x));
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let sigma = 1.0 / 3f64.sqrt();
        assert!(mean.abs() < 3.0 * sigma / 100.0);
    }

    #[test]
    fn single_qubit_pi_rotation() {
        let spec = DeviceSpec::new(
            vec![std::f64::consts::TAU * 5.0],
            vec![std::f64::consts::TAU * 0.3],
            vec![],
        )
        .with_levels(2);
        let mut h = SpinHamiltonian::new(1);
        h.add_term(1.0, "Z".parse().unwrap()).unwrap();
        let opts = GroundStateOptions {
            restarts: 2,
            n_segments: 10,
            ..Default::default()
        };
        let r = prepare_ground_state(&spec, &h, 40.0, &"0".parse().unwrap(), 42, &opts).unwrap();
        assert!(r.delta_e < 1e-6, "ΔE = {}", r.delta_e);
        assert_eq!(r.preparation_time, 0.0);
    }

    proptest! {
        #[test]
        fn iterates_stay_feasible_and_best_is_monotone(
            target in proptest::collection::vec(-3.0f64..3.0, 3),
            x0 in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let t = target.clone();
            let obj = FnObjective::new(3, move |x: &[f64]| {
                x.iter().zip(&t).map(|(a, b)| (a - b).powi(2) + 0.1 * (a * b).sin()).sum()
            });
            let b = Bounds::uniform(3, -1.0, 1.0).unwrap();
            let r = minimize(&obj, &x0, &b, &MinimizeOptions::default()).unwrap();
            prop_assert!(b.contains(&r.x));
            prop_assert!(r.value <= r.initial_value);
            for w in r.trace.windows(2) {
                prop_assert!(w[1].1 <= w[0].1);
            }
        }
    }
}
