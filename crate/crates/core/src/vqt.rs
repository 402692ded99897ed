//! Pulse-level variational quantum thermaliser.
//!
//! Two independent pulse ansätze share one device: the first prepares a state
//! whose computational-basis populations `p_i` define the ensemble, the second
//! rotates each basis state `|φ_i⟩` towards an eigenstate of the target. The
//! free energy `F = Σ p_i E_i − S/β` is minimised jointly over both parameter
//! sets, with `S` the Shannon entropy of `p`.

use std::collections::BTreeMap;

use num_complex::Complex;
use rayon::prelude::*;

use crate::device::DeviceSpec;
use crate::engine::{EmbeddedObservable, Propagator, QuantumState, DEFAULT_ROTATING_SUBSTEP};
use crate::num::{mean_std, Real};
use crate::optim::{initial_point, minimize, restart_seed, Bounds, MinimizeOptions, Objective};
use crate::schedule::{ParamLayout, PulseSchedule};
use crate::spin::{
    thermal_observables, Bitstring, PauliString, SpinHamiltonian, ThermalObservables,
};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct VqtConfig<T> {
    pub spec: DeviceSpec<T>,
    pub hamiltonian: SpinHamiltonian<T>,
    pub beta: T,
    /// Duration of the distribution ansatz (ns).
    pub t1: T,
    /// Duration of the energy ansatz (ns).
    pub t2: T,
    pub n_segments: usize,
    pub restarts: usize,
    pub substep: T,
    pub detuning_init_span: Option<T>,
    pub minimize: MinimizeOptions<T>,
}

impl<T: Real> VqtConfig<T> {
    /// 50 ns per ansatz, 100 segments, 20 restarts.
    pub fn new(spec: DeviceSpec<T>, hamiltonian: SpinHamiltonian<T>, beta: T) -> Self {
        Self {
            spec,
            hamiltonian,
            beta,
            t1: T::lit(50.0),
            t2: T::lit(50.0),
            n_segments: 100,
            restarts: 20,
            substep: T::lit(DEFAULT_ROTATING_SUBSTEP),
            detuning_init_span: Some(crate::num::ghz_to_rad_per_ns(T::lit(0.05))),
            minimize: MinimizeOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if !(self.beta > T::zero()) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive and finite, got {}",
                self.beta
            )));
        }
        if !(self.t1 > T::zero() && self.t2 > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "ansatz durations must be positive, got {} and {}",
                self.t1, self.t2
            )));
        }
        if self.restarts == 0 || self.n_segments == 0 {
            return Err(Error::InvalidParameter(
                "restarts and segments must be at least 1".into(),
            ));
        }
        if self.hamiltonian.n_qubits() != self.spec.n_qubits {
            return Err(Error::Dimension(format!(
                "Hamiltonian on {} qubits, device has {}",
                self.hamiltonian.n_qubits(),
                self.spec.n_qubits
            )));
        }
        Ok(())
    }
}

/// Computational-basis populations of a qudit state.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution<T> {
    /// Indexed by bitstring index (qubit 1 most significant).
    pub probabilities: Vec<T>,
    /// Population outside the computational subspace.
    pub leaked: T,
}

impl<T: Real> Distribution<T> {
    pub fn n_qubits(&self) -> usize {
        self.probabilities.len().trailing_zeros() as usize
    }

    pub fn to_map(&self) -> BTreeMap<String, T> {
        let n = self.n_qubits();
        self.probabilities
            .iter()
            .enumerate()
            .map(|(k, &p)| (Bitstring::from_index(k, n).to_string(), p))
            .collect()
    }
}

fn computational_populations<T: Real>(
    amplitudes: &[Complex<T>],
    spec: &DeviceSpec<T>,
) -> Distribution<T> {
    let reg = spec.register();
    let n = spec.n_qubits;
    let probabilities: Vec<T> = (0..1usize << n)
        .map(|b| amplitudes[reg.embed_bits(Bitstring::from_index(b, n).bits())].norm_sqr())
        .collect();
    let total: T = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    let kept: T = probabilities.iter().copied().sum();
    Distribution {
        probabilities,
        leaked: (total - kept).max(T::zero()),
    }
}

/// Populations of `U₁|0…0⟩` on the computational basis.
pub fn ensemble_distribution<T: Real>(
    schedule1: &PulseSchedule<T>,
    spec: &DeviceSpec<T>,
    substep: T,
) -> Result<Distribution<T>> {
    let prop = Propagator::new(spec)?;
    let vacuum = QuantumState::from_bitstring(spec, &Bitstring::zeros(spec.n_qubits))?;
    let out = prop.propagate(&vacuum, schedule1, substep)?;
    Ok(computational_populations(&out.amplitudes, spec))
}

/// `−Σ p log p` (natural log, `0 log 0 = 0`).
pub fn shannon_entropy<T: Real>(p: &[T]) -> Result<T> {
    let mut s = T::zero();
    for &x in p {
        if x < T::zero() || !x.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "probability {x} is not in [0, 1]"
            )));
        }
        if x > T::zero() {
            s -= x * x.ln();
        }
    }
    Ok(s)
}

pub fn free_energy<T: Real>(energy: T, entropy: T, beta: T) -> T {
    energy - entropy / beta
}

/// `Σ_i p_i ⟨φ_i|U₂† H U₂|φ_i⟩` over every computational basis state.
pub fn ensemble_energy<T: Real>(
    p: &[T],
    schedule2: &PulseSchedule<T>,
    spec: &DeviceSpec<T>,
    h: &SpinHamiltonian<T>,
    substep: T,
) -> Result<T> {
    if p.len() != 1 << spec.n_qubits {
        return Err(Error::Dimension(format!(
            "{} probabilities for {} qubits",
            p.len(),
            spec.n_qubits
        )));
    }
    let prop = Propagator::new(spec)?;
    let obs = EmbeddedObservable::new(h, spec)?;
    let mut e = T::zero();
    for (k, &pk) in p.iter().enumerate() {
        if pk == T::zero() {
            continue;
        }
        let phi = QuantumState::from_bitstring(spec, &Bitstring::from_index(k, spec.n_qubits))?;
        e += pk * prop.energy(&phi, schedule2, &obs, substep)?;
    }
    Ok(e)
}

/// `Σ_b w_b |b⟩⟨b|` written as a sum of Z words (Walsh–Hadamard transform).
fn diagonal_observable<T: Real>(w: &[T], n: usize) -> Result<SpinHamiltonian<T>> {
    let dim = 1usize << n;
    let mut h = SpinHamiltonian::new(n);
    let scale = T::one() / T::from_usize_lossy(dim);
    for mask in 0..dim {
        let c: T = (0..dim)
            .map(|b| {
                if (b & mask).count_ones() % 2 == 0 {
                    w[b]
                } else {
                    -w[b]
                }
            })
            .sum::<T>()
            * scale;
        let sites: Vec<(usize, crate::spin::Pauli)> = (0..n)
            .filter(|q| mask & (1 << (n - 1 - q)) != 0)
            .map(|q| (q + 1, crate::spin::Pauli::Z))
            .collect();
        h.add_term(c, PauliString::from_sites(n, &sites))?;
    }
    Ok(h)
}

/// Value of the joint free-energy objective at one point, with its pieces.
#[derive(Clone, Debug, PartialEq)]
struct Evaluation<T> {
    free_energy: T,
    energy: T,
    entropy: T,
    distribution: Distribution<T>,
}

struct VqtObjective<'a, T> {
    config: &'a VqtConfig<T>,
    prop: Propagator<T>,
    observable: EmbeddedObservable<T>,
    vacuum: QuantumState<T>,
    basis: Vec<QuantumState<T>>,
    layout: ParamLayout,
}

impl<'a, T: Real> VqtObjective<'a, T> {
    fn new(config: &'a VqtConfig<T>) -> Result<Self> {
        let spec = &config.spec;
        let n = spec.n_qubits;
        Ok(Self {
            prop: Propagator::new(spec)?,
            observable: EmbeddedObservable::new(&config.hamiltonian, spec)?,
            vacuum: QuantumState::from_bitstring(spec, &Bitstring::zeros(n))?,
            basis: (0..1usize << n)
                .map(|k| QuantumState::from_bitstring(spec, &Bitstring::from_index(k, n)))
                .collect::<Result<_>>()?,
            layout: ParamLayout::standard(n, config.n_segments),
            config,
        })
    }

    fn bounds(&self) -> Bounds<T> {
        let b = self.layout.bounds(&self.config.spec);
        let mut lower = b.lower.clone();
        lower.extend_from_slice(&b.lower);
        let mut upper = b.upper.clone();
        upper.extend_from_slice(&b.upper);
        Bounds { lower, upper }
    }

    fn schedules(&self, x: &[T]) -> (PulseSchedule<T>, PulseSchedule<T>) {
        let m = self.layout.len();
        (
            self.layout.to_schedule(&x[..m], self.config.t1),
            self.layout.to_schedule(&x[m..], self.config.t2),
        )
    }

    fn evaluate(&self, x: &[T]) -> Result<Evaluation<T>> {
        let (s1, s2) = self.schedules(x);
        let sub = self.config.substep;
        let out = self.prop.propagate(&self.vacuum, &s1, sub)?;
        let distribution = computational_populations(&out.amplitudes, &self.config.spec);
        let mut energy = T::zero();
        for (phi, &pk) in self.basis.iter().zip(&distribution.probabilities) {
            if pk > T::zero() {
                energy += pk * self.prop.energy(phi, &s2, &self.observable, sub)?;
            }
        }
        let entropy = shannon_entropy(&distribution.probabilities)?;
        Ok(Evaluation {
            free_energy: free_energy(energy, entropy, self.config.beta),
            energy,
            entropy,
            distribution,
        })
    }
}

impl<T: Real> Objective<T> for VqtObjective<'_, T> {
    fn dim(&self) -> usize {
        2 * self.layout.len()
    }

    fn value(&self, x: &[T]) -> Result<T> {
        Ok(self.evaluate(x)?.free_energy)
    }

    fn value_and_gradient(&self, x: &[T]) -> Result<(T, Vec<T>)> {
        let (s1, s2) = self.schedules(x);
        let sub = self.config.substep;
        let beta = self.config.beta;
        let n = self.config.spec.n_qubits;

        let out = self.prop.propagate(&self.vacuum, &s1, sub)?;
        let p = computational_populations(&out.amplitudes, &self.config.spec).probabilities;

        let mut energies = Vec::with_capacity(p.len());
        let mut g2 = vec![T::zero(); self.layout.len()];
        for (phi, &pk) in self.basis.iter().zip(&p) {
            let (e, g) = self.prop.energy_gradient(phi, &s2, &self.observable, sub)?;
            for (acc, gi) in g2.iter_mut().zip(self.layout.from_schedule(&g)) {
                *acc += pk * gi;
            }
            energies.push(e);
        }

        // dF/dp_i = E_i + (log p_i + 1)/β; the log is floored so that empty
        // bins keep a large but finite pull.
        let floor = T::min_positive_value().sqrt();
        let w: Vec<T> = p
            .iter()
            .zip(&energies)
            .map(|(&pk, &e)| e + (pk.max(floor).ln() + T::one()) / beta)
            .collect();
        let weights = EmbeddedObservable::new(&diagonal_observable(&w, n)?, &self.config.spec)?;
        let (_, g) = self
            .prop
            .energy_gradient(&self.vacuum, &s1, &weights, sub)?;
        let mut grad = self.layout.from_schedule(&g);
        grad.extend(g2);

        let energy: T = p.iter().zip(&energies).map(|(&a, &b)| a * b).sum();
        let entropy = shannon_entropy(&p)?;
        Ok((free_energy(energy, entropy, beta), grad))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThermalRestart<T> {
    pub seed: u64,
    pub free_energy: T,
    pub energy: T,
    pub entropy: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Outcome of a multi-start thermal-state preparation at one `β`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermalResult<T> {
    pub beta: T,
    /// Best restart.
    pub free_energy: T,
    pub energy: T,
    pub entropy: T,
    pub distribution: BTreeMap<String, T>,
    pub leaked: T,
    pub schedule1: PulseSchedule<T>,
    pub schedule2: PulseSchedule<T>,
    pub restarts: Vec<ThermalRestart<T>>,
    pub mean_free_energy: T,
    pub std_free_energy: T,
    pub mean_energy: T,
    pub std_energy: T,
    pub mean_entropy: T,
    pub std_entropy: T,
    pub exact: ThermalObservables<T>,
    /// Restarts whose free energy fell below the exact value by more than
    /// 1e-9; nonzero only when leakage breaks normalisation.
    pub bound_violations: usize,
}

impl<T: Real> ThermalResult<T> {
    pub fn exact_free_energy(&self) -> T {
        self.exact
            .free_energy
            .unwrap_or_else(|| free_energy(self.exact.energy, self.exact.entropy, self.beta))
    }
}

/// Jointly minimises `F(Θ₁, Θ₂)` from `config.restarts` random starts.
pub fn prepare_thermal<T: Real>(config: &VqtConfig<T>, seed: u64) -> Result<ThermalResult<T>> {
    config.validate()?;
    let objective = VqtObjective::new(config)?;
    let half = objective.layout.len();
    let layout_bounds = objective.layout.bounds(&config.spec);
    let bounds = objective.bounds();
    PulseSchedule::<T>::zeros(
        config.spec.n_qubits,
        config.n_segments,
        config.t1.min(config.t2),
    )
    .validate(&config.spec)?;

    let runs: Vec<Result<_>> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let s = restart_seed(seed, r);
            let mut x0 = initial_point(
                &objective.layout,
                &layout_bounds,
                config.detuning_init_span,
                s,
            );
            x0.extend(initial_point(
                &objective.layout,
                &layout_bounds,
                config.detuning_init_span,
                s ^ 0x9e37_79b9_7f4a_7c15,
            ));
            let mut res = minimize(&objective, &x0, &bounds, &config.minimize)?;
            res.seed = Some(s);
            let eval = objective.evaluate(&res.x)?;
            Ok((res, eval))
        })
        .collect();
    let runs: Vec<_> = runs.into_iter().collect::<Result<_>>()?;

    let exact = thermal_observables(&config.hamiltonian, config.beta)?;
    let f_exact = exact
        .free_energy
        .unwrap_or_else(|| free_energy(exact.energy, exact.entropy, config.beta));

    let restarts: Vec<ThermalRestart<T>> = runs
        .iter()
        .map(|(res, ev)| ThermalRestart {
            seed: res.seed.unwrap_or(seed),
            free_energy: ev.free_energy,
            energy: ev.energy,
            entropy: ev.entropy,
            iterations: res.iterations,
            converged: res.converged,
        })
        .collect();
    let col =
        |f: fn(&ThermalRestart<T>) -> T| mean_std(&restarts.iter().map(f).collect::<Vec<_>>());
    let (mean_free_energy, std_free_energy) = col(|r| r.free_energy);
    let (mean_energy, std_energy) = col(|r| r.energy);
    let (mean_entropy, std_entropy) = col(|r| r.entropy);
    let bound_violations = restarts
        .iter()
        .filter(|r| r.free_energy < f_exact - T::lit(1e-9))
        .count();

    let best = (0..runs.len())
        .min_by(|&a, &b| {
            runs[a]
                .1
                .free_energy
                .partial_cmp(&runs[b].1.free_energy)
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("at least one restart");
    let (res, ev) = &runs[best];
    let (schedule1, schedule2) = objective.schedules(&res.x);
    debug_assert_eq!(res.x.len(), 2 * half);

    Ok(ThermalResult {
        beta: config.beta,
        free_energy: ev.free_energy,
        energy: ev.energy,
        entropy: ev.entropy,
        distribution: ev.distribution.to_map(),
        leaked: ev.distribution.leaked,
        schedule1,
        schedule2,
        restarts,
        mean_free_energy,
        std_free_energy,
        mean_energy,
        std_energy,
        mean_entropy,
        std_entropy,
        exact,
        bound_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{central_difference, gradient, GradientMethod};
    use crate::spin::{build_schwinger, SchwingerParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_site() -> (DeviceSpec<f64>, SpinHamiltonian<f64>) {
        let spec = DeviceSpec::preset("falcon4q_nn")
            .unwrap()
            .truncated(2)
            .unwrap()
            .with_levels(2);
        let h = build_schwinger(&SchwingerParams::reference(2)).unwrap();
        (spec, h)
    }

    #[test]
    fn entropy_values() {
        let ln2 = 2f64.ln();
        assert!((shannon_entropy(&[0.25; 4]).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert_eq!(shannon_entropy(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((shannon_entropy(&[0.5, 0.5]).unwrap() - ln2).abs() < 1e-15);
        assert!(shannon_entropy(&[1.2, -0.2]).is_err());
    }

    #[test]
    fn zero_schedule_gives_vacuum_distribution() {
        let (spec, _) = two_site();
        let s = PulseSchedule::zeros(2, 10, 20.0);
        let d = ensemble_distribution(&s, &spec, 0.1).unwrap();
        assert!((d.probabilities[0] - 1.0).abs() < 1e-12);
        assert!(d.leaked.abs() < 1e-12);
        assert_eq!(d.to_map().len(), 4);
    }

    #[test]
    fn leaked_weight_is_reported() {
        let spec = DeviceSpec::<f64>::preset("falcon4q_nn")
            .unwrap()
            .truncated(2)
            .unwrap()
            .with_levels(3);
        let s = PulseSchedule::constant(2, 10, 30.0, spec.amp_bound);
        let d = ensemble_distribution(&s, &spec, 0.1).unwrap();
        let sum: f64 = d.probabilities.iter().sum();
        assert!(d.probabilities.iter().all(|&p| p >= 0.0));
        assert!(sum <= 1.0 + 1e-12);
        assert!((sum + d.leaked - 1.0).abs() < 1e-9);
    }

    #[test]
    fn half_rabi_rotation_is_even() {
        let spec = DeviceSpec::new(vec![30.0], vec![0.0], vec![]).with_levels(2);
        let omega = 0.1;
        let t = std::f64::consts::FRAC_PI_4 / omega;
        let s = PulseSchedule::constant(1, 1, t, omega);
        let d = ensemble_distribution(&s, &spec, 0.01).unwrap();
        assert!((d.probabilities[0] - 0.5).abs() < 1e-6);
        assert!((d.probabilities[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn energy_of_vacuum_under_z_sum() {
        let (spec, _) = two_site();
        let mut h = SpinHamiltonian::new(2);
        h.add_term(1.0, "ZI".parse().unwrap()).unwrap();
        h.add_term(1.0, "IZ".parse().unwrap()).unwrap();
        let s = PulseSchedule::zeros(2, 10, 20.0);
        let e = ensemble_energy(&[1.0, 0.0, 0.0, 0.0], &s, &spec, &h, 0.1).unwrap();
        assert!((e - 2.0).abs() < 1e-12);
        assert!(ensemble_energy(&[1.0, 0.0], &s, &spec, &h, 0.1).is_err());
    }

    #[test]
    fn diagonal_observable_reproduces_weights() {
        let w: [f64; 8] = [0.3, -1.0, 2.5, 0.7, 0.0, 1.5, -0.2, 4.0];
        let h = diagonal_observable(&w, 3).unwrap();
        let m = crate::spin::pauli_matrix(&h).unwrap();
        for (k, &wk) in w.iter().enumerate() {
            assert!((m[(k, k)].re - wk).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_gradient_matches_finite_differences() {
        let (spec, h) = two_site();
        let mut cfg = VqtConfig::new(spec, h, 0.7);
        cfg.n_segments = 4;
        cfg.t1 = 8.0;
        cfg.t2 = 6.0;
        let obj = VqtObjective::new(&cfg).unwrap();
        let b = obj.bounds();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = b
            .lower
            .iter()
            .zip(&b.upper)
            .map(|(&l, &u)| rng.random_range(l..u) * 0.5)
            .collect();
        let ga = gradient(&obj, &x, GradientMethod::Adjoint).unwrap();
        let gf = central_difference(|y| obj.value(y), &x).unwrap();
        let scale = gf.iter().fold(0f64, |m, v| m.max(v.abs()));
        for (a, f) in ga.iter().zip(&gf) {
            assert!((a - f).abs() <= 1e-5 * scale, "{a} vs {f}");
        }
    }

    #[test]
    fn invalid_config() {
        let (spec, h) = two_site();
        let mut cfg = VqtConfig::new(spec, h, 0.0);
        assert!(prepare_thermal(&cfg, 1).is_err());
        cfg.beta = 1.0;
        cfg.t1 = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn small_thermal_run_respects_variational_bound() {
        let (spec, h) = two_site();
        let mut cfg = VqtConfig::new(spec, h, 1.0);
        cfg.restarts = 2;
        cfg.n_segments = 20;
        cfg.t1 = 20.0;
        cfg.t2 = 20.0;
        cfg.minimize.max_iter = 60;
        let r = prepare_thermal(&cfg, 5).unwrap();
        assert_eq!(r.restarts.len(), 2);
        assert_eq!(r.bound_violations, 0);
        let total: f64 = r.distribution.values().sum::<f64>();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(r.entropy >= 0.0 && r.entropy <= 2.0 * 2f64.ln() + 1e-12);
        assert!((r.free_energy - (r.energy - r.entropy / r.beta)).abs() < 1e-12);
        assert!(r.free_energy >= r.exact_free_energy() - 1e-9);
    }
}
