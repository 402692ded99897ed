//! Quantum states, propagation, measurement and leakage.
//!
//! Closed-system evolution lives in [`unitary`], open-system (Lindblad)
//! evolution in [`lindblad`]. Both integrate in the frame co-rotating with
//! every qudit and hand back lab-frame results.

mod lindblad;
mod unitary;

use std::collections::BTreeMap;

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::device::{rotating_frame_transform, DeviceSpec, Frame, FrameDirection, Register};
use crate::linalg::{eigh, CMatrix};
use crate::num::Real;
use crate::spin::{Bitstring, SpinHamiltonian};
use crate::{Error, Result};

pub use lindblad::{propagate_lindblad, LindbladPropagator};
pub use unitary::{propagate, propagate_lab, Propagator};

/// Default integration substep in the rotating frame (ns).
pub const DEFAULT_ROTATING_SUBSTEP: f64 = 0.1;
/// Default integration substep in the lab frame (ns).
pub const DEFAULT_LAB_SUBSTEP: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState<T> {
    pub amplitudes: Vec<Complex<T>>,
    pub frame: Frame,
}

impl<T: Real> QuantumState<T> {
    pub fn new(amplitudes: Vec<Complex<T>>, frame: Frame) -> Self {
        Self { amplitudes, frame }
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amplitudes = vec![Complex::default(); dim];
        amplitudes[index] = Complex::from(T::one());
        Self::new(amplitudes, Frame::Lab)
    }

    /// Computational basis state `|b₁…b_N⟩` embedded in the qudit space.
    pub fn from_bitstring(spec: &DeviceSpec<T>, bits: &Bitstring) -> Result<Self> {
        if bits.len() != spec.n_qubits {
            return Err(Error::Dimension(format!(
                "bitstring {bits} has {} bits for {} qubits",
                bits.len(),
                spec.n_qubits
            )));
        }
        Ok(Self::basis(
            spec.dim(),
            spec.register().embed_bits(bits.bits()),
        ))
    }

    /// Qudit product state with the given level on each qudit.
    pub fn from_levels(spec: &DeviceSpec<T>, levels: &[usize]) -> Result<Self> {
        if levels.len() != spec.n_qubits || levels.iter().any(|&l| l >= spec.levels) {
            return Err(Error::Dimension(format!(
                "invalid level assignment {levels:?}"
            )));
        }
        Ok(Self::basis(spec.dim(), spec.register().index_of(levels)))
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> T {
        crate::linalg::norm(&self.amplitudes)
    }

    pub fn probabilities(&self) -> Vec<T> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Re-expresses the state at time `t` in the requested frame.
    pub fn into_frame(self, spec: &DeviceSpec<T>, t: T, frame: Frame) -> Result<Self> {
        if frame == self.frame {
            return Ok(self);
        }
        let dir = match frame {
            Frame::Rotating => FrameDirection::ToRotating,
            Frame::Lab => FrameDirection::ToLab,
        };
        let amplitudes = rotating_frame_transform(spec, self.amplitudes, t, dir)?;
        Ok(Self { amplitudes, frame })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T> {
    pub matrix: CMatrix<T>,
    pub frame: Frame,
}

impl<T: Real> DensityMatrix<T> {
    pub fn from_state(state: &QuantumState<T>) -> Self {
        Self {
            matrix: CMatrix::outer(&state.amplitudes, &state.amplitudes),
            frame: state.frame,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn trace(&self) -> T {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> T {
        self.matrix.as_slice().iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn populations(&self) -> Vec<T> {
        self.matrix.diagonal().into_iter().map(|z| z.re).collect()
    }

    pub fn min_eigenvalue(&self) -> Result<T> {
        Ok(eigh(&self.matrix)?.values[0])
    }

    /// Unit trace, Hermiticity and positivity within `tol`.
    pub fn validate(&self, tol: T) -> Result<()> {
        if !self.matrix.is_hermitian(tol) {
            return Err(Error::InvalidParameter(
                "density matrix is not Hermitian".into(),
            ));
        }
        if (self.trace() - T::one()).abs() > tol {
            return Err(Error::InvalidParameter(format!(
                "density matrix trace {} != 1",
                self.trace()
            )));
        }
        let min = self.min_eigenvalue()?;
        if min < -tol {
            return Err(Error::InvalidParameter(format!(
                "density matrix eigenvalue {min} < 0"
            )));
        }
        Ok(())
    }

    pub fn into_frame(self, spec: &DeviceSpec<T>, t: T, frame: Frame) -> Result<Self> {
        if frame == self.frame {
            return Ok(self);
        }
        let dir = match frame {
            Frame::Rotating => FrameDirection::ToRotating,
            Frame::Lab => FrameDirection::ToLab,
        };
        let matrix = rotating_frame_transform(spec, self.matrix, t, dir)?;
        Ok(Self { matrix, frame })
    }
}

/// A spin Hamiltonian acting on the lowest two levels of every qudit; higher
/// levels are annihilated (projected embedding, no renormalisation).
#[derive(Clone, Debug)]
pub struct EmbeddedObservable<T> {
    hamiltonian: SpinHamiltonian<T>,
    register: Register,
    /// Qudit index of each computational basis index.
    computational: Vec<usize>,
}

impl<T: Real> EmbeddedObservable<T> {
    pub fn new(hamiltonian: &SpinHamiltonian<T>, spec: &DeviceSpec<T>) -> Result<Self> {
        if hamiltonian.n_qubits() != spec.n_qubits {
            return Err(Error::Dimension(format!(
                "Hamiltonian on {} qubits, device has {}",
                hamiltonian.n_qubits(),
                spec.n_qubits
            )));
        }
        let register = spec.register();
        let computational = (0..1usize << spec.n_qubits)
            .map(|b| {
                let bits = Bitstring::from_index(b, spec.n_qubits);
                register.embed_bits(bits.bits())
            })
            .collect();
        Ok(Self {
            hamiltonian: hamiltonian.clone(),
            register,
            computational,
        })
    }

    pub fn hamiltonian(&self) -> &SpinHamiltonian<T> {
        &self.hamiltonian
    }

    pub fn dim(&self) -> usize {
        self.register.dim()
    }

    /// Amplitudes on the computational subspace, ordered by bit index.
    pub fn compress(&self, psi: &[Complex<T>]) -> Vec<Complex<T>> {
        self.computational.iter().map(|&k| psi[k]).collect()
    }

    fn scatter(&self, phi: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut out = vec![Complex::default(); self.dim()];
        for (&k, &v) in self.computational.iter().zip(phi) {
            out[k] = v;
        }
        out
    }

    /// `O ψ` in the qudit space.
    pub fn apply(&self, psi: &[Complex<T>]) -> Vec<Complex<T>> {
        self.scatter(&self.hamiltonian.apply(&self.compress(psi)))
    }

    pub fn expectation(&self, psi: &[Complex<T>]) -> T {
        self.hamiltonian.expectation(&self.compress(psi))
    }

    /// Dense `O` over the qudit space.
    pub fn matrix(&self) -> CMatrix<T> {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for (b, &col) in self.computational.iter().enumerate() {
            let mut e = vec![Complex::default(); self.computational.len()];
            e[b] = Complex::from(T::one());
            for (r, v) in self.hamiltonian.apply(&e).into_iter().enumerate() {
                m[(self.computational[r], col)] = v;
            }
        }
        m
    }

    pub fn expectation_rho(&self, rho: &CMatrix<T>) -> T {
        let n = self.computational.len();
        let mut total = T::zero();
        for term in self.hamiltonian.terms() {
            let mut acc = Complex::<T>::default();
            for col in 0..n {
                let (row, f) = term.string.action::<T>(col);
                acc += f * rho[(self.computational[col], self.computational[row])];
            }
            total += term.coeff * acc.re;
        }
        total
    }

    /// `⟨P_j⟩` for every term, in term order.
    pub fn term_expectations(&self, psi: &[Complex<T>]) -> Vec<T> {
        let phi = self.compress(psi);
        self.hamiltonian
            .terms()
            .iter()
            .map(|t| {
                let mut acc = Complex::<T>::default();
                for (col, &a) in phi.iter().enumerate() {
                    let (row, f) = t.string.action::<T>(col);
                    acc += phi[row].conj() * f * a;
                }
                acc.re
            })
            .collect()
    }

    pub fn term_expectations_rho(&self, rho: &CMatrix<T>) -> Vec<T> {
        let n = self.computational.len();
        self.hamiltonian
            .terms()
            .iter()
            .map(|t| {
                let mut acc = Complex::<T>::default();
                for col in 0..n {
                    let (row, f) = t.string.action::<T>(col);
                    acc += f * rho[(self.computational[col], self.computational[row])];
                }
                acc.re
            })
            .collect()
    }
}

fn require_lab(frame: Frame) -> Result<()> {
    match frame {
        Frame::Lab => Ok(()),
        Frame::Rotating => Err(Error::Frame(
            "energy measurement needs a lab-frame state; X/Y terms are frame dependent".into(),
        )),
    }
}

/// `⟨ψ|H|ψ⟩` with `H` embedded on the lowest two levels of each qudit.
pub fn measure_energy<T: Real>(
    state: &QuantumState<T>,
    h: &SpinHamiltonian<T>,
    spec: &DeviceSpec<T>,
) -> Result<T> {
    require_lab(state.frame)?;
    if state.dim() != spec.dim() {
        return Err(Error::Dimension(format!(
            "state dimension {} != {}",
            state.dim(),
            spec.dim()
        )));
    }
    Ok(EmbeddedObservable::new(h, spec)?.expectation(&state.amplitudes))
}

/// `Tr(ρ H)` with the same projected embedding as [`measure_energy`].
pub fn measure_energy_rho<T: Real>(
    rho: &DensityMatrix<T>,
    h: &SpinHamiltonian<T>,
    spec: &DeviceSpec<T>,
) -> Result<T> {
    require_lab(rho.frame)?;
    if rho.dim() != spec.dim() {
        return Err(Error::Dimension(format!(
            "density matrix dimension {} != {}",
            rho.dim(),
            spec.dim()
        )));
    }
    Ok(EmbeddedObservable::new(h, spec)?.expectation_rho(&rho.matrix))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Leakage<T> {
    /// Population with qudit `i` in a level `≥ 2`.
    pub per_qubit: Vec<T>,
    /// Population outside the computational subspace.
    pub total: T,
    /// Set when the device is two-level and the figures are trivially zero.
    pub two_level: bool,
}

pub fn leakage_from_populations<T: Real>(pops: &[T], spec: &DeviceSpec<T>) -> Leakage<T> {
    let reg = spec.register();
    let mut per_qubit = vec![T::zero(); spec.n_qubits];
    let mut inside = T::zero();
    for (k, &p) in pops.iter().enumerate() {
        let mut comp = true;
        for (q, slot) in per_qubit.iter_mut().enumerate() {
            if reg.level(k, q) >= 2 {
                *slot += p;
                comp = false;
            }
        }
        if comp {
            inside += p;
        }
    }
    let total_pop: T = pops.iter().copied().sum();
    Leakage {
        per_qubit,
        total: total_pop - inside,
        two_level: spec.levels == 2,
    }
}

pub fn leakage<T: Real>(state: &QuantumState<T>, spec: &DeviceSpec<T>) -> Leakage<T> {
    leakage_from_populations(&state.probabilities(), spec)
}

pub fn leakage_rho<T: Real>(rho: &DensityMatrix<T>, spec: &DeviceSpec<T>) -> Leakage<T> {
    leakage_from_populations(&rho.populations(), spec)
}

/// Population with at least one qudit in its highest level (`d − 1`).
pub fn top_level_population<T: Real>(pops: &[T], spec: &DeviceSpec<T>) -> T {
    let reg = spec.register();
    pops.iter()
        .enumerate()
        .filter(|(k, _)| (0..spec.n_qubits).any(|q| reg.level(*k, q) == spec.levels - 1))
        .map(|(_, &p)| p)
        .sum()
}

/// Basis label: one digit per qudit, qudit 1 first.
pub fn basis_label(reg: &Register, index: usize) -> String {
    reg.levels_of(index)
        .iter()
        .map(|l| char::from_digit(*l as u32, 10).unwrap_or('?'))
        .collect()
}

/// Basis-state populations sampled along a trajectory.
#[derive(Clone, Debug, Default)]
pub struct ProbabilityTrace<T> {
    pub times: Vec<T>,
    pub labels: Vec<String>,
    /// `probabilities[step][basis]`.
    pub probabilities: Vec<Vec<T>>,
}

impl<T: Real> ProbabilityTrace<T> {
    pub fn new(reg: &Register) -> Self {
        Self {
            times: Vec::new(),
            labels: (0..reg.dim()).map(|k| basis_label(reg, k)).collect(),
            probabilities: Vec::new(),
        }
    }

    pub fn record(&mut self, t: T, pops: Vec<T>) {
        self.times.push(t);
        self.probabilities.push(pops);
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Largest population reached by each basis state.
    pub fn peaks(&self) -> Vec<T> {
        let mut peak = vec![T::zero(); self.labels.len()];
        for row in &self.probabilities {
            for (p, &v) in peak.iter_mut().zip(row) {
                *p = p.max(v);
            }
        }
        peak
    }

    /// Peak population of `label` over times in `[from, to]`, with its time.
    pub fn peak_in_window(&self, label: &str, from: T, to: T) -> Option<(T, T)> {
        let k = self.index_of(label)?;
        self.times
            .iter()
            .zip(&self.probabilities)
            .filter(|(t, _)| **t >= from && **t <= to)
            .map(|(&t, row)| (t, row[k]))
            .fold(None, |best: Option<(T, T)>, (t, p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((t, p)),
            })
    }

    /// Labels whose peak population reaches `threshold`.
    pub fn significant(&self, threshold: T) -> Vec<String> {
        self.peaks()
            .iter()
            .zip(&self.labels)
            .filter(|(p, _)| **p >= threshold)
            .map(|(_, l)| l.clone())
            .collect()
    }

    /// `(time, label, probability)` rows restricted to the significant states.
    pub fn rows(&self, threshold: T) -> Vec<(T, String, T)> {
        let keep: Vec<usize> = self
            .significant(threshold)
            .iter()
            .filter_map(|l| self.index_of(l))
            .collect();
        let mut out = Vec::with_capacity(keep.len() * self.times.len());
        for (&t, row) in self.times.iter().zip(&self.probabilities) {
            for &k in &keep {
                out.push((t, self.labels[k].clone(), row[k]));
            }
        }
        out
    }

    pub fn final_probabilities(&self) -> BTreeMap<String, T> {
        self.probabilities
            .last()
            .map(|row| {
                self.labels
                    .iter()
                    .cloned()
                    .zip(row.iter().copied())
                    .collect()
            })
            .unwrap_or_default()
    }
}

/// Basis-state populations at every substep of a unitary propagation.
pub fn probability_trace<T: Real>(
    state: &QuantumState<T>,
    schedule: &crate::schedule::PulseSchedule<T>,
    spec: &DeviceSpec<T>,
    substep: T,
) -> Result<ProbabilityTrace<T>> {
    let prop = Propagator::new(spec)?;
    let mut trace = ProbabilityTrace::new(&spec.register());
    prop.propagate_observed(state, schedule, substep, |t, amps| {
        trace.record(t, amps.iter().map(|a| a.norm_sqr()).collect());
    })?;
    Ok(trace)
}

/// Standard deviation of a shot-sampled energy estimate:
/// `sqrt(Σ_j c_j² (1 − ⟨P_j⟩²) / shots)`, one measurement setting per term.
pub fn shot_standard_deviation<T: Real>(
    h: &SpinHamiltonian<T>,
    term_expectations: &[T],
    shots: usize,
) -> T {
    let var: T = h
        .terms()
        .iter()
        .zip(term_expectations)
        .filter(|(t, _)| !t.string.is_identity())
        .map(|(t, &e)| t.coeff * t.coeff * (T::one() - e * e).max(T::zero()))
        .sum();
    (var / T::from_usize_lossy(shots.max(1))).sqrt()
}

/// Energy estimate from `shots` ±1 outcomes per term; leaked population
/// (where `|⟨P⟩|` may fall below one) is read out as a fair coin.
pub fn sample_energy<T: Real, R: Rng + ?Sized>(
    h: &SpinHamiltonian<T>,
    term_expectations: &[T],
    shots: usize,
    rng: &mut R,
) -> T {
    let mut total = T::zero();
    for (t, &e) in h.terms().iter().zip(term_expectations) {
        if t.string.is_identity() {
            total += t.coeff;
            continue;
        }
        let p_plus = ((T::one() + e) * T::lit(0.5)).max(T::zero()).min(T::one());
        let binom = Binomial::new(shots as u64, p_plus.to_f64_lossy()).expect("valid probability");
        let k = binom.sample(rng) as f64;
        let mean = (2.0 * k - shots as f64) / shots as f64;
        total += t.coeff * T::lit(mean);
    }
    total
}

/// Alignment of integration substeps with segment boundaries.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Substep<T> {
    pub segment: usize,
    pub start: T,
    pub width: T,
}

pub(crate) fn step_plan<T: Real>(
    duration: T,
    n_segments: usize,
    substep: T,
) -> Result<Vec<Substep<T>>> {
    if !(substep > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "substep must be positive, got {substep}"
        )));
    }
    if duration <= T::zero() || n_segments == 0 {
        return Ok(Vec::new());
    }
    let seg = duration / T::from_usize_lossy(n_segments);
    let per = (seg / substep - T::lit(1e-9))
        .ceil()
        .to_usize()
        .unwrap_or(1)
        .max(1);
    let h = seg / T::from_usize_lossy(per);
    let mut plan = Vec::with_capacity(n_segments * per);
    for k in 0..n_segments {
        let t0 = seg * T::from_usize_lossy(k);
        for j in 0..per {
            plan.push(Substep {
                segment: k,
                start: t0 + h * T::from_usize_lossy(j),
                width: h,
            });
        }
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{PauliString, SchwingerParams};
    use rand::SeedableRng;

    fn device(levels: usize) -> DeviceSpec<f64> {
        DeviceSpec::preset("falcon4q_nn")
            .unwrap()
            .truncated(2)
            .unwrap()
            .with_levels(levels)
    }

    #[test]
    fn step_plan_aligns_to_segments() {
        let plan = step_plan(53.0f64, 100, 0.1).unwrap();
        assert_eq!(plan.len(), 600);
        assert!((plan[6].start - 0.53).abs() < 1e-12);
        assert_eq!(plan[6].segment, 1);
        assert!(step_plan(0.0, 10, 0.1).unwrap().is_empty());
        assert!(step_plan(1.0, 10, 0.0).is_err());
    }

    #[test]
    fn leakage_of_product_states() {
        let d = device(3);
        let s = QuantumState::from_levels(&d, &[2, 0]).unwrap();
        let l = leakage(&s, &d);
        assert_eq!(l.per_qubit, vec![1.0, 0.0]);
        assert_eq!(l.total, 1.0);
        let d2 = device(2);
        let l2 = leakage(&QuantumState::basis(4, 3), &d2);
        assert!(l2.two_level && l2.total == 0.0);
    }

    #[test]
    fn embedding_matches_pauli_matrix_at_two_levels() {
        let d = DeviceSpec::<f64>::preset("falcon4q_nn")
            .unwrap()
            .truncated(3)
            .unwrap()
            .with_levels(2);
        let h = crate::spin::build_schwinger(&SchwingerParams::reference(3)).unwrap();
        let psi: Vec<Complex<f64>> = (0..8)
            .map(|k| Complex::new((k as f64).sin(), 0.3 * k as f64))
            .collect();
        let dense = crate::spin::pauli_matrix(&h).unwrap();
        let obs = EmbeddedObservable::new(&h, &d).unwrap();
        assert!((obs.expectation(&psi) - dense.expectation(&psi)).abs() < 1e-12);
        assert!((&obs.matrix() - &dense).frobenius_norm() < 1e-12);
        let rho = CMatrix::outer(&psi, &psi);
        assert!((obs.expectation_rho(&rho) - obs.expectation(&psi)).abs() < 1e-12);
    }

    #[test]
    fn single_z_on_basis_state() {
        let d = DeviceSpec::<f64>::preset("falcon4q_nn")
            .unwrap()
            .truncated(3)
            .unwrap()
            .with_levels(4);
        let mut h = SpinHamiltonian::new(3);
        h.add_term(1.0, "IZI".parse::<PauliString>().unwrap())
            .unwrap();
        let s = QuantumState::from_bitstring(&d, &"010".parse().unwrap()).unwrap();
        assert_eq!(measure_energy(&s, &h, &d).unwrap(), -1.0);
        let rot = s.clone().into_frame(&d, 1.0, Frame::Rotating).unwrap();
        assert!(matches!(measure_energy(&rot, &h, &d), Err(Error::Frame(_))));
        // leaked population is annihilated by the embedding
        let leaked = QuantumState::from_levels(&d, &[2, 1, 0]).unwrap();
        assert_eq!(measure_energy(&leaked, &h, &d).unwrap(), 0.0);
    }

    #[test]
    fn shot_statistics() {
        let mut h = SpinHamiltonian::new(1);
        h.add_term(2.0, "Z".parse().unwrap()).unwrap();
        assert_eq!(shot_standard_deviation(&h, &[1.0], 8192), 0.0);
        let sd = shot_standard_deviation(&h, &[0.0], 8192);
        assert!((sd - 2.0 / 8192f64.sqrt()).abs() < 1e-15);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<f64> = (0..400)
            .map(|_| sample_energy(&h, &[0.0], 8192, &mut rng))
            .collect();
        let (m, s) = crate::num::mean_std(&samples);
        assert!(m.abs() < 4.0 * sd / 20.0 + 1e-12);
        assert!((s / sd - 1.0).abs() < 0.15);
    }

    #[test]
    fn density_matrix_checks() {
        let psi = QuantumState::<f64>::basis(4, 1);
        let rho = DensityMatrix::from_state(&psi);
        rho.validate(1e-12).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-15);
        let mut bad = rho.clone();
        bad.matrix[(0, 1)] = Complex::new(0.3, 0.0);
        assert!(bad.validate(1e-9).is_err());
    }

    #[test]
    fn trace_utilities() {
        let reg = Register::new(2, 3);
        let mut tr = ProbabilityTrace::<f64>::new(&reg);
        assert_eq!(tr.labels[5], "12");
        let mut p0 = vec![0.0; 9];
        p0[1] = 1.0;
        tr.record(0.0, p0);
        let mut p1 = vec![0.0; 9];
        p1[1] = 0.6;
        p1[6] = 0.4;
        tr.record(1.0, p1);
        assert_eq!(
            tr.significant(0.1),
            vec!["01".to_string(), "20".to_string()]
        );
        assert_eq!(tr.peak_in_window("20", 0.5, 2.0), Some((1.0, 0.4)));
        assert_eq!(tr.rows(0.5).len(), 2);
    }
}
