//! Closed-system propagation with midpoint exponential substeps and the
//! matching discrete adjoint.
//!
//! Each substep applies `exp(−i h H(t_mid))`, evaluated by a Taylor series
//! whose order is chosen from a parameter-independent norm bound so the
//! truncation error stays below machine precision. The diagonal is shifted to
//! its centre before expanding and the removed global phase is restored.

use num_complex::Complex;

use super::{step_plan, EmbeddedObservable, QuantumState, Substep};
use crate::device::{
    bare_energies, rotating_frame_transform, DeviceSpec, Entry, Frame, FrameDirection,
};
use crate::num::{cis, Real};
use crate::schedule::PulseSchedule;
use crate::{Error, Result};

type C<T> = Complex<T>;

/// `H = diag + Σ_terms (z A + z̄ A†)`, with one term per drive and per coupling.
#[derive(Clone, Debug)]
pub(crate) struct Generator<T> {
    pub dim: usize,
    pub diag_rotating: Vec<T>,
    pub diag_lab: Vec<T>,
    /// Lowering operator entries, one list per qudit.
    pub drives: Vec<Vec<Entry<T>>>,
    /// `(a†_i a_j entries, g, ω_i − ω_j)`.
    pub couplings: Vec<(Vec<Entry<T>>, T, T)>,
    off_diagonal_bound: T,
}

impl<T: Real> Generator<T> {
    pub fn new(spec: &DeviceSpec<T>) -> Self {
        let reg = spec.register();
        let half = T::lit(0.5);
        let diag_rotating = (0..reg.dim())
            .map(|k| {
                (0..spec.n_qubits)
                    .map(|q| {
                        let n = T::from_usize_lossy(reg.level(k, q));
                        -half * spec.delta[q] * n * (n - T::one())
                    })
                    .sum()
            })
            .collect();
        let dm1 = T::from_usize_lossy(spec.levels - 1);
        let two = T::lit(2.0);
        let off_diagonal_bound =
            T::from_usize_lossy(spec.n_qubits) * two * spec.amp_bound * dm1.sqrt()
                + spec
                    .couplings
                    .iter()
                    .map(|c| two * c.g.abs() * dm1)
                    .sum::<T>();
        Self {
            dim: reg.dim(),
            diag_rotating,
            diag_lab: bare_energies(spec),
            drives: (0..spec.n_qubits).map(|q| reg.lowering(q)).collect(),
            couplings: spec
                .couplings
                .iter()
                .map(|c| (reg.hop(c.i, c.j), c.g, spec.omega[c.i] - spec.omega[c.j]))
                .collect(),
            off_diagonal_bound,
        }
    }

    pub fn diag(&self, frame: Frame) -> &[T] {
        match frame {
            Frame::Rotating => &self.diag_rotating,
            Frame::Lab => &self.diag_lab,
        }
    }

    /// Centre and half-width of the diagonal.
    pub fn diag_span(&self, frame: Frame) -> (T, T) {
        let d = self.diag(frame);
        let lo = d.iter().copied().fold(T::infinity(), T::min);
        let hi = d.iter().copied().fold(T::neg_infinity(), T::max);
        ((lo + hi) * T::lit(0.5), (hi - lo) * T::lit(0.5))
    }

    fn term(&self, j: usize) -> &[Entry<T>] {
        if j < self.drives.len() {
            &self.drives[j]
        } else {
            &self.couplings[j - self.drives.len()].0
        }
    }

    /// Drive coefficient `z_q` for qudit `q` in segment `k` at time `t`.
    pub fn drive_coefficient(
        &self,
        spec: &DeviceSpec<T>,
        schedule: &PulseSchedule<T>,
        q: usize,
        k: usize,
        t: T,
        frame: Frame,
    ) -> C<T> {
        let amp = schedule.amplitudes[q][k];
        let phi = schedule.phase(q, k);
        let angle = match frame {
            Frame::Rotating => phi - schedule.detunings[q] * t,
            Frame::Lab => schedule.drive_frequency(q, spec) * t + phi,
        };
        cis(angle) * amp
    }

    pub fn coefficients(
        &self,
        spec: &DeviceSpec<T>,
        schedule: &PulseSchedule<T>,
        k: usize,
        t: T,
        frame: Frame,
        out: &mut Vec<C<T>>,
    ) {
        out.clear();
        for q in 0..self.drives.len() {
            out.push(self.drive_coefficient(spec, schedule, q, k, t, frame));
        }
        for &(_, g, dw) in &self.couplings {
            out.push(match frame {
                Frame::Rotating => cis(dw * t) * g,
                Frame::Lab => C::from(g),
            });
        }
    }

    /// `out = (H − shift) x`.
    pub fn apply(&self, diag: &[T], shift: T, coefs: &[C<T>], x: &[C<T>], out: &mut [C<T>]) {
        for ((o, &d), &xi) in out.iter_mut().zip(diag).zip(x) {
            *o = xi * (d - shift);
        }
        for (j, &z) in coefs.iter().enumerate() {
            if z == C::default() {
                continue;
            }
            let zc = z.conj();
            for &(r, c, v) in self.term(j) {
                out[r] += z * x[c] * v;
                out[c] += zc * x[r] * v;
            }
        }
    }

    /// Taylor order for steps of width `h`, valid for every admissible schedule.
    pub fn taylor_order(&self, h: T, frame: Frame) -> Result<usize> {
        let x = h * (self.diag_span(frame).1 + self.off_diagonal_bound);
        if x > T::lit(8.0) {
            return Err(Error::InvalidParameter(format!(
                "substep {h} ns is too coarse for this device (norm bound {x}); reduce it"
            )));
        }
        let eps = T::epsilon() * T::lit(0.25);
        let mut term = T::one();
        let mut m = 0usize;
        loop {
            m += 1;
            term = term * x / T::from_usize_lossy(m);
            if term < eps || m >= 80 {
                return Ok((m - 1).max(1));
            }
        }
    }
}

struct Workspace<T> {
    coefs: Vec<C<T>>,
    term: Vec<C<T>>,
    next: Vec<C<T>>,
}

impl<T: Real> Workspace<T> {
    fn new(dim: usize) -> Self {
        Self {
            coefs: Vec::new(),
            term: vec![C::default(); dim],
            next: vec![C::default(); dim],
        }
    }
}

/// Reusable propagator bound to one device.
#[derive(Clone, Debug)]
pub struct Propagator<T> {
    spec: DeviceSpec<T>,
    gen: Generator<T>,
}

impl<T: Real> Propagator<T> {
    pub fn new(spec: &DeviceSpec<T>) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec: spec.clone(),
            gen: Generator::new(spec),
        })
    }

    pub fn spec(&self) -> &DeviceSpec<T> {
        &self.spec
    }

    fn check(&self, state: &QuantumState<T>, schedule: &PulseSchedule<T>) -> Result<()> {
        schedule.validate(&self.spec)?;
        if state.dim() != self.gen.dim {
            return Err(Error::Dimension(format!(
                "state dimension {} != device dimension {}",
                state.dim(),
                self.gen.dim
            )));
        }
        if state.frame != Frame::Lab {
            return Err(Error::Frame(
                "initial states are given in the lab frame".into(),
            ));
        }
        Ok(())
    }

    fn step(
        &self,
        frame: Frame,
        schedule: &PulseSchedule<T>,
        sub: &Substep<T>,
        order: usize,
        psi: &mut [C<T>],
        ws: &mut Workspace<T>,
    ) {
        let t_mid = sub.start + sub.width * T::lit(0.5);
        self.gen.coefficients(
            &self.spec,
            schedule,
            sub.segment,
            t_mid,
            frame,
            &mut ws.coefs,
        );
        let (center, _) = self.gen.diag_span(frame);
        let s = C::new(T::zero(), -sub.width);
        ws.term.copy_from_slice(psi);
        for m in 1..=order {
            self.gen.apply(
                self.gen.diag(frame),
                center,
                &ws.coefs,
                &ws.term,
                &mut ws.next,
            );
            let f = s / T::from_usize_lossy(m);
            for (p, n) in psi.iter_mut().zip(ws.next.iter_mut()) {
                *n *= f;
                *p += *n;
            }
            std::mem::swap(&mut ws.term, &mut ws.next);
        }
        let phase = cis(-center * sub.width);
        psi.iter_mut().for_each(|p| *p *= phase);
    }

    fn integrate(
        &self,
        state: &QuantumState<T>,
        schedule: &PulseSchedule<T>,
        substep: T,
        frame: Frame,
        mut observer: impl FnMut(T, &[C<T>]),
    ) -> Result<Vec<C<T>>> {
        self.check(state, schedule)?;
        let plan = step_plan(schedule.duration, schedule.n_segments(), substep)?;
        let mut psi = state.amplitudes.clone();
        observer(T::zero(), &psi);
        if let Some(first) = plan.first() {
            let order = self.gen.taylor_order(first.width, frame)?;
            let mut ws = Workspace::new(self.gen.dim);
            for sub in &plan {
                self.step(frame, schedule, sub, order, &mut psi, &mut ws);
                observer(sub.start + sub.width, &psi);
            }
        }
        Ok(psi)
    }

    /// Integrates in the rotating frame and returns the lab-frame final state.
    pub fn propagate(
        &self,
        state: &QuantumState<T>,
        schedule: &PulseSchedule<T>,
        substep: T,
    ) -> Result<QuantumState<T>> {
        let psi = self.integrate(state, schedule, substep, Frame::Rotating, |_, _| {})?;
        let lab =
            rotating_frame_transform(&self.spec, psi, schedule.duration, FrameDirection::ToLab)?;
        Ok(QuantumState::new(lab, Frame::Lab))
    }

    /// Integrates the full lab-frame Hamiltonian, carrier included.
    pub fn propagate_lab(
        &self,
        state: &QuantumState<T>,
        schedule: &PulseSchedule<T>,
        substep: T,
    ) -> Result<QuantumState<T>> {
        let psi = self.integrate(state, schedule, substep, Frame::Lab, |_, _| {})?;
        Ok(QuantumState::new(psi, Frame::Lab))
    }

    /// Rotating-frame integration reporting `(t, amplitudes)` at `t = 0` and
    /// after every substep. Amplitudes are rotating-frame; populations agree
    /// with the lab frame.
    pub fn propagate_observed(
        &self,
        state: &QuantumState<T>,
        schedule: &PulseSchedule<T>,
        substep: T,
        observer: impl FnMut(T, &[C<T>]),
    ) -> Result<QuantumState<T>> {
        let psi = self.integrate(state, schedule, substep, Frame::Rotating, observer)?;
        let lab =
            rotating_frame_transform(&self.spec, psi, schedule.duration, FrameDirection::ToLab)?;
        Ok(QuantumState::new(lab, Frame::Lab))
    }

    /// Final embedded energy `⟨ψ_T|O|ψ_T⟩`.
    pub fn energy(
        &self,
        state: &QuantumState<T>,
        schedule: &PulseSchedule<T>,
        observable: &EmbeddedObservable<T>,
        substep: T,
    ) -> Result<T> {
        let out = self.propagate(state, schedule, substep)?;
        Ok(observable.expectation(&out.amplitudes))
    }

    /// Energy and its exact gradient with respect to every amplitude,
    /// detuning and segment phase, returned in a schedule-shaped container.
    pub fn energy_gradient(
        &self,
        state: &QuantumState<T>,
        schedule: &PulseSchedule<T>,
        observable: &EmbeddedObservable<T>,
        substep: T,
    ) -> Result<(T, PulseSchedule<T>)> {
        self.check(state, schedule)?;
        let frame = Frame::Rotating;
        let plan = step_plan(schedule.duration, schedule.n_segments(), substep)?;
        let dim = self.gen.dim;
        let nq = self.spec.n_qubits;
        let ns = schedule.n_segments();

        let mut grad = PulseSchedule::zeros(nq, ns, schedule.duration);
        grad.phases = Some(vec![vec![T::zero(); ns]; nq]);

        let mut ws = Workspace::new(dim);
        let order = match plan.first() {
            Some(s) => self.gen.taylor_order(s.width, frame)?,
            None => 1,
        };
        let mut history = Vec::with_capacity(plan.len());
        let mut psi = state.amplitudes.clone();
        for sub in &plan {
            history.push(psi.clone());
            self.step(frame, schedule, sub, order, &mut psi, &mut ws);
        }
        let psi_lab =
            rotating_frame_transform(&self.spec, psi, schedule.duration, FrameDirection::ToLab)?;
        let energy = observable.expectation(&psi_lab);
        let mut lambda = rotating_frame_transform(
            &self.spec,
            observable.apply(&psi_lab),
            schedule.duration,
            FrameDirection::ToRotating,
        )?;

        let weights = adjoint_weights::<T>(order);
        let (center, _) = self.gen.diag_span(frame);
        let diag = self.gen.diag(frame);
        let mut nu = vec![vec![C::default(); dim]; order + 1];
        let mut mu = vec![vec![C::default(); dim]; order + 1];
        let mut w: Vec<C<T>> = vec![C::default(); dim];
        let mut acc_a = vec![C::<T>::default(); nq];
        let mut acc_b = vec![C::<T>::default(); nq];
        let two = T::lit(2.0);

        for (sub, psi0) in plan.iter().zip(&history).rev() {
            let t = sub.start + sub.width * T::lit(0.5);
            self.gen
                .coefficients(&self.spec, schedule, sub.segment, t, frame, &mut ws.coefs);
            let s = C::new(T::zero(), -sub.width);
            nu[0].copy_from_slice(psi0);
            mu[0].copy_from_slice(&lambda);
            for m in 1..=order {
                let (done, rest) = nu.split_at_mut(m);
                self.gen
                    .apply(diag, center, &ws.coefs, &done[m - 1], &mut rest[0]);
                let f = s / T::from_usize_lossy(m);
                rest[0].iter_mut().for_each(|x| *x *= f);
                let (done, rest) = mu.split_at_mut(m);
                self.gen
                    .apply(diag, center, &ws.coefs, &done[m - 1], &mut rest[0]);
                let f = s.conj() / T::from_usize_lossy(m);
                rest[0].iter_mut().for_each(|x| *x *= f);
            }

            acc_a.iter_mut().for_each(|x| *x = C::default());
            acc_b.iter_mut().for_each(|x| *x = C::default());
            for b in 0..order {
                w.iter_mut().for_each(|x| *x = C::default());
                for (a, mu_a) in mu.iter().enumerate().take(order - b) {
                    let c = weights[a][b];
                    for (wi, &m) in w.iter_mut().zip(mu_a) {
                        *wi += m * c;
                    }
                }
                for (q, entries) in self.gen.drives.iter().enumerate() {
                    let (mut sa, mut sb) = (C::<T>::default(), C::<T>::default());
                    for &(r, c, v) in entries {
                        sa += w[r].conj() * nu[b][c] * v;
                        sb += w[c].conj() * nu[b][r] * v;
                    }
                    acc_a[q] += sa;
                    acc_b[q] += sb;
                }
            }

            let pref = s * cis(-center * sub.width);
            let k = sub.segment;
            for q in 0..nq {
                let x = pref * acc_a[q];
                let y = pref * acc_b[q];
                let e = cis(schedule.phase(q, k) - schedule.detunings[q] * t);
                let amp = schedule.amplitudes[q][k];
                let i = C::new(T::zero(), T::one());
                grad.amplitudes[q][k] += two * (e * x + e.conj() * y).re;
                grad.detunings[q] +=
                    two * (-(i * e * x) * (t * amp) + (i * e.conj() * y) * (t * amp)).re;
                grad.phases.as_mut().unwrap()[q][k] +=
                    two * ((i * e * x) * amp - (i * e.conj() * y) * amp).re;
            }

            let back = cis(center * sub.width);
            for (i, l) in lambda.iter_mut().enumerate() {
                *l = mu.iter().map(|m| m[i]).sum::<C<T>>() * back;
            }
        }
        Ok((energy, grad))
    }
}

/// `c[a][b] = a! b! / (a + b + 1)!` for `a + b + 1 ≤ order`.
fn adjoint_weights<T: Real>(order: usize) -> Vec<Vec<T>> {
    let mut c = vec![vec![T::zero(); order + 1]; order + 1];
    for (a, row) in c.iter_mut().enumerate() {
        for (b, slot) in row.iter_mut().enumerate() {
            if a + b < order {
                let mut binom = 1.0f64;
                for j in 0..a {
                    binom = binom * (a + b - j) as f64 / (j + 1) as f64;
                }
                *slot = T::lit(1.0 / ((a + b + 1) as f64 * binom));
            }
        }
    }
    c
}

/// One-shot rotating-frame propagation returning the lab-frame state.
pub fn propagate<T: Real>(
    state: &QuantumState<T>,
    schedule: &PulseSchedule<T>,
    spec: &DeviceSpec<T>,
    substep: T,
) -> Result<QuantumState<T>> {
    Propagator::new(spec)?.propagate(state, schedule, substep)
}

/// One-shot lab-frame propagation.
pub fn propagate_lab<T: Real>(
    state: &QuantumState<T>,
    schedule: &PulseSchedule<T>,
    spec: &DeviceSpec<T>,
    substep: T,
) -> Result<QuantumState<T>> {
    Propagator::new(spec)?.propagate_lab(state, schedule, substep)
}
