//! Open-system propagation: fixed-step RK4 on the density matrix, in the
//! rotating frame, with the discrete adjoint of the same scheme.
//!
//! The master equation uses the factor-of-two convention
//! `dρ/dt = −i[H, ρ] + Σ (2 L ρ L† − {L†L, ρ})` with `L₁ = √Γ₁ a` and
//! `L₂ = √Γ₂ a†a` per qudit, so an isolated excitation decays as `e^{−2Γ₁t}`.

use num_complex::Complex;

use super::unitary::Generator;
use super::{step_plan, DensityMatrix, EmbeddedObservable};
use crate::device::{rotating_frame_transform, DeviceSpec, Entry, Frame, FrameDirection};
use crate::linalg::CMatrix;
use crate::num::{cis, Real};
use crate::schedule::PulseSchedule;
use crate::{Error, Result};

type C<T> = Complex<T>;

#[derive(Clone, Debug)]
pub struct LindbladPropagator<T> {
    spec: DeviceSpec<T>,
    gen: Generator<T>,
    /// `(a_q entries, Γ₁_q)`.
    damping: Vec<(Vec<Entry<T>>, T)>,
    /// Elementwise factor of every diagonal dissipator contribution.
    decay: Vec<T>,
}

impl<T: Real> LindbladPropagator<T> {
    pub fn new(spec: &DeviceSpec<T>) -> Result<Self> {
        spec.validate()?;
        let rates = spec.collapse.as_ref().ok_or_else(|| {
            Error::InvalidParameter(format!("device `{}` has no collapse rates", spec.name))
        })?;
        let reg = spec.register();
        let dim = reg.dim();
        let numbers: Vec<Vec<T>> = (0..spec.n_qubits).map(|q| reg.number(q)).collect();
        let k: Vec<T> = (0..dim)
            .map(|i| {
                rates
                    .iter()
                    .zip(&numbers)
                    .map(|(r, n)| r.gamma1 * n[i] + r.gamma2 * n[i] * n[i])
                    .sum()
            })
            .collect();
        let two = T::lit(2.0);
        let mut decay = vec![T::zero(); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let deph: T = rates
                    .iter()
                    .zip(&numbers)
                    .map(|(r, n)| r.gamma2 * n[i] * n[j])
                    .sum();
                decay[i * dim + j] = two * deph - k[i] - k[j];
            }
        }
        Ok(Self {
            spec: spec.clone(),
            gen: Generator::new(spec),
            damping: rates
                .iter()
                .enumerate()
                .filter(|(_, r)| r.gamma1 > T::zero())
                .map(|(q, r)| (reg.lowering(q), r.gamma1))
                .collect(),
            decay,
        })
    }

    pub fn spec(&self) -> &DeviceSpec<T> {
        &self.spec
    }

    /// `out = H x` for the rotating-frame `H` and dense `x`.
    fn h_times(&self, coefs: &[C<T>], x: &CMatrix<T>, out: &mut CMatrix<T>) {
        let n = self.gen.dim;
        let diag = self.gen.diag(Frame::Rotating);
        for r in 0..n {
            for c in 0..n {
                out[(r, c)] = x[(r, c)] * diag[r];
            }
        }
        for (j, &z) in coefs.iter().enumerate() {
            if z == C::default() {
                continue;
            }
            let entries = if j < self.gen.drives.len() {
                &self.gen.drives[j]
            } else {
                &self.gen.couplings[j - self.gen.drives.len()].0
            };
            let zc = z.conj();
            for &(r, c, v) in entries {
                let (zv, zcv) = (z * v, zc * v);
                for col in 0..n {
                    let xc = x[(c, col)];
                    let xr = x[(r, col)];
                    out[(r, col)] += zv * xc;
                    out[(c, col)] += zcv * xr;
                }
            }
        }
    }

    /// `out = −i[H, x] + D(x)`, or its adjoint `i[H, x] + D*(x)`.
    /// `x` must be Hermitian.
    fn generator(
        &self,
        coefs: &[C<T>],
        x: &CMatrix<T>,
        adjoint: bool,
        scratch: &mut CMatrix<T>,
        out: &mut CMatrix<T>,
    ) {
        let n = self.gen.dim;
        self.h_times(coefs, x, scratch);
        let sign = if adjoint { T::one() } else { -T::one() };
        let two = T::lit(2.0);
        for r in 0..n {
            for c in 0..n {
                let comm = scratch[(r, c)] - scratch[(c, r)].conj();
                out[(r, c)] = C::new(-comm.im, comm.re) * sign + x[(r, c)] * self.decay[r * n + c];
            }
        }
        for (entries, g1) in &self.damping {
            let w = two * *g1;
            for &(r1, c1, v1) in entries {
                for &(r2, c2, v2) in entries {
                    let f = w * v1 * v2;
                    if adjoint {
                        out[(c1, c2)] += x[(r1, r2)] * f;
                    } else {
                        out[(r1, r2)] += x[(c1, c2)] * f;
                    }
                }
            }
        }
    }

    fn check(&self, rho: &DensityMatrix<T>, schedule: &PulseSchedule<T>) -> Result<()> {
        schedule.validate(&self.spec)?;
        if rho.dim() != self.gen.dim {
            return Err(Error::Dimension(format!(
                "density matrix dimension {} != device dimension {}",
                rho.dim(),
                self.gen.dim
            )));
        }
        if rho.frame != Frame::Lab {
            return Err(Error::Frame(
                "initial density matrices are given in the lab frame".into(),
            ));
        }
        if !rho.matrix.is_hermitian(T::lit(1e-10)) {
            return Err(Error::InvalidParameter(
                "initial density matrix is not Hermitian".into(),
            ));
        }
        Ok(())
    }

    fn rk4_step(
        &self,
        schedule: &PulseSchedule<T>,
        segment: usize,
        t0: T,
        h: T,
        rho: &mut CMatrix<T>,
        ws: &mut Rk4Workspace<T>,
    ) {
        let half = h * T::lit(0.5);
        let times = [t0, t0 + half, t0 + half, t0 + h];
        let offsets = [T::zero(), half, half, h];
        let weights = [
            h / T::lit(6.0),
            h / T::lit(3.0),
            h / T::lit(3.0),
            h / T::lit(6.0),
        ];
        ws.acc.as_mut_slice().copy_from_slice(rho.as_slice());
        for s in 0..4 {
            if s == 0 {
                ws.stage.as_mut_slice().copy_from_slice(rho.as_slice());
            } else {
                for ((st, &r), &k) in ws
                    .stage
                    .as_mut_slice()
                    .iter_mut()
                    .zip(rho.as_slice())
                    .zip(ws.k.as_slice())
                {
                    *st = r + k * offsets[s];
                }
            }
            self.gen.coefficients(
                &self.spec,
                schedule,
                segment,
                times[s],
                Frame::Rotating,
                &mut ws.coefs,
            );
            self.generator(&ws.coefs, &ws.stage, false, &mut ws.scratch, &mut ws.k);
            ws.acc.axpy(C::from(weights[s]), &ws.k);
        }
        rho.as_mut_slice().copy_from_slice(ws.acc.as_slice());
    }

    fn integrate(
        &self,
        rho: &DensityMatrix<T>,
        schedule: &PulseSchedule<T>,
        substep: T,
        mut observer: impl FnMut(T, &CMatrix<T>),
    ) -> Result<CMatrix<T>> {
        self.check(rho, schedule)?;
        let plan = step_plan(schedule.duration, schedule.n_segments(), substep)?;
        let mut m = rho.matrix.clone();
        let mut ws = Rk4Workspace::new(self.gen.dim);
        observer(T::zero(), &m);
        for sub in &plan {
            self.rk4_step(schedule, sub.segment, sub.start, sub.width, &mut m, &mut ws);
            observer(sub.start + sub.width, &m);
        }
        Ok(m)
    }

    /// Final lab-frame density matrix.
    pub fn propagate(
        &self,
        rho: &DensityMatrix<T>,
        schedule: &PulseSchedule<T>,
        substep: T,
    ) -> Result<DensityMatrix<T>> {
        let m = self.integrate(rho, schedule, substep, |_, _| {})?;
        let lab =
            rotating_frame_transform(&self.spec, m, schedule.duration, FrameDirection::ToLab)?;
        Ok(DensityMatrix {
            matrix: lab,
            frame: Frame::Lab,
        })
    }

    /// Reports the rotating-frame `ρ(t)` at `t = 0` and after every substep.
    pub fn propagate_observed(
        &self,
        rho: &DensityMatrix<T>,
        schedule: &PulseSchedule<T>,
        substep: T,
        observer: impl FnMut(T, &CMatrix<T>),
    ) -> Result<DensityMatrix<T>> {
        let m = self.integrate(rho, schedule, substep, observer)?;
        let lab =
            rotating_frame_transform(&self.spec, m, schedule.duration, FrameDirection::ToLab)?;
        Ok(DensityMatrix {
            matrix: lab,
            frame: Frame::Lab,
        })
    }

    pub fn energy(
        &self,
        rho: &DensityMatrix<T>,
        schedule: &PulseSchedule<T>,
        observable: &EmbeddedObservable<T>,
        substep: T,
    ) -> Result<T> {
        Ok(observable.expectation_rho(&self.propagate(rho, schedule, substep)?.matrix))
    }

    /// `Tr(O ρ_T)` and its gradient through the discrete RK4 adjoint.
    pub fn energy_gradient(
        &self,
        rho: &DensityMatrix<T>,
        schedule: &PulseSchedule<T>,
        observable: &EmbeddedObservable<T>,
        substep: T,
    ) -> Result<(T, PulseSchedule<T>)> {
        self.check(rho, schedule)?;
        let plan = step_plan(schedule.duration, schedule.n_segments(), substep)?;
        let n = self.gen.dim;
        let nq = self.spec.n_qubits;
        let ns = schedule.n_segments();
        let mut ws = Rk4Workspace::new(n);

        let mut history = Vec::with_capacity(plan.len());
        let mut m = rho.matrix.clone();
        for sub in &plan {
            history.push(m.clone());
            self.rk4_step(schedule, sub.segment, sub.start, sub.width, &mut m, &mut ws);
        }
        let lab =
            rotating_frame_transform(&self.spec, m, schedule.duration, FrameDirection::ToLab)?;
        let energy = observable.expectation_rho(&lab);
        let mut lambda = rotating_frame_transform(
            &self.spec,
            observable.matrix(),
            schedule.duration,
            FrameDirection::ToRotating,
        )?;

        let mut grad = PulseSchedule::zeros(nq, ns, schedule.duration);
        let mut dphase = vec![vec![T::zero(); ns]; nq];
        let mut stages: [CMatrix<T>; 4] = std::array::from_fn(|_| CMatrix::zeros(n, n));
        let mut ks: [CMatrix<T>; 4] = std::array::from_fn(|_| CMatrix::zeros(n, n));
        let mut bar = CMatrix::zeros(n, n);
        let mut gk = CMatrix::zeros(n, n);
        let mut coefs: [Vec<C<T>>; 4] = Default::default();
        let i = C::new(T::zero(), T::one());

        for (sub, rho0) in plan.iter().zip(&history).rev() {
            let h = sub.width;
            let half = h * T::lit(0.5);
            let times = [sub.start, sub.start + half, sub.start + half, sub.start + h];
            let offsets = [T::zero(), half, half, h];
            for s in 0..4 {
                if s == 0 {
                    stages[0] = rho0.clone();
                } else {
                    for ((st, &r), &k) in stages[s]
                        .as_mut_slice()
                        .iter_mut()
                        .zip(rho0.as_slice())
                        .zip(ks[s - 1].as_slice())
                    {
                        *st = r + k * offsets[s];
                    }
                }
                self.gen.coefficients(
                    &self.spec,
                    schedule,
                    sub.segment,
                    times[s],
                    Frame::Rotating,
                    &mut coefs[s],
                );
                self.generator(&coefs[s], &stages[s], false, &mut ws.scratch, &mut ks[s]);
            }

            let direct = [
                h / T::lit(6.0),
                h / T::lit(3.0),
                h / T::lit(3.0),
                h / T::lit(6.0),
            ];
            let mut next_lambda = lambda.clone();
            let mut carry: Option<CMatrix<T>> = None;
            for s in (0..4).rev() {
                // cotangent of k_s
                for (g, &l) in gk.as_mut_slice().iter_mut().zip(lambda.as_slice()) {
                    *g = l * direct[s];
                }
                if let Some(rb) = &carry {
                    gk.axpy(C::from(offsets[s + 1]), rb);
                }
                self.generator(&coefs[s], &gk, true, &mut ws.scratch, &mut bar);
                next_lambda.axpy(C::from(T::one()), &bar);
                self.accumulate_parameter_terms(
                    schedule,
                    sub.segment,
                    times[s],
                    &stages[s],
                    &gk,
                    &mut grad,
                    &mut dphase,
                    i,
                );
                carry = Some(bar.clone());
            }
            lambda = next_lambda;
        }
        grad.phases = Some(dphase);
        Ok((energy, grad))
    }

    #[allow(clippy::too_many_arguments)]
    fn accumulate_parameter_terms(
        &self,
        schedule: &PulseSchedule<T>,
        k: usize,
        t: T,
        r: &CMatrix<T>,
        g: &CMatrix<T>,
        grad: &mut PulseSchedule<T>,
        dphase: &mut [Vec<T>],
        i: C<T>,
    ) {
        let n = self.gen.dim;
        // C = [r, g] evaluated only where the drive operators have support
        let comm = |x: usize, y: usize| {
            let mut acc = C::<T>::default();
            for j in 0..n {
                acc += r[(x, j)] * g[(j, y)] - g[(x, j)] * r[(j, y)];
            }
            acc
        };
        for (q, entries) in self.gen.drives.iter().enumerate() {
            let (mut alpha, mut beta) = (C::<T>::default(), C::<T>::default());
            for &(row, col, v) in entries {
                alpha += comm(col, row) * v;
                beta += comm(row, col) * v;
            }
            let amp = schedule.amplitudes[q][k];
            let e = cis(schedule.phase(q, k) - schedule.detunings[q] * t);
            let contrib = |dz: C<T>| (-i * (dz * alpha + dz.conj() * beta)).re;
            grad.amplitudes[q][k] += contrib(e);
            grad.detunings[q] += contrib(-i * e * (t * amp));
            dphase[q][k] += contrib(i * e * amp);
        }
    }
}

struct Rk4Workspace<T> {
    coefs: Vec<C<T>>,
    stage: CMatrix<T>,
    k: CMatrix<T>,
    acc: CMatrix<T>,
    scratch: CMatrix<T>,
}

impl<T: Real> Rk4Workspace<T> {
    fn new(n: usize) -> Self {
        Self {
            coefs: Vec::new(),
            stage: CMatrix::zeros(n, n),
            k: CMatrix::zeros(n, n),
            acc: CMatrix::zeros(n, n),
            scratch: CMatrix::zeros(n, n),
        }
    }
}

/// One-shot Lindblad propagation returning the lab-frame density matrix.
pub fn propagate_lindblad<T: Real>(
    rho: &DensityMatrix<T>,
    schedule: &PulseSchedule<T>,
    spec: &DeviceSpec<T>,
    substep: T,
) -> Result<DensityMatrix<T>> {
    LindbladPropagator::new(spec)?.propagate(rho, schedule, substep)
}
