//! Piecewise-constant pulse schedules and their flat parameter packing.

use serde::{Deserialize, Serialize};

use crate::device::DeviceSpec;
use crate::num::Real;
use crate::optim::Bounds;
use crate::{Error, Result};

/// Per-qubit piecewise-constant drive amplitudes over `[0, T]`.
///
/// Segment `k` (0-based) covers `[k·T/n, (k+1)·T/n)`; `t = T` belongs to the
/// last segment. Amplitudes and detunings are angular (rad/ns).
#[derive(Clone, Debug, PartialEq)]
pub struct PulseSchedule<T> {
    pub duration: T,
    /// `amplitudes[q][k]`.
    pub amplitudes: Vec<Vec<T>>,
    /// `Δν_q = ω_q − v_q`, one per qubit.
    pub detunings: Vec<T>,
    /// Optional per-segment drive phases `phases[q][k]` (radians).
    pub phases: Option<Vec<Vec<T>>>,
}

impl<T: Real> PulseSchedule<T> {
    pub fn zeros(n_qubits: usize, n_segments: usize, duration: T) -> Self {
        Self {
            duration,
            amplitudes: vec![vec![T::zero(); n_segments]; n_qubits],
            detunings: vec![T::zero(); n_qubits],
            phases: None,
        }
    }

    /// Every segment of every qubit at amplitude `omega`, resonant drive.
    pub fn constant(n_qubits: usize, n_segments: usize, duration: T, omega: T) -> Self {
        let mut s = Self::zeros(n_qubits, n_segments, duration);
        for row in &mut s.amplitudes {
            row.iter_mut().for_each(|a| *a = omega);
        }
        s
    }

    pub fn n_qubits(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn n_segments(&self) -> usize {
        self.amplitudes.first().map_or(0, Vec::len)
    }

    pub fn segment_width(&self) -> T {
        self.duration / T::from_usize_lossy(self.n_segments().max(1))
    }

    /// Segment containing `t`, half-open on the right except at `t = T`.
    pub fn segment_index(&self, t: T) -> Result<usize> {
        if !(t >= T::zero() && t <= self.duration) {
            return Err(Error::InvalidParameter(format!(
                "time {t} outside the schedule window [0, {}]",
                self.duration
            )));
        }
        let n = self.n_segments();
        if n == 0 {
            return Err(Error::InvalidParameter("schedule has no segments".into()));
        }
        let k = (t / self.segment_width())
            .floor()
            .to_usize()
            .unwrap_or(n - 1);
        Ok(k.min(n - 1))
    }

    pub fn amplitude(&self, qubit: usize, t: T) -> Result<T> {
        Ok(self.amplitudes[qubit][self.segment_index(t)?])
    }

    pub fn phase(&self, qubit: usize, segment: usize) -> T {
        self.phases
            .as_ref()
            .map_or(T::zero(), |p| p[qubit][segment])
    }

    /// Drive (carrier) frequency `v_q = ω_q − Δν_q`.
    pub fn drive_frequency(&self, qubit: usize, device: &DeviceSpec<T>) -> T {
        device.omega[qubit] - self.detunings[qubit]
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.n_segments();
        if self.amplitudes.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension("ragged amplitude table".into()));
        }
        if self.detunings.len() != self.n_qubits() {
            return Err(Error::Dimension(format!(
                "{} detunings for {} qubits",
                self.detunings.len(),
                self.n_qubits()
            )));
        }
        if let Some(ph) = &self.phases {
            if ph.len() != self.n_qubits() || ph.iter().any(|row| row.len() != n) {
                return Err(Error::Dimension(
                    "phase table shape differs from amplitudes".into(),
                ));
            }
        }
        Ok(())
    }

    /// Checks shape and the device's amplitude, detuning and resolution limits.
    pub fn validate(&self, device: &DeviceSpec<T>) -> Result<()> {
        self.check_shape()?;
        if self.n_qubits() != device.n_qubits {
            return Err(Error::Dimension(format!(
                "schedule drives {} qubits, device has {}",
                self.n_qubits(),
                device.n_qubits
            )));
        }
        if !(self.duration >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "duration must be >= 0, got {}",
                self.duration
            )));
        }
        let slack = T::lit(1e-12) * (T::one() + device.amp_bound);
        for (q, row) in self.amplitudes.iter().enumerate() {
            if let Some(a) = row.iter().find(|a| !(a.abs() <= device.amp_bound + slack)) {
                return Err(Error::InvalidParameter(format!(
                    "qubit {} amplitude {a} exceeds bound {}",
                    q + 1,
                    device.amp_bound
                )));
            }
        }
        let dslack = T::lit(1e-12) * (T::one() + device.detuning_bound);
        if let Some(d) = self
            .detunings
            .iter()
            .find(|d| !(d.abs() <= device.detuning_bound + dslack))
        {
            return Err(Error::InvalidParameter(format!(
                "detuning {d} exceeds bound {}",
                device.detuning_bound
            )));
        }
        if self.duration > T::zero()
            && self.segment_width() < device.pulse_resolution * (T::one() - T::lit(1e-9))
        {
            return Err(Error::InvalidParameter(format!(
                "segment width {} ns is below the device pulse resolution {} ns",
                self.segment_width(),
                device.pulse_resolution
            )));
        }
        Ok(())
    }

    /// Fraction of amplitudes within `rel` of either bound (bang-bang measure).
    pub fn saturation_fraction(&self, amp_bound: T, rel: T) -> T {
        let total = self.n_qubits() * self.n_segments();
        if total == 0 {
            return T::zero();
        }
        let near = self
            .amplitudes
            .iter()
            .flatten()
            .filter(|a| a.abs() >= amp_bound * (T::one() - rel))
            .count();
        T::from_usize_lossy(near) / T::from_usize_lossy(total)
    }

    /// Structured-text (TOML) form; all values in rad/ns and ns.
    pub fn to_text(&self) -> String {
        let file = ScheduleFile {
            duration_ns: self.duration.to_f64_lossy(),
            n_segments: self.n_segments(),
            detunings_rad_per_ns: self.detunings.iter().map(|x| x.to_f64_lossy()).collect(),
            amplitudes_rad_per_ns: self
                .amplitudes
                .iter()
                .map(|r| r.iter().map(|x| x.to_f64_lossy()).collect())
                .collect(),
            phases_rad: self.phases.as_ref().map(|p| {
                p.iter()
                    .map(|r| r.iter().map(|x| x.to_f64_lossy()).collect())
                    .collect()
            }),
        };
        toml::to_string(&file).expect("schedule serialises")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let file: ScheduleFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let conv = |v: &Vec<f64>| v.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
        let s = Self {
            duration: T::lit(file.duration_ns),
            amplitudes: file.amplitudes_rad_per_ns.iter().map(conv).collect(),
            detunings: conv(&file.detunings_rad_per_ns),
            phases: file
                .phases_rad
                .as_ref()
                .map(|p| p.iter().map(conv).collect()),
        };
        s.check_shape()?;
        if s.n_segments() != file.n_segments {
            return Err(Error::Parse(format!(
                "n_segments = {} but amplitude rows have {} entries",
                file.n_segments,
                s.n_segments()
            )));
        }
        Ok(s)
    }
}

#[derive(Serialize, Deserialize)]
struct ScheduleFile {
    duration_ns: f64,
    n_segments: usize,
    detunings_rad_per_ns: Vec<f64>,
    amplitudes_rad_per_ns: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phases_rad: Option<Vec<Vec<f64>>>,
}

/// Largest segment count `≤ requested` whose width respects the resolution.
pub fn segments_for_resolution<T: Real>(duration: T, requested: usize, resolution: T) -> usize {
    if resolution <= T::zero() {
        return requested.max(1);
    }
    let max_fit = (duration / resolution)
        .floor()
        .to_usize()
        .unwrap_or(1)
        .max(1);
    requested.min(max_fit).max(1)
}

/// How a schedule is flattened into an optimiser vector: all amplitudes
/// (qubit-major), then per-segment phases if enabled, then one detuning per
/// qubit if enabled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    pub n_qubits: usize,
    pub n_segments: usize,
    pub phases: bool,
    pub detunings: bool,
}

impl ParamLayout {
    /// Amplitudes plus one detuning per qubit: `N·(n+1)` parameters.
    pub fn standard(n_qubits: usize, n_segments: usize) -> Self {
        Self {
            n_qubits,
            n_segments,
            phases: false,
            detunings: true,
        }
    }

    /// Amplitude and phase per segment, carrier fixed on resonance: `2·N·n`.
    pub fn phased(n_qubits: usize, n_segments: usize) -> Self {
        Self {
            n_qubits,
            n_segments,
            phases: true,
            detunings: false,
        }
    }

    pub fn len(&self) -> usize {
        let per = self.n_qubits * self.n_segments;
        per + if self.phases { per } else { 0 } + if self.detunings { self.n_qubits } else { 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn amplitude_index(&self, qubit: usize, segment: usize) -> usize {
        qubit * self.n_segments + segment
    }

    pub fn phase_index(&self, qubit: usize, segment: usize) -> Option<usize> {
        self.phases
            .then(|| self.n_qubits * self.n_segments + qubit * self.n_segments + segment)
    }

    pub fn detuning_index(&self, qubit: usize) -> Option<usize> {
        let base = self.n_qubits * self.n_segments * if self.phases { 2 } else { 1 };
        self.detunings.then(|| base + qubit)
    }

    pub fn bounds<T: Real>(&self, device: &DeviceSpec<T>) -> Bounds<T> {
        let mut lower = vec![-device.amp_bound; self.n_qubits * self.n_segments];
        let mut upper = vec![device.amp_bound; self.n_qubits * self.n_segments];
        if self.phases {
            lower.extend(std::iter::repeat_n(
                -T::PI(),
                self.n_qubits * self.n_segments,
            ));
            upper.extend(std::iter::repeat_n(
                T::PI(),
                self.n_qubits * self.n_segments,
            ));
        }
        if self.detunings {
            lower.extend(std::iter::repeat_n(-device.detuning_bound, self.n_qubits));
            upper.extend(std::iter::repeat_n(device.detuning_bound, self.n_qubits));
        }
        Bounds::new(lower, upper).expect("device bounds are ordered")
    }

    pub fn to_schedule<T: Real>(&self, x: &[T], duration: T) -> PulseSchedule<T> {
        assert_eq!(
            x.len(),
            self.len(),
            "parameter vector length does not match layout"
        );
        let n = self.n_segments;
        let amplitudes = (0..self.n_qubits)
            .map(|q| x[q * n..(q + 1) * n].to_vec())
            .collect();
        let phases = self.phases.then(|| {
            (0..self.n_qubits)
                .map(|q| (0..n).map(|k| x[self.phase_index(q, k).unwrap()]).collect())
                .collect()
        });
        let detunings = (0..self.n_qubits)
            .map(|q| self.detuning_index(q).map_or(T::zero(), |i| x[i]))
            .collect();
        PulseSchedule {
            duration,
            amplitudes,
            detunings,
            phases,
        }
    }

    pub fn from_schedule<T: Real>(&self, s: &PulseSchedule<T>) -> Vec<T> {
        let mut x = Vec::with_capacity(self.len());
        for row in &s.amplitudes {
            x.extend_from_slice(row);
        }
        if self.phases {
            for q in 0..self.n_qubits {
                for k in 0..self.n_segments {
                    x.push(s.phase(q, k));
                }
            }
        }
        if self.detunings {
            x.extend_from_slice(&s.detunings);
        }
        x
    }
}
