//! Transmon device descriptions, qudit operators and device/control Hamiltonians.
//!
//! Qudit 1 is the most significant digit of a basis index, matching the
//! bitstring convention of [`crate::spin`]. All frequencies are angular
//! (rad/ns); preset files carry linear GHz/MHz/µs values.

use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::linalg::CMatrix;
use crate::num::{
    cis, ghz_to_rad_per_ns, mhz_to_rad_per_ns, rad_per_ns_to_ghz, rad_per_ns_to_mhz, Real,
};
use crate::schedule::PulseSchedule;
use crate::{Error, Result};

/// Largest Hilbert-space dimension assembled densely.
pub const MAX_DIM: usize = 4096;

const PRESETS: &[(&str, &str)] = &[
    ("falcon4q_nn", include_str!("../presets/falcon4q_nn.toml")),
    ("falcon4q_all", include_str!("../presets/falcon4q_all.toml")),
    ("ibm_osaka", include_str!("../presets/ibm_osaka.toml")),
    ("ibm_brisbane", include_str!("../presets/ibm_brisbane.toml")),
    (
        "ibm_sherbrooke",
        include_str!("../presets/ibm_sherbrooke.toml"),
    ),
    ("ibm_kyoto", include_str!("../presets/ibm_kyoto.toml")),
];

/// Names of the bundled device presets.
pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Topology {
    NearestNeighbor,
    AllToAll,
    /// 0-based undirected edges.
    Explicit(Vec<(usize, usize)>),
}

impl Topology {
    pub fn edges(&self, n_qubits: usize) -> Vec<(usize, usize)> {
        match self {
            Topology::NearestNeighbor => (1..n_qubits).map(|j| (j - 1, j)).collect(),
            Topology::AllToAll => (0..n_qubits)
                .flat_map(|i| (i + 1..n_qubits).map(move |j| (i, j)))
                .collect(),
            Topology::Explicit(e) => e.clone(),
        }
    }

    /// Whether qubits `i` and `j` share an edge.
    pub fn connects(&self, n_qubits: usize, i: usize, j: usize) -> bool {
        self.edges(n_qubits)
            .iter()
            .any(|&(a, b)| (a, b) == (i, j) || (b, a) == (i, j))
    }
}

/// Exchange coupling `g (a†_i a_j + h.c.)` on 0-based qubits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coupling<T> {
    pub i: usize,
    pub j: usize,
    pub g: T,
}

/// Amplitude-damping and dephasing rates (1/ns).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollapseRates<T> {
    pub gamma1: T,
    pub gamma2: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateTimes<T> {
    pub single_qubit: T,
    pub two_qubit: T,
}

impl<T: Real> Default for GateTimes<T> {
    fn default() -> Self {
        Self {
            single_qubit: T::lit(71.0),
            two_qubit: T::lit(400.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviceSpec<T> {
    pub name: String,
    pub n_qubits: usize,
    pub levels: usize,
    pub omega: Vec<T>,
    pub delta: Vec<T>,
    pub couplings: Vec<Coupling<T>>,
    pub amp_bound: T,
    pub detuning_bound: T,
    pub pulse_resolution: T,
    pub gate_times: GateTimes<T>,
    pub collapse: Option<Vec<CollapseRates<T>>>,
}

impl<T: Real> DeviceSpec<T> {
    /// Device with default bounds (|Ω| ≤ 2π·20 MHz, |Δν| ≤ 2π·1 GHz), four
    /// levels per qudit, no noise and no pulse-resolution limit.
    pub fn new(omega: Vec<T>, delta: Vec<T>, couplings: Vec<Coupling<T>>) -> Self {
        Self {
            name: "custom".into(),
            n_qubits: omega.len(),
            levels: 4,
            omega,
            delta,
            couplings,
            amp_bound: default_amp_bound(),
            detuning_bound: default_detuning_bound(),
            pulse_resolution: T::zero(),
            gate_times: GateTimes::default(),
            collapse: None,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        let text = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown device preset `{name}` (available: {})",
                    preset_names().collect::<Vec<_>>().join(", ")
                ))
            })?;
        Self::from_toml_str(text)
    }

    /// Preset name or path to a device file.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if preset_names().any(|n| n == name_or_path) {
            return Self::preset(name_or_path);
        }
        let path = Path::new(name_or_path);
        if !path.exists() {
            return Err(Error::InvalidParameter(format!(
                "`{name_or_path}` is neither a device preset nor an existing file"
            )));
        }
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: DeviceFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_spec()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&DeviceFile::from_spec(self)).expect("device serialises")
    }

    pub fn dim(&self) -> usize {
        self.levels.pow(self.n_qubits as u32)
    }

    pub fn register(&self) -> Register {
        Register::new(self.n_qubits, self.levels)
    }

    pub fn topology(&self) -> Topology {
        Topology::Explicit(self.couplings.iter().map(|c| (c.i, c.j)).collect())
    }

    pub fn with_levels(mut self, levels: usize) -> Self {
        self.levels = levels;
        self
    }

    /// Keeps the first `n` qudits and the couplings among them.
    pub fn truncated(mut self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n_qubits {
            return Err(Error::InvalidParameter(format!(
                "cannot keep {n} of {} qubits",
                self.n_qubits
            )));
        }
        self.n_qubits = n;
        self.omega.truncate(n);
        self.delta.truncate(n);
        self.couplings.retain(|c| c.i < n && c.j < n);
        if let Some(c) = &mut self.collapse {
            c.truncate(n);
        }
        Ok(self)
    }

    /// Replaces every coupling by `g` on the given topology.
    pub fn with_uniform_coupling(mut self, g: T, topology: &Topology) -> Self {
        self.couplings = topology
            .edges(self.n_qubits)
            .into_iter()
            .map(|(i, j)| Coupling { i, j, g })
            .collect();
        self
    }

    pub fn without_collapse(mut self) -> Self {
        self.collapse = None;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_qubits == 0 {
            return bad("device needs at least one qubit".into());
        }
        if !(2..=4).contains(&self.levels) {
            return bad(format!("levels must be in 2..=4, got {}", self.levels));
        }
        if self.omega.len() != self.n_qubits || self.delta.len() != self.n_qubits {
            return Err(Error::Dimension(format!(
                "{} qubits but {} frequencies and {} anharmonicities",
                self.n_qubits,
                self.omega.len(),
                self.delta.len()
            )));
        }
        if self
            .levels
            .checked_pow(self.n_qubits as u32)
            .is_none_or(|d| d > MAX_DIM)
        {
            return Err(Error::Dimension(format!(
                "{}^{} exceeds the dense limit {MAX_DIM}",
                self.levels, self.n_qubits
            )));
        }
        if let Some(w) = self
            .omega
            .iter()
            .find(|w| !(**w > T::zero() && w.is_finite()))
        {
            return bad(format!("qubit frequency must be positive, got {w}"));
        }
        if let Some(d) = self
            .delta
            .iter()
            .find(|d| !(**d >= T::zero() && d.is_finite()))
        {
            return bad(format!("anharmonicity must be non-negative, got {d}"));
        }
        for (k, c) in self.couplings.iter().enumerate() {
            if c.i >= self.n_qubits || c.j >= self.n_qubits {
                return bad(format!("coupling ({}, {}) out of range", c.i + 1, c.j + 1));
            }
            if c.i == c.j {
                return bad(format!("self-loop coupling on qubit {}", c.i + 1));
            }
            if !c.g.is_finite() {
                return bad("non-finite coupling strength".into());
            }
            let dup = self.couplings[..k]
                .iter()
                .any(|o| (o.i, o.j) == (c.i, c.j) || (o.j, o.i) == (c.i, c.j));
            if dup {
                return bad(format!("duplicate coupling ({}, {})", c.i + 1, c.j + 1));
            }
        }
        if !(self.amp_bound > T::zero()) || !(self.detuning_bound >= T::zero()) {
            return bad("control bounds must be positive".into());
        }
        if !(self.pulse_resolution >= T::zero()) {
            return bad("pulse resolution must be non-negative".into());
        }
        if !(self.gate_times.single_qubit > T::zero() && self.gate_times.two_qubit > T::zero()) {
            return bad("gate times must be positive".into());
        }
        if let Some(c) = &self.collapse {
            if c.len() != self.n_qubits {
                return Err(Error::Dimension(format!(
                    "{} collapse entries for {} qubits",
                    c.len(),
                    self.n_qubits
                )));
            }
            if c.iter()
                .any(|r| !(r.gamma1 >= T::zero() && r.gamma2 >= T::zero()))
            {
                return bad("collapse rates must be non-negative".into());
            }
        }
        Ok(())
    }
}

pub fn default_amp_bound<T: Real>() -> T {
    mhz_to_rad_per_ns(T::lit(20.0))
}

pub fn default_detuning_bound<T: Real>() -> T {
    ghz_to_rad_per_ns(T::one())
}

#[derive(Serialize, Deserialize)]
struct CouplingEntry {
    pair: [usize; 2],
    g_mhz: f64,
}

#[derive(Serialize, Deserialize)]
struct CollapseEntry {
    t1_us: f64,
    t2_us: f64,
}

#[derive(Serialize, Deserialize)]
struct GateTimesEntry {
    single_qubit_ns: f64,
    two_qubit_ns: f64,
}

#[derive(Serialize, Deserialize)]
struct DeviceFile {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<usize>,
    omega_ghz: Vec<f64>,
    delta_ghz: Vec<f64>,
    #[serde(default)]
    pulse_resolution_ns: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amp_bound_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    detuning_bound_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gate_times: Option<GateTimesEntry>,
    #[serde(default)]
    coupling: Vec<CouplingEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    collapse: Vec<CollapseEntry>,
}

impl DeviceFile {
    fn into_spec<T: Real>(self) -> Result<DeviceSpec<T>> {
        let ghz = |v: &[f64]| {
            v.iter()
                .map(|&x| ghz_to_rad_per_ns(T::lit(x)))
                .collect::<Vec<T>>()
        };
        let mut couplings = Vec::with_capacity(self.coupling.len());
        for c in &self.coupling {
            let [i, j] = c.pair;
            if i == 0 || j == 0 {
                return Err(Error::Parse(format!(
                    "coupling pair {:?} must be 1-based",
                    c.pair
                )));
            }
            couplings.push(Coupling {
                i: i - 1,
                j: j - 1,
                g: mhz_to_rad_per_ns(T::lit(c.g_mhz)),
            });
        }
        let mut spec = DeviceSpec::new(ghz(&self.omega_ghz), ghz(&self.delta_ghz), couplings);
        spec.name = self.name;
        if let Some(l) = self.levels {
            spec.levels = l;
        }
        spec.pulse_resolution = T::lit(self.pulse_resolution_ns);
        if let Some(a) = self.amp_bound_mhz {
            spec.amp_bound = mhz_to_rad_per_ns(T::lit(a));
        }
        if let Some(d) = self.detuning_bound_ghz {
            spec.detuning_bound = ghz_to_rad_per_ns(T::lit(d));
        }
        if let Some(g) = self.gate_times {
            spec.gate_times = GateTimes {
                single_qubit: T::lit(g.single_qubit_ns),
                two_qubit: T::lit(g.two_qubit_ns),
            };
        }
        if !self.collapse.is_empty() {
            let us_to_rate = |t: f64| if t > 0.0 { T::lit(1e-3 / t) } else { T::zero() };
            spec.collapse = Some(
                self.collapse
                    .iter()
                    .map(|c| CollapseRates {
                        gamma1: us_to_rate(c.t1_us),
                        gamma2: us_to_rate(c.t2_us),
                    })
                    .collect(),
            );
        }
        spec.validate()?;
        Ok(spec)
    }

    fn from_spec<T: Real>(s: &DeviceSpec<T>) -> Self {
        let f = |x: T| x.to_f64_lossy();
        let rate_to_us = |g: T| if g > T::zero() { 1e-3 / f(g) } else { 0.0 };
        Self {
            name: s.name.clone(),
            levels: Some(s.levels),
            omega_ghz: s.omega.iter().map(|&w| f(rad_per_ns_to_ghz(w))).collect(),
            delta_ghz: s.delta.iter().map(|&w| f(rad_per_ns_to_ghz(w))).collect(),
            pulse_resolution_ns: f(s.pulse_resolution),
            amp_bound_mhz: Some(f(rad_per_ns_to_mhz(s.amp_bound))),
            detuning_bound_ghz: Some(f(rad_per_ns_to_ghz(s.detuning_bound))),
            gate_times: Some(GateTimesEntry {
                single_qubit_ns: f(s.gate_times.single_qubit),
                two_qubit_ns: f(s.gate_times.two_qubit),
            }),
            coupling: s
                .couplings
                .iter()
                .map(|c| CouplingEntry {
                    pair: [c.i + 1, c.j + 1],
                    g_mhz: f(rad_per_ns_to_mhz(c.g)),
                })
                .collect(),
            collapse: s
                .collapse
                .iter()
                .flatten()
                .map(|c| CollapseEntry {
                    t1_us: rate_to_us(c.gamma1),
                    t2_us: rate_to_us(c.gamma2),
                })
                .collect(),
        }
    }
}

/// Index arithmetic for `n` qudits of `d` levels each.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Register {
    pub n_qubits: usize,
    pub levels: usize,
}

/// Sparse matrix element `(row, col, value)`.
pub type Entry<T> = (usize, usize, T);

impl Register {
    pub fn new(n_qubits: usize, levels: usize) -> Self {
        Self { n_qubits, levels }
    }

    pub fn dim(&self) -> usize {
        self.levels.pow(self.n_qubits as u32)
    }

    /// Index stride of qudit `q` (qudit 0 is the most significant).
    pub fn stride(&self, q: usize) -> usize {
        self.levels.pow((self.n_qubits - 1 - q) as u32)
    }

    pub fn level(&self, index: usize, q: usize) -> usize {
        (index / self.stride(q)) % self.levels
    }

    pub fn levels_of(&self, index: usize) -> Vec<usize> {
        (0..self.n_qubits).map(|q| self.level(index, q)).collect()
    }

    pub fn index_of(&self, levels: &[usize]) -> usize {
        levels.iter().fold(0, |acc, &l| acc * self.levels + l)
    }

    /// Qudit basis index of a computational bitstring.
    pub fn embed_bits(&self, bits: &[bool]) -> usize {
        bits.iter()
            .fold(0, |acc, &b| acc * self.levels + usize::from(b))
    }

    /// Whether every qudit of `index` sits in {|0⟩, |1⟩}.
    pub fn is_computational(&self, index: usize) -> bool {
        (0..self.n_qubits).all(|q| self.level(index, q) < 2)
    }

    /// Bit index (base 2) of a computational qudit index.
    pub fn to_bits_index(&self, index: usize) -> usize {
        (0..self.n_qubits).fold(0, |acc, q| (acc << 1) | self.level(index, q))
    }

    /// Nonzero elements of the lowering operator `a_q`.
    pub fn lowering<T: Real>(&self, q: usize) -> Vec<Entry<T>> {
        let s = self.stride(q);
        (0..self.dim())
            .filter_map(|col| {
                let n = self.level(col, q);
                (n > 0).then(|| (col - s, col, T::from_usize_lossy(n).sqrt()))
            })
            .collect()
    }

    /// Nonzero elements of the hop `a†_i a_j` (`i ≠ j`).
    pub fn hop<T: Real>(&self, i: usize, j: usize) -> Vec<Entry<T>> {
        let (si, sj) = (self.stride(i), self.stride(j));
        (0..self.dim())
            .filter_map(|col| {
                let (ni, nj) = (self.level(col, i), self.level(col, j));
                (nj > 0 && ni + 1 < self.levels).then(|| {
                    let v = (T::from_usize_lossy(nj) * T::from_usize_lossy(ni + 1)).sqrt();
                    (col - sj + si, col, v)
                })
            })
            .collect()
    }

    /// Diagonal of `a†_q a_q`.
    pub fn number<T: Real>(&self, q: usize) -> Vec<T> {
        (0..self.dim())
            .map(|k| T::from_usize_lossy(self.level(k, q)))
            .collect()
    }
}

/// Diagonal of `Σ ω_i n_i − (δ_i/2) n_i(n_i − 1)`.
pub fn bare_energies<T: Real>(spec: &DeviceSpec<T>) -> Vec<T> {
    let reg = spec.register();
    let half = T::lit(0.5);
    (0..reg.dim())
        .map(|k| {
            (0..spec.n_qubits)
                .map(|q| {
                    let n = T::from_usize_lossy(reg.level(k, q));
                    spec.omega[q] * n - half * spec.delta[q] * n * (n - T::one())
                })
                .sum()
        })
        .collect()
}

/// Static transmon Hamiltonian over the full `d^N` qudit space.
pub fn device_hamiltonian<T: Real>(spec: &DeviceSpec<T>) -> Result<CMatrix<T>> {
    spec.validate()?;
    let reg = spec.register();
    let diag: Vec<_> = bare_energies(spec).into_iter().map(Complex::from).collect();
    let mut h = CMatrix::from_diagonal(&diag);
    for c in &spec.couplings {
        for (r, col, v) in reg.hop::<T>(c.i, c.j) {
            h[(r, col)] += Complex::from(c.g * v);
            h[(col, r)] += Complex::from(c.g * v);
        }
    }
    Ok(h)
}

/// Lab-frame drive `Σ Ω_i(t) (e^{i(v_i t + φ_i)} a_i + h.c.)`.
pub fn control_hamiltonian<T: Real>(
    spec: &DeviceSpec<T>,
    schedule: &PulseSchedule<T>,
    t: T,
) -> Result<CMatrix<T>> {
    schedule.validate(spec)?;
    let k = schedule.segment_index(t)?;
    let reg = spec.register();
    let dim = reg.dim();
    let mut h = CMatrix::zeros(dim, dim);
    for q in 0..spec.n_qubits {
        let omega = schedule.amplitudes[q][k];
        if omega == T::zero() {
            continue;
        }
        let carrier = cis(schedule.drive_frequency(q, spec) * t + schedule.phase(q, k)) * omega;
        for (r, c, v) in reg.lowering::<T>(q) {
            h[(r, c)] += carrier * v;
            h[(c, r)] += carrier.conj() * v;
        }
    }
    Ok(h)
}

/// Frame of reference a state or operator is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    Lab,
    /// Co-rotating with every qudit at its own `ω_i`.
    Rotating,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameDirection {
    /// Applies `exp(+i t H₀)`.
    ToRotating,
    /// Applies `exp(−i t H₀)`.
    ToLab,
}

/// Diagonal of `exp(±i t Σ ω_i n_i)`.
pub fn frame_phases<T: Real>(
    spec: &DeviceSpec<T>,
    t: T,
    direction: FrameDirection,
) -> Vec<Complex<T>> {
    let reg = spec.register();
    let sign = match direction {
        FrameDirection::ToRotating => T::one(),
        FrameDirection::ToLab => -T::one(),
    };
    (0..reg.dim())
        .map(|k| {
            let e: T = (0..spec.n_qubits)
                .map(|q| spec.omega[q] * T::from_usize_lossy(reg.level(k, q)))
                .sum();
            cis(sign * e * t)
        })
        .collect()
}

/// Objects that can be moved between the lab and rotating frames.
pub trait FrameTransform<T: Real>: Sized {
    fn dimension(&self) -> usize;
    fn apply_frame_phases(&mut self, phases: &[Complex<T>]);
}

impl<T: Real> FrameTransform<T> for Vec<Complex<T>> {
    fn dimension(&self) -> usize {
        self.len()
    }

    fn apply_frame_phases(&mut self, phases: &[Complex<T>]) {
        self.iter_mut().zip(phases).for_each(|(a, p)| *a *= p);
    }
}

impl<T: Real> FrameTransform<T> for CMatrix<T> {
    fn dimension(&self) -> usize {
        self.rows()
    }

    fn apply_frame_phases(&mut self, phases: &[Complex<T>]) {
        let n = self.rows();
        for r in 0..n {
            for c in 0..n {
                self[(r, c)] *= phases[r] * phases[c].conj();
            }
        }
    }
}

/// `ψ ↦ U ψ` or `A ↦ U A U†` with `U = exp(±i t Σ ω_i a†_i a_i)`.
pub fn rotating_frame_transform<T: Real, O: FrameTransform<T>>(
    spec: &DeviceSpec<T>,
    mut object: O,
    t: T,
    direction: FrameDirection,
) -> Result<O> {
    if object.dimension() != spec.dim() {
        return Err(Error::Dimension(format!(
            "object of dimension {} on a device of dimension {}",
            object.dimension(),
            spec.dim()
        )));
    }
    object.apply_frame_phases(&frame_phases(spec, t, direction));
    Ok(object)
}
