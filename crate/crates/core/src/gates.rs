//! Gate-level reference ansätze: first-order Trotter layers and strongly
//! entangling layers, with counting, as-soon-as-possible scheduling,
//! wall-clock pricing and exact statevector simulation.
//!
//! Qubit `0` is the most significant bit of a basis index, as in [`crate::spin`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex;

use crate::device::{GateTimes, Topology};
use crate::num::{cis, Real};
use crate::spin::{Pauli, SpinHamiltonian, MAX_DENSE_QUBITS};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    H,
    X,
    Cnot,
    Swap,
}

impl GateKind {
    pub const ALL: [GateKind; 7] = [
        GateKind::Rx,
        GateKind::Ry,
        GateKind::Rz,
        GateKind::H,
        GateKind::X,
        GateKind::Cnot,
        GateKind::Swap,
    ];

    pub fn arity(self) -> usize {
        match self {
            GateKind::Cnot | GateKind::Swap => 2,
            _ => 1,
        }
    }

    pub fn is_parametric(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Ry | GateKind::Rz)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Rx => "rx",
            GateKind::Ry => "ry",
            GateKind::Rz => "rz",
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Cnot => "cnot",
            GateKind::Swap => "swap",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GateKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown gate `{s}`")))
    }
}

/// One gate. For CNOT, `qubits[0]` is the control.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate<T> {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    /// Rotation angle; zero for non-parametric gates.
    pub angle: T,
}

impl<T: Real> Gate<T> {
    pub fn single(kind: GateKind, q: usize, angle: T) -> Self {
        Self {
            kind,
            qubits: vec![q],
            angle,
        }
    }

    pub fn two(kind: GateKind, a: usize, b: usize) -> Self {
        Self {
            kind,
            qubits: vec![a, b],
            angle: T::zero(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit<T> {
    n_qubits: usize,
    gates: Vec<Gate<T>>,
}

impl<T: Real> Circuit<T> {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate<T>] {
        &self.gates
    }

    pub fn push(&mut self, gate: Gate<T>) -> Result<()> {
        if gate.qubits.len() != gate.kind.arity() {
            return Err(Error::InvalidParameter(format!(
                "{} acts on {} qubits, got {:?}",
                gate.kind,
                gate.kind.arity(),
                gate.qubits
            )));
        }
        if let Some(&q) = gate.qubits.iter().find(|&&q| q >= self.n_qubits) {
            return Err(Error::InvalidParameter(format!(
                "qubit {q} out of range for a {}-qubit circuit",
                self.n_qubits
            )));
        }
        if gate.qubits.len() == 2 && gate.qubits[0] == gate.qubits[1] {
            return Err(Error::InvalidParameter(format!(
                "{} on a single qubit {}",
                gate.kind, gate.qubits[0]
            )));
        }
        self.gates.push(gate);
        Ok(())
    }

    fn rot(&mut self, kind: GateKind, q: usize, angle: T) -> Result<()> {
        self.push(Gate::single(kind, q, angle))
    }

    fn fixed(&mut self, kind: GateKind, q: usize) -> Result<()> {
        self.push(Gate::single(kind, q, T::zero()))
    }

    fn pair(&mut self, kind: GateKind, a: usize, b: usize) -> Result<()> {
        self.push(Gate::two(kind, a, b))
    }

    pub fn extend(&mut self, other: &Circuit<T>) -> Result<()> {
        for g in &other.gates {
            self.push(g.clone())?;
        }
        Ok(())
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    pub fn count(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind == kind).count()
    }

    pub fn single_qubit_count(&self) -> usize {
        self.gates.iter().filter(|g| g.kind.arity() == 1).count()
    }

    pub fn two_qubit_count(&self) -> usize {
        self.gates.iter().filter(|g| g.kind.arity() == 2).count()
    }

    /// Gate count per kind.
    pub fn histogram(&self) -> BTreeMap<GateKind, usize> {
        let mut h = BTreeMap::new();
        for g in &self.gates {
            *h.entry(g.kind).or_insert(0) += 1;
        }
        h
    }

    /// Greedy as-soon-as-possible layer of every gate; gates on disjoint
    /// qubits share a layer.
    pub fn layers(&self) -> Vec<usize> {
        let mut front = vec![0usize; self.n_qubits];
        self.gates
            .iter()
            .map(|g| {
                let layer = g.qubits.iter().map(|&q| front[q]).max().unwrap_or(0);
                for &q in &g.qubits {
                    front[q] = layer + 1;
                }
                layer
            })
            .collect()
    }

    pub fn depth(&self) -> usize {
        self.layers().into_iter().map(|l| l + 1).max().unwrap_or(0)
    }

    /// Number of schedule layers that contain a single-qubit gate, i.e. how
    /// many single-qubit steps cannot be run in parallel with each other.
    pub fn single_qubit_layers(&self) -> usize {
        let layers = self.layers();
        let mut seen: Vec<usize> = self
            .gates
            .iter()
            .zip(&layers)
            .filter(|(g, _)| g.kind.arity() == 1)
            .map(|(_, &l)| l)
            .collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// One gate per line: `kind q0 [q1] [angle]`, preceded by `qubits N`.
    pub fn to_text(&self) -> String {
        let mut out = format!("qubits {}\n", self.n_qubits);
        for g in &self.gates {
            out.push_str(g.kind.name());
            for q in &g.qubits {
                out.push_str(&format!(" {q}"));
            }
            if g.kind.is_parametric() {
                out.push_str(&format!(" {:.17e}", g.angle.to_f64_lossy()));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty circuit".into()))?;
        let n = header
            .strip_prefix("qubits")
            .and_then(|r| r.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::Parse(format!("expected `qubits N`, got `{header}`")))?;
        let mut c = Circuit::new(n);
        for line in lines {
            let mut tok = line.split_whitespace();
            let kind: GateKind = tok.next().unwrap_or_default().parse()?;
            let mut qubits = Vec::with_capacity(2);
            for _ in 0..kind.arity() {
                let q = tok
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::Parse(format!("bad qubit in `{line}`")))?;
                qubits.push(q);
            }
            let angle = if kind.is_parametric() {
                let a: f64 = tok
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::Parse(format!("missing angle in `{line}`")))?;
                T::lit(a)
            } else {
                T::zero()
            };
            if tok.next().is_some() {
                return Err(Error::Parse(format!("trailing tokens in `{line}`")));
            }
            c.push(Gate {
                kind,
                qubits,
                angle,
            })?;
        }
        Ok(c)
    }
}

/// Emits `exp(-i·alpha·P)` for a Pauli word supported on `support`
/// (physical qubits, ascending) with letters `ops`.
fn pauli_gadget<T: Real>(
    c: &mut Circuit<T>,
    support: &[usize],
    ops: &[Pauli],
    alpha: T,
) -> Result<()> {
    let quarter = T::FRAC_PI_2();
    let basis = |c: &mut Circuit<T>, undo: bool| -> Result<()> {
        for (&q, &p) in support.iter().zip(ops) {
            match p {
                Pauli::X => c.fixed(GateKind::H, q)?,
                Pauli::Y => c.rot(GateKind::Rx, q, if undo { -quarter } else { quarter })?,
                _ => {}
            }
        }
        Ok(())
    };
    basis(c, false)?;
    for w in support.windows(2) {
        c.pair(GateKind::Cnot, w[0], w[1])?;
    }
    let target = *support.last().expect("non-empty support");
    c.rot(GateKind::Rz, target, T::lit(2.0) * alpha)?;
    for w in support.windows(2).rev() {
        c.pair(GateKind::Cnot, w[0], w[1])?;
    }
    basis(c, true)
}

/// Adjacent swaps that pack `support` into the contiguous block starting at
/// its first qubit on a linear chain.
fn packing_swaps(support: &[usize]) -> Vec<(usize, usize)> {
    let mut swaps = Vec::new();
    for (k, &q) in support.iter().enumerate().skip(1) {
        let dest = support[0] + k;
        for p in (dest..q).rev() {
            swaps.push((p, p + 1));
        }
    }
    swaps
}

fn term_rank(ops: &[Pauli]) -> usize {
    let weight = ops.iter().filter(|&&p| p != Pauli::I).count();
    let diagonal = ops.iter().all(|&p| matches!(p, Pauli::I | Pauli::Z));
    match (weight, diagonal) {
        (1, _) => 3,
        (_, true) => 2,
        _ => 1,
    }
}

/// One first-order Trotter factor `Π_j exp(-iθ H_j)` of `h`.
///
/// Off-diagonal (hopping) terms come first in Hamiltonian order, then
/// multi-qubit Z words, then single-qubit terms; identity terms only
/// contribute a global phase and are dropped. With `routing` set to a
/// nearest-neighbour chain, non-adjacent words are packed with SWAPs and
/// unpacked afterwards.
pub fn trotter_layer<T: Real>(
    h: &SpinHamiltonian<T>,
    theta: T,
    routing: Option<&Topology>,
) -> Result<Circuit<T>> {
    let n = h.n_qubits();
    let mut c = Circuit::new(n);
    let mut terms: Vec<_> = h
        .terms()
        .iter()
        .filter(|t| !t.string.is_identity())
        .collect();
    terms.sort_by_key(|t| term_rank(t.string.ops()));
    for term in terms {
        let ops = term.string.ops();
        let support: Vec<usize> = (0..n).filter(|&q| ops[q] != Pauli::I).collect();
        let letters: Vec<Pauli> = support.iter().map(|&q| ops[q]).collect();
        let alpha = theta * term.coeff;
        let contiguous = support.windows(2).all(|w| w[1] == w[0] + 1);
        match routing {
            Some(Topology::NearestNeighbor) if !contiguous => {
                let swaps = packing_swaps(&support);
                for &(a, b) in &swaps {
                    c.pair(GateKind::Swap, a, b)?;
                }
                let packed: Vec<usize> = (support[0]..support[0] + support.len()).collect();
                pauli_gadget(&mut c, &packed, &letters, alpha)?;
                for &(a, b) in swaps.iter().rev() {
                    c.pair(GateKind::Swap, a, b)?;
                }
            }
            Some(Topology::NearestNeighbor) | Some(Topology::AllToAll) | None => {
                pauli_gadget(&mut c, &support, &letters, alpha)?
            }
            Some(topo @ Topology::Explicit(_)) => {
                if let Some(w) = support.windows(2).find(|w| !topo.connects(n, w[0], w[1])) {
                    return Err(Error::InvalidParameter(format!(
                        "term {} needs qubits {} and {} coupled; only chain routing is supported",
                        term.string, w[0], w[1]
                    )));
                }
                pauli_gadget(&mut c, &support, &letters, alpha)?
            }
        }
    }
    Ok(c)
}

/// Per-qubit `RZ·RY·RZ` followed by CNOTs between neighbouring qubits, closed
/// into a ring (two qubits get CNOTs in both directions).
pub fn strongly_entangling_layer<T: Real>(
    n_qubits: usize,
    angles: &[[T; 3]],
) -> Result<Circuit<T>> {
    if n_qubits < 2 {
        return Err(Error::InvalidParameter(format!(
            "an entangling layer needs at least 2 qubits, got {n_qubits}"
        )));
    }
    if angles.len() != n_qubits {
        return Err(Error::Dimension(format!(
            "{} angle triples for {n_qubits} qubits",
            angles.len()
        )));
    }
    let mut c = Circuit::new(n_qubits);
    for (q, a) in angles.iter().enumerate() {
        c.rot(GateKind::Rz, q, a[0])?;
        c.rot(GateKind::Ry, q, a[1])?;
        c.rot(GateKind::Rz, q, a[2])?;
    }
    for q in 0..n_qubits {
        c.pair(GateKind::Cnot, q, (q + 1) % n_qubits)?;
    }
    Ok(c)
}

/// Wall-clock price of each gate kind (ns).
#[derive(Clone, Debug, PartialEq)]
pub struct GateTimeTable<T> {
    times: BTreeMap<GateKind, T>,
}

impl<T: Real> GateTimeTable<T> {
    pub fn new() -> Self {
        Self {
            times: BTreeMap::new(),
        }
    }

    /// Single-qubit kinds at `single`, CNOT at `two`, SWAP as three CNOTs.
    pub fn from_gate_times(times: &GateTimes<T>) -> Self {
        let mut t = Self::new();
        for k in GateKind::ALL {
            let v = match k {
                GateKind::Cnot => times.two_qubit,
                GateKind::Swap => T::lit(3.0) * times.two_qubit,
                _ => times.single_qubit,
            };
            t.times.insert(k, v);
        }
        t
    }

    pub fn set(&mut self, kind: GateKind, ns: T) -> Result<()> {
        if !(ns > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "{kind} time must be positive, got {ns}"
            )));
        }
        self.times.insert(kind, ns);
        Ok(())
    }

    pub fn get(&self, kind: GateKind) -> Option<T> {
        self.times.get(&kind).copied()
    }
}

impl<T: Real> Default for GateTimeTable<T> {
    fn default() -> Self {
        Self::from_gate_times(&GateTimes::default())
    }
}

/// Critical-path duration of the as-soon-as-possible schedule. SWAPs cost
/// nothing unless `include_swaps` is set.
pub fn circuit_duration<T: Real>(
    circuit: &Circuit<T>,
    table: &GateTimeTable<T>,
    include_swaps: bool,
) -> Result<T> {
    let mut front = vec![T::zero(); circuit.n_qubits()];
    for g in circuit.gates() {
        let dt = if g.kind == GateKind::Swap && !include_swaps {
            T::zero()
        } else {
            table
                .get(g.kind)
                .ok_or_else(|| Error::InvalidParameter(format!("no time for gate {}", g.kind)))?
        };
        let start = g.qubits.iter().map(|&q| front[q]).fold(T::zero(), T::max);
        for &q in &g.qubits {
            front[q] = start + dt;
        }
    }
    Ok(front.into_iter().fold(T::zero(), T::max))
}

type Mat2<T> = [[Complex<T>; 2]; 2];

fn single_qubit_matrix<T: Real>(kind: GateKind, angle: T) -> Mat2<T> {
    let z = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());
    let half = angle * T::lit(0.5);
    let (s, c) = half.sin_cos();
    let cr = Complex::new(c, T::zero());
    match kind {
        GateKind::Rx => [
            [cr, Complex::new(T::zero(), -s)],
            [Complex::new(T::zero(), -s), cr],
        ],
        GateKind::Ry => [
            [cr, Complex::new(-s, T::zero())],
            [Complex::new(s, T::zero()), cr],
        ],
        GateKind::Rz => [[cis(-half), z], [z, cis(half)]],
        GateKind::H => {
            let r = Complex::new(T::FRAC_1_SQRT_2(), T::zero());
            [[r, r], [r, -r]]
        }
        GateKind::X => [[z, one], [one, z]],
        GateKind::Cnot | GateKind::Swap => unreachable!("two-qubit gate"),
    }
}

/// Applies `circuit` to a statevector of length `2^n`.
pub fn simulate_circuit<T: Real>(
    circuit: &Circuit<T>,
    state: &[Complex<T>],
) -> Result<Vec<Complex<T>>> {
    let n = circuit.n_qubits();
    if n > MAX_DENSE_QUBITS {
        return Err(Error::Dimension(format!(
            "{n} qubits exceed the simulation limit {MAX_DENSE_QUBITS}"
        )));
    }
    if state.len() != 1 << n {
        return Err(Error::Dimension(format!(
            "state of length {} for a {n}-qubit circuit",
            state.len()
        )));
    }
    let bit = |q: usize| 1usize << (n - 1 - q);
    let mut psi = state.to_vec();
    for g in circuit.gates() {
        match g.kind {
            GateKind::Cnot => {
                let (cb, tb) = (bit(g.qubits[0]), bit(g.qubits[1]));
                for i in 0..psi.len() {
                    if i & cb != 0 && i & tb == 0 {
                        psi.swap(i, i | tb);
                    }
                }
            }
            GateKind::Swap => {
                let (ab, bb) = (bit(g.qubits[0]), bit(g.qubits[1]));
                for i in 0..psi.len() {
                    if i & ab != 0 && i & bb == 0 {
                        psi.swap(i, (i & !ab) | bb);
                    }
                }
            }
            kind => {
                let m = single_qubit_matrix(kind, g.angle);
                let b = bit(g.qubits[0]);
                for i in 0..psi.len() {
                    if i & b == 0 {
                        let (a0, a1) = (psi[i], psi[i | b]);
                        psi[i] = m[0][0] * a0 + m[0][1] * a1;
                        psi[i | b] = m[1][0] * a0 + m[1][1] * a1;
                    }
                }
            }
        }
    }
    Ok(psi)
}
