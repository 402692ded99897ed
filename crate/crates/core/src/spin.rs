//! Schwinger-model spin Hamiltonian and exact-diagonalisation oracles.
//!
//! Sites are numbered from 1 in the formulas and qubit 1 is the leftmost
//! character of every basis bitstring (the most significant bit of the basis
//! index). `Z|0⟩ = +|0⟩`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use num_traits::Zero;

use crate::linalg::{eigh, CMatrix};
use crate::num::Real;
use crate::{Error, Result};

/// Largest register handled by the dense oracles.
pub const MAX_DENSE_QUBITS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn from_char(c: char) -> Option<Self> {
        match c {
            'I' | 'i' => Some(Pauli::I),
            'X' | 'x' => Some(Pauli::X),
            'Y' | 'y' => Some(Pauli::Y),
            'Z' | 'z' => Some(Pauli::Z),
            _ => None,
        }
    }

    fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// A word over `{I, X, Y, Z}`; position 0 acts on qubit 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString(Vec<Pauli>);

impl PauliString {
    pub fn identity(n: usize) -> Self {
        Self(vec![Pauli::I; n])
    }

    /// String with the given (1-based) sites set and identity elsewhere.
    pub fn from_sites(n: usize, sites: &[(usize, Pauli)]) -> Self {
        let mut word = vec![Pauli::I; n];
        for &(site, p) in sites {
            assert!(site >= 1 && site <= n, "site {site} outside 1..={n}");
            word[site - 1] = p;
        }
        Self(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&p| p == Pauli::I)
    }

    pub fn ops(&self) -> &[Pauli] {
        &self.0
    }

    /// Number of non-identity factors.
    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&p| p != Pauli::I).count()
    }

    /// Bit masks `(flip, phase)`: `flip` has the bits of X/Y factors, `phase`
    /// the bits of Z/Y factors, with qubit 1 at the most significant bit.
    fn masks(&self) -> (usize, usize, u32) {
        let n = self.0.len();
        let (mut flip, mut phase, mut n_y) = (0usize, 0usize, 0u32);
        for (k, p) in self.0.iter().enumerate() {
            let bit = 1usize << (n - 1 - k);
            match p {
                Pauli::I => {}
                Pauli::X => flip |= bit,
                Pauli::Y => {
                    flip |= bit;
                    phase |= bit;
                    n_y += 1;
                }
                Pauli::Z => phase |= bit,
            }
        }
        (flip, phase, n_y)
    }

    /// `P|col⟩ = factor · |row⟩`, returned as `(row, factor)`.
    pub fn action<T: Real>(&self, col: usize) -> (usize, Complex<T>) {
        let (flip, phase, n_y) = self.masks();
        let row = col ^ flip;
        let sign = if (col & phase).count_ones().is_multiple_of(2) {
            T::one()
        } else {
            -T::one()
        };
        let factor = match n_y % 4 {
            0 => Complex::new(sign, T::zero()),
            1 => Complex::new(T::zero(), sign),
            2 => Complex::new(-sign, T::zero()),
            _ => Complex::new(T::zero(), -sign),
        };
        (row, factor)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| {
                Pauli::from_char(c)
                    .ok_or_else(|| Error::Parse(format!("bad Pauli letter {c:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

/// Computational-basis bitstring, qubit 1 first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bitstring(Vec<bool>);

impl Bitstring {
    pub fn zeros(n: usize) -> Self {
        Self(vec![false; n])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    /// Bitstring of basis index `index` in an `n`-qubit register.
    pub fn from_index(index: usize, n: usize) -> Self {
        Self((0..n).map(|k| (index >> (n - 1 - k)) & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b))
    }

    /// Number of Pauli-X gates needed to prepare this state from `|0…0⟩`.
    pub fn x_count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Alternating `0101…` pattern (the strong-coupling configuration of the
    /// staggered lattice).
    pub fn alternating(n: usize) -> Self {
        Self((0..n).map(|k| k % 2 == 1).collect())
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Bitstring {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Parse(format!(
                    "bitstring {s:?} may only contain 0 and 1"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PauliTerm<T> {
    pub coeff: T,
    pub string: PauliString,
}

/// Real-weighted sum of Pauli strings.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinHamiltonian<T> {
    n_qubits: usize,
    terms: Vec<PauliTerm<T>>,
}

impl<T: Real> SpinHamiltonian<T> {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            terms: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm<T>] {
        &self.terms
    }

    /// Adds `coeff · string`, merging with an existing identical string.
    /// Terms whose merged coefficient is exactly zero are removed.
    pub fn add_term(&mut self, coeff: T, string: PauliString) -> Result<()> {
        if string.len() != self.n_qubits {
            return Err(Error::Dimension(format!(
                "Pauli string {string} has length {}, register has {} qubits",
                string.len(),
                self.n_qubits
            )));
        }
        if let Some(pos) = self.terms.iter().position(|t| t.string == string) {
            self.terms[pos].coeff += coeff;
            if self.terms[pos].coeff == T::zero() {
                self.terms.remove(pos);
            }
        } else if coeff != T::zero() {
            self.terms.push(PauliTerm { coeff, string });
        }
        Ok(())
    }

    /// Sum of two Hamiltonians on the same register.
    pub fn plus(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        for t in &other.terms {
            out.add_term(t.coeff, t.string.clone())?;
        }
        Ok(out)
    }

    pub fn coefficient(&self, string: &PauliString) -> T {
        self.terms
            .iter()
            .find(|t| &t.string == string)
            .map(|t| t.coeff)
            .unwrap_or_else(T::zero)
    }

    /// Identity-string coefficient (constant energy offset).
    pub fn constant(&self) -> T {
        self.coefficient(&PauliString::identity(self.n_qubits))
    }

    pub fn validate(&self) -> Result<()> {
        for t in &self.terms {
            if !t.coeff.is_finite() {
                return Err(Error::NonFinite(format!(
                    "coefficient of {} is {}",
                    t.string, t.coeff
                )));
            }
            if t.string.len() != self.n_qubits {
                return Err(Error::Dimension(format!(
                    "term {} has wrong length",
                    t.string
                )));
            }
        }
        Ok(())
    }

    /// `H|ψ⟩` without forming the matrix.
    pub fn apply(&self, psi: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut out = vec![Complex::zero(); psi.len()];
        for t in &self.terms {
            for (col, &amp) in psi.iter().enumerate() {
                if amp.is_zero() {
                    continue;
                }
                let (row, factor) = t.string.action::<T>(col);
                out[row] += factor * amp * t.coeff;
            }
        }
        out
    }

    /// `⟨ψ|H|ψ⟩` for a (not necessarily normalised) vector.
    pub fn expectation(&self, psi: &[Complex<T>]) -> T {
        crate::linalg::inner(psi, &self.apply(psi)).re
    }

    /// Plain-text form, one `coefficient pauli_string` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.terms {
            out.push_str(&format!("{:.17e} {}\n", t.coeff.to_f64_lossy(), t.string));
        }
        out
    }

    /// Parses [`to_text`](Self::to_text) output. Blank lines and `#` comments
    /// are skipped; the register size is taken from the first term.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut h: Option<Self> = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(c), Some(s), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse(format!(
                    "line {}: expected `coefficient string`",
                    lineno + 1
                )));
            };
            let coeff: f64 = c
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            let string: PauliString = s.parse()?;
            let h = h.get_or_insert_with(|| Self::new(string.len()));
            h.add_term(T::lit(coeff), string)?;
        }
        h.ok_or_else(|| Error::Parse("no terms".into()))
    }
}

/// Which normalisation the staggered-mass `Z` sum uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StaggeredMass {
    /// `m·cosθ Σ (−1)^n Z_n`. Reproduces the tabulated 3- and 4-site ground
    /// state weights.
    #[default]
    Full,
    /// `(m/2)·cosθ Σ (−1)^n Z_n`.
    Half,
}

/// Lattice parameters of the Schwinger model in dimensionless model units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchwingerParams<T> {
    pub n_sites: usize,
    pub mass: T,
    pub spacing: T,
    pub theta: T,
    pub charge: T,
    pub staggered_mass: StaggeredMass,
}

impl<T: Real> SchwingerParams<T> {
    pub fn new(n_sites: usize, mass: T, spacing: T, theta: T, charge: T) -> Self {
        Self {
            n_sites,
            mass,
            spacing,
            theta,
            charge,
            staggered_mass: StaggeredMass::Full,
        }
    }

    /// m = 0.5, a = 0.1, θ = 0.5, e = 0.2.
    pub fn reference(n_sites: usize) -> Self {
        Self::new(n_sites, T::lit(0.5), T::lit(0.1), T::lit(0.5), T::lit(0.2))
    }

    /// `J = e²a/2`, always derived.
    pub fn coupling_j(&self) -> T {
        self.charge * self.charge * self.spacing / T::lit(2.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::InvalidParameter(format!(
                "site count N must be >= 2, got {}",
                self.n_sites
            )));
        }
        if self.n_sites > MAX_DENSE_QUBITS {
            return Err(Error::InvalidParameter(format!(
                "site count N must be <= {MAX_DENSE_QUBITS}, got {}",
                self.n_sites
            )));
        }
        if !(self.spacing > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "lattice spacing a must be > 0, got {}",
                self.spacing
            )));
        }
        for (name, v) in [("m", self.mass), ("theta", self.theta), ("e", self.charge)] {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{name} = {v}")));
            }
        }
        Ok(())
    }
}

/// The three pieces of the Hamiltonian, returned separately so each sum can
/// be inspected on its own.
#[derive(Clone, Debug)]
pub struct SchwingerParts<T> {
    pub zz: SpinHamiltonian<T>,
    pub hopping: SpinHamiltonian<T>,
    pub z: SpinHamiltonian<T>,
}

pub fn schwinger_parts<T: Real>(params: &SchwingerParams<T>) -> Result<SchwingerParts<T>> {
    params.validate()?;
    let n = params.n_sites;
    let half = T::lit(0.5);
    let j = params.coupling_j();
    let (sin_t, cos_t) = params.theta.sin_cos();
    let stagger = |site: usize| {
        if site.is_multiple_of(2) {
            T::one()
        } else {
            -T::one()
        }
    };

    let mut zz = SpinHamiltonian::new(n);
    for m in 1..=n.saturating_sub(2) {
        for k in m + 1..=n - 1 {
            let w = j * half * T::from_usize_lossy(n - k);
            zz.add_term(
                w,
                PauliString::from_sites(n, &[(m, Pauli::Z), (k, Pauli::Z)]),
            )?;
        }
    }

    let mut hopping = SpinHamiltonian::new(n);
    for site in 1..n {
        let w =
            T::one() / (T::lit(2.0) * params.spacing) - stagger(site) * params.mass * sin_t * half;
        hopping.add_term(
            w,
            PauliString::from_sites(n, &[(site, Pauli::X), (site + 1, Pauli::X)]),
        )?;
        hopping.add_term(
            w,
            PauliString::from_sites(n, &[(site, Pauli::Y), (site + 1, Pauli::Y)]),
        )?;
    }

    let mass_prefactor = match params.staggered_mass {
        StaggeredMass::Full => params.mass * cos_t,
        StaggeredMass::Half => params.mass * half * cos_t,
    };
    let mut z = SpinHamiltonian::new(n);
    for site in 1..=n {
        z.add_term(
            mass_prefactor * stagger(site),
            PauliString::from_sites(n, &[(site, Pauli::Z)]),
        )?;
    }
    for outer in 1..n {
        if outer % 2 == 0 {
            continue;
        }
        for l in 1..=outer {
            z.add_term(-j * half, PauliString::from_sites(n, &[(l, Pauli::Z)]))?;
        }
    }
    Ok(SchwingerParts { zz, hopping, z })
}

/// `H = H_ZZ + H_± + H_Z` with open boundaries and no background field.
pub fn build_schwinger<T: Real>(params: &SchwingerParams<T>) -> Result<SpinHamiltonian<T>> {
    let parts = schwinger_parts(params)?;
    parts.zz.plus(&parts.hopping)?.plus(&parts.z)
}

/// Dense `2^n × 2^n` matrix of a Pauli sum.
pub fn pauli_matrix<T: Real>(h: &SpinHamiltonian<T>) -> Result<CMatrix<T>> {
    h.validate()?;
    if h.n_qubits() > MAX_DENSE_QUBITS {
        return Err(Error::Dimension(format!(
            "{} qubits exceeds the dense limit of {MAX_DENSE_QUBITS}",
            h.n_qubits()
        )));
    }
    let dim = 1usize << h.n_qubits();
    let mut m = CMatrix::zeros(dim, dim);
    for t in h.terms() {
        for col in 0..dim {
            let (row, factor) = t.string.action::<T>(col);
            m[(row, col)] += factor * t.coeff;
        }
    }
    Ok(m)
}

#[derive(Clone, Debug)]
pub struct SpectrumResult<T> {
    /// Lowest `k` eigenvalues, ascending.
    pub energies: Vec<T>,
    pub ground_energy: T,
    /// `|⟨b|ground⟩|²` for every basis bitstring `b`.
    pub ground_probabilities: BTreeMap<String, T>,
    pub ground_state: Vec<Complex<T>>,
}

impl<T: Real> SpectrumResult<T> {
    /// Basis states carrying more than `threshold` probability.
    pub fn support(&self, threshold: T) -> Vec<String> {
        self.ground_probabilities
            .iter()
            .filter(|(_, &p)| p > threshold)
            .map(|(b, _)| b.clone())
            .collect()
    }

    pub fn probability(&self, bitstring: &str) -> T {
        self.ground_probabilities
            .get(bitstring)
            .copied()
            .unwrap_or_else(T::zero)
    }
}

/// Lowest `k` eigenpairs by dense diagonalisation.
pub fn exact_spectrum<T: Real>(h: &SpinHamiltonian<T>, k: usize) -> Result<SpectrumResult<T>> {
    let m = pauli_matrix(h)?;
    let eig = eigh(&m)?;
    let n = h.n_qubits();
    let ground_state = eig.vector(0);
    let norm_sqr: T = ground_state.iter().map(|z| z.norm_sqr()).sum();
    let ground_probabilities = ground_state
        .iter()
        .enumerate()
        .map(|(i, z)| {
            (
                Bitstring::from_index(i, n).to_string(),
                z.norm_sqr() / norm_sqr,
            )
        })
        .collect();
    Ok(SpectrumResult {
        energies: eig.values.iter().take(k.max(1)).copied().collect(),
        ground_energy: eig.values[0],
        ground_probabilities,
        ground_state,
    })
}

/// Canonical-ensemble averages at inverse temperature `beta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalObservables<T> {
    pub energy: T,
    pub entropy: T,
    /// `E − S/β`; `None` at β = 0, where it is undefined.
    pub free_energy: Option<T>,
}

/// Boltzmann averages over a given spectrum (natural-log entropy).
pub fn thermal_from_energies<T: Real>(energies: &[T], beta: T) -> Result<ThermalObservables<T>> {
    if !(beta >= T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "beta must be >= 0, got {beta}"
        )));
    }
    if energies.is_empty() {
        return Err(Error::Dimension("empty spectrum".into()));
    }
    let e0 = energies.iter().copied().fold(T::infinity(), T::min);
    let weights: Vec<T> = energies.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let z: T = weights.iter().copied().sum();
    let mut energy = T::zero();
    let mut entropy = T::zero();
    for (&e, &w) in energies.iter().zip(&weights) {
        let p = w / z;
        energy += p * e;
        if p > T::zero() {
            entropy -= p * p.ln();
        }
    }
    let free_energy = (beta > T::zero()).then(|| energy - entropy / beta);
    Ok(ThermalObservables {
        energy,
        entropy,
        free_energy,
    })
}

pub fn thermal_observables<T: Real>(
    h: &SpinHamiltonian<T>,
    beta: T,
) -> Result<ThermalObservables<T>> {
    if !(beta >= T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "beta must be >= 0, got {beta}"
        )));
    }
    let eig = eigh(&pauli_matrix(h)?)?;
    thermal_from_energies(&eig.values, beta)
}
