//! Pauli strings and weighted sums of Pauli strings.
//!
//! A string's factors are stored by qubit index (`factors[q]` acts on qubit
//! `q`). Text labels and dense matrices use tensor notation, where the
//! leftmost factor acts on the highest-index qubit; [`slot_of_qubit`] is the
//! single place that conversion lives.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, check_capacity, hermitian_deviation, max_abs, CMatrix, C64};

/// Coefficient comparisons in this module use this absolute tolerance.
pub const COEFF_TOL: f64 = 1e-12;

/// Position of qubit `q` inside an `n`-character tensor label.
#[inline]
pub fn slot_of_qubit(n: usize, q: usize) -> usize {
    n - 1 - q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Factor {
    I,
    X,
    Y,
    Z,
    /// (X + iY)/2
    Raise,
    /// (X - iY)/2
    Lower,
}

impl Factor {
    pub fn symbol(self) -> char {
        match self {
            Factor::I => 'I',
            Factor::X => 'X',
            Factor::Y => 'Y',
            Factor::Z => 'Z',
            Factor::Raise => '+',
            Factor::Lower => '-',
        }
    }

    pub fn from_symbol(ch: char) -> Result<Self> {
        Ok(match ch {
            'I' => Factor::I,
            'X' => Factor::X,
            'Y' => Factor::Y,
            'Z' => Factor::Z,
            '+' => Factor::Raise,
            '-' => Factor::Lower,
            other => return Err(Error::Parse(other.to_string())),
        })
    }

    pub fn is_ladder(self) -> bool {
        matches!(self, Factor::Raise | Factor::Lower)
    }

    pub fn adjoint(self) -> Self {
        match self {
            Factor::Raise => Factor::Lower,
            Factor::Lower => Factor::Raise,
            f => f,
        }
    }

    pub fn matrix(self) -> CMatrix {
        let o = c(0.0, 0.0);
        let l = c(1.0, 0.0);
        let i = c(0.0, 1.0);
        let entries = match self {
            Factor::I => [l, o, o, l],
            Factor::X => [o, l, l, o],
            Factor::Y => [o, -i, i, o],
            Factor::Z => [l, o, o, -l],
            Factor::Raise => [o, l, o, o],
            Factor::Lower => [o, o, l, o],
        };
        CMatrix::from_row_slice(2, 2, &entries)
    }

    /// Pauli decomposition: list of (coefficient, Pauli factor).
    fn pauli_expansion(self) -> Vec<(C64, Factor)> {
        match self {
            Factor::Raise => vec![(c(0.5, 0.0), Factor::X), (c(0.0, 0.5), Factor::Y)],
            Factor::Lower => vec![(c(0.5, 0.0), Factor::X), (c(0.0, -0.5), Factor::Y)],
            f => vec![(c(1.0, 0.0), f)],
        }
    }

    /// Product of two Pauli factors as (phase, factor).
    fn pauli_product(a: Factor, b: Factor) -> (C64, Factor) {
        use Factor::*;
        let i = c(0.0, 1.0);
        match (a, b) {
            (I, f) | (f, I) => (c(1.0, 0.0), f),
            (X, X) | (Y, Y) | (Z, Z) => (c(1.0, 0.0), I),
            (X, Y) => (i, Z),
            (Y, X) => (-i, Z),
            (Y, Z) => (i, X),
            (Z, Y) => (-i, X),
            (Z, X) => (i, Y),
            (X, Z) => (-i, Y),
            _ => unreachable!("ladder factors are rejected before this point"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PauliString {
    factors: Vec<Factor>,
    phase: C64,
}

impl PauliString {
    pub fn new(factors: Vec<Factor>, phase: C64) -> Self {
        Self { factors, phase }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(vec![Factor::I; n], c(1.0, 0.0))
    }

    /// `f` on qubit `q`, identity elsewhere.
    pub fn single(n: usize, q: usize, f: Factor) -> Self {
        let mut s = Self::identity(n);
        s.factors[q] = f;
        s
    }

    /// Parses a tensor-notation label such as `"IXZ"` (leftmost = highest qubit).
    pub fn from_label(label: &str) -> Result<Self> {
        let chars: Vec<char> = label.chars().collect();
        let n = chars.len();
        if n == 0 {
            return Err(Error::Parse(label.to_string()));
        }
        let mut factors = vec![Factor::I; n];
        for q in 0..n {
            factors[q] = Factor::from_symbol(chars[slot_of_qubit(n, q)])?;
        }
        Ok(Self::new(factors, c(1.0, 0.0)))
    }

    pub fn label(&self) -> String {
        let n = self.factors.len();
        (0..n)
            .map(|slot| self.factors[slot_of_qubit(n, slot)].symbol())
            .collect()
    }

    pub fn n_qubits(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, q: usize) -> Factor {
        self.factors[q]
    }

    pub fn phase(&self) -> C64 {
        self.phase
    }

    pub fn with_phase(mut self, phase: C64) -> Self {
        self.phase = phase;
        self
    }

    pub fn has_ladder(&self) -> bool {
        self.factors.iter().any(|f| f.is_ladder())
    }

    /// Strings without ladder factors are unitary.
    pub fn is_unitary(&self) -> bool {
        !self.has_ladder() && (self.phase.norm() - 1.0).abs() <= COEFF_TOL
    }

    pub fn is_identity(&self) -> bool {
        self.factors.iter().all(|f| *f == Factor::I)
    }

    /// Qubits carrying a non-identity factor, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.factors.len())
            .filter(|&q| self.factors[q] != Factor::I)
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.factors.iter().map(|f| f.adjoint()).collect(), self.phase.conj())
    }

    /// Product `self · other` with accumulated phase.
    pub fn multiply(&self, other: &PauliString) -> Result<PauliString> {
        if self.n_qubits() != other.n_qubits() {
            return Err(Error::Dimension {
                expected: self.n_qubits(),
                got: other.n_qubits(),
            });
        }
        for s in [self, other] {
            if s.has_ladder() {
                return Err(Error::LadderFactor(s.label()));
            }
        }
        let mut phase = self.phase * other.phase;
        let factors = self
            .factors
            .iter()
            .zip(&other.factors)
            .map(|(&a, &b)| {
                let (p, f) = Factor::pauli_product(a, b);
                phase *= p;
                f
            })
            .collect();
        Ok(PauliString::new(factors, phase))
    }

    pub fn to_dense(&self) -> Result<CMatrix> {
        let n = self.n_qubits();
        check_capacity(n)?;
        let mut m = CMatrix::from_element(1, 1, self.phase);
        for slot in 0..n {
            m = m.kronecker(&self.factors[slot_of_qubit(n, slot)].matrix());
        }
        Ok(m)
    }

    /// Rewrites ladder factors as Pauli combinations.
    pub fn expand(&self) -> WeightedPauliSum {
        let n = self.n_qubits();
        let mut partial: Vec<(C64, Vec<Factor>)> = vec![(self.phase, Vec::with_capacity(n))];
        for f in &self.factors {
            let exp = f.pauli_expansion();
            partial = partial
                .into_iter()
                .flat_map(|(coef, fs)| {
                    exp.iter().map(move |(ec, ef)| {
                        let mut next = fs.clone();
                        next.push(*ef);
                        (coef * ec, next)
                    })
                })
                .collect();
        }
        let mut sum = WeightedPauliSum::new(n);
        for (coef, fs) in partial {
            sum.push(coef, PauliString::new(fs, c(1.0, 0.0)));
        }
        sum.simplified()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if (self.phase - c(1.0, 0.0)).norm() > COEFF_TOL {
            write!(f, "({:.4}{:+.4}i)", self.phase.re, self.phase.im)?;
        }
        write!(f, "{}", self.label())
    }
}

/// Σ c_k P_k + offset·I over a fixed number of qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPauliSum {
    n: usize,
    offset: f64,
    terms: Vec<(C64, PauliString)>,
    hermitian: bool,
}

impl WeightedPauliSum {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            offset: 0.0,
            terms: Vec::new(),
            hermitian: false,
        }
    }

    pub fn from_terms(n: usize, offset: f64, terms: Vec<(C64, PauliString)>) -> Result<Self> {
        let mut sum = Self::new(n);
        sum.offset = offset;
        for (coef, p) in terms {
            sum.add_term(coef, p)?;
        }
        Ok(sum)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn set_offset(&mut self, offset: f64) {
        self.offset = offset;
        self.hermitian = false;
    }

    pub fn terms(&self) -> &[(C64, PauliString)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.offset.abs() <= COEFF_TOL && self.terms.iter().all(|(c, _)| c.norm() <= COEFF_TOL)
    }

    /// Set only by [`WeightedPauliSum::verify_hermitian`].
    pub fn is_marked_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Appends a term; the string's own phase is folded into the coefficient.
    pub fn add_term(&mut self, coef: C64, p: PauliString) -> Result<()> {
        if p.n_qubits() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: p.n_qubits(),
            });
        }
        self.push(coef, p);
        Ok(())
    }

    fn push(&mut self, coef: C64, p: PauliString) {
        let phase = p.phase;
        self.terms.push((coef * phase, p.with_phase(c(1.0, 0.0))));
        self.hermitian = false;
    }

    /// Merges equal strings, drops negligible terms and moves a real identity
    /// coefficient into the offset.
    pub fn simplified(&self) -> Self {
        let mut merged: BTreeMap<Vec<Factor>, C64> = BTreeMap::new();
        let mut order: Vec<Vec<Factor>> = Vec::new();
        for (coef, p) in &self.terms {
            let key = p.factors.clone();
            if !merged.contains_key(&key) {
                order.push(key.clone());
            }
            *merged.entry(key).or_insert(c(0.0, 0.0)) += *coef;
        }
        let mut out = Self::new(self.n);
        out.offset = self.offset;
        for key in order {
            let coef = merged[&key];
            let p = PauliString::new(key, c(1.0, 0.0));
            if p.is_identity() && coef.im.abs() <= COEFF_TOL {
                out.offset += coef.re;
                continue;
            }
            if coef.norm() > COEFF_TOL {
                out.terms.push((coef, p));
            }
        }
        if out.offset.abs() <= COEFF_TOL {
            out.offset = 0.0;
        }
        out
    }

    /// Same operator with every ladder factor rewritten in Paulis.
    pub fn expanded(&self) -> Self {
        let mut out = Self::new(self.n);
        out.offset = self.offset;
        for (coef, p) in &self.terms {
            for (ec, ep) in p.expand().terms {
                out.push(coef * ec, ep);
            }
            let e = p.expand();
            if e.offset != 0.0 {
                out.push(coef * e.offset, PauliString::identity(self.n));
            }
        }
        out.simplified()
    }

    fn all_terms_with_identity(&self) -> Vec<(C64, PauliString)> {
        let mut v = self.terms.clone();
        if self.offset != 0.0 {
            v.push((c(self.offset, 0.0), PauliString::identity(self.n)));
        }
        v
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut out = self.clone();
        out.offset += other.offset;
        for (coef, p) in &other.terms {
            out.push(*coef, p.clone());
        }
        Ok(out.simplified())
    }

    pub fn scale(&self, factor: C64) -> Self {
        let mut out = Self::new(self.n);
        for (coef, p) in self.all_terms_with_identity() {
            out.push(coef * factor, p);
        }
        out.simplified()
    }

    /// Operator product `self · other`, expanded into Pauli strings.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let a = self.expanded().all_terms_with_identity();
        let b = other.expanded().all_terms_with_identity();
        let mut out = Self::new(self.n);
        for (ca, pa) in &a {
            for (cb, pb) in &b {
                let prod = pa.multiply(pb)?;
                out.push(ca * cb, prod);
            }
        }
        Ok(out.simplified())
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::new(self.n);
        out.offset = self.offset;
        for (coef, p) in &self.terms {
            out.push(coef.conj(), p.adjoint());
        }
        out
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: other.n,
            });
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Result<CMatrix> {
        check_capacity(self.n)?;
        let dim = 1usize << self.n;
        let mut m = CMatrix::identity(dim, dim).map(|z| z * self.offset);
        for (coef, p) in &self.terms {
            m += p.to_dense()?.map(|z| z * coef);
        }
        Ok(m)
    }

    /// Checks Hermiticity on the dense matrix and records the result.
    pub fn verify_hermitian(mut self) -> Result<Self> {
        let dev = hermitian_deviation(&self.to_dense()?);
        if dev > COEFF_TOL {
            return Err(Error::NotHermitian(dev));
        }
        self.hermitian = true;
        Ok(self)
    }

    /// Dense commutator test with tolerance 1e-12.
    pub fn commutes(&self, other: &Self) -> Result<bool> {
        self.check_dim(other)?;
        let a = self.to_dense()?;
        let b = other.to_dense()?;
        Ok(max_abs(&(&a * &b - &b * &a)) <= COEFF_TOL)
    }
}

impl From<PauliString> for WeightedPauliSum {
    fn from(p: PauliString) -> Self {
        let mut s = Self::new(p.n_qubits());
        s.push(c(1.0, 0.0), p);
        s
    }
}

impl fmt::Display for WeightedPauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}·I", self.offset)?;
        for (coef, p) in &self.terms {
            write!(f, " + ({:.6}{:+.6}i)·{}", coef.re, coef.im, p.label())?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct WireTerm {
    c: [f64; 2],
    p: String,
}

#[derive(Serialize, Deserialize)]
struct WireSum {
    n: usize,
    offset: f64,
    terms: Vec<WireTerm>,
}

impl Serialize for WeightedPauliSum {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        WireSum {
            n: self.n,
            offset: self.offset,
            terms: self
                .terms
                .iter()
                .map(|(coef, p)| WireTerm {
                    c: [coef.re, coef.im],
                    p: p.label(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeightedPauliSum {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let wire = WireSum::deserialize(d)?;
        let mut sum = WeightedPauliSum::new(wire.n);
        sum.offset = wire.offset;
        for t in wire.terms {
            let p = PauliString::from_label(&t.p).map_err(D::Error::custom)?;
            sum.add_term(c(t.c[0], t.c[1]), p).map_err(D::Error::custom)?;
        }
        Ok(sum)
    }
}
