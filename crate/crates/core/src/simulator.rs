//! Dense state-vector and density-matrix simulation with a depolarizing
//! gate-noise model, exact evolution and occupation readout.

use std::collections::VecDeque;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::circuit::{apply_local, gate_unitary, Census, Circuit, DurationClass, Gate, GateKind};
use crate::error::{Error, Result};
use crate::linalg::{c, check_capacity, expm_hermitian, CMatrix, C64};
use crate::pauli::WeightedPauliSum;

const NORM_TOL: f64 = 1e-10;
const PROB_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n: usize,
    amps: Vec<C64>,
}

impl PureState {
    pub fn new(n: usize, amps: Vec<C64>) -> Result<Self> {
        check_capacity(n)?;
        if amps.len() != 1 << n {
            return Err(Error::Dimension {
                expected: 1 << n,
                got: amps.len(),
            });
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Numerical(format!("state norm {norm} is not 1")));
        }
        Ok(Self { n, amps })
    }

    /// Computational basis state; bit q of `index` is qubit q.
    pub fn basis(n: usize, index: usize) -> Result<Self> {
        check_capacity(n)?;
        let mut amps = vec![c(0.0, 0.0); 1 << n];
        *amps.get_mut(index).ok_or(Error::Dimension {
            expected: 1 << n,
            got: index,
        })? = c(1.0, 0.0);
        Ok(Self { n, amps })
    }

    /// Superposition of occupation patterns, normalized. `occ[k]` is the
    /// occupation of mode k; an occupied mode is its qubit's |0⟩.
    pub fn from_occupations(n: usize, terms: &[(C64, Vec<bool>)]) -> Result<Self> {
        check_capacity(n)?;
        let mut amps = vec![c(0.0, 0.0); 1 << n];
        for (a, occ) in terms {
            if occ.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: occ.len(),
                });
            }
            let idx = occ
                .iter()
                .enumerate()
                .filter(|(_, &o)| !o)
                .map(|(q, _)| 1 << q)
                .sum::<usize>();
            amps[idx] += a;
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Numerical("empty superposition".into()));
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { n, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn overlap(&self, other: &PureState) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn to_density(&self) -> DensityState {
        let v = CMatrix::from_column_slice(self.amps.len(), 1, &self.amps);
        DensityState {
            n: self.n,
            rho: &v * v.adjoint(),
        }
    }

    fn apply_gate(&mut self, g: &Gate) {
        if !g.kind.is_identity_like() {
            apply_local(&mut self.amps, &g.targets, &gate_unitary(g));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    n: usize,
    rho: CMatrix,
}

impl DensityState {
    pub fn new(n: usize, rho: CMatrix) -> Result<Self> {
        check_capacity(n)?;
        let dim = 1 << n;
        if rho.shape() != (dim, dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: rho.nrows(),
            });
        }
        if crate::linalg::hermitian_deviation(&rho) > NORM_TOL {
            return Err(Error::NotHermitian(crate::linalg::hermitian_deviation(&rho)));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(Error::Numerical(format!("trace {tr} is not 1")));
        }
        Ok(Self { n, rho })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.rho.diagonal().iter().map(|z| z.re.max(0.0)).collect()
    }

    fn apply_gate(&mut self, g: &Gate) {
        if g.kind.is_identity_like() {
            return;
        }
        let u = gate_unitary(g);
        let dim = self.rho.nrows();
        // ρ → UρU†: act on the columns of ρ, then on those of (Uρ)† = ρU†.
        for pass in 0..2 {
            for j in 0..dim {
                let mut col: Vec<C64> = self.rho.column(j).iter().copied().collect();
                apply_local(&mut col, &g.targets, &u);
                self.rho.set_column(j, &nalgebra::DVector::from_vec(col));
            }
            if pass == 0 {
                self.rho.adjoint_mut();
            }
        }
    }

    /// ρ → (1−p)ρ + p·Tr_S(ρ)⊗I_S/d_S on the qubits in `support`.
    pub fn depolarize(&mut self, support: &[usize], p: f64) {
        if p == 0.0 {
            return;
        }
        let mask: usize = support.iter().map(|q| 1usize << q).sum();
        let d = 1usize << support.len();
        let dim = self.rho.nrows();
        let sub_states: Vec<usize> = (0..dim).filter(|s| s & !mask == 0).collect();
        let mut mixed = CMatrix::zeros(dim, dim);
        for i in (0..dim).filter(|i| i & mask == 0) {
            for j in (0..dim).filter(|j| j & mask == 0) {
                let traced: C64 = sub_states.iter().map(|&s| self.rho[(i | s, j | s)]).sum();
                for &s in &sub_states {
                    mixed[(i | s, j | s)] = traced / d as f64;
                }
            }
        }
        self.rho = self.rho.scale(1.0 - p) + mixed.scale(p);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Pure(PureState),
    Density(DensityState),
}

impl State {
    pub fn n_qubits(&self) -> usize {
        match self {
            State::Pure(s) => s.n,
            State::Density(s) => s.n,
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        match self {
            State::Pure(s) => s.probabilities(),
            State::Density(s) => s.probabilities(),
        }
    }

    pub fn to_density(&self) -> DensityState {
        match self {
            State::Pure(s) => s.to_density(),
            State::Density(s) => s.clone(),
        }
    }
}

impl From<PureState> for State {
    fn from(s: PureState) -> Self {
        State::Pure(s)
    }
}

impl From<DensityState> for State {
    fn from(s: DensityState) -> Self {
        State::Density(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    #[default]
    Depolarizing,
}

/// Average gate errors; each physical gate is followed by a depolarizing
/// channel whose average error equals the gate's eps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub eps_2q: f64,
    pub eps_1q: f64,
    #[serde(default)]
    pub channel_kind: ChannelKind,
}

impl NoiseModel {
    pub const REFERENCE_EPS_2Q: f64 = 7.4e-3;
    pub const REFERENCE_EPS_1Q: f64 = 8e-4;

    pub fn new(eps_2q: f64, eps_1q: f64) -> Result<Self> {
        let model = Self {
            eps_2q,
            eps_1q,
            channel_kind: ChannelKind::Depolarizing,
        };
        model.validate()?;
        Ok(model)
    }

    /// Typical hardware gate errors.
    pub fn reference() -> Self {
        Self::new(Self::REFERENCE_EPS_2Q, Self::REFERENCE_EPS_1Q).expect("valid constants")
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.eps_2q * factor, self.eps_1q * factor)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, eps, d) in [("eps_2q", self.eps_2q, 4.0), ("eps_1q", self.eps_1q, 2.0)] {
            if !(0.0..=1.0).contains(&eps) || eps.is_nan() {
                return Err(Error::config(field, "must lie in [0, 1]"));
            }
            if eps * d / (d - 1.0) > 1.0 + 1e-12 {
                return Err(Error::config(field, "exceeds full depolarization"));
            }
        }
        Ok(())
    }

    /// Depolarizing probability after `g`, zero for virtual gates.
    pub fn channel_probability(&self, g: &Gate) -> f64 {
        match g.kind.duration_class() {
            DurationClass::Virtual => 0.0,
            DurationClass::Entangling => (self.eps_2q * 4.0 / 3.0).min(1.0),
            _ => (self.eps_1q * 2.0).min(1.0),
        }
    }
}

/// Runs `circ` on `state`. Noise promotes the state to a density matrix.
pub fn apply_circuit(state: &State, circ: &Circuit, noise: Option<&NoiseModel>) -> Result<State> {
    if circ.n_qubits() != state.n_qubits() {
        return Err(Error::Dimension {
            expected: state.n_qubits(),
            got: circ.n_qubits(),
        });
    }
    match (state, noise) {
        (State::Pure(s), None) => {
            let mut out = s.clone();
            circ.gates().iter().for_each(|g| out.apply_gate(g));
            Ok(State::Pure(out))
        }
        _ => {
            let mut rho = state.to_density();
            for g in circ.gates() {
                rho.apply_gate(g);
                if let Some(model) = noise {
                    rho.depolarize(&g.targets, model.channel_probability(g));
                }
            }
            Ok(State::Density(rho))
        }
    }
}

/// exp(−iHt)|ψ⟩ by dense eigendecomposition.
pub fn exact_evolve(h: &WeightedPauliSum, t: f64, state: &PureState) -> Result<PureState> {
    if h.n_qubits() != state.n {
        return Err(Error::Dimension {
            expected: state.n,
            got: h.n_qubits(),
        });
    }
    let u = expm_hermitian(&h.to_dense()?, t)?;
    let v = u * CMatrix::from_column_slice(state.amps.len(), 1, &state.amps);
    Ok(PureState {
        n: state.n,
        amps: v.iter().copied().collect(),
    })
}

/// Probability that each mode is occupied, read from basis probabilities.
pub fn mode_occupations(probs: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|q| {
            probs
                .iter()
                .enumerate()
                .filter(|(i, _)| i & (1 << q) == 0)
                .map(|(_, p)| p)
                .sum()
        })
        .collect()
}

/// Classical fidelity (Σ√(p·q))² between two distributions.
pub fn state_fidelity(ideal: &[f64], measured: &[f64]) -> Result<f64> {
    if ideal.len() != measured.len() {
        return Err(Error::Dimension {
            expected: ideal.len(),
            got: measured.len(),
        });
    }
    let normalize = |p: &[f64]| -> Result<Vec<f64>> {
        if p.iter().any(|&x| x < -PROB_TOL || !x.is_finite()) {
            return Err(Error::Probability("negative or non-finite probability".into()));
        }
        let total: f64 = p.iter().map(|x| x.max(0.0)).sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::Probability(format!("probabilities sum to {total}")));
        }
        Ok(p.iter().map(|x| x.max(0.0) / total).collect())
    };
    let (a, b) = (normalize(ideal)?, normalize(measured)?);
    let bc: f64 = a.iter().zip(&b).map(|(x, y)| (x * y).sqrt()).sum();
    Ok((bc * bc).clamp(0.0, 1.0))
}

/// Expected process error of a step: every gate, virtual ones included,
/// contributes its class error once.
pub fn error_budget(census: &Census, noise: &NoiseModel) -> f64 {
    census.entangling as f64 * noise.eps_2q + census.single_qubit as f64 * noise.eps_1q
}

/// Basis states reachable from the support of `start` through nonzero
/// matrix elements of `h`.
pub fn accessible_subspace(h: &WeightedPauliSum, start: &[f64]) -> Result<Vec<bool>> {
    let dense = h.to_dense()?;
    let dim = dense.nrows();
    if start.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: start.len(),
        });
    }
    let mut seen = vec![false; dim];
    let mut queue: VecDeque<usize> = (0..dim).filter(|&i| start[i] > 1e-12).collect();
    queue.iter().for_each(|&i| seen[i] = true);
    while let Some(i) = queue.pop_front() {
        for j in 0..dim {
            if !seen[j] && dense[(j, i)].norm() > 1e-12 {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    Ok(seen)
}

/// Probability outside the accessible subspace.
pub fn other_population(probs: &[f64], accessible: &[bool]) -> f64 {
    let inside: f64 = probs.iter().zip(accessible).filter(|(_, &a)| a).map(|(p, _)| p).sum();
    (1.0 - inside).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    TwoMode,
    ThreeMode,
    FourMode,
}

impl InputKind {
    pub fn modes(self) -> usize {
        match self {
            InputKind::TwoMode => 2,
            InputKind::ThreeMode => 3,
            InputKind::FourMode => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrepMethod {
    Direct,
    Circuit,
}

fn target_state(kind: InputKind) -> PureState {
    let one = c(1.0, 0.0);
    let terms: Vec<(C64, Vec<bool>)> = match kind {
        InputKind::TwoMode => vec![(one, vec![false, true]), (one, vec![true, true])],
        InputKind::ThreeMode => vec![(one, vec![true, false, true]), (one, vec![true, true, false])],
        InputKind::FourMode => {
            let pair = [[false, true], [true, false]];
            let mut v = Vec::new();
            for a in pair {
                for b in pair {
                    v.push((one, vec![a[0], a[1], b[0], b[1]]));
                }
            }
            v
        }
    };
    PureState::from_occupations(kind.modes(), &terms).expect("fixed targets")
}

/// Single-excitation pair (|01⟩ + |10⟩)/√2 on (a, b) from |00⟩.
fn push_pair_prep(circ: &mut Circuit, a: usize, b: usize) {
    circ.push_unchecked(Gate::one(GateKind::Ry(FRAC_PI_2), a));
    circ.push_unchecked(Gate::one(GateKind::Ry(-FRAC_PI_2), b));
    circ.push_unchecked(Gate::cz_phi(std::f64::consts::PI, a, b));
    circ.push_unchecked(Gate::one(GateKind::Ry(FRAC_PI_2), b));
    circ.push_unchecked(Gate::one(GateKind::PiX, b));
}

/// Gate sequence preparing an input state from the all-|0⟩ register.
pub fn preparation_circuit(kind: InputKind) -> Circuit {
    let mut circ = Circuit::new(kind.modes());
    match kind {
        InputKind::TwoMode => circ.push_unchecked(Gate::one(GateKind::Ry(FRAC_PI_2), 0)),
        InputKind::ThreeMode => push_pair_prep(&mut circ, 1, 2),
        InputKind::FourMode => {
            push_pair_prep(&mut circ, 0, 1);
            push_pair_prep(&mut circ, 2, 3);
        }
    }
    circ
}

pub fn prepare_input(kind: InputKind, method: PrepMethod) -> Result<PureState> {
    match method {
        PrepMethod::Direct => Ok(target_state(kind)),
        PrepMethod::Circuit => {
            let start = State::Pure(PureState::basis(kind.modes(), 0)?);
            match apply_circuit(&start, &preparation_circuit(kind), None)? {
                State::Pure(s) => Ok(s),
                State::Density(_) => unreachable!("noiseless pure path"),
            }
        }
    }
}
