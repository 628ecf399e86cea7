//! Two-qubit process tomography: synthetic datasets, constrained χ-matrix
//! reconstruction, process fidelity and composition.

use std::f64::consts::FRAC_PI_2;
use std::io::{Read, Write};
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{circuit_unitary, Circuit, Gate, GateKind};
use crate::compiler::{compile_evolution, Ordering, TrotterPlan};
use crate::error::{Error, Result};
use crate::linalg::{c, kron, min_eigenvalue, CMatrix, C64};
use crate::pauli::{PauliString, WeightedPauliSum};
use crate::simulator::{apply_circuit, DensityState, NoiseModel, PureState, State};

/// Operator basis order. The first letter acts on qubit 1, the second on
/// qubit 0.
pub const BASIS_LABELS: [&str; 16] = [
    "II", "IX", "IY", "IZ", "XI", "XX", "XY", "XZ", "YI", "YX", "YY", "YZ", "ZI", "ZX", "ZY", "ZZ",
];

pub fn operator_basis() -> &'static [CMatrix] {
    static BASIS: OnceLock<Vec<CMatrix>> = OnceLock::new();
    BASIS.get_or_init(|| {
        BASIS_LABELS
            .iter()
            .map(|l| {
                PauliString::from_label(l)
                    .and_then(|p| p.to_dense())
                    .expect("fixed labels")
            })
            .collect()
    })
}

const TP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessMatrix {
    chi: CMatrix,
}

impl ProcessMatrix {
    pub fn new(chi: CMatrix) -> Result<Self> {
        if chi.shape() != (16, 16) {
            return Err(Error::Dimension {
                expected: 16,
                got: chi.nrows(),
            });
        }
        Ok(Self { chi })
    }

    pub fn chi(&self) -> &CMatrix {
        &self.chi
    }

    /// χ of ρ ↦ UρU† for a 4×4 unitary.
    pub fn from_unitary(u: &CMatrix) -> Result<Self> {
        if u.shape() != (4, 4) {
            return Err(Error::Dimension {
                expected: 4,
                got: u.nrows(),
            });
        }
        let coeffs: Vec<C64> = operator_basis()
            .iter()
            .map(|e| (e.adjoint() * u).trace() / 4.0)
            .collect();
        let v = CMatrix::from_column_slice(16, 1, &coeffs);
        Self::new(&v * v.adjoint())
    }

    pub fn from_circuit(circ: &Circuit) -> Result<Self> {
        if circ.n_qubits() != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: circ.n_qubits(),
            });
        }
        Self::from_unitary(&circuit_unitary(circ)?)
    }

    pub fn identity() -> Self {
        Self::from_unitary(&CMatrix::identity(4, 4)).expect("4×4")
    }

    /// Channel that replaces every input by the maximally mixed state.
    pub fn fully_depolarizing() -> Self {
        Self {
            chi: CMatrix::identity(16, 16).scale(1.0 / 16.0),
        }
    }

    /// ε(ρ) = Σ χ_mn E_m ρ E_n†
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let basis = operator_basis();
        let mut out = CMatrix::zeros(4, 4);
        for m in 0..16 {
            let left = &basis[m] * rho;
            for n in 0..16 {
                let w = self.chi[(m, n)];
                if w.norm() > 0.0 {
                    out += (&left * &basis[n]) * w;
                }
            }
        }
        out
    }

    /// Σ χ_mn E_n† E_m, which is the identity for trace-preserving maps.
    pub fn trace_map(&self) -> CMatrix {
        let basis = operator_basis();
        let mut out = CMatrix::zeros(4, 4);
        for m in 0..16 {
            for n in 0..16 {
                out += (&basis[n] * &basis[m]) * self.chi[(m, n)];
            }
        }
        out
    }

    pub fn trace_deviation(&self) -> f64 {
        crate::linalg::max_abs(&(self.trace_map() - CMatrix::identity(4, 4)))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.chi)
    }

    pub fn is_physical(&self) -> bool {
        crate::linalg::hermitian_deviation(&self.chi) < 1e-10
            && self.min_eigenvalue() >= -1e-8
            && self.trace_deviation() < TP_TOL
    }

    /// Column-stacking superoperator Σ χ_mn conj(E_n) ⊗ E_m.
    pub fn superoperator(&self) -> CMatrix {
        let mut s = CMatrix::zeros(16, 16);
        for (m, n, k) in superoperator_basis() {
            s += k * self.chi[(m, n)];
        }
        s
    }

    pub fn from_superoperator(s: &CMatrix) -> Result<Self> {
        if s.shape() != (16, 16) {
            return Err(Error::Dimension {
                expected: 16,
                got: s.nrows(),
            });
        }
        let mut chi = CMatrix::zeros(16, 16);
        for (m, n, k) in superoperator_basis() {
            chi[(m, n)] = (k.adjoint() * s).trace() / 16.0;
        }
        Self::new(chi)
    }
}

fn superoperator_basis() -> impl Iterator<Item = (usize, usize, &'static CMatrix)> {
    static BASIS: OnceLock<Vec<CMatrix>> = OnceLock::new();
    let all = BASIS.get_or_init(|| {
        let e = operator_basis();
        (0..256)
            .map(|k| kron(&e[k % 16].map(|z| z.conj()), &e[k / 16]))
            .collect()
    });
    all.iter().enumerate().map(|(k, m)| (k / 16, k % 16, m))
}

#[derive(Serialize, Deserialize)]
struct WireChi {
    basis: Vec<String>,
    real: Vec<Vec<f64>>,
    imag: Vec<Vec<f64>>,
}

impl Serialize for ProcessMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows = |f: fn(&C64) -> f64| {
            (0..16)
                .map(|i| (0..16).map(|j| f(&self.chi[(i, j)])).collect())
                .collect()
        };
        WireChi {
            basis: BASIS_LABELS.iter().map(|s| s.to_string()).collect(),
            real: rows(|z| z.re),
            imag: rows(|z| z.im),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProcessMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let wire = WireChi::deserialize(d)?;
        if wire.basis.iter().map(String::as_str).ne(BASIS_LABELS) {
            return Err(D::Error::custom("unexpected operator basis"));
        }
        let ok = |m: &Vec<Vec<f64>>| m.len() == 16 && m.iter().all(|r| r.len() == 16);
        if !ok(&wire.real) || !ok(&wire.imag) {
            return Err(D::Error::custom("χ must be 16×16"));
        }
        let chi = CMatrix::from_fn(16, 16, |i, j| c(wire.real[i][j], wire.imag[i][j]));
        Ok(Self { chi })
    }
}

/// Tr(a·b), real part, clamped to [0, 1].
pub fn process_fidelity(a: &ProcessMatrix, b: &ProcessMatrix) -> f64 {
    let f = (&a.chi * &b.chi).trace().re;
    if !(-1e-6..=1.0 + 1e-6).contains(&f) {
        log::warn!("process fidelity {f} clamped to [0, 1]");
    }
    f.clamp(0.0, 1.0)
}

/// χ of `second ∘ first`.
pub fn compose_processes(first: &ProcessMatrix, second: &ProcessMatrix) -> ProcessMatrix {
    ProcessMatrix::from_superoperator(&(second.superoperator() * first.superoperator())).expect("16×16")
}

/// Removes a reference process (e.g. tomography of a zero-time idle) from a
/// measured one: returns χ with `compose(reference, χ) = measured`.
pub fn divide_reference(measured: &ProcessMatrix, reference: &ProcessMatrix) -> Result<ProcessMatrix> {
    let inv = reference
        .superoperator()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("reference process is not invertible".into()))?;
    ProcessMatrix::from_superoperator(&(measured.superoperator() * inv))
}

/// Single-qubit settings used for both preparation and analysis.
pub const SETTING_GATES: [Option<GateKind>; 4] = [
    None,
    Some(GateKind::Rx(FRAC_PI_2)),
    Some(GateKind::Ry(FRAC_PI_2)),
    Some(GateKind::PiX),
];

/// Two-qubit setting `index = 4·i_q1 + i_q0` as a circuit.
pub fn setting_circuit(index: usize) -> Circuit {
    let mut circ = Circuit::new(2);
    for (q, i) in [(0, index % 4), (1, index / 4 % 4)] {
        if let Some(k) = SETTING_GATES[i] {
            circ.push_unchecked(Gate::one(k, q));
        }
    }
    circ
}

/// Outcome probabilities for every (preparation, analysis) pair. Row
/// `16·prep + meas` holds p00, p01, p10, p11 with index `2·b1 + b0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QptDataset {
    rows: Vec<[f64; 4]>,
}

impl QptDataset {
    pub fn new(rows: Vec<[f64; 4]>) -> Result<Self> {
        if rows.len() != 256 {
            return Err(Error::Dimension {
                expected: 256,
                got: rows.len(),
            });
        }
        for r in &rows {
            if r.iter().any(|&p| !(-1e-9..=1.0 + 1e-9).contains(&p)) {
                return Err(Error::Probability("dataset entry outside [0, 1]".into()));
            }
            if (r.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
                return Err(Error::Probability("dataset row does not sum to 1".into()));
            }
        }
        Ok(Self { rows })
    }

    pub fn row(&self, prep: usize, meas: usize) -> [f64; 4] {
        self.rows[16 * prep + meas]
    }

    pub fn rows(&self) -> &[[f64; 4]] {
        &self.rows
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["prep_index", "meas_index", "p00", "p01", "p10", "p11"])?;
        for (k, r) in self.rows.iter().enumerate() {
            let mut rec = vec![(k / 16).to_string(), (k % 16).to_string()];
            rec.extend(r.iter().map(|p| format!("{p:.12}")));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rows = vec![[f64::NAN; 4]; 256];
        for rec in csv::Reader::from_reader(r).deserialize::<(usize, usize, f64, f64, f64, f64)>() {
            let (prep, meas, a, b, cc, d) = rec?;
            if prep >= 16 || meas >= 16 {
                return Err(Error::Parse(format!("setting index out of range: {prep}, {meas}")));
            }
            rows[16 * prep + meas] = [a, b, cc, d];
        }
        if rows.iter().any(|r| r[0].is_nan()) {
            return Err(Error::Parse("dataset is missing settings".into()));
        }
        Self::new(rows)
    }
}

/// What to run between preparation and analysis.
#[derive(Debug, Clone, Copy)]
pub enum Process<'a> {
    Chi(&'a ProcessMatrix),
    Circuit(&'a Circuit),
}

fn prepared_state(prep: usize) -> PureState {
    match apply_circuit(
        &State::Pure(PureState::basis(2, 0).expect("2 qubits")),
        &setting_circuit(prep),
        None,
    ) {
        Ok(State::Pure(s)) => s,
        _ => unreachable!("noiseless preparation"),
    }
}

fn analysis_probabilities(rho: &DensityState) -> Vec<[f64; 4]> {
    (0..16)
        .map(|meas| {
            let out = apply_circuit(&State::Density(rho.clone()), &setting_circuit(meas), None).expect("2 qubits");
            let p = out.probabilities();
            let total: f64 = p.iter().sum();
            [p[0] / total, p[1] / total, p[2] / total, p[3] / total]
        })
        .collect()
}

/// Ideal preparations and analysis around `process`; noise applies to the
/// process gates only.
pub fn simulate_qpt_dataset(process: Process<'_>, noise: Option<&NoiseModel>) -> Result<QptDataset> {
    if let Process::Circuit(circ) = process {
        if circ.n_qubits() != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: circ.n_qubits(),
            });
        }
    }
    let blocks: Vec<Vec<[f64; 4]>> = (0..16)
        .into_par_iter()
        .map(|prep| -> Result<Vec<[f64; 4]>> {
            let psi = prepared_state(prep);
            let rho = match process {
                Process::Chi(chi) => {
                    let out = chi.apply(psi.to_density().rho());
                    DensityState::new(2, (&out + out.adjoint()).scale(0.5))?
                }
                Process::Circuit(circ) => apply_circuit(&State::Pure(psi), circ, noise)?.to_density(),
            };
            Ok(analysis_probabilities(&rho))
        })
        .collect::<Result<_>>()?;
    QptDataset::new(blocks.into_iter().flatten().collect())
}

/// Per-datum vectors v with model probability vᵀ χ conj(v).
fn design_vectors() -> &'static [[C64; 16]] {
    static DESIGN: OnceLock<Vec<[C64; 16]>> = OnceLock::new();
    DESIGN.get_or_init(|| {
        let basis = operator_basis();
        let mut out = Vec::with_capacity(1024);
        for prep in 0..16 {
            let psi = CMatrix::from_column_slice(4, 1, prepared_state(prep).amplitudes());
            for meas in 0..16 {
                let a = circuit_unitary(&setting_circuit(meas)).expect("2 qubits");
                for b in 0..4 {
                    // ⟨φ| = ⟨b|A
                    let bra = a.row(b).clone_owned();
                    let mut v = [c(0.0, 0.0); 16];
                    for (m, e) in basis.iter().enumerate() {
                        v[m] = (&bra * e * &psi)[(0, 0)];
                    }
                    out.push(v);
                }
            }
        }
        out
    })
}

fn model_probability(v: &[C64; 16], chi: &CMatrix) -> f64 {
    let mut total = c(0.0, 0.0);
    for m in 0..16 {
        let mut row = c(0.0, 0.0);
        for n in 0..16 {
            row += chi[(m, n)] * v[n].conj();
        }
        total += v[m] * row;
    }
    total.re
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructOptions {
    /// Trace-preservation penalty weights, applied in order.
    pub penalty_schedule: Vec<f64>,
    pub max_iters: u64,
    pub history: usize,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            penalty_schedule: vec![1.0, 10.0, 100.0, 1000.0],
            max_iters: 5000,
            history: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub process: ProcessMatrix,
    /// Sum of squared probability residuals.
    pub residual: f64,
    pub iterations: u64,
}

fn unpack(x: &[f64]) -> CMatrix {
    CMatrix::from_fn(16, 16, |i, j| c(x[i + 16 * j], x[256 + i + 16 * j]))
}

fn pack(t: &CMatrix) -> Vec<f64> {
    let mut x = vec![0.0; 512];
    for j in 0..16 {
        for i in 0..16 {
            x[i + 16 * j] = t[(i, j)].re;
            x[256 + i + 16 * j] = t[(i, j)].im;
        }
    }
    x
}

/// Misfit plus λ‖Σ χ_mn E_n†E_m − I‖² over χ = T†T.
struct Objective<'a> {
    data: &'a [f64],
    lambda: f64,
}

impl Objective<'_> {
    fn misfit(&self, chi: &CMatrix) -> f64 {
        design_vectors()
            .iter()
            .zip(self.data)
            .map(|(v, d)| (model_probability(v, chi) - d).powi(2))
            .sum()
    }

    fn evaluate(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let t = unpack(x);
        let chi = t.adjoint() * &t;
        let basis = operator_basis();
        // G is the Hermitian derivative of the cost with respect to χᵀ.
        let mut g = CMatrix::zeros(16, 16);
        let mut cost = 0.0;
        for (v, d) in design_vectors().iter().zip(self.data) {
            let r = model_probability(v, &chi) - d;
            cost += r * r;
            for m in 0..16 {
                for n in 0..16 {
                    g[(m, n)] += v[m].conj() * v[n] * (2.0 * r);
                }
            }
        }
        let dev = ProcessMatrix { chi: chi.clone() }.trace_map() - CMatrix::identity(4, 4);
        cost += self.lambda * dev.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let mut k = CMatrix::zeros(16, 16);
        for m in 0..16 {
            for n in 0..16 {
                k[(m, n)] = (dev.adjoint() * &basis[n] * &basis[m]).trace();
            }
        }
        let kt = k.transpose();
        g += (&kt + kt.adjoint()).scale(self.lambda);
        (cost, pack(&((&t * g).scale(2.0))))
    }
}

struct Problem<'a>(Objective<'a>);

impl argmin::core::CostFunction for Problem<'_> {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, x: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.0.evaluate(x).0)
    }
}

impl argmin::core::Gradient for Problem<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;
    fn gradient(&self, x: &Vec<f64>) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        Ok(self.0.evaluate(x).1)
    }
}

/// Unconstrained least-squares χ over a Hermitian basis.
fn linear_inversion(data: &[f64]) -> CMatrix {
    let mut pairs = Vec::with_capacity(256);
    for m in 0..16 {
        pairs.push((m, m, 0u8));
        for n in m + 1..16 {
            pairs.push((m, n, 1));
            pairs.push((m, n, 2));
        }
    }
    let design = design_vectors();
    let a = nalgebra::DMatrix::<f64>::from_fn(design.len(), pairs.len(), |row, col| {
        let (m, n, kind) = pairs[col];
        let z = design[row][m] * design[row][n].conj();
        match kind {
            0 => z.re,
            1 => 2.0 * z.re,
            _ => -2.0 * z.im,
        }
    });
    let b = nalgebra::DVector::from_column_slice(data);
    let x = a.svd(true, true).solve(&b, 1e-12).expect("SVD with vectors");
    let mut chi = CMatrix::zeros(16, 16);
    for (col, &(m, n, kind)) in pairs.iter().enumerate() {
        match kind {
            0 => chi[(m, m)] = c(x[col], 0.0),
            1 => {
                chi[(m, n)] += c(x[col], 0.0);
                chi[(n, m)] += c(x[col], 0.0);
            }
            _ => {
                chi[(m, n)] += c(0.0, x[col]);
                chi[(n, m)] += c(0.0, -x[col]);
            }
        }
    }
    chi
}

/// Factor T with T†T equal to the PSD part of `chi`, slightly mixed with
/// the identity so that every direction stays reachable.
fn initial_factor(chi: &CMatrix) -> CMatrix {
    let eig = chi.clone().symmetric_eigen();
    let vals: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = vals.iter().sum();
    let mix = 1e-3;
    let vals: Vec<f64> = if total > 0.0 {
        vals.iter().map(|l| (1.0 - mix) * l / total + mix / 16.0).collect()
    } else {
        vec![1.0 / 16.0; 16]
    };
    let sqrt = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        16,
        vals.iter().map(|l| c(l.sqrt(), 0.0)),
    ));
    sqrt * eig.eigenvectors.adjoint()
}

/// Makes the trace map exactly the identity: χ ↦ WχW† for the channel
/// ρ ↦ ε(SρS†) with S = D^{-1/2}, D the current trace map.
fn enforce_trace_preservation(chi: &CMatrix) -> Result<CMatrix> {
    let d = ProcessMatrix { chi: chi.clone() }.trace_map();
    let d = (&d + d.adjoint()).scale(0.5);
    let eig = d.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 1e-12) {
        return Err(Error::Numerical("trace map is singular".into()));
    }
    let inv_sqrt = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        4,
        eig.eigenvalues.iter().map(|l| c(1.0 / l.sqrt(), 0.0)),
    ));
    let s = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint();
    let basis = operator_basis();
    let w = CMatrix::from_fn(16, 16, |p, m| (basis[p].adjoint() * &basis[m] * &s).trace() / 4.0);
    let out = &w * chi * w.adjoint();
    Ok((&out + out.adjoint()).scale(0.5))
}

pub fn reconstruct_chi(data: &QptDataset) -> Result<Reconstruction> {
    reconstruct_chi_with(data, &ReconstructOptions::default())
}

/// Least-squares χ constrained to be Hermitian, positive semidefinite and
/// trace preserving.
pub fn reconstruct_chi_with(data: &QptDataset, opts: &ReconstructOptions) -> Result<Reconstruction> {
    use argmin::core::{Executor, State as _, TerminationReason};
    use argmin::solver::linesearch::MoreThuenteLineSearch;
    use argmin::solver::quasinewton::LBFGS;

    let flat: Vec<f64> = data.rows.iter().flatten().copied().collect();
    let mut x = pack(&initial_factor(&linear_inversion(&flat)));
    let mut iterations = 0;
    let mut capped = false;
    for &lambda in &opts.penalty_schedule {
        let problem = Problem(Objective { data: &flat, lambda });
        let solver = LBFGS::new(MoreThuenteLineSearch::new(), opts.history)
            .with_tolerance_grad(1e-10)
            .and_then(|s| s.with_tolerance_cost(1e-15))
            .map_err(|e| Error::Numerical(e.to_string()))?;
        let start = x.clone();
        let res = Executor::new(problem, solver)
            .configure(|state| state.param(start).max_iters(opts.max_iters))
            .run()
            .map_err(|e| Error::Numerical(format!("optimizer failed: {e}")))?;
        let state = res.state();
        iterations += state.get_iter();
        capped = matches!(state.get_termination_reason(), Some(TerminationReason::MaxItersReached));
        x = state.get_best_param().cloned().unwrap_or(x);
    }
    let t = unpack(&x);
    let objective = Objective {
        data: &flat,
        lambda: 0.0,
    };
    if capped {
        return Err(Error::NoConvergence {
            iterations: iterations as usize,
            residual: objective.misfit(&(t.adjoint() * &t)),
        });
    }
    let chi = enforce_trace_preservation(&(t.adjoint() * &t))?;
    let residual = objective.misfit(&chi);
    Ok(Reconstruction {
        process: ProcessMatrix::new(chi)?,
        residual,
        iterations,
    })
}

/// exp(−iθ/2 (XX + YY)) as a compiled two-qubit circuit.
pub fn exchange_circuit(theta: f64) -> Result<Circuit> {
    let mut h = WeightedPauliSum::new(2);
    h.add_term(c(theta / 2.0, 0.0), PauliString::from_label("XX")?)?;
    h.add_term(c(theta / 2.0, 0.0), PauliString::from_label("YY")?)?;
    compile_evolution(&TrotterPlan::new(h, 1.0, 1, Ordering::CanonicalS5)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnticommutationReport {
    pub f1: f64,
    pub f2: f64,
    pub f_composed: f64,
}

pub struct AnticommutationRun {
    pub report: AnticommutationReport,
    pub datasets: [QptDataset; 2],
    pub reconstructed: [ProcessMatrix; 3],
}

/// Tomography of the two hopping-term unitaries built from opposite orderings
/// of the ladder operators, and of their composition, which is the identity.
/// The first is exp(−i π/2 (b₁b₂† + b₂b₁†)) = exp(−i π/4 (XX + YY)), the
/// second its inverse.
pub fn anticommutation_experiment(noise: Option<&NoiseModel>) -> Result<AnticommutationRun> {
    let circuits = [exchange_circuit(FRAC_PI_2)?, exchange_circuit(-FRAC_PI_2)?];
    let ideal = [
        ProcessMatrix::from_circuit(&circuits[0])?,
        ProcessMatrix::from_circuit(&circuits[1])?,
    ];
    let datasets = [
        simulate_qpt_dataset(Process::Circuit(&circuits[0]), noise)?,
        simulate_qpt_dataset(Process::Circuit(&circuits[1]), noise)?,
    ];
    let first = reconstruct_chi(&datasets[0])?.process;
    let second = reconstruct_chi(&datasets[1])?.process;
    let composed = compose_processes(&first, &second);
    let report = AnticommutationReport {
        f1: process_fidelity(&ideal[0], &first),
        f2: process_fidelity(&ideal[1], &second),
        f_composed: process_fidelity(&ProcessMatrix::identity(), &composed),
    };
    Ok(AnticommutationRun {
        report,
        datasets,
        reconstructed: [first, second, composed],
    })
}
