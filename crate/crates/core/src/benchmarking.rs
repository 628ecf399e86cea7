//! Clifford groups and (interleaved) randomized benchmarking on two qubits.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{circuit_unitary, Circuit, Gate, GateKind};
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix};
use crate::simulator::{apply_circuit, NoiseModel, PureState, State};

#[derive(Debug, Clone, PartialEq)]
pub struct CliffordElement {
    pub index: usize,
    /// Shortest generator word, earliest gate first.
    pub gates: Vec<Gate>,
    pub unitary: CMatrix,
}

#[derive(Debug)]
pub struct CliffordGroup {
    n: usize,
    elements: Vec<CliffordElement>,
    lookup: HashMap<Vec<(i64, i64)>, usize>,
    inverses: Vec<usize>,
}

/// Unitary with its global phase fixed by the first sizeable entry, rounded
/// to a grid fine enough to separate Clifford matrices.
fn canonical_key(u: &CMatrix) -> Vec<(i64, i64)> {
    let pivot = u.iter().find(|z| z.norm() > 1e-3).copied().unwrap_or(c(1.0, 0.0));
    let phase = pivot.conj() / pivot.norm();
    u.iter()
        .map(|z| {
            let w = z * phase;
            ((w.re * 1e6).round() as i64, (w.im * 1e6).round() as i64)
        })
        .collect()
}

fn generators(n: usize) -> Vec<Gate> {
    let mut g = Vec::new();
    for q in 0..n {
        g.push(Gate::one(GateKind::Rx(FRAC_PI_2), q));
        g.push(Gate::one(GateKind::Ry(FRAC_PI_2), q));
    }
    if n == 2 {
        g.push(Gate::cz_phi(PI, 0, 1));
    }
    g
}

impl CliffordGroup {
    /// Breadth-first closure of the generators {X/2, Y/2 per qubit, CZ}.
    pub fn generate(n: usize) -> Result<Self> {
        if !(1..=2).contains(&n) {
            return Err(Error::config("qubits", "Clifford tables exist for 1 or 2 qubits"));
        }
        let gens: Vec<(Gate, CMatrix)> = generators(n)
            .into_iter()
            .map(|g| {
                let u = circuit_unitary(&Circuit::from_gates(n, vec![g.clone()]).expect("valid gate")).expect("small");
                (g, u)
            })
            .collect();
        let dim = 1 << n;
        let identity = CliffordElement {
            index: 0,
            gates: Vec::new(),
            unitary: CMatrix::identity(dim, dim),
        };
        let mut lookup = HashMap::new();
        lookup.insert(canonical_key(&identity.unitary), 0);
        let mut elements = vec![identity];
        let mut frontier = 0;
        while frontier < elements.len() {
            for (g, gu) in &gens {
                let u = gu * &elements[frontier].unitary;
                let key = canonical_key(&u);
                if !lookup.contains_key(&key) {
                    let mut gates = elements[frontier].gates.clone();
                    gates.push(g.clone());
                    lookup.insert(key, elements.len());
                    elements.push(CliffordElement {
                        index: elements.len(),
                        gates,
                        unitary: u,
                    });
                }
            }
            frontier += 1;
            if elements.len() > 20_000 {
                return Err(Error::Numerical("Clifford closure did not terminate".into()));
            }
        }
        let mut group = Self {
            n,
            elements,
            lookup,
            inverses: Vec::new(),
        };
        group.inverses = (0..group.elements.len())
            .map(|i| {
                group
                    .index_of(&group.elements[i].unitary.adjoint())
                    .ok_or_else(|| Error::Numerical("group is not closed under inversion".into()))
            })
            .collect::<Result<_>>()?;
        Ok(group)
    }

    /// Cached two-qubit group.
    pub fn two_qubit() -> &'static CliffordGroup {
        static GROUP: OnceLock<CliffordGroup> = OnceLock::new();
        GROUP.get_or_init(|| Self::generate(2).expect("closure"))
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element(&self, i: usize) -> &CliffordElement {
        &self.elements[i]
    }

    pub fn inverse(&self, i: usize) -> usize {
        self.inverses[i]
    }

    /// Group index of a unitary, ignoring global phase.
    pub fn index_of(&self, u: &CMatrix) -> Option<usize> {
        self.lookup.get(&canonical_key(u)).copied()
    }

    /// Index of `b · a`.
    pub fn compose(&self, a: usize, b: usize) -> usize {
        self.index_of(&(&self.elements[b].unitary * &self.elements[a].unitary))
            .expect("closed group")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RbTag {
    Ref,
    Interleaved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbPoint {
    pub m: usize,
    pub mean_fidelity: f64,
    pub stderr: f64,
    pub tag: RbTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbConfig {
    pub m_values: Vec<usize>,
    pub k_sequences: usize,
    pub seed: u64,
}

impl Default for RbConfig {
    fn default() -> Self {
        Self {
            m_values: vec![1, 5, 10, 20, 40, 60],
            k_sequences: 50,
            seed: 0,
        }
    }
}

/// Random sequences of `m` two-qubit Cliffords, optionally each followed by
/// `interleaved`, closed by the recovery Clifford. Returns the mean return
/// probability to |00⟩ per length.
pub fn rb_run(cfg: &RbConfig, interleaved: Option<&Circuit>, noise: Option<&NoiseModel>) -> Result<Vec<RbPoint>> {
    if cfg.k_sequences == 0 || cfg.m_values.is_empty() {
        return Err(Error::config("rb", "need at least one length and one sequence"));
    }
    let group = CliffordGroup::two_qubit();
    let inter = match interleaved {
        Some(circ) => {
            if circ.n_qubits() != 2 {
                return Err(Error::Dimension {
                    expected: 2,
                    got: circ.n_qubits(),
                });
            }
            let u = circuit_unitary(circ)?;
            let idx = group.index_of(&u).ok_or_else(|| {
                let diag: Vec<String> = (0..4).map(|i| format!("{:.4}", u[(i, i)])).collect();
                Error::NotClifford(format!("interleaved unitary with diagonal [{}]", diag.join(", ")))
            })?;
            Some((circ, idx))
        }
        None => None,
    };
    let tag = if inter.is_some() {
        RbTag::Interleaved
    } else {
        RbTag::Ref
    };

    cfg.m_values
        .iter()
        .map(|&m| {
            let fids: Vec<f64> = (0..cfg.k_sequences)
                .into_par_iter()
                .map(|s| -> Result<f64> {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream(((m as u64) << 32) | s as u64);
                    let mut circ = Circuit::new(2);
                    let mut total = 0;
                    for _ in 0..m {
                        let k = rng.gen_range(0..group.len());
                        for g in &group.element(k).gates {
                            circ.push_unchecked(g.clone());
                        }
                        total = group.compose(total, k);
                        if let Some((ic, idx)) = inter {
                            circ.extend(ic)?;
                            total = group.compose(total, idx);
                        }
                    }
                    for g in &group.element(group.inverse(total)).gates {
                        circ.push_unchecked(g.clone());
                    }
                    let out = apply_circuit(&State::Pure(PureState::basis(2, 0)?), &circ, noise)?;
                    Ok(out.probabilities()[0])
                })
                .collect::<Result<_>>()?;
            let k = fids.len() as f64;
            let mean = fids.iter().sum::<f64>() / k;
            let var = if fids.len() > 1 {
                fids.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            Ok(RbPoint {
                m,
                mean_fidelity: mean,
                stderr: (var / k).sqrt(),
                tag,
            })
        })
        .collect()
}

pub fn write_rb_csv<W: std::io::Write>(points: &[RbPoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["m", "mean_fidelity", "stderr", "tag"])?;
    for p in points {
        let tag = match p.tag {
            RbTag::Ref => "ref",
            RbTag::Interleaved => "interleaved",
        };
        out.write_record([
            p.m.to_string(),
            format!("{:.12}", p.mean_fidelity),
            format!("{:.12}", p.stderr),
            tag.into(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    /// Row-major 3×3 covariance of (A, B, p).
    pub covariance: [[f64; 3]; 3],
    pub residual: f64,
}

impl DecayFit {
    pub fn p_sigma(&self) -> f64 {
        self.covariance[2][2].max(0.0).sqrt()
    }
}

/// Best A, B for fixed p and the resulting squared residual.
fn linear_part(points: &[(f64, f64)], p: f64) -> (f64, f64, f64) {
    let a = nalgebra::DMatrix::from_fn(points.len(), 2, |i, j| if j == 0 { p.powf(points[i].0) } else { 1.0 });
    let y = nalgebra::DVector::from_iterator(points.len(), points.iter().map(|q| q.1));
    let x = a.clone().svd(true, true).solve(&y, 1e-12).expect("SVD with vectors");
    let r = &a * &x - &y;
    (x[0], x[1], r.norm_squared())
}

/// Least-squares fit of F(m) = A·p^m + B with 0 ≤ p ≤ 1.
pub fn fit_decay(points: &[(usize, f64)]) -> Result<DecayFit> {
    let mut distinct: Vec<usize> = points.iter().map(|p| p.0).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Fit("need at least three distinct sequence lengths".into()));
    }
    if points.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::Fit("non-finite sequence fidelity".into()));
    }
    let pts: Vec<(f64, f64)> = points.iter().map(|&(m, f)| (m as f64, f)).collect();
    let cost = |p: f64| linear_part(&pts, p).2;

    // Coarse scan, then golden-section refinement around the best cell.
    let grid = 2000;
    let best = (0..=grid)
        .map(|i| i as f64 / grid as f64)
        .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
        .expect("non-empty grid");
    let (mut lo, mut hi) = ((best - 1.0 / grid as f64).max(0.0), (best + 1.0 / grid as f64).min(1.0));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    for _ in 0..200 {
        if hi - lo < 1e-14 {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = cost(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = cost(x2);
        }
    }
    let mut p = 0.5 * (lo + hi);
    // A flat table fits p = 0 and p = 1 equally well; prefer no decay.
    for edge in [0.0, 1.0] {
        if cost(edge) <= cost(p) + 1e-15 {
            p = edge;
        }
    }
    let (a, b, residual) = linear_part(&pts, p);

    let dof = (pts.len() as f64 - 3.0).max(1.0);
    let sigma2 = residual / dof;
    let j = nalgebra::DMatrix::from_fn(pts.len(), 3, |i, k| {
        let m = pts[i].0;
        match k {
            0 => p.powf(m),
            1 => 1.0,
            _ => {
                if m == 0.0 {
                    0.0
                } else {
                    a * m * p.powf(m - 1.0)
                }
            }
        }
    });
    let jtj = j.transpose() * j;
    let cov = jtj
        .try_inverse()
        .map(|inv| inv * sigma2)
        .unwrap_or_else(|| nalgebra::DMatrix::from_element(3, 3, f64::NAN));
    let mut covariance = [[0.0; 3]; 3];
    for (r, row) in covariance.iter_mut().enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            *v = cov[(r, k)];
        }
    }
    Ok(DecayFit {
        a,
        b,
        p,
        covariance,
        residual,
    })
}

/// Fit of a run table's mean fidelities.
pub fn fit_points(points: &[RbPoint]) -> Result<DecayFit> {
    fit_decay(&points.iter().map(|p| (p.m, p.mean_fidelity)).collect::<Vec<_>>())
}

/// Interleaved error r = (1 − p_int/p_ref)(d − 1)/d.
pub fn extract_interleaved_error(reference: &DecayFit, interleaved: &DecayFit, d: usize) -> Result<f64> {
    if reference.p <= 0.0 {
        return Err(Error::Fit("reference decay constant is zero".into()));
    }
    let d = d as f64;
    Ok((1.0 - interleaved.p / reference.p) * (d - 1.0) / d)
}
