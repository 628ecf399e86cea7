//! Lowering of qubit Hamiltonians into hardware circuits: echoed ZZ blocks,
//! basis conjugation, Trotter steps and whole evolutions.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, GateKind};
use crate::error::{Error, Result};
use crate::fermion::FermionModel;
use crate::pauli::{Factor, WeightedPauliSum, COEFF_TOL};

/// Preferred window for the entangling phase, reduced to [0, 2π).
pub const PHASE_WINDOW: (f64, f64) = (0.5, 4.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EchoAxis {
    X,
    Y,
}

impl EchoAxis {
    fn pulse(self) -> GateKind {
        match self {
            EchoAxis::X => GateKind::PiX,
            EchoAxis::Y => GateKind::PiY,
        }
    }

    fn other(self) -> Self {
        match self {
            EchoAxis::X => EchoAxis::Y,
            EchoAxis::Y => EchoAxis::X,
        }
    }
}

/// Two-qubit interaction axis of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PairAxis {
    XX,
    YY,
    ZZ,
}

impl PairAxis {
    fn from_factor(f: Factor) -> Option<Self> {
        match f {
            Factor::X => Some(PairAxis::XX),
            Factor::Y => Some(PairAxis::YY),
            Factor::Z => Some(PairAxis::ZZ),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            PairAxis::XX => "XX",
            PairAxis::YY => "YY",
            PairAxis::ZZ => "ZZ",
        }
    }

    /// Echo axis that commutes with the basis change of this block, so that
    /// spectator pulses never block rotation cancellation.
    fn echo_axis(self) -> EchoAxis {
        match self {
            PairAxis::XX => EchoAxis::Y,
            PairAxis::YY | PairAxis::ZZ => EchoAxis::X,
        }
    }
}

/// Splits φ into the two identical entangling phases of an echoed block.
/// Returns the phase and whether the second echo layer uses the other axis,
/// which contributes an extra Z⊗Z and shifts the required phase by π.
fn split_phase(phi: f64) -> (f64, bool) {
    let plain = (-phi).rem_euclid(2.0 * PI);
    if plain >= PHASE_WINDOW.0 && plain <= PHASE_WINDOW.1 {
        (plain, false)
    } else {
        ((PI - phi).rem_euclid(2.0 * PI), true)
    }
}

/// Emits exp(−i φ/2 P⊗P) on `pair` into `circ`. Qubits outside the pair
/// receive a matching echo pair and a detune during each entangling gate.
fn emit_block(circ: &mut Circuit, axis: PairAxis, phi: f64, pair: (usize, usize), echo: EchoAxis) {
    let n = circ.n_qubits();
    let (a, b) = pair;
    let passive: Vec<usize> = (0..n).filter(|&q| q != a && q != b).collect();
    let (pre, post) = match axis {
        PairAxis::XX => (Some(GateKind::Ry(-FRAC_PI_2)), Some(GateKind::Ry(FRAC_PI_2))),
        PairAxis::YY => (Some(GateKind::Rx(FRAC_PI_2)), Some(GateKind::Rx(-FRAC_PI_2))),
        PairAxis::ZZ => (None, None),
    };
    let (theta, shifted) = split_phase(phi);
    let second = if shifted { echo.other() } else { echo };
    let spectator = axis.echo_axis().pulse();

    if let Some(k) = pre {
        circ.push_unchecked(Gate::one(k, a));
        circ.push_unchecked(Gate::one(k, b));
    }
    for layer in [echo, second] {
        circ.push_unchecked(Gate::cz_phi(theta, a, b));
        for &q in &passive {
            circ.push_unchecked(Gate::one(GateKind::Detune, q));
        }
        circ.push_unchecked(Gate::one(layer.pulse(), a));
        circ.push_unchecked(Gate::one(layer.pulse(), b));
        for &q in &passive {
            circ.push_unchecked(Gate::one(spectator, q));
        }
    }
    if let Some(k) = post {
        circ.push_unchecked(Gate::one(k, a));
        circ.push_unchecked(Gate::one(k, b));
    }
    for q in 0..n {
        circ.push_unchecked(Gate::one(GateKind::Idle, q));
    }
}

/// Echoed ZZ block realising diag(1, e^{iφ}, e^{iφ}, 1) on `qubits` up to
/// global phase with two entangling gates and four π pulses.
pub fn compile_zz_block(phi: f64, qubits: (usize, usize), echo_axis: EchoAxis) -> Result<Circuit> {
    let (a, b) = qubits;
    if a == b {
        return Err(Error::Gate("ZZ block needs two distinct qubits".into()));
    }
    if !phi.is_finite() {
        return Err(Error::Gate("ZZ block phase is not finite".into()));
    }
    let mut circ = Circuit::new(a.max(b) + 1);
    emit_block(&mut circ, PairAxis::ZZ, phi, qubits, echo_axis);
    Ok(circ)
}

/// Wraps a ZZ block so that it acts along XX or YY instead.
pub fn conjugate_basis(zz_circuit: &Circuit, axis: PairAxis) -> Result<Circuit> {
    let (pre, post) = match axis {
        PairAxis::XX => (GateKind::Ry(-FRAC_PI_2), GateKind::Ry(FRAC_PI_2)),
        PairAxis::YY => (GateKind::Rx(FRAC_PI_2), GateKind::Rx(-FRAC_PI_2)),
        PairAxis::ZZ => return Ok(zz_circuit.clone()),
    };
    let pair = zz_circuit
        .gates()
        .iter()
        .find(|g| g.kind.arity() == 2)
        .map(|g| (g.targets[0], g.targets[1]))
        .ok_or_else(|| Error::Gate("circuit has no entangling gate to conjugate".into()))?;
    let mut out = Circuit::new(zz_circuit.n_qubits());
    out.push_unchecked(Gate::one(pre, pair.0));
    out.push_unchecked(Gate::one(pre, pair.1));
    out.extend(zz_circuit)?;
    out.push_unchecked(Gate::one(post, pair.0));
    out.push_unchecked(Gate::one(post, pair.1));
    Ok(out)
}

/// One exponential factor of a Trotter step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepTerm {
    Pair {
        axis: PairAxis,
        pair: (usize, usize),
        coef: f64,
    },
    Z {
        qubit: usize,
        coef: f64,
    },
}

impl StepTerm {
    pub fn label(&self) -> String {
        match self {
            StepTerm::Pair { axis, pair, .. } => format!("{}({},{})", axis.name(), pair.0, pair.1),
            StepTerm::Z { qubit, .. } => format!("Z({qubit})"),
        }
    }
}

/// Splits a Hamiltonian into two-qubit XX/YY/ZZ terms and single Z terms.
/// Anything else is reported by its Pauli label.
pub fn classify_terms(h: &WeightedPauliSum) -> Result<Vec<StepTerm>> {
    let h = h.expanded();
    let mut out = Vec::new();
    for (coef, p) in h.terms() {
        let unsupported = |reason: &str| Error::Compile {
            term: p.label(),
            reason: reason.to_string(),
        };
        if coef.im.abs() > COEFF_TOL {
            return Err(unsupported("coefficient is not real"));
        }
        let support = p.support();
        match support.as_slice() {
            [q] if p.factor(*q) == Factor::Z => out.push(StepTerm::Z {
                qubit: *q,
                coef: coef.re,
            }),
            [a, b] if p.factor(*a) == p.factor(*b) => match PairAxis::from_factor(p.factor(*a)) {
                Some(axis) => out.push(StepTerm::Pair {
                    axis,
                    pair: (*a, *b),
                    coef: coef.re,
                }),
                None => return Err(unsupported("not a Pauli pair interaction")),
            },
            _ => return Err(unsupported("no native decomposition for this term")),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    /// Hopping blocks by pair (XX before YY), then ZZ blocks, then Z phases.
    CanonicalS5,
    /// Odd steps XX, interactions, YY; even steps mirror them so that basis
    /// rotations meet and cancel at step boundaries.
    OddEvenS6,
    /// Explicit block order by label, e.g. `"YY(0,1)"` or `"Z"` for the
    /// single-qubit phases. Unlisted blocks follow in canonical order.
    Custom(Vec<String>),
}

impl std::str::FromStr for Ordering {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s5" => Ok(Ordering::CanonicalS5),
            "s6" => Ok(Ordering::OddEvenS6),
            other => Err(Error::config("ordering", format!("unknown ordering {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrotterPlan {
    pub hamiltonian: WeightedPauliSum,
    pub total_time: f64,
    pub steps: usize,
    pub ordering: Ordering,
}

impl TrotterPlan {
    pub fn new(hamiltonian: WeightedPauliSum, total_time: f64, steps: usize, ordering: Ordering) -> Result<Self> {
        if steps == 0 {
            return Err(Error::config("steps", "must be at least 1"));
        }
        if !(total_time.is_finite() && total_time > 0.0) {
            return Err(Error::config("total_time", "must be finite and positive"));
        }
        Ok(Self {
            hamiltonian,
            total_time,
            steps,
            ordering,
        })
    }

    pub fn dt(&self) -> f64 {
        self.total_time / self.steps as f64
    }

    /// Phase of every block and Z gate in one step, keyed by term label.
    /// Pair blocks carry φ with exp(−iφ/2 P⊗P); Z gates carry the virtual
    /// phase of diag(1, e^{iφ}).
    pub fn phase_map(&self) -> Result<BTreeMap<String, f64>> {
        let dt = self.dt();
        Ok(classify_terms(&self.hamiltonian)?
            .into_iter()
            .map(|t| {
                let coef = match t {
                    StepTerm::Pair { coef, .. } | StepTerm::Z { coef, .. } => coef,
                };
                (t.label(), 2.0 * coef * dt)
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Block {
    Pair {
        axis: PairAxis,
        pair: (usize, usize),
        phi: f64,
    },
    Phases(Vec<(usize, f64)>),
}

impl Block {
    fn label(&self) -> String {
        match self {
            Block::Pair { axis, pair, .. } => format!("{}({},{})", axis.name(), pair.0, pair.1),
            Block::Phases(_) => "Z".into(),
        }
    }
}

fn step_blocks(plan: &TrotterPlan, step_index: usize) -> Result<Vec<Block>> {
    let dt = plan.dt();
    let mut pairs: BTreeMap<(PairAxis, (usize, usize)), f64> = BTreeMap::new();
    let mut phases: BTreeMap<usize, f64> = BTreeMap::new();
    for t in classify_terms(&plan.hamiltonian)? {
        match t {
            StepTerm::Pair { axis, pair, coef } => *pairs.entry((axis, pair)).or_default() += 2.0 * coef * dt,
            StepTerm::Z { qubit, coef } => *phases.entry(qubit).or_default() += 2.0 * coef * dt,
        }
    }
    let pair_block = |(&(axis, pair), &phi): (&(PairAxis, (usize, usize)), &f64)| Block::Pair { axis, pair, phi };
    let mut by_pair: Vec<_> = pairs.iter().filter(|((a, _), _)| *a != PairAxis::ZZ).collect();
    by_pair.sort_by_key(|((a, p), _)| (*p, *a));
    let hop: Vec<Block> = by_pair.into_iter().map(pair_block).collect();
    let of_axis =
        |axis: PairAxis| -> Vec<Block> { pairs.iter().filter(|((a, _), _)| *a == axis).map(pair_block).collect() };
    let mut interaction = of_axis(PairAxis::ZZ);
    let phase_list: Vec<(usize, f64)> = phases.into_iter().filter(|(_, p)| p.abs() > COEFF_TOL).collect();
    if !phase_list.is_empty() {
        interaction.push(Block::Phases(phase_list));
    }

    Ok(match &plan.ordering {
        Ordering::CanonicalS5 => hop.into_iter().chain(interaction).collect(),
        Ordering::OddEvenS6 => {
            let xx = of_axis(PairAxis::XX);
            let yy = of_axis(PairAxis::YY);
            if step_index % 2 == 1 {
                xx.into_iter().chain(interaction).chain(yy).collect()
            } else {
                yy.into_iter()
                    .rev()
                    .chain(interaction)
                    .chain(xx.into_iter().rev())
                    .collect()
            }
        }
        Ordering::Custom(order) => {
            let mut rest: Vec<Block> = hop.into_iter().chain(interaction).collect();
            let mut out = Vec::new();
            for label in order {
                let pos = rest.iter().position(|b| &b.label() == label).ok_or_else(|| {
                    Error::config("ordering", format!("{label:?} is not a block of this Hamiltonian"))
                })?;
                out.push(rest.remove(pos));
            }
            out.extend(rest);
            out
        }
    })
}

/// Adjustments that bring a canonical step onto the reference gate census.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct CensusProfile {
    blocks: usize,
    extra_idle: usize,
    dropped_detune: usize,
    split_pulses: usize,
}

fn census_profile(n: usize) -> CensusProfile {
    match n {
        3 => CensusProfile {
            blocks: 6,
            extra_idle: 1,
            dropped_detune: 0,
            split_pulses: 1,
        },
        4 => CensusProfile {
            blocks: 5,
            extra_idle: 2,
            dropped_detune: 2,
            split_pulses: 0,
        },
        _ => CensusProfile::default(),
    }
}

fn apply_profile(circ: &mut Circuit, pair_blocks: usize) {
    let n = circ.n_qubits();
    let profile = census_profile(n);
    if profile.blocks == 0 || profile.blocks != pair_blocks {
        return;
    }
    // Record the active pair in force when each gate is emitted.
    let mut active = Vec::with_capacity(circ.len());
    let mut current: Option<(usize, usize)> = None;
    for g in circ.gates() {
        if g.kind.arity() == 2 {
            current = Some((g.targets[0], g.targets[1]));
        }
        active.push(current);
    }
    let distance = |q: usize, p: (usize, usize)| q.abs_diff(p.0).min(q.abs_diff(p.1));

    let mut detunes: Vec<(usize, usize)> = circ
        .gates()
        .iter()
        .enumerate()
        .filter(|(_, g)| g.kind == GateKind::Detune)
        .map(|(i, g)| (i, distance(g.targets[0], active[i].unwrap_or((0, 0)))))
        .collect();
    detunes.sort_by(|a, b| b.1.cmp(&a.1).then(b.0.cmp(&a.0)));
    let mut keep = vec![true; circ.len()];
    for &(i, _) in detunes.iter().take(profile.dropped_detune) {
        keep[i] = false;
    }

    let mut splits: Vec<usize> = circ
        .gates()
        .iter()
        .enumerate()
        .filter(|(i, g)| g.kind == GateKind::PiX && active[*i].is_some_and(|(a, b)| !g.acts_on(a) && !g.acts_on(b)))
        .map(|(i, _)| i)
        .collect();
    splits.reverse();
    splits.truncate(profile.split_pulses);

    let mut out = Circuit::new(n);
    out.tags = std::mem::take(&mut circ.tags);
    for (i, g) in circ.gates().iter().enumerate() {
        if !keep[i] {
            continue;
        }
        if splits.contains(&i) {
            let half = Gate::one(GateKind::Rx(FRAC_PI_2), g.targets[0]);
            out.push_unchecked(half.clone());
            out.push_unchecked(half);
        } else {
            out.push_unchecked(g.clone());
        }
    }
    for k in 0..profile.extra_idle {
        out.push_unchecked(Gate::one(GateKind::Idle, k % n));
    }
    *circ = out;
}

/// One Trotter step; `step_index` counts from 1 and selects the odd or even
/// template under [`Ordering::OddEvenS6`].
pub fn compile_trotter_step(plan: &TrotterPlan, step_index: usize) -> Result<Circuit> {
    if step_index == 0 {
        return Err(Error::config("step_index", "steps are counted from 1"));
    }
    let n = plan.hamiltonian.n_qubits();
    let blocks = step_blocks(plan, step_index)?;
    let mut circ = Circuit::new(n);
    let mut pair_blocks = 0;
    for block in &blocks {
        match block {
            Block::Pair { axis, pair, phi } => {
                emit_block(&mut circ, *axis, *phi, *pair, axis.echo_axis());
                pair_blocks += 1;
            }
            Block::Phases(list) => {
                for &(q, phi) in list {
                    circ.push_unchecked(Gate::one(GateKind::VirtualZ(phi), q));
                }
            }
        }
    }
    apply_profile(&mut circ, pair_blocks);
    Ok(circ)
}

/// Removes pairs of same-axis rotations whose angles sum to zero when only
/// commuting gates (idles, detunes, same-axis rotations) separate them on
/// that qubit.
pub fn cancel_rotations(circ: &Circuit) -> Circuit {
    let gates = circ.gates();
    let mut keep = vec![true; gates.len()];
    for i in 0..gates.len() {
        if !keep[i] {
            continue;
        }
        let (axis, angle) = match gates[i].kind {
            GateKind::Rx(t) => (0u8, t),
            GateKind::Ry(t) => (1u8, t),
            _ => continue,
        };
        let q = gates[i].targets[0];
        for j in i + 1..gates.len() {
            if !keep[j] || !gates[j].acts_on(q) {
                continue;
            }
            let g = &gates[j].kind;
            if g.is_identity_like() {
                continue;
            }
            match (g.rotation(), g) {
                (Some((ax, t)), GateKind::Rx(_) | GateKind::Ry(_)) if ax == axis && (t + angle).abs() < 1e-12 => {
                    keep[i] = false;
                    keep[j] = false;
                    break;
                }
                (Some((ax, _)), _) if ax == axis => continue,
                _ => break,
            }
        }
    }
    let mut out = circ.clone();
    out.retain_indices(&keep);
    out
}

/// All steps of a plan in order, with boundary cancellation under
/// [`Ordering::OddEvenS6`].
pub fn compile_evolution(plan: &TrotterPlan) -> Result<Circuit> {
    let steps: Vec<Circuit> = (1..=plan.steps)
        .map(|k| compile_trotter_step(plan, k))
        .collect::<Result<_>>()?;
    join_steps(plan.hamiltonian.n_qubits(), &steps, &plan.ordering)
}

/// Concatenates single-step plans, e.g. the digitized steps of a schedule.
/// Step parity runs over the whole sequence.
pub fn compile_plans(plans: &[TrotterPlan]) -> Result<Circuit> {
    let first = plans
        .first()
        .ok_or_else(|| Error::Schedule("no steps to compile".into()))?;
    let mut steps = Vec::new();
    for (k, plan) in plans.iter().enumerate() {
        if plan.steps != 1 {
            return Err(Error::config("steps", "digitized plans hold one step each"));
        }
        let mut p = plan.clone();
        p.ordering = first.ordering.clone();
        steps.push(compile_trotter_step(&p, k + 1)?);
    }
    join_steps(first.hamiltonian.n_qubits(), &steps, &first.ordering)
}

fn join_steps(n: usize, steps: &[Circuit], ordering: &Ordering) -> Result<Circuit> {
    let mut out = Circuit::new(n);
    for s in steps {
        out.extend(s)?;
    }
    Ok(if *ordering == Ordering::OddEvenS6 {
        cancel_rotations(&out)
    } else {
        out
    })
}

/// Plan for a fermion model evolved for `total_time` in `steps` steps.
pub fn plan_for_model(model: &FermionModel, total_time: f64, steps: usize, ordering: Ordering) -> Result<TrotterPlan> {
    TrotterPlan::new(crate::fermion::spin_hamiltonian(model)?, total_time, steps, ordering)
}

/// Piecewise-linear coefficient profile given by `(t, value)` knots. Values
/// are held constant beyond the first and last knot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Profile(pub Vec<(f64, f64)>);

impl Profile {
    pub fn constant(v: f64) -> Self {
        Profile(vec![(0.0, v)])
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::Schedule(format!("{name} has no knots")));
        }
        if self.0.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::Schedule(format!("{name} has non-finite knots")));
        }
        if self.0.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(Error::Schedule(format!("{name} knots are not sorted in time")));
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        let k = &self.0;
        if t <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            if t <= t1 {
                return if t1 > t0 {
                    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
                } else {
                    v1
                };
            }
        }
        k[k.len() - 1].1
    }

    /// Exact ∫ₐᵇ v(t) dt, summed piece by piece with the trapezoid rule,
    /// which is exact for linear pieces.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let mut cuts = vec![a];
        cuts.extend(self.0.iter().map(|k| k.0).filter(|&t| t > a && t < b));
        cuts.push(b);
        cuts.windows(2)
            .map(|w| 0.5 * (w[1] - w[0]) * (self.value(w[0]) + self.value(w[1])))
            .sum()
    }

    pub fn average(&self, a: f64, b: f64) -> f64 {
        if b > a {
            self.integral(a, b) / (b - a)
        } else {
            self.value(a)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    #[serde(rename = "T")]
    pub total_time: f64,
    #[serde(rename = "V")]
    pub hopping: Profile,
    #[serde(rename = "U")]
    pub repulsion: Profile,
    pub steps: usize,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.total_time.is_finite() && self.total_time > 0.0) {
            return Err(Error::Schedule("total time must be positive".into()));
        }
        if self.steps == 0 {
            return Err(Error::Schedule("at least one step is required".into()));
        }
        self.hopping.validate("V")?;
        self.repulsion.validate("U")
    }

    /// Same ramp evaluated only up to time `t`.
    pub fn truncated(&self, t: f64) -> Self {
        Self {
            total_time: t,
            ..self.clone()
        }
    }

    pub fn boundaries(&self, n: usize) -> Vec<f64> {
        (0..=n).map(|k| self.total_time * k as f64 / n as f64).collect()
    }
}

/// Model with the given hopping and repulsion for a supported mode count.
pub fn model_for(modes: usize, v: f64, u: f64) -> Result<FermionModel> {
    match modes {
        2 => Ok(FermionModel::two_mode(v, u)),
        3 => Ok(FermionModel::three_mode_chain(v, u)),
        4 => Ok(FermionModel::asymmetric_hubbard(v, v, 0.0, u)),
        m => Err(Error::Model(format!("no schedule model for {m} modes"))),
    }
}

/// One single-step plan per interval of a uniform grid over [0, T], using
/// the interval averages of V and U.
pub fn digitize_schedule(s: &Schedule, n: usize, modes: usize, ordering: Ordering) -> Result<Vec<TrotterPlan>> {
    s.validate()?;
    if n == 0 {
        return Err(Error::Schedule("at least one step is required".into()));
    }
    let cuts = s.boundaries(n);
    cuts.windows(2)
        .map(|w| {
            let model = model_for(modes, s.hopping.average(w[0], w[1]), s.repulsion.average(w[0], w[1]))?;
            plan_for_model(&model, w[1] - w[0], 1, ordering.clone())
        })
        .collect()
}
