//! Gate-level circuit representation over the hardware gate vocabulary.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, check_capacity, CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateKind {
    Rx(f64),
    Ry(f64),
    Rz(f64),
    PiX,
    PiY,
    VirtualZ(f64),
    Idle,
    Detune,
    /// diag(1, 1, 1, e^{iφ})
    CzPhi(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationClass {
    Microwave,
    Idle,
    Detune,
    Virtual,
    Entangling,
}

impl GateKind {
    pub fn name(&self) -> &'static str {
        match self {
            GateKind::Rx(_) => "RX",
            GateKind::Ry(_) => "RY",
            GateKind::Rz(_) => "RZ",
            GateKind::PiX => "PI_X",
            GateKind::PiY => "PI_Y",
            GateKind::VirtualZ(_) => "VIRTUAL_Z",
            GateKind::Idle => "IDLE",
            GateKind::Detune => "DETUNE",
            GateKind::CzPhi(_) => "CZPHI",
        }
    }

    pub fn param(&self) -> f64 {
        match *self {
            GateKind::Rx(t) | GateKind::Ry(t) | GateKind::Rz(t) | GateKind::VirtualZ(t) => t,
            GateKind::CzPhi(p) => p,
            _ => 0.0,
        }
    }

    pub fn from_name(name: &str, param: f64) -> Result<Self> {
        Ok(match name {
            "RX" => GateKind::Rx(param),
            "RY" => GateKind::Ry(param),
            "RZ" => GateKind::Rz(param),
            "PI_X" => GateKind::PiX,
            "PI_Y" => GateKind::PiY,
            "VIRTUAL_Z" => GateKind::VirtualZ(param),
            "IDLE" => GateKind::Idle,
            "DETUNE" => GateKind::Detune,
            "CZPHI" => GateKind::CzPhi(param),
            other => return Err(Error::Gate(format!("unknown gate kind {other:?}"))),
        })
    }

    pub fn arity(&self) -> usize {
        if matches!(self, GateKind::CzPhi(_)) {
            2
        } else {
            1
        }
    }

    pub fn duration_class(&self) -> DurationClass {
        match self {
            GateKind::Rx(_) | GateKind::Ry(_) | GateKind::PiX | GateKind::PiY => DurationClass::Microwave,
            GateKind::Rz(_) | GateKind::VirtualZ(_) => DurationClass::Virtual,
            GateKind::Idle => DurationClass::Idle,
            GateKind::Detune => DurationClass::Detune,
            GateKind::CzPhi(_) => DurationClass::Entangling,
        }
    }

    /// Gates that act as the identity in simulation.
    pub fn is_identity_like(&self) -> bool {
        matches!(self, GateKind::Idle | GateKind::Detune)
    }

    /// Rotation axis and angle for microwave rotations (0 = x, 1 = y).
    pub fn rotation(&self) -> Option<(u8, f64)> {
        match *self {
            GateKind::Rx(t) => Some((0, t)),
            GateKind::Ry(t) => Some((1, t)),
            GateKind::PiX => Some((0, PI)),
            GateKind::PiY => Some((1, PI)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
}

impl Gate {
    pub fn new(kind: GateKind, targets: Vec<usize>) -> Result<Self> {
        if targets.len() != kind.arity() {
            return Err(Error::Gate(format!(
                "{} takes {} target(s), got {}",
                kind.name(),
                kind.arity(),
                targets.len()
            )));
        }
        if targets.len() == 2 && targets[0] == targets[1] {
            return Err(Error::Gate(format!("{} targets must differ", kind.name())));
        }
        if !kind.param().is_finite() {
            return Err(Error::Gate(format!("{} parameter is not finite", kind.name())));
        }
        Ok(Self { kind, targets })
    }

    pub fn one(kind: GateKind, q: usize) -> Self {
        Self::new(kind, vec![q]).expect("single-qubit gate")
    }

    pub fn cz_phi(phi: f64, a: usize, b: usize) -> Self {
        Self::new(GateKind::CzPhi(phi), vec![a, b]).expect("two distinct targets")
    }

    pub fn acts_on(&self, q: usize) -> bool {
        self.targets.contains(&q)
    }
}

/// Local unitary of a gate. Two-qubit matrices are indexed by
/// `2·bit(targets[0]) + bit(targets[1])`.
pub fn gate_unitary(g: &Gate) -> CMatrix {
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    let rot = |axis: u8, t: f64| {
        let (s, co) = (t / 2.0).sin_cos();
        let m = if axis == 0 {
            [c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)]
        } else {
            [c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)]
        };
        CMatrix::from_row_slice(2, 2, &m)
    };
    match g.kind {
        GateKind::Rx(t) => rot(0, t),
        GateKind::Ry(t) => rot(1, t),
        GateKind::PiX => rot(0, PI),
        GateKind::PiY => rot(1, PI),
        GateKind::Rz(t) => CMatrix::from_row_slice(
            2,
            2,
            &[C64::from_polar(1.0, -t / 2.0), o, o, C64::from_polar(1.0, t / 2.0)],
        ),
        GateKind::VirtualZ(t) => CMatrix::from_row_slice(2, 2, &[l, o, o, C64::from_polar(1.0, t)]),
        GateKind::Idle | GateKind::Detune => CMatrix::identity(2, 2),
        GateKind::CzPhi(p) => {
            let mut m = CMatrix::identity(4, 4);
            m[(3, 3)] = C64::from_polar(1.0, p);
            m
        }
    }
}

/// Applies a local unitary to a state vector in place. Bit `q` of a basis
/// index is the computational value of qubit `q`.
pub(crate) fn apply_local(amps: &mut [C64], targets: &[usize], u: &CMatrix) {
    match targets {
        [q] => {
            let bit = 1usize << q;
            let (a, b, cc, d) = (u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]);
            for i in 0..amps.len() {
                if i & bit == 0 {
                    let j = i | bit;
                    let (x0, x1) = (amps[i], amps[j]);
                    amps[i] = a * x0 + b * x1;
                    amps[j] = cc * x0 + d * x1;
                }
            }
        }
        [q0, q1] => {
            let (b0, b1) = (1usize << q0, 1usize << q1);
            for i in 0..amps.len() {
                if i & b0 == 0 && i & b1 == 0 {
                    let idx = [i, i | b1, i | b0, i | b0 | b1];
                    let x = [amps[idx[0]], amps[idx[1]], amps[idx[2]], amps[idx[3]]];
                    for r in 0..4 {
                        amps[idx[r]] = (0..4).map(|k| u[(r, k)] * x[k]).sum();
                    }
                }
            }
        }
        _ => unreachable!("gates act on one or two qubits"),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    pub entangling: usize,
    pub single_qubit: usize,
    pub microwave: usize,
    pub idle: usize,
    pub detune: usize,
    #[serde(rename = "virtual")]
    pub virtual_z: usize,
}

impl Census {
    pub fn total(&self) -> usize {
        self.entangling + self.single_qubit
    }
}

impl Add for Census {
    type Output = Census;
    fn add(self, o: Census) -> Census {
        Census {
            entangling: self.entangling + o.entangling,
            single_qubit: self.single_qubit + o.single_qubit,
            microwave: self.microwave + o.microwave,
            idle: self.idle + o.idle,
            detune: self.detune + o.detune,
            virtual_z: self.virtual_z + o.virtual_z,
        }
    }
}

impl AddAssign for Census {
    fn add_assign(&mut self, o: Census) {
        *self = *self + o;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n: usize,
    gates: Vec<Gate>,
    pub tags: std::collections::BTreeMap<String, String>,
}

impl Circuit {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            gates: Vec::new(),
            tags: Default::default(),
        }
    }

    pub fn from_gates(n: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut circ = Self::new(n);
        for g in gates {
            circ.push(g)?;
        }
        Ok(circ)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, g: Gate) -> Result<()> {
        if let Some(&q) = g.targets.iter().find(|&&q| q >= self.n) {
            return Err(Error::Gate(format!(
                "{} target {q} outside {} qubits",
                g.kind.name(),
                self.n
            )));
        }
        self.gates.push(g);
        Ok(())
    }

    pub(crate) fn push_unchecked(&mut self, g: Gate) {
        debug_assert!(g.targets.iter().all(|&q| q < self.n));
        self.gates.push(g);
    }

    pub fn extend(&mut self, other: &Circuit) -> Result<()> {
        if other.n > self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: other.n,
            });
        }
        self.gates.extend(other.gates.iter().cloned());
        Ok(())
    }

    pub fn concat(&self, other: &Circuit) -> Result<Circuit> {
        let mut out = self.clone();
        out.extend(other)?;
        Ok(out)
    }

    pub(crate) fn retain_indices(&mut self, keep: &[bool]) {
        let mut it = keep.iter();
        self.gates.retain(|_| *it.next().unwrap());
    }

    pub fn census(&self) -> Census {
        gate_census(self)
    }

    pub fn unitary(&self) -> Result<CMatrix> {
        circuit_unitary(self)
    }
}

/// Product of the embedded gate unitaries, earliest gate applied first.
pub fn circuit_unitary(circ: &Circuit) -> Result<CMatrix> {
    check_capacity(circ.n)?;
    let dim = 1usize << circ.n;
    let mut m = CMatrix::identity(dim, dim);
    let locals: Vec<CMatrix> = circ.gates.iter().map(gate_unitary).collect();
    for col in m.column_iter_mut() {
        let mut v: Vec<C64> = col.iter().copied().collect();
        for (g, u) in circ.gates.iter().zip(&locals) {
            if !g.kind.is_identity_like() {
                apply_local(&mut v, &g.targets, u);
            }
        }
        for (dst, src) in col.into_iter().zip(v) {
            *dst = src;
        }
    }
    Ok(m)
}

pub fn gate_census(circ: &Circuit) -> Census {
    let mut census = Census::default();
    for g in &circ.gates {
        match g.kind.duration_class() {
            DurationClass::Entangling => census.entangling += 1,
            DurationClass::Microwave => census.microwave += 1,
            DurationClass::Idle => census.idle += 1,
            DurationClass::Detune => census.detune += 1,
            DurationClass::Virtual => census.virtual_z += 1,
        }
    }
    census.single_qubit = census.microwave + census.idle + census.detune + census.virtual_z;
    census
}

/// Maps an angle into (-π, π].
pub fn canonical_angle(phi: f64) -> f64 {
    let mut a = phi.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseViolation {
    pub gate_index: usize,
    pub phi: f64,
}

/// Entangling gates whose phase, reduced to [0, 2π), falls outside `[lo, hi]`.
pub fn validate_phase_range(circ: &Circuit, lo: f64, hi: f64) -> Vec<PhaseViolation> {
    circ.gates
        .iter()
        .enumerate()
        .filter_map(|(i, g)| match g.kind {
            GateKind::CzPhi(phi) => {
                let a = phi.rem_euclid(2.0 * PI);
                (a < lo || a > hi).then_some(PhaseViolation { gate_index: i, phi })
            }
            _ => None,
        })
        .collect()
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.gates {
            write!(f, "{}", g.kind.name())?;
            if g.kind.param() != 0.0 {
                write!(f, "({:.4})", g.kind.param())?;
            }
            writeln!(f, " {:?}", g.targets)?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct WireGate {
    kind: String,
    targets: Vec<usize>,
    #[serde(default)]
    param: f64,
}

#[derive(Serialize, Deserialize)]
struct WireCircuit {
    n: usize,
    gates: Vec<WireGate>,
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    tags: std::collections::BTreeMap<String, String>,
}

impl Serialize for Circuit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        WireCircuit {
            n: self.n,
            gates: self
                .gates
                .iter()
                .map(|g| WireGate {
                    kind: g.kind.name().to_string(),
                    targets: g.targets.clone(),
                    param: g.kind.param(),
                })
                .collect(),
            tags: self.tags.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Circuit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let wire = WireCircuit::deserialize(d)?;
        let mut circ = Circuit::new(wire.n);
        circ.tags = wire.tags;
        for g in wire.gates {
            let kind = GateKind::from_name(&g.kind, g.param).map_err(D::Error::custom)?;
            let gate = Gate::new(kind, g.targets).map_err(D::Error::custom)?;
            circ.push(gate).map_err(D::Error::custom)?;
        }
        Ok(circ)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{equal_up_to_phase, is_unitary, max_abs};
    use proptest::prelude::*;

    #[test]
    fn cz_pi_is_standard_cz() {
        let u = gate_unitary(&Gate::cz_phi(PI, 0, 1));
        let mut cz = CMatrix::identity(4, 4);
        cz[(3, 3)] = c(-1.0, 0.0);
        assert!(max_abs(&(u - cz)) < 1e-15);
    }

    #[test]
    fn rx_two_pi_is_minus_identity() {
        let u = gate_unitary(&Gate::one(GateKind::Rx(2.0 * PI), 0));
        assert!(max_abs(&(u + CMatrix::identity(2, 2))) < 1e-15);
    }

    #[test]
    fn idle_is_identity() {
        let u = gate_unitary(&Gate::one(GateKind::Idle, 0));
        assert_eq!(u, CMatrix::identity(2, 2));
    }

    #[test]
    fn arity_enforced() {
        assert!(Gate::new(GateKind::CzPhi(1.0), vec![0]).is_err());
        assert!(Gate::new(GateKind::PiX, vec![0, 1]).is_err());
        assert!(Gate::new(GateKind::CzPhi(1.0), vec![1, 1]).is_err());
        assert!(Circuit::new(2).push(Gate::one(GateKind::PiX, 2)).is_err());
    }

    #[test]
    fn empty_circuit_is_identity() {
        assert_eq!(Circuit::new(3).unitary().unwrap(), CMatrix::identity(8, 8));
    }

    #[test]
    fn double_pi_pulse_is_identity_up_to_phase() {
        let circ = Circuit::from_gates(1, vec![Gate::one(GateKind::PiX, 0), Gate::one(GateKind::PiX, 0)]).unwrap();
        assert!(equal_up_to_phase(
            &circ.unitary().unwrap(),
            &CMatrix::identity(2, 2),
            1e-12
        ));
    }

    #[test]
    fn embedding_respects_qubit_order() {
        // X on qubit 1 of two maps |00> (index 0) to |10> (index 2).
        let circ = Circuit::from_gates(2, vec![Gate::one(GateKind::PiX, 1)]).unwrap();
        let u = circ.unitary().unwrap();
        assert!((u[(2, 0)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_range_checks() {
        let circ = |phi| Circuit::from_gates(2, vec![Gate::cz_phi(phi, 0, 1)]).unwrap();
        assert!(validate_phase_range(&circ(PI), 0.5, 4.0).is_empty());
        assert_eq!(validate_phase_range(&circ(0.1), 0.5, 4.0).len(), 1);
        assert_eq!(validate_phase_range(&circ(4.5), 0.5, 4.0).len(), 1);
        assert!(validate_phase_range(&circ(-3.0), 0.5, 4.0).is_empty());
    }

    #[test]
    fn census_counts_classes() {
        let circ = Circuit::from_gates(
            2,
            vec![
                Gate::cz_phi(1.0, 0, 1),
                Gate::one(GateKind::PiX, 0),
                Gate::one(GateKind::Ry(PI / 2.0), 1),
                Gate::one(GateKind::Idle, 1),
                Gate::one(GateKind::Detune, 0),
                Gate::one(GateKind::VirtualZ(0.3), 0),
            ],
        )
        .unwrap();
        let census = circ.census();
        assert_eq!(
            census,
            Census {
                entangling: 1,
                single_qubit: 5,
                microwave: 2,
                idle: 1,
                detune: 1,
                virtual_z: 1
            }
        );
        assert_eq!(
            serde_json::to_string(&census).unwrap(),
            r#"{"entangling":1,"single_qubit":5,"microwave":2,"idle":1,"detune":1,"virtual":1}"#
        );
    }

    #[test]
    fn circuit_json_round_trip() {
        let circ = Circuit::from_gates(2, vec![Gate::cz_phi(0.7, 0, 1), Gate::one(GateKind::PiY, 1)]).unwrap();
        let text = serde_json::to_string(&circ).unwrap();
        assert_eq!(
            text,
            r#"{"n":2,"gates":[{"kind":"CZPHI","targets":[0,1],"param":0.7},{"kind":"PI_Y","targets":[1],"param":0.0}]}"#
        );
        let back: Circuit = serde_json::from_str(&text).unwrap();
        assert_eq!(back, circ);
        assert!(serde_json::from_str::<Circuit>(r#"{"n":1,"gates":[{"kind":"CZPHI","targets":[0]}]}"#).is_err());
    }

    fn arb_gate(n: usize) -> impl Strategy<Value = Gate> {
        (0u8..9, 0..n, 1..n, -6.0f64..6.0).prop_map(move |(k, q, d, t)| {
            let kind = match k {
                0 => GateKind::Rx(t),
                1 => GateKind::Ry(t),
                2 => GateKind::Rz(t),
                3 => GateKind::PiX,
                4 => GateKind::PiY,
                5 => GateKind::VirtualZ(t),
                6 => GateKind::Idle,
                7 => GateKind::Detune,
                _ => GateKind::CzPhi(t),
            };
            if kind.arity() == 2 {
                Gate::new(kind, vec![q, (q + d) % n]).unwrap()
            } else {
                Gate::one(kind, q)
            }
        })
    }

    fn inverse(g: &Gate) -> Vec<Gate> {
        let t = g.targets.clone();
        let k = match g.kind {
            GateKind::Rx(a) => GateKind::Rx(-a),
            GateKind::Ry(a) => GateKind::Ry(-a),
            GateKind::Rz(a) => GateKind::Rz(-a),
            GateKind::PiX => GateKind::Rx(-PI),
            GateKind::PiY => GateKind::Ry(-PI),
            GateKind::VirtualZ(a) => GateKind::VirtualZ(-a),
            GateKind::CzPhi(a) => GateKind::CzPhi(-a),
            k => k,
        };
        vec![Gate::new(k, t).unwrap()]
    }

    proptest! {
        #[test]
        fn circuits_are_unitary(gates in prop::collection::vec(arb_gate(3), 0..25)) {
            let circ = Circuit::from_gates(3, gates).unwrap();
            prop_assert!(is_unitary(&circ.unitary().unwrap(), 1e-10));
        }

        #[test]
        fn gate_then_inverse_is_neutral(gates in prop::collection::vec(arb_gate(3), 0..10), extra in arb_gate(3)) {
            let base = Circuit::from_gates(3, gates).unwrap();
            let mut longer = base.clone();
            longer.push(extra.clone()).unwrap();
            for g in inverse(&extra) { longer.push(g).unwrap(); }
            prop_assert!(equal_up_to_phase(&base.unitary().unwrap(), &longer.unitary().unwrap(), 1e-10));
        }

        #[test]
        fn census_is_additive(a in prop::collection::vec(arb_gate(3), 0..15), b in prop::collection::vec(arb_gate(3), 0..15)) {
            let ca = Circuit::from_gates(3, a).unwrap();
            let cb = Circuit::from_gates(3, b).unwrap();
            prop_assert_eq!(ca.concat(&cb).unwrap().census(), ca.census() + cb.census());
        }
    }
}
