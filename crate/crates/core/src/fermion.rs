//! Jordan-Wigner encoding of fermionic modes and the lattice-model spin
//! Hamiltonians built from it.
//!
//! Mode `k` lives on qubit `k`. The creation operator is `S+` on that qubit
//! with a `Z` on every lower qubit, and `S+ = (X + iY)/2`, so the occupied
//! state is the `Z = +1` computational state. This is the hardware labeling
//! where an occupied mode sits in the qubit ground state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::c;
use crate::pauli::{Factor, PauliString, WeightedPauliSum};

pub const MAX_MODES: usize = 4;

/// Lattice site and particle species of one fermionic mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FermionMode {
    pub index: usize,
    pub site: char,
    pub species: u8,
}

/// Mode table of the two-site, two-species asymmetric Hubbard model.
/// The qubit order follows the Jordan-Wigner chain x1, y1, y2, x2.
pub fn asymmetric_hubbard_modes() -> [FermionMode; 4] {
    [
        FermionMode {
            index: 0,
            site: 'x',
            species: 1,
        },
        FermionMode {
            index: 1,
            site: 'y',
            species: 1,
        },
        FermionMode {
            index: 2,
            site: 'y',
            species: 2,
        },
        FermionMode {
            index: 3,
            site: 'x',
            species: 2,
        },
    ]
}

fn ahm_index(site: char, species: u8) -> usize {
    asymmetric_hubbard_modes()
        .iter()
        .find(|m| m.site == site && m.species == species)
        .map(|m| m.index)
        .expect("mode table covers both sites and species")
}

/// H = Σ -V (b_i† b_j + b_j† b_i) + Σ U n_i n_j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FermionModel {
    pub modes: usize,
    #[serde(default)]
    pub hopping: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub repulsion: Vec<(usize, usize, f64)>,
}

impl FermionModel {
    pub fn new(modes: usize, hopping: Vec<(usize, usize, f64)>, repulsion: Vec<(usize, usize, f64)>) -> Result<Self> {
        let model = Self {
            modes,
            hopping,
            repulsion,
        };
        model.validate()?;
        Ok(model)
    }

    /// Two modes with hopping `v` and repulsion `u`.
    pub fn two_mode(v: f64, u: f64) -> Self {
        Self {
            modes: 2,
            hopping: vec![(0, 1, v)],
            repulsion: vec![(0, 1, u)],
        }
    }

    /// Open three-mode chain: hopping and repulsion on both adjacent pairs.
    pub fn three_mode_chain(v: f64, u: f64) -> Self {
        Self {
            modes: 3,
            hopping: vec![(0, 1, v), (1, 2, v)],
            repulsion: vec![(0, 1, u), (1, 2, u)],
        }
    }

    /// Two sites (x, y) and two species (1, 2). A vanishing `u_x` drops the
    /// x-site interaction entirely, which removes its gates from the circuit.
    pub fn asymmetric_hubbard(v1: f64, v2: f64, u_x: f64, u_y: f64) -> Self {
        let mut repulsion = Vec::new();
        if u_x != 0.0 {
            repulsion.push((ahm_index('x', 1), ahm_index('x', 2), u_x));
        }
        repulsion.push((ahm_index('y', 1), ahm_index('y', 2), u_y));
        Self {
            modes: 4,
            hopping: vec![
                (ahm_index('x', 1), ahm_index('y', 1), v1),
                (ahm_index('y', 2), ahm_index('x', 2), v2),
            ],
            repulsion,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_MODES).contains(&self.modes) {
            return Err(Error::Model(format!(
                "mode count {} outside 2..={MAX_MODES}",
                self.modes
            )));
        }
        for (kind, list) in [("hopping", &self.hopping), ("repulsion", &self.repulsion)] {
            for &(i, j, w) in list {
                if i == j {
                    return Err(Error::Model(format!("{kind} pair ({i}, {j}) repeats a mode")));
                }
                if i >= self.modes || j >= self.modes {
                    return Err(Error::Model(format!(
                        "{kind} pair ({i}, {j}) outside {} modes",
                        self.modes
                    )));
                }
                if !w.is_finite() {
                    return Err(Error::Model(format!("{kind} strength {w} is not finite")));
                }
            }
        }
        Ok(())
    }
}

pub fn jw_creation(mode: usize, n_modes: usize) -> Result<PauliString> {
    if n_modes > MAX_MODES || mode >= n_modes {
        return Err(Error::ModeRange { mode, modes: n_modes });
    }
    let mut factors = vec![Factor::I; n_modes];
    for f in factors.iter_mut().take(mode) {
        *f = Factor::Z;
    }
    factors[mode] = Factor::Raise;
    Ok(PauliString::new(factors, c(1.0, 0.0)))
}

pub fn jw_annihilation(mode: usize, n_modes: usize) -> Result<PauliString> {
    Ok(jw_creation(mode, n_modes)?.adjoint())
}

/// ab + ba expanded into Pauli strings.
pub fn anticommutator(a: &PauliString, b: &PauliString) -> Result<WeightedPauliSum> {
    let a = WeightedPauliSum::from(a.clone());
    let b = WeightedPauliSum::from(b.clone());
    a.mul(&b)?.add(&b.mul(&a)?)
}

fn number_operator(mode: usize, n: usize) -> Result<WeightedPauliSum> {
    let create = WeightedPauliSum::from(jw_creation(mode, n)?);
    let annihilate = WeightedPauliSum::from(jw_annihilation(mode, n)?);
    create.mul(&annihilate)
}

/// b_i† b_j + b_j† b_i
pub fn hopping_operator(i: usize, j: usize, n: usize) -> Result<WeightedPauliSum> {
    let ci = WeightedPauliSum::from(jw_creation(i, n)?);
    let cj = WeightedPauliSum::from(jw_creation(j, n)?);
    let ai = WeightedPauliSum::from(jw_annihilation(i, n)?);
    let aj = WeightedPauliSum::from(jw_annihilation(j, n)?);
    ci.mul(&aj)?.add(&cj.mul(&ai)?)
}

/// Jordan-Wigner image of the model; the identity component is kept in the
/// offset and zero terms are dropped.
pub fn spin_hamiltonian(model: &FermionModel) -> Result<WeightedPauliSum> {
    model.validate()?;
    let n = model.modes;
    let mut h = WeightedPauliSum::new(n);
    for &(i, j, v) in &model.hopping {
        h = h.add(&hopping_operator(i, j, n)?.scale(c(-v, 0.0)))?;
    }
    for &(i, j, u) in &model.repulsion {
        let pair = number_operator(i, n)?.mul(&number_operator(j, n)?)?;
        h = h.add(&pair.scale(c(u, 0.0)))?;
    }
    h.simplified().verify_hermitian()
}
