//! Hamiltonians, unitaries and canonical states of the spin ring and its qubit environment.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, identity, kron_all, ComplexMatrix, ComplexVector, DensityMatrix, C64};

/// Physical parameters of one simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub j_x: f64,
    pub j_y: f64,
    pub j_z: f64,
    /// System-environment flip-flop coupling.
    pub g: f64,
    /// Partial-SWAP angle between consecutive environment qubits, in [0, π/2].
    #[serde(default)]
    pub theta: f64,
    /// Environment qubit splitting, `H_E = ω σz / 2`.
    #[serde(default = "default_omega")]
    pub omega: f64,
    /// Inverse temperature; `"inf"` in JSON selects zero temperature.
    #[serde(with = "inverse_temperature")]
    pub beta: f64,
    /// Duration of every collision.
    pub tau: f64,
    #[serde(default = "default_n_sys")]
    pub n_sys: usize,
}

mod inverse_temperature {
    use serde::{de, Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(beta: &f64, s: S) -> Result<S::Ok, S::Error> {
        if beta.is_infinite() && *beta > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*beta)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) if matches!(t.as_str(), "inf" | "infinity") => Ok(f64::INFINITY),
            Repr::Text(t) => Err(de::Error::custom(format!("beta must be a number or \"inf\", got \"{t}\""))),
        }
    }
}

fn default_omega() -> f64 {
    1.0
}

fn default_n_sys() -> usize {
    3
}

impl ModelParams {
    /// The Markovian reference point with `γ = 1` used throughout the examples.
    pub fn ring(j_x: f64, beta: f64) -> Self {
        Self {
            j_x,
            j_y: -1.0,
            j_z: 1.0,
            g: 10.0,
            theta: 0.0,
            omega: 1.0,
            beta,
            tau: 0.01,
            n_sys: 3,
        }
    }

    /// Decay rate `γ = g² τ`.
    pub fn gamma(&self) -> f64 {
        self.g * self.g * self.tau
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("j_x", self.j_x),
            ("j_y", self.j_y),
            ("j_z", self.j_z),
            ("g", self.g),
            ("theta", self.theta),
            ("omega", self.omega),
            ("tau", self.tau),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
            }
        }
        if self.tau <= 0.0 {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {}", self.tau)));
        }
        // infinite beta is a legitimate zero-temperature limit
        if self.beta.is_nan() || self.beta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "beta must be non-negative, got {}",
                self.beta
            )));
        }
        check_theta(self.theta)?;
        if self.n_sys < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_sys must be at least 2, got {}",
                self.n_sys
            )));
        }
        if self.n_sys > 6 {
            return Err(Error::InvalidParameter(format!(
                "n_sys = {} is beyond the dense-matrix range supported here",
                self.n_sys
            )));
        }
        Ok(())
    }

    pub fn sys_dim(&self) -> usize {
        1 << self.n_sys
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..=FRAC_PI_2 + 1e-12).contains(&theta) {
        return Err(Error::InvalidParameter(format!(
            "theta must lie in [0, pi/2], got {theta}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PauliAxis {
    X,
    Y,
    Z,
    /// `σ⁺ = |↑⟩⟨↓|`
    Plus,
    /// `σ⁻ = |↓⟩⟨↑|`
    Minus,
}

pub fn pauli(axis: PauliAxis) -> ComplexMatrix {
    let o = c(0., 0.);
    let l = c(1., 0.);
    let entries = match axis {
        PauliAxis::X => [o, l, l, o],
        PauliAxis::Y => [o, c(0., -1.), c(0., 1.), o],
        PauliAxis::Z => [l, o, o, -l],
        PauliAxis::Plus => [o, l, o, o],
        PauliAxis::Minus => [o, o, l, o],
    };
    ComplexMatrix::from_row_slice(2, 2, &entries)
}

/// Single-site operator `I ⊗ … ⊗ σ ⊗ … ⊗ I` on `n_sites` qubits.
pub fn pauli_embed(axis: PauliAxis, site: usize, n_sites: usize) -> Result<ComplexMatrix> {
    if site >= n_sites {
        return Err(Error::FactorOutOfRange {
            index: site,
            count: n_sites,
        });
    }
    let id = identity(2);
    let s = pauli(axis);
    Ok(kron_all((0..n_sites).map(|k| if k == site { &s } else { &id })))
}

// Indices are validated by the callers below.
fn embed(axis: PauliAxis, site: usize, n: usize) -> ComplexMatrix {
    pauli_embed(axis, site, n).expect("site in range")
}

/// Periodic XYZ ring Hamiltonian.
pub fn build_system_hamiltonian(p: &ModelParams) -> ComplexMatrix {
    let n = p.n_sys;
    let d = 1 << n;
    let mut h = ComplexMatrix::zeros(d, d);
    for (axis, j) in [(PauliAxis::X, p.j_x), (PauliAxis::Y, p.j_y), (PauliAxis::Z, p.j_z)] {
        if j == 0.0 {
            continue;
        }
        for m in 0..n {
            h += embed(axis, m, n) * embed(axis, (m + 1) % n, n) * c(j, 0.);
        }
    }
    h
}

/// Flip-flop between system site `site` and the environment qubit, without the factor g.
pub fn flip_flop(site: usize, n_sys: usize) -> ComplexMatrix {
    let n = n_sys + 1;
    let a = embed(PauliAxis::Minus, site, n) * embed(PauliAxis::Plus, n_sys, n);
    let b = a.adjoint();
    a + b
}

/// Collective flip-flop `g Σ_m (σ⁻_m σ⁺_E + h.c.)` with the environment qubit appended last.
pub fn build_interaction_hamiltonian(p: &ModelParams) -> ComplexMatrix {
    let n = p.n_sys;
    let d = 1 << (n + 1);
    let mut h = ComplexMatrix::zeros(d, d);
    for m in 0..n {
        h += flip_flop(m, n);
    }
    h * c(p.g, 0.)
}

/// Two-qubit SWAP in the shared basis.
pub fn swap_gate() -> ComplexMatrix {
    let mut s = ComplexMatrix::zeros(4, 4);
    s[(0, 0)] = c(1., 0.);
    s[(1, 2)] = c(1., 0.);
    s[(2, 1)] = c(1., 0.);
    s[(3, 3)] = c(1., 0.);
    s
}

/// Partial SWAP `cos θ I + i sin θ SWAP` between consecutive environment qubits.
pub fn build_env_swap_unitary(theta: f64) -> Result<ComplexMatrix> {
    check_theta(theta)?;
    Ok(identity(4) * c(theta.cos(), 0.) + swap_gate() * c(0., theta.sin()))
}

/// Excited population `p_↑ = 1 / (1 + e^{βω})` of the thermal qubit.
pub fn thermal_up_population(beta: f64, omega: f64) -> f64 {
    let x = beta * omega;
    if x == 0.0 || x.is_nan() {
        // 0 * inf: treat an untouched qubit as fully mixed
        return 0.5;
    }
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Gibbs state of `H_E = ω σz / 2`.
pub fn thermal_state(beta: f64, omega: f64) -> DensityMatrix {
    let up = thermal_up_population(beta, omega);
    let m = ComplexMatrix::from_diagonal(&ComplexVector::from_vec(vec![c(up, 0.), c(1.0 - up, 0.)]));
    DensityMatrix::new(m, vec![2]).expect("2x2 state")
}

/// `ξ = ⟨σ⁺σ⁻⟩ − ⟨σ⁻σ⁺⟩` of the thermal qubit, which equals `−tanh(βω/2)`.
pub fn env_correlation(beta: f64, omega: f64) -> f64 {
    2.0 * thermal_up_population(beta, omega) - 1.0
}

pub fn env_hamiltonian(omega: f64) -> ComplexMatrix {
    pauli(PauliAxis::Z) * c(omega / 2.0, 0.)
}

/// Product of equatorial states with phases `2πm/3`, `m = 1, 2, 3`.
pub fn initial_120_state(n_sys: usize) -> Result<DensityMatrix> {
    if n_sys != 3 {
        return Err(Error::InvalidParameter(format!(
            "the 120-degree state is defined for 3 sites, got {n_sys}"
        )));
    }
    let s = 1.0 / 2f64.sqrt();
    let mut psi = ComplexVector::from_element(1, c(1., 0.));
    for m in 1..=3 {
        let phase = C64::from_polar(s, 2.0 * PI * m as f64 / 3.0);
        let site = ComplexVector::from_vec(vec![c(s, 0.), phase]);
        psi = psi.kronecker(&site);
    }
    DensityMatrix::from_pure(&psi, vec![2; 3])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    Raise,
    Lower,
}

/// `A^± = Σ_m σ^±_m`.
pub fn collective_ladder(sign: Ladder, n_sys: usize) -> ComplexMatrix {
    let axis = match sign {
        Ladder::Raise => PauliAxis::Plus,
        Ladder::Lower => PauliAxis::Minus,
    };
    let d = 1 << n_sys;
    (0..n_sys).fold(ComplexMatrix::zeros(d, d), |acc, m| acc + embed(axis, m, n_sys))
}

pub fn total_sz(n_sites: usize) -> ComplexMatrix {
    let d = 1 << n_sites;
    (0..n_sites).fold(ComplexMatrix::zeros(d, d), |acc, m| {
        acc + embed(PauliAxis::Z, m, n_sites)
    })
}

/// `|↓…↓⟩`, the last computational basis vector.
pub fn all_down_vector(n_sys: usize) -> ComplexVector {
    let d = 1 << n_sys;
    let mut v = ComplexVector::zeros(d);
    v[d - 1] = c(1., 0.);
    v
}

pub fn all_down_state(n_sys: usize) -> DensityMatrix {
    DensityMatrix::from_pure(&all_down_vector(n_sys), vec![2; n_sys]).expect("pure state")
}
