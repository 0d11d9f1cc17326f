//! Stepwise entropy production, heat and work of collision runs.
//!
//! Heat is counted positive when it flows into the environment, so the
//! entropy flux `Φ = β ΔQ_E` is non-negative during relaxation.

use serde::Serialize;

use crate::collision::{EnvRecordKind, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::linalg::{identity, trace_of_product, von_neumann_entropy, ComplexMatrix, DensityMatrix};
use crate::model::{build_system_hamiltonian, env_hamiltonian, ModelParams};

pub fn step_entropy_increment(rho_prev: &DensityMatrix, rho_next: &DensityMatrix) -> Result<f64> {
    same_dims(rho_prev, rho_next)?;
    Ok(von_neumann_entropy(rho_next) - von_neumann_entropy(rho_prev))
}

fn same_dims(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "states of dimension {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

fn energy_change(h: &ComplexMatrix, pre: &DensityMatrix, post: &DensityMatrix) -> Result<f64> {
    same_dims(pre, post)?;
    if h.nrows() != pre.dim() {
        return Err(Error::DimensionMismatch(format!(
            "operator of dimension {} on a {}-dimensional state",
            h.nrows(),
            pre.dim()
        )));
    }
    Ok((trace_of_product(h, post.matrix()) - trace_of_product(h, pre.matrix())).re)
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "entropy flux needs a finite non-negative beta, got {beta}"
        )));
    }
    Ok(())
}

/// Heat `tr[H_E (post − pre)]` deposited in one environment qubit.
pub fn step_heat_markov(env_pre: &DensityMatrix, env_post: &DensityMatrix, omega: f64) -> Result<f64> {
    energy_change(&env_hamiltonian(omega), env_pre, env_post)
}

/// `Φ = β tr[(ω σz / 2)(post − pre)]`.
pub fn step_entropy_flux_markov(
    env_pre: &DensityMatrix,
    env_post: &DensityMatrix,
    beta: f64,
    omega: f64,
) -> Result<f64> {
    check_beta(beta)?;
    Ok(beta * step_heat_markov(env_pre, env_post, omega)?)
}

/// Energy operator used for the two environment qubits around a partial SWAP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxReading {
    /// `H ⊗ I + I ⊗ H`, the total energy of the pair.
    #[default]
    TotalEnergy,
    /// `H ⊗ H`, kept for comparison only; it is not an energy.
    LiteralProduct,
}

pub fn pair_energy_operator(omega: f64, reading: FluxReading) -> ComplexMatrix {
    let h = env_hamiltonian(omega);
    match reading {
        FluxReading::TotalEnergy => h.kronecker(&identity(2)) + identity(2).kronecker(&h),
        FluxReading::LiteralProduct => h.kronecker(&h),
    }
}

pub fn step_heat_nonmarkov(
    pair_pre: &DensityMatrix,
    pair_post: &DensityMatrix,
    omega: f64,
    reading: FluxReading,
) -> Result<f64> {
    energy_change(&pair_energy_operator(omega, reading), pair_pre, pair_post)
}

/// `β` times the energy change of the two environment qubits.
pub fn step_entropy_flux_nonmarkov(
    pair_pre: &DensityMatrix,
    pair_post: &DensityMatrix,
    beta: f64,
    omega: f64,
) -> Result<f64> {
    step_entropy_flux_nonmarkov_with(pair_pre, pair_post, beta, omega, FluxReading::TotalEnergy)
}

pub fn step_entropy_flux_nonmarkov_with(
    pair_pre: &DensityMatrix,
    pair_post: &DensityMatrix,
    beta: f64,
    omega: f64,
    reading: FluxReading,
) -> Result<f64> {
    check_beta(beta)?;
    Ok(beta * step_heat_nonmarkov(pair_pre, pair_post, omega, reading)?)
}

/// Internal-energy change `tr[H_S (ρ_next − ρ_prev)]`.
pub fn step_work_ingredients(
    rho_prev: &DensityMatrix,
    rho_next: &DensityMatrix,
    h_s: &ComplexMatrix,
) -> Result<f64> {
    energy_change(h_s, rho_prev, rho_next)
}

/// Per-step and cumulative thermodynamic quantities; entry `k` belongs to step `k + 1`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ThermoLedger {
    pub beta: f64,
    pub entropy_change: Vec<f64>,
    pub flux: Vec<f64>,
    pub production: Vec<f64>,
    pub energy_change: Vec<f64>,
    pub heat: Vec<f64>,
    pub cum_entropy_change: Vec<f64>,
    pub cum_flux: Vec<f64>,
    pub cum_production: Vec<f64>,
    pub cum_energy_change: Vec<f64>,
    pub cum_heat: Vec<f64>,
    pub cum_work: Vec<f64>,
}

impl ThermoLedger {
    pub fn len(&self) -> usize {
        self.production.len()
    }

    pub fn is_empty(&self) -> bool {
        self.production.is_empty()
    }

    fn push(&mut self, ds: f64, heat: f64, du: f64) {
        let flux = self.beta * heat;
        let last = |v: &Vec<f64>| v.last().copied().unwrap_or(0.0);
        let (cs, cf, cu, cq) = (
            last(&self.cum_entropy_change) + ds,
            last(&self.cum_flux) + flux,
            last(&self.cum_energy_change) + du,
            last(&self.cum_heat) + heat,
        );
        self.entropy_change.push(ds);
        self.flux.push(flux);
        self.production.push(ds + flux);
        self.energy_change.push(du);
        self.heat.push(heat);
        self.cum_entropy_change.push(cs);
        self.cum_flux.push(cf);
        self.cum_production.push(cs + cf);
        self.cum_energy_change.push(cu);
        self.cum_heat.push(cq);
        self.cum_work.push(cu + cq);
    }
}

/// Assembles the ledger from the states a trajectory recorded with `record.thermo`.
pub fn ledger_from_trajectory(traj: &TrajectoryRecord, p: &ModelParams) -> Result<ThermoLedger> {
    ledger_with_reading(traj, p, FluxReading::TotalEnergy)
}

pub fn ledger_with_reading(
    traj: &TrajectoryRecord,
    p: &ModelParams,
    reading: FluxReading,
) -> Result<ThermoLedger> {
    let th = traj.thermo.as_ref().ok_or_else(|| {
        Error::MissingIngredients("trajectory was run without thermodynamic recording".into())
    })?;
    let n = th.system.len();
    if th.env_pre.len() != n || th.env_post.len() != n {
        return Err(Error::MissingIngredients(format!(
            "{n} system states but {} / {} environment states",
            th.env_pre.len(),
            th.env_post.len()
        )));
    }
    check_beta(p.beta)?;
    let h_s = build_system_hamiltonian(p);
    let mut ledger = ThermoLedger {
        beta: p.beta,
        ..ThermoLedger::default()
    };
    let mut prev = &th.initial_system;
    let mut s_prev = von_neumann_entropy(prev);
    for k in 0..n {
        let next = &th.system[k];
        let s_next = von_neumann_entropy(next);
        let heat = match th.kind {
            EnvRecordKind::Single => step_heat_markov(&th.env_pre[k], &th.env_post[k], p.omega)?,
            EnvRecordKind::Pair => step_heat_nonmarkov(&th.env_pre[k], &th.env_post[k], p.omega, reading)?,
        };
        let du = step_work_ingredients(prev, next, &h_s)?;
        ledger.push(s_next - s_prev, heat, du);
        prev = next;
        s_prev = s_next;
    }
    Ok(ledger)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::model::{swap_gate, thermal_state, thermal_up_population};

    fn up() -> DensityMatrix {
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(0, 0)] = c(1., 0.);
        DensityMatrix::qubits(m, 1).unwrap()
    }

    #[test]
    fn entropy_increment_examples() {
        let mixed = DensityMatrix::qubits(identity(8) * c(0.125, 0.), 3).unwrap();
        let pure = crate::model::all_down_state(3);
        assert_eq!(step_entropy_increment(&pure, &pure).unwrap(), 0.0);
        assert!((step_entropy_increment(&pure, &mixed).unwrap() - 3.0 * 2f64.ln()).abs() < 1e-12);
        assert!(step_entropy_increment(&pure, &up()).is_err());
    }

    #[test]
    fn markov_flux_examples() {
        let eta = thermal_state(10.0, 1.0);
        assert_eq!(step_entropy_flux_markov(&eta, &eta, 10.0, 1.0).unwrap(), 0.0);
        let p_up = thermal_up_population(10.0, 1.0);
        let phi = step_entropy_flux_markov(&eta, &up(), 10.0, 1.0).unwrap();
        assert!((phi - 10.0 * 1.0 * (1.0 - p_up)).abs() < 1e-12);
        assert!(step_entropy_flux_markov(&eta, &up(), f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn pair_flux_examples() {
        let eta = thermal_state(10.0, 1.0);
        let pre = DensityMatrix::qubits(up().matrix().kronecker(eta.matrix()), 2).unwrap();
        assert_eq!(step_entropy_flux_nonmarkov(&pre, &pre, 10.0, 1.0).unwrap(), 0.0);
        let s = swap_gate();
        let post = DensityMatrix::qubits(&s * pre.matrix() * s.adjoint(), 2).unwrap();
        assert!(step_entropy_flux_nonmarkov(&pre, &post, 10.0, 1.0).unwrap().abs() < 1e-14);

        // untouched fresh qubit: the pair flux is the single-qubit flux of the first slot
        let pre1 = DensityMatrix::qubits(eta.matrix().kronecker(eta.matrix()), 2).unwrap();
        let post1 = DensityMatrix::qubits(up().matrix().kronecker(eta.matrix()), 2).unwrap();
        let single = step_entropy_flux_markov(&eta, &up(), 10.0, 1.0).unwrap();
        let pair = step_entropy_flux_nonmarkov(&pre1, &post1, 10.0, 1.0).unwrap();
        assert!((single - pair).abs() < 1e-12);
    }

    #[test]
    fn stationary_state_has_no_energy_change() {
        let rho = crate::model::all_down_state(3);
        let h = build_system_hamiltonian(&ModelParams::ring(-1.0, 10.0));
        assert_eq!(step_work_ingredients(&rho, &rho, &h).unwrap(), 0.0);
    }

    #[test]
    fn ledger_identities() {
        let mut l = ThermoLedger {
            beta: 2.0,
            ..Default::default()
        };
        for k in 0..5 {
            l.push(0.1 * k as f64, -0.03 * k as f64, 0.2);
        }
        for k in 0..5 {
            assert_eq!(l.cum_production[k], l.cum_entropy_change[k] + l.cum_flux[k]);
            assert_eq!(l.cum_work[k], l.cum_energy_change[k] + l.cum_heat[k]);
        }
    }
}
