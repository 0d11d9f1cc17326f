//! Stroboscopic collision loops.
//!
//! One Markovian step is `ρ ↦ tr_E[W (ρ ⊗ η) W†]` with `W = U_I (U_S ⊗ I)`.
//! It is applied through the Kraus operators `K_aj = sqrt(p_j) ⟨a|W|j⟩`, where
//! `p_j` are the thermal populations, so the 2d-dimensional joint state is never
//! formed.
//!
//! A non-Markovian step carries the joint state of the system and the last
//! environment qubit. After `W` acts, that qubit collides with a fresh thermal
//! one through the partial SWAP and is traced out, which is the single-qubit
//! channel `c ↦ Σ_aj p_j k_aj c k_aj†` with `(k_aj)_bc = ⟨a b|U_E|c j⟩`.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c, identity, partial_trace, trace_of_product, unitary_propagator,
    ComplexMatrix, DensityMatrix, C64,
};
use crate::model::{
    build_env_swap_unitary, build_interaction_hamiltonian, build_system_hamiltonian, flip_flop,
    pauli_embed, thermal_state, thermal_up_population, ModelParams, PauliAxis,
};
use crate::observables::{
    l1_coherence_raw, mutual_information, sync_operators, SyncValue, TimeSeries,
};
use crate::rng::{random_permutation, rng_from_seed, SimRng};

pub const SNAPSHOT_GUARD_STEPS: usize = 100_000;
pub const SNAPSHOT_GUARD_STRIDE: usize = 10;

/// How the system spins meet each environment qubit. Site orders are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CollisionMode {
    Collective,
    SequentialFixed { order: Vec<usize> },
    /// A fresh uniformly random order every step.
    SequentialRandom { seed: u64 },
}

/// Optional per-step quantities. Per-site `⟨σx⟩, ⟨σy⟩, ⟨σz⟩` are always recorded.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecordSpec {
    /// `Q_jk` for every pair of sites.
    pub sync: bool,
    pub coherence: bool,
    /// `⟨σx_1 σx_2⟩`.
    pub sxsx12: bool,
    /// Mutual information between sites 1 and 2.
    pub mutual_info: bool,
    /// System and environment states needed for the thermodynamic ledger.
    pub thermo: bool,
    /// Keep every `k`-th system state; 0 keeps none.
    pub snapshot_stride: usize,
}

#[derive(Debug, Clone)]
pub struct CollisionConfig {
    pub params: ModelParams,
    pub mode: CollisionMode,
    pub markovian: bool,
    pub n_steps: usize,
    pub initial_state: DensityMatrix,
    pub record: RecordSpec,
}

impl CollisionConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n_steps == 0 {
            return Err(Error::InvalidParameter("n_steps must be at least 1".into()));
        }
        let n = self.params.n_sys;
        if self.initial_state.factor_dims() != vec![2; n].as_slice() {
            return Err(Error::InvalidFactors(format!(
                "initial state factors {:?} do not match {n} system qubits",
                self.initial_state.factor_dims()
            )));
        }
        self.initial_state.validate()?;
        if let CollisionMode::SequentialFixed { order } = &self.mode {
            check_permutation(order, n)?;
        }
        let stride = self.record.snapshot_stride;
        if self.n_steps > SNAPSHOT_GUARD_STEPS && stride > 0 && stride < SNAPSHOT_GUARD_STRIDE {
            return Err(Error::MemoryGuard(format!(
                "{} steps with snapshot stride {stride}; use a stride of at least {SNAPSHOT_GUARD_STRIDE}",
                self.n_steps
            )));
        }
        if self.n_steps > SNAPSHOT_GUARD_STEPS && self.record.thermo {
            return Err(Error::MemoryGuard(format!(
                "thermodynamic ingredients store every state; {} steps exceeds {SNAPSHOT_GUARD_STEPS}",
                self.n_steps
            )));
        }
        Ok(())
    }
}

pub fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    let ok = order.len() == n
        && order.iter().all(|&k| {
            if k >= n || seen[k] {
                false
            } else {
                seen[k] = true;
                true
            }
        });
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidPermutation {
            order: order.to_vec(),
            n,
        })
    }
}

fn pair_unitary(site: usize, p: &ModelParams) -> Result<ComplexMatrix> {
    unitary_propagator(&(flip_flop(site, p.n_sys) * c(p.g, 0.)), p.tau)
}

/// Product of pairwise flip-flop collisions, the first collider acting first (rightmost).
pub fn sequential_collision_unitary(order: &[usize], p: &ModelParams) -> Result<ComplexMatrix> {
    check_permutation(order, p.n_sys)?;
    let mut u = identity(2 << p.n_sys);
    for &site in order {
        u = pair_unitary(site, p)? * u;
    }
    Ok(u)
}

/// Everything needed to apply one collision with a given site order.
#[derive(Debug, Clone)]
pub struct StepOps {
    /// `U_I (U_S ⊗ I)` on system ⊗ environment.
    pub w: ComplexMatrix,
    /// `kraus[j][a] = sqrt(p_j) ⟨a|W|j⟩`, only for populated `j`.
    kraus: Vec<[ComplexMatrix; 2]>,
}

/// Precomputed unitaries and channels of one parameter point.
pub struct CollisionEngine {
    params: ModelParams,
    u_s_ext: ComplexMatrix,
    pair_unitaries: Vec<ComplexMatrix>,
    populations: [f64; 2],
    eta: ComplexMatrix,
    u_e: ComplexMatrix,
    /// `Σ_aj p_j k_aj ⊗ k_aj*`, the carried-qubit channel on row-major vectorized 2x2 blocks.
    env_super: ComplexMatrix,
    fixed: Option<Arc<StepOps>>,
    cache: HashMap<Vec<usize>, Arc<StepOps>>,
    rng: Option<SimRng>,
}

impl CollisionEngine {
    pub fn new(params: &ModelParams, mode: &CollisionMode) -> Result<Self> {
        params.validate()?;
        let n = params.n_sys;
        let d = 1usize << n;
        let u_s = unitary_propagator(&build_system_hamiltonian(params), params.tau)?;
        let u_s_ext = u_s.kronecker(&identity(2));
        let pair_unitaries = (0..n)
            .map(|m| pair_unitary(m, params))
            .collect::<Result<Vec<_>>>()?;
        let up = thermal_up_population(params.beta, params.omega);
        let populations = [up, 1.0 - up];
        let eta = thermal_state(params.beta, params.omega).into_matrix();
        let u_e = build_env_swap_unitary(params.theta)?;

        let mut env_super = ComplexMatrix::zeros(4, 4);
        for (j, &pj) in populations.iter().enumerate() {
            for a in 0..2 {
                let k = ComplexMatrix::from_fn(2, 2, |b, cc| u_e[(2 * a + b, 2 * cc + j)]);
                env_super += k.kronecker(&k.conjugate()) * c(pj, 0.);
            }
        }

        let mut engine = Self {
            params: *params,
            u_s_ext,
            pair_unitaries,
            populations,
            eta,
            u_e,
            env_super,
            fixed: None,
            cache: HashMap::new(),
            rng: None,
        };
        match mode {
            CollisionMode::Collective => {
                let u_i = unitary_propagator(&build_interaction_hamiltonian(params), params.tau)?;
                engine.fixed = Some(Arc::new(engine.ops_for(&u_i, d)));
            }
            CollisionMode::SequentialFixed { order } => {
                check_permutation(order, n)?;
                let u_i = engine.sequential_unitary(order);
                engine.fixed = Some(Arc::new(engine.ops_for(&u_i, d)));
            }
            CollisionMode::SequentialRandom { seed } => {
                engine.rng = Some(rng_from_seed(*seed));
            }
        }
        Ok(engine)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    fn sequential_unitary(&self, order: &[usize]) -> ComplexMatrix {
        order
            .iter()
            .fold(identity(2 << self.params.n_sys), |u, &m| &self.pair_unitaries[m] * u)
    }

    fn ops_for(&self, u_i: &ComplexMatrix, d: usize) -> StepOps {
        let w = u_i * &self.u_s_ext;
        let mut kraus = Vec::new();
        for (j, &pj) in self.populations.iter().enumerate() {
            if pj == 0.0 {
                continue;
            }
            let s = pj.sqrt();
            let k = |a: usize| ComplexMatrix::from_fn(d, d, |r, cc| w[(2 * r + a, 2 * cc + j)] * s);
            kraus.push([k(0), k(1)]);
        }
        StepOps { w, kraus }
    }

    /// Operators of the next collision; draws a new order in random mode.
    pub fn next_ops(&mut self) -> Arc<StepOps> {
        if let Some(ops) = &self.fixed {
            return Arc::clone(ops);
        }
        let n = self.params.n_sys;
        let rng = self.rng.as_mut().expect("random mode owns a generator");
        let order = random_permutation(n, rng);
        if let Some(ops) = self.cache.get(&order) {
            return Arc::clone(ops);
        }
        let u_i = self.sequential_unitary(&order);
        let ops = Arc::new(self.ops_for(&u_i, 1 << n));
        self.cache.insert(order, Arc::clone(&ops));
        ops
    }

    /// Markovian update of a system state; optionally also the outgoing environment qubit.
    pub fn markov_apply(
        &self,
        ops: &StepOps,
        rho: &ComplexMatrix,
        with_env: bool,
    ) -> (ComplexMatrix, Option<ComplexMatrix>) {
        let d = rho.nrows();
        let mut out = ComplexMatrix::zeros(d, d);
        let mut env = with_env.then(|| ComplexMatrix::zeros(2, 2));
        for pair in &ops.kraus {
            let kr = [&pair[0] * rho, &pair[1] * rho];
            for a in 0..2 {
                out += &kr[a] * pair[a].adjoint();
            }
            if let Some(env) = env.as_mut() {
                for a in 0..2 {
                    for b in 0..2 {
                        env[(a, b)] += kr[a]
                            .iter()
                            .zip(pair[b].iter())
                            .map(|(x, y)| x * y.conj())
                            .sum::<C64>();
                    }
                }
            }
        }
        (hermitize(out), env.map(hermitize))
    }

    /// Non-Markovian update of the system ⊗ carried-qubit state.
    ///
    /// The optional pair is `(ρ_{E_n} ⊗ η, U_E (ρ'_{E_n} ⊗ η) U_E†)`: the two
    /// environment qubits before the step and after both collisions.
    pub fn nonmarkov_apply(
        &self,
        ops: &StepOps,
        rho_se: &ComplexMatrix,
        with_pair: bool,
    ) -> (ComplexMatrix, Option<(ComplexMatrix, ComplexMatrix)>) {
        let sigma = &ops.w * rho_se * ops.w.adjoint();
        let out = apply_blockwise(&self.env_super, &sigma);
        let pair = with_pair.then(|| {
            let pre = env_marginal(rho_se).kronecker(&self.eta);
            let mid = env_marginal(&sigma).kronecker(&self.eta);
            let post = &self.u_e * mid * self.u_e.adjoint();
            (hermitize(pre), hermitize(post))
        });
        (hermitize(out), pair)
    }
}

/// Applies a 4x4 superoperator to every 2x2 block of the last qubit.
fn apply_blockwise(sup: &ComplexMatrix, sigma: &ComplexMatrix) -> ComplexMatrix {
    let d = sigma.nrows() / 2;
    let mut out = ComplexMatrix::zeros(2 * d, 2 * d);
    for r in 0..d {
        for s in 0..d {
            let block = [
                sigma[(2 * r, 2 * s)],
                sigma[(2 * r, 2 * s + 1)],
                sigma[(2 * r + 1, 2 * s)],
                sigma[(2 * r + 1, 2 * s + 1)],
            ];
            for (o, (b, cc)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
                out[(2 * r + b, 2 * s + cc)] = (0..4).map(|i| sup[(o, i)] * block[i]).sum();
            }
        }
    }
    out
}

fn hermitize(m: ComplexMatrix) -> ComplexMatrix {
    (&m + m.adjoint()) * c(0.5, 0.)
}

/// Reduced state of the last qubit of a joint state.
fn env_marginal(joint: &ComplexMatrix) -> ComplexMatrix {
    let d = joint.nrows() / 2;
    ComplexMatrix::from_fn(2, 2, |a, b| (0..d).map(|r| joint[(2 * r + a, 2 * r + b)]).sum())
}

/// Reduced state of everything but the last qubit.
fn system_marginal(joint: &ComplexMatrix) -> ComplexMatrix {
    let d = joint.nrows() / 2;
    ComplexMatrix::from_fn(d, d, |r, s| joint[(2 * r, 2 * s)] + joint[(2 * r + 1, 2 * s + 1)])
}

/// One Markovian collision; returns the new system state and the outgoing environment qubit.
///
/// In random-order mode the order is the first one drawn from the configured seed.
pub fn markov_step(rho_s: &DensityMatrix, cfg: &CollisionConfig) -> Result<(DensityMatrix, DensityMatrix)> {
    let n = cfg.params.n_sys;
    if rho_s.factor_dims() != vec![2; n].as_slice() {
        return Err(Error::InvalidFactors(format!(
            "system state factors {:?} do not match {n} qubits",
            rho_s.factor_dims()
        )));
    }
    let mut engine = CollisionEngine::new(&cfg.params, &cfg.mode)?;
    let ops = engine.next_ops();
    let (out, env) = engine.markov_apply(&ops, rho_s.matrix(), true);
    Ok((
        DensityMatrix::qubits(out, n)?,
        DensityMatrix::qubits(env.expect("requested"), 1)?,
    ))
}

/// One non-Markovian collision on the system ⊗ carried-qubit state.
pub fn nonmarkov_step(rho_se: &DensityMatrix, cfg: &CollisionConfig) -> Result<DensityMatrix> {
    let n = cfg.params.n_sys;
    if rho_se.factor_dims() != vec![2; n + 1].as_slice() {
        return Err(Error::InvalidFactors(format!(
            "joint state factors {:?} do not match {n} system qubits plus one environment qubit",
            rho_se.factor_dims()
        )));
    }
    let mut engine = CollisionEngine::new(&cfg.params, &cfg.mode)?;
    let ops = engine.next_ops();
    let (out, _) = engine.nonmarkov_apply(&ops, rho_se.matrix(), false);
    DensityMatrix::qubits(out, n + 1)
}

/// Which environment states a trajectory stored for the thermodynamic ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvRecordKind {
    /// Incoming and outgoing single environment qubit.
    Single,
    /// The two environment qubits around each partial SWAP.
    Pair,
}

#[derive(Debug, Clone)]
pub struct ThermoIngredients {
    pub kind: EnvRecordKind,
    pub initial_system: DensityMatrix,
    /// System state after each step.
    pub system: Vec<DensityMatrix>,
    pub env_pre: Vec<DensityMatrix>,
    pub env_post: Vec<DensityMatrix>,
}

/// Columnar per-row record of a collision run or a master-equation integration.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub n_sys: usize,
    /// Time between consecutive rows.
    pub spacing: f64,
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    /// Indexed `[site][row]`.
    pub sx: Vec<Vec<f64>>,
    pub sy: Vec<Vec<f64>>,
    pub sz: Vec<Vec<f64>>,
    /// Site pairs `(j, k)`, `j < k`, matching the outer index of `sync`.
    pub sync_pairs: Vec<(usize, usize)>,
    pub sync: Vec<Vec<SyncValue>>,
    pub coherence: Option<Vec<f64>>,
    pub sxsx12: Option<Vec<f64>>,
    pub mutual_info: Option<Vec<f64>>,
    pub snapshots: Vec<(usize, DensityMatrix)>,
    pub thermo: Option<ThermoIngredients>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn series(&self, values: &[f64]) -> Result<TimeSeries> {
        TimeSeries::new(self.spacing, values.to_vec())
    }

    pub fn sx_series(&self, site: usize) -> Result<TimeSeries> {
        let v = self.sx.get(site).ok_or(Error::FactorOutOfRange {
            index: site,
            count: self.n_sys,
        })?;
        self.series(v)
    }

    /// `|Q_jk|` per row, if recorded.
    pub fn sync_abs(&self, j: usize, k: usize) -> Option<Vec<f64>> {
        let idx = self.sync_pairs.iter().position(|&p| p == (j.min(k), j.max(k)))?;
        Some(self.sync[idx].iter().map(|q| q.value.norm()).collect())
    }
}

/// Precomputed observables for recording rows.
pub struct Observer {
    n: usize,
    record: RecordSpec,
    paulis: [Vec<ComplexMatrix>; 3],
    sync_ops: Vec<((usize, usize), [ComplexMatrix; 3])>,
    sxsx12: Option<ComplexMatrix>,
}

impl Observer {
    pub fn new(n: usize, record: &RecordSpec) -> Result<Self> {
        let embed_all = |axis| (0..n).map(|m| pauli_embed(axis, m, n)).collect::<Result<Vec<_>>>();
        let paulis = [
            embed_all(PauliAxis::X)?,
            embed_all(PauliAxis::Y)?,
            embed_all(PauliAxis::Z)?,
        ];
        let mut sync_ops = Vec::new();
        if record.sync {
            for j in 0..n {
                for k in j + 1..n {
                    sync_ops.push(((j, k), sync_operators(j, k, n)?));
                }
            }
        }
        let sxsx12 = (n >= 2).then(|| &paulis[0][0] * &paulis[0][1]);
        Ok(Self {
            n,
            record: record.clone(),
            paulis,
            sync_ops,
            sxsx12,
        })
    }

    pub fn empty_record(&self, spacing: f64, capacity: usize) -> TrajectoryRecord {
        let series = || vec![Vec::with_capacity(capacity); self.n];
        let opt = |on: bool| on.then(|| Vec::with_capacity(capacity));
        TrajectoryRecord {
            n_sys: self.n,
            spacing,
            steps: Vec::with_capacity(capacity),
            times: Vec::with_capacity(capacity),
            sx: series(),
            sy: series(),
            sz: series(),
            sync_pairs: self.sync_ops.iter().map(|(p, _)| *p).collect(),
            sync: vec![Vec::with_capacity(capacity); self.sync_ops.len()],
            coherence: opt(self.record.coherence),
            sxsx12: opt(self.record.sxsx12 && self.n >= 2),
            mutual_info: opt(self.record.mutual_info && self.n >= 2),
            snapshots: Vec::new(),
            thermo: None,
        }
    }

    /// Validates `rho` and appends one row.
    pub fn observe(&self, rec: &mut TrajectoryRecord, step: usize, t: f64, rho: &DensityMatrix) -> Result<()> {
        rho.validate().map_err(|e| match e {
            Error::InvalidState(msg) => Error::InvalidState(format!("at step {step}: {msg}")),
            other => other,
        })?;
        let m = rho.matrix();
        rec.steps.push(step);
        rec.times.push(t);
        for (axis, out) in [&mut rec.sx, &mut rec.sy, &mut rec.sz].into_iter().enumerate() {
            for (site, series) in out.iter_mut().enumerate() {
                series.push(trace_of_product(&self.paulis[axis][site], m).re);
            }
        }
        for (i, (_, [cross, pj, pk])) in self.sync_ops.iter().enumerate() {
            rec.sync[i].push(SyncValue::from_moments(
                trace_of_product(cross, m),
                trace_of_product(pj, m).re,
                trace_of_product(pk, m).re,
            ));
        }
        if let Some(v) = rec.coherence.as_mut() {
            v.push(l1_coherence_raw(m));
        }
        if let (Some(v), Some(op)) = (rec.sxsx12.as_mut(), &self.sxsx12) {
            v.push(trace_of_product(op, m).re);
        }
        if let Some(v) = rec.mutual_info.as_mut() {
            v.push(mutual_information(rho, &[0], &[1])?);
        }
        let stride = self.record.snapshot_stride;
        if stride > 0 && step.is_multiple_of(stride) {
            rec.snapshots.push((step, rho.clone()));
        }
        Ok(())
    }
}

/// Runs `n_steps` collisions and records one row per step at `t = nτ`.
pub fn run_trajectory(cfg: &CollisionConfig) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let p = &cfg.params;
    let n = p.n_sys;
    let mut engine = CollisionEngine::new(p, &cfg.mode)?;
    let observer = Observer::new(n, &cfg.record)?;
    let mut rec = observer.empty_record(p.tau, cfg.n_steps);
    let want_thermo = cfg.record.thermo;
    let mut thermo = want_thermo.then(|| ThermoIngredients {
        kind: if cfg.markovian {
            EnvRecordKind::Single
        } else {
            EnvRecordKind::Pair
        },
        initial_system: cfg.initial_state.clone(),
        system: Vec::with_capacity(cfg.n_steps),
        env_pre: Vec::with_capacity(cfg.n_steps),
        env_post: Vec::with_capacity(cfg.n_steps),
    });
    let eta = thermal_state(p.beta, p.omega);

    if cfg.markovian {
        let mut rho = cfg.initial_state.matrix().clone();
        for step in 1..=cfg.n_steps {
            let ops = engine.next_ops();
            let (next, env) = engine.markov_apply(&ops, &rho, want_thermo);
            rho = next;
            let state = DensityMatrix::qubits(rho.clone(), n)?;
            observer.observe(&mut rec, step, step as f64 * p.tau, &state)?;
            if let (Some(th), Some(env)) = (thermo.as_mut(), env) {
                th.system.push(state);
                th.env_pre.push(eta.clone());
                th.env_post.push(DensityMatrix::qubits(env, 1)?);
            }
        }
    } else {
        let mut joint = cfg.initial_state.matrix().kronecker(eta.matrix());
        for step in 1..=cfg.n_steps {
            let ops = engine.next_ops();
            let (next, pair) = engine.nonmarkov_apply(&ops, &joint, want_thermo);
            joint = next;
            let state = DensityMatrix::qubits(system_marginal(&joint), n)?;
            observer.observe(&mut rec, step, step as f64 * p.tau, &state)?;
            if let (Some(th), Some((pre, post))) = (thermo.as_mut(), pair) {
                th.system.push(state);
                th.env_pre.push(DensityMatrix::qubits(pre, 2)?);
                th.env_post.push(DensityMatrix::qubits(post, 2)?);
            }
        }
    }
    rec.thermo = thermo;
    Ok(rec)
}

/// Reduced system state of a joint system ⊗ environment-qubit state.
pub fn system_state_of(joint: &DensityMatrix) -> Result<DensityMatrix> {
    let n = joint.factor_dims().len();
    if n < 2 {
        return Err(Error::InvalidFactors("joint state needs at least two factors".into()));
    }
    partial_trace(joint, &(0..n - 1).collect::<Vec<_>>())
}
