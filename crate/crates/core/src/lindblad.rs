//! Master equations of the continuous-time limit, their Liouvillian and its spectrum.
//!
//! Dissipators use `D[L]ρ = rate/2 (2LρL† − {L†L, ρ})`. Operators are
//! vectorized row-major (see [`crate::linalg::vec_operator`]), for which
//! `L = −i(H⊗I − I⊗Hᵀ) + Σ rate/2 (2L⊗L* − L†L⊗I − I⊗LᵀL*)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::collision::{check_permutation, Observer, RecordSpec, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::linalg::{
    c, devec_operator, eig_general, eig_hermitian, ensure_square, frobenius_inner,
    hermitian_deviation, identity, ComplexMatrix, ComplexVector, DensityMatrix, C64, SVD_RANK_TOL,
};
use crate::model::{
    all_down_vector, build_system_hamiltonian, collective_ladder, env_correlation, pauli_embed,
    Ladder, ModelParams, PauliAxis,
};

pub const DEFAULT_TOL_ZERO: f64 = 1e-9;
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Dissipator {
    pub jump: ComplexMatrix,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasterEquationSpec {
    pub hamiltonian: ComplexMatrix,
    pub dissipators: Vec<Dissipator>,
    /// Anti-Hermitian `K` adding `[K, ρ]` to the generator.
    pub coherent_extra: Option<ComplexMatrix>,
}

impl MasterEquationSpec {
    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let d = ensure_square(&self.hamiltonian)?;
        let deviation = hermitian_deviation(&self.hamiltonian);
        if deviation > 1e-10 {
            return Err(Error::NotHermitian { deviation });
        }
        for diss in &self.dissipators {
            if diss.jump.shape() != (d, d) {
                return Err(Error::DimensionMismatch(format!(
                    "jump operator is {:?}, Hamiltonian is {d}x{d}",
                    diss.jump.shape()
                )));
            }
            if !(diss.rate >= 0.0 && diss.rate.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "dissipation rate must be finite and non-negative, got {}",
                    diss.rate
                )));
            }
        }
        if let Some(k) = &self.coherent_extra {
            if k.shape() != (d, d) {
                return Err(Error::DimensionMismatch("coherent extra has the wrong shape".into()));
            }
            let deviation = hermitian_deviation(&(k * c(0., 1.)));
            if deviation > 1e-10 {
                return Err(Error::InvalidParameter(format!(
                    "coherent extra is not anti-Hermitian (deviation {deviation:e})"
                )));
            }
        }
        Ok(())
    }

    /// `H + iK`, Hermitian when `K` is anti-Hermitian.
    pub fn effective_hamiltonian(&self) -> ComplexMatrix {
        match &self.coherent_extra {
            Some(k) => &self.hamiltonian + k * c(0., 1.),
            None => self.hamiltonian.clone(),
        }
    }

    pub fn max_rate(&self) -> f64 {
        self.dissipators.iter().map(|d| d.rate).fold(0.0, f64::max)
    }

    /// Generator applied directly to an operator.
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let h = self.effective_hamiltonian();
        let mut out = (&h * rho - rho * &h) * c(0., -1.);
        for d in &self.dissipators {
            if d.rate == 0.0 {
                continue;
            }
            let l = &d.jump;
            let ld = l.adjoint();
            let ldl = &ld * l;
            let term = (l * rho * &ld) * c(2.0, 0.) - &ldl * rho - rho * &ldl;
            out += term * c(d.rate / 2.0, 0.);
        }
        out
    }
}

fn ladders(n: usize) -> (ComplexMatrix, ComplexMatrix) {
    (collective_ladder(Ladder::Lower, n), collective_ladder(Ladder::Raise, n))
}

/// Ring Hamiltonian with collective emission and absorption at the thermal rates.
pub fn build_lindblad_thermal(p: &ModelParams) -> Result<MasterEquationSpec> {
    p.validate()?;
    let xi = env_correlation(p.beta, p.omega);
    let gamma = p.gamma();
    let (am, ap) = ladders(p.n_sys);
    Ok(MasterEquationSpec {
        hamiltonian: build_system_hamiltonian(p),
        dissipators: vec![
            Dissipator {
                jump: am,
                rate: gamma * (1.0 - xi) / 2.0,
            },
            Dissipator {
                jump: ap,
                rate: gamma * (1.0 + xi) / 2.0,
            },
        ],
        coherent_extra: None,
    })
}

/// Zero-temperature limit: collective emission at rate `γ` only.
pub fn build_lindblad_vacuum(p: &ModelParams) -> Result<MasterEquationSpec> {
    p.validate()?;
    let (am, _) = ladders(p.n_sys);
    Ok(MasterEquationSpec {
        hamiltonian: build_system_hamiltonian(p),
        dissipators: vec![Dissipator {
            jump: am,
            rate: p.gamma(),
        }],
        coherent_extra: None,
    })
}

/// `B = Σ σ⁺_k σ⁻_m` over pairs where `k` collides before `m`.
pub fn sequential_order_operator(order: &[usize], n: usize) -> Result<ComplexMatrix> {
    check_permutation(order, n)?;
    let d = 1 << n;
    let mut b = ComplexMatrix::zeros(d, d);
    for (i, &early) in order.iter().enumerate() {
        for &late in &order[i + 1..] {
            b += pauli_embed(PauliAxis::Plus, early, n)? * pauli_embed(PauliAxis::Minus, late, n)?;
        }
    }
    Ok(b)
}

/// Thermal generator plus the order-dependent coherent term `K = −ξ γ/2 (B − B†)`.
pub fn build_lindblad_sequential(p: &ModelParams, order: &[usize]) -> Result<MasterEquationSpec> {
    let mut spec = build_lindblad_thermal(p)?;
    let b = sequential_order_operator(order, p.n_sys)?;
    let xi = env_correlation(p.beta, p.omega);
    let k = (&b - b.adjoint()) * c(-xi * p.gamma() / 2.0, 0.);
    spec.coherent_extra = Some(k);
    Ok(spec)
}

/// Dense `d² × d²` generator acting on row-major vectorized operators.
pub fn liouvillian_matrix(spec: &MasterEquationSpec) -> Result<ComplexMatrix> {
    spec.validate()?;
    let d = spec.dim();
    let id = identity(d);
    let h = spec.effective_hamiltonian();
    let mut l = (h.kronecker(&id) - id.kronecker(&h.transpose())) * c(0., -1.);
    for diss in &spec.dissipators {
        if diss.rate == 0.0 {
            continue;
        }
        let j = &diss.jump;
        let ldl = j.adjoint() * j;
        let term = j.kronecker(&j.conjugate()) * c(2.0, 0.)
            - ldl.kronecker(&id)
            - id.kronecker(&ldl.transpose());
        l += term * c(diss.rate / 2.0, 0.);
    }
    Ok(l)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenClass {
    Steady,
    Oscillatory,
    Decaying,
    /// Positive real part beyond tolerance; never produced by a valid generator.
    Growing,
}

#[derive(Debug, Clone)]
pub struct ClassifiedEigen {
    pub value: C64,
    pub class: EigenClass,
    pub vector: ComplexVector,
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// Sorted by descending real part.
    pub eigen: Vec<ClassifiedEigen>,
    pub tol_zero: f64,
}

impl SpectrumReport {
    pub fn values(&self) -> Vec<C64> {
        self.eigen.iter().map(|e| e.value).collect()
    }

    pub fn of_class(&self, class: EigenClass) -> impl Iterator<Item = &ClassifiedEigen> {
        self.eigen.iter().filter(move |e| e.class == class)
    }

    pub fn count(&self, class: EigenClass) -> usize {
        self.of_class(class).count()
    }

    /// Smallest `|Re λ|` among decaying eigenvalues.
    pub fn slowest_decay_rate(&self) -> Option<f64> {
        self.of_class(EigenClass::Decaying)
            .map(|e| e.value.re.abs())
            .min_by(f64::total_cmp)
    }

    /// Largest distance from an eigenvalue with `Im λ > 1e-10` to its nearest conjugate partner.
    pub fn conjugation_defect(&self) -> f64 {
        let vals = self.values();
        vals.iter()
            .filter(|v| v.im > 1e-10)
            .map(|v| {
                vals.iter()
                    .map(|w| (w - v.conj()).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }
}

pub fn classify(value: C64, tol_zero: f64) -> EigenClass {
    if value.re.abs() < tol_zero {
        if value.im.abs() < tol_zero {
            EigenClass::Steady
        } else {
            EigenClass::Oscillatory
        }
    } else if value.re < 0.0 {
        EigenClass::Decaying
    } else {
        EigenClass::Growing
    }
}

pub fn liouvillian_spectrum(l: &ComplexMatrix, tol_zero: f64) -> Result<SpectrumReport> {
    if !(tol_zero > 0.0) {
        return Err(Error::InvalidParameter(format!("tol_zero must be positive, got {tol_zero}")));
    }
    let mut eigen: Vec<ClassifiedEigen> = eig_general(l)?
        .into_iter()
        .map(|p| ClassifiedEigen {
            class: classify(p.value, tol_zero),
            value: p.value,
            vector: p.vector,
        })
        .collect();
    eigen.sort_by(|a, b| {
        b.value
            .re
            .total_cmp(&a.value.re)
            .then(b.value.im.total_cmp(&a.value.im))
    });
    if !eigen.iter().any(|e| e.class == EigenClass::Steady) {
        return Err(Error::EigenFailure(
            "no eigenvalue within tolerance of zero; not a valid generator".into(),
        ));
    }
    Ok(SpectrumReport { eigen, tol_zero })
}

#[derive(Debug, Clone)]
pub struct OscillatingMode {
    pub eigenvalue: C64,
    /// `|Im λ| / 2π`.
    pub frequency: f64,
    pub operator: ComplexMatrix,
}

pub fn find_oscillating_eigenoperators(l: &ComplexMatrix, tol: f64) -> Result<Vec<OscillatingMode>> {
    let report = liouvillian_spectrum(l, tol)?;
    let d = (l.nrows() as f64).sqrt().round() as usize;
    report
        .of_class(EigenClass::Oscillatory)
        .map(|e| {
            Ok(OscillatingMode {
                eigenvalue: e.value,
                frequency: e.value.im.abs() / (2.0 * PI),
                operator: devec_operator(&e.vector, d)?,
            })
        })
        .collect()
}

/// Frobenius norms describing how close `M` is to a dynamical symmetry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryReport {
    /// Least-squares `m` in `[H, M] ≈ m M`.
    pub m: C64,
    /// `‖[H, M] − m M‖`.
    pub residual: f64,
    pub a_minus_m: f64,
    pub m_a_minus: f64,
    pub m_a_plus: f64,
    pub a_plus_a_minus_m: f64,
    pub m_a_plus_a_minus: f64,
    pub comm_a_minus: f64,
    pub comm_a_plus: f64,
}

pub fn dynamical_symmetry_check(
    m: &ComplexMatrix,
    h: &ComplexMatrix,
    a_minus: &ComplexMatrix,
) -> Result<SymmetryReport> {
    let d = ensure_square(m)?;
    if h.shape() != (d, d) || a_minus.shape() != (d, d) {
        return Err(Error::DimensionMismatch(format!(
            "M is {d}x{d}, H is {:?}, A- is {:?}",
            h.shape(),
            a_minus.shape()
        )));
    }
    let a_plus = a_minus.adjoint();
    let comm = h * m - m * h;
    let norm_sq = frobenius_inner(m, m);
    let fit = if norm_sq.norm() > 0.0 {
        frobenius_inner(m, &comm) / norm_sq
    } else {
        C64::new(0.0, 0.0)
    };
    let apam = &a_plus * a_minus;
    Ok(SymmetryReport {
        m: fit,
        residual: (&comm - m * fit).norm(),
        a_minus_m: (a_minus * m).norm(),
        m_a_minus: (m * a_minus).norm(),
        m_a_plus: (m * &a_plus).norm(),
        a_plus_a_minus_m: (&apam * m).norm(),
        m_a_plus_a_minus: (m * &apam).norm(),
        comm_a_minus: (a_minus * m - m * a_minus).norm(),
        comm_a_plus: (&a_plus * m - m * &a_plus).norm(),
    })
}

#[derive(Debug, Clone)]
pub struct LabelledOperator {
    pub label: String,
    pub operator: ComplexMatrix,
    /// `(ε_l − ε_k) / 2π` for `|ψ_l⟩⟨ψ_k|`.
    pub frequency: f64,
}

#[derive(Debug, Clone, Default)]
pub struct OscillationBasis {
    pub operators: Vec<LabelledOperator>,
    pub down_energy: Option<f64>,
    pub dark_energy: Option<f64>,
    pub diagnostic: Option<String>,
}

impl OscillationBasis {
    fn failed(msg: String) -> Self {
        Self {
            diagnostic: Some(msg),
            ..Self::default()
        }
    }
}

/// Orthonormal basis of the column space of `v`, dropping directions below the rank tolerance.
fn column_space(v: &ComplexMatrix) -> ComplexMatrix {
    let svd = v.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let cols: Vec<ComplexVector> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > SVD_RANK_TOL)
        .map(|(k, _)| u.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        ComplexMatrix::zeros(v.nrows(), 0)
    } else {
        ComplexMatrix::from_columns(&cols)
    }
}

/// Null space of `a` restricted to the columns of the isometry `v`, as vectors in the full space.
fn restricted_kernel(a: &ComplexMatrix, v: &ComplexMatrix) -> Vec<ComplexVector> {
    let g = v.ncols();
    if g == 0 {
        return Vec::new();
    }
    let av = a * v;
    // pad to at least g rows so the SVD yields g right singular vectors
    let padded = if av.nrows() >= g {
        av
    } else {
        let mut p = ComplexMatrix::zeros(g, g);
        p.rows_mut(0, av.nrows()).copy_from(&av);
        p
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] < SVD_RANK_TOL)
        .map(|k| {
            let coeffs = ComplexVector::from_fn(g, |j, _| v_t[(k, j)].conj());
            v * coeffs
        })
        .collect()
}

/// The all-down state, a degenerate dark pair, and the nine outer products built from them.
pub fn oscillation_basis(
    h: &ComplexMatrix,
    a_minus: &ComplexMatrix,
    degeneracy_tol: f64,
) -> Result<OscillationBasis> {
    let d = ensure_square(h)?;
    if a_minus.shape() != (d, d) {
        return Err(Error::DimensionMismatch("A- does not match H".into()));
    }
    if !d.is_power_of_two() || d < 2 {
        return Ok(OscillationBasis::failed(format!("dimension {d} is not a qubit register")));
    }
    let n = d.trailing_zeros() as usize;
    let eig = eig_hermitian(h)?;
    let down = all_down_vector(n);
    let hd = h * &down;
    let e_down = (down.adjoint() * &hd)[(0, 0)].re;
    if (hd - &down * c(e_down, 0.)).norm() > 1e-8 * h.norm().max(1.0) {
        return Ok(OscillationBasis::failed("the all-down state is not an eigenstate".into()));
    }

    let mut start = 0;
    let mut dark = None;
    while start < d {
        let mut end = start + 1;
        while end < d && eig.values[end] - eig.values[start] <= degeneracy_tol {
            end += 1;
        }
        if end - start >= 2 {
            let group = eig.vectors.columns(start, end - start).into_owned();
            let projected = &group - &down * (down.adjoint() * &group);
            let basis = column_space(&projected);
            let kernel = restricted_kernel(a_minus, &basis);
            if kernel.len() >= 2 {
                let energy = eig.values[start..end].iter().sum::<f64>() / (end - start) as f64;
                dark = Some((energy, kernel[0].clone(), kernel[1].clone()));
                break;
            }
        }
        start = end;
    }
    let Some((e_dark, psi_m, psi_n)) = dark else {
        return Ok(OscillationBasis::failed(
            "no degenerate eigenspace with a two-dimensional dark subspace".into(),
        ));
    };

    let states = [("down", &down, e_down), ("m", &psi_m, e_dark), ("n", &psi_n, e_dark)];
    let pick = |name: &str| *states.iter().find(|s| s.0 == name).expect("known label");
    let layout = [
        ("down", "down"),
        ("m", "m"),
        ("n", "n"),
        ("m", "n"),
        ("n", "m"),
        ("down", "m"),
        ("down", "n"),
        ("m", "down"),
        ("n", "down"),
    ];
    let operators = layout
        .iter()
        .enumerate()
        .map(|(i, (l, k))| {
            let (_, ket, el) = pick(l);
            let (_, bra, ek) = pick(k);
            LabelledOperator {
                label: format!("M{}", i + 1),
                operator: ket * bra.adjoint(),
                frequency: (el - ek) / (2.0 * PI),
            }
        })
        .collect();
    Ok(OscillationBasis {
        operators,
        down_energy: Some(e_down),
        dark_energy: Some(e_dark),
        diagnostic: None,
    })
}

#[derive(Debug, Clone)]
pub struct IntegratorSettings {
    /// Upper bound on the RK4 step before the rate-based cap.
    pub max_step: f64,
    pub record: RecordSpec,
}

impl IntegratorSettings {
    /// Step bound `τ/10`.
    pub fn for_params(p: &ModelParams) -> Self {
        Self {
            max_step: p.tau / 10.0,
            record: RecordSpec::default(),
        }
    }
}

const MIN_STEP: f64 = 1e-12;

/// Fixed-step RK4 with one record row per grid time (including `t = 0`).
pub fn integrate_me(
    spec: &MasterEquationSpec,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    settings: &IntegratorSettings,
) -> Result<TrajectoryRecord> {
    spec.validate()?;
    if t_grid.is_empty() {
        return Err(Error::InvalidParameter("time grid is empty".into()));
    }
    if t_grid[0] != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "time grid must start at 0, starts at {}",
            t_grid[0]
        )));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("time grid must be strictly increasing".into()));
    }
    if rho0.dim() != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state is {}-dimensional, generator acts on {}",
            rho0.dim(),
            spec.dim()
        )));
    }
    if rho0.factor_dims().iter().any(|&f| f != 2) {
        return Err(Error::InvalidFactors("integration records qubit observables".into()));
    }
    let rate_cap = if spec.max_rate() > 0.0 {
        1e-3 / spec.max_rate()
    } else {
        f64::INFINITY
    };
    let h_max = settings.max_step.min(rate_cap);
    if !(h_max >= MIN_STEP) {
        return Err(Error::StepUnderflow(format!("step bound {h_max:e} below {MIN_STEP:e}")));
    }

    let n = rho0.factor_dims().len();
    let observer = Observer::new(n, &settings.record)?;
    let spacing = if t_grid.len() > 1 { t_grid[1] - t_grid[0] } else { 0.0 };
    let mut rec = observer.empty_record(spacing, t_grid.len());
    let dims = rho0.factor_dims().to_vec();
    let mut rho = rho0.matrix().clone();
    observer.observe(&mut rec, 0, 0.0, rho0)?;
    let half = c(0.5, 0.);
    for (idx, w) in t_grid.windows(2).enumerate() {
        let span = w[1] - w[0];
        let n_sub = (span / h_max).ceil().max(1.0) as usize;
        let h = span / n_sub as f64;
        if h < MIN_STEP {
            return Err(Error::StepUnderflow(format!("step {h:e} between t = {} and {}", w[0], w[1])));
        }
        let hc = c(h, 0.);
        for _ in 0..n_sub {
            let k1 = spec.apply(&rho);
            let k2 = spec.apply(&(&rho + &k1 * (hc * half)));
            let k3 = spec.apply(&(&rho + &k2 * (hc * half)));
            let k4 = spec.apply(&(&rho + &k3 * hc));
            rho += (k1 + (k2 + k3) * c(2.0, 0.) + k4) * (hc / c(6.0, 0.));
        }
        rho = (&rho + rho.adjoint()) * half;
        let state = DensityMatrix::new(rho.clone(), dims.clone())?;
        observer.observe(&mut rec, idx + 1, w[1], &state)?;
    }
    Ok(rec)
}

/// `0, dt, 2dt, …` up to and including `t_max` (within rounding).
pub fn uniform_grid(t_max: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && t_max >= 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidParameter(format!("bad grid t_max = {t_max}, dt = {dt}")));
    }
    let n = (t_max / dt + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| k as f64 * dt).collect())
}
