//! Scalar diagnostics of states and of stroboscopic time series.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    partial_trace, trace_of_product, von_neumann_entropy, ComplexMatrix, DensityMatrix, C64,
};
use crate::model::{pauli_embed, PauliAxis};

pub const DEFAULT_BURN_IN: f64 = 0.5;
pub const MIN_SPECTRAL_SAMPLES: usize = 256;
const SYNC_FLOOR: f64 = 1e-14;
const PEAK_FLOOR: f64 = 1e-12;

/// Uniformly sampled real series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub spacing: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(spacing: f64, values: Vec<f64>) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sample spacing must be positive, got {spacing}"
            )));
        }
        if values.is_empty() {
            return Err(Error::SeriesTooShort { needed: 1, got: 0 });
        }
        Ok(Self { spacing, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Drops the leading `fraction` of the samples.
    pub fn tail(&self, fraction: f64) -> Result<TimeSeries> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::InvalidParameter(format!(
                "burn-in fraction must lie in [0, 1), got {fraction}"
            )));
        }
        let start = (self.values.len() as f64 * fraction).floor() as usize;
        TimeSeries::new(self.spacing, self.values[start..].to_vec())
    }
}

fn check_dims(rho: &DensityMatrix, obs: &ComplexMatrix) -> Result<()> {
    if obs.nrows() != rho.dim() || obs.ncols() != rho.dim() {
        return Err(Error::DimensionMismatch(format!(
            "observable is {}x{}, state is {}-dimensional",
            obs.nrows(),
            obs.ncols(),
            rho.dim()
        )));
    }
    Ok(())
}

/// `tr(obs ρ)`.
pub fn expectation(rho: &DensityMatrix, obs: &ComplexMatrix) -> Result<C64> {
    check_dims(rho, obs)?;
    Ok(trace_of_product(obs, rho.matrix()))
}

/// `tr(obs ρ)` for a Hermitian observable; a residual imaginary part above 1e-10 is an error.
pub fn expectation_real(rho: &DensityMatrix, obs: &ComplexMatrix) -> Result<f64> {
    let v = expectation(rho, obs)?;
    if v.im.abs() > 1e-10 {
        return Err(Error::NotHermitian {
            deviation: v.im.abs(),
        });
    }
    Ok(v.re)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SyncValue {
    pub value: C64,
    /// Set when a single-site population `⟨σ⁺σ⁻⟩` is below 1e-14; `value` is then 0.
    pub degenerate: bool,
}

impl SyncValue {
    pub fn from_moments(cross: C64, pop_j: f64, pop_k: f64) -> Self {
        if pop_j < SYNC_FLOOR || pop_k < SYNC_FLOOR {
            return Self {
                value: C64::new(0.0, 0.0),
                degenerate: true,
            };
        }
        Self {
            value: cross / (pop_j * pop_k).sqrt(),
            degenerate: false,
        }
    }
}

/// Operators `σ⁺_j σ⁻_k`, `σ⁺_j σ⁻_j`, `σ⁺_k σ⁻_k` on `n` qubits.
pub fn sync_operators(j: usize, k: usize, n: usize) -> Result<[ComplexMatrix; 3]> {
    if j == k {
        return Err(Error::InvalidParameter(format!(
            "synchronization needs two distinct sites, got {j} twice"
        )));
    }
    let pj = pauli_embed(PauliAxis::Plus, j, n)?;
    let mj = pauli_embed(PauliAxis::Minus, j, n)?;
    let pk = pauli_embed(PauliAxis::Plus, k, n)?;
    let mk = pauli_embed(PauliAxis::Minus, k, n)?;
    Ok([&pj * &mk, &pj * &mj, &pk * &mk])
}

/// `Q_jk = ⟨σ⁺_j σ⁻_k⟩ / sqrt(⟨σ⁺_j σ⁻_j⟩ ⟨σ⁺_k σ⁻_k⟩)` on a register of qubits.
pub fn sync_measure(rho: &DensityMatrix, j: usize, k: usize) -> Result<SyncValue> {
    let n = rho.factor_dims().len();
    if rho.factor_dims().iter().any(|&d| d != 2) {
        return Err(Error::InvalidFactors("synchronization needs a qubit register".into()));
    }
    let [cross, pop_j, pop_k] = sync_operators(j, k, n)?;
    Ok(SyncValue::from_moments(
        expectation(rho, &cross)?,
        expectation(rho, &pop_j)?.re,
        expectation(rho, &pop_k)?.re,
    ))
}

/// Sum of the moduli of all off-diagonal entries.
pub fn l1_coherence(rho: &DensityMatrix) -> f64 {
    l1_coherence_raw(rho.matrix())
}

pub(crate) fn l1_coherence_raw(m: &ComplexMatrix) -> f64 {
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                acc += m[(i, j)].norm();
            }
        }
    }
    acc
}

/// `X(Δn) = Σ_n f(n) g(n − Δn)` over the overlapping samples only.
pub fn cross_correlation(
    f: &TimeSeries,
    g: &TimeSeries,
    shifts: RangeInclusive<i64>,
) -> Result<Vec<(i64, f64)>> {
    if f.len() != g.len() {
        return Err(Error::DimensionMismatch(format!(
            "series lengths {} and {} differ",
            f.len(),
            g.len()
        )));
    }
    let len = f.len() as i64;
    Ok(shifts
        .map(|dn| {
            let lo = dn.max(0);
            let hi = (len + dn).min(len);
            let sum = (lo..hi)
                .map(|n| f.values[n as usize] * g.values[(n - dn) as usize])
                .sum();
            (dn, sum)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseShift {
    /// Maximizing shift in samples.
    pub shift: i64,
    /// `2π f Δn τ`, wrapped to (−2π, 0].
    pub phase: f64,
}

/// Phase lag of `g` behind `f` from the cross-correlation maximum over one period of non-positive shifts.
pub fn phase_difference(f: &TimeSeries, g: &TimeSeries, f_dominant: f64) -> Result<PhaseShift> {
    if !(f_dominant > 0.0 && f_dominant.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "dominant frequency must be positive, got {f_dominant}"
        )));
    }
    let period = (1.0 / (f_dominant * f.spacing)).ceil() as i64;
    let xc = cross_correlation(f, g, -period..=0)?;
    let (shift, _) = xc
        .into_iter()
        .fold((0i64, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        });
    let raw = 2.0 * PI * f_dominant * shift as f64 * f.spacing;
    Ok(PhaseShift {
        shift,
        phase: wrap_nonpositive(raw),
    })
}

fn wrap_nonpositive(phi: f64) -> f64 {
    let turn = 2.0 * PI;
    let w = phi - turn * (phi / turn).ceil();
    if w <= -turn {
        w + turn
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralPeak {
    pub frequency: f64,
    /// Bin width of the padded transform.
    pub resolution: f64,
    /// Raw transform magnitude at the peak bin.
    pub magnitude: f64,
}

/// Strongest non-zero frequency of the mean-subtracted tail after `burn_in`.
pub fn dominant_frequency(f: &TimeSeries, burn_in: f64) -> Result<SpectralPeak> {
    let tail = f.tail(burn_in)?;
    if tail.len() < MIN_SPECTRAL_SAMPLES {
        return Err(Error::SeriesTooShort {
            needed: MIN_SPECTRAL_SAMPLES,
            got: tail.len(),
        });
    }
    let mean = tail.values.iter().sum::<f64>() / tail.len() as f64;
    let n_pad = tail.len().next_power_of_two() * 4;
    let mut buf: Vec<C64> = tail
        .values
        .iter()
        .map(|v| C64::new(v - mean, 0.0))
        .chain(std::iter::repeat(C64::new(0.0, 0.0)))
        .take(n_pad)
        .collect();
    FftPlanner::new().plan_fft_forward(n_pad).process(&mut buf);
    let mags: Vec<f64> = buf[..=n_pad / 2].iter().map(|z| z.norm()).collect();
    let (k, &peak) = mags
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("padded length is at least 1024");
    // compare an amplitude, not a raw sum, against the floor
    if 2.0 * peak / (tail.len() as f64) < PEAK_FLOOR {
        return Err(Error::NoSpectralPeak);
    }
    let delta = if k + 1 < mags.len() {
        let (a, b, c) = (mags[k - 1], mags[k], mags[k + 1]);
        let denom = a - 2.0 * b + c;
        if denom.abs() > 0.0 {
            (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    } else {
        0.0
    };
    let resolution = 1.0 / (n_pad as f64 * f.spacing);
    Ok(SpectralPeak {
        frequency: (k as f64 + delta) * resolution,
        resolution,
        magnitude: peak,
    })
}

/// `I(A:B) = S(ρ_A) + S(ρ_B) − S(ρ_AB)` in nats.
pub fn mutual_information(rho: &DensityMatrix, part_a: &[usize], part_b: &[usize]) -> Result<f64> {
    if part_a.is_empty() || part_b.is_empty() {
        return Err(Error::EmptyKeep);
    }
    if part_a.iter().any(|x| part_b.contains(x)) {
        return Err(Error::OverlappingParts);
    }
    let both: Vec<usize> = part_a.iter().chain(part_b).copied().collect();
    let s_a = von_neumann_entropy(&partial_trace(rho, part_a)?);
    let s_b = von_neumann_entropy(&partial_trace(rho, part_b)?);
    let s_ab = von_neumann_entropy(&partial_trace(rho, &both)?);
    Ok(s_a + s_b - s_ab)
}
