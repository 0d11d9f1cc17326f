//! Information backflow: the BLP measure over random orthogonal initial pairs.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::collision::{CollisionConfig, CollisionEngine, CollisionMode};
use crate::error::{Error, Result};
use crate::linalg::{c, trace_distance_raw, ComplexMatrix, DensityMatrix};
use crate::model::thermal_state;
use crate::rng::{derive_seed, rng_from_seed};

/// Increments smaller than this are treated as numerical noise.
pub const INCREMENT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct BlpConfig {
    /// Defines the channel; its `n_steps` and initial state are ignored.
    pub base: CollisionConfig,
    pub n_steps: usize,
    pub k_samples: usize,
    pub seed: u64,
}

/// Two orthonormal Haar-random pure states, from the unitary factor of a complex Gaussian matrix.
pub fn sample_orthogonal_pair<R: Rng + ?Sized>(
    factor_dims: &[usize],
    rng: &mut R,
) -> Result<(DensityMatrix, DensityMatrix)> {
    let d: usize = factor_dims.iter().product();
    if d < 2 {
        return Err(Error::InvalidParameter(format!("need dimension at least 2, got {d}")));
    }
    let s = 0.5f64.sqrt();
    let g = ComplexMatrix::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re * s, im * s)
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let column = |k: usize| {
        let rk = r[(k, k)];
        let phase = if rk.norm() > 0.0 { rk / rk.norm() } else { c(1., 0.) };
        q.column(k) * phase
    };
    let a = DensityMatrix::from_pure(&column(0), factor_dims.to_vec())?;
    let b = DensityMatrix::from_pure(&column(1), factor_dims.to_vec())?;
    Ok((a, b))
}

/// Evolves both states through one shared collision sequence and returns `D(n)`, `n = 0..=n_steps`.
pub fn distance_series(
    base: &CollisionConfig,
    pair: (&DensityMatrix, &DensityMatrix),
    n_steps: usize,
) -> Result<Vec<f64>> {
    let p = &base.params;
    let mut engine = CollisionEngine::new(p, &base.mode)?;
    let mut series = Vec::with_capacity(n_steps + 1);
    series.push(trace_distance_raw(pair.0.matrix(), pair.1.matrix()));
    if base.markovian {
        let (mut a, mut b) = (pair.0.matrix().clone(), pair.1.matrix().clone());
        for _ in 0..n_steps {
            let ops = engine.next_ops();
            a = engine.markov_apply(&ops, &a, false).0;
            b = engine.markov_apply(&ops, &b, false).0;
            series.push(trace_distance_raw(&a, &b));
        }
    } else {
        let eta = thermal_state(p.beta, p.omega).into_matrix();
        let mut a = pair.0.matrix().kronecker(&eta);
        let mut b = pair.1.matrix().kronecker(&eta);
        for _ in 0..n_steps {
            let ops = engine.next_ops();
            a = engine.nonmarkov_apply(&ops, &a, false).0;
            b = engine.nonmarkov_apply(&ops, &b, false).0;
            series.push(trace_distance_raw(&system_part(&a), &system_part(&b)));
        }
    }
    Ok(series)
}

fn system_part(joint: &ComplexMatrix) -> ComplexMatrix {
    let d = joint.nrows() / 2;
    ComplexMatrix::from_fn(d, d, |r, s| joint[(2 * r, 2 * s)] + joint[(2 * r + 1, 2 * s + 1)])
}

/// Sum of the increases of a distance series, ignoring increments below the floor.
pub fn backflow(series: &[f64]) -> f64 {
    series
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&dd| dd > INCREMENT_FLOOR)
        .sum()
}

#[derive(Debug, Clone)]
pub struct BlpResult {
    pub measure: f64,
    pub best_sample: usize,
    pub best_pair: (DensityMatrix, DensityMatrix),
    /// `distances[k][n]` for sample `k`.
    pub distances: Vec<Vec<f64>>,
    pub backflows: Vec<f64>,
}

pub fn blp_measure(cfg: &BlpConfig) -> Result<BlpResult> {
    if cfg.k_samples == 0 {
        return Err(Error::InvalidParameter("k_samples must be at least 1".into()));
    }
    cfg.base.params.validate()?;
    let dims = vec![2; cfg.base.params.n_sys];
    let samples: Vec<((DensityMatrix, DensityMatrix), Vec<f64>)> = (0..cfg.k_samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(derive_seed(cfg.seed, k as u64));
            let pair = sample_orthogonal_pair(&dims, &mut rng)?;
            let mut base = cfg.base.clone();
            if let CollisionMode::SequentialRandom { seed } = base.mode {
                base.mode = CollisionMode::SequentialRandom {
                    seed: derive_seed(seed, k as u64),
                };
            }
            let series = distance_series(&base, (&pair.0, &pair.1), cfg.n_steps)?;
            Ok((pair, series))
        })
        .collect::<Result<_>>()?;
    let backflows: Vec<f64> = samples.iter().map(|(_, s)| backflow(s)).collect();
    let best_sample = backflows
        .iter()
        .enumerate()
        .fold(0, |best, (k, &v)| if v > backflows[best] { k } else { best });
    let (pairs, distances): (Vec<_>, Vec<_>) = samples.into_iter().unzip();
    Ok(BlpResult {
        measure: backflows[best_sample],
        best_sample,
        best_pair: pairs[best_sample].clone(),
        distances,
        backflows,
    })
}
