//! Brute-force reference implementations shared by the integration tests.
//!
//! Nothing here calls the library's partial trace, exponential or step code.

#![allow(dead_code)]

use nalgebra as na;
use rand::Rng;
use rand_distr::StandardNormal;
use spincm_core::{ComplexMatrix, ComplexVector, DensityMatrix, C64};

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn gaussian_matrix<R: Rng>(d: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |_, _| {
        c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

/// `G G† / tr(G G†)`, full rank with probability one.
pub fn random_density<R: Rng>(dims: &[usize], rng: &mut R) -> DensityMatrix {
    let d = dims.iter().product();
    let g = gaussian_matrix(d, rng);
    let m = &g * g.adjoint();
    let tr = m.trace();
    DensityMatrix::new(m / tr, dims.to_vec()).unwrap()
}

pub fn random_pure<R: Rng>(dims: &[usize], rng: &mut R) -> DensityMatrix {
    let d: usize = dims.iter().product();
    let v = ComplexVector::from_fn(d, |_, _| {
        c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
    .normalize();
    DensityMatrix::from_pure(&v, dims.to_vec()).unwrap()
}

pub fn random_hermitian<R: Rng>(d: usize, rng: &mut R) -> ComplexMatrix {
    let g = gaussian_matrix(d, rng);
    (&g + g.adjoint()) * c(0.5, 0.)
}

fn digits(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = idx % dims[k];
        idx /= dims[k];
    }
    out
}

fn undigits(ds: &[usize], dims: &[usize]) -> usize {
    ds.iter().zip(dims).fold(0, |acc, (d, n)| acc * n + d)
}

/// Reduced matrix by summing over every pair of full indices that agree on the traced factors.
pub fn partial_trace_by_enumeration(m: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> ComplexMatrix {
    let kept_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let dk: usize = kept_dims.iter().product();
    let mut out = ComplexMatrix::zeros(dk, dk);
    let d = m.nrows();
    for i in 0..d {
        let di = digits(i, dims);
        for j in 0..d {
            let dj = digits(j, dims);
            let traced_equal = (0..dims.len())
                .filter(|f| !keep.contains(f))
                .all(|f| di[f] == dj[f]);
            if !traced_equal {
                continue;
            }
            let ri: Vec<usize> = keep.iter().map(|&k| di[k]).collect();
            let rj: Vec<usize> = keep.iter().map(|&k| dj[k]).collect();
            out[(undigits(&ri, &kept_dims), undigits(&rj, &kept_dims))] += m[(i, j)];
        }
    }
    out
}

pub fn taylor_exp(m: &ComplexMatrix, terms: usize) -> ComplexMatrix {
    let d = m.nrows();
    let mut sum = ComplexMatrix::identity(d, d);
    let mut term = ComplexMatrix::identity(d, d);
    for k in 1..terms {
        term = &term * m / c(k as f64, 0.);
        sum += &term;
    }
    sum
}

/// exp(-i h t) by repeated squaring of a Taylor series on a small step.
pub fn propagator(h: &ComplexMatrix, t: f64) -> ComplexMatrix {
    let norm = h.norm() * t.abs();
    let squarings = (norm.max(1.0).log2().ceil() as u32) + 4;
    let small = h * c(0., -t / f64::from(1u32 << squarings));
    let mut u = taylor_exp(&small, 30);
    for _ in 0..squarings {
        u = &u * &u;
    }
    u
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn eye(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d, d)
}

pub fn sigma(which: char) -> ComplexMatrix {
    let z = c(0., 0.);
    let o = c(1., 0.);
    let e = match which {
        'x' => [z, o, o, z],
        'y' => [z, c(0., -1.), c(0., 1.), z],
        'z' => [o, z, z, -o],
        '+' => [z, o, z, z],
        '-' => [z, z, o, z],
        _ => panic!("unknown Pauli {which}"),
    };
    ComplexMatrix::from_row_slice(2, 2, &e)
}

/// Operator `op` on qubit `site` of `n`.
pub fn on_site(op: &ComplexMatrix, site: usize, n: usize) -> ComplexMatrix {
    let id = eye(2);
    (0..n).fold(eye(1), |acc, k| kron(&acc, if k == site { op } else { &id }))
}

pub fn ring_hamiltonian(jx: f64, jy: f64, jz: f64, n: usize) -> ComplexMatrix {
    let d = 1 << n;
    let mut h = ComplexMatrix::zeros(d, d);
    for (a, j) in [('x', jx), ('y', jy), ('z', jz)] {
        for m in 0..n {
            h += on_site(&sigma(a), m, n) * on_site(&sigma(a), (m + 1) % n, n) * c(j, 0.);
        }
    }
    h
}

/// `g Σ_m (σ⁻_m σ⁺_E + σ⁺_m σ⁻_E)` with the environment as qubit `n`.
pub fn flip_flop_hamiltonian(g: f64, sites: &[usize], n: usize) -> ComplexMatrix {
    let total = n + 1;
    let d = 1 << total;
    let mut h = ComplexMatrix::zeros(d, d);
    for &m in sites {
        h += on_site(&sigma('-'), m, total) * on_site(&sigma('+'), n, total) * c(g, 0.);
        h += on_site(&sigma('+'), m, total) * on_site(&sigma('-'), n, total) * c(g, 0.);
    }
    h
}

pub fn thermal_qubit(beta: f64, omega: f64) -> ComplexMatrix {
    let a = (-beta * omega / 2.0).exp();
    let b = (beta * omega / 2.0).exp();
    let z = a + b;
    ComplexMatrix::from_diagonal(&ComplexVector::from_vec(vec![c(a / z, 0.), c(b / z, 0.)]))
}

pub fn partial_swap(theta: f64) -> ComplexMatrix {
    let mut s = ComplexMatrix::zeros(4, 4);
    s[(0, 0)] = c(1., 0.);
    s[(1, 2)] = c(1., 0.);
    s[(2, 1)] = c(1., 0.);
    s[(3, 3)] = c(1., 0.);
    eye(4) * c(theta.cos(), 0.) + s * c(0., theta.sin())
}

pub struct Literal {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
    pub g: f64,
    pub tau: f64,
    pub beta: f64,
    pub theta: f64,
}

impl Literal {
    fn step_unitary(&self) -> ComplexMatrix {
        let us = propagator(&ring_hamiltonian(self.jx, self.jy, self.jz, 3), self.tau);
        let ui = propagator(&flip_flop_hamiltonian(self.g, &[0, 1, 2], 3), self.tau);
        ui * kron(&us, &eye(2))
    }

    /// `tr_E[W (ρ ⊗ η) W†]` on the explicit 16-dimensional joint space.
    pub fn markov(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let w = self.step_unitary();
        let joint = &w * kron(rho, &thermal_qubit(self.beta, 1.0)) * w.adjoint();
        partial_trace_by_enumeration(&joint, &[2, 2, 2, 2], &[0, 1, 2])
    }

    /// The non-Markovian step on the explicit 32-dimensional space S ⊗ E_n ⊗ E_{n+1}.
    pub fn nonmarkov(&self, rho_se: &ComplexMatrix) -> ComplexMatrix {
        let w = kron(&self.step_unitary(), &eye(2));
        let ue = kron(&eye(8), &partial_swap(self.theta));
        let big = kron(rho_se, &thermal_qubit(self.beta, 1.0));
        let out = &ue * &w * big * w.adjoint() * ue.adjoint();
        partial_trace_by_enumeration(&out, &[2, 2, 2, 2, 2], &[0, 1, 2, 4])
    }
}

pub fn min_hermitian_eigenvalue(m: &ComplexMatrix) -> f64 {
    let h = (m + m.adjoint()) * c(0.5, 0.);
    na::SymmetricEigen::new(h)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Choi matrix `Σ_ij E_ij ⊗ Φ(E_ij)` of a linear map on `d x d` matrices.
pub fn choi<F: Fn(&ComplexMatrix) -> ComplexMatrix>(d: usize, map: F) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            let mut e = ComplexMatrix::zeros(d, d);
            e[(i, j)] = c(1., 0.);
            out += kron(&e, &map(&e));
        }
    }
    out
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Extends a map known only on Hermitian inputs to all matrices by linearity.
pub fn via_hermitian_parts<F: Fn(&ComplexMatrix) -> ComplexMatrix>(map: F) -> impl Fn(&ComplexMatrix) -> ComplexMatrix {
    move |m| {
        let re = (m + m.adjoint()) * c(0.5, 0.);
        let im = (m - m.adjoint()) * c(0., -0.5);
        map(&re) + map(&im) * c(0., 1.)
    }
}

impl Literal {
    /// The Markovian step with the system meeting the environment one site at a time.
    pub fn markov_sequential(&self, rho: &ComplexMatrix, order: &[usize]) -> ComplexMatrix {
        let us = propagator(&ring_hamiltonian(self.jx, self.jy, self.jz, 3), self.tau);
        let mut w = kron(&us, &eye(2));
        for &site in order {
            w = propagator(&flip_flop_hamiltonian(self.g, &[site], 3), self.tau) * w;
        }
        let joint = &w * kron(rho, &thermal_qubit(self.beta, 1.0)) * w.adjoint();
        partial_trace_by_enumeration(&joint, &[2, 2, 2, 2], &[0, 1, 2])
    }
}
