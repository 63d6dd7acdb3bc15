#![allow(dead_code)]

use faer::{Mat, MatRef, Side};
use mwgl::synth::{generate_graph, GraphRecipe};
use mwgl::{ModeCovariances, ProductModel, WeightVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Connected weighted ER(0.5) graph with weights in [0.1, 2].
pub fn connected(p: usize, seed: u64) -> WeightVector {
    generate_graph(&GraphRecipe::erdos_renyi(p, 0.5, seed)).unwrap()
}

pub fn model(p1: usize, p2: usize, seed: u64) -> ProductModel {
    ProductModel::new(connected(p1, seed), connected(p2, seed ^ 0x9e37_79b9))
}

/// Complete graph with every weight in [0.1, 2]; interior point of the feasible set.
pub fn interior(p: usize, rng: &mut ChaCha8Rng) -> WeightVector {
    let m = p * (p - 1) / 2;
    WeightVector::new(p, (0..m).map(|_| rng.random_range(0.1..2.0)).collect()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random SPD mode covariances `A Aᵀ / k + 0.1 I`.
pub fn random_covariances(p1: usize, p2: usize, rng: &mut ChaCha8Rng) -> ModeCovariances {
    let spd = |p: usize, rng: &mut ChaCha8Rng| {
        let a = Mat::from_fn(p, p + 3, |_, _| rng.random_range(-1.0..1.0));
        let mut s = &a * a.transpose() * faer::Scale(1.0 / (p + 3) as f64);
        for i in 0..p {
            s[(i, i)] += 0.1;
        }
        s
    };
    ModeCovariances::new(spd(p1, rng), spd(p2, rng)).unwrap()
}

/// Dense Laplacian built entry by entry, pairs enumerated column by column below the diagonal.
pub fn dense_laplacian(p: usize, w: &[f64]) -> Mat<f64> {
    let mut l = Mat::<f64>::zeros(p, p);
    let mut k = 0;
    for j in 0..p {
        for i in j + 1..p {
            l[(i, j)] -= w[k];
            l[(j, i)] -= w[k];
            l[(i, i)] += w[k];
            l[(j, j)] += w[k];
            k += 1;
        }
    }
    assert_eq!(k, w.len());
    l
}

/// `A ⊗ I + I ⊗ B` by explicit index arithmetic.
pub fn dense_kron_sum(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let (p1, p2) = (a.nrows(), b.nrows());
    Mat::from_fn(p1 * p2, p1 * p2, |r, c| {
        let (i1, i2, j1, j2) = (r / p2, r % p2, c / p2, c % p2);
        let mut v = 0.0;
        if i2 == j2 {
            v += a[(i1, j1)];
        }
        if i1 == j1 {
            v += b[(i2, j2)];
        }
        v
    })
}

pub fn frob(m: MatRef<'_, f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)] * m[(i, j)];
        }
    }
    s.sqrt()
}

pub fn rel_frob(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    let d = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)]);
    frob(d.as_ref()) / frob(b)
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn dense_eigenvalues(m: MatRef<'_, f64>) -> Vec<f64> {
    let evd = m.self_adjoint_eigen(Side::Lower).unwrap();
    let mut v: Vec<f64> = (0..m.nrows()).map(|k| evd.S().column_vector()[k]).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Moore–Penrose pseudo-inverse of a symmetric PSD matrix via its eigendecomposition.
pub fn dense_pinv(m: MatRef<'_, f64>) -> Mat<f64> {
    let p = m.nrows();
    let evd = m.self_adjoint_eigen(Side::Lower).unwrap();
    let (u, s) = (evd.U(), evd.S().column_vector());
    let cut = 1e-9 * (0..p).map(|k| s[k].abs()).fold(1.0, f64::max);
    Mat::from_fn(p, p, |i, j| (0..p).filter(|&k| s[k] > cut).map(|k| u[(i, k)] * u[(j, k)] / s[k]).sum())
}

/// Partial traces of a `p1 p2 x p1 p2` matrix over the second and first mode.
pub fn partial_traces(m: MatRef<'_, f64>, p1: usize, p2: usize) -> (Mat<f64>, Mat<f64>) {
    let h1 = Mat::from_fn(p1, p1, |a, b| (0..p2).map(|l| m[(a * p2 + l, b * p2 + l)]).sum());
    let h2 = Mat::from_fn(p2, p2, |a, b| (0..p1).map(|l| m[(l * p2 + a, l * p2 + b)]).sum());
    (h1, h2)
}

pub fn trace_prod(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}
