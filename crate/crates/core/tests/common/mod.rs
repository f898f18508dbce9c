//! Brute-force reference computations on raw rows, independent of the
//! crate's cached unit rows and kernels.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tokentrim::{TokenBundle, TokenMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_rows(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> Vec<Vec<f32>> {
    (0..rows)
        .map(|_| {
            (0..dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal) as f32)
                .collect()
        })
        .collect()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> TokenMatrix {
    if rows == 0 {
        return TokenMatrix::empty(dim).unwrap();
    }
    TokenMatrix::from_rows(&random_rows(rng, rows, dim)).unwrap()
}

pub fn random_bundle(
    rng: &mut ChaCha8Rng,
    counts: &[usize],
    text: usize,
    dim: usize,
) -> TokenBundle {
    let images = counts.iter().map(|&m| random_matrix(rng, m, dim)).collect();
    TokenBundle::new(images, random_matrix(rng, text, dim)).unwrap()
}

fn rows_of(m: &TokenMatrix) -> Vec<Vec<f64>> {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|&x| f64::from(x)).collect())
        .collect()
}

pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / (na * nb)
}

/// Ordered-pair mean of `1 - cos`, cosines taken on raw rows.
pub fn brute_intra(m: &TokenMatrix) -> f64 {
    let rows = rows_of(m);
    let n = rows.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += 1.0 - cos(&rows[i], &rows[j]);
            }
        }
    }
    total / (n * (n - 1)) as f64
}

pub fn brute_token_diversity(m: &TokenMatrix) -> Vec<f64> {
    let rows = rows_of(m);
    let n = rows.len();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| 1.0 - cos(&rows[i], &rows[j]))
                .sum::<f64>()
                / (n - 1) as f64
        })
        .collect()
}

pub fn brute_alignment(tokens: &TokenMatrix, text: &TokenMatrix) -> Vec<f64> {
    let xs = rows_of(tokens);
    let ts = rows_of(text);
    xs.iter()
        .map(|x| {
            -ts.iter()
                .map(|t| x.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .sum::<f64>()
                / ts.len() as f64
        })
        .collect()
}

/// Farthest pair by cosine distance, lexicographically smallest on ties
/// within `eps`.
pub fn brute_farthest_pair(m: &TokenMatrix) -> ((usize, usize), f64) {
    let rows = rows_of(m);
    let mut best = ((0, 1), f64::NEG_INFINITY);
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            let d = 1.0 - cos(&rows[i], &rows[j]);
            if d > best.1 {
                best = ((i, j), d);
            }
        }
    }
    best
}

/// Mean pairwise distance over unordered pairs of a subset, raw rows.
pub fn brute_dispersion(m: &TokenMatrix, subset: &[usize]) -> f64 {
    let rows = rows_of(m);
    let mut total = 0.0;
    let mut pairs = 0;
    for (p, &i) in subset.iter().enumerate() {
        for &j in &subset[p + 1..] {
            total += 1.0 - cos(&rows[i], &rows[j]);
            pairs += 1;
        }
    }
    total / pairs as f64
}

/// Non-dominated indices of `(v, a)` pairs, straight from the definition.
pub fn brute_front(points: &[(usize, f64, f64)]) -> Vec<usize> {
    let mut out: Vec<usize> = points
        .iter()
        .filter(|&&(_, v, a)| {
            !points
                .iter()
                .any(|&(_, qv, qa)| qv >= v && qa >= a && (qv > v || qa > a))
        })
        .map(|&(i, _, _)| i)
        .collect();
    out.sort_unstable();
    out
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}
