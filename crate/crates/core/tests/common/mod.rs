#![allow(dead_code)]

use curveclust::dataset::{Curve, Dataset};
use curveclust::mixture_model::Responsibilities;
use curveclust::RegressionMixture;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` curves on a common grid of `m` points in [0, 1], drawn around
/// `k` random cubic means.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, m: usize, k: usize) -> Dataset {
    let x: Vec<f64> = (0..m).map(|j| (j as f64 + rng.random::<f64>() * 0.5) / m as f64).collect();
    let means: Vec<[f64; 4]> = (0..k)
        .map(|_| std::array::from_fn(|_| rng.random_range(-2.0..2.0)))
        .collect();
    let curves = (0..n)
        .map(|i| {
            let c = &means[i % k];
            let y = x
                .iter()
                .map(|&t| {
                    let e: f64 = StandardNormal.sample(rng);
                    c[0] + c[1] * t + c[2] * t * t + c[3] * t * t * t + 0.3 * e
                })
                .collect();
            Curve::new(x.clone(), y)
        })
        .collect();
    Dataset::new(curves, None).unwrap()
}

pub fn random_tau(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Responsibilities {
    let mut t = DMatrix::from_fn(n, k, |_, _| rng.random::<f64>() + 1e-3);
    for i in 0..n {
        let s = t.row(i).sum();
        t.row_mut(i).scale_mut(1.0 / s);
    }
    Responsibilities::new(t)
}

pub fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

pub fn random_model(rng: &mut ChaCha8Rng, k: usize, d: usize) -> RegressionMixture {
    RegressionMixture::new(
        random_simplex(rng, k),
        (0..k)
            .map(|_| DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0)))
            .collect(),
        (0..k).map(|_| rng.random_range(0.05..1.0)).collect(),
    )
    .unwrap()
}

/// Dense Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(row, &r)| {
        let mut row = row.clone();
        row.push(r);
        row
    }).collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for c in col..=n {
                m[row][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| m[row][c] * x[c]).sum();
        x[row] = (m[row][n] - s) / m[row][row];
    }
    x
}

/// All set partitions of `n` items as restricted growth strings.
pub fn partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let next = prefix.iter().max().map_or(0, |m| m + 1);
        for l in 0..=next {
            prefix.push(l);
            grow(prefix, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), n, &mut out);
    out
}

pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn label_count(z: &[usize]) -> usize {
    z.iter().max().map_or(0, |m| m + 1)
}

/// Minimum mismatch count over every relabelling of `a`.
pub fn brute_mismatches(a: &[usize], b: &[usize], perms: &[Vec<Vec<usize>>]) -> usize {
    let k = label_count(a).max(label_count(b));
    perms[k]
        .iter()
        .map(|p| a.iter().zip(b).filter(|(x, y)| p[**x] != **y).count())
        .min()
        .unwrap()
}

pub fn brute_rand(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut agree, mut total) = (0usize, 0usize);
    for i in 0..n {
        for j in i + 1..n {
            total += 1;
            if (a[i] == a[j]) == (b[i] == b[j]) {
                agree += 1;
            }
        }
    }
    agree as f64 / total as f64
}

/// `Σ_i τ_ik X_iᵀX_i` and `Σ_i τ_ik X_iᵀ y_i` by explicit loops.
pub fn weighted_normal_equations(
    designs: &[DMatrix<f64>],
    ys: &[Vec<f64>],
    weights: &[f64],
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = designs[0].ncols();
    let mut a = vec![vec![0.0; d]; d];
    let mut b = vec![0.0; d];
    for ((x, y), &w) in designs.iter().zip(ys).zip(weights) {
        for j in 0..x.nrows() {
            for r in 0..d {
                b[r] += w * x[(j, r)] * y[j];
                for c in 0..d {
                    a[r][c] += w * x[(j, r)] * x[(j, c)];
                }
            }
        }
    }
    (a, b)
}
