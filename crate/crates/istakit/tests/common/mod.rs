//! Shared test oracles. Everything here is deliberately independent of the
//! library's implementation paths: the SVD is a one-sided Jacobi, gradients
//! come from central differences, the prox from scalar minimization, and
//! the accelerated-gradient reference is a from-scratch reimplementation.

#![allow(dead_code)]
// index-style loops are deliberate here: the reference implementations
// must not share structure with the library's iterator-based kernels
#![allow(clippy::needless_range_loop)]

use istakit::linalg::{DenseMatrix, DenseVector};
use istakit::problem::{objective, ProblemInstance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DenseMatrix {
    let entries: Vec<f64> = (0..rows * cols)
        .map(|_| {
            let g: f64 = rng.sample(StandardNormal);
            scale * g
        })
        .collect();
    DenseMatrix::new(rows, cols, entries).expect("finite entries")
}

pub fn random_vector(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> DenseVector {
    let entries: Vec<f64> = (0..dim)
        .map(|_| {
            let g: f64 = rng.sample(StandardNormal);
            scale * g
        })
        .collect();
    DenseVector::new(entries).expect("finite entries")
}

/// An instance with arbitrary (not necessarily consistent) measurements.
pub fn random_instance(seed: u64, m: usize, n: usize) -> ProblemInstance {
    let mut r = rng(seed);
    let a = random_matrix(&mut r, m, n, 1.0);
    let y = random_vector(&mut r, m, 1.0);
    ProblemInstance::new(a, y, None, None).expect("valid instance")
}

/// A noiseless sparse-recovery instance built through the public API.
pub fn sparse_instance(seed: u64, m: usize, n: usize, sparsity: usize) -> ProblemInstance {
    let mut r = rng(seed);
    let a = random_matrix(&mut r, m, n, (1.0 / m as f64).sqrt());
    let mut x = vec![0.0; n];
    let mut placed = 0;
    while placed < sparsity {
        let i = r.gen_range(0..n);
        if x[i] == 0.0 {
            let mag: f64 = r.gen_range(1.0..2.0);
            x[i] = if r.gen_bool(0.5) { mag } else { -mag };
            placed += 1;
        }
    }
    let x_true = DenseVector::new(x).unwrap();
    let y = istakit::linalg::matvec(&a, &x_true).unwrap();
    ProblemInstance::new(a, y, Some(x_true), Some(seed)).expect("valid instance")
}

/// Singular values by one-sided Jacobi: rotate column pairs until mutually
/// orthogonal; the singular values are the resulting column norms.
/// Descending order; min(rows, cols) values.
pub fn jacobi_singular_values(a: &DenseMatrix) -> Vec<f64> {
    let (rows, cols) = (a.rows(), a.cols());
    // work on the tall orientation
    let (m, n, mut col): (usize, usize, Vec<f64>) = if rows >= cols {
        let mut c = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                c[j * rows + i] = a.get(i, j);
            }
        }
        (rows, cols, c)
    } else {
        let mut c = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                c[i * cols + j] = a.get(i, j);
            }
        }
        (cols, rows, c)
    };
    let mut sweeps = 0;
    loop {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut app, mut aqq, mut apq) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    let x = col[p * m + i];
                    let y = col[q * m + i];
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if apq == 0.0 || apq.abs() <= 1e-15 * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let x = col[p * m + i];
                    let y = col[q * m + i];
                    col[p * m + i] = c * x - s * y;
                    col[q * m + i] = s * x + c * y;
                }
            }
        }
        sweeps += 1;
        if !rotated || sweeps > 60 {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| col[j * m + i].powi(2)).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|x, y| y.partial_cmp(x).expect("finite"));
    sv
}

/// Central-difference gradient of the least-squares objective.
pub fn finite_difference_gradient(p: &ProblemInstance, x: &DenseVector, h: f64) -> Vec<f64> {
    let base: Vec<f64> = x.as_slice().to_vec();
    (0..x.dim())
        .map(|i| {
            let mut plus = base.clone();
            plus[i] += h;
            let mut minus = base.clone();
            minus[i] -= h;
            let fp = objective(p, &DenseVector::new(plus).unwrap()).unwrap();
            let fm = objective(p, &DenseVector::new(minus).unwrap()).unwrap();
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Brute-force minimizer of t|u| + (u - z)^2 / 2: coarse grid then ternary
/// refinement on the convex bracket.
pub fn brute_force_soft_threshold(z: f64, t: f64) -> f64 {
    let g = |u: f64| t * u.abs() + 0.5 * (u - z) * (u - z);
    let span = z.abs() + t + 1.0;
    let grid = 2000usize;
    let mut best_i = 0;
    let mut best = f64::INFINITY;
    for i in 0..=grid {
        let u = -span + 2.0 * span * (i as f64) / (grid as f64);
        let v = g(u);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let cell = 2.0 * span / grid as f64;
    let mut lo = -span + cell * (best_i.saturating_sub(1)) as f64;
    let mut hi = (-span + cell * (best_i + 1) as f64).min(span);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if g(m1) <= g(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    0.5 * (lo + hi)
}

/// Accelerated gradient descent on the raw least-squares data, written
/// from scratch: explicit loops, no shared helpers. Returns the iterate
/// after every step.
pub fn nesterov_reference(
    a: &DenseMatrix,
    y: &DenseVector,
    tau: f64,
    iters: usize,
) -> Vec<Vec<f64>> {
    let (m, n) = (a.rows(), a.cols());
    let mut x = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut t = 1.0f64;
    let mut out = Vec::with_capacity(iters);
    for _ in 0..iters {
        let mut residual = vec![0.0; m];
        for (i, r) in residual.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..n {
                acc += a.get(i, j) * v[j];
            }
            *r = acc - y[i];
        }
        let mut grad = vec![0.0; n];
        for (j, g) in grad.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..m {
                acc += a.get(i, j) * residual[i];
            }
            *g = acc;
        }
        let x_new: Vec<f64> = (0..n).map(|j| v[j] - tau * grad[j]).collect();
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let coef = (t - 1.0) / t_new;
        v = (0..n).map(|j| x_new[j] + coef * (x_new[j] - x[j])).collect();
        t = t_new;
        x = x_new;
        out.push(x.clone());
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
