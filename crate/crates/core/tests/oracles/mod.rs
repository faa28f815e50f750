//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rfo_core::fields::{sample_disorder, DisorderField, DisorderSeed, Distribution};
use rfo_core::lattice::Lattice;

/// `−Δ` on `sites` built from coordinates. With `dirichlet`, every one of the
/// `2d` lattice directions contributes to the diagonal; otherwise only pairs
/// inside `sites` do.
pub fn dense_laplacian(lattice: &Lattice, sites: &[usize], dirichlet: bool) -> DMatrix<f64> {
    let n = sites.len();
    let d = lattice.dim();
    let mut a = DMatrix::zeros(n, n);
    for (i, &x) in sites.iter().enumerate() {
        let cx = lattice.coords(x);
        if dirichlet {
            a[(i, i)] = 2.0 * d as f64;
        }
        for (j, &y) in sites.iter().enumerate() {
            let cy = lattice.coords(y);
            let dist: usize = cx.iter().zip(&cy).map(|(p, q)| p.abs_diff(*q)).sum();
            if dist == 1 {
                a[(i, j)] = -1.0;
                if !dirichlet {
                    a[(i, i)] += 1.0;
                }
            }
        }
    }
    a
}

/// Moore–Penrose inverse of a symmetric matrix through its eigendecomposition.
pub fn pseudo_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = a.clone().symmetric_eigen();
    let cutoff = 1e-10 * eig.eigenvalues.amax();
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let lam = eig.eigenvalues[k];
        if lam.abs() > cutoff {
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) / lam;
        }
    }
    out
}

/// `I₁(x)/I₀(x)` from the power series of both Bessel functions.
pub fn bessel_ratio(x: f64) -> f64 {
    let q = x * x / 4.0;
    let (mut i0, mut i1) = (0.0, 0.0);
    let mut term = 1.0;
    for m in 0..400 {
        let m = m as f64;
        if m > 0.0 {
            term *= q / (m * m);
        }
        i0 += term;
        i1 += term * (x / 2.0) / (m + 1.0);
        if term < 1e-18 * i0 && m > x {
            break;
        }
    }
    i1 / i0
}

/// Least-squares slope of `ln err` against `ln eps`.
pub fn fit_order(eps: &[f64], err: &[f64]) -> f64 {
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Minimum of an XY energy on a grid that is `width` sites wide, by a
/// frontier transfer over sites in row-major order, on a 24-angle grid that
/// is refined twice around the optimum.
///
/// `unary(site, θ)` is the single-site energy; bonds cost `2 − 2 cos(θ_x − θ_y)`.
pub fn grid_search_minimum(
    rows: usize,
    width: usize,
    unary: &dyn Fn(usize, f64) -> f64,
) -> (f64, Vec<f64>) {
    const P: usize = 24;
    let sites = rows * width;
    let mut grids: Vec<Vec<f64>> = (0..sites)
        .map(|_| (0..P).map(|p| std::f64::consts::TAU * p as f64 / P as f64).collect())
        .collect();
    let mut step = std::f64::consts::TAU / P as f64;
    let mut best = (f64::INFINITY, vec![0.0; sites]);
    for round in 0..3 {
        if round > 0 {
            let span = 2.0 * step;
            step = span / P as f64;
            grids = best
                .1
                .iter()
                .map(|&c| (0..P).map(|p| c - span / 2.0 + (p as f64 + 0.5) * step).collect())
                .collect();
        }
        best = frontier_minimum(rows, width, &grids, unary);
    }
    best
}

fn frontier_minimum(
    rows: usize,
    width: usize,
    grids: &[Vec<f64>],
    unary: &dyn Fn(usize, f64) -> f64,
) -> (f64, Vec<f64>) {
    let p = grids[0].len();
    let bond = |a: f64, b: f64| 2.0 - 2.0 * (a - b).cos();
    let states = p.pow(width as u32);
    let digit = |s: usize, i: usize| (s / p.pow(i as u32)) % p;
    // First row: digit i is the angle index of column i.
    let mut cost = vec![0.0; states];
    for (s, c) in cost.iter_mut().enumerate() {
        let mut e = 0.0;
        for col in 0..width {
            let t = grids[col][digit(s, col)];
            e += unary(col, t);
            if col > 0 {
                e += bond(grids[col - 1][digit(s, col - 1)], t);
            }
        }
        *c = e;
    }
    // Frontier after site x holds the last `width` sites, oldest in digit 0.
    let mut back: Vec<Vec<usize>> = Vec::new();
    for x in width..rows * width {
        let col = x % width;
        let mut next = vec![f64::INFINITY; states];
        let mut arg = vec![0usize; states];
        for (s, &c) in cost.iter().enumerate() {
            let up = grids[x - width][digit(s, 0)];
            let rest = s / p;
            for q in 0..p {
                let t = grids[x][q];
                let mut e = c + unary(x, t) + bond(up, t);
                if col > 0 {
                    e += bond(grids[x - 1][digit(s, width - 1)], t);
                }
                let ns = rest + q * p.pow(width as u32 - 1);
                if e < next[ns] {
                    next[ns] = e;
                    arg[ns] = s;
                }
            }
        }
        cost = next;
        back.push(arg);
    }
    let (mut s, &e) = cost
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let total = rows * width;
    let mut idx = vec![0usize; total];
    for x in (width..total).rev() {
        idx[x] = digit(s, width - 1);
        s = back[x - width][s];
    }
    for col in 0..width {
        idx[col] = digit(s, col);
    }
    (e, idx.iter().enumerate().map(|(x, &q)| grids[x][q]).collect())
}

/// Monte Carlo over `draws` fields of `E[⟨φ_x φ_y⟩]` in the gaussian model,
/// composing the exact per-field moments `(2β)⁻¹G + μμᵀ` with `μ = (ε/2)Gα`.
/// Returns the sample mean and its standard error, entrywise.
pub fn gaussian_covariance_mc(
    lattice: &Lattice,
    eps: f64,
    beta: f64,
    draws: u64,
    master: u64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let sites: Vec<usize> = (0..lattice.num_sites()).collect();
    let a = dense_laplacian(lattice, &sites, true);
    let g = a.try_inverse().expect("dirichlet laplacian is invertible");
    let n = sites.len();
    let thermal = &g / (2.0 * beta);
    let mut sum = DMatrix::<f64>::zeros(n, n);
    let mut sum_sq = DMatrix::<f64>::zeros(n, n);
    for r in 0..draws {
        let alpha: DisorderField =
            sample_disorder(lattice, 1, DisorderSeed { master, realization: r }, Distribution::StandardGaussian)
                .unwrap();
        let v = nalgebra::DVector::from_vec(alpha.component(0));
        let mu = (&g * v) * (eps / 2.0);
        let sample = &thermal + &mu * mu.transpose();
        sum += &sample;
        sum_sq += sample.component_mul(&sample);
    }
    let m = draws as f64;
    let mean = &sum / m;
    let var = (&sum_sq / m - mean.component_mul(&mean)) * (m / (m - 1.0));
    let stderr = var.map(|v| (v.max(0.0) / m).sqrt());
    (mean, stderr)
}
