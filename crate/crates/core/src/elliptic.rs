//! Discrete Laplacians on lattice regions and the Green-field constructions
//! built from them.
//!
//! Fields on a region are plain `Vec<f64>` in the region's local order
//! (see [`Region::sites`]).
//!
//! `(−Δf)_x = Σ_{y∼x} (f_x − f_y)` where, for a site of the region, the sum runs
//! over in-region neighbors only (`NeumannGraph`) or over all `2d` neighbors of
//! `Z^d` with `f = 0` outside the region (`Dirichlet`).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fields::{center_disorder, DisorderField};
use crate::lattice::{Lattice, Region};

/// Default relative residual of [`solve_green`].
pub const DEFAULT_TOL: f64 = 1e-10;

/// Largest lattice handled by the dense covariance.
pub const MAX_DENSE_SITES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaplacianBoundary {
    NeumannGraph,
    Dirichlet,
}

#[derive(Debug, Clone, Copy)]
pub struct LaplacianSpec<'r> {
    pub region: &'r Region,
    pub boundary: LaplacianBoundary,
    /// Non-negative mass², added on the diagonal.
    pub mass2: f64,
}

impl<'r> LaplacianSpec<'r> {
    pub fn neumann(region: &'r Region) -> Self {
        Self {
            region,
            boundary: LaplacianBoundary::NeumannGraph,
            mass2: 0.0,
        }
    }

    pub fn dirichlet(region: &'r Region, mass2: f64) -> Self {
        Self {
            region,
            boundary: LaplacianBoundary::Dirichlet,
            mass2,
        }
    }

    pub fn is_singular(&self) -> bool {
        self.boundary == LaplacianBoundary::NeumannGraph && self.mass2 == 0.0
    }

    fn diagonal(&self, i: usize) -> f64 {
        let base = match self.boundary {
            LaplacianBoundary::NeumannGraph => self.region.local_neighbors(i).len() as f64,
            LaplacianBoundary::Dirichlet => self.region.coordination() as f64,
        };
        base + self.mass2
    }

    fn apply_into(&self, f: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let nb = self.region.local_neighbors(i);
            let s: f64 = nb.iter().map(|&j| f[j as usize]).sum();
            *o = self.diagonal(i) * f[i] - s;
        }
    }

    /// Dense matrix of the operator, for small regions.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.region.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diagonal(i);
            for &j in self.region.local_neighbors(i) {
                m[(i, j as usize)] -= 1.0;
            }
        }
        m
    }
}

pub fn apply_laplacian(spec: &LaplacianSpec<'_>, f: &[f64]) -> Result<Vec<f64>> {
    check_len(spec.region, f)?;
    let mut out = vec![0.0; f.len()];
    spec.apply_into(f, &mut out);
    Ok(out)
}

fn check_len(region: &Region, f: &[f64]) -> Result<()> {
    if f.len() != region.len() {
        return Err(Error::DimensionMismatch(format!(
            "field has {} values, region has {} sites",
            f.len(),
            region.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    /// Defaults to `10 · |region|`.
    pub max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: None,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            max_iter: None,
        }
    }
}

/// Solves `A g = rhs` with Jacobi-preconditioned conjugate gradients.
///
/// For the singular operator (Neumann, no mass) the right-hand side must have
/// zero mean on every connected component and the zero-mean solution is
/// returned; iterates are projected onto the zero-mean subspace each step.
pub fn solve_green(spec: &LaplacianSpec<'_>, rhs: &[f64], opts: SolverOptions) -> Result<Vec<f64>> {
    check_len(spec.region, rhs)?;
    if spec.mass2 < 0.0 {
        return Err(invalid("mass2", "must be non-negative"));
    }
    let n = rhs.len();
    let components = if spec.is_singular() {
        let comps = spec.region.local_components();
        for comp in &comps {
            let sum: f64 = comp.iter().map(|&i| rhs[i]).sum();
            let scale: f64 = comp.iter().map(|&i| rhs[i].abs()).sum();
            if sum.abs() > 1e-9 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::NonZeroMean {
                    mean: sum / comp.len() as f64,
                });
            }
        }
        Some(comps)
    } else {
        None
    };
    let project = |v: &mut [f64]| {
        if let Some(comps) = &components {
            for comp in comps {
                let mean = comp.iter().map(|&i| v[i]).sum::<f64>() / comp.len() as f64;
                comp.iter().for_each(|&i| v[i] -= mean);
            }
        }
    };

    let bnorm = norm(rhs);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let inv_diag: Vec<f64> = (0..n)
        .map(|i| {
            let d = spec.diagonal(i);
            if d > 0.0 {
                1.0 / d
            } else {
                0.0
            }
        })
        .collect();

    let mut r = rhs.to_vec();
    project(&mut r);
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    // A few restarts from the current iterate guard against drift of the
    // recursively updated residual.
    for _restart in 0..4 {
        spec.apply_into(&x, &mut ap);
        for i in 0..n {
            r[i] = rhs[i] - ap[i];
        }
        project(&mut r);
        if norm(&r) <= opts.tol * bnorm {
            project(&mut x);
            return Ok(x);
        }
        for i in 0..n {
            z[i] = inv_diag[i] * r[i];
        }
        project(&mut z);
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            iterations += 1;
            spec.apply_into(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let step = rz / pap;
            for i in 0..n {
                x[i] += step * p[i];
                r[i] -= step * ap[i];
            }
            project(&mut r);
            if norm(&r) <= 0.5 * opts.tol * bnorm {
                break;
            }
            for i in 0..n {
                z[i] = inv_diag[i] * r[i];
            }
            project(&mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        project(&mut x);
        if iterations >= max_iter {
            break;
        }
    }
    spec.apply_into(&x, &mut ap);
    let resid = norm(&rhs.iter().zip(&ap).map(|(b, a)| b - a).collect::<Vec<_>>()) / bnorm;
    if resid <= opts.tol {
        Ok(x)
    } else {
        Err(Error::NotConverged {
            iterations,
            residual: resid,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Zero-mean Green field `g = (−Δ)⁻¹ α̂` of each field component on the
/// region spanned by `sites`, with the Neumann-graph Laplacian of the region.
///
/// Returns the region and one field per component together with `α̂`.
pub fn green_fields(
    lattice: &Lattice,
    sites: &[usize],
    alpha: &DisorderField,
    opts: SolverOptions,
) -> Result<(Region, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    if sites.is_empty() {
        return Err(invalid("box", "must be nonempty"));
    }
    let region = Region::new(lattice, sites.iter().copied());
    let centered = center_disorder(alpha, region.sites());
    let spec = LaplacianSpec::neumann(&region);
    let mut greens = Vec::with_capacity(alpha.k());
    let mut hats = Vec::with_capacity(alpha.k());
    for c in 0..alpha.k() {
        let mut hat: Vec<f64> = centered.iter().map(|v| v[c]).collect();
        // A field constant up to rounding centers to pure noise; treat it as zero.
        let raw = region.sites().iter().fold(0.0f64, |m, &s| m.max(alpha.at(s)[c].abs()));
        if hat.iter().all(|v| v.abs() <= 1e-13 * raw) {
            hat.iter_mut().for_each(|v| *v = 0.0);
        }
        greens.push(solve_green(&spec, &hat, opts)?);
        hats.push(hat);
    }
    Ok((region, greens, hats))
}

/// `E(α) = Σ_components Σ_x α̂_x (−Δ)⁻¹ α̂_x ≥ 0` over the given box.
pub fn disorder_energy(
    lattice: &Lattice,
    sites: &[usize],
    alpha: &DisorderField,
    opts: SolverOptions,
) -> Result<f64> {
    let (_, greens, hats) = green_fields(lattice, sites, alpha, opts)?;
    Ok(greens.iter().zip(&hats).map(|(g, h)| dot(g, h)).sum())
}

/// `g′ = [−Δ_R^D + ℓ⁻²]⁻¹ f` for a scalar source `f` on the region.
pub fn massive_dirichlet_field(
    region: &Region,
    source: &[f64],
    ell: f64,
    opts: SolverOptions,
) -> Result<Vec<f64>> {
    if !(ell > 0.0) {
        return Err(invalid("ell", "must be positive"));
    }
    solve_green(&LaplacianSpec::dirichlet(region, 1.0 / (ell * ell)), source, opts)
}

/// `m²_x = Σ_{y∼x} (f_y − f_x)²` over lattice neighbors, with `f = 0` at
/// lattice sites outside the region.
pub fn mass_field(region: &Region, f: &[f64]) -> Result<Vec<f64>> {
    check_len(region, f)?;
    let mut m2: Vec<f64> = (0..region.len())
        .map(|i| {
            region
                .local_neighbors(i)
                .iter()
                .map(|&j| (f[j as usize] - f[i]).powi(2))
                .sum()
        })
        .collect();
    for &(i, _) in region.crossing_edges() {
        m2[i as usize] += f[i as usize] * f[i as usize];
    }
    Ok(m2)
}

/// Dense `−Δ_Λ` with Dirichlet (zero) boundary conditions on the whole lattice.
pub fn dirichlet_laplacian_dense(lattice: &Lattice) -> Result<DMatrix<f64>> {
    let n = lattice.num_sites();
    if n > MAX_DENSE_SITES {
        return Err(Error::TooLarge(format!(
            "{n} sites exceeds the dense limit of {MAX_DENSE_SITES}"
        )));
    }
    let region = Region::whole(lattice);
    Ok(LaplacianSpec::dirichlet(&region, 0.0).to_dense())
}

/// Exact disorder-averaged two-point function of the random-field gaussian
/// model `H(φ) = Σ_{⟨xy⟩}(φ_x − φ_y)² − ε Σ_x α_x φ_x` with zero boundary values:
///
/// ```text
/// E[⟨φ_x φ_y⟩] = (2β)⁻¹ (−Δ)⁻¹(x, y) + (ε²/4) (−Δ)⁻²(x, y)
/// ```
///
/// For fixed `α` the Gibbs measure is gaussian with covariance `(2β)⁻¹(−Δ)⁻¹`
/// and mean `(ε/2)(−Δ)⁻¹α`.
pub fn gaussian_model_covariance(lattice: &Lattice, eps: f64, beta: f64) -> Result<DMatrix<f64>> {
    if !(beta > 0.0) {
        return Err(invalid("beta", "the gaussian model needs beta > 0"));
    }
    let a = dirichlet_laplacian_dense(lattice)?;
    let n = a.nrows();
    let inv = a
        .cholesky()
        .ok_or_else(|| invalid("laplacian", "dirichlet laplacian is not positive definite"))?
        .inverse();
    let mut cov = &inv * (0.5 / beta);
    if eps != 0.0 {
        cov += (&inv * &inv) * (eps * eps / 4.0);
    }
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = m;
            cov[(j, i)] = m;
        }
    }
    Ok(cov)
}

/// `Var(φ_{x+e_axis} − φ_x)` from a covariance matrix.
pub fn increment_variance(cov: &DMatrix<f64>, lattice: &Lattice, site: usize, axis: usize) -> Option<f64> {
    let slot = lattice.neighbor_slots(site)[2 * axis + 1];
    if slot == crate::lattice::NO_SITE {
        return None;
    }
    let y = slot as usize;
    Some(cov[(site, site)] + cov[(y, y)] - 2.0 * cov[(site, y)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::tile_boxes;

    fn square(n: usize) -> (Lattice, Region) {
        let l = Lattice::new(2, n).unwrap();
        let r = Region::whole(&l);
        (l, r)
    }

    #[test]
    fn constant_in_kernel_of_neumann() {
        let (_, r) = square(4);
        let out = apply_laplacian(&LaplacianSpec::neumann(&r), &vec![3.0; 16]).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn spike() {
        let (l, r) = square(6);
        let x = l.site_at(&[2, 3]).unwrap();
        let mut f = vec![0.0; 36];
        f[x] = 1.0;
        let out = apply_laplacian(&LaplacianSpec::neumann(&r), &f).unwrap();
        assert_eq!(out[x], 4.0);
        for y in l.neighbors(x) {
            assert_eq!(out[y], -1.0);
        }
        assert_eq!(out.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn dirichlet_counts_outside_neighbors() {
        let (l, r) = square(4);
        let corner = l.site_at(&[0, 0]).unwrap();
        let mut f = vec![0.0; 16];
        f[corner] = 1.0;
        let out = apply_laplacian(&LaplacianSpec::dirichlet(&r, 0.5), &f).unwrap();
        assert_eq!(out[corner], 4.5);
    }

    #[test]
    fn zero_rhs() {
        let (_, r) = square(4);
        let g = solve_green(&LaplacianSpec::neumann(&r), &vec![0.0; 16], SolverOptions::default()).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_zero_mean_rejected() {
        let (_, r) = square(4);
        let err = solve_green(&LaplacianSpec::neumann(&r), &vec![1.0; 16], SolverOptions::default());
        assert!(matches!(err, Err(Error::NonZeroMean { .. })));
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let (_, r) = square(16);
        let mut rhs = vec![0.0; 256];
        rhs[17] = 1.0;
        let opts = SolverOptions {
            tol: 1e-12,
            max_iter: Some(3),
        };
        let err = solve_green(&LaplacianSpec::dirichlet(&r, 0.0), &rhs, opts);
        assert!(matches!(err, Err(Error::NotConverged { .. })));
    }

    #[test]
    fn massive_resolvent_is_positive() {
        let l = Lattice::new(2, 12).unwrap();
        let b = &tile_boxes(&l, 8, &[2, 2]).unwrap()[4];
        let r = Region::new(&l, b.sites(&l));
        let mut rhs = vec![0.0; r.len()];
        rhs[5] = 1.0;
        let g = massive_dirichlet_field(&r, &rhs, 3.0, SolverOptions::default()).unwrap();
        assert!(g.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn two_site_disorder_energy() {
        let l = Lattice::new(2, 2).unwrap();
        let pair = [l.site_at(&[0, 0]).unwrap(), l.site_at(&[0, 1]).unwrap()];
        let mut vals = vec![0.0; 4];
        vals[pair[0]] = 1.7;
        vals[pair[1]] = -0.3;
        let alpha = DisorderField::from_values(1, vals).unwrap();
        // α̂ = (a, −a) with a = 1; the 2-site Laplacian has eigenvalue 2.
        let e = disorder_energy(&l, &pair, &alpha, SolverOptions::default()).unwrap();
        assert!((e - 2.0 * 1.0 * 1.0 * 0.5).abs() < 1e-12);
        let constant = DisorderField::from_values(1, vec![0.4; 4]).unwrap();
        let e = disorder_energy(&l, &[0, 1, 2, 3], &constant, SolverOptions::default()).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn mass_field_examples() {
        let (_, r) = square(2);
        let m2 = mass_field(&r, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(m2, vec![2.0; 4]);
        let (l, r) = square(6);
        let m2 = mass_field(&r, &vec![0.7; 36]).unwrap();
        for s in 0..36 {
            if !l.is_boundary(s) {
                assert_eq!(m2[s], 0.0);
            }
        }
    }

    #[test]
    fn covariance_reduces_to_thermal_at_zero_field() {
        let l = Lattice::new(2, 4).unwrap();
        let c0 = gaussian_model_covariance(&l, 0.0, 2.0).unwrap();
        let a = dirichlet_laplacian_dense(&l).unwrap();
        let prod = &a * &c0 * 4.0;
        for i in 0..16 {
            for j in 0..16 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - e).abs() < 1e-12);
            }
        }
        assert!(gaussian_model_covariance(&Lattice::new(2, 66).unwrap(), 0.1, 1.0).is_err());
        assert!(gaussian_model_covariance(&l, 0.1, 0.0).is_err());
    }
}
