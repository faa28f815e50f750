//! Angular coordinates for n = 2, the change of variables
//! `φ_x = θ_x − c_x cos θ_x` with `c = (ε/2) g′`, and the renormalized energy
//!
//! ```text
//! 𝒦(φ | φ⁰) = 2 Σ_{⟨xy⟩} [cos(φ_x − φ_y) − 1] + ½ Σ_x m²_x cos² φ_x
//! ```
//!
//! where `g′ = [−Δ_R^D + ℓ⁻²]⁻¹ α` and `m² = mass_field(c)`. With this
//! normalization `−H_R(σ | σ⁰) = 𝒦(φ | φ⁰) + C(α)` up to higher-order terms.
//! Edge sums run over internal edges and edges crossing to the exterior,
//! where the exterior carries `φ⁰ = θ⁰` (no shift outside the region).

use std::f64::consts::PI;

use crate::elliptic::{mass_field, massive_dirichlet_field, SolverOptions};
use crate::error::{invalid, Error, Result};
use crate::fields::{DisorderField, SpinConfiguration};
use crate::lattice::Region;

/// Largest allowed `sup |c|`, keeping `θ ↦ θ − c cos θ` strictly monotone.
pub const INJECTIVITY_LIMIT: f64 = 0.5;

/// `θ ∈ (−π, π]` per site.
pub fn to_angles(spins: &SpinConfiguration) -> Result<Vec<f64>> {
    if spins.n() != 2 {
        return Err(invalid("n", "angles are defined for n = 2"));
    }
    Ok((0..spins.num_sites())
        .map(|s| {
            let v = spins.get(s);
            canonical(v[1].atan2(v[0]))
        })
        .collect())
}

pub fn from_angles(theta: &[f64]) -> SpinConfiguration {
    SpinConfiguration::from_angles(theta)
}

fn canonical(t: f64) -> f64 {
    if t <= -PI {
        t + 2.0 * PI
    } else if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// Angle values outside a region, needed for crossing edges.
#[derive(Debug, Clone, Copy)]
pub enum AngleBoundary<'a> {
    /// Crossing edges are dropped.
    Free,
    /// Angles indexed by lattice site; only exterior entries are read.
    Given(&'a [f64]),
}

/// Shift `c = (ε/2) g′` and mass `m² = mass_field(c)` on a region.
#[derive(Debug, Clone)]
pub struct Renormalization {
    pub gprime: Vec<f64>,
    pub shift: Vec<f64>,
    pub mass2: Vec<f64>,
    pub eps: f64,
}

impl Renormalization {
    /// Builds `g′` from the first field component at the region's sites.
    pub fn new(region: &Region, alpha: &DisorderField, eps: f64, ell: f64) -> Result<Self> {
        let source: Vec<f64> = region.sites().iter().map(|&s| alpha.at(s)[0]).collect();
        let gprime = massive_dirichlet_field(region, &source, ell, SolverOptions::default())?;
        Self::from_gprime(region, gprime, eps)
    }

    pub fn from_gprime(region: &Region, gprime: Vec<f64>, eps: f64) -> Result<Self> {
        let shift: Vec<f64> = gprime.iter().map(|g| 0.5 * eps * g).collect();
        let mass2 = mass_field(region, &shift)?;
        Ok(Self {
            gprime,
            shift,
            mass2,
            eps,
        })
    }

    pub fn check_injective(&self) -> Result<()> {
        let sup = self.shift.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if sup < INJECTIVITY_LIMIT {
            Ok(())
        } else {
            Err(Error::InjectivityGuard(sup))
        }
    }
}

/// `φ_x = θ_x − (ε/2) cos θ_x · g′_x`; no canonicalization.
pub fn change_of_variables(theta: &[f64], gprime: &[f64], eps: f64) -> Result<Vec<f64>> {
    let shift: Vec<f64> = gprime.iter().map(|g| 0.5 * eps * g).collect();
    shift_angles(theta, &shift)
}

fn shift_angles(theta: &[f64], shift: &[f64]) -> Result<Vec<f64>> {
    if theta.len() != shift.len() {
        return Err(Error::DimensionMismatch("angle and shift lengths differ".into()));
    }
    let sup = shift.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if sup >= INJECTIVITY_LIMIT {
        return Err(Error::InjectivityGuard(sup));
    }
    Ok(theta.iter().zip(shift).map(|(t, c)| t - c * t.cos()).collect())
}

/// Solves `φ = θ − (ε/2) cos θ · g′` for `θ` by Newton's method per site.
pub fn inverse_change_of_variables(phi: &[f64], gprime: &[f64], eps: f64) -> Result<Vec<f64>> {
    let shift: Vec<f64> = gprime.iter().map(|g| 0.5 * eps * g).collect();
    unshift_angles(phi, &shift)
}

fn unshift_angles(phi: &[f64], shift: &[f64]) -> Result<Vec<f64>> {
    if phi.len() != shift.len() {
        return Err(Error::DimensionMismatch("angle and shift lengths differ".into()));
    }
    let sup = shift.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if sup >= INJECTIVITY_LIMIT {
        return Err(Error::InjectivityGuard(sup));
    }
    Ok(phi
        .iter()
        .zip(shift)
        .map(|(&p, &c)| {
            let mut t = p;
            for _ in 0..50 {
                let f = t - c * t.cos() - p;
                let step = f / (1.0 + c * t.sin());
                t -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            t
        })
        .collect())
}

/// `2 Σ [cos(φ_x − φ_y) − 1]` over internal edges and, unless the boundary is
/// free, crossing edges.
fn exchange_term(region: &Region, phi: &[f64], boundary: AngleBoundary<'_>) -> Result<f64> {
    let mut sum: f64 = region
        .internal_edges()
        .iter()
        .map(|&(i, j)| (phi[i as usize] - phi[j as usize]).cos() - 1.0)
        .sum();
    if let AngleBoundary::Given(outside) = boundary {
        for &(i, y) in region.crossing_edges() {
            let v = *outside.get(y).ok_or(Error::MissingBoundary(y))?;
            if !v.is_finite() {
                return Err(Error::MissingBoundary(y));
            }
            sum += (phi[i as usize] - v).cos() - 1.0;
        }
    }
    Ok(2.0 * sum)
}

/// `𝒦(φ | φ⁰)` for `φ` in the region's local order.
pub fn renormalized_energy(
    region: &Region,
    phi: &[f64],
    mass2: &[f64],
    boundary: AngleBoundary<'_>,
) -> Result<f64> {
    if phi.len() != region.len() || mass2.len() != region.len() {
        return Err(Error::DimensionMismatch("field lengths differ from region size".into()));
    }
    let mass: f64 = phi.iter().zip(mass2).map(|(p, m)| m * p.cos().powi(2)).sum();
    Ok(exchange_term(region, phi, boundary)? + 0.5 * mass)
}

/// `−H_R(θ | θ⁰) = 2 Σ [cos(θ_x − θ_y) − 1] + ε Σ_x α_x sin θ_x`.
pub fn region_minus_energy(
    region: &Region,
    theta: &[f64],
    alpha: &DisorderField,
    eps: f64,
    boundary: AngleBoundary<'_>,
) -> Result<f64> {
    let field: f64 = region
        .sites()
        .iter()
        .zip(theta)
        .map(|(&s, t)| alpha.at(s)[0] * t.sin())
        .sum();
    Ok(exchange_term(region, theta, boundary)? + eps * field)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discrepancy {
    /// `|(−H_R(θ) − C) − 𝒦(φ)|`.
    pub value: f64,
    /// `C = −H_R(0) − 𝒦(φ(0))`.
    pub constant: f64,
    pub minus_energy: f64,
    pub kappa: f64,
}

/// Size of the error made by replacing `−H_R` with `𝒦 + C`, for angles
/// `theta` given on the whole lattice (exterior entries act as `θ⁰`).
pub fn transformation_discrepancy(
    region: &Region,
    theta: &[f64],
    alpha: &DisorderField,
    renorm: &Renormalization,
) -> Result<Discrepancy> {
    let local: Vec<f64> = region.sites().iter().map(|&s| theta[s]).collect();
    let boundary = AngleBoundary::Given(theta);
    let eval = |t: &[f64]| -> Result<(f64, f64)> {
        let phi = shift_angles(t, &renorm.shift)?;
        Ok((
            region_minus_energy(region, t, alpha, renorm.eps, boundary)?,
            renormalized_energy(region, &phi, &renorm.mass2, boundary)?,
        ))
    };
    let (h0, k0) = eval(&vec![0.0; region.len()])?;
    let (h, k) = eval(&local)?;
    let constant = h0 - k0;
    Ok(Discrepancy {
        value: ((h - constant) - k).abs(),
        constant,
        minus_energy: h,
        kappa: k,
    })
}

#[derive(Debug, Clone)]
pub struct AscentResult {
    pub phi: Vec<f64>,
    pub value: f64,
    pub sweeps: usize,
    pub converged: bool,
}

/// Coordinate ascent on `𝒦`. Each site is set to the best of several Newton
/// solutions of its one-dimensional problem; a site only moves if that
/// raises `𝒦`, so the value is non-decreasing.
pub fn maximize_renormalized(
    region: &Region,
    init: &[f64],
    mass2: &[f64],
    boundary: AngleBoundary<'_>,
    tol: f64,
    max_sweeps: usize,
) -> Result<AscentResult> {
    let mut phi = init.to_vec();
    let mut value = renormalized_energy(region, &phi, mass2, boundary)?;
    // Exterior neighbors per local site.
    let mut outside: Vec<Vec<f64>> = vec![Vec::new(); region.len()];
    if let AngleBoundary::Given(ext) = boundary {
        for &(i, y) in region.crossing_edges() {
            outside[i as usize].push(ext[y]);
        }
    }
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut largest_move: f64 = 0.0;
        for i in 0..region.len() {
            let (mut a, mut b) = (0.0, 0.0);
            for &j in region.local_neighbors(i) {
                a += phi[j as usize].cos();
                b += phi[j as usize].sin();
            }
            for v in &outside[i] {
                a += v.cos();
                b += v.sin();
            }
            let q = 0.25 * mass2[i];
            // f(t) = 2a cos t + 2b sin t + q cos 2t (+ const)
            let f = |t: f64| 2.0 * (a * t.cos() + b * t.sin()) + q * (2.0 * t).cos();
            let cur = phi[i];
            let mut best = (f(cur), cur);
            let w = b.atan2(a);
            for start in [cur, w, 0.0, PI, w + 0.5 * PI, w - 0.5 * PI, 0.5 * PI, -0.5 * PI] {
                let mut t = start;
                for _ in 0..30 {
                    let d1 = 2.0 * (-a * t.sin() + b * t.cos()) - 2.0 * q * (2.0 * t).sin();
                    let d2 = -2.0 * (a * t.cos() + b * t.sin()) - 4.0 * q * (2.0 * t).cos();
                    let step = if d2 < 0.0 { d1 / d2 } else { -d1.signum() * 0.1 };
                    t -= step;
                    if step.abs() < 1e-14 {
                        break;
                    }
                }
                let v = f(t);
                if v > best.0 + 1e-15 {
                    best = (v, t);
                }
            }
            let t = canonical(best.1);
            let moved = (t - cur).sin().abs().max(1.0 - (t - cur).cos());
            largest_move = largest_move.max(moved);
            phi[i] = if moved > 0.0 { t } else { cur };
        }
        let new_value = renormalized_energy(region, &phi, mass2, boundary)?;
        value = new_value.max(value);
        if largest_move <= tol {
            converged = true;
            break;
        }
    }
    Ok(AscentResult {
        phi,
        value,
        sweeps,
        converged,
    })
}
