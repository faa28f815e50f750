//! Zero-temperature analysis: the quadratic spin-wave optimum on a box and
//! nonlinear relaxation of `H`.

use rayon::prelude::*;
use serde::Serialize;

use crate::elliptic::{green_fields, SolverOptions};
use crate::energy::{field_buffer, Hamiltonian};
use crate::error::{invalid, Error, Result};
use crate::fields::{DisorderField, ModelParams, SpinConfiguration};
use crate::lattice::{Lattice, Region};
use crate::rng::{stream, Purpose};

/// Quadratic optimum of `−H` over small deviations `θ̂` around a constant angle
/// `ψ` on a box with free boundary (n = 2, k = 1).
///
/// For our normalization `θ̂ = (ε/2) cos ψ · g` with `g = (−Δ)⁻¹ α̂` and
/// `−H(ψ + θ̂) = ε sin ψ Σα + (ε²/4) cos²ψ · E(α) + O(ε³)`.
#[derive(Debug, Clone)]
pub struct SpinWaveOptimum {
    pub region: Region,
    /// Deviation per box site, in the region's local order.
    pub theta_hat: Vec<f64>,
    /// `(ε²/4) cos²ψ · E(α)`.
    pub quadratic_gain: f64,
    /// `ε sin ψ · Σ_z α_z`, the value of `−H` at the constant angle.
    pub first_order: f64,
}

pub fn spin_wave_optimum(
    lattice: &Lattice,
    box_sites: &[usize],
    alpha: &DisorderField,
    psi: f64,
    eps: f64,
) -> Result<SpinWaveOptimum> {
    if alpha.k() != 1 {
        return Err(invalid("k", "the spin-wave optimum is defined for n = 2, k = 1"));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(invalid("eps", "must lie in [0, 1)"));
    }
    let (region, greens, hats) = green_fields(lattice, box_sites, alpha, SolverOptions::default())?;
    let g = &greens[0];
    let energy: f64 = g.iter().zip(&hats[0]).map(|(a, b)| a * b).sum();
    let c = psi.cos();
    let theta_hat = g.iter().map(|v| 0.5 * eps * c * v).collect();
    let sum_alpha: f64 = region.sites().iter().map(|&s| alpha.at(s)[0]).sum();
    Ok(SpinWaveOptimum {
        region,
        theta_hat,
        quadratic_gain: 0.25 * eps * eps * c * c * energy,
        first_order: eps * psi.sin() * sum_alpha,
    })
}

/// `H` restricted to a region with free boundary: internal exchange plus the
/// random-field term of the region's sites, for n = 2 spins given by angles.
pub fn box_energy_from_angles(region: &Region, alpha: &DisorderField, eps: f64, angles: &[f64]) -> f64 {
    let exchange: f64 = region
        .internal_edges()
        .iter()
        .map(|&(i, j)| 2.0 - 2.0 * (angles[i as usize] - angles[j as usize]).cos())
        .sum();
    let field: f64 = region
        .sites()
        .iter()
        .zip(angles)
        .map(|(&s, t)| alpha.at(s)[0] * t.sin())
        .sum();
    exchange - eps * field
}

#[derive(Debug, Clone, Copy)]
pub struct RelaxOptions {
    /// Target sup-norm of the tangent gradient over free sites.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_sweeps: 100_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RelaxationReport {
    #[serde(skip)]
    pub config: SpinConfiguration,
    /// `H` before the first sweep and after every sweep.
    pub energy_trace: Vec<f64>,
    pub gradient_sup: f64,
    pub sweeps: usize,
    pub converged: bool,
}

impl RelaxationReport {
    pub fn final_energy(&self) -> f64 {
        *self.energy_trace.last().expect("trace holds the initial energy")
    }
}

/// Coordinate-wise exact minimization `σ_x ← h_x / |h_x|`.
///
/// Sites with `fixed[x]` are held. Sweeps run in lexicographic order, reversed
/// on every other sweep.
pub fn relax(
    lattice: &Lattice,
    init: &SpinConfiguration,
    alpha: &DisorderField,
    params: &ModelParams,
    fixed: Option<&[bool]>,
    opts: RelaxOptions,
) -> Result<RelaxationReport> {
    params.check_shapes(lattice, init, alpha)?;
    let ham = Hamiltonian::new(lattice, alpha, params)?;
    let sites = lattice.num_sites();
    if let Some(f) = fixed {
        if f.len() != sites {
            return Err(Error::DimensionMismatch("fixed mask length differs from lattice size".into()));
        }
    }
    let free: Vec<usize> = (0..sites).filter(|&s| fixed.is_none_or(|f| !f[s])).collect();
    if free.is_empty() {
        return Err(invalid("fixed", "at least one site must be free"));
    }
    let mut spins = init.clone();
    let n = params.n;
    let mut buf = [0.0; 8];
    let mut trace = vec![ham.total(&spins)];
    let mut grad = gradient_sup(&ham, &spins, &free);
    let mut sweeps = 0;
    while grad > opts.tol && sweeps < opts.max_sweeps {
        let h = field_buffer(&mut buf, n);
        let mut update = |s: usize| {
            ham.local_field(&spins, s, h);
            let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                spins.set(s, h);
            }
        };
        if sweeps % 2 == 0 {
            free.iter().for_each(|&s| update(s));
        } else {
            free.iter().rev().for_each(|&s| update(s));
        }
        sweeps += 1;
        trace.push(ham.total(&spins));
        grad = gradient_sup(&ham, &spins, &free);
    }
    Ok(RelaxationReport {
        config: spins,
        energy_trace: trace,
        gradient_sup: grad,
        sweeps,
        converged: grad <= opts.tol,
    })
}

fn gradient_sup(ham: &Hamiltonian<'_>, spins: &SpinConfiguration, free: &[usize]) -> f64 {
    let mut buf = [0.0; 8];
    let h = field_buffer(&mut buf, ham.n());
    let mut sup: f64 = 0.0;
    for &s in free {
        ham.local_field(spins, s, h);
        let sigma = spins.get(s);
        let radial: f64 = h.iter().zip(sigma).map(|(a, b)| a * b).sum();
        let t: f64 = h.iter().zip(sigma).map(|(a, b)| (a - radial * b).powi(2)).sum();
        sup = sup.max(t.sqrt());
    }
    sup
}

/// Relaxes from `starts` independent uniformly random initial states and
/// returns the reports ordered by start index together with the index of the
/// lowest final energy (ties go to the smaller index).
pub fn relax_multistart(
    lattice: &Lattice,
    alpha: &DisorderField,
    params: &ModelParams,
    fixed: Option<&[bool]>,
    starts: usize,
    seed: u64,
    opts: RelaxOptions,
) -> Result<(Vec<RelaxationReport>, usize)> {
    if starts == 0 {
        return Err(invalid("starts", "must be at least 1"));
    }
    let reports = (0..starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Purpose::Init, i as u64);
            let init = SpinConfiguration::random(lattice.num_sites(), params.n, &mut rng);
            relax(lattice, &init, alpha, params, fixed, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let best = (0..starts)
        .min_by(|&a, &b| reports[a].final_energy().total_cmp(&reports[b].final_energy()))
        .expect("nonempty");
    Ok((reports, best))
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionProfile {
    /// `|(I − P) σ_x|` per site.
    pub lengths: Vec<f64>,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

/// Lengths of the ordering-subspace projections of the spins.
pub fn ordering_projection_profile(spins: &SpinConfiguration, k: usize) -> ProjectionProfile {
    let n = spins.n();
    let lengths: Vec<f64> = (0..spins.num_sites())
        .map(|s| spins.get(s)[..n - k].iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut sorted = lengths.clone();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        if sorted.is_empty() {
            return f64::NAN;
        }
        let pos = p * (sorted.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    };
    ProjectionProfile {
        min: q(0.0),
        q25: q(0.25),
        median: q(0.5),
        q75: q(0.75),
        max: q(1.0),
        lengths,
    }
}
