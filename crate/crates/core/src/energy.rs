//! The RFO(n;k) Hamiltonian and its observables.
//!
//! Sign and weight conventions (every other module relies on these):
//!
//! ```text
//! H(σ) = Σ_{⟨xy⟩} |σ_x − σ_y|²  −  ε Σ_x α̃_x·σ_x  −  h Σ_{x∈∂Λ} u·σ_x
//! ```
//!
//! with each unordered nearest-neighbor pair counted once, `α̃_x` the field
//! embedded in the last `k` coordinates, and Gibbs weight `exp(−βH)`.
//! As a function of a single spin, `H = const − h_x·σ_x` with local field
//! `h_x = 2 Σ_{y∼x} σ_y + ε α̃_x + b_x`.

use serde::Serialize;

use crate::error::Result;
use crate::fields::{Boundary, DisorderField, ModelParams, SpinConfiguration};
use crate::lattice::{Lattice, Region};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub exchange: f64,
    pub field: f64,
    pub boundary: f64,
    pub total: f64,
}

/// Precomputed per-site external fields for one disorder realization.
#[derive(Debug, Clone)]
pub struct Hamiltonian<'a> {
    lattice: &'a Lattice,
    n: usize,
    /// `ε α̃_x` per site.
    random: Vec<f64>,
    /// `b_x` per site: boundary field or the pull of frozen exterior spins.
    boundary: Vec<f64>,
    /// Constant part of the fixed-spin boundary energy.
    boundary_constant: f64,
}

impl<'a> Hamiltonian<'a> {
    pub fn new(lattice: &'a Lattice, alpha: &DisorderField, params: &ModelParams) -> Result<Self> {
        params.validate()?;
        if alpha.k() != params.k || alpha.num_sites() != lattice.num_sites() {
            return Err(crate::Error::DimensionMismatch(format!(
                "field is {} sites x {} components, expected {} x {}",
                alpha.num_sites(),
                alpha.k(),
                lattice.num_sites(),
                params.k
            )));
        }
        let n = params.n;
        let sites = lattice.num_sites();
        let mut random = vec![0.0; sites * n];
        if params.eps != 0.0 {
            for (s, chunk) in random.chunks_exact_mut(n).enumerate() {
                alpha.embed_into(s, chunk);
                chunk.iter_mut().for_each(|v| *v *= params.eps);
            }
        }
        let mut boundary = vec![0.0; sites * n];
        let mut boundary_constant = 0.0;
        match &params.boundary {
            Boundary::Free => {}
            Boundary::Field { u, strength } => {
                let u = crate::fields::normalized(u).expect("validated");
                for &s in lattice.boundary() {
                    for (b, uc) in boundary[s * n..(s + 1) * n].iter_mut().zip(&u) {
                        *b = strength * uc;
                    }
                }
            }
            Boundary::Fixed { spin } => {
                let v = crate::fields::normalized(spin).expect("validated");
                for s in 0..sites {
                    let missing = lattice.missing_neighbors(s) as f64;
                    if missing > 0.0 {
                        boundary_constant += 2.0 * missing;
                        for (b, vc) in boundary[s * n..(s + 1) * n].iter_mut().zip(&v) {
                            *b = 2.0 * missing * vc;
                        }
                    }
                }
            }
        }
        Ok(Self {
            lattice,
            n,
            random,
            boundary,
            boundary_constant,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        self.lattice
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Site-independent part of the local field, `ε α̃_x + b_x`.
    #[inline]
    pub fn external_field(&self, site: usize, out: &mut [f64]) {
        let r = &self.random[site * self.n..(site + 1) * self.n];
        let b = &self.boundary[site * self.n..(site + 1) * self.n];
        for ((o, r), b) in out.iter_mut().zip(r).zip(b) {
            *o = r + b;
        }
    }

    /// `h_x = 2 Σ_{y∼x} σ_y + ε α̃_x + b_x`.
    #[inline]
    pub fn local_field(&self, spins: &SpinConfiguration, site: usize, out: &mut [f64]) {
        self.external_field(site, out);
        for y in self.lattice.neighbors(site) {
            for (o, v) in out.iter_mut().zip(spins.get(y)) {
                *o += 2.0 * v;
            }
        }
    }

    /// `H(σ with σ_site → proposed) − H(σ)`, in O(d).
    pub fn delta(&self, spins: &SpinConfiguration, site: usize, proposed: &[f64]) -> f64 {
        let mut h = [0.0; 8];
        let h = field_buffer(&mut h, self.n);
        self.local_field(spins, site, h);
        -h.iter()
            .zip(proposed.iter().zip(spins.get(site)))
            .map(|(h, (p, c))| h * (p - c))
            .sum::<f64>()
    }

    pub fn breakdown(&self, spins: &SpinConfiguration) -> EnergyBreakdown {
        let exchange = exchange_energy(self.lattice, spins);
        let field = -dot(&self.random, spins.as_slice());
        let boundary = self.boundary_constant - dot(&self.boundary, spins.as_slice());
        EnergyBreakdown {
            exchange,
            field,
            boundary,
            total: exchange + field + boundary,
        }
    }

    pub fn total(&self, spins: &SpinConfiguration) -> f64 {
        self.breakdown(spins).total
    }

    /// Tangent gradient of `H`: the Euclidean gradient `−h_x` projected off `σ_x`.
    pub fn gradient(&self, spins: &SpinConfiguration) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; spins.as_slice().len()];
        let mut h = vec![0.0; n];
        for s in 0..self.lattice.num_sites() {
            self.local_field(spins, s, &mut h);
            let sigma = spins.get(s);
            let radial: f64 = h.iter().zip(sigma).map(|(a, b)| a * b).sum();
            for c in 0..n {
                out[s * n + c] = -(h[c] - radial * sigma[c]);
            }
        }
        out
    }
}

/// Stack buffer for local fields; spin dimension is capped at 8 by `ModelParams::validate`.
#[inline]
pub(crate) fn field_buffer(buf: &mut [f64; 8], n: usize) -> &mut [f64] {
    assert!(n <= 8, "spin dimension above 8 is not supported by the fast paths");
    &mut buf[..n]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn exchange_energy(lattice: &Lattice, spins: &SpinConfiguration) -> f64 {
    lattice
        .edges()
        .iter()
        .map(|&(x, y)| 2.0 - 2.0 * dot(spins.get(x as usize), spins.get(y as usize)))
        .sum()
}

/// Total energy split into its three sums.
pub fn total_energy(
    spins: &SpinConfiguration,
    alpha: &DisorderField,
    params: &ModelParams,
    lattice: &Lattice,
) -> Result<EnergyBreakdown> {
    params.check_shapes(lattice, spins, alpha)?;
    Ok(Hamiltonian::new(lattice, alpha, params)?.breakdown(spins))
}

/// Energy change from replacing the spin at `site` by `proposed`.
pub fn local_energy_delta(
    spins: &SpinConfiguration,
    site: usize,
    proposed: &[f64],
    alpha: &DisorderField,
    params: &ModelParams,
    lattice: &Lattice,
) -> Result<f64> {
    params.check_shapes(lattice, spins, alpha)?;
    Ok(Hamiltonian::new(lattice, alpha, params)?.delta(spins, site, proposed))
}

/// Per-site tangent gradient, flattened `n` values per site.
pub fn energy_gradient(
    spins: &SpinConfiguration,
    alpha: &DisorderField,
    params: &ModelParams,
    lattice: &Lattice,
) -> Result<Vec<f64>> {
    params.check_shapes(lattice, spins, alpha)?;
    Ok(Hamiltonian::new(lattice, alpha, params)?.gradient(spins))
}

/// `𝓔_R(σ)`: one `|σ_x − σ_y|²` per unordered edge inside the region.
pub fn dirichlet_energy(spins: &SpinConfiguration, region: &Region) -> f64 {
    let sites = region.sites();
    region
        .internal_edges()
        .iter()
        .map(|&(i, j)| {
            let a = spins.get(sites[i as usize]);
            let b = spins.get(sites[j as usize]);
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
        })
        .sum()
}

/// Sites of the Euclidean ball `|y − z| ≤ (2ε)⁻¹` (clipped to `Λ_N`) and the
/// prefactor `ε^d` of the block observable `M_z`.
///
/// At `ε = 0` the prefactor vanishes and `M_z ≡ 0`.
#[derive(Debug, Clone)]
pub struct BlockWindow {
    sites: Vec<usize>,
    scale: f64,
}

impl BlockWindow {
    pub fn new(lattice: &Lattice, z: usize, eps: f64) -> Self {
        if eps <= 0.0 {
            return Self {
                sites: Vec::new(),
                scale: 0.0,
            };
        }
        let d = lattice.dim();
        let radius = 1.0 / (2.0 * eps);
        let r2 = radius * radius * (1.0 + 1e-12);
        let reach = radius.floor().min(lattice.side() as f64) as i64;
        let center = lattice.physical_coords(z);
        let mut sites = Vec::new();
        let mut offset = vec![-reach; d];
        'outer: loop {
            let norm2: i64 = offset.iter().map(|o| o * o).sum();
            if (norm2 as f64) <= r2 {
                let y: Vec<i64> = center.iter().zip(&offset).map(|(c, o)| c + o).collect();
                if let Some(s) = lattice.site_at_physical(&y) {
                    sites.push(s);
                }
            }
            for a in (0..d).rev() {
                offset[a] += 1;
                if offset[a] <= reach {
                    continue 'outer;
                }
                offset[a] = -reach;
            }
            break;
        }
        sites.sort_unstable();
        Self {
            sites,
            scale: eps.powi(d as i32),
        }
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn magnetization(&self, spins: &SpinConfiguration) -> Vec<f64> {
        let mut m = vec![0.0; spins.n()];
        for &s in &self.sites {
            for (mc, v) in m.iter_mut().zip(spins.get(s)) {
                *mc += v;
            }
        }
        m.iter_mut().for_each(|v| *v *= self.scale);
        m
    }

    /// `|P M_z|²`, the squared norm of the last `k` components.
    pub fn projected_norm_sq(&self, spins: &SpinConfiguration, k: usize) -> f64 {
        let m = self.magnetization(spins);
        m[m.len() - k..].iter().map(|v| v * v).sum()
    }
}

/// `M_z = ε^d Σ_{|y−z| ≤ (2ε)⁻¹} σ_y`.
pub fn block_magnetization(
    lattice: &Lattice,
    spins: &SpinConfiguration,
    z: usize,
    eps: f64,
) -> Vec<f64> {
    BlockWindow::new(lattice, z, eps).magnetization(spins)
}

/// `|P·M_z|²` with `P` the projection on the field subspace (last `k` coordinates).
pub fn projected_block_norm_sq(
    lattice: &Lattice,
    spins: &SpinConfiguration,
    z: usize,
    eps: f64,
    k: usize,
) -> f64 {
    BlockWindow::new(lattice, z, eps).projected_norm_sq(spins, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{sample_disorder, Distribution, DisorderSeed};
    use crate::rng::{stream, Purpose};

    fn xy_free(eps: f64) -> ModelParams {
        ModelParams::xy(eps, 1.0).with_boundary(Boundary::Free)
    }

    #[test]
    fn aligned_spins_have_zero_energy() {
        let l = Lattice::new(2, 4).unwrap();
        let s = SpinConfiguration::uniform(16, &[1.0, 0.0]).unwrap();
        let a = DisorderField::zeros(16, 1);
        let e = total_energy(&s, &a, &xy_free(0.0), &l).unwrap();
        assert_eq!(e.total, 0.0);
    }

    #[test]
    fn checkerboard_exchange() {
        let l = Lattice::new(2, 2).unwrap();
        let data: Vec<f64> = (0..4)
            .flat_map(|s| {
                let c = l.coords(s);
                let sign = if (c[0] + c[1]) % 2 == 0 { 1.0 } else { -1.0 };
                [sign, 0.0]
            })
            .collect();
        let s = SpinConfiguration::from_components(2, data).unwrap();
        let a = DisorderField::zeros(4, 1);
        let e = total_energy(&s, &a, &xy_free(0.0), &l).unwrap();
        assert_eq!(e.exchange, 16.0);
        assert_eq!(dirichlet_energy(&s, &Region::whole(&l)), 16.0);
    }

    #[test]
    fn flip_against_aligned_neighbors() {
        let l = Lattice::new(2, 6).unwrap();
        let s = SpinConfiguration::uniform(36, &[1.0, 0.0]).unwrap();
        let a = DisorderField::zeros(36, 1);
        let x = l.origin();
        let d = local_energy_delta(&s, x, &[-1.0, 0.0], &a, &xy_free(0.0), &l).unwrap();
        assert_eq!(d, 16.0);
        let d = local_energy_delta(&s, x, &[1.0, 0.0], &a, &xy_free(0.0), &l).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn shape_mismatch_is_error() {
        let l = Lattice::new(2, 4).unwrap();
        let s = SpinConfiguration::uniform(16, &[1.0, 0.0, 0.0]).unwrap();
        let a = DisorderField::zeros(16, 1);
        assert!(total_energy(&s, &a, &xy_free(0.1), &l).is_err());
        let s = SpinConfiguration::uniform(9, &[1.0, 0.0]).unwrap();
        assert!(total_energy(&s, &a, &xy_free(0.1), &l).is_err());
    }

    #[test]
    fn fixed_boundary_counts_missing_bonds() {
        let l = Lattice::new(2, 4).unwrap();
        let s = SpinConfiguration::uniform(16, &[-1.0, 0.0]).unwrap();
        let a = DisorderField::zeros(16, 1);
        let p = xy_free(0.0).with_boundary(Boundary::Fixed { spin: vec![1.0, 0.0] });
        // 16 bonds leave the 4x4 box, each costs |2e_1|² = 4.
        assert_eq!(total_energy(&s, &a, &p, &l).unwrap().boundary, 64.0);
        let s = SpinConfiguration::uniform(16, &[1.0, 0.0]).unwrap();
        assert_eq!(total_energy(&s, &a, &p, &l).unwrap().boundary, 0.0);
    }

    #[test]
    fn block_window_examples() {
        let l = Lattice::new(2, 8).unwrap();
        let s = SpinConfiguration::uniform(64, &[1.0, 0.0]).unwrap();
        let z = l.origin();
        let m = block_magnetization(&l, &s, z, 0.5);
        assert_eq!(m, vec![1.25, 0.0]);
        let m = block_magnetization(&l, &s, z, 0.9);
        assert!((m[0] - 0.81).abs() < 1e-15);
        let s2 = SpinConfiguration::uniform(64, &[0.0, 1.0]).unwrap();
        assert_eq!(projected_block_norm_sq(&l, &s2, z, 0.5, 1), 1.5625);
        assert_eq!(projected_block_norm_sq(&l, &s, z, 0.5, 1), 0.0);
        assert_eq!(block_magnetization(&l, &s, z, 0.0), vec![0.0, 0.0]);
        // Radius 2 ball has 13 sites.
        assert_eq!(BlockWindow::new(&l, z, 0.25).sites().len(), 13);
    }

    #[test]
    fn gradient_vanishes_at_aligned_minimum() {
        let l = Lattice::new(2, 4).unwrap();
        let s = SpinConfiguration::uniform(16, &[0.6, 0.8]).unwrap();
        let a = DisorderField::zeros(16, 1);
        let g = energy_gradient(&s, &a, &xy_free(0.0), &l).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn gradient_is_tangent() {
        let l = Lattice::new(2, 6).unwrap();
        let a = sample_disorder(&l, 1, DisorderSeed { master: 1, realization: 0 }, Distribution::StandardGaussian)
            .unwrap();
        let s = SpinConfiguration::random(36, 2, &mut stream(1, Purpose::Init, 0));
        let g = energy_gradient(&s, &a, &ModelParams::xy(0.3, 1.0), &l).unwrap();
        for x in 0..36 {
            let d: f64 = g[2 * x..2 * x + 2].iter().zip(s.get(x)).map(|(a, b)| a * b).sum();
            assert!(d.abs() < 1e-12);
        }
    }
}
