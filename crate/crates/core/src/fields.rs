//! Quenched disorder, spin configurations and model parameters.
//!
//! Orientation convention used throughout the crate: the random field lives
//! in the LAST `k` coordinates of `R^n`, and the ordering subspace is spanned
//! by the first `n - k` coordinates. For the XY case (`n = 2, k = 1`) the field
//! is vertical (`e_2`) and the two ordered phases sit near `θ = 0` and `θ = π`,
//! i.e. along `±e_1`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{Lattice, LatticeBox};
use crate::rng::{self, Purpose};

/// Truncation bound of the sub-gaussian option.
pub const DEFAULT_SUBGAUSSIAN_BOUND: f64 = 6.0;

/// Words of the disorder stream reserved for one `(site, component)` draw.
const WORDS_PER_DRAW: u128 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Distribution {
    StandardGaussian,
    /// Symmetric gaussian truncated to `[-bound, bound]`.
    SubGaussianBounded { bound: f64 },
}

impl Default for Distribution {
    fn default() -> Self {
        Distribution::StandardGaussian
    }
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard-gaussian" => Ok(Distribution::StandardGaussian),
            "sub-gaussian-bounded" => Ok(Distribution::SubGaussianBounded {
                bound: DEFAULT_SUBGAUSSIAN_BOUND,
            }),
            other => Err(Error::UnknownDistribution(other.to_string())),
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::StandardGaussian => f.write_str("standard-gaussian"),
            Distribution::SubGaussianBounded { .. } => f.write_str("sub-gaussian-bounded"),
        }
    }
}

/// Seed provenance of a disorder realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisorderSeed {
    pub master: u64,
    pub realization: u64,
}

/// Per-site random field vectors `α_x ∈ R^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderField {
    k: usize,
    values: Vec<f64>,
    seed: Option<DisorderSeed>,
    distribution: Distribution,
}

impl DisorderField {
    /// Field with explicit values, `k` components per site.
    pub fn from_values(k: usize, values: Vec<f64>) -> Result<Self> {
        if k == 0 || values.len() % k != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not split into k = {k} components",
                values.len()
            )));
        }
        Ok(Self {
            k,
            values,
            seed: None,
            distribution: Distribution::StandardGaussian,
        })
    }

    pub fn zeros(num_sites: usize, k: usize) -> Self {
        Self::from_values(k.max(1), vec![0.0; num_sites * k.max(1)]).expect("consistent shape")
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_sites(&self) -> usize {
        self.values.len() / self.k
    }

    pub fn at(&self, site: usize) -> &[f64] {
        &self.values[site * self.k..(site + 1) * self.k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Component `c` at every site.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().skip(c).step_by(self.k).copied().collect()
    }

    pub fn seed(&self) -> Option<DisorderSeed> {
        self.seed
    }

    pub fn distribution(&self) -> Distribution {
        self.distribution
    }

    pub(crate) fn with_provenance(mut self, seed: Option<DisorderSeed>, distribution: Distribution) -> Self {
        self.seed = seed;
        self.distribution = distribution;
        self
    }

    /// `α_x` embedded into the last `k` coordinates of `R^n`, written into `out`.
    pub fn embed_into(&self, site: usize, out: &mut [f64]) {
        let n = out.len();
        out.iter_mut().for_each(|v| *v = 0.0);
        out[n - self.k..].copy_from_slice(self.at(site));
    }
}

/// Draws i.i.d. field vectors for realization `seed.realization` of `seed.master`.
///
/// Each `(site, component)` pair owns a fixed block of the realization's
/// ChaCha stream, so the field does not depend on generation order.
pub fn sample_disorder(
    lattice: &Lattice,
    k: usize,
    seed: DisorderSeed,
    distribution: Distribution,
) -> Result<DisorderField> {
    if k == 0 {
        return Err(invalid("k", "need k >= 1"));
    }
    if let Distribution::SubGaussianBounded { bound } = distribution {
        if !(bound > 0.0) {
            return Err(invalid("bound", format!("must be positive, got {bound}")));
        }
    }
    let mut rng = rng::stream(seed.master, Purpose::Disorder, seed.realization);
    let total = lattice.num_sites() * k;
    let mut values = Vec::with_capacity(total);
    for j in 0..total {
        rng.set_word_pos(j as u128 * WORDS_PER_DRAW);
        let (z0, z1) = rng::box_muller(rng.next_u64(), rng.next_u64());
        let v = match distribution {
            Distribution::StandardGaussian => z0,
            Distribution::SubGaussianBounded { bound } => {
                let (z2, z3) = rng::box_muller(rng.next_u64(), rng.next_u64());
                // All four candidates outside the bound has probability ~1e-35.
                [z0, z1, z2, z3]
                    .into_iter()
                    .find(|z| z.abs() <= bound)
                    .unwrap_or_else(|| z0.clamp(-bound, bound))
            }
        };
        values.push(v);
    }
    Ok(DisorderField {
        k,
        values,
        seed: Some(seed),
        distribution,
    })
}

/// `α̂_x = α_x − box mean`, for the sites of `sites` in order.
pub fn center_disorder(alpha: &DisorderField, sites: &[usize]) -> Vec<Vec<f64>> {
    let k = alpha.k();
    let mut mean = vec![0.0; k];
    for &s in sites {
        for (m, a) in mean.iter_mut().zip(alpha.at(s)) {
            *m += a;
        }
    }
    let count = sites.len().max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= count);
    sites
        .iter()
        .map(|&s| alpha.at(s).iter().zip(&mean).map(|(a, m)| a - m).collect())
        .collect()
}

/// Centering over the sites of a box.
pub fn center_disorder_in_box(
    alpha: &DisorderField,
    lattice: &Lattice,
    b: &LatticeBox,
) -> Vec<Vec<f64>> {
    center_disorder(alpha, &b.sites(lattice))
}

/// One unit vector of `R^n` per site.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinConfiguration {
    n: usize,
    data: Vec<f64>,
}

impl SpinConfiguration {
    pub fn uniform(num_sites: usize, direction: &[f64]) -> Result<Self> {
        let unit = normalized(direction)
            .ok_or_else(|| invalid("direction", "zero vector cannot be normalized"))?;
        let n = unit.len();
        if n < 2 {
            return Err(invalid("n", "spins need n >= 2"));
        }
        let mut data = Vec::with_capacity(num_sites * n);
        for _ in 0..num_sites {
            data.extend_from_slice(&unit);
        }
        Ok(Self { n, data })
    }

    /// Each component-block is normalized on entry.
    pub fn from_components(n: usize, mut data: Vec<f64>) -> Result<Self> {
        if n < 2 || data.len() % n != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not split into n = {n} components",
                data.len()
            )));
        }
        for chunk in data.chunks_exact_mut(n) {
            let norm = chunk.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(invalid("spin", "zero vector cannot be normalized"));
            }
            chunk.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(Self { n, data })
    }

    /// Independent uniform points on `S^{n-1}`.
    pub fn random<R: Rng + ?Sized>(num_sites: usize, n: usize, rng: &mut R) -> Self {
        let mut data = Vec::with_capacity(num_sites * n);
        let mut v = vec![0.0; n];
        for _ in 0..num_sites {
            loop {
                for c in v.chunks_mut(2) {
                    let (a, b) = rng::box_muller(rng.next_u64(), rng.next_u64());
                    c[0] = a;
                    if c.len() > 1 {
                        c[1] = b;
                    }
                }
                if let Some(u) = normalized(&v) {
                    data.extend_from_slice(&u);
                    break;
                }
            }
        }
        Self { n, data }
    }

    /// `σ_x = (cos θ_x, sin θ_x)`.
    pub fn from_angles(angles: &[f64]) -> Self {
        let mut data = Vec::with_capacity(2 * angles.len());
        for &t in angles {
            data.push(t.cos());
            data.push(t.sin());
        }
        Self { n: 2, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_sites(&self) -> usize {
        self.data.len() / self.n
    }

    #[inline]
    pub fn get(&self, site: usize) -> &[f64] {
        &self.data[site * self.n..(site + 1) * self.n]
    }

    /// Stores `v / |v|` at `site`.
    pub fn set(&mut self, site: usize, v: &[f64]) {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let n = self.n;
        for (dst, src) in self.data[site * n..(site + 1) * n].iter_mut().zip(v) {
            *dst = src / norm;
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Takes the values verbatim; callers check the sphere constraint.
    pub(crate) fn from_raw(n: usize, data: Vec<f64>) -> Self {
        Self { n, data }
    }

    /// `max_x | |σ_x| − 1 |`.
    pub fn max_norm_error(&self) -> f64 {
        self.data
            .chunks_exact(self.n)
            .map(|c| (c.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Negates the ordering-subspace components (the first `n − k`) on `sites`.
    pub fn reflect_in_place(&mut self, sites: &[usize], k: usize) {
        let n = self.n;
        for &s in sites {
            for v in &mut self.data[s * n..s * n + (n - k)] {
                *v = -*v;
            }
        }
    }
}

/// Copy of `config` with the ordering components negated on `sites`.
pub fn reflect_spins(config: &SpinConfiguration, sites: &[usize], k: usize) -> SpinConfiguration {
    let mut out = config.clone();
    out.reflect_in_place(sites, k);
    out
}

pub(crate) fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (norm > 0.0 && norm.is_finite()).then(|| v.iter().map(|x| x / norm).collect())
}

/// Boundary condition of the finite-volume Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Boundary {
    /// `−strength · Σ_{x∈∂Λ} u·σ_x` (unit strength by default).
    Field {
        u: Vec<f64>,
        #[serde(default = "unit_strength")]
        strength: f64,
    },
    /// Every missing neighbor of a boundary site is a spin frozen at `spin`,
    /// coupled through the same `|σ_x − σ_y|²` exchange.
    Fixed { spin: Vec<f64> },
    Free,
}

fn unit_strength() -> f64 {
    1.0
}

impl Boundary {
    /// Unit boundary field along `e_1` in `R^n`.
    pub fn field_e1(n: usize) -> Self {
        let mut u = vec![0.0; n];
        u[0] = 1.0;
        Boundary::Field { u, strength: 1.0 }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let v = match self {
            Boundary::Field { u, .. } => u,
            Boundary::Fixed { spin } => spin,
            Boundary::Free => return Ok(()),
        };
        if v.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "boundary vector has {} components, spins have {n}",
                v.len()
            )));
        }
        if normalized(v).is_none() {
            return Err(invalid("boundary", "boundary vector must be nonzero"));
        }
        Ok(())
    }
}

/// Length scales of the multiscale analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scales {
    pub eps_d: f64,
    /// Small box side `ℓ`.
    pub ell: usize,
    /// Contour box side `L`, a multiple of `ℓ`.
    pub big_l: usize,
    pub gamma: f64,
    /// Angular cutoff for bad boxes (radians).
    pub xi: f64,
    /// Angular tolerance of the surgery output (radians).
    pub delta: f64,
    /// Multiplier on the Dirichlet threshold `4 ε_d² |Q_ℓ|`.
    pub dirichlet_factor: f64,
}

/// User-facing scale settings; unset fields take their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScaleConfig {
    pub gamma: f64,
    pub ell: Option<usize>,
    pub big_l: Option<usize>,
    pub xi: f64,
    pub delta: Option<f64>,
    pub dirichlet_factor: f64,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        Self {
            gamma: 0.25,
            ell: None,
            big_l: None,
            xi: 0.3,
            delta: None,
            dirichlet_factor: 1.0,
        }
    }
}

/// `ε√|log ε|` in two dimensions, `ε` otherwise.
pub fn eps_d(dim: usize, eps: f64) -> f64 {
    if dim == 2 {
        eps * eps.ln().abs().sqrt()
    } else {
        eps
    }
}

impl ScaleConfig {
    /// Resolves defaults for dimension `dim` and field strength `eps ∈ (0, 1)`.
    ///
    /// Default `ℓ` is `⌊ε⁻¹|log ε|^(−1/2−γ)⌋`, lowered if needed so that
    /// `ℓ < ε_d⁻¹`; default `L` is the smallest multiple of `ℓ` that is at least
    /// the second scale (`ε⁻¹|log ε|^(−1/2+γ)` for d = 2, `ε⁻¹ log⁴ ε` for
    /// d ≥ 3), at least `2ℓ`, and strictly above `ε_d⁻¹`.
    pub fn resolve(&self, dim: usize, eps: f64) -> Result<Scales> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(invalid("eps", format!("length scales need 0 < eps < 1, got {eps}")));
        }
        if !(self.gamma > 0.0 && self.gamma < 0.5) {
            return Err(invalid("gamma", format!("need 0 < gamma < 1/2, got {}", self.gamma)));
        }
        if !(self.xi > 0.0 && self.xi < std::f64::consts::FRAC_PI_2) {
            return Err(invalid("xi", format!("need 0 < xi < pi/2, got {}", self.xi)));
        }
        if !(self.dirichlet_factor > 0.0) {
            return Err(invalid("dirichlet_factor", "must be positive"));
        }
        let ed = eps_d(dim, eps);
        let inv = 1.0 / ed;
        let log = eps.ln().abs();
        let ell = match self.ell {
            Some(ell) => {
                if ell == 0 || ell as f64 >= inv {
                    return Err(invalid(
                        "ell",
                        format!("need 1 <= ell < 1/eps_d = {inv:.4}, got {ell}"),
                    ));
                }
                ell
            }
            None => {
                let raw = log.powf(-0.5 - self.gamma) / eps;
                let mut ell = (raw.floor() as usize).max(1);
                while ell > 1 && ell as f64 >= inv {
                    ell -= 1;
                }
                ell
            }
        };
        let big_l = match self.big_l {
            Some(l) => {
                if l % ell != 0 || (l as f64) <= inv {
                    return Err(invalid(
                        "big_l",
                        format!("need a multiple of ell = {ell} above 1/eps_d = {inv:.4}, got {l}"),
                    ));
                }
                l
            }
            None => {
                let raw = if dim == 2 {
                    log.powf(-0.5 + self.gamma) / eps
                } else {
                    log.powi(4) / eps
                };
                let above = (inv / ell as f64).floor() as usize + 1;
                let covering = (raw / ell as f64).ceil() as usize;
                ell * above.max(covering).max(2)
            }
        };
        Ok(Scales {
            eps_d: ed,
            ell,
            big_l,
            gamma: self.gamma,
            xi: self.xi,
            delta: self.delta.unwrap_or(self.xi / 10.0),
            dirichlet_factor: self.dirichlet_factor,
        })
    }
}

/// Parameters of the RFO(n;k) Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub beta: f64,
    pub boundary: Boundary,
    #[serde(default)]
    pub scales: ScaleConfig,
}

impl ModelParams {
    /// XY model with a vertical random field and a unit `e_1` boundary field.
    pub fn xy(eps: f64, beta: f64) -> Self {
        Self {
            n: 2,
            k: 1,
            eps,
            beta,
            boundary: Boundary::field_e1(2),
            scales: ScaleConfig::default(),
        }
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n > 8 {
            return Err(invalid("n", format!("need 2 <= n <= 8, got {}", self.n)));
        }
        if self.k == 0 || self.k >= self.n {
            return Err(invalid("k", format!("need 1 <= k < n = {}, got {}", self.n, self.k)));
        }
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(invalid("eps", format!("need eps >= 0, got {}", self.eps)));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(invalid("beta", format!("need beta >= 0, got {}", self.beta)));
        }
        self.boundary.validate(self.n)
    }

    pub fn scales(&self, dim: usize) -> Result<Scales> {
        self.scales.resolve(dim, self.eps)
    }

    /// Checks spin and field shapes against these parameters and the lattice.
    pub fn check_shapes(
        &self,
        lattice: &Lattice,
        spins: &SpinConfiguration,
        alpha: &DisorderField,
    ) -> Result<()> {
        if spins.n() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "spins have {} components, model has n = {}",
                spins.n(),
                self.n
            )));
        }
        if alpha.k() != self.k {
            return Err(Error::DimensionMismatch(format!(
                "field has {} components, model has k = {}",
                alpha.k(),
                self.k
            )));
        }
        if spins.num_sites() != lattice.num_sites() || alpha.num_sites() != lattice.num_sites() {
            return Err(Error::DimensionMismatch(format!(
                "lattice has {} sites, spins {}, field {}",
                lattice.num_sites(),
                spins.num_sites(),
                alpha.num_sites()
            )));
        }
        Ok(())
    }
}
