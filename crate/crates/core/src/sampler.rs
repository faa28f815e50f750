//! Gibbs sampling of `exp(−βH)` and exact quadrature for tiny XY systems.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{field_buffer, BlockWindow, Hamiltonian};
use crate::error::{invalid, Error, Result};
use crate::fields::{DisorderField, ModelParams, SpinConfiguration};
use crate::lattice::Lattice;
use crate::rng::{self, stream, Purpose, StreamRng};
use crate::stats::{blocking_estimate, Estimate};

/// Observables recorded by a chain; `M_0` is the block magnetization at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    /// `σ_0 · e₁`.
    Sigma0E1,
    /// `M_0 · e₁`.
    M0E1,
    /// `|P M_0|²`.
    Pm0Sq,
    /// `H / |Λ|`.
    EnergyDensity,
}

impl Observable {
    pub const ALL: [Observable; 4] = [
        Observable::Sigma0E1,
        Observable::M0E1,
        Observable::Pm0Sq,
        Observable::EnergyDensity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Observable::Sigma0E1 => "sigma0-e1",
            Observable::M0E1 => "m0-e1",
            Observable::Pm0Sq => "pm0-sq",
            Observable::EnergyDensity => "energy-density",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    /// Every spin along `e₁`.
    Aligned,
    /// Independent uniform spins from the chain's init stream.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub thermalization: usize,
    pub measurements: usize,
    /// Sweeps between measurements.
    pub stride: usize,
    /// Fixed proposal half-width in `(0, π]`; tuned during thermalization when absent.
    pub width: Option<f64>,
    /// Overrelaxation sweeps after each Metropolis sweep.
    pub overrelaxation: usize,
    pub init: InitKind,
    /// Two-colour parallel sweeps with per-site random streams.
    pub checkerboard: bool,
    pub observables: Vec<Observable>,
    /// Scale of the block observable; defaults to the model's `ε`.
    pub block_eps: Option<f64>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            thermalization: 1000,
            measurements: 4000,
            stride: 1,
            width: None,
            overrelaxation: 1,
            init: InitKind::Aligned,
            checkerboard: false,
            observables: Observable::ALL.to_vec(),
            block_eps: None,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(invalid("stride", "must be at least 1"));
        }
        if self.measurements == 0 {
            return Err(invalid("measurements", "must be at least 1"));
        }
        if let Some(w) = self.width {
            if !(w > 0.0 && w <= std::f64::consts::PI) {
                return Err(invalid("width", format!("must lie in (0, pi], got {w}")));
            }
        }
        if self.observables.is_empty() {
            return Err(invalid("observables", "must not be empty"));
        }
        if let Some(b) = self.block_eps {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(invalid("block_eps", "must be a finite non-negative number"));
            }
        }
        Ok(())
    }
}

const MIN_WIDTH: f64 = 1e-3;
const TARGET_ACCEPTANCE: f64 = 0.5;
const TUNE_EVERY: usize = 10;
/// Words of the per-site stream consumed by one checkerboard update.
const SITE_WORDS: u128 = 16;

/// Rotation of `σ` by angle `phi` toward a uniformly random tangent direction.
fn propose<R: RngCore + ?Sized>(sigma: &[f64], width: f64, rng: &mut R, out: &mut [f64]) {
    let n = sigma.len();
    let phi = width * (2.0 * rng::half_open_unit(rng.next_u64()) - 1.0);
    let (s, c) = phi.sin_cos();
    if n == 2 {
        out[0] = c * sigma[0] - s * sigma[1];
        out[1] = s * sigma[0] + c * sigma[1];
        return;
    }
    let mut t = [0.0; 8];
    let t = &mut t[..n];
    loop {
        for pair in t.chunks_mut(2) {
            let (a, b) = rng::box_muller(rng.next_u64(), rng.next_u64());
            pair[0] = a;
            if pair.len() > 1 {
                pair[1] = b;
            }
        }
        let radial: f64 = t.iter().zip(sigma).map(|(a, b)| a * b).sum();
        t.iter_mut().zip(sigma).for_each(|(a, b)| *a -= radial * b);
        let norm = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            t.iter_mut().for_each(|v| *v /= norm);
            break;
        }
    }
    for i in 0..n {
        out[i] = c * sigma[i] + s * t[i];
    }
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    out.iter_mut().for_each(|v| *v /= norm);
}

fn accept<R: RngCore + ?Sized>(beta: f64, delta: f64, rng: &mut R) -> bool {
    let u = rng::half_open_unit(rng.next_u64());
    delta <= 0.0 || u < (-beta * delta).exp()
}

/// One Metropolis update per free site in index order; returns the acceptance rate.
pub fn metropolis_sweep<R: RngCore + ?Sized>(
    ham: &Hamiltonian<'_>,
    spins: &mut SpinConfiguration,
    beta: f64,
    width: f64,
    free: &[usize],
    rng: &mut R,
) -> f64 {
    let n = ham.n();
    let mut buf = [0.0; 8];
    let prop = field_buffer(&mut buf, n);
    let mut accepted = 0usize;
    for &s in free {
        propose(spins.get(s), width, rng, prop);
        let delta = ham.delta(spins, s, prop);
        if accept(beta, delta, rng) {
            spins.set(s, prop);
            accepted += 1;
        }
    }
    if free.is_empty() {
        1.0
    } else {
        accepted as f64 / free.len() as f64
    }
}

/// Checkerboard Metropolis sweep: each colour class is updated in parallel,
/// site `x` in sweep `t` drawing from a fixed block of `rng_base`.
pub fn checkerboard_sweep(
    ham: &Hamiltonian<'_>,
    spins: &mut SpinConfiguration,
    beta: f64,
    width: f64,
    colours: &[Vec<usize>; 2],
    sweep: u64,
    rng_base: &StreamRng,
) -> f64 {
    let n = ham.n();
    let sites = spins.num_sites() as u128;
    let mut accepted = 0usize;
    let mut total = 0usize;
    for class in colours {
        let updates: Vec<Option<(usize, [f64; 8])>> = class
            .par_iter()
            .map(|&s| {
                let mut rng = rng_base.clone();
                rng.set_word_pos((sweep as u128 * sites + s as u128) * SITE_WORDS);
                let mut prop = [0.0; 8];
                propose(spins.get(s), width, &mut rng, &mut prop[..n]);
                let delta = ham.delta(spins, s, &prop[..n]);
                accept(beta, delta, &mut rng).then_some((s, prop))
            })
            .collect();
        total += class.len();
        for (s, prop) in updates.into_iter().flatten() {
            spins.set(s, &prop[..n]);
            accepted += 1;
        }
    }
    if total == 0 {
        1.0
    } else {
        accepted as f64 / total as f64
    }
}

/// Reflects each free spin about its local field, `σ ← 2(σ·ĥ)ĥ − σ`.
/// Sites with vanishing local field are skipped. Leaves `H` unchanged.
pub fn overrelaxation_sweep(ham: &Hamiltonian<'_>, spins: &mut SpinConfiguration, free: &[usize]) {
    let n = ham.n();
    let mut hb = [0.0; 8];
    let mut nb = [0.0; 8];
    for &s in free {
        let h = field_buffer(&mut hb, n);
        ham.local_field(spins, s, h);
        let norm2: f64 = h.iter().map(|v| v * v).sum();
        if norm2 < 1e-300 {
            continue;
        }
        let sigma = spins.get(s);
        let proj: f64 = h.iter().zip(sigma).map(|(a, b)| a * b).sum::<f64>() / norm2;
        let new = &mut nb[..n];
        for i in 0..n {
            new[i] = 2.0 * proj * h[i] - sigma[i];
        }
        spins.set(s, new);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ObservableSummary {
    pub observable: Observable,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainResult {
    pub observables: Vec<Observable>,
    /// One series per observable, one entry per measurement.
    pub series: Vec<Vec<f64>>,
    /// `H` at every measurement, always recorded.
    pub energy: Vec<f64>,
    pub summary: Vec<ObservableSummary>,
    pub acceptance: f64,
    pub width: f64,
    #[serde(skip)]
    pub final_spins: SpinConfiguration,
}

impl ChainResult {
    pub fn estimate(&self, obs: Observable) -> Option<Estimate> {
        self.summary.iter().find(|s| s.observable == obs).map(|s| s.estimate)
    }
}

/// Stream coordinates of one chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainSeed {
    pub master: u64,
    pub index: u64,
}

/// Runs one chain with every site free.
pub fn run_chain(
    lattice: &Lattice,
    alpha: &DisorderField,
    params: &ModelParams,
    chain: &ChainConfig,
    seed: ChainSeed,
) -> Result<ChainResult> {
    run_chain_with(lattice, alpha, params, chain, seed, None, None)
}

/// Runs one chain; sites with `fixed[x]` keep their initial spin.
pub fn run_chain_with(
    lattice: &Lattice,
    alpha: &DisorderField,
    params: &ModelParams,
    chain: &ChainConfig,
    seed: ChainSeed,
    init: Option<&SpinConfiguration>,
    fixed: Option<&[bool]>,
) -> Result<ChainResult> {
    chain.validate()?;
    let ham = Hamiltonian::new(lattice, alpha, params)?;
    let sites = lattice.num_sites();
    let n = params.n;
    let mut spins = match (init, chain.init) {
        (Some(s), _) => s.clone(),
        (None, InitKind::Aligned) => {
            let mut e1 = vec![0.0; n];
            e1[0] = 1.0;
            SpinConfiguration::uniform(sites, &e1)?
        }
        (None, InitKind::Random) => {
            SpinConfiguration::random(sites, n, &mut stream(seed.master, Purpose::Init, seed.index))
        }
    };
    params.check_shapes(lattice, &spins, alpha)?;
    if let Some(f) = fixed {
        if f.len() != sites {
            return Err(Error::DimensionMismatch("fixed mask length differs from lattice size".into()));
        }
    }
    let free: Vec<usize> = (0..sites).filter(|&s| fixed.is_none_or(|f| !f[s])).collect();
    let colours: [Vec<usize>; 2] = {
        let mut c = [Vec::new(), Vec::new()];
        for &s in &free {
            let parity: usize = lattice.coords(s).iter().sum::<usize>() % 2;
            c[parity].push(s);
        }
        c
    };
    if chain.checkerboard && lattice.is_periodic() && lattice.side() % 2 == 1 {
        return Err(invalid("checkerboard", "needs a bipartite lattice"));
    }
    let mut rng = stream(seed.master, Purpose::Chain, seed.index);
    let board = stream(seed.master, Purpose::Checkerboard, seed.index);
    let mut sweep_counter = 0u64;
    let mut sweep = |spins: &mut SpinConfiguration, width: f64, rng: &mut StreamRng| -> f64 {
        let acc = if chain.checkerboard {
            checkerboard_sweep(&ham, spins, params.beta, width, &colours, sweep_counter, &board)
        } else {
            metropolis_sweep(&ham, spins, params.beta, width, &free, rng)
        };
        sweep_counter += 1;
        for _ in 0..chain.overrelaxation {
            overrelaxation_sweep(&ham, spins, &free);
        }
        acc
    };

    let mut width = chain.width.unwrap_or(1.0);
    let mut window_acc = 0.0;
    for t in 0..chain.thermalization {
        window_acc += sweep(&mut spins, width, &mut rng);
        if chain.width.is_none() && t % TUNE_EVERY == TUNE_EVERY - 1 {
            let acc = window_acc / TUNE_EVERY as f64;
            width = (width * (2.0 * (acc - TARGET_ACCEPTANCE)).exp()).clamp(MIN_WIDTH, std::f64::consts::PI);
            window_acc = 0.0;
        }
    }

    let window = BlockWindow::new(lattice, lattice.origin(), chain.block_eps.unwrap_or(params.eps));
    let origin = lattice.origin();
    let volume = sites as f64;
    let mut series = vec![Vec::with_capacity(chain.measurements); chain.observables.len()];
    let mut energy = Vec::with_capacity(chain.measurements);
    let mut acc_sum = 0.0;
    let mut acc_count = 0usize;
    for _ in 0..chain.measurements {
        for _ in 0..chain.stride {
            acc_sum += sweep(&mut spins, width, &mut rng);
            acc_count += 1;
        }
        let h = ham.total(&spins);
        energy.push(h);
        let m = window.magnetization(&spins);
        for (obs, out) in chain.observables.iter().zip(series.iter_mut()) {
            out.push(match obs {
                Observable::Sigma0E1 => spins.get(origin)[0],
                Observable::M0E1 => m[0],
                Observable::Pm0Sq => m[n - params.k..].iter().map(|v| v * v).sum(),
                Observable::EnergyDensity => h / volume,
            });
        }
    }
    let summary = chain
        .observables
        .iter()
        .zip(&series)
        .map(|(&observable, xs)| ObservableSummary {
            observable,
            estimate: blocking_estimate(xs),
        })
        .collect();
    Ok(ChainResult {
        observables: chain.observables.clone(),
        series,
        energy,
        summary,
        acceptance: acc_sum / acc_count.max(1) as f64,
        width,
        final_spins: spins,
    })
}

/// Largest number of free sites the quadrature handles.
pub const MAX_QUADRATURE_SITES: usize = 4;

/// Exact expectations of an XY system with at most four free sites.
#[derive(Debug, Clone, Serialize)]
pub struct QuadratureResult {
    pub free: Vec<usize>,
    /// `ln ∫ exp(β Σ_f h_f·σ_f + 2β Σ_{⟨fg⟩} σ_f·σ_g) Π dθ_f / 2π`, where `h_f` includes
    /// the pull of clamped neighbors; constant terms of `H` are left out.
    pub log_z: f64,
    /// `⟨σ_f⟩` per free site.
    pub first: Vec<[f64; 2]>,
    /// `⟨σ_f^i σ_g^j⟩`, indexed `[f][g][i][j]` over free sites.
    pub second: Vec<Vec<[[f64; 2]; 2]>>,
    pub sigma0_e1: f64,
    pub m0_e1: f64,
    pub pm0_sq: f64,
}

/// Tensor-product trapezoidal integration of `exp(−βH)` over the angles of
/// the free sites. Sites outside `free` keep their values in `clamped`.
pub fn quadrature_oracle(
    lattice: &Lattice,
    alpha: &DisorderField,
    params: &ModelParams,
    clamped: &SpinConfiguration,
    free: &[usize],
    points: usize,
    block_eps: Option<f64>,
) -> Result<QuadratureResult> {
    if params.n != 2 || params.k != 1 {
        return Err(invalid("n", "quadrature is implemented for n = 2, k = 1"));
    }
    if free.len() > MAX_QUADRATURE_SITES {
        return Err(Error::TooLarge(format!(
            "{} free sites, at most {MAX_QUADRATURE_SITES} supported",
            free.len()
        )));
    }
    if points < 64 {
        return Err(invalid("points", "need at least 64 points per site"));
    }
    params.check_shapes(lattice, clamped, alpha)?;
    let ham = Hamiltonian::new(lattice, alpha, params)?;
    let f = free.len();
    let mut is_free = vec![usize::MAX; lattice.num_sites()];
    for (i, &s) in free.iter().enumerate() {
        if is_free[s] != usize::MAX {
            return Err(invalid("free", "sites must be distinct"));
        }
        is_free[s] = i;
    }
    let beta = params.beta;
    let angles: Vec<(f64, f64)> = (0..points)
        .map(|p| (std::f64::consts::TAU * p as f64 / points as f64).sin_cos())
        .map(|(s, c)| (c, s))
        .collect();

    // Effective field on each free site from the clamped spins.
    let mut site_log = Vec::with_capacity(f);
    let mut shift = 0.0;
    for &s in free {
        let mut h = [0.0; 2];
        ham.external_field(s, &mut h);
        for y in lattice.neighbors(s) {
            if is_free[y] == usize::MAX {
                let v = clamped.get(y);
                h[0] += 2.0 * v[0];
                h[1] += 2.0 * v[1];
            }
        }
        let norm = h[0].hypot(h[1]);
        shift += beta * norm;
        site_log.push(
            angles
                .iter()
                .map(|&(c, s)| (beta * (h[0] * c + h[1] * s - norm)).exp())
                .collect::<Vec<_>>(),
        );
    }
    let mut pair_edges = Vec::new();
    for &(x, y) in lattice.edges() {
        let (a, b) = (is_free[x as usize], is_free[y as usize]);
        if a != usize::MAX && b != usize::MAX {
            pair_edges.push((a, b));
        }
    }
    // exp(2β(cos(θ_a − θ_b) − 1)) as a circulant table.
    let edge: Vec<f64> = angles.iter().map(|&(c, _)| (2.0 * beta * (c - 1.0)).exp()).collect();
    shift += 2.0 * beta * pair_edges.len() as f64;

    let mut z = 0.0;
    let mut first = vec![[0.0; 2]; f];
    let mut second = vec![vec![[[0.0; 2]; 2]; f]; f];
    let mut idx = vec![0usize; f];
    let total = points.pow(f as u32);
    for _ in 0..total {
        let mut w = 1.0;
        for (i, &p) in idx.iter().enumerate() {
            w *= site_log[i][p];
        }
        for &(a, b) in &pair_edges {
            w *= edge[(idx[a] + points - idx[b]) % points];
        }
        z += w;
        for a in 0..f {
            let (ca, sa) = angles[idx[a]];
            first[a][0] += w * ca;
            first[a][1] += w * sa;
            for b in a..f {
                let (cb, sb) = angles[idx[b]];
                let m = &mut second[a][b];
                m[0][0] += w * ca * cb;
                m[0][1] += w * ca * sb;
                m[1][0] += w * sa * cb;
                m[1][1] += w * sa * sb;
            }
        }
        for i in (0..f).rev() {
            idx[i] += 1;
            if idx[i] < points {
                break;
            }
            idx[i] = 0;
        }
    }
    for a in 0..f {
        first[a][0] /= z;
        first[a][1] /= z;
        for b in a..f {
            for i in 0..2 {
                for j in 0..2 {
                    second[a][b][i][j] /= z;
                }
            }
            if b > a {
                let m = second[a][b];
                second[b][a] = [[m[0][0], m[1][0]], [m[0][1], m[1][1]]];
            }
        }
    }
    let log_z = (z / total as f64).ln() + shift;

    let mean = |s: usize| -> [f64; 2] {
        match is_free[s] {
            usize::MAX => [clamped.get(s)[0], clamped.get(s)[1]],
            i => first[i],
        }
    };
    let corr = |x: usize, y: usize, i: usize, j: usize| -> f64 {
        match (is_free[x], is_free[y]) {
            (usize::MAX, usize::MAX) => clamped.get(x)[i] * clamped.get(y)[j],
            (usize::MAX, b) => clamped.get(x)[i] * first[b][j],
            (a, usize::MAX) => first[a][i] * clamped.get(y)[j],
            (a, b) => second[a][b][i][j],
        }
    };
    let origin = lattice.origin();
    let window = BlockWindow::new(lattice, origin, block_eps.unwrap_or(params.eps));
    let m0_e1 = window.scale() * window.sites().iter().map(|&s| mean(s)[0]).sum::<f64>();
    let mut pm0_sq = 0.0;
    for &x in window.sites() {
        for &y in window.sites() {
            pm0_sq += corr(x, y, 1, 1);
        }
    }
    pm0_sq *= window.scale() * window.scale();
    Ok(QuadratureResult {
        free: free.to_vec(),
        log_z,
        sigma0_e1: mean(origin)[0],
        first,
        second,
        m0_e1,
        pm0_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{sample_disorder, DisorderSeed, Distribution};

    fn small(eps: f64, beta: f64) -> (Lattice, DisorderField, ModelParams) {
        let l = Lattice::new(2, 4).unwrap();
        let a = sample_disorder(&l, 1, DisorderSeed { master: 4, realization: 0 }, Distribution::StandardGaussian)
            .unwrap();
        (l, a, ModelParams::xy(eps, beta))
    }

    #[test]
    fn infinite_temperature_accepts_everything() {
        let (l, a, p) = small(0.5, 0.0);
        let ham = Hamiltonian::new(&l, &a, &p).unwrap();
        let mut spins = SpinConfiguration::uniform(16, &[1.0, 0.0]).unwrap();
        let free: Vec<usize> = (0..16).collect();
        let rate = metropolis_sweep(&ham, &mut spins, 0.0, 1.0, &free, &mut stream(1, Purpose::Chain, 0));
        assert_eq!(rate, 1.0);
        assert!(spins.max_norm_error() < 1e-14);
    }

    #[test]
    fn tiny_width_is_almost_always_accepted() {
        let (l, a, p) = small(0.5, 1.0);
        let ham = Hamiltonian::new(&l, &a, &p).unwrap();
        let mut spins = SpinConfiguration::random(16, 2, &mut stream(2, Purpose::Init, 0));
        let before = spins.clone();
        let free: Vec<usize> = (0..16).collect();
        let rate = metropolis_sweep(&ham, &mut spins, 1.0, 1e-9, &free, &mut stream(1, Purpose::Chain, 0));
        assert!(rate > 0.9);
        let moved = before.as_slice().iter().zip(spins.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(moved < 1e-8);
    }

    #[test]
    fn overrelaxation_preserves_energy_and_is_an_involution() {
        let l = Lattice::new(2, 16).unwrap();
        let a = sample_disorder(&l, 1, DisorderSeed { master: 1, realization: 0 }, Distribution::StandardGaussian)
            .unwrap();
        let p = ModelParams::xy(0.5, 2.0);
        let ham = Hamiltonian::new(&l, &a, &p).unwrap();
        let mut spins = SpinConfiguration::random(256, 2, &mut stream(3, Purpose::Init, 0));
        let e0 = ham.total(&spins);
        let free: Vec<usize> = (0..256).collect();
        overrelaxation_sweep(&ham, &mut spins, &free);
        assert!((ham.total(&spins) - e0).abs() < 1e-8);
        let single = [37usize];
        let before = spins.clone();
        overrelaxation_sweep(&ham, &mut spins, &single);
        overrelaxation_sweep(&ham, &mut spins, &single);
        assert!((spins.get(37)[0] - before.get(37)[0]).abs() < 1e-14);
    }

    #[test]
    fn overrelaxation_keeps_aligned_spin() {
        let (l, _, _) = small(0.0, 1.0);
        let p = ModelParams::xy(0.0, 1.0);
        let zero = DisorderField::zeros(16, 1);
        let ham = Hamiltonian::new(&l, &zero, &p).unwrap();
        let mut spins = SpinConfiguration::uniform(16, &[1.0, 0.0]).unwrap();
        overrelaxation_sweep(&ham, &mut spins, &[5]);
        assert_eq!(spins.get(5), &[1.0, 0.0]);
    }

    #[test]
    fn chain_is_reproducible() {
        let (l, a, p) = small(0.5, 1.0);
        let cfg = ChainConfig {
            thermalization: 50,
            measurements: 100,
            ..ChainConfig::default()
        };
        let seed = ChainSeed { master: 5, index: 2 };
        let r1 = run_chain(&l, &a, &p, &cfg, seed).unwrap();
        let r2 = run_chain(&l, &a, &p, &cfg, seed).unwrap();
        assert_eq!(r1.series, r2.series);
        let cb = ChainConfig { checkerboard: true, ..cfg };
        let c1 = run_chain(&l, &a, &p, &cb, seed).unwrap();
        let c2 = run_chain(&l, &a, &p, &cb, seed).unwrap();
        assert_eq!(c1.series, c2.series);
    }

    #[test]
    fn infinite_temperature_chain_is_unbiased() {
        let (l, a, p) = small(0.5, 0.0);
        let cfg = ChainConfig {
            thermalization: 100,
            measurements: 4000,
            init: InitKind::Random,
            ..ChainConfig::default()
        };
        let r = run_chain(&l, &a, &p, &cfg, ChainSeed { master: 8, index: 0 }).unwrap();
        let e = r.estimate(Observable::Sigma0E1).unwrap();
        assert!(e.z_score(0.0) < 4.0, "{e:?}");
    }

    #[test]
    fn quadrature_at_infinite_temperature() {
        let (l, a, p) = small(0.5, 0.0);
        let clamped = SpinConfiguration::uniform(16, &[1.0, 0.0]).unwrap();
        let q = quadrature_oracle(&l, &a, &p, &clamped, &[5, 6, 9], 64, None).unwrap();
        for m in &q.first {
            assert!(m[0].abs() < 1e-12 && m[1].abs() < 1e-12);
        }
        assert!(q.log_z.abs() < 1e-12);
    }

    #[test]
    fn quadrature_guards() {
        let (l, a, p) = small(0.5, 1.0);
        let clamped = SpinConfiguration::uniform(16, &[1.0, 0.0]).unwrap();
        assert!(quadrature_oracle(&l, &a, &p, &clamped, &[0, 1, 2, 3, 4], 64, None).is_err());
        assert!(quadrature_oracle(&l, &a, &p, &clamped, &[0], 32, None).is_err());
    }

    #[test]
    fn quadrature_converges_spectrally() {
        let (l, a, p) = small(0.5, 2.0);
        let clamped = SpinConfiguration::uniform(16, &[1.0, 0.0]).unwrap();
        let q1 = quadrature_oracle(&l, &a, &p, &clamped, &[5, 6], 64, Some(0.5)).unwrap();
        let q2 = quadrature_oracle(&l, &a, &p, &clamped, &[5, 6], 128, Some(0.5)).unwrap();
        assert!((q1.first[0][0] - q2.first[0][0]).abs() < 1e-8);
        assert!((q1.pm0_sq - q2.pm0_sq).abs() < 1e-8);
    }
}
