//! `rfo oracle-check` and `rfo gaussian-check`: executable acceptance checks.

use serde::{Deserialize, Serialize};
use serde_json::json;

use rfo_core::elliptic::{gaussian_model_covariance, increment_variance, solve_green, LaplacianSpec, SolverOptions};
use rfo_core::fields::{sample_disorder, DisorderSeed, Distribution, ModelParams, SpinConfiguration};
use rfo_core::lattice::{Lattice, Region};
use rfo_core::sampler::{quadrature_oracle, run_chain_with, ChainSeed, Observable, MAX_QUADRATURE_SITES};

use crate::config;
use crate::output::{coords, Csv, OutputDir};
use crate::{CliError, CliResult, Common};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Open lattices by extents; the free sites are the `2×2` corner block.
    pub lattices: Vec<Vec<usize>>,
    pub betas: Vec<f64>,
    pub eps: Vec<f64>,
    /// Disorder realizations, one field per entry.
    pub realizations: Vec<u64>,
    pub points: usize,
    pub thermalization: usize,
    pub measurements: usize,
    /// Block radius scale used when `ε = 0`.
    pub block_eps: f64,
    pub z_max: f64,
    pub min_pass: f64,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            lattices: vec![vec![2, 2], vec![2, 3]],
            betas: vec![0.5, 2.0],
            eps: vec![0.0, 0.5],
            realizations: vec![1, 2],
            points: 64,
            thermalization: 2000,
            measurements: 40_000,
            block_eps: 0.5,
            z_max: 3.0,
            min_pass: 0.95,
            seed: None,
            workers: None,
        }
    }
}

pub fn oracle(common: &Common) -> CliResult<String> {
    let mut cfg: OracleConfig = config::load_or_default(common)?;
    let (seed, workers) = config::resolve_run(common, cfg.seed, cfg.workers)?;
    cfg.seed = Some(seed);
    cfg.workers = Some(workers);
    let mut lattices = Vec::new();
    for ext in &cfg.lattices {
        let l = Lattice::rectangle(ext).map_err(|e| CliError::Config(format!("lattices: {e}")))?;
        let free: Vec<usize> = (0..l.num_sites()).filter(|&s| l.coords(s).iter().all(|&c| c < 2)).collect();
        if free.len() > MAX_QUADRATURE_SITES {
            return Err(CliError::Config(format!(
                "lattices: {ext:?} has {} corner sites, at most {MAX_QUADRATURE_SITES} supported",
                free.len()
            )));
        }
        lattices.push((ext.clone(), l, free));
    }

    let observables = [Observable::Sigma0E1, Observable::M0E1, Observable::Pm0Sq];
    let mut csv = Csv::new(
        seed,
        &["lattice", "beta", "eps", "realization", "observable", "exact", "mean", "stderr", "z", "pass"],
    );
    let (mut cells, mut passed, mut index) = (0usize, 0usize, 0u64);
    for (ext, lattice, free) in &lattices {
        let sites = lattice.num_sites();
        let init = SpinConfiguration::uniform(sites, &[1.0, 0.0])?;
        let fixed: Vec<bool> = (0..sites).map(|s| !free.contains(&s)).collect();
        for &beta in &cfg.betas {
            for &eps in &cfg.eps {
                let params = ModelParams::xy(eps, beta);
                params.validate().map_err(|e| CliError::Config(e.to_string()))?;
                let block = (eps == 0.0).then_some(cfg.block_eps);
                let chain = rfo_core::sampler::ChainConfig {
                    thermalization: cfg.thermalization,
                    measurements: cfg.measurements,
                    block_eps: block,
                    observables: observables.to_vec(),
                    ..Default::default()
                };
                chain.validate().map_err(|e| CliError::Config(e.to_string()))?;
                for &r in &cfg.realizations {
                    let alpha = sample_disorder(
                        lattice,
                        1,
                        DisorderSeed {
                            master: seed,
                            realization: r,
                        },
                        Distribution::StandardGaussian,
                    )?;
                    let q = quadrature_oracle(lattice, &alpha, &params, &init, free, cfg.points, block)?;
                    let run = run_chain_with(
                        lattice,
                        &alpha,
                        &params,
                        &chain,
                        ChainSeed { master: seed, index },
                        Some(&init),
                        Some(&fixed),
                    )?;
                    index += 1;
                    for (o, exact) in observables.iter().zip([q.sigma0_e1, q.m0_e1, q.pm0_sq]) {
                        let e = run.estimate(*o).expect("observable recorded");
                        let z = e.z_score(exact);
                        let pass = z <= cfg.z_max;
                        cells += 1;
                        passed += pass as usize;
                        csv.row([
                            coords(ext),
                            beta.to_string(),
                            eps.to_string(),
                            r.to_string(),
                            o.name().to_string(),
                            exact.to_string(),
                            e.mean.to_string(),
                            e.stderr.to_string(),
                            z.to_string(),
                            pass.to_string(),
                        ]);
                    }
                }
            }
        }
    }
    let mut out = OutputDir::create(&common.out)?;
    out.csv("oracle.csv", csv)?;
    let fraction = passed as f64 / cells.max(1) as f64;
    let ok = cells > 0 && fraction >= cfg.min_pass;
    out.json(
        "summary.json",
        &json!({
            "seed": seed,
            "version": rfo_core::VERSION,
            "cells": cells,
            "passed": passed,
            "fraction": fraction,
            "min_pass": cfg.min_pass,
            "pass": ok,
        }),
    )?;
    let dir = out.finish("oracle-check", crate::output::to_value(&cfg), seed, workers)?;
    let msg = format!(
        "oracle-check: {passed}/{cells} cells within {} stderr, output in {}",
        cfg.z_max,
        dir.display()
    );
    if ok {
        Ok(format!("PASS {msg}"))
    } else {
        Err(CliError::Check(msg))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub eps: Vec<f64>,
    pub beta: f64,
    pub draws: u64,
    /// Lattice sides for the increment-variance growth check.
    pub growth: Vec<usize>,
    /// `ε` used by the growth check.
    pub growth_eps: f64,
    pub z_max: f64,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

impl Default for GaussianConfig {
    fn default() -> Self {
        Self {
            n: 8,
            eps: vec![0.0, 0.3],
            beta: 2.0,
            draws: 10_000,
            growth: vec![8, 16, 32],
            growth_eps: 0.3,
            z_max: 3.0,
            seed: None,
            workers: None,
        }
    }
}

/// Entrywise Monte Carlo mean and standard error of `(2β)⁻¹G + μμᵀ` with
/// `μ = (ε/2)Gα`, where `G` comes from iterative Dirichlet solves.
pub fn sampled_covariance(lattice: &Lattice, eps: f64, beta: f64, draws: u64, seed: u64) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let region = Region::whole(lattice);
    let spec = LaplacianSpec::dirichlet(&region, 0.0);
    let n = region.len();
    let opts = SolverOptions::default();
    let mut green = vec![0.0; n * n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = solve_green(&spec, &e, opts)?;
        for (i, v) in col.into_iter().enumerate() {
            green[i * n + j] = v;
        }
    }
    let mut sum = vec![0.0; n * n];
    let mut sum_sq = vec![0.0; n * n];
    for r in 0..draws {
        let alpha = sample_disorder(lattice, 1, DisorderSeed { master: seed, realization: r }, Distribution::StandardGaussian)?;
        let local: Vec<f64> = region.sites().iter().map(|&s| alpha.at(s)[0]).collect();
        let mu: Vec<f64> = solve_green(&spec, &local, opts)?.into_iter().map(|v| 0.5 * eps * v).collect();
        for i in 0..n {
            for j in 0..n {
                let v = green[i * n + j] / (2.0 * beta) + mu[i] * mu[j];
                sum[i * n + j] += v;
                sum_sq[i * n + j] += v * v;
            }
        }
    }
    let m = draws as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / m).collect();
    let stderr: Vec<f64> = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, mu)| ((sq / m - mu * mu) * m / (m - 1.0)).max(0.0).sqrt() / m.sqrt())
        .collect();
    // Region order may differ from site order; map back to site order.
    let mut by_site_mean = vec![0.0; n * n];
    let mut by_site_se = vec![0.0; n * n];
    for (a, &x) in region.sites().iter().enumerate() {
        for (b, &y) in region.sites().iter().enumerate() {
            by_site_mean[x * n + y] = mean[a * n + b];
            by_site_se[x * n + y] = stderr[a * n + b];
        }
    }
    Ok((by_site_mean, by_site_se))
}

pub fn gaussian(common: &Common) -> CliResult<String> {
    let mut cfg: GaussianConfig = config::load_or_default(common)?;
    let (seed, workers) = config::resolve_run(common, cfg.seed, cfg.workers)?;
    cfg.seed = Some(seed);
    cfg.workers = Some(workers);
    if cfg.draws < 2 || !(cfg.beta > 0.0) {
        return Err(CliError::Config("draws must be at least 2 and beta positive".into()));
    }
    let lattice = Lattice::new(2, cfg.n).map_err(|e| CliError::Config(format!("N: {e}")))?;
    let sites = lattice.num_sites();

    let mut cov_csv = Csv::new(seed, &["eps", "x", "y", "exact", "mean", "stderr", "z", "pass"]);
    let mut violations = 0usize;
    let mut compared = 0usize;
    let mut worst = 0.0f64;
    for &eps in &cfg.eps {
        let exact = gaussian_model_covariance(&lattice, eps, cfg.beta)?;
        let (mean, se) = sampled_covariance(&lattice, eps, cfg.beta, cfg.draws, seed)?;
        for x in 0..sites {
            for y in x..sites {
                let e = exact[(x, y)];
                let (m, s) = (mean[x * sites + y], se[x * sites + y]);
                let diff = (m - e).abs();
                let z = if s > 0.0 { diff / s } else { 0.0 };
                let pass = if s > 0.0 { z <= cfg.z_max } else { diff <= 1e-9 * e.abs().max(1.0) };
                compared += 1;
                violations += !pass as usize;
                worst = worst.max(z);
                cov_csv.row([
                    eps.to_string(),
                    x.to_string(),
                    y.to_string(),
                    e.to_string(),
                    m.to_string(),
                    s.to_string(),
                    z.to_string(),
                    pass.to_string(),
                ]);
            }
        }
    }

    let mut growth_csv = Csv::new(seed, &["N", "increment-variance"]);
    let mut growth = Vec::new();
    for &side in &cfg.growth {
        let l = Lattice::new(2, side).map_err(|e| CliError::Config(format!("growth: {e}")))?;
        let cov = gaussian_model_covariance(&l, cfg.growth_eps, cfg.beta)?;
        let v = increment_variance(&cov, &l, l.origin(), 0)
            .ok_or_else(|| CliError::Config("growth: origin has no neighbor along e1".into()))?;
        growth_csv.row([side.to_string(), v.to_string()]);
        growth.push(v);
    }
    let monotone = growth.windows(2).all(|w| w[1] > w[0]);

    let mut out = OutputDir::create(&common.out)?;
    out.csv("covariance.csv", cov_csv)?;
    out.csv("growth.csv", growth_csv)?;
    let ok = violations == 0 && monotone;
    out.json(
        "summary.json",
        &json!({
            "seed": seed,
            "version": rfo_core::VERSION,
            "entries": compared,
            "violations": violations,
            "max_z": worst,
            "growth": growth,
            "growth_monotone": monotone,
            "pass": ok,
        }),
    )?;
    let dir = out.finish("gaussian-check", crate::output::to_value(&cfg), seed, workers)?;
    let msg = format!(
        "gaussian-check: {violations} of {compared} entries beyond {} stderr (max z {worst:.2}), growth monotone: {monotone}, output in {}",
        cfg.z_max,
        dir.display()
    );
    if ok {
        Ok(format!("PASS {msg}"))
    } else {
        Err(CliError::Check(msg))
    }
}
