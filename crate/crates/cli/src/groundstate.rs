//! `rfo groundstate`: multi-start relaxation for one disorder realization.

use serde::{Deserialize, Serialize};
use serde_json::json;

use rfo_core::ensemble::LatticeSpec;
use rfo_core::fields::{sample_disorder, DisorderSeed};
use rfo_core::groundstate::{ordering_projection_profile, relax_multistart, RelaxOptions};
use rfo_core::snapshot::Snapshot;

use crate::config::{self, DisorderConfig, ModelConfig};
use crate::output::{Csv, OutputDir};
use crate::{CliError, CliResult, Common};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundstateConfig {
    pub lattice: LatticeSpec,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub disorder: DisorderConfig,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

fn default_starts() -> usize {
    8
}

fn default_tol() -> f64 {
    RelaxOptions::default().tol
}

fn default_max_sweeps() -> usize {
    RelaxOptions::default().max_sweeps
}

pub fn run(common: &Common) -> CliResult<String> {
    let path = config::require_config(common)?;
    let mut cfg: GroundstateConfig = config::load(path)?;
    let (seed, workers) = config::resolve_run(common, cfg.seed, cfg.workers)?;
    cfg.seed = Some(seed);
    cfg.workers = Some(workers);
    let lattice = cfg.lattice.build().map_err(|e| CliError::Config(format!("lattice: {e}")))?;
    let params = cfg.model.resolve()?;
    if !(cfg.tol > 0.0) || cfg.max_sweeps == 0 || cfg.starts == 0 {
        return Err(CliError::Config("starts, tol and max_sweeps must be positive".into()));
    }
    let alpha = sample_disorder(
        &lattice,
        params.k,
        DisorderSeed {
            master: seed,
            realization: cfg.disorder.realization,
        },
        cfg.disorder.distribution,
    )?;
    let opts = RelaxOptions {
        tol: cfg.tol,
        max_sweeps: cfg.max_sweeps,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let (reports, best) =
        pool.install(|| relax_multistart(&lattice, &alpha, &params, None, cfg.starts, seed, opts))?;

    let mut out = OutputDir::create(&common.out)?;
    let mut starts = Csv::new(seed, &["start", "final-energy", "sweeps", "converged", "gradient-sup", "best"]);
    for (i, r) in reports.iter().enumerate() {
        starts.row([
            i.to_string(),
            r.final_energy().to_string(),
            r.sweeps.to_string(),
            r.converged.to_string(),
            r.gradient_sup.to_string(),
            (i == best).to_string(),
        ]);
    }
    out.csv("starts.csv", starts)?;

    let mut trace = Csv::new(seed, &["start", "sweep", "energy"]);
    for (i, r) in reports.iter().enumerate() {
        for (s, e) in r.energy_trace.iter().enumerate() {
            trace.row([i.to_string(), s.to_string(), e.to_string()]);
        }
    }
    out.csv("trace.csv", trace)?;

    let ground = &reports[best];
    for (name, mut snap) in [
        ("ground_state.csv", Snapshot::of_spins(&lattice, &ground.config)?),
        ("field.csv", Snapshot::of_field(&lattice, &alpha)?),
    ] {
        snap.meta.insert("seed".into(), seed.to_string());
        snap.meta.insert("version".into(), rfo_core::VERSION.into());
        let mut bytes = Vec::new();
        snap.write_to(&mut bytes)?;
        out.write(name, &bytes)?;
    }

    let profile = ordering_projection_profile(&ground.config, params.k);
    out.json(
        "summary.json",
        &json!({
            "seed": seed,
            "version": rfo_core::VERSION,
            "best_start": best,
            "energy": ground.final_energy(),
            "converged": ground.converged,
            "projection_profile": {
                "min": profile.min,
                "q25": profile.q25,
                "median": profile.median,
                "q75": profile.q75,
                "max": profile.max,
            },
        }),
    )?;

    let resolved = json!({ "groundstate": cfg, "model": params });
    let dir = out.finish("groundstate", resolved, seed, workers)?;
    Ok(format!(
        "groundstate: best start {best} of {}, H = {}, output in {}",
        reports.len(),
        ground.final_energy(),
        dir.display()
    ))
}
