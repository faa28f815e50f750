//! `rfo simulate`: disorder-averaged ensembles.

use serde::{Deserialize, Serialize};
use serde_json::json;

use rfo_core::ensemble::{
    run_ensemble, sweep_parameter, EnsembleObservable, EnsembleStats, ExperimentSpec, LatticeSpec, SweepParameter,
};
use rfo_core::fields::Distribution;
use rfo_core::sampler::ChainConfig;

use crate::config::{self, ModelConfig};
use crate::output::{Csv, OutputDir};
use crate::{CliError, CliResult, Common};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub lattice: LatticeSpec,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub disorder: Distribution,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default = "one")]
    pub chains: usize,
    #[serde(default)]
    pub chain: ChainConfig,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    #[serde(default = "default_observables")]
    pub observables: Vec<EnsembleObservable>,
    #[serde(default = "default_trend_sigma")]
    pub trend_sigma: f64,
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

fn default_realizations() -> usize {
    8
}

fn one() -> usize {
    1
}

fn default_observables() -> Vec<EnsembleObservable> {
    vec![
        EnsembleObservable::M0E1,
        EnsembleObservable::Pm0Sq,
        EnsembleObservable::EnergyDensity,
    ]
}

fn default_trend_sigma() -> f64 {
    5.0
}

/// Everything the run used, defaults included.
#[derive(Debug, Serialize)]
struct Resolved<'a> {
    experiment: &'a ExperimentSpec,
    sweep: Option<&'a SweepConfig>,
}

pub fn run(common: &Common) -> CliResult<String> {
    let path = config::require_config(common)?;
    let cfg: SimulateConfig = config::load(path)?;
    let (seed, workers) = config::resolve_run(common, cfg.seed, cfg.workers)?;
    let spec = ExperimentSpec {
        lattice: cfg.lattice.clone(),
        model: cfg.model.resolve()?,
        disorder: cfg.disorder,
        realizations: cfg.realizations,
        chains: cfg.chains,
        chain: cfg.chain.clone(),
        seed,
        observables: cfg.observables.clone(),
        trend_sigma: cfg.trend_sigma,
    };
    spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(s) = &cfg.sweep {
        if s.values.is_empty() {
            return Err(CliError::Config("sweep.values: must not be empty".into()));
        }
    }

    let mut out = OutputDir::create(&common.out)?;
    let results: Vec<(Option<f64>, EnsembleStats)> = match &cfg.sweep {
        Some(s) => sweep_parameter(&spec, s.parameter, &s.values, workers)?
            .into_iter()
            .map(|(v, st)| (Some(v), st))
            .collect(),
        None => vec![(None, run_ensemble(&spec, workers)?)],
    };
    let param = cfg.sweep.as_ref().map(|s| s.parameter);
    write_tables(&mut out, &spec, param, &results)?;

    let failures: usize = results.iter().map(|(_, s)| s.failures).sum();
    let resolved = Resolved {
        experiment: &spec,
        sweep: cfg.sweep.as_ref(),
    };
    let dir = out.finish("simulate", crate::output::to_value(&resolved), seed, workers)?;
    Ok(format!(
        "simulate: {} ensemble(s), {failures} excluded realization(s), output in {}",
        results.len(),
        dir.display()
    ))
}

fn param_name(p: SweepParameter) -> &'static str {
    match p {
        SweepParameter::Beta => "beta",
        SweepParameter::Eps => "eps",
        SweepParameter::N => "N",
        SweepParameter::Xi => "xi",
    }
}

fn write_tables(
    out: &mut OutputDir,
    spec: &ExperimentSpec,
    param: Option<SweepParameter>,
    results: &[(Option<f64>, EnsembleStats)],
) -> CliResult<()> {
    let lead: Vec<&str> = param.map(param_name).into_iter().collect();

    let mut cols = lead.clone();
    cols.extend(["realization", "failure"]);
    let names: Vec<String> = spec
        .observables
        .iter()
        .flat_map(|o| [o.name().to_string(), format!("{}-stderr", o.name())])
        .collect();
    cols.extend(names.iter().map(String::as_str));
    let mut realizations = Csv::new(spec.seed, &cols);
    for (value, stats) in results {
        for r in &stats.realizations {
            let mut row: Vec<String> = value.iter().map(f64::to_string).collect();
            row.push(r.index.to_string());
            row.push(r.failure.clone().unwrap_or_default());
            for k in 0..spec.observables.len() {
                row.push(r.values.get(k).map_or_else(String::new, f64::to_string));
                row.push(r.within.get(k).map_or_else(String::new, f64::to_string));
            }
            realizations.row(row);
        }
    }
    out.csv("realizations.csv", realizations)?;

    let mut cols = lead;
    cols.extend([
        "observable",
        "mean",
        "between-stderr",
        "within-stderr",
        "combined-stderr",
        "count",
        "failures",
    ]);
    let mut summary = Csv::new(spec.seed, &cols);
    for (value, stats) in results {
        for o in &stats.observables {
            let mut row: Vec<String> = value.iter().map(f64::to_string).collect();
            row.extend([
                o.observable.name().to_string(),
                o.mean.to_string(),
                o.between_stderr.to_string(),
                o.within_stderr.to_string(),
                o.combined_stderr.to_string(),
                o.count.to_string(),
                stats.failures.to_string(),
            ]);
            summary.row(row);
        }
    }
    out.csv("summary.csv", summary)?;

    let ensembles: Vec<_> = results
        .iter()
        .map(|(value, stats)| {
            json!({
                "value": value,
                "observables": stats.observables,
                "failures": stats.failures,
                "realizations": stats.realizations,
            })
        })
        .collect();
    out.json(
        "summary.json",
        &json!({
            "seed": spec.seed,
            "version": rfo_core::VERSION,
            "parameter": param.map(param_name),
            "ensembles": ensembles,
        }),
    )
}
