//! Disorder averages `E[⟨·⟩]` over independent realizations of the field.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::analyze;
use crate::error::{invalid, Error, Result};
use crate::fields::{sample_disorder, DisorderSeed, Distribution, ModelParams};
use crate::lattice::Lattice;
use crate::rng::chain_index;
use crate::sampler::{run_chain_with, ChainConfig, ChainResult, ChainSeed, Observable};
use crate::stats::{blocking_estimate, mean, variance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleObservable {
    Sigma0E1,
    M0E1,
    Pm0Sq,
    EnergyDensity,
    /// Fraction of bad `ℓ`-boxes in the final configuration of each chain.
    BadBoxDensity,
    /// Number of contours in the final configuration of each chain.
    ContourCount,
}

impl EnsembleObservable {
    pub fn name(self) -> &'static str {
        match self {
            EnsembleObservable::Sigma0E1 => "sigma0-e1",
            EnsembleObservable::M0E1 => "m0-e1",
            EnsembleObservable::Pm0Sq => "pm0-sq",
            EnsembleObservable::EnergyDensity => "energy-density",
            EnsembleObservable::BadBoxDensity => "bad-box-density",
            EnsembleObservable::ContourCount => "contour-count",
        }
    }

    fn chain_observable(self) -> Option<Observable> {
        match self {
            EnsembleObservable::Sigma0E1 => Some(Observable::Sigma0E1),
            EnsembleObservable::M0E1 => Some(Observable::M0E1),
            EnsembleObservable::Pm0Sq => Some(Observable::Pm0Sq),
            EnsembleObservable::EnergyDensity => Some(Observable::EnergyDensity),
            _ => None,
        }
    }

    fn needs_contours(self) -> bool {
        self.chain_observable().is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default)]
    pub periodic: bool,
}

impl LatticeSpec {
    pub fn build(&self) -> Result<Lattice> {
        if self.periodic {
            Lattice::periodic(self.d, self.n)
        } else {
            Lattice::new(self.d, self.n)
        }
    }
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

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub lattice: LatticeSpec,
    pub model: ModelParams,
    #[serde(default)]
    pub disorder: Distribution,
    pub realizations: usize,
    #[serde(default = "one")]
    pub chains: usize,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_observables")]
    pub observables: Vec<EnsembleObservable>,
    /// A chain whose mean energy moves by more than this many standard errors
    /// between its two halves counts as not thermalized.
    #[serde(default = "default_trend_sigma")]
    pub trend_sigma: f64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.lattice.build()?;
        self.model.validate()?;
        self.chain.validate()?;
        if self.realizations == 0 {
            return Err(invalid("realizations", "must be at least 1"));
        }
        if self.chains == 0 || self.chains > 1 << 20 {
            return Err(invalid("chains", "must lie in 1..=2^20"));
        }
        if self.observables.is_empty() {
            return Err(invalid("observables", "must not be empty"));
        }
        if !(self.trend_sigma > 0.0) {
            return Err(invalid("trend_sigma", "must be positive"));
        }
        if self.observables.iter().any(|o| o.needs_contours()) {
            self.model.scales(self.lattice.d)?;
        }
        Ok(())
    }

    fn chain_config(&self) -> ChainConfig {
        let mut c = self.chain.clone();
        c.observables = self
            .observables
            .iter()
            .filter_map(|o| o.chain_observable())
            .collect();
        if c.observables.is_empty() {
            c.observables.push(Observable::EnergyDensity);
        }
        c
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RealizationRecord {
    pub index: u64,
    /// Reason for exclusion, if excluded.
    pub failure: Option<String>,
    /// Chain-averaged value per observable, aligned with the spec's list.
    pub values: Vec<f64>,
    /// Thermal standard error per observable.
    pub within: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObservableStats {
    pub observable: EnsembleObservable,
    pub mean: f64,
    pub between_stderr: f64,
    pub within_stderr: f64,
    pub combined_stderr: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleStats {
    pub observables: Vec<ObservableStats>,
    pub realizations: Vec<RealizationRecord>,
    pub failures: usize,
}

impl EnsembleStats {
    pub fn get(&self, obs: EnsembleObservable) -> Option<&ObservableStats> {
        self.observables.iter().find(|s| s.observable == obs)
    }
}

/// Runs every realization (on `workers` threads) and aggregates.
///
/// Realization `i` draws its field from stream `(seed, i)` and chain `j` of it
/// uses chain stream `chain_index(i, j)`, so results do not depend on the
/// worker count.
pub fn run_ensemble(spec: &ExperimentSpec, workers: usize) -> Result<EnsembleStats> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| invalid("workers", e.to_string()))?;
    let lattice = spec.lattice.build()?;
    let records: Vec<RealizationRecord> = pool.install(|| {
        (0..spec.realizations as u64)
            .into_par_iter()
            .map(|i| {
                run_realization(spec, &lattice, i).unwrap_or_else(|e| RealizationRecord {
                    index: i,
                    failure: Some(e.to_string()),
                    values: Vec::new(),
                    within: Vec::new(),
                })
            })
            .collect()
    });
    Ok(aggregate(spec, records))
}

fn run_realization(spec: &ExperimentSpec, lattice: &Lattice, i: u64) -> Result<RealizationRecord> {
    let alpha = sample_disorder(
        lattice,
        spec.model.k,
        DisorderSeed {
            master: spec.seed,
            realization: i,
        },
        spec.disorder,
    )?;
    let chain_cfg = spec.chain_config();
    let nobs = spec.observables.len();
    let mut values = vec![0.0; nobs];
    let mut within_sq = vec![0.0; nobs];
    let c = spec.chains as f64;
    for j in 0..spec.chains as u64 {
        let seed = ChainSeed {
            master: spec.seed,
            index: chain_index(i, j),
        };
        let result = run_chain_with(lattice, &alpha, &spec.model, &chain_cfg, seed, None, None)?;
        if let Some(why) = energy_trend_failure(&result, spec.trend_sigma) {
            return Ok(RealizationRecord {
                index: i,
                failure: Some(format!("chain {j}: {why}")),
                values: Vec::new(),
                within: Vec::new(),
            });
        }
        let contours = if spec.observables.iter().any(|o| o.needs_contours()) {
            Some(analyze(lattice, &result.final_spins, &spec.model)?.1)
        } else {
            None
        };
        for (k, obs) in spec.observables.iter().enumerate() {
            let (v, s) = match obs.chain_observable() {
                Some(o) => {
                    let e = result.estimate(o).expect("observable recorded");
                    (e.mean, e.stderr)
                }
                None => {
                    let set = contours.as_ref().expect("computed above");
                    match obs {
                        EnsembleObservable::BadBoxDensity => (set.bad_box_density(), 0.0),
                        _ => (set.contours.len() as f64, 0.0),
                    }
                }
            };
            values[k] += v / c;
            within_sq[k] += s * s;
        }
    }
    Ok(RealizationRecord {
        index: i,
        failure: None,
        values,
        within: within_sq.iter().map(|s| s.sqrt() / c).collect(),
    })
}

/// Compares the mean energy of the two halves of the measurement series.
pub fn energy_trend_failure(result: &ChainResult, sigmas: f64) -> Option<String> {
    let e = &result.energy;
    if e.len() < 64 {
        return None;
    }
    let (a, b) = e.split_at(e.len() / 2);
    let (ea, eb) = (blocking_estimate(a), blocking_estimate(b));
    let se = ea.stderr.hypot(eb.stderr);
    let diff = (ea.mean - eb.mean).abs();
    if diff > sigmas * se && diff > 1e-12 * ea.mean.abs().max(1.0) {
        Some(format!(
            "energy drifts by {diff:.4e} between halves ({:.1} standard errors)",
            diff / se.max(f64::MIN_POSITIVE)
        ))
    } else {
        None
    }
}

fn aggregate(spec: &ExperimentSpec, records: Vec<RealizationRecord>) -> EnsembleStats {
    let ok: Vec<&RealizationRecord> = records.iter().filter(|r| r.failure.is_none()).collect();
    let r = ok.len();
    let observables = spec
        .observables
        .iter()
        .enumerate()
        .map(|(k, &observable)| {
            let xs: Vec<f64> = ok.iter().map(|rec| rec.values[k]).collect();
            let between = if r > 1 { (variance(&xs) / r as f64).sqrt() } else { 0.0 };
            let within = if r > 0 {
                ok.iter().map(|rec| rec.within[k].powi(2)).sum::<f64>().sqrt() / r as f64
            } else {
                0.0
            };
            ObservableStats {
                observable,
                mean: if r > 0 { mean(&xs) } else { f64::NAN },
                between_stderr: between,
                within_stderr: within,
                combined_stderr: between.hypot(within),
                count: r,
            }
        })
        .collect();
    EnsembleStats {
        observables,
        failures: records.len() - r,
        realizations: records,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    Beta,
    Eps,
    #[serde(rename = "N")]
    N,
    Xi,
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta" => Ok(SweepParameter::Beta),
            "eps" => Ok(SweepParameter::Eps),
            "N" => Ok(SweepParameter::N),
            "xi" => Ok(SweepParameter::Xi),
            other => Err(invalid("parameter", format!("unknown sweep parameter {other:?}"))),
        }
    }
}

/// One ensemble per value, all with the spec's master seed.
pub fn sweep_parameter(
    spec: &ExperimentSpec,
    parameter: SweepParameter,
    values: &[f64],
    workers: usize,
) -> Result<Vec<(f64, EnsembleStats)>> {
    values
        .iter()
        .map(|&v| {
            let mut s = spec.clone();
            match parameter {
                SweepParameter::Beta => s.model.beta = v,
                SweepParameter::Eps => s.model.eps = v,
                SweepParameter::Xi => s.model.scales.xi = v,
                SweepParameter::N => {
                    if v.fract() != 0.0 || v < 2.0 {
                        return Err(invalid("N", format!("lattice side must be an integer, got {v}")));
                    }
                    s.lattice.n = v as usize;
                }
            }
            Ok((v, run_ensemble(&s, workers)?))
        })
        .collect()
}
