//! `rfo contours`: bad boxes, contours, layers and optional surgery.

use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use rfo_core::contour::{analyze, surgery, BadReason, ContourLabel, ContourSet};
use rfo_core::fields::{sample_disorder, DisorderField, DisorderSeed, ModelParams, SpinConfiguration};
use rfo_core::lattice::Lattice;
use rfo_core::snapshot::Snapshot;

use crate::config::{self, DisorderConfig, ModelConfig};
use crate::output::{coords, opt, Csv, OutputDir};
use crate::{CliError, CliResult, Common};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContoursConfig {
    /// Spin snapshot, relative to the config file.
    pub snapshot: Option<PathBuf>,
    pub model: ModelConfig,
    /// Run surgery on every contour with a determined label.
    pub surgery: bool,
    /// Field snapshot for surgery; sampled from `disorder` when absent.
    pub field: Option<PathBuf>,
    pub disorder: DisorderConfig,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

fn read_snapshot(path: &Path) -> CliResult<Snapshot> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
    Ok(Snapshot::read_from(BufReader::new(file))?)
}

fn relative_to(config: Option<&PathBuf>, p: &Path) -> PathBuf {
    match config.and_then(|c| c.parent()) {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

pub fn run(common: &Common, snapshot_flag: Option<PathBuf>) -> CliResult<String> {
    let mut cfg: ContoursConfig = config::load_or_default(common)?;
    let (seed, workers) = config::resolve_run(common, cfg.seed, cfg.workers)?;
    let snapshot_path = match snapshot_flag {
        Some(p) => p,
        None => relative_to(
            common.config.as_ref(),
            cfg.snapshot
                .as_deref()
                .ok_or_else(|| CliError::Config("snapshot: give --snapshot or set it in the config".into()))?,
        ),
    };
    let field_path = cfg.field.as_deref().map(|p| relative_to(common.config.as_ref(), p));
    cfg.snapshot = Some(snapshot_path.clone());
    cfg.field = field_path.clone();
    cfg.seed = Some(seed);
    cfg.workers = Some(workers);

    let snap = read_snapshot(&snapshot_path)?;
    let lattice = snap.lattice()?;
    let mut params = cfg.model.resolve()?;
    if snap.components != params.n {
        params.n = snap.components;
        params.validate().map_err(|e| CliError::Config(format!("model: {e}")))?;
    }
    let spins = snap.into_spins()?;
    let scales = params.scales(lattice.dim()).map_err(|e| CliError::Config(format!("model.scales: {e}")))?;
    let (reports, set) = analyze(&lattice, &spins, &params)?;

    let mut out = OutputDir::create(&common.out)?;
    let mut boxes = Csv::new(
        seed,
        &["box", "lo", "hi", "reason", "dirichlet-energy", "threshold", "psi", "angle-distance"],
    );
    for (i, r) in reports.iter().enumerate() {
        boxes.row([
            i.to_string(),
            coords(&r.lattice_box.lo),
            coords(&r.lattice_box.hi),
            r.reason.map_or("good", |b| match b {
                BadReason::DirichletExcess => "dirichlet-excess",
                BadReason::AngleDeviation => "angle-deviation",
            })
            .to_string(),
            r.dirichlet_energy.to_string(),
            r.threshold.to_string(),
            opt(r.psi),
            opt(r.angle_distance),
        ]);
    }
    out.csv("boxes.csv", boxes)?;

    let mut contours = Csv::new(
        seed,
        &["contour", "boxes", "support", "label", "layer-thickness", "layer-sites", "layer-signs", "layer-failure"],
    );
    for (i, c) in set.contours.iter().enumerate() {
        let layer = c.layer.as_ref();
        contours.row([
            i.to_string(),
            c.boxes.len().to_string(),
            c.support.len().to_string(),
            label_name(c.label).to_string(),
            opt(layer.map(|l| l.thickness)),
            opt(layer.map(|l| l.sites.len())),
            layer.map_or_else(String::new, |l| {
                coords(&l.components.iter().map(|k| k.sign).collect::<Vec<_>>())
            }),
            layer.and_then(|l| l.failure.clone()).unwrap_or_default(),
        ]);
    }
    out.csv("contours.csv", contours)?;

    let mut records = Vec::new();
    if cfg.surgery {
        let alpha = match &field_path {
            Some(p) => read_snapshot(p)?.into_field()?,
            None => sample_disorder(
                &lattice,
                params.k,
                DisorderSeed {
                    master: seed,
                    realization: cfg.disorder.realization,
                },
                cfg.disorder.distribution,
            )?,
        };
        records = run_surgery(&lattice, &spins, &alpha, &params, &set, &mut out, seed)?;
    }

    let bad = set.bad_boxes;
    let total = set.total_boxes;
    out.json(
        "contours.json",
        &json!({
            "seed": seed,
            "version": rfo_core::VERSION,
            "scales": scales,
            "bad_boxes": bad,
            "total_boxes": total,
            "bad_box_density": set.bad_box_density(),
            "boxes": reports,
            "contours": set.contours,
            "surgery": records,
        }),
    )?;

    let resolved = json!({ "contours": cfg, "model": params, "scales": scales });
    let dir = out.finish("contours", resolved, seed, workers)?;
    Ok(format!(
        "contours: {bad} of {total} boxes bad, {} contour(s), output in {}",
        set.contours.len(),
        dir.display()
    ))
}

fn label_name(l: ContourLabel) -> &'static str {
    match l {
        ContourLabel::Plus => "plus",
        ContourLabel::Minus => "minus",
        ContourLabel::Undetermined => "undetermined",
    }
}

fn run_surgery(
    lattice: &Lattice,
    spins: &SpinConfiguration,
    alpha: &DisorderField,
    params: &ModelParams,
    set: &ContourSet,
    out: &mut OutputDir,
    seed: u64,
) -> CliResult<Vec<serde_json::Value>> {
    let mut csv = Csv::new(
        seed,
        &[
            "contour",
            "energy-before",
            "energy-after",
            "gap",
            "core-size",
            "aligned-fraction",
            "reflected-components",
            "layer-ascent-converged",
            "error",
        ],
    );
    let mut records = Vec::new();
    for (i, c) in set.contours.iter().enumerate() {
        let Some(layer) = &c.layer else { continue };
        match surgery(lattice, spins, alpha, params, c, layer) {
            Ok(r) => {
                csv.row([
                    i.to_string(),
                    r.energy_before.to_string(),
                    r.energy_after.to_string(),
                    r.gap.to_string(),
                    r.core_size.to_string(),
                    r.aligned_fraction.to_string(),
                    r.reflected_components.to_string(),
                    r.layer_ascent_converged.to_string(),
                    String::new(),
                ]);
                let mut snap = Snapshot::of_spins(lattice, &r.sigma_tilde)?;
                snap.meta.insert("seed".into(), seed.to_string());
                snap.meta.insert("version".into(), rfo_core::VERSION.into());
                let mut bytes = Vec::new();
                snap.write_to(&mut bytes)?;
                out.write(&format!("sigma_tilde_{i}.csv"), &bytes)?;
                records.push(json!({ "contour": i, "record": r }));
            }
            Err(e) => {
                let mut row = vec![i.to_string()];
                row.extend(std::iter::repeat_n(String::new(), 7));
                row.push(e.to_string());
                csv.row(row);
                records.push(json!({ "contour": i, "error": e.to_string() }));
            }
        }
    }
    out.csv("surgery.csv", csv)?;
    Ok(records)
}
