//! Bad boxes, contours, boundary layers and the reflection surgery for the
//! XY model (n = 2, k = 1).
//!
//! An `ℓ`-box is bad when its Dirichlet energy exceeds
//! `dirichlet_factor · 4ε_d²|Q|`, or when the direction `ψ` of its mean spin is
//! farther than `ξ` from both `0` and `π`. `L`-boxes within ∞-distance `3L/2` of
//! a bad box are flagged; face-connected groups of flagged boxes form contours.

use std::collections::VecDeque;

use serde::Serialize;

use crate::energy::{dirichlet_energy, Hamiltonian};
use crate::error::{invalid, Error, Result};
use crate::fields::{DisorderField, ModelParams, Scales, SpinConfiguration};
use crate::lattice::{connected_components, tile_boxes, Lattice, LatticeBox, Region};
use crate::renorm::{
    change_of_variables, inverse_change_of_variables, maximize_renormalized, to_angles, AngleBoundary,
    Renormalization,
};

/// Block means with a smaller norm have no direction.
const MIN_MEAN_NORM: f64 = 1e-9;
/// Maximum number of layer thickenings.
pub const LAYER_ATTEMPTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BadReason {
    DirichletExcess,
    AngleDeviation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BadBoxReport {
    #[serde(rename = "box")]
    pub lattice_box: LatticeBox,
    /// `None` for good boxes.
    pub reason: Option<BadReason>,
    pub dirichlet_energy: f64,
    pub threshold: f64,
    /// Direction of the mean spin; `None` when the mean vanishes.
    pub psi: Option<f64>,
    /// `min(|ψ|, π − |ψ|)`.
    pub angle_distance: Option<f64>,
}

impl BadBoxReport {
    pub fn is_bad(&self) -> bool {
        self.reason.is_some()
    }
}

fn require_xy(params: &ModelParams) -> Result<()> {
    if params.n != 2 || params.k != 1 {
        return Err(invalid("n", "contours are defined for n = 2, k = 1"));
    }
    Ok(())
}

/// Classifies every box of the `ℓ`-tiling anchored at the lattice corner.
pub fn detect_bad_boxes(
    lattice: &Lattice,
    spins: &SpinConfiguration,
    params: &ModelParams,
) -> Result<Vec<BadBoxReport>> {
    require_xy(params)?;
    if spins.n() != 2 || spins.num_sites() != lattice.num_sites() {
        return Err(Error::DimensionMismatch("spins do not match the lattice".into()));
    }
    let scales = params.scales(lattice.dim())?;
    classify_boxes(lattice, spins, &scales)
}

pub fn classify_boxes(lattice: &Lattice, spins: &SpinConfiguration, scales: &Scales) -> Result<Vec<BadBoxReport>> {
    let boxes = tile_boxes(lattice, scales.ell, &vec![0; lattice.dim()])?;
    Ok(boxes
        .into_iter()
        .map(|b| {
            let sites = b.sites(lattice);
            let region = Region::new(lattice, sites.iter().copied());
            let energy = dirichlet_energy(spins, &region);
            let threshold = scales.dirichlet_factor * 4.0 * scales.eps_d * scales.eps_d * sites.len() as f64;
            let (mut mx, mut my) = (0.0, 0.0);
            for &s in &sites {
                mx += spins.get(s)[0];
                my += spins.get(s)[1];
            }
            let norm = mx.hypot(my) / sites.len() as f64;
            let psi = (norm >= MIN_MEAN_NORM).then(|| my.atan2(mx));
            let angle_distance = psi.map(|p| p.abs().min(std::f64::consts::PI - p.abs()));
            let reason = if energy > threshold {
                Some(BadReason::DirichletExcess)
            } else if angle_distance.is_none_or(|a| a > scales.xi) {
                Some(BadReason::AngleDeviation)
            } else {
                None
            };
            BadBoxReport {
                lattice_box: b,
                reason,
                dirichlet_energy: energy,
                threshold,
                psi,
                angle_distance,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContourLabel {
    Plus,
    Minus,
    Undetermined,
}

impl ContourLabel {
    fn from_sign(s: i8) -> Self {
        match s {
            1 => ContourLabel::Plus,
            -1 => ContourLabel::Minus,
            _ => ContourLabel::Undetermined,
        }
    }

    fn sign(self) -> i8 {
        match self {
            ContourLabel::Plus => 1,
            ContourLabel::Minus => -1,
            ContourLabel::Undetermined => 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LayerComponent {
    pub sites: Vec<usize>,
    /// Sign of `σ·e₁` on the component's outer boundary; 0 if mixed.
    pub sign: i8,
    /// Lies in the component of `Λ ∖ Γ` that carries most of `∂Λ`.
    pub exterior: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Layer {
    pub sites: Vec<usize>,
    /// Layer thickness in units of `L`.
    pub thickness: usize,
    pub components: Vec<LayerComponent>,
    pub label: ContourLabel,
    /// Why no acceptable layer was found, if so.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Contour {
    pub boxes: Vec<LatticeBox>,
    /// `Γ`, sorted.
    pub support: Vec<usize>,
    pub label: ContourLabel,
    pub layer: Option<Layer>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContourSet {
    pub ell: usize,
    pub big_l: usize,
    pub bad_boxes: usize,
    pub total_boxes: usize,
    pub contours: Vec<Contour>,
}

impl ContourSet {
    pub fn bad_box_density(&self) -> f64 {
        self.bad_boxes as f64 / self.total_boxes.max(1) as f64
    }
}

/// Groups `L`-boxes near bad `ℓ`-boxes into contours (labels left undetermined).
pub fn build_contours(lattice: &Lattice, reports: &[BadBoxReport], scales: &Scales) -> Result<ContourSet> {
    let big_l = scales.big_l;
    if big_l % scales.ell != 0 {
        return Err(invalid("big_l", "must be a multiple of ell"));
    }
    let bad: Vec<&LatticeBox> = reports.iter().filter(|r| r.is_bad()).map(|r| &r.lattice_box).collect();
    let boxes = tile_boxes(lattice, big_l, &vec![0; lattice.dim()])?;
    let flagged: Vec<LatticeBox> = boxes
        .into_iter()
        .filter(|b| bad.iter().any(|q| 2 * b.inf_distance(q) <= 3 * big_l))
        .collect();
    let mut seen = vec![false; flagged.len()];
    let mut contours = Vec::new();
    for start in 0..flagged.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut group = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for j in 0..flagged.len() {
                if !seen[j] && flagged[i].is_adjacent(&flagged[j]) {
                    seen[j] = true;
                    group.push(j);
                    queue.push_back(j);
                }
            }
        }
        group.sort_unstable();
        let boxes: Vec<LatticeBox> = group.iter().map(|&i| flagged[i].clone()).collect();
        let mut support: Vec<usize> = boxes.iter().flat_map(|b| b.sites(lattice)).collect();
        support.sort_unstable();
        contours.push(Contour {
            boxes,
            support,
            label: ContourLabel::Undetermined,
            layer: None,
        });
    }
    Ok(ContourSet {
        ell: scales.ell,
        big_l,
        bad_boxes: bad.len(),
        total_boxes: reports.len(),
        contours,
    })
}

/// Searches for a layer around `Γ` whose boundary spins satisfy
/// `|σ·e₁| > 1/2` with one sign per layer component, thickening by `L` up to
/// [`LAYER_ATTEMPTS`] times. The boundary of the layer consists of its sites
/// next to `Λ ∖ (Γ ∪ 𝓛)` or on `∂Λ`.
pub fn find_layer(lattice: &Lattice, spins: &SpinConfiguration, contour: &Contour, scales: &Scales) -> Layer {
    let sites = lattice.num_sites();
    let mut gamma = vec![false; sites];
    contour.support.iter().for_each(|&s| gamma[s] = true);
    let outside: Vec<usize> = (0..sites).filter(|&s| !gamma[s]).collect();
    let failed = |thickness: usize, why: String| Layer {
        sites: Vec::new(),
        thickness,
        components: Vec::new(),
        label: ContourLabel::Undetermined,
        failure: Some(why),
    };
    if outside.is_empty() {
        return failed(0, "the contour covers the whole lattice".into());
    }
    // The exterior is the component of Λ ∖ Γ holding most boundary sites.
    let regions = connected_components(lattice, &outside);
    let exterior = regions
        .iter()
        .enumerate()
        .max_by_key(|(i, r)| {
            let on_edge = r.sites().iter().filter(|&&s| lattice.is_boundary(s)).count();
            (on_edge, r.len(), std::cmp::Reverse(*i))
        })
        .map(|(i, _)| i)
        .expect("nonempty");

    let mut last_reason = String::new();
    for attempt in 1..=LAYER_ATTEMPTS {
        let grown = lattice.dilate_inf(&gamma, attempt * scales.big_l);
        let in_layer: Vec<bool> = (0..sites).map(|s| grown[s] && !gamma[s]).collect();
        let layer_sites: Vec<usize> = (0..sites).filter(|&s| in_layer[s]).collect();
        let mut components = Vec::new();
        let mut ok = true;
        for comp in connected_components(lattice, &layer_sites) {
            let rim: Vec<usize> = comp
                .sites()
                .iter()
                .copied()
                .filter(|&s| lattice.is_boundary(s) || lattice.neighbors(s).any(|y| !grown[y]))
                .collect();
            let mut sign = 0i8;
            for &s in &rim {
                let v = spins.get(s)[0];
                let here = if v > 0.5 {
                    1
                } else if v < -0.5 {
                    -1
                } else {
                    0
                };
                if here == 0 || (sign != 0 && here != sign) {
                    sign = 0;
                    ok = false;
                    last_reason = format!("layer boundary condition fails at thickness {attempt}L");
                    break;
                }
                sign = here;
            }
            if rim.is_empty() {
                ok = false;
                last_reason = format!("a layer component has no boundary at thickness {attempt}L");
            }
            let first = comp.sites()[0];
            components.push(LayerComponent {
                exterior: regions[exterior].contains(first),
                sites: comp.sites().to_vec(),
                sign,
            });
        }
        if !ok {
            continue;
        }
        let signs: Vec<i8> = components.iter().filter(|c| c.exterior).map(|c| c.sign).collect();
        let label = match signs.first() {
            Some(&s) if signs.iter().all(|&t| t == s) => ContourLabel::from_sign(s),
            _ => ContourLabel::Undetermined,
        };
        if label == ContourLabel::Undetermined {
            last_reason = format!("exterior layer components disagree at thickness {attempt}L");
            continue;
        }
        return Layer {
            sites: layer_sites,
            thickness: attempt,
            components,
            label,
            failure: None,
        };
    }
    failed(LAYER_ATTEMPTS, last_reason)
}

/// Detects bad boxes, builds contours and searches a layer for each.
pub fn analyze(lattice: &Lattice, spins: &SpinConfiguration, params: &ModelParams) -> Result<(Vec<BadBoxReport>, ContourSet)> {
    let reports = detect_bad_boxes(lattice, spins, params)?;
    let scales = params.scales(lattice.dim())?;
    let mut set = build_contours(lattice, &reports, &scales)?;
    for c in &mut set.contours {
        let layer = find_layer(lattice, spins, c, &scales);
        c.label = layer.label;
        c.layer = Some(layer);
    }
    Ok((reports, set))
}

#[derive(Debug, Clone, Serialize)]
pub struct SurgeryRecord {
    #[serde(skip)]
    pub sigma_tilde: SpinConfiguration,
    pub energy_before: f64,
    pub energy_after: f64,
    /// `H(σ) − H(σ̃)`.
    pub gap: f64,
    /// Sites of `𝔸`.
    pub core_size: usize,
    /// Fraction of `𝔸` where `σ̃` lies within `δ` of `0` or `π`.
    pub aligned_fraction: f64,
    pub reflected_components: usize,
    pub layer_ascent_converged: bool,
}

/// Builds the comparison configuration `σ̃` for one labelled contour.
///
/// 1. Maximize `𝒦` on the layer with the rest of `σ` as boundary.
/// 2. On `𝔸 = {x ∈ Γ ∪ 𝓛 : dist∞(x, Λ ∖ (Γ ∪ 𝓛)) > L/2}` take the
///    free-boundary maximizer `φ ≡ 0` and map it back to spins.
/// 3. Reflect every component of `Λ ∖ 𝔸` whose layer sign disagrees with the
///    contour label, and put the (label-oriented) core state on `𝔸`.
pub fn surgery(
    lattice: &Lattice,
    spins: &SpinConfiguration,
    alpha: &DisorderField,
    params: &ModelParams,
    contour: &Contour,
    layer: &Layer,
) -> Result<SurgeryRecord> {
    require_xy(params)?;
    params.check_shapes(lattice, spins, alpha)?;
    let label = layer.label.sign();
    if layer.failure.is_some() || label == 0 {
        return Err(invalid("layer", "surgery needs a layer with a determined label"));
    }
    let scales = params.scales(lattice.dim())?;
    let ham = Hamiltonian::new(lattice, alpha, params)?;
    let energy_before = ham.total(spins);
    let sites = lattice.num_sites();
    let theta = to_angles(spins)?;
    let ell = scales.ell as f64;

    // Step 1: the layer.
    let mut new_theta = theta.clone();
    let mut converged = true;
    if !layer.sites.is_empty() {
        let region = Region::new(lattice, layer.sites.iter().copied());
        let ren = Renormalization::new(&region, alpha, params.eps, ell)?;
        ren.check_injective()?;
        let local: Vec<f64> = region.sites().iter().map(|&s| theta[s]).collect();
        let phi0 = change_of_variables(&local, &ren.gprime, params.eps)?;
        let res = maximize_renormalized(&region, &phi0, &ren.mass2, AngleBoundary::Given(&theta), 1e-10, 10_000)?;
        converged = res.converged;
        let back = inverse_change_of_variables(&res.phi, &ren.gprime, params.eps)?;
        for (&s, t) in region.sites().iter().zip(back) {
            new_theta[s] = t;
        }
    }

    // Step 2: the core 𝔸.
    let mut support = vec![false; sites];
    contour.support.iter().chain(&layer.sites).for_each(|&s| support[s] = true);
    let complement: Vec<bool> = support.iter().map(|&b| !b).collect();
    let near = if complement.iter().any(|&b| b) {
        lattice.dilate_inf(&complement, scales.big_l / 2)
    } else {
        vec![false; sites]
    };
    let core: Vec<usize> = (0..sites).filter(|&s| support[s] && !near[s]).collect();
    let mut in_core = vec![false; sites];
    core.iter().for_each(|&s| in_core[s] = true);
    let mut eta = Vec::new();
    if !core.is_empty() {
        let region = Region::new(lattice, core.iter().copied());
        let ren = Renormalization::new(&region, alpha, params.eps, ell)?;
        ren.check_injective()?;
        // φ ≡ 0 maximizes both terms of 𝒦 under free boundary conditions.
        let phi = vec![0.0; region.len()];
        eta = inverse_change_of_variables(&phi, &ren.gprime, params.eps)?;
    }

    // Step 3: reflections and gluing.
    let mut layer_sign = vec![0i8; sites];
    for comp in &layer.components {
        comp.sites.iter().for_each(|&s| layer_sign[s] = comp.sign);
    }
    let rest: Vec<usize> = (0..sites).filter(|&s| !in_core[s]).collect();
    let mut tilde = SpinConfiguration::from_angles(&new_theta);
    let mut reflected = 0;
    for comp in connected_components(lattice, &rest) {
        let mut votes: i64 = comp.sites().iter().map(|&s| layer_sign[s] as i64).sum();
        if comp.sites().iter().all(|&s| layer_sign[s] == 0) {
            votes = comp
                .sites()
                .iter()
                .map(|&s| tilde.get(s)[0].signum() as i64)
                .sum();
        }
        if votes.signum() as i8 == -label {
            tilde.reflect_in_place(comp.sites(), 1);
            reflected += 1;
        }
    }
    for (&s, &t) in core.iter().zip(&eta) {
        let t = if label > 0 { t } else { std::f64::consts::PI - t };
        tilde.set(s, &[t.cos(), t.sin()]);
    }

    let energy_after = ham.total(&tilde);
    let aligned = core
        .iter()
        .filter(|&&s| {
            let v = tilde.get(s);
            let psi = v[1].atan2(v[0]).abs();
            psi.min(std::f64::consts::PI - psi) <= scales.delta
        })
        .count();
    Ok(SurgeryRecord {
        sigma_tilde: tilde,
        energy_before,
        energy_after,
        gap: energy_before - energy_after,
        core_size: core.len(),
        aligned_fraction: if core.is_empty() { 1.0 } else { aligned as f64 / core.len() as f64 },
        reflected_components: reflected,
        layer_ascent_converged: converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ScaleConfig;

    fn params() -> ModelParams {
        ModelParams::xy(0.2, 1.0)
    }

    #[test]
    fn uniform_e1_has_no_bad_boxes() {
        let l = Lattice::new(2, 24).unwrap();
        let s = SpinConfiguration::uniform(l.num_sites(), &[1.0, 0.0]).unwrap();
        let reports = detect_bad_boxes(&l, &s, &params()).unwrap();
        assert!(reports.iter().all(|r| !r.is_bad() && r.psi == Some(0.0)));
        let set = build_contours(&l, &reports, &params().scales(2).unwrap()).unwrap();
        assert!(set.contours.is_empty());
    }

    #[test]
    fn uniform_e2_is_all_bad() {
        let l = Lattice::new(2, 24).unwrap();
        let s = SpinConfiguration::uniform(l.num_sites(), &[0.0, 1.0]).unwrap();
        let reports = detect_bad_boxes(&l, &s, &params()).unwrap();
        assert!(reports.iter().all(|r| r.reason == Some(BadReason::AngleDeviation)));
    }

    #[test]
    fn zero_mean_box_has_no_direction() {
        let l = Lattice::new(2, 2).unwrap();
        let s = SpinConfiguration::from_components(2, vec![1.0, 0.0, -1.0, 0.0, -1.0, 0.0, 1.0, 0.0]).unwrap();
        let p = ModelParams {
            scales: ScaleConfig {
                ell: Some(2),
                big_l: Some(12),
                dirichlet_factor: 1000.0,
                ..ScaleConfig::default()
            },
            ..ModelParams::xy(0.05, 1.0)
        };
        let scales = p.scales(2).unwrap();
        let r = classify_boxes(&l, &s, &scales).unwrap();
        assert_eq!(r[0].psi, None);
        assert_eq!(r[0].reason, Some(BadReason::AngleDeviation));
    }

    #[test]
    fn contour_needs_xy() {
        let l = Lattice::new(2, 8).unwrap();
        let s = SpinConfiguration::uniform(64, &[1.0, 0.0, 0.0]).unwrap();
        let p = ModelParams { n: 3, ..params() };
        assert!(detect_bad_boxes(&l, &s, &p).is_err());
    }
}
