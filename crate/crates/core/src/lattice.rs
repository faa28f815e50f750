//! Finite hypercubic lattices `Λ_N = {-N/2, …, N/2-1}^d`.
//!
//! Sites are stored row-major over the shifted coordinates `{0, …, N-1}^d`
//! (axis 0 most significant). "Physical" coordinates subtract `N/2`, so the
//! origin of `Λ_N` is the site with shifted coordinates `(N/2, …, N/2)`.
//! Small rectangular lattices (used for exact checks) follow the same rules
//! with `⌊N_a/2⌋` per axis.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Sentinel for an absent neighbor or a site outside a region.
pub const NO_SITE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct Lattice {
    dim: usize,
    extents: Vec<usize>,
    periodic: bool,
    strides: Vec<usize>,
    /// `2 * dim` entries per site, ordered `[axis0 -, axis0 +, axis1 -, …]`.
    neighbors: Vec<u32>,
    edges: Vec<(u32, u32)>,
    on_boundary: Vec<bool>,
    boundary: Vec<usize>,
}

impl Lattice {
    /// Open (free) boundary lattice, the default geometry.
    pub fn new(dim: usize, side: usize) -> Result<Self> {
        Self::check_cubic(dim, side)?;
        Self::build(vec![side; dim], false)
    }

    /// Open-boundary box with its own extent per axis, each at least 1.
    pub fn rectangle(extents: &[usize]) -> Result<Self> {
        if extents.len() < 2 || extents.contains(&0) {
            return Err(Error::InvalidLattice(format!(
                "need at least two positive extents, got {extents:?}"
            )));
        }
        Self::build(extents.to_vec(), false)
    }

    /// Torus variant. Has no boundary sites; requires `N >= 4` so that the two
    /// neighbors along an axis are distinct.
    pub fn periodic(dim: usize, side: usize) -> Result<Self> {
        if side < 4 {
            return Err(Error::InvalidLattice(format!(
                "periodic lattices need N >= 4, got {side}"
            )));
        }
        Self::check_cubic(dim, side)?;
        Self::build(vec![side; dim], true)
    }

    fn check_cubic(dim: usize, side: usize) -> Result<()> {
        if dim < 2 {
            return Err(Error::InvalidLattice(format!("dimension must be >= 2, got {dim}")));
        }
        if side < 2 || side % 2 != 0 {
            return Err(Error::InvalidLattice(format!(
                "side length must be an even integer >= 2, got {side}"
            )));
        }
        Ok(())
    }

    fn build(extents: Vec<usize>, periodic: bool) -> Result<Self> {
        let dim = extents.len();
        let num_sites = extents
            .iter()
            .try_fold(1usize, |acc, &e| acc.checked_mul(e))
            .filter(|&n| n < NO_SITE as usize)
            .ok_or_else(|| Error::InvalidLattice(format!("{extents:?} has too many sites")))?;

        let mut strides = vec![1usize; dim];
        for a in (0..dim.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * extents[a + 1];
        }

        let mut neighbors = vec![NO_SITE; num_sites * 2 * dim];
        let mut edges = Vec::with_capacity(num_sites * dim);
        let mut on_boundary = vec![false; num_sites];
        for site in 0..num_sites {
            for (a, &stride) in strides.iter().enumerate() {
                let side = extents[a];
                let c = (site / stride) % side;
                if c == 0 || c == side - 1 {
                    on_boundary[site] = !periodic;
                }
                let minus = if c > 0 {
                    Some(site - stride)
                } else if periodic {
                    Some(site + (side - 1) * stride)
                } else {
                    None
                };
                let plus = if c + 1 < side {
                    Some(site + stride)
                } else if periodic {
                    Some(site - (side - 1) * stride)
                } else {
                    None
                };
                if let Some(m) = minus {
                    neighbors[site * 2 * dim + 2 * a] = m as u32;
                }
                if let Some(p) = plus {
                    neighbors[site * 2 * dim + 2 * a + 1] = p as u32;
                    edges.push((site as u32, p as u32));
                }
            }
        }
        let boundary = (0..num_sites).filter(|&s| on_boundary[s]).collect();
        Ok(Self {
            dim,
            extents,
            periodic,
            strides,
            neighbors,
            edges,
            on_boundary,
            boundary,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `N`; the largest extent for a rectangular lattice.
    pub fn side(&self) -> usize {
        self.extents.iter().copied().max().unwrap_or(0)
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn is_cubic(&self) -> bool {
        self.extents.iter().all(|&e| e == self.extents[0])
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn num_sites(&self) -> usize {
        self.on_boundary.len()
    }

    /// Number of nearest-neighbor slots of a bulk site, `2d`.
    pub fn coordination(&self) -> usize {
        2 * self.dim
    }

    /// Unordered nearest-neighbor pairs, each listed once.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// `∂Λ_N`: sites with fewer than `2d` neighbors (empty when periodic).
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary(&self, site: usize) -> bool {
        self.on_boundary[site]
    }

    /// Neighbor slots of `site`, `NO_SITE` where the lattice ends.
    pub fn neighbor_slots(&self, site: usize) -> &[u32] {
        let c = 2 * self.dim;
        &self.neighbors[site * c..(site + 1) * c]
    }

    pub fn neighbors(&self, site: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbor_slots(site)
            .iter()
            .filter(|&&n| n != NO_SITE)
            .map(|&n| n as usize)
    }

    pub fn degree(&self, site: usize) -> usize {
        self.neighbor_slots(site).iter().filter(|&&n| n != NO_SITE).count()
    }

    /// Neighbors of `site` in `Z^d` that fall outside `Λ_N`.
    pub fn missing_neighbors(&self, site: usize) -> usize {
        2 * self.dim - self.degree(site)
    }

    /// Shifted coordinates in `{0, …, N-1}^d`.
    pub fn coords(&self, site: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.extents)
            .map(|(&s, &e)| (site / s) % e)
            .collect()
    }

    pub fn physical_coords(&self, site: usize) -> Vec<i64> {
        self.coords(site)
            .into_iter()
            .zip(&self.extents)
            .map(|(c, &e)| c as i64 - (e / 2) as i64)
            .collect()
    }

    pub fn site_at(&self, coords: &[usize]) -> Option<usize> {
        if coords.len() != self.dim || coords.iter().zip(&self.extents).any(|(&c, &e)| c >= e) {
            return None;
        }
        Some(coords.iter().zip(&self.strides).map(|(c, s)| c * s).sum())
    }

    pub fn site_at_physical(&self, coords: &[i64]) -> Option<usize> {
        let shifted: Option<Vec<usize>> = coords
            .iter()
            .zip(&self.extents)
            .map(|(&c, &e)| usize::try_from(c + (e / 2) as i64).ok())
            .collect();
        self.site_at(&shifted?)
    }

    /// The site `0 ∈ Λ_N`.
    pub fn origin(&self) -> usize {
        let mid: Vec<usize> = self.extents.iter().map(|e| e / 2).collect();
        self.site_at(&mid)
            .expect("origin lies inside every lattice")
    }

    /// Indicator of all sites within ∞-distance `radius` of the marked set.
    ///
    /// Uses open-boundary distances even on a torus.
    pub fn dilate_inf(&self, marked: &[bool], radius: usize) -> Vec<bool> {
        let mut cur = marked.to_vec();
        if radius == 0 {
            return cur;
        }
        for (&stride, &side) in self.strides.iter().zip(&self.extents) {
            let mut next = vec![false; cur.len()];
            for (site, flag) in next.iter_mut().enumerate() {
                let c = (site / stride) % side;
                let lo = c.saturating_sub(radius);
                let hi = (c + radius).min(side - 1);
                let base = site - c * stride;
                *flag = (lo..=hi).any(|k| cur[base + k * stride]);
            }
            cur = next;
        }
        cur
    }
}

/// Axis-aligned box of the lattice, clipped to `Λ_N`.
///
/// `lo`/`hi` are shifted coordinates with `hi` exclusive; `anchor` is the grid
/// point the box was cut from and may lie outside the lattice for clipped
/// boxes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize)]
pub struct LatticeBox {
    pub anchor: Vec<i64>,
    pub side: usize,
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

impl LatticeBox {
    pub fn len(&self) -> usize {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains_coords(&self, coords: &[usize]) -> bool {
        coords
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(c, (l, h))| l <= c && c < h)
    }

    pub fn sites(&self, lattice: &Lattice) -> Vec<usize> {
        let dim = self.lo.len();
        let mut out = Vec::with_capacity(self.len());
        if self.is_empty() {
            return out;
        }
        let mut c = self.lo.clone();
        loop {
            out.push(lattice.site_at(&c).expect("box clipped to the lattice"));
            let mut a = dim;
            loop {
                if a == 0 {
                    return out;
                }
                a -= 1;
                c[a] += 1;
                if c[a] < self.hi[a] {
                    break;
                }
                c[a] = self.lo[a];
            }
        }
    }

    /// ∞-metric distance between the site sets of two boxes.
    pub fn inf_distance(&self, other: &LatticeBox) -> usize {
        (0..self.lo.len())
            .map(|a| {
                if self.hi[a] <= other.lo[a] {
                    other.lo[a] + 1 - self.hi[a]
                } else if other.hi[a] <= self.lo[a] {
                    self.lo[a] + 1 - other.hi[a]
                } else {
                    0
                }
            })
            .max()
            .unwrap_or(0)
    }

    /// Two boxes share a (d-1)-face, so their union is nearest-neighbor connected.
    pub fn is_adjacent(&self, other: &LatticeBox) -> bool {
        let mut touching = 0;
        for a in 0..self.lo.len() {
            let overlap = self.lo[a] < other.hi[a] && other.lo[a] < self.hi[a];
            if overlap {
                continue;
            }
            if self.hi[a] == other.lo[a] || other.hi[a] == self.lo[a] {
                touching += 1;
            } else {
                return false;
            }
        }
        touching == 1
    }
}

/// Partition `Λ_N` into boxes anchored on `offset + side·Z^d`, clipping at the
/// lattice edges. `offset` is given in shifted coordinates.
pub fn tile_boxes(lattice: &Lattice, side: usize, offset: &[usize]) -> Result<Vec<LatticeBox>> {
    let largest = lattice.side();
    if side == 0 || side > largest {
        return Err(crate::error::invalid("side", format!("need 1 <= side <= {largest}, got {side}")));
    }
    if offset.len() != lattice.dim() {
        return Err(Error::DimensionMismatch(format!(
            "offset has {} coordinates, lattice has dimension {}",
            offset.len(),
            lattice.dim()
        )));
    }
    // Per-axis list of (anchor, lo, hi).
    let axes: Vec<Vec<(i64, usize, usize)>> = offset
        .iter()
        .zip(lattice.extents())
        .map(|(&off, &n)| {
            let off = (off % side) as i64;
            let first = if off == 0 { 0 } else { off - side as i64 };
            let mut cuts = Vec::new();
            let mut anchor = first;
            while anchor < n as i64 {
                let lo = anchor.max(0) as usize;
                let hi = ((anchor + side as i64) as usize).min(n);
                cuts.push((anchor, lo, hi));
                anchor += side as i64;
            }
            cuts
        })
        .collect();

    let mut boxes = Vec::new();
    let mut idx = vec![0usize; lattice.dim()];
    loop {
        let mut b = LatticeBox {
            anchor: Vec::with_capacity(idx.len()),
            side,
            lo: Vec::with_capacity(idx.len()),
            hi: Vec::with_capacity(idx.len()),
        };
        for (a, &i) in idx.iter().enumerate() {
            let (anchor, lo, hi) = axes[a][i];
            b.anchor.push(anchor);
            b.lo.push(lo);
            b.hi.push(hi);
        }
        boxes.push(b);
        let mut a = idx.len();
        loop {
            if a == 0 {
                return Ok(boxes);
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < axes[a].len() {
                break;
            }
            idx[a] = 0;
        }
    }
}

/// A subset of the lattice with its induced graph.
#[derive(Debug, Clone)]
pub struct Region {
    sites: Vec<usize>,
    local: Vec<u32>,
    coordination: usize,
    nbr_offsets: Vec<usize>,
    nbr_list: Vec<u32>,
    internal_edges: Vec<(u32, u32)>,
    /// (local index inside, global site outside) for every lattice edge leaving the region.
    crossing: Vec<(u32, usize)>,
    external_boundary: Vec<usize>,
    connected: bool,
}

impl Region {
    /// Builds the region induced by `sites` (deduplicated and sorted).
    pub fn new(lattice: &Lattice, sites: impl IntoIterator<Item = usize>) -> Self {
        let mut sites: Vec<usize> = sites.into_iter().collect();
        sites.sort_unstable();
        sites.dedup();
        let mut local = vec![NO_SITE; lattice.num_sites()];
        for (i, &s) in sites.iter().enumerate() {
            local[s] = i as u32;
        }
        let mut nbr_offsets = Vec::with_capacity(sites.len() + 1);
        let mut nbr_list = Vec::new();
        let mut internal_edges = Vec::new();
        let mut crossing = Vec::new();
        let mut external = Vec::new();
        nbr_offsets.push(0);
        for (i, &s) in sites.iter().enumerate() {
            for y in lattice.neighbors(s) {
                let j = local[y];
                if j == NO_SITE {
                    crossing.push((i as u32, y));
                    external.push(y);
                } else {
                    nbr_list.push(j);
                    if (i as u32) < j {
                        internal_edges.push((i as u32, j));
                    }
                }
            }
            nbr_offsets.push(nbr_list.len());
        }
        external.sort_unstable();
        external.dedup();
        let mut region = Self {
            sites,
            local,
            coordination: lattice.coordination(),
            nbr_offsets,
            nbr_list,
            internal_edges,
            crossing,
            external_boundary: external,
            connected: false,
        };
        region.connected = region.local_components().len() <= 1;
        region
    }

    pub fn whole(lattice: &Lattice) -> Self {
        Self::new(lattice, 0..lattice.num_sites())
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Global site indices, sorted.
    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn contains(&self, site: usize) -> bool {
        self.local.get(site).is_some_and(|&l| l != NO_SITE)
    }

    pub fn local_index(&self, site: usize) -> Option<usize> {
        self.local
            .get(site)
            .filter(|&&l| l != NO_SITE)
            .map(|&l| l as usize)
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn coordination(&self) -> usize {
        self.coordination
    }

    /// Local indices of in-region neighbors of local site `i`.
    pub fn local_neighbors(&self, i: usize) -> &[u32] {
        &self.nbr_list[self.nbr_offsets[i]..self.nbr_offsets[i + 1]]
    }

    pub fn internal_edges(&self) -> &[(u32, u32)] {
        &self.internal_edges
    }

    pub fn crossing_edges(&self) -> &[(u32, usize)] {
        &self.crossing
    }

    /// Sites outside the region adjacent to it.
    pub fn external_boundary(&self) -> &[usize] {
        &self.external_boundary
    }

    /// Connected components as lists of local indices, each sorted, ordered by
    /// their smallest member.
    pub fn local_components(&self) -> Vec<Vec<usize>> {
        let n = self.sites.len();
        let mut label = vec![usize::MAX; n];
        let mut comps = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut members = vec![start];
            label[start] = id;
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                for &j in self.local_neighbors(i) {
                    let j = j as usize;
                    if label[j] == usize::MAX {
                        label[j] = id;
                        members.push(j);
                        queue.push_back(j);
                    }
                }
            }
            members.sort_unstable();
            comps.push(members);
        }
        comps
    }
}

/// Splits a site set into maximal nearest-neighbor-connected regions, ordered
/// by smallest site index.
pub fn connected_components(lattice: &Lattice, sites: &[usize]) -> Vec<Region> {
    let whole = Region::new(lattice, sites.iter().copied());
    whole
        .local_components()
        .into_iter()
        .map(|comp| Region::new(lattice, comp.into_iter().map(|i| whole.sites[i])))
        .collect()
}
