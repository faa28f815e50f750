//! Plain-text snapshots of spin configurations and disorder fields.
//!
//! ```text
//! # rfo-snapshot v1
//! # kind=spins
//! # extents=4,4
//! # periodic=false
//! # components=2
//! site,c0,c1
//! 0,1,0
//! …
//! ```
//!
//! Values are written with the shortest representation that parses back to
//! the same `f64`, so a write/read cycle is bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::fields::{DisorderField, DisorderSeed, Distribution, SpinConfiguration};
use crate::lattice::Lattice;

const MAGIC: &str = "# rfo-snapshot v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotKind {
    Spins,
    Field,
}

impl SnapshotKind {
    fn tag(self) -> &'static str {
        match self {
            SnapshotKind::Spins => "spins",
            SnapshotKind::Field => "field",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub kind: SnapshotKind,
    pub extents: Vec<usize>,
    pub periodic: bool,
    pub components: usize,
    pub values: Vec<f64>,
    /// Extra `key=value` header lines.
    pub meta: BTreeMap<String, String>,
}

impl Snapshot {
    pub fn of_spins(lattice: &Lattice, spins: &SpinConfiguration) -> Result<Self> {
        check_sites(lattice, spins.num_sites())?;
        Ok(Self {
            kind: SnapshotKind::Spins,
            extents: lattice.extents().to_vec(),
            periodic: lattice.is_periodic(),
            components: spins.n(),
            values: spins.as_slice().to_vec(),
            meta: BTreeMap::new(),
        })
    }

    pub fn of_field(lattice: &Lattice, alpha: &DisorderField) -> Result<Self> {
        check_sites(lattice, alpha.num_sites())?;
        let mut meta = BTreeMap::new();
        meta.insert("distribution".into(), alpha.distribution().to_string());
        if let Distribution::SubGaussianBounded { bound } = alpha.distribution() {
            meta.insert("bound".into(), bound.to_string());
        }
        if let Some(seed) = alpha.seed() {
            meta.insert("master".into(), seed.master.to_string());
            meta.insert("realization".into(), seed.realization.to_string());
        }
        Ok(Self {
            kind: SnapshotKind::Field,
            extents: lattice.extents().to_vec(),
            periodic: lattice.is_periodic(),
            components: alpha.k(),
            values: alpha.values().to_vec(),
            meta,
        })
    }

    pub fn lattice(&self) -> Result<Lattice> {
        if self.periodic {
            Lattice::periodic(self.extents.len(), self.extents[0])
        } else {
            Lattice::rectangle(&self.extents)
        }
    }

    pub fn into_spins(self) -> Result<SpinConfiguration> {
        if self.kind != SnapshotKind::Spins {
            return Err(Error::Snapshot("snapshot holds a field, not spins".into()));
        }
        if self.components < 2 {
            return Err(Error::Snapshot("spins need at least 2 components".into()));
        }
        let spins = SpinConfiguration::from_raw(self.components, self.values);
        if spins.max_norm_error() > 1e-9 {
            return Err(Error::Snapshot("spin vectors are not unit length".into()));
        }
        Ok(spins)
    }

    pub fn into_field(self) -> Result<DisorderField> {
        if self.kind != SnapshotKind::Field {
            return Err(Error::Snapshot("snapshot holds spins, not a field".into()));
        }
        let dist = match self.meta.get("distribution") {
            Some(tag) => {
                let mut d: Distribution = tag.parse()?;
                if let (Distribution::SubGaussianBounded { bound }, Some(b)) = (&mut d, self.meta.get("bound")) {
                    *bound = parse_num(b, "bound")?;
                }
                d
            }
            None => Distribution::StandardGaussian,
        };
        let seed = match (self.meta.get("master"), self.meta.get("realization")) {
            (Some(m), Some(r)) => Some(DisorderSeed {
                master: parse_num(m, "master")?,
                realization: parse_num(r, "realization")?,
            }),
            _ => None,
        };
        Ok(DisorderField::from_values(self.components, self.values)?.with_provenance(seed, dist))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "# kind={}", self.kind.tag());
        let extents: Vec<String> = self.extents.iter().map(|e| e.to_string()).collect();
        let _ = writeln!(s, "# extents={}", extents.join(","));
        let _ = writeln!(s, "# periodic={}", self.periodic);
        let _ = writeln!(s, "# components={}", self.components);
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}={v}");
        }
        s.push_str("site");
        for c in 0..self.components {
            let _ = write!(s, ",c{c}");
        }
        s.push('\n');
        for (i, row) in self.values.chunks_exact(self.components).enumerate() {
            let _ = write!(s, "{i}");
            for v in row {
                let _ = write!(s, ",{v:?}");
            }
            s.push('\n');
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines.next().transpose()?.unwrap_or_default();
        if first.trim_end() != MAGIC {
            return Err(Error::Snapshot(format!("missing header line {MAGIC:?}")));
        }
        let mut header = BTreeMap::new();
        let mut columns = None;
        for line in lines.by_ref() {
            let line = line?;
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| Error::Snapshot(format!("bad header line {line:?}")))?;
                header.insert(k.trim().to_string(), v.trim().to_string());
            } else {
                columns = Some(line);
                break;
            }
        }
        let mut take = |key: &str| {
            header
                .remove(key)
                .ok_or_else(|| Error::Snapshot(format!("header is missing {key}")))
        };
        let kind = match take("kind")?.as_str() {
            "spins" => SnapshotKind::Spins,
            "field" => SnapshotKind::Field,
            other => return Err(Error::Snapshot(format!("unknown kind {other:?}"))),
        };
        let extents = take("extents")?
            .split(',')
            .map(|e| parse_num(e, "extents"))
            .collect::<Result<Vec<usize>>>()?;
        let periodic = parse_num(&take("periodic")?, "periodic")?;
        let components: usize = parse_num(&take("components")?, "components")?;
        if components == 0 {
            return Err(Error::Snapshot("components must be positive".into()));
        }
        let columns = columns.ok_or_else(|| Error::Snapshot("missing column line".into()))?;
        if columns.split(',').count() != components + 1 {
            return Err(Error::Snapshot("column count does not match components".into()));
        }
        let mut snap = Self {
            kind,
            extents,
            periodic,
            components,
            values: Vec::new(),
            meta: header,
        };
        let expected = snap.lattice()?.num_sites();
        snap.values.reserve(expected * components);
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut cells = line.split(',');
            let site: usize = parse_num(cells.next().unwrap_or(""), "site")?;
            if site != row {
                return Err(Error::Snapshot(format!("row {row} is labelled site {site}")));
            }
            let before = snap.values.len();
            for cell in cells {
                snap.values.push(parse_num(cell, "value")?);
            }
            if snap.values.len() - before != components {
                return Err(Error::Snapshot(format!("row {row} has the wrong number of values")));
            }
        }
        if snap.values.len() != expected * components {
            return Err(Error::Snapshot(format!(
                "expected {expected} sites, found {}",
                snap.values.len() / components
            )));
        }
        Ok(snap)
    }
}

fn check_sites(lattice: &Lattice, sites: usize) -> Result<()> {
    if sites != lattice.num_sites() {
        return Err(Error::DimensionMismatch(format!(
            "{sites} sites on a lattice of {}",
            lattice.num_sites()
        )));
    }
    Ok(())
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Snapshot(format!("cannot parse {what} from {s:?}")))
}
