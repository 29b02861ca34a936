//! Finite lattices with a metric, and the region algebra built on it.
//!
//! Site ids are zero-based. Hypercube coordinates are one-based and a site id
//! is `sum_i (x_i - 1) L^(i-1)`, so the first coordinate varies fastest.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type SiteId = usize;

/// Comparison slack for distances under a non-integer metric.
pub const DIST_TOL: f64 = 1e-12;

/// Sorted, deduplicated set of sites. Equality is structural.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "Vec<SiteId>", into = "Vec<SiteId>")]
pub struct Region(Vec<SiteId>);

impl From<Vec<SiteId>> for Region {
    fn from(mut v: Vec<SiteId>) -> Self {
        v.sort_unstable();
        v.dedup();
        Region(v)
    }
}

impl From<Region> for Vec<SiteId> {
    fn from(r: Region) -> Self {
        r.0
    }
}

impl FromIterator<SiteId> for Region {
    fn from_iter<I: IntoIterator<Item = SiteId>>(iter: I) -> Self {
        Region::from(iter.into_iter().collect::<Vec<_>>())
    }
}

impl<const N: usize> From<[SiteId; N]> for Region {
    fn from(a: [SiteId; N]) -> Self {
        Region::from(a.to_vec())
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, s) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, "}}")
    }
}

impl Region {
    pub fn empty() -> Self {
        Region(Vec::new())
    }

    pub fn singleton(x: SiteId) -> Self {
        Region(vec![x])
    }

    /// Sites `lo..hi`.
    pub fn range(lo: SiteId, hi: SiteId) -> Self {
        Region((lo..hi).collect())
    }

    pub fn sites(&self) -> &[SiteId] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = SiteId> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, x: SiteId) -> bool {
        self.0.binary_search(&x).is_ok()
    }

    /// Index of `x` in the sorted member list.
    pub fn position(&self, x: SiteId) -> Option<usize> {
        self.0.binary_search(&x).ok()
    }

    pub fn union(&self, other: &Region) -> Region {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() || j < other.0.len() {
            let take_left = j == other.0.len() || (i < self.0.len() && self.0[i] <= other.0[j]);
            let x = if take_left { self.0[i] } else { other.0[j] };
            if take_left {
                i += 1;
                if j < other.0.len() && other.0[j] == x {
                    j += 1;
                }
            } else {
                j += 1;
            }
            out.push(x);
        }
        Region(out)
    }

    pub fn intersection(&self, other: &Region) -> Region {
        Region(self.0.iter().copied().filter(|&x| other.contains(x)).collect())
    }

    pub fn difference(&self, other: &Region) -> Region {
        Region(self.0.iter().copied().filter(|&x| !other.contains(x)).collect())
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.0.iter().all(|&x| other.contains(x))
    }

    pub fn intersects(&self, other: &Region) -> bool {
        let (small, large) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        small.0.iter().any(|&x| large.contains(x))
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        !self.intersects(other)
    }

    pub fn max_site(&self) -> Option<SiteId> {
        self.0.last().copied()
    }

    /// Positions of this region's sites inside `outer`, or `None` if not a subset.
    pub fn positions_in(&self, outer: &Region) -> Option<Vec<usize>> {
        self.0.iter().map(|&x| outer.position(x)).collect()
    }
}

/// Open balls use a strict inequality, closed balls a non-strict one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BallKind {
    Open,
    Closed,
}

/// The axis-aligned box `C(x, y)` intersected with the lattice.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cube {
    pub lower: Vec<i64>,
    pub upper: Vec<i64>,
}

impl Cube {
    pub fn new(lower: Vec<i64>, upper: Vec<i64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch(format!(
                "cube corners of lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        Ok(Cube { lower, upper })
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.iter().zip(&self.upper).any(|(l, u)| l > u)
    }

    pub fn contains(&self, coords: &[i64]) -> bool {
        coords.len() == self.dimension()
            && coords.iter().zip(self.lower.iter().zip(&self.upper)).all(|(c, (l, u))| l <= c && c <= u)
    }

    /// `C(x - r v, y + r v)` without clipping.
    pub fn enlarged(&self, r: i64) -> Cube {
        Cube {
            lower: self.lower.iter().map(|x| x - r).collect(),
            upper: self.upper.iter().map(|y| y + r).collect(),
        }
    }

    /// Enlargement clipped to `[1:edge]` in every direction.
    pub fn enlarged_clipped(&self, r: i64, edge: usize) -> Cube {
        self.enlarged(r).clipped(edge)
    }

    pub fn clipped(&self, edge: usize) -> Cube {
        Cube {
            lower: self.lower.iter().map(|&x| x.max(1)).collect(),
            upper: self.upper.iter().map(|&y| y.min(edge as i64)).collect(),
        }
    }

    /// Componentwise max of lower corners and min of upper corners.
    pub fn intersection(&self, other: &Cube) -> Result<Cube> {
        if self.dimension() != other.dimension() {
            return Err(Error::DimensionMismatch(format!(
                "cubes of dimension {} and {}",
                self.dimension(),
                other.dimension()
            )));
        }
        Ok(Cube {
            lower: self.lower.iter().zip(&other.lower).map(|(a, c)| *a.max(c)).collect(),
            upper: self.upper.iter().zip(&other.upper).map(|(b, d)| *b.min(d)).collect(),
        })
    }
}

/// Enlarged cube and intersection computed together.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CubeOps {
    pub enlarged: Cube,
    pub intersection: Cube,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "geometry", rename_all = "lowercase")]
pub enum LatticeSpec {
    Graph {
        #[serde(default)]
        n_sites: Option<usize>,
        edges: Vec<(SiteId, SiteId)>,
    },
    Hypercube {
        #[serde(rename = "L")]
        edge_length: usize,
        eta: usize,
        /// `None` is the Chebyshev metric.
        #[serde(default)]
        p: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
enum Geometry {
    Graph { edges: Vec<(SiteId, SiteId)>, dist: Vec<u32> },
    Hypercube { edge_length: usize, dimension: usize, p: Option<f64> },
}

/// Finite site set with a metric. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    n_sites: usize,
    geometry: Geometry,
}

impl Lattice {
    /// Simple connected graph; distances are shortest-path edge counts.
    pub fn graph(n_sites: usize, edges: &[(SiteId, SiteId)]) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidLattice("a lattice needs at least one site".into()));
        }
        let mut adjacency = vec![Vec::new(); n_sites];
        let mut canonical = Vec::with_capacity(edges.len());
        for &(x, y) in edges {
            for s in [x, y] {
                if s >= n_sites {
                    return Err(Error::UnknownSite { site: s, n_sites });
                }
            }
            if x == y {
                return Err(Error::InvalidLattice(format!("self-loop at site {x}")));
            }
            let e = (x.min(y), x.max(y));
            if canonical.contains(&e) {
                return Err(Error::InvalidLattice(format!("repeated edge {e:?}")));
            }
            canonical.push(e);
            adjacency[x].push(y);
            adjacency[y].push(x);
        }
        canonical.sort_unstable();
        let mut dist = vec![u32::MAX; n_sites * n_sites];
        let mut queue = VecDeque::new();
        for source in 0..n_sites {
            let row = &mut dist[source * n_sites..(source + 1) * n_sites];
            row[source] = 0;
            queue.push_back(source);
            while let Some(u) = queue.pop_front() {
                for &w in &adjacency[u] {
                    if row[w] == u32::MAX {
                        row[w] = row[u] + 1;
                        queue.push_back(w);
                    }
                }
            }
            if row.contains(&u32::MAX) {
                return Err(Error::Disconnected);
            }
        }
        Ok(Lattice { n_sites, geometry: Geometry::Graph { edges: canonical, dist } })
    }

    /// `[1:L]^eta` with the Chebyshev metric.
    pub fn hypercube(edge_length: usize, dimension: usize) -> Result<Self> {
        Self::build_hypercube(edge_length, dimension, None)
    }

    /// `[1:L]^eta` with the `p`-norm metric, `p >= 1`; infinite `p` is Chebyshev.
    pub fn hypercube_with_metric(edge_length: usize, dimension: usize, p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidLattice(format!("metric exponent {p} is below 1")));
        }
        Self::build_hypercube(edge_length, dimension, if p.is_infinite() { None } else { Some(p) })
    }

    fn build_hypercube(edge_length: usize, dimension: usize, p: Option<f64>) -> Result<Self> {
        if edge_length == 0 || dimension == 0 {
            return Err(Error::InvalidLattice("hypercube edge length and dimension must be positive".into()));
        }
        let n_sites = (edge_length as u64)
            .checked_pow(dimension as u32)
            .filter(|&n| n <= 1 << 24)
            .ok_or_else(|| Error::InvalidLattice("hypercube has too many sites".into()))? as usize;
        Ok(Lattice { n_sites, geometry: Geometry::Hypercube { edge_length, dimension, p } })
    }

    /// Open chain of `n` sites, i.e. the one-dimensional hypercube.
    pub fn chain(n: usize) -> Result<Self> {
        Self::hypercube(n, 1)
    }

    pub fn from_spec(spec: &LatticeSpec) -> Result<Self> {
        match spec {
            LatticeSpec::Graph { n_sites, edges } => {
                let n = n_sites.unwrap_or_else(|| edges.iter().map(|&(x, y)| x.max(y) + 1).max().unwrap_or(1));
                Self::graph(n, edges)
            }
            LatticeSpec::Hypercube { edge_length, eta, p } => match p {
                None => Self::hypercube(*edge_length, *eta),
                Some(p) => Self::hypercube_with_metric(*edge_length, *eta, *p),
            },
        }
    }

    pub fn spec(&self) -> LatticeSpec {
        match &self.geometry {
            Geometry::Graph { edges, .. } => LatticeSpec::Graph { n_sites: Some(self.n_sites), edges: edges.clone() },
            Geometry::Hypercube { edge_length, dimension, p } => {
                LatticeSpec::Hypercube { edge_length: *edge_length, eta: *dimension, p: *p }
            }
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn all_sites(&self) -> Region {
        Region::range(0, self.n_sites)
    }

    pub fn is_hypercube(&self) -> bool {
        matches!(self.geometry, Geometry::Hypercube { .. })
    }

    /// True for graph metrics and the Chebyshev hypercube metric.
    pub fn has_integer_metric(&self) -> bool {
        !matches!(self.geometry, Geometry::Hypercube { p: Some(_), .. })
    }

    /// Hypercube geometries other than Chebyshev are supported but do not make
    /// the cube algebra tight.
    pub fn is_chebyshev_hypercube(&self) -> bool {
        matches!(self.geometry, Geometry::Hypercube { p: None, .. })
    }

    /// `(L, eta)` for a hypercube.
    pub fn hypercube_shape(&self) -> Option<(usize, usize)> {
        match self.geometry {
            Geometry::Hypercube { edge_length, dimension, .. } => Some((edge_length, dimension)),
            Geometry::Graph { .. } => None,
        }
    }

    /// Spatial dimension: `eta` for hypercubes, 1 for graphs.
    pub fn dimension(&self) -> usize {
        self.hypercube_shape().map_or(1, |(_, eta)| eta)
    }

    /// Graph edges for graph lattices, nearest-neighbour pairs for hypercubes.
    pub fn edges(&self) -> Vec<(SiteId, SiteId)> {
        match &self.geometry {
            Geometry::Graph { edges, .. } => edges.clone(),
            Geometry::Hypercube { edge_length, dimension, .. } => {
                let mut out = Vec::new();
                let mut stride = 1;
                for _ in 0..*dimension {
                    for x in 0..self.n_sites {
                        if (x / stride) % edge_length + 1 < *edge_length {
                            out.push((x, x + stride));
                        }
                    }
                    stride *= edge_length;
                }
                out.sort_unstable();
                out
            }
        }
    }

    pub fn check_site(&self, x: SiteId) -> Result<()> {
        if x < self.n_sites {
            Ok(())
        } else {
            Err(Error::UnknownSite { site: x, n_sites: self.n_sites })
        }
    }

    pub fn check_region(&self, region: &Region) -> Result<()> {
        match region.max_site() {
            Some(x) => self.check_site(x),
            None => Ok(()),
        }
    }

    /// One-based coordinates of a hypercube site.
    pub fn coords(&self, x: SiteId) -> Result<Vec<i64>> {
        self.check_site(x)?;
        match self.geometry {
            Geometry::Hypercube { edge_length, dimension, .. } => Ok(coords_of(x, edge_length, dimension)),
            Geometry::Graph { .. } => Err(Error::InvalidLattice("graph lattices have no coordinates".into())),
        }
    }

    pub fn site_at(&self, coords: &[i64]) -> Result<SiteId> {
        let (edge, dim) = self
            .hypercube_shape()
            .ok_or_else(|| Error::InvalidLattice("graph lattices have no coordinates".into()))?;
        if coords.len() != dim {
            return Err(Error::DimensionMismatch(format!("{} coordinates for dimension {dim}", coords.len())));
        }
        let mut id = 0usize;
        for &c in coords.iter().rev() {
            if c < 1 || c > edge as i64 {
                return Err(Error::InvalidLattice(format!("coordinate {c} outside [1:{edge}]")));
            }
            id = id * edge + (c - 1) as usize;
        }
        Ok(id)
    }

    /// Distance between two valid sites; panics on out-of-range ids.
    pub fn dist(&self, x: SiteId, y: SiteId) -> f64 {
        match &self.geometry {
            Geometry::Graph { dist, .. } => dist[x * self.n_sites + y] as f64,
            Geometry::Hypercube { edge_length, dimension, p } => {
                assert!(x < self.n_sites && y < self.n_sites, "site out of range");
                let (mut a, mut b) = (x, y);
                match p {
                    None => {
                        let mut best = 0usize;
                        for _ in 0..*dimension {
                            best = best.max((a % edge_length).abs_diff(b % edge_length));
                            a /= edge_length;
                            b /= edge_length;
                        }
                        best as f64
                    }
                    Some(p) => {
                        let mut acc = 0.0;
                        for _ in 0..*dimension {
                            acc += ((a % edge_length).abs_diff(b % edge_length) as f64).powf(*p);
                            a /= edge_length;
                            b /= edge_length;
                        }
                        acc.powf(1.0 / p)
                    }
                }
            }
        }
    }

    pub fn distance(&self, x: SiteId, y: SiteId) -> Result<f64> {
        self.check_site(x)?;
        self.check_site(y)?;
        Ok(self.dist(x, y))
    }

    /// `min_{y in Y} d(x, y)`, infinite for empty `Y`.
    pub fn dist_to_region(&self, x: SiteId, region: &Region) -> f64 {
        region.iter().map(|y| self.dist(x, y)).fold(f64::INFINITY, f64::min)
    }

    pub fn set_distance(&self, a: &Region, b: &Region) -> Result<f64> {
        self.require_nonempty(a, "set distance")?;
        self.require_nonempty(b, "set distance")?;
        Ok(a.iter().map(|x| self.dist_to_region(x, b)).fold(f64::INFINITY, f64::min))
    }

    pub fn diameter(&self, a: &Region) -> Result<f64> {
        self.require_nonempty(a, "diameter")?;
        let s = a.sites();
        let mut best = 0.0f64;
        for (i, &x) in s.iter().enumerate() {
            for &y in &s[i + 1..] {
                best = best.max(self.dist(x, y));
            }
        }
        Ok(best)
    }

    /// `d(Y, Λ \ R)`, infinite when `R` covers the lattice.
    pub fn distance_to_complement(&self, y: &Region, r: &Region) -> Result<f64> {
        self.require_nonempty(y, "distance to complement")?;
        self.check_region(r)?;
        let outside = self.all_sites().difference(r);
        if outside.is_empty() {
            return Ok(f64::INFINITY);
        }
        self.set_distance(y, &outside)
    }

    fn require_nonempty(&self, a: &Region, what: &str) -> Result<()> {
        if a.is_empty() {
            return Err(Error::EmptyRegion(what.to_string()));
        }
        self.check_region(a)
    }

    pub fn ball(&self, y: &Region, r: f64, kind: BallKind) -> Result<Region> {
        self.check_region(y)?;
        if r.is_nan() || r < 0.0 {
            return Err(Error::InvalidParameter(format!("ball radius {r} is negative")));
        }
        Ok((0..self.n_sites)
            .filter(|&x| {
                let d = self.dist_to_region(x, y);
                match kind {
                    BallKind::Open => d < r - DIST_TOL,
                    BallKind::Closed => d <= r + DIST_TOL,
                }
            })
            .collect())
    }

    pub fn open_ball(&self, y: &Region, r: f64) -> Result<Region> {
        self.ball(y, r, BallKind::Open)
    }

    pub fn closed_ball(&self, y: &Region, r: f64) -> Result<Region> {
        self.ball(y, r, BallKind::Closed)
    }

    /// Enlargement clipped to the lattice, and the componentwise intersection.
    pub fn cube_ops(&self, cube: &Cube, other: &Cube, r: i64) -> Result<CubeOps> {
        let (edge, dim) = self
            .hypercube_shape()
            .ok_or_else(|| Error::InvalidLattice("cube operations need a hypercube".into()))?;
        if r < 0 {
            return Err(Error::InvalidParameter(format!("cube enlargement {r} is negative")));
        }
        if cube.dimension() != dim {
            return Err(Error::DimensionMismatch(format!("cube of dimension {} on a {dim}-cube", cube.dimension())));
        }
        Ok(CubeOps { enlarged: cube.enlarged_clipped(r, edge), intersection: cube.intersection(other)? })
    }

    /// Sites inside a cube.
    pub fn cube_region(&self, cube: &Cube) -> Result<Region> {
        let (edge, dim) = self
            .hypercube_shape()
            .ok_or_else(|| Error::InvalidLattice("cube regions need a hypercube".into()))?;
        if cube.dimension() != dim {
            return Err(Error::DimensionMismatch(format!("cube of dimension {} on a {dim}-cube", cube.dimension())));
        }
        Ok((0..self.n_sites).filter(|&x| cube.contains(&coords_of(x, edge, dim))).collect())
    }
}

fn coords_of(mut x: usize, edge: usize, dim: usize) -> Vec<i64> {
    (0..dim)
        .map(|_| {
            let c = (x % edge) as i64 + 1;
            x /= edge;
            c
        })
        .collect()
}

/// Union of the supports that intersect `r`.
pub fn extension<'a>(supports: impl IntoIterator<Item = &'a Region>, r: &Region) -> Region {
    let mut sites = Vec::new();
    for z in supports {
        if z.intersects(r) {
            sites.extend_from_slice(z.sites());
        }
    }
    Region::from(sites)
}
