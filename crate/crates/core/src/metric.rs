//! Finite metric spaces, ball queries and nested maximal separations.
//!
//! A [`SampledMetricSpace`] is a finite point set with either coordinates
//! under an `l1`/`l2`/`linf` norm, or an explicit distance matrix. Points
//! are addressed by [`PointId`], their index in input order.
//!
//! Separations are built by a greedy scan in index order, so the result is
//! deterministic for a fixed point ordering.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointId(pub usize);

impl PointId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    L1,
    L2,
    Linf,
    Explicit,
}

/// Finite metric space `(M, d)`.
#[derive(Clone, Debug)]
pub struct SampledMetricSpace {
    kind: MetricKind,
    coords: Option<Vec<Vec<f64>>>,
    distances: Option<Vec<Vec<f64>>>,
    len: usize,
}

/// JSON form of a space: `{"metric": "l2", "points": [[..], ..]}` or
/// `{"metric": "explicit", "distances": [[..], ..]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDocument {
    pub metric: MetricKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<Vec<f64>>>,
}

impl SampledMetricSpace {
    /// Points in a normed coordinate space. Duplicate points are rejected
    /// since they would violate `d(a, b) > 0` for distinct ids.
    pub fn from_coords(kind: MetricKind, coords: Vec<Vec<f64>>) -> Result<Self> {
        if kind == MetricKind::Explicit {
            return Err(Error::Config("explicit metric requires a distance matrix".into()));
        }
        Self::from_parts(kind, Some(coords), None)
    }

    /// Convenience for one-dimensional samples under `|x - y|`.
    pub fn from_line(xs: &[f64]) -> Result<Self> {
        Self::from_coords(MetricKind::L2, xs.iter().map(|&x| vec![x]).collect())
    }

    /// Explicit symmetric distance matrix. All metric axioms, including the
    /// triangle inequality on every triple, are checked.
    pub fn from_distances(distances: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_parts(MetricKind::Explicit, None, Some(distances))
    }

    pub fn from_parts(
        kind: MetricKind,
        coords: Option<Vec<Vec<f64>>>,
        distances: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let len = match (kind, &coords, &distances) {
            (MetricKind::Explicit, _, Some(m)) => m.len(),
            (MetricKind::Explicit, _, None) => {
                return Err(Error::Config("explicit metric requires a distance matrix".into()))
            }
            (_, Some(c), _) => c.len(),
            (_, None, _) => {
                return Err(Error::Config(format!(
                    "metric {kind:?} requires point coordinates"
                )))
            }
        };
        if len == 0 {
            return Err(Error::Config("a metric space needs at least one point".into()));
        }
        if let Some(c) = &coords {
            if c.len() != len {
                return Err(Error::Config(format!(
                    "{} coordinate rows for {len} points",
                    c.len()
                )));
            }
            let dim = c[0].len();
            if dim == 0 {
                return Err(Error::Config("points must have at least one coordinate".into()));
            }
            for row in c {
                if row.len() != dim {
                    return Err(Error::Shape {
                        expected: dim,
                        found: row.len(),
                    });
                }
                if row.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Config("non-finite coordinate".into()));
                }
            }
        }
        let space = SampledMetricSpace {
            kind,
            coords,
            distances,
            len,
        };
        if kind == MetricKind::Explicit {
            space.validate_matrix()?;
        } else {
            space.validate_distinct()?;
        }
        Ok(space)
    }

    fn validate_matrix(&self) -> Result<()> {
        let m = self.distances.as_ref().expect("explicit metric");
        for (i, row) in m.iter().enumerate() {
            if row.len() != self.len {
                return Err(Error::Shape {
                    expected: self.len,
                    found: row.len(),
                });
            }
            if row[i] != 0.0 {
                return Err(Error::Config(format!("d({i},{i}) = {} is not zero", row[i])));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Config(format!("d({i},{j}) = {v} is not a distance")));
                }
                if i != j && v == 0.0 {
                    return Err(Error::Config(format!(
                        "distinct points {i} and {j} at distance 0"
                    )));
                }
                if m[j][i] != v {
                    return Err(Error::Config(format!(
                        "distance matrix not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        if let Some((a, b, c)) = self.triangle_violation() {
            return Err(Error::Config(format!(
                "triangle inequality fails on ({a}, {b}, {c})"
            )));
        }
        Ok(())
    }

    fn validate_distinct(&self) -> Result<()> {
        let dup = par::map_range(self.len, |i| {
            (i + 1..self.len).find(|&j| self.d(i, j) == 0.0).map(|j| (i, j))
        });
        if let Some((i, j)) = dup.into_iter().flatten().next() {
            return Err(Error::Config(format!("points {i} and {j} coincide")));
        }
        Ok(())
    }

    /// First triple `(a, b, c)` with `d(a, c) > d(a, b) + d(b, c)`, scanning
    /// all triples. A relative slack of a few ulps absorbs rounding in
    /// norm-induced distances.
    pub fn triangle_violation(&self) -> Option<(PointId, PointId, PointId)> {
        let n = self.len;
        let found = par::map_range(n, |a| {
            for b in 0..n {
                for c in 0..n {
                    let lhs = self.d(a, c);
                    let rhs = self.d(a, b) + self.d(b, c);
                    if lhs > rhs * (1.0 + 4.0 * f64::EPSILON) {
                        return Some((PointId(a), PointId(b), PointId(c)));
                    }
                }
            }
            None
        });
        found.into_iter().flatten().next()
    }

    pub fn from_document(doc: SpaceDocument) -> Result<Self> {
        Self::from_parts(doc.metric, doc.points, doc.distances)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(s)?)
    }

    pub fn to_document(&self) -> SpaceDocument {
        SpaceDocument {
            metric: self.kind,
            points: self.coords.clone(),
            distances: self.distances.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn ids(&self) -> impl Iterator<Item = PointId> + '_ {
        (0..self.len).map(PointId)
    }

    /// Ambient coordinate dimension, if the space carries coordinates.
    pub fn dim(&self) -> Option<usize> {
        self.coords.as_ref().map(|c| c[0].len())
    }

    pub fn coords(&self, id: PointId) -> Option<&[f64]> {
        self.coords.as_ref().and_then(|c| c.get(id.0)).map(Vec::as_slice)
    }

    pub fn all_coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    pub fn check_id(&self, id: PointId) -> Result<()> {
        if id.0 < self.len {
            Ok(())
        } else {
            Err(Error::UnknownPoint(id))
        }
    }

    /// `d(a, b)`, validating both ids.
    pub fn distance(&self, a: PointId, b: PointId) -> Result<f64> {
        self.check_id(a)?;
        self.check_id(b)?;
        Ok(self.d(a.0, b.0))
    }

    /// Unchecked distance by index; panics on an out-of-range index.
    #[inline]
    pub fn d(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return 0.0;
        }
        match self.kind {
            MetricKind::Explicit => self.distances.as_ref().expect("explicit metric")[a][b],
            kind => {
                let c = self.coords.as_ref().expect("coordinate metric");
                let (x, y) = (&c[a], &c[b]);
                let diffs = x.iter().zip(y).map(|(p, q)| (p - q).abs());
                match kind {
                    MetricKind::L1 => diffs.sum(),
                    MetricKind::L2 => diffs.map(|t| t * t).sum::<f64>().sqrt(),
                    _ => diffs.fold(0.0, f64::max),
                }
            }
        }
    }

    /// Points of the open (`closed = false`) or closed ball around `center`,
    /// in index order.
    pub fn ball_points(&self, center: PointId, r: f64, closed: bool) -> Result<Vec<PointId>> {
        self.check_id(center)?;
        if !(r > 0.0) {
            return Err(Error::param(
                "r",
                format!("ball radius must be positive, got {r}"),
            ));
        }
        Ok(self
            .ids()
            .filter(|a| {
                let d = self.d(center.0, a.0);
                if closed {
                    d <= r
                } else {
                    d < r
                }
            })
            .collect())
    }

    pub fn diameter(&self) -> f64 {
        par::map_range(self.len, |i| {
            (0..self.len).map(|j| self.d(i, j)).fold(0.0, f64::max)
        })
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Distance from `b` to its nearest other sample point.
    pub fn nearest_neighbor_distance(&self, b: PointId) -> Option<f64> {
        (0..self.len)
            .filter(|&a| a != b.0)
            .map(|a| self.d(a, b.0))
            .min_by(f64::total_cmp)
    }

    /// `max_a min_{b in B} d(a, b)`.
    pub fn covering_radius(&self, members: &[PointId]) -> Result<f64> {
        if members.is_empty() {
            return Err(Error::Precondition(
                "covering radius of an empty set is undefined".into(),
            ));
        }
        for &b in members {
            self.check_id(b)?;
        }
        let per_point = par::map_range(self.len, |a| {
            members
                .iter()
                .map(|b| self.d(a, b.0))
                .fold(f64::INFINITY, f64::min)
        });
        Ok(per_point.into_iter().fold(0.0, f64::max))
    }

    /// Smallest pairwise distance within `members` (infinite for fewer than
    /// two members).
    pub fn min_pairwise_distance(&self, members: &[PointId]) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                best = best.min(self.d(a.0, b.0));
            }
        }
        best
    }

    /// Extends the `r`-separation `seed` to a maximal one by scanning points
    /// in index order and keeping every point at distance `>= r` from all
    /// members kept so far. Returned ids are sorted.
    pub fn greedy_maximal_separation(&self, r: f64, seed: &[PointId]) -> Result<Vec<PointId>> {
        if !(r > 0.0) {
            return Err(Error::param(
                "r",
                format!("separation radius must be positive, got {r}"),
            ));
        }
        for &b in seed {
            self.check_id(b)?;
        }
        let mut members: BTreeSet<PointId> = seed.iter().copied().collect();
        let seed_sorted: Vec<PointId> = members.iter().copied().collect();
        if self.min_pairwise_distance(&seed_sorted) < r {
            return Err(Error::Precondition(format!("seed is not a {r}-separation")));
        }
        let mut current = seed_sorted;
        for a in self.ids() {
            if members.contains(&a) {
                continue;
            }
            if current.iter().all(|b| self.d(a.0, b.0) >= r) {
                members.insert(a);
                current.push(a);
            }
        }
        Ok(members.into_iter().collect())
    }

    /// Rounds `n = 1..=rounds` with radius `2^-(n-1)`, each round seeded
    /// with the previous one.
    pub fn build_separation_hierarchy(&self, rounds: usize) -> Result<SeparationHierarchy> {
        if rounds == 0 {
            return Err(Error::param("rounds", "at least one round is required"));
        }
        let mut out = Vec::with_capacity(rounds);
        let mut previous: Vec<PointId> = Vec::new();
        for n in 1..=rounds {
            let radius = dyadic(n - 1);
            let members = self.greedy_maximal_separation(radius, &previous)?;
            previous = members.clone();
            out.push(SeparationRound { n, radius, members });
        }
        Ok(SeparationHierarchy { rounds: out })
    }
}

/// `2^-k`
pub fn dyadic(k: usize) -> f64 {
    (-(k as f64)).exp2()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationRound {
    pub n: usize,
    #[serde(rename = "r")]
    pub radius: f64,
    #[serde(rename = "B")]
    pub members: Vec<PointId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationHierarchy {
    pub rounds: Vec<SeparationRound>,
}

/// Evidence for the three hierarchy invariants at one round.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundCheck {
    pub n: usize,
    pub radius: f64,
    pub nested: bool,
    /// `None` when the round has fewer than two members.
    pub min_separation: Option<f64>,
    pub covering_radius: f64,
}

impl RoundCheck {
    pub fn passed(&self) -> bool {
        self.nested
            && self.min_separation.is_none_or(|s| s >= self.radius)
            && self.covering_radius < self.radius
    }
}

impl SeparationHierarchy {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    /// Round `n` (1-based).
    pub fn round(&self, n: usize) -> Option<&SeparationRound> {
        n.checked_sub(1).and_then(|i| self.rounds.get(i))
    }

    pub fn members(&self, n: usize) -> &[PointId] {
        self.round(n).map(|r| r.members.as_slice()).unwrap_or(&[])
    }

    /// `B_n \ B_{n-1}`, sorted.
    pub fn new_points(&self, n: usize) -> Vec<PointId> {
        let prev: BTreeSet<PointId> = self.members(n - 1).iter().copied().collect();
        self.members(n)
            .iter()
            .copied()
            .filter(|b| !prev.contains(b))
            .collect()
    }

    /// The round at which `b` first appears.
    pub fn first_round(&self, b: PointId) -> Option<usize> {
        self.rounds
            .iter()
            .find(|r| r.members.binary_search(&b).is_ok())
            .map(|r| r.n)
    }

    pub fn check(&self, space: &SampledMetricSpace) -> Result<Vec<RoundCheck>> {
        let mut out = Vec::with_capacity(self.rounds.len());
        for (i, round) in self.rounds.iter().enumerate() {
            let prev: &[PointId] = if i == 0 { &[] } else { &self.rounds[i - 1].members };
            let nested = prev.iter().all(|b| round.members.binary_search(b).is_ok());
            let sep = space.min_pairwise_distance(&round.members);
            out.push(RoundCheck {
                n: round.n,
                radius: round.radius,
                nested,
                min_separation: sep.is_finite().then_some(sep),
                covering_radius: space.covering_radius(&round.members)?,
            });
        }
        Ok(out)
    }
}
