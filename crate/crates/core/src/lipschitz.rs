//! Pointwise Lipschitz profiles of sampled maps, positively homogeneous
//! extension from a sphere sample, the Cantor function, and a grid check of
//! the local-to-global Lipschitz upgrade on an interval.
//!
//! The pointwise constant at `b` is a `limsup` as `r -> 0`. On a finite
//! sample it is estimated from the quotient
//! `Lambda(b, r) = sup { |f(b) - f(a)| : d(a, b) <= r } / r`
//! at a decreasing list of radii, taking the maximum over the smallest `k`
//! radii whose ball holds at least one point besides `b`. The estimate is a
//! surrogate: it says nothing about scales below the sample resolution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::LinearSurjection;
use crate::metric::{dyadic, PointId, SampledMetricSpace};
use crate::par;
use crate::selection::SelectionSequence;
use crate::vector::{dist, norm, scale};

/// Number of informative radii the estimate is taken over.
pub const DEFAULT_INFORMATIVE: usize = 3;
/// Length of the default radii schedule.
pub const DEFAULT_RADII: usize = 6;
/// Relative tolerance of [`open_closed_consistency`].
pub const DEFAULT_CONSISTENCY_TOL: f64 = 0.05;
/// Largest supported Cantor depth.
pub const MAX_CANTOR_DEPTH: u32 = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BallKind {
    Open,
    Closed,
}

impl BallKind {
    fn contains(self, d: f64, r: f64) -> bool {
        match self {
            BallKind::Open => d < r,
            BallKind::Closed => d <= r,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub r: f64,
    pub ratio: f64,
    /// Sample points other than the center inside the ball.
    pub neighbors: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlipProfile {
    pub point: PointId,
    pub ball: BallKind,
    /// Sorted by decreasing `r`.
    pub rows: Vec<ProfileRow>,
    pub estimate: f64,
}

impl PlipProfile {
    /// Rows whose ball holds another sample point.
    pub fn informative(&self) -> impl Iterator<Item = &ProfileRow> {
        self.rows.iter().filter(|r| r.neighbors > 0)
    }
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::param("radii", "at least one radius is required"));
    }
    if radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(Error::param("radii", "radii must be positive and finite"));
    }
    if radii.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::param("radii", "radii must be strictly decreasing"));
    }
    Ok(())
}

fn check_table(space: &SampledMetricSpace, values: &[Vec<f64>]) -> Result<()> {
    if values.len() != space.len() {
        return Err(Error::Config(format!(
            "table has {} rows for {} points",
            values.len(),
            space.len()
        )));
    }
    Ok(())
}

/// Estimate from rows already in decreasing radius order.
fn estimate_from(point: PointId, rows: &[ProfileRow], k: usize) -> Result<f64> {
    let informative: Vec<f64> = rows.iter().filter(|r| r.neighbors > 0).map(|r| r.ratio).collect();
    if informative.is_empty() {
        return Err(Error::Resolution(point));
    }
    let start = informative.len().saturating_sub(k.max(1));
    Ok(informative[start..].iter().copied().fold(0.0, f64::max))
}

/// Profile of `values` at `b` over open or closed balls.
pub fn plip_profile_with(
    space: &SampledMetricSpace,
    values: &[Vec<f64>],
    b: PointId,
    radii: &[f64],
    k: usize,
    ball: BallKind,
) -> Result<PlipProfile> {
    space.check_id(b)?;
    check_table(space, values)?;
    check_radii(radii)?;
    let fb = &values[b.0];
    let mut near: Vec<(f64, f64)> = space
        .ids()
        .filter(|a| *a != b)
        .map(|a| (space.d(a.0, b.0), dist(fb, &values[a.0])))
        .collect();
    near.sort_by(|x, y| x.0.total_cmp(&y.0));
    let rows: Vec<ProfileRow> = radii
        .iter()
        .map(|&r| {
            let inside = near.iter().take_while(|(d, _)| ball.contains(*d, r));
            let (count, sup) = inside.fold((0, 0.0f64), |(c, s), (_, g)| (c + 1, s.max(*g)));
            ProfileRow {
                r,
                ratio: sup / r,
                neighbors: count,
            }
        })
        .collect();
    let estimate = estimate_from(b, &rows, k)?;
    Ok(PlipProfile {
        point: b,
        ball,
        rows,
        estimate,
    })
}

/// Closed-ball profile with the default `k`.
pub fn plip_profile(
    space: &SampledMetricSpace,
    values: &[Vec<f64>],
    b: PointId,
    radii: &[f64],
) -> Result<PlipProfile> {
    plip_profile_with(space, values, b, radii, DEFAULT_INFORMATIVE, BallKind::Closed)
}

/// `count` radii halving down to the distance from `b` to its nearest
/// neighbor, so the smallest ball is the first informative one.
pub fn default_radii(space: &SampledMetricSpace, b: PointId, count: usize) -> Result<Vec<f64>> {
    space.check_id(b)?;
    if count == 0 {
        return Err(Error::param("radii", "schedule length must be positive"));
    }
    let nn = space.nearest_neighbor_distance(b).ok_or(Error::Resolution(b))?;
    Ok((0..count).rev().map(|j| nn * (j as f64).exp2()).collect())
}

/// Profiles at many points; `radii = None` uses [`default_radii`] per point.
pub fn plip_profiles(
    space: &SampledMetricSpace,
    values: &[Vec<f64>],
    points: &[PointId],
    radii: Option<&[f64]>,
    k: usize,
) -> Result<Vec<PlipProfile>> {
    par::try_map_slice(points, |&b| {
        let own;
        let r = match radii {
            Some(r) => r,
            None => {
                own = default_radii(space, b, DEFAULT_RADII)?;
                &own
            }
        };
        plip_profile_with(space, values, b, r, k, BallKind::Closed)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Consistency {
    pub closed: f64,
    pub open: f64,
    pub consistent: bool,
}

/// Compares open- and closed-ball estimates:
/// `|closed - open| <= tol * (1 + max(closed, open))`.
pub fn open_closed_consistency(
    space: &SampledMetricSpace,
    values: &[Vec<f64>],
    b: PointId,
    radii: &[f64],
    k: usize,
    tol: f64,
) -> Result<Consistency> {
    let closed = plip_profile_with(space, values, b, radii, k, BallKind::Closed)?.estimate;
    let open = plip_profile_with(space, values, b, radii, k, BallKind::Open)?.estimate;
    Ok(Consistency {
        closed,
        open,
        consistent: (closed - open).abs() <= tol * (1.0 + closed.max(open)),
    })
}

/// A map sampled on unit directions of `R^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereTable {
    directions: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
}

impl SphereTable {
    pub fn new(directions: Vec<Vec<f64>>, values: Vec<Vec<f64>>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::Config("sphere table is empty".into()));
        }
        if directions.len() != values.len() {
            return Err(Error::Config(format!(
                "{} directions but {} values",
                directions.len(),
                values.len()
            )));
        }
        let m = directions[0].len();
        let d = values[0].len();
        for (u, v) in directions.iter().zip(&values) {
            if u.len() != m {
                return Err(Error::Shape {
                    expected: m,
                    found: u.len(),
                });
            }
            if v.len() != d {
                return Err(Error::Shape {
                    expected: d,
                    found: v.len(),
                });
            }
            if (norm(u) - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("direction {u:?} is not a unit vector")));
            }
        }
        Ok(SphereTable { directions, values })
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn domain_dim(&self) -> usize {
        self.directions[0].len()
    }

    pub fn value_dim(&self) -> usize {
        self.values[0].len()
    }

    /// `max_u |rho(u)|`
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| norm(v)).fold(0.0, f64::max)
    }

    /// Index of the sampled direction closest to `u`, first on ties.
    pub fn nearest(&self, u: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, d) in self.directions.iter().enumerate() {
            let c = dist(d, u);
            if c < best.0 {
                best = (c, i);
            }
        }
        best.1
    }

    /// Chord distance from direction `i` to the closest other direction,
    /// or 2 when there is none.
    pub fn separation_at(&self, i: usize) -> f64 {
        self.directions
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, d)| dist(d, &self.directions[i]))
            .fold(2.0, f64::min)
    }

    /// `rho(z) = |z| rho(z / |z|)` with `rho(0) = 0`; off-sample directions
    /// take the value of the nearest sampled one.
    pub fn extend(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.domain_dim() {
            return Err(Error::Shape {
                expected: self.domain_dim(),
                found: z.len(),
            });
        }
        let len = norm(z);
        if len == 0.0 {
            return Ok(vec![0.0; self.value_dim()]);
        }
        let u = scale(z, 1.0 / len);
        Ok(scale(&self.values[self.nearest(&u)], len))
    }
}

/// Free-function form of [`SphereTable::extend`].
pub fn homogeneous_extension(table: &SphereTable, z: &[f64]) -> Result<Vec<f64>> {
    table.extend(z)
}

/// Ray points `lambda * u_i` to probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub direction: usize,
    pub scales: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RayPlip {
    pub direction: usize,
    pub lambda: f64,
    pub estimate: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HomogeneousPlipReport {
    /// `2 beta + |rho|_inf`
    pub bound: f64,
    pub rows: Vec<RayPlip>,
    pub worst: f64,
    pub passed: bool,
}

/// Probe offsets around `lambda * u`: radial and tangential, at distances
/// `lambda * h / 8 * 2^-i` where `h` is the gap from `u` to its nearest
/// sampled neighbor, so every probe still looks up `u`.
fn ray_probe_estimate(
    table: &SphereTable,
    direction: usize,
    lambda: f64,
    levels: usize,
    k: usize,
) -> Result<f64> {
    let u = &table.directions[direction];
    let m = u.len();
    let z = scale(u, lambda);
    let fz = table.extend(&z)?;
    let mut offsets = vec![u.clone(), scale(u, -1.0)];
    if m > 1 {
        let tangent = LinearSurjection::from_rows(std::slice::from_ref(u))?;
        for t in tangent.kernel_basis() {
            offsets.push(t.clone());
            offsets.push(scale(t, -1.0));
        }
    }
    let h = table.separation_at(direction);
    let radii: Vec<f64> = (0..levels).map(|i| lambda * h / 8.0 * dyadic(i)).collect();
    let level_sup = radii
        .iter()
        .map(|&r| {
            offsets.iter().try_fold(0.0f64, |sup, e| {
                let p: Vec<f64> = z.iter().zip(e).map(|(zi, ei)| zi + r * ei).collect();
                Ok::<_, Error>(sup.max(dist(&fz, &table.extend(&p)?)))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut ball_sup = 0.0f64;
    let mut rows: Vec<ProfileRow> = radii
        .iter()
        .zip(&level_sup)
        .rev()
        .map(|(&r, &s)| {
            ball_sup = ball_sup.max(s);
            ProfileRow {
                r,
                ratio: ball_sup / r,
                neighbors: offsets.len(),
            }
        })
        .collect();
    rows.reverse();
    estimate_from(PointId(direction), &rows, k)
}

/// Checks the plip estimate of the homogeneous extension at each ray point
/// against `2 beta + |rho|_inf + tol`.
pub fn verify_homogeneous_plip(
    table: &SphereTable,
    beta: f64,
    rays: &[Ray],
    levels: usize,
    tol: f64,
) -> Result<HomogeneousPlipReport> {
    if !(beta >= 0.0) {
        return Err(Error::param("beta", "must be nonnegative"));
    }
    let bound = 2.0 * beta + table.sup_norm();
    let jobs: Vec<(usize, f64)> = rays
        .iter()
        .flat_map(|r| r.scales.iter().map(move |&l| (r.direction, l)))
        .collect();
    for &(i, l) in &jobs {
        if i >= table.len() {
            return Err(Error::UnknownPoint(PointId(i)));
        }
        if !(l > 0.0) {
            return Err(Error::param("lambda", "ray scales must be positive"));
        }
    }
    let rows = par::try_map_slice(&jobs, |&(direction, lambda)| {
        let estimate = ray_probe_estimate(table, direction, lambda, levels.max(1), DEFAULT_INFORMATIVE)?;
        Ok::<_, Error>(RayPlip {
            direction,
            lambda,
            estimate,
            passed: estimate <= bound + tol,
        })
    })?;
    let worst = rows.iter().map(|r| r.estimate).fold(0.0, f64::max);
    let passed = rows.iter().all(|r| r.passed);
    Ok(HomogeneousPlipReport {
        bound,
        rows,
        worst,
        passed,
    })
}

/// Cantor function by the thirds recursion, truncated after `depth` levels
/// (error at most `2^-depth`).
pub fn cantor_function(x: f64, depth: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Range(x));
    }
    if depth == 0 || depth > MAX_CANTOR_DEPTH {
        return Err(Error::param(
            "depth",
            format!("must lie in 1..={MAX_CANTOR_DEPTH}, got {depth}"),
        ));
    }
    let (mut x, mut value, mut weight) = (x, 0.0, 1.0);
    for _ in 0..depth {
        if x <= 0.0 {
            return Ok(value);
        }
        if x >= 1.0 {
            return Ok(value + weight);
        }
        if x < 1.0 / 3.0 {
            x *= 3.0;
        } else if x <= 2.0 / 3.0 {
            return Ok(value + weight / 2.0);
        } else {
            value += weight / 2.0;
            x = 3.0 * x - 2.0;
        }
        weight /= 2.0;
    }
    Ok(value)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridPair {
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
    pub ratio: f64,
    /// `|f(x) - f(y)| - (alpha + tol)|x - y| - slack`
    pub excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UpgradeReport {
    /// Largest quotient over pairs at distance `<= r0`.
    pub local_constant: f64,
    pub local_hypothesis: bool,
    pub passed: bool,
    pub violations: usize,
    /// Pair with the largest quotient, earliest among near ties.
    pub worst: GridPair,
}

/// Per-step slack of the chain bound.
pub const CHAIN_STEP_SLACK: f64 = 1e-12;

/// Checks `|f(x_i) - f(x_j)| <= (alpha + tol)|x_i - x_j| + (j - i) * 1e-12`
/// over all pairs of an increasing grid of `[0, 1]`, alongside the local
/// quotient bound within `r0`.
pub fn global_lipschitz_upgrade_check(
    xs: &[f64],
    values: &[Vec<f64>],
    alpha: f64,
    r0: f64,
    tol: f64,
) -> Result<UpgradeReport> {
    if xs.len() < 2 {
        return Err(Error::Precondition("grid needs at least two points".into()));
    }
    if xs.len() != values.len() {
        return Err(Error::Config(format!(
            "{} grid points but {} values",
            xs.len(),
            values.len()
        )));
    }
    if !(alpha >= 0.0) {
        return Err(Error::param("alpha", "must be nonnegative"));
    }
    if !(r0 > 0.0) {
        return Err(Error::param("r0", "must be positive"));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition("grid must be strictly increasing".into()));
    }
    let spacing = xs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if !(spacing < r0) {
        return Err(Error::param(
            "r0",
            format!("grid spacing {spacing} is not below r0 = {r0}"),
        ));
    }
    let rate = alpha + tol;
    let per_row = par::map_range(xs.len() - 1, |i| {
        let mut best: Option<GridPair> = None;
        let mut local = 0.0f64;
        let mut violations = 0usize;
        for j in i + 1..xs.len() {
            let dx = xs[j] - xs[i];
            let df = dist(&values[i], &values[j]);
            let ratio = df / dx;
            if dx <= r0 {
                local = local.max(ratio);
            }
            let excess = df - rate * dx - (j - i) as f64 * CHAIN_STEP_SLACK;
            if excess > 0.0 {
                violations += 1;
            }
            let pair = GridPair {
                i,
                j,
                x: xs[i],
                y: xs[j],
                ratio,
                excess,
            };
            best = Some(match best {
                Some(b) if !beats(&pair, &b) => b,
                _ => pair,
            });
        }
        (best.expect("at least one pair"), local, violations)
    });
    let mut worst: Option<GridPair> = None;
    let mut local_constant = 0.0f64;
    let mut violations = 0;
    for (pair, local, v) in per_row {
        local_constant = local_constant.max(local);
        violations += v;
        worst = Some(match worst {
            Some(w) if !beats(&pair, &w) => w,
            _ => pair,
        });
    }
    Ok(UpgradeReport {
        local_constant,
        local_hypothesis: local_constant <= rate,
        passed: violations == 0,
        violations,
        worst: worst.expect("at least one pair"),
    })
}

fn beats(candidate: &GridPair, current: &GridPair) -> bool {
    candidate.ratio > current.ratio * (1.0 + 1e-9)
}

/// Where the audit radii for one anchor came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AuditRadii {
    /// `2^-K, 2^-(K+1), ...` with `2^-K` below the anchor's `delta`.
    Dyadic { k: usize },
    /// The sample is too coarse at those radii; nearest-neighbor schedule.
    Fallback,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditRow {
    pub point: PointId,
    pub round: usize,
    pub delta: f64,
    pub radii: AuditRadii,
    pub estimate: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelectionAudit {
    pub beta: f64,
    pub rows: Vec<AuditRow>,
    pub worst: f64,
    pub covering_radius: f64,
    /// `2^-(N-1)`
    pub covering_bound: f64,
    pub passed: bool,
}

impl SelectionAudit {
    pub fn fallbacks(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.radii == AuditRadii::Fallback)
            .count()
    }
}

/// Number of dyadic radii tried per anchor in the audit.
const AUDIT_LEVELS: usize = 12;

/// Checks that the limit selection `f_N` has plip estimate `<= beta + tol`
/// at every point of `B_N` and that `B_N` covers the sample within
/// `2^-(N-1)`.
///
/// An anchor `b` added in round `k` with radius `delta_b` sees
/// `f_N = g_b` up to the geometric tail on balls of radius below
/// `min(delta_b, 2^-k)`, so its profile is taken at the dyadic radii below
/// that scale.
pub fn audit_selection(
    space: &SampledMetricSpace,
    seq: &SelectionSequence,
    k: usize,
    tol: f64,
) -> Result<SelectionAudit> {
    let n = seq.num_rounds();
    let limit = seq.limit().selection;
    check_table(space, limit.values())?;
    let members = seq.hierarchy.members(n).to_vec();
    let rows = par::try_map_slice(&members, |&b| {
        let (round, delta) = seq
            .anchor_delta(b)
            .ok_or_else(|| Error::Config(format!("no radius recorded for anchor {b}")))?;
        let mut top = round;
        while dyadic(top) >= delta {
            top += 1;
        }
        let radii: Vec<f64> = (top..top + AUDIT_LEVELS).map(dyadic).collect();
        let (profile, source) = match plip_profile_with(space, limit.values(), b, &radii, k, BallKind::Closed)
        {
            Ok(p) => (p, AuditRadii::Dyadic { k: top }),
            Err(Error::Resolution(_)) => {
                let radii = default_radii(space, b, DEFAULT_RADII)?;
                let p = plip_profile_with(space, limit.values(), b, &radii, k, BallKind::Closed)?;
                (p, AuditRadii::Fallback)
            }
            Err(e) => return Err(e),
        };
        Ok::<_, Error>(AuditRow {
            point: b,
            round,
            delta,
            radii: source,
            estimate: profile.estimate,
            passed: profile.estimate <= seq.beta + tol,
        })
    })?;
    let covering_radius = space.covering_radius(&members)?;
    let covering_bound = dyadic(n - 1);
    let worst = rows.iter().map(|r| r.estimate).fold(0.0, f64::max);
    let passed = rows.iter().all(|r| r.passed) && covering_radius < covering_bound;
    Ok(SelectionAudit {
        beta: seq.beta,
        rows,
        worst,
        covering_radius,
        covering_bound,
        passed,
    })
}

/// Default slack of the audit bound.
pub const AUDIT_TOL: f64 = 1e-6;
