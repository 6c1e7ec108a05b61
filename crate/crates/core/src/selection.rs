//! Iterative construction of selections that are pointwise Lipschitz on
//! successively finer separations.
//!
//! Round `n` extends the previous separation to a maximal
//! `2^-(n-1)`-separation `B_n`. Around every new anchor `b` the previous
//! selection is replaced by a local selection `g_b` anchored at
//! `f_{n-1}(b)` that is strongly `alpha`-Lipschitz at `b`. The replacement is
//! blended in with a trapezoid bump that is 1 on the closed ball
//! `B(b, delta_b)` and 0 outside the open ball `B(b, 2 delta_b)`. Radii are
//! chosen small enough that supports are pairwise disjoint and that the
//! round moves the selection by at most `2^-n eps`.
//!
//! Each round keeps enough evidence ([`RoundRecord`]) for
//! [`verify_round_properties`] to recheck the construction from the stored
//! tables alone.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::correspondence::{argmax, Correspondence};
use crate::error::{Error, Result};
use crate::metric::{dyadic, PointId, SampledMetricSpace, SeparationHierarchy};
use crate::par;
use crate::vector::{dist, lerp};

/// Slack subtracted from `2^-n eps` in the radius acceptance test, so the
/// non-strict per-round bound survives roundoff.
pub const ACCEPT_MARGIN: f64 = 1e-12;
/// Membership tolerance for selections in round verification.
pub const MEMBERSHIP_TOL: f64 = 1e-8;
/// Slack on the per-round sup bound and the strong Lipschitz bound.
pub const BOUND_SLACK: f64 = 1e-9;

/// A table of values, one vector per sample point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    values: Vec<Vec<f64>>,
    round: usize,
}

impl Selection {
    pub fn new(values: Vec<Vec<f64>>, round: usize) -> Self {
        Selection { values, round }
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Vec<f64>> {
        self.values
    }

    pub fn get(&self, id: PointId) -> &[f64] {
        &self.values[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// `max_a |self(a) - other(a)|` and the first point attaining it.
    pub fn sup_distance(&self, other: &Selection) -> (f64, PointId) {
        let d: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| dist(x, y))
            .collect();
        if d.is_empty() {
            return (0.0, PointId(0));
        }
        argmax(&d)
    }
}

/// Locality radii `r_b` of the local selections.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Locality {
    #[default]
    Unbounded,
    Uniform(f64),
    PerPoint(Vec<f64>),
}

impl Locality {
    pub fn radius(&self, b: PointId) -> f64 {
        match self {
            Locality::Unbounded => f64::INFINITY,
            Locality::Uniform(r) => *r,
            Locality::PerPoint(r) => r.get(b.0).copied().unwrap_or(f64::INFINITY),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Defaults to `(beta - alpha) / 3`.
    #[serde(default)]
    pub epsilon: Option<f64>,
    pub rounds: usize,
    #[serde(default = "default_delta_min")]
    pub delta_min: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default, rename = "r_b")]
    pub locality: Locality,
}

fn default_delta_min() -> f64 {
    1e-9
}

fn default_tol() -> f64 {
    1e-9
}

impl IterationConfig {
    pub fn new(alpha: f64, beta: f64, rounds: usize) -> Self {
        IterationConfig {
            alpha,
            beta,
            epsilon: None,
            rounds,
            delta_min: default_delta_min(),
            tol: default_tol(),
            locality: Locality::Unbounded,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or((self.beta - self.alpha) / 3.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::param("alpha", "must be a finite nonnegative number"));
        }
        if !(self.beta > self.alpha) || !self.beta.is_finite() {
            return Err(Error::param(
                "beta",
                format!("must exceed alpha = {}, got {}", self.alpha, self.beta),
            ));
        }
        let cap = (self.beta - self.alpha) / 3.0;
        let eps = self.epsilon();
        if !(eps > 0.0) || eps > cap {
            return Err(Error::param(
                "epsilon",
                format!("must lie in (0, (beta - alpha)/3 = {cap}], got {eps}"),
            ));
        }
        if self.rounds == 0 {
            return Err(Error::param("rounds", "at least one round is required"));
        }
        if !(self.delta_min > 0.0) {
            return Err(Error::param("delta_min", "must be positive"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::param("tol", "must be nonnegative"));
        }
        let bad_radius = match &self.locality {
            Locality::Unbounded => false,
            Locality::Uniform(r) => !(*r > 0.0),
            Locality::PerPoint(rs) => rs.iter().any(|r| !(*r > 0.0)),
        };
        if bad_radius {
            return Err(Error::param("r_b", "locality radii must be positive"));
        }
        Ok(())
    }
}

/// Trapezoid bump: 1 for `distance <= delta`, 0 for `distance >= 2 delta`,
/// affine in between.
pub fn bump_weight(delta: f64, distance: f64) -> f64 {
    ((2.0 * delta - distance) / delta).clamp(0.0, 1.0)
}

/// [`bump_weight`] of the bump centered at `b`, evaluated at `a`.
pub fn bump_weight_at(space: &SampledMetricSpace, b: PointId, delta: f64, a: PointId) -> Result<f64> {
    Ok(bump_weight(delta, space.distance(a, b)?))
}

/// Evidence kept for one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub n: usize,
    #[serde(rename = "B")]
    pub members: Vec<PointId>,
    pub new_points: Vec<PointId>,
    /// `delta_b` for each new anchor.
    pub deltas: BTreeMap<PointId, f64>,
    /// `g_b` for each new anchor; not part of the exported document.
    #[serde(skip)]
    pub local_selections: BTreeMap<PointId, Selection>,
    pub sup_change: f64,
}

impl RoundRecord {
    /// Checks that the open supports `B(b, 2 delta_b)` are pairwise
    /// disjoint in the metric sense: `d(b, b') >= 2 delta_b + 2 delta_b'`.
    pub fn check_disjoint(&self, space: &SampledMetricSpace) -> Result<()> {
        let anchors: Vec<(PointId, f64)> = self.deltas.iter().map(|(b, d)| (*b, *d)).collect();
        for (i, (b, db)) in anchors.iter().enumerate() {
            for (c, dc) in &anchors[i + 1..] {
                if space.d(b.0, c.0) < 2.0 * db + 2.0 * dc {
                    return Err(Error::InvariantViolation(format!(
                        "round {}: supports around {b} and {c} overlap",
                        self.n
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Finds `delta_b` by halving from `min(2^-(n+1), r_b) / 2` until
/// `|f_prev(a) - g_b(a)| <= 2^-n eps - ACCEPT_MARGIN` on the open ball
/// `B(b, 2 delta)`.
#[allow(clippy::too_many_arguments)]
pub fn compute_delta(
    space: &SampledMetricSpace,
    f_prev: &Selection,
    g_b: &Selection,
    b: PointId,
    n: usize,
    epsilon: f64,
    r_b: f64,
    delta_min: f64,
    tol: f64,
) -> Result<f64> {
    space.check_id(b)?;
    if n == 0 {
        return Err(Error::param("n", "rounds are numbered from 1"));
    }
    let gap = dist(f_prev.get(b), g_b.get(b));
    if gap > tol {
        return Err(Error::Precondition(format!(
            "local selection at {b} is not anchored at the previous value (gap {gap:e})"
        )));
    }
    let threshold = dyadic(n) * epsilon - ACCEPT_MARGIN;
    let mut near: Vec<(f64, f64)> = space
        .ids()
        .map(|a| (space.d(a.0, b.0), dist(f_prev.get(a), g_b.get(a))))
        .collect();
    near.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut delta = dyadic(n + 1).min(r_b) / 2.0;
    loop {
        if delta < delta_min {
            return Err(Error::DegenerateRadius { point: b, delta_min });
        }
        let sup = near
            .iter()
            .take_while(|(d, _)| *d < 2.0 * delta)
            .map(|(_, gap)| *gap)
            .fold(0.0, f64::max);
        if sup <= threshold {
            return Ok(delta);
        }
        delta /= 2.0;
    }
}

/// Blends the round's local selections into `f_prev`.
pub fn blend_round(
    space: &SampledMetricSpace,
    f_prev: &Selection,
    record: &RoundRecord,
) -> Result<Selection> {
    let anchors: Vec<(PointId, f64, &Selection)> = record
        .deltas
        .iter()
        .map(|(b, delta)| {
            record
                .local_selections
                .get(b)
                .map(|g| (*b, *delta, g))
                .ok_or_else(|| Error::Config(format!("round {}: no local selection for {b}", record.n)))
        })
        .collect::<Result<_>>()?;

    let values = par::try_map_range(space.len(), |a| {
        let mut hit: Option<(f64, f64, &Selection)> = None;
        for (b, delta, g) in &anchors {
            let d = space.d(a, b.0);
            if d < 2.0 * delta {
                if hit.is_some() {
                    return Err(Error::InvariantViolation(format!(
                        "round {}: point {a} lies in two supports",
                        record.n
                    )));
                }
                hit = Some((*delta, d, *g));
            }
        }
        let prev = &f_prev.values[a];
        Ok(match hit {
            None => prev.clone(),
            Some((delta, d, g)) => {
                let w = bump_weight(delta, d);
                if w == 1.0 {
                    g.values[a].clone()
                } else if w == 0.0 {
                    prev.clone()
                } else {
                    lerp(prev, &g.values[a], w)
                }
            }
        })
    })?;
    Ok(Selection::new(values, record.n))
}

/// `f_0, ..., f_N` with their round records.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SelectionSequence {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub hierarchy: SeparationHierarchy,
    pub rounds: Vec<RoundRecord>,
    pub selections: Vec<Selection>,
}

#[derive(Clone, Debug)]
pub struct LimitSelection {
    pub selection: Selection,
    /// Certified bound on `sup |f - f_N|`: `2^-N eps`.
    pub tail_bound: f64,
}

impl SelectionSequence {
    pub fn num_rounds(&self) -> usize {
        self.rounds.len()
    }

    /// `f_n`.
    pub fn selection(&self, n: usize) -> &Selection {
        &self.selections[n]
    }

    pub fn record(&self, n: usize) -> Option<&RoundRecord> {
        n.checked_sub(1).and_then(|i| self.rounds.get(i))
    }

    /// `f_N` standing in for the limit, with its geometric tail bound.
    pub fn limit(&self) -> LimitSelection {
        let n = self.num_rounds();
        LimitSelection {
            selection: self.selections[n].clone(),
            tail_bound: dyadic(n) * self.epsilon,
        }
    }

    /// `delta_b` from the round in which `b` joined the separation.
    pub fn anchor_delta(&self, b: PointId) -> Option<(usize, f64)> {
        self.rounds
            .iter()
            .find_map(|r| r.deltas.get(&b).map(|d| (r.n, *d)))
    }
}

/// Runs `config.rounds` rounds of the construction starting from `f0`.
pub fn run_iteration(
    phi: &Correspondence,
    f0: Selection,
    config: &IterationConfig,
) -> Result<SelectionSequence> {
    config.validate()?;
    let space = phi.space();
    let (defect, at) = phi.selection_defect(f0.values())?;
    if defect > config.tol {
        return Err(Error::Precondition(format!(
            "initial map is not a selection: {defect:e} away from phi({at})"
        )));
    }
    let epsilon = config.epsilon();
    let hierarchy = space.build_separation_hierarchy(config.rounds)?;
    let mut selections = vec![Selection::new(f0.into_values(), 0)];
    let mut rounds = Vec::with_capacity(config.rounds);

    for n in 1..=config.rounds {
        let f_prev = selections.last().expect("f0 present");
        let new_points = hierarchy.new_points(n);
        let anchors = par::try_map_slice(&new_points, |&b| {
            let wrap = |e: Error| Error::Anchor {
                round: n,
                point: b,
                source: Box::new(e),
            };
            let g = phi
                .local_strong_selection(b, f_prev.get(b), config.alpha, config.tol)
                .map_err(wrap)?;
            let delta = compute_delta(
                space,
                f_prev,
                &g,
                b,
                n,
                epsilon,
                config.locality.radius(b),
                config.delta_min,
                config.tol,
            )
            .map_err(wrap)?;
            Ok::<_, Error>((b, delta, Selection::new(g.into_values(), n)))
        })?;

        let mut record = RoundRecord {
            n,
            members: hierarchy.members(n).to_vec(),
            new_points: new_points.clone(),
            deltas: BTreeMap::new(),
            local_selections: BTreeMap::new(),
            sup_change: 0.0,
        };
        for (b, delta, g) in anchors {
            record.deltas.insert(b, delta);
            record.local_selections.insert(b, g);
        }
        record.check_disjoint(space)?;
        let f_next = blend_round(space, f_prev, &record)?;
        record.sup_change = f_next.sup_distance(f_prev).0;
        rounds.push(record);
        selections.push(f_next);
    }

    Ok(SelectionSequence {
        alpha: config.alpha,
        beta: config.beta,
        epsilon,
        hierarchy,
        rounds,
        selections,
    })
}

/// Pass/fail with the worst observed value and where it occurred.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub passed: bool,
    pub worst: f64,
    pub witness: Option<PointId>,
}

/// A point where a later table differs from an earlier one inside the
/// protected ball of an earlier anchor.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoincidenceViolation {
    pub point: PointId,
    pub anchor: PointId,
    /// The round whose table differs from its predecessor at `point`.
    pub round: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundReport {
    pub n: usize,
    /// Nesting, separation and maximality of `B_n`.
    pub separation: bool,
    /// `f_n(a)` in `phi(a)` within [`MEMBERSHIP_TOL`].
    pub selection: PropertyCheck,
    /// `sup |f_n - f_{n-1}| <= 2^-n eps`.
    pub sup_change: PropertyCheck,
    /// `|f_n(b) - f_n(a)| <= alpha d(b, a)` on `B(b, delta_b)`, new `b`.
    pub strong_bound: PropertyCheck,
    /// Exact table coincidence on `B(b, 2^-n)` around earlier anchors.
    pub coincidence: Vec<CoincidenceViolation>,
}

impl RoundReport {
    pub fn coincidence_passed(&self) -> bool {
        self.coincidence.is_empty()
    }

    pub fn passed(&self) -> bool {
        self.separation
            && self.selection.passed
            && self.sup_change.passed
            && self.strong_bound.passed
            && self.coincidence_passed()
    }
}

/// Rechecks the round-`n` properties from the stored tables.
pub fn verify_round_properties(
    phi: &Correspondence,
    seq: &SelectionSequence,
    n: usize,
) -> Result<RoundReport> {
    let record = seq.record(n).ok_or_else(|| {
        Error::param(
            "n",
            format!("no round {n} in a {}-round sequence", seq.num_rounds()),
        )
    })?;
    let space = phi.space();
    let f_n = seq.selection(n);
    let f_prev = seq.selection(n - 1);
    if f_n.len() != space.len() || f_prev.len() != space.len() {
        return Err(Error::Config("selection tables do not match the space".into()));
    }

    let checks = seq.hierarchy.check(space)?;
    let separation = checks.get(n - 1).is_some_and(|c| c.passed());

    let (defect, at) = phi.selection_defect(f_n.values())?;
    let selection = PropertyCheck {
        passed: defect <= MEMBERSHIP_TOL,
        worst: defect,
        witness: Some(at),
    };

    let (change, at) = f_n.sup_distance(f_prev);
    let sup_change = PropertyCheck {
        passed: change <= dyadic(n) * seq.epsilon + BOUND_SLACK,
        worst: change,
        witness: Some(at),
    };

    let mut worst = (f64::NEG_INFINITY, None);
    for (b, delta) in &record.deltas {
        for a in space.ids() {
            let d = space.d(a.0, b.0);
            if d < *delta {
                let excess = dist(f_n.get(*b), f_n.get(a)) - seq.alpha * d;
                if excess > worst.0 {
                    worst = (excess, Some(a));
                }
            }
        }
    }
    let strong_bound = PropertyCheck {
        passed: worst.0 <= BOUND_SLACK,
        worst: worst.0.max(0.0),
        witness: worst.1,
    };

    let mut coincidence = Vec::new();
    let radius = dyadic(n);
    for b in seq.hierarchy.members(n - 1) {
        let k = seq.hierarchy.first_round(*b).expect("member of some round");
        for a in space.ids() {
            if space.d(a.0, b.0) >= radius {
                continue;
            }
            for j in (k + 1..=n).rev() {
                if seq.selection(j).get(a) != seq.selection(j - 1).get(a) {
                    coincidence.push(CoincidenceViolation {
                        point: a,
                        anchor: *b,
                        round: j,
                    });
                    break;
                }
            }
        }
    }

    Ok(RoundReport {
        n,
        separation,
        selection,
        sup_change,
        strong_bound,
        coincidence,
    })
}

/// Reports for every round of the sequence.
pub fn verify_sequence(phi: &Correspondence, seq: &SelectionSequence) -> Result<Vec<RoundReport>> {
    (1..=seq.num_rounds())
        .map(|n| verify_round_properties(phi, seq, n))
        .collect()
}
