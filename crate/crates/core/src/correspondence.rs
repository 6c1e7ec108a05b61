//! Convex-valued correspondences over a sampled metric space.
//!
//! A [`Correspondence`] materializes `phi` as one [`ConvexBody`] per sample
//! point. Local selections anchored at `(b, y)` are built by projecting
//! `y` onto every value `phi(a)`: when `phi` satisfies the lower pointwise
//! Lipschitz inequality at `b` with some rate, the projection stays within
//! `rate * d(b, a)` of `y`, so the resulting map is a selection that is
//! strongly pointwise Lipschitz at `b` with that rate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::convex::{AffineFlat, ConvexBody};
use crate::error::{Error, Result};
use crate::linalg::LinearSurjection;
use crate::metric::{PointId, SampledMetricSpace, SpaceDocument};
use crate::par;
use crate::selection::Selection;
use crate::vector::dist;

#[derive(Clone, Debug)]
pub struct Correspondence {
    space: SampledMetricSpace,
    bodies: Vec<ConvexBody>,
    ambient_dim: usize,
}

/// `{"space": <space>, "bodies": {"<point id>": <body>, ...}}`
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrespondenceDocument {
    pub space: SpaceDocument,
    pub bodies: BTreeMap<usize, ConvexBody>,
}

/// Outcome of a lower pointwise Lipschitz check at one anchor.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerPtlipCheck {
    pub passed: bool,
    /// Sample point with the smallest slack `rate * d(b, a) - dist(y, phi(a))`.
    pub witness: PointId,
    pub slack: f64,
}

impl Correspondence {
    pub fn new(space: SampledMetricSpace, bodies: Vec<ConvexBody>) -> Result<Self> {
        if bodies.len() != space.len() {
            return Err(Error::Config(format!(
                "{} bodies for {} points",
                bodies.len(),
                space.len()
            )));
        }
        let ambient_dim = bodies[0].ambient_dim();
        for b in &bodies {
            if b.ambient_dim() != ambient_dim {
                return Err(Error::Shape {
                    expected: ambient_dim,
                    found: b.ambient_dim(),
                });
            }
        }
        Ok(Correspondence {
            space,
            bodies,
            ambient_dim,
        })
    }

    pub fn from_fn(space: SampledMetricSpace, f: impl Fn(PointId) -> Result<ConvexBody>) -> Result<Self> {
        let bodies = space.ids().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(space, bodies)
    }

    pub fn constant(space: SampledMetricSpace, body: ConvexBody) -> Result<Self> {
        let bodies = vec![body; space.len()];
        Self::new(space, bodies)
    }

    /// `phi(y) = T^-1{y}` for each sampled `y`: the flat through `T^+ y`
    /// spanned by an orthonormal kernel basis of `T`.
    pub fn inverse_image(t: &LinearSurjection, sample: SampledMetricSpace) -> Result<Self> {
        let m = t.codomain_dim();
        match sample.dim() {
            Some(d) if d == m => {}
            Some(d) => {
                return Err(Error::Shape {
                    expected: m,
                    found: d,
                })
            }
            None => {
                return Err(Error::Config(
                    "inverse-image sample needs codomain coordinates".into(),
                ))
            }
        }
        let kernel = t.kernel_basis().to_vec();
        let bodies = sample
            .all_coords()
            .expect("checked above")
            .iter()
            .map(|y| {
                let base = t.min_norm_solution(y)?;
                Ok(ConvexBody::Flat(AffineFlat::new(base, kernel.clone())?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sample, bodies)
    }

    pub fn from_document(doc: CorrespondenceDocument) -> Result<Self> {
        let space = SampledMetricSpace::from_document(doc.space)?;
        let n = space.len();
        if let Some(extra) = doc.bodies.keys().find(|&&k| k >= n) {
            return Err(Error::UnknownPoint(PointId(*extra)));
        }
        let mut bodies = Vec::with_capacity(n);
        for i in 0..n {
            match doc.bodies.get(&i) {
                Some(b) => bodies.push(b.clone()),
                None => return Err(Error::Config(format!("no body for point {i}"))),
            }
        }
        Self::new(space, bodies)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(s)?)
    }

    pub fn to_document(&self) -> CorrespondenceDocument {
        CorrespondenceDocument {
            space: self.space.to_document(),
            bodies: self.bodies.iter().cloned().enumerate().collect(),
        }
    }

    pub fn space(&self) -> &SampledMetricSpace {
        &self.space
    }

    pub fn bodies(&self) -> &[ConvexBody] {
        &self.bodies
    }

    pub fn body(&self, id: PointId) -> Result<&ConvexBody> {
        self.bodies.get(id.0).ok_or(Error::UnknownPoint(id))
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// The selection `a -> project(phi(a), anchor)`.
    pub fn project_all(&self, anchor: &[f64]) -> Result<Selection> {
        let values = par::try_map_slice(&self.bodies, |b| b.project(anchor))?;
        Ok(Selection::new(values, 0))
    }

    /// Largest distance from `values[a]` to `phi(a)`, with its point.
    pub fn selection_defect(&self, values: &[Vec<f64>]) -> Result<(f64, PointId)> {
        if values.len() != self.bodies.len() {
            return Err(Error::Config(format!(
                "{} values for {} points",
                values.len(),
                self.bodies.len()
            )));
        }
        let dists = par::try_map_range(self.bodies.len(), |i| self.bodies[i].distance_to(&values[i]))?;
        Ok(argmax(&dists))
    }

    /// Checks `dist(y, phi(a)) <= rate * d(b, a) + tol` for every sampled `a`.
    pub fn check_lower_ptlip(&self, b: PointId, y: &[f64], rate: f64, tol: f64) -> Result<LowerPtlipCheck> {
        self.require_anchor(b, y, tol)?;
        let slacks = par::try_map_range(self.bodies.len(), |a| {
            Ok::<_, Error>(rate * self.space.d(b.0, a) - self.bodies[a].distance_to(y)?)
        })?;
        let (neg, witness) = argmax(&slacks.iter().map(|s| -s).collect::<Vec<_>>());
        Ok(LowerPtlipCheck {
            passed: -neg >= -tol,
            witness,
            slack: -neg,
        })
    }

    /// Local selection `g_b(a) = project(phi(a), y)` anchored at `g_b(b) = y`.
    ///
    /// Fails with [`Error::Rate`] if some `a` has
    /// `|g_b(a) - y| > rate * d(b, a) + tol`.
    pub fn local_strong_selection(&self, b: PointId, y: &[f64], rate: f64, tol: f64) -> Result<Selection> {
        self.require_anchor(b, y, tol)?;
        let mut values = par::try_map_slice(&self.bodies, |body| body.project(y))?;
        let excess: Vec<f64> = values
            .iter()
            .enumerate()
            .map(|(a, g)| dist(g, y) - rate * self.space.d(b.0, a))
            .collect();
        let (worst, witness) = argmax(&excess);
        if worst > tol {
            return Err(Error::Rate {
                rate,
                witness,
                excess: worst,
            });
        }
        values[b.0] = y.to_vec();
        Ok(Selection::new(values, 0))
    }

    fn require_anchor(&self, b: PointId, y: &[f64], tol: f64) -> Result<()> {
        let body = self.body(b)?;
        if !body.contains(y, tol)? {
            return Err(Error::Precondition(format!(
                "anchor value is not in phi({b}) (distance {:e})",
                body.distance_to(y)?
            )));
        }
        Ok(())
    }
}

/// Maximum with the first index attaining it.
pub(crate) fn argmax(values: &[f64]) -> (f64, PointId) {
    let mut best = (f64::NEG_INFINITY, PointId(0));
    for (i, &v) in values.iter().enumerate() {
        if v > best.0 {
            best = (v, PointId(i));
        }
    }
    best
}
