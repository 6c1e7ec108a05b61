//! Closed convex bodies in `R^d` and Euclidean metric projection onto them.
//!
//! Three body classes are supported: affine flats given by a base point and
//! an orthonormal direction basis, closed balls, and H-polytopes
//! `{x : n_i . x <= b_i}` carrying a feasible witness point. Projection onto
//! flats and balls is closed form; polytopes use Dykstra's alternating
//! projection over the halfspaces.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{dist, dot, norm, sub};

/// Stopping tolerance of the polytope projection.
pub const DYKSTRA_TOL: f64 = 1e-10;
pub const DYKSTRA_MAX_SWEEPS: usize = 10_000;

const ORTHONORMAL_TOL: f64 = 1e-10;
const WITNESS_TOL: f64 = 1e-9;
/// Sweeps between attempts to certify the active set.
const POLISH_EVERY: usize = 8;
const POLISH_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct AffineFlat {
    base: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

impl AffineFlat {
    /// `basis` must be orthonormal (Gram matrix equal to the identity within
    /// 1e-10). An empty basis gives the single point `base`.
    pub fn new(base: Vec<f64>, basis: Vec<Vec<f64>>) -> Result<Self> {
        let d = base.len();
        if d == 0 {
            return Err(Error::Config("flat base point is empty".into()));
        }
        for u in &basis {
            if u.len() != d {
                return Err(Error::Shape {
                    expected: d,
                    found: u.len(),
                });
            }
        }
        for (i, u) in basis.iter().enumerate() {
            for (j, v) in basis.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                if (dot(u, v) - target).abs() > ORTHONORMAL_TOL {
                    return Err(Error::Config(format!(
                        "flat basis is not orthonormal at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(AffineFlat { base, basis })
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    fn project(&self, y: &[f64]) -> Vec<f64> {
        let offset = sub(y, &self.base);
        let mut out = self.base.clone();
        for u in &self.basis {
            let c = dot(u, &offset);
            for (o, ui) in out.iter_mut().zip(u) {
                *o += c * ui;
            }
        }
        out
    }

    /// Norm of the component of `y - base` orthogonal to the flat.
    fn distance(&self, y: &[f64]) -> f64 {
        let mut r = sub(y, &self.base);
        for u in &self.basis {
            let c = dot(u, &r);
            for (ri, ui) in r.iter_mut().zip(u) {
                *ri -= c * ui;
            }
        }
        norm(&r)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    center: Vec<f64>,
    radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::Config("ball center is empty".into()));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::param("radius", format!("must be positive, got {radius}")));
        }
        Ok(Ball { center, radius })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn project(&self, y: &[f64]) -> Vec<f64> {
        let off = sub(y, &self.center);
        let len = norm(&off);
        if len <= self.radius {
            return y.to_vec();
        }
        let s = self.radius / len;
        self.center.iter().zip(&off).map(|(c, o)| c + s * o).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    fn violation(&self, x: &[f64], normal_norm: f64) -> f64 {
        ((dot(&self.normal, x) - self.offset) / normal_norm).max(0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Polytope {
    halfspaces: Vec<Halfspace>,
    witness: Vec<f64>,
    normal_sq: Vec<f64>,
}

impl Polytope {
    /// Nonemptiness is certified by `witness`, which must satisfy every
    /// halfspace within 1e-9.
    pub fn new(halfspaces: Vec<Halfspace>, witness: Vec<f64>) -> Result<Self> {
        let d = witness.len();
        if d == 0 {
            return Err(Error::Config("polytope witness is empty".into()));
        }
        let mut normal_sq = Vec::with_capacity(halfspaces.len());
        for (i, h) in halfspaces.iter().enumerate() {
            if h.normal.len() != d {
                return Err(Error::Shape {
                    expected: d,
                    found: h.normal.len(),
                });
            }
            let n2 = dot(&h.normal, &h.normal);
            if !(n2 > 0.0) || !h.offset.is_finite() {
                return Err(Error::Config(format!("halfspace {i} is degenerate")));
            }
            if h.violation(&witness, n2.sqrt()) > WITNESS_TOL {
                return Err(Error::Config(format!(
                    "witness violates halfspace {i}; polytope not certified nonempty"
                )));
            }
            normal_sq.push(n2);
        }
        Ok(Polytope {
            halfspaces,
            witness,
            normal_sq,
        })
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn witness(&self) -> &[f64] {
        &self.witness
    }

    fn max_violation(&self, x: &[f64]) -> f64 {
        self.halfspaces
            .iter()
            .zip(&self.normal_sq)
            .map(|(h, n2)| h.violation(x, n2.sqrt()))
            .fold(0.0, f64::max)
    }

    /// Dykstra's alternating projection. Each sweep visits every halfspace
    /// once, carrying one correction vector per halfspace; the corrections
    /// are nonnegative multiples of the normals and always satisfy
    /// `y = x + sum of corrections`, so they double as KKT multipliers.
    ///
    /// Stops on a certificate: either the projection onto the active set
    /// read off the corrections satisfies the KKT conditions, or the iterate
    /// is feasible within `DYKSTRA_TOL` with a duality gap bounding its
    /// distance to the projection by `DYKSTRA_TOL`.
    fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        if self.max_violation(y) == 0.0 {
            return Ok(y.to_vec());
        }
        let d = y.len();
        let mut x = y.to_vec();
        let mut corrections = vec![vec![0.0; d]; self.halfspaces.len()];
        let mut z = vec![0.0; d];
        let mut residual = f64::INFINITY;
        for sweep in 0..DYKSTRA_MAX_SWEEPS {
            let start = x.clone();
            for ((h, n2), corr) in self
                .halfspaces
                .iter()
                .zip(&self.normal_sq)
                .zip(corrections.iter_mut())
            {
                for k in 0..d {
                    z[k] = x[k] + corr[k];
                }
                let excess = (dot(&h.normal, &z) - h.offset) / n2;
                for k in 0..d {
                    x[k] = if excess > 0.0 {
                        z[k] - excess * h.normal[k]
                    } else {
                        z[k]
                    };
                    corr[k] = z[k] - x[k];
                }
            }
            let change = dist(&start, &x);
            let violation = self.max_violation(&x);
            if sweep % POLISH_EVERY == 0 || change <= DYKSTRA_TOL {
                let active: Vec<usize> = (0..corrections.len())
                    .filter(|&i| norm(&corrections[i]) > 0.0)
                    .collect();
                if let Some(p) = self.polish(y, &active) {
                    return Ok(p);
                }
            }
            let gap = self.duality_gap(&x, &corrections);
            residual = violation.max((2.0 * gap).sqrt());
            if residual <= DYKSTRA_TOL {
                return Ok(x);
            }
        }
        Err(Error::Convergence {
            sweeps: DYKSTRA_MAX_SWEEPS,
            residual,
        })
    }

    /// `sum_i lambda_i (b_i - n_i . x)` with `lambda_i n_i` the correction
    /// of halfspace `i`; bounds half the squared distance to the projection
    /// once `x` is feasible.
    fn duality_gap(&self, x: &[f64], corrections: &[Vec<f64>]) -> f64 {
        self.halfspaces
            .iter()
            .zip(&self.normal_sq)
            .zip(corrections)
            .map(|((h, n2), c)| dot(c, &h.normal) / n2 * (h.offset - dot(&h.normal, x)))
            .sum::<f64>()
            .max(0.0)
    }

    /// Projection of `y` onto `{n_i . x = b_i : i in active}`, returned only
    /// if its multipliers are nonnegative and it satisfies every halfspace,
    /// in which case it is the exact projection onto the polytope.
    fn polish(&self, y: &[f64], active: &[usize]) -> Option<Vec<f64>> {
        if active.is_empty() {
            return None;
        }
        let k = active.len();
        let gram = DMatrix::from_fn(k, k, |r, c| {
            dot(
                &self.halfspaces[active[r]].normal,
                &self.halfspaces[active[c]].normal,
            )
        });
        let rhs = DVector::from_iterator(
            k,
            active
                .iter()
                .map(|&i| dot(&self.halfspaces[i].normal, y) - self.halfspaces[i].offset),
        );
        let lambda = gram.svd(true, true).solve(&rhs, 1e-12).ok()?;
        if lambda.iter().any(|l| !(*l >= 0.0)) {
            return None;
        }
        let mut x = y.to_vec();
        for (l, &i) in lambda.iter().zip(active) {
            for (xk, nk) in x.iter_mut().zip(&self.halfspaces[i].normal) {
                *xk -= l * nk;
            }
        }
        (self.max_violation(&x) <= POLISH_TOL).then_some(x)
    }
}

/// A closed convex value `phi(a)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BodyDocument", into = "BodyDocument")]
pub enum ConvexBody {
    Flat(AffineFlat),
    Ball(Ball),
    Polytope(Polytope),
}

impl ConvexBody {
    pub fn ambient_dim(&self) -> usize {
        match self {
            ConvexBody::Flat(f) => f.base.len(),
            ConvexBody::Ball(b) => b.center.len(),
            ConvexBody::Polytope(p) => p.witness.len(),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        let d = self.ambient_dim();
        if x.len() == d {
            Ok(())
        } else {
            Err(Error::Shape {
                expected: d,
                found: x.len(),
            })
        }
    }

    /// Unique Euclidean nearest point of the body to `y`.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(y)?;
        match self {
            ConvexBody::Flat(f) => Ok(f.project(y)),
            ConvexBody::Ball(b) => Ok(b.project(y)),
            ConvexBody::Polytope(p) => p.project(y),
        }
    }

    /// Euclidean distance from `y` to the body.
    pub fn distance_to(&self, y: &[f64]) -> Result<f64> {
        self.check_dim(y)?;
        match self {
            ConvexBody::Flat(f) => Ok(f.distance(y)),
            ConvexBody::Ball(b) => Ok((dist(y, &b.center) - b.radius).max(0.0)),
            ConvexBody::Polytope(p) => Ok(dist(y, &p.project(y)?)),
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        Ok(self.distance_to(x)? <= tol)
    }
}

/// Wire format of [`ConvexBody`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BodyDocument {
    Flat {
        base: Vec<f64>,
        basis: Vec<Vec<f64>>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Polytope {
        halfspaces: Vec<Halfspace>,
        witness: Vec<f64>,
    },
}

impl TryFrom<BodyDocument> for ConvexBody {
    type Error = Error;

    fn try_from(doc: BodyDocument) -> Result<Self> {
        Ok(match doc {
            BodyDocument::Flat { base, basis } => ConvexBody::Flat(AffineFlat::new(base, basis)?),
            BodyDocument::Ball { center, radius } => ConvexBody::Ball(Ball::new(center, radius)?),
            BodyDocument::Polytope { halfspaces, witness } => {
                ConvexBody::Polytope(Polytope::new(halfspaces, witness)?)
            }
        })
    }
}

impl From<ConvexBody> for BodyDocument {
    fn from(body: ConvexBody) -> Self {
        match body {
            ConvexBody::Flat(f) => BodyDocument::Flat {
                base: f.base,
                basis: f.basis,
            },
            ConvexBody::Ball(b) => BodyDocument::Ball {
                center: b.center,
                radius: b.radius,
            },
            ConvexBody::Polytope(p) => BodyDocument::Polytope {
                halfspaces: p.halfspaces,
                witness: p.witness,
            },
        }
    }
}
