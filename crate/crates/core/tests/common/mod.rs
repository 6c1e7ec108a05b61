//! Reference implementations used only by tests. They are deliberately
//! brute force and share no code with the library beyond its data types.

#![allow(dead_code, clippy::needless_range_loop)]

use lipselect::{
    Ball, ConvexBody, Correspondence, Halfspace, PointId, Polytope, SampledMetricSpace, Selection,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Solves a small dense system by Gaussian elimination with partial
/// pivoting; `None` when (numerically) singular.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Projection onto `{x : h.normal . x <= h.offset}` by enumerating every
/// set of at most `dim` active constraints, projecting onto the affine set
/// where they hold with equality, and keeping the nearest feasible
/// candidate.
pub fn face_enumeration_projection(halfspaces: &[Halfspace], y: &[f64]) -> Vec<f64> {
    let d = y.len();
    let feasible = |x: &[f64]| halfspaces.iter().all(|h| dot(&h.normal, x) - h.offset <= 1e-9);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let m = halfspaces.len();
    for mask in 0u32..(1 << m) {
        let active: Vec<&Halfspace> = (0..m)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &halfspaces[i])
            .collect();
        if active.len() > d {
            continue;
        }
        let candidate = if active.is_empty() {
            y.to_vec()
        } else {
            let gram: Vec<Vec<f64>> = active
                .iter()
                .map(|a| active.iter().map(|b| dot(&a.normal, &b.normal)).collect())
                .collect();
            let rhs: Vec<f64> = active.iter().map(|a| dot(&a.normal, y) - a.offset).collect();
            let Some(lam) = solve(gram, rhs) else { continue };
            let mut x = y.to_vec();
            for (a, l) in active.iter().zip(&lam) {
                for k in 0..d {
                    x[k] -= l * a.normal[k];
                }
            }
            x
        };
        if feasible(&candidate) {
            let dd = dist(&candidate, y);
            if best.as_ref().is_none_or(|(b, _)| dd < *b) {
                best = Some((dd, candidate));
            }
        }
    }
    best.expect("the witness region is nonempty").1
}

/// Random polytope in `R^dim` with `count` halfspaces around a strictly
/// interior witness.
pub fn random_polytope(r: &mut ChaCha8Rng, dim: usize, count: usize) -> (Vec<Halfspace>, Vec<f64>) {
    let witness: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
    let hs = (0..count)
        .map(|_| {
            let normal: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
            let offset = dot(&normal, &witness) + r.random_range(0.05..1.0);
            Halfspace { normal, offset }
        })
        .collect();
    (hs, witness)
}

pub fn polytope(hs: Vec<Halfspace>, witness: Vec<f64>) -> ConvexBody {
    ConvexBody::Polytope(Polytope::new(hs, witness).unwrap())
}

/// Random space of `count` points in `[0, 1]^dim` with an `l2` metric.
pub fn random_space(r: &mut ChaCha8Rng, count: usize, dim: usize) -> SampledMetricSpace {
    let coords: Vec<Vec<f64>> = (0..count)
        .map(|_| (0..dim).map(|_| r.random_range(0.0..1.0)).collect())
        .collect();
    SampledMetricSpace::from_coords(lipselect::MetricKind::L2, coords).unwrap()
}

/// Checks separation and maximality of `members` at radius `r` pair by pair.
pub fn is_maximal_separation(space: &SampledMetricSpace, members: &[PointId], r: f64) -> bool {
    let separated = members.iter().enumerate().all(|(i, a)| {
        members[i + 1..]
            .iter()
            .all(|b| space.distance(*a, *b).unwrap() >= r)
    });
    let maximal = space
        .ids()
        .filter(|a| !members.contains(a))
        .all(|a| members.iter().any(|b| space.distance(a, *b).unwrap() < r));
    separated && maximal
}

/// Largest separated subset by exhaustive search, for tiny spaces.
pub fn all_maximal_separations(space: &SampledMetricSpace, r: f64) -> Vec<Vec<PointId>> {
    let n = space.len();
    (0u32..(1 << n))
        .map(|mask| {
            (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(PointId)
                .collect::<Vec<_>>()
        })
        .filter(|m: &Vec<PointId>| !m.is_empty() && is_maximal_separation(space, m, r))
        .collect()
}

/// Grid of `count` points on `[0, 1]`.
pub fn unit_grid(count: usize) -> Vec<f64> {
    (0..count).map(|i| i as f64 / (count - 1) as f64).collect()
}

/// Ball-valued correspondence on a grid of `[0, 1]` whose centers move
/// along a smooth curve with speed at most `speed`, plus an initial
/// selection on the boundary of the balls with slope between the speed and
/// `beta`.
pub struct BallInstance {
    pub phi: Correspondence,
    pub f0: Selection,
    pub alpha: f64,
    pub beta: f64,
}

pub fn random_ball_instance(seed: u64, count: usize) -> BallInstance {
    let mut r = rng(seed);
    let dim = r.random_range(1..=3usize);
    let freq: Vec<f64> = (0..dim).map(|_| r.random_range(0.5..2.0)).collect();
    let phase: Vec<f64> = (0..dim)
        .map(|_| r.random_range(0.0..std::f64::consts::TAU))
        .collect();
    let amp: Vec<f64> = (0..dim).map(|_| r.random_range(0.1..0.5)).collect();
    let radius = r.random_range(0.2..0.6);
    let speed: f64 = amp
        .iter()
        .zip(&freq)
        .map(|(a, w)| (a * w).powi(2))
        .sum::<f64>()
        .sqrt();
    let center = |x: f64| -> Vec<f64> {
        (0..dim)
            .map(|k| amp[k] * (freq[k] * x + phase[k]).sin())
            .collect()
    };
    let xs = unit_grid(count);
    let space = SampledMetricSpace::from_line(&xs).unwrap();
    let phi = Correspondence::from_fn(space, |a| {
        Ok(ConvexBody::Ball(Ball::new(center(xs[a.0]), radius)?))
    })
    .unwrap();
    // f0 rides a point offset from the center inside the ball
    let wobble = r.random_range(0.5..1.5);
    let f0 = Selection::new(
        xs.iter()
            .map(|&x| {
                let mut c = center(x);
                c[0] += 0.5 * radius * (wobble * x).cos();
                c
            })
            .collect(),
        0,
    );
    let alpha = speed * 1.05 + 1e-3;
    let beta = alpha + r.random_range(0.5..1.5);
    BallInstance { phi, f0, alpha, beta }
}

/// Singular values of a 2x2 matrix in closed form, largest first.
pub fn singular_values_2x2(m: [[f64; 2]; 2]) -> (f64, f64) {
    let [[a, b], [c, d]] = m;
    let s1 = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    let disc = (s1 * s1 - 4.0 * det * det).max(0.0).sqrt();
    (((s1 + disc) / 2.0).sqrt(), ((s1 - disc) / 2.0).max(0.0).sqrt())
}

/// Smallest singular value of a full-row-rank `m x n` matrix with `m <= 2`
/// from the eigenvalues of `T T^t`.
pub fn sigma_min_oracle(rows: &[Vec<f64>]) -> f64 {
    match rows.len() {
        1 => dot(&rows[0], &rows[0]).sqrt(),
        2 => {
            let g = [
                [dot(&rows[0], &rows[0]), dot(&rows[0], &rows[1])],
                [dot(&rows[1], &rows[0]), dot(&rows[1], &rows[1])],
            ];
            let tr = g[0][0] + g[1][1];
            let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
            let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
            // smaller eigenvalue via det / larger, avoiding cancellation
            let large = tr / 2.0 + disc;
            (det / large).sqrt()
        }
        _ => panic!("oracle covers at most two rows"),
    }
}
