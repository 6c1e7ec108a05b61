//! Positively homogeneous right inverses of linear surjections.
//!
//! For `T : R^n -> R^m` of full row rank the inverse images
//! `y -> T^-1{y}` form a lower pointwise `1/gamma`-Lipschitz correspondence,
//! `gamma` being the smallest singular value. Running the selection
//! iteration on a sample of the unit sphere of `R^m` gives a selection
//! `tau` of it; extending `tau` homogeneously along rays gives a right
//! inverse `tau(y) = |y| tau(y / |y|)` with `T tau(y) = y` on every sampled
//! ray.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::correspondence::Correspondence;
use crate::error::{Error, Result};
use crate::linalg::LinearSurjection;
use crate::lipschitz::{
    audit_selection, verify_homogeneous_plip, HomogeneousPlipReport, Ray, SelectionAudit, SphereTable,
};
use crate::metric::{dyadic, MetricKind, PointId, SampledMetricSpace};
use crate::par;
use crate::selection::{run_iteration, IterationConfig, Locality, Selection, SelectionSequence};
use crate::vector::{dist, norm, scale};

/// Sampled directions closer than this are treated as duplicates.
pub const DEDUP_TOL: f64 = 1e-6;
/// Tolerance of the identity `T tau(y) = y`.
pub const IDENTITY_TOL: f64 = 1e-8;
/// Relative tolerance of `tau(lambda y) = lambda tau(y)`.
pub const HOMOGENEITY_TOL: f64 = 1e-12;

/// `gamma` with `gamma * ball(Y) <= T(ball(X))` for Euclidean norms.
pub fn openness_constant(t: &LinearSurjection) -> f64 {
    t.sigma_min()
}

fn circle_point(i: usize, count: usize) -> Vec<f64> {
    if (4 * i).is_multiple_of(count) {
        return match 4 * i / count {
            0 => vec![1.0, 0.0],
            1 => vec![0.0, 1.0],
            2 => vec![-1.0, 0.0],
            _ => vec![0.0, -1.0],
        };
    }
    let (s, c) = (std::f64::consts::TAU * i as f64 / count as f64).sin_cos();
    vec![c, s]
}

/// Unit directions of `R^m`: `{-1, +1}` for `m = 1`, an angular grid for
/// `m = 2`, seeded normalized Gaussian draws for `m >= 3`.
pub fn sphere_directions(m: usize, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if m == 0 {
        return Err(Error::param("m", "dimension must be positive"));
    }
    if count < 2 {
        return Err(Error::param(
            "sphere_count",
            format!("need at least 2 points, got {count}"),
        ));
    }
    match m {
        1 => Ok(vec![vec![-1.0], vec![1.0]]),
        2 => Ok((0..count).map(|i| circle_point(i, count)).collect()),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
            let mut attempts = 0;
            while out.len() < count {
                attempts += 1;
                if attempts > 100 * count {
                    return Err(Error::Precondition(format!(
                        "could not draw {count} distinct directions in R^{m}"
                    )));
                }
                let g: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
                let len = norm(&g);
                if !(len > 1e-12) {
                    continue;
                }
                let u = scale(&g, 1.0 / len);
                if out.iter().all(|v| dist(v, &u) > DEDUP_TOL) {
                    out.push(u);
                }
            }
            Ok(out)
        }
    }
}

/// [`sphere_directions`] as a space under the chord metric.
pub fn sphere_sample(m: usize, count: usize, seed: u64) -> Result<SampledMetricSpace> {
    SampledMetricSpace::from_coords(MetricKind::L2, sphere_directions(m, count, seed)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BartleGravesConfig {
    pub beta: f64,
    pub rounds: usize,
    pub sphere_count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "default_delta_min")]
    pub delta_min: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_delta_min() -> f64 {
    1e-9
}

fn default_tol() -> f64 {
    1e-9
}

impl BartleGravesConfig {
    pub fn new(beta: f64, rounds: usize, sphere_count: usize, seed: u64) -> Self {
        BartleGravesConfig {
            beta,
            rounds,
            sphere_count,
            seed,
            epsilon: None,
            delta_min: default_delta_min(),
            tol: default_tol(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RightInverse {
    pub t: LinearSurjection,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `tau` on the sphere sample.
    pub table: SphereTable,
    /// `2 beta + |tau|_inf`
    pub eta: f64,
    /// Final separation `B_N`; its rays form the dense set.
    pub dense_set: Vec<PointId>,
    pub tail_bound: f64,
    /// `max_y |tau(y) - T^+ y|` over the sphere sample.
    pub gap: f64,
    pub correspondence: Correspondence,
    pub sequence: SelectionSequence,
}

/// Runs the selection iteration for `y -> T^-1{y}` on the unit sphere from
/// `f0 = T^+` and extends the limit homogeneously.
pub fn build_right_inverse(t: &LinearSurjection, config: &BartleGravesConfig) -> Result<RightInverse> {
    let gamma = openness_constant(t);
    let alpha = 1.0 / gamma;
    if !(config.beta > alpha) {
        return Err(Error::param(
            "beta",
            format!("must exceed 1/gamma = {alpha}, got {}", config.beta),
        ));
    }
    let sample = sphere_sample(t.codomain_dim(), config.sphere_count, config.seed)?;
    let directions = sample.all_coords().expect("coordinate space").to_vec();
    let phi = Correspondence::inverse_image(t, sample)?;
    let f0 = Selection::new(
        directions
            .iter()
            .map(|y| t.min_norm_solution(y))
            .collect::<Result<_>>()?,
        0,
    );
    let iteration = IterationConfig {
        alpha,
        beta: config.beta,
        epsilon: config.epsilon,
        rounds: config.rounds,
        delta_min: config.delta_min,
        tol: config.tol,
        locality: Locality::Unbounded,
    };
    let sequence = run_iteration(&phi, f0.clone(), &iteration)?;
    let limit = sequence.limit();
    let gap = limit.selection.sup_distance(&f0).0;
    let table = SphereTable::new(directions, limit.selection.into_values())?;
    let eta = 2.0 * config.beta + table.sup_norm();
    let dense_set = sequence.hierarchy.members(config.rounds).to_vec();
    Ok(RightInverse {
        t: t.clone(),
        gamma,
        alpha,
        beta: config.beta,
        table,
        eta,
        dense_set,
        tail_bound: limit.tail_bound,
        gap,
        correspondence: phi,
        sequence,
    })
}

/// `tau(y)`.
pub fn evaluate_right_inverse(ri: &RightInverse, y: &[f64]) -> Result<Vec<f64>> {
    ri.table.extend(y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyOptions {
    /// Ray scales `lambda` tried in every check.
    pub scales: Vec<f64>,
    /// Probe radii per ray point in the plip check.
    pub levels: usize,
    pub tol: f64,
    /// Seeded off-sample directions whose residuals are reported.
    pub off_sample: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            scales: vec![0.5, 1.0, 2.0, 10.0],
            levels: 6,
            tol: 1e-6,
            off_sample: 32,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RayWitness {
    pub direction: usize,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub passed: bool,
    /// Largest `|T tau(lambda u) - lambda u|` over sampled rays.
    pub worst_residual: f64,
    pub witness: Option<RayWitness>,
    /// Same quantity at off-sample directions, where `tau` uses the nearest
    /// sampled direction; reported, not checked.
    pub off_sample_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HomogeneityCheck {
    pub passed: bool,
    /// Largest `|tau(lambda y) - lambda tau(y)| / max(1, |lambda tau(y)|)`.
    pub worst_relative: f64,
    /// Whether every tested pair agreed bit for bit.
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoveringCheck {
    pub passed: bool,
    pub radius: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RightInverseReport {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub tail_bound: f64,
    pub gap: f64,
    pub sphere_points: usize,
    pub dense_set: Vec<PointId>,
    pub identity: IdentityCheck,
    pub homogeneity: HomogeneityCheck,
    pub plip: HomogeneousPlipReport,
    pub covering: CoveringCheck,
    pub sphere_audit: SelectionAudit,
    pub passed: bool,
}

fn residual(t: &LinearSurjection, tau: &[f64], y: &[f64]) -> Result<f64> {
    Ok(dist(&t.apply(tau)?, y))
}

/// Checks the right-inverse identity, homogeneity, the plip bound on the
/// dense rays, and density of `B_N`.
pub fn verify_right_inverse(ri: &RightInverse, options: &VerifyOptions) -> Result<RightInverseReport> {
    if options.scales.is_empty() || options.scales.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(Error::param("scales", "ray scales must be positive and finite"));
    }
    let dirs = ri.table.directions();
    let m = ri.table.domain_dim();

    let rays: Vec<(usize, f64)> = (0..dirs.len())
        .flat_map(|i| options.scales.iter().map(move |&l| (i, l)))
        .collect();
    let residuals = par::try_map_slice(&rays, |&(i, l)| {
        let y = scale(&dirs[i], l);
        residual(&ri.t, &ri.table.extend(&y)?, &y)
    })?;
    let mut worst = (0.0f64, None);
    for (&(direction, lambda), &r) in rays.iter().zip(&residuals) {
        if r > worst.0 {
            worst = (r, Some(RayWitness { direction, lambda }));
        }
    }

    let off: Vec<Vec<f64>> = if options.off_sample > 0 {
        sphere_directions(m.max(3), options.off_sample.max(2), options.seed ^ 0x5eed)?
            .into_iter()
            .map(|u| if m >= 3 { u } else { off_grid(m, &u) })
            .collect()
    } else {
        Vec::new()
    };
    let off_residuals = par::try_map_slice(&off, |u| {
        options
            .scales
            .iter()
            .map(|&l| {
                let y = scale(u, l);
                residual(&ri.t, &ri.table.extend(&y)?, &y)
            })
            .try_fold(0.0f64, |acc, r| r.map(|r| acc.max(r)))
    })?;
    let identity = IdentityCheck {
        passed: worst.0 <= IDENTITY_TOL,
        worst_residual: worst.0,
        witness: worst.1,
        off_sample_residual: off_residuals.into_iter().fold(0.0, f64::max),
    };

    let base_points: Vec<Vec<f64>> = ri
        .dense_set
        .iter()
        .map(|b| dirs[b.0].clone())
        .chain(off.iter().cloned())
        .collect();
    let deviations = par::try_map_slice(&base_points, |y| {
        let tau_y = ri.table.extend(y)?;
        options
            .scales
            .iter()
            .map(|&l| {
                let lhs = ri.table.extend(&scale(y, l))?;
                let rhs = scale(&tau_y, l);
                Ok((dist(&lhs, &rhs) / norm(&rhs).max(1.0), lhs == rhs))
            })
            .try_fold((0.0f64, true), |(w, e), r: Result<(f64, bool)>| {
                r.map(|(d, same)| (w.max(d), e && same))
            })
    })?;
    let (worst_relative, exact) = deviations
        .into_iter()
        .fold((0.0f64, true), |(w, e), (d, s)| (w.max(d), e && s));
    let homogeneity = HomogeneityCheck {
        passed: worst_relative <= HOMOGENEITY_TOL,
        worst_relative,
        exact,
    };

    let plip_rays: Vec<Ray> = ri
        .dense_set
        .iter()
        .map(|b| Ray {
            direction: b.0,
            scales: options.scales.clone(),
        })
        .collect();
    let plip = verify_homogeneous_plip(&ri.table, ri.beta, &plip_rays, options.levels, options.tol)?;

    let space = ri.correspondence.space();
    let n = ri.sequence.num_rounds();
    let radius = space.covering_radius(&ri.dense_set)?;
    let bound = dyadic(n - 1);
    let covering = CoveringCheck {
        passed: radius < bound,
        radius,
        bound,
    };
    let sphere_audit = audit_selection(
        space,
        &ri.sequence,
        crate::lipschitz::DEFAULT_INFORMATIVE,
        options.tol,
    )?;

    let passed = identity.passed
        && homogeneity.passed
        && plip.passed
        && plip.bound == ri.eta
        && covering.passed
        && sphere_audit.passed;
    Ok(RightInverseReport {
        gamma: ri.gamma,
        alpha: ri.alpha,
        beta: ri.beta,
        epsilon: ri.sequence.epsilon,
        eta: ri.eta,
        tail_bound: ri.tail_bound,
        gap: ri.gap,
        sphere_points: dirs.len(),
        dense_set: ri.dense_set.clone(),
        identity,
        homogeneity,
        plip,
        covering,
        sphere_audit,
        passed,
    })
}

/// Projects a direction drawn in `R^3` to an off-grid unit direction of
/// `R^m` for `m < 3`.
fn off_grid(m: usize, u: &[f64]) -> Vec<f64> {
    if m == 1 {
        return vec![if u[0] < 0.0 { -1.0 } else { 1.0 }];
    }
    let v = &u[..m];
    let len = norm(v);
    if len > 1e-12 {
        scale(v, 1.0 / len)
    } else {
        vec![1.0, 0.0]
    }
}
