use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use lipselect::correspondence::CorrespondenceDocument;
use lipselect::linalg::MatrixDocument;
use lipselect::lipschitz::{self, Consistency, PlipProfile, SelectionAudit};
use lipselect::metric::{RoundCheck, SeparationRound, SpaceDocument};
use lipselect::report;
use lipselect::selection::{self, RoundReport};
use lipselect::{
    bartle_graves, Correspondence, IterationConfig, LinearSurjection, PointId, SampledMetricSpace, Selection,
    SelectionSequence,
};
use serde::{Deserialize, Serialize};

use crate::config::{read_json, required, CliError};

type Outcome = Result<bool, CliError>;

fn load_space(path: &Path) -> Result<SampledMetricSpace, CliError> {
    Ok(SampledMetricSpace::from_document(read_json::<SpaceDocument>(
        path,
    )?)?)
}

fn load_correspondence(path: &Path) -> Result<Correspondence, CliError> {
    Ok(Correspondence::from_document(
        read_json::<CorrespondenceDocument>(path)?,
    )?)
}

/// Writes JSON to `out`, or to stdout without one.
fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), CliError> {
    match out {
        Some(p) => report::write_json(p, value)?,
        None => print!("{}", report::to_json_string(value)?),
    }
    Ok(())
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    std::fs::write(dir.join(name), text).map_err(|e| CliError::Core(e.into()))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Core(e.into()))
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct SeparateArgs {
    /// Space document
    #[arg(long)]
    space: Option<PathBuf>,
    /// Single separation radius
    #[arg(long)]
    radius: Option<f64>,
    /// Build the hierarchy with radii 2^-(n-1), n = 1..=rounds
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct SeparationReport {
    r: f64,
    #[serde(rename = "B")]
    members: Vec<PointId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    points: Option<Vec<Vec<f64>>>,
    covering_radius: f64,
    min_separation: Option<f64>,
    passed: bool,
}

#[derive(Serialize)]
struct HierarchyReport<'a> {
    rounds: &'a [SeparationRound],
    checks: Vec<RoundCheck>,
    passed: bool,
}

pub fn separate(args: SeparateArgs) -> Outcome {
    let space = load_space(&required(args.space, "space")?)?;
    match (args.radius, args.rounds) {
        (Some(r), None) => {
            let members = space.greedy_maximal_separation(r, &[])?;
            let covering_radius = space.covering_radius(&members)?;
            let sep = space.min_pairwise_distance(&members);
            let rep = SeparationReport {
                r,
                points: space
                    .all_coords()
                    .map(|c| members.iter().map(|b| c[b.0].clone()).collect()),
                members,
                covering_radius,
                min_separation: sep.is_finite().then_some(sep),
                passed: sep >= r && covering_radius < r,
            };
            emit(args.out.as_deref(), &rep)?;
            Ok(rep.passed)
        }
        (None, Some(n)) => {
            let h = space.build_separation_hierarchy(n)?;
            let checks = h.check(&space)?;
            let passed = checks.iter().all(RoundCheck::passed);
            emit(
                args.out.as_deref(),
                &HierarchyReport {
                    rounds: &h.rounds,
                    checks,
                    passed,
                },
            )?;
            Ok(passed)
        }
        _ => Err(CliError::Schema(
            "give exactly one of --radius and --rounds".into(),
        )),
    }
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct SelectArgs {
    /// Correspondence document
    #[arg(long)]
    correspondence: Option<PathBuf>,
    /// Iteration config document
    #[arg(long)]
    iteration: Option<PathBuf>,
    /// Initial selection: projections of this point onto every value
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    anchor: Option<Vec<f64>>,
    /// Initial selection as a JSON array of value vectors
    #[arg(long)]
    initial: Option<PathBuf>,
    /// Directory for sequence.json, report.json and f_<n>.csv
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct SelectReport<'a> {
    alpha: f64,
    beta: f64,
    epsilon: f64,
    rounds: Vec<RoundReport>,
    tail_bound: f64,
    /// `sum_n sup_change_n`, bounded by `eps (1 - 2^-N)`.
    total_change: f64,
    audit: &'a SelectionAudit,
    passed: bool,
}

pub fn select(args: SelectArgs) -> Outcome {
    let phi = load_correspondence(&required(args.correspondence, "correspondence")?)?;
    let config: IterationConfig = read_json(&required(args.iteration, "iteration")?)?;
    let f0 = match (args.anchor, args.initial) {
        (Some(_), Some(_)) => {
            return Err(CliError::Schema(
                "give at most one of --anchor and --initial".into(),
            ))
        }
        (Some(a), None) => phi.project_all(&a)?,
        (None, Some(path)) => Selection::new(read_json::<Vec<Vec<f64>>>(&path)?, 0),
        (None, None) => phi.project_all(&vec![0.0; phi.ambient_dim()])?,
    };
    let seq = selection::run_iteration(&phi, f0, &config)?;
    let rounds = selection::verify_sequence(&phi, &seq)?;
    let audit = lipschitz::audit_selection(
        phi.space(),
        &seq,
        lipschitz::DEFAULT_INFORMATIVE,
        lipschitz::AUDIT_TOL,
    )?;
    let passed = rounds.iter().all(RoundReport::passed) && audit.passed;
    let rep = SelectReport {
        alpha: seq.alpha,
        beta: seq.beta,
        epsilon: seq.epsilon,
        tail_bound: seq.limit().tail_bound,
        total_change: seq.rounds.iter().map(|r| r.sup_change).sum(),
        rounds,
        audit: &audit,
        passed,
    };
    match args.out_dir {
        Some(dir) => {
            ensure_dir(&dir)?;
            report::write_json(&dir.join("sequence.json"), &seq)?;
            report::write_json(&dir.join("report.json"), &rep)?;
            for (n, f) in seq.selections.iter().enumerate() {
                write_file(&dir, &format!("f_{n}.csv"), &report::selection_csv(f)?)?;
            }
            print_rounds(&rep.rounds);
        }
        None => emit(None, &rep)?,
    }
    Ok(passed)
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct PlipArgs {
    /// Space document
    #[arg(long)]
    space: Option<PathBuf>,
    /// Values as a JSON array of vectors, or {"values": [...]}
    #[arg(long)]
    table: Option<PathBuf>,
    /// Points to profile (default: all)
    #[arg(long, value_delimiter = ',')]
    points: Option<Vec<usize>>,
    /// Decreasing radii (default: halving down to each point's nearest neighbor)
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    /// Number of smallest informative radii in the estimate
    #[arg(long)]
    k: Option<usize>,
    /// Fail when an estimate exceeds this bound
    #[arg(long)]
    bound: Option<f64>,
    /// Also compare open- and closed-ball estimates at this relative tolerance
    #[arg(long)]
    consistency_tol: Option<f64>,
    /// Directory for profiles.csv, summary.json and report.json
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TableDocument {
    Bare(Vec<Vec<f64>>),
    Wrapped { values: Vec<Vec<f64>> },
}

#[derive(Serialize)]
struct PlipReport<'a> {
    profiles: &'a [PlipProfile],
    estimates: BTreeMap<PointId, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bound: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    consistency: Vec<(PointId, Consistency)>,
    passed: bool,
}

pub fn plip(args: PlipArgs) -> Outcome {
    let space = load_space(&required(args.space, "space")?)?;
    let values = match read_json::<TableDocument>(&required(args.table, "table")?)? {
        TableDocument::Bare(v) | TableDocument::Wrapped { values: v } => v,
    };
    let points: Vec<PointId> = match args.points {
        Some(p) => p.into_iter().map(PointId).collect(),
        None => space.ids().collect(),
    };
    let k = args.k.unwrap_or(lipschitz::DEFAULT_INFORMATIVE);
    let profiles = lipschitz::plip_profiles(&space, &values, &points, args.radii.as_deref(), k)?;
    let estimates: BTreeMap<PointId, f64> = profiles.iter().map(|p| (p.point, p.estimate)).collect();
    let mut consistency = Vec::new();
    if let Some(tol) = args.consistency_tol {
        for p in &points {
            let radii = match &args.radii {
                Some(r) => r.clone(),
                None => lipschitz::default_radii(&space, *p, lipschitz::DEFAULT_RADII)?,
            };
            consistency.push((
                *p,
                lipschitz::open_closed_consistency(&space, &values, *p, &radii, k, tol)?,
            ));
        }
    }
    let passed = args.bound.is_none_or(|b| estimates.values().all(|e| *e <= b))
        && consistency.iter().all(|(_, c)| c.consistent);
    let rep = PlipReport {
        profiles: &profiles,
        estimates,
        bound: args.bound,
        consistency,
        passed,
    };
    match args.out_dir {
        Some(dir) => {
            ensure_dir(&dir)?;
            write_file(&dir, "profiles.csv", &report::profile_csv(&profiles)?)?;
            report::write_json(&dir.join("summary.json"), &rep.estimates)?;
            report::write_json(&dir.join("report.json"), &rep)?;
        }
        None => emit(None, &rep)?,
    }
    Ok(passed)
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct BartleGravesArgs {
    /// Matrix document {"matrix": [[...], ...]}
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    sphere_count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Report JSON (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV of the sphere table: point_id, y..., x...
    #[arg(long)]
    csv: Option<PathBuf>,
}

pub fn bartle_graves(args: BartleGravesArgs) -> Outcome {
    let doc: MatrixDocument = read_json(&required(args.matrix, "matrix")?)?;
    let t = LinearSurjection::from_document(&doc)?;
    let mut config = bartle_graves::BartleGravesConfig::new(
        required(args.beta, "beta")?,
        args.rounds.unwrap_or(4),
        args.sphere_count.unwrap_or(64),
        args.seed.unwrap_or(0),
    );
    config.epsilon = args.epsilon;
    let ri = bartle_graves::build_right_inverse(&t, &config)?;
    let options = bartle_graves::VerifyOptions {
        seed: config.seed,
        ..Default::default()
    };
    let rep = bartle_graves::verify_right_inverse(&ri, &options)?;
    emit(args.out.as_deref(), &rep)?;
    if let Some(path) = args.csv {
        std::fs::write(path, report::sphere_csv(&ri.table)?).map_err(|e| CliError::Core(e.into()))?;
    }
    Ok(rep.passed)
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct VerifyArgs {
    /// Correspondence document the sequence was built from
    #[arg(long)]
    correspondence: Option<PathBuf>,
    /// sequence.json written by `select`
    #[arg(long)]
    sequence: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn print_rounds(rounds: &[RoundReport]) {
    println!("round  separation  selection  sup_change  strong_bound  coincidence");
    for r in rounds {
        println!(
            "{:>5}  {:>10}  {:>9}  {:>10}  {:>12}  {:>11}",
            r.n,
            mark(r.separation),
            mark(r.selection.passed),
            mark(r.sup_change.passed),
            mark(r.strong_bound.passed),
            mark(r.coincidence_passed())
        );
    }
}

pub fn verify(args: VerifyArgs) -> Outcome {
    let phi = load_correspondence(&required(args.correspondence, "correspondence")?)?;
    let seq: SelectionSequence = read_json(&required(args.sequence, "sequence")?)?;
    if seq.selections.len() != seq.rounds.len() + 1 || seq.hierarchy.len() != seq.rounds.len() {
        return Err(CliError::Schema(
            "sequence: rounds, selections and hierarchy disagree".into(),
        ));
    }
    let rounds = selection::verify_sequence(&phi, &seq)?;
    print_rounds(&rounds);
    if let Some(out) = args.out.as_deref() {
        report::write_json(out, &rounds)?;
    }
    Ok(rounds.iter().all(RoundReport::passed))
}
