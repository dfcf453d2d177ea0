use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use outer_billiards::birkhoff::{self, random_polygon};
use outer_billiards::discrete::{self, DiscreteState};
use outer_billiards::horizontal::{self, ShootOptions};
use outer_billiards::svg::Figure;
use outer_billiards::triangle::{self, EquivariantCurve, FourierMode, DEFAULT_MAX_FREQ};
use outer_billiards::verify::{self, Tolerances};
use outer_billiards::{periodicity, ConvexTable, Error, Vec2};

use crate::output::{write_csv, write_report, write_svg};
use crate::{Command, Common};

#[derive(Debug)]
pub enum Failure {
    /// Bad input: unreadable file, invalid JSON, out-of-range parameter.
    Config(String),
    /// A computation did not converge or a check did not hold.
    Numeric(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numeric(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::TooFewVertices(_)
            | Error::CoincidentVertices(..)
            | Error::LengthMismatch { .. }
            | Error::InvalidTable(_)
            | Error::InvalidCurve(_)
            | Error::NotExterior(..)
            | Error::Domain(_) => Failure::Config(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

pub fn parse_point(s: &str) -> Result<Vec2, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [x, y] = parts.as_slice() else {
        return Err(format!("expected x,y, got '{s}'"));
    };
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}"));
    Ok(Vec2::new(p(x)?, p(y)?))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn load_table(path: &Path) -> Result<ConvexTable, Failure> {
    let t: ConvexTable = read_json(path)?;
    t.validate()
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    Ok(t)
}

fn tolerances(common: &Common) -> Result<Tolerances, Failure> {
    let mut t = Tolerances::default();
    for item in &common.tol {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("--tol expects NAME=VALUE, got '{item}'")))?;
        let v: f64 = value
            .parse()
            .map_err(|e| Failure::Config(format!("--tol {name}: {e}")))?;
        t.set(name, v).map_err(Failure::Config)?;
    }
    Ok(t)
}

#[derive(Serialize)]
struct Report<'a> {
    command: &'a str,
    seed: u64,
    passed: bool,
    tolerances: &'a Tolerances,
    result: Value,
}

fn finish(common: &Common, command: &str, tol: &Tolerances, passed: bool, result: Value) -> Result<(), Failure> {
    let r = Report {
        command,
        seed: common.seed,
        passed,
        tolerances: tol,
        result,
    };
    write_report(common.report.as_deref(), &r)?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Numeric(format!("{command}: checks failed")))
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn boundary(t: &ConvexTable) -> Result<Vec<Vec2>, Failure> {
    Ok(t.sample_boundary(256)?)
}

fn xy_rows(points: &[Vec2]) -> Vec<Vec<f64>> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| vec![i as f64, p.x, p.y])
        .collect()
}

pub fn run(common: &Common, command: &Command) -> Result<(), Failure> {
    let tol = tolerances(common)?;
    match command {
        Command::Orbit { table, start, steps } => orbit(common, &tol, table, *start, *steps),
        Command::Periodic { table, n, k, guess } => periodic(common, &tol, table, *n, *k, *guess),
        Command::Rank { n_min, n_max, samples } => rank(common, &tol, *n_min, *n_max, *samples),
        Command::Construct3 {
            curve,
            perturbation,
            free,
            samples,
        } => construct3(common, &tol, curve.as_deref(), *perturbation, *free, *samples),
        Command::Construct { n, k, size, samples } => construct(common, &tol, *n, *k, *size, *samples),
        Command::Identity3 { samples, amplitude } => identity3(common, &tol, *samples, *amplitude),
        Command::RoundedSquare {
            side,
            arc_radius,
            disk,
            grid,
        } => rounded_square(common, &tol, *side, *arc_radius, *disk, *grid),
        Command::RotatePolygon { n, deform } => rotate_polygon(common, &tol, *n, *deform),
        Command::Verify { suite } => verify_suite(common, &tol, suite),
    }
}

fn orbit(common: &Common, tol: &Tolerances, table: &Path, start: Vec2, steps: usize) -> Result<(), Failure> {
    let t = load_table(table)?;
    let pts = t.orbit(start, steps)?;
    let mut fig = Figure::new("outer billiard orbit");
    fig.curve(&boundary(&t)?, true, "black")
        .thin_curve(&pts, false, "gray")
        .dots(&pts, "crimson");
    write_svg(common.svg.as_deref(), &fig)?;
    write_csv(common.csv.as_deref(), &["step", "x", "y"], &xy_rows(&pts))?;
    finish(common, "orbit", tol, true, json!({ "table": t, "orbit": pts }))
}

fn periodic(common: &Common, tol: &Tolerances, table: &Path, n: usize, k: usize, guess: Vec2) -> Result<(), Failure> {
    let t = load_table(table)?;
    let rep = periodicity::find_periodic(&t, n, k, guess)?;
    let mut fig = Figure::new("periodic orbit");
    fig.curve(&boundary(&t)?, true, "black")
        .curve(&rep.points, true, "steelblue")
        .dots(&rep.points, "crimson");
    write_svg(common.svg.as_deref(), &fig)?;
    write_csv(common.csv.as_deref(), &["index", "x", "y"], &xy_rows(&rep.points))?;
    let ok = rep.closure_error < tol.circle_closure * t.scale();
    finish(common, "periodic", tol, ok, to_value(&rep))
}

fn rank(common: &Common, tol: &Tolerances, n_min: usize, n_max: usize, samples: usize) -> Result<(), Failure> {
    if n_min < 3 || n_max < n_min {
        return Err(Failure::Config(format!("need 3 <= n_min <= n_max, got {n_min}..{n_max}")));
    }
    let rows: Vec<Vec<(usize, usize, usize)>> = (n_min..=n_max)
        .into_par_iter()
        .map(|n| {
            let mut rng = ChaCha8Rng::seed_from_u64(common.seed.wrapping_add(n as u64));
            (0..samples)
                .map(|s| {
                    let z = random_polygon(&mut rng, n, 2.0);
                    let r = birkhoff::bracket_growth_rank(&z).unwrap_or(0);
                    (n, s, r)
                })
                .collect()
        })
        .collect();
    let flat: Vec<(usize, usize, usize)> = rows.into_iter().flatten().collect();
    let summary: Vec<Value> = (n_min..=n_max)
        .map(|n| {
            let ranks: Vec<usize> = flat.iter().filter(|r| r.0 == n).map(|r| r.2).collect();
            json!({
                "n": n,
                "expected": 2 * n - 1,
                "min_rank": ranks.iter().min(),
                "max_rank": ranks.iter().max(),
                "failures": ranks.iter().filter(|&&r| r != 2 * n - 1).count(),
            })
        })
        .collect();
    let ok = flat.iter().all(|r| r.2 == 2 * r.0 - 1);
    let csv_rows: Vec<Vec<f64>> = flat.iter().map(|r| vec![r.0 as f64, r.1 as f64, r.2 as f64]).collect();
    write_csv(common.csv.as_deref(), &["n", "sample", "rank"], &csv_rows)?;
    finish(common, "rank", tol, ok, json!({ "samples": samples, "by_n": summary }))
}

fn construct3(
    common: &Common,
    tol: &Tolerances,
    curve: Option<&Path>,
    perturbation: f64,
    free: Option<i32>,
    samples: usize,
) -> Result<(), Failure> {
    let free = free.unwrap_or_else(|| triangle::default_free_frequency(DEFAULT_MAX_FREQ));
    let start = match curve {
        Some(p) => {
            let modes: Vec<FourierMode> = read_json(p)?;
            EquivariantCurve::new(modes)?
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
            triangle::random_perturbation(&mut rng, DEFAULT_MAX_FREQ, DEFAULT_MAX_FREQ, free, perturbation)
        }
    };
    let solved = triangle::solve_monodromy3(&start, free)?;
    let mono = triangle::monodromy_residual3(&solved.curve)?;
    let fam = triangle::build_family(&solved.curve)?;
    let check = triangle::verify_family3(&fam, samples)?;

    let mut fig = Figure::new("table with a curve of 3-periodic points");
    fig.curve(fam.boundary(), true, "black");
    for j in 0..6 {
        let t = TAU * j as f64 / 18.0;
        let (w, _) = fam.triangle_at(t);
        fig.thin_curve(&w, true, "steelblue");
        if let Ok(z) = triangle::circumscribed_orbit(&fam, t) {
            fig.thin_curve(z.vertices(), true, "crimson");
        }
    }
    write_svg(common.svg.as_deref(), &fig)?;
    write_csv(common.csv.as_deref(), &["index", "x", "y"], &xy_rows(fam.boundary()))?;

    let ok = mono.mon3.norm() < tol.monodromy3
        && fam.convex
        && check.area2_error < tol.area3
        && check.max_closure < tol.closure;
    finish(
        common,
        "construct3",
        tol,
        ok,
        json!({
            "free": free,
            "newton_history": solved.history,
            "curve": solved.curve,
            "mon3": mono.mon3,
            "mon2": mono.mon2,
            "convex": fam.convex,
            "area_ratio": check.area_ratio,
            "area2_error": check.area2_error,
            "max_closure": check.max_closure,
            "max_midpoint_error": check.max_midpoint_error,
            "fit_residual": check.fit_residual,
            "table": check.table,
        }),
    )
}

fn construct(common: &Common, tol: &Tolerances, n: usize, k: usize, size: f64, samples: usize) -> Result<(), Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
    let seed = horizontal::random_seed(&mut rng, n, size);
    let rep = horizontal::shoot(n, k, &seed, ShootOptions::default())?;
    let residual = horizontal::monodromy_residual(&rep.path)
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    let curve = horizontal::reconstruct_table(&rep.path)?;
    let fam = horizontal::verify_periodic_family(&curve, &rep.path, samples)?;

    let mut fig = Figure::new("table traced by a closed family of polygons");
    fig.curve(&curve.points, true, "black");
    let steps = rep.path.steps;
    for j in (0..steps).step_by((steps / 5).max(1)) {
        fig.thin_curve(rep.path.samples[j].vertices(), true, "steelblue");
    }
    write_svg(common.svg.as_deref(), &fig)?;
    write_csv(common.csv.as_deref(), &["index", "x", "y"], &xy_rows(&curve.points))?;

    let ok = residual < tol.shoot && curve.convex && fam.max_closure < tol.closure && fam.area_spread < tol.area_spread;
    finish(
        common,
        "construct",
        tol,
        ok,
        json!({
            "n": n,
            "k": k,
            "shift": rep.path.shift,
            "unknowns": rep.unknowns,
            "newton_history": rep.residual_history,
            "monodromy_residual": residual,
            "convex": curve.convex,
            "max_closure": fam.max_closure,
            "area_spread": fam.area_spread,
            "fit_residual": fam.fit_residual,
            "controls": rep.controls,
            "table": fam.table,
        }),
    )
}

fn identity3(common: &Common, tol: &Tolerances, samples: usize, amplitude: f64) -> Result<(), Failure> {
    let id = periodicity::identity_example()?;
    let ob = periodicity::obstruction_demo(samples, amplitude)?;
    let mut fig = Figure::new("triangle with three reflecting circles");
    fig.curve(id.triangle.vertices(), true, "black");
    for t in &id.tables {
        fig.curve(&boundary(t)?, true, "steelblue");
    }
    fig.dots(id.triangle.vertices(), "crimson");
    write_svg(common.svg.as_deref(), &fig)?;
    let rows: Vec<Vec<f64>> = ob.params.iter().zip(&ob.residuals).map(|(s, r)| vec![*s, *r]).collect();
    write_csv(common.csv.as_deref(), &["param", "residual"], &rows)?;
    let mid = ob.residuals[ob.residuals.len() / 2].abs();
    let ends = ob.residuals[0].abs().min(ob.residuals[ob.residuals.len() - 1].abs());
    let ok = id.differential_error < tol.identity && id.expr1.abs() < tol.expr1 && mid < tol.expr1;
    let ok = ok && (amplitude == 0.0 || ends > tol.obstruction);
    finish(common, "identity3", tol, ok, json!({ "identity": id, "obstruction": ob }))
}

fn rounded_square(
    common: &Common,
    tol: &Tolerances,
    side: f64,
    arc_radius: f64,
    disk: f64,
    grid: usize,
) -> Result<(), Failure> {
    let r = periodicity::rounded_square_demo(side, arc_radius, disk, grid)?;
    let mut fig = Figure::new("arc square and 4-periodic orbit");
    fig.curve(&boundary(&r.table)?, true, "black")
        .curve(&r.orbit, true, "steelblue")
        .dots(&r.orbit, "crimson");
    let ring: Vec<Vec2> = (0..64)
        .map(|j| r.periodic_point + Vec2::polar(TAU * j as f64 / 64.0) * disk)
        .collect();
    fig.curve(&ring, true, "seagreen");
    write_svg(common.svg.as_deref(), &fig)?;
    write_csv(common.csv.as_deref(), &["index", "x", "y"], &xy_rows(&r.orbit))?;
    let ok = r.samples > 0 && r.periodic == r.samples;
    finish(common, "rounded-square", tol, ok, to_value(&r))
}

fn rotate_polygon(common: &Common, tol: &Tolerances, n: usize, deform: Option<f64>) -> Result<(), Failure> {
    let mut state = discrete::regular_start(n)?;
    let mut extra = json!(null);
    if let Some(eps) = deform {
        let d = discrete::deformation_space(&state.host, n)?;
        let dir = d
            .non_affine
            .first()
            .ok_or_else(|| Failure::Numeric("no non-affine deformation".into()))?;
        let q = discrete::project_to_constraints(&state.host.displaced(dir, eps)?, n, 1e-13, 30)?;
        extra = json!({ "dimension": d.dimension, "affine": d.affine, "non_affine": d.non_affine.len() });
        state = DiscreteState::new(q, state.triangle)?;
    }
    let k = 3 * n + 1;
    let run = discrete::rotate_sequence(&state, 10 * k, discrete::PARALLEL_TOL);
    let mut fig = Figure::new("triangle turning inside a polygon");
    fig.curve(state.host.vertices(), true, "black");
    for s in run.states.iter().take(3 * k) {
        fig.thin_curve(&s.points(), true, "steelblue");
    }
    fig.dots(&state.points(), "crimson");
    write_svg(common.svg.as_deref(), &fig)?;
    let rows: Vec<Vec<f64>> = run
        .moves
        .iter()
        .enumerate()
        .map(|(i, m)| vec![(i + 1) as f64, m.vertex as f64, m.from as f64, m.to as f64])
        .collect();
    write_csv(common.csv.as_deref(), &["step", "vertex", "from", "to"], &rows)?;
    let ok = run.relabeled_at == Some(k) && run.returned_at == Some(3 * k);
    finish(
        common,
        "rotate-polygon",
        tol,
        ok,
        json!({
            "k": k,
            "host": state.host,
            "start": state.triangle,
            "relabeled_at": run.relabeled_at,
            "returned_at": run.returned_at,
            "stuck_at": run.stuck_at,
            "moves": run.moves,
            "deformation": extra,
        }),
    )
}

fn parse_suite(s: &str) -> Result<Vec<usize>, Failure> {
    if s == "all" {
        return Ok((1..=verify::COUNT).collect());
    }
    s.split(',')
        .map(|p| {
            let id: usize = p
                .trim()
                .parse()
                .map_err(|_| Failure::Config(format!("bad criterion '{p}'")))?;
            if (1..=verify::COUNT).contains(&id) {
                Ok(id)
            } else {
                Err(Failure::Config(format!("criterion {id} out of range 1..={}", verify::COUNT)))
            }
        })
        .collect()
}

fn verify_suite(common: &Common, tol: &Tolerances, suite: &str) -> Result<(), Failure> {
    let ids = parse_suite(suite)?;
    let results: Vec<verify::Criterion> = ids
        .par_iter()
        .map(|&id| verify::run_criterion(id, common.seed, tol))
        .collect();
    for c in &results {
        eprintln!("{}", c.line());
    }
    let ok = results.iter().all(|c| c.passed);
    finish(common, "verify", tol, ok, json!({ "criteria": results }))
}
