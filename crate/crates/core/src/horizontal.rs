//! Horizontal curves in polygon space and the general `(n, k)` construction.
//!
//! A path solves `Z'(t) = Σ_k c_k(t) W_k(Z(t))` on `[0, 1]`. It closes up as a
//! family of periodic orbits with rotation number `k` when
//! `Z(1) = σ^m(Z(0))`, where `σ` shifts vertex labels by one and
//! `m = k⁻¹ mod n`. For `k = 1` this is the plain shift. With this choice each
//! vertex sweeps `1/n` of the invariant curve, and the side midpoints trace
//! the table boundary exactly once.
//!
//! If `Z` solves the equation with controls `c_k`, then `σZ` solves it with
//! controls `c_{k+1}`. That is what lets a path on `[0, 1]` be continued
//! periodically.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::birkhoff::{field, require_nondegenerate, DEGENERACY_TOL};
use crate::error::{Error, Result};
use crate::geom::{area2, area2_gradient, cyclic_shift, first_degenerate, Polygon, PolyTangent, Vec2};
use crate::table::{fit_support, ConvexTable};

/// Left end of the perturbation window's support.
pub const WINDOW_START: f64 = 0.05;
/// Right end of the perturbation window's support.
pub const WINDOW_END: f64 = 0.95;

/// Exponent `a` of the bump `exp(a - a/(1 - u²))`. Larger values trade a
/// narrower core for a faster-decaying spectrum, which keeps the resulting
/// support functions close to band-limited.
pub const WINDOW_SHARPNESS: f64 = 8.0;

/// Smooth bump supported on `[WINDOW_START, WINDOW_END]`, equal to 1 at the
/// midpoint.
pub fn window(t: f64) -> f64 {
    let half = 0.5 * (WINDOW_END - WINDOW_START);
    let u = (t - 0.5 * (WINDOW_START + WINDOW_END)) / half;
    if u.abs() >= 1.0 {
        0.0
    } else {
        let a = WINDOW_SHARPNESS;
        (a - a / (1.0 - u * u)).exp()
    }
}

/// Fourier basis on `[0, 1]`: `1, cos 2πt, sin 2πt, cos 4πt, …`.
pub fn fourier_mode(m: usize, t: f64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let j = m.div_ceil(2) as f64;
    if m % 2 == 1 {
        (2.0 * PI * j * t).cos()
    } else {
        (2.0 * PI * j * t).sin()
    }
}

/// Controls `c_k(t) = b_k + ψ(t) Σ_m p_{k,m} φ_m(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    pub baseline: Vec<f64>,
    /// `coeffs[k][m] = p_{k,m}`; every row has the same length.
    pub coeffs: Vec<Vec<f64>>,
}

impl ControlSignal {
    pub fn constant(baseline: Vec<f64>, modes: usize) -> Self {
        let n = baseline.len();
        ControlSignal {
            baseline,
            coeffs: vec![vec![0.0; modes]; n],
        }
    }

    pub fn n(&self) -> usize {
        self.baseline.len()
    }

    pub fn modes(&self) -> usize {
        self.coeffs.first().map_or(0, Vec::len)
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let psi = window(t);
        self.baseline
            .iter()
            .zip(&self.coeffs)
            .map(|(b, p)| {
                if psi == 0.0 {
                    return *b;
                }
                b + psi
                    * p.iter()
                        .enumerate()
                        .map(|(m, c)| c * fourier_mode(m, t))
                        .sum::<f64>()
            })
            .collect()
    }

    /// Coefficients flattened row-major (`k * modes + m`).
    pub fn flat_coeffs(&self) -> Vec<f64> {
        self.coeffs.iter().flatten().copied().collect()
    }

    pub fn with_flat_coeffs(&self, flat: &[f64]) -> Self {
        let m = self.modes();
        ControlSignal {
            baseline: self.baseline.clone(),
            coeffs: flat.chunks(m.max(1)).map(<[f64]>::to_vec).collect(),
        }
    }

    /// Controls `c_{k+s}`, the ones that drive `σ^s Z`.
    pub fn shifted(&self, s: isize) -> Self {
        let n = self.n();
        let idx = |k: usize| crate::geom::cyclic(k as isize + s, n);
        ControlSignal {
            baseline: (0..n).map(|k| self.baseline[idx(k)]).collect(),
            coeffs: (0..n).map(|k| self.coeffs[idx(k)].clone()).collect(),
        }
    }
}

/// Dense RK4 solution of the control system on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizontalPath {
    pub start: Polygon,
    pub controls: ControlSignal,
    /// `samples[j]` is `Z(j / steps)`.
    pub samples: Vec<Polygon>,
    pub steps: usize,
    /// Monodromy label shift `m`: the family closes when `Z(1) = σ^m Z(0)`.
    pub shift: usize,
}

impl HorizontalPath {
    pub fn end(&self) -> &Polygon {
        self.samples.last().expect("path has samples")
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 / self.steps as f64
    }

    /// Same path, closing against `σ^m` instead.
    pub fn with_shift(mut self, m: usize) -> Self {
        self.shift = m;
        self
    }

    /// Velocity `Σ c_k(t) W_k(Z(t))` at sample `j`.
    pub fn velocity(&self, j: usize) -> PolyTangent {
        velocity(&self.samples[j], &self.controls.eval(self.time(j)))
    }
}

fn velocity(z: &Polygon, c: &[f64]) -> PolyTangent {
    let mut v = PolyTangent::zeros(z.len());
    for (k, ck) in c.iter().enumerate() {
        if *ck != 0.0 {
            v = v.axpy(*ck, &field(z, k as isize));
        }
    }
    v
}

fn checked(z: Polygon, t: f64) -> Result<Polygon> {
    if first_degenerate(&z, DEGENERACY_TOL).is_some() {
        return Err(Error::PathDegenerate { t });
    }
    Ok(z)
}

/// RK4 with `steps` uniform steps. The result closes against `σ`; use
/// [`HorizontalPath::with_shift`] for other rotation numbers.
pub fn integrate(start: &Polygon, controls: &ControlSignal, steps: usize) -> Result<HorizontalPath> {
    if controls.n() != start.len() {
        return Err(Error::LengthMismatch {
            expected: start.len(),
            got: controls.n(),
        });
    }
    if steps == 0 {
        return Err(Error::Domain("step count must be positive".into()));
    }
    require_nondegenerate(start)?;
    let h = 1.0 / steps as f64;
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(start.clone());
    let mut z = start.clone();
    let fail = |t: f64| move |_| Error::PathDegenerate { t };
    for j in 0..steps {
        let t = j as f64 * h;
        let cm = controls.eval(t + h / 2.0);
        let k1 = velocity(&z, &controls.eval(t));
        let k2 = velocity(&z.displaced(&k1, h / 2.0).map_err(fail(t))?, &cm);
        let k3 = velocity(&z.displaced(&k2, h / 2.0).map_err(fail(t))?, &cm);
        let k4 = velocity(&z.displaced(&k3, h).map_err(fail(t))?, &controls.eval(t + h));
        let incr = k1.axpy(2.0, &k2).axpy(2.0, &k3).axpy(1.0, &k4);
        z = checked(z.displaced(&incr, h / 6.0).map_err(fail(t + h))?, t + h)?;
        samples.push(z.clone());
    }
    Ok(HorizontalPath {
        start: start.clone(),
        controls: controls.clone(),
        samples,
        steps,
        shift: 1,
    })
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn check_nk(n: usize, k: usize) -> Result<()> {
    if n < 3 || k == 0 || 2 * k > n {
        return Err(Error::Domain(format!("need 3 <= n and 1 <= k <= n/2, got ({n}, {k})")));
    }
    if gcd(n, k) != 1 {
        return Err(Error::Domain(format!("gcd({n}, {k}) != 1")));
    }
    Ok(())
}

/// Default number of perturbation modes per control.
pub const DEFAULT_MODES: usize = 3;

/// Start polygon `z_j = e^{2πi jk/n}` and the constant controls of the rigid
/// rotation `z_j(t) = e^{2πi (jk+t)/n}`.
pub fn circle_baseline(n: usize, k: usize) -> Result<(Polygon, ControlSignal)> {
    check_nk(n, k)?;
    let z = Polygon::regular(n, k, 1.0, 0.0)?;
    let omega = 2.0 * PI / n as f64;
    let zdot: Vec<f64> = z.vertices().iter().flat_map(|p| {
        let v = p.perp() * omega;
        [v.x, v.y]
    }).collect();
    let frame: Vec<Vec<f64>> = (0..n as isize).map(|k| field(&z, k).to_flat()).collect();
    let a = DMatrix::from_fn(2 * n, n, |r, c| frame[c][r]);
    let b = DVector::from_vec(zdot);
    let c = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::Domain(e.to_string()))?;
    let resid = (&a * &c - &b).norm();
    if resid > 1e-12 {
        return Err(Error::Domain(format!("rotation field not horizontal: residual {resid:e}")));
    }
    Ok((z, ControlSignal::constant(c.iter().copied().collect(), DEFAULT_MODES)))
}

/// Label shift `m = k⁻¹ mod n` of the monodromy for rotation number `k`.
pub fn monodromy_shift(n: usize, k: usize) -> Result<usize> {
    check_nk(n, k)?;
    Ok((1..n).find(|m| (m * k) % n == 1).unwrap_or(1))
}

/// Stacked components of `Z(1) - σ^m(Z(0))`, with `m` from
/// [`HorizontalPath::shift`].
pub fn monodromy_residual(path: &HorizontalPath) -> Vec<f64> {
    let target = cyclic_shift(&path.start, path.shift as isize).to_flat();
    path.end()
        .to_flat()
        .iter()
        .zip(target)
        .map(|(a, b)| a - b)
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Extends a closed path over `periods` unit intervals by integrating from the
/// current endpoint with shifted controls. Returns the endpoint of every
/// period.
pub fn continue_family(path: &HorizontalPath, periods: usize) -> Result<Vec<Polygon>> {
    let mut ends = Vec::with_capacity(periods);
    let mut z = path.end().clone();
    ends.push(z.clone());
    for p in 1..periods {
        let c = path.controls.shifted((p * path.shift) as isize);
        let next = integrate(&z, &c, path.steps)?;
        z = next.end().clone();
        ends.push(z.clone());
    }
    Ok(ends)
}

/// Orthonormal basis of the complement of `g` in `R^m`, as the last `m - 1`
/// columns of a Householder reflector sending `g/|g|` to `±e_1`.
fn complement_basis(g: &[f64]) -> DMatrix<f64> {
    let m = g.len();
    let gn = norm(g);
    let mut v: Vec<f64> = g.iter().map(|x| x / gn).collect();
    let s = if v[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += s;
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let h = DMatrix::from_fn(m, m, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - 2.0 * v[i] * v[j] / vv
    });
    h.columns(1, m - 1).into_owned()
}

/// Outcome of [`shoot`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootReport {
    pub controls: ControlSignal,
    pub path: HorizontalPath,
    /// Indices into the flattened coefficients that Newton adjusted.
    pub unknowns: Vec<usize>,
    pub residual_history: Vec<f64>,
}

/// Solver settings for [`shoot`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootOptions {
    pub steps: usize,
    pub max_iter: usize,
    /// Target for `|Z(1) - σZ(0)|`, relative to the start diameter.
    pub tol: f64,
    pub fd_step: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions {
            steps: 1000,
            max_iter: 30,
            tol: 1e-10,
            fd_step: 1e-6,
        }
    }
}

/// Greedy column pivoting: picks `count` well-conditioned columns.
fn select_columns(j: &DMatrix<f64>, count: usize) -> Vec<usize> {
    let mut cols: Vec<DVector<f64>> = (0..j.ncols()).map(|c| j.column(c).into_owned()).collect();
    let mut chosen = Vec::with_capacity(count);
    for _ in 0..count.min(cols.len()) {
        let best = (0..cols.len())
            .filter(|c| !chosen.contains(c))
            .max_by(|&a, &b| cols[a].norm().total_cmp(&cols[b].norm()))
            .unwrap();
        chosen.push(best);
        let q = cols[best].normalize();
        for c in cols.iter_mut() {
            let d = q.dot(c);
            *c -= &q * d;
        }
    }
    chosen.sort_unstable();
    chosen
}

struct Shooter<'a> {
    start: &'a Polygon,
    base: &'a ControlSignal,
    basis: DMatrix<f64>,
    steps: usize,
    shift: usize,
}

impl Shooter<'_> {
    fn residual(&self, flat: &[f64]) -> Result<(HorizontalPath, DVector<f64>, f64)> {
        let path = integrate(self.start, &self.base.with_flat_coeffs(flat), self.steps)?
            .with_shift(self.shift);
        let r = monodromy_residual(&path);
        let full = norm(&r);
        let proj = self.basis.transpose() * DVector::from_vec(r);
        Ok((path, proj, full))
    }

    fn jacobian(&self, flat: &[f64], cols: &[usize], h: f64) -> Result<DMatrix<f64>> {
        let rows = self.basis.ncols();
        let mut jac = DMatrix::zeros(rows, cols.len());
        for (c, &idx) in cols.iter().enumerate() {
            let mut p = flat.to_vec();
            let mut m = flat.to_vec();
            p[idx] += h;
            m[idx] -= h;
            let rp = self.residual(&p)?.1;
            let rm = self.residual(&m)?.1;
            jac.set_column(c, &((rp - rm) / (2.0 * h)));
        }
        Ok(jac)
    }
}

/// Newton shooting for a closed `(n, k)` family near the circle baseline.
///
/// `seed` perturbs the windowed-Fourier coefficients (rows of length
/// `DEFAULT_MODES`, or empty for no perturbation). Newton then adjusts `2n-1`
/// of them and holds the rest at their seed values. The residual component
/// along the area gradient is dropped, since area is conserved.
pub fn shoot(n: usize, k: usize, seed: &[Vec<f64>], opts: ShootOptions) -> Result<ShootReport> {
    let (start, base) = circle_baseline(n, k)?;
    let modes = base.modes();
    let mut flat = vec![0.0; n * modes];
    if !seed.is_empty() {
        if seed.len() != n || seed.iter().any(|r| r.len() != modes) {
            return Err(Error::Domain(format!("seed must be {n} rows of {modes} coefficients")));
        }
        flat = seed.iter().flatten().copied().collect();
    }
    let scale = start.diameter();
    let shift = monodromy_shift(n, k)?;
    let shooter = Shooter {
        start: &start,
        base: &base,
        basis: complement_basis(&area2_gradient(&cyclic_shift(&start, shift as isize))),
        steps: opts.steps,
        shift,
    };
    let all: Vec<usize> = (0..n * modes).collect();
    let unknowns = select_columns(&shooter.jacobian(&vec![0.0; n * modes], &all, opts.fd_step)?, 2 * n - 1);

    let (mut path, mut r, mut full) = shooter.residual(&flat)?;
    let mut history = vec![full];
    for _ in 0..opts.max_iter {
        if full < opts.tol * scale {
            return Ok(ShootReport {
                controls: path.controls.clone(),
                path,
                unknowns,
                residual_history: history,
            });
        }
        let jac = shooter.jacobian(&flat, &unknowns, opts.fd_step)?;
        let dx = jac
            .lu()
            .solve(&(-&r))
            .ok_or_else(|| Error::Domain("singular shooting Jacobian".into()))?;
        let mut lambda = 1.0;
        loop {
            let mut trial = flat.clone();
            for (i, &idx) in unknowns.iter().enumerate() {
                trial[idx] += lambda * dx[i];
            }
            match shooter.residual(&trial) {
                Ok((p, rr, f)) if f < full || lambda < 1e-3 => {
                    flat = trial;
                    path = p;
                    r = rr;
                    full = f;
                    break;
                }
                _ if lambda < 1e-3 => {
                    return Err(Error::NoConvergence {
                        iterations: history.len(),
                        history,
                    })
                }
                _ => lambda *= 0.5,
            }
        }
        history.push(full);
    }
    if full < opts.tol * scale {
        return Ok(ShootReport {
            controls: path.controls.clone(),
            path,
            unknowns,
            residual_history: history,
        });
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        history,
    })
}

/// Uniform random seed for [`shoot`], rescaled to Euclidean norm `size`.
pub fn random_seed<R: rand::Rng>(rng: &mut R, n: usize, size: f64) -> Vec<Vec<f64>> {
    let mut s: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..DEFAULT_MODES).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let nn = s.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    s.iter_mut().flatten().for_each(|x| *x *= size / nn);
    s
}

/// Midpoint envelope of a closed family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCurve {
    /// Side midpoints: side 0 for `t ∈ [0, 1)`, then side `m`, side `2m`, and
    /// so on.
    pub points: Vec<Vec2>,
    /// Side directions at the same samples.
    pub tangents: Vec<Vec2>,
    pub convex: bool,
}

impl TableCurve {
    /// `(θ, h)` samples: outward normal is the side direction turned clockwise.
    pub fn support_samples(&self) -> Vec<(f64, f64)> {
        crate::table::support_samples(&self.points, &self.tangents)
    }
}

pub fn reconstruct_table(path: &HorizontalPath) -> Result<TableCurve> {
    let scale = path.start.diameter();
    let res = norm(&monodromy_residual(path));
    if res > 1e-6 * scale {
        return Err(Error::Precondition(format!(
            "path does not close: monodromy residual {res:e}"
        )));
    }
    let n = path.start.len() as isize;
    let mut points = Vec::with_capacity(n as usize * path.steps);
    let mut tangents = Vec::with_capacity(points.capacity());
    for s in 0..n {
        let i = s * path.shift as isize;
        for z in &path.samples[..path.steps] {
            points.push((z.vertex(i) + z.vertex(i + 1)) * 0.5);
            tangents.push(z.vertex(i + 1) - z.vertex(i));
        }
    }
    let m = points.len();
    let convex = (0..m).all(|j| {
        let a = points[(j + 1) % m] - points[j];
        let b = points[(j + 2) % m] - points[(j + 1) % m];
        a.cross(b) > 0.0
    });
    Ok(TableCurve {
        points,
        tangents,
        convex,
    })
}

/// Harmonic count used when fitting a support function to an envelope.
pub const FIT_HARMONICS: usize = 24;

/// Result of [`verify_periodic_family`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub table: ConvexTable,
    pub fit_residual: f64,
    /// `max |Tⁿ(z_0(t)) - z_0(t)|` over the checked times.
    pub max_closure: f64,
    /// `max |area2(Z(t)) - area2(Z(0))|` over all samples.
    pub area_spread: f64,
    pub checked: usize,
}

pub fn verify_periodic_family(
    curve: &TableCurve,
    path: &HorizontalPath,
    samples: usize,
) -> Result<FamilyReport> {
    let scale = path.start.diameter();
    let res = norm(&monodromy_residual(path));
    if res > 1e-6 * scale {
        return Err(Error::Precondition(format!(
            "path does not close: monodromy residual {res:e}"
        )));
    }
    if !curve.convex {
        return Err(Error::Precondition("envelope is not convex".into()));
    }
    let (table, fit_residual) = fit_support(&curve.support_samples(), FIT_HARMONICS)?;
    let tolerance = 1e-6 * scale;
    if fit_residual > tolerance {
        return Err(Error::FitFailure {
            residual: fit_residual,
            tolerance,
        });
    }
    let n = path.start.len();
    let mut max_closure: f64 = 0.0;
    let count = samples.max(1);
    for s in 0..count {
        let j = s * path.steps / count;
        let x = path.samples[j].vertex(0);
        let y = table.iterate(x, n)?;
        max_closure = max_closure.max((y - x).norm());
    }
    let a0 = area2(&path.start);
    let area_spread = path
        .samples
        .iter()
        .map(|z| (area2(z) - a0).abs())
        .fold(0.0, f64::max);
    Ok(FamilyReport {
        table,
        fit_residual,
        max_closure,
        area_spread,
        checked: count,
    })
}
