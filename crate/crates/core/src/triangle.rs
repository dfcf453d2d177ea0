//! Tables with a one-parameter family of 3-periodic orbits, built from
//! `Z₃`-equivariant loops in `SL(2, R)`.
//!
//! The loop is `ū(t) = Σ ĉ_m e^{imt}` (plane identified with `C`) over
//! frequencies `m ≢ 0 (mod 3)`, so that `ū + ū(·+τ) + ū(·+2τ) = 0` with
//! `τ = 2π/3`. It is normalized pointwise by `s = [ū(t), ū(t+τ)]^{-1/2}`.
//! Because `[v̄, -ū-v̄] = [ū, v̄]`, `s` is `τ`-periodic, and `u = sū`,
//! `v = u(·+τ)` satisfy `[u, v] = 1` and `(u, v)(t+τ) = (v, -u-v)(t)`.
//!
//! The inscribed triangles are `w_1 = u + c`, `w_2 = v + c`, `w_3 = -u-v + c`,
//! with centroid velocity
//!
//! ```text
//! c' = ((p - 2q + 2r) v - (q - 2p + 2r) u) / 3
//! p = [u, u'],  q = [v, v'],  r = [u', v]
//! ```
//!
//! The family closes up iff `∫ c' = 0`, equivalently `∫ r (v - u) = 0`.
//! The two integrals differ by a factor 3.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{cross, Polygon, Vec2};
use crate::table::{fit_support, ConvexTable};

/// `2π/3`.
pub const TAU3: f64 = 2.0 * PI / 3.0;
/// Default frequency cutoff.
pub const DEFAULT_MAX_FREQ: i32 = 8;
/// Quadrature grid size on `[0, 2π)`.
pub const GRID: usize = 4096;
/// Harmonics for the support fit of a traced table.
pub const FIT_HARMONICS: usize = 24;
/// Target for `|∫ r (v - u)|`.
pub const MONODROMY_TOL: f64 = 1e-10;

/// One complex Fourier coefficient `ĉ_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub m: i32,
    pub re: f64,
    pub im: f64,
}

/// Frequencies `-M..=M` with `m ≢ 0 (mod 3)`, in increasing order.
pub fn admissible_frequencies(max_freq: i32) -> Vec<i32> {
    (-max_freq..=max_freq).filter(|m| m.rem_euclid(3) != 0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FourierMode>", into = "Vec<FourierMode>")]
pub struct EquivariantCurve {
    modes: Vec<FourierMode>,
}

impl TryFrom<Vec<FourierMode>> for EquivariantCurve {
    type Error = Error;
    fn try_from(v: Vec<FourierMode>) -> Result<Self> {
        EquivariantCurve::new(v)
    }
}

impl From<EquivariantCurve> for Vec<FourierMode> {
    fn from(c: EquivariantCurve) -> Self {
        c.modes
    }
}

/// `u, v` and their derivatives at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlFrame {
    pub u: Vec2,
    pub v: Vec2,
    pub du: Vec2,
    pub dv: Vec2,
}

impl EquivariantCurve {
    /// Checks frequencies only; orientation is checked by [`Self::validate`].
    pub fn new(modes: Vec<FourierMode>) -> Result<Self> {
        for (i, md) in modes.iter().enumerate() {
            if md.m.rem_euclid(3) == 0 {
                return Err(Error::InvalidCurve(format!("frequency {} is a multiple of 3", md.m)));
            }
            if modes[..i].iter().any(|o| o.m == md.m) {
                return Err(Error::InvalidCurve(format!("frequency {} repeated", md.m)));
            }
            if !(md.re.is_finite() && md.im.is_finite()) {
                return Err(Error::InvalidCurve(format!("non-finite coefficient at {}", md.m)));
            }
        }
        let mut modes = modes;
        modes.sort_by_key(|md| md.m);
        Ok(EquivariantCurve { modes })
    }

    /// `ū = e^{it}` with every other admissible slot up to `max_freq` present
    /// and zero.
    pub fn circle(max_freq: i32) -> Self {
        let modes = admissible_frequencies(max_freq.max(1))
            .into_iter()
            .map(|m| FourierMode {
                m,
                re: if m == 1 { 1.0 } else { 0.0 },
                im: 0.0,
            })
            .collect();
        EquivariantCurve { modes }
    }

    pub fn modes(&self) -> &[FourierMode] {
        &self.modes
    }

    pub fn coefficient(&self, m: i32) -> Option<(f64, f64)> {
        self.modes.iter().find(|md| md.m == m).map(|md| (md.re, md.im))
    }

    /// Sets `ĉ_m`, adding the slot if needed.
    pub fn with_coefficient(&self, m: i32, re: f64, im: f64) -> Result<Self> {
        let mut modes: Vec<FourierMode> = self.modes.iter().copied().filter(|md| md.m != m).collect();
        modes.push(FourierMode { m, re, im });
        EquivariantCurve::new(modes)
    }

    /// `d`-th derivative of `ū` at `t`.
    pub fn raw(&self, t: f64, d: u32) -> Vec2 {
        let mut acc = Vec2::ZERO;
        for md in &self.modes {
            let m = md.m as f64;
            let (s, c) = (m * t).sin_cos();
            // i^d m^d ĉ e^{imt}
            let (mut re, mut im) = (md.re * c - md.im * s, md.re * s + md.im * c);
            for _ in 0..d {
                (re, im) = (-m * im, m * re);
            }
            acc += Vec2::new(re, im);
        }
        acc
    }

    /// `[ū(t), ū(t+τ)]`.
    pub fn det(&self, t: f64) -> f64 {
        cross(self.raw(t, 0), self.raw(t + TAU3, 0))
    }

    /// Smallest `[ū, ū(·+τ)]` over the quadrature grid.
    pub fn min_det(&self) -> f64 {
        grid()
            .map(|t| self.det(t))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.min_det();
        if d > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidCurve(format!(
                "orientation fails: min [ū(t), ū(t+2π/3)] = {d:e}"
            )))
        }
    }

    /// Pointwise scale `s = D^{-1/2}` and its derivative.
    fn scale(&self, t: f64) -> (f64, f64) {
        let a = self.raw(t, 0);
        let b = self.raw(t + TAU3, 0);
        let d = cross(a, b);
        let dd = cross(self.raw(t, 1), b) + cross(a, self.raw(t + TAU3, 1));
        let s = d.powf(-0.5);
        (s, -0.5 * s * dd / d)
    }

    fn u_at(&self, t: f64) -> (Vec2, Vec2) {
        let (s, ds) = self.scale(t);
        let a = self.raw(t, 0);
        (a * s, a * ds + self.raw(t, 1) * s)
    }

    pub fn frame(&self, t: f64) -> SlFrame {
        let (u, du) = self.u_at(t);
        let (v, dv) = self.u_at(t + TAU3);
        SlFrame { u, v, du, dv }
    }

    /// Coefficient norm over all slots except `ĉ_1`.
    pub fn perturbation_norm(&self) -> f64 {
        self.modes
            .iter()
            .filter(|md| md.m != 1)
            .map(|md| md.re * md.re + md.im * md.im)
            .sum::<f64>()
            .sqrt()
    }
}

fn grid() -> impl Iterator<Item = f64> {
    (0..GRID).map(|j| 2.0 * PI * j as f64 / GRID as f64)
}

/// `(p, q, r) = ([u, u'], [v, v'], [u', v])`.
pub fn pqr(curve: &EquivariantCurve, t: f64) -> (f64, f64, f64) {
    let f = curve.frame(t);
    pqr_of(&f)
}

fn pqr_of(f: &SlFrame) -> (f64, f64, f64) {
    (cross(f.u, f.du), cross(f.v, f.dv), cross(f.du, f.v))
}

fn cm_of(f: &SlFrame) -> Vec2 {
    let (p, q, r) = pqr_of(f);
    (f.v * (p - 2.0 * q + 2.0 * r) - f.u * (q - 2.0 * p + 2.0 * r)) / 3.0
}

pub fn centroid_velocity(curve: &EquivariantCurve, t: f64) -> Vec2 {
    cm_of(&curve.frame(t))
}

/// Both forms of the closing condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monodromy3 {
    /// `∫ r (v - u) dt`.
    pub mon3: Vec2,
    /// `∫ (p - 2q + 2r) v - (q - 2p + 2r) u dt`; equals `3 mon3`.
    pub mon2: Vec2,
}

impl Monodromy3 {
    pub fn norm(&self) -> f64 {
        self.mon3.norm()
    }
}

pub fn monodromy_residual3(curve: &EquivariantCurve) -> Result<Monodromy3> {
    curve.validate()?;
    let w = 2.0 * PI / GRID as f64;
    let mut mon3 = Vec2::ZERO;
    let mut mon2 = Vec2::ZERO;
    for t in grid() {
        let f = curve.frame(t);
        let (_, _, r) = pqr_of(&f);
        mon3 += (f.v - f.u) * (r * w);
        mon2 += cm_of(&f) * (3.0 * w);
    }
    Ok(Monodromy3 { mon3, mon2 })
}

/// The six integrals `∫ pu, ∫ pv, ∫ qu, ∫ qv, ∫ ru, ∫ rv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PqrIntegrals {
    pub pu: Vec2,
    pub pv: Vec2,
    pub qu: Vec2,
    pub qv: Vec2,
    pub ru: Vec2,
    pub rv: Vec2,
}

impl PqrIntegrals {
    /// Residuals of `∫qu = -∫rv`, `∫pv = -∫ru`, `∫qv = ∫pu`,
    /// `∫pu = ∫ru + ∫rv`.
    pub fn identity_residuals(&self) -> [f64; 4] {
        [
            (self.qu + self.rv).norm(),
            (self.pv + self.ru).norm(),
            (self.qv - self.pu).norm(),
            (self.pu - self.ru - self.rv).norm(),
        ]
    }
}

pub fn pqr_integrals(curve: &EquivariantCurve) -> Result<PqrIntegrals> {
    curve.validate()?;
    let w = 2.0 * PI / GRID as f64;
    let mut acc = PqrIntegrals {
        pu: Vec2::ZERO,
        pv: Vec2::ZERO,
        qu: Vec2::ZERO,
        qv: Vec2::ZERO,
        ru: Vec2::ZERO,
        rv: Vec2::ZERO,
    };
    for t in grid() {
        let f = curve.frame(t);
        let (p, q, r) = pqr_of(&f);
        acc.pu += f.u * (p * w);
        acc.pv += f.v * (p * w);
        acc.qu += f.u * (q * w);
        acc.qv += f.v * (q * w);
        acc.ru += f.u * (r * w);
        acc.rv += f.v * (r * w);
    }
    Ok(acc)
}

/// Outcome of [`solve_monodromy3`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solve3Report {
    pub curve: EquivariantCurve,
    /// Frequency whose real and imaginary parts were solved for.
    pub free: i32,
    pub history: Vec<f64>,
}

/// Picks the best-conditioned frequency for the two Newton unknowns at the
/// circular point, among `±2, ±4, …` up to `max_freq`.
///
/// Frequencies `±1` are excluded: they change the circle by a similarity or
/// an affine map, which keeps it closed, so they do not move the residual to
/// first order.
pub fn default_free_frequency(max_freq: i32) -> i32 {
    let base = EquivariantCurve::circle(max_freq);
    let mut best = (2, 0.0);
    for m in admissible_frequencies(max_freq) {
        if m.abs() < 2 {
            continue;
        }
        let Ok(j) = jacobian3(&base, m, 1e-4) else {
            continue;
        };
        let smin = smallest_singular(&j);
        if smin > best.1 * (1.0 + 1e-9) {
            best = (m, smin);
        }
    }
    best.0
}

fn smallest_singular(j: &[[f64; 2]; 2]) -> f64 {
    let m = nalgebra::Matrix2::new(j[0][0], j[0][1], j[1][0], j[1][1]);
    m.singular_values().min()
}

fn jacobian3(curve: &EquivariantCurve, m: i32, h: f64) -> Result<[[f64; 2]; 2]> {
    let (re, im) = curve.coefficient(m).unwrap_or((0.0, 0.0));
    let mut j = [[0.0; 2]; 2];
    for (c, (dr, di)) in [(h, 0.0), (0.0, h)].into_iter().enumerate() {
        let p = monodromy_residual3(&curve.with_coefficient(m, re + dr, im + di)?)?.mon3;
        let q = monodromy_residual3(&curve.with_coefficient(m, re - dr, im - di)?)?.mon3;
        let d = (p - q) / (2.0 * h);
        j[0][c] = d.x;
        j[1][c] = d.y;
    }
    Ok(j)
}

/// Newton on `Re ĉ_m, Im ĉ_m` until `|∫ r (v - u)| < MONODROMY_TOL`. Other
/// coefficients are left alone.
pub fn solve_monodromy3(curve: &EquivariantCurve, free: i32) -> Result<Solve3Report> {
    const MAX_ITER: usize = 50;
    if free.rem_euclid(3) == 0 {
        return Err(Error::Domain(format!("frequency {free} is not admissible")));
    }
    curve.validate()?;
    let mut cur = if curve.coefficient(free).is_some() {
        curve.clone()
    } else {
        curve.with_coefficient(free, 0.0, 0.0)?
    };
    let mut res = monodromy_residual3(&cur)?.mon3;
    let mut history = vec![res.norm()];
    while res.norm() >= MONODROMY_TOL {
        if history.len() > MAX_ITER {
            return Err(Error::NoConvergence {
                iterations: MAX_ITER,
                history,
            });
        }
        let j = jacobian3(&cur, free, 1e-6)?;
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-300 {
            return Err(Error::Domain("singular monodromy Jacobian".into()));
        }
        let dx = -(j[1][1] * res.x - j[0][1] * res.y) / det;
        let dy = -(-j[1][0] * res.x + j[0][0] * res.y) / det;
        let (re, im) = cur.coefficient(free).unwrap_or((0.0, 0.0));
        let mut lambda = 1.0;
        loop {
            let trial = cur.with_coefficient(free, re + lambda * dx, im + lambda * dy)?;
            let step = monodromy_residual3(&trial).map(|m| m.mon3);
            match step {
                Ok(r) if r.norm() < res.norm() || lambda < 1e-3 => {
                    cur = trial;
                    res = r;
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
        history.push(res.norm());
    }
    Ok(Solve3Report {
        curve: cur,
        free,
        history,
    })
}

/// The centroid `c(t) = drift·t + Σ_{k≠0} ĉ_k e^{ikt}`, integrated
/// spectrally from grid samples of `c'`. The mean of the periodic part is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidPath {
    /// Mean of `c'`; zero exactly when the family closes.
    pub drift: Vec2,
    /// `(k, re, im)` of the periodic part, `k ≠ 0`.
    pub modes: Vec<(i32, f64, f64)>,
}

impl CentroidPath {
    pub fn eval(&self, t: f64) -> Vec2 {
        let mut acc = self.drift * t;
        for &(k, re, im) in &self.modes {
            let (s, c) = (k as f64 * t).sin_cos();
            acc += Vec2::new(re * c - im * s, re * s + im * c);
        }
        acc
    }
}

pub fn centroid_path(curve: &EquivariantCurve) -> Result<CentroidPath> {
    curve.validate()?;
    let n = GRID;
    let mut buf: Vec<Complex64> = grid()
        .map(|t| {
            let d = centroid_velocity(curve, t);
            Complex64::new(d.x, d.y)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    let drift = Vec2::new(buf[0].re * scale, buf[0].im * scale);
    let mut modes = Vec::new();
    for (j, b) in buf.iter().enumerate().skip(1) {
        let k = if j <= n / 2 { j as i64 } else { j as i64 - n as i64 };
        if 2 * k.unsigned_abs() as usize == n {
            continue;
        }
        let a = *b * scale / Complex64::new(0.0, k as f64);
        if a.norm() > 1e-18 {
            modes.push((k as i32, a.re, a.im));
        }
    }
    Ok(CentroidPath { drift, modes })
}

/// Sampled family of inscribed triangles on the quadrature grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleFamily {
    pub curve: EquivariantCurve,
    pub centroid: CentroidPath,
    pub times: Vec<f64>,
    /// `w[i][j] = w_{i+1}(t_j)`.
    pub w: [Vec<Vec2>; 3],
    /// `w_1'(t_j)`, the tangent of the traced table boundary.
    pub tangent: Vec<Vec2>,
    pub convex: bool,
}

impl TriangleFamily {
    /// `w_1, w_2, w_3` and their velocities at arbitrary `t`.
    pub fn triangle_at(&self, t: f64) -> ([Vec2; 3], [Vec2; 3]) {
        let f = self.curve.frame(t);
        let c = self.centroid.eval(t);
        let dc = cm_of(&f);
        (
            [f.u + c, f.v + c, -f.u - f.v + c],
            [f.du + dc, f.dv + dc, -f.du - f.dv + dc],
        )
    }

    /// Boundary samples `w_1(t_j)`.
    pub fn boundary(&self) -> &[Vec2] {
        &self.w[0]
    }

    pub fn support_samples(&self) -> Vec<(f64, f64)> {
        crate::table::support_samples(&self.w[0], &self.tangent)
    }

    /// Area enclosed by the traced boundary (shoelace on the samples).
    pub fn table_area(&self) -> f64 {
        let b = &self.w[0];
        let n = b.len();
        0.5 * (0..n).map(|j| cross(b[j], b[(j + 1) % n])).sum::<f64>()
    }

    /// Inscribed triangle area over table area.
    pub fn area_ratio(&self) -> f64 {
        1.5 / self.table_area()
    }
}

pub fn build_family(curve: &EquivariantCurve) -> Result<TriangleFamily> {
    let res = monodromy_residual3(curve)?;
    if res.norm() >= MONODROMY_TOL {
        return Err(Error::Precondition(format!(
            "monodromy residual {:e} not below {MONODROMY_TOL:e}",
            res.norm()
        )));
    }
    let centroid = centroid_path(curve)?;
    let times: Vec<f64> = grid().collect();
    let mut w = [Vec::with_capacity(GRID), Vec::with_capacity(GRID), Vec::with_capacity(GRID)];
    let mut tangent = Vec::with_capacity(GRID);
    for &t in &times {
        let f = curve.frame(t);
        let c = centroid.eval(t);
        w[0].push(f.u + c);
        w[1].push(f.v + c);
        w[2].push(-f.u - f.v + c);
        tangent.push(f.du + cm_of(&f));
    }
    let b = &w[0];
    let n = b.len();
    let convex = (0..n).all(|j| cross(b[(j + 1) % n] - b[j], b[(j + 2) % n] - b[(j + 1) % n]) > 0.0);
    Ok(TriangleFamily {
        curve: curve.clone(),
        centroid,
        times,
        w,
        tangent,
        convex,
    })
}

fn intersect(p1: Vec2, d1: Vec2, p2: Vec2, d2: Vec2) -> Result<Vec2> {
    let den = cross(d1, d2);
    if den.abs() < 1e-12 * d1.norm() * d2.norm() {
        return Err(Error::GeometricDegeneracy("tangent lines are parallel".into()));
    }
    Ok(p1 + d1 * (cross(p2 - p1, d2) / den))
}

/// The circumscribed triangle `z_1 z_2 z_3` at `t`: side `z_i z_{i+1}` is the
/// tangent line at `w_i`, so `T(z_i) = z_{i+1}` and `w_i` bisects the side.
pub fn circumscribed_orbit(family: &TriangleFamily, t: f64) -> Result<Polygon> {
    if !family.convex {
        return Err(Error::Precondition("traced curve is not convex".into()));
    }
    let (w, dw) = family.triangle_at(t);
    let z = (0..3)
        .map(|i| {
            let a = (i + 2) % 3;
            intersect(w[a], dw[a], w[i], dw[i])
        })
        .collect::<Result<Vec<_>>>()?;
    Polygon::new(z)
}

/// End-to-end check of a built family against a fitted table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Family3Report {
    pub table: ConvexTable,
    pub fit_residual: f64,
    /// `max |T³(z_1(t)) - z_1(t)|`.
    pub max_closure: f64,
    /// `max |(z_i + z_{i+1})/2 - w_i|`.
    pub max_midpoint_error: f64,
    /// `max |area2(w) - 3|`.
    pub area2_error: f64,
    pub area_ratio: f64,
}

pub fn verify_family3(family: &TriangleFamily, samples: usize) -> Result<Family3Report> {
    let (table, fit_residual) = fit_support(&family.support_samples(), FIT_HARMONICS)?;
    let tolerance = 1e-6 * table.scale();
    if fit_residual > tolerance {
        return Err(Error::FitFailure {
            residual: fit_residual,
            tolerance,
        });
    }
    let mut max_closure: f64 = 0.0;
    let mut max_mid: f64 = 0.0;
    for s in 0..samples.max(1) {
        let t = 2.0 * PI * s as f64 / samples.max(1) as f64;
        let z = circumscribed_orbit(family, t)?;
        let (w, _) = family.triangle_at(t);
        for (i, wi) in w.iter().enumerate() {
            let m = (z.vertex(i as isize) + z.vertex(i as isize + 1)) * 0.5;
            max_mid = max_mid.max((m - *wi).norm());
        }
        let x = z.vertex(0);
        max_closure = max_closure.max((table.iterate(x, 3)? - x).norm());
    }
    let area2_error = (0..family.times.len())
        .map(|j| {
            let a = cross(family.w[1][j] - family.w[0][j], family.w[2][j] - family.w[0][j]);
            (a - 3.0).abs()
        })
        .fold(0.0, f64::max);
    Ok(Family3Report {
        table,
        fit_residual,
        max_closure,
        max_midpoint_error: max_mid,
        area2_error,
        area_ratio: family.area_ratio(),
    })
}

/// Per-frequency damping of random seeds. Keeps the traced table close to
/// band-limited so a low-order support fit can resolve it.
pub const SEED_DECAY: f64 = 0.25;

/// Random perturbation of the circle: every admissible slot with
/// `2 ≤ |m| ≤ max_pert` (other than `skip`) gets a uniform coefficient damped
/// by `SEED_DECAY^{|m|-2}`, and the lot is scaled to norm `size`.
pub fn random_perturbation<R: rand::Rng>(
    rng: &mut R,
    max_freq: i32,
    max_pert: i32,
    skip: i32,
    size: f64,
) -> EquivariantCurve {
    let mut modes: Vec<FourierMode> = EquivariantCurve::circle(max_freq).modes.clone();
    let mut norm = 0.0;
    for md in modes.iter_mut() {
        if md.m.abs() >= 2 && md.m.abs() <= max_pert && md.m != skip {
            let damp = SEED_DECAY.powi(md.m.abs() - 2);
            md.re = damp * rng.gen_range(-1.0..1.0);
            md.im = damp * rng.gen_range(-1.0..1.0);
            norm += md.re * md.re + md.im * md.im;
        }
    }
    let k = if norm > 0.0 { size / norm.sqrt() } else { 0.0 };
    for md in modes.iter_mut() {
        if md.m != 1 {
            md.re *= k;
            md.im *= k;
        }
    }
    EquivariantCurve { modes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const RHO2: f64 = 1.1547005383792515; // 2/√3

    #[test]
    fn frequencies_skip_multiples_of_three() {
        assert_eq!(admissible_frequencies(4), vec![-4, -2, -1, 1, 2, 4]);
        assert!(EquivariantCurve::new(vec![FourierMode { m: 3, re: 1.0, im: 0.0 }]).is_err());
    }

    #[test]
    fn circle_pqr() {
        let c = EquivariantCurve::circle(DEFAULT_MAX_FREQ);
        for j in 0..7 {
            let t = 0.37 * j as f64;
            let (p, q, r) = pqr(&c, t);
            assert!((p - RHO2).abs() < 1e-12);
            assert!((q - RHO2).abs() < 1e-12);
            assert!((r - RHO2 / 2.0).abs() < 1e-12);
            assert!(centroid_velocity(&c, t).norm() < 1e-12);
            let f = c.frame(t);
            assert!((f.u.norm_sq() - RHO2).abs() < 1e-12);
        }
        let m = monodromy_residual3(&c).unwrap();
        assert!(m.mon3.norm() < 1e-12 && m.mon2.norm() < 1e-12);
    }

    fn perturbed() -> EquivariantCurve {
        EquivariantCurve::circle(DEFAULT_MAX_FREQ)
            .with_coefficient(2, 0.1, 0.0)
            .unwrap()
            .with_coefficient(-4, 0.03, -0.02)
            .unwrap()
            .with_coefficient(5, -0.01, 0.02)
            .unwrap()
    }

    #[test]
    fn sl2_and_z3_relations() {
        let c = perturbed();
        for j in 0..20 {
            let t = 0.31 * j as f64;
            let f = c.frame(t);
            let g = c.frame(t + TAU3);
            assert!((cross(f.u, f.v) - 1.0).abs() < 1e-12);
            assert!((g.u - f.v).norm() < 1e-12);
            assert!((g.v + f.u + f.v).norm() < 1e-12);
            let raw = c.raw(t, 0) + c.raw(t + TAU3, 0) + c.raw(t + 2.0 * TAU3, 0);
            assert!(raw.norm() < 1e-13);
            assert!((c.scale(t).0 - c.scale(t + TAU3).0).abs() < 1e-12);
            // [u, v] = 1 differentiated
            assert!((cross(f.du, f.v) - cross(f.dv, f.u)).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_derivatives_match_differences() {
        let c = perturbed();
        let h = 1e-5;
        for t in [0.1, 1.3, 4.0] {
            let f = c.frame(t);
            let fd = (c.frame(t + h).u - c.frame(t - h).u) / (2.0 * h);
            assert!((fd - f.du).norm() < 1e-8);
        }
    }

    #[test]
    fn pqr_shift_action() {
        let c = perturbed();
        for t in [0.2, 2.5, 5.1] {
            let (p, q, r) = pqr(&c, t);
            let (p1, q1, r1) = pqr(&c, t + TAU3);
            assert!((p1 - q).abs() < 1e-11);
            assert!((q1 - (p + q - 2.0 * r)).abs() < 1e-11);
            assert!((r1 - (q - r)).abs() < 1e-11);
            assert!((centroid_velocity(&c, t + TAU3) - centroid_velocity(&c, t)).norm() < 1e-11);
        }
    }

    #[test]
    fn integral_identities_and_both_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let c = random_perturbation(&mut rng, DEFAULT_MAX_FREQ, 8, 0, 0.1);
            let ids = pqr_integrals(&c).unwrap().identity_residuals();
            assert!(ids.iter().all(|x| *x < 1e-9), "{ids:?}");
            let m = monodromy_residual3(&c).unwrap();
            assert!((m.mon2 - m.mon3 * 3.0).norm() < 1e-10);
        }
        let m = monodromy_residual3(&perturbed()).unwrap();
        assert!(m.mon3.norm() > 1e-4);
    }

    #[test]
    fn orientation_failure_is_reported() {
        let c = EquivariantCurve::circle(4).with_coefficient(-1, 1.5, 0.0).unwrap();
        assert!(matches!(c.validate(), Err(Error::InvalidCurve(_))));
        assert!(matches!(solve_monodromy3(&c, 2), Err(Error::InvalidCurve(_))));
    }

    #[test]
    fn closed_circle_is_returned_unchanged() {
        let c = EquivariantCurve::circle(DEFAULT_MAX_FREQ);
        let rep = solve_monodromy3(&c, default_free_frequency(DEFAULT_MAX_FREQ)).unwrap();
        assert_eq!(rep.curve, c);
        assert_eq!(rep.history.len(), 1);
    }

    #[test]
    fn solver_keeps_the_other_coefficients() {
        let free = default_free_frequency(DEFAULT_MAX_FREQ);
        let other = if free == 2 { -2 } else { 2 };
        let c = EquivariantCurve::circle(DEFAULT_MAX_FREQ).with_coefficient(other, 0.05, 0.0).unwrap();
        let rep = solve_monodromy3(&c, free).unwrap();
        assert!(monodromy_residual3(&rep.curve).unwrap().norm() < MONODROMY_TOL);
        for md in c.modes() {
            if md.m != free {
                assert_eq!(rep.curve.coefficient(md.m), Some((md.re, md.im)));
            }
        }
    }

    #[test]
    fn circular_family() {
        let c = EquivariantCurve::circle(DEFAULT_MAX_FREQ);
        let fam = build_family(&c).unwrap();
        assert!(fam.convex);
        for p in fam.boundary() {
            assert!((p.norm() - RHO2.sqrt()).abs() < 1e-12);
        }
        let z = circumscribed_orbit(&fam, 0.4).unwrap();
        for p in z.vertices() {
            assert!((p.norm() - 2.0 * RHO2.sqrt()).abs() < 1e-10);
        }
        let rep = verify_family3(&fam, 12).unwrap();
        assert!(rep.max_closure < 1e-9);
        assert!((rep.area_ratio - 3.0 * 3f64.sqrt() / (4.0 * PI)).abs() < 1e-6);
    }

    #[test]
    fn open_family_drift_matches_residual() {
        let c = perturbed();
        let m = monodromy_residual3(&c).unwrap();
        assert!(matches!(build_family(&c), Err(Error::Precondition(_))));
        // independent RK4 quadrature of c' over one period
        let steps = 2000;
        let h = 2.0 * PI / steps as f64;
        let mut acc = Vec2::ZERO;
        for j in 0..steps {
            let t = j as f64 * h;
            let k1 = centroid_velocity(&c, t);
            let k2 = centroid_velocity(&c, t + h / 2.0);
            let k4 = centroid_velocity(&c, t + h);
            acc += (k1 + k2 * 4.0 + k4) * (h / 6.0);
        }
        let path = centroid_path(&c).unwrap();
        let jump = path.eval(2.0 * PI) - path.eval(0.0);
        assert!((jump - acc).norm() < 1e-9);
        assert!((acc * 3.0 - m.mon2).norm() < 1e-9);
    }

    #[test]
    fn perturbed_family_end_to_end() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let free = default_free_frequency(DEFAULT_MAX_FREQ);
        let c = random_perturbation(&mut rng, DEFAULT_MAX_FREQ, DEFAULT_MAX_FREQ, free, 0.05);
        let rep = solve_monodromy3(&c, free).unwrap();
        let fam = build_family(&rep.curve).unwrap();
        assert!(fam.convex);
        let path = &fam.centroid;
        assert!((path.eval(2.0 * PI) - path.eval(0.0)).norm() < 1e-9);
        for j in (0..GRID).step_by(97) {
            let t = fam.times[j];
            let (w, dw) = fam.triangle_at(t);
            assert!(cross(dw[0], w[2] - w[1]).abs() < 1e-9);
            let (w_next, _) = fam.triangle_at(t + TAU3);
            assert!((w_next[0] - w[1]).norm() < 1e-9);
        }
        let v = verify_family3(&fam, 30).unwrap();
        assert!(v.area2_error < 1e-10);
        assert!(v.max_midpoint_error < 1e-8);
        assert!(v.max_closure < 1e-5, "{}", v.max_closure);
    }

    #[test]
    fn curve_json_roundtrip() {
        let c = perturbed();
        let s = serde_json::to_string(&c).unwrap();
        let back: EquivariantCurve = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<EquivariantCurve>(r#"[{"m":6,"re":1.0,"im":0.0}]"#).is_err());
    }
}
