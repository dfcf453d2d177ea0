//! Outer billiard tables and the outer billiard map.
//!
//! Orientation: the map `T` reflects `x` in the support point `P` for which
//! the table lies to the left of the oriented line `x → P`, so orbits turn
//! counterclockwise around the table.
//!
//! Differential frame: for `y = T(x)`, the first axis `e1` is the unit vector
//! along `x → y` and `e2 = e1.perp()` points into the table's side. In that
//! frame `dT = [[-1, -2ρ/r], [0, -1]]` with `r = |xy| / 2`. This was pinned by
//! comparing against central finite differences of [`ConvexTable::outer_map`].

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{cross, Vec2};

pub type Mat2 = Matrix2<f64>;

const TANGENCY_TOL: f64 = 1e-13;

fn wrap_angle(t: f64) -> f64 {
    t.rem_euclid(TAU)
}

/// Support function `h(θ) = h0 + Σ_k a_k cos kθ + b_k sin kθ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportFourier {
    pub h0: f64,
    /// `coeffs[k-1] = [a_k, b_k]`
    pub coeffs: Vec<[f64; 2]>,
}

impl SupportFourier {
    /// `d`-th derivative of the support function.
    pub fn eval(&self, theta: f64, d: u32) -> f64 {
        let mut s = if d == 0 { self.h0 } else { 0.0 };
        for (i, [a, b]) in self.coeffs.iter().enumerate() {
            let k = (i + 1) as f64;
            let (sn, cs) = (k * theta).sin_cos();
            let kd = k.powi(d as i32);
            // derivatives cycle cos → -sin → -cos → sin
            let (c_term, s_term) = match d % 4 {
                0 => (cs, sn),
                1 => (-sn, cs),
                2 => (-cs, -sn),
                _ => (sn, -cs),
            };
            s += kd * (a * c_term + b * s_term);
        }
        s
    }

    pub fn h(&self, theta: f64) -> f64 {
        self.eval(theta, 0)
    }

    /// Curvature radius `ρ = h + h″`.
    pub fn rho(&self, theta: f64) -> f64 {
        self.eval(theta, 0) + self.eval(theta, 2)
    }

    fn rho_lipschitz(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, [a, b])| {
                let k = (i + 1) as f64;
                k * (k * k - 1.0) * (a.abs() + b.abs())
            })
            .sum()
    }

    fn validate(&self) -> Result<()> {
        if !self.h0.is_finite() || self.coeffs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidTable("non-finite coefficient".into()));
        }
        let dev: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, [a, b])| {
                let k = (i + 1) as f64;
                (k * k - 1.0) * (a.abs() + b.abs())
            })
            .sum();
        if self.h0 - dev > 0.0 {
            return Ok(());
        }
        let lip = self.rho_lipschitz();
        let mut m = 1024usize;
        loop {
            let mut min = f64::INFINITY;
            for j in 0..m {
                let t = TAU * j as f64 / m as f64;
                let r = self.rho(t);
                if r <= 0.0 {
                    return Err(Error::InvalidTable(format!(
                        "curvature radius {r} <= 0 at theta = {t}"
                    )));
                }
                min = min.min(r);
            }
            if min - lip * PI / m as f64 > 0.0 || m >= 1 << 18 {
                return Ok(());
            }
            m *= 2;
        }
    }

    fn scale(&self) -> f64 {
        self.h0.abs().max(1e-300)
    }

    fn boundary_point(&self, theta: f64) -> Vec2 {
        let n = Vec2::polar(theta);
        n * self.h(theta) + n.perp() * self.eval(theta, 1)
    }

    /// Root of `g(θ) = h(θ) - x·n(θ)`; `rising` selects the right tangency.
    fn tangency(&self, x: Vec2, rising: bool) -> Result<f64> {
        let g = |t: f64| self.h(t) - x.dot(Vec2::polar(t));
        let dg = |t: f64| self.eval(t, 1) - x.dot(Vec2::polar(t).perp());
        let sgn = if rising { 1.0 } else { -1.0 };
        let m = (64 * self.coeffs.len()).max(256);
        let dt = TAU / m as f64;
        let vals: Vec<f64> = (0..m).map(|j| g(j as f64 * dt)).collect();
        let mut bracket = None;
        for j in 0..m {
            let (a, b) = (vals[j], vals[(j + 1) % m]);
            if sgn * a < 0.0 && sgn * b >= 0.0 {
                bracket = Some((j as f64 * dt, (j + 1) as f64 * dt));
                break;
            }
        }
        let (mut lo, mut hi) = match bracket {
            Some(b) => b,
            None => {
                // the exterior wedge may hide between grid nodes
                let j = (0..m)
                    .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
                    .unwrap_or(0);
                let mut t = j as f64 * dt;
                for _ in 0..50 {
                    let d2 = self.rho(t) - g(t);
                    if d2 <= 0.0 {
                        break;
                    }
                    let step = dg(t) / d2;
                    t -= step.clamp(-dt, dt);
                    if step.abs() < 1e-15 {
                        break;
                    }
                }
                if g(t) >= -TANGENCY_TOL * self.scale() {
                    return Err(Error::NotExterior(x.x, x.y));
                }
                if rising {
                    (t, t + dt)
                } else {
                    (t - dt, t)
                }
            }
        };
        if g(lo).abs() < f64::MIN_POSITIVE && g(hi).abs() < f64::MIN_POSITIVE {
            return Err(Error::NotExterior(x.x, x.y));
        }
        // safeguarded Newton on [lo, hi] with sgn·g(lo) < 0 ≤ sgn·g(hi)
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            let gt = g(t);
            if gt == 0.0 {
                break;
            }
            if sgn * gt < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let d = dg(t);
            let mut next = t - gt / d;
            if !(next > lo.min(hi) && next < lo.max(hi)) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            let done = (next - t).abs() < 1e-16 * (1.0 + t.abs());
            t = next;
            if done || (hi - lo).abs() < 1e-16 {
                break;
            }
        }
        if sgn * dg(t) <= 0.0 {
            return Err(Error::NotExterior(x.x, x.y));
        }
        Ok(wrap_angle(t))
    }
}

/// One piece of a piecewise table boundary. Arcs are parametrized by their
/// outward normal angle and run counterclockwise from `start` to `end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Piece {
    Arc {
        center: Vec2,
        radius: f64,
        start: f64,
        end: f64,
    },
    Segment {
        a: Vec2,
        b: Vec2,
    },
}

impl Piece {
    fn first_point(&self) -> Vec2 {
        match *self {
            Piece::Arc {
                center,
                radius,
                start,
                ..
            } => center + Vec2::polar(start) * radius,
            Piece::Segment { a, .. } => a,
        }
    }

    fn last_point(&self) -> Vec2 {
        match *self {
            Piece::Arc {
                center,
                radius,
                end,
                ..
            } => center + Vec2::polar(end) * radius,
            Piece::Segment { b, .. } => b,
        }
    }

    /// Outward normal angles at the two ends.
    fn normal_range(&self) -> (f64, f64) {
        match *self {
            Piece::Arc { start, end, .. } => (start, end),
            Piece::Segment { a, b } => {
                let t = (b - a).angle() - PI / 2.0;
                (t, t)
            }
        }
    }
}

/// Boundary features ordered by outward normal angle.
#[derive(Debug, Clone, Copy)]
enum Feature {
    Arc {
        center: Vec2,
        radius: f64,
        start: f64,
        span: f64,
    },
    Corner {
        vertex: Vec2,
        start: f64,
        span: f64,
    },
    Segment {
        a: Vec2,
        b: Vec2,
        normal: f64,
    },
}

/// A closed convex curve made of circular arcs and straight segments.
/// Consecutive pieces share endpoints; a direction jump at a junction is a
/// corner (curvature radius 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piecewise {
    pub pieces: Vec<Piece>,
}

impl Piecewise {
    fn scale(&self) -> f64 {
        let pts: Vec<Vec2> = self.pieces.iter().map(|p| p.first_point()).collect();
        let mut d: f64 = 0.0;
        for a in &pts {
            for b in &pts {
                d = d.max((*a - *b).norm());
            }
        }
        for p in &self.pieces {
            if let Piece::Arc { radius, .. } = p {
                d = d.max(*radius);
            }
        }
        d.max(1e-300)
    }

    fn validate(&self) -> Result<()> {
        let n = self.pieces.len();
        if n == 0 {
            return Err(Error::InvalidTable("no pieces".into()));
        }
        let tol = 1e-9 * self.scale();
        let mut turning = 0.0;
        for (i, p) in self.pieces.iter().enumerate() {
            match *p {
                Piece::Arc {
                    radius, start, end, ..
                } => {
                    if radius.is_nan() || radius <= 0.0 {
                        return Err(Error::InvalidTable(format!("arc {i} radius {radius}")));
                    }
                    if end.is_nan() || start.is_nan() || end <= start {
                        return Err(Error::InvalidTable(format!("arc {i} has end <= start")));
                    }
                    turning += end - start;
                }
                Piece::Segment { a, b } => {
                    if (b - a).norm() <= tol {
                        return Err(Error::InvalidTable(format!("segment {i} is empty")));
                    }
                }
            }
            let q = &self.pieces[(i + 1) % n];
            if (p.last_point() - q.first_point()).norm() > tol {
                return Err(Error::InvalidTable(format!(
                    "pieces {i} and {} do not meet",
                    (i + 1) % n
                )));
            }
            let jump = wrap_angle(q.normal_range().0 - p.normal_range().1 + 1e-12) - 1e-12;
            if jump >= PI {
                return Err(Error::InvalidTable(format!("reflex junction after piece {i}")));
            }
            turning += jump.max(0.0);
        }
        if (turning - TAU).abs() > 1e-9 {
            return Err(Error::InvalidTable(format!(
                "total turning {turning} differs from 2π"
            )));
        }
        Ok(())
    }

    fn features(&self) -> Vec<Feature> {
        let n = self.pieces.len();
        let mut out = Vec::with_capacity(2 * n);
        for (i, p) in self.pieces.iter().enumerate() {
            match *p {
                Piece::Arc {
                    center,
                    radius,
                    start,
                    end,
                } => out.push(Feature::Arc {
                    center,
                    radius,
                    start: wrap_angle(start),
                    span: end - start,
                }),
                Piece::Segment { a, b } => out.push(Feature::Segment {
                    a,
                    b,
                    normal: wrap_angle(p.normal_range().0),
                }),
            }
            let q = &self.pieces[(i + 1) % n];
            let t0 = p.normal_range().1;
            let jump = wrap_angle(q.normal_range().0 - t0 + 1e-12) - 1e-12;
            if jump > 1e-12 {
                out.push(Feature::Corner {
                    vertex: p.last_point(),
                    start: wrap_angle(t0),
                    span: jump,
                });
            }
        }
        out
    }

    fn in_range(theta: f64, start: f64, span: f64) -> bool {
        let d = wrap_angle(theta - start);
        let eps = 1e-12;
        d <= span + eps || d >= TAU - eps
    }

    fn feature_at(&self, theta: f64) -> Option<Feature> {
        let t = wrap_angle(theta);
        self.features().into_iter().find(|f| match *f {
            Feature::Arc { start, span, .. } | Feature::Corner { start, span, .. } => {
                Self::in_range(t, start, span)
            }
            Feature::Segment { normal, .. } => Self::in_range(t, normal, 0.0),
        })
    }

    fn contains(&self, x: Vec2) -> bool {
        // convex hull of the junction polygon and the circular caps
        let pts: Vec<Vec2> = self.pieces.iter().map(|p| p.first_point()).collect();
        let n = pts.len();
        let in_poly = n >= 3
            && (0..n).all(|i| cross(pts[(i + 1) % n] - pts[i], x - pts[i]) >= 0.0);
        if in_poly {
            return true;
        }
        self.pieces.iter().any(|p| match *p {
            Piece::Arc { center, radius, .. } => {
                let (a, b) = (p.first_point(), p.last_point());
                (x - center).norm() <= radius && cross(b - a, x - a) <= 0.0
            }
            Piece::Segment { .. } => false,
        })
    }

    fn tangency(&self, x: Vec2, rising: bool) -> Result<(Vec2, f64, f64)> {
        let scale = self.scale();
        if self.contains(x) {
            return Err(Error::NotExterior(x.x, x.y));
        }
        let sgn = if rising { 1.0 } else { -1.0 };
        for f in self.features() {
            match f {
                Feature::Segment { a, b, normal } => {
                    let nrm = Vec2::polar(normal);
                    if (x - a).dot(nrm).abs() <= 1e-12 * scale {
                        // x on the segment's supporting line
                        let _ = b;
                        return Err(Error::SingularLine(x.x, x.y));
                    }
                }
                Feature::Corner {
                    vertex,
                    start,
                    span,
                } => {
                    let d = vertex - x;
                    if d.norm() <= 1e-14 * scale {
                        return Err(Error::NotExterior(x.x, x.y));
                    }
                    let theta = d.angle() - sgn * PI / 2.0;
                    if Self::in_range(theta, start, span) {
                        return Ok((vertex, wrap_angle(theta), 0.0));
                    }
                }
                Feature::Arc {
                    center,
                    radius,
                    start,
                    span,
                } => {
                    let d = x - center;
                    let dist = d.norm();
                    if dist <= radius {
                        continue;
                    }
                    let theta = d.angle() + sgn * (radius / dist).acos();
                    if Self::in_range(theta, start, span) {
                        let p = center + Vec2::polar(theta) * radius;
                        return Ok((p, wrap_angle(theta), radius));
                    }
                }
            }
        }
        Err(Error::GeometricDegeneracy(format!(
            "no support feature found for ({}, {})",
            x.x, x.y
        )))
    }
}

/// A convex outer billiard table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexTable {
    SupportFourier(SupportFourier),
    Piecewise(Piecewise),
}

/// The support point seen from an exterior point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangencyFrame {
    pub point: Vec2,
    pub theta: f64,
    pub rho: f64,
    pub unit_tangent: Vec2,
}

/// `dT` at a point, in the world frame and in the segment frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapDifferential {
    pub world: Mat2,
    pub segment: Mat2,
    /// Columns are the segment-frame axes `e1`, `e2`.
    pub frame: Mat2,
    pub rho: f64,
    pub r: f64,
}

impl ConvexTable {
    /// Validated support-function table.
    pub fn support_fourier(h0: f64, coeffs: Vec<[f64; 2]>) -> Result<Self> {
        let t = Self::support_fourier_unchecked(h0, coeffs);
        t.validate()?;
        Ok(t)
    }

    /// Support-function table without the convexity check; queries still
    /// reject points where `ρ <= 0`.
    pub fn support_fourier_unchecked(h0: f64, coeffs: Vec<[f64; 2]>) -> Self {
        ConvexTable::SupportFourier(SupportFourier { h0, coeffs })
    }

    pub fn piecewise(pieces: Vec<Piece>) -> Result<Self> {
        let t = ConvexTable::Piecewise(Piecewise { pieces });
        t.validate()?;
        Ok(t)
    }

    pub fn circle(center: Vec2, radius: f64) -> Self {
        Self::support_fourier_unchecked(radius, vec![[center.x, center.y]])
    }

    /// Ellipse with semi-axes `a` (along x) and `b`, centered at the origin,
    /// as a truncated support-function series of `K` harmonics.
    pub fn ellipse(a: f64, b: f64, harmonics: usize) -> Result<Self> {
        let h = |t: f64| (a * a * t.cos().powi(2) + b * b * t.sin().powi(2)).sqrt();
        let m = 4096;
        let mut h0 = 0.0;
        let mut coeffs = vec![[0.0, 0.0]; harmonics];
        for j in 0..m {
            let t = TAU * j as f64 / m as f64;
            let v = h(t);
            h0 += v;
            for (i, c) in coeffs.iter_mut().enumerate() {
                let (s, cs) = (((i + 1) as f64) * t).sin_cos();
                c[0] += v * cs;
                c[1] += v * s;
            }
        }
        let h0 = h0 / m as f64;
        for c in &mut coeffs {
            c[0] *= 2.0 / m as f64;
            c[1] *= 2.0 / m as f64;
        }
        Self::support_fourier(h0, coeffs)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexTable::SupportFourier(s) => s.validate(),
            ConvexTable::Piecewise(p) => p.validate(),
        }
    }

    /// Characteristic length of the table.
    pub fn scale(&self) -> f64 {
        match self {
            ConvexTable::SupportFourier(s) => s.scale(),
            ConvexTable::Piecewise(p) => p.scale(),
        }
    }

    /// Support function value `h(θ)`.
    pub fn support(&self, theta: f64) -> f64 {
        match self {
            ConvexTable::SupportFourier(s) => s.h(theta),
            ConvexTable::Piecewise(p) => {
                let n = Vec2::polar(theta);
                match p.feature_at(theta) {
                    Some(Feature::Arc { center, radius, .. }) => center.dot(n) + radius,
                    Some(Feature::Corner { vertex, .. }) => vertex.dot(n),
                    Some(Feature::Segment { a, .. }) => a.dot(n),
                    None => f64::NAN,
                }
            }
        }
    }

    /// Boundary point with outward normal angle `θ`; counterclockwise in θ.
    pub fn boundary_point(&self, theta: f64) -> Result<Vec2> {
        self.curvature_radius(theta)?;
        match self {
            ConvexTable::SupportFourier(s) => Ok(s.boundary_point(theta)),
            ConvexTable::Piecewise(p) => match p.feature_at(theta) {
                Some(Feature::Arc { center, radius, .. }) => {
                    Ok(center + Vec2::polar(theta) * radius)
                }
                Some(Feature::Corner { vertex, .. }) => Ok(vertex),
                Some(Feature::Segment { a, b, .. }) => Ok((a + b) * 0.5),
                None => Err(Error::InvalidTable(format!("no feature at theta {theta}"))),
            },
        }
    }

    pub fn curvature_radius(&self, theta: f64) -> Result<f64> {
        match self {
            ConvexTable::SupportFourier(s) => {
                let r = s.rho(theta);
                if r > 0.0 {
                    Ok(r)
                } else {
                    Err(Error::InvalidTable(format!(
                        "curvature radius {r} <= 0 at theta = {theta}"
                    )))
                }
            }
            ConvexTable::Piecewise(p) => match p.feature_at(theta) {
                Some(Feature::Arc { radius, .. }) => Ok(radius),
                Some(Feature::Corner { .. }) => Ok(0.0),
                Some(Feature::Segment { .. }) => Ok(f64::INFINITY),
                None => Err(Error::InvalidTable(format!("no feature at theta {theta}"))),
            },
        }
    }

    fn frame_at(&self, x: Vec2, rising: bool) -> Result<TangencyFrame> {
        let (point, theta, rho) = match self {
            ConvexTable::SupportFourier(s) => {
                let t = s.tangency(x, rising)?;
                let rho = self.curvature_radius(t)?;
                (s.boundary_point(t), t, rho)
            }
            ConvexTable::Piecewise(p) => p.tangency(x, rising)?,
        };
        let dir = if rising { 1.0 } else { -1.0 };
        Ok(TangencyFrame {
            point,
            theta,
            rho,
            unit_tangent: Vec2::polar(theta).perp() * dir,
        })
    }

    /// Support point used by `T`: the table lies to the left of `x → P`.
    pub fn right_tangency(&self, x: Vec2) -> Result<TangencyFrame> {
        self.frame_at(x, true)
    }

    /// Support point used by `T⁻¹`.
    pub fn left_tangency(&self, x: Vec2) -> Result<TangencyFrame> {
        self.frame_at(x, false)
    }

    /// `T(x) = 2P - x`.
    pub fn outer_map(&self, x: Vec2) -> Result<Vec2> {
        Ok(self.right_tangency(x)?.point * 2.0 - x)
    }

    pub fn inverse_outer_map(&self, x: Vec2) -> Result<Vec2> {
        Ok(self.left_tangency(x)?.point * 2.0 - x)
    }

    /// `Tⁿ(x)`.
    pub fn iterate(&self, x: Vec2, n: usize) -> Result<Vec2> {
        (0..n).try_fold(x, |p, _| self.outer_map(p))
    }

    /// The orbit `x, T(x), …, Tⁿ(x)`.
    pub fn orbit(&self, x: Vec2, n: usize) -> Result<Vec<Vec2>> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(x);
        let mut p = x;
        for _ in 0..n {
            p = self.outer_map(p)?;
            out.push(p);
        }
        Ok(out)
    }

    pub fn outer_map_diff(&self, x: Vec2) -> Result<MapDifferential> {
        let f = self.right_tangency(x)?;
        let r = (f.point - x).norm();
        let e1 = f.unit_tangent;
        let e2 = e1.perp();
        let segment = Mat2::new(-1.0, -2.0 * f.rho / r, 0.0, -1.0);
        let frame = Mat2::new(e1.x, e2.x, e1.y, e2.y);
        let world = frame * segment * frame.transpose();
        Ok(MapDifferential {
            world,
            segment,
            frame,
            rho: f.rho,
            r,
        })
    }

    /// Enclosed area.
    pub fn area(&self) -> f64 {
        match self {
            ConvexTable::SupportFourier(s) => {
                let mut a = PI * s.h0 * s.h0;
                for (i, [p, q]) in s.coeffs.iter().enumerate() {
                    let k = (i + 1) as f64;
                    a += 0.5 * PI * (1.0 - k * k) * (p * p + q * q);
                }
                a
            }
            ConvexTable::Piecewise(p) => {
                let pts: Vec<Vec2> = p.pieces.iter().map(|q| q.first_point()).collect();
                let n = pts.len();
                let mut a = 0.5 * (0..n).map(|i| cross(pts[i], pts[(i + 1) % n])).sum::<f64>();
                for q in &p.pieces {
                    if let Piece::Arc {
                        radius, start, end, ..
                    } = q
                    {
                        let phi = end - start;
                        a += 0.5 * radius * radius * (phi - phi.sin());
                    }
                }
                a
            }
        }
    }

    /// Boundary samples at `m` equally spaced normal angles.
    pub fn sample_boundary(&self, m: usize) -> Result<Vec<Vec2>> {
        (0..m)
            .map(|j| self.boundary_point(TAU * j as f64 / m as f64))
            .collect()
    }

    /// Image under `x ↦ s R(φ) x + t` (SupportFourier only).
    pub fn transformed(&self, scale: f64, rotation: f64, translation: Vec2) -> Result<Self> {
        match self {
            ConvexTable::SupportFourier(s) => {
                let mut coeffs: Vec<[f64; 2]> = s
                    .coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, [a, b])| {
                        let (sn, cs) = (((i + 1) as f64) * rotation).sin_cos();
                        [scale * (a * cs - b * sn), scale * (a * sn + b * cs)]
                    })
                    .collect();
                if coeffs.is_empty() {
                    coeffs.push([0.0, 0.0]);
                }
                coeffs[0][0] += translation.x;
                coeffs[0][1] += translation.y;
                Ok(Self::support_fourier_unchecked(scale * s.h0, coeffs))
            }
            ConvexTable::Piecewise(_) => Err(Error::Domain(
                "transformed() is implemented for support-function tables".into(),
            )),
        }
    }
}

/// Least-squares support-function fit to samples `(θ_j, h_j)` with `K`
/// harmonics. Returns the table and the max absolute residual.
pub fn fit_support(samples: &[(f64, f64)], harmonics: usize) -> Result<(ConvexTable, f64)> {
    let cols = 1 + 2 * harmonics;
    if samples.len() < cols {
        return Err(Error::Domain(format!(
            "{} samples cannot determine {cols} coefficients",
            samples.len()
        )));
    }
    let a = DMatrix::from_fn(samples.len(), cols, |r, c| {
        let t = samples[r].0;
        if c == 0 {
            1.0
        } else {
            let k = c.div_ceil(2) as f64;
            if c % 2 == 1 {
                (k * t).cos()
            } else {
                (k * t).sin()
            }
        }
    });
    let b = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
    let x = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::Domain(e.to_string()))?;
    let resid = (&a * &x - &b).amax();
    let coeffs = (0..harmonics).map(|k| [x[1 + 2 * k], x[2 + 2 * k]]).collect();
    let table = ConvexTable::support_fourier(x[0], coeffs)?;
    Ok((table, resid))
}

/// Support samples of a closed counterclockwise curve from points and
/// tangent directions: `θ = angle(tangent) - π/2`, `h = p·n(θ)`.
pub fn support_samples(points: &[Vec2], tangents: &[Vec2]) -> Vec<(f64, f64)> {
    points
        .iter()
        .zip(tangents)
        .map(|(p, d)| {
            let theta = wrap_angle(d.angle() - PI / 2.0);
            (theta, p.dot(Vec2::polar(theta)))
        })
        .collect()
}

/// `cot α + cot β - 2ρ/r`.
pub fn mirror_residual(alpha: f64, beta: f64, rho: f64, r: f64) -> f64 {
    1.0 / alpha.tan() + 1.0 / beta.tan() - 2.0 * rho / r
}

/// Angle `β` of the image under `dT` of a line through `x` at angle `α`.
/// `α` is measured clockwise from the direction `x → y`, `β`
/// counterclockwise, both in `(0, π)`; with these conventions the mirror
/// equation `cot α + cot β = 2ρ/r` holds.
pub fn mirror_angle(diff: &MapDifferential, alpha: f64) -> f64 {
    let dir = nalgebra::Vector2::new(alpha.cos(), -alpha.sin());
    let img = diff.segment * dir;
    img.y.atan2(img.x).rem_euclid(PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ConvexTable {
        ConvexTable::circle(Vec2::ZERO, 1.0)
    }

    fn oval() -> ConvexTable {
        ConvexTable::support_fourier(1.0, vec![[0.05, -0.02], [0.1, 0.03], [0.01, -0.02]]).unwrap()
    }

    #[test]
    fn circle_boundary_and_translation() {
        let t = ConvexTable::circle(Vec2::ZERO, 2.0);
        let p = t.boundary_point(0.7).unwrap();
        assert!((p - Vec2::polar(0.7) * 2.0).norm() < 1e-15);
        let moved = ConvexTable::circle(Vec2::new(0.3, -0.4), 2.0);
        let q = moved.boundary_point(0.7).unwrap();
        assert!((q - p - Vec2::new(0.3, -0.4)).norm() < 1e-15);
    }

    #[test]
    fn second_harmonic_oval() {
        let eps = 0.1;
        let t = ConvexTable::support_fourier(1.0, vec![[0.0, 0.0], [eps, 0.0]]).unwrap();
        let p = t.boundary_point(0.0).unwrap();
        assert!((p - Vec2::new(1.1, 0.0)).norm() < 1e-15);
        for th in [0.0, 0.4, 1.3, 2.9] {
            let rho = t.curvature_radius(th).unwrap();
            assert!((rho - (1.0 - 3.0 * eps * (2.0 * th).cos())).abs() < 1e-14);
        }
        assert_eq!(unit().curvature_radius(1.0).unwrap(), 1.0);
    }

    #[test]
    fn nonconvex_support_rejected() {
        assert!(matches!(
            ConvexTable::support_fourier(1.0, vec![[0.0, 0.0], [0.4, 0.0]]),
            Err(Error::InvalidTable(_))
        ));
        let raw = ConvexTable::support_fourier_unchecked(1.0, vec![[0.0, 0.0], [0.4, 0.0]]);
        match raw.curvature_radius(0.0) {
            Err(Error::InvalidTable(_)) => {}
            other => panic!("{other:?}"),
        }
        assert!((raw.clone().support(0.0) - 1.4).abs() < 1e-15);
        assert!(raw.boundary_point(0.0).is_err());
    }

    #[test]
    fn right_tangency_unit_circle() {
        let x = Vec2::new(2.0, 0.0);
        let f = unit().right_tangency(x).unwrap();
        assert!((f.point - Vec2::new(0.5, 3f64.sqrt() / 2.0)).norm() < 1e-13);
        assert!((f.theta - PI / 3.0).abs() < 1e-13);
        // tangency and side: [P - x, γ'] = 0, origin left of x → P
        let gp = Vec2::polar(f.theta).perp();
        assert!(cross(f.point - x, gp).abs() < 1e-12);
        assert!(cross(f.point - x, Vec2::ZERO - x) > 0.0);
        assert!((f.unit_tangent.norm() - 1.0).abs() < 1e-12);
        let far = unit().right_tangency(Vec2::new(1e7, 0.0)).unwrap();
        assert!((far.theta - PI / 2.0).abs() < 1e-6);
        assert!(matches!(
            unit().right_tangency(Vec2::new(0.5, 0.0)),
            Err(Error::NotExterior(..))
        ));
    }

    #[test]
    fn outer_map_unit_circle() {
        let y = unit().outer_map(Vec2::new(2.0, 0.0)).unwrap();
        assert!((y - Vec2::new(-1.0, 3f64.sqrt())).norm() < 1e-12);
        for d in [1.1, 1.7, 3.0, 12.0] {
            let x = Vec2::polar(0.3) * d;
            let y = unit().outer_map(x).unwrap();
            assert!((y.norm() - d).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_pairs_with_forward() {
        let t = oval();
        for x in [Vec2::new(3.0, 0.2), Vec2::new(-1.0, 2.5), Vec2::new(0.0, -1.4)] {
            let y = t.outer_map(x).unwrap();
            let back = t.inverse_outer_map(y).unwrap();
            assert!((back - x).norm() < 1e-11, "{x:?} {back:?}");
        }
    }

    #[test]
    fn near_boundary_point_is_exterior() {
        let t = oval();
        let p = t.boundary_point(1.0).unwrap() + Vec2::polar(1.0) * 1e-7;
        let f = t.right_tangency(p).unwrap();
        assert!((f.point - p).norm() < 1e-2);
    }

    #[test]
    fn differential_unit_circle() {
        let d = unit().outer_map_diff(Vec2::new(2.0, 0.0)).unwrap();
        assert!((d.r - 3f64.sqrt()).abs() < 1e-12);
        assert!((d.rho - 1.0).abs() < 1e-15);
        let expect = Mat2::new(-1.0, -2.0 / 3f64.sqrt(), 0.0, -1.0);
        assert!((d.segment - expect).amax() < 1e-12);
        assert!((d.world.determinant() - 1.0).abs() < 1e-12);
    }

    fn fd_jacobian(t: &ConvexTable, x: Vec2, h: f64) -> Mat2 {
        let dx = (t.outer_map(x + Vec2::new(h, 0.0)).unwrap()
            - t.outer_map(x - Vec2::new(h, 0.0)).unwrap())
            / (2.0 * h);
        let dy = (t.outer_map(x + Vec2::new(0.0, h)).unwrap()
            - t.outer_map(x - Vec2::new(0.0, h)).unwrap())
            / (2.0 * h);
        Mat2::new(dx.x, dy.x, dx.y, dy.y)
    }

    #[test]
    fn differential_matches_finite_differences() {
        let t = oval();
        for x in [Vec2::new(2.0, 0.5), Vec2::new(-1.5, -1.5), Vec2::new(0.3, 1.6)] {
            let d = t.outer_map_diff(x).unwrap();
            let fd = fd_jacobian(&t, x, 1e-6);
            assert!((d.world - fd).norm() / d.world.norm() < 1e-5);
        }
    }

    #[test]
    fn mirror_residual_examples() {
        assert!((mirror_residual(PI / 2.0, PI / 2.0, 0.7, 2.0) + 0.7).abs() < 1e-15);
        let (a, b): (f64, f64) = (0.9, 1.7);
        let rho_over_r = (1.0 / a.tan() + 1.0 / b.tan()) / 2.0;
        assert!(mirror_residual(a, b, rho_over_r * 3.0, 3.0).abs() < 1e-14);
        let t = oval();
        let d = t.outer_map_diff(Vec2::new(1.9, 1.2)).unwrap();
        for alpha in [0.3, 1.0, 2.0, 2.8] {
            let beta = mirror_angle(&d, alpha);
            assert!(mirror_residual(alpha, beta, d.rho, d.r).abs() < 1e-8);
        }
    }

    #[test]
    fn ellipse_is_affine_image_of_circle() {
        let e = ConvexTable::ellipse(1.3, 0.8, 64).unwrap();
        for th in [0.0, 0.5, 2.0, 4.0] {
            let p = e.boundary_point(th).unwrap();
            let q = Vec2::new(p.x / 1.3, p.y / 0.8);
            assert!((q.norm() - 1.0).abs() < 1e-12);
        }
        assert!((e.area() - PI * 1.3 * 0.8).abs() < 1e-12);
    }

    #[test]
    fn json_schema() {
        let t = ConvexTable::circle(Vec2::new(0.5, 0.0), 1.0);
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, r#"{"kind":"support_fourier","h0":1.0,"coeffs":[[0.5,0.0]]}"#);
        let back: ConvexTable = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        let pw = r#"{"kind":"piecewise","pieces":[{"type":"segment","a":[0,0],"b":[1,0]}]}"#;
        let p: ConvexTable = serde_json::from_str(pw).unwrap();
        assert!(p.validate().is_err());
    }

    fn stadium() -> ConvexTable {
        // two half-disks joined by segments
        ConvexTable::piecewise(vec![
            Piece::Segment {
                a: Vec2::new(-1.0, -1.0),
                b: Vec2::new(1.0, -1.0),
            },
            Piece::Arc {
                center: Vec2::new(1.0, 0.0),
                radius: 1.0,
                start: -PI / 2.0,
                end: PI / 2.0,
            },
            Piece::Segment {
                a: Vec2::new(1.0, 1.0),
                b: Vec2::new(-1.0, 1.0),
            },
            Piece::Arc {
                center: Vec2::new(-1.0, 0.0),
                radius: 1.0,
                start: PI / 2.0,
                end: 3.0 * PI / 2.0,
            },
        ])
        .unwrap()
    }

    #[test]
    fn piecewise_stadium() {
        let t = stadium();
        assert!((t.area() - (4.0 + PI)).abs() < 1e-12);
        // line y = -1 contains the bottom segment
        assert!(matches!(
            t.outer_map(Vec2::new(-3.0, -1.0)),
            Err(Error::SingularLine(..))
        ));
        assert!(matches!(
            t.outer_map(Vec2::new(0.0, 0.5)),
            Err(Error::NotExterior(..))
        ));
        // far to the right, tangency on the right cap
        let f = t.right_tangency(Vec2::new(4.0, 0.0)).unwrap();
        assert!(((f.point - Vec2::new(1.0, 0.0)).norm() - 1.0).abs() < 1e-13);
        assert_eq!(f.rho, 1.0);
        let y = t.outer_map(Vec2::new(4.0, 0.0)).unwrap();
        assert!((t.inverse_outer_map(y).unwrap() - Vec2::new(4.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn piecewise_rejects_open_chain() {
        let bad = ConvexTable::piecewise(vec![Piece::Arc {
            center: Vec2::ZERO,
            radius: 1.0,
            start: 0.0,
            end: PI,
        }]);
        assert!(bad.is_err());
        let full = ConvexTable::piecewise(vec![Piece::Arc {
            center: Vec2::ZERO,
            radius: 1.0,
            start: 0.0,
            end: TAU,
        }])
        .unwrap();
        let y = full.outer_map(Vec2::new(2.0, 0.0)).unwrap();
        assert!((y - Vec2::new(-1.0, 3f64.sqrt())).norm() < 1e-12);
    }

    #[test]
    fn fit_recovers_series() {
        let t = oval();
        let samples: Vec<(f64, f64)> = (0..200)
            .map(|j| {
                let th = TAU * j as f64 / 200.0;
                (th, t.support(th))
            })
            .collect();
        let (fit, res) = fit_support(&samples, 6).unwrap();
        assert!(res < 1e-13);
        for th in [0.1, 2.0, 5.0] {
            assert!((fit.support(th) - t.support(th)).abs() < 1e-13);
        }
    }
}
