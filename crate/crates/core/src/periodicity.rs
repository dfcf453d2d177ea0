//! Periodic orbits, compositions of several outer billiard maps, and the
//! 3-periodicity obstruction.
//!
//! Triangle labels follow the cyclic convention `T_1(z_2) = z_3`,
//! `T_2(z_3) = z_1`, `T_3(z_1) = z_2`: table `i` touches the side opposite
//! `z_i`, with curvature radius `ρ_i` there and half side length `r_i`.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{area2, cross, Polygon, Vec2};
use crate::table::{ConvexTable, Mat2, Piece};

/// Result of [`find_periodic`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitReport {
    pub points: Vec<Vec2>,
    pub period: usize,
    pub rotation: usize,
    pub closure_error: f64,
    /// Twice the signed area of the orbit polygon (winding counted).
    pub circumscribed_area2: f64,
    pub iterations: usize,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// A point inside the table, for winding numbers.
fn interior_point(table: &ConvexTable) -> Result<Vec2> {
    let b = table.sample_boundary(64)?;
    Ok(b.iter().fold(Vec2::ZERO, |a, p| a + *p) / b.len() as f64)
}

/// Number of turns the closed orbit makes around `center`.
pub fn winding(points: &[Vec2], center: Vec2) -> f64 {
    let n = points.len();
    let mut total = 0.0;
    for j in 0..n {
        let a = points[j] - center;
        let b = points[(j + 1) % n] - center;
        total += cross(a, b).atan2(a.dot(b));
    }
    total / (2.0 * PI)
}

fn closure(table: &ConvexTable, x: Vec2, n: usize) -> Result<Vec2> {
    Ok(table.iterate(x, n)? - x)
}

/// Newton on `Tⁿ(x) - x` with a central-difference Jacobian and an SVD
/// pseudo-inverse, so that the rank-one Jacobian of a family of periodic
/// points (a circle, say) is handled.
pub fn find_periodic(table: &ConvexTable, n: usize, k: usize, seed: Vec2) -> Result<OrbitReport> {
    const MAX_ITER: usize = 60;
    if n < 2 || k == 0 || gcd(n, k) != 1 {
        return Err(Error::Domain(format!("need gcd(n, k) = 1, got ({n}, {k})")));
    }
    let scale = table.scale();
    let tol = 1e-9 * scale;
    let h = 1e-6 * scale;
    let mut x = seed;
    let mut f = closure(table, x, n)?;
    let mut history = vec![f.norm()];
    let mut it = 0;
    while f.norm() >= tol {
        if it == MAX_ITER {
            return Err(Error::NoConvergence {
                iterations: it,
                history,
            });
        }
        it += 1;
        let fx = (closure(table, x + Vec2::new(h, 0.0), n)? - closure(table, x - Vec2::new(h, 0.0), n)?)
            / (2.0 * h);
        let fy = (closure(table, x + Vec2::new(0.0, h), n)? - closure(table, x - Vec2::new(0.0, h), n)?)
            / (2.0 * h);
        let j = Matrix2::new(fx.x, fy.x, fx.y, fy.y);
        let svd = j.svd(true, true);
        let smax = svd.singular_values.max();
        let step = svd
            .solve(&nalgebra::Vector2::new(-f.x, -f.y), 1e-10 * smax.max(1e-300))
            .map_err(|e| Error::Domain(e.to_string()))?;
        let dx = Vec2::new(step[0], step[1]);
        let mut lambda = 1.0;
        loop {
            let trial = x + dx * lambda;
            match closure(table, trial, n) {
                Ok(ft) if ft.norm() < f.norm() => {
                    x = trial;
                    f = ft;
                    break;
                }
                _ if lambda < 1e-4 => {
                    return Err(Error::NoConvergence {
                        iterations: it,
                        history,
                    })
                }
                _ => lambda *= 0.5,
            }
        }
        history.push(f.norm());
    }
    let points = table.orbit(x, n - 1)?;
    let rot = winding(&points, interior_point(table)?).round().abs() as usize;
    if rot != k {
        return Err(Error::Domain(format!(
            "converged to an orbit with rotation number {rot}, not {k}"
        )));
    }
    let poly = Polygon::new(points.clone())?;
    Ok(OrbitReport {
        circumscribed_area2: area2(&poly),
        points,
        period: n,
        rotation: rot,
        closure_error: f.norm(),
        iterations: it,
    })
}

/// Which support point a reflection uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tangency {
    /// The outer billiard map: the table lies left of `x → P`.
    Right,
    /// Its inverse: the table lies right of `x → P`. This is the reflection
    /// a table that is convex outward relative to the orbit induces.
    Left,
}

/// Reflection in one table's support point of the chosen kind, with its
/// world-frame differential.
pub fn reflect(table: &ConvexTable, side: Tangency, x: Vec2) -> Result<(Vec2, Mat2)> {
    match side {
        Tangency::Right => Ok((table.outer_map(x)?, table.outer_map_diff(x)?.world)),
        Tangency::Left => {
            let y = table.inverse_outer_map(x)?;
            let d = table
                .outer_map_diff(y)?
                .world
                .try_inverse()
                .ok_or_else(|| Error::Domain("singular differential".into()))?;
            Ok((y, d))
        }
    }
}

/// Applies `tables[0]`, then `tables[1]`, and so on. Returns the image and
/// the world-frame differential of the composition.
pub fn compose_maps(tables: &[ConvexTable], x: Vec2) -> Result<(Vec2, Mat2)> {
    let sides = vec![Tangency::Right; tables.len()];
    compose_reflections(tables, &sides, x)
}

/// [`compose_maps`] with a tangency kind per table.
pub fn compose_reflections(tables: &[ConvexTable], sides: &[Tangency], x: Vec2) -> Result<(Vec2, Mat2)> {
    if tables.len() != sides.len() {
        return Err(Error::LengthMismatch {
            expected: tables.len(),
            got: sides.len(),
        });
    }
    let mut y = x;
    let mut d = Mat2::identity();
    for (t, s) in tables.iter().zip(sides) {
        let (next, dt) = reflect(t, *s, y)?;
        d = dt * d;
        y = next;
    }
    Ok((y, d))
}

fn side_data(tri: &Polygon, side: usize) -> Result<(f64, f64, Vec2, Vec2, Vec2)> {
    if tri.len() != 3 {
        return Err(Error::Domain(format!("expected a triangle, got {} vertices", tri.len())));
    }
    if side > 2 {
        return Err(Error::Domain(format!("side index {side} out of range")));
    }
    let a2 = area2(tri);
    let d = tri.diameter();
    if a2.abs() <= 1e-12 * d * d {
        return Err(Error::Degenerate(side));
    }
    let apex = tri.vertex(side as isize);
    let p = tri.vertex(side as isize + 1);
    let q = tri.vertex(side as isize + 2);
    Ok((0.5 * a2.abs(), 0.5 * (q - p).norm(), apex, p, q))
}

/// `A ρ - 2r³` for the side opposite vertex `side` (0-based), where `A` is
/// the unsigned area and `2r` that side's length.
pub fn expr1_residual(tri: &Polygon, side: usize, rho: f64) -> Result<f64> {
    let (a, r, ..) = side_data(tri, side)?;
    Ok(a * rho - 2.0 * r * r * r)
}

/// `cot α_p + cot α_q - ρ/r`, with `α_p, α_q` the angles at the endpoints of
/// the side opposite vertex `side`. Equals `-(A r)^{-1}` times
/// [`expr1_residual`].
pub fn expr_residual(tri: &Polygon, side: usize, rho: f64) -> Result<f64> {
    let (_, r, apex, p, q) = side_data(tri, side)?;
    let cot = |at: Vec2, a: Vec2, b: Vec2| {
        let (u, v) = (a - at, b - at);
        u.dot(v) / cross(u, v).abs()
    };
    Ok(cot(p, q, apex) + cot(q, apex, p) - rho / r)
}

/// Interior angle at vertex `i` of a triangle.
fn angle_at(tri: &Polygon, i: isize) -> f64 {
    let u = tri.vertex(i + 1) - tri.vertex(i);
    let v = tri.vertex(i - 1) - tri.vertex(i);
    cross(u, v).abs().atan2(u.dot(v))
}

/// `A_i`: the differential in the segment frame.
pub fn reflection_matrix(rho: f64, r: f64) -> Mat2 {
    Matrix2::new(-1.0, -2.0 * rho / r, 0.0, -1.0)
}

/// `B_i`: rotation through `π - α_i`.
pub fn turn_matrix(alpha: f64) -> Mat2 {
    Matrix2::new(-alpha.cos(), -alpha.sin(), alpha.sin(), -alpha.cos())
}

/// Result of [`identity_example`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub triangle: Polygon,
    /// `tables[i]` touches the side opposite `z_{i+1}` from outside.
    pub tables: Vec<ConvexTable>,
    /// `|T_2 T_1 T_3 (z_1) - z_1|`.
    pub cycle_closure: f64,
    pub composed_differential: [[f64; 2]; 2],
    /// Max entry of `d(T_2 T_1 T_3)(z_1) - Id`.
    pub differential_error: f64,
    /// `B_1 A_2 B_3 A_1 B_2 A_3`.
    pub frame_product: [[f64; 2]; 2],
    pub frame_product_error: f64,
    /// `A ρ_2 - 2 r_2³`.
    pub expr1: f64,
    pub determinant: f64,
    /// The same composition with the circles moved to the inner side of
    /// each edge (ordinary outer billiard maps). Not the identity.
    pub inner_differential: [[f64; 2]; 2],
}

fn to_rows(m: &Mat2) -> [[f64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

fn max_dev_from_identity(m: &Mat2) -> f64 {
    (m - Mat2::identity()).amax()
}

/// Circles of radius `radii[i]` tangent to the side opposite vertex `i` at
/// its midpoint, on the inner or the outer side of that edge.
pub fn midpoint_circles(tri: &Polygon, radii: [f64; 3], outside: bool) -> Result<Vec<ConvexTable>> {
    let ccw = (area2(tri) > 0.0) != outside;
    (0..3)
        .map(|i| {
            let p = tri.vertex(i as isize + 1);
            let q = tri.vertex(i as isize + 2);
            let m = (p + q) * 0.5;
            let inward = if ccw { (q - p).perp() } else { -(q - p).perp() }.normalized();
            Ok(ConvexTable::circle(m + inward * radii[i], radii[i]))
        })
        .collect()
}

/// Unit equilateral triangle with circles of radius `1/√3` touching the side
/// midpoints from outside. Each circle is convex outward relative to the
/// orbit, so it reflects through its left support point, and
/// `d(T_2 T_1 T_3)(z_1)` is the identity.
pub fn identity_example() -> Result<IdentityReport> {
    let tri = Polygon::new(vec![
        Vec2::new(0.0, 0.0),
        Vec2::new(1.0, 0.0),
        Vec2::new(0.5, 3f64.sqrt() / 2.0),
    ])?;
    let rho = 1.0 / 3f64.sqrt();
    let tables = midpoint_circles(&tri, [rho; 3], true)?;
    let order = [tables[2].clone(), tables[0].clone(), tables[1].clone()];
    let z1 = tri.vertex(0);
    let (y, d) = compose_reflections(&order, &[Tangency::Left; 3], z1)?;
    let inner = midpoint_circles(&tri, [rho; 3], false)?;
    let inner_order = [inner[2].clone(), inner[0].clone(), inner[1].clone()];
    let (_, d_inner) = compose_maps(&inner_order, z1)?;

    let alpha: Vec<f64> = (0..3).map(|i| angle_at(&tri, i)).collect();
    let r: Vec<f64> = (0..3)
        .map(|i| 0.5 * (tri.vertex(i as isize + 2) - tri.vertex(i as isize + 1)).norm())
        .collect();
    let a = |i: usize| reflection_matrix(rho, r[i]);
    let b = |i: usize| turn_matrix(alpha[i]);
    let prod = b(0) * a(1) * b(2) * a(0) * b(1) * a(2);

    Ok(IdentityReport {
        cycle_closure: (y - z1).norm(),
        composed_differential: to_rows(&d),
        differential_error: max_dev_from_identity(&d),
        frame_product: to_rows(&prod),
        frame_product_error: max_dev_from_identity(&prod),
        expr1: expr1_residual(&tri, 1, rho)?,
        determinant: d.determinant(),
        inner_differential: to_rows(&d_inner),
        triangle: tri,
        tables,
    })
}

/// Result of [`obstruction_demo`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstructionReport {
    pub params: Vec<f64>,
    /// `A ρ_2 - 2 r_2³` along the family.
    pub residuals: Vec<f64>,
    /// `max |area(s) - area(0)|`; area is held fixed by construction.
    pub area_spread: f64,
    /// Central-difference slope of the residual at `s = 0`.
    pub slope_at_zero: f64,
    /// The residual vanishes at `s = 0` and nowhere else among the samples.
    pub zero_only_at_symmetric: bool,
    /// Every member is symmetric in the perpendicular bisector of `z_1 z_3`.
    pub mirror_symmetric: bool,
}

/// Member `s` of the obstruction family around the unit equilateral
/// triangle: `z_1, z_3` slide along their line with the midpoint fixed, so
/// `r_2 = (1 + s)/2`, and `z_2` moves along the bisector to keep the area.
pub fn obstruction_triangle(s: f64) -> Result<Polygon> {
    let m = Vec2::new(0.5, 0.0);
    let r = 0.5 * (1.0 + s);
    let h = (3f64.sqrt() / 2.0) / (1.0 + s);
    // counterclockwise z_1, z_2, z_3 with z_2 opposite the moving side
    Polygon::new(vec![m + Vec2::new(r, 0.0), m + Vec2::new(0.0, h), m - Vec2::new(r, 0.0)])
}

pub fn obstruction_demo(n_samples: usize, amplitude: f64) -> Result<ObstructionReport> {
    let rho2 = 1.0 / 3f64.sqrt();
    let n = n_samples.max(1) | 1;
    let params: Vec<f64> = (0..n)
        .map(|j| amplitude * (2.0 * j as f64 / (n - 1).max(1) as f64 - 1.0))
        .collect();
    let res = |s: f64| -> Result<f64> { expr1_residual(&obstruction_triangle(s)?, 1, rho2) };
    let residuals = params.iter().map(|&s| res(s)).collect::<Result<Vec<_>>>()?;
    let a0 = area2(&obstruction_triangle(0.0)?);
    let mut area_spread: f64 = 0.0;
    let mut mirror = true;
    for &s in &params {
        let t = obstruction_triangle(s)?;
        area_spread = area_spread.max(0.5 * (area2(&t) - a0).abs());
        let axis = t.vertex(0).x + t.vertex(2).x;
        let reflect = |p: Vec2| Vec2::new(axis - p.x, p.y);
        mirror &= (reflect(t.vertex(0)) - t.vertex(2)).norm() < 1e-12
            && (reflect(t.vertex(1)) - t.vertex(1)).norm() < 1e-12;
    }
    let h = 1e-6;
    let slope_at_zero = (res(h)? - res(-h)?) / (2.0 * h);
    let zero_only_at_symmetric = params
        .iter()
        .zip(&residuals)
        .all(|(s, r)| (s.abs() < 1e-15) == (r.abs() < 1e-12));
    Ok(ObstructionReport {
        params,
        residuals,
        area_spread,
        slope_at_zero,
        zero_only_at_symmetric,
        mirror_symmetric: mirror,
    })
}

/// Square of side `side` centered at the origin with each side replaced by
/// a circular arc of radius `arc_radius` through its endpoints. The table is
/// strictly convex and keeps its four corners.
pub fn arc_square(side: f64, arc_radius: f64) -> Result<ConvexTable> {
    let a = 0.5 * side;
    if !(side > 0.0 && arc_radius > a) {
        return Err(Error::Domain(format!(
            "need arc radius > half side, got side {side}, radius {arc_radius}"
        )));
    }
    let beta = (a / arc_radius).asin();
    let offset = a - (arc_radius * arc_radius - a * a).sqrt();
    let pieces = (0..4)
        .map(|i| {
            let phi = i as f64 * PI / 2.0;
            Piece::Arc {
                center: Vec2::polar(phi) * offset,
                radius: arc_radius,
                start: phi - beta,
                end: phi + beta,
            }
        })
        .collect();
    ConvexTable::piecewise(pieces)
}

/// Fraction of grid points in the disk `|x - center| ≤ radius` with
/// `|Tⁿ(x) - x| < tol`. Points where the map is undefined count as failures.
pub fn periodic_fraction(
    table: &ConvexTable,
    n: usize,
    center: Vec2,
    radius: f64,
    grid: usize,
    tol: f64,
) -> (usize, usize, f64) {
    let g = grid.max(2);
    let mut total = 0;
    let mut good = 0;
    let mut worst: f64 = 0.0;
    for i in 0..g {
        for j in 0..g {
            let d = Vec2::new(
                -radius + 2.0 * radius * i as f64 / (g - 1) as f64,
                -radius + 2.0 * radius * j as f64 / (g - 1) as f64,
            );
            if d.norm() > radius {
                continue;
            }
            total += 1;
            let x = center + d;
            match closure(table, x, n) {
                Ok(e) if e.norm() < tol => {
                    good += 1;
                    worst = worst.max(e.norm());
                }
                _ => {}
            }
        }
    }
    (good, total, worst)
}

/// Result of [`rounded_square_demo`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundedSquareReport {
    pub table: ConvexTable,
    pub periodic_point: Vec2,
    pub orbit: Vec<Vec2>,
    pub disk_radius: f64,
    pub samples: usize,
    pub periodic: usize,
    pub fraction: f64,
    /// Largest `|T⁴(x) - x|` among the periodic samples.
    pub max_closure: f64,
}

/// Open set of 4-periodic points for [`arc_square`]. The orbit of
/// `(side, 0)` reflects in the four corners, and so does every nearby
/// point, so `T⁴` is the identity there.
pub fn rounded_square_demo(
    side: f64,
    arc_radius: f64,
    disk_radius: f64,
    grid: usize,
) -> Result<RoundedSquareReport> {
    let table = arc_square(side, arc_radius)?;
    let x0 = Vec2::new(side, 0.0);
    let orbit = table.orbit(x0, 3)?;
    let (periodic, samples, max_closure) = periodic_fraction(&table, 4, x0, disk_radius, grid, 1e-9);
    Ok(RoundedSquareReport {
        table,
        periodic_point: x0,
        orbit,
        disk_radius,
        samples,
        periodic,
        fraction: periodic as f64 / samples.max(1) as f64,
        max_closure,
    })
}
