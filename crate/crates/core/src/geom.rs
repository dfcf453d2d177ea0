//! Plane primitives, polygons, and tangent vectors to polygon space.
//!
//! All indexing of polygon vertices is cyclic; [`Polygon::vertex`] and
//! [`cyclic`] are the single place where `i ± 1 mod n` is resolved.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point or vector of the plane. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector at angle `theta`.
    pub fn polar(theta: f64) -> Self {
        Vec2::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        cross(self, o)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    /// Counterclockwise rotation by a right angle.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Vec2 {
        self / self.norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn rotated(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// The determinant `[a, b] = a.x b.y - a.y b.x`.
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Reduces a possibly negative index modulo `n`.
pub fn cyclic(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// A closed polygon `z_0, …, z_{n-1}` with `z_i != z_{i+1}` (cyclically).
///
/// Serialized as a JSON array of `[x, y]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec2>", into = "Vec<Vec2>")]
pub struct Polygon {
    vertices: Vec<Vec2>,
}

impl TryFrom<Vec<Vec2>> for Polygon {
    type Error = Error;
    fn try_from(v: Vec<Vec2>) -> Result<Self> {
        Polygon::new(v)
    }
}

impl From<Polygon> for Vec<Vec2> {
    fn from(p: Polygon) -> Self {
        p.vertices
    }
}

impl Polygon {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::TooFewVertices(n));
        }
        for i in 0..n {
            let j = (i + 1) % n;
            if vertices[i] == vertices[j] {
                return Err(Error::CoincidentVertices(i, j));
            }
        }
        Ok(Polygon { vertices })
    }

    /// Regular polygon `z_j = R e^{2πi (j k / n) + i phase}`, j = 0..n-1.
    pub fn regular(n: usize, k: usize, radius: f64, phase: f64) -> Result<Self> {
        let step = std::f64::consts::TAU * k as f64 / n as f64;
        Polygon::new(
            (0..n)
                .map(|j| Vec2::polar(phase + step * j as f64) * radius)
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    /// Vertex with cyclic index.
    pub fn vertex(&self, i: isize) -> Vec2 {
        self.vertices[cyclic(i, self.len())]
    }

    /// Largest distance between two vertices.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max((*a - *b).norm());
            }
        }
        d
    }

    pub fn centroid(&self) -> Vec2 {
        let s = self.vertices.iter().fold(Vec2::ZERO, |acc, v| acc + *v);
        s / self.len() as f64
    }

    /// Applies `f` to every vertex. Fails if the image leaves `G_n`.
    pub fn map(&self, f: impl Fn(Vec2) -> Vec2) -> Result<Polygon> {
        Polygon::new(self.vertices.iter().map(|v| f(*v)).collect())
    }

    /// Moves the vertices by `eps * w`.
    pub fn displaced(&self, w: &PolyTangent, eps: f64) -> Result<Polygon> {
        check_len(self, w)?;
        Polygon::new(
            self.vertices
                .iter()
                .zip(w.velocities())
                .map(|(z, v)| *z + *v * eps)
                .collect(),
        )
    }

    /// Coordinates stacked as `[x_0, y_0, x_1, y_1, …]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.vertices.iter().flat_map(|v| [v.x, v.y]).collect()
    }

    pub fn from_flat(c: &[f64]) -> Result<Polygon> {
        Polygon::new(c.chunks_exact(2).map(|p| Vec2::new(p[0], p[1])).collect())
    }
}

/// A tangent vector to polygon space: one velocity per vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolyTangent {
    velocities: Vec<Vec2>,
}

impl PolyTangent {
    pub fn new(velocities: Vec<Vec2>) -> Self {
        PolyTangent { velocities }
    }

    pub fn zeros(n: usize) -> Self {
        PolyTangent::new(vec![Vec2::ZERO; n])
    }

    pub fn velocities(&self) -> &[Vec2] {
        &self.velocities
    }

    pub fn velocities_mut(&mut self) -> &mut [Vec2] {
        &mut self.velocities
    }

    pub fn len(&self) -> usize {
        self.velocities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.velocities.is_empty()
    }

    pub fn get(&self, i: isize) -> Vec2 {
        self.velocities[cyclic(i, self.len())]
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.velocities.iter().flat_map(|v| [v.x, v.y]).collect()
    }

    pub fn from_flat(c: &[f64]) -> Self {
        PolyTangent::new(c.chunks_exact(2).map(|p| Vec2::new(p[0], p[1])).collect())
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &PolyTangent) -> PolyTangent {
        PolyTangent::new(
            self.velocities
                .iter()
                .zip(&other.velocities)
                .map(|(a, b)| *a + *b * s)
                .collect(),
        )
    }

    pub fn scaled(&self, s: f64) -> PolyTangent {
        PolyTangent::new(self.velocities.iter().map(|v| *v * s).collect())
    }

    pub fn norm(&self) -> f64 {
        self.velocities.iter().map(|v| v.norm_sq()).sum::<f64>().sqrt()
    }
}

pub(crate) fn check_len(z: &Polygon, w: &PolyTangent) -> Result<()> {
    if z.len() != w.len() {
        return Err(Error::LengthMismatch {
            expected: z.len(),
            got: w.len(),
        });
    }
    Ok(())
}

/// Twice the signed area, `A(Z) = Σ [z_i, z_{i+1}]`.
pub fn area2(z: &Polygon) -> f64 {
    let n = z.len() as isize;
    (0..n).map(|i| cross(z.vertex(i), z.vertex(i + 1))).sum()
}

/// `a_i = [z_i - z_{i-1}, z_{i+1} - z_i]`, twice the oriented area of the
/// triangle `z_{i-1} z_i z_{i+1}`.
pub fn triangle_area2(z: &Polygon, i: isize) -> f64 {
    let (p, q, r) = (z.vertex(i - 1), z.vertex(i), z.vertex(i + 1));
    cross(q - p, r - q)
}

/// All `a_i`, in vertex order.
pub fn triangle_areas2(z: &Polygon) -> Vec<f64> {
    (0..z.len() as isize).map(|i| triangle_area2(z, i)).collect()
}

/// No three consecutive vertices collinear: `|a_i| > tol · diam²` for all i.
pub fn is_nondegenerate(z: &Polygon, tol: f64) -> bool {
    first_degenerate(z, tol).is_none()
}

pub(crate) fn first_degenerate(z: &Polygon, tol: f64) -> Option<usize> {
    let d = z.diameter();
    let thr = tol * d * d;
    (0..z.len()).find(|&i| triangle_area2(z, i as isize).abs() <= thr)
}

/// Vertex `i` of the result is vertex `i + s` of the input.
pub fn cyclic_shift(z: &Polygon, s: isize) -> Polygon {
    let n = z.len() as isize;
    Polygon {
        vertices: (0..n).map(|i| z.vertex(i + s)).collect(),
    }
}

/// Directional derivative of [`area2`] at `z` along `w`.
pub fn area2_derivative(z: &Polygon, w: &PolyTangent) -> f64 {
    let n = z.len() as isize;
    (0..n)
        .map(|i| cross(w.get(i), z.vertex(i + 1)) + cross(z.vertex(i), w.get(i + 1)))
        .sum()
}

/// Gradient of [`area2`] in flat coordinates.
pub fn area2_gradient(z: &Polygon) -> Vec<f64> {
    let n = z.len() as isize;
    (0..n)
        .flat_map(|i| {
            // ∂/∂z_i of [z_i, z_{i+1}] + [z_{i-1}, z_i]
            let d = z.vertex(i + 1) - z.vertex(i - 1);
            [d.y, -d.x]
        })
        .collect()
}

/// Symmetric Hausdorff distance between two finite point sets.
pub fn hausdorff(a: &[Vec2], b: &[Vec2]) -> f64 {
    fn directed(a: &[Vec2], b: &[Vec2]) -> f64 {
        a.iter()
            .map(|p| b.iter().map(|q| (*p - *q).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    }
    directed(a, b).max(directed(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sq() -> Polygon {
        Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap()
    }

    fn shoelace(pts: &[(f64, f64)]) -> f64 {
        let n = pts.len();
        let mut s = 0.0;
        for i in 0..n {
            let (x0, y0) = pts[i];
            let (x1, y1) = pts[(i + 1) % n];
            s += (x1 - x0) * (y1 + y0);
        }
        -s
    }

    #[test]
    fn hausdorff_of_offset_sets() {
        let a = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)];
        let b = [Vec2::new(0.0, 0.5), Vec2::new(1.0, 0.0), Vec2::new(3.0, 0.0)];
        assert_eq!(hausdorff(&a, &a), 0.0);
        assert_eq!(hausdorff(&a, &b), 2.0);
        assert_eq!(hausdorff(&b, &a), 2.0);
    }

    #[test]
    fn cross_examples() {
        assert_eq!(cross(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)), 1.0);
        assert_eq!(cross(Vec2::new(2.0, 1.0), Vec2::new(3.0, 4.0)), 5.0);
        let u = Vec2::new(0.3, -7.1);
        assert_eq!(cross(u, u), 0.0);
    }

    #[test]
    fn area_examples() {
        assert_eq!(area2(&sq()), 2.0);
        let tri = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(2.0, 2.0),
        ])
        .unwrap();
        assert_eq!(area2(&tri), 0.0);
        let pent = Polygon::regular(5, 1, 1.0, 0.0).unwrap();
        let pts: Vec<_> = pent.vertices().iter().map(|v| (v.x, v.y)).collect();
        let oracle = shoelace(&pts);
        assert!((oracle - 5.0 * 72f64.to_radians().sin()).abs() < 1e-12);
        assert!((area2(&pent) - oracle).abs() < 1e-12);
    }

    #[test]
    fn triangle_area_examples() {
        let t = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
        ])
        .unwrap();
        assert_eq!(triangle_area2(&t, 1), 1.0);
        let eq = Polygon::regular(3, 1, 1.0, 0.0).unwrap();
        // side √3, double area s²√3/2
        let expected = 3.0 * 3f64.sqrt() / 2.0;
        for i in 0..3 {
            assert!((triangle_area2(&eq, i) - expected).abs() < 1e-12);
        }
        let col = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
        ])
        .unwrap();
        assert_eq!(triangle_area2(&col, 1), 0.0);
    }

    #[test]
    fn nondegeneracy() {
        assert!(is_nondegenerate(&sq(), 1e-9));
        let p = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap();
        assert!(!is_nondegenerate(&p, 1e-9));
        // move vertex 1 of a regular hexagon onto the chord z_0 z_2
        let h = Polygon::regular(6, 1, 1.0, 0.0).unwrap();
        let mut v = h.vertices().to_vec();
        v[1] = (v[0] + v[2]) * 0.5;
        let h = Polygon::new(v).unwrap();
        assert!(!is_nondegenerate(&h, 1e-12));
    }

    #[test]
    fn shifts() {
        let t = Polygon::regular(3, 1, 1.0, 0.3).unwrap();
        assert_eq!(cyclic_shift(&t, 0), t);
        assert_eq!(cyclic_shift(&t, 3), t);
        let s = cyclic_shift(&t, 1);
        assert_eq!(s.vertices()[0], t.vertices()[1]);
        assert_eq!(s.vertices()[1], t.vertices()[2]);
        assert_eq!(s.vertices()[2], t.vertices()[0]);
    }

    #[test]
    fn polygon_rejects_bad_input() {
        assert_eq!(
            Polygon::new(vec![Vec2::ZERO, Vec2::new(1.0, 0.0)]),
            Err(Error::TooFewVertices(2))
        );
        assert!(matches!(
            Polygon::new(vec![Vec2::ZERO, Vec2::ZERO, Vec2::new(1.0, 0.0)]),
            Err(Error::CoincidentVertices(0, 1))
        ));
    }

    #[test]
    fn polygon_json() {
        let s = serde_json::to_string(&sq()).unwrap();
        assert_eq!(s, "[[0.0,0.0],[1.0,0.0],[1.0,1.0],[0.0,1.0]]");
        let back: Polygon = serde_json::from_str(&s).unwrap();
        assert_eq!(back, sq());
        assert!(serde_json::from_str::<Polygon>("[[0,0],[0,0],[1,1]]").is_err());
    }

    fn vec2() -> impl Strategy<Value = Vec2> {
        (-10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y)| Vec2::new(x, y))
    }

    fn polygon() -> impl Strategy<Value = Polygon> {
        prop::collection::vec(vec2(), 3..9).prop_filter_map("G_n", |v| Polygon::new(v).ok())
    }

    proptest! {
        #[test]
        fn cross_bilinear_antisymmetric(a in vec2(), b in vec2(), c in vec2(), s in -3.0..3.0f64) {
            prop_assert!((cross(a, b) + cross(b, a)).abs() <= 1e-12 * (1.0 + cross(a, b).abs()));
            let lhs = cross(a * s + c, b);
            let rhs = s * cross(a, b) + cross(c, b);
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }

        #[test]
        fn triple_identity(u in vec2(), v in vec2(), w in vec2()) {
            let r = u * cross(v, w) + v * cross(w, u) + w * cross(u, v);
            let scale = u.norm().max(v.norm()).max(w.norm()).max(1.0);
            prop_assert!(r.norm() < 1e-12 * scale.powi(3));
        }

        #[test]
        fn area_translation_orientation_shift(z in polygon(), t in vec2(), s in 0isize..10) {
            let d = z.diameter().max(1e-3);
            let a = area2(&z);
            let moved = z.map(|p| p + t).unwrap();
            prop_assert!((area2(&moved) - a).abs() < 1e-12 * (d + t.norm()).powi(2) * 10.0);
            let mut rev = z.vertices().to_vec();
            rev.reverse();
            let rev = Polygon::new(rev).unwrap();
            prop_assert!((area2(&rev) + a).abs() < 1e-12 * d * d * 10.0);
            prop_assert!((area2(&cyclic_shift(&z, s)) - a).abs() < 1e-12 * d * d * 10.0);
        }
    }
}
