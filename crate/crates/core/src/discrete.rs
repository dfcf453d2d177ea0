//! Turning a triangle inside a convex polygon by parallel slides.
//!
//! A triangle vertex may slide along a host edge to the adjacent host vertex
//! when that edge is parallel to the opposite side of the triangle. Such a
//! slide keeps the triangle's area. In a regular `k`-gon the chord
//! `z_a z_b` has direction `π(a + b)/k + π/2`, so parallelism is
//! `a + b ≡ c + d (mod k)`. For `k = 3n + 1` the triangle
//! `(0, n+1, 2n+1)` turns all the way around.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{triangle_area2, Polygon, PolyTangent, Vec2};

/// Relative parallelism tolerance (`· scale²`).
pub const PARALLEL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteState {
    pub host: Polygon,
    /// Host indices of `A, B, C`.
    pub triangle: [usize; 3],
}

impl DiscreteState {
    pub fn new(host: Polygon, triangle: [usize; 3]) -> Result<Self> {
        let k = host.len();
        if triangle.iter().any(|&i| i >= k) {
            return Err(Error::Domain(format!("triangle index out of range for a {k}-gon")));
        }
        if triangle[0] == triangle[1] || triangle[1] == triangle[2] || triangle[0] == triangle[2] {
            return Err(Error::Domain("triangle indices must be distinct".into()));
        }
        let signs: Vec<f64> = (0..k as isize).map(|i| triangle_area2(&host, i)).collect();
        if !(signs.iter().all(|a| *a > 0.0) || signs.iter().all(|a| *a < 0.0)) {
            return Err(Error::Domain("host polygon is not strictly convex".into()));
        }
        Ok(DiscreteState { host, triangle })
    }

    fn with_triangle(&self, triangle: [usize; 3]) -> Self {
        DiscreteState {
            host: self.host.clone(),
            triangle,
        }
    }

    pub fn points(&self) -> [Vec2; 3] {
        self.triangle.map(|i| self.host.vertex(i as isize))
    }
}

/// Slide of triangle vertex `vertex` (0 = A, 1 = B, 2 = C) from host index
/// `from` to the adjacent index `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    pub vertex: usize,
    pub from: usize,
    pub to: usize,
}

fn scale2(p: &Polygon) -> f64 {
    let d = p.diameter();
    d * d
}

/// All slides whose host edge is parallel to the opposite triangle side to
/// `tol · scale²`, ordered by triangle vertex, then target index.
pub fn legal_moves(state: &DiscreteState, tol: f64) -> Vec<Move> {
    let k = state.host.len();
    let thr = tol * scale2(&state.host);
    let mut out = Vec::new();
    for v in 0..3 {
        let from = state.triangle[v];
        let p = state.host.vertex(state.triangle[(v + 1) % 3] as isize);
        let q = state.host.vertex(state.triangle[(v + 2) % 3] as isize);
        let mut targets = [(from + 1) % k, (from + k - 1) % k];
        targets.sort_unstable();
        for to in targets {
            if state.triangle.contains(&to) {
                continue;
            }
            let edge = state.host.vertex(to as isize) - state.host.vertex(from as isize);
            let side = q - p;
            if edge.cross(side).abs() <= thr {
                out.push(Move { vertex: v, from, to });
            }
        }
    }
    out
}

pub fn apply_move(state: &DiscreteState, m: Move) -> DiscreteState {
    let mut t = state.triangle;
    t[m.vertex] = m.to;
    state.with_triangle(t)
}

/// Outcome of [`rotate_sequence`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationRun {
    /// `states[0]` is the start; `states[j]` follows `moves[j-1]`.
    pub states: Vec<DiscreteState>,
    pub moves: Vec<Move>,
    /// First move count at which the vertex set equals the start's with the
    /// labels cyclically shifted.
    pub relabeled_at: Option<usize>,
    /// First move count at which every label is back in place.
    pub returned_at: Option<usize>,
    /// Set when the cadence vertex had no legal slide.
    pub stuck_at: Option<usize>,
}

impl RotationRun {
    pub fn completed(&self) -> bool {
        self.returned_at.is_some()
    }
}

/// Cadence of moving vertices: A, C, B, A, C, B, ...
const CADENCE: [usize; 3] = [0, 2, 1];

/// Slides the cadence vertex at each step. Runs until the labelled triangle
/// is back in place, no legal slide exists, or `max_moves` is reached.
pub fn rotate_sequence(state: &DiscreteState, max_moves: usize, tol: f64) -> RotationRun {
    let start = state.triangle;
    let mut run = RotationRun {
        states: vec![state.clone()],
        moves: Vec::new(),
        relabeled_at: None,
        returned_at: None,
        stuck_at: None,
    };
    let mut cur = state.clone();
    for step in 0..max_moves {
        let v = CADENCE[step % 3];
        let Some(m) = legal_moves(&cur, tol).into_iter().find(|m| m.vertex == v) else {
            run.stuck_at = Some(step);
            return run;
        };
        cur = apply_move(&cur, m);
        run.moves.push(m);
        run.states.push(cur.clone());
        let t = cur.triangle;
        let count = step + 1;
        if run.relabeled_at.is_none() && (1..3).any(|s| (0..3).all(|i| t[i] == start[(i + s) % 3])) {
            run.relabeled_at = Some(count);
        }
        if t == start {
            if run.relabeled_at.is_none() {
                run.relabeled_at = Some(count);
            }
            run.returned_at = Some(count);
            return run;
        }
    }
    run
}

fn check_k(p: &Polygon, n: usize) -> Result<usize> {
    let k = 3 * n + 1;
    if n == 0 || p.len() != k {
        return Err(Error::Domain(format!(
            "need a {k}-gon for n = {n}, got {} vertices",
            p.len()
        )));
    }
    Ok(k)
}

/// `cross(z_{i+1} - z_i, z_{i+2n+1} - z_{i+n+1})` for each `i`.
pub fn parallel_residuals(p: &Polygon, n: usize) -> Result<Vec<f64>> {
    let k = check_k(p, n)?;
    Ok((0..k as isize)
        .map(|i| {
            let m = n as isize;
            (p.vertex(i + 1) - p.vertex(i)).cross(p.vertex(i + 2 * m + 1) - p.vertex(i + m + 1))
        })
        .collect())
}

fn residual_jacobian(p: &Polygon, n: usize) -> Result<DMatrix<f64>> {
    let k = check_k(p, n)?;
    let mut j = DMatrix::zeros(k, 2 * k);
    let m = n as isize;
    for i in 0..k as isize {
        let d1 = p.vertex(i + 1) - p.vertex(i);
        let d2 = p.vertex(i + 2 * m + 1) - p.vertex(i + m + 1);
        // ∂cross(a, b)/∂a = (b.y, -b.x), ∂/∂b = (-a.y, a.x)
        let ga = Vec2::new(d2.y, -d2.x);
        let gb = Vec2::new(-d1.y, d1.x);
        for (idx, g) in [(i + 1, ga), (i, -ga), (i + 2 * m + 1, gb), (i + m + 1, -gb)] {
            let c = crate::geom::cyclic(idx, k);
            j[(i as usize, 2 * c)] += g.x;
            j[(i as usize, 2 * c + 1)] += g.y;
        }
    }
    Ok(j)
}

/// Infinitesimal affine motions `z ↦ Mz + b` at `p`, flattened.
fn affine_generators(p: &Polygon) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(6);
    let maps: [fn(Vec2) -> Vec2; 6] = [
        |_| Vec2::new(1.0, 0.0),
        |_| Vec2::new(0.0, 1.0),
        |z| Vec2::new(z.x, 0.0),
        |z| Vec2::new(z.y, 0.0),
        |z| Vec2::new(0.0, z.x),
        |z| Vec2::new(0.0, z.y),
    ];
    for f in maps {
        let v = PolyTangent::new(p.vertices().iter().map(|z| f(*z)).collect());
        out.push(DVector::from_vec(v.to_flat()));
    }
    out
}

/// Null space of the parallelism constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationSpace {
    pub dimension: usize,
    /// Orthonormal basis of the null space.
    pub basis: Vec<PolyTangent>,
    /// How many of the six affine generators lie in the null space.
    pub affine: usize,
    /// Orthonormal null directions orthogonal to every affine motion.
    pub non_affine: Vec<PolyTangent>,
}

pub fn deformation_space(p: &Polygon, n: usize) -> Result<DeformationSpace> {
    let res = parallel_residuals(p, n)?;
    let s2 = scale2(p);
    let worst = res.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    if worst > 1e-10 * s2 {
        return Err(Error::Precondition(format!(
            "parallelism residual {worst:e} exceeds 1e-10·scale²"
        )));
    }
    let k = p.len();
    let j = residual_jacobian(p, n)?;
    // pad to square so the SVD yields a full right basis
    let mut sq = DMatrix::zeros(2 * k, 2 * k);
    sq.view_mut((0, 0), (k, 2 * k)).copy_from(&j);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let smax = svd.singular_values.max();
    let null: Vec<DVector<f64>> = (0..2 * k)
        .filter(|&r| svd.singular_values[r] <= 1e-8 * smax)
        .map(|r| vt.row(r).transpose())
        .collect();
    let basis_m = DMatrix::from_columns(&null);
    let project = |v: &DVector<f64>| &basis_m * (basis_m.transpose() * v);

    let gens = affine_generators(p);
    let affine = gens
        .iter()
        .filter(|g| (project(g) - *g).norm() <= 1e-8 * g.norm())
        .count();

    // null directions orthogonal to the affine span
    let aff = DMatrix::from_columns(&gens);
    let q = aff.svd(true, false).u.expect("requested");
    let q = q.columns(0, 6).into_owned();
    let mut rest: Vec<DVector<f64>> = Vec::new();
    for v in &null {
        let mut w = v - &q * (q.transpose() * v);
        for r in &rest {
            w -= r * r.dot(&w);
        }
        if w.norm() > 1e-6 {
            rest.push(w.normalize());
        }
    }
    let to_tan = |v: &DVector<f64>| PolyTangent::from_flat(v.as_slice());
    Ok(DeformationSpace {
        dimension: null.len(),
        basis: null.iter().map(to_tan).collect(),
        affine,
        non_affine: rest.iter().map(to_tan).collect(),
    })
}

/// Minimum-norm Newton projection onto the parallelism constraints.
pub fn project_to_constraints(p: &Polygon, n: usize, tol: f64, max_iter: usize) -> Result<Polygon> {
    let mut cur = p.clone();
    let s2 = scale2(p);
    let mut history = Vec::new();
    for _ in 0..=max_iter {
        let r = DVector::from_vec(parallel_residuals(&cur, n)?);
        let worst = r.amax();
        history.push(worst);
        if worst < tol * s2 {
            return Ok(cur);
        }
        let j = residual_jacobian(&cur, n)?;
        let step = j
            .svd(true, true)
            .solve(&(-r), 1e-12)
            .map_err(|e| Error::Domain(e.to_string()))?;
        cur = cur.displaced(&PolyTangent::from_flat(step.as_slice()), 1.0)?;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        history,
    })
}

/// The regular `(3n+1)`-gon with the start triangle `(0, n+1, 2n+1)`.
pub fn regular_start(n: usize) -> Result<DiscreteState> {
    let k = 3 * n + 1;
    let p = Polygon::regular(k, 1, 1.0, 0.0)?;
    DiscreteState::new(p, [0, n + 1, 2 * n + 1])
}
