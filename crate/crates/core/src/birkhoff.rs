//! The dual Birkhoff distribution on polygon space.
//!
//! A tangent vector `W` is horizontal when every side line `z_i z_{i+1}`
//! rotates about the side's midpoint, i.e. when all the 1-forms
//! `α_i = [z_{i+1} - z_i, dz_{i+1} + dz_i]` vanish on `W`. The frame fields
//! `W_k` are supported on vertices `k, k+1`:
//!
//! ```text
//! w_{k,k}   = a_{k+1} (z_k - z_{k-1})
//! w_{k+1,k} = a_k     (z_{k+2} - z_{k+1})
//! ```
//!
//! Their components are polynomials in the vertex coordinates, so brackets
//! are computed from exact directional derivatives.
//!
//! Sign conventions: `ω_i(V, W) = [v_i, w_i]` and
//! `dα(X, Y) = X α(Y) - Y α(X) - α([X, Y])`. With these,
//! `ω_k(W_{k-1}, W_k) = -a_{k-1} a_k a_{k+1}` and
//! `α_i([W_{k-1}, W_k]) = -dα_i(W_{k-1}, W_k)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{
    area2, area2_gradient, check_len, cross, first_degenerate, triangle_area2, Polygon,
    PolyTangent, Vec2,
};

/// Relative tolerance (`· diam²`) below which `a_i` counts as zero.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Relative singular-value threshold for numeric ranks.
pub const RANK_TOL: f64 = 1e-8;

/// The frame `W_1, …, W_n` at a base polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionFrame {
    pub base: Polygon,
    pub fields: Vec<PolyTangent>,
}

pub(crate) fn require_nondegenerate(z: &Polygon) -> Result<()> {
    match first_degenerate(z, DEGENERACY_TOL) {
        Some(i) => Err(Error::Degenerate(i)),
        None => Ok(()),
    }
}

/// `W_k(Z)` without a degeneracy check.
pub fn field(z: &Polygon, k: isize) -> PolyTangent {
    let n = z.len();
    let mut w = PolyTangent::zeros(n);
    let kk = crate::geom::cyclic(k, n);
    let k1 = (kk + 1) % n;
    let v = w.velocities_mut();
    v[kk] += (z.vertex(k) - z.vertex(k - 1)) * triangle_area2(z, k + 1);
    v[k1] += (z.vertex(k + 2) - z.vertex(k + 1)) * triangle_area2(z, k);
    w
}

/// Directional derivative of `a_i` along `v`.
fn area_derivative(z: &Polygon, v: &PolyTangent, i: isize) -> f64 {
    cross(v.get(i) - v.get(i - 1), z.vertex(i + 1) - z.vertex(i))
        + cross(z.vertex(i) - z.vertex(i - 1), v.get(i + 1) - v.get(i))
}

/// `D W_k(Z)[V]`, exact.
pub fn field_derivative(z: &Polygon, k: isize, v: &PolyTangent) -> PolyTangent {
    let n = z.len();
    let mut out = PolyTangent::zeros(n);
    let kk = crate::geom::cyclic(k, n);
    let k1 = (kk + 1) % n;
    let o = out.velocities_mut();
    o[kk] += (z.vertex(k) - z.vertex(k - 1)) * area_derivative(z, v, k + 1)
        + (v.get(k) - v.get(k - 1)) * triangle_area2(z, k + 1);
    o[k1] += (z.vertex(k + 2) - z.vertex(k + 1)) * area_derivative(z, v, k)
        + (v.get(k + 2) - v.get(k + 1)) * triangle_area2(z, k);
    out
}

pub fn frame(z: &Polygon) -> Result<DistributionFrame> {
    require_nondegenerate(z)?;
    Ok(DistributionFrame {
        base: z.clone(),
        fields: (0..z.len() as isize).map(|k| field(z, k)).collect(),
    })
}

/// `α_i(W) = [z_{i+1} - z_i, w_{i+1} + w_i]`.
pub fn alpha(z: &Polygon, i: isize, w: &PolyTangent) -> f64 {
    cross(z.vertex(i + 1) - z.vertex(i), w.get(i + 1) + w.get(i))
}

pub fn alphas(z: &Polygon, w: &PolyTangent) -> Vec<f64> {
    (0..z.len() as isize).map(|i| alpha(z, i, w)).collect()
}

/// `|α_i(W)| ≤ tol · diam³` for all i.
pub fn is_horizontal(z: &Polygon, w: &PolyTangent, tol: f64) -> bool {
    if check_len(z, w).is_err() {
        return false;
    }
    let thr = tol * z.diameter().powi(3);
    alphas(z, w).iter().all(|a| a.abs() <= thr)
}

/// `(Σ α_i(W), dA(W))`; the two are negatives of each other.
pub fn sum_alpha_vs_da(z: &Polygon, w: &PolyTangent) -> (f64, f64) {
    (
        alphas(z, w).iter().sum(),
        crate::geom::area2_derivative(z, w),
    )
}

/// `ω_i(V, W) = [v_i, w_i]`.
pub fn omega_pair(i: isize, v: &PolyTangent, w: &PolyTangent) -> f64 {
    cross(v.get(i), w.get(i))
}

/// `dα_i(V, W) = 2 (ω_{i+1} - ω_i)(V, W)`.
pub fn d_alpha_pair(i: isize, v: &PolyTangent, w: &PolyTangent) -> f64 {
    2.0 * (omega_pair(i + 1, v, w) - omega_pair(i, v, w))
}

/// How [`lie_bracket`] evaluates the commutator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BracketMethod {
    /// Exact differentiation of the polynomial components.
    Exact,
    /// Symmetrized four-flow composition with step `h`.
    Flow { h: f64 },
}

fn flow_step(z: &Polygon, k: isize, h: f64) -> Result<Polygon> {
    // one RK4 step along W_k
    let k1 = field(z, k);
    let z2 = z.displaced(&k1, h / 2.0)?;
    let k2 = field(&z2, k);
    let z3 = z.displaced(&k2, h / 2.0)?;
    let k3 = field(&z3, k);
    let z4 = z.displaced(&k3, h)?;
    let k4 = field(&z4, k);
    let incr = k1.axpy(2.0, &k2).axpy(2.0, &k3).axpy(1.0, &k4);
    z.displaced(&incr, h / 6.0)
}

fn flow_commutator(z: &Polygon, j: isize, k: isize, h: f64) -> Result<PolyTangent> {
    let p1 = flow_step(z, j, h)?;
    let p2 = flow_step(&p1, k, h)?;
    let p3 = flow_step(&p2, j, -h)?;
    let p4 = flow_step(&p3, k, -h)?;
    Ok(PolyTangent::from_flat(
        &p4.to_flat()
            .iter()
            .zip(z.to_flat())
            .map(|(a, b)| (a - b) / (h * h))
            .collect::<Vec<_>>(),
    ))
}

/// `[W_j, W_k](Z) = DW_k[W_j] - DW_j[W_k]`.
pub fn lie_bracket(z: &Polygon, j: isize, k: isize, method: BracketMethod) -> Result<PolyTangent> {
    require_nondegenerate(z)?;
    match method {
        BracketMethod::Exact => {
            let wj = field(z, j);
            let wk = field(z, k);
            Ok(field_derivative(z, k, &wj).axpy(-1.0, &field_derivative(z, j, &wk)))
        }
        BracketMethod::Flow { h } => {
            let a = flow_commutator(z, j, k, h)?;
            let b = flow_commutator(z, j, k, -h)?;
            Ok(a.axpy(1.0, &b).scaled(0.5))
        }
    }
}

fn numeric_rank(m: &DMatrix<f64>) -> (usize, Vec<f64>) {
    let sv = m.clone().svd(false, false).singular_values;
    let mut s: Vec<f64> = sv.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let max = s.first().copied().unwrap_or(0.0);
    let rank = s.iter().filter(|&&x| x > RANK_TOL * max).count();
    (rank, s)
}

fn columns(vs: &[PolyTangent]) -> DMatrix<f64> {
    let rows = vs.first().map_or(0, |v| 2 * v.len());
    DMatrix::from_fn(rows, vs.len(), |r, c| vs[c].to_flat()[r])
}

/// Translate to the centroid and scale to unit diameter.
pub fn normalize(z: &Polygon) -> Result<Polygon> {
    let c = z.centroid();
    let d = z.diameter();
    z.map(|p| (p - c) / d)
}

/// Rank of the stacked frame fields (expected `n`).
pub fn frame_rank(z: &Polygon) -> Result<usize> {
    let z = normalize(z)?;
    let f = frame(&z)?;
    Ok(numeric_rank(&columns(&f.fields)).0)
}

/// Rank of the coefficient matrix of `α_1, …, α_n` (expected `n`).
pub fn form_rank(z: &Polygon) -> Result<usize> {
    let z = normalize(z)?;
    require_nondegenerate(&z)?;
    let n = z.len();
    let m = DMatrix::from_fn(n, 2 * n, |i, c| {
        let d = z.vertex(i as isize + 1) - z.vertex(i as isize);
        let vertex = c / 2;
        if vertex == i || vertex == (i + 1) % n {
            // ∂/∂w of [d, w] = (-d.y, d.x)
            if c % 2 == 0 {
                -d.y
            } else {
                d.x
            }
        } else {
            0.0
        }
    });
    Ok(numeric_rank(&m).0)
}

/// Result of the bracket-growth test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub n: usize,
    pub rank: usize,
    pub expected: usize,
    pub singular_values: Vec<f64>,
}

/// Numeric rank of `{W_k} ∪ {[W_{k-1}, W_k]}` projected onto `ker dA`.
pub fn bracket_growth(z: &Polygon) -> Result<RankReport> {
    let z = normalize(z)?;
    require_nondegenerate(&z)?;
    if area2(&z).abs() <= DEGENERACY_TOL {
        return Err(Error::Domain("polygon has zero area".into()));
    }
    let n = z.len() as isize;
    let mut vs: Vec<PolyTangent> = (0..n).map(|k| field(&z, k)).collect();
    for k in 0..n {
        vs.push(lie_bracket(&z, k - 1, k, BracketMethod::Exact)?);
    }
    let g = area2_gradient(&z);
    let gg: f64 = g.iter().map(|x| x * x).sum();
    for v in &mut vs {
        let f = v.to_flat();
        let s: f64 = f.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() / gg;
        *v = PolyTangent::from_flat(&f.iter().zip(&g).map(|(a, b)| a - s * b).collect::<Vec<_>>());
    }
    let (rank, singular_values) = numeric_rank(&columns(&vs));
    Ok(RankReport {
        n: z.len(),
        rank,
        expected: 2 * z.len() - 1,
        singular_values,
    })
}

pub fn bracket_growth_rank(z: &Polygon) -> Result<usize> {
    Ok(bracket_growth(z)?.rank)
}

/// Random nondegenerate polygon: a perturbed regular n-gon, rescaled to the
/// requested double area.
pub fn random_polygon<R: rand::Rng>(rng: &mut R, n: usize, area2_target: f64) -> Polygon {
    loop {
        let v: Vec<Vec2> = (0..n)
            .map(|j| {
                let t = std::f64::consts::TAU * (j as f64 + rng.gen_range(-0.3..0.3)) / n as f64;
                Vec2::polar(t) * rng.gen_range(0.5..1.5)
            })
            .collect();
        let Ok(p) = Polygon::new(v) else { continue };
        let a = area2(&p);
        if a <= 0.0 || first_degenerate(&p, 1e-3).is_some() {
            continue;
        }
        let s = (area2_target / a).sqrt();
        if let Ok(q) = p.map(|x| x * s) {
            return q;
        }
    }
}

/// Random tangent vector with components in `[-1, 1]`.
pub fn random_tangent<R: rand::Rng>(rng: &mut R, n: usize) -> PolyTangent {
    PolyTangent::new(
        (0..n)
            .map(|_| Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn equilateral() -> Polygon {
        Polygon::regular(3, 1, 1.0, 0.0).unwrap()
    }

    fn square() -> Polygon {
        Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn equilateral_frame() {
        let z = equilateral();
        let f = frame(&z).unwrap();
        let a = 3.0 * 3f64.sqrt() / 2.0;
        let w1 = &f.fields[0];
        let (z1, z2, z3) = (z.vertex(0), z.vertex(1), z.vertex(2));
        assert!((w1.get(0) - (z1 - z3) * a).norm() < 1e-12);
        assert!((w1.get(1) - (z3 - z2) * a).norm() < 1e-12);
        assert_eq!(w1.get(2), Vec2::ZERO);
    }

    #[test]
    fn frame_fields_are_horizontal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 3..9 {
            let z = random_polygon(&mut rng, n, 2.0);
            for w in frame(&z).unwrap().fields {
                assert!(alphas(&z, &w).iter().all(|a| a.abs() < 1e-12));
                assert!(is_horizontal(&z, &w, 1e-12));
            }
        }
    }

    #[test]
    fn degenerate_frame_rejected() {
        let z = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap();
        assert!(matches!(frame(&z), Err(Error::Degenerate(_))));
        assert!(matches!(bracket_growth_rank(&z), Err(Error::Degenerate(_))));
    }

    #[test]
    fn alpha_on_translation() {
        let z = square();
        let w = PolyTangent::new(vec![Vec2::new(1.0, 0.0); 4]);
        assert_eq!(alpha(&z, 0, &w), 0.0);
        assert_eq!(alpha(&z, 1, &w), -2.0);
        assert!(!is_horizontal(&z, &w, 1e-9));
        assert!(is_horizontal(&z, &PolyTangent::zeros(4), 0.0));
    }

    #[test]
    fn rotation_field_is_horizontal_on_regular_polygon() {
        for n in 3..9 {
            let z = Polygon::regular(n, 1, 1.3, 0.2).unwrap();
            let w = PolyTangent::new(z.vertices().iter().map(|p| p.perp()).collect());
            assert!(alphas(&z, &w).iter().all(|a| a.abs() < 1e-14));
        }
    }

    #[test]
    fn translation_not_horizontal_on_generic_polygon() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = random_polygon(&mut rng, 5, 2.0);
        let w = PolyTangent::new(vec![Vec2::new(0.3, -0.8); 5]);
        assert!(alphas(&z, &w).iter().any(|a| a.abs() > 1e-3));
    }

    #[test]
    fn alpha_sum_is_minus_area_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 3..9 {
            let z = random_polygon(&mut rng, n, 2.0);
            let scale = z.diameter().powi(3);
            let w = random_tangent(&mut rng, n);
            let (s, da) = sum_alpha_vs_da(&z, &w);
            assert!((s + da).abs() < 1e-12 * scale);
            // dilation: dA(Z)[Z] = 2A
            let dil = PolyTangent::new(z.vertices().to_vec());
            let (s, da) = sum_alpha_vs_da(&z, &dil);
            assert!((da - 2.0 * area2(&z)).abs() < 1e-12 * scale);
            assert!((s + da).abs() < 1e-12 * scale);
            let (s, da) = sum_alpha_vs_da(&z, &field(&z, 1));
            assert!(s.abs() < 1e-12 * scale && da.abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn omega_diagonal_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 3..9 {
            let z = random_polygon(&mut rng, n, 3.0);
            let n = n as isize;
            for k in 0..n {
                let (a, b) = (field(&z, k - 1), field(&z, k));
                let prod = triangle_area2(&z, k - 1) * triangle_area2(&z, k) * triangle_area2(&z, k + 1);
                for i in 0..n {
                    let w = omega_pair(i, &a, &b);
                    if i == k {
                        assert!((w + prod).abs() < 1e-10 * prod.abs());
                    } else {
                        assert!(w.abs() < 1e-12);
                    }
                    let da = d_alpha_pair(i, &a, &b);
                    let expected = if i == k {
                        2.0 * prod
                    } else if crate::geom::cyclic(i + 1, n as usize) == k as usize {
                        -2.0 * prod
                    } else {
                        0.0
                    };
                    assert!((da - expected).abs() < 1e-10 * prod.abs());
                }
                assert_eq!(omega_pair(k, &a, &a), 0.0);
            }
        }
    }

    #[test]
    fn brackets_of_distant_fields_stay_in_their_span() {
        // the frame fields carry a_i weights, so [W_j, W_k] for |j-k| >= 2 is
        // a combination of W_j and W_k rather than zero
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let z = random_polygon(&mut rng, 7, 2.0);
        let s5 = z.diameter().powi(5);
        for j in 0..7isize {
            for k in 0..7isize {
                let d = (j - k).rem_euclid(7);
                let b = lie_bracket(&z, j, k, BracketMethod::Exact).unwrap();
                if d == 0 {
                    assert!(b.norm() < 1e-12 * s5);
                }
                if (2..=5).contains(&d) {
                    assert!(is_horizontal(&z, &b, 1e-12));
                    let m = columns(&[field(&z, j), field(&z, k)]);
                    let rhs = nalgebra::DVector::from_vec(b.to_flat());
                    let c = m.clone().svd(true, true).solve(&rhs, 1e-14).unwrap();
                    assert!((&m * c - rhs).norm() < 1e-10 * s5, "{j} {k}");
                }
            }
        }
    }

    #[test]
    fn cartan_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for n in 3..9 {
            let z = random_polygon(&mut rng, n, 2.0);
            let s5 = z.diameter().powi(5);
            let n = n as isize;
            for k in 0..n {
                let xi = lie_bracket(&z, k - 1, k, BracketMethod::Exact).unwrap();
                let (a, b) = (field(&z, k - 1), field(&z, k));
                for i in 0..n {
                    let lhs = alpha(&z, i, &xi);
                    let rhs = -d_alpha_pair(i, &a, &b);
                    assert!((lhs - rhs).abs() < 1e-9 * s5);
                }
            }
        }
    }

    #[test]
    fn flow_bracket_matches_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let z = random_polygon(&mut rng, 5, 2.0);
        for k in 0..5isize {
            let e = lie_bracket(&z, k - 1, k, BracketMethod::Exact).unwrap();
            let f = lie_bracket(&z, k - 1, k, BracketMethod::Flow { h: 1e-3 }).unwrap();
            assert!(e.axpy(-1.0, &f).norm() < 1e-5 * e.norm());
        }
    }

    #[test]
    fn ranks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tri = random_polygon(&mut rng, 3, 3.0);
        assert_eq!(bracket_growth_rank(&tri).unwrap(), 5);
        let hex = random_polygon(&mut rng, 6, 3.0);
        assert_eq!(bracket_growth_rank(&hex).unwrap(), 11);
        for n in 3..9 {
            let z = random_polygon(&mut rng, n, 1.0);
            assert_eq!(frame_rank(&z).unwrap(), n);
            assert_eq!(form_rank(&z).unwrap(), n);
        }
    }
}
