//! The lift `p -> (p, w(p))` of a surface in C^2 into the quadric
//! `{z . w = 1}` in C^4, and the comparison of the tangential fields with
//! the holomorphic fields of the quadric.
//!
//! Complex tangent vectors of C^4 are written with eight components
//! `(V zeta_a, V conj(zeta_a))`, `zeta = (z1, z2, w1, w2)`; real vectors
//! have the second half conjugate to the first.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::{build_field, FieldJet, FieldKind};
use crate::hypersurface::{dual_map, gaussian_point, make_chart, Chart, Surface, SurfacePoint};
use crate::linalg::{self, CMat, RMat};

pub const ANGLE_TOL: f64 = 1e-6;
pub const PROJECTION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct IncidencePoint {
    pub coords: [C64; 4],
    pub residual: f64,
}

pub fn lift(s: &Surface, p: &SurfacePoint) -> Result<IncidencePoint> {
    if s.n() != 2 {
        return Err(Error::Dimension {
            requirement: "n = 2",
            n: s.n(),
        });
    }
    let w = dual_map(s, p)?;
    let coords = [p.z[0], p.z[1], w[0], w[1]];
    let residual = (coords[0] * coords[2] + coords[1] * coords[3] - 1.0).norm();
    Ok(IncidencePoint { coords, residual })
}

/// Holomorphic fields of the quadric; each is linear, `zeta -> M zeta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadricField {
    /// `z2 d/dw1 - z1 d/dw2`.
    X,
    /// `w2 d/dz1 - w1 d/dz2`.
    T,
    /// `-z d/dz + w d/dw`.
    Y,
}

impl QuadricField {
    pub fn matrix(self) -> CMat {
        let mut m = CMat::zeros(4, 4);
        let one = C64::new(1.0, 0.0);
        match self {
            QuadricField::X => {
                m[(2, 1)] = one;
                m[(3, 0)] = -one;
            }
            QuadricField::T => {
                m[(0, 3)] = one;
                m[(1, 2)] = -one;
            }
            QuadricField::Y => {
                for i in 0..4 {
                    m[(i, i)] = if i < 2 { -one } else { one };
                }
            }
        }
        m
    }

    pub fn at(self, zeta: &[C64; 4]) -> [C64; 4] {
        let v = self.matrix() * DVector::from_column_slice(zeta);
        [v[0], v[1], v[2], v[3]]
    }

    fn chart_kind(self) -> FieldKind {
        match self {
            QuadricField::X => FieldKind::X,
            QuadricField::T => FieldKind::T,
            QuadricField::Y => FieldKind::Upsilon,
        }
    }
}

/// Matrix of the bracket of two linear fields `A zeta`, `B zeta`.
pub fn linear_bracket(a: &CMat, b: &CMat) -> CMat {
    b * a - a * b
}

/// `J` on the eight-component representation.
pub fn apply_j(v: &[C64]) -> Vec<C64> {
    let i = C64::new(0.0, 1.0);
    v.iter()
        .enumerate()
        .map(|(k, x)| if k < 4 { x * i } else { -x * i })
        .collect()
}

fn holomorphic_vector(v: &[C64; 4]) -> Vec<C64> {
    let mut out = v.to_vec();
    out.extend(std::iter::repeat_n(C64::new(0.0, 0.0), 4));
    out
}

/// Real tangent vectors of the lifted surface at the base point, one per
/// chart variable.
pub fn lifted_tangent_basis(chart: &Chart) -> Vec<Vec<C64>> {
    let dz = chart.dz_at_base();
    let dw = chart.dw_at_base();
    (0..chart.num_vars())
        .map(|i| {
            let h = [dz[(0, i)], dz[(1, i)], dw[(0, i)], dw[(1, i)]];
            h.iter()
                .copied()
                .chain(h.iter().map(|c| c.conj()))
                .collect()
        })
        .collect()
}

fn as_real(v: &[C64]) -> DVector<f64> {
    DVector::from_iterator(
        8,
        v[..4]
            .iter()
            .map(|c| c.re)
            .chain(v[..4].iter().map(|c| c.im)),
    )
}

/// Smallest principal angle between the tangent space and its `J`-image.
pub fn total_reality_angle(basis: &[Vec<C64>]) -> f64 {
    let to_basis =
        |vs: Vec<DVector<f64>>| RMat::from_columns(&linalg::gram_schmidt(&vs, vs.len(), 1e-12));
    let t = to_basis(basis.iter().map(|b| as_real(b)).collect());
    let jt = to_basis(basis.iter().map(|b| as_real(&apply_j(b))).collect());
    let cos_max = linalg::principal_cosines(&t, &jt)
        .first()
        .copied()
        .unwrap_or(0.0)
        .min(1.0);
    cos_max.acos()
}

/// Tangential part of a complex vector along a totally real tangent space:
/// `V = sum a_i b_i + sum c_i J b_i`, and the result is `sum a_i b_i`.
pub fn tangential_part(basis: &[Vec<C64>], v: &[C64]) -> Result<Vec<C64>> {
    let angle = total_reality_angle(basis);
    if angle < ANGLE_TOL {
        return Err(Error::NotTotallyReal { angle });
    }
    let k = basis.len();
    let jb: Vec<Vec<C64>> = basis.iter().map(|b| apply_j(b)).collect();
    let a = DMatrix::from_fn(
        8,
        2 * k,
        |r, c| if c < k { basis[c][r] } else { jb[c - k][r] },
    );
    let rhs = DVector::from_column_slice(v);
    let (x, residual) = linalg::complex_lstsq(&a, &rhs);
    let norm = rhs.norm();
    if residual > PROJECTION_TOL * (1.0 + norm) {
        return Err(Error::ResidualTooLarge {
            row: "normal decomposition".into(),
            residual,
        });
    }
    Ok((0..8)
        .map(|r| (0..k).map(|i| x[i] * basis[i][r]).sum())
        .collect())
}

/// Eight-component pushforward of a chart field at the base point.
pub fn pushforward(chart: &Chart, field: &FieldJet) -> Vec<C64> {
    let coords: Vec<_> = chart
        .z_jets()
        .iter()
        .chain(chart.w_jets())
        .cloned()
        .collect();
    let mut out: Vec<C64> = coords.iter().map(|c| field.apply(c).value()).collect();
    out.extend(coords.iter().map(|c| field.apply(&c.conj()).value()));
    out
}

fn distance(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceResiduals {
    /// `|push(F) - 2 (F_hol)^tang|` for X, T, Y.
    pub tangential: [f64; 3],
    /// `|push(F)^(1,0) - F_hol|` for X, T, Y.
    pub type_10: [f64; 3],
    pub reality_angle: f64,
    pub lift_residual: f64,
}

impl IncidenceResiduals {
    pub fn max(&self) -> f64 {
        self.tangential
            .iter()
            .chain(&self.type_10)
            .copied()
            .fold(0.0, f64::max)
    }
}

pub fn check_incidence(s: &Surface, p: &SurfacePoint, order: usize) -> Result<IncidenceResiduals> {
    let lifted = lift(s, p)?;
    let chart = make_chart(s, p, order)?;
    let basis = lifted_tangent_basis(&chart);
    let mut out = IncidenceResiduals {
        tangential: [0.0; 3],
        type_10: [0.0; 3],
        reality_angle: total_reality_angle(&basis),
        lift_residual: lifted.residual,
    };
    for (slot, field) in [QuadricField::X, QuadricField::T, QuadricField::Y]
        .into_iter()
        .enumerate()
    {
        let hol = holomorphic_vector(&field.at(&lifted.coords));
        let tang = tangential_part(&basis, &hol)?;
        let chart_field = build_field(&chart, field.chart_kind())?;
        let push = pushforward(&chart, &chart_field);
        let doubled: Vec<C64> = tang.iter().map(|c| c * 2.0).collect();
        out.tangential[slot] = distance(&push, &doubled);
        // (1,0)-part: (V - iJV) / 2.
        let jv = apply_j(&push);
        let part: Vec<C64> = push
            .iter()
            .zip(&jv)
            .map(|(v, j)| (v - C64::new(0.0, 1.0) * j) * 0.5)
            .collect();
        out.type_10[slot] = distance(&part, &hol);
    }
    Ok(out)
}

/// Random points of the quadric.
pub fn random_quadric_points(count: usize, seed: u64) -> Vec<[C64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let z = gaussian_point(&mut rng, 2);
        let w = gaussian_point(&mut rng, 2);
        let d = z[0] * w[0] + z[1] * w[1];
        if d.norm() < 1e-3 {
            continue;
        }
        out.push([z[0], z[1], w[0] / d, w[1] / d]);
    }
    out
}

/// Largest error of `[X,T] = Y`, `[Y,X] = -2X`, `[Y,T] = 2T` and of the
/// tangency of X, T, Y to the quadric, evaluated at the given points.
pub fn quadric_identities(points: &[[C64; 4]]) -> (f64, f64) {
    let (x, t, y) = (
        QuadricField::X.matrix(),
        QuadricField::T.matrix(),
        QuadricField::Y.matrix(),
    );
    let two = C64::new(2.0, 0.0);
    let errors = [
        linear_bracket(&x, &t) - &y,
        linear_bracket(&y, &x) + &x * two,
        linear_bracket(&y, &t) - &t * two,
    ];
    let mut bracket_err: f64 = 0.0;
    let mut tangency_err: f64 = 0.0;
    for p in points {
        let v = DVector::from_column_slice(p);
        for e in &errors {
            bracket_err = bracket_err.max((e * &v).norm());
        }
        for f in [QuadricField::X, QuadricField::T, QuadricField::Y] {
            let fv = f.at(p);
            // d(z.w) = w dz + z dw.
            let d = p[2] * fv[0] + p[3] * fv[1] + p[0] * fv[2] + p[1] * fv[3];
            tangency_err = tangency_err.max(d.norm());
        }
    }
    (bracket_err, tangency_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypersurface::project_to_surface;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn lift_examples() {
        let s = Surface::sphere(2).unwrap();
        let p = SurfacePoint::new(&s, vec![c(0.6, 0.0), c(0.8, 0.0)]).unwrap();
        let l = lift(&s, &p).unwrap();
        assert!(
            distance(
                &l.coords,
                &[c(0.6, 0.0), c(0.8, 0.0), c(0.6, 0.0), c(0.8, 0.0)]
            ) < 1e-15
        );
        assert!(l.residual < 1e-15);
        let e = Surface::ellipsoid(&[2.0, 1.0]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let q = SurfacePoint::new(&e, vec![c(r, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((lift(&e, &q).unwrap().coords[2] - c(2f64.sqrt(), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn tangential_projection_basics() {
        let s = Surface::sphere(2).unwrap();
        let p = project_to_surface(&s, &[c(0.3, 0.1), c(0.5, -0.7)]).unwrap();
        let chart = make_chart(&s, &p, 3).unwrap();
        let basis = lifted_tangent_basis(&chart);
        let v: Vec<C64> = basis[0]
            .iter()
            .zip(&basis[2])
            .map(|(a, b)| a * c(0.5, 1.0) + b)
            .collect();
        assert!(distance(&tangential_part(&basis, &v).unwrap(), &v) < 1e-12);
        let jv = apply_j(&basis[1]);
        assert!(tangential_part(&basis, &jv)
            .unwrap()
            .iter()
            .all(|x| x.norm() < 1e-12));
    }

    #[test]
    fn incidence_on_sphere() {
        let s = Surface::sphere(2).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let p = SurfacePoint::new(&s, vec![c(r, 0.0), c(r, 0.0)]).unwrap();
        let res = check_incidence(&s, &p, 3).unwrap();
        assert!(res.max() < 1e-8, "{res:?}");
        assert!(res.reality_angle > ANGLE_TOL);
    }

    #[test]
    fn quadric_brackets() {
        let (b, t) = quadric_identities(&random_quadric_points(10, 4));
        assert!(b < 1e-12);
        assert!(t < 1e-12);
    }
}
