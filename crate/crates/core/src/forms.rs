//! Covector jets, 2-forms at the base point, the contact coframe and the
//! splitting of `du` on `H_p` into its `J`-linear and `J*`-linear parts.

use nalgebra::DVector;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fields::FieldFamily;
use crate::fields::FieldJet;
use crate::hypersurface::{Chart, HFrame, MAX_CONDITION};
use crate::jets::Jet;
use crate::linalg::{self, CMat, RMat};

/// A 1-form `sum_i c_i dt_i` with jet coefficients.
#[derive(Debug, Clone)]
pub struct CovectorJet {
    pub comps: Vec<Jet>,
}

impl CovectorJet {
    pub fn zero(m: usize, order: usize) -> CovectorJet {
        CovectorJet {
            comps: vec![Jet::zero(m, order); m],
        }
    }

    /// `df` for a function jet (order drops by one).
    pub fn differential(f: &Jet) -> CovectorJet {
        CovectorJet {
            comps: f.gradient(),
        }
    }

    pub fn at_base(&self) -> Vec<C64> {
        self.comps.iter().map(Jet::value).collect()
    }

    pub fn scaled_by(&self, f: &Jet) -> CovectorJet {
        CovectorJet {
            comps: self.comps.iter().map(|c| c * f).collect(),
        }
    }

    pub fn plus(&self, other: &CovectorJet) -> CovectorJet {
        CovectorJet {
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn minus(&self, other: &CovectorJet) -> CovectorJet {
        CovectorJet {
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Pairing with a field, as a jet.
    pub fn on(&self, field: &FieldJet) -> Jet {
        let m = self.comps.len();
        let order = self.comps[0].order().min(field.order());
        let mut out = Jet::zero(m, order);
        for (c, v) in self.comps.iter().zip(&field.coeffs) {
            out += &(c * v);
        }
        out
    }

    /// Pairing with a field at the base point.
    pub fn on_base(&self, field: &FieldJet) -> C64 {
        self.comps
            .iter()
            .zip(&field.coeffs)
            .map(|(c, v)| c.value() * v.value())
            .sum()
    }

    /// Exterior derivative at the base: `A_ij = d_i c_j - d_j c_i`.
    pub fn d_at_base(&self) -> TwoForm {
        let m = self.comps.len();
        TwoForm {
            a: CMat::from_fn(m, m, |i, j| {
                self.comps[j].linear_coeff(i) - self.comps[i].linear_coeff(j)
            }),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(Jet::max_abs).fold(0.0, f64::max)
    }
}

/// A 2-form at the base point as an antisymmetric matrix:
/// `omega(V, W) = V^T A W`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoForm {
    pub a: CMat,
}

impl TwoForm {
    pub fn wedge(a: &[C64], b: &[C64]) -> TwoForm {
        let m = a.len();
        TwoForm {
            a: CMat::from_fn(m, m, |i, j| a[i] * b[j] - b[i] * a[j]),
        }
    }

    pub fn eval(&self, v: &[C64], w: &[C64]) -> C64 {
        let v = DVector::from_column_slice(v);
        let w = DVector::from_column_slice(w);
        (v.transpose() * &self.a * w)[(0, 0)]
    }

    pub fn on(&self, f: &FieldJet, g: &FieldJet) -> C64 {
        self.eval(&f.at_base(), &g.at_base())
    }

    /// Matrix of the form on the real basis of `H_p`.
    pub fn restrict(&self, basis: &RMat) -> CMat {
        let b = basis.map(|x| C64::new(x, 0.0));
        b.transpose() * &self.a * b
    }

    pub fn scale(&self, c: C64) -> TwoForm {
        TwoForm { a: &self.a * c }
    }

    pub fn plus(&self, other: &TwoForm) -> TwoForm {
        TwoForm {
            a: &self.a + &other.a,
        }
    }

    pub fn minus(&self, other: &TwoForm) -> TwoForm {
        TwoForm {
            a: &self.a - &other.a,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// `sum_j a_j d(b_j)` as a covector jet.
fn pairing_form(coeffs: &[Jet], functions: &[Jet]) -> CovectorJet {
    let m = functions[0].num_vars();
    let order = functions[0].order() - 1;
    let mut out = CovectorJet::zero(m, order);
    for (c, f) in coeffs.iter().zip(functions) {
        out = out.plus(&CovectorJet::differential(f).scaled_by(c));
    }
    out
}

/// The contact coframe and the two complex structures on `H_p`.
#[derive(Debug, Clone)]
pub struct FormFrame {
    n: usize,
    pub theta: CovectorJet,
    /// `sum z_j dw_j`, equal to `theta` on S.
    pub theta_alt: CovectorJet,
    pub dtheta: TwoForm,
    pub h: HFrame,
    z: Vec<Jet>,
    w: Vec<Jet>,
}

impl FormFrame {
    pub fn new(chart: &Chart) -> Result<FormFrame> {
        let z = chart.z_jets().to_vec();
        let w = chart.w_jets().to_vec();
        let neg_w: Vec<Jet> = w.iter().map(|x| -x).collect();
        let theta = pairing_form(&neg_w, &z);
        let theta_alt = pairing_form(&z, &w);
        let dz: Vec<Vec<C64>> = z
            .iter()
            .map(|x| CovectorJet::differential(x).at_base())
            .collect();
        let dw: Vec<Vec<C64>> = w
            .iter()
            .map(|x| CovectorJet::differential(x).at_base())
            .collect();
        let m = chart.num_vars();
        let mut dtheta = TwoForm {
            a: CMat::zeros(m, m),
        };
        for (a, b) in dz.iter().zip(&dw) {
            dtheta = dtheta.plus(&TwoForm::wedge(a, b));
        }
        let h = HFrame::new(chart);
        if !(h.dual_condition <= MAX_CONDITION) {
            return Err(Error::DegenerateDual {
                condition: h.dual_condition,
            });
        }
        Ok(FormFrame {
            n: chart.n(),
            theta,
            theta_alt,
            dtheta,
            h,
            z,
            w,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `z_k dz_j - z_j dz_k`.
    pub fn eta_prime(&self, j: usize, k: usize) -> CovectorJet {
        let z = &self.z;
        pairing_form(&[z[k].clone(), -&z[j]], &[z[j].clone(), z[k].clone()])
    }

    /// `w_k dw_j - w_j dw_k`.
    pub fn eta_dprime(&self, j: usize, k: usize) -> CovectorJet {
        let w = &self.w;
        pairing_form(&[w[k].clone(), -&w[j]], &[w[j].clone(), w[k].clone()])
    }

    /// Smallest singular value of `J* - J` on `H_p`.
    pub fn j_difference_margin(&self) -> f64 {
        linalg::singular_values_r(&(&self.h.jstar - &self.h.j))
            .last()
            .copied()
            .unwrap_or(0.0)
    }

    /// `max(|J^2 + I|, |J*^2 + I|)`.
    pub fn square_defect(&self) -> f64 {
        let id = RMat::identity(self.h.dim(), self.h.dim());
        let a = (&self.h.j * &self.h.j + &id).amax();
        let b = (&self.h.jstar * &self.h.jstar + &id).amax();
        a.max(b)
    }

    /// Restriction of a covector at the base point to `H_p`.
    pub fn restrict(&self, covector: &[C64]) -> Vec<C64> {
        let h = &self.h.basis;
        (0..h.ncols())
            .map(|c| (0..h.nrows()).map(|r| covector[r] * h[(r, c)]).sum())
            .collect()
    }

    /// Real linear map `(w1, w2) -> (w1 + w2) + i(-w1 J - w2 J*)` on pairs
    /// of real covectors on `H_p`, as a `2h x 2h` matrix.
    pub fn split_operator(&self) -> RMat {
        let h = self.h.dim();
        let mut m = RMat::zeros(2 * h, 2 * h);
        m.view_mut((0, 0), (h, h)).copy_from(&RMat::identity(h, h));
        m.view_mut((0, h), (h, h)).copy_from(&RMat::identity(h, h));
        m.view_mut((h, 0), (h, h))
            .copy_from(&(-self.h.j.transpose()));
        m.view_mut((h, h), (h, h))
            .copy_from(&(-self.h.jstar.transpose()));
        m
    }

    /// `(J-linear part, J*-linear part)` of a complex covector on `H_p`.
    pub fn split_covector(&self, omega: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let h = self.h.dim();
        let rhs = DVector::from_iterator(
            2 * h,
            omega.iter().map(|c| c.re).chain(omega.iter().map(|c| c.im)),
        );
        let (x, _) = linalg::real_lstsq(&self.split_operator(), &rhs);
        let w1 = x.rows(0, h).into_owned();
        let w2 = x.rows(h, h).into_owned();
        let complexify = |w: &DVector<f64>, j: &RMat| -> Vec<C64> {
            let wj = j.transpose() * w;
            (0..h).map(|i| C64::new(w[i], -wj[i])).collect()
        };
        (complexify(&w1, &self.h.j), complexify(&w2, &self.h.jstar))
    }
}

/// Pieces of `du` on `H_p`.
#[derive(Debug, Clone)]
pub struct HFormSplit {
    /// `J`-linear part of `du|_H`, in the `H` basis.
    pub dprime_u: Vec<C64>,
    /// `J*`-linear part of `du|_H`.
    pub ddprime_u: Vec<C64>,
    /// `Y u` at the base point.
    pub d0_u: C64,
    /// Largest difference between the linear-system split and the
    /// field-expansion formulas.
    pub cross_check: f64,
    /// `du - (d'u + d''u + (Yu) theta)` as jets.
    pub reconstruction: f64,
    /// Smallest singular value of the split operator.
    pub uniqueness_margin: f64,
    pub split_condition: f64,
}

/// Field expansions of the two parts of `du`:
/// `d'u = sum_{j<k} (T_jk u) eta'_jk`, `d''u = sum_{j<k} (X_jk u) eta''_jk`.
pub fn expansion_forms(
    frame: &FormFrame,
    family: &FieldFamily,
    u: &Jet,
) -> (CovectorJet, CovectorJet) {
    let n = frame.n();
    let m = u.num_vars();
    let order = u.order() - 1;
    let mut dprime = CovectorJet::zero(m, order);
    let mut ddprime = CovectorJet::zero(m, order);
    for j in 0..n {
        for k in j + 1..n {
            dprime = dprime.plus(&frame.eta_prime(j, k).scaled_by(&family.t(j, k).apply(u)));
            ddprime = ddprime.plus(&frame.eta_dprime(j, k).scaled_by(&family.x(j, k).apply(u)));
        }
    }
    (dprime, ddprime)
}

pub fn split_d(frame: &FormFrame, family: &FieldFamily, u: &Jet) -> Result<HFormSplit> {
    if u.order() < 1 {
        return Err(Error::OrderTooLow {
            order: u.order(),
            needed: 1,
        });
    }
    let du = CovectorJet::differential(u);
    let omega = frame.restrict(&du.at_base());
    let (dprime_u, ddprime_u) = frame.split_covector(&omega);

    let (dprime, ddprime) = expansion_forms(frame, family, u);
    let yu = family.upsilon().apply(u);
    let a = frame.restrict(&dprime.at_base());
    let b = frame.restrict(&ddprime.at_base());
    let cross_check = dprime_u
        .iter()
        .zip(&a)
        .chain(ddprime_u.iter().zip(&b))
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    let rebuilt = dprime.plus(&ddprime).plus(&frame.theta.scaled_by(&yu));
    let reconstruction = du.minus(&rebuilt).max_abs();
    let op = frame.split_operator();
    let sv = linalg::singular_values_r(&op);
    Ok(HFormSplit {
        dprime_u,
        ddprime_u,
        d0_u: yu.value(),
        cross_check,
        reconstruction,
        uniqueness_margin: sv.last().copied().unwrap_or(0.0),
        split_condition: linalg::condition_number_r(&op),
    })
}

/// `d(d'u)` restricted to `H_p`, two ways.
#[derive(Debug, Clone)]
pub struct NuMatrix {
    /// Exterior derivative of the field expansion of `d'u`, on the `H` basis.
    pub direct: CMat,
    /// `sum_{j<k, l<m} (X_lm T_jk u)(p) eta''_lm ^ eta'_jk`, on the `H` basis.
    pub formula: CMat,
    /// The full 2-form `d(d'u)` at the base (not restricted).
    pub full: TwoForm,
}

impl NuMatrix {
    pub fn on(&self, f: &FieldJet, g: &FieldJet) -> C64 {
        self.full.on(f, g)
    }
}

pub fn nu_matrix(frame: &FormFrame, family: &FieldFamily, u: &Jet) -> Result<NuMatrix> {
    if u.order() < 3 {
        return Err(Error::OrderTooLow {
            order: u.order(),
            needed: 3,
        });
    }
    let n = frame.n();
    let (dprime, _) = expansion_forms(frame, family, u);
    let full = dprime.d_at_base();
    let m = u.num_vars();
    let mut formula = TwoForm {
        a: CMat::zeros(m, m),
    };
    for j in 0..n {
        for k in j + 1..n {
            let tu = family.t(j, k).apply(u);
            let ep = frame.eta_prime(j, k).at_base();
            for l in 0..n {
                for mm in l + 1..n {
                    let xtu = family.x(l, mm).apply(&tu).value();
                    let edp = frame.eta_dprime(l, mm).at_base();
                    formula = formula.plus(&TwoForm::wedge(&edp, &ep).scale(xtu));
                }
            }
        }
    }
    let basis = &frame.h.basis;
    Ok(NuMatrix {
        direct: full.restrict(basis),
        formula: formula.restrict(basis),
        full,
    })
}

/// The scalar with `d(d'u)|_H = -lambda dtheta|_H` and how well it fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaFit {
    pub lambda: C64,
    /// `max |nu + lambda dtheta|` on `H_p` (for `n > 2`), or the larger
    /// closedness coefficient (for `n = 2`).
    pub deviation: f64,
    /// For `n = 2`: `d beta (T, Y)` with `beta = (Tu) eta' + (XTu) theta`.
    pub ttx_coefficient: Option<C64>,
    /// For `n = 2`: `d beta (X, Y)`.
    pub xxt_coefficient: Option<C64>,
}

pub fn lambda_of(frame: &FormFrame, family: &FieldFamily, u: &Jet) -> Result<LambdaFit> {
    if u.order() < 3 {
        return Err(Error::OrderTooLow {
            order: u.order(),
            needed: 3,
        });
    }
    if frame.n() == 2 {
        let x = family.x(0, 1);
        let t = family.t(0, 1);
        let tu = t.apply(u);
        let xtu = x.apply(&tu);
        let beta = frame
            .eta_prime(0, 1)
            .scaled_by(&tu)
            .plus(&frame.theta.scaled_by(&xtu));
        let dbeta = beta.d_at_base();
        let y = family.upsilon();
        let ttx = dbeta.on(&t, y);
        let xxt = dbeta.on(&x, y);
        return Ok(LambdaFit {
            lambda: xtu.value(),
            deviation: ttx.norm().max(xxt.norm()),
            ttx_coefficient: Some(ttx),
            xxt_coefficient: Some(xxt),
        });
    }
    let nu = nu_matrix(frame, family, u)?;
    // Fit in a basis of H orthonormal for the ambient metric, so that the
    // least-squares solution does not depend on the chart coordinates.
    let gram = (frame.h.dz.adjoint() * &frame.h.dz).map(|c| c.re);
    let eig = gram.symmetric_eigen();
    let inv_sqrt = &eig.eigenvectors
        * RMat::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    let c = inv_sqrt.map(|x| C64::new(x, 0.0));
    let dtheta = c.transpose() * frame.dtheta.restrict(&frame.h.basis) * &c;
    let nu_direct = c.transpose() * &nu.direct * &c;
    let num: C64 = dtheta
        .iter()
        .zip(nu_direct.iter())
        .map(|(d, v)| d.conj() * v)
        .sum();
    let den: f64 = dtheta.iter().map(|d| d.norm_sqr()).sum();
    let lambda = -num / den;
    let deviation = (&nu_direct + &dtheta * lambda)
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    Ok(LambdaFit {
        lambda,
        deviation,
        ttx_coefficient: None,
        xxt_coefficient: None,
    })
}

/// Errors of `d eta' = 2 eta'^theta`, `d eta'' = -2 eta''^theta` and
/// `dtheta = eta'^eta''` at the base (`n = 2`).
pub fn structure_equation_errors(frame: &FormFrame) -> [f64; 3] {
    let ep = frame.eta_prime(0, 1);
    let edp = frame.eta_dprime(0, 1);
    let th = frame.theta.at_base();
    let e1 = ep
        .d_at_base()
        .minus(&TwoForm::wedge(&ep.at_base(), &th).scale(C64::new(2.0, 0.0)));
    let e2 = edp
        .d_at_base()
        .plus(&TwoForm::wedge(&edp.at_base(), &th).scale(C64::new(2.0, 0.0)));
    let e3 = frame
        .dtheta
        .minus(&TwoForm::wedge(&ep.at_base(), &edp.at_base()));
    [e1.max_abs(), e2.max_abs(), e3.max_abs()]
}

/// Largest deviation from the pairing table of `(theta, eta', eta'')`
/// against `(X, T, Y)` (`n = 2`).
pub fn pairing_table_error(frame: &FormFrame, family: &FieldFamily) -> f64 {
    let x = family.x(0, 1);
    let t = family.t(0, 1);
    let y = family.upsilon().clone();
    let forms = [
        frame.theta.clone(),
        frame.eta_prime(0, 1),
        frame.eta_dprime(0, 1),
    ];
    let fields = [&x, &t, &y];
    // Rows: theta, eta', eta''; columns: X, T, Y.
    let expected = [[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]];
    let mut worst: f64 = 0.0;
    for (r, form) in forms.iter().enumerate() {
        for (c, field) in fields.iter().enumerate() {
            let v = form.on_base(field);
            worst = worst.max((v - C64::new(expected[r][c], 0.0)).norm());
        }
    }
    worst
}

/// Errors of `sum z_j w_j = 1`, `sum (w_j dz_j + z_j dw_j) = 0` as jets,
/// and of `sum w_j dz_j = 0`, `sum z_j dw_j = 0` paired with every `X_jk`
/// and `T_jk` (which span `H`) as jets.
pub fn legendre_errors(frame: &FormFrame, family: &FieldFamily) -> [f64; 4] {
    let n = frame.n();
    let m = frame.z[0].num_vars();
    let order = frame.z[0].order();
    let mut product = Jet::constant(m, order, C64::new(-1.0, 0.0));
    for (z, w) in frame.z.iter().zip(&frame.w) {
        product += &(z * w);
    }
    let a = product.truncate(order - 1).max_abs();
    let b = frame.theta_alt.minus(&frame.theta).max_abs();
    let (mut c, mut d): (f64, f64) = (0.0, 0.0);
    for j in 0..n {
        for k in j + 1..n {
            for field in [family.x(j, k), family.t(j, k)] {
                c = c.max(frame.theta.on(&field).max_abs());
                d = d.max(frame.theta_alt.on(&field).max_abs());
            }
        }
    }
    [a, b, c, d]
}

/// `dtheta(T~_jkl, X_jk)` and `dtheta(T_jk, X~_jkl)` over all triples.
pub fn orthogonality_error(frame: &FormFrame, family: &FieldFamily) -> f64 {
    let n = frame.n();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for k in 0..n {
            for l in (0..n).filter(|&l| j != k && l != j && l != k) {
                let a = frame.dtheta.on(&family.ttilde(j, k, l), &family.x(j, k));
                let b = frame.dtheta.on(&family.t(j, k), &family.xtilde(j, k, l));
                worst = worst.max(a.norm()).max(b.norm());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr;
    use crate::hypersurface::{make_chart, project_to_surface, Surface, SurfacePoint};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn setup(s: &Surface, z: &[C64]) -> (Chart, FormFrame, FieldFamily) {
        let p = project_to_surface(s, z).unwrap();
        let chart = make_chart(s, &p, 5).unwrap();
        let frame = FormFrame::new(&chart).unwrap();
        let family = FieldFamily::new(&chart).unwrap();
        (chart, frame, family)
    }

    fn u_jet(chart: &Chart, text: &str) -> Jet {
        chart.eval(&expr::parse(text).unwrap()).unwrap()
    }

    #[test]
    fn sphere_structures() {
        let s = Surface::sphere(2).unwrap();
        let (_, frame, _) = setup(&s, &[c(0.3, 0.2), c(-0.4, 0.7)]);
        assert!((&frame.h.jstar + &frame.h.j).amax() < 1e-9);
        let sv = linalg::singular_values_r(&(&frame.h.jstar - &frame.h.j));
        assert!(sv.iter().all(|s| (s - 2.0).abs() < 1e-9));
        assert!(frame.square_defect() < 1e-10);
        assert!(frame.theta.minus(&frame.theta_alt).max_abs() < 1e-10);
    }

    #[test]
    fn structure_equations_and_pairings() {
        let e = Surface::ellipsoid(&[2.0, 1.0]).unwrap();
        let (_, frame, family) = setup(&e, &[c(0.2, 0.5), c(0.6, -0.1)]);
        for err in structure_equation_errors(&frame) {
            assert!(err < 1e-9, "{err}");
        }
        assert!(pairing_table_error(&frame, &family) < 1e-9);
    }

    #[test]
    fn split_of_cr_and_dual_cr() {
        let e = Surface::ellipsoid(&[3.0, 1.0, 0.5]).unwrap();
        let (chart, frame, family) = setup(&e, &[c(0.2, 0.5), c(0.6, -0.1), c(0.3, 0.3)]);
        let w = split_d(&frame, &family, &u_jet(&chart, "w1")).unwrap();
        assert!(w.dprime_u.iter().all(|v| v.norm() < 1e-9));
        let z = split_d(&frame, &family, &u_jet(&chart, "z1")).unwrap();
        assert!(z.ddprime_u.iter().all(|v| v.norm() < 1e-9));
        let g = split_d(&frame, &family, &u_jet(&chart, "z1*conj(z2) + w3^2")).unwrap();
        assert!(g.cross_check < 1e-8, "{}", g.cross_check);
        assert!(g.reconstruction < 1e-9, "{}", g.reconstruction);
        assert!(g.uniqueness_margin > 1e-8);
    }

    #[test]
    fn upsilon_of_legendre_product_vanishes() {
        let s = Surface::sphere(2).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let p = SurfacePoint::new(&s, vec![c(r, 0.0), c(r, 0.0)]).unwrap();
        let chart = make_chart(&s, &p, 5).unwrap();
        let frame = FormFrame::new(&chart).unwrap();
        let family = FieldFamily::new(&chart).unwrap();
        let split = split_d(&frame, &family, &u_jet(&chart, "z1*w1")).unwrap();
        assert!(split.d0_u.norm() < 1e-9);
    }

    #[test]
    fn lambda_examples_in_two_dimensions() {
        let s = Surface::sphere(2).unwrap();
        let (chart, frame, family) = setup(&s, &[c(0.3, 0.2), c(-0.4, 0.7)]);
        let z = chart.base().z.clone();
        let w = chart.w_at_base();
        let fit = lambda_of(&frame, &family, &u_jet(&chart, "z1^2")).unwrap();
        assert!((fit.lambda + z[0] * z[0] * 2.0).norm() < 1e-9);
        let fit = lambda_of(&frame, &family, &u_jet(&chart, "z1*w1")).unwrap();
        assert!((fit.lambda - (z[1] * w[1] - z[0] * w[0])).norm() < 1e-9);
        let fit = lambda_of(&frame, &family, &u_jet(&chart, "2")).unwrap();
        assert_eq!(fit.lambda.norm(), 0.0);
        assert_eq!(fit.deviation, 0.0);
    }

    #[test]
    fn nu_for_decomposable_and_witness() {
        let s = Surface::sphere(3).unwrap();
        let (chart, frame, family) = setup(&s, &[c(0.3, 0.2), c(-0.4, 0.7), c(0.5, 0.1)]);
        let fit = lambda_of(&frame, &family, &u_jet(&chart, "z2 + w3")).unwrap();
        assert!(fit.deviation < 1e-8, "{}", fit.deviation);

        let u = u_jet(&chart, "z1*w1");
        let nu = nu_matrix(&frame, &family, &u).unwrap();
        assert!((&nu.direct - &nu.formula).camax() < 1e-8);
        let z = chart.base().z.clone();
        let w = chart.w_at_base();
        let value = nu.on(&family.ttilde(0, 1, 2), &family.x(0, 1));
        assert!((value - z[0] * z[1] * w[2]).norm() < 1e-8, "{value}");

        let zero = nu_matrix(&frame, &family, &u_jet(&chart, "1")).unwrap();
        assert_eq!(zero.direct.camax(), 0.0);
    }
}
