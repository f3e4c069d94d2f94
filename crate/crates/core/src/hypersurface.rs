//! Hypersurfaces `S = {rho = 0}`, jet charts at base points, the dual map
//! `w_j = (d rho/d z_j) / sum_k z_k d rho/d z_k`, and structural checks.

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::jets::{implicit_solve, Jet};
use crate::linalg::{self, CMat, RMat};

/// Threshold below which structural margins are flagged.
pub const MARGIN_TOL: f64 = 1e-8;
/// Threshold for the smallest Levi eigenvalue.
pub const EIGEN_TOL: f64 = 1e-10;
/// Pair-sum margin required before tilde-field computations.
pub const STAR_REPAIR_TOL: f64 = 1e-6;
/// Upper bound on constant-term condition numbers.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceKind {
    Sphere,
    Ellipsoid(Vec<f64>),
    Poly,
}

#[derive(Debug, Clone)]
pub struct Surface {
    n: usize,
    kind: SurfaceKind,
    label: String,
    rho: Expr,
    drho: Vec<Expr>,
    levi: Vec<Vec<Expr>>,
}

fn modulus_sum(weights: &[f64]) -> Expr {
    let mut terms = weights.iter().enumerate().map(|(k, &a)| {
        let sq = Expr::Mul(Box::new(Expr::Z(k)), Box::new(Expr::Z(k).conj()));
        if a == 1.0 {
            sq
        } else {
            Expr::Mul(Box::new(Expr::num(a)), Box::new(sq))
        }
    });
    let first = terms.next().expect("n >= 1");
    let sum = terms.fold(first, |acc, t| Expr::Add(Box::new(acc), Box::new(t)));
    Expr::Sub(Box::new(sum), Box::new(Expr::num(1.0)))
}

impl Surface {
    fn assemble(n: usize, kind: SurfaceKind, label: String, rho: Expr) -> Surface {
        let drho: Vec<Expr> = (0..n).map(|j| rho.wirtinger(j, false)).collect();
        let levi = drho
            .iter()
            .map(|d| (0..n).map(|k| d.wirtinger(k, true)).collect())
            .collect();
        Surface {
            n,
            kind,
            label,
            rho,
            drho,
            levi,
        }
    }

    /// Unit sphere `|z|^2 = 1` in C^n.
    pub fn sphere(n: usize) -> Result<Surface> {
        if n < 2 {
            return Err(Error::Dimension {
                requirement: "n >= 2",
                n,
            });
        }
        Ok(Surface::assemble(
            n,
            SurfaceKind::Sphere,
            format!("sphere:n={n}"),
            modulus_sum(&vec![1.0; n]),
        ))
    }

    /// Ellipsoid `sum a_k |z_k|^2 = 1` with positive weights.
    pub fn ellipsoid(weights: &[f64]) -> Result<Surface> {
        let label = format!(
            "ellipsoid:{}",
            weights
                .iter()
                .map(|a| format!("{a}"))
                .collect::<Vec<_>>()
                .join(",")
        );
        if weights.len() < 2 {
            return Err(Error::InvalidSurfaceSpec {
                spec: label,
                reason: "need at least two weights".into(),
            });
        }
        if weights.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidSurfaceSpec {
                spec: label,
                reason: "weights must be positive".into(),
            });
        }
        Ok(Surface::assemble(
            weights.len(),
            SurfaceKind::Ellipsoid(weights.to_vec()),
            label,
            modulus_sum(weights),
        ))
    }

    /// Surface from a defining-function expression in `z`, `conj(z)`.
    pub fn from_expr(rho: Expr, n: usize) -> Result<Surface> {
        let label = format!("poly:{rho}");
        Surface::from_expr_labeled(rho, n, label)
    }

    fn from_expr_labeled(rho: Expr, n: usize, label: String) -> Result<Surface> {
        if n < 2 {
            return Err(Error::Dimension {
                requirement: "n >= 2",
                n,
            });
        }
        rho.check_dim(n)?;
        if rho.uses_w() {
            return Err(Error::InvalidSurfaceSpec {
                spec: label,
                reason: "defining function may not use w-symbols".into(),
            });
        }
        check_real_valued(&rho, n)?;
        Ok(Surface::assemble(n, SurfaceKind::Poly, label, rho))
    }

    /// Parses `sphere:n=<N>`, `ellipsoid:<a1>,...,<aN>` or `poly:<rho>`.
    /// For `poly`, the dimension is `dim_hint` or the largest index used.
    pub fn parse_spec(spec: &str, dim_hint: Option<usize>) -> Result<Surface> {
        let invalid = |reason: &str| Error::InvalidSurfaceSpec {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        let (head, body) = spec.split_once(':').ok_or_else(|| invalid("missing ':'"))?;
        match head.trim() {
            "sphere" => {
                let n = body
                    .trim()
                    .strip_prefix("n=")
                    .and_then(|v| v.trim().parse::<usize>().ok())
                    .ok_or_else(|| invalid("expected n=<N>"))?;
                Surface::sphere(n)
            }
            "ellipsoid" => {
                let weights = body
                    .split(',')
                    .map(|a| a.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| invalid("weights must be numbers"))?;
                Surface::ellipsoid(&weights)
            }
            "poly" => {
                let rho = expr::parse(body)?;
                let n = dim_hint.unwrap_or_else(|| rho.max_index().max(2));
                Surface::from_expr_labeled(rho, n, spec.to_string())
            }
            _ => Err(invalid("unknown surface kind")),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &SurfaceKind {
        &self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn rho(&self) -> &Expr {
        &self.rho
    }

    pub fn rho_at(&self, z: &[C64]) -> f64 {
        self.rho
            .eval_point(z, None)
            .map(|v| v.re)
            .unwrap_or(f64::NAN)
    }

    /// `d rho / d z_j` at a point.
    pub fn drho_at(&self, z: &[C64]) -> Vec<C64> {
        self.drho
            .iter()
            .map(|d| d.eval_point(z, None).unwrap_or(C64::new(f64::NAN, 0.0)))
            .collect()
    }

    /// Complex Hessian `d^2 rho / d z_j d conj(z_k)` at a point.
    pub fn levi_at(&self, z: &[C64]) -> CMat {
        CMat::from_fn(self.n, self.n, |j, k| {
            self.levi[j][k]
                .eval_point(z, None)
                .unwrap_or(C64::new(f64::NAN, 0.0))
        })
    }

    /// The surface `M(S)`, whose defining function is `rho(M^{-1} z)`.
    pub fn transformed(&self, m: &CMat) -> Result<Surface> {
        let inv = m
            .clone()
            .try_inverse()
            .ok_or(Error::RepairFailed { attempts: 0 })?;
        let z_map = linear_substitution(&inv, Expr::Z);
        let rho = self.rho.substitute(&z_map, &[]);
        Ok(Surface::assemble(
            self.n,
            SurfaceKind::Poly,
            format!("{} (linear change)", self.label),
            rho,
        ))
    }

    /// Multiplies the defining function by a positive factor expression.
    pub fn rescaled(&self, factor: Expr) -> Surface {
        let rho = Expr::Mul(Box::new(factor), Box::new(self.rho.clone()));
        Surface::assemble(
            self.n,
            SurfaceKind::Poly,
            format!("{} (rescaled)", self.label),
            rho,
        )
    }
}

fn linear_substitution(m: &CMat, symbol: impl Fn(usize) -> Expr) -> Vec<Expr> {
    (0..m.nrows())
        .map(|k| {
            let mut terms = (0..m.ncols())
                .map(|l| Expr::Mul(Box::new(Expr::complex(m[(k, l)])), Box::new(symbol(l))));
            let first = terms.next().expect("nonempty");
            terms.fold(first, |acc, t| Expr::Add(Box::new(acc), Box::new(t)))
        })
        .collect()
}

/// Rewrites `u(z, w)` for the coordinates `z' = M z`, `w' = M^{-T} w`.
pub fn transform_function(u: &Expr, m: &CMat) -> Result<Expr> {
    let inv = m
        .clone()
        .try_inverse()
        .ok_or(Error::RepairFailed { attempts: 0 })?;
    let z_map = linear_substitution(&inv, Expr::Z);
    let w_map = linear_substitution(&m.transpose(), Expr::W);
    Ok(u.substitute(&z_map, &w_map))
}

fn check_real_valued(rho: &Expr, n: usize) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..20 {
        let z = gaussian_point(&mut rng, n);
        let v = rho.eval_point(&z, None)?;
        if v.im.abs() > 1e-10 * (1.0 + v.norm()) {
            return Err(Error::NotRealValued { imag: v.im });
        }
    }
    Ok(())
}

/// Standard complex Gaussian vector.
pub fn gaussian_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re * s, im * s)
        })
        .collect()
}

fn norm_sq(z: &[C64]) -> f64 {
    z.iter().map(|c| c.norm_sqr()).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfacePoint {
    #[serde(serialize_with = "crate::report::serialize_complex_vec")]
    pub z: Vec<C64>,
    pub residual: f64,
}

impl SurfacePoint {
    /// Validates that `z` lies on the surface.
    pub fn new(surface: &Surface, z: Vec<C64>) -> Result<SurfacePoint> {
        assert_eq!(z.len(), surface.n(), "point dimension mismatch");
        let residual = surface.rho_at(&z).abs();
        if !(residual < 1e-10 * (1.0 + norm_sq(&z))) {
            return Err(Error::NotOnSurface { residual });
        }
        Ok(SurfacePoint { z, residual })
    }

    pub fn z(&self) -> &[C64] {
        &self.z
    }
}

/// Newton iteration along the gradient of `rho` from an ambient seed.
pub fn project_to_surface(surface: &Surface, seed: &[C64]) -> Result<SurfacePoint> {
    const MAX_ITER: usize = 50;
    let mut z = seed.to_vec();
    for _ in 0..MAX_ITER {
        let r = surface.rho_at(&z);
        if !r.is_finite() {
            break;
        }
        let tol = 1e-12 * (1.0 + norm_sq(&z));
        if r.abs() < 0.1 * tol {
            return Ok(SurfacePoint {
                residual: r.abs(),
                z,
            });
        }
        // Real gradient of rho, written as a complex vector: 2 conj(d rho/dz).
        let grad: Vec<C64> = surface.drho_at(&z).iter().map(|a| a.conj() * 2.0).collect();
        let g2 = norm_sq(&grad);
        if !(g2 > 1e-24) {
            break;
        }
        for (zk, gk) in z.iter_mut().zip(&grad) {
            *zk -= gk * (r / g2);
        }
    }
    let r = surface.rho_at(&z).abs();
    if r < 1e-12 * (1.0 + norm_sq(&z)) {
        return Ok(SurfacePoint { residual: r, z });
    }
    Err(Error::ProjectionDiverged {
        iterations: MAX_ITER,
    })
}

/// `w_j = (d rho/d z_j) / sum_k z_k d rho/d z_k` at a point.
pub fn dual_map(surface: &Surface, p: &SurfacePoint) -> Result<Vec<C64>> {
    let a = surface.drho_at(&p.z);
    let denom: C64 = p.z.iter().zip(&a).map(|(z, d)| z * d).sum();
    if !(denom.norm() > MARGIN_TOL) {
        return Err(Error::NoHitZeroViolated {
            magnitude: denom.norm(),
        });
    }
    Ok(a.iter().map(|d| d / denom).collect())
}

/// Minimum of `|z_j w_j + z_k w_k|` over all index pairs (including `j = k`),
/// with the minimizing pair (1-based). Distinct pairs are reported first
/// on ties.
pub fn star_margin(z: &[C64], w: &[C64]) -> (f64, (usize, usize)) {
    let n = z.len();
    let mut best = (f64::INFINITY, (1, 1));
    let pairs = (0..n)
        .flat_map(|j| (j + 1..n).map(move |k| (j, k)))
        .chain((0..n).map(|j| (j, j)));
    for (j, k) in pairs {
        let v = (z[j] * w[j] + z[k] * w[k]).norm();
        if v < best.0 {
            best = (v, (j + 1, k + 1));
        }
    }
    best
}

/// How the 2n-1 chart variables are laid out in ambient space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartFrame {
    /// Orthonormal tangent frame, graph along the unit normal.
    Normal,
    /// Normal frame rotated by a seeded random orthogonal matrix of T_pS.
    Rotated(u64),
    /// Graph over the coordinate hyperplane of the real axis with the
    /// largest |d rho|.
    Axis,
}

/// Order-`K` graph parametrization of `S` at a base point, carrying the
/// jets of `z` and of the dual map `w` in the 2n-1 real chart variables.
#[derive(Debug, Clone)]
pub struct Chart {
    base: SurfacePoint,
    order: usize,
    frame: ChartFrame,
    directions: Vec<Vec<C64>>,
    pivot: Vec<C64>,
    z_jets: Vec<Jet>,
    w_jets: Vec<Jet>,
    rho_check: Jet,
}

fn to_complex(v: &DVector<f64>) -> Vec<C64> {
    (0..v.len() / 2)
        .map(|k| C64::new(v[2 * k], v[2 * k + 1]))
        .collect()
}

fn to_real(v: &[C64]) -> DVector<f64> {
    DVector::from_iterator(2 * v.len(), v.iter().flat_map(|c| [c.re, c.im]))
}

fn unit(dim: usize, i: usize) -> DVector<f64> {
    let mut e = DVector::zeros(dim);
    e[i] = 1.0;
    e
}

impl Chart {
    pub fn n(&self) -> usize {
        self.z_jets.len()
    }

    pub fn num_vars(&self) -> usize {
        2 * self.n() - 1
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn frame(&self) -> ChartFrame {
        self.frame
    }

    pub fn base(&self) -> &SurfacePoint {
        &self.base
    }

    pub fn z_jets(&self) -> &[Jet] {
        &self.z_jets
    }

    pub fn w_jets(&self) -> &[Jet] {
        &self.w_jets
    }

    pub fn zbar_jets(&self) -> Vec<Jet> {
        self.z_jets.iter().map(Jet::conj).collect()
    }

    pub fn rho_check(&self) -> &Jet {
        &self.rho_check
    }

    /// Ambient directions of the chart variables (before the graph term).
    pub fn directions(&self) -> &[Vec<C64>] {
        &self.directions
    }

    pub fn pivot_direction(&self) -> &[C64] {
        &self.pivot
    }

    pub fn w_at_base(&self) -> Vec<C64> {
        self.w_jets.iter().map(Jet::value).collect()
    }

    fn first_derivatives(jets: &[Jet], m: usize) -> CMat {
        CMat::from_fn(jets.len(), m, |j, i| jets[j].linear_coeff(i))
    }

    /// `d z_j / d t_i` at the base point (n x (2n-1)).
    pub fn dz_at_base(&self) -> CMat {
        Chart::first_derivatives(&self.z_jets, self.num_vars())
    }

    /// `d w_j / d t_i` at the base point (n x (2n-1)).
    pub fn dw_at_base(&self) -> CMat {
        Chart::first_derivatives(&self.w_jets, self.num_vars())
    }

    /// Jet of an expression in `z`, `conj(z)`, `w`, `conj(w)` on this chart.
    pub fn eval(&self, e: &Expr) -> Result<Jet> {
        e.eval_jets(&self.z_jets, Some(&self.w_jets))
    }
}

pub fn make_chart(surface: &Surface, p: &SurfacePoint, order: usize) -> Result<Chart> {
    make_chart_with(surface, p, order, ChartFrame::Normal)
}

pub fn make_chart_with(
    surface: &Surface,
    p: &SurfacePoint,
    order: usize,
    frame: ChartFrame,
) -> Result<Chart> {
    let n = surface.n();
    let dim = 2 * n;
    let m = dim - 1;
    let a = surface.drho_at(&p.z);
    let grad: Vec<C64> = a.iter().map(|d| d.conj() * 2.0).collect();
    let grad_r = to_real(&grad);
    let gnorm = grad_r.norm();
    if !(gnorm > MARGIN_TOL) {
        return Err(Error::DegenerateGradient { magnitude: gnorm });
    }

    let (directions, pivot): (Vec<DVector<f64>>, DVector<f64>) = match frame {
        ChartFrame::Normal | ChartFrame::Rotated(_) => {
            let normal = &grad_r / gnorm;
            let mut candidates = vec![normal.clone()];
            candidates.extend((0..dim).map(|i| unit(dim, i)));
            let basis = linalg::gram_schmidt(&candidates, dim, 1e-8);
            let mut tangent: Vec<DVector<f64>> = basis[1..].to_vec();
            if let ChartFrame::Rotated(seed) = frame {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let raw = RMat::from_fn(m, m, |_, _| StandardNormal.sample(&mut rng));
                let q = linalg::orthonormal_columns(&raw);
                tangent = (0..m)
                    .map(|c| {
                        (0..m).fold(DVector::zeros(dim), |acc, r| acc + &tangent[r] * q[(r, c)])
                    })
                    .collect();
            }
            (tangent, normal)
        }
        ChartFrame::Axis => {
            let pivot_axis = grad_r.iamax();
            let dirs = (0..dim)
                .filter(|&i| i != pivot_axis)
                .map(|i| unit(dim, i))
                .collect();
            (dirs, unit(dim, pivot_axis))
        }
    };
    let directions: Vec<Vec<C64>> = directions.iter().map(to_complex).collect();
    let pivot = to_complex(&pivot);

    // Ambient coordinates as jets in (t_0..t_{m-1}, s).
    let ambient: Vec<Jet> = (0..n)
        .map(|k| {
            let mut jet = Jet::constant(dim, order, p.z[k]);
            for (i, d) in directions.iter().enumerate() {
                jet += &Jet::variable(dim, order, i).scale(d[k]);
            }
            jet + Jet::variable(dim, order, m).scale(pivot[k])
        })
        .collect();
    let rho_ambient = surface.rho.eval_jets(&ambient, None)?;
    let graph = implicit_solve(&rho_ambient, m)?;

    let z_jets: Vec<Jet> = (0..n)
        .map(|k| {
            let mut jet = Jet::constant(m, order, p.z[k]);
            for (i, d) in directions.iter().enumerate() {
                jet += &Jet::variable(m, order, i).scale(d[k]);
            }
            jet + graph.scale(pivot[k])
        })
        .collect();

    let drho: Vec<Jet> = surface
        .drho
        .iter()
        .map(|d| d.eval_jets(&z_jets, None))
        .collect::<Result<_>>()?;
    let denom = z_jets
        .iter()
        .zip(&drho)
        .fold(Jet::zero(m, order), |acc, (z, d)| acc + z * d);
    if !(denom.value().norm() > MARGIN_TOL) {
        return Err(Error::NoHitZeroViolated {
            magnitude: denom.value().norm(),
        });
    }
    let inv = denom.recip_with_tol(MARGIN_TOL)?;
    let w_jets = drho.iter().map(|d| d * &inv).collect();
    let rho_check = surface.rho.eval_jets(&z_jets, None)?;

    Ok(Chart {
        base: p.clone(),
        order,
        frame,
        directions,
        pivot,
        z_jets,
        w_jets,
        rho_check,
    })
}

/// Real basis of `H_p` in chart coordinates together with the complex
/// structures `J` (from `z`) and `J*` (from the dual map) on it.
#[derive(Debug, Clone)]
pub struct HFrame {
    /// Orthonormal columns spanning `H_p` inside `R^{2n-1}`.
    pub basis: RMat,
    /// `dz` restricted to the basis (n x (2n-2)).
    pub dz: CMat,
    /// `dw` restricted to the basis (n x (2n-2)).
    pub dw: CMat,
    pub j: RMat,
    pub jstar: RMat,
    /// Condition number of `dw` on `H_p` (as a real map).
    pub dual_condition: f64,
    /// Least-squares residuals of the `J` and `J*` solves.
    pub j_residual: f64,
    pub jstar_residual: f64,
}

fn realify(m: &CMat) -> RMat {
    let (r, c) = m.shape();
    RMat::from_fn(2 * r, c, |i, j| {
        let v = m[(i / 2, j)];
        if i % 2 == 0 {
            v.re
        } else {
            v.im
        }
    })
}

/// Matrix of the real-linear map `V -> W` with `d(W) = i d(V)` on `H_p`.
fn complex_structure(d: &CMat) -> (RMat, f64) {
    let dr = realify(d);
    let h = d.ncols();
    let mut out = RMat::zeros(h, h);
    let mut worst: f64 = 0.0;
    for c in 0..h {
        let target: Vec<C64> = d.column(c).iter().map(|v| v * C64::new(0.0, 1.0)).collect();
        let (x, res) = linalg::real_lstsq(&dr, &to_real(&target));
        out.set_column(c, &x);
        worst = worst.max(res);
    }
    (out, worst)
}

impl HFrame {
    pub fn new(chart: &Chart) -> HFrame {
        let n = chart.n();
        let dz_full = chart.dz_at_base();
        let dw_full = chart.dw_at_base();
        let w = chart.w_at_base();
        let m = chart.num_vars();
        // theta = -sum w_j dz_j annihilates exactly H_p.
        let theta = CMat::from_fn(1, m, |_, i| {
            -(0..n).map(|j| w[j] * dz_full[(j, i)]).sum::<C64>()
        });
        let basis = linalg::real_kernel(&realify(&theta), 2 * n - 2);
        let to_c = |b: &RMat| b.map(|x| C64::new(x, 0.0));
        let dz = &dz_full * to_c(&basis);
        let dw = &dw_full * to_c(&basis);
        let (j, j_residual) = complex_structure(&dz);
        let (jstar, jstar_residual) = complex_structure(&dw);
        let dual_condition = linalg::condition_number_r(&realify(&dw));
        HFrame {
            basis,
            dz,
            dw,
            j,
            jstar,
            dual_condition,
            j_residual,
            jstar_residual,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Coordinates (in the H basis) of a complex chart vector lying in
    /// `H_p (x) C`.
    pub fn coordinates(&self, v: &[C64]) -> Vec<C64> {
        let bt = self.basis.transpose();
        (0..bt.nrows())
            .map(|r| (0..bt.ncols()).map(|c| v[c] * bt[(r, c)]).sum())
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StructureReport {
    pub no_hit_0_margin: f64,
    pub no_hit_0_ok: bool,
    pub addendum_margin: f64,
    pub addendum_ok: bool,
    pub levi_min_eig: f64,
    pub levi_ok: bool,
    pub star_margin: f64,
    pub star_pair: (usize, usize),
    pub star_ok: bool,
    pub dtheta_nondegen: f64,
    pub dtheta_ok: bool,
}

impl StructureReport {
    /// All checks that are hypotheses of the construction itself; the
    /// pair-sum condition is excluded since it can be repaired.
    pub fn passed(&self) -> bool {
        self.no_hit_0_ok && self.addendum_ok && self.levi_ok && self.dtheta_ok
    }
}

/// Smallest eigenvalue of the complex Hessian of `rho` restricted to the
/// complex tangent space.
pub fn levi_min_eigenvalue(surface: &Surface, z: &[C64]) -> f64 {
    let n = surface.n();
    let a = surface.drho_at(z);
    let normal = DVector::from_iterator(n, a.iter().map(|c| c.conj()));
    let mut candidates = vec![normal];
    candidates.extend((0..n).map(|i| {
        let mut e = DVector::from_element(n, C64::new(0.0, 0.0));
        e[i] = C64::new(1.0, 0.0);
        e
    }));
    let basis = linalg::gram_schmidt_c(&candidates, n, 1e-8);
    let b = CMat::from_columns(&basis[1..]);
    let hess = surface.levi_at(z).transpose();
    let restricted = b.adjoint() * hess * &b;
    let herm = (&restricted + restricted.adjoint()) * C64::new(0.5, 0.0);
    herm.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Structural diagnostics at a surface point.
pub fn check_structure(surface: &Surface, p: &SurfacePoint) -> StructureReport {
    let a = surface.drho_at(&p.z);
    let no_hit: f64 = p.z.iter().zip(&a).map(|(z, d)| z * d).sum::<C64>().norm();
    let levi = levi_min_eigenvalue(surface, &p.z);
    let mut report = StructureReport {
        no_hit_0_margin: no_hit,
        no_hit_0_ok: no_hit > MARGIN_TOL,
        addendum_margin: 0.0,
        addendum_ok: false,
        levi_min_eig: levi,
        levi_ok: levi > EIGEN_TOL,
        star_margin: 0.0,
        star_pair: (1, 1),
        star_ok: false,
        dtheta_nondegen: 0.0,
        dtheta_ok: false,
    };
    let Ok(chart) = make_chart(surface, p, 2) else {
        return report;
    };
    let (star, pair) = star_margin(&p.z, &chart.w_at_base());
    report.star_margin = star;
    report.star_pair = pair;
    report.star_ok = star > MARGIN_TOL;

    let h = HFrame::new(&chart);
    let i = C64::new(0.0, 1.0);
    let jc = h.j.map(|x| C64::new(x, 0.0));
    let antilinear = &h.dw * &jc - &h.dw * i;
    let dw_norm = linalg::singular_values_r(&realify(&h.dw))
        .first()
        .copied()
        .unwrap_or(0.0);
    let anti_min = linalg::singular_values_r(&realify(&antilinear))
        .last()
        .copied()
        .unwrap_or(0.0);
    report.addendum_margin = if dw_norm > 0.0 {
        anti_min / dw_norm
    } else {
        0.0
    };
    report.addendum_ok = report.addendum_margin > MARGIN_TOL;

    let dz = chart.dz_at_base();
    let dw = chart.dw_at_base();
    let m = chart.num_vars();
    let dtheta = CMat::from_fn(m, m, |a, b| {
        (0..surface.n())
            .map(|j| dz[(j, a)] * dw[(j, b)] - dz[(j, b)] * dw[(j, a)])
            .sum()
    });
    let bc = h.basis.map(|x| C64::new(x, 0.0));
    let restricted = bc.transpose() * dtheta * &bc;
    report.dtheta_nondegen = linalg::singular_values_c(&restricted)
        .last()
        .copied()
        .unwrap_or(0.0);
    report.dtheta_ok = report.dtheta_nondegen > MARGIN_TOL;
    report
}

fn pair_sums_ok(z: &[C64], w: &[C64], tol: f64) -> bool {
    star_margin(z, w).0 > tol && z.iter().chain(w).all(|c| c.norm() > tol)
}

/// Finds an invertible `M` such that at `M p` every pair sum
/// `z'_j w'_j + z'_k w'_k` (with `w' = M^{-T} w`) exceeds the repair
/// tolerance. Returns the identity when `p` already qualifies.
pub fn repair_star(surface: &Surface, p: &SurfacePoint, seed: u64) -> Result<CMat> {
    const ATTEMPTS: usize = 100;
    let n = surface.n();
    if n <= 2 {
        return Err(Error::Dimension {
            requirement: "n > 2",
            n,
        });
    }
    let w = dual_map(surface, p)?;
    if pair_sums_ok(&p.z, &w, STAR_REPAIR_TOL) {
        return Ok(CMat::identity(n, n));
    }
    let z = DVector::from_vec(p.z.clone());
    let wv = DVector::from_vec(w);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..ATTEMPTS {
        let generic = CMat::from_fn(n, n, |_, _| {
            let g = gaussian_point(&mut rng, 1);
            g[0]
        });
        let shear_params = gaussian_point(&mut rng, n);
        let mut shear = CMat::identity(n, n);
        for k in 1..n {
            shear[(0, k)] = shear_params[k];
        }
        let m = shear * generic;
        if linalg::condition_number_c(&m) > MAX_CONDITION {
            continue;
        }
        let Some(inv) = m.clone().try_inverse() else {
            continue;
        };
        let z2 = &m * &z;
        let w2 = inv.transpose() * &wv;
        let z2: Vec<C64> = z2.iter().copied().collect();
        let w2: Vec<C64> = w2.iter().copied().collect();
        if pair_sums_ok(&z2, &w2, STAR_REPAIR_TOL) {
            return Ok(m);
        }
    }
    Err(Error::RepairFailed { attempts: ATTEMPTS })
}

/// Image of a point under `z -> M z`, validated on the transformed surface.
pub fn transform_point(transformed: &Surface, p: &SurfacePoint, m: &CMat) -> Result<SurfacePoint> {
    let z = m * DVector::from_vec(p.z.clone());
    let z: Vec<C64> = z.iter().copied().collect();
    match SurfacePoint::new(transformed, z.clone()) {
        Ok(point) => Ok(point),
        Err(_) => project_to_surface(transformed, &z),
    }
}
