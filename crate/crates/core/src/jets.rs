//! Truncated multivariate Taylor series over real variables with complex
//! coefficients.
//!
//! A [`Jet`] of order `K` in `m` variables stores every coefficient of total
//! degree `<= K` densely, in graded-lex order. Monomials of degree `<= r` form
//! a prefix of the coefficient vector for every `r <= K`, so truncation is a
//! slice and jets of different orders over the same variables can be combined
//! by working in the smaller space.
//!
//! Variables are real, so conjugation acts on coefficients only: `z` and
//! `conj(z)` are independent complex-coefficient jets of the same chart
//! variables.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Relative tolerance for singular divisors and pivots.
pub const SINGULAR_TOL: f64 = 1e-10;

/// Monomial tables shared by every jet with the same shape.
#[derive(Debug)]
pub struct JetSpace {
    num_vars: usize,
    order: usize,
    exponents: Vec<Vec<u8>>,
    degrees: Vec<usize>,
    /// `degree_end[d]` is the number of monomials of degree `<= d`.
    degree_end: Vec<usize>,
    lookup: HashMap<Vec<u8>, usize>,
    /// `(i, j, k)` with `x^i * x^j = x^k`, all within this order.
    products: Vec<(u32, u32, u32)>,
    /// Per variable: `(source, target, factor)` for the partial derivative.
    partials: Vec<Vec<(u32, u32, f64)>>,
}

type SpaceCache = HashMap<(usize, usize), Arc<JetSpace>>;

impl JetSpace {
    /// Shared space for `num_vars` variables truncated at `order`.
    pub fn get(num_vars: usize, order: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<SpaceCache>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache poisoned");
        guard
            .entry((num_vars, order))
            .or_insert_with(|| Arc::new(JetSpace::build(num_vars, order)))
            .clone()
    }

    fn build(num_vars: usize, order: usize) -> JetSpace {
        let mut exponents = Vec::new();
        let mut degree_end = Vec::with_capacity(order + 1);
        for degree in 0..=order {
            let mut current = vec![0u8; num_vars];
            push_monomials(&mut exponents, &mut current, 0, degree);
            degree_end.push(exponents.len());
        }
        let degrees: Vec<usize> = exponents
            .iter()
            .map(|e| e.iter().map(|&x| x as usize).sum())
            .collect();
        let lookup: HashMap<Vec<u8>, usize> = exponents
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();

        let mut products = Vec::new();
        let mut scratch = vec![0u8; num_vars];
        for (i, ei) in exponents.iter().enumerate() {
            let limit = degree_end[order - degrees[i]];
            for (j, ej) in exponents.iter().enumerate().take(limit) {
                for v in 0..num_vars {
                    scratch[v] = ei[v] + ej[v];
                }
                let k = lookup[&scratch];
                products.push((i as u32, j as u32, k as u32));
            }
        }

        let mut partials = vec![Vec::new(); num_vars];
        for (v, table) in partials.iter_mut().enumerate() {
            for (i, e) in exponents.iter().enumerate() {
                if e[v] == 0 {
                    continue;
                }
                let mut lowered = e.clone();
                lowered[v] -= 1;
                table.push((i as u32, lookup[&lowered] as u32, e[v] as f64));
            }
        }

        JetSpace {
            num_vars,
            order,
            exponents,
            degrees,
            degree_end,
            lookup,
            products,
            partials,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[Vec<u8>] {
        &self.exponents
    }

    pub fn degree(&self, index: usize) -> usize {
        self.degrees[index]
    }

    pub fn index_of(&self, exponent: &[u8]) -> Option<usize> {
        self.lookup.get(exponent).copied()
    }

    /// Number of monomials of total degree `<= degree`.
    pub fn count_up_to(&self, degree: usize) -> usize {
        self.degree_end[degree.min(self.order)]
    }
}

fn push_monomials(out: &mut Vec<Vec<u8>>, current: &mut [u8], var: usize, remaining: usize) {
    if var + 1 == current.len() {
        current[var] = remaining as u8;
        out.push(current.to_vec());
        current[var] = 0;
        return;
    }
    if current.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for power in (0..=remaining).rev() {
        current[var] = power as u8;
        push_monomials(out, current, var + 1, remaining - power);
    }
    current[var] = 0;
}

#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    coeffs: Vec<C64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut map = f.debug_map();
        for (e, c) in self.space.exponents.iter().zip(&self.coeffs) {
            if c.norm() > 0.0 {
                map.entry(e, c);
            }
        }
        map.finish()
    }
}

impl Jet {
    pub fn zero(num_vars: usize, order: usize) -> Jet {
        let space = JetSpace::get(num_vars, order);
        let coeffs = vec![C64::new(0.0, 0.0); space.len()];
        Jet { space, coeffs }
    }

    pub fn constant(num_vars: usize, order: usize, value: C64) -> Jet {
        let mut jet = Jet::zero(num_vars, order);
        jet.coeffs[0] = value;
        jet
    }

    /// The coordinate function `t_var` (zero at the base point).
    pub fn variable(num_vars: usize, order: usize, var: usize) -> Jet {
        assert!(var < num_vars, "variable {var} out of range");
        let mut jet = Jet::zero(num_vars, order);
        if order >= 1 {
            let mut e = vec![0u8; num_vars];
            e[var] = 1;
            let idx = jet.space.lookup[&e];
            jet.coeffs[idx] = C64::new(1.0, 0.0);
        }
        jet
    }

    /// Builds a jet from `(exponent, coefficient)` terms; terms above the
    /// order are dropped.
    pub fn from_terms(num_vars: usize, order: usize, terms: &[(&[u8], C64)]) -> Jet {
        let mut jet = Jet::zero(num_vars, order);
        for (e, c) in terms {
            assert_eq!(e.len(), num_vars, "exponent length mismatch");
            if let Some(idx) = jet.space.index_of(e) {
                jet.coeffs[idx] += *c;
            }
        }
        jet
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn num_vars(&self) -> usize {
        self.space.num_vars
    }

    pub fn order(&self) -> usize {
        self.space.order
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    /// Value at the base point.
    pub fn value(&self) -> C64 {
        self.coeffs[0]
    }

    pub fn coeff(&self, exponent: &[u8]) -> C64 {
        self.space
            .index_of(exponent)
            .map(|i| self.coeffs[i])
            .unwrap_or(C64::new(0.0, 0.0))
    }

    /// Coefficient of `t_var` (first partial at the base point).
    pub fn linear_coeff(&self, var: usize) -> C64 {
        if self.order() == 0 {
            return C64::new(0.0, 0.0);
        }
        let mut e = vec![0u8; self.num_vars()];
        e[var] = 1;
        self.coeff(&e)
    }

    /// Partial derivative `d^alpha` at the base point, i.e. `alpha! * c_alpha`.
    pub fn derivative_at_base(&self, exponent: &[u8]) -> C64 {
        let factorial: f64 = exponent
            .iter()
            .map(|&k| (1..=k as u32).map(f64::from).product::<f64>())
            .product();
        self.coeff(exponent) * factorial
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest coefficient magnitude among monomials of exactly `degree`.
    pub fn max_abs_of_degree(&self, degree: usize) -> f64 {
        if degree > self.order() {
            return 0.0;
        }
        let start = if degree == 0 {
            0
        } else {
            self.space.degree_end[degree - 1]
        };
        self.coeffs[start..self.space.degree_end[degree]]
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    pub fn conj(&self) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|c| c.conj()).collect(),
        }
    }

    pub fn scale(&self, factor: C64) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn add_scalar(&self, value: C64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += value;
        out
    }

    /// Truncation to `order` (no-op when already at or below it).
    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let space = JetSpace::get(self.num_vars(), order);
        let coeffs = self.coeffs[..space.len()].to_vec();
        Jet { space, coeffs }
    }

    /// Re-embeds at a higher order with vanishing top coefficients.
    pub fn extend(&self, order: usize) -> Jet {
        if order <= self.order() {
            return self.truncate(order);
        }
        let mut out = Jet::zero(self.num_vars(), order);
        out.coeffs[..self.coeffs.len()].copy_from_slice(&self.coeffs);
        out
    }

    /// `d/dt_var`, truncated to order `K - 1` (order 0 stays 0).
    pub fn partial(&self, var: usize) -> Jet {
        assert!(var < self.num_vars(), "variable {var} out of range");
        let target_order = self.order().saturating_sub(1);
        let mut out = Jet::zero(self.num_vars(), target_order);
        if self.order() == 0 {
            return out;
        }
        for &(src, dst, factor) in &self.space.partials[var] {
            let dst = dst as usize;
            if dst < out.coeffs.len() {
                out.coeffs[dst] += self.coeffs[src as usize] * factor;
            }
        }
        out
    }

    pub fn gradient(&self) -> Vec<Jet> {
        (0..self.num_vars()).map(|v| self.partial(v)).collect()
    }

    fn check_vars(&self, other: &Jet) {
        assert_eq!(
            self.num_vars(),
            other.num_vars(),
            "jets over different variable counts"
        );
    }

    fn binary_linear(&self, other: &Jet, sign: f64) -> Jet {
        self.check_vars(other);
        let order = self.order().min(other.order());
        let space = JetSpace::get(self.num_vars(), order);
        let coeffs = self.coeffs[..space.len()]
            .iter()
            .zip(&other.coeffs[..space.len()])
            .map(|(a, b)| a + b * sign)
            .collect();
        Jet { space, coeffs }
    }

    fn product(&self, other: &Jet) -> Jet {
        self.check_vars(other);
        let order = self.order().min(other.order());
        let space = JetSpace::get(self.num_vars(), order);
        let mut coeffs = vec![C64::new(0.0, 0.0); space.len()];
        for &(i, j, k) in &space.products {
            let a = self.coeffs[i as usize];
            if a.re == 0.0 && a.im == 0.0 {
                continue;
            }
            coeffs[k as usize] += a * other.coeffs[j as usize];
        }
        Jet { space, coeffs }
    }

    /// Multiplicative inverse; errors when the constant term is below
    /// `tol` in magnitude.
    pub fn recip_with_tol(&self, tol: f64) -> Result<Jet> {
        let b0 = self.value();
        if b0.norm() <= tol || !b0.norm().is_finite() {
            return Err(Error::DivisionBySingularJet {
                magnitude: b0.norm(),
            });
        }
        let inv0 = b0.inv();
        // 1/b = (1/b0) * sum_r (-h)^r with h = b/b0 - 1, nilpotent of index K+1.
        let minus_h = self.scale(-inv0).add_scalar(C64::new(1.0, 0.0));
        let mut sum = Jet::constant(self.num_vars(), self.order(), C64::new(1.0, 0.0));
        let mut power = sum.clone();
        for _ in 0..self.order() {
            power = &power * &minus_h;
            sum += &power;
        }
        Ok(sum.scale(inv0))
    }

    /// Multiplicative inverse with the default relative tolerance.
    pub fn recip(&self) -> Result<Jet> {
        self.recip_with_tol(SINGULAR_TOL * self.max_abs().max(f64::MIN_POSITIVE))
    }

    pub fn try_div(&self, other: &Jet) -> Result<Jet> {
        check_space(self, other, false)?;
        Ok(self * &other.recip()?)
    }

    pub fn powi(&self, exponent: u32) -> Jet {
        let mut result = Jet::constant(self.num_vars(), self.order(), C64::new(1.0, 0.0));
        let mut base = self.clone();
        let mut e = exponent;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// Evaluates the truncated polynomial at real variable values.
    pub fn eval_at(&self, point: &[f64]) -> C64 {
        assert_eq!(point.len(), self.num_vars());
        self.space
            .exponents
            .iter()
            .zip(&self.coeffs)
            .map(|(e, c)| {
                let monomial: f64 = e
                    .iter()
                    .zip(point)
                    .map(|(&k, &x)| x.powi(k as i32))
                    .product();
                c * monomial
            })
            .sum()
    }

    /// Splits `self` by powers of `var`: returns `q_k` in the remaining
    /// variables with `self = sum_k t_var^k q_k`.
    fn split_by_var(&self, var: usize) -> Vec<Jet> {
        let m = self.num_vars();
        let order = self.order();
        let reduced = JetSpace::get(m - 1, order);
        let mut parts = vec![Jet::zero(m - 1, order); order + 1];
        let mut scratch = Vec::with_capacity(m - 1);
        for (e, c) in self.space.exponents.iter().zip(&self.coeffs) {
            scratch.clear();
            scratch.extend(
                e.iter()
                    .enumerate()
                    .filter(|(v, _)| *v != var)
                    .map(|(_, &k)| k),
            );
            let idx = reduced.lookup[&scratch];
            parts[e[var] as usize].coeffs[idx] += *c;
        }
        parts
    }
}

fn check_space(a: &Jet, b: &Jet, strict_order: bool) -> Result<()> {
    if a.num_vars() != b.num_vars() || (strict_order && a.order() != b.order()) {
        return Err(Error::MismatchedJetSpaces {
            left_vars: a.num_vars(),
            left_order: a.order(),
            right_vars: b.num_vars(),
            right_order: b.order(),
        });
    }
    Ok(())
}

impl Add<&Jet> for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.binary_linear(rhs, 1.0)
    }
}

impl Sub<&Jet> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.binary_linear(rhs, -1.0)
    }
}

impl Mul<&Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.product(rhs)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &self * &rhs
    }
}

impl Mul<C64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: C64) -> Jet {
        self.scale(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        -&self
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        if rhs.order() >= self.order() && rhs.num_vars() == self.num_vars() {
            for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
                *a += b;
            }
        } else {
            *self = &*self + rhs;
        }
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        if rhs.order() >= self.order() && rhs.num_vars() == self.num_vars() {
            for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
                *a -= b;
            }
        } else {
            *self = &*self - rhs;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Checked arithmetic: both operands must share variables and order.
pub fn jet_arith(a: &Jet, b: &Jet, op: JetOp) -> Result<Jet> {
    check_space(a, b, true)?;
    match op {
        JetOp::Add => Ok(a + b),
        JetOp::Sub => Ok(a - b),
        JetOp::Mul => Ok(a * b),
        JetOp::Div => a.try_div(b),
    }
}

/// Partial derivative re-embedded at the input order.
pub fn jet_partial(a: &Jet, var: usize) -> Result<Jet> {
    if var >= a.num_vars() {
        return Err(Error::IndexOutOfRange {
            index: var,
            dim: a.num_vars(),
        });
    }
    Ok(a.partial(var).extend(a.order()))
}

/// Solves `rho(t_other, g(t_other)) = 0` for the jet `g` in the remaining
/// variables (their relative order is preserved).
pub fn implicit_solve(rho: &Jet, pivot: usize) -> Result<Jet> {
    if pivot >= rho.num_vars() {
        return Err(Error::IndexOutOfRange {
            index: pivot,
            dim: rho.num_vars(),
        });
    }
    let scale = rho.max_abs().max(f64::MIN_POSITIVE);
    let c0 = rho.value().norm();
    if c0 > SINGULAR_TOL * scale {
        return Err(Error::NonzeroConstantTerm { magnitude: c0 });
    }
    let slope = rho.linear_coeff(pivot);
    if slope.norm() <= SINGULAR_TOL * scale {
        return Err(Error::SingularPivot {
            var: pivot,
            magnitude: slope.norm(),
        });
    }
    let parts = rho.split_by_var(pivot);
    let inv_slope = slope.inv();
    let (m, order) = (rho.num_vars() - 1, rho.order());
    let mut g = Jet::zero(m, order);
    // Each pass fixes one more degree of g.
    for _ in 0..=order {
        let mut residual = parts[order].clone();
        for part in parts[..order].iter().rev() {
            residual = &(&residual * &g) + part;
        }
        residual.coeffs[0] = C64::new(0.0, 0.0);
        g -= &residual.scale(inv_slope);
    }
    Ok(g)
}

/// Gaussian elimination over the jet ring with partial pivoting on the
/// constant-term modulus. `matrix` is row-major and square.
pub fn solve_linear(matrix: &[Vec<Jet>], rhs: &[Jet]) -> Result<Vec<Jet>> {
    let n = matrix.len();
    assert_eq!(rhs.len(), n);
    let mut a: Vec<Vec<Jet>> = matrix.to_vec();
    let mut b: Vec<Jet> = rhs.to_vec();
    let scale = a
        .iter()
        .flatten()
        .map(|j| j.value().norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| {
                a[r][col]
                    .value()
                    .norm()
                    .total_cmp(&a[s][col].value().norm())
            })
            .expect("nonempty range");
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        let pivot_inv = a[col][col].recip_with_tol(SINGULAR_TOL * scale)?;
        for row in col + 1..n {
            let factor = &a[row][col] * &pivot_inv;
            if factor.max_abs() == 0.0 {
                continue;
            }
            #[allow(clippy::needless_range_loop)]
            for k in col..n {
                let delta = &factor * &a[col][k];
                a[row][k] -= &delta;
            }
            let delta = &factor * &b[col];
            b[row] -= &delta;
        }
    }
    let mut x: Vec<Option<Jet>> = vec![None; n];
    for row in (0..n).rev() {
        let mut acc = b[row].clone();
        for (k, xk) in x.iter().enumerate().skip(row + 1) {
            let xk = xk.as_ref().expect("solved");
            acc -= &(&a[row][k] * xk);
        }
        let pivot_inv = a[row][row].recip_with_tol(SINGULAR_TOL * scale)?;
        x[row] = Some(&acc * &pivot_inv);
    }
    Ok(x.into_iter().map(|j| j.expect("solved")).collect())
}
