//! Tangential vector fields on a chart, stored as derivations
//! `V = sum_i c_i d/dt_i` with jet coefficients, and their action tables.

use std::fmt;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hypersurface::{Chart, MAX_CONDITION};
use crate::jets::{solve_linear, Jet};
use crate::linalg::{self, CMat};

/// Relative tolerance for the defining equations of a built field.
pub const FIELD_TOL: f64 = 1e-9;

/// Field kinds; all indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldKind {
    /// `X_12` in C^2.
    X,
    /// `T_12` in C^2.
    T,
    Upsilon,
    Xjk(usize, usize),
    Tjk(usize, usize),
    Ttilde(usize, usize, usize),
    Xtilde(usize, usize, usize),
    L(usize, usize),
    Lbar(usize, usize),
    Ltilde(usize, usize, usize),
    Derived,
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use FieldKind::*;
        match *self {
            X => write!(f, "X"),
            T => write!(f, "T"),
            Upsilon => write!(f, "Y"),
            Xjk(j, k) => write!(f, "X_{}{}", j + 1, k + 1),
            Tjk(j, k) => write!(f, "T_{}{}", j + 1, k + 1),
            Ttilde(j, k, l) => write!(f, "T~_{}{}{}", j + 1, k + 1, l + 1),
            Xtilde(j, k, l) => write!(f, "X~_{}{}{}", j + 1, k + 1, l + 1),
            L(j, k) => write!(f, "L_{}{}", j + 1, k + 1),
            Lbar(j, k) => write!(f, "Lbar_{}{}", j + 1, k + 1),
            Ltilde(j, k, l) => write!(f, "L~_{}{}{}", j + 1, k + 1, l + 1),
            Derived => write!(f, "derived"),
        }
    }
}

impl FieldKind {
    fn uses_conjugate_pair(self) -> bool {
        matches!(
            self,
            FieldKind::L(..) | FieldKind::Lbar(..) | FieldKind::Ltilde(..)
        )
    }
}

/// A tangential derivation on a chart.
#[derive(Debug, Clone)]
pub struct FieldJet {
    pub kind: FieldKind,
    pub coeffs: Vec<Jet>,
}

impl FieldJet {
    pub fn num_vars(&self) -> usize {
        self.coeffs.len()
    }

    pub fn order(&self) -> usize {
        self.coeffs[0].order()
    }

    /// `sum_i c_i du/dt_i`; the order drops by one.
    pub fn apply(&self, u: &Jet) -> Jet {
        let m = self.num_vars();
        assert_eq!(u.num_vars(), m, "field and jet live on different charts");
        assert!(u.order() >= 1, "cannot differentiate an order-0 jet");
        let order = (u.order() - 1).min(self.order());
        let mut out = Jet::zero(m, order);
        for (i, c) in self.coeffs.iter().enumerate() {
            out += &(c * &u.partial(i));
        }
        out
    }

    /// Value of the coefficient vector at the base point.
    pub fn at_base(&self) -> Vec<C64> {
        self.coeffs.iter().map(Jet::value).collect()
    }

    pub fn scale(&self, factor: C64) -> FieldJet {
        FieldJet {
            kind: FieldKind::Derived,
            coeffs: self.coeffs.iter().map(|c| c.scale(factor)).collect(),
        }
    }

    /// `f * V` for a jet-valued function `f`.
    pub fn times(&self, f: &Jet) -> FieldJet {
        FieldJet {
            kind: FieldKind::Derived,
            coeffs: self.coeffs.iter().map(|c| c * f).collect(),
        }
    }

    pub fn plus(&self, other: &FieldJet) -> FieldJet {
        FieldJet {
            kind: FieldKind::Derived,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn minus(&self, other: &FieldJet) -> FieldJet {
        FieldJet {
            kind: FieldKind::Derived,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn with_kind(mut self, kind: FieldKind) -> FieldJet {
        self.kind = kind;
        self
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(Jet::max_abs).fold(0.0, f64::max)
    }
}

/// `[f, g] = f g - g f`; the order drops by one.
pub fn bracket(f: &FieldJet, g: &FieldJet) -> FieldJet {
    FieldJet {
        kind: FieldKind::Derived,
        coeffs: f
            .coeffs
            .iter()
            .zip(&g.coeffs)
            .map(|(fi, gi)| f.apply(gi) - g.apply(fi))
            .collect(),
    }
}

/// The coordinate pair `(a, b)` a field's table is written in: `(z, w)`
/// for the projective fields, `(z, conj z)` for the L-fields.
pub fn coordinate_pair(chart: &Chart, kind: FieldKind) -> (Vec<Jet>, Vec<Jet>) {
    let a = chart.z_jets().to_vec();
    let b = if kind.uses_conjugate_pair() {
        chart.zbar_jets()
    } else {
        chart.w_jets().to_vec()
    };
    (a, b)
}

/// Prescribed values of `V a_m` and `V b_m`.
pub struct ActionTable {
    pub on_a: Vec<Jet>,
    pub on_b: Vec<Jet>,
}

fn kronecker_pair(n: usize, zero: &Jet, entries: &[(usize, Jet)]) -> Vec<Jet> {
    let mut out = vec![zero.clone(); n];
    for (m, v) in entries {
        out[*m] += v;
    }
    out
}

/// Defining action of each kind in terms of the coordinate pair `(a, b)`.
pub fn action_table(kind: FieldKind, a: &[Jet], b: &[Jet]) -> ActionTable {
    use FieldKind::*;
    let n = a.len();
    let zero = Jet::zero(a[0].num_vars(), a[0].order());
    let zeros = vec![zero.clone(); n];
    match kind {
        X => action_table(Xjk(0, 1), a, b),
        T => action_table(Tjk(0, 1), a, b),
        Upsilon => ActionTable {
            on_a: a.iter().map(|x| -x).collect(),
            on_b: b.to_vec(),
        },
        // X a = 0, X b_m = a_k d_mj - a_j d_mk.
        Xjk(j, k) => ActionTable {
            on_a: zeros,
            on_b: kronecker_pair(n, &zero, &[(j, a[k].clone()), (k, -&a[j])]),
        },
        // T b = 0, T a_m = b_k d_mj - b_j d_mk.
        Tjk(j, k) => ActionTable {
            on_a: kronecker_pair(n, &zero, &[(j, b[k].clone()), (k, -&b[j])]),
            on_b: zeros,
        },
        // L a = 0, L b_m = a_j d_mk - a_k d_mj.
        L(j, k) => ActionTable {
            on_a: zeros,
            on_b: kronecker_pair(n, &zero, &[(k, a[j].clone()), (j, -&a[k])]),
        },
        // Lbar b = 0, Lbar a_m = b_j d_mk - b_k d_mj.
        Lbar(j, k) => ActionTable {
            on_a: kronecker_pair(n, &zero, &[(k, b[j].clone()), (j, -&b[k])]),
            on_b: zeros,
        },
        Ttilde(j, k, l) => ActionTable {
            on_a: kronecker_pair(
                n,
                &zero,
                &[
                    (j, -(&a[j] * &b[l])),
                    (k, -(&a[k] * &b[l])),
                    (l, &(&a[j] * &b[j]) + &(&a[k] * &b[k])),
                ],
            ),
            on_b: zeros,
        },
        Xtilde(j, k, l) => ActionTable {
            on_a: zeros,
            on_b: kronecker_pair(
                n,
                &zero,
                &[
                    (j, -(&a[l] * &b[j])),
                    (k, -(&a[l] * &b[k])),
                    (l, &(&a[j] * &b[j]) + &(&a[k] * &b[k])),
                ],
            ),
        },
        Ltilde(j, k, l) => ActionTable {
            on_a: kronecker_pair(
                n,
                &zero,
                &[
                    (j, &a[j] * &b[l]),
                    (k, &a[k] * &b[l]),
                    (l, -(&(&a[j] * &b[j]) + &(&a[k] * &b[k]))),
                ],
            ),
            on_b: zeros,
        },
        Derived => panic!("derived fields have no action table"),
    }
}

/// Largest relative deviation of `V` from its action table, over all
/// coordinates, as jets of order `K - 1`.
pub fn table_residual(chart: &Chart, field: &FieldJet, kind: FieldKind) -> f64 {
    let (a, b) = coordinate_pair(chart, kind);
    let table = action_table(kind, &a, &b);
    let mut worst: f64 = 0.0;
    for (coords, targets) in [(&a, &table.on_a), (&b, &table.on_b)] {
        for (x, t) in coords.iter().zip(targets) {
            let r = field.apply(x) - t.truncate(field.order().min(x.order() - 1));
            worst = worst.max(r.max_abs());
        }
    }
    worst
}

enum DropRule {
    /// Drop one `b`-row; the dependency has weight `|a_m|` on row `b_m`.
    BRow,
    /// Drop one `a`-row; the dependency has weight `|b_m|` on row `a_m`.
    ARow,
}

fn constant_matrix(rows: &[Vec<Jet>]) -> CMat {
    CMat::from_fn(rows.len(), rows[0].len(), |r, c| rows[r][c].value())
}

fn solve_with_drop(
    rows: &[Vec<Jet>],
    targets: &[Jet],
    candidates: &[usize],
) -> Result<(Vec<Jet>, usize)> {
    let mut best_condition = f64::INFINITY;
    for &drop in candidates {
        let keep: Vec<usize> = (0..rows.len()).filter(|&r| r != drop).collect();
        let sub: Vec<Vec<Jet>> = keep.iter().map(|&r| rows[r].clone()).collect();
        let condition = linalg::condition_number_c(&constant_matrix(&sub));
        if condition < MAX_CONDITION {
            let rhs: Vec<Jet> = keep.iter().map(|&r| targets[r].clone()).collect();
            return Ok((solve_linear(&sub, &rhs)?, drop));
        }
        best_condition = best_condition.min(condition);
    }
    Err(Error::DegenerateFrame {
        condition: best_condition,
    })
}

fn determinant_magnitude(rows: &[Vec<Jet>], drop: usize) -> f64 {
    let keep: Vec<Vec<Jet>> = rows
        .iter()
        .enumerate()
        .filter(|(r, _)| *r != drop)
        .map(|(_, row)| row.clone())
        .collect();
    constant_matrix(&keep).determinant().norm()
}

/// Builds a field from its action table by solving the jet-valued linear
/// system of its defining equations, one dependent equation dropped.
pub fn build_field(chart: &Chart, kind: FieldKind) -> Result<FieldJet> {
    use FieldKind::*;
    let n = chart.n();
    match kind {
        Ttilde(j, k, l) | Xtilde(j, k, l) | Ltilde(j, k, l) => {
            if j == k || j == l || k == l {
                return Err(Error::Usage(format!("indices of {kind} must be distinct")));
            }
            if n < 3 || j.max(k).max(l) >= n {
                return Err(Error::Dimension {
                    requirement: "three distinct indices below n",
                    n,
                });
            }
            let field = match kind {
                Ttilde(..) => {
                    let z = chart.z_jets();
                    build_field(chart, Tjk(l, j))?
                        .times(&z[j])
                        .plus(&build_field(chart, Tjk(l, k))?.times(&z[k]))
                }
                Xtilde(..) => {
                    let w = chart.w_jets();
                    build_field(chart, Xjk(l, j))?
                        .times(&w[j])
                        .plus(&build_field(chart, Xjk(l, k))?.times(&w[k]))
                }
                _ => {
                    let z = chart.z_jets();
                    build_field(chart, Lbar(l, j))?
                        .times(&z[j])
                        .plus(&build_field(chart, Lbar(l, k))?.times(&z[k]))
                }
            };
            return Ok(field.with_kind(kind));
        }
        X | T if n != 2 => {
            return Err(Error::Dimension {
                requirement: "n = 2 for X and T",
                n,
            })
        }
        Xjk(j, k) | Tjk(j, k) | L(j, k) | Lbar(j, k) if j == k || j.max(k) >= n => {
            return Err(Error::Usage(format!("invalid index pair for {kind}")));
        }
        Derived => return Err(Error::Usage("derived fields cannot be built".into())),
        _ => {}
    }

    let (a, b) = coordinate_pair(chart, kind);
    let table = action_table(kind, &a, &b);
    let rule = match kind {
        T | Tjk(..) | Lbar(..) => DropRule::ARow,
        _ => DropRule::BRow,
    };
    let mut rows: Vec<Vec<Jet>> = a.iter().map(Jet::gradient).collect();
    rows.extend(b.iter().map(Jet::gradient));
    let order = rows[0][0].order();
    let targets: Vec<Jet> = table
        .on_a
        .iter()
        .chain(&table.on_b)
        .map(|t| t.truncate(order))
        .collect();

    let (offset, weights): (usize, Vec<f64>) = match rule {
        DropRule::BRow => (n, a.iter().map(|x| x.value().norm()).collect()),
        DropRule::ARow => (0, b.iter().map(|x| x.value().norm()).collect()),
    };
    let max_weight = weights.iter().copied().fold(0.0, f64::max);
    let mut candidates: Vec<usize> = (0..n).collect();
    candidates.sort_by(|&p, &q| weights[q].total_cmp(&weights[p]));
    if n == 2 {
        // Among rows carrying a usable share of the dependency, prefer the
        // best-conditioned square system.
        let (mut good, rest): (Vec<usize>, Vec<usize>) = candidates
            .into_iter()
            .partition(|&m| weights[m] >= 1e-3 * max_weight);
        good.sort_by(|&p, &q| {
            determinant_magnitude(&rows, offset + q)
                .total_cmp(&determinant_magnitude(&rows, offset + p))
        });
        good.extend(rest);
        candidates = good;
    }
    let candidates: Vec<usize> = candidates.iter().map(|m| offset + m).collect();
    let (coeffs, _dropped) = solve_with_drop(&rows, &targets, &candidates)?;
    let field = FieldJet { kind, coeffs };

    // All 2n equations, including the dropped one, must hold.
    let target_scale = targets.iter().map(Jet::max_abs).fold(0.0, f64::max);
    let tol = FIELD_TOL * (1.0 + target_scale + field.max_abs());
    for (r, (row, t)) in rows.iter().zip(&targets).enumerate() {
        let mut lhs = Jet::zero(t.num_vars(), order);
        for (c, g) in field.coeffs.iter().zip(row) {
            lhs += &(c * g);
        }
        let residual = (lhs - t.clone()).max_abs();
        if residual > tol {
            let name = if r < n {
                format!("{kind} a_{}", r + 1)
            } else {
                format!("{kind} b_{}", r - n + 1)
            };
            return Err(Error::ResidualTooLarge {
                row: name,
                residual,
            });
        }
    }
    Ok(field)
}

/// `X_jk`, `T_jk` for all `j < k` and `Y` on one chart.
#[derive(Debug, Clone)]
pub struct FieldFamily {
    n: usize,
    x: Vec<Option<FieldJet>>,
    t: Vec<Option<FieldJet>>,
    upsilon: FieldJet,
    z: Vec<Jet>,
    w: Vec<Jet>,
}

impl FieldFamily {
    pub fn new(chart: &Chart) -> Result<FieldFamily> {
        let n = chart.n();
        let mut x = vec![None; n * n];
        let mut t = vec![None; n * n];
        for j in 0..n {
            for k in j + 1..n {
                x[j * n + k] = Some(build_field(chart, FieldKind::Xjk(j, k))?);
                t[j * n + k] = Some(build_field(chart, FieldKind::Tjk(j, k))?);
            }
        }
        Ok(FieldFamily {
            n,
            x,
            t,
            upsilon: build_field(chart, FieldKind::Upsilon)?,
            z: chart.z_jets().to_vec(),
            w: chart.w_jets().to_vec(),
        })
    }

    fn pick(table: &[Option<FieldJet>], n: usize, j: usize, k: usize, kind: FieldKind) -> FieldJet {
        assert!(j != k, "diagonal fields vanish");
        if j < k {
            table[j * n + k].clone().expect("built")
        } else {
            table[k * n + j]
                .as_ref()
                .expect("built")
                .scale(C64::new(-1.0, 0.0))
                .with_kind(kind)
        }
    }

    pub fn x(&self, j: usize, k: usize) -> FieldJet {
        Self::pick(&self.x, self.n, j, k, FieldKind::Xjk(j, k))
    }

    pub fn t(&self, j: usize, k: usize) -> FieldJet {
        Self::pick(&self.t, self.n, j, k, FieldKind::Tjk(j, k))
    }

    pub fn upsilon(&self) -> &FieldJet {
        &self.upsilon
    }

    /// `z_j T_lj + z_k T_lk`.
    pub fn ttilde(&self, j: usize, k: usize, l: usize) -> FieldJet {
        self.t(l, j)
            .times(&self.z[j])
            .plus(&self.t(l, k).times(&self.z[k]))
            .with_kind(FieldKind::Ttilde(j, k, l))
    }

    /// `w_j X_lj + w_k X_lk`.
    pub fn xtilde(&self, j: usize, k: usize, l: usize) -> FieldJet {
        self.x(l, j)
            .times(&self.w[j])
            .plus(&self.x(l, k).times(&self.w[k]))
            .with_kind(FieldKind::Xtilde(j, k, l))
    }
}

impl FieldFamily {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest error of the bracket relations with `Y`; for `n = 2` also
    /// `[X, T] = Y`.
    pub fn bracket_table_error(&self) -> f64 {
        let two = C64::new(2.0, 0.0);
        let y = &self.upsilon;
        let mut worst: f64 = 0.0;
        for j in 0..self.n {
            for k in j + 1..self.n {
                let (x, t) = (self.x(j, k), self.t(j, k));
                worst = worst.max(bracket(y, &x).plus(&x.scale(two)).max_abs());
                worst = worst.max(bracket(y, &t).minus(&t.scale(two)).max_abs());
                if self.n == 2 {
                    worst = worst.max(bracket(&x, &t).minus(y).max_abs());
                }
            }
        }
        worst
    }

    /// Largest coefficient of `z_j X_kl + z_k X_lj + z_l X_jk` over
    /// distinct triples.
    pub fn cyclic_relation_error(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in j + 1..n {
                for l in k + 1..n {
                    let sum = self
                        .x(k, l)
                        .times(&self.z[j])
                        .plus(&self.x(l, j).times(&self.z[k]))
                        .plus(&self.x(j, k).times(&self.z[l]));
                    worst = worst.max(sum.max_abs());
                }
            }
        }
        worst
    }

    /// Largest action-table residual over every field of the family,
    /// including the tilde combinations.
    pub fn table_error(&self, chart: &Chart) -> f64 {
        let n = self.n;
        let mut worst = table_residual(chart, &self.upsilon, FieldKind::Upsilon);
        for j in 0..n {
            for k in 0..n {
                if j == k {
                    continue;
                }
                worst = worst.max(table_residual(chart, &self.x(j, k), FieldKind::Xjk(j, k)));
                worst = worst.max(table_residual(chart, &self.t(j, k), FieldKind::Tjk(j, k)));
                for l in (0..n).filter(|&l| l != j && l != k) {
                    worst = worst.max(table_residual(
                        chart,
                        &self.ttilde(j, k, l),
                        FieldKind::Ttilde(j, k, l),
                    ));
                    worst = worst.max(table_residual(
                        chart,
                        &self.xtilde(j, k, l),
                        FieldKind::Xtilde(j, k, l),
                    ));
                }
            }
        }
        worst
    }
}

/// `L_jk`, `Lbar_jk` for all `j < k` on one chart.
#[derive(Debug, Clone)]
pub struct ConjugateFamily {
    n: usize,
    l: Vec<Option<FieldJet>>,
    lbar: Vec<Option<FieldJet>>,
    z: Vec<Jet>,
}

impl ConjugateFamily {
    pub fn new(chart: &Chart) -> Result<ConjugateFamily> {
        let n = chart.n();
        let mut l = vec![None; n * n];
        let mut lbar = vec![None; n * n];
        for j in 0..n {
            for k in j + 1..n {
                l[j * n + k] = Some(build_field(chart, FieldKind::L(j, k))?);
                lbar[j * n + k] = Some(build_field(chart, FieldKind::Lbar(j, k))?);
            }
        }
        Ok(ConjugateFamily {
            n,
            l,
            lbar,
            z: chart.z_jets().to_vec(),
        })
    }

    pub fn l(&self, j: usize, k: usize) -> FieldJet {
        FieldFamily::pick(&self.l, self.n, j, k, FieldKind::L(j, k))
    }

    pub fn lbar(&self, j: usize, k: usize) -> FieldJet {
        FieldFamily::pick(&self.lbar, self.n, j, k, FieldKind::Lbar(j, k))
    }

    /// `z_j Lbar_lj + z_k Lbar_lk`.
    pub fn ltilde(&self, j: usize, k: usize, l: usize) -> FieldJet {
        self.lbar(l, j)
            .times(&self.z[j])
            .plus(&self.lbar(l, k).times(&self.z[k]))
            .with_kind(FieldKind::Ltilde(j, k, l))
    }
}

/// Ambient components `(V z_k, V conj(z_k))` at the base point.
pub fn ambient_components(chart: &Chart, field: &FieldJet) -> (Vec<C64>, Vec<C64>) {
    let vz = chart
        .z_jets()
        .iter()
        .map(|z| field.apply(z).value())
        .collect();
    let vzbar = chart
        .zbar_jets()
        .iter()
        .map(|z| field.apply(z).value())
        .collect();
    (vz, vzbar)
}
