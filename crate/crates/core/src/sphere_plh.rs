//! Tangential operators `L_jk`, `Lbar_jk`, `L~_jkl` on the unit sphere,
//! the pluriharmonic-trace tests built from them, and their agreement with
//! the projective residuals (on the sphere `w = conj z`).

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::decompose::{tilde_point, triples, xxt_ttx_point, PointContext, RunOptions, MIN_ORDER};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fields::ConjugateFamily;
use crate::hypersurface::{make_chart_with, Surface, SurfacePoint};
use crate::jets::Jet;
use crate::report::{derivative_scale, PointRecord, ResidualReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceMode {
    /// `L_jk L_lm Lbar_rs u` and `Lbar_jk Lbar_lm L_rs u`.
    ThirdOrder,
    /// `L_jk L~_jkl u` (needs n > 2).
    SecondOrder,
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|j| (j + 1..n).map(move |k| (j, k)))
        .collect()
}

fn idx(p: (usize, usize)) -> String {
    format!("{}{}", p.0 + 1, p.1 + 1)
}

/// Second-order residual names and values at one point.
pub fn second_order_point(family: &ConjugateFamily, u: &Jet, n: usize) -> Vec<(String, C64)> {
    triples(n)
        .into_iter()
        .map(|(j, k, l)| {
            let v = family
                .l(j, k)
                .apply(&family.ltilde(j, k, l).apply(u))
                .value();
            (
                format!("L_{}{} L~_{}{}{} u", j + 1, k + 1, j + 1, k + 1, l + 1),
                v,
            )
        })
        .collect()
}

pub fn third_order_point(family: &ConjugateFamily, u: &Jet, n: usize) -> Vec<(String, C64)> {
    let ps = pairs(n);
    let mut out = Vec::new();
    for &a in &ps {
        for &b in &ps {
            for &r in &ps {
                let first = family
                    .l(a.0, a.1)
                    .apply(&family.l(b.0, b.1).apply(&family.lbar(r.0, r.1).apply(u)));
                out.push((
                    format!("L_{} L_{} Lbar_{} u", idx(a), idx(b), idx(r)),
                    first.value(),
                ));
                let second = family
                    .lbar(a.0, a.1)
                    .apply(&family.lbar(b.0, b.1).apply(&family.l(r.0, r.1).apply(u)));
                out.push((
                    format!("Lbar_{} Lbar_{} L_{} u", idx(a), idx(b), idx(r)),
                    second.value(),
                ));
            }
        }
    }
    out
}

fn sphere_points_check(n: usize, order: usize, points: &[SurfacePoint]) -> Result<Surface> {
    if order < MIN_ORDER {
        return Err(Error::OrderTooLow {
            order,
            needed: MIN_ORDER,
        });
    }
    let s = Surface::sphere(n)?;
    for p in points {
        if p.z.len() != n {
            return Err(Error::Usage("point dimension does not match n".into()));
        }
    }
    Ok(s)
}

pub fn trace_residuals(
    u: &Expr,
    points: &[SurfacePoint],
    n: usize,
    opts: &RunOptions,
    mode: TraceMode,
) -> Result<ResidualReport> {
    if mode == TraceMode::SecondOrder && n < 3 {
        return Err(Error::Dimension {
            requirement: "n > 2 for the second-order test",
            n,
        });
    }
    let s = sphere_points_check(n, opts.order, points)?;
    u.check_dim(n)?;
    let records: Vec<PointRecord> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let run = || -> Result<PointRecord> {
                let chart = make_chart_with(&s, p, opts.order, opts.frame)?;
                let family = ConjugateFamily::new(&chart)?;
                let uj = chart.eval(u)?;
                let mut rec = PointRecord::new(i, p.z.clone());
                let values = match mode {
                    TraceMode::ThirdOrder => third_order_point(&family, &uj, n),
                    TraceMode::SecondOrder => second_order_point(&family, &uj, n),
                };
                rec.residuals.extend(values);
                rec.scale = derivative_scale(&uj);
                Ok(rec)
            };
            run().unwrap_or_else(|e| PointRecord::skipped(i, p.z.clone(), e.to_string()))
        })
        .collect();
    let test = match mode {
        TraceMode::ThirdOrder => "pluriharmonic-third-order",
        TraceMode::SecondOrder => "pluriharmonic-second-order",
    };
    Ok(ResidualReport::new(
        test,
        s.label(),
        &u.to_string(),
        opts.seed,
        opts.order,
        records,
        &opts.policy,
    ))
}

/// Differences between the projective residuals and their conjugate-field
/// counterparts: `XXTu + L L Lbar u`, `TTXu + Lbar Lbar L u` for `n = 2`,
/// `X_jk T~_jkl u - L_jk L~_jkl u` for `n > 2`. The points must not need a
/// pair-sum repair.
pub fn cross_check(
    u: &Expr,
    points: &[SurfacePoint],
    n: usize,
    opts: &RunOptions,
) -> Result<ResidualReport> {
    let s = sphere_points_check(n, opts.order, points)?;
    u.check_dim(n)?;
    let records: Vec<PointRecord> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let run = || -> Result<PointRecord> {
                let ctx = PointContext::new(&s, u, p, opts.order, opts.frame)?;
                let family = ConjugateFamily::new(&ctx.chart)?;
                let mut rec = PointRecord::new(i, p.z.clone());
                if n == 2 {
                    let (xxt, ttx) = xxt_ttx_point(&ctx);
                    let l = family.l(0, 1);
                    let lb = family.lbar(0, 1);
                    let lll = l.apply(&l.apply(&lb.apply(&ctx.u))).value();
                    let bbl = lb.apply(&lb.apply(&l.apply(&ctx.u))).value();
                    rec.residuals
                        .insert("XXTu + L_12 L_12 Lbar_12 u".into(), xxt + lll);
                    rec.residuals
                        .insert("TTXu + Lbar_12 Lbar_12 L_12 u".into(), ttx + bbl);
                } else {
                    let projective = tilde_point(&ctx, false);
                    let conjugate = second_order_point(&family, &ctx.u, n);
                    for ((name, a), (_, b)) in projective.into_iter().zip(conjugate) {
                        rec.residuals
                            .insert(format!("{name} - L-counterpart"), a - b);
                    }
                }
                rec.scale = derivative_scale(&ctx.u);
                Ok(rec)
            };
            run().unwrap_or_else(|e| PointRecord::skipped(i, p.z.clone(), e.to_string()))
        })
        .collect();
    Ok(ResidualReport::new(
        "sphere-cross-check",
        s.label(),
        &u.to_string(),
        opts.seed,
        opts.order,
        records,
        &opts.policy,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::report::Classification;
    use crate::sampling::sample_points;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn pluriharmonic_trace_passes() {
        let s = Surface::sphere(3).unwrap();
        let pts = sample_points(&s, 20, 9).unwrap();
        let u = parse("z1 + conj(z2)^2").unwrap();
        for mode in [TraceMode::ThirdOrder, TraceMode::SecondOrder] {
            let r = trace_residuals(&u, &pts, 3, &RunOptions::default(), mode).unwrap();
            assert_eq!(
                r.classification(),
                Classification::DecomposableConsistent,
                "{mode:?}"
            );
        }
    }

    #[test]
    fn second_order_witness() {
        let s = Surface::sphere(3).unwrap();
        let t = 1.0 / 3f64.sqrt();
        let p = SurfacePoint::new(&s, vec![c(t), c(t), c(t)]).unwrap();
        let r = trace_residuals(
            &parse("z1*conj(z1)").unwrap(),
            &[p],
            3,
            &RunOptions::default(),
            TraceMode::SecondOrder,
        )
        .unwrap();
        assert!((r.values("L_12 L~_123 u")[0] + 3f64.powf(-1.5)).norm() < 1e-9);
    }

    #[test]
    fn third_order_witness_in_two_dimensions() {
        let s = Surface::sphere(2).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let p = SurfacePoint::new(&s, vec![c(r), c(r)]).unwrap();
        let rep = trace_residuals(
            &parse("z1*conj(z1)").unwrap(),
            std::slice::from_ref(&p),
            2,
            &RunOptions::default(),
            TraceMode::ThirdOrder,
        )
        .unwrap();
        assert!((rep.values("L_12 L_12 Lbar_12 u")[0] - 1.0).norm() < 1e-9);
        let cc = cross_check(
            &parse("z1*conj(z1)").unwrap(),
            &[p],
            2,
            &RunOptions::default(),
        )
        .unwrap();
        assert!(cc.summary.max_abs < 1e-8);
    }

    #[test]
    fn cross_check_three_dimensions() {
        let s = Surface::sphere(3).unwrap();
        let pts = sample_points(&s, 5, 2).unwrap();
        let cc = cross_check(
            &parse("z1*conj(z1)").unwrap(),
            &pts,
            3,
            &RunOptions::default(),
        )
        .unwrap();
        assert!(cc.summary.max_abs < 1e-8);
    }
}
