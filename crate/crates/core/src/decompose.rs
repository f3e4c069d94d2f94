//! Pointwise residuals deciding whether `u` can be CR plus dual-CR:
//! `XXTu`, `TTXu` in C^2 and `X_jk T~_jkl u` (with its companion
//! `T_jk X~_jkl u`) in higher dimension, plus the lambda diagnostics.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fields::FieldFamily;
use crate::forms::{lambda_of, FormFrame};
use crate::hypersurface::{
    dual_map, make_chart_with, repair_star, star_margin, transform_function, transform_point,
    ChartFrame, Surface, SurfacePoint, STAR_REPAIR_TOL,
};
use crate::jets::Jet;
use crate::report::{derivative_scale, DecisionPolicy, PointRecord, ResidualReport};

/// Minimum jet order for third-order residuals.
pub const MIN_ORDER: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub order: usize,
    pub seed: u64,
    pub policy: DecisionPolicy,
    pub frame: ChartFrame,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            order: MIN_ORDER,
            seed: 42,
            policy: DecisionPolicy::default(),
            frame: ChartFrame::Normal,
        }
    }
}

fn check_order(order: usize) -> Result<()> {
    if order < MIN_ORDER {
        return Err(Error::OrderTooLow {
            order,
            needed: MIN_ORDER,
        });
    }
    Ok(())
}

/// Chart, fields and the jet of `u` at one point.
pub struct PointContext {
    pub chart: crate::hypersurface::Chart,
    pub family: FieldFamily,
    pub u: Jet,
}

impl PointContext {
    pub fn new(
        s: &Surface,
        u: &Expr,
        p: &SurfacePoint,
        order: usize,
        frame: ChartFrame,
    ) -> Result<PointContext> {
        let chart = make_chart_with(s, p, order, frame)?;
        let family = FieldFamily::new(&chart)?;
        let u = chart.eval(u)?;
        Ok(PointContext { chart, family, u })
    }
}

/// `(XXTu, TTXu)` at the base point.
pub fn xxt_ttx_point(ctx: &PointContext) -> (C64, C64) {
    let x = ctx.family.x(0, 1);
    let t = ctx.family.t(0, 1);
    let xxt = x.apply(&x.apply(&t.apply(&ctx.u))).value();
    let ttx = t.apply(&t.apply(&x.apply(&ctx.u))).value();
    (xxt, ttx)
}

pub fn triple_name(prefix: &str, j: usize, k: usize, l: usize) -> String {
    let (a, b) = if prefix == "X" {
        ("X", "T~")
    } else {
        ("T", "X~")
    };
    format!("{a}_{}{} {b}_{}{}{} u", j + 1, k + 1, j + 1, k + 1, l + 1)
}

/// All `j < k`, `l` distinct from both.
pub fn triples(n: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for j in 0..n {
        for k in j + 1..n {
            for l in (0..n).filter(|&l| l != j && l != k) {
                out.push((j, k, l));
            }
        }
    }
    out
}

/// `X_jk T~_jkl u` for every triple, optionally with `T_jk X~_jkl u`.
pub fn tilde_point(ctx: &PointContext, companion: bool) -> Vec<(String, C64)> {
    let n = ctx.chart.n();
    let mut out = Vec::new();
    for (j, k, l) in triples(n) {
        let main = ctx
            .family
            .x(j, k)
            .apply(&ctx.family.ttilde(j, k, l).apply(&ctx.u));
        out.push((triple_name("X", j, k, l), main.value()));
        if companion {
            let comp = ctx
                .family
                .t(j, k)
                .apply(&ctx.family.xtilde(j, k, l).apply(&ctx.u));
            out.push((
                format!("companion {}", triple_name("T", j, k, l)),
                comp.value(),
            ));
        }
    }
    out
}

fn collect<F>(points: &[SurfacePoint], f: F) -> Vec<PointRecord>
where
    F: Fn(usize, &SurfacePoint) -> Result<PointRecord> + Sync,
{
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            f(i, p).unwrap_or_else(|e| PointRecord::skipped(i, p.z.clone(), e.to_string()))
        })
        .collect()
}

pub fn xxt_ttx_residuals(
    s: &Surface,
    u: &Expr,
    points: &[SurfacePoint],
    opts: &RunOptions,
) -> Result<ResidualReport> {
    if s.n() != 2 {
        return Err(Error::Dimension {
            requirement: "n = 2",
            n: s.n(),
        });
    }
    check_order(opts.order)?;
    u.check_dim(2)?;
    let records = collect(points, |i, p| {
        let ctx = PointContext::new(s, u, p, opts.order, opts.frame)?;
        let (xxt, ttx) = xxt_ttx_point(&ctx);
        let mut rec = PointRecord::new(i, p.z.clone());
        rec.residuals.insert("XXTu".into(), xxt);
        rec.residuals.insert("TTXu".into(), ttx);
        rec.scale = derivative_scale(&ctx.u);
        Ok(rec)
    });
    Ok(ResidualReport::new(
        "xxt-ttx",
        s.label(),
        &u.to_string(),
        opts.seed,
        opts.order,
        records,
        &opts.policy,
    ))
}

/// Tilde-pair residuals at one point, repairing the pair-sum condition by a
/// linear change of coordinates when needed.
pub fn tilde_record(
    s: &Surface,
    u: &Expr,
    index: usize,
    p: &SurfacePoint,
    opts: &RunOptions,
    companion: bool,
) -> Result<PointRecord> {
    let w = dual_map(s, p)?;
    let (margin, _) = star_margin(&p.z, &w);
    let mut rec = PointRecord::new(index, p.z.clone());
    rec.star_margin = Some(margin);
    let ctx = if margin > STAR_REPAIR_TOL {
        rec.repaired = Some(false);
        PointContext::new(s, u, p, opts.order, opts.frame)?
    } else {
        let m = repair_star(s, p, opts.seed.wrapping_add(index as u64))?;
        let moved = s.transformed(&m)?;
        let q = transform_point(&moved, p, &m)?;
        let u2 = transform_function(u, &m)?;
        let w2 = dual_map(&moved, &q)?;
        rec.repaired = Some(true);
        rec.diagnostics
            .insert("repaired_star_margin".into(), star_margin(&q.z, &w2).0);
        rec.diagnostics.insert(
            "repair_condition".into(),
            crate::linalg::condition_number_c(&m),
        );
        PointContext::new(&moved, &u2, &q, opts.order, opts.frame)?
    };
    for (name, value) in tilde_point(&ctx, companion) {
        rec.residuals.insert(name, value);
    }
    rec.scale = derivative_scale(&ctx.u);
    Ok(rec)
}

pub fn tilde_residuals(
    s: &Surface,
    u: &Expr,
    points: &[SurfacePoint],
    opts: &RunOptions,
    check_companion: bool,
) -> Result<ResidualReport> {
    if s.n() < 3 {
        return Err(Error::Dimension {
            requirement: "n > 2",
            n: s.n(),
        });
    }
    check_order(opts.order)?;
    u.check_dim(s.n())?;
    let records = collect(points, |i, p| {
        tilde_record(s, u, i, p, opts, check_companion)
    });
    Ok(ResidualReport::new(
        "tilde-pairs",
        s.label(),
        &u.to_string(),
        opts.seed,
        opts.order,
        records,
        &opts.policy,
    ))
}

/// XXT/TTX residuals for n = 2, tilde-pair residuals otherwise.
pub fn test_decomposition(
    s: &Surface,
    u: &Expr,
    points: &[SurfacePoint],
    opts: &RunOptions,
) -> Result<ResidualReport> {
    if s.n() == 2 {
        xxt_ttx_residuals(s, u, points, opts)
    } else {
        tilde_residuals(s, u, points, opts, true)
    }
}

pub fn lambda_consistency(
    s: &Surface,
    u: &Expr,
    points: &[SurfacePoint],
    opts: &RunOptions,
) -> Result<ResidualReport> {
    check_order(opts.order)?;
    u.check_dim(s.n())?;
    let records = collect(points, |i, p| {
        let ctx = PointContext::new(s, u, p, opts.order, opts.frame)?;
        let frame = FormFrame::new(&ctx.chart)?;
        let fit = lambda_of(&frame, &ctx.family, &ctx.u)?;
        let mut rec = PointRecord::new(i, p.z.clone());
        match (fit.ttx_coefficient, fit.xxt_coefficient) {
            (Some(ttx), Some(xxt)) => {
                rec.residuals
                    .insert("closedness TTXu coefficient".into(), ttx);
                rec.residuals
                    .insert("closedness XXTu coefficient".into(), xxt);
            }
            _ => {
                rec.residuals
                    .insert("lambda-deviation".into(), C64::new(fit.deviation, 0.0));
            }
        }
        rec.lambda = Some(fit.lambda);
        rec.diagnostics.insert("split_condition".into(), {
            let op = frame.split_operator();
            crate::linalg::condition_number_r(&op)
        });
        rec.diagnostics
            .insert("dual_condition".into(), frame.h.dual_condition);
        rec.scale = derivative_scale(&ctx.u);
        Ok(rec)
    });
    Ok(ResidualReport::new(
        "lambda-consistency",
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
    fn decomposable_inputs_in_two_dimensions() {
        let s = Surface::sphere(2).unwrap();
        let pts = sample_points(&s, 20, 3).unwrap();
        for text in ["z1^2 + 3*w2", "conj(z1)"] {
            let r =
                xxt_ttx_residuals(&s, &parse(text).unwrap(), &pts, &RunOptions::default()).unwrap();
            assert_eq!(
                r.classification(),
                Classification::DecomposableConsistent,
                "{text}"
            );
        }
    }

    #[test]
    fn witness_in_two_dimensions() {
        let s = Surface::sphere(2).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let p = SurfacePoint::new(&s, vec![c(r), c(r)]).unwrap();
        let report =
            xxt_ttx_residuals(&s, &parse("z1*w1").unwrap(), &[p], &RunOptions::default()).unwrap();
        assert!((report.values("XXTu")[0] + 1.0).norm() < 1e-9);
        assert!((report.values("TTXu")[0] + 1.0).norm() < 1e-9);
        assert_eq!(report.classification(), Classification::Rejected);
    }

    #[test]
    fn witness_in_three_dimensions() {
        let s = Surface::sphere(3).unwrap();
        let t = 1.0 / 3f64.sqrt();
        let p = SurfacePoint::new(&s, vec![c(t), c(t), c(t)]).unwrap();
        let report = tilde_residuals(
            &s,
            &parse("z1*w1").unwrap(),
            &[p],
            &RunOptions::default(),
            true,
        )
        .unwrap();
        let expected = -(3f64.powf(-1.5));
        assert!((report.values("X_12 T~_123 u")[0] - c(expected)).norm() < 1e-9);
        assert!((report.values("companion T_12 X~_123 u")[0] - c(expected)).norm() < 1e-9);
    }

    #[test]
    fn lambda_of_constant_is_zero() {
        let s = Surface::sphere(3).unwrap();
        let pts = sample_points(&s, 3, 1).unwrap();
        let r = lambda_consistency(&s, &parse("4").unwrap(), &pts, &RunOptions::default()).unwrap();
        for p in &r.points {
            assert_eq!(p.lambda.unwrap().norm(), 0.0);
            assert_eq!(p.max_abs(), 0.0);
        }
    }

    #[test]
    fn order_and_dimension_guards() {
        let s = Surface::sphere(2).unwrap();
        let u = parse("z1").unwrap();
        let opts = RunOptions {
            order: 4,
            ..Default::default()
        };
        assert!(xxt_ttx_residuals(&s, &u, &[], &opts).is_err());
        assert!(tilde_residuals(&s, &u, &[], &RunOptions::default(), false).is_err());
    }
}
