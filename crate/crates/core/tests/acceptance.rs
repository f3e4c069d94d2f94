//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (written to file descriptor 2 so it shows without `--nocapture`).

use std::io::Write;

use dualcr::decompose::{
    lambda_consistency, test_decomposition, tilde_point, tilde_record, xxt_ttx_point, PointContext,
    RunOptions,
};
use dualcr::expr::parse;
use dualcr::fields::FieldFamily;
use dualcr::forms::{
    lambda_of, legendre_errors, pairing_table_error, structure_equation_errors, FormFrame,
};
use dualcr::hypersurface::{
    dual_map, make_chart, make_chart_with, repair_star, star_margin, transform_point, ChartFrame,
    Surface, SurfacePoint,
};
use dualcr::incidence::{check_incidence, quadric_identities, random_quadric_points};
use dualcr::report::{Classification, DecisionPolicy, ResidualReport};
use dualcr::sampling::{sample_points, sample_points_with_margin};
use dualcr::sphere_plh::{cross_check, trace_residuals, TraceMode};
use dualcr::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[cfg(unix)]
fn emit(line: &str) {
    use std::os::fd::FromRawFd;
    // Borrow fd 2 without closing it; the test harness only captures the
    // print macros and the std handles.
    let mut raw = std::mem::ManuallyDrop::new(unsafe { std::fs::File::from_raw_fd(2) });
    let _ = raw.write_all(line.as_bytes());
}

#[cfg(not(unix))]
fn emit(line: &str) {
    eprint!("{line}");
}

fn verdict(criterion: u32, title: &str, pass: bool, detail: &str) {
    let line = format!(
        "\nacceptance {criterion:>2} {} {title}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    emit(&line);
    assert!(pass, "{}", line.trim_end());
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn four_surfaces() -> Vec<Surface> {
    [
        "sphere:n=2",
        "sphere:n=3",
        "ellipsoid:2,1",
        "ellipsoid:3,1,0.5",
    ]
    .iter()
    .map(|s| Surface::parse_spec(s, None).unwrap())
    .collect()
}

fn opts() -> RunOptions {
    RunOptions::default()
}

#[test]
fn criterion_01_legendre_identities() {
    let mut worst: f64 = 0.0;
    for s in four_surfaces() {
        for p in sample_points(&s, 100, 1).unwrap() {
            let chart = make_chart(&s, &p, 5).unwrap();
            let frame = FormFrame::new(&chart).unwrap();
            let family = FieldFamily::new(&chart).unwrap();
            for e in legendre_errors(&frame, &family) {
                worst = worst.max(e);
            }
        }
    }
    verdict(
        1,
        "Legendre identities as jets",
        worst < 1e-10,
        &format!("max coefficient error {worst:.3e} (< 1e-10)"),
    );
}

#[test]
fn criterion_02_action_and_bracket_tables() {
    let mut worst: f64 = 0.0;
    for s in four_surfaces() {
        for p in sample_points(&s, 100, 1).unwrap() {
            let chart = make_chart(&s, &p, 5).unwrap();
            let family = FieldFamily::new(&chart).unwrap();
            worst = worst
                .max(family.table_error(&chart))
                .max(family.bracket_table_error());
            if s.n() > 2 {
                worst = worst.max(family.cyclic_relation_error());
            }
        }
    }
    verdict(
        2,
        "field action and bracket tables",
        worst < 1e-8,
        &format!("max residual {worst:.3e} (< 1e-8)"),
    );
}

#[test]
fn criterion_03_structure_equations_and_pairing() {
    let mut worst: f64 = 0.0;
    for spec in ["sphere:n=2", "ellipsoid:2,1"] {
        let s = Surface::parse_spec(spec, None).unwrap();
        for p in sample_points(&s, 50, 3).unwrap() {
            let chart = make_chart(&s, &p, 5).unwrap();
            let frame = FormFrame::new(&chart).unwrap();
            let family = FieldFamily::new(&chart).unwrap();
            for e in structure_equation_errors(&frame) {
                worst = worst.max(e);
            }
            worst = worst.max(pairing_table_error(&frame, &family));
        }
    }
    verdict(
        3,
        "structure equations and pairing table (n = 2)",
        worst < 1e-9,
        &format!("max error {worst:.3e} (< 1e-9)"),
    );
}

#[test]
fn criterion_04_two_dimensional_witness() {
    let u = parse("z1*w1").unwrap();
    let mut worst: f64 = 0.0;
    for spec in ["sphere:n=2", "ellipsoid:2,1"] {
        let s = Surface::parse_spec(spec, None).unwrap();
        for p in sample_points(&s, 50, 4).unwrap() {
            let w = dual_map(&s, &p).unwrap();
            let ctx = PointContext::new(&s, &u, &p, 5, ChartFrame::Normal).unwrap();
            let (xxt, ttx) = xxt_ttx_point(&ctx);
            worst = worst
                .max((xxt + 2.0 * p.z[0] * p.z[1]).norm())
                .max((ttx + 2.0 * w[0] * w[1]).norm());
        }
    }
    verdict(
        4,
        "XXT(z1 w1) = -2 z1 z2, TTX(z1 w1) = -2 w1 w2",
        worst < 1e-8,
        &format!("max deviation {worst:.3e} (< 1e-8)"),
    );
}

#[test]
fn criterion_05_three_dimensional_witness() {
    let s = Surface::sphere(3).unwrap();
    let u = parse("z1*w1").unwrap();
    let value = |ctx: &PointContext, name: &str| {
        tilde_point(ctx, true)
            .into_iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
            .unwrap()
    };
    let mut worst: f64 = 0.0;
    for p in sample_points_with_margin(&s, 50, 5, 1e-6).unwrap() {
        let w = dual_map(&s, &p).unwrap();
        let z = &p.z;
        let ctx = PointContext::new(&s, &u, &p, 5, ChartFrame::Normal).unwrap();
        worst = worst
            .max((value(&ctx, "X_12 T~_123 u") + z[0] * z[1] * w[2]).norm())
            .max((value(&ctx, "companion T_12 X~_123 u") + z[2] * w[0] * w[1]).norm());
    }
    let t = 1.0 / 3f64.sqrt();
    let p = SurfacePoint::new(&s, vec![c(t), c(t), c(t)]).unwrap();
    let ctx = PointContext::new(&s, &u, &p, 5, ChartFrame::Normal).unwrap();
    let at_center = value(&ctx, "X_12 T~_123 u");
    let center_err = (at_center + 3f64.powf(-1.5)).norm();
    verdict(
        5,
        "X_12 T~_123 (z1 w1) = -z1 z2 w3 with companion",
        worst < 1e-8 && center_err < 1e-9,
        &format!(
            "max deviation {worst:.3e} (< 1e-8); at (1,1,1)/sqrt3 value {:.10} (error {center_err:.1e})",
            at_center.re
        ),
    );
}

fn random_coeff(rng: &mut ChaCha8Rng) -> String {
    format!(
        "({:.6}+{:.6}*i)",
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0)
    )
}

/// Random polynomial of degree at most 3 in the variables `var1..varN`.
fn random_poly(rng: &mut ChaCha8Rng, var: &str, n: usize) -> String {
    let mut terms = Vec::new();
    for _ in 0..rng.random_range(1..=4) {
        let degree = rng.random_range(1..=3);
        let monomial: Vec<String> = (0..degree)
            .map(|_| format!("{var}{}", rng.random_range(1..=n)))
            .collect();
        terms.push(format!("{}*{}", random_coeff(rng), monomial.join("*")));
    }
    terms.join("+")
}

#[test]
fn criterion_06_soundness_corpus() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let surfaces = four_surfaces();
    let samples: Vec<Vec<SurfacePoint>> = surfaces
        .iter()
        .map(|s| sample_points(s, 5, 60).unwrap())
        .collect();
    let mut worst_good: f64 = 0.0;
    for i in 0..50 {
        let k = i % surfaces.len();
        let n = surfaces[k].n();
        let text = format!(
            "{} + {}",
            random_poly(&mut rng, "z", n),
            random_poly(&mut rng, "w", n)
        );
        let r =
            test_decomposition(&surfaces[k], &parse(&text).unwrap(), &samples[k], &opts()).unwrap();
        assert_eq!(r.summary.skipped, 0, "{text}");
        worst_good = worst_good.max(r.summary.max_abs / r.summary.scale);
    }
    let mut weakest_bad = f64::INFINITY;
    let mut all_rejected = true;
    for i in 0..10 {
        let k = i % surfaces.len();
        let n = surfaces[k].n();
        let text = format!("z{}*w{}", rng.random_range(1..=n), rng.random_range(1..=n));
        let r =
            test_decomposition(&surfaces[k], &parse(&text).unwrap(), &samples[k], &opts()).unwrap();
        weakest_bad = weakest_bad.min(r.summary.max_abs / r.summary.scale);
        all_rejected &= r.classification() == Classification::Rejected;
    }
    verdict(
        6,
        "soundness corpus",
        worst_good < 1e-7 && weakest_bad > 1e-3 && all_rejected,
        &format!(
            "decomposable max residual/scale {worst_good:.3e} (< 1e-7); products min max-residual/scale {weakest_bad:.3e} (> 1e-3), all rejected: {all_rejected}"
        ),
    );
}

#[test]
fn criterion_07_pair_sum_repair() {
    let s = Surface::sphere(3).unwrap();
    let p = SurfacePoint::new(&s, vec![c(1.0), c(0.0), c(0.0)]).unwrap();
    let w = dual_map(&s, &p).unwrap();
    let (margin, pair) = star_margin(&p.z, &w);
    let flagged = margin == 0.0 && pair == (2, 3);

    let m = repair_star(&s, &p, 7).unwrap();
    let moved = s.transformed(&m).unwrap();
    let q = transform_point(&moved, &p, &m).unwrap();
    let w2 = dual_map(&moved, &q).unwrap();
    let repaired_margin = star_margin(&q.z, &w2).0;

    let norm = (1.0f64 + 2.0 * 0.05 * 0.05).sqrt();
    let near = SurfacePoint::new(&s, vec![c(1.0 / norm), c(0.05 / norm), c(0.05 / norm)]).unwrap();
    let near_w = dual_map(&s, &near).unwrap();
    let near_unflagged = star_margin(&near.z, &near_w).0 > 1e-6;

    let policy = DecisionPolicy::default();
    let mut same = true;
    let mut verdicts = Vec::new();
    // Products such as z1*w1 or z1*w2 have residuals vanishing at (1,0,0) and
    // meet the pointwise condition there, so they are not informative probes.
    for text in [
        "z1^2 + w2*w3",
        "z2^3 + 2*w1",
        "z2*w3",
        "z3*w2 + z1^2",
        "z2*w2 + w1",
    ] {
        let u = parse(text).unwrap();
        let classify = |q: &SurfacePoint| {
            let rec = tilde_record(&s, &u, 0, q, &opts(), true).unwrap();
            let repaired = rec.repaired == Some(true);
            let report = ResidualReport::new("t", s.label(), text, 0, 5, vec![rec], &policy);
            (report.classification(), repaired)
        };
        let (at_p, repaired) = classify(&p);
        let (at_near, _) = classify(&near);
        same &= repaired && at_p == at_near;
        verdicts.push(format!("{text}: {}", at_p.as_str()));
    }
    verdict(
        7,
        "pair-sum flag and repair at (1,0,0)",
        flagged && repaired_margin > 1e-6 && near_unflagged && same,
        &format!(
            "flagged pair {pair:?} margin {margin:.1e}; repaired margin {repaired_margin:.3e}; verdicts match nearby point: {same} [{}]",
            verdicts.join(", ")
        ),
    );
}

#[test]
fn criterion_08_lambda_diagnostics() {
    let mut worst: f64 = 0.0;
    let mut lambda_err: f64 = 0.0;
    for (spec, text) in [
        ("sphere:n=3", "z1^2*z3 + (0.5-i)*w2*w3 + w1^3"),
        ("ellipsoid:3,1,0.5", "z2^3 + z1 + w3^2*w1"),
        ("sphere:n=2", "z1^2 + 3*w2 + w1*w2^2"),
        ("ellipsoid:2,1", "z1*z2^2 + (2+i)*w1^2"),
    ] {
        let s = Surface::parse_spec(spec, None).unwrap();
        let u = parse(text).unwrap();
        let pts = sample_points(&s, 20, 8).unwrap();
        let r = lambda_consistency(&s, &u, &pts, &opts()).unwrap();
        assert_eq!(r.summary.skipped, 0);
        worst = worst.max(r.summary.max_abs / r.summary.scale);
        if s.n() == 2 {
            for (p, rec) in pts.iter().zip(&r.points) {
                let ctx = PointContext::new(&s, &u, p, 5, ChartFrame::Normal).unwrap();
                let xtu = ctx
                    .family
                    .x(0, 1)
                    .apply(&ctx.family.t(0, 1).apply(&ctx.u))
                    .value();
                lambda_err = lambda_err.max((rec.lambda.unwrap() - xtu).norm());
            }
        }
    }
    verdict(
        8,
        "lambda diagnostics",
        worst < 1e-8 && lambda_err < 1e-10,
        &format!("max deviation/scale {worst:.3e} (< 1e-8); |lambda - XTu| {lambda_err:.1e}"),
    );
}

#[test]
fn criterion_09_incidence_manifold() {
    let mut worst: f64 = 0.0;
    let mut min_angle = f64::INFINITY;
    for spec in ["sphere:n=2", "ellipsoid:2,1"] {
        let s = Surface::parse_spec(spec, None).unwrap();
        for p in sample_points(&s, 20, 9).unwrap() {
            let r = check_incidence(&s, &p, 5).unwrap();
            worst = worst.max(r.max());
            min_angle = min_angle.min(r.reality_angle);
        }
    }
    let (bracket, tangency) = quadric_identities(&random_quadric_points(10, 9));
    verdict(
        9,
        "incidence manifold identities",
        worst < 1e-8 && min_angle > 1e-6 && bracket < 1e-12 && tangency < 1e-12,
        &format!(
            "field residual {worst:.3e} (< 1e-8); min angle {min_angle:.3e} (> 1e-6); quadric brackets {bracket:.1e}, tangency {tangency:.1e} (< 1e-12)"
        ),
    );
}

/// Ten decomposable and ten non-decomposable functions on the sphere,
/// written with `conj(z)` so both pipelines read them the same way.
fn sphere_corpus() -> Vec<&'static str> {
    vec![
        "z1",
        "conj(z2)",
        "z1^2 + conj(z3)",
        "z1*z2*z3 + conj(z1)^3",
        "(2-i)*z2^3 + conj(z1)*conj(z2)",
        "z3^2 - 4*conj(z3)^2",
        "z1*z2 + conj(z2)*conj(z3)",
        "i*z1^3 + z2 + conj(z1)",
        "conj(z1)*conj(z2)*conj(z3)",
        "z2*z3^2 + (0.5+i)*conj(z3)^3",
        "z1*conj(z1)",
        "z2*conj(z3)",
        "z1*conj(z1)*z2",
        "z1^2*conj(z2)",
        "z3*conj(z3)^2",
        "z1*conj(z2) + z2*conj(z1)",
        "z1 + z2*conj(z2)",
        "conj(z1)^2*z2*z3",
        "z1*conj(z1) + z2*conj(z2)",
        "z1*conj(z1) - z2*conj(z2)",
    ]
}

#[test]
fn criterion_10_sphere_cross_check() {
    let s = Surface::sphere(3).unwrap();
    let pts = sample_points_with_margin(&s, 10, 10, 1e-6).unwrap();
    let mut agree = 0;
    let mut identity: f64 = 0.0;
    let mut mismatches = Vec::new();
    let corpus = sphere_corpus();
    for text in &corpus {
        let u = parse(text).unwrap();
        let projective = test_decomposition(&s, &u, &pts, &opts()).unwrap();
        let trace = trace_residuals(&u, &pts, 3, &opts(), TraceMode::SecondOrder).unwrap();
        if projective.classification() == trace.classification() {
            agree += 1;
        } else {
            mismatches.push(*text);
        }
        identity = identity.max(cross_check(&u, &pts, 3, &opts()).unwrap().summary.max_abs);
    }
    let s2 = Surface::sphere(2).unwrap();
    let pts2 = sample_points(&s2, 10, 10).unwrap();
    let mut identity2: f64 = 0.0;
    for text in [
        "z1*conj(z1)",
        "z1^2*conj(z2)",
        "z1 + conj(z2)^3",
        "z1*z2*conj(z1)",
    ] {
        let u = parse(text).unwrap();
        identity2 = identity2.max(cross_check(&u, &pts2, 2, &opts()).unwrap().summary.max_abs);
    }
    verdict(
        10,
        "sphere cross-check",
        agree == corpus.len() && identity < 1e-8 && identity2 < 1e-8,
        &format!(
            "verdict agreement {agree}/{} {mismatches:?}; n=3 identity {identity:.3e}, n=2 identity {identity2:.3e} (< 1e-8)",
            corpus.len()
        ),
    );
}

#[test]
fn criterion_11_chart_independence() {
    let mut worst: f64 = 0.0;
    for (spec, text) in [
        ("ellipsoid:3,1,0.5", "z1*w2 + z3^2*w1"),
        ("sphere:n=3", "z1*conj(z1)*z2"),
        ("ellipsoid:2,1", "z1*w1 + z2^3"),
    ] {
        let s = Surface::parse_spec(spec, None).unwrap();
        let u = parse(text).unwrap();
        let p = sample_points_with_margin(&s, 1, 11, 1e-3)
            .unwrap()
            .remove(0);
        let values = |frame: ChartFrame| -> Vec<C64> {
            let ctx = PointContext::new(&s, &u, &p, 5, frame).unwrap();
            let mut v: Vec<C64> = if s.n() == 2 {
                let (a, b) = xxt_ttx_point(&ctx);
                vec![a, b]
            } else {
                tilde_point(&ctx, true)
                    .into_iter()
                    .map(|(_, v)| v)
                    .collect()
            };
            let chart = make_chart_with(&s, &p, 5, frame).unwrap();
            let fit = lambda_of(&FormFrame::new(&chart).unwrap(), &ctx.family, &ctx.u).unwrap();
            v.push(fit.lambda);
            v
        };
        let base = values(ChartFrame::Normal);
        let size = base
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
            .max(1e-300);
        for frame in [ChartFrame::Rotated(11), ChartFrame::Axis] {
            for (a, b) in base.iter().zip(values(frame)) {
                worst = worst.max((a - b).norm() / size);
            }
        }
    }
    verdict(
        11,
        "chart independence",
        worst < 1e-8,
        &format!("max relative difference {worst:.3e} (< 1e-8)"),
    );
}

#[test]
fn criterion_12_determinism() {
    let run = || {
        let s = Surface::parse_spec("ellipsoid:3,1,0.5", None).unwrap();
        let u = parse("z1^2*w3 + conj(z2)").unwrap();
        let pts = sample_points(&s, 12, 12).unwrap();
        let mut o = opts();
        o.seed = 12;
        let a = test_decomposition(&s, &u, &pts, &o).unwrap().to_json();
        let b = lambda_consistency(&s, &u, &pts, &o).unwrap().to_json();
        a + &b
    };
    let first = run();
    let second = run();
    verdict(
        12,
        "determinism",
        first == second,
        &format!("{} bytes, identical: {}", first.len(), first == second),
    );
}
