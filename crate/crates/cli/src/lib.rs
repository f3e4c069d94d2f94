//! Command-line front end: argument parsing, command dispatch, report
//! emission and the exit-code contract (0 pass, 2 rejected, 3
//! inconclusive, 1 usage or runtime error).

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use dualcr::decompose::{lambda_consistency, test_decomposition, RunOptions, MIN_ORDER};
use dualcr::expr;
use dualcr::fields::FieldFamily;
use dualcr::forms::{legendre_errors, pairing_table_error, structure_equation_errors, FormFrame};
use dualcr::hypersurface::{check_structure, dual_map, make_chart, Surface};
use dualcr::incidence::{check_incidence, quadric_identities, random_quadric_points};
use dualcr::report::{Classification, DecisionPolicy, ResidualReport};
use dualcr::sampling::sample_points;
use dualcr::sphere_plh::{cross_check, trace_residuals, TraceMode};
use dualcr::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Third,
    Second,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Structural hypotheses, coframe identities and field tables.
    CheckStructure,
    /// Decomposition residuals (by dimension) with lambda diagnostics.
    TestDecomp {
        /// Skip the companion residuals in dimension > 2.
        #[arg(long)]
        no_companion: bool,
    },
    /// Sampled table of the dual map.
    DualMap,
    /// Lift into the incidence quadric and compare fields (n = 2).
    IncidenceCheck,
    /// Pluriharmonic-trace tests on the sphere and the cross-check.
    SpherePlh {
        /// Defaults to second order for n > 2 and third order for n = 2.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "dualcr",
    version,
    about = "Projective dual CR structure checks"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
    /// `sphere:n=<N>`, `ellipsoid:<a1>,...,<aN>` or `poly:<rho>`.
    #[arg(long, global = true)]
    pub surface: Option<String>,
    /// Test function in z, conj(z), w.
    #[arg(long, global = true)]
    pub u: Option<String>,
    /// Defining function; shorthand for `--surface poly:<rho>`.
    #[arg(long, global = true)]
    pub rho: Option<String>,
    /// Ambient dimension for `--rho` and `sphere-plh`.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true, default_value_t = 100)]
    pub points: usize,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = MIN_ORDER)]
    pub order: usize,
    /// Relative acceptance threshold (structure checks: absolute).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Relative rejection threshold.
    #[arg(long, global = true)]
    pub reject_tol: Option<f64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

/// Rendered output of a command together with its exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub output: String,
}

impl RunConfig {
    fn surface(&self) -> Result<Surface> {
        match (&self.surface, &self.rho) {
            (Some(_), Some(_)) => Err(Error::Usage(
                "give either --surface or --rho, not both".into(),
            )),
            (Some(spec), None) => Surface::parse_spec(spec, self.n),
            (None, Some(rho)) => Surface::parse_spec(&format!("poly:{rho}"), self.n),
            (None, None) => match (&self.command, self.n) {
                (Command::SpherePlh { .. }, Some(n)) => Surface::sphere(n),
                _ => Err(Error::Usage("missing --surface".into())),
            },
        }
    }

    fn u(&self, n: usize) -> Result<expr::Expr> {
        let text = self
            .u
            .as_deref()
            .ok_or_else(|| Error::Usage("missing --u".into()))?;
        expr::parse_for_dim(text, n)
    }

    fn options(&self) -> RunOptions {
        let defaults = DecisionPolicy::default();
        RunOptions {
            order: self.order,
            seed: self.seed,
            policy: DecisionPolicy {
                accept: self.tol.unwrap_or(defaults.accept),
                reject: self.reject_tol.unwrap_or(defaults.reject),
            },
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(Error::Usage("--points must be at least 1".into()));
        }
        let third_order = matches!(
            self.command,
            Command::TestDecomp { .. } | Command::SpherePlh { .. }
        );
        if third_order && self.order < MIN_ORDER {
            return Err(Error::OrderTooLow {
                order: self.order,
                needed: MIN_ORDER,
            });
        }
        if self.order < 2 {
            return Err(Error::OrderTooLow {
                order: self.order,
                needed: 2,
            });
        }
        Ok(())
    }
}

fn pair(c: dualcr::C64) -> Value {
    json!([c.re, c.im])
}

fn render(value: &Value) -> String {
    serde_json::to_string_pretty(value).expect("json value serializes")
}

fn check_structure_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let s = cfg.surface()?;
    let tol = cfg.tol.unwrap_or(1e-8);
    let points = sample_points(&s, cfg.points, cfg.seed)?;
    let mut records = Vec::new();
    let mut max_error: f64 = 0.0;
    let mut hypotheses_hold = true;
    let mut star_flagged = 0;
    let mut csv = String::from("index,check,value\n");
    for (i, p) in points.iter().enumerate() {
        let report = check_structure(&s, p);
        hypotheses_hold &= report.passed();
        if !report.star_ok {
            star_flagged += 1;
        }
        let chart = make_chart(&s, p, cfg.order)?;
        let frame = FormFrame::new(&chart)?;
        let family = FieldFamily::new(&chart)?;
        let mut errors = serde_json::Map::new();
        let leg = legendre_errors(&frame, &family);
        for (k, v) in leg.iter().enumerate() {
            errors.insert(format!("legendre_{}", ["a", "b", "c", "d"][k]), json!(v));
        }
        errors.insert("action_tables".into(), json!(family.table_error(&chart)));
        errors.insert("bracket_table".into(), json!(family.bracket_table_error()));
        if s.n() == 2 {
            let [a, b, c] = structure_equation_errors(&frame);
            errors.insert("d_eta_prime".into(), json!(a));
            errors.insert("d_eta_dprime".into(), json!(b));
            errors.insert("d_theta".into(), json!(c));
            errors.insert(
                "pairing_table".into(),
                json!(pairing_table_error(&frame, &family)),
            );
        } else {
            errors.insert(
                "cyclic_relation".into(),
                json!(family.cyclic_relation_error()),
            );
        }
        let j_margin = frame.j_difference_margin();
        hypotheses_hold &= j_margin > 1e-8;
        for (k, v) in &errors {
            let v = v.as_f64().unwrap_or(f64::NAN);
            max_error = max_error.max(v);
            let _ = writeln!(csv, "{i},{k},{v:e}");
        }
        records.push(json!({
            "index": i,
            "z": p.z.iter().map(|c| pair(*c)).collect::<Vec<_>>(),
            "structure": report,
            "j_difference_margin": j_margin,
            "errors": errors,
        }));
    }
    let passed = hypotheses_hold && max_error <= tol;
    let value = json!({
        "test": "check-structure",
        "surface": s.label(),
        "seed": cfg.seed,
        "order": cfg.order,
        "points": records,
        "summary": {
            "max_error": max_error,
            "tolerance": tol,
            "hypotheses_hold": hypotheses_hold,
            "star_flagged_points": star_flagged,
            "passed": passed,
        },
    });
    Ok(Outcome {
        code: if passed { 0 } else { 2 },
        output: match cfg.format {
            Format::Json => render(&value),
            Format::Csv => csv,
        },
    })
}

fn merge_lambda(main: &mut ResidualReport, lambda: &ResidualReport) {
    for (rec, lam) in main.points.iter_mut().zip(&lambda.points) {
        rec.lambda = lam.lambda;
        for (name, v) in &lam.residuals {
            rec.diagnostics.insert(name.clone(), v.norm());
        }
        for (name, v) in &lam.diagnostics {
            rec.diagnostics.insert(name.clone(), *v);
        }
    }
}

fn report_output(report: &ResidualReport, format: Format) -> String {
    match format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    }
}

fn test_decomp_cmd(cfg: &RunConfig, no_companion: bool) -> Result<Outcome> {
    let s = cfg.surface()?;
    let u = cfg.u(s.n())?;
    let opts = cfg.options();
    let points = sample_points(&s, cfg.points, cfg.seed)?;
    let mut report = if s.n() > 2 && no_companion {
        dualcr::decompose::tilde_residuals(&s, &u, &points, &opts, false)?
    } else {
        test_decomposition(&s, &u, &points, &opts)?
    };
    let lambda = lambda_consistency(&s, &u, &points, &opts)?;
    merge_lambda(&mut report, &lambda);
    Ok(Outcome {
        code: report.classification().exit_code(),
        output: report_output(&report, cfg.format),
    })
}

fn dual_map_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let s = cfg.surface()?;
    let points = sample_points(&s, cfg.points, cfg.seed)?;
    let mut rows = Vec::new();
    let mut csv = String::from("index,coord,z_re,z_im,w_re,w_im\n");
    let mut worst: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        let w = dual_map(&s, p)?;
        let legendre: dualcr::C64 = p.z.iter().zip(&w).map(|(a, b)| a * b).sum();
        worst = worst.max((legendre - 1.0).norm());
        for (k, (z, wk)) in p.z.iter().zip(&w).enumerate() {
            let _ = writeln!(
                csv,
                "{i},{},{:e},{:e},{:e},{:e}",
                k + 1,
                z.re,
                z.im,
                wk.re,
                wk.im
            );
        }
        rows.push(json!({
            "index": i,
            "z": p.z.iter().map(|c| pair(*c)).collect::<Vec<_>>(),
            "w": w.iter().map(|c| pair(*c)).collect::<Vec<_>>(),
            "legendre_error": (legendre - 1.0).norm(),
        }));
    }
    let value = json!({
        "test": "dual-map",
        "surface": s.label(),
        "seed": cfg.seed,
        "points": rows,
        "summary": { "max_legendre_error": worst },
    });
    Ok(Outcome {
        code: 0,
        output: match cfg.format {
            Format::Json => render(&value),
            Format::Csv => csv,
        },
    })
}

fn incidence_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let s = cfg.surface()?;
    if s.n() != 2 {
        return Err(Error::Dimension {
            requirement: "n = 2",
            n: s.n(),
        });
    }
    let tol = cfg.tol.unwrap_or(1e-8);
    let points = sample_points(&s, cfg.points, cfg.seed)?;
    let mut rows = Vec::new();
    let mut csv = String::from("index,field,tangential,type_10,angle\n");
    let mut worst: f64 = 0.0;
    let mut min_angle = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let r = check_incidence(&s, p, cfg.order)?;
        worst = worst.max(r.max());
        min_angle = min_angle.min(r.reality_angle);
        for (k, name) in ["X", "T", "Y"].iter().enumerate() {
            let _ = writeln!(
                csv,
                "{i},{name},{:e},{:e},{:e}",
                r.tangential[k], r.type_10[k], r.reality_angle
            );
        }
        rows.push(json!({
            "index": i,
            "z": p.z.iter().map(|c| pair(*c)).collect::<Vec<_>>(),
            "tangential": r.tangential,
            "type_10": r.type_10,
            "reality_angle": r.reality_angle,
            "lift_residual": r.lift_residual,
        }));
    }
    let (bracket_err, tangency_err) = quadric_identities(&random_quadric_points(10, cfg.seed));
    let passed = worst <= tol && min_angle > 1e-6 && bracket_err < 1e-12 && tangency_err < 1e-12;
    let value = json!({
        "test": "incidence-check",
        "surface": s.label(),
        "seed": cfg.seed,
        "order": cfg.order,
        "points": rows,
        "summary": {
            "max_residual": worst,
            "min_reality_angle": min_angle,
            "quadric_bracket_error": bracket_err,
            "quadric_tangency_error": tangency_err,
            "passed": passed,
        },
    });
    Ok(Outcome {
        code: if passed { 0 } else { 2 },
        output: match cfg.format {
            Format::Json => render(&value),
            Format::Csv => csv,
        },
    })
}

fn sphere_plh_cmd(cfg: &RunConfig, mode: Option<Mode>) -> Result<Outcome> {
    let s = cfg.surface()?;
    if !matches!(s.kind(), dualcr::hypersurface::SurfaceKind::Sphere) {
        return Err(Error::Usage("sphere-plh needs the unit sphere".into()));
    }
    let n = s.n();
    let u = cfg.u(n)?;
    let opts = cfg.options();
    let mode = match mode {
        Some(Mode::Third) => TraceMode::ThirdOrder,
        Some(Mode::Second) => TraceMode::SecondOrder,
        None if n > 2 => TraceMode::SecondOrder,
        None => TraceMode::ThirdOrder,
    };
    let points = sample_points(&s, cfg.points, cfg.seed)?;
    let trace = trace_residuals(&u, &points, n, &opts, mode)?;
    // The cross-check compares without coordinate repair, so it runs on
    // the points satisfying the pair-sum condition.
    let usable: Vec<_> = points
        .iter()
        .filter(|p| {
            let w = dual_map(&s, p).expect("sampled points have a dual map");
            dualcr::hypersurface::star_margin(&p.z, &w).0 > dualcr::hypersurface::STAR_REPAIR_TOL
        })
        .cloned()
        .collect();
    let cc = cross_check(&u, &usable, n, &opts)?;
    let agree = cc.summary.max_abs < cfg.tol.unwrap_or(1e-8);
    let mut code = trace.classification().exit_code();
    if !agree {
        code = Classification::Rejected.exit_code();
    }
    let output = match cfg.format {
        Format::Json => render(&json!({
            "test": "sphere-plh",
            "surface": s.label(),
            "u": u.to_string(),
            "seed": cfg.seed,
            "order": cfg.order,
            "pluriharmonic": trace,
            "cross_check": cc,
            "summary": {
                "classification": trace.classification(),
                "cross_check_max_abs": cc.summary.max_abs,
                "pipelines_agree": agree,
            },
        })),
        Format::Csv => trace.to_csv() + &cc.to_csv(),
    };
    Ok(Outcome { code, output })
}

/// Runs a command and renders its report without touching the file system.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    match &cfg.command {
        Command::CheckStructure => check_structure_cmd(cfg),
        Command::TestDecomp { no_companion } => test_decomp_cmd(cfg, *no_companion),
        Command::DualMap => dual_map_cmd(cfg),
        Command::IncidenceCheck => incidence_cmd(cfg),
        Command::SpherePlh { mode } => sphere_plh_cmd(cfg, *mode),
    }
}

/// Runs a command, writes the report to `--out` or standard output, and
/// returns the process exit code.
pub fn run(cfg: &RunConfig) -> i32 {
    match execute(cfg) {
        Ok(outcome) => {
            let written = match &cfg.out {
                Some(path) => std::fs::write(path, &outcome.output),
                None => {
                    println!("{}", outcome.output);
                    Ok(())
                }
            };
            match written {
                Ok(()) => outcome.code,
                Err(e) => {
                    eprintln!("error: cannot write report: {e}");
                    1
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exec(args: &[&str]) -> Result<Outcome> {
        let cfg = RunConfig::try_parse_from(std::iter::once("dualcr").chain(args.iter().copied()))
            .expect("arguments parse");
        execute(&cfg)
    }

    #[test]
    fn lambda_diagnostics_are_merged_into_points() {
        let out = exec(&[
            "test-decomp",
            "--surface",
            "sphere:n=3",
            "--u",
            "z1^2+w2*w3",
            "--points",
            "2",
        ])
        .unwrap();
        assert_eq!(out.code, 0);
        let v: Value = serde_json::from_str(&out.output).unwrap();
        let point = &v["points"][0];
        assert!(point["lambda"].is_array());
        assert!(point["diagnostics"]["lambda-deviation"].as_f64().unwrap() < 1e-8);
    }

    #[test]
    fn rho_shorthand_matches_surface_spec() {
        let a = exec(&[
            "dual-map",
            "--rho",
            "z1*conj(z1)+z2*conj(z2)-1",
            "--points",
            "2",
        ])
        .unwrap();
        let b = exec(&[
            "dual-map",
            "--surface",
            "poly:z1*conj(z1)+z2*conj(z2)-1",
            "--points",
            "2",
        ])
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sphere_command_refuses_other_surfaces() {
        let err = exec(&["sphere-plh", "--surface", "ellipsoid:2,1", "--u", "z1"]);
        assert!(matches!(err, Err(Error::Usage(_))));
    }

    #[test]
    fn tolerance_flags_reach_the_policy() {
        let cfg = RunConfig::try_parse_from([
            "dualcr",
            "test-decomp",
            "--tol",
            "1e-6",
            "--reject-tol",
            "1e-3",
        ])
        .unwrap();
        let policy = cfg.options().policy;
        assert_eq!((policy.accept, policy.reject), (1e-6, 1e-3));
    }
}
