//! Reference solutions and the benchmark harness.

pub mod exact;
pub mod fd;
pub mod metrics;
pub mod plate;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cdiff::C64;
use crate::error::{Error, Result};
use crate::expr::ScalarFn;
use crate::geometry::{polygon, rectangle, BoundaryCondition, BoundaryCurve, Curve, Domain, Hole};
use crate::nets::{rng_for, Arch};
use crate::representations::{Particular, ProblemKind, ProblemSpec, Regime};
use crate::train::{fit, streams, FitReport, Model, ModelSpec, RadConfig, TrainConfig};

use fd::{fd_helmholtz_solve, fd_poisson_solve, GridSolution, Stencil};
use metrics::relative_l2_at;
use plate::PlateOracle;

pub const BENCHMARKS: &[&str] = &[
    "manufactured-laplace",
    "lshape-poisson",
    "helmholtz-square",
    "lame-annulus",
    "plate-hole",
];

/// Monte Carlo points for the relative L2 metric.
pub const DEFAULT_N_MC: usize = 10_000;

/// Wave number of a 1 kHz tone in air.
pub fn helmholtz_square_beta() -> f64 {
    2.0 * PI * 1000.0 / 343.0
}

/// Settings a caller may change without editing a benchmark definition.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_train: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rad: Option<RadConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_mc: Option<usize>,
}

/// A fully specified benchmark run.
#[derive(Debug, Clone)]
pub struct BenchCase {
    pub name: String,
    pub problem: ProblemSpec,
    pub domain: Domain,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub seed: u64,
    pub n_mc: usize,
    /// Disc `(center, radius)` reported separately from the main error.
    pub exclusion: Option<(C64, f64)>,
}

impl BenchCase {
    pub fn field_names(&self) -> Vec<&'static str> {
        field_names(&self.problem)
    }
}

pub fn field_names(problem: &ProblemSpec) -> Vec<&'static str> {
    if problem.kind.is_scalar() {
        vec!["u"]
    } else {
        vec!["sxx", "syy", "sxy"]
    }
}

/// Compared fields of a trained model: `u` for scalar problems, stresses otherwise.
pub fn model_fields(model: &Model, z: C64) -> Result<Vec<f64>> {
    if model.problem.kind.is_scalar() {
        Ok(vec![model.scalar(z)?])
    } else {
        Ok(model.stress(z)?.to_vec())
    }
}

fn dirichlet(v: f64) -> BoundaryCondition {
    BoundaryCondition::dirichlet(ScalarFn::constant(v))
}

fn free() -> BoundaryCondition {
    BoundaryCondition::traction(ScalarFn::constant(0.0), ScalarFn::constant(0.0))
}

fn kan(widths: &[usize], degree: usize) -> Arch {
    Arch::Kan {
        widths: widths.to_vec(),
        degree,
    }
}

pub fn lshape_domain() -> Result<Domain> {
    let v = [
        C64::new(-1.0, -1.0),
        C64::new(1.0, -1.0),
        C64::new(1.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 1.0),
        C64::new(-1.0, 1.0),
    ];
    Domain::new(polygon(&v, &dirichlet(0.0)), vec![])
}

pub fn helmholtz_square_domain() -> Result<Domain> {
    let bc = dirichlet(1.0);
    Domain::new(
        rectangle(C64::new(-0.75, -0.75), C64::new(0.75, 0.75), [bc.clone(), bc.clone(), bc.clone(), bc]),
        vec![],
    )
}

pub const LAME_A: f64 = 1.0;
pub const LAME_B: f64 = 2.0;
pub const LAME_P: f64 = 1.0;

pub fn lame_domain() -> Result<Domain> {
    let outer = vec![BoundaryCurve::new(Curve::circle(C64::new(0.0, 0.0), LAME_B, true), free())];
    // traction -p n with n = -z/|z| on the bore
    let pressure = BoundaryCondition::traction(
        ScalarFn::native("p x/r", |z| LAME_P * z.re / z.norm()),
        ScalarFn::native("p y/r", |z| LAME_P * z.im / z.norm()),
    );
    let hole = Hole {
        curves: vec![BoundaryCurve::new(Curve::circle(C64::new(0.0, 0.0), LAME_A, false), pressure)],
        center: C64::new(0.0, 0.0),
    };
    Domain::new(outer, vec![hole])
}

pub const PLATE_HALF: f64 = 2.5;
pub const PLATE_RADIUS: f64 = 1.0;

pub fn plate_domain() -> Result<Domain> {
    let pull_right = BoundaryCondition::traction(ScalarFn::constant(1.0), ScalarFn::constant(0.0));
    let pull_left = BoundaryCondition::traction(ScalarFn::constant(-1.0), ScalarFn::constant(0.0));
    let l = PLATE_HALF;
    let outer = rectangle(C64::new(-l, -l), C64::new(l, l), [free(), pull_right, free(), pull_left]);
    let hole = Hole {
        curves: vec![BoundaryCurve::new(Curve::circle(C64::new(0.0, 0.0), PLATE_RADIUS, false), free())],
        center: C64::new(0.0, 0.0),
    };
    Domain::new(outer, vec![hole])
}

/// Benchmark definition with overrides applied.
pub fn benchmark_case(name: &str, o: &BenchOverrides) -> Result<BenchCase> {
    let mut case = match name {
        "manufactured-laplace" => {
            let g = ScalarFn::Expr(crate::expr::Expr::parse("x^3 - 3*x*y^2")?);
            let outer = vec![BoundaryCurve::new(
                Curve::circle(C64::new(0.0, 0.0), 1.0, true),
                BoundaryCondition::dirichlet(g),
            )];
            BenchCase {
                name: name.into(),
                problem: ProblemSpec::new(ProblemKind::Laplace, Particular::None)?,
                domain: Domain::new(outer, vec![])?,
                model: ModelSpec {
                    arch: kan(&[1, 10, 10, 1], 4),
                    hole_arch: None,
                },
                train: TrainConfig::new(1500, 1e-2, 200),
                seed: 0,
                n_mc: DEFAULT_N_MC,
                exclusion: None,
            }
        }
        "lshape-poisson" => BenchCase {
            name: name.into(),
            problem: ProblemSpec::new(ProblemKind::Laplace, Particular::Poisson { f: 1.0 })?,
            domain: lshape_domain()?,
            model: ModelSpec {
                arch: kan(&[1, 10, 10, 10, 10, 10, 1], 5),
                hole_arch: None,
            },
            train: TrainConfig::new(2000, 5e-3, 800),
            seed: 0,
            n_mc: DEFAULT_N_MC,
            exclusion: Some((C64::new(0.0, 0.0), 0.02)),
        },
        "helmholtz-square" => BenchCase {
            name: name.into(),
            problem: ProblemSpec::new(ProblemKind::helmholtz(helmholtz_square_beta(), 20)?, Particular::None)?,
            domain: helmholtz_square_domain()?,
            model: ModelSpec {
                arch: kan(&[1, 10, 10, 1], 4),
                hole_arch: None,
            },
            train: TrainConfig::new(1500, 1e-2, 600),
            seed: 0,
            n_mc: DEFAULT_N_MC,
            exclusion: None,
        },
        "lame-annulus" => BenchCase {
            name: name.into(),
            problem: ProblemSpec::new(
                ProblemKind::elasticity(1.0, 1.0, Regime::PlaneStrain)?,
                Particular::None,
            )?,
            domain: lame_domain()?,
            model: ModelSpec {
                arch: kan(&[1, 7, 7, 1], 4),
                hole_arch: Some(kan(&[1, 7, 7, 1], 4)),
            },
            train: TrainConfig::new(2000, 1e-2, 400),
            seed: 0,
            n_mc: DEFAULT_N_MC,
            exclusion: None,
        },
        "plate-hole" => BenchCase {
            name: name.into(),
            problem: ProblemSpec::new(
                ProblemKind::elasticity(1.0, 1.0, Regime::PlaneStress)?,
                Particular::None,
            )?,
            domain: plate_domain()?,
            model: ModelSpec {
                arch: kan(&[1, 7, 7, 1], 4),
                hole_arch: Some(kan(&[1, 7, 7, 1], 4)),
            },
            train: TrainConfig {
                // Ten-fold decay over the run; a constant rate leaves Adam on a loss spike.
                lr_decay: 0.1f64.powf(1.0 / 4000.0),
                ..TrainConfig::new(4000, 1e-2, 600)
            },
            seed: 0,
            n_mc: DEFAULT_N_MC,
            exclusion: None,
        },
        _ => {
            return Err(Error::config(
                "benchmark",
                format!("unknown benchmark `{name}`; registered: {}", BENCHMARKS.join(", ")),
            ))
        }
    };
    if let Some(s) = o.seed {
        case.seed = s;
    }
    if let Some(e) = o.epochs {
        case.train.epochs = e;
    }
    if let Some(n) = o.n_train {
        case.train.n_train = n;
    }
    if let Some(lr) = o.lr {
        case.train.lr = lr;
    }
    if let Some(d) = o.lr_decay {
        case.train.lr_decay = d;
    }
    if let Some(t) = o.threads {
        case.train.threads = t;
    }
    if let Some(r) = &o.rad {
        case.train.rad = Some(r.clone());
    }
    if let Some(n) = o.n_mc {
        case.n_mc = n;
    }
    case.train.validate()?;
    Ok(case)
}

/// Reference field evaluator of a benchmark.
pub enum Reference {
    Closed(fn(C64) -> Result<Vec<f64>>),
    Grid(GridSolution),
    Plate(PlateOracle),
}

impl Reference {
    pub fn eval(&self, z: C64) -> Result<Vec<f64>> {
        match self {
            Reference::Closed(f) => f(z),
            Reference::Grid(g) => Ok(vec![g.interpolate(z)?]),
            Reference::Plate(p) => Ok(p.stress(z)?.to_vec()),
        }
    }
}

/// Grid spacing of the L-shape oracle.
pub const LSHAPE_ORACLE_H: f64 = 2e-3;
/// Cells per side of the Helmholtz oracle.
pub const HELMHOLTZ_ORACLE_CELLS: usize = 600;
pub const PLATE_ORACLE_TERMS: usize = 30;

pub fn reference_for(name: &str) -> Result<Reference> {
    match name {
        "manufactured-laplace" => Ok(Reference::Closed(|z| Ok(vec![z.re.powi(3) - 3.0 * z.re * z.im * z.im]))),
        "lshape-poisson" => Ok(Reference::Grid(fd_poisson_solve(
            &lshape_domain()?,
            LSHAPE_ORACLE_H,
            |_| 1.0,
            |_| 0.0,
        )?)),
        "helmholtz-square" => Ok(Reference::Grid(fd_helmholtz_solve(
            &helmholtz_square_domain()?,
            1.5 / HELMHOLTZ_ORACLE_CELLS as f64,
            helmholtz_square_beta(),
            |_| 1.0,
            Stencil::Compact,
        )?)),
        "lame-annulus" => Ok(Reference::Closed(|z| {
            Ok(exact::lame_annulus_exact(LAME_A, LAME_B, LAME_P, z)?.to_vec())
        })),
        "plate-hole" => Ok(Reference::Plate(PlateOracle::fit(
            PLATE_HALF,
            PLATE_RADIUS,
            PLATE_ORACLE_TERMS,
            400.0,
        )?)),
        _ => Err(Error::config(
            "benchmark",
            format!("unknown benchmark `{name}`; registered: {}", BENCHMARKS.join(", ")),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub benchmark: String,
    /// Relative L2 error per field.
    pub errors: BTreeMap<String, f64>,
    /// Errors inside the excluded disc, when the benchmark has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excluded_region_errors: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
    pub train_seconds: f64,
    pub oracle_seconds: f64,
    pub n_params: usize,
    pub final_train_loss: f64,
    pub final_test_loss: Option<f64>,
    pub seed: u64,
    pub settings: serde_json::Value,
}

pub struct BenchOutcome {
    pub report: ErrorReport,
    pub model: Model,
    pub fit: FitReport,
}

/// Mean `sxx` along the loaded edges of the plate.
pub fn plate_far_field(model: &Model, n: usize) -> Result<f64> {
    let mut s = 0.0;
    for i in 0..n {
        let y = -PLATE_HALF + 2.0 * PLATE_HALF * (i as f64 + 0.5) / n as f64;
        s += model.stress(C64::new(PLATE_HALF, y))?[0] + model.stress(C64::new(-PLATE_HALF, y))?[0];
    }
    Ok(s / (2 * n) as f64)
}

fn to_map(names: &[&str], values: &[f64]) -> BTreeMap<String, f64> {
    names.iter().map(|n| n.to_string()).zip(values.iter().copied()).collect()
}

/// Trains the case and compares it with `reference`.
pub fn run_case(case: &BenchCase, reference: &Reference, oracle_seconds: f64) -> Result<BenchOutcome> {
    let mut model = Model::new(case.problem.clone(), &case.domain, &case.model, case.seed, case.train.n_train)?;
    let start = Instant::now();
    let fit_report = fit(&mut model, &case.domain, &case.train, case.seed, &mut |_, _| Ok(()))?;
    let train_seconds = start.elapsed().as_secs_f64();

    let points = case.domain.sample_interior(case.n_mc, &mut rng_for(case.seed, streams::EVAL))?;
    let (kept, excluded): (Vec<C64>, Vec<C64>) = match case.exclusion {
        Some((c, r)) => points.iter().partition(|z| (**z - c).norm() >= r),
        None => (points, Vec::new()),
    };
    let names = case.field_names();
    let errors = relative_l2_at(&kept, |z| model_fields(&model, z), |z| reference.eval(z))?;
    let excluded_region_errors = if case.exclusion.is_some() && !excluded.is_empty() {
        Some(to_map(
            &names,
            &relative_l2_at(&excluded, |z| model_fields(&model, z), |z| reference.eval(z))?,
        ))
    } else {
        None
    };
    let mut extra = BTreeMap::new();
    if case.name == "plate-hole" {
        extra.insert("far_field_sxx".into(), plate_far_field(&model, 200)?);
    }
    if let Reference::Plate(p) = reference {
        extra.insert("oracle_traction_rms".into(), p.residual_rms);
    }
    let settings = serde_json::json!({
        "model": case.model,
        "train": case.train,
        "n_mc": case.n_mc,
    });
    let last = fit_report.history.last();
    let report = ErrorReport {
        benchmark: case.name.clone(),
        errors: to_map(&names, &errors),
        excluded_region_errors,
        extra,
        train_seconds,
        oracle_seconds,
        n_params: model.n_real(),
        final_train_loss: last.map_or(f64::NAN, |r| r.train_loss),
        final_test_loss: fit_report.history.iter().rev().find_map(|r| r.test_loss),
        seed: case.seed,
        settings,
    };
    Ok(BenchOutcome {
        report,
        model,
        fit: fit_report,
    })
}

pub fn run_benchmark(name: &str, overrides: &BenchOverrides) -> Result<BenchOutcome> {
    let case = benchmark_case(name, overrides)?;
    let start = Instant::now();
    let reference = reference_for(name)?;
    let oracle_seconds = start.elapsed().as_secs_f64();
    run_case(&case, &reference, oracle_seconds)
}

/// CSV of model fields (and reference fields when given) at the nodes of an
/// `n x n` grid over the bounding box that fall inside the domain.
pub fn field_csv(model: &Model, domain: &Domain, n: usize, reference: Option<&Reference>) -> Result<String> {
    if n < 2 {
        return Err(Error::config("outputs.grid", "grid resolution must be at least 2"));
    }
    let names = field_names(&model.problem);
    let mut out = String::from("x,y");
    for f in &names {
        let _ = write!(out, ",{f}");
    }
    if reference.is_some() {
        for f in &names {
            let _ = write!(out, ",ref_{f}");
        }
    }
    out.push('\n');
    let (lo, hi) = domain.bounding_box();
    for j in 0..n {
        for i in 0..n {
            let z = C64::new(
                lo.re + (hi.re - lo.re) * i as f64 / (n - 1) as f64,
                lo.im + (hi.im - lo.im) * j as f64 / (n - 1) as f64,
            );
            if !domain.contains(z) {
                continue;
            }
            let Ok(vals) = model_fields(model, z) else { continue };
            let _ = write!(out, "{},{}", z.re, z.im);
            for v in &vals {
                let _ = write!(out, ",{v}");
            }
            if let Some(r) = reference {
                for v in r.eval(z)? {
                    let _ = write!(out, ",{v}");
                }
            }
            out.push('\n');
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_builds_every_case() {
        for name in BENCHMARKS {
            let case = benchmark_case(name, &BenchOverrides::default()).unwrap();
            assert_eq!(case.name, *name);
        }
        let err = benchmark_case("nope", &BenchOverrides::default()).unwrap_err();
        assert!(err.to_string().contains("lshape-poisson"));
    }

    #[test]
    fn overrides_apply() {
        let o = BenchOverrides {
            seed: Some(7),
            epochs: Some(3),
            ..Default::default()
        };
        let case = benchmark_case("lame-annulus", &o).unwrap();
        assert_eq!((case.seed, case.train.epochs), (7, 3));
    }

    #[test]
    fn lame_oracle_satisfies_boundary_tractions() {
        let domain = lame_domain().unwrap();
        let r = reference_for("lame-annulus").unwrap();
        for i in 0..domain.n_curves() {
            let bc = &domain.curve(i).bc;
            for k in 0..10 {
                let s = domain.curve(i).curve.point(k as f64 / 10.0);
                let n = if s.norm() > 1.5 { s / s.norm() } else { -s / s.norm() };
                let st = r.eval(s).unwrap();
                let t = [st[0] * n.re + st[2] * n.im, st[2] * n.re + st[1] * n.im];
                let crate::geometry::BcSpec::Traction(g) = &bc.spec else { panic!() };
                assert!((t[0] - g[0].eval(s)).abs() < 1e-12 && (t[1] - g[1].eval(s)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn short_run_produces_report() {
        let o = BenchOverrides {
            epochs: Some(5),
            n_train: Some(40),
            n_mc: Some(500),
            ..Default::default()
        };
        let out = run_benchmark("lame-annulus", &o).unwrap();
        assert_eq!(out.report.errors.len(), 3);
        assert!(out.report.errors.values().all(|e| e.is_finite() && *e >= 0.0));
        assert_eq!(out.fit.history.len(), 5);
        let csv = field_csv(&out.model, &lame_domain().unwrap(), 12, None).unwrap();
        assert!(csv.starts_with("x,y,sxx,syy,sxy\n"));
        assert!(csv.lines().count() > 20);
    }
}
