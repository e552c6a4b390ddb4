//! Boundary-only loss, its gradient, Adam and the training loop.
//!
//! The loss is `mean_i sum_d w_d r_d(x_i)^2` over boundary samples. Two
//! gradient routes exist: [`loss_and_grad`] forwards every network once per
//! potential evaluation with hand-written jets, differentiates the small
//! residual expression on a per-point tape and back-propagates by hand;
//! [`reference_loss_and_grad`] records the whole batch on one tape. They share
//! [`boundary_residual`] and the representation code.

mod adam;
mod model;

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cdiff::{Field, Holo, Jet2, Tape, Var, C64, ZERO};
use crate::error::{Error, Result};
use crate::geometry::{rad_resample, BcSpec, BoundaryCondition, BoundarySample, Domain};
use crate::laurent::LaurentTrace;
use crate::nets::rng_for;
use crate::representations::FieldValues;

pub use adam::{AdamState, BETA1, BETA2, EPS};
pub use model::{streams, Model, ModelSpec};

/// Loss above which training is declared diverged.
pub const DIVERGENCE_LOSS: f64 = 1e12;

/// Points per work unit; results do not depend on the thread count because
/// chunk boundaries and the reduction order are fixed.
const CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadConfig {
    /// Epoch at which the training batch is replaced.
    pub switch_epoch: usize,
    #[serde(default = "default_pool")]
    pub pool_size: usize,
    #[serde(default = "one")]
    pub k: f64,
    #[serde(default = "one")]
    pub c: f64,
}

fn default_pool() -> usize {
    10_000
}

fn one() -> f64 {
    1.0
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_test_every() -> usize {
    10
}

fn yes() -> bool {
    true
}

fn default_threads() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Per-epoch multiplicative learning-rate decay.
    #[serde(default = "one")]
    pub lr_decay: f64,
    pub n_train: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_test_every")]
    pub test_every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rad: Option<RadConfig>,
    #[serde(default = "default_threads")]
    pub threads: usize,
    /// Keep hole networks and log coefficients at zero.
    #[serde(default)]
    pub freeze_laurent: bool,
    /// Elasticity: tie log coefficients so displacements stay single-valued.
    #[serde(default = "yes")]
    pub tie_log_coeffs: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<usize>,
}

impl TrainConfig {
    pub fn new(epochs: usize, lr: f64, n_train: usize) -> Self {
        TrainConfig {
            epochs,
            lr,
            lr_decay: 1.0,
            n_train,
            test_fraction: default_test_fraction(),
            test_every: default_test_every(),
            rad: None,
            threads: 1,
            freeze_laurent: false,
            tie_log_coeffs: true,
            checkpoint_every: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, msg: String| Err(Error::config(format!("train.{path}"), msg));
        if self.epochs == 0 {
            return bad("epochs", "must be at least 1".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr", format!("must be finite and non-negative, got {}", self.lr));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay", format!("must lie in (0, 1], got {}", self.lr_decay));
        }
        if self.n_train == 0 {
            return bad("n_train", "must be positive".into());
        }
        if !(0.0..=0.5).contains(&self.test_fraction) {
            return bad("test_fraction", format!("must lie in [0, 0.5], got {}", self.test_fraction));
        }
        if self.test_every == 0 {
            return bad("test_every", "must be positive".into());
        }
        if self.threads == 0 {
            return bad("threads", "must be positive".into());
        }
        if let Some(rad) = &self.rad {
            if rad.switch_epoch == 0 || rad.switch_epoch >= self.epochs {
                return bad("rad.switch_epoch", format!("must lie in [1, epochs), got {}", rad.switch_epoch));
            }
            if rad.pool_size == 0 {
                return bad("rad.pool_size", "must be positive".into());
            }
            if !(rad.k >= 0.0 && rad.c >= 0.0) {
                return bad("rad", "k and c must be non-negative".into());
            }
        }
        Ok(())
    }

    /// Number of held-out points so that exactly `n_train` remain for training.
    pub fn n_test(&self) -> usize {
        let f = self.test_fraction;
        (self.n_train as f64 * f / (1.0 - f)).ceil() as usize
    }
}

/// Residual components of one boundary condition, real-valued `T`.
pub fn boundary_residual<T: Field>(
    bc: &BoundaryCondition,
    sample: &BoundarySample,
    f: &FieldValues<T>,
) -> Result<Vec<T>> {
    let missing = || {
        Error::Contract(format!(
            "a {} condition needs fields the problem does not provide",
            bc.kind_name()
        ))
    };
    let z = sample.z;
    let n = sample.normal;
    let minus = |v: f64| C64::new(-v, 0.0);
    Ok(match &bc.spec {
        BcSpec::Dirichlet(g) => vec![f.u.ok_or_else(missing)?.offset(minus(g.eval(z)))],
        BcSpec::Neumann(g) => {
            let gr = f.grad.ok_or_else(missing)?;
            vec![(gr[0].scaled(C64::new(n.re, 0.0)) + gr[1].scaled(C64::new(n.im, 0.0))).offset(minus(g.eval(z)))]
        }
        BcSpec::Displacement(g) => {
            let d = f.disp.ok_or_else(missing)?;
            vec![d[0].offset(minus(g[0].eval(z))), d[1].offset(minus(g[1].eval(z)))]
        }
        BcSpec::Traction(t) => {
            let s = f.stress.ok_or_else(missing)?;
            let (nx, ny) = (C64::new(n.re, 0.0), C64::new(n.im, 0.0));
            vec![
                (s[0].scaled(nx) + s[2].scaled(ny)).offset(minus(t[0].eval(z))),
                (s[2].scaled(nx) + s[1].scaled(ny)).offset(minus(t[1].eval(z))),
            ]
        }
    })
}

/// Checks that every boundary condition fits the problem kind.
pub fn validate_bcs(model: &Model, domain: &Domain) -> Result<()> {
    let scalar = model.problem.kind.is_scalar();
    for i in 0..domain.n_curves() {
        let bc = &domain.curve(i).bc;
        if bc.is_scalar() != scalar {
            return Err(Error::Config {
                path: format!("domain.curves[{i}].bc"),
                message: format!(
                    "{} condition does not fit the {} problem",
                    bc.kind_name(),
                    model.problem.kind.name()
                ),
            });
        }
    }
    Ok(())
}

/// Plain residual components at one sample.
pub fn residual_values(model: &Model, domain: &Domain, sample: &BoundarySample) -> Result<Vec<f64>> {
    let bc = &domain.curve(sample.curve).bc;
    let f = model.fields(sample.z, bc.demand())?;
    Ok(boundary_residual(bc, sample, &f)?.iter().map(|r| r.re).collect())
}

#[derive(Default)]
struct Scratch {
    tape: Tape,
    traces: Vec<LaurentTrace>,
}

/// Adds `scale * sum_d w_d r_d^2` of one sample to the loss and, when `grads`
/// is given, its surface gradient.
fn point_term(
    model: &Model,
    domain: &Domain,
    sample: &BoundarySample,
    scale: f64,
    scratch: &mut Scratch,
    grads: Option<&mut [Vec<C64>]>,
) -> Result<f64> {
    let bc = &domain.curve(sample.curve).bc;
    let demand = bc.demand();
    let taps = model.problem.taps(sample.z, demand)?;
    let Scratch { tape, traces } = scratch;
    if traces.len() < taps.len() {
        traces.resize_with(taps.len(), LaurentTrace::default);
    }
    let mut jets = Vec::with_capacity(taps.len());
    for (t, trace) in taps.iter().zip(traces.iter_mut()) {
        jets.push(model.potentials[t.potential].forward_jet(t.point, t.order, trace)?);
    }
    tape.clear();
    let tape: &Tape = tape;
    let leaves: Vec<[Var<'_>; 3]> = jets
        .iter()
        .zip(&taps)
        .map(|(j, t)| {
            std::array::from_fn(|m| if m <= t.order { tape.leaf(j[m]) } else { tape.constant(ZERO) })
        })
        .collect();
    let fields = model.problem.evaluate(sample.z, demand, &leaves)?;
    let res = boundary_residual(bc, sample, &fields)?;
    let mut loss = tape.constant(ZERO);
    for (r, w) in res.iter().zip(&bc.weights) {
        loss = loss + (*r * *r).scaled(C64::new(w * scale, 0.0));
    }
    let value = loss.value().re;
    if !value.is_finite() {
        return Err(Error::diverged("loss", format!("non-finite residual at boundary point {}", sample.z)));
    }
    if let Some(grads) = grads {
        let g = tape.backward(loss)?;
        for ((t, trace), leaf) in taps.iter().zip(traces.iter()).zip(&leaves) {
            let mut adj = [ZERO; 3];
            for m in 0..=t.order {
                adj[m] = g.wrt(leaf[m]);
            }
            model.potentials[t.potential].backward_jet(trace, adj, t.order, &mut grads[t.potential]);
        }
    }
    Ok(value)
}

fn chunk_term(
    model: &Model,
    domain: &Domain,
    chunk: &[BoundarySample],
    scale: f64,
    want_grad: bool,
) -> Result<(f64, Option<Vec<Vec<C64>>>)> {
    let mut scratch = Scratch::default();
    let mut grads = want_grad.then(|| model.zero_surfaces());
    let mut loss = 0.0;
    for s in chunk {
        loss += point_term(model, domain, s, scale, &mut scratch, grads.as_deref_mut())?;
    }
    Ok((loss, grads))
}

fn batch_eval(
    model: &Model,
    domain: &Domain,
    batch: &[BoundarySample],
    want_grad: bool,
    pool: Option<&rayon::ThreadPool>,
) -> Result<(f64, Option<Vec<f64>>)> {
    if batch.is_empty() {
        return Err(Error::Contract("empty training batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let run = || -> Vec<Result<(f64, Option<Vec<Vec<C64>>>)>> {
        match pool {
            Some(_) => batch
                .par_chunks(CHUNK)
                .map(|c| chunk_term(model, domain, c, scale, want_grad))
                .collect(),
            None => batch
                .chunks(CHUNK)
                .map(|c| chunk_term(model, domain, c, scale, want_grad))
                .collect(),
        }
    };
    let parts = match pool {
        Some(p) => p.install(run),
        None => run(),
    };
    let mut loss = 0.0;
    let mut total: Option<Vec<Vec<C64>>> = None;
    for part in parts {
        let (l, g) = part?;
        loss += l;
        if let Some(g) = g {
            match total.as_mut() {
                None => total = Some(g),
                Some(t) => {
                    for (tp, gp) in t.iter_mut().zip(g) {
                        for (a, b) in tp.iter_mut().zip(gp) {
                            *a += b;
                        }
                    }
                }
            }
        }
    }
    let grad = total.map(|t| {
        let mut out = Vec::with_capacity(model.n_real());
        for (p, g) in model.potentials.iter().zip(&t) {
            p.surface_to_real(g, &mut out);
        }
        out
    });
    Ok((loss, grad))
}

/// Loss and its gradient over the real parameter view (fast route).
pub fn loss_and_grad(
    model: &Model,
    domain: &Domain,
    batch: &[BoundarySample],
    pool: Option<&rayon::ThreadPool>,
) -> Result<(f64, Vec<f64>)> {
    let (l, g) = batch_eval(model, domain, batch, true, pool)?;
    Ok((l, g.expect("gradient requested")))
}

pub fn loss_value(model: &Model, domain: &Domain, batch: &[BoundarySample], pool: Option<&rayon::ThreadPool>) -> Result<f64> {
    Ok(batch_eval(model, domain, batch, false, pool)?.0)
}

/// Records the batch loss on `tape` with the complex parameter surfaces as
/// tape parameters (one slice per potential).
pub fn tape_loss<'t>(
    model: &Model,
    domain: &Domain,
    batch: &[BoundarySample],
    tape: &'t Tape,
    surfaces: &[Vec<Var<'t>>],
) -> Result<Var<'t>> {
    if batch.is_empty() {
        return Err(Error::Contract("empty training batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut loss = tape.constant(ZERO);
    for sample in batch {
        let bc = &domain.curve(sample.curve).bc;
        let demand = bc.demand();
        let taps = model.problem.taps(sample.z, demand)?;
        let mut jets = Vec::with_capacity(taps.len());
        for t in &taps {
            model.potentials[t.potential].check_point(t.point)?;
            let z = Jet2::seed(tape.constant(t.point));
            let j = model.potentials[t.potential].forward_with(&surfaces[t.potential], z);
            jets.push([j.v, j.d1, j.d2]);
        }
        let fields = model.problem.evaluate(sample.z, demand, &jets)?;
        for (r, w) in boundary_residual(bc, sample, &fields)?.iter().zip(&bc.weights) {
            loss = loss + (*r * *r).scaled(C64::new(w * scale, 0.0));
        }
    }
    tape.check()?;
    Ok(loss)
}

/// Loss and gradient with the whole batch on one tape (reference route).
pub fn reference_loss_and_grad(model: &Model, domain: &Domain, batch: &[BoundarySample]) -> Result<(f64, Vec<f64>)> {
    let tape = Tape::new();
    let surfaces: Vec<Vec<Var<'_>>> = model
        .potentials
        .iter()
        .map(|p| p.surface().into_iter().map(|c| tape.param(c)).collect())
        .collect();
    let loss = tape_loss(model, domain, batch, &tape, &surfaces)?;
    let g = tape.backward(loss)?.params();
    let mut out = Vec::with_capacity(model.n_real());
    let mut off = 0;
    for p in &model.potentials {
        let n = p.n_surface();
        p.surface_to_real(&g[off..off + n], &mut out);
        off += n;
    }
    Ok((loss.value().re, out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub history: Vec<LossRecord>,
    pub seconds: f64,
    /// Batch used in the final epoch.
    pub train_points: Vec<BoundarySample>,
    pub test_points: Vec<BoundarySample>,
    pub adam: AdamState,
}

impl FitReport {
    pub fn final_train_loss(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.train_loss)
    }

    /// Loss sequence used to compare runs for reproducibility.
    pub fn loss_trace(&self) -> Vec<(f64, Option<f64>)> {
        self.history.iter().map(|r| (r.train_loss, r.test_loss)).collect()
    }
}

/// Training and held-out boundary points for a seed: `n_train + n_test`
/// samples, the trailing ones held out.
pub fn sample_train_test(domain: &Domain, cfg: &TrainConfig, seed: u64) -> Result<(Vec<BoundarySample>, Vec<BoundarySample>)> {
    let mut rng = rng_for(seed, streams::TRAIN_POINTS);
    let mut all = domain.sample_uniform(cfg.n_train + cfg.n_test(), &mut rng)?;
    let test = all.split_off(cfg.n_train);
    Ok((all, test))
}

/// Per-dimension absolute residuals over `points`.
pub fn residual_table(model: &Model, domain: &Domain, points: &[BoundarySample]) -> Result<Vec<Vec<f64>>> {
    let dims = if model.problem.kind.is_scalar() { 1 } else { 2 };
    let mut table = vec![Vec::with_capacity(points.len()); dims];
    for s in points {
        let r = residual_values(model, domain, s)?;
        for (d, v) in r.iter().enumerate() {
            table[d].push(v.abs());
        }
    }
    Ok(table)
}

fn diverged(epoch: usize, e: Error) -> Error {
    match e {
        Error::Diverged { primitive, detail } => Error::TrainingDiverged {
            epoch,
            detail: format!("`{primitive}`: {detail}; try a smaller learning rate"),
        },
        other => other,
    }
}

/// Full-batch Adam on the boundary loss, with optional adaptive resampling.
/// `hook` runs after each update at multiples of `checkpoint_every`.
pub fn fit(
    model: &mut Model,
    domain: &Domain,
    cfg: &TrainConfig,
    seed: u64,
    hook: &mut dyn FnMut(usize, &Model) -> Result<()>,
) -> Result<FitReport> {
    cfg.validate()?;
    validate_bcs(model, domain)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Contract(format!("thread pool: {e}")))?;
    let pool = (cfg.threads > 1).then_some(&pool);

    let (mut train, test) = sample_train_test(domain, cfg, seed)?;
    let mut frozen = if cfg.freeze_laurent {
        model.zero_laurent_terms()?;
        Some(model.laurent_mask())
    } else {
        None
    };
    let ties = if cfg.tie_log_coeffs && !cfg.freeze_laurent {
        model.log_ties()
    } else {
        Vec::new()
    };
    let rad_pool = match &cfg.rad {
        Some(r) => Some(domain.build_pool(r.pool_size, &mut rng_for(seed, streams::POOL))?),
        None => None,
    };
    let mut rad_rng = rng_for(seed, streams::RAD);

    let mut params = model.params_real();
    if !ties.is_empty() {
        let mask = frozen.get_or_insert_with(|| vec![false; params.len()]);
        for &(free, tied, factor) in &ties {
            mask[tied] = true;
            params[tied] = factor * params[free];
        }
        model.set_params_real(&params)?;
    }
    let mut adam = AdamState::new(params.len());
    let mut history = Vec::with_capacity(cfg.epochs);
    let start = Instant::now();
    for epoch in 0..cfg.epochs {
        if let (Some(r), Some(points)) = (&cfg.rad, &rad_pool) {
            if epoch == r.switch_epoch {
                let eps = residual_table(model, domain, points).map_err(|e| diverged(epoch, e))?;
                train = rad_resample(points, &eps, cfg.n_train, r.k, r.c, &mut rad_rng)?;
            }
        }
        let (loss, mut grad) = loss_and_grad(model, domain, &train, pool).map_err(|e| diverged(epoch, e))?;
        if !loss.is_finite() || loss > DIVERGENCE_LOSS {
            return Err(Error::TrainingDiverged {
                epoch,
                detail: format!("loss {loss:e} exceeds {DIVERGENCE_LOSS:e}; try a smaller learning rate"),
            });
        }
        let test_loss = if !test.is_empty() && (epoch % cfg.test_every == 0 || epoch + 1 == cfg.epochs) {
            Some(loss_value(model, domain, &test, pool).map_err(|e| diverged(epoch, e))?)
        } else {
            None
        };
        history.push(LossRecord {
            epoch,
            train_loss: loss,
            test_loss,
            seconds: start.elapsed().as_secs_f64(),
        });
        let lr = cfg.lr * cfg.lr_decay.powi(epoch as i32);
        for &(free, tied, factor) in &ties {
            grad[free] += factor * grad[tied];
        }
        adam.step(&mut params, &grad, lr, frozen.as_deref());
        for &(free, tied, factor) in &ties {
            params[tied] = factor * params[free];
        }
        model.set_params_real(&params)?;
        if cfg.checkpoint_every.is_some_and(|k| (epoch + 1) % k == 0) {
            hook(epoch, model)?;
        }
    }
    Ok(FitReport {
        history,
        seconds: start.elapsed().as_secs_f64(),
        train_points: train,
        test_points: test,
        adam,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    /// Relative error of the fast route against central differences, per direction.
    pub rel_errors: Vec<f64>,
    /// Largest relative difference between the fast and tape routes (whole vector).
    pub route_mismatch: f64,
    pub worst: f64,
}

/// Points per tape in the gradient check's reference route.
const REFERENCE_SLICE: usize = 32;

/// Compares directional derivatives of the loss along random unit directions
/// against fourth-order central differences, and the fast gradient against the
/// tape route.
pub fn gradient_check(
    model: &Model,
    domain: &Domain,
    batch: &[BoundarySample],
    n_dirs: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let (_, g) = loss_and_grad(model, domain, batch, None)?;
    // the loss is a batch mean, so per-slice tapes combine linearly and keep memory bounded
    let mut g_ref = vec![0.0; g.len()];
    for part in batch.chunks(REFERENCE_SLICE) {
        let (_, gp) = reference_loss_and_grad(model, domain, part)?;
        let w = part.len() as f64 / batch.len() as f64;
        g_ref.iter_mut().zip(&gp).for_each(|(a, b)| *a += w * b);
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = g.iter().zip(&g_ref).map(|(a, b)| a - b).collect();
    let route_mismatch = norm(&diff) / norm(&g_ref).max(1e-300);

    let theta = model.params_real();
    let mut probe = model.clone();
    let mut rng = rng_for(seed, streams::GRADCHECK);
    let mut rel_errors = Vec::with_capacity(n_dirs);
    for _ in 0..n_dirs {
        let mut d: Vec<f64> = (0..theta.len())
            .map(|_| {
                let (u1, u2): (f64, f64) = (rng.gen::<f64>().max(1e-300), rng.gen());
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        let dn = norm(&d);
        d.iter_mut().for_each(|x| *x /= dn);
        let ad: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        let h = 1e-4;
        let mut at = |t: f64| -> Result<f64> {
            let p: Vec<f64> = theta.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            probe.set_params_real(&p)?;
            loss_value(&probe, domain, batch, None)
        };
        let fd = (8.0 * (at(h)? - at(-h)?) - (at(2.0 * h)? - at(-2.0 * h)?)) / (12.0 * h);
        rel_errors.push((ad - fd).abs() / ad.abs().max(fd.abs()).max(1e-300));
    }
    let worst = rel_errors.iter().copied().fold(route_mismatch, f64::max);
    Ok(GradCheckReport {
        rel_errors,
        route_mismatch,
        worst,
    })
}
