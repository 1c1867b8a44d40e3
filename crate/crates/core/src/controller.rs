//! Defect-based local error control and the integration loop.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::expo::{ExpCounter, LanczosConfig};
use crate::grid::{PeriodicGrid, WaveFunction};
use crate::operators::SemiclassicalProblem;
use crate::scalar::Real;
use crate::stepper::{classical_defect, step, symmetrized_defect, SchemeSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum DefectKind {
    #[default]
    Classical,
    Symmetrized,
    /// No defect and no estimate; fixed stepping only.
    Off,
}

impl fmt::Display for DefectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DefectKind::Classical => "classical",
            DefectKind::Symmetrized => "symmetrized",
            DefectKind::Off => "none",
        })
    }
}

impl FromStr for DefectKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "classical" | "c" => Ok(DefectKind::Classical),
            "symmetrized" | "symmetrised" | "s" => Ok(DefectKind::Symmetrized),
            "none" | "off" => Ok(DefectKind::Off),
            other => Err(Error::InvalidArgument(format!(
                "unknown defect '{other}' (expected classical, symmetrized or none)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControllerConfig {
    pub tol: f64,
    /// Safety factor α in `(1 − α)`.
    pub alpha: f64,
    pub p: u32,
    pub h0: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Consecutive rejections tolerated at one time point.
    pub max_rejections: usize,
    pub defect_kind: DefectKind,
    /// Bound on `h_new / h_old` after an accepted step.
    pub growth_cap: f64,
    pub lanczos: LanczosConfig,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self::new(1e-7, 4)
    }
}

impl ControllerConfig {
    pub fn new(tol: f64, p: u32) -> Self {
        Self {
            tol,
            alpha: 0.1,
            p,
            h0: 1e-9,
            h_min: 1e-12,
            h_max: 1.0,
            max_rejections: 20,
            defect_kind: DefectKind::Classical,
            growth_cap: 5.0,
            lanczos: LanczosConfig::for_step_tolerance(tol),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1), got {}", self.alpha));
        }
        if self.p == 0 {
            return bad("order p must be positive".into());
        }
        if !(self.h_min > 0.0 && self.h_min <= self.h0 && self.h0 <= self.h_max && self.h_max.is_finite()) {
            return bad(format!(
                "need 0 < h_min <= h0 <= h_max, got {} / {} / {}",
                self.h_min, self.h0, self.h_max
            ));
        }
        if self.growth_cap.is_nan() || self.growth_cap <= 1.0 {
            return bad(format!("growth cap must exceed 1, got {}", self.growth_cap));
        }
        Ok(())
    }
}

/// One step attempt.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub index: usize,
    pub t_start: f64,
    pub h: f64,
    /// `‖h/(p+1)·D‖`; infinite when the attempt failed inside Lanczos, NaN
    /// when no defect was computed.
    pub est_local_err: f64,
    pub accepted: bool,
    /// Accepted at `h_min` with the estimate above tolerance.
    pub forced: bool,
    pub rejections_before: usize,
    /// Exponentials spent on this attempt (step and defect).
    pub exp_count: ExpCounter,
    /// L² norm of the attempted state.
    pub norm: f64,
}

/// Consumer of step records, called in order from one producer.
pub trait RecordSink {
    fn record(&mut self, rec: &StepRecord);
}

impl RecordSink for Vec<StepRecord> {
    fn record(&mut self, rec: &StepRecord) {
        self.push(*rec);
    }
}

impl<F: FnMut(&StepRecord)> RecordSink for F {
    fn record(&mut self, rec: &StepRecord) {
        self(rec)
    }
}

/// Discards every record.
#[derive(Clone, Copy, Debug, Default)]
pub struct NullSink;

impl RecordSink for NullSink {
    fn record(&mut self, _: &StepRecord) {}
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub accepted: usize,
    pub rejected: usize,
    pub forced: usize,
    pub t_final: f64,
    pub exp: ExpCounter,
    pub wall_time: Duration,
    pub initial_norm: f64,
    pub final_norm: f64,
    pub h_smallest: f64,
    pub h_largest: f64,
}

/// `‖h/(p+1) · defect‖` in L².
pub fn local_error_estimate<T: Real>(defect: &WaveFunction<T>, h: T, p: u32, grid: &PeriodicGrid<T>) -> T {
    grid.l2_norm(defect) * h.abs() / T::from_usize_lossy(p as usize + 1)
}

/// `(1 − α)·h_old·(tol/est)^{1/(p+1)}` clamped to `[h_min, h_max]`.
pub fn propose_step(h_old: f64, est: f64, cfg: &ControllerConfig) -> f64 {
    if est == 0.0 {
        return cfg.h_max;
    }
    if !est.is_finite() {
        return cfg.h_min;
    }
    let h = (1.0 - cfg.alpha) * h_old * (cfg.tol / est).powf(1.0 / f64::from(cfg.p + 1));
    h.clamp(cfg.h_min, cfg.h_max)
}

struct Attempt<T: Real> {
    psi1: WaveFunction<T>,
    est: f64,
    counter: ExpCounter,
}

fn attempt<T: Real>(
    psi0: &WaveFunction<T>,
    h: f64,
    scheme: &SchemeSpec,
    problem: &SemiclassicalProblem<T>,
    cfg: &ControllerConfig,
) -> Result<Attempt<T>> {
    let ht = T::lit(h);
    let (psi1, mut ws) = step(psi0, ht, scheme, problem, &cfg.lanczos)?;
    let defect = match cfg.defect_kind {
        DefectKind::Classical => classical_defect(&mut ws, ht, scheme, problem, &cfg.lanczos)?,
        DefectKind::Symmetrized => symmetrized_defect(&mut ws, psi0, ht, scheme, problem, &cfg.lanczos)?,
        DefectKind::Off => {
            return Ok(Attempt {
                psi1,
                est: f64::NAN,
                counter: ws.counter,
            })
        }
    };
    let est = local_error_estimate(&defect, ht, cfg.p, problem.grid()).as_f64();
    if !est.is_finite() {
        return Err(Error::NotFinite("local error estimate"));
    }
    Ok(Attempt {
        psi1,
        est,
        counter: ws.counter,
    })
}

struct Tally {
    summary: Summary,
    index: usize,
}

impl Tally {
    fn new(initial_norm: f64) -> Self {
        Self {
            summary: Summary {
                accepted: 0,
                rejected: 0,
                forced: 0,
                t_final: 0.0,
                exp: ExpCounter::default(),
                wall_time: Duration::ZERO,
                initial_norm,
                final_norm: initial_norm,
                h_smallest: f64::INFINITY,
                h_largest: 0.0,
            },
            index: 0,
        }
    }

    fn push(&mut self, rec: StepRecord, sink: &mut dyn RecordSink) {
        let s = &mut self.summary;
        s.exp += rec.exp_count;
        if rec.accepted {
            s.accepted += 1;
            s.forced += usize::from(rec.forced);
            s.h_smallest = s.h_smallest.min(rec.h);
            s.h_largest = s.h_largest.max(rec.h);
        } else {
            s.rejected += 1;
        }
        sink.record(&rec);
        self.index += 1;
    }
}

/// Step size that lands on `t_final`, merging a remainder below `h_min`.
fn clip(h: f64, t: f64, t_final: f64, h_min: f64) -> (f64, bool) {
    let remaining = t_final - t;
    if h >= remaining || remaining - h < h_min {
        (remaining, true)
    } else {
        (h, false)
    }
}

fn check_horizon(t_final: f64) -> Result<()> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_final must be positive, got {t_final}")));
    }
    Ok(())
}

/// Adaptive integration of `ψ₀` over `[0, t_final]`.
///
/// A step is rejected and retried with [`propose_step`] while its estimate
/// exceeds `tol`; a Lanczos failure counts as a rejection and halves `h`.
/// At `h_min` a step is accepted regardless and flagged as forced.
pub fn integrate<T: Real>(
    psi0: &WaveFunction<T>,
    t_final: f64,
    scheme: &SchemeSpec,
    problem: &SemiclassicalProblem<T>,
    cfg: &ControllerConfig,
    sink: &mut dyn RecordSink,
) -> Result<(WaveFunction<T>, Summary)> {
    cfg.validate()?;
    if cfg.defect_kind == DefectKind::Off {
        return Err(Error::InvalidArgument("adaptive stepping needs a defect".into()));
    }
    check_horizon(t_final)?;
    problem.grid().check(psi0)?;
    let started = Instant::now();
    let grid = problem.grid();
    let mut tally = Tally::new(grid.l2_norm(psi0).as_f64());
    let mut psi = psi0.clone();
    let mut t = 0.0_f64;
    let mut h = cfg.h0;
    let mut rejections = 0usize;

    while t < t_final {
        let (h_try, last) = clip(h, t, t_final, cfg.h_min);
        let mut rec = StepRecord {
            index: tally.index,
            t_start: t,
            h: h_try,
            est_local_err: f64::INFINITY,
            accepted: false,
            forced: false,
            rejections_before: rejections,
            exp_count: ExpCounter::default(),
            norm: f64::NAN,
        };
        match attempt(&psi, h_try, scheme, problem, cfg) {
            Ok(a) => {
                rec.est_local_err = a.est;
                rec.exp_count = a.counter;
                rec.norm = grid.l2_norm(&a.psi1).as_f64();
                let at_floor = h_try <= cfg.h_min;
                if a.est <= cfg.tol || at_floor {
                    rec.accepted = true;
                    rec.forced = a.est > cfg.tol;
                    if rec.forced {
                        warn!("step at t = {t:e} forced at h_min with estimate {:e}", a.est);
                    }
                    tally.push(rec, sink);
                    psi = a.psi1;
                    t = if last { t_final } else { t + h_try };
                    rejections = 0;
                    h = propose_step(h_try, a.est, cfg).min(cfg.growth_cap * h_try);
                    continue;
                }
                debug!("reject at t = {t:e}, h = {h_try:e}, est = {:e}", a.est);
                h = propose_step(h_try, a.est, cfg).min(h_try);
            }
            Err(e @ Error::NonConvergence { .. }) => {
                debug!("Lanczos failure at t = {t:e}, h = {h_try:e}: {e}");
                h = (0.5 * h_try).max(cfg.h_min);
            }
            Err(e) => return Err(e),
        }
        tally.push(rec, sink);
        rejections += 1;
        if rejections > cfg.max_rejections {
            return Err(Error::MaxRejections { t, rejections });
        }
    }

    let mut summary = tally.summary;
    summary.t_final = t;
    summary.final_norm = grid.l2_norm(&psi).as_f64();
    summary.wall_time = started.elapsed();
    Ok((psi, summary))
}

/// Constant steps of size `h` (the last one clipped), recording the local
/// error estimate of every step without acting on it
/// ([`DefectKind::Off`] skips the estimate).
pub fn integrate_fixed<T: Real>(
    psi0: &WaveFunction<T>,
    t_final: f64,
    h: f64,
    scheme: &SchemeSpec,
    problem: &SemiclassicalProblem<T>,
    cfg: &ControllerConfig,
    sink: &mut dyn RecordSink,
) -> Result<(WaveFunction<T>, Summary)> {
    check_horizon(t_final)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("fixed step must be positive, got {h}")));
    }
    problem.grid().check(psi0)?;
    let started = Instant::now();
    let grid = problem.grid();
    let mut tally = Tally::new(grid.l2_norm(psi0).as_f64());
    let mut psi = psi0.clone();
    let mut t = 0.0_f64;
    // merge remainders below a tiny fraction of h
    let floor = 1e-9 * h;
    while t < t_final {
        let (h_try, last) = clip(h, t, t_final, floor);
        let a = attempt(&psi, h_try, scheme, problem, cfg)?;
        let rec = StepRecord {
            index: tally.index,
            t_start: t,
            h: h_try,
            est_local_err: a.est,
            accepted: true,
            forced: false,
            rejections_before: 0,
            exp_count: a.counter,
            norm: grid.l2_norm(&a.psi1).as_f64(),
        };
        tally.push(rec, sink);
        psi = a.psi1;
        t = if last { t_final } else { t + h_try };
    }
    let mut summary = tally.summary;
    summary.t_final = t;
    summary.final_norm = grid.l2_norm(&psi).as_f64();
    summary.wall_time = started.elapsed();
    Ok((psi, summary))
}
