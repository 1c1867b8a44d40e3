use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use zass_core::{
    integrate, integrate_fixed, wave_packet, Cplx, Grid, Problem, ReferenceOracle, StepRecord, Summary, Wave,
    ORACLE_MAX_POINTS,
};

use crate::config::{parse_cell, FileConfig, RunArgs, RunConfig, Stepping};
use crate::error::{CliError, CliResult};

#[derive(Serialize)]
struct StepRow {
    index: usize,
    t: f64,
    h: f64,
    est_local_err: Option<f64>,
    accepted: u8,
    rejections: usize,
    s0: u64,
    s1: u64,
    s2: u64,
    s3: u64,
    lanczos_mv: u64,
}

impl From<&StepRecord> for StepRow {
    fn from(r: &StepRecord) -> Self {
        let c = r.exp_count;
        Self {
            index: r.index,
            t: r.t_start,
            h: r.h,
            est_local_err: r.est_local_err.is_finite().then_some(r.est_local_err),
            accepted: u8::from(r.accepted),
            rejections: r.rejections_before,
            s0: c.s0,
            s1: c.s1,
            s2: c.s2,
            s3: c.s3,
            lanczos_mv: c.lanczos_mv,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SampleRow {
    x: f64,
    re: f64,
    im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunSummary {
    pub problem: String,
    pub epsilon: f64,
    pub grid_points: usize,
    pub scheme: String,
    pub defect: String,
    pub stepping: String,
    pub tol: f64,
    pub t_final: f64,
    pub accepted: usize,
    pub rejected: usize,
    pub forced: usize,
    pub exponentials: u64,
    pub s0: u64,
    pub s1: u64,
    pub s2: u64,
    pub s3: u64,
    pub lanczos_mv: u64,
    pub h_smallest: f64,
    pub h_largest: f64,
    pub initial_norm: f64,
    pub final_norm: f64,
    pub wall_seconds: f64,
    pub global_error: Option<f64>,
}

impl RunSummary {
    fn new(cfg: &RunConfig, s: &Summary, global_error: Option<f64>) -> Self {
        Self {
            problem: cfg.preset.name.to_string(),
            epsilon: cfg.epsilon,
            grid_points: cfg.grid_points,
            scheme: cfg.scheme.to_string(),
            defect: cfg.defect().to_string(),
            stepping: stepping_label(cfg.stepping),
            tol: cfg.controller.tol,
            t_final: s.t_final,
            accepted: s.accepted,
            rejected: s.rejected,
            forced: s.forced,
            exponentials: s.exp.exponentials(),
            s0: s.exp.s0,
            s1: s.exp.s1,
            s2: s.exp.s2,
            s3: s.exp.s3,
            lanczos_mv: s.exp.lanczos_mv,
            h_smallest: s.h_smallest,
            h_largest: s.h_largest,
            initial_norm: s.initial_norm,
            final_norm: s.final_norm,
            wall_seconds: s.wall_time.as_secs_f64(),
            global_error,
        }
    }
}

fn stepping_label(s: Stepping) -> String {
    match s {
        Stepping::Adaptive => "adaptive".into(),
        Stepping::Fixed(h) => format!("fixed:{h}"),
    }
}

fn build(cfg: &RunConfig) -> CliResult<(Problem, Wave)> {
    let grid: Grid = cfg.preset.grid(cfg.grid_points)?;
    let pot = cfg.preset.potential(&grid)?;
    let psi0 = wave_packet(&grid, &cfg.packet)?;
    Ok((Problem::new(grid, pot, cfg.epsilon)?, psi0))
}

fn oracle(problem: &Problem, field: &str) -> CliResult<ReferenceOracle> {
    let m = problem.grid().len();
    if m > ORACLE_MAX_POINTS {
        return Err(CliError::config(
            field,
            format!("the dense reference is limited to {ORACLE_MAX_POINTS} grid points, got {m}"),
        ));
    }
    Ok(ReferenceOracle::new(problem)?)
}

/// Integrates without writing anything; `on_step` sees every attempt.
fn solve(
    cfg: &RunConfig,
    problem: &Problem,
    psi0: &Wave,
    on_step: &mut dyn FnMut(&StepRecord),
) -> CliResult<(Wave, Summary)> {
    let scheme = cfg.scheme_spec();
    let mut sink = |r: &StepRecord| on_step(r);
    let out = match cfg.stepping {
        Stepping::Adaptive => integrate(psi0, cfg.t_final, &scheme, problem, &cfg.controller, &mut sink),
        Stepping::Fixed(h) => integrate_fixed(psi0, cfg.t_final, h, &scheme, problem, &cfg.controller, &mut sink),
    };
    Ok(out?)
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))
}

pub fn write_samples(path: &Path, grid: &Grid, psi: &Wave) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    for (x, z) in grid.points().into_iter().zip(psi.iter()) {
        w.serialize(SampleRow { x, re: z.re, im: z.im })
            .map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_samples(path: &Path) -> CliResult<(Vec<f64>, Wave)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let mut xs = Vec::new();
    let mut vals = Vec::new();
    for row in r.deserialize::<SampleRow>() {
        let row = row.map_err(|e| CliError::io(path, e))?;
        xs.push(row.x);
        vals.push(Cplx::new(row.re, row.im));
    }
    Ok((xs, Wave::from_vec(vals)))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

pub fn run(cfg: &RunConfig) -> CliResult<RunSummary> {
    let (problem, psi0) = build(cfg)?;
    let oracle = if cfg.global_error {
        Some(oracle(&problem, "global_error")?)
    } else {
        None
    };

    let mut steps = csv_writer(&cfg.out_steps)?;
    let mut write_err: Option<csv::Error> = None;
    let result = solve(cfg, &problem, &psi0, &mut |r| {
        if write_err.is_none() {
            if let Err(e) = steps.serialize(StepRow::from(r)) {
                write_err = Some(e);
            }
        }
    });
    // keep the partial trace of a failed run
    let flushed = steps.flush();
    if let Some(e) = write_err {
        return Err(CliError::io(&cfg.out_steps, e));
    }
    flushed.map_err(|e| CliError::io(&cfg.out_steps, e))?;
    let (psi, summary) = result?;

    write_samples(&cfg.out_final, problem.grid(), &psi)?;
    let global_error = match oracle {
        Some(o) => {
            let exact = o.propagate(&psi0, cfg.t_final)?;
            Some(problem.grid().l2_distance(&psi, &exact))
        }
        None => None,
    };
    let out = RunSummary::new(cfg, &summary, global_error);
    write_json(&cfg.out_summary, &out)?;
    info!(
        "{} accepted, {} rejected, {} exponentials in {:.3} s",
        out.accepted, out.rejected, out.exponentials, out.wall_seconds
    );
    Ok(out)
}

/// Writes the dense reference solution and returns its norm.
pub fn reference(cfg: &RunConfig) -> CliResult<f64> {
    let (problem, psi0) = build(cfg)?;
    let psi = oracle(&problem, "grid_points")?.propagate(&psi0, cfg.t_final)?;
    write_samples(&cfg.out_final, problem.grid(), &psi)?;
    Ok(problem.grid().l2_norm(&psi))
}

/// `sqrt(dx)·‖a − b‖₂` of two sample files on the same grid.
pub fn compare(a: &Path, b: &Path) -> CliResult<f64> {
    let (xa, pa) = read_samples(a)?;
    let (xb, pb) = read_samples(b)?;
    if xa.len() != xb.len() {
        return Err(CliError::config(
            "compare",
            format!("grid sizes differ ({} vs {})", xa.len(), xb.len()),
        ));
    }
    if xa.len() < 2 {
        return Err(CliError::config("compare", "need at least two samples"));
    }
    let dx = xa[1] - xa[0];
    let slack = 1e-9 * dx.abs();
    if dx.is_nan() || dx <= 0.0 || xa.iter().zip(&xb).any(|(p, q)| (p - q).abs() > slack) {
        return Err(CliError::config("compare", "sample points differ"));
    }
    let sum: f64 = pa.iter().zip(pb.iter()).map(|(p, q)| (p - q).norm_sqr()).sum();
    Ok((dx * sum).sqrt())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub grid_points: Option<usize>,
    pub scheme: String,
    pub defect: String,
    pub stepping: String,
    pub tol: f64,
    pub global_error: Option<f64>,
    pub accepted: Option<usize>,
    pub rejected: Option<usize>,
    pub exponentials: Option<u64>,
    pub wall_seconds: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub base: RunArgs,
    /// Comma-separated tolerances.
    #[arg(long, value_delimiter = ',')]
    pub tols: Vec<f64>,
    /// Comma-separated `eps` or `eps:M` entries.
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Vec<String>,
    /// Comma-separated defect kinds.
    #[arg(long, value_delimiter = ',')]
    pub defects: Vec<String>,
    /// Comma-separated scheme names.
    #[arg(long, value_delimiter = ',')]
    pub schemes: Vec<String>,
    #[arg(long)]
    pub out_sweep: Option<PathBuf>,
}

struct Cell {
    args: RunArgs,
    epsilon: f64,
    label: (String, String),
}

fn or_file<T: Clone>(flag: &[T], file: &[T]) -> Vec<Option<T>> {
    let v = if flag.is_empty() { file } else { flag };
    if v.is_empty() {
        vec![None]
    } else {
        v.iter().cloned().map(Some).collect()
    }
}

fn sweep_cells(args: &SweepArgs, file: &FileConfig) -> CliResult<Vec<Cell>> {
    let sf = file.sweep.clone().unwrap_or_default();
    let eps = or_file(&args.epsilons, &sf.epsilons)
        .into_iter()
        .map(|e| e.map(|e| parse_cell(&e)).transpose())
        .collect::<CliResult<Vec<_>>>()?;
    let mut cells = Vec::new();
    for e in &eps {
        for scheme in or_file(&args.schemes, &sf.schemes) {
            for defect in or_file(&args.defects, &sf.defects) {
                for tol in or_file(&args.tols, &sf.tols) {
                    let mut a = args.base.clone();
                    a.config = None;
                    if let Some((eps, m)) = *e {
                        a.epsilon = Some(eps);
                        a.grid_points = m.or(a.grid_points);
                    }
                    a.scheme = scheme.clone().or(a.scheme);
                    a.defect = defect.clone().or(a.defect);
                    a.tol = tol.or(a.tol);
                    a.global_error = false;
                    let epsilon = a.epsilon.or(file.epsilon).unwrap_or(1e-2);
                    let label = (
                        a.scheme.clone().or(file.scheme.clone()).unwrap_or_default(),
                        a.defect.clone().or(file.defect.clone()).unwrap_or_default(),
                    );
                    cells.push(Cell { args: a, epsilon, label });
                }
            }
        }
    }
    Ok(cells)
}

fn run_cell(cell: &Cell, file: &FileConfig) -> SweepRow {
    let mut row = SweepRow {
        epsilon: cell.epsilon,
        grid_points: None,
        scheme: cell.label.0.clone(),
        defect: cell.label.1.clone(),
        stepping: String::new(),
        tol: cell.args.tol.or(file.tol).unwrap_or(f64::NAN),
        global_error: None,
        accepted: None,
        rejected: None,
        exponentials: None,
        wall_seconds: None,
        status: "ok".into(),
    };
    let cfg = match cell.args.resolve(file, false) {
        Ok(c) => c,
        Err(e) => {
            row.status = e.to_string();
            return row;
        }
    };
    row.grid_points = Some(cfg.grid_points);
    row.scheme = cfg.scheme.to_string();
    row.defect = cfg.defect().to_string();
    row.stepping = stepping_label(cfg.stepping);
    row.tol = cfg.controller.tol;

    let started = Instant::now();
    let outcome = build(&cfg).and_then(|(problem, psi0)| {
        let (psi, summary) = solve(&cfg, &problem, &psi0, &mut |_| {})?;
        let err = if cfg.grid_points <= ORACLE_MAX_POINTS {
            let exact = ReferenceOracle::new(&problem)?.propagate(&psi0, cfg.t_final)?;
            Some(problem.grid().l2_distance(&psi, &exact))
        } else {
            None
        };
        Ok((summary, err))
    });
    row.wall_seconds = Some(started.elapsed().as_secs_f64());
    match outcome {
        Ok((s, err)) => {
            row.global_error = err;
            row.accepted = Some(s.accepted);
            row.rejected = Some(s.rejected);
            row.exponentials = Some(s.exp.exponentials());
        }
        Err(e) => row.status = e.to_string(),
    }
    row
}

fn thread_cap() -> CliResult<Option<usize>> {
    match std::env::var("ZASS_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::config("ZASS_THREADS", format!("expected a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs every cell of the sweep and writes one row per cell.
pub fn sweep(args: &SweepArgs) -> CliResult<Vec<SweepRow>> {
    let file = args.base.file()?;
    let cells = sweep_cells(args, &file)?;
    let out = args
        .out_sweep
        .clone()
        .or(file.sweep.as_ref().and_then(|s| s.out_sweep.clone()))
        .unwrap_or_else(|| PathBuf::from("sweep.csv"));

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::config("ZASS_THREADS", e))?;
    let rows: Vec<SweepRow> = pool.install(|| cells.par_iter().map(|c| run_cell(c, &file)).collect());

    let mut w = csv_writer(&out)?;
    for r in &rows {
        w.serialize(r).map_err(|e| CliError::io(&out, e))?;
    }
    w.flush().map_err(|e| CliError::io(&out, e))?;
    Ok(rows)
}
