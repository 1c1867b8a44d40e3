//! Run configuration: a JSON document merged with command-line flags
//! (flags win), then validated into a [`RunConfig`].

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;
use zass_core::{
    ControllerConfig, DefectKind, LanczosConfig, PresetName, ProblemPreset, SchemeName, SchemeSpec, WavePacketParams,
};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PacketOverride {
    pub delta: Option<f64>,
    pub x0: Option<f64>,
    pub k0: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    #[serde(default)]
    pub tols: Vec<f64>,
    /// Entries `"eps"` or `"eps:M"`.
    #[serde(default)]
    pub epsilons: Vec<String>,
    #[serde(default)]
    pub defects: Vec<String>,
    #[serde(default)]
    pub schemes: Vec<String>,
    pub out_sweep: Option<PathBuf>,
}

/// Contents of a `--config` file; every key is optional.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub problem: Option<String>,
    pub epsilon: Option<f64>,
    pub grid_points: Option<usize>,
    pub scheme: Option<String>,
    pub defect: Option<String>,
    pub tol: Option<f64>,
    pub alpha: Option<f64>,
    pub h0: Option<f64>,
    pub h_min: Option<f64>,
    pub h_max: Option<f64>,
    pub max_rejections: Option<usize>,
    pub fixed_h: Option<f64>,
    pub t_final: Option<f64>,
    pub out_steps: Option<PathBuf>,
    pub out_final: Option<PathBuf>,
    pub out_summary: Option<PathBuf>,
    pub global_error: Option<bool>,
    pub packet: Option<PacketOverride>,
    pub lanczos_m_max: Option<usize>,
    pub lanczos_tol: Option<f64>,
    pub sweep: Option<SweepFile>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))
    }
}

/// Flags shared by `run`, `reference` and `sweep`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// lattice, morse or free.
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Grid size M (defaults depend on the problem and epsilon).
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// zass6 or zass4.
    #[arg(long)]
    pub scheme: Option<String>,
    /// classical, symmetrized or none.
    #[arg(long)]
    pub defect: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub h0: Option<f64>,
    /// Constant step size instead of adaptive control.
    #[arg(long)]
    pub fixed_h: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub out_steps: Option<PathBuf>,
    #[arg(long)]
    pub out_final: Option<PathBuf>,
    #[arg(long)]
    pub out_summary: Option<PathBuf>,
    /// Also compute the error against the dense reference (small grids).
    #[arg(long)]
    pub global_error: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stepping {
    Adaptive,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub preset: ProblemPreset,
    pub epsilon: f64,
    pub grid_points: usize,
    pub scheme: SchemeName,
    pub stepping: Stepping,
    pub controller: ControllerConfig,
    pub t_final: f64,
    pub packet: WavePacketParams<f64>,
    pub out_steps: PathBuf,
    pub out_final: PathBuf,
    pub out_summary: PathBuf,
    pub global_error: bool,
}

impl RunConfig {
    pub fn scheme_spec(&self) -> SchemeSpec {
        SchemeSpec::by_name(self.scheme)
    }

    pub fn defect(&self) -> DefectKind {
        self.controller.defect_kind
    }
}

fn positive(field: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(field, format!("must be positive, got {v}")))
    }
}

/// Parses `"eps"` or `"eps:M"`.
pub fn parse_cell(entry: &str) -> CliResult<(f64, Option<usize>)> {
    let (e, m) = match entry.split_once(':') {
        Some((e, m)) => (e, Some(m)),
        None => (entry, None),
    };
    let eps: f64 = e
        .trim()
        .parse()
        .map_err(|_| CliError::config("epsilons", format!("cannot parse '{entry}'")))?;
    let m = m
        .map(|m| {
            m.trim()
                .parse::<usize>()
                .map_err(|_| CliError::config("epsilons", format!("cannot parse grid size in '{entry}'")))
        })
        .transpose()?;
    Ok((eps, m))
}

impl RunArgs {
    pub fn file(&self) -> CliResult<FileConfig> {
        match &self.config {
            Some(p) => FileConfig::load(p),
            None => Ok(FileConfig::default()),
        }
    }

    /// Merges flags over `file` and validates. `allow_zero_time` admits
    /// `t_final = 0` (reference only).
    pub fn resolve(&self, file: &FileConfig, allow_zero_time: bool) -> CliResult<RunConfig> {
        let problem = self.problem.clone().or(file.problem.clone()).unwrap_or_else(|| "lattice".into());
        let name: PresetName = problem.parse().map_err(|e| CliError::config("problem", e))?;
        let preset = ProblemPreset::by_name(name);

        let epsilon = positive("epsilon", self.epsilon.or(file.epsilon).unwrap_or(1e-2))?;
        let grid_points = match self.grid_points.or(file.grid_points) {
            Some(m) => m,
            None => preset.default_grid_points(epsilon).ok_or_else(|| {
                CliError::config(
                    "grid_points",
                    format!("no default for {problem} at epsilon = {epsilon}, pass --grid-points"),
                )
            })?,
        };
        if grid_points < 2 || !grid_points.is_multiple_of(2) {
            return Err(CliError::config(
                "grid_points",
                format!("must be even and at least 2, got {grid_points}"),
            ));
        }

        let scheme_name = self.scheme.clone().or(file.scheme.clone()).unwrap_or_else(|| "zass6".into());
        let scheme: SchemeName = scheme_name.parse().map_err(|e| CliError::config("scheme", e))?;
        let spec = SchemeSpec::by_name(scheme);

        let defect_name = self.defect.clone().or(file.defect.clone()).unwrap_or_else(|| "classical".into());
        let defect: DefectKind = defect_name.parse().map_err(|e| CliError::config("defect", e))?;

        let stepping = match self.fixed_h.or(file.fixed_h) {
            Some(h) => Stepping::Fixed(positive("fixed_h", h)?),
            None => Stepping::Adaptive,
        };
        if stepping == Stepping::Adaptive && defect == DefectKind::Off {
            return Err(CliError::config("defect", "adaptive stepping needs classical or symmetrized"));
        }

        let tol = positive("tol", self.tol.or(file.tol).unwrap_or(1e-7))?;
        let mut controller = ControllerConfig::new(tol, spec.order());
        controller.defect_kind = defect;
        if let Some(a) = self.alpha.or(file.alpha) {
            controller.alpha = a;
        }
        if let Some(h0) = self.h0.or(file.h0) {
            controller.h0 = positive("h0", h0)?;
        }
        if let Some(v) = file.h_min {
            controller.h_min = positive("h_min", v)?;
        }
        if let Some(v) = file.h_max {
            controller.h_max = positive("h_max", v)?;
        }
        if let Some(v) = file.max_rejections {
            controller.max_rejections = v;
        }
        let mut lanczos = LanczosConfig::for_step_tolerance(tol);
        if let Some(m) = file.lanczos_m_max {
            lanczos.m_max = m;
        }
        if let Some(t) = file.lanczos_tol {
            lanczos.tol = positive("lanczos_tol", t)?;
        }
        lanczos
            .validate(grid_points)
            .map_err(|e| CliError::config("lanczos_m_max", e))?;
        controller.lanczos = lanczos;
        if stepping == Stepping::Adaptive {
            controller.validate().map_err(|e| CliError::config("controller", e))?;
        } else if !(0.0..1.0).contains(&controller.alpha) {
            return Err(CliError::config("alpha", format!("must lie in [0, 1), got {}", controller.alpha)));
        }

        let t_final = self.t_final.or(file.t_final).unwrap_or(preset.t_final);
        if !(t_final.is_finite() && (t_final > 0.0 || (allow_zero_time && t_final == 0.0))) {
            return Err(CliError::config("t_final", format!("must be positive, got {t_final}")));
        }

        let mut packet = preset.packet(epsilon);
        if let Some(o) = file.packet {
            packet.delta = o.delta.unwrap_or(packet.delta);
            packet.x0 = o.x0.unwrap_or(packet.x0);
            packet.k0 = o.k0.unwrap_or(packet.k0);
        }
        positive("packet.delta", packet.delta)?;

        let path = |flag: &Option<PathBuf>, from_file: &Option<PathBuf>, default: &str| {
            flag.clone().or(from_file.clone()).unwrap_or_else(|| PathBuf::from(default))
        };
        Ok(RunConfig {
            preset,
            epsilon,
            grid_points,
            scheme,
            stepping,
            controller,
            t_final,
            packet,
            out_steps: path(&self.out_steps, &file.out_steps, "steps.csv"),
            out_final: path(&self.out_final, &file.out_final, "final.csv"),
            out_summary: path(&self.out_summary, &file.out_summary, "summary.json"),
            global_error: self.global_error || file.global_error.unwrap_or(false),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_preset() {
        let cfg = RunArgs::default().resolve(&FileConfig::default(), false).unwrap();
        assert_eq!(cfg.preset.name, PresetName::Lattice);
        assert_eq!(cfg.grid_points, 750);
        assert_eq!(cfg.t_final, 1.0);
        assert_eq!(cfg.stepping, Stepping::Adaptive);
        assert_eq!(cfg.controller.lanczos.tol, 1e-7 / 100.0);
        assert_eq!(cfg.out_steps, PathBuf::from("steps.csv"));
    }

    #[test]
    fn flags_override_file() {
        let file: FileConfig = serde_json::from_str(
            r#"{"problem": "morse", "epsilon": 0.01, "tol": 1e-6, "scheme": "zass4", "packet": {"x0": 5.0}}"#,
        )
        .unwrap();
        let args = RunArgs {
            tol: Some(1e-8),
            ..RunArgs::default()
        };
        let cfg = args.resolve(&file, false).unwrap();
        assert_eq!(cfg.preset.name, PresetName::Morse);
        assert_eq!(cfg.controller.tol, 1e-8);
        assert_eq!(cfg.scheme, SchemeName::Zass4);
        assert_eq!(cfg.grid_points, 500);
        assert_eq!((cfg.packet.x0, cfg.packet.delta), (5.0, 0.01));
    }

    #[test]
    fn errors_name_the_field() {
        let file = FileConfig::default();
        let bad = |args: RunArgs| args.resolve(&file, false).unwrap_err().to_string();
        assert!(bad(RunArgs { epsilon: Some(-1.0), ..Default::default() }).contains("epsilon"));
        assert!(bad(RunArgs { grid_points: Some(75), ..Default::default() }).contains("grid_points"));
        assert!(bad(RunArgs { epsilon: Some(0.5), ..Default::default() }).contains("grid_points"));
        assert!(bad(RunArgs { scheme: Some("rk4".into()), ..Default::default() }).contains("scheme"));
        assert!(bad(RunArgs { defect: Some("none".into()), ..Default::default() }).contains("defect"));
        assert!(bad(RunArgs { t_final: Some(0.0), ..Default::default() }).contains("t_final"));
        let unknown = serde_json::from_str::<FileConfig>(r#"{"epsilonn": 1}"#).unwrap_err();
        assert!(unknown.to_string().contains("epsilonn"));
    }

    #[test]
    fn zero_time_only_for_reference() {
        let args = RunArgs { t_final: Some(0.0), ..Default::default() };
        assert!(args.resolve(&FileConfig::default(), true).is_ok());
    }

    #[test]
    fn cells() {
        assert_eq!(parse_cell("1e-2").unwrap(), (1e-2, None));
        assert_eq!(parse_cell("1e-3:256").unwrap(), (1e-3, Some(256)));
        assert!(parse_cell("x").is_err());
        assert!(parse_cell("1e-2:q").is_err());
    }
}
