//! Subcommand bodies. Each writes its tables into an output directory and a
//! manifest describing the run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use modalray_core::dynamics::{RaySettings, RingSource, ShellMode};
use modalray_core::fan::{trace_fan, Execution, MuGrid, RayFan};
use modalray_core::fronts::{extract_front, sample_fields, FrontQuantity, FrontSample, GapReason, Validity};
use modalray_core::hamiltonian::{ConstantDamping, HamiltonianModel};
use modalray_core::modes::{duct_strength, mode_count, VerticalMode};
use serde::Serialize;

use crate::config::{Derivatives, RunConfig};
use crate::error::{CliError, CliResult};
use crate::format::Num;
use crate::svg::{Figure, Series};

pub const TRACE_HEADER: &str =
    "l,alpha,mu1,mu2,tau_nat,tau,x,y,p_tau,p_x,p_y,phase,amplitude,T_diss,det_Ir_fr,validity";
pub const MODES_HEADER: &str = "alpha,mu1,p_tau,w_sq,l,gamma,k,lambda,norm_psi_sq,beta_1,beta_alpha,residual";
pub const RAW_TIME_HEADER: &str = "l,alpha,mu1,mu2,tau_nat,tau,t";
pub const FRONTS_HEADER: &str = "l,alpha,mu1,quantity,level,mu2,tau_nat,tau,x,y,value,amplitude,validity";

pub fn model_for(config: &RunConfig, alpha: f64) -> CliResult<HamiltonianModel> {
    let model = HamiltonianModel::new(config.medium(alpha)?, config.mode.l);
    Ok(if config.mode.lambda_tilde != 0.0 {
        model.with_damping(Arc::new(ConstantDamping(config.mode.lambda_tilde)))
    } else {
        model
    })
}

pub fn source_for(config: &RunConfig, model: &HamiltonianModel) -> RingSource {
    let s = &config.source;
    let mut src = RingSource::new(model.clone(), s.freq0, s.dfreq, s.radius, s.shell_mode.into());
    src.analytic = s.derivatives == Derivatives::Analytic;
    src
}

pub fn grid_for(config: &RunConfig) -> MuGrid {
    MuGrid::new(config.source.mu1.clone(), config.mu2_values())
}

pub fn settings_for(config: &RunConfig) -> RaySettings {
    RaySettings {
        step: config.run.step,
        checkpoints: config.checkpoints(),
        tensor: config.run.tensor,
        cutoff_ratio: config.run.cutoff_ratio,
    }
}

/// One traced fan per configured α.
#[derive(Debug, Clone)]
pub struct AlphaFan {
    pub alpha: f64,
    pub model: HamiltonianModel,
    pub fan: RayFan,
}

pub fn trace_all(config: &RunConfig, execution: Execution) -> CliResult<Vec<AlphaFan>> {
    let grid = grid_for(config);
    let settings = settings_for(config);
    let shell: ShellMode = config.source.shell_mode.into();
    config
        .medium
        .alpha
        .iter()
        .map(|&alpha| {
            let model = model_for(config, alpha)?;
            let source = source_for(config, &model);
            let fan = trace_fan(&model, &source, shell, &grid, &settings, execution)?;
            Ok(AlphaFan { alpha, model, fan })
        })
        .collect()
}

/// Trapped modes at the origin for every (α, μ₁).
pub fn modes_table(config: &RunConfig) -> CliResult<String> {
    let mut out = String::from(MODES_HEADER);
    out.push('\n');
    for &alpha in &config.medium.alpha {
        let medium = config.medium(alpha)?;
        let h = medium.depth([0.0, 0.0])?;
        for &mu1 in &config.source.mu1 {
            let p_tau = -2.0 * std::f64::consts::PI / medium.c_bot * (config.source.freq0 + config.source.dfreq * mu1);
            let w_sq = duct_strength(&medium, p_tau, [0.0, 0.0])?;
            for l in 0..mode_count(w_sq.sqrt()) {
                let m = VerticalMode::from_duct(l, alpha, w_sq, h)?;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{l},{},{},{},{},{},{},{}",
                    Num(alpha),
                    Num(mu1),
                    Num(p_tau),
                    Num(w_sq),
                    Num(m.gamma),
                    Num(m.k),
                    Num(m.lambda),
                    Num(m.norm_psi_sq),
                    Num(m.beta_1),
                    Num(m.beta_alpha),
                    Num(m.residual)
                );
            }
        }
    }
    Ok(out)
}

/// Per-sample ray table; checkpoints past a cutoff truncation are NaN rows.
pub fn trace_table(config: &RunConfig, fans: &[AlphaFan]) -> CliResult<String> {
    let l = config.mode.l;
    let checkpoints = config.checkpoints();
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for af in fans {
        for ray in &af.fan.rays {
            let [mu1, mu2] = ray.mu();
            for (i, s) in ray.samples.iter().enumerate() {
                let fields = sample_fields(&af.model, ray, i, config.run.caustic_threshold)?;
                let f = &s.f;
                let _ = writeln!(
                    out,
                    "{l},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    Num(af.alpha),
                    Num(mu1),
                    Num(mu2),
                    Num(s.tau_nat),
                    Num(f.tau),
                    Num(f.r[0]),
                    Num(f.r[1]),
                    Num(f.p_tau),
                    Num(f.p[0]),
                    Num(f.p[1]),
                    Num(s.phase),
                    Num(fields.amplitude),
                    Num(s.t_diss),
                    Num(fields.det_ir_fr),
                    fields.validity.as_str()
                );
            }
            for t in checkpoints.iter().skip(ray.samples.len() - 1) {
                let nan = f64::NAN;
                let _ = writeln!(
                    out,
                    "{l},{},{},{},{},{nan},{nan},{nan},{nan},{nan},{nan},{nan},{nan},{nan},{nan},{}",
                    Num(af.alpha),
                    Num(mu1),
                    Num(mu2),
                    Num(*t),
                    Validity::Cutoff.as_str()
                );
            }
        }
    }
    Ok(out)
}

/// t = τ/(ε·c_bot) next to each sample of the ray table.
pub fn raw_time_table(config: &RunConfig, fans: &[AlphaFan], epsilon: f64) -> String {
    let l = config.mode.l;
    let mut out = String::from(RAW_TIME_HEADER);
    out.push('\n');
    for af in fans {
        let c_bot = af.model.medium.c_bot;
        for ray in &af.fan.rays {
            let [mu1, mu2] = ray.mu();
            for s in &ray.samples {
                let _ = writeln!(
                    out,
                    "{l},{},{},{},{},{},{}",
                    Num(af.alpha),
                    Num(mu1),
                    Num(mu2),
                    Num(s.tau_nat),
                    Num(s.f.tau),
                    Num(s.f.tau / (epsilon * c_bot))
                );
            }
        }
    }
    out
}

/// One front: fixed α, μ₁, quantity and level, ordered by μ₂.
#[derive(Debug, Clone)]
pub struct FrontSet {
    pub alpha: f64,
    pub mu1: f64,
    pub quantity: FrontQuantity,
    pub level: f64,
    pub samples: Vec<FrontSample>,
}

pub fn compute_fronts(config: &RunConfig, fans: &[AlphaFan]) -> CliResult<Vec<FrontSet>> {
    let levels = config.front_levels();
    let mut out = Vec::new();
    for af in fans {
        for quantity in config.quantities() {
            for &level in &levels {
                let rows = extract_front(&af.model, &af.fan, quantity, level, config.run.caustic_threshold)?;
                for (i1, samples) in rows.into_iter().enumerate() {
                    out.push(FrontSet { alpha: af.alpha, mu1: af.fan.grid.mu1[i1], quantity, level, samples });
                }
            }
        }
    }
    Ok(out)
}

pub fn fronts_table(config: &RunConfig, fronts: &[FrontSet]) -> String {
    let l = config.mode.l;
    let mut out = String::from(FRONTS_HEADER);
    out.push('\n');
    for f in fronts {
        let head = format!("{l},{},{},{},{}", Num(f.alpha), Num(f.mu1), f.quantity.name(), Num(f.level));
        for s in &f.samples {
            match s {
                FrontSample::Point(p) => {
                    let _ = writeln!(
                        out,
                        "{head},{},{},{},{},{},{},{},{}",
                        Num(p.mu[1]),
                        Num(p.tau_nat),
                        Num(p.r[0]),
                        Num(p.r[1]),
                        Num(p.r[2]),
                        Num(p.value),
                        Num(p.amplitude),
                        p.validity.as_str()
                    );
                }
                FrontSample::Gap { mu, reason } => {
                    let flag = match reason {
                        GapReason::Cutoff => "cutoff",
                        GapReason::LevelNotReached => "not_reached",
                    };
                    let nan = f64::NAN;
                    let _ = writeln!(out, "{head},{},{nan},{nan},{nan},{nan},{nan},{nan},{flag}", Num(mu[1]));
                }
            }
        }
    }
    out
}

fn closes_ring(config: &RunConfig) -> bool {
    let g = &config.source.mu2;
    match (g.start.radians(), g.end.radians()) {
        (Some(a), Some(b)) => !g.endpoint && g.count > 2 && ((b - a).abs() - 2.0 * std::f64::consts::PI).abs() < 1e-12,
        _ => false,
    }
}

fn legend(config: &RunConfig, f: &FrontSet) -> String {
    format!("alpha={} l={} mu1={} {}={}", f.alpha, config.mode.l, f.mu1, f.quantity.name(), f.level)
}

/// Splits a front at gaps; `map` picks the plotted coordinates.
fn segments(samples: &[FrontSample], closed: bool, map: impl Fn(&modalray_core::fronts::FrontPoint) -> [f64; 2]) -> Vec<Vec<[f64; 2]>> {
    let mut segs: Vec<Vec<[f64; 2]>> = vec![Vec::new()];
    for s in samples {
        match s.point() {
            Some(p) => segs.last_mut().expect("never empty").push(map(p)),
            None => segs.push(Vec::new()),
        }
    }
    if closed && segs.len() == 1 {
        if let Some(first) = segs[0].first().copied() {
            segs[0].push(first);
        }
    } else if closed && samples.first().and_then(|s| s.point()).is_some() && samples.last().and_then(|s| s.point()).is_some() {
        // The ring wraps: glue the tail onto the head.
        let head = segs.remove(0);
        segs.last_mut().expect("at least one segment left").extend(head);
    }
    segs.retain(|s| !s.is_empty());
    segs
}

/// Plan view of every front.
pub fn plan_figure(config: &RunConfig, fronts: &[FrontSet]) -> Figure {
    let closed = closes_ring(config);
    Figure {
        title: "fronts".into(),
        x_label: "x".into(),
        y_label: "y".into(),
        equal_aspect: true,
        series: fronts
            .iter()
            .map(|f| Series { label: legend(config, f), segments: segments(&f.samples, closed, |p| [p.r[1], p.r[2]]) })
            .collect(),
    }
}

/// Amplitude along each front against μ₂.
pub fn amplitude_figure(config: &RunConfig, fronts: &[FrontSet]) -> Figure {
    Figure {
        title: "amplitude along fronts".into(),
        x_label: "mu2".into(),
        y_label: "amplitude".into(),
        equal_aspect: false,
        series: fronts
            .iter()
            .map(|f| Series { label: legend(config, f), segments: segments(&f.samples, false, |p| [p.mu[1], p.amplitude]) })
            .collect(),
    }
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config_sha256: String,
    checkpoints: Vec<f64>,
    flags: Flags,
    files: &'a [String],
}

#[derive(Debug, Clone, Serialize)]
struct Flags {
    alpha: Vec<f64>,
    l: usize,
    shell_mode: crate::config::ShellChoice,
    derivatives: Derivatives,
    tensor: bool,
    step: f64,
    caustic_threshold: f64,
    raw_time: bool,
    parallel: bool,
}

/// Files written by one subcommand, relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

struct Writer {
    dir: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn put(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| CliError::Io { path: parent.to_path_buf(), source })?;
        }
        fs::write(&path, contents).map_err(|source| CliError::Io { path, source })?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn finish(mut self, command: &str, config: &RunConfig) -> CliResult<RunReport> {
        let s = &config.source;
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: config.sha256(),
            checkpoints: config.checkpoints(),
            flags: Flags {
                alpha: config.medium.alpha.clone(),
                l: config.mode.l,
                shell_mode: s.shell_mode,
                derivatives: s.derivatives,
                tensor: config.run.tensor,
                step: config.run.step,
                caustic_threshold: config.run.caustic_threshold,
                raw_time: config.output.epsilon.is_some(),
                parallel: cfg!(feature = "parallel"),
            },
            files: &self.files,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        let name = format!("{command}.manifest.json");
        self.put(&name, &text)?;
        let config_name = format!("{command}.config.json");
        self.put(&config_name, &config.canonical())?;
        Ok(RunReport { dir: self.dir, files: self.files })
    }
}

fn sibling(name: &str, suffix: &str) -> String {
    match name.rsplit_once('.') {
        Some((stem, ext)) => format!("{stem}_{suffix}.{ext}"),
        None => format!("{name}_{suffix}"),
    }
}

pub fn run_modes(config: &RunConfig, dir: &Path) -> CliResult<RunReport> {
    let mut w = Writer::new(dir)?;
    w.put("modes.csv", &modes_table(config)?)?;
    w.finish("modes", config)
}

pub fn run_trace(config: &RunConfig, dir: &Path, execution: Execution) -> CliResult<RunReport> {
    let fans = trace_all(config, execution)?;
    let mut w = Writer::new(dir)?;
    w.put(&config.output.csv, &trace_table(config, &fans)?)?;
    if let Some(eps) = config.output.epsilon {
        w.put(&sibling(&config.output.csv, "raw_time"), &raw_time_table(config, &fans, eps))?;
    }
    w.finish("trace", config)
}

pub fn run_fronts(config: &RunConfig, dir: &Path, execution: Execution) -> CliResult<RunReport> {
    let fans = trace_all(config, execution)?;
    let fronts = compute_fronts(config, &fans)?;
    let mut w = Writer::new(dir)?;
    w.put(&sibling(&config.output.csv, "fronts"), &fronts_table(config, &fronts))?;
    if let Some(svg) = &config.output.svg {
        w.put(svg, &plan_figure(config, &fronts).render())?;
        w.put(&sibling(svg, "amplitude"), &amplitude_figure(config, &fronts).render())?;
    }
    w.finish("fronts", config)
}

pub fn run_verify(config: &RunConfig, dir: &Path, execution: Execution) -> CliResult<RunReport> {
    let checks = crate::verify::run_suites(config, execution)?;
    let mut w = Writer::new(dir)?;
    w.put("verify.csv", &crate::verify::table(&checks))?;
    let report = w.finish("verify", config)?;
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed()).collect();
    match failed.first() {
        None => Ok(report),
        Some(first) => Err(CliError::Verify { failed: failed.len(), class: first.class }),
    }
}
