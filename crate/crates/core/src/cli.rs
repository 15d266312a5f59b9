//! Run configuration, subcommands and their artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::background::{build, max_rh_residual, UpstreamSpec, DEFAULT_NODES};
use crate::elliptic::SolveOptions;
use crate::error::{Error, Result};
use crate::io::{fmt17, read_columns, read_table, write_columns};
use crate::iteration::{IterationOptions, IterationState, ResidualReport, RunResult, Transonic};
use crate::lagrangian::{Field, Geometry, Hatted, Perturbation};
use crate::numerics::Func;
use crate::shockfit::{initial_approximation, InitialOptions};
use crate::supersonic::NAMES;
use crate::thermo::GasModel;

pub const SCHEMA: u32 = 1;

/// A coefficient list (ascending powers of x2 or x1) or a two-column table file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum FuncSpec {
    Poly(Vec<f64>),
    Table(PathBuf),
}

impl Default for FuncSpec {
    fn default() -> Self {
        FuncSpec::Poly(vec![])
    }
}

impl FuncSpec {
    /// Table paths are relative to `base`.
    pub fn load(&self, base: &Path) -> Result<Func> {
        match self {
            FuncSpec::Poly(c) => Ok(Func::Poly(c.clone())),
            FuncSpec::Table(p) => Ok(Func::Spline(read_table(&base.join(p))?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasConfig {
    pub gamma: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NozzleConfig {
    #[serde(rename = "L")]
    pub length: f64,
    /// wall offset, must vanish to third order at the inlet
    pub g: FuncSpec,
    pub sigma: f64,
}

impl Default for NozzleConfig {
    fn default() -> Self {
        NozzleConfig { length: 1.0, g: FuncSpec::default(), sigma: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpstreamConfig {
    pub u_minus: FuncSpec,
    #[serde(rename = "M_top")]
    pub m_top: f64,
    #[serde(rename = "P_top")]
    pub p_top: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationConfig {
    pub u1_en: FuncSpec,
    pub u2_en: FuncSpec,
    #[serde(rename = "S_en")]
    pub s_en: FuncSpec,
    #[serde(rename = "B_en")]
    pub b_en: FuncSpec,
    #[serde(rename = "P_ex")]
    pub p_ex: FuncSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// y1 nodes on each side of the shock
    pub nx: usize,
    pub ny: usize,
    pub tol_fp: f64,
    pub tol_res: f64,
    pub max_iter: usize,
    pub defect_tol: f64,
    pub psi_bracket: Option<[f64; 2]>,
    /// fixed shock position instead of the J1 = J2 selection
    pub psi_bar: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { nx: 129, ny: 65, tol_fp: 1e-10, tol_res: 1e-6, max_iter: 50, defect_tol: 1e-10, psi_bracket: None, psi_bar: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub dump_fields: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), dump_fields: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub gas: GasConfig,
    #[serde(default)]
    pub nozzle: NozzleConfig,
    pub upstream: UpstreamConfig,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Library inputs built from a config.
#[derive(Debug, Clone)]
pub struct Model {
    pub gas: GasModel,
    pub upstream: UpstreamSpec,
    pub pert: Perturbation,
}

/// Parse without invariant checks; the error names the offending key path.
pub fn parse_str(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config(format!("{path}: {}", e.into_inner()))
    })?;
    if cfg.schema != SCHEMA {
        return Err(Error::Config(format!("schema: unsupported version {} (expected {SCHEMA})", cfg.schema)));
    }
    Ok(cfg)
}

/// Parse and validate a config file. Relative table paths resolve against its directory.
pub fn parse_config(path: &Path) -> Result<(RunConfig, Model)> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let cfg = parse_str(&text)?;
    let model = cfg.model(path.parent().unwrap_or(Path::new(".")))?;
    Ok((cfg, model))
}

fn keyed<T>(key: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{key}: {m}")),
        other => Error::Config(format!("{key}: {other}")),
    })
}

impl RunConfig {
    pub fn model(&self, base: &Path) -> Result<Model> {
        let gas = keyed("gas", GasModel::new(self.gas.gamma, self.gas.beta))?;
        let upstream = UpstreamSpec { u_minus: keyed("upstream.u_minus", self.upstream.u_minus.load(base))?, m_top: self.upstream.m_top, p_top: self.upstream.p_top };
        keyed("upstream", upstream.check(DEFAULT_NODES))?;
        let pc = &self.perturbation;
        let sigma = self.nozzle.sigma;
        let geometry = Geometry { length: self.nozzle.length, g: keyed("nozzle.g", self.nozzle.g.load(base))?, sigma };
        keyed("nozzle", geometry.check())?;
        let pert = Perturbation {
            sigma,
            u1_en: keyed("perturbation.u1_en", pc.u1_en.load(base))?,
            u2_en: keyed("perturbation.u2_en", pc.u2_en.load(base))?,
            s_en: keyed("perturbation.S_en", pc.s_en.load(base))?,
            b_en: keyed("perturbation.B_en", pc.b_en.load(base))?,
            p_ex: keyed("perturbation.P_ex", pc.p_ex.load(base))?,
            geometry,
        };
        keyed("perturbation", pert.check())?;
        let s = &self.solver;
        if s.nx < 5 || s.ny < 5 {
            return Err(Error::Config(format!("solver: grid {}x{} needs at least 5 nodes per direction", s.nx, s.ny)));
        }
        for (k, v) in [("tol_fp", s.tol_fp), ("tol_res", s.tol_res), ("defect_tol", s.defect_tol)] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("solver.{k}: must be positive, got {v}")));
            }
        }
        if let Some([lo, hi]) = s.psi_bracket {
            if !(0.0 <= lo && lo < hi && hi <= self.nozzle.length) {
                return Err(Error::Config(format!("solver.psi_bracket: [{lo}, {hi}] not inside [0, L]")));
            }
        }
        Ok(Model { gas, upstream, pert })
    }

    fn elliptic(&self) -> SolveOptions {
        SolveOptions { defect_tol: self.solver.defect_tol, lift: true, ..Default::default() }
    }

    fn bracket(&self) -> Option<(f64, f64)> {
        self.solver.psi_bracket.map(|[a, b]| (a, b))
    }

    pub fn initial_options(&self) -> InitialOptions {
        let s = &self.solver;
        InitialOptions { n1_minus: s.nx, n1_plus: s.nx, n2: s.ny, bracket: self.bracket(), psi_bar: s.psi_bar, elliptic: self.elliptic() }
    }

    pub fn iteration_options(&self) -> IterationOptions {
        let s = &self.solver;
        IterationOptions {
            n1_minus: s.nx,
            n1_plus: s.nx,
            n2: s.ny,
            tol_fp: s.tol_fp,
            max_iter: s.max_iter,
            psi_bracket: self.bracket(),
            psi_bar: s.psi_bar,
            elliptic: self.elliptic(),
            ..Default::default()
        }
    }

    /// Replace one dotted key, e.g. `nozzle.sigma`, by a JSON value.
    pub fn with_key(&self, key: &str, value: &serde_json::Value) -> Result<RunConfig> {
        let mut v = serde_json::to_value(self)?;
        let mut slot = &mut v;
        for part in key.split('.') {
            slot = slot.get_mut(part).ok_or_else(|| Error::Config(format!("sweep key {key}: no field {part}")))?;
        }
        *slot = value.clone();
        parse_str(&v.to_string())
    }
}

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub grid: Option<(usize, usize)>,
    pub dump_elliptic: bool,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig, base: &Path) {
        if let Some((nx, ny)) = self.grid {
            cfg.solver.nx = nx;
            cfg.solver.ny = ny;
        }
        cfg.output.dir = match &self.out {
            Some(o) => o.clone(),
            None => base.join(&cfg.output.dir),
        };
    }
}

/// Config and validated model with overrides applied; the output directory exists afterwards.
pub fn prepare(path: &Path, ov: &Overrides) -> Result<(RunConfig, Model)> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = parse_str(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    ov.apply(&mut cfg, base);
    let model = cfg.model(base)?;
    fs::create_dir_all(&cfg.output.dir)?;
    Ok((cfg, model))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackgroundReport {
    pub nodes: usize,
    pub max_rh_residual: f64,
    pub rho_plus_top: f64,
    pub u_plus_top: f64,
    pub p_plus_top: f64,
}

/// Build the background, check its jump conditions and write `background.csv`.
pub fn run_background(cfg: &RunConfig, model: &Model) -> Result<BackgroundReport> {
    let bg = build(&model.upstream, &model.gas, DEFAULT_NODES)?;
    let out = &cfg.output.dir;
    bg.write_csv(&out.join("background.csv"))?;
    let top = bg.state_plus(1.0);
    let rep = BackgroundReport { nodes: DEFAULT_NODES, max_rh_residual: max_rh_residual(&bg), rho_plus_top: top.rho, u_plus_top: top.u1, p_plus_top: top.p };
    write_json(&out.join("background.json"), &rep)?;
    if !(rep.max_rh_residual <= cfg.solver.tol_res) {
        return Err(Error::DegenerateBackground(format!("jump conditions violated by {:e}", rep.max_rh_residual)));
    }
    Ok(rep)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialReport {
    pub psi_bar: f64,
    pub j1_at_psi: f64,
    pub j2: f64,
    pub bracket: [f64; 2],
    pub dkappa: f64,
    pub defect: f64,
}

fn write_front(path: &Path, h2: f64, psi_prime: &[f64], psi: &[f64]) -> Result<()> {
    let y2: Vec<f64> = (0..psi.len()).map(|j| j as f64 * h2).collect();
    write_columns(path, &[("y2", &y2), ("psi_prime", psi_prime), ("psi", psi)])
}

fn with_extra(f: &Field, extra: &[(&str, &Array2<f64>)]) -> Field {
    let mut out = f.clone();
    for (n, a) in extra {
        out.names.push(n.to_string());
        out.data.push((*a).clone());
    }
    out
}

/// Linear approximation and shock position.
pub fn run_initial(cfg: &RunConfig, model: &Model, ov: &Overrides) -> Result<InitialReport> {
    let bg = build(&model.upstream, &model.gas, DEFAULT_NODES)?;
    let hat = Hatted::new(&bg)?;
    let ia = initial_approximation(&hat, &model.pert, &cfg.initial_options())?;
    let out = &cfg.output.dir;
    let g = ia.v_plus.grid;
    write_front(&out.join("front.csv"), g.h2(), &ia.front.psi_prime, &ia.front.psi)?;
    if cfg.output.dump_fields {
        ia.v_plus.write_csv(&out.join("initial_field.csv"), None)?;
    }
    if ov.dump_elliptic {
        let e = &ia.elliptic;
        with_extra(&e.v, &[("phi_hat", &e.phi_hat), ("phi_check", &e.phi_check)]).write_csv(&out.join("elliptic.csv"), None)?;
    }
    let rep = InitialReport {
        psi_bar: ia.front.psi_bar,
        j1_at_psi: ia.j1_at_psi,
        j2: ia.functionals.j2,
        bracket: [ia.bracket.lo, ia.bracket.hi],
        dkappa: ia.dkappa,
        defect: ia.elliptic.defect,
    };
    write_json(&out.join("initial.json"), &rep)?;
    Ok(rep)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub sigma: f64,
    pub psi_bar: f64,
    pub psi_sharp: f64,
    pub iterations: usize,
    /// max |psi_sharp| / sigma over the run
    pub c1: f64,
    pub residuals: ResidualReport,
}

fn transonic(cfg: &RunConfig, model: &Model) -> Result<Transonic> {
    let bg = build(&model.upstream, &model.gas, DEFAULT_NODES)?;
    let hat = Hatted::new(&bg)?;
    Transonic::new(&hat, &model.pert, cfg.iteration_options())
}

fn write_log(path: &Path, r: &RunResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iter", "update_norm", "psi_sharp", "defect", "kappa_estimate"])?;
    for e in &r.log {
        w.write_record([e.iter.to_string(), fmt17(e.update_norm), fmt17(e.psi_sharp), fmt17(e.defect), fmt17(e.kappa_estimate)])?;
    }
    w.flush()?;
    Ok(())
}

/// Full nonlinear iteration. Writes the iterate so `verify` can recheck it.
pub fn run_solve(cfg: &RunConfig, model: &Model, ov: &Overrides) -> Result<SolveReport> {
    let t = transonic(cfg, model)?;
    let r = t.run()?;
    let out = &cfg.output.dir;
    write_log(&out.join("iteration_log.csv"), &r)?;
    write_front(&out.join("front.csv"), t.grid.h2(), &r.state.psi_prime, &r.front)?;
    r.state.w.write_csv(&out.join("state.csv"), None)?;
    if cfg.output.dump_fields {
        t.downstream_field(&r.state).write_csv(&out.join("solution.csv"), None)?;
    }
    if ov.dump_elliptic {
        let d = t.assemble(&r.state, r.state.psi_sharp)?.elliptic;
        let mut f = Field::new(t.grid, &["rhs1", "rhs2"]);
        f.data = vec![d.rhs1, d.rhs2];
        f.write_csv(&out.join("elliptic_sources.csv"), None)?;
        let y2 = t.grid.y2s();
        write_columns(&out.join("elliptic_sides.csv"), &[("y2", &y2), ("h1", &d.h1), ("h2", &d.h2)])?;
        let y1: Vec<f64> = (0..t.grid.n1).map(|i| t.grid.y1(i)).collect();
        write_columns(&out.join("elliptic_top.csv"), &[("y1", &y1), ("h3", &d.h3)])?;
    }
    let rep = SolveReport {
        sigma: model.pert.sigma,
        psi_bar: t.psi_bar,
        psi_sharp: r.state.psi_sharp,
        iterations: r.log.len(),
        c1: r.c1,
        residuals: r.report,
    };
    write_json(&out.join("solve.json"), &rep)?;
    Ok(rep)
}

/// Residuals checked against `tol_res`. The layers next to sides and corners are reported but
/// not checked: there exact boundary data meet second-order interior values.
pub fn checked_residuals(r: &ResidualReport) -> [(&'static str, f64); 5] {
    [
        ("pde_residual", r.pde_residual),
        ("upstream_residual", r.upstream_residual),
        ("rh_residual", r.rh_residual),
        ("exit_residual", r.exit_residual),
        ("wall_residual", r.wall_residual),
    ]
}

fn load_state(t: &Transonic, dir: &Path) -> Result<IterationState> {
    let g = t.grid;
    let cols = read_columns(&dir.join("state.csv"), &NAMES)?;
    if cols[0].len() != g.n1 * g.n2 {
        return Err(Error::Config(format!("state.csv has {} rows, grid {}x{} needs {}", cols[0].len(), g.n1, g.n2, g.n1 * g.n2)));
    }
    let mut w = Field::new(g, &NAMES);
    for (k, c) in cols.into_iter().enumerate() {
        w.data[k] = Array2::from_shape_vec((g.n1, g.n2), c).expect("row count checked");
    }
    let psi_prime = read_columns(&dir.join("front.csv"), &["psi_prime"])?.remove(0);
    if psi_prime.len() != g.n2 {
        return Err(Error::Config(format!("front.csv has {} rows, expected {}", psi_prime.len(), g.n2)));
    }
    let text = fs::read_to_string(dir.join("solve.json"))?;
    let rep: SolveReport = serde_json::from_str(&text)?;
    Ok(IterationState { w, psi_prime, psi_sharp: rep.psi_sharp, iter: 0, update_norm: 0.0 })
}

/// Recompute the residual suite on the fields stored by `solve`.
pub fn run_verify(cfg: &RunConfig, model: &Model) -> Result<ResidualReport> {
    let t = transonic(cfg, model)?;
    let st = load_state(&t, &cfg.output.dir)?;
    let rep = t.residuals(&st)?;
    write_json(&cfg.output.dir.join("verify.json"), &rep)?;
    for (name, v) in checked_residuals(&rep) {
        if !(v <= cfg.solver.tol_res) {
            return Err(Error::ResidualCheck { name: name.into(), value: v, tol: cfg.solver.tol_res });
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: String,
    pub status: i32,
    pub report: Option<SolveReport>,
    pub message: String,
}

/// Solve once per value of `key`, concurrently, each run in its own `run_NNN` directory.
pub fn run_sweep(cfg: &RunConfig, base: &Path, key: &str, values: &[String], ov: &Overrides) -> Result<Vec<SweepRow>> {
    let parsed: Vec<serde_json::Value> = values
        .iter()
        .map(|v| serde_json::from_str(v).map_err(|e| Error::Config(format!("sweep value {v:?}: {e}"))))
        .collect::<Result<_>>()?;
    let runs: Vec<RunConfig> = parsed
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let mut c = cfg.with_key(key, v)?;
            c.output.dir = cfg.output.dir.join(format!("run_{k:03}"));
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<SweepRow> = runs
        .par_iter()
        .zip(values.par_iter())
        .map(|(c, v)| {
            let res = c.model(base).and_then(|m| {
                fs::create_dir_all(&c.output.dir)?;
                run_solve(c, &m, ov)
            });
            match res {
                Ok(r) => SweepRow { value: v.clone(), status: 0, report: Some(r), message: String::new() },
                Err(e) => SweepRow { value: v.clone(), status: e.exit_code(), report: None, message: e.to_string() },
            }
        })
        .collect();
    let mut w = csv::Writer::from_path(cfg.output.dir.join("sweep.csv"))?;
    w.write_record(["value", "status", "psi_bar", "psi_sharp", "iterations", "pde_residual", "rh_residual", "exit_residual", "wall_residual", "message"])?;
    for r in &rows {
        let nums = match &r.report {
            Some(s) => vec![
                fmt17(s.psi_bar),
                fmt17(s.psi_sharp),
                s.iterations.to_string(),
                fmt17(s.residuals.pde_residual),
                fmt17(s.residuals.rh_residual),
                fmt17(s.residuals.exit_residual),
                fmt17(s.residuals.wall_residual),
            ],
            None => vec![String::new(); 7],
        };
        let mut rec = vec![r.value.clone(), r.status.to_string()];
        rec.extend(nums);
        rec.push(r.message.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(rows)
}
