//! Run configuration: TOML with dotted section keys (`mesh.nx = 5`).
//!
//! Every key is optional; omitted keys take the defaults in [`DEFAULTS`].
//! Unknown keys are rejected. Relative field-file paths are resolved
//! against the directory holding the config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use stalm_core::dump::{read_boundary_field, read_space_field, read_time_field};
use stalm_core::{
    AlmConfig, BoundaryTimeField, ControlBounds, DiffusionCoefficients, FailureUpdate, Mesh, MsaConfig, Preset,
    ProblemSpec, TimeField, UpdateMode,
};

use crate::error::{CliError, Result};

/// Defaults applied to omitted keys (shown in `--help`).
pub const DEFAULTS: &str = "\
preset = \"paper_example_sec5\"   # or omit and give problem.*_file
seed = 0
mesh.nx = 5        mesh.ny = 5        mesh.nt = 4
mesh.lx = 1.0      mesh.ly = 1.0      mesh.T = 1.0
problem.alpha = 1.0   problem.beta = 1.0
problem.ua = -1.0  problem.ub = 1.0   problem.va = -1.0  problem.vb = 1.0
problem.boundary_control = <preset default>
problem.y0_file / y_d_file / psi_file / ua_file / ub_file / va_file / vb_file = <unset>
alm.rho0 = 1.0     alm.mu0 = <preset default, 0 without preset>   alm.mu0_file = <unset>
alm.tau = 0.9      alm.gamma = 2.0    alm.r_plus_0 = 1e6
alm.eps2 = 1e-4    alm.max_outer = 200   alm.failure_update = \"keep\"   # or \"adopt\"
msa.eps1 = 1e-4    msa.max_inner = 20000   msa.update_mode = \"exact_argmin\"   # or \"projected_gradient\"
msa.lr0 = 1e-3     msa.lr_decay = 0.9   msa.lr_period = 100   msa.safeguard = true
msa.init = \"zero\"  # or \"random\" (uniform in the control bounds, from seed)
msa.lin_tol = 1e-10
output.dir = \"out\"   output.dump_fields = false";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<String>,
    seed: Option<u64>,
    #[serde(default)]
    mesh: RawMesh,
    #[serde(default)]
    problem: RawProblem,
    #[serde(default)]
    alm: RawAlm,
    #[serde(default)]
    msa: RawMsa,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMesh {
    nx: Option<usize>,
    ny: Option<usize>,
    nt: Option<usize>,
    lx: Option<f64>,
    ly: Option<f64>,
    #[serde(rename = "T")]
    t_final: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    alpha: Option<f64>,
    beta: Option<f64>,
    ua: Option<f64>,
    ub: Option<f64>,
    va: Option<f64>,
    vb: Option<f64>,
    boundary_control: Option<bool>,
    y0_file: Option<PathBuf>,
    y_d_file: Option<PathBuf>,
    psi_file: Option<PathBuf>,
    ua_file: Option<PathBuf>,
    ub_file: Option<PathBuf>,
    va_file: Option<PathBuf>,
    vb_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlm {
    rho0: Option<f64>,
    mu0: Option<f64>,
    mu0_file: Option<PathBuf>,
    tau: Option<f64>,
    gamma: Option<f64>,
    r_plus_0: Option<f64>,
    eps2: Option<f64>,
    max_outer: Option<usize>,
    failure_update: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMsa {
    eps1: Option<f64>,
    max_inner: Option<usize>,
    update_mode: Option<String>,
    lr0: Option<f64>,
    lr_decay: Option<f64>,
    lr_period: Option<usize>,
    safeguard: Option<bool>,
    init: Option<String>,
    lin_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    dump_fields: Option<bool>,
}

/// Starting controls for the first sub-problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitControl {
    Zero,
    /// Uniform samples in the control bounds, drawn from the run seed.
    Random,
}

/// Optional field files overriding preset data.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FieldFiles {
    pub y0: Option<PathBuf>,
    pub y_d: Option<PathBuf>,
    pub psi: Option<PathBuf>,
    pub ua: Option<PathBuf>,
    pub ub: Option<PathBuf>,
    pub va: Option<PathBuf>,
    pub vb: Option<PathBuf>,
    pub mu0: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    pub seed: u64,
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub lx: f64,
    pub ly: f64,
    pub t_final: f64,
    pub alpha: f64,
    pub beta: f64,
    pub ua: f64,
    pub ub: f64,
    pub va: f64,
    pub vb: f64,
    pub boundary_control: Option<bool>,
    pub files: FieldFiles,
    pub rho0: f64,
    pub mu0: Option<f64>,
    pub tau: f64,
    pub gamma: f64,
    pub r_plus_0: f64,
    pub eps2: f64,
    pub max_outer: usize,
    pub failure_update: FailureUpdate,
    pub msa: MsaConfig,
    pub init: InitControl,
    pub lin_tol: f64,
    pub output_dir: PathBuf,
    pub dump_fields: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            preset: Some(Preset::SineObstacle),
            seed: 0,
            nx: 5,
            ny: 5,
            nt: 4,
            lx: 1.0,
            ly: 1.0,
            t_final: 1.0,
            alpha: 1.0,
            beta: 1.0,
            ua: -1.0,
            ub: 1.0,
            va: -1.0,
            vb: 1.0,
            boundary_control: None,
            files: FieldFiles::default(),
            rho0: 1.0,
            mu0: None,
            tau: 0.9,
            gamma: 2.0,
            r_plus_0: 1e6,
            eps2: 1e-4,
            max_outer: 200,
            failure_update: FailureUpdate::Keep,
            msa: MsaConfig::default(),
            init: InitControl::Zero,
            lin_tol: stalm_core::operator::DEFAULT_LIN_TOL,
            output_dir: PathBuf::from("out"),
            dump_fields: false,
        }
    }
}

/// Reads, parses and fully validates a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let config = parse_config_str(path, &text, base)?;
    config.validate()?;
    Ok(config)
}

/// Parses config text without touching field files; `base` anchors
/// relative paths.
pub fn parse_config_str(path: &Path, text: &str, base: &Path) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        CliError::Parse { path: path.to_path_buf(), line, message: e.message().to_string() }
    })?;
    let d = RunConfig::default();
    let resolve = |p: Option<PathBuf>| p.map(|p| if p.is_relative() { base.join(p) } else { p });
    let files = FieldFiles {
        y0: resolve(raw.problem.y0_file),
        y_d: resolve(raw.problem.y_d_file),
        psi: resolve(raw.problem.psi_file),
        ua: resolve(raw.problem.ua_file),
        ub: resolve(raw.problem.ub_file),
        va: resolve(raw.problem.va_file),
        vb: resolve(raw.problem.vb_file),
        mu0: resolve(raw.alm.mu0_file),
    };
    let preset = match raw.preset {
        Some(name) => Some(name.parse::<Preset>()?),
        None if files.y0.is_none() && files.y_d.is_none() && files.psi.is_none() => d.preset,
        None => None,
    };
    let failure_update = match raw.alm.failure_update.as_deref() {
        None | Some("keep") => FailureUpdate::Keep,
        Some("adopt") => FailureUpdate::Adopt,
        Some(other) => return Err(invalid(format!("alm.failure_update must be \"keep\" or \"adopt\", got {other:?}"))),
    };
    let update_mode = match raw.msa.update_mode.as_deref() {
        None | Some("exact_argmin") => UpdateMode::ExactArgmin,
        Some("projected_gradient") => UpdateMode::ProjectedGradient,
        Some(other) => {
            return Err(invalid(format!(
                "msa.update_mode must be \"exact_argmin\" or \"projected_gradient\", got {other:?}"
            )))
        }
    };
    let init = match raw.msa.init.as_deref() {
        None | Some("zero") => InitControl::Zero,
        Some("random") => InitControl::Random,
        Some(other) => return Err(invalid(format!("msa.init must be \"zero\" or \"random\", got {other:?}"))),
    };
    let m = raw.msa;
    let msa = MsaConfig {
        eps1: m.eps1.unwrap_or(d.msa.eps1),
        max_inner: m.max_inner.unwrap_or(d.msa.max_inner),
        update_mode,
        lr0: m.lr0.unwrap_or(d.msa.lr0),
        lr_decay: m.lr_decay.unwrap_or(d.msa.lr_decay),
        lr_period: m.lr_period.unwrap_or(d.msa.lr_period),
        safeguard: m.safeguard.unwrap_or(d.msa.safeguard),
    };
    Ok(RunConfig {
        preset,
        seed: raw.seed.unwrap_or(d.seed),
        nx: raw.mesh.nx.unwrap_or(d.nx),
        ny: raw.mesh.ny.unwrap_or(d.ny),
        nt: raw.mesh.nt.unwrap_or(d.nt),
        lx: raw.mesh.lx.unwrap_or(d.lx),
        ly: raw.mesh.ly.unwrap_or(d.ly),
        t_final: raw.mesh.t_final.unwrap_or(d.t_final),
        alpha: raw.problem.alpha.unwrap_or(d.alpha),
        beta: raw.problem.beta.unwrap_or(d.beta),
        ua: raw.problem.ua.unwrap_or(d.ua),
        ub: raw.problem.ub.unwrap_or(d.ub),
        va: raw.problem.va.unwrap_or(d.va),
        vb: raw.problem.vb.unwrap_or(d.vb),
        boundary_control: raw.problem.boundary_control,
        files,
        rho0: raw.alm.rho0.unwrap_or(d.rho0),
        mu0: raw.alm.mu0,
        tau: raw.alm.tau.unwrap_or(d.tau),
        gamma: raw.alm.gamma.unwrap_or(d.gamma),
        r_plus_0: raw.alm.r_plus_0.unwrap_or(d.r_plus_0),
        eps2: raw.alm.eps2.unwrap_or(d.eps2),
        max_outer: raw.alm.max_outer.unwrap_or(d.max_outer),
        failure_update,
        msa,
        init,
        lin_tol: m.lin_tol.unwrap_or(d.lin_tol),
        output_dir: raw.output.dir.unwrap_or(d.output_dir),
        dump_fields: raw.output.dump_fields.unwrap_or(d.dump_fields),
    })
}

fn invalid(message: String) -> CliError {
    CliError::Invalid(message)
}

impl RunConfig {
    pub fn mesh(&self) -> Result<Mesh> {
        Ok(Mesh::new(self.nx, self.ny, self.nt, self.lx, self.ly, self.t_final)?)
    }

    /// Builds the problem, reading any referenced field files.
    pub fn problem(&self) -> Result<ProblemSpec> {
        let mesh = self.mesh()?;
        let f = &self.files;
        let mut spec = match self.preset {
            Some(p) => p.spec_with_alpha(&mesh, self.alpha)?,
            None => {
                let missing: Vec<&str> = [("y0_file", &f.y0), ("y_d_file", &f.y_d), ("psi_file", &f.psi)]
                    .into_iter()
                    .filter(|(_, p)| p.is_none())
                    .map(|(n, _)| n)
                    .collect();
                if !missing.is_empty() {
                    return Err(invalid(format!(
                        "without a preset, problem.{} must be given",
                        missing.join(", problem.")
                    )));
                }
                ProblemSpec {
                    mesh,
                    coeffs: DiffusionCoefficients::unit(&mesh),
                    y0: stalm_core::SpaceField::zeros(&mesh),
                    y_d: stalm_core::SpaceField::zeros(&mesh),
                    psi: TimeField::zeros(&mesh),
                    alpha: self.alpha,
                    beta: self.beta,
                    bounds: ControlBounds::constant(&mesh, self.ua, self.ub, self.va, self.vb)?,
                    boundary_control: false,
                }
            }
        };
        spec.alpha = self.alpha;
        spec.beta = self.beta;
        if let Some(bc) = self.boundary_control {
            spec.boundary_control = bc;
        }
        if let Some(p) = &f.y0 {
            spec.y0 = read_space_field(p, &mesh)?;
        }
        if let Some(p) = &f.y_d {
            spec.y_d = read_space_field(p, &mesh)?;
        }
        if let Some(p) = &f.psi {
            spec.psi = read_time_field(p, &mesh)?;
        }
        let time_bound = |file: &Option<PathBuf>, c: f64| -> Result<TimeField> {
            Ok(match file {
                Some(p) => read_time_field(p, &mesh)?,
                None => TimeField::constant(&mesh, c),
            })
        };
        let boundary_bound = |file: &Option<PathBuf>, c: f64| -> Result<BoundaryTimeField> {
            Ok(match file {
                Some(p) => read_boundary_field(p, &mesh)?,
                None => BoundaryTimeField::constant(&mesh, c),
            })
        };
        spec.bounds = ControlBounds::new(
            time_bound(&f.ua, self.ua)?,
            time_bound(&f.ub, self.ub)?,
            boundary_bound(&f.va, self.va)?,
            boundary_bound(&f.vb, self.vb)?,
        )?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn alm_config(&self, mesh: &Mesh) -> Result<AlmConfig> {
        let mu0 = match &self.files.mu0 {
            Some(p) => read_time_field(p, mesh)?,
            None => {
                let c = self.mu0.unwrap_or_else(|| self.preset.map_or(0.0, Preset::default_mu0));
                TimeField::constant(mesh, c)
            }
        };
        let config = AlmConfig {
            rho0: self.rho0,
            mu0,
            tau: self.tau,
            gamma: self.gamma,
            r_plus_0: self.r_plus_0,
            eps2: self.eps2,
            max_outer: self.max_outer,
            failure_update: self.failure_update,
            msa: self.msa.clone(),
        };
        config.validate()?;
        Ok(config)
    }

    /// Checks every numeric constraint and loads every referenced file.
    pub fn validate(&self) -> Result<()> {
        if !(self.lin_tol > 0.0 && self.lin_tol < 1.0) {
            return Err(invalid("msa.lin_tol must lie in (0,1)".into()));
        }
        let spec = self.problem()?;
        self.alm_config(&spec.mesh)?;
        Ok(())
    }

    /// Output directory, placed under `$STALM_OUTPUT_ROOT` when that is set
    /// and the configured directory is relative.
    pub fn resolved_output_dir(&self) -> PathBuf {
        resolve_output(&self.output_dir)
    }
}

pub fn resolve_output(dir: &Path) -> PathBuf {
    match std::env::var_os("STALM_OUTPUT_ROOT") {
        Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
        _ => dir.to_path_buf(),
    }
}
