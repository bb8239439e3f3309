//! Run-configuration files for the `cauchy` and `pipeline` subcommands.
//!
//! A single TOML document references the operator, meshes and data by path
//! (or generation parameters) and carries the scalar settings; command-line
//! flags may override the scalars. Schema:
//!
//! ```toml
//! seed = 0
//! lambda = 1.0
//! lambda_tilde = 1.0
//! ctol = 1e-6
//! eps_ker = 1e-8
//! solver_tol = 1e-10
//! noise_level = 0.0          # relative boundary-L2 level added to f
//!
//! [operator]                 # the extracellular operator A_e
//! path = "op.toml"           # or: builtin = "gradient" | "gradient-unit"
//!                            #              | "cauchy-riemann" | "holonomic"
//!
//! [mesh]
//! kind = "generate"          # structured annulus + matched-boundary disk
//! r_in = 1.0
//! r_out = 2.0
//! h = 0.1
//! # kind = "files"
//! # omega = "omega.txt"      # body-minus-heart mesh
//! # heart = "heart.txt"      # heart mesh (pipeline only)
//!
//! [data]                     # Dirichlet data f on the OUTER loop
//! kind = "harmonic"          # A * cos(m theta) in component 0
//! m = 1
//! amplitude = 4.0
//! # kind = "constant"; value = 1.0
//! # kind = "file"; path = "f.csv"
//!
//! [method]
//! kind = "tikhonov"          # tikhonov | morozov | alternating
//! alpha = 1e-8
//! # morozov:     delta = 0.0 (0 = use injected noise norm), tau = 1.2
//! # alternating: max_iter = 200, stop_tol = 1e-10
//! ```

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;

use epicard_core::field::{load_field_csv, Field, Support};
use epicard_core::mesh::{load_mesh, BoundaryTag, Mesh};
use epicard_core::operator::{load_operator, FirstOrderOperator};
use epicard_core::pipeline::{CauchyStrategy, PipelineConfig};

use crate::CliError;

fn default_lambda() -> f64 {
    1.0
}
fn default_ctol() -> f64 {
    1e-6
}
fn default_eps_ker() -> f64 {
    1e-8
}
fn default_solver_tol() -> f64 {
    1e-10
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_lambda")]
    pub lambda_tilde: f64,
    #[serde(default = "default_ctol")]
    pub ctol: f64,
    #[serde(default = "default_eps_ker")]
    pub eps_ker: f64,
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
    #[serde(default)]
    pub noise_level: f64,
    pub operator: OperatorRef,
    pub mesh: MeshRef,
    pub data: DataRef,
    pub method: MethodRef,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorRef {
    pub path: Option<PathBuf>,
    pub builtin: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshRef {
    pub kind: String,
    pub r_in: Option<f64>,
    pub r_out: Option<f64>,
    pub h: Option<f64>,
    pub omega: Option<PathBuf>,
    pub heart: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataRef {
    pub kind: String,
    pub m: Option<u32>,
    pub amplitude: Option<f64>,
    pub value: Option<f64>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodRef {
    pub kind: String,
    pub alpha: Option<f64>,
    pub delta: Option<f64>,
    pub tau: Option<f64>,
    pub max_iter: Option<usize>,
    pub stop_tol: Option<f64>,
}

pub struct LoadedRun {
    pub config: PipelineConfig,
}

pub fn load_run_config(path: &Path) -> Result<RunConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::input(format!("bad config: {e}")))
}

pub fn builtin_operator(name: &str) -> Result<FirstOrderOperator, CliError> {
    match name {
        "gradient" => Ok(FirstOrderOperator::gradient(2)),
        "gradient-unit" => Ok(FirstOrderOperator::gradient_with_unit(2)),
        "cauchy-riemann" => Ok(FirstOrderOperator::cauchy_riemann()),
        "holonomic" => Ok(FirstOrderOperator::holonomic_6x3()),
        other => Err(CliError::input(format!(
            "unknown builtin operator '{other}' (expected gradient, gradient-unit, \
             cauchy-riemann or holonomic)"
        ))),
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfigFile {
    pub fn operator(&self, base: &Path) -> Result<FirstOrderOperator, CliError> {
        match (&self.operator.path, &self.operator.builtin) {
            (Some(p), None) => Ok(load_operator(resolve(base, p))?),
            (None, Some(b)) => builtin_operator(b),
            _ => Err(CliError::input(
                "[operator] needs exactly one of `path` or `builtin`",
            )),
        }
    }

    pub fn meshes(&self, base: &Path) -> Result<(Mesh, Mesh), CliError> {
        match self.mesh.kind.as_str() {
            "generate" => {
                let r_in = self.mesh.r_in.unwrap_or(1.0);
                let r_out = self.mesh.r_out.unwrap_or(2.0);
                let h = self
                    .mesh
                    .h
                    .ok_or_else(|| CliError::input("[mesh] generate needs `h`"))?;
                Ok(epicard_core::pipeline::generate_matched_meshes(
                    r_in, r_out, h,
                )?)
            }
            "files" => {
                let omega = self
                    .mesh
                    .omega
                    .as_ref()
                    .ok_or_else(|| CliError::input("[mesh] files needs `omega`"))?;
                let heart = self
                    .mesh
                    .heart
                    .as_ref()
                    .ok_or_else(|| CliError::input("[mesh] files needs `heart`"))?;
                Ok((
                    load_mesh(resolve(base, omega))?,
                    load_mesh(resolve(base, heart))?,
                ))
            }
            other => Err(CliError::input(format!(
                "unknown mesh kind '{other}' (expected generate or files)"
            ))),
        }
    }

    pub fn data(
        &self,
        base: &Path,
        mesh: &Mesh,
        components: usize,
    ) -> Result<Field, CliError> {
        let n = mesh.boundary_nodes(BoundaryTag::Outer)?.len();
        match self.data.kind.as_str() {
            "harmonic" => {
                let m = self.data.m.unwrap_or(1) as f64;
                let amp = self.data.amplitude.unwrap_or(1.0);
                Ok(Field::from_fn_boundary(
                    mesh,
                    BoundaryTag::Outer,
                    components,
                    |x, y, comp| {
                        if comp == 0 {
                            Complex64::new(amp * (m * y.atan2(x)).cos(), 0.0)
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    },
                )?)
            }
            "constant" => {
                let value = self
                    .data
                    .value
                    .ok_or_else(|| CliError::input("[data] constant needs `value`"))?;
                Ok(Field::new(
                    Support::Boundary(BoundaryTag::Outer),
                    components,
                    vec![Complex64::new(value, 0.0); n * components],
                )?)
            }
            "file" => {
                let p = self
                    .data
                    .path
                    .as_ref()
                    .ok_or_else(|| CliError::input("[data] file needs `path`"))?;
                Ok(load_field_csv(
                    mesh,
                    Support::Boundary(BoundaryTag::Outer),
                    resolve(base, p),
                )?)
            }
            other => Err(CliError::input(format!(
                "unknown data kind '{other}' (expected harmonic, constant or file)"
            ))),
        }
    }

    pub fn strategy(&self, alpha_override: Option<f64>) -> Result<CauchyStrategy, CliError> {
        match self.method.kind.as_str() {
            "tikhonov" => {
                let alpha = alpha_override
                    .or(self.method.alpha)
                    .ok_or_else(|| CliError::input("[method] tikhonov needs `alpha`"))?;
                Ok(CauchyStrategy::Tikhonov { alpha })
            }
            "morozov" => Ok(CauchyStrategy::Morozov {
                delta: self.method.delta.unwrap_or(0.0),
                tau: self.method.tau.unwrap_or(1.2),
            }),
            "alternating" => Ok(CauchyStrategy::Alternating {
                max_iter: self.method.max_iter.unwrap_or(200),
                stop_tol: self.method.stop_tol.unwrap_or(1e-10),
            }),
            other => Err(CliError::input(format!(
                "unknown method '{other}' (expected tikhonov, morozov or alternating)"
            ))),
        }
    }

    /// Builds the full pipeline configuration, applying flag overrides.
    pub fn build(
        &self,
        config_path: &Path,
        alpha: Option<f64>,
        seed: Option<u64>,
        noise_level: Option<f64>,
    ) -> Result<LoadedRun, CliError> {
        let base = config_path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let op_e = self.operator(&base)?;
        let (omega, heart) = self.meshes(&base)?;
        let f = self.data(&base, &omega, op_e.components())?;
        let strategy = self.strategy(alpha)?;
        let mut config = PipelineConfig::new(
            op_e,
            self.lambda,
            self.lambda_tilde,
            omega,
            heart,
            f,
            strategy,
        )?;
        config.ctol = self.ctol;
        config.eps_ker = self.eps_ker;
        config.solver_tol = self.solver_tol;
        config.seed = seed.unwrap_or(self.seed);
        config.noise_level = noise_level.unwrap_or(self.noise_level);
        config.validate()?;
        Ok(LoadedRun { config })
    }
}
