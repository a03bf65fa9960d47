//! TOML run configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use diffbem::bem::{BoundaryCondition, Formulation, GridSpec, Medium, PlaneWave, QuadratureOptions, WaveConfig};
use diffbem::mesh::{load_mesh, make_icosphere, make_octasphere, Mesh, MeshFormat, ShapeBasis, Symmetry};
use diffbem::optimize::demo::ConeRadiator;
use diffbem::optimize::LossSpec;
use diffbem::solver::SolveConfig;
use diffbem::{Complex64, Vec3d};
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Recorded in run summaries; nothing in the solver is random.
    #[serde(default)]
    pub seed: u64,
    pub mesh: Option<MeshSpec>,
    pub wave: Option<WaveSpec>,
    #[serde(default)]
    pub solver: SolveConfig,
    pub shape: Option<ShapeSpec>,
    pub loss: Option<LossSpec>,
    pub output: Option<OutputSpec>,
    pub validate_sphere: Option<ValidateSphereSpec>,
    pub grad_check: Option<GradCheckSpec>,
    pub optimize: Option<OptimizeSpec>,
    pub mie: Option<MieSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    Icosphere {
        subdivisions: u32,
        #[serde(default = "one")]
        radius: f64,
    },
    Octasphere {
        subdivisions: u32,
        #[serde(default = "one")]
        radius: f64,
    },
    File {
        path: PathBuf,
        format: Option<String>,
    },
    ConeRadiator(ConeRadiator),
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SymmetrySpec {
    #[default]
    None,
    QuadrantZ,
}

impl From<SymmetrySpec> for Symmetry {
    fn from(s: SymmetrySpec) -> Self {
        match s {
            SymmetrySpec::None => Symmetry::NONE,
            SymmetrySpec::QuadrantZ => Symmetry::QUADRANT_Z,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BcSpec {
    Rigid {
        #[serde(default = "plus_z")]
        direction: [f64; 3],
        /// `[re, im]`.
        #[serde(default = "unit")]
        amplitude: [f64; 2],
    },
    /// Normal velocity per physical group (`[re, im]`, m/s); groups not
    /// listed are rigid.
    Radiation {
        #[serde(default)]
        uniform: Option<[f64; 2]>,
        #[serde(default)]
        groups: Vec<GroupVelocity>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupVelocity {
    pub group: u32,
    pub velocity: [f64; 2],
}

fn plus_z() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

fn unit() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSpec {
    /// Wavenumber (rad/m); alternatively `frequency` (Hz).
    pub k: Option<f64>,
    pub frequency: Option<f64>,
    #[serde(default = "burton_miller")]
    pub formulation: Formulation,
    /// Burton–Miller coupling `[re, im]`; default `i/k`.
    pub coupling: Option<[f64; 2]>,
    #[serde(default)]
    pub chief_points: Vec<[f64; 3]>,
    pub bc: BcSpec,
    #[serde(default)]
    pub medium: Medium,
    #[serde(default)]
    pub symmetry: SymmetrySpec,
    #[serde(default)]
    pub quadrature: QuadratureOptions,
}

fn burton_miller() -> Formulation {
    Formulation::BurtonMiller
}

/// Spline basis metadata and control values. Missing basis fields fall back
/// to the cone radiator's basis when the mesh is one.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSpec {
    pub z_min: Option<f64>,
    pub z_max: Option<f64>,
    pub n_knots: Option<usize>,
    pub n_sectors: Option<usize>,
    pub taper_radius: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    #[serde(default)]
    pub values: Vec<f64>,
}

/// Where to evaluate fields. Exactly one source is used, in the order
/// `points_csv`, `grid`, `sphere`.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub points_csv: Option<PathBuf>,
    pub grid: Option<GridSpec>,
    pub sphere: Option<SphereSamples>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereSamples {
    pub radius: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSphereSpec {
    pub subdivisions: Vec<u32>,
    pub k: Vec<f64>,
    #[serde(default = "one")]
    pub radius: f64,
    #[serde(default = "burton_miller")]
    pub formulation: Formulation,
    /// Use octahedral spheres (8·4^s elements) instead of icosahedral.
    #[serde(default)]
    pub octasphere: bool,
    #[serde(default = "two")]
    pub eval_radius: f64,
    #[serde(default = "hundred")]
    pub eval_points: usize,
    /// Upper bound on the error per subdivision level (same order).
    #[serde(default)]
    pub max_error: Vec<f64>,
    /// Require the error to decrease with refinement at every k.
    #[serde(default)]
    pub require_decreasing: bool,
    /// Require the error to grow with k at every mesh.
    #[serde(default)]
    pub require_k_trend: bool,
}

fn two() -> f64 {
    2.0
}

fn hundred() -> usize {
    100
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradCheckSpec {
    pub h: f64,
    #[serde(default = "grad_tol")]
    pub tolerance: f64,
    /// Components below this fraction of the gradient's ∞-norm use the
    /// looser `floor_tolerance`.
    #[serde(default = "noise_floor")]
    pub noise_floor: f64,
    #[serde(default = "floor_tol")]
    pub floor_tolerance: f64,
    /// Reuse the pair classes of the unperturbed mesh at every stencil point.
    #[serde(default = "yes")]
    pub freeze_classes: bool,
}

fn grad_tol() -> f64 {
    1e-3
}

fn noise_floor() -> f64 {
    1e-6
}

fn floor_tol() -> f64 {
    1e-2
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSpec {
    pub max_iters: usize,
    #[serde(default = "initial_step")]
    pub initial_step: f64,
    #[serde(default)]
    pub ftol: f64,
    #[serde(default = "gtol")]
    pub gtol: f64,
    #[serde(default = "yes")]
    pub warm_start: bool,
    #[serde(default)]
    pub compare_cold_start: bool,
}

fn initial_step() -> f64 {
    0.005
}

fn gtol() -> f64 {
    1e-8
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MieSpec {
    #[serde(default = "one")]
    pub radius: f64,
    pub k: f64,
    pub n_terms: Option<usize>,
    #[serde(default = "unit")]
    pub amplitude: [f64; 2],
    #[serde(default = "plus_z")]
    pub direction: [f64; 3],
}

fn c64(v: [f64; 2]) -> Complex64 {
    Complex64::new(v[0], v[1])
}

fn v3(v: [f64; 3]) -> Vec3d {
    Vec3d::c(v[0], v[1], v[2])
}

pub fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    s.as_ref().ok_or_else(|| CliError::Config(format!("missing [{name}] section")))
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.resolve_paths(base_dir)?;
        Ok(cfg)
    }

    /// Make referenced paths relative to the config file and check they exist.
    fn resolve_paths(&mut self, base: &Path) -> Result<(), CliError> {
        let fix = |p: &mut PathBuf| -> Result<(), CliError> {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            if !p.exists() {
                return Err(CliError::Config(format!("referenced file {} does not exist", p.display())));
            }
            Ok(())
        };
        if let Some(MeshSpec::File { path, .. }) = &mut self.mesh {
            fix(path)?;
        }
        if let Some(OutputSpec { points_csv: Some(p), .. }) = &mut self.output {
            fix(p)?;
        }
        Ok(())
    }
}

impl MeshSpec {
    pub fn build(&self) -> Result<Mesh, CliError> {
        let m = match self {
            MeshSpec::Icosphere { subdivisions, radius } => make_icosphere(*subdivisions, *radius),
            MeshSpec::Octasphere { subdivisions, radius } => make_octasphere(*subdivisions, *radius),
            MeshSpec::File { path, format } => {
                let fmt = match format.as_deref() {
                    None => MeshFormat::from_path(path)
                        .ok_or_else(|| CliError::Config(format!("cannot infer mesh format of {}", path.display())))?,
                    Some("obj") => MeshFormat::Obj,
                    Some("msh") => MeshFormat::Msh2,
                    Some(other) => return Err(CliError::Config(format!("unknown mesh format {other:?}"))),
                };
                load_mesh(path, fmt)
            }
            MeshSpec::ConeRadiator(c) => c.mesh(),
        };
        m.map_err(|e| CliError::Config(format!("mesh: {e}")))
    }

    pub fn default_basis(&self) -> Option<ShapeBasis> {
        match self {
            MeshSpec::ConeRadiator(c) => Some(c.basis()),
            _ => None,
        }
    }
}

impl ShapeSpec {
    pub fn basis(&self, fallback: Option<ShapeBasis>) -> Result<ShapeBasis, CliError> {
        let need = |v: Option<f64>, name: &str, fb: Option<f64>| {
            v.or(fb).ok_or_else(|| CliError::Config(format!("[shape] needs {name}")))
        };
        let fb = fallback.as_ref();
        let z_min = need(self.z_min, "z_min", fb.map(|b| b.z_min))?;
        let z_max = need(self.z_max, "z_max", fb.map(|b| b.z_max))?;
        let n_knots = self.n_knots.or(fb.map(|b| b.n_knots)).ok_or_else(|| CliError::Config("[shape] needs n_knots".into()))?;
        Ok(ShapeBasis {
            n_sectors: self.n_sectors.or(fb.map(|b| b.n_sectors)).unwrap_or(1),
            taper_radius: self.taper_radius.or(fb.map(|b| b.taper_radius)).unwrap_or(0.0),
            lower: self.lower.or(fb.map(|b| b.lower)).unwrap_or(f64::NEG_INFINITY),
            upper: self.upper.or(fb.map(|b| b.upper)).unwrap_or(f64::INFINITY),
            ..ShapeBasis::axisymmetric(z_min, z_max, n_knots)
        })
    }
}

impl WaveSpec {
    pub fn wavenumber(&self) -> Result<f64, CliError> {
        let k = match (self.k, self.frequency) {
            (Some(k), None) => k,
            (None, Some(f)) => 2.0 * std::f64::consts::PI * f / self.medium.c,
            _ => return Err(CliError::Config("[wave] needs exactly one of k and frequency".into())),
        };
        if !(k > 0.0 && k.is_finite()) {
            return Err(CliError::Config(format!("[wave] wavenumber must be positive, got {k}")));
        }
        Ok(k)
    }

    /// A template for multi-frequency runs, where the wavenumber comes from
    /// the loss frequencies instead.
    pub fn template(&self, mesh: &Mesh) -> Result<WaveConfig, CliError> {
        if self.k.is_some() || self.frequency.is_some() {
            return Err(CliError::Config("[wave] k and frequency are taken from [loss] frequencies here".into()));
        }
        self.with_k(mesh, 1.0)
    }

    pub fn build(&self, mesh: &Mesh) -> Result<WaveConfig, CliError> {
        self.with_k(mesh, self.wavenumber()?)
    }

    fn with_k(&self, mesh: &Mesh, k: f64) -> Result<WaveConfig, CliError> {
        let bc = match &self.bc {
            BcSpec::Rigid { direction, amplitude } => {
                BoundaryCondition::RigidScattering(PlaneWave { direction: *direction, amplitude: c64(*amplitude) })
            }
            BcSpec::Radiation { uniform, groups } => {
                let velocity = mesh
                    .groups()
                    .iter()
                    .map(|g| {
                        groups
                            .iter()
                            .find(|gv| gv.group == *g)
                            .map(|gv| c64(gv.velocity))
                            .or(uniform.map(c64))
                            .unwrap_or_default()
                    })
                    .collect();
                BoundaryCondition::NeumannRadiation { velocity }
            }
        };
        let cfg = WaveConfig {
            k,
            formulation: self.formulation,
            coupling: self.coupling.map(c64),
            chief_points: self.chief_points.iter().copied().map(v3).collect(),
            bc,
            medium: self.medium,
            symmetry: self.symmetry.into(),
            quadrature: self.quadrature,
        };
        cfg.validate(mesh.num_elements()).map_err(|e| CliError::Config(format!("[wave]: {e}")))?;
        Ok(cfg)
    }
}

impl MieSpec {
    pub fn amplitude(&self) -> Complex64 {
        c64(self.amplitude)
    }
}
