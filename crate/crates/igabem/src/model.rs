//! Declarative model files: JSON schema, validation and conversion into
//! runtime boundary/inclusion structures. All quantities are dimensionless.

use crate::assembly::{Bc, Inclusion, Patch};
use crate::inclusion::{GeneralInclusion, LinearInclusion, SigmaInterpolation};
use crate::kernels::ElasticConstants;
use crate::nurbs::{KnotVector, NurbsSurface, SurfDir};
use crate::quad::QuadOptions;
use crate::Vec3;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read model file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("model JSON invalid: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema_version {0}, expected {SCHEMA_VERSION}")]
    SchemaVersion(u32),
    #[error("{context}: {message}")]
    Invalid { context: String, message: String },
}

fn invalid(context: impl Into<String>, message: impl std::fmt::Display) -> ModelError {
    ModelError::Invalid {
        context: context.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub material: MaterialSpec,
    pub patches: Vec<PatchSpec>,
    /// Named surfaces referenced by general inclusions.
    #[serde(default)]
    pub surfaces: BTreeMap<String, SurfaceSpec>,
    #[serde(default)]
    pub inclusions: Vec<InclusionSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub quadrature: QuadOptions,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub e: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchSpec {
    pub name: String,
    pub surface: SurfaceSpec,
    #[serde(default)]
    pub refine: RefineSpec,
    /// Boundary condition per displacement component.
    pub bc: [BcSpec; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    pub degree_u: usize,
    pub degree_v: usize,
    pub knots_u: Vec<f64>,
    pub knots_v: Vec<f64>,
    /// Control net, u index running fastest.
    pub control_points: Vec<[f64; 3]>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineSpec {
    pub elevate_u: usize,
    pub elevate_v: usize,
    pub insert_u: Vec<f64>,
    pub insert_v: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum BcSpec {
    #[serde(rename = "fixed")]
    Fixed(f64),
    #[serde(rename = "traction")]
    Traction(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum InclusionSpec {
    #[serde(rename = "linear")]
    Linear {
        name: String,
        start: [f64; 3],
        end: [f64; 3],
        radius: f64,
        internal_points: usize,
        e_incl: f64,
    },
    #[serde(rename = "general")]
    General {
        name: String,
        /// Names into the model's `surfaces` table.
        bottom: String,
        top: String,
        grid: [usize; 3],
        e_incl: f64,
        #[serde(default)]
        nu_incl: f64,
        #[serde(default)]
        sigma_interpolation: SigmaSpec,
    },
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
pub enum SigmaSpec {
    #[default]
    #[serde(rename = "linear")]
    Linear,
    #[serde(rename = "constant")]
    Constant,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub enum MethodSpec {
    #[serde(rename = "onestep")]
    OneStep,
    #[serde(rename = "coupled")]
    Coupled,
    #[serde(rename = "newton")]
    Newton,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub method: MethodSpec,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            method: MethodSpec::OneStep,
            tol: 1e-8,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub probes: Vec<ProbeSpec>,
    pub vtk: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub id: String,
    pub point: [f64; 3],
}

/// A parsed, validated model ready for assembly.
#[derive(Debug, Clone)]
pub struct Model {
    pub file: ModelFile,
    /// SHA-256 of the model text, hex encoded.
    pub hash: String,
    pub domain: ElasticConstants,
    pub patches: Vec<Patch>,
    pub inclusions: Vec<Inclusion>,
}

fn build_surface(spec: &SurfaceSpec, context: &str) -> Result<NurbsSurface, ModelError> {
    let kv_u = KnotVector::new(spec.knots_u.clone(), spec.degree_u)
        .map_err(|e| invalid(format!("{context}.knots_u"), e))?;
    let kv_v = KnotVector::new(spec.knots_v.clone(), spec.degree_v)
        .map_err(|e| invalid(format!("{context}.knots_v"), e))?;
    let points: Vec<Vec3> = spec
        .control_points
        .iter()
        .map(|p| Vec3::new(p[0], p[1], p[2]))
        .collect();
    let weights = match &spec.weights {
        Some(w) => w.clone(),
        None => vec![1.0; points.len()],
    };
    NurbsSurface::new(kv_u, kv_v, points, weights).map_err(|e| invalid(context, e))
}

fn refine_surface(
    surface: NurbsSurface,
    refine: &RefineSpec,
    context: &str,
) -> Result<NurbsSurface, ModelError> {
    let mut s = surface;
    for _ in 0..refine.elevate_u {
        s = s
            .elevate_order(SurfDir::U)
            .map_err(|e| invalid(format!("{context}.refine.elevate_u"), e))?;
    }
    for _ in 0..refine.elevate_v {
        s = s
            .elevate_order(SurfDir::V)
            .map_err(|e| invalid(format!("{context}.refine.elevate_v"), e))?;
    }
    for &u in &refine.insert_u {
        s = s
            .insert_knot(SurfDir::U, u)
            .map_err(|e| invalid(format!("{context}.refine.insert_u"), e))?;
    }
    for &v in &refine.insert_v {
        s = s
            .insert_knot(SurfDir::V, v)
            .map_err(|e| invalid(format!("{context}.refine.insert_v"), e))?;
    }
    Ok(s)
}

impl std::str::FromStr for Model {
    type Err = ModelError;

    fn from_str(text: &str) -> Result<Self, ModelError> {
        let file: ModelFile = serde_json::from_str(text)?;
        Self::from_file(file, text)
    }
}

impl Model {
    pub fn from_path(path: &std::path::Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        text.parse()
    }

    pub fn from_file(file: ModelFile, text: &str) -> Result<Self, ModelError> {
        if file.schema_version != SCHEMA_VERSION {
            return Err(ModelError::SchemaVersion(file.schema_version));
        }
        let hash = {
            use sha2::{Digest, Sha256};
            let mut hasher = Sha256::new();
            hasher.update(text.as_bytes());
            hex_string(&hasher.finalize())
        };
        let domain = ElasticConstants::new(file.material.e, file.material.nu)
            .map_err(|e| invalid("material", e))?;

        if file.patches.is_empty() {
            return Err(invalid(
                "patches",
                "at least one boundary patch is required",
            ));
        }
        let mut patches = Vec::with_capacity(file.patches.len());
        for spec in &file.patches {
            let context = format!("patches[{}]", spec.name);
            let surface = build_surface(&spec.surface, &context)?;
            let surface = refine_surface(surface, &spec.refine, &context)?;
            for dir in [SurfDir::U, SurfDir::V] {
                let degree = surface.knot_vector(dir).degree();
                if degree > 4 {
                    return Err(invalid(
                        &context,
                        format!("field basis degree {degree} exceeds the supported maximum of 4"),
                    ));
                }
            }
            let bc = spec.bc.map(|b| match b {
                BcSpec::Fixed(v) => Bc::Fixed(v),
                BcSpec::Traction(v) => Bc::Traction(v),
            });
            patches.push(Patch {
                name: spec.name.clone(),
                surface,
                bc,
            });
        }

        let mut inclusions = Vec::with_capacity(file.inclusions.len());
        for spec in &file.inclusions {
            match spec {
                InclusionSpec::Linear {
                    name,
                    start,
                    end,
                    radius,
                    internal_points,
                    e_incl,
                } => {
                    let context = format!("inclusions[{name}]");
                    let material = ElasticConstants::new(*e_incl, 0.0)
                        .map_err(|e| invalid(format!("{context}.e_incl"), e))?;
                    let bar = LinearInclusion::from_endpoints(
                        Vec3::new(start[0], start[1], start[2]),
                        Vec3::new(end[0], end[1], end[2]),
                        *radius,
                        *internal_points,
                        material,
                    )
                    .map_err(|e| invalid(&context, e))?;
                    inclusions.push(Inclusion::Bar(bar));
                }
                InclusionSpec::General {
                    name,
                    bottom,
                    top,
                    grid,
                    e_incl,
                    nu_incl,
                    sigma_interpolation,
                } => {
                    let context = format!("inclusions[{name}]");
                    let lookup = |key: &String, which: &str| {
                        file.surfaces
                            .get(key)
                            .ok_or_else(|| {
                                invalid(
                                    format!("{context}.{which}"),
                                    format!("surface '{key}' not defined"),
                                )
                            })
                            .and_then(|s| build_surface(s, &format!("surfaces[{key}]")))
                    };
                    let bottom = lookup(bottom, "bottom")?;
                    let top = lookup(top, "top")?;
                    let material = ElasticConstants::new(*e_incl, *nu_incl)
                        .map_err(|e| invalid(format!("{context}.e_incl"), e))?;
                    let sigma = match sigma_interpolation {
                        SigmaSpec::Linear => SigmaInterpolation::Linear,
                        SigmaSpec::Constant => SigmaInterpolation::Constant,
                    };
                    let incl = GeneralInclusion::new(bottom, top, *grid, material, sigma)
                        .map_err(|e| invalid(&context, e))?;
                    inclusions.push(Inclusion::General(incl));
                }
            }
        }

        if !(file.solver.tol > 0.0) {
            return Err(invalid("solver.tol", "tolerance must be positive"));
        }
        if file.solver.max_iter == 0 {
            return Err(invalid(
                "solver.max_iter",
                "at least one iteration is required",
            ));
        }

        Ok(Self {
            file,
            hash,
            domain,
            patches,
            inclusions,
        })
    }

    /// Bounding-box diagonal of all patch control points.
    pub fn diameter(&self) -> f64 {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for p in &self.patches {
            for q in p.surface.points() {
                lo = lo.inf(q);
                hi = hi.sup(q);
            }
        }
        (hi - lo).norm()
    }
}

pub fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}
