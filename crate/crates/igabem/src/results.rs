//! Result bundling and serialisation: results.json with fixed float
//! formatting (byte-identical across reruns and worker counts), probe and
//! convergence CSV files, and an optional legacy-VTK export of the boundary
//! displacement field.

use crate::assembly::{
    boundary_displacement_row, interior_displacement_row, patch_displacement_coefficients,
    patch_traction_coefficients, AssemblyContext, AssemblyError, SystemMatrices,
};
use crate::model::Model;
use crate::quad::{for_each_surface_regular, Rect};
use crate::solver::{recover_fields, SolveMethod, SolveResult};
use crate::{Mat3, Vec3};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("serialisation failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("probe '{id}' lies outside the domain")]
    ProbeOutside { id: String },
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Provenance {
    pub model_hash: String,
    pub model_name: String,
    pub version: String,
    pub method: SolveMethod,
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PatchOut {
    pub name: String,
    /// Solved + prescribed displacement coefficients, net order.
    pub displacement_coefficients: Vec<[f64; 3]>,
    /// Solved + prescribed traction coefficients, net order.
    pub traction_coefficients: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridOut {
    pub inclusion: usize,
    pub index: usize,
    pub position: [f64; 3],
    pub on_boundary: bool,
    pub u: [f64; 3],
    /// Voigt strain; bar points carry bar-local axes (axial third).
    pub eps: [f64; 6],
    pub sigma0: [f64; 6],
    pub stress: [f64; 6],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axial_force: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProbeOut {
    pub id: String,
    pub point: [f64; 3],
    pub u: [f64; 3],
    pub location: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResultBundle {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub n_unknowns: usize,
    pub residual: f64,
    pub iterations: Vec<f64>,
    pub patches: Vec<PatchOut>,
    pub grid: Vec<GridOut>,
    pub probes: Vec<ProbeOut>,
}

/// Displacement at an arbitrary point of the solved model.
pub fn evaluate_point(
    ctx: &AssemblyContext,
    sys: &SystemMatrices,
    sol: &SolveResult,
    point: &Vec3,
) -> Result<([f64; 3], &'static str), AssemblyError> {
    if let Some((patch, u, v)) = ctx.boundary_location(point) {
        let row = boundary_displacement_row(ctx, sys.grid.len(), patch, u, v)?;
        let val = &row.mat * &sol.x + row.known;
        return Ok(([val[0], val[1], val[2]], "boundary"));
    }
    let row = interior_displacement_row(ctx, &sys.grid, point, None)?;
    if (row.freeterm + Mat3::identity()).norm() > 0.3 {
        return Err(AssemblyError::GridPointOutside {
            inclusion: usize::MAX,
            index: usize::MAX,
        });
    }
    let val = &row.mat * &sol.x + row.known + &row.b0 * &sol.grid_sigma0;
    Ok(([val[0], val[1], val[2]], "interior"))
}

/// Assemble the output bundle for a solved model.
pub fn build_bundle(
    model: &Model,
    ctx: &AssemblyContext,
    sys: &SystemMatrices,
    sol: &SolveResult,
) -> Result<ResultBundle, OutputError> {
    let patches = (0..model.patches.len())
        .map(|pi| PatchOut {
            name: model.patches[pi].name.clone(),
            displacement_coefficients: patch_displacement_coefficients(ctx, pi, &sol.x)
                .into_iter()
                .map(|v| [v[0], v[1], v[2]])
                .collect(),
            traction_coefficients: patch_traction_coefficients(ctx, pi, &sol.x)
                .into_iter()
                .map(|v| [v[0], v[1], v[2]])
                .collect(),
        })
        .collect();

    let fields = recover_fields(sol, sys, &model.inclusions);
    let grid = sys
        .grid
        .entries
        .iter()
        .enumerate()
        .map(|(gi, e)| GridOut {
            inclusion: e.inclusion,
            index: e.index,
            position: e.position.into(),
            on_boundary: e.boundary.is_some(),
            u: [
                sol.grid_u[3 * gi],
                sol.grid_u[3 * gi + 1],
                sol.grid_u[3 * gi + 2],
            ],
            eps: std::array::from_fn(|c| sol.grid_eps[6 * gi + c]),
            sigma0: std::array::from_fn(|c| sol.grid_sigma0[6 * gi + c]),
            stress: fields[gi].stress,
            axial_force: fields[gi].axial_force,
        })
        .collect();

    let mut probes = Vec::new();
    for spec in &model.file.output.probes {
        let point = Vec3::new(spec.point[0], spec.point[1], spec.point[2]);
        let (u, location) =
            evaluate_point(ctx, sys, sol, &point).map_err(|_| OutputError::ProbeOutside {
                id: spec.id.clone(),
            })?;
        probes.push(ProbeOut {
            id: spec.id.clone(),
            point: spec.point,
            u,
            location: location.into(),
        });
    }

    Ok(ResultBundle {
        schema_version: crate::model::SCHEMA_VERSION,
        provenance: Provenance {
            model_hash: model.hash.clone(),
            model_name: model.file.name.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            method: sol.method,
            tol: model.file.solver.tol,
            max_iter: model.file.solver.max_iter,
        },
        n_unknowns: sys.n_unknowns,
        residual: sol.residual,
        iterations: sol.increments.clone(),
        patches,
        grid,
        probes,
    })
}

/// serde_json formatter printing every float with 17 significant digits,
/// so identical numbers serialise to identical bytes and reread exactly.
struct FixedFloats {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

impl serde_json::ser::Formatter for FixedFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    // delegate the structural parts to the pretty formatter
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        serde_json::ser::Formatter::begin_array(&mut self.inner, w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        serde_json::ser::Formatter::end_array(&mut self.inner, w)
    }
    fn begin_array_value<W: ?Sized + Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        serde_json::ser::Formatter::begin_array_value(&mut self.inner, w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        serde_json::ser::Formatter::end_array_value(&mut self.inner, w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        serde_json::ser::Formatter::begin_object(&mut self.inner, w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        serde_json::ser::Formatter::end_object(&mut self.inner, w)
    }
    fn begin_object_key<W: ?Sized + Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        serde_json::ser::Formatter::begin_object_key(&mut self.inner, w, first)
    }
    fn end_object_key<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        serde_json::ser::Formatter::end_object_key(&mut self.inner, w)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        serde_json::ser::Formatter::begin_object_value(&mut self.inner, w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        serde_json::ser::Formatter::end_object_value(&mut self.inner, w)
    }
}

/// Serialise a bundle (or any value) with the fixed float format.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let mut out = Vec::new();
    let fmt = FixedFloats {
        inner: serde_json::ser::PrettyFormatter::new(),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut out, fmt);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

fn write_file(path: &Path, contents: &str) -> Result<(), OutputError> {
    std::fs::write(path, contents).map_err(|source| OutputError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write results.json, probes.csv and (when requested) boundary.vtk into
/// `dir`. Returns the list of files written.
pub fn write_results(
    bundle: &ResultBundle,
    model: &Model,
    dir: &Path,
) -> Result<Vec<std::path::PathBuf>, OutputError> {
    std::fs::create_dir_all(dir).map_err(|source| OutputError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::new();

    let json_path = dir.join("results.json");
    write_file(&json_path, &(to_json_string(bundle)? + "\n"))?;
    written.push(json_path);

    let mut csv = String::from("id,x,y,z,ux,uy,uz,location,model_hash\n");
    for p in &bundle.probes {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            p.id,
            fmt17(p.point[0]),
            fmt17(p.point[1]),
            fmt17(p.point[2]),
            fmt17(p.u[0]),
            fmt17(p.u[1]),
            fmt17(p.u[2]),
            p.location,
            bundle.provenance.model_hash
        ));
    }
    let csv_path = dir.join("probes.csv");
    write_file(&csv_path, &csv)?;
    written.push(csv_path);

    if model.file.output.vtk {
        let vtk_path = dir.join("boundary.vtk");
        write_file(&vtk_path, &boundary_vtk(model, bundle)?)?;
        written.push(vtk_path);
    }
    Ok(written)
}

/// One sweep result row: the swept value plus each probe's displacement.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub probes: Vec<ProbeOut>,
}

pub fn write_convergence_csv(
    rows: &[SweepRow],
    model_hash: &str,
    dir: &Path,
) -> Result<std::path::PathBuf, OutputError> {
    std::fs::create_dir_all(dir).map_err(|source| OutputError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut header = String::from("value");
    if let Some(first) = rows.first() {
        for p in &first.probes {
            header.push_str(&format!(",{id}_ux,{id}_uy,{id}_uz", id = p.id));
        }
    }
    header.push_str(",model_hash");
    let mut csv = header + "\n";
    for row in rows {
        csv.push_str(&fmt17(row.value));
        for p in &row.probes {
            csv.push_str(&format!(
                ",{},{},{}",
                fmt17(p.u[0]),
                fmt17(p.u[1]),
                fmt17(p.u[2])
            ));
        }
        csv.push_str(&format!(",{model_hash}"));
        csv.push('\n');
    }
    let path = dir.join("convergence.csv");
    write_file(&path, &csv)?;
    Ok(path)
}

/// Legacy-VTK unstructured export of the boundary displacement field,
/// sampled on a parameter grid per patch.
fn boundary_vtk(model: &Model, bundle: &ResultBundle) -> Result<String, OutputError> {
    let n_sample = 8usize;
    let mut points = Vec::new();
    let mut vectors = Vec::new();
    let mut cells: Vec<[usize; 4]> = Vec::new();
    for (pi, patch) in model.patches.iter().enumerate() {
        let base = points.len();
        let surf = &patch.surface;
        let rect = Rect::full(surf);
        let coef = &bundle.patches[pi].displacement_coefficients;
        for j in 0..=n_sample {
            for i in 0..=n_sample {
                let u = rect.u.0 + (rect.u.1 - rect.u.0) * i as f64 / n_sample as f64;
                let v = rect.v.0 + (rect.v.1 - rect.v.0) * j as f64 / n_sample as f64;
                let x = surf.point(u, v).map_err(AssemblyError::from)?;
                let basis = surf
                    .nonzero_rational_basis(u, v)
                    .map_err(AssemblyError::from)?;
                let mut disp = Vec3::zeros();
                for (flat, val) in basis {
                    disp += Vec3::new(coef[flat][0], coef[flat][1], coef[flat][2]) * val;
                }
                points.push(x);
                vectors.push(disp);
            }
        }
        for j in 0..n_sample {
            for i in 0..n_sample {
                let p = base + j * (n_sample + 1) + i;
                cells.push([p, p + 1, p + n_sample + 2, p + n_sample + 1]);
            }
        }
    }
    let mut out = String::new();
    out.push_str(&format!(
        "# vtk DataFile Version 3.0\nboundary displacements, model {}\nASCII\nDATASET UNSTRUCTURED_GRID\n",
        &bundle.provenance.model_hash[..16.min(bundle.provenance.model_hash.len())]
    ));
    out.push_str(&format!("POINTS {} double\n", points.len()));
    for p in &points {
        out.push_str(&format!("{} {} {}\n", fmt17(p.x), fmt17(p.y), fmt17(p.z)));
    }
    out.push_str(&format!("CELLS {} {}\n", cells.len(), cells.len() * 5));
    for c in &cells {
        out.push_str(&format!("4 {} {} {} {}\n", c[0], c[1], c[2], c[3]));
    }
    out.push_str(&format!("CELL_TYPES {}\n", cells.len()));
    for _ in &cells {
        out.push_str("9\n");
    }
    out.push_str(&format!(
        "POINT_DATA {}\nVECTORS displacement double\n",
        points.len()
    ));
    for v in &vectors {
        out.push_str(&format!("{} {} {}\n", fmt17(v.x), fmt17(v.y), fmt17(v.z)));
    }
    Ok(out)
}

/// Mean displacement over one patch, area-weighted; used for reporting the
/// composite response of a loaded face.
pub fn patch_mean_displacement(
    ctx: &AssemblyContext,
    patch: usize,
    x: &nalgebra::DVector<f64>,
) -> Result<Vec3, AssemblyError> {
    let coef = patch_displacement_coefficients(ctx, patch, x);
    let surf = &ctx.model.patches[patch].surface;
    let far = Vec3::repeat(f64::INFINITY);
    let mut acc = Vec3::zeros();
    let mut area = 0.0;
    for_each_surface_regular(surf, &Rect::full(surf), &far, &ctx.opts, &mut |p| {
        let basis = surf
            .nonzero_rational_basis(p.u, p.v)
            .expect("in-domain sample");
        let mut u = Vec3::zeros();
        for (flat, val) in basis {
            u += coef[flat] * val;
        }
        acc += u * p.weight;
        area += p.weight;
    })?;
    Ok(acc / area)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, fixtures::unit_cube_model, AssemblyContext};
    use crate::solver::{solve, SolveOptions};
    use approx::assert_relative_eq;

    fn solved_cube() -> (Model, ResultBundle) {
        let mut model = unit_cube_model(1.0, 0.0, 1.0, false, "");
        model.file.output.probes = vec![
            crate::model::ProbeSpec {
                id: "top".into(),
                point: [0.5, 0.5, 1.0],
            },
            crate::model::ProbeSpec {
                id: "mid".into(),
                point: [0.5, 0.5, 0.5],
            },
        ];
        let ctx = AssemblyContext::build(&model).unwrap();
        let sys = assemble(&ctx).unwrap();
        let sol = solve(&sys, &SolveOptions::default()).unwrap();
        let bundle = build_bundle(&model, &ctx, &sys, &sol).unwrap();
        (model.clone(), bundle)
    }

    #[test]
    fn probes_evaluate_on_boundary_and_interior() {
        let (_, bundle) = solved_cube();
        assert_eq!(bundle.probes.len(), 2);
        assert_eq!(bundle.probes[0].location, "boundary");
        assert_relative_eq!(bundle.probes[0].u[2], 1.0, epsilon = 2e-3);
        assert_eq!(bundle.probes[1].location, "interior");
        assert_relative_eq!(bundle.probes[1].u[2], 0.5, epsilon = 2e-3);
    }

    #[test]
    fn results_json_roundtrip_and_determinism() {
        let (_, bundle) = solved_cube();
        let text = to_json_string(&bundle).unwrap();
        let reread: ResultBundle = serde_json::from_str(&text).unwrap();
        assert_eq!(to_json_string(&reread).unwrap(), text);
        assert_eq!(reread, bundle);
        // 17 significant digits
        assert!(text.contains("e0") || text.contains("e-") || text.contains("e1"));
    }

    #[test]
    fn writers_produce_files() {
        let (mut model, bundle) = solved_cube();
        model.file.output.vtk = true;
        let ctx = AssemblyContext::build(&model).unwrap();
        let dir = std::env::temp_dir().join(format!("igabem-results-{}", std::process::id()));
        let written = write_results(&bundle, &model, &dir).unwrap();
        assert!(written.iter().any(|p| p.ends_with("results.json")));
        assert!(written.iter().any(|p| p.ends_with("probes.csv")));
        assert!(written.iter().any(|p| p.ends_with("boundary.vtk")));
        let csv = std::fs::read_to_string(dir.join("probes.csv")).unwrap();
        assert!(csv.starts_with("id,x,y,z,ux,uy,uz,location,model_hash\n"));
        assert_eq!(csv.lines().count(), 3);
        let vtk = std::fs::read_to_string(dir.join("boundary.vtk")).unwrap();
        assert!(vtk.starts_with("# vtk DataFile"));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn empty_probe_list_gives_header_only() {
        let model = unit_cube_model(1.0, 0.0, 1.0, false, "");
        let ctx = AssemblyContext::build(&model).unwrap();
        let sys = assemble(&ctx).unwrap();
        let sol = solve(&sys, &SolveOptions::default()).unwrap();
        let bundle = build_bundle(&model, &ctx, &sys, &sol).unwrap();
        let dir = std::env::temp_dir().join(format!("igabem-empty-{}", std::process::id()));
        write_results(&bundle, &model, &dir).unwrap();
        let csv = std::fs::read_to_string(dir.join("probes.csv")).unwrap();
        assert_eq!(csv, "id,x,y,z,ux,uy,uz,location,model_hash\n");
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn convergence_csv_rows() {
        let rows: Vec<SweepRow> = (2..=21)
            .map(|j| SweepRow {
                value: j as f64,
                probes: vec![ProbeOut {
                    id: "bar_top".into(),
                    point: [0.5, 0.5, 1.0],
                    u: [0.0, 0.0, 0.9],
                    location: "boundary".into(),
                }],
            })
            .collect();
        let dir = std::env::temp_dir().join(format!("igabem-sweep-{}", std::process::id()));
        let path = write_convergence_csv(&rows, "deadbeef", &dir).unwrap();
        let csv = std::fs::read_to_string(path).unwrap();
        assert_eq!(csv.lines().count(), 21); // header + 20 rows
        assert!(csv.starts_with("value,bar_top_ux,bar_top_uy,bar_top_uz,model_hash\n"));
        assert!(csv.lines().nth(1).unwrap().ends_with(",deadbeef"));
        std::fs::remove_dir_all(&dir).ok();
    }
}
