//! File emitters: VTK legacy ASCII unstructured grids (polygon cells with
//! cell data), the convergence CSV matching the table layout
//! `h,l2_err,l2_order,rot_err,rot_order`, the per-cell regularity CSV and a
//! small JSON summary. All writers format numbers with fixed precision so
//! repeated runs produce byte-identical files.

use std::io::{BufWriter, Write};
use std::path::Path;

use crate::geometry::RegionTag;
use crate::mesh::PolyMesh;
use crate::postproc::{CellFields, ConvergenceTable};
use crate::regularity::RegularityReport;

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// Mesh-only export: polygon cells with the region tag as cell data.
pub fn write_mesh_vtk(path: &Path, mesh: &PolyMesh, title: &str) -> std::io::Result<()> {
    write_vtk_impl(path, mesh, title, None)
}

/// Field export: region tag, Re/Im of the projected field and of the rot.
pub fn write_field_vtk(
    path: &Path,
    mesh: &PolyMesh,
    fields: &CellFields,
    title: &str,
) -> std::io::Result<()> {
    write_vtk_impl(path, mesh, title, Some(fields))
}

fn write_vtk_impl(
    path: &Path,
    mesh: &PolyMesh,
    title: &str,
    fields: Option<&CellFields>,
) -> std::io::Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{title}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.vertices.len())?;
    for v in &mesh.vertices {
        writeln!(out, "{} {} 0.0", fmt(v.x), fmt(v.y))?;
    }
    let total: usize = mesh.cells.iter().map(|c| c.vertices.len() + 1).sum();
    writeln!(out, "CELLS {} {total}", mesh.cells.len())?;
    for c in &mesh.cells {
        write!(out, "{}", c.vertices.len())?;
        for &v in &c.vertices {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    writeln!(out, "CELL_TYPES {}", mesh.cells.len())?;
    for _ in &mesh.cells {
        writeln!(out, "7")?;
    }
    writeln!(out, "CELL_DATA {}", mesh.cells.len())?;
    writeln!(out, "SCALARS region int 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for c in &mesh.cells {
        writeln!(out, "{}", if c.tag == RegionTag::Minus { -1 } else { 1 })?;
    }
    if let Some(f) = fields {
        writeln!(out, "VECTORS proj_re double")?;
        for v in &f.proj {
            writeln!(out, "{} {} 0.0", fmt(v[0].re), fmt(v[1].re))?;
        }
        writeln!(out, "VECTORS proj_im double")?;
        for v in &f.proj {
            writeln!(out, "{} {} 0.0", fmt(v[0].im), fmt(v[1].im))?;
        }
        writeln!(out, "SCALARS rot_re double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for r in &f.rot {
            writeln!(out, "{}", fmt(r.re))?;
        }
        writeln!(out, "SCALARS rot_im double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for r in &f.rot {
            writeln!(out, "{}", fmt(r.im))?;
        }
    }
    out.flush()
}

/// Point and cell counts of a legacy-VTK file (self-parse oracle for tests).
pub fn read_vtk_counts(path: &Path) -> std::io::Result<(usize, usize)> {
    let text = std::fs::read_to_string(path)?;
    let mut points = 0;
    let mut cells = 0;
    for line in text.lines() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("POINTS") => {
                points = it.next().unwrap_or("0").parse().unwrap_or(0);
            }
            Some("CELLS") => {
                cells = it.next().unwrap_or("0").parse().unwrap_or(0);
            }
            _ => {}
        }
    }
    Ok((points, cells))
}

/// `h,l2_err,l2_order,rot_err,rot_order` with empty order cells on the first
/// row, matching the published table layout.
pub fn write_convergence_csv(path: &Path, table: &ConvergenceTable) -> std::io::Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "h,l2_err,l2_order,rot_err,rot_order")?;
    for row in &table.rows {
        let l2o = row.l2_order.map(|o| format!("{o:.4}")).unwrap_or_default();
        let roto = row.rot_order.map(|o| format!("{o:.4}")).unwrap_or_default();
        writeln!(
            out,
            "{},{},{l2o},{},{roto}",
            fmt(row.h),
            fmt(row.l2_err),
            fmt(row.rot_err)
        )?;
    }
    out.flush()
}

/// Per-cell star-convexity audit: `cell,h_k,rho_k,tau_h_k,pass`.
pub fn write_regularity_csv(path: &Path, report: &RegularityReport) -> std::io::Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "cell,h_k,rho_k,tau_h_k,pass")?;
    for c in &report.cells {
        writeln!(
            out,
            "{},{},{},{},{}",
            c.cell,
            fmt(c.h_k),
            fmt(c.rho_k),
            fmt(c.threshold),
            c.pass as u8
        )?;
    }
    out.flush()
}

/// Minimal JSON writer for the run summary; values are numbers, strings or
/// booleans.
pub enum JsonValue {
    Num(f64),
    Int(i64),
    Str(String),
    Bool(bool),
}

pub fn write_summary_json(path: &Path, entries: &[(String, JsonValue)]) -> std::io::Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{{")?;
    for (i, (key, value)) in entries.iter().enumerate() {
        let comma = if i + 1 == entries.len() { "" } else { "," };
        match value {
            JsonValue::Num(v) => writeln!(out, "  \"{key}\": {v:.12e}{comma}")?,
            JsonValue::Int(v) => writeln!(out, "  \"{key}\": {v}{comma}")?,
            JsonValue::Str(s) => writeln!(out, "  \"{key}\": \"{s}\"{comma}")?,
            JsonValue::Bool(b) => writeln!(out, "  \"{key}\": {b}{comma}")?,
        }
    }
    writeln!(out, "}}")?;
    out.flush()
}
