//! Legacy ASCII VTK (`UNSTRUCTURED_GRID`) export.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::Mesh2D;
use crate::error::{FemError, Result};

/// Where a data array lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Cell,
    Point,
}

/// A named scalar or 2-vector field attached to cells or points.
#[derive(Clone, Debug)]
pub struct VtkField {
    pub name: String,
    pub location: Location,
    /// Number of components, 1 (scalar) or 2 (vector, written with a zero z-component).
    pub components: usize,
    pub values: Vec<f64>,
}

impl VtkField {
    pub fn cell_scalar(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            location: Location::Cell,
            components: 1,
            values,
        }
    }

    pub fn cell_vector(name: impl Into<String>, values: Vec<[f64; 2]>) -> Self {
        Self {
            name: name.into(),
            location: Location::Cell,
            components: 2,
            values: values.into_iter().flatten().collect(),
        }
    }

    pub fn point_scalar(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            location: Location::Point,
            components: 1,
            values,
        }
    }
}

fn check_field(mesh: &Mesh2D, field: &VtkField) -> Result<()> {
    let expected = match field.location {
        Location::Cell => mesh.num_elements(),
        Location::Point => mesh.num_vertices(),
    } * field.components;
    if field.components == 0 || field.components > 2 || field.values.len() != expected {
        return Err(FemError::DimensionMismatch(format!(
            "field `{}` has {} values, expected {expected}",
            field.name,
            field.values.len()
        )));
    }
    if field.name.is_empty() || field.name.contains(char::is_whitespace) {
        return Err(FemError::InvalidArgument(format!(
            "invalid VTK field name `{}`",
            field.name
        )));
    }
    Ok(())
}

fn write_block<W: Write>(out: &mut W, fields: &[&VtkField]) -> std::io::Result<()> {
    for f in fields {
        if f.components == 1 {
            writeln!(out, "SCALARS {} double 1", f.name)?;
            writeln!(out, "LOOKUP_TABLE default")?;
            for v in &f.values {
                writeln!(out, "{v:e}")?;
            }
        } else {
            writeln!(out, "VECTORS {} double", f.name)?;
            for c in f.values.chunks(2) {
                writeln!(out, "{:e} {:e} 0", c[0], c[1])?;
            }
        }
    }
    Ok(())
}

/// Writes the mesh and fields as a legacy ASCII VTK file (version 3.0).
pub fn write_vtk<W: Write>(mesh: &Mesh2D, fields: &[VtkField], out: &mut W) -> Result<()> {
    for f in fields {
        check_field(mesh, f)?;
    }
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "wopsip triangulation")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.num_vertices())?;
    for p in &mesh.vertices {
        writeln!(out, "{:.17e} {:.17e} 0", p.x, p.y)?;
    }
    let nt = mesh.num_elements();
    writeln!(out, "CELLS {} {}", nt, 4 * nt)?;
    for t in &mesh.triangles {
        writeln!(out, "3 {} {} {}", t.v[0], t.v[1], t.v[2])?;
    }
    writeln!(out, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(out, "5")?;
    }

    let cell: Vec<&VtkField> = fields
        .iter()
        .filter(|f| f.location == Location::Cell)
        .collect();
    let point: Vec<&VtkField> = fields
        .iter()
        .filter(|f| f.location == Location::Point)
        .collect();
    if !cell.is_empty() {
        writeln!(out, "CELL_DATA {nt}")?;
        write_block(out, &cell)?;
    }
    if !point.is_empty() {
        writeln!(out, "POINT_DATA {}", mesh.num_vertices())?;
        write_block(out, &point)?;
    }
    Ok(())
}

pub fn export_vtk(path: impl AsRef<Path>, mesh: &Mesh2D, fields: &[VtkField]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_vtk(mesh, fields, &mut w)?;
    w.flush()?;
    Ok(())
}
