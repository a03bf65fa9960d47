//! Evaluation-point input and field output (CSV, legacy VTK).

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::BemError;
use crate::geometry::Vec3;

/// Points as `x,y,z` per line. Blank lines, `#` comments and a leading
/// non-numeric header line are skipped.
pub fn read_points_csv(text: &str) -> Result<Vec<Vec3<f64>>, BemError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() == 3 && v.iter().all(|x| x.is_finite()) => out.push(Vec3::c(v[0], v[1], v[2])),
            Err(_) if out.is_empty() && idx == 0 => continue,
            _ => {
                return Err(BemError::Parse { line: idx + 1, msg: format!("expected three numbers, got `{line}`") });
            }
        }
    }
    Ok(out)
}

/// Structured grid with x varying fastest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
    pub counts: [usize; 3],
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<Vec3<f64>> {
        let [nx, ny, nz] = self.counts;
        let mut out = Vec::with_capacity(self.len());
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    out.push(Vec3::c(
                        self.origin[0] + i as f64 * self.spacing[0],
                        self.origin[1] + j as f64 * self.spacing[1],
                        self.origin[2] + k as f64 * self.spacing[2],
                    ));
                }
            }
        }
        out
    }
}

pub fn write_field_csv(path: &Path, points: &[Vec3<f64>], values: &[Complex64]) -> Result<(), BemError> {
    if points.len() != values.len() {
        return Err(BemError::Dimension { expected: points.len(), got: values.len() });
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "x,y,z,re,im")?;
    for (p, v) in points.iter().zip(values) {
        writeln!(w, "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}", p.x, p.y, p.z, v.re, v.im)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_vtk_structured_points(path: &Path, grid: &GridSpec, values: &[Complex64]) -> Result<(), BemError> {
    if values.len() != grid.len() {
        return Err(BemError::Dimension { expected: grid.len(), got: values.len() });
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "diffbem pressure field")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {} {} {}", grid.counts[0], grid.counts[1], grid.counts[2])?;
    writeln!(w, "ORIGIN {} {} {}", grid.origin[0], grid.origin[1], grid.origin[2])?;
    writeln!(w, "SPACING {} {} {}", grid.spacing[0], grid.spacing[1], grid.spacing[2])?;
    writeln!(w, "POINT_DATA {}", grid.len())?;
    let parts: [(&str, fn(&Complex64) -> f64); 3] =
        [("pressure_re", |z| z.re), ("pressure_im", |z| z.im), ("pressure_abs", |z| z.norm())];
    for (name, f) in parts {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in values {
            writeln!(w, "{:.9e}", f(v))?;
        }
    }
    w.flush()?;
    Ok(())
}
