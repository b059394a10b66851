//! Plain-text field dumps.
//!
//! ```text
//! # field=y kind=time nx=5 ny=5 nt=4 lx=1 ly=1 T=1
//! 0,0.0000000000000000e0,v(0,0),v(1,0),...
//! ```
//!
//! One row per time level (`m,t,values...`), values in storage order (x
//! fastest). Spatial slices are written as a single row with `m = 0`.
//! Values carry 17 significant digits so a dump reads back bit-identical.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{BoundaryTimeField, NodalField, SpaceField, TimeField};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Time,
    Space,
    Boundary,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Time => "time",
            Kind::Space => "space",
            Kind::Boundary => "boundary",
        }
    }
}

fn header(name: &str, kind: Kind, mesh: &Mesh) -> String {
    format!(
        "# field={name} kind={} nx={} ny={} nt={} lx={} ly={} T={}\n",
        kind.name(),
        mesh.nx,
        mesh.ny,
        mesh.nt,
        mesh.lx,
        mesh.ly,
        mesh.t_final
    )
}

fn push_row(out: &mut String, m: usize, t: f64, values: &[f64]) {
    write!(out, "{m},{t:.16e}").unwrap();
    for v in values {
        write!(out, ",{v:.16e}").unwrap();
    }
    out.push('\n');
}

pub fn format_time_field(name: &str, field: &TimeField) -> String {
    let mesh = field.mesh();
    let mut out = header(name, Kind::Time, mesh);
    for m in 0..mesh.levels() {
        push_row(&mut out, m, mesh.t(m), field.level(m));
    }
    out
}

pub fn format_space_field(name: &str, field: &SpaceField) -> String {
    let mut out = header(name, Kind::Space, field.mesh());
    push_row(&mut out, 0, 0.0, field.values());
    out
}

pub fn format_boundary_field(name: &str, field: &BoundaryTimeField) -> String {
    let mesh = field.mesh();
    let mut out = header(name, Kind::Boundary, mesh);
    for m in 0..mesh.levels() {
        push_row(&mut out, m, mesh.t(m), field.level(m));
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn write_time_field(path: &Path, name: &str, field: &TimeField) -> Result<()> {
    write_file(path, &format_time_field(name, field))
}

pub fn write_space_field(path: &Path, name: &str, field: &SpaceField) -> Result<()> {
    write_file(path, &format_space_field(name, field))
}

pub fn write_boundary_field(path: &Path, name: &str, field: &BoundaryTimeField) -> Result<()> {
    write_file(path, &format_boundary_field(name, field))
}

struct Parsed {
    kind: Kind,
    rows: Vec<Vec<f64>>,
}

fn parse(path: &Path, text: &str, mesh: &Mesh) -> Result<Parsed> {
    let fail = |line: usize, message: String| Error::Format { path: path.to_path_buf(), line, message };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines.next().ok_or_else(|| fail(1, "empty file".into()))?;
    let head = head.trim().strip_prefix('#').ok_or_else(|| fail(1, "missing '# field=...' header".into()))?;

    let mut kind = None;
    for token in head.split_whitespace() {
        let (key, value) = token.split_once('=').ok_or_else(|| fail(1, format!("malformed header token '{token}'")))?;
        let expect_dim = |want: usize| -> Result<()> {
            let got: usize = value.parse().map_err(|_| fail(1, format!("bad {key} '{value}'")))?;
            if got != want {
                return Err(fail(1, format!("{key}={got} does not match mesh {key}={want}")));
            }
            Ok(())
        };
        match key {
            "kind" => {
                kind = Some(match value {
                    "time" => Kind::Time,
                    "space" => Kind::Space,
                    "boundary" => Kind::Boundary,
                    other => return Err(fail(1, format!("unknown kind '{other}'"))),
                })
            }
            "nx" => expect_dim(mesh.nx)?,
            "ny" => expect_dim(mesh.ny)?,
            "field" | "nt" | "lx" | "ly" | "T" => {}
            other => return Err(fail(1, format!("unknown header key '{other}'"))),
        }
    }
    let kind = kind.ok_or_else(|| fail(1, "header lacks kind=".into()))?;

    let mut rows = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let mut cells = line.split(',');
        let m: usize =
            cells.next().and_then(|c| c.trim().parse().ok()).ok_or_else(|| fail(lineno, "bad time index".into()))?;
        if m != rows.len() {
            return Err(fail(lineno, format!("expected time index {}, found {m}", rows.len())));
        }
        cells.next().ok_or_else(|| fail(lineno, "missing time column".into()))?;
        let values = cells
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| fail(lineno, e.to_string()))?;
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(fail(lineno, format!("non-finite value in column {}", bad + 2)));
        }
        rows.push(values);
    }
    Ok(Parsed { kind, rows })
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn check_rows(path: &Path, parsed: &Parsed, kind: Kind, levels: usize, width: usize) -> Result<Vec<f64>> {
    let fail = |message: String| Error::Format { path: path.to_path_buf(), line: 1, message };
    if parsed.kind != kind {
        return Err(fail(format!("expected a {} field, found {}", kind.name(), parsed.kind.name())));
    }
    if parsed.rows.len() != levels {
        return Err(fail(format!("expected {levels} rows, found {}", parsed.rows.len())));
    }
    let mut flat = Vec::with_capacity(levels * width);
    for (m, row) in parsed.rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::Format {
                path: path.to_path_buf(),
                line: m + 2,
                message: format!("expected {width} values, found {}", row.len()),
            });
        }
        flat.extend_from_slice(row);
    }
    Ok(flat)
}

pub fn parse_time_field(path: &Path, text: &str, mesh: &Mesh) -> Result<TimeField> {
    let parsed = parse(path, text, mesh)?;
    let flat = check_rows(path, &parsed, Kind::Time, mesh.levels(), mesh.nodes())?;
    TimeField::from_values(mesh, flat)
}

pub fn parse_space_field(path: &Path, text: &str, mesh: &Mesh) -> Result<SpaceField> {
    let parsed = parse(path, text, mesh)?;
    let flat = check_rows(path, &parsed, Kind::Space, 1, mesh.nodes())?;
    SpaceField::from_values(mesh, flat)
}

pub fn parse_boundary_field(path: &Path, text: &str, mesh: &Mesh) -> Result<BoundaryTimeField> {
    let parsed = parse(path, text, mesh)?;
    let flat = check_rows(path, &parsed, Kind::Boundary, mesh.levels(), mesh.boundary_len())?;
    BoundaryTimeField::from_values(mesh, flat)
}

pub fn read_time_field(path: &Path, mesh: &Mesh) -> Result<TimeField> {
    parse_time_field(path, &read_text(path)?, mesh)
}

pub fn read_space_field(path: &Path, mesh: &Mesh) -> Result<SpaceField> {
    parse_space_field(path, &read_text(path)?, mesh)
}

pub fn read_boundary_field(path: &Path, mesh: &Mesh) -> Result<BoundaryTimeField> {
    parse_boundary_field(path, &read_text(path)?, mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_and_row_layout() {
        let mesh = Mesh::unit(3, 3, 1, 1.0).unwrap();
        let f = TimeField::from_fn(&mesh, |x, y, _| x + 2.0 * y);
        let text = format_time_field("psi", &f);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# field=psi kind=time nx=3 ny=3 nt=1 lx=1 ly=1 T=1");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 2 + 9);
        assert_eq!(row[0], "0");
        assert_eq!(row[3].parse::<f64>().unwrap(), 0.5); // v(1,0)
        assert_eq!(row[5].parse::<f64>().unwrap(), 1.0); // v(0,1)
    }

    #[test]
    fn wrong_dimensions_are_reported() {
        let mesh = Mesh::unit(3, 3, 1, 1.0).unwrap();
        let other = Mesh::unit(4, 3, 1, 1.0).unwrap();
        let text = format_time_field("y", &TimeField::zeros(&mesh));
        let err = parse_time_field(Path::new("y.csv"), &text, &other).unwrap_err();
        assert!(err.to_string().contains("nx=3"), "{err}");
        let slice = format_space_field("y0", &SpaceField::zeros(&mesh));
        assert!(parse_time_field(Path::new("y0.csv"), &slice, &mesh).is_err());
    }

    #[test]
    fn boundary_field_round_trip() {
        let mesh = Mesh::new(4, 3, 2, 1.5, 1.0, 0.5).unwrap();
        let f = BoundaryTimeField::from_fn(&mesh, |x, y, t| x - y + t);
        let back = parse_boundary_field(Path::new("v.csv"), &format_boundary_field("v", &f), &mesh).unwrap();
        assert_eq!(back, f);
    }

    proptest! {
        #[test]
        fn dump_round_trip_is_bit_identical(values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 9 * 3)) {
            let mesh = Mesh::unit(3, 3, 2, 1.0).unwrap();
            let f = TimeField::from_values(&mesh, values).unwrap();
            let back = parse_time_field(Path::new("f.csv"), &format_time_field("f", &f), &mesh).unwrap();
            for (a, b) in f.values().iter().zip(back.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
