//! File formats: legacy ASCII VTK polydata, OBJ, two-column CSV, and TOML
//! reports, each with a reader for round-trips.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use membrane::vec3::Vec3;
use membrane::Mesh;

/// Writes the triangulation with one scalar array per named field.
pub fn write_vtk(path: &Path, m: &Mesh, fields: &[(&str, &[f64])]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "membrane fields")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET POLYDATA")?;
    writeln!(w, "POINTS {} double", m.vertex_count())?;
    for v in m.vertices() {
        writeln!(w, "{:e} {:e} {:e}", v[0], v[1], v[2])?;
    }
    writeln!(w, "POLYGONS {} {}", m.triangle_count(), 4 * m.triangle_count())?;
    for t in m.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    if !fields.is_empty() {
        writeln!(w, "POINT_DATA {}", m.vertex_count())?;
    }
    for (name, values) in fields {
        if values.len() != m.vertex_count() {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, format!("field {name} has wrong length")));
        }
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in *values {
            writeln!(w, "{v:e}")?;
        }
    }
    w.flush()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VtkData {
    pub points: Vec<Vec3<f64>>,
    pub triangles: Vec<[usize; 3]>,
    pub fields: Vec<(String, Vec<f64>)>,
}

fn bad(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn num<T: std::str::FromStr>(tok: Option<&str>) -> io::Result<T> {
    tok.ok_or_else(|| bad("unexpected end of file"))?
        .parse()
        .map_err(|_| bad("malformed number"))
}

pub fn read_vtk(path: &Path) -> io::Result<VtkData> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if !header.starts_with("# vtk DataFile") {
        return Err(bad("not a legacy VTK file"));
    }
    let _title = lines.next();
    if lines.next().map(str::trim) != Some("ASCII") {
        return Err(bad("only ASCII VTK is supported"));
    }
    let mut toks = lines.flat_map(str::split_whitespace);
    let mut out = VtkData::default();
    let mut npoints = 0;
    while let Some(t) = toks.next() {
        match t {
            "DATASET" => {
                if toks.next() != Some("POLYDATA") {
                    return Err(bad("expected POLYDATA"));
                }
            }
            "POINTS" => {
                npoints = num(toks.next())?;
                let _ty = toks.next();
                for _ in 0..npoints {
                    out.points.push([num(toks.next())?, num(toks.next())?, num(toks.next())?]);
                }
            }
            "POLYGONS" => {
                let n: usize = num(toks.next())?;
                let _size: usize = num(toks.next())?;
                for _ in 0..n {
                    if num::<usize>(toks.next())? != 3 {
                        return Err(bad("only triangles are supported"));
                    }
                    out.triangles.push([num(toks.next())?, num(toks.next())?, num(toks.next())?]);
                }
            }
            "POINT_DATA" => {
                let n: usize = num(toks.next())?;
                if n != npoints {
                    return Err(bad("POINT_DATA size differs from POINTS"));
                }
            }
            "SCALARS" => {
                let name = toks.next().ok_or_else(|| bad("missing field name"))?.to_string();
                let _ty = toks.next();
                let _ncomp = toks.next();
                if toks.next() != Some("LOOKUP_TABLE") {
                    return Err(bad("expected LOOKUP_TABLE"));
                }
                let _table = toks.next();
                let vals = (0..npoints).map(|_| num(toks.next())).collect::<io::Result<Vec<f64>>>()?;
                out.fields.push((name, vals));
            }
            other => return Err(bad(format!("unexpected token {other:?}"))),
        }
    }
    Ok(out)
}

/// Vertices displaced along the lifted normal, `x + eps u(x) nu(x)`.
pub fn write_deformed_obj(path: &Path, m: &Mesh, u: &[f64], eps: f64) -> io::Result<()> {
    let s = *m.surface();
    let verts = m.vertices();
    let w = BufWriter::new(File::create(path)?);
    m.write_obj_displaced(w, |i| {
        let n = s.normal_lifted(verts[i]);
        let a = eps * u[i];
        [a * n[0], a * n[1], a * n[2]]
    })
}

pub fn write_obj(path: &Path, m: &Mesh) -> io::Result<()> {
    m.write_obj(BufWriter::new(File::create(path)?))
}

pub fn read_obj(path: &Path) -> io::Result<(Vec<Vec3<f64>>, Vec<[usize; 3]>)> {
    let text = std::fs::read_to_string(path)?;
    let mut verts = Vec::new();
    let mut tris = Vec::new();
    for line in text.lines() {
        let mut t = line.split_whitespace();
        match t.next() {
            Some("v") => verts.push([num(t.next())?, num(t.next())?, num(t.next())?]),
            Some("f") => {
                let mut idx = [0usize; 3];
                for slot in &mut idx {
                    // accept "i", "i/t" and "i/t/n"
                    let tok = t.next().ok_or_else(|| bad("short face"))?;
                    let first = tok.split('/').next().unwrap_or(tok);
                    let k: usize = first.parse().map_err(|_| bad("malformed face index"))?;
                    if k == 0 {
                        return Err(bad("OBJ indices are 1-based"));
                    }
                    *slot = k - 1;
                }
                tris.push(idx);
            }
            _ => {}
        }
    }
    Ok((verts, tris))
}

/// `theta,energy` rows, theta in radians.
pub fn write_curve_csv(path: &Path, thetas: &[f64], energies: &[f64]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["theta", "energy"])?;
    for (t, e) in thetas.iter().zip(energies) {
        w.write_record([t.to_string(), e.to_string()])?;
    }
    w.flush()
}

pub fn read_curve_csv(path: &Path) -> io::Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let t: f64 = rec.get(0).ok_or_else(|| bad("missing theta"))?.parse().map_err(|_| bad("bad theta"))?;
        let e: f64 = rec.get(1).ok_or_else(|| bad("missing energy"))?.parse().map_err(|_| bad("bad energy"))?;
        out.push((t, e));
    }
    Ok(out)
}

pub fn write_report(path: &Path, report: &toml::Table) -> io::Result<()> {
    let text = toml::to_string(report).map_err(|e| bad(e.to_string()))?;
    std::fs::write(path, text)
}

pub fn read_report(path: &Path) -> io::Result<toml::Table> {
    let text = std::fs::read_to_string(path)?;
    text.parse::<toml::Table>().map_err(|e| bad(e.to_string()))
}
