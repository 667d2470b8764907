//! Text formats: meshes, nodal fields, legacy ASCII unstructured-grid files
//! for viewers, and the fixed-precision numbers used in CSV tables.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fem::{FeFunction, FeSpace};
use crate::mesh::{BoundaryTag, Mesh};

/// Six significant digits; scientific notation outside `[1e-4, 1e6)`.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i32;
    if (-4..6).contains(&e) {
        format!("{:.*}", (5 - e) as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

/// [`format_sig`], or an empty cell for `None`.
pub fn format_opt(x: Option<f64>) -> String {
    x.map(format_sig).unwrap_or_default()
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// `vertices N triangles M`, then `x y tag` per vertex and `i j k` per
/// triangle, 0-based.
pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = format!("vertices {} triangles {}\n", mesh.vertices().len(), mesh.triangles().len());
    for (x, t) in mesh.vertices().iter().zip(mesh.tags()) {
        let _ = writeln!(s, "{:e} {:e} {}", x[0], x[1], t.as_str());
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    s
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_num<T: std::str::FromStr>(line: usize, tok: Option<&str>, what: &str) -> Result<T> {
    tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("bad {what}")))
}

pub fn read_mesh(text: &str) -> Result<Mesh> {
    let mut lines = content_lines(text);
    let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "empty mesh file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 4 || h[0] != "vertices" || h[2] != "triangles" {
        return Err(parse_err(ln, "expected `vertices N triangles M`"));
    }
    let nv: usize = parse_num(ln, Some(h[1]), "vertex count")?;
    let nt: usize = parse_num(ln, Some(h[3]), "triangle count")?;
    let mut vertices = Vec::with_capacity(nv);
    let mut tags = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, "too few vertex lines"))?;
        let mut tok = l.split_whitespace();
        let x: f64 = parse_num(ln, tok.next(), "x")?;
        let y: f64 = parse_num(ln, tok.next(), "y")?;
        let tag = tok.next().ok_or_else(|| parse_err(ln, "missing tag"))?;
        tags.push(BoundaryTag::parse(tag).ok_or_else(|| parse_err(ln, format!("unknown tag {tag:?}")))?);
        vertices.push([x, y]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, "too few triangle lines"))?;
        let mut tok = l.split_whitespace();
        let mut t = [0usize; 3];
        for v in &mut t {
            *v = parse_num(ln, tok.next(), "vertex index")?;
        }
        triangles.push(t);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing content"));
    }
    Mesh::new(vertices, triangles, tags)
}

/// `field N`, then `vertex value` for every mesh vertex (zero on Dirichlet ones).
pub fn write_field(space: &FeSpace, u: &FeFunction) -> String {
    let vals = space.nodal_values(u);
    let mut s = format!("field {}\n", vals.len());
    for (i, v) in vals.iter().enumerate() {
        let _ = writeln!(s, "{i} {v:e}");
    }
    s
}

/// Reads a field written by [`write_field`]; every free vertex must appear
/// once, entries for Dirichlet vertices are ignored.
pub fn read_field(space: &FeSpace, text: &str) -> Result<FeFunction> {
    let mut lines = content_lines(text);
    let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "empty field file"))?;
    let mut h = header.split_whitespace();
    if h.next() != Some("field") {
        return Err(parse_err(ln, "expected `field N`"));
    }
    let n: usize = parse_num(ln, h.next(), "entry count")?;
    let nv = space.mesh().vertices().len();
    let mut values = vec![None; nv];
    let mut count = 0;
    for (ln, l) in lines {
        let mut tok = l.split_whitespace();
        let i: usize = parse_num(ln, tok.next(), "vertex index")?;
        let v: f64 = parse_num(ln, tok.next(), "value")?;
        if i >= nv {
            return Err(parse_err(ln, format!("vertex {i} out of range")));
        }
        if values[i].replace(v).is_some() {
            return Err(parse_err(ln, format!("vertex {i} listed twice")));
        }
        count += 1;
    }
    if count != n {
        return Err(parse_err(ln, format!("header announces {n} entries, found {count}")));
    }
    let mut full = vec![0.0; nv];
    for &v in space.mesh().free_vertices() {
        full[v] = values[v].ok_or_else(|| parse_err(0, format!("free vertex {v} missing")))?;
    }
    space.from_nodal_values(&full)
}

/// Legacy ASCII unstructured grid with one scalar point-data array per field.
pub fn write_vtk(space: &FeSpace, title: &str, fields: &[(&str, &FeFunction)]) -> Result<String> {
    let mesh = space.mesh();
    let mut s = String::from("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "{}", title.lines().next().unwrap_or(""));
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.vertices().len());
    for x in mesh.vertices() {
        let _ = writeln!(s, "{:e} {:e} 0", x[0], x[1]);
    }
    let nt = mesh.triangles().len();
    let _ = writeln!(s, "CELLS {} {}", nt, 4 * nt);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", mesh.vertices().len());
    }
    for (name, u) in fields {
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::InvalidConfig(format!("field name {name:?} must be a single word")));
        }
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in space.nodal_values(u) {
            let _ = writeln!(s, "{v:e}");
        }
    }
    Ok(s)
}
