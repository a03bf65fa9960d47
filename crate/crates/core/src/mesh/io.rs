//! ASCII OBJ and Gmsh MSH 2.2 readers, OBJ writer.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Mesh, MeshError};
use crate::geometry::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Msh2,
}

impl MeshFormat {
    /// Guess from the file extension (`.obj`, `.msh`).
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(Self::Obj),
            "msh" => Some(Self::Msh2),
            _ => None,
        }
    }
}

pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<Mesh, MeshError> {
    let text = fs::read_to_string(path)?;
    match format {
        MeshFormat::Obj => read_obj(&text),
        MeshFormat::Msh2 => read_msh(&text),
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::Parse { line, msg: msg.into() }
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64, MeshError> {
    let tok = tok.ok_or_else(|| parse_err(line, "missing coordinate"))?;
    tok.parse().map_err(|_| parse_err(line, format!("bad number '{tok}'")))
}

/// Parse an OBJ document. `g` records become element groups: `g group_<n>`
/// maps to tag `n`, any other name gets the next free tag.
pub fn read_obj(text: &str) -> Result<Mesh, MeshError> {
    let mut vertices = Vec::new();
    let mut elements = Vec::new();
    let mut groups = Vec::new();
    let mut named: HashMap<String, u32> = HashMap::new();
    let mut group = 0u32;
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let x = parse_f64(toks.next(), line_no)?;
                let y = parse_f64(toks.next(), line_no)?;
                let z = parse_f64(toks.next(), line_no)?;
                vertices.push(Vec3::c(x, y, z));
            }
            Some("f") => {
                let idx = toks
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let i: i64 = head
                            .parse()
                            .map_err(|_| parse_err(line_no, format!("bad face index '{t}'")))?;
                        let n = vertices.len() as i64;
                        let resolved = if i > 0 { i - 1 } else if i < 0 { n + i } else { -1 };
                        if resolved < 0 {
                            return Err(parse_err(line_no, format!("invalid face index {i}")));
                        }
                        Ok(resolved as usize)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if idx.len() != 3 {
                    return Err(MeshError::NonTriangle { element: elements.len(), count: idx.len() });
                }
                elements.push([idx[0], idx[1], idx[2]]);
                groups.push(group);
            }
            Some("g") | Some("o") => {
                let name = toks.collect::<Vec<_>>().join(" ");
                group = match name.strip_prefix("group_").and_then(|s| s.parse().ok()) {
                    Some(tag) => tag,
                    None => {
                        let next = named.len() as u32;
                        *named.entry(name).or_insert(next)
                    }
                };
            }
            _ => {}
        }
    }
    if elements.is_empty() {
        return Err(parse_err(0, "no faces"));
    }
    Mesh::with_groups(vertices, elements, groups)
}

/// Parse a Gmsh 2.2 ASCII document. Triangles (type 2) become elements
/// tagged with their physical group; points and lines are skipped.
pub fn read_msh(text: &str) -> Result<Mesh, MeshError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut pos = 0;
    let mut node_index: HashMap<u64, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut elements = Vec::new();
    let mut groups = Vec::new();
    let mut seen_format = false;

    let count_at = |pos: usize| -> Result<usize, MeshError> {
        lines
            .get(pos)
            .ok_or_else(|| parse_err(pos + 1, "unexpected end of file"))?
            .trim()
            .parse()
            .map_err(|_| parse_err(pos + 1, "expected a count"))
    };

    while pos < lines.len() {
        match lines[pos].trim() {
            "$MeshFormat" => {
                let hdr = lines.get(pos + 1).ok_or_else(|| parse_err(pos + 2, "missing header"))?;
                let version = hdr.split_whitespace().next().unwrap_or("");
                if !version.starts_with('2') {
                    return Err(parse_err(pos + 2, format!("unsupported MSH version {version}")));
                }
                if hdr.split_whitespace().nth(1) != Some("0") {
                    return Err(parse_err(pos + 2, "binary MSH is not supported"));
                }
                seen_format = true;
                pos += 3;
            }
            "$Nodes" => {
                let n = count_at(pos + 1)?;
                for k in 0..n {
                    let ln = pos + 2 + k;
                    let line = lines.get(ln).ok_or_else(|| parse_err(ln + 1, "truncated $Nodes"))?;
                    let mut t = line.split_whitespace();
                    let id: u64 = t
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| parse_err(ln + 1, "bad node id"))?;
                    let x = parse_f64(t.next(), ln + 1)?;
                    let y = parse_f64(t.next(), ln + 1)?;
                    let z = parse_f64(t.next(), ln + 1)?;
                    node_index.insert(id, vertices.len());
                    vertices.push(Vec3::c(x, y, z));
                }
                pos += n + 3;
            }
            "$Elements" => {
                let n = count_at(pos + 1)?;
                for k in 0..n {
                    let ln = pos + 2 + k;
                    let line = lines.get(ln).ok_or_else(|| parse_err(ln + 1, "truncated $Elements"))?;
                    let vals = line
                        .split_whitespace()
                        .map(|s| s.parse::<u64>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| parse_err(ln + 1, "bad element record"))?;
                    if vals.len() < 3 {
                        return Err(parse_err(ln + 1, "short element record"));
                    }
                    let (etype, ntags) = (vals[1], vals[2] as usize);
                    let nodes = vals
                        .get(3 + ntags..)
                        .ok_or_else(|| parse_err(ln + 1, "short element record"))?;
                    match etype {
                        1 | 15 => continue,
                        2 => {
                            if nodes.len() != 3 {
                                return Err(parse_err(ln + 1, "triangle needs 3 nodes"));
                            }
                            let mut tri = [0usize; 3];
                            for (slot, id) in tri.iter_mut().zip(nodes) {
                                *slot = *node_index
                                    .get(id)
                                    .ok_or_else(|| parse_err(ln + 1, format!("unknown node {id}")))?;
                            }
                            let tag = if ntags > 0 { vals[3] as u32 } else { 0 };
                            elements.push(tri);
                            groups.push(tag);
                        }
                        _ => {
                            return Err(MeshError::NonTriangle {
                                element: elements.len(),
                                count: nodes.len(),
                            })
                        }
                    }
                }
                pos += n + 3;
            }
            _ => pos += 1,
        }
    }
    if !seen_format {
        return Err(parse_err(1, "missing $MeshFormat"));
    }
    if elements.is_empty() {
        return Err(parse_err(0, "no triangles"));
    }
    Mesh::with_groups(vertices, elements, groups)
}

/// Serialize to OBJ with `g group_<tag>` records whenever the tag changes.
pub fn write_obj(mesh: &Mesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {} vertices, {} faces", mesh.num_vertices(), mesh.num_elements());
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {:.17e} {:.17e} {:.17e}", v.x, v.y, v.z);
    }
    let mut current = None;
    for (tri, &g) in mesh.elements().iter().zip(mesh.groups()) {
        if current != Some(g) {
            let _ = writeln!(out, "g group_{g}");
            current = Some(g);
        }
        let _ = writeln!(out, "f {} {} {}", tri[0] + 1, tri[1] + 1, tri[2] + 1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_icosphere;

    #[test]
    fn single_triangle_obj() {
        let m = read_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert_eq!(m.area(0), 0.5);
        assert_eq!(m.normal(0), Vec3::c(0.0, 0.0, 1.0));
    }

    #[test]
    fn obj_slash_and_negative_indices() {
        let m = read_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf -3//1 2/5/1 3\n").unwrap();
        assert_eq!(m.elements()[0], [0, 1, 2]);
    }

    #[test]
    fn quad_face_is_rejected() {
        let err = read_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap_err();
        assert!(matches!(err, MeshError::NonTriangle { count: 4, .. }));
    }

    #[test]
    fn malformed_vertex_is_a_parse_error() {
        let err = read_obj("v 0 zero 0\n").unwrap_err();
        assert!(matches!(err, MeshError::Parse { line: 1, .. }));
    }

    #[test]
    fn icosahedron_obj_roundtrip() {
        let ico = make_icosphere(0, 1.0).unwrap();
        let back = read_obj(&write_obj(&ico)).unwrap();
        assert_eq!(back.num_vertices(), 12);
        assert_eq!(back.num_elements(), 20);
        assert!(back.is_watertight());
        assert!(back.signed_volume() > 0.0);
        for (a, b) in ico.vertices().iter().zip(back.vertices()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn msh_reader() {
        let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n$EndNodes\n\
$Elements\n6\n1 15 2 0 1 1\n2 1 2 0 1 1 2\n3 2 2 7 1 1 3 2\n4 2 2 7 1 1 2 4\n5 2 2 7 1 2 3 4\n6 2 2 9 1 1 4 3\n$EndElements\n";
        let m = read_msh(text).unwrap();
        assert_eq!(m.num_elements(), 4);
        assert_eq!(m.groups(), &[7, 7, 7, 9]);
        assert!(m.is_watertight());
        assert!(m.signed_volume() > 0.0);
    }

    #[test]
    fn msh_quad_is_rejected() {
        let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 1 1 0\n4 0 1 0\n$EndNodes\n\
$Elements\n1\n1 3 0 1 2 3 4\n$EndElements\n";
        assert!(matches!(read_msh(text), Err(MeshError::NonTriangle { count: 4, .. })));
    }
}
