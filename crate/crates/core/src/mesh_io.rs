//! OFF, OBJ and STL (binary and ASCII) mesh files. Geometry only:
//! normals, texture coordinates, colors and materials are ignored.
//! Polygons with more than three vertices are fan-triangulated.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::{Error, Point3, Result, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
    Stl,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        match ext.as_str() {
            "off" => Ok(MeshFormat::Off),
            "obj" => Ok(MeshFormat::Obj),
            "stl" => Ok(MeshFormat::Stl),
            _ => Err(Error::InvalidArgument(format!(
                "unsupported mesh extension {:?} (expected .off, .obj or .stl)",
                path.display()
            ))),
        }
    }
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let format = MeshFormat::from_path(path)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        MeshFormat::Off => parse_off(path, text(path, &bytes)?),
        MeshFormat::Obj => parse_obj(path, text(path, &bytes)?),
        MeshFormat::Stl => parse_stl(path, &bytes),
    }
}

pub fn save_mesh(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = match MeshFormat::from_path(path)? {
        MeshFormat::Off => off_string(mesh).into_bytes(),
        MeshFormat::Obj => obj_string(mesh).into_bytes(),
        MeshFormat::Stl => stl_binary(mesh),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn text<'a>(path: &Path, bytes: &'a [u8]) -> Result<&'a str> {
    std::str::from_utf8(bytes).map_err(|e| Error::parse_offset(path, e.valid_up_to(), "file is not valid UTF-8"))
}

fn fan(poly: &[u32], faces: &mut Vec<[u32; 3]>) {
    for k in 1..poly.len().saturating_sub(1) {
        faces.push([poly[0], poly[k], poly[k + 1]]);
    }
}

fn parse_f64(path: &Path, line: usize, tok: Option<&str>, what: &str) -> Result<f64> {
    let tok = tok.ok_or_else(|| Error::parse_line(path, line, format!("missing {what}")))?;
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse_line(path, line, format!("invalid {what} {tok:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse_line(path, line, format!("non-finite {what}")));
    }
    Ok(v)
}

fn parse_off(path: &Path, src: &str) -> Result<TriangleMesh> {
    // (line number, tokens) with comments and blank lines removed.
    let mut lines = src.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then(|| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
    });
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse_line(path, 1, "empty file"))?;
    if !header[0].ends_with("OFF") {
        return Err(Error::parse_line(path, hline, format!("expected OFF header, found {:?}", header[0])));
    }
    let (cline, counts) = if header.len() > 1 {
        (hline, header[1..].to_vec())
    } else {
        lines
            .next()
            .ok_or_else(|| Error::parse_line(path, hline + 1, "missing vertex/face counts"))?
    };
    let count = |i: usize, what: &str| -> Result<usize> {
        counts
            .get(i)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse_line(path, cline, format!("invalid {what} count")))
    };
    let (nv, nf) = (count(0, "vertex")?, count(1, "face")?);

    let mut vertices = Vec::with_capacity(nv);
    for k in 0..nv {
        let (ln, toks) = lines
            .next()
            .ok_or_else(|| Error::parse_line(path, cline, format!("file ends after {k} of {nv} vertices")))?;
        let mut it = toks.into_iter();
        let x = parse_f64(path, ln, it.next(), "x coordinate")?;
        let y = parse_f64(path, ln, it.next(), "y coordinate")?;
        let z = parse_f64(path, ln, it.next(), "z coordinate")?;
        vertices.push(Point3::new(x, y, z));
    }
    let mut faces = Vec::with_capacity(nf);
    for k in 0..nf {
        let (ln, toks) = lines
            .next()
            .ok_or_else(|| Error::parse_line(path, cline, format!("file ends after {k} of {nf} faces")))?;
        let arity: usize = toks[0]
            .parse()
            .map_err(|_| Error::parse_line(path, ln, format!("invalid face arity {:?}", toks[0])))?;
        if arity < 3 || toks.len() < arity + 1 {
            return Err(Error::parse_line(path, ln, format!("face needs {arity} >= 3 indices")));
        }
        let mut poly = Vec::with_capacity(arity);
        for tok in &toks[1..=arity] {
            let idx: u32 = tok
                .parse()
                .map_err(|_| Error::parse_line(path, ln, format!("invalid vertex index {tok:?}")))?;
            if idx as usize >= nv {
                return Err(Error::parse_line(path, ln, format!("vertex index {idx} out of range (0..{nv})")));
            }
            poly.push(idx);
        }
        fan(&poly, &mut faces);
    }
    TriangleMesh::new(vertices, faces)
}

fn parse_obj(path: &Path, src: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let ln = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let x = parse_f64(path, ln, toks.next(), "x coordinate")?;
                let y = parse_f64(path, ln, toks.next(), "y coordinate")?;
                let z = parse_f64(path, ln, toks.next(), "z coordinate")?;
                vertices.push(Point3::new(x, y, z));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for tok in toks {
                    let head = tok.split('/').next().unwrap_or("");
                    let idx: i64 = head
                        .parse()
                        .map_err(|_| Error::parse_line(path, ln, format!("invalid face index {tok:?}")))?;
                    let n = vertices.len() as i64;
                    let resolved = if idx > 0 { idx - 1 } else { n + idx };
                    if idx == 0 || resolved < 0 || resolved >= n {
                        return Err(Error::parse_line(
                            path,
                            ln,
                            format!("vertex index {idx} out of range ({n} vertices defined so far)"),
                        ));
                    }
                    poly.push(resolved as u32);
                }
                if poly.len() < 3 {
                    return Err(Error::parse_line(path, ln, "face needs at least 3 vertices"));
                }
                fan(&poly, &mut faces);
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces)
}

/// Merges bit-identical positions into shared vertices.
#[derive(Default)]
struct Welder {
    index: HashMap<[u64; 3], u32>,
    vertices: Vec<Point3>,
}

impl Welder {
    fn add(&mut self, p: Point3) -> u32 {
        let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
        *self.index.entry(key).or_insert_with(|| {
            self.vertices.push(p);
            (self.vertices.len() - 1) as u32
        })
    }
}

fn parse_stl(path: &Path, bytes: &[u8]) -> Result<TriangleMesh> {
    if bytes.len() >= 84 {
        let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
        if bytes.len() == 84 + 50 * n {
            return parse_stl_binary(bytes, n);
        }
    }
    let src = text(path, bytes)?;
    if !src.trim_start().starts_with("solid") {
        if bytes.len() >= 84 {
            return Err(Error::parse_offset(path, 80, "binary STL triangle count does not match file size"));
        }
        return Err(Error::parse_offset(path, 0, "neither binary nor ASCII STL"));
    }
    parse_stl_ascii(path, src)
}

fn parse_stl_binary(bytes: &[u8], n: usize) -> Result<TriangleMesh> {
    let mut welder = Welder::default();
    let mut faces = Vec::with_capacity(n);
    let f32_at = |o: usize| f32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as f64;
    for t in 0..n {
        let base = 84 + 50 * t + 12;
        let mut f = [0u32; 3];
        for (k, slot) in f.iter_mut().enumerate() {
            let o = base + 12 * k;
            *slot = welder.add(Point3::new(f32_at(o), f32_at(o + 4), f32_at(o + 8)));
        }
        faces.push(f);
    }
    TriangleMesh::new(welder.vertices, faces)
}

fn parse_stl_ascii(path: &Path, src: &str) -> Result<TriangleMesh> {
    let mut welder = Welder::default();
    let mut faces = Vec::new();
    let mut current: Vec<u32> = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let ln = i + 1;
        let mut toks = raw.split_whitespace();
        match toks.next() {
            Some("vertex") => {
                let x = parse_f64(path, ln, toks.next(), "x coordinate")?;
                let y = parse_f64(path, ln, toks.next(), "y coordinate")?;
                let z = parse_f64(path, ln, toks.next(), "z coordinate")?;
                current.push(welder.add(Point3::new(x, y, z)));
            }
            Some("endloop") => {
                if current.len() < 3 {
                    return Err(Error::parse_line(path, ln, "facet loop with fewer than 3 vertices"));
                }
                fan(&current, &mut faces);
                current.clear();
            }
            _ => {}
        }
    }
    if !current.is_empty() {
        return Err(Error::parse_line(path, src.lines().count(), "unterminated facet loop"));
    }
    TriangleMesh::new(welder.vertices, faces)
}

fn off_string(mesh: &TriangleMesh) -> String {
    let mut s = format!("OFF\n{} {} 0\n", mesh.vertices().len(), mesh.faces().len());
    for v in mesh.vertices() {
        s.push_str(&format!("{} {} {}\n", v.x, v.y, v.z));
    }
    for f in mesh.faces() {
        s.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
    }
    s
}

fn obj_string(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    for v in mesh.vertices() {
        s.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for f in mesh.faces() {
        s.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    s
}

fn stl_binary(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(84 + 50 * mesh.faces().len());
    let mut header = [0u8; 80];
    let tag = b"nbv-core binary STL";
    header[..tag.len()].copy_from_slice(tag);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(mesh.faces().len() as u32).to_le_bytes());
    for [a, b, c] in mesh.triangles() {
        let n = (b - a).cross(&(c - a)).try_normalize(0.0).unwrap_or_default();
        for v in [n.x, n.y, n.z] {
            out.write_all(&(v as f32).to_le_bytes()).unwrap();
        }
        for p in [a, b, c] {
            for v in [p.x, p.y, p.z] {
                out.write_all(&(v as f32).to_le_bytes()).unwrap();
            }
        }
        out.extend_from_slice(&[0, 0]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use crate::Vector3;

    const TETRA_OFF: &str = "OFF\n# unit tetrahedron\n4 4 6\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n";

    fn write(dir: &tempfile::TempDir, name: &str, content: &[u8]) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, content).unwrap();
        p
    }

    #[test]
    fn off_tetrahedron() {
        let dir = tempfile::tempdir().unwrap();
        let m = load_mesh(write(&dir, "t.off", TETRA_OFF.as_bytes())).unwrap();
        assert_eq!(m.vertices().len(), 4);
        assert_eq!(m.faces().len(), 4);
        assert_eq!(m.non_manifold_edges(), 0);
    }

    #[test]
    fn obj_quad_is_fan_triangulated() {
        let dir = tempfile::tempdir().unwrap();
        let src = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\n";
        let m = load_mesh(write(&dir, "q.obj", src.as_bytes())).unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn obj_negative_indices() {
        let dir = tempfile::tempdir().unwrap();
        let src = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n";
        let m = load_mesh(write(&dir, "n.obj", src.as_bytes())).unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn out_of_range_index_is_a_parse_error_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let bad = TETRA_OFF.replace("3 1 2 3", "3 1 2 9");
        match load_mesh(write(&dir, "bad.off", bad.as_bytes())) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "line 11"),
            other => panic!("expected parse error, got {other:?}"),
        }
        match load_mesh(write(&dir, "bad.obj", b"v 0 0 0\nv 1 0 0\nf 1 2 3\n")) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "line 3"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_mesh("/nonexistent/x.off"), Err(Error::Io { .. })));
        assert!(matches!(load_mesh("x.ply"), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn ascii_stl_welds_vertices() {
        let dir = tempfile::tempdir().unwrap();
        let src = "solid t\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\nvertex 1 0 0\nvertex 0 1 0\nendloop\nendfacet\n\
                   facet normal 0 0 1\nouter loop\nvertex 1 0 0\nvertex 1 1 0\nvertex 0 1 0\nendloop\nendfacet\nendsolid t\n";
        let m = load_mesh(write(&dir, "a.stl", src.as_bytes())).unwrap();
        assert_eq!(m.vertices().len(), 4);
        assert_eq!(m.faces().len(), 2);
    }

    #[test]
    fn truncated_binary_stl_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut bytes = stl_binary(&shapes::cuboid(Vector3::repeat(1.0)));
        bytes.truncate(bytes.len() - 10);
        assert!(matches!(load_mesh(write(&dir, "t.stl", &bytes)), Err(Error::Parse { .. })));
    }

    #[test]
    fn save_load_round_trips_counts() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = shapes::torus(0.1, 0.03, 24, 12);
        for name in ["m.off", "m.obj", "m.stl"] {
            let p = dir.path().join(name);
            save_mesh(&mesh, &p).unwrap();
            let back = load_mesh(&p).unwrap();
            assert_eq!(back.vertices().len(), mesh.vertices().len(), "{name}");
            assert_eq!(back.faces().len(), mesh.faces().len(), "{name}");
        }
    }
}
