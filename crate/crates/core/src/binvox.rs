//! binvox files: a short ASCII header followed by run-length encoded
//! `(value, count)` byte pairs.
//!
//! binvox orders voxels with `x` slowest, then `z`, then `y` fastest. The
//! grid's `translate` is the minimum corner and `scale` is the edge length
//! of the whole cube, so `voxel_size = scale / dim`.

use std::fs;
use std::path::Path;

use crate::voxel::{BinaryGrid, GridSpec};
use crate::{Error, Point3, Result};

pub fn write_binvox(grid: &BinaryGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(grid)).map_err(|e| Error::io(path, e))
}

pub fn read_binvox(path: impl AsRef<Path>) -> Result<BinaryGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(path, &bytes)
}

pub fn encode(grid: &BinaryGrid) -> Vec<u8> {
    let spec = grid.spec();
    let n = spec.resolution;
    let mut out = format!(
        "#binvox 1\ndim {n} {n} {n}\ntranslate {} {} {}\nscale {}\ndata\n",
        spec.origin.x,
        spec.origin.y,
        spec.origin.z,
        spec.edge_length()
    )
    .into_bytes();
    let mut run: Option<(u8, u8)> = None;
    for x in 0..n {
        for z in 0..n {
            for y in 0..n {
                let v = u8::from(grid.get(x, y, z));
                run = match run {
                    Some((value, count)) if value == v && count < u8::MAX => Some((value, count + 1)),
                    Some((value, count)) => {
                        out.extend_from_slice(&[value, count]);
                        Some((v, 1))
                    }
                    None => Some((v, 1)),
                };
            }
        }
    }
    if let Some((value, count)) = run {
        out.extend_from_slice(&[value, count]);
    }
    out
}

pub fn decode(path: &Path, bytes: &[u8]) -> Result<BinaryGrid> {
    let mut pos = 0usize;
    let mut line_no = 0usize;
    let next_line = |pos: &mut usize, line_no: &mut usize| -> Option<(usize, String)> {
        if *pos >= bytes.len() {
            return None;
        }
        let end = bytes[*pos..].iter().position(|&b| b == b'\n').map(|e| *pos + e)?;
        let line = String::from_utf8_lossy(&bytes[*pos..end]).trim().to_string();
        *pos = end + 1;
        *line_no += 1;
        Some((*line_no, line))
    };

    match next_line(&mut pos, &mut line_no) {
        Some((_, l)) if l.starts_with("#binvox") => {}
        _ => return Err(Error::parse_line(path, 1, "missing '#binvox' magic")),
    }
    let mut dims: Option<[usize; 3]> = None;
    let mut translate = [0.0f64; 3];
    let mut scale = 1.0f64;
    loop {
        let (ln, line) = next_line(&mut pos, &mut line_no).ok_or_else(|| Error::parse_line(path, line_no + 1, "header ends before 'data'"))?;
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("dim") => {
                let v: Vec<usize> = toks.filter_map(|t| t.parse().ok()).collect();
                if v.len() != 3 {
                    return Err(Error::parse_line(path, ln, "dim needs three integers"));
                }
                dims = Some([v[0], v[1], v[2]]);
            }
            Some("translate") => {
                let v: Vec<f64> = toks.filter_map(|t| t.parse().ok()).collect();
                if v.len() != 3 {
                    return Err(Error::parse_line(path, ln, "translate needs three numbers"));
                }
                translate = [v[0], v[1], v[2]];
            }
            Some("scale") => {
                scale = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::parse_line(path, ln, "scale needs a number"))?;
            }
            Some("data") => break,
            Some(other) => return Err(Error::parse_line(path, ln, format!("unknown header keyword {other:?}"))),
            None => {}
        }
    }
    let [dx, dy, dz] = dims.ok_or_else(|| Error::parse_line(path, line_no, "header has no 'dim' line"))?;
    if dx != dy || dy != dz {
        return Err(Error::parse_line(path, 2, format!("only cubic grids are supported, got {dx}x{dy}x{dz}")));
    }
    let n = dx;
    let spec = GridSpec::new(n, Point3::from(translate), scale / n as f64)
        .map_err(|e| Error::parse_line(path, 2, e.to_string()))?;

    let total = spec.cell_count();
    let mut flat = Vec::with_capacity(total);
    let data = &bytes[pos..];
    if !data.len().is_multiple_of(2) {
        return Err(Error::parse_offset(path, bytes.len(), "data ends in the middle of a run"));
    }
    for (r, pair) in data.chunks_exact(2).enumerate() {
        let offset = pos + 2 * r;
        let (value, count) = (pair[0], pair[1] as usize);
        if value > 1 {
            return Err(Error::parse_offset(path, offset, format!("run value {value} is not 0 or 1")));
        }
        if flat.len() + count > total {
            return Err(Error::parse_offset(path, offset, format!("runs exceed the {total} voxels declared by dim")));
        }
        flat.extend(std::iter::repeat_n(value == 1, count));
    }
    if flat.len() != total {
        return Err(Error::parse_offset(
            path,
            bytes.len(),
            format!("truncated data: {} of {total} voxels", flat.len()),
        ));
    }
    let mut grid = BinaryGrid::empty(spec);
    let mut it = flat.into_iter();
    for x in 0..n {
        for z in 0..n {
            for y in 0..n {
                grid.set(x, y, z, it.next().expect("length checked"));
            }
        }
    }
    Ok(grid)
}
