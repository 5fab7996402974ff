//! Point clouds as whitespace-separated `x y z` text, one point per line.
//! Blank lines and `#` comments are skipped.

use std::fmt::Write as _;
use std::path::Path;

use nbv_core::{Error, Point3, PointCloud, Result};

pub fn write_xyz(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::with_capacity(cloud.len() * 32);
    for p in cloud.points() {
        writeln!(s, "{} {} {}", p.x, p.y, p.z).expect("write to String");
    }
    std::fs::write(path, s).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn read_xyz(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut points = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            location: format!("line {}", n + 1),
            message,
        };
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| bad(format!("{t:?}: {e}"))))
            .collect::<Result<_>>()?;
        if v.len() != 3 {
            return Err(bad(format!("expected 3 coordinates, found {}", v.len())));
        }
        points.push(Point3::new(v[0], v[1], v[2]));
    }
    PointCloud::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.xyz");
        let c = PointCloud::new(vec![Point3::new(0.1, -2.0, 3.5), Point3::new(1e-7, 0.0, 4.0)]).unwrap();
        write_xyz(&c, &p).unwrap();
        assert_eq!(read_xyz(&p).unwrap().points(), c.points());
        std::fs::write(&p, "# header\n1 2 3\n\n1 2\n").unwrap();
        let err = read_xyz(&p).unwrap_err().to_string();
        assert!(err.contains("line 4"), "{err}");
    }
}
