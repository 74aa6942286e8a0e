use std::io::Write;

use nalgebra::{Vector2, Vector3};

use super::{DepthMap, SurfaceError};

/// Triangulated heightfield with per-vertex UVs and normals.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightfieldMesh {
    pub width: usize,
    pub height: usize,
    pub vertices: Vec<Vector3<f64>>,
    pub uvs: Vec<Vector2<f64>>,
    pub normals: Vec<Vector3<f64>>,
    pub triangles: Vec<[u32; 3]>,
}

impl HeightfieldMesh {
    pub fn extent(&self) -> (Vector3<f64>, Vector3<f64>) {
        self.vertices.iter().fold(
            (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY)),
            |(lo, hi), v| (lo.inf(v), hi.sup(v)),
        )
    }

    /// Wavefront OBJ with `v`, `vt`, `vn` and triangle `f` records.
    pub fn write_obj<W: Write>(&self, out: W) -> Result<(), SurfaceError> {
        let mut out = std::io::BufWriter::new(out);
        writeln!(out, "# heightfield {}x{}", self.width, self.height)?;
        for v in &self.vertices {
            writeln!(out, "v {} {} {}", v.x, v.y, v.z)?;
        }
        for t in &self.uvs {
            writeln!(out, "vt {} {}", t.x, t.y)?;
        }
        for n in &self.normals {
            writeln!(out, "vn {} {} {}", n.x, n.y, n.z)?;
        }
        for t in &self.triangles {
            let [a, b, c] = t.map(|i| i + 1);
            writeln!(out, "f {a}/{a}/{a} {b}/{b}/{b} {c}/{c}/{c}")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Builds the mesh: vertex `(i·pitch, j·pitch, −depth)`, UV
/// `(i/(w−1), j/(h−1))`, two counter-clockwise triangles per cell seen from
/// +z, and area-weighted vertex normals.
pub fn depth_to_mesh(depth: &DepthMap) -> Result<HeightfieldMesh, SurfaceError> {
    let (w, h) = (depth.width, depth.height);
    if w < 2 || h < 2 {
        return Err(SurfaceError::Invalid(format!(
            "mesh needs at least 2x2 samples, got {w}x{h}"
        )));
    }
    let p = depth.pixel_pitch;
    let mut vertices = Vec::with_capacity(w * h);
    let mut uvs = Vec::with_capacity(w * h);
    for j in 0..h {
        for i in 0..w {
            vertices.push(Vector3::new(i as f64 * p, j as f64 * p, -depth.get(i, j)));
            uvs.push(Vector2::new(
                i as f64 / (w - 1) as f64,
                j as f64 / (h - 1) as f64,
            ));
        }
    }
    let mut triangles = Vec::with_capacity(2 * (w - 1) * (h - 1));
    for j in 0..h - 1 {
        for i in 0..w - 1 {
            let v00 = (j * w + i) as u32;
            let v10 = v00 + 1;
            let v01 = v00 + w as u32;
            let v11 = v01 + 1;
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let mut normals = vec![Vector3::zeros(); w * h];
    for t in &triangles {
        let [a, b, c] = t.map(|i| vertices[i as usize]);
        // |cross| is twice the area, so this sum is area weighted
        let n = (b - a).cross(&(c - a));
        for &i in t {
            normals[i as usize] += n;
        }
    }
    for n in &mut normals {
        *n = n.normalize();
    }
    Ok(HeightfieldMesh {
        width: w,
        height: h,
        vertices,
        uvs,
        normals,
        triangles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn flat_two_by_two() {
        let m = depth_to_mesh(&DepthMap::flat(2, 2, 1.0)).unwrap();
        assert_eq!(m.vertices.len(), 4);
        assert_eq!(m.triangles.len(), 2);
        assert!(m.normals.iter().all(|n| *n == Vector3::z()));
        assert_eq!(m.uvs[0], Vector2::new(0.0, 0.0));
        assert_eq!(m.uvs[1], Vector2::new(1.0, 0.0));
        assert_eq!(m.uvs[2], Vector2::new(0.0, 1.0));
        assert_eq!(m.uvs[3], Vector2::new(1.0, 1.0));
    }

    #[test]
    fn sensor_resolution_counts() {
        let m = depth_to_mesh(&DepthMap::flat(640, 480, 0.025)).unwrap();
        assert_eq!(m.vertices.len(), 307_200);
        assert_eq!(m.triangles.len(), 2 * 639 * 479);
        assert_eq!(m.triangles.len(), 612_162);
    }

    #[test]
    fn ramp_normals_share_tilt() {
        let (w, h) = (6, 5);
        let values = (0..w * h).map(|n| 0.05 * (n % w) as f64).collect();
        let m = depth_to_mesh(&DepthMap::new(w, h, 0.1, values).unwrap()).unwrap();
        // depth grows along +x so the surface descends along +x
        let expected = Vector3::new(0.05, 0.0, 0.1).normalize();
        for n in &m.normals {
            assert!((n - expected).norm() < 1e-12, "{n:?}");
        }
    }

    #[test]
    fn interior_edges_are_shared_twice() {
        let values = (0..7 * 5).map(|n| ((n * 37) % 11) as f64 * 0.01).collect();
        let m = depth_to_mesh(&DepthMap::new(7, 5, 0.2, values).unwrap()).unwrap();
        let mut edges: HashMap<(u32, u32), usize> = HashMap::new();
        for t in &m.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let on_border = |v: u32| {
            let (i, j) = (v as usize % 7, v as usize / 7);
            i == 0 || j == 0 || i == 6 || j == 4
        };
        for ((a, b), n) in edges {
            if on_border(a) && on_border(b) && (a % 7 == b % 7 || a / 7 == b / 7) {
                assert_eq!(n, 1);
            } else {
                assert_eq!(n, 2);
            }
        }
        assert!(m.normals.iter().all(|n| (n.norm() - 1.0).abs() < 1e-12 && n.z > 0.0));
    }

    #[test]
    fn obj_records() {
        let m = depth_to_mesh(&DepthMap::flat(3, 2, 0.5)).unwrap();
        let mut buf = Vec::new();
        m.write_obj(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 6);
        assert_eq!(text.lines().filter(|l| l.starts_with("vt ")).count(), 6);
        assert_eq!(text.lines().filter(|l| l.starts_with("vn ")).count(), 6);
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 4);
        assert!(text.contains("f 1/1/1 2/2/2 5/5/5"));
    }

    #[test]
    fn degenerate_raster() {
        assert!(depth_to_mesh(&DepthMap::flat(1, 5, 0.1)).is_err());
    }
}
