//! Scattered interpolation of surface-particle depths onto a raster.

use delaunator::{triangulate, Point};
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::{DepthMap, SurfaceError};
use crate::mpm::Particle;

/// Raster placement: node `(i, j)` sits at `origin + (i, j) · pitch` in the
/// sensor plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterSpec {
    pub width: usize,
    pub height: usize,
    pub pitch: f64,
    pub origin: [f64; 2],
}

impl RasterSpec {
    /// Raster of the given size centered on `center`.
    pub fn centered(width: usize, height: usize, pitch: f64, center: [f64; 2]) -> Self {
        Self {
            width,
            height,
            pitch,
            origin: [
                center[0] - 0.5 * (width - 1) as f64 * pitch,
                center[1] - 0.5 * (height - 1) as f64 * pitch,
            ],
        }
    }

    pub fn node(&self, i: usize, j: usize) -> Vector2<f64> {
        Vector2::new(
            self.origin[0] + i as f64 * self.pitch,
            self.origin[1] + j as f64 * self.pitch,
        )
    }
}

/// Interpolates `rest_height − z` of the surface particles onto `raster`:
/// piecewise linear over the Delaunay triangulation of their in-plane
/// positions, nearest particle outside the hull.
pub fn extract_surface_depth(
    particles: &[Particle],
    surface: &[usize],
    rest_height: f64,
    raster: &RasterSpec,
) -> Result<DepthMap, SurfaceError> {
    if surface.len() < 3 {
        return Err(SurfaceError::Extraction(format!(
            "need at least 3 surface particles, got {}",
            surface.len()
        )));
    }
    if raster.width == 0 || raster.height == 0 || !(raster.pitch > 0.0) {
        return Err(SurfaceError::Invalid(format!("bad raster {raster:?}")));
    }
    let pts: Vec<Vector2<f64>> = surface
        .iter()
        .map(|&i| particles[i].position.xy())
        .collect();
    let depth: Vec<f64> = surface
        .iter()
        .map(|&i| rest_height - particles[i].position.z)
        .collect();
    let dpts: Vec<Point> = pts.iter().map(|p| Point { x: p.x, y: p.y }).collect();
    let tri = triangulate(&dpts);
    if tri.triangles.is_empty() {
        return Err(SurfaceError::Extraction("surface particles are collinear".into()));
    }

    let (w, h) = (raster.width, raster.height);
    let mut out: Vec<Option<f64>> = vec![None; w * h];
    let to_raster = |p: &Vector2<f64>| {
        Vector2::new(
            (p.x - raster.origin[0]) / raster.pitch,
            (p.y - raster.origin[1]) / raster.pitch,
        )
    };
    for t in tri.triangles.chunks_exact(3) {
        let (a, b, c) = (pts[t[0]], pts[t[1]], pts[t[2]]);
        let area = cross(b - a, c - a);
        if area.abs() < 1e-300 {
            continue;
        }
        let (ra, rb, rc) = (to_raster(&a), to_raster(&b), to_raster(&c));
        let lo = ra.inf(&rb).inf(&rc);
        let hi = ra.sup(&rb).sup(&rc);
        let i0 = lo.x.ceil().max(0.0) as usize;
        let j0 = lo.y.ceil().max(0.0) as usize;
        let i1 = hi.x.floor().min(w as f64 - 1.0);
        let j1 = hi.y.floor().min(h as f64 - 1.0);
        if i1 < 0.0 || j1 < 0.0 {
            continue;
        }
        for j in j0..=j1 as usize {
            for i in i0..=i1 as usize {
                let slot = &mut out[j * w + i];
                if slot.is_some() {
                    continue;
                }
                let p = raster.node(i, j);
                let la = cross(b - p, c - p) / area;
                let lb = cross(c - p, a - p) / area;
                let lc = cross(a - p, b - p) / area;
                let tol = -1e-12;
                if la >= tol && lb >= tol && lc >= tol {
                    *slot = Some(la * depth[t[0]] + lb * depth[t[1]] + lc * depth[t[2]]);
                }
            }
        }
    }

    let mut nearest: Option<NearestIndex> = None;
    let values = out
        .iter()
        .enumerate()
        .map(|(n, v)| match v {
            Some(v) => *v,
            None => {
                let index = nearest.get_or_insert_with(|| NearestIndex::new(&pts));
                depth[index.nearest(&raster.node(n % w, n / w))]
            }
        })
        .collect();
    DepthMap::new(w, h, raster.pitch, values)
}

fn cross(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Uniform bucket grid for nearest-point queries.
struct NearestIndex<'a> {
    pts: &'a [Vector2<f64>],
    lo: Vector2<f64>,
    cell: f64,
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl<'a> NearestIndex<'a> {
    fn new(pts: &'a [Vector2<f64>]) -> Self {
        let lo = pts.iter().fold(Vector2::repeat(f64::INFINITY), |a, p| a.inf(p));
        let hi = pts.iter().fold(Vector2::repeat(f64::NEG_INFINITY), |a, p| a.sup(p));
        let span = (hi - lo).max().max(1e-12);
        let per_axis = (pts.len() as f64).sqrt().ceil().max(1.0);
        let cell = span / per_axis;
        let dims = [
            ((hi.x - lo.x) / cell) as usize + 1,
            ((hi.y - lo.y) / cell) as usize + 1,
        ];
        let mut buckets = vec![Vec::new(); dims[0] * dims[1]];
        for (n, p) in pts.iter().enumerate() {
            let (bx, by) = Self::bucket_of(p, lo, cell, dims);
            buckets[by * dims[0] + bx].push(n);
        }
        Self {
            pts,
            lo,
            cell,
            dims,
            buckets,
        }
    }

    fn bucket_of(p: &Vector2<f64>, lo: Vector2<f64>, cell: f64, dims: [usize; 2]) -> (usize, usize) {
        let bx = (((p.x - lo.x) / cell).max(0.0) as usize).min(dims[0] - 1);
        let by = (((p.y - lo.y) / cell).max(0.0) as usize).min(dims[1] - 1);
        (bx, by)
    }

    fn nearest(&self, q: &Vector2<f64>) -> usize {
        let (cx, cy) = Self::bucket_of(q, self.lo, self.cell, self.dims);
        let mut best = (f64::INFINITY, usize::MAX);
        let max_ring = self.dims[0].max(self.dims[1]);
        for ring in 0..=max_ring {
            let x0 = cx.saturating_sub(ring);
            let y0 = cy.saturating_sub(ring);
            let x1 = (cx + ring).min(self.dims[0] - 1);
            let y1 = (cy + ring).min(self.dims[1] - 1);
            for by in y0..=y1 {
                for bx in x0..=x1 {
                    let on_ring = bx == x0 || bx == x1 || by == y0 || by == y1;
                    if !on_ring {
                        continue;
                    }
                    for &n in &self.buckets[by * self.dims[0] + bx] {
                        let d = (self.pts[n] - q).norm_squared();
                        if d < best.0 || (d == best.0 && n < best.1) {
                            best = (d, n);
                        }
                    }
                }
            }
            // points outside the scanned square are at least `ring · cell` away
            // from the query's bucket, hence from the query itself minus one cell
            let reach = ring as f64 * self.cell;
            if best.1 != usize::MAX && best.0.sqrt() <= reach {
                break;
            }
        }
        best.1
    }
}
