use nalgebra::Vector3;

type V3 = Vector3<f64>;

#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub origin: V3,
    pub dir: V3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub triangle: usize,
    /// Barycentric weights of the second and third vertex.
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: V3,
    hi: V3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            lo: V3::repeat(f64::INFINITY),
            hi: V3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &V3) {
        self.lo = self.lo.inf(p);
        self.hi = self.hi.sup(p);
    }

    fn merge(&mut self, o: &Aabb) {
        self.lo = self.lo.inf(&o.lo);
        self.hi = self.hi.sup(&o.hi);
    }

    fn area(&self) -> f64 {
        let d = self.hi - self.lo;
        if d.x < 0.0 {
            return 0.0;
        }
        2.0 * (d.x * d.y + d.y * d.z + d.z * d.x)
    }

    /// Slab test; returns the entry distance if the box is hit before `t_max`.
    fn hit(&self, origin: &V3, inv_dir: &V3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for k in 0..3 {
            let a = (self.lo[k] - origin[k]) * inv_dir[k];
            let b = (self.hi[k] - origin[k]) * inv_dir[k];
            let (near, far) = if a <= b { (a, b) } else { (b, a) };
            // NaN from 0·inf keeps the previous bound
            t0 = if near > t0 { near } else { t0 };
            t1 = if far < t1 { far } else { t1 };
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    /// Leaf: first primitive index. Inner: index of the second child (the
    /// first child follows its parent).
    offset: u32,
    /// Zero for inner nodes.
    count: u32,
}

/// Bounding volume hierarchy over triangles, built with binned SAH.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
    tris: Vec<[V3; 3]>,
}

const LEAF_SIZE: usize = 4;
const BINS: usize = 12;

impl Bvh {
    pub fn build(tris: Vec<[V3; 3]>) -> Self {
        let centroids: Vec<V3> = tris.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let boxes: Vec<Aabb> = tris
            .iter()
            .map(|t| {
                let mut b = Aabb::empty();
                t.iter().for_each(|p| b.grow(p));
                b
            })
            .collect();
        let mut order: Vec<u32> = (0..tris.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * tris.len() / LEAF_SIZE + 1);
        if !tris.is_empty() {
            build_node(&mut nodes, &mut order, 0, &centroids, &boxes);
        }
        Self { nodes, order, tris }
    }

    pub fn len(&self) -> usize {
        self.tris.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    /// Closest hit with `t` in `(t_min, t_max)`.
    pub fn intersect(&self, ray: &Ray, t_min: f64, t_max: f64) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        let mut limit = t_max;
        self.traverse(ray, |bvh, tri| {
            if let Some(h) = intersect_triangle(&bvh.tris[tri], ray, t_min, limit) {
                limit = h.t;
                best = Some(Hit { triangle: tri, ..h });
            }
            (false, limit)
        });
        best
    }

    /// True if anything blocks the ray within `(t_min, t_max)`.
    pub fn occluded(&self, ray: &Ray, t_min: f64, t_max: f64) -> bool {
        let mut blocked = false;
        self.traverse(ray, |bvh, tri| {
            if intersect_triangle(&bvh.tris[tri], ray, t_min, t_max).is_some() {
                blocked = true;
            }
            (blocked, t_max)
        });
        blocked
    }

    /// Visits leaf triangles front to back; `visit` returns (stop, current
    /// ray limit).
    fn traverse<F: FnMut(&Self, usize) -> (bool, f64)>(&self, ray: &Ray, mut visit: F) {
        if self.nodes.is_empty() {
            return;
        }
        let inv = ray.dir.map(|d| 1.0 / d);
        let mut limit = f64::INFINITY;
        let mut stack: Vec<(usize, f64)> = Vec::with_capacity(64);
        stack.push((0, 0.0));
        while let Some((idx, entry)) = stack.pop() {
            if entry > limit {
                continue;
            }
            let node = &self.nodes[idx];
            if node.count > 0 {
                let first = node.offset as usize;
                for &tri in &self.order[first..first + node.count as usize] {
                    let (stop, l) = visit(self, tri as usize);
                    limit = l;
                    if stop {
                        return;
                    }
                }
                continue;
            }
            let (a, b) = (idx + 1, node.offset as usize);
            let ha = self.nodes[a].bounds.hit(&ray.origin, &inv, limit);
            let hb = self.nodes[b].bounds.hit(&ray.origin, &inv, limit);
            match (ha, hb) {
                (Some(ta), Some(tb)) => {
                    // push the far child first so the near one pops next
                    if ta <= tb {
                        stack.push((b, tb));
                        stack.push((a, ta));
                    } else {
                        stack.push((a, ta));
                        stack.push((b, tb));
                    }
                }
                (Some(ta), None) => stack.push((a, ta)),
                (None, Some(tb)) => stack.push((b, tb)),
                (None, None) => {}
            }
        }
    }
}

fn build_node(nodes: &mut Vec<Node>, order: &mut [u32], first: usize, centroids: &[V3], boxes: &[Aabb]) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &i in order.iter() {
        bounds.merge(&boxes[i as usize]);
        cbounds.grow(&centroids[i as usize]);
    }
    let idx = nodes.len();
    nodes.push(Node {
        bounds,
        offset: first as u32,
        count: order.len() as u32,
    });
    if order.len() <= LEAF_SIZE {
        return idx;
    }
    let extent = cbounds.hi - cbounds.lo;
    let axis = extent.imax();
    if extent[axis] <= 0.0 {
        return idx;
    }

    let bin_of = |c: &V3| (((c[axis] - cbounds.lo[axis]) / extent[axis] * BINS as f64) as usize).min(BINS - 1);
    let mut bin_box = [Aabb::empty(); BINS];
    let mut bin_count = [0usize; BINS];
    for &i in order.iter() {
        let b = bin_of(&centroids[i as usize]);
        bin_box[b].merge(&boxes[i as usize]);
        bin_count[b] += 1;
    }
    let mut best = (f64::INFINITY, 0);
    for split in 1..BINS {
        let (mut lb, mut rb) = (Aabb::empty(), Aabb::empty());
        let (mut ln, mut rn) = (0, 0);
        for b in 0..split {
            lb.merge(&bin_box[b]);
            ln += bin_count[b];
        }
        for b in split..BINS {
            rb.merge(&bin_box[b]);
            rn += bin_count[b];
        }
        if ln == 0 || rn == 0 {
            continue;
        }
        let cost = lb.area() * ln as f64 + rb.area() * rn as f64;
        if cost < best.0 {
            best = (cost, split);
        }
    }
    let mid = if best.1 == 0 {
        // all centroids in one bin: median split
        order.sort_by(|a, b| centroids[*a as usize][axis].total_cmp(&centroids[*b as usize][axis]));
        order.len() / 2
    } else {
        let mut l = 0;
        for k in 0..order.len() {
            if bin_of(&centroids[order[k] as usize]) < best.1 {
                order.swap(k, l);
                l += 1;
            }
        }
        l
    };
    let (left, right) = order.split_at_mut(mid);
    build_node(nodes, left, first, centroids, boxes);
    let r = build_node(nodes, right, first + mid, centroids, boxes);
    nodes[idx].offset = r as u32;
    nodes[idx].count = 0;
    idx
}

/// Möller–Trumbore, two-sided.
fn intersect_triangle(t: &[V3; 3], ray: &Ray, t_min: f64, t_max: f64) -> Option<Hit> {
    let e1 = t[1] - t[0];
    let e2 = t[2] - t[0];
    let p = ray.dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let s = ray.origin - t[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = ray.dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let dist = e2.dot(&q) * inv;
    if dist > t_min && dist < t_max {
        Some(Hit {
            t: dist,
            triangle: 0,
            u,
            v,
        })
    } else {
        None
    }
}
