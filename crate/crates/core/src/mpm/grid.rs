use nalgebra::Vector3;

/// Background Eulerian node.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GridNode {
    pub mass: f64,
    pub momentum: Vector3<f64>,
    /// Only meaningful where `mass > 0`; zero elsewhere.
    pub velocity: Vector3<f64>,
}

/// Dense node grid. Node `(i, j, k)` sits at `(i, j, k) · width`; storage is
/// x-major so that a range of x indices is a contiguous slab.
#[derive(Debug, Clone)]
pub struct Grid {
    dims: [usize; 3],
    width: f64,
    nodes: Vec<GridNode>,
}

impl Grid {
    pub fn new(dims: [usize; 3], width: f64) -> Self {
        Self {
            dims,
            width,
            nodes: vec![GridNode::default(); dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    #[inline]
    pub fn flat_index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn coords(&self, flat: usize) -> [usize; 3] {
        let k = flat % self.dims[2];
        let rest = flat / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], k]
    }

    /// World position `X_g` of a node.
    pub fn node_position(&self, index: [usize; 3]) -> Vector3<f64> {
        Vector3::new(index[0] as f64, index[1] as f64, index[2] as f64) * self.width
    }

    pub fn node(&self, index: [usize; 3]) -> &GridNode {
        &self.nodes[self.flat_index(index[0], index[1], index[2])]
    }

    pub fn node_mut(&mut self, index: [usize; 3]) -> &mut GridNode {
        let f = self.flat_index(index[0], index[1], index[2]);
        &mut self.nodes[f]
    }

    pub fn nodes(&self) -> &[GridNode] {
        &self.nodes
    }

    pub fn nodes_mut(&mut self) -> &mut [GridNode] {
        &mut self.nodes
    }

    /// Number of nodes in one x-slab.
    pub fn slab_len(&self) -> usize {
        self.dims[1] * self.dims[2]
    }

    pub fn clear(&mut self) {
        self.nodes.fill(GridNode::default());
    }

    pub fn total_mass(&self) -> f64 {
        self.nodes.iter().map(|n| n.mass).sum()
    }

    pub fn total_momentum(&self) -> Vector3<f64> {
        self.nodes.iter().map(|n| n.momentum).sum()
    }

    /// True if the node lies within `margin` cells of any domain face,
    /// inclusive. A zero margin holds no nodes.
    pub fn in_margin(&self, index: [usize; 3], margin: usize) -> bool {
        margin > 0 && (0..3).any(|a| index[a] <= margin || index[a] + margin + 1 >= self.dims[a])
    }
}
