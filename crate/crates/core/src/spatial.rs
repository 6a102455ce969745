//! Exact k-nearest-neighbor search over 3-D point sets.
//!
//! A classic median-split kd-tree. Ties on distance are broken by point
//! index, so query results are a deterministic function of the input
//! point order regardless of tree layout.

use crate::types::Vec3;

#[derive(Clone, Debug)]
struct Node {
    /// Index into `points`.
    point: u32,
    axis: u8,
    left: i32,
    right: i32,
}

/// Immutable kd-tree over a fixed point set.
#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    nodes: Vec<Node>,
    root: i32,
}

impl KdTree {
    pub fn build(points: &[Vec3]) -> Self {
        let pts: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        let mut idx: Vec<u32> = (0..pts.len() as u32).collect();
        let mut nodes = Vec::with_capacity(pts.len());
        let root = build_rec(&pts, &mut idx, 0, &mut nodes);
        KdTree { points: pts, nodes, root }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` nearest points to `query`, sorted by (distance, index).
    /// Returns fewer than `k` entries only when the tree holds fewer points.
    pub fn knn(&self, query: Vec3, k: usize) -> Vec<Neighbor> {
        let mut best = BestK::new(k);
        if self.root >= 0 && k > 0 {
            self.search(self.root, &[query.x, query.y, query.z], &mut best);
        }
        best.into_sorted()
    }

    /// Nearest single point, if any.
    pub fn nearest_one(&self, query: Vec3) -> Option<Neighbor> {
        self.knn(query, 1).into_iter().next()
    }

    fn search(&self, node: i32, q: &[f64; 3], best: &mut BestK) {
        let n = &self.nodes[node as usize];
        let p = &self.points[n.point as usize];
        let d2 = dist2(p, q);
        best.offer(Neighbor { index: n.point as usize, dist2: d2 });

        let axis = n.axis as usize;
        let delta = q[axis] - p[axis];
        let (near, far) = if delta < 0.0 { (n.left, n.right) } else { (n.right, n.left) };
        if near >= 0 {
            self.search(near, q, best);
        }
        if far >= 0 && delta * delta <= best.worst_dist2() {
            self.search(far, q, best);
        }
    }
}

/// One kNN result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist2: f64,
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

fn build_rec(pts: &[[f64; 3]], idx: &mut [u32], depth: usize, nodes: &mut Vec<Node>) -> i32 {
    if idx.is_empty() {
        return -1;
    }
    let axis = depth % 3;
    let mid = idx.len() / 2;
    // Total order (coordinate, index) keeps the layout deterministic.
    idx.select_nth_unstable_by(mid, |&a, &b| {
        pts[a as usize][axis]
            .partial_cmp(&pts[b as usize][axis])
            .unwrap()
            .then(a.cmp(&b))
    });
    let point = idx[mid];
    let slot = nodes.len();
    nodes.push(Node { point, axis: axis as u8, left: -1, right: -1 });
    let (lo, rest) = idx.split_at_mut(mid);
    let hi = &mut rest[1..];
    let left = build_rec(pts, lo, depth + 1, nodes);
    let right = build_rec(pts, hi, depth + 1, nodes);
    nodes[slot].left = left;
    nodes[slot].right = right;
    slot as i32
}

/// Bounded max-heap of the k best candidates with (dist, index) ordering.
struct BestK {
    k: usize,
    heap: Vec<Neighbor>,
}

impl BestK {
    fn new(k: usize) -> Self {
        BestK { k, heap: Vec::with_capacity(k + 1) }
    }

    fn worst_dist2(&self) -> f64 {
        if self.heap.len() < self.k {
            f64::INFINITY
        } else {
            self.heap[0].dist2
        }
    }

    fn offer(&mut self, cand: Neighbor) {
        if self.heap.len() < self.k {
            self.heap.push(cand);
            self.sift_up(self.heap.len() - 1);
        } else if less(&cand, &self.heap[0]) {
            self.heap[0] = cand;
            self.sift_down(0);
        }
    }

    fn into_sorted(mut self) -> Vec<Neighbor> {
        self.heap
            .sort_by(|a, b| a.dist2.partial_cmp(&b.dist2).unwrap().then(a.index.cmp(&b.index)));
        self.heap
    }

    fn sift_up(&mut self, mut i: usize) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if less(&self.heap[parent], &self.heap[i]) {
                self.heap.swap(parent, i);
                i = parent;
            } else {
                break;
            }
        }
    }

    fn sift_down(&mut self, mut i: usize) {
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut largest = i;
            if l < self.heap.len() && less(&self.heap[largest], &self.heap[l]) {
                largest = l;
            }
            if r < self.heap.len() && less(&self.heap[largest], &self.heap[r]) {
                largest = r;
            }
            if largest == i {
                break;
            }
            self.heap.swap(i, largest);
            i = largest;
        }
    }
}

/// `a` strictly better (closer) than `b` under the (dist, index) order.
fn less(a: &Neighbor, b: &Neighbor) -> bool {
    a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index)
}
