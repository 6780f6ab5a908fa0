//! Exact k-nearest-neighbour search.
//!
//! Neighbours are ordered by squared Euclidean distance, then by index, so
//! results are fully determined even when distances tie.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::mesh::Point;

#[inline]
pub(crate) fn dist2(a: &Point, b: &Point) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

#[derive(Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Keeps the k smallest candidates; the heap top is the current worst.
struct Best {
    k: usize,
    heap: BinaryHeap<Candidate>,
}

impl Best {
    fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    #[inline]
    fn offer(&mut self, c: Candidate) {
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if let Some(top) = self.heap.peek() {
            if c < *top {
                self.heap.pop();
                self.heap.push(c);
            }
        }
    }

    /// Distance bound for pruning; `None` until k candidates are held.
    #[inline]
    fn bound(&self) -> Option<f64> {
        if self.heap.len() < self.k {
            None
        } else {
            self.heap.peek().map(|c| c.d2)
        }
    }

    fn into_sorted(self) -> Vec<usize> {
        self.heap.into_sorted_vec().into_iter().map(|c| c.index).collect()
    }
}

/// The `k` points nearest to `query`, ascending. Linear scan.
pub fn knn_indices(points: &[Point], query: &Point, k: usize) -> Result<Vec<usize>> {
    if k > points.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds point count {}",
            points.len()
        )));
    }
    let mut best = Best::new(k);
    for (index, p) in points.iter().enumerate() {
        best.offer(Candidate {
            d2: dist2(p, query),
            index,
        });
    }
    Ok(best.into_sorted())
}

const LEAF_SIZE: usize = 16;

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// Static kd-tree over a borrowed point slice.
pub struct KdTree<'a> {
    points: &'a [Point],
    order: Vec<usize>,
    root: Node,
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Point]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let root = build(points, &mut order, 0, points.len());
        Self {
            points,
            order,
            root,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same contract and result as [`knn_indices`].
    pub fn knn(&self, query: &Point, k: usize) -> Result<Vec<usize>> {
        if k > self.points.len() {
            return Err(Error::InvalidArgument(format!(
                "k = {k} exceeds point count {}",
                self.points.len()
            )));
        }
        let mut best = Best::new(k);
        if k > 0 {
            self.search(&self.root, query, &mut best);
        }
        Ok(best.into_sorted())
    }

    fn search(&self, node: &Node, q: &Point, best: &mut Best) {
        match node {
            Node::Leaf { start, end } => {
                for &index in &self.order[*start..*end] {
                    best.offer(Candidate {
                        d2: dist2(&self.points[index], q),
                        index,
                    });
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // `<=` keeps equal-distance points with lower indices reachable.
                if best.bound().is_none_or(|b| diff * diff <= b) {
                    self.search(far, q, best);
                }
            }
        }
    }
}

fn build(points: &[Point], order: &mut [usize], start: usize, end: usize) -> Node {
    if end - start <= LEAF_SIZE {
        return Node::Leaf { start, end };
    }
    let slice = &mut order[start..end];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in slice.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(points[i][a]);
            hi[a] = hi[a].max(points[i][a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0);
    if hi[axis] - lo[axis] == 0.0 {
        return Node::Leaf { start, end };
    }
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let value = points[slice[mid]][axis];
    // Left holds coordinates <= value, right >= value: both sides are
    // searched whenever the query sits on the plane.
    let split = start + mid;
    Node::Split {
        axis,
        value,
        left: Box::new(build(points, order, start, split)),
        right: Box::new(build(points, order, split, end)),
    }
}
