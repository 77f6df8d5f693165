//! Exact k-nearest-neighbour search for large samples.

use rayon::prelude::*;

use super::Points;

const LEAF_SIZE: usize = 16;

enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: Box<Node>, right: Box<Node> },
}

pub(crate) struct KdTree<'a> {
    pts: &'a Points,
    order: Vec<usize>,
    root: Node,
}

impl<'a> KdTree<'a> {
    pub fn build(pts: &'a Points) -> Self {
        let mut order: Vec<usize> = (0..pts.len()).collect();
        let len = order.len();
        let root = build_node(pts, &mut order, 0, len);
        KdTree { pts, order, root }
    }

    pub fn kth_distances(&self, k: usize) -> Vec<f64> {
        (0..self.pts.len())
            .into_par_iter()
            .map(|i| {
                let mut best = vec![f64::INFINITY; k];
                self.search(&self.root, i, &mut best);
                best[k - 1].sqrt()
            })
            .collect()
    }

    fn search(&self, node: &Node, query: usize, best: &mut Vec<f64>) {
        let p = self.pts.point(query);
        match node {
            Node::Leaf { start, end } => {
                for &j in &self.order[*start..*end] {
                    if j == query {
                        continue;
                    }
                    let d2: f64 = p.iter().zip(self.pts.point(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                    let k = best.len();
                    if d2 < best[k - 1] {
                        let pos = best.partition_point(|&b| b <= d2);
                        best.insert(pos, d2);
                        best.pop();
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = p[*axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, best);
                if diff * diff <= best[best.len() - 1] {
                    self.search(far, query, best);
                }
            }
        }
    }
}

fn build_node(pts: &Points, order: &mut [usize], start: usize, end: usize) -> Node {
    if end - start <= LEAF_SIZE {
        return Node::Leaf { start, end };
    }
    let slice = &mut order[start..end];
    let dim = pts.dim();
    let axis = (0..dim)
        .max_by(|&a, &b| spread(pts, slice, a).total_cmp(&spread(pts, slice, b)))
        .unwrap_or(0);
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&x, &y| pts.point(x)[axis].total_cmp(&pts.point(y)[axis]));
    let value = pts.point(slice[mid])[axis];
    // Points equal to the split value may sit on either side; the search
    // visits the far side whenever the plane is within the current radius.
    let left = build_node(pts, order, start, start + mid);
    let right = build_node(pts, order, start + mid, end);
    Node::Split { axis, value, left: Box::new(left), right: Box::new(right) }
}

fn spread(pts: &Points, idx: &[usize], axis: usize) -> f64 {
    let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
        let v = pts.point(i)[axis];
        (lo.min(v), hi.max(v))
    });
    hi - lo
}
