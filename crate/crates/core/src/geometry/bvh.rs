//! Bounding volume hierarchy over triangle faces.
//!
//! Built once by median split over face centroids along the widest centroid
//! axis. Nodes are stored flat; the two children of an interior node are
//! adjacent in the node array.

use nalgebra::{Point3, Vector3};

use super::Aabb;

const LEAF_SIZE: usize = 4;

#[derive(Clone, Debug)]
struct Node {
    aabb: Aabb,
    /// Leaf: first index into `order`. Interior: index of the left child.
    first: u32,
    /// Number of faces for leaves, zero for interior nodes.
    count: u32,
}

#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

impl Bvh {
    /// Builds the hierarchy from per-face bounding boxes.
    pub fn build(face_boxes: &[Aabb]) -> Bvh {
        let mut order: Vec<u32> = (0..face_boxes.len() as u32).collect();
        let centroids: Vec<Point3<f64>> = face_boxes.iter().map(Aabb::center).collect();
        let mut nodes = Vec::with_capacity(2 * face_boxes.len() / LEAF_SIZE + 1);
        nodes.push(Node {
            aabb: Aabb::empty(),
            first: 0,
            count: 0,
        });
        if !face_boxes.is_empty() {
            build_recursive(&mut nodes, 0, &mut order, 0, face_boxes, &centroids);
        }
        Bvh { nodes, order }
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].aabb
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Visits faces whose node boxes are hit by the ray in `[t_min, t_max]`.
    ///
    /// The visitor returns an updated `t_max` (for nearest-hit pruning) or the
    /// same value to keep visiting everything.
    pub fn traverse_ray<F>(
        &self,
        origin: &Point3<f64>,
        inv_dir: &Vector3<f64>,
        t_min: f64,
        mut t_max: f64,
        mut visit: F,
    ) where
        F: FnMut(u32, f64) -> f64,
    {
        if self.order.is_empty() {
            return;
        }
        let mut stack: [u32; 64] = [0; 64];
        let mut top = 1usize;
        while top > 0 {
            top -= 1;
            let node = &self.nodes[stack[top] as usize];
            if !node.aabb.hit_by(origin, inv_dir, t_min, t_max) {
                continue;
            }
            if node.count > 0 {
                let start = node.first as usize;
                for &face in &self.order[start..start + node.count as usize] {
                    t_max = visit(face, t_max);
                }
            } else {
                stack[top] = node.first;
                stack[top + 1] = node.first + 1;
                top += 2;
            }
        }
    }

    /// Visits faces in nodes that could contain a point closer than the
    /// current bound. The visitor returns the updated squared bound.
    pub fn traverse_nearest<F>(&self, p: &Point3<f64>, mut bound_sq: f64, mut visit: F)
    where
        F: FnMut(u32, f64) -> f64,
    {
        if self.order.is_empty() {
            return;
        }
        let mut stack: [(u32, f64); 64] = [(0, 0.0); 64];
        let mut top = 1usize;
        stack[0] = (0, self.nodes[0].aabb.distance_sq(p));
        while top > 0 {
            top -= 1;
            let (idx, d) = stack[top];
            if d >= bound_sq {
                continue;
            }
            let node = &self.nodes[idx as usize];
            if node.count > 0 {
                let start = node.first as usize;
                for &face in &self.order[start..start + node.count as usize] {
                    bound_sq = visit(face, bound_sq);
                }
            } else {
                let l = node.first;
                let r = node.first + 1;
                let dl = self.nodes[l as usize].aabb.distance_sq(p);
                let dr = self.nodes[r as usize].aabb.distance_sq(p);
                // push the farther child first so the nearer one pops next
                if dl < dr {
                    stack[top] = (r, dr);
                    stack[top + 1] = (l, dl);
                } else {
                    stack[top] = (l, dl);
                    stack[top + 1] = (r, dr);
                }
                top += 2;
            }
        }
    }
}

fn build_recursive(
    nodes: &mut Vec<Node>,
    node_idx: usize,
    order: &mut [u32],
    offset: usize,
    boxes: &[Aabb],
    centroids: &[Point3<f64>],
) {
    let mut aabb = Aabb::empty();
    let mut cbox = Aabb::empty();
    for &f in order.iter() {
        aabb = aabb.union(&boxes[f as usize]);
        cbox.grow(&centroids[f as usize]);
    }
    nodes[node_idx].aabb = aabb;

    let extent = cbox.max - cbox.min;
    if order.len() <= LEAF_SIZE || extent.max() <= 0.0 {
        nodes[node_idx].first = offset as u32;
        nodes[node_idx].count = order.len() as u32;
        return;
    }
    let axis = extent.imax();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis]
            .partial_cmp(&centroids[b as usize][axis])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let left = nodes.len();
    let placeholder = Node {
        aabb: Aabb::empty(),
        first: 0,
        count: 0,
    };
    nodes.push(placeholder.clone());
    nodes.push(placeholder);
    nodes[node_idx].first = left as u32;
    nodes[node_idx].count = 0;

    let (lo, hi) = order.split_at_mut(mid);
    build_recursive(nodes, left, lo, offset, boxes, centroids);
    build_recursive(nodes, left + 1, hi, offset + mid, boxes, centroids);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box_at(x: f64) -> Aabb {
        Aabb {
            min: Point3::new(x, 0.0, 0.0),
            max: Point3::new(x + 1.0, 1.0, 1.0),
        }
    }

    #[test]
    fn every_face_reachable_exactly_once() {
        let boxes: Vec<Aabb> = (0..37).map(|i| unit_box_at(i as f64 * 2.0)).collect();
        let bvh = Bvh::build(&boxes);
        let mut seen = vec![0; boxes.len()];
        let p = Point3::new(0.5, 0.5, 0.5);
        bvh.traverse_nearest(&p, f64::INFINITY, |f, b| {
            seen[f as usize] += 1;
            b
        });
        assert!(seen.iter().all(|&c| c == 1));
        assert!((bvh.bounds().max.x - 73.0).abs() < 1e-12);
    }

    #[test]
    fn empty_build_is_traversable() {
        let bvh = Bvh::build(&[]);
        let mut called = false;
        bvh.traverse_ray(
            &Point3::origin(),
            &Vector3::new(1.0, 1.0, 1.0),
            0.0,
            10.0,
            |_, t| {
                called = true;
                t
            },
        );
        assert!(!called);
    }
}
