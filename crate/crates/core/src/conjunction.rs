//! Two-phase conjunction screening over one collisional timestep.
//!
//! Each spacecraft's dense output is boxed in (x, y, z, t) by interval Horner
//! evaluation, boxes are organized in a median-split BVH, and candidate pairs
//! are resolved exactly as the first approaching root of `d²(t) − r_c²`.

use rayon::prelude::*;

use crate::poly::{compose_affine, derivative, horner, mul, poly_roots_in_interval};
use crate::propagator::TrajectorySegment;

/// Largest number of objects stored in one leaf.
pub const LEAF_SIZE: usize = 4;

/// Box in (x, y, z, t): km for the spatial axes, s for time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb4 {
    pub lo: [f64; 4],
    pub hi: [f64; 4],
    pub id: usize,
}

impl Aabb4 {
    pub fn new(lo: [f64; 4], hi: [f64; 4], id: usize) -> Self {
        Self { lo, hi, id }
    }

    /// Closed-interval overlap on all four axes.
    pub fn overlaps(&self, other: &Aabb4) -> bool {
        (0..4).all(|k| self.lo[k] <= other.hi[k] && other.lo[k] <= self.hi[k])
    }

    pub fn contains(&self, other: &Aabb4) -> bool {
        (0..4).all(|k| self.lo[k] <= other.lo[k] && other.hi[k] <= self.hi[k])
    }

    pub fn union(&self, other: &Aabb4) -> Aabb4 {
        Aabb4 {
            lo: std::array::from_fn(|k| self.lo[k].min(other.lo[k])),
            hi: std::array::from_fn(|k| self.hi[k].max(other.hi[k])),
            id: self.id,
        }
    }

    pub fn centroid(&self, axis: usize) -> f64 {
        0.5 * (self.lo[axis] + self.hi[axis])
    }
}

/// Range of a polynomial over `τ ∈ [0, h]` by interval Horner, padded outward
/// by a few ulps of the accumulated magnitude.
pub fn poly_range(coeffs: &[f64], h: f64) -> (f64, f64) {
    let Some((&last, rest)) = coeffs.split_last() else {
        return (0.0, 0.0);
    };
    let (mut lo, mut hi) = (last, last);
    let mut magnitude = last.abs();
    for &c in rest.iter().rev() {
        // [lo, hi] · [0, h] + c
        let (a, b) = (lo * h, hi * h);
        lo = a.min(0.0) + c;
        hi = b.max(0.0) + c;
        magnitude = magnitude * h + c.abs();
    }
    let pad = 8.0 * f64::EPSILON * magnitude;
    (lo - pad, hi + pad)
}

/// Spatial bounds of one segment over its whole span.
pub fn position_bounds(seg: &TrajectorySegment) -> ([f64; 3], [f64; 3]) {
    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    for k in 0..3 {
        (lo[k], hi[k]) = poly_range(&seg.coeffs[k], seg.h);
    }
    (lo, hi)
}

/// Box of one object over `span`, inflated by `r_c / 2` on the spatial axes.
pub fn compute_aabb(id: usize, segments: &[TrajectorySegment], r_c: f64, span: (f64, f64)) -> Aabb4 {
    let mut lo = [f64::INFINITY; 4];
    let mut hi = [f64::NEG_INFINITY; 4];
    for seg in segments {
        let (slo, shi) = position_bounds(seg);
        for k in 0..3 {
            lo[k] = lo[k].min(slo[k]);
            hi[k] = hi[k].max(shi[k]);
        }
    }
    for k in 0..3 {
        lo[k] -= 0.5 * r_c;
        hi[k] += 0.5 * r_c;
    }
    lo[3] = span.0;
    hi[3] = span.1;
    Aabb4 { lo, hi, id }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BvhNode {
    /// `items[start..start + count]` of the owning tree.
    Leaf { bounds: Aabb4, start: usize, count: usize },
    Inner { bounds: Aabb4, left: usize, right: usize },
}

impl BvhNode {
    pub fn bounds(&self) -> &Aabb4 {
        match self {
            BvhNode::Leaf { bounds, .. } | BvhNode::Inner { bounds, .. } => bounds,
        }
    }
}

/// Bounding volume hierarchy; node 0 is the root.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bvh {
    pub nodes: Vec<BvhNode>,
    /// Boxes reordered so that every leaf owns a contiguous run.
    pub items: Vec<Aabb4>,
}

impl Bvh {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Ids of all boxes overlapping `query`.
    pub fn query(&self, query: &Aabb4, out: &mut Vec<usize>) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack = vec![0usize];
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx];
            if !node.bounds().overlaps(query) {
                continue;
            }
            match *node {
                BvhNode::Leaf { start, count, .. } => {
                    out.extend(self.items[start..start + count].iter().filter(|b| b.overlaps(query)).map(|b| b.id));
                }
                BvhNode::Inner { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
    }

    /// Checks containment, leaf coverage and child indices; returns a description of the first violation.
    pub fn validate(&self) -> Result<(), String> {
        if self.nodes.is_empty() {
            return if self.items.is_empty() { Ok(()) } else { Err("items without nodes".into()) };
        }
        let mut seen = vec![0usize; self.items.len()];
        let mut stack = vec![0usize];
        let mut visited = 0;
        while let Some(idx) = stack.pop() {
            visited += 1;
            match &self.nodes[idx] {
                BvhNode::Leaf { bounds, start, count } => {
                    if *count == 0 || *count > LEAF_SIZE {
                        return Err(format!("leaf {idx} holds {count} items"));
                    }
                    for (i, item) in self.items[*start..start + count].iter().enumerate() {
                        if !bounds.contains(item) {
                            return Err(format!("leaf {idx} does not contain item {}", item.id));
                        }
                        seen[start + i] += 1;
                    }
                }
                BvhNode::Inner { bounds, left, right } => {
                    for &child in [left, right] {
                        if child <= idx || child >= self.nodes.len() {
                            return Err(format!("node {idx} has bad child {child}"));
                        }
                        if !bounds.contains(self.nodes[child].bounds()) {
                            return Err(format!("node {idx} does not contain child {child}"));
                        }
                        stack.push(child);
                    }
                }
            }
        }
        if visited != self.nodes.len() {
            return Err(format!("{} of {} nodes reachable", visited, self.nodes.len()));
        }
        match seen.iter().position(|&n| n != 1) {
            Some(i) => Err(format!("item {} appears in {} leaves", self.items[i].id, seen[i])),
            None => Ok(()),
        }
    }
}

/// Median split on the axis of largest centroid extent; ties in the sort are
/// broken by object id so the tree depends only on the input boxes.
pub fn build_bvh(boxes: &[Aabb4]) -> Bvh {
    let mut bvh = Bvh { nodes: Vec::new(), items: boxes.to_vec() };
    if !boxes.is_empty() {
        let n = bvh.items.len();
        build_node(&mut bvh, 0, n);
    }
    bvh
}

fn build_node(bvh: &mut Bvh, start: usize, end: usize) -> usize {
    let items = &mut bvh.items[start..end];
    let bounds = items.iter().skip(1).fold(items[0], |acc, b| acc.union(b));
    let idx = bvh.nodes.len();
    if items.len() <= LEAF_SIZE {
        bvh.nodes.push(BvhNode::Leaf { bounds, start, count: items.len() });
        return idx;
    }
    let mut axis = 0;
    let mut widest = f64::NEG_INFINITY;
    for k in 0..4 {
        let (lo, hi) = items
            .iter()
            .map(|b| b.centroid(k))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c), hi.max(c)));
        if hi - lo > widest {
            widest = hi - lo;
            axis = k;
        }
    }
    items.sort_by(|a, b| a.centroid(axis).total_cmp(&b.centroid(axis)).then(a.id.cmp(&b.id)));
    let mid = start + items.len() / 2;
    // Reserve the slot, then fill in children.
    bvh.nodes.push(BvhNode::Leaf { bounds, start, count: 0 });
    let left = build_node(bvh, start, mid);
    let right = build_node(bvh, mid, end);
    bvh.nodes[idx] = BvhNode::Inner { bounds, left, right };
    idx
}

/// All pairs `(i, j)`, `i < j`, of overlapping boxes, sorted.
pub fn broad_phase(bvh: &Bvh) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = bvh
        .items
        .par_iter()
        .flat_map_iter(|b| {
            let mut hits = Vec::new();
            bvh.query(b, &mut hits);
            hits.into_iter().filter(move |&other| other > b.id).map(move |other| (b.id, other))
        })
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

/// Earliest time at which two objects come within `r_c` while approaching.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conjunction {
    pub id_i: usize,
    pub id_j: usize,
    pub t: f64,
}

/// Dense trajectory of one object over the screened span.
#[derive(Debug, Clone, Copy)]
pub struct Track<'a> {
    pub id: usize,
    pub segments: &'a [TrajectorySegment],
}

/// Exact narrow phase: for every pair of time-overlapping segments the
/// squared distance is formed as a polynomial on the common sub-span and the
/// first root of `d² − r_c²` with negative slope is kept.
pub fn narrow_phase(a: &Track, b: &Track, r_c: f64, span: (f64, f64)) -> Option<Conjunction> {
    let (id_i, id_j) = (a.id.min(b.id), a.id.max(b.id));
    let mut j_start = 0;
    for si in a.segments {
        for (j, sj) in b.segments.iter().enumerate().skip(j_start) {
            if sj.t1 <= si.t0 {
                j_start = j + 1;
                continue;
            }
            if sj.t0 >= si.t1 {
                break;
            }
            let ta = si.t0.max(sj.t0).max(span.0);
            let tb = si.t1.min(sj.t1).min(span.1);
            if tb <= ta {
                continue;
            }
            if let Some(t) = first_approach(si, sj, ta, tb, r_c) {
                return Some(Conjunction { id_i, id_j, t });
            }
        }
    }
    None
}

fn first_approach(si: &TrajectorySegment, sj: &TrajectorySegment, ta: f64, tb: f64, r_c: f64) -> Option<f64> {
    let len = tb - ta;
    let mut dist2 = vec![0.0];
    for k in 0..3 {
        let pi = compose_affine(&si.coeffs[k], ta - si.t0, len);
        let pj = compose_affine(&sj.coeffs[k], ta - sj.t0, len);
        let n = pi.len().max(pj.len());
        let diff: Vec<f64> = (0..n)
            .map(|m| pi.get(m).copied().unwrap_or(0.0) - pj.get(m).copied().unwrap_or(0.0))
            .collect();
        let sq = mul(&diff, &diff);
        if sq.len() > dist2.len() {
            dist2.resize(sq.len(), 0.0);
        }
        for (d, s) in dist2.iter_mut().zip(sq) {
            *d += s;
        }
    }
    dist2[0] -= r_c * r_c;
    let slope = derivative(&dist2);
    poly_roots_in_interval(&dist2, 0.0, 1.0, 1e-14)
        .into_iter()
        .find(|&s| horner(&slope, s) < 0.0)
        .map(|s| ta + s * len)
}

/// Broad phase then narrow phase; sorted by time, then ids.
pub fn detect_all(tracks: &[Track], r_c: f64, span: (f64, f64)) -> Vec<Conjunction> {
    if tracks.len() < 2 {
        return Vec::new();
    }
    let boxes: Vec<Aabb4> = tracks
        .par_iter()
        .enumerate()
        .map(|(slot, tr)| compute_aabb(slot, tr.segments, r_c, span))
        .collect();
    let bvh = build_bvh(&boxes);
    let candidates = broad_phase(&bvh);
    let mut found: Vec<Conjunction> = candidates
        .par_iter()
        .filter_map(|&(i, j)| narrow_phase(&tracks[i], &tracks[j], r_c, span))
        .collect();
    sort_conjunctions(&mut found);
    found
}

/// Narrow phase over every pair, skipping the broad phase.
pub fn detect_all_pairs(tracks: &[Track], r_c: f64, span: (f64, f64)) -> Vec<Conjunction> {
    let mut found = Vec::new();
    for i in 0..tracks.len() {
        for j in i + 1..tracks.len() {
            found.extend(narrow_phase(&tracks[i], &tracks[j], r_c, span));
        }
    }
    sort_conjunctions(&mut found);
    found
}

fn sort_conjunctions(found: &mut [Conjunction]) {
    found.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.id_i.cmp(&b.id_i)).then(a.id_j.cmp(&b.id_j)));
}
