use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::Viewpoint;
use crate::attention::WorkspaceSpec;
use crate::Vec3;

struct Entry(Viewpoint);

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .utility
            .total_cmp(&other.0.utility)
            .then_with(|| other.0.index.cmp(&self.0.index))
    }
}

/// Max-heap of scored viewpoints; equal utilities pop lower index first.
#[derive(Default)]
pub struct UtilityHeap {
    heap: BinaryHeap<Entry>,
}

impl UtilityHeap {
    pub fn new(viewpoints: impl IntoIterator<Item = Viewpoint>) -> Self {
        Self {
            heap: viewpoints.into_iter().map(Entry).collect(),
        }
    }

    pub fn push(&mut self, vp: Viewpoint) {
        self.heap.push(Entry(vp));
    }

    pub fn pop(&mut self) -> Option<Viewpoint> {
        self.heap.pop().map(|e| e.0)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Pops until a viewpoint has utility above `threshold` and a straight
/// path from `current` inside the workspace. `None` once nothing
/// qualifies.
pub fn next_best_view(
    heap: &mut UtilityHeap,
    threshold: f64,
    ws: &WorkspaceSpec,
    current: &Vec3,
    path_step: f64,
) -> Option<Viewpoint> {
    while let Some(vp) = heap.pop() {
        if vp.utility <= threshold {
            // everything left scores lower
            return None;
        }
        if ws.segment_inside(current, &vp.position, path_step) {
            return Some(vp);
        }
    }
    None
}
