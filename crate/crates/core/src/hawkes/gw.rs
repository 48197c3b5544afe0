//! Single-ancestor branching clusters on the line.

use std::collections::VecDeque;

use super::kernel::FertilityKernel;
use crate::error::{Error, Result};
use crate::poisson::poisson_count;
use crate::rng::RngStream;

/// Largest cluster generated before giving up.
pub const CLUSTER_POINT_CAP: usize = 1_000_000;

/// Points of one cluster in generation order, starting with the ancestor.
#[derive(Debug, Clone, PartialEq)]
pub struct GwCluster {
    pub ancestor: f64,
    pub points: Vec<f64>,
    pub generations: Vec<u32>,
    /// Mixture component of each point's mark.
    pub marks: Vec<usize>,
    /// Index of each point's parent; the ancestor points to itself.
    pub parents: Vec<usize>,
}

impl GwCluster {
    /// `L`: time of the last point minus the ancestor time.
    pub fn extinction_time(&self) -> f64 {
        self.points.iter().fold(self.ancestor, |m, &t| m.max(t)) - self.ancestor
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Cluster of an ancestor at `ancestor`: every point with mark `z` has a
/// Poisson number of children, displaced by the normalised rate `h(., z)`.
pub fn sample_gw_cluster(kernel: &FertilityKernel, ancestor: f64, rng: &mut RngStream) -> Result<GwCluster> {
    let mut c = GwCluster {
        ancestor,
        points: vec![ancestor],
        generations: vec![0],
        marks: vec![kernel.sample_mark(rng)],
        parents: vec![0],
    };
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let shape = &kernel.components()[c.marks[i]].1;
        let kids = poisson_count(shape.mass(), rng)? as usize;
        if c.points.len() + kids > CLUSTER_POINT_CAP {
            return Err(Error::PointCapExceeded(CLUSTER_POINT_CAP));
        }
        for _ in 0..kids {
            let t = c.points[i] + shape.sample_delay(rng);
            c.points.push(t);
            c.generations.push(c.generations[i] + 1);
            c.marks.push(kernel.sample_mark(rng));
            c.parents.push(i);
            queue.push_back(c.points.len() - 1);
        }
    }
    Ok(c)
}
