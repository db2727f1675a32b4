use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integration variable in which the grid spacing is uniform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coordinate {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub nodes: Vec<f64>,
    pub inner_count: usize,
    pub grading: f64,
    pub delta: f64,
    pub r_max: f64,
    pub coordinate: Coordinate,
}

/// Builds the radial grid: `inner_count` nodes in (0, delta] graded geometrically
/// towards the origin, then `outer_count` log-uniform nodes in (delta, r_max].
/// A grading of exactly 1 gives uniform nodes delta*(i+1)/inner_count.
pub fn build_grid(delta: f64, r_max: f64, inner_count: usize, outer_count: usize, grading: f64) -> Result<RadialGrid> {
    check_common(delta, r_max, inner_count, outer_count)?;
    if !(1.0..=2.0).contains(&grading) {
        return Err(Error::InvalidArgument("grading must lie in [1, 2]".into()));
    }
    let n = inner_count;
    if grading == 1.0 {
        let mut nodes: Vec<f64> = (0..n).map(|i| delta * (i + 1) as f64 / n as f64).collect();
        nodes[n - 1] = delta;
        for j in 1..=outer_count {
            nodes.push(if j == outer_count { r_max } else { delta + (r_max - delta) * j as f64 / outer_count as f64 });
        }
        return Ok(RadialGrid { nodes, inner_count, grading, delta, r_max, coordinate: Coordinate::Linear });
    }
    let r_min = delta * grading.powf(-((n - 1) as f64));
    if r_min > delta * 1e-4 * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "grading {grading} with {n} inner nodes gives r_min = {r_min:e} > delta*1e-4"
        )));
    }
    Ok(geometric(delta, r_max, n, outer_count, grading))
}

/// Graded grid whose first node is `r_min`; the grading is derived from it.
pub fn build_grid_rmin(delta: f64, r_max: f64, inner_count: usize, outer_count: usize, r_min: f64) -> Result<RadialGrid> {
    check_common(delta, r_max, inner_count, outer_count)?;
    if !(r_min > 0.0 && r_min < delta) {
        return Err(Error::InvalidArgument("r_min must lie in (0, delta)".into()));
    }
    let grading = (delta / r_min).powf(1.0 / (inner_count - 1) as f64);
    if grading > 2.0 {
        return Err(Error::InvalidArgument(format!("derived grading {grading} exceeds 2")));
    }
    let mut g = geometric(delta, r_max, inner_count, outer_count, grading);
    g.nodes[0] = r_min;
    Ok(g)
}

fn check_common(delta: f64, r_max: f64, inner_count: usize, outer_count: usize) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite() && r_max.is_finite()) {
        return Err(Error::InvalidArgument("delta must be positive".into()));
    }
    if r_max < delta {
        return Err(Error::InvalidArgument("r_max must not be below delta".into()));
    }
    if inner_count < 16 {
        return Err(Error::InvalidArgument("inner_count must be at least 16".into()));
    }
    if (outer_count == 0) != (r_max == delta) {
        return Err(Error::InvalidArgument("outer_count must be 0 exactly when r_max = delta".into()));
    }
    if outer_count != 0 && outer_count < 16 {
        return Err(Error::InvalidArgument("outer_count must be at least 16".into()));
    }
    Ok(())
}

fn geometric(delta: f64, r_max: f64, n: usize, outer_count: usize, q: f64) -> RadialGrid {
    let lq = q.ln();
    let mut nodes: Vec<f64> = (0..n).map(|i| delta * (lq * (i as f64 - (n - 1) as f64)).exp()).collect();
    nodes[n - 1] = delta;
    let span = (r_max / delta).ln();
    for j in 1..=outer_count {
        nodes.push(if j == outer_count { r_max } else { delta * (span * j as f64 / outer_count as f64).exp() });
    }
    RadialGrid { nodes, inner_count: n, grading: q, delta, r_max, coordinate: Coordinate::Log }
}

impl RadialGrid {
    /// Grid over arbitrary strictly increasing positive nodes, all treated as inner.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<RadialGrid> {
        if nodes.len() < 3 {
            return Err(Error::InvalidArgument("a grid needs at least 3 nodes".into()));
        }
        if !(nodes[0] > 0.0) || nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("nodes must be positive, finite and strictly increasing".into()));
        }
        let last = *nodes.last().unwrap();
        let grading = nodes[1] / nodes[0];
        Ok(RadialGrid { inner_count: nodes.len(), grading, delta: last, r_max: last, coordinate: Coordinate::Log, nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn r_min(&self) -> f64 {
        self.nodes[0]
    }

    /// Index of the node at delta.
    pub fn delta_index(&self) -> usize {
        self.inner_count - 1
    }

    /// The sub-grid of nodes in (0, delta].
    pub fn inner(&self) -> RadialGrid {
        RadialGrid {
            nodes: self.nodes[..self.inner_count].to_vec(),
            inner_count: self.inner_count,
            grading: self.grading,
            delta: self.delta,
            r_max: self.delta,
            coordinate: self.coordinate,
        }
    }

    /// Values of the integration variable at each node.
    pub fn coords(&self) -> Vec<f64> {
        match self.coordinate {
            Coordinate::Linear => self.nodes.clone(),
            Coordinate::Log => self.nodes.iter().map(|r| r.ln()).collect(),
        }
    }

    /// dr/dt at each node for the integration variable t.
    pub fn jacobian(&self) -> Vec<f64> {
        match self.coordinate {
            Coordinate::Linear => vec![1.0; self.len()],
            Coordinate::Log => self.nodes.clone(),
        }
    }
}
