//! Ray fans over a (μ₁, μ₂) grid.

use crate::dynamics::{integrate_ray, RaySettings, RaySolution, ShellMode, SourceManifold, SourceNode};
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianModel;

/// Rectangular μ grid, stored μ₁-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MuGrid {
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
}

impl MuGrid {
    pub fn new(mu1: Vec<f64>, mu2: Vec<f64>) -> Self {
        Self { mu1, mu2 }
    }

    /// `count` evenly spaced values from `start` to `end`; `end` itself is
    /// left out when `endpoint` is false (closed rings).
    pub fn linspace(count: usize, start: f64, end: f64, endpoint: bool) -> Vec<f64> {
        match count {
            0 => vec![],
            1 => vec![start],
            _ => {
                let div = if endpoint { count - 1 } else { count } as f64;
                (0..count).map(|i| start + (end - start) * i as f64 / div).collect()
            }
        }
    }

    pub fn len(&self) -> usize {
        self.mu1.len() * self.mu2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i1: usize, i2: usize) -> usize {
        i1 * self.mu2.len() + i2
    }

    pub fn nodes(&self) -> Vec<[f64; 2]> {
        self.mu1.iter().flat_map(|&a| self.mu2.iter().map(move |&b| [a, b])).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

#[derive(Debug, Clone)]
pub struct RayFan {
    pub grid: MuGrid,
    pub shell: ShellMode,
    pub checkpoints: Vec<f64>,
    pub rays: Vec<RaySolution>,
}

impl RayFan {
    pub fn ray(&self, i1: usize, i2: usize) -> &RaySolution {
        &self.rays[self.grid.index(i1, i2)]
    }

    /// Rays sharing one μ₁ value, in μ₂ order.
    pub fn row(&self, i1: usize) -> &[RaySolution] {
        let n = self.grid.mu2.len();
        &self.rays[i1 * n..(i1 + 1) * n]
    }
}

fn trace_node(
    model: &HamiltonianModel,
    source: &dyn SourceManifold,
    shell: ShellMode,
    settings: &RaySettings,
    mu: [f64; 2],
) -> Result<RaySolution> {
    let node = SourceNode::new(model, source, mu)?;
    node.validate(model, shell)?;
    integrate_ray(model, &node, settings)
}

/// Traces every grid node. Results are ordered by μ index whatever the
/// execution mode; the first failure in that order is returned.
pub fn trace_fan(
    model: &HamiltonianModel,
    source: &dyn SourceManifold,
    shell: ShellMode,
    grid: &MuGrid,
    settings: &RaySettings,
    execution: Execution,
) -> Result<RayFan> {
    settings.validate()?;
    if grid.is_empty() {
        return Err(Error::InvalidSettings("empty mu grid".into()));
    }
    let nodes = grid.nodes();
    let run = |mu: &[f64; 2]| trace_node(model, source, shell, settings, *mu);
    let results: Vec<Result<RaySolution>> = match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            nodes.par_iter().map(run).collect()
        }
        _ => nodes.iter().map(run).collect(),
    };
    let rays = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(RayFan { grid: grid.clone(), shell, checkpoints: settings.checkpoints.clone(), rays })
}
