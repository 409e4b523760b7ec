#![allow(dead_code)]

use modalray_core::dynamics::{integrate_ray, RaySettings, RaySolution, RingSource, ShellMode, SourceNode};
use modalray_core::hamiltonian::HamiltonianModel;
use modalray_core::MediumModel;

pub fn ring_with(alpha: f64, l: usize, grad_h: [f64; 2], shell: ShellMode) -> RingSource {
    let medium = MediumModel::shallow_slope(alpha).unwrap().with_grad_h(grad_h).unwrap();
    RingSource::new(HamiltonianModel::new(medium, l), 300.0, 50.0, 1.0, shell)
}

pub fn ring(alpha: f64, l: usize) -> RingSource {
    ring_with(alpha, l, [1e-3, 0.0], ShellMode::Strict)
}

pub fn trace(src: &RingSource, mu: [f64; 2], settings: &RaySettings) -> RaySolution {
    let node = SourceNode::new(&src.model, src, mu).unwrap();
    node.validate(&src.model, src.shell).unwrap();
    integrate_ray(&src.model, &node, settings).unwrap()
}

pub fn shifted(mu: [f64; 2], j: usize, e: f64) -> [f64; 2] {
    let mut m = mu;
    m[j] += e;
    m
}

/// max |a − b| / max |b|.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    diff / scale
}
