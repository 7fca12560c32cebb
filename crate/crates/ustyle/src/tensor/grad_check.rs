//! Central-finite-difference gradient checking for scalar-valued graph
//! compositions.

use crate::error::Result;
use crate::tensor::{Graph, NodeId, Tensor};

/// Outcome of one gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    /// Total number of coordinates compared.
    pub coords: usize,
}

impl GradCheckReport {
    fn fold(&mut self, analytic: f64, numeric: f64) {
        let abs_err = (analytic - numeric).abs();
        let rel_err = abs_err / (analytic.abs() + numeric.abs()).max(1e-8);
        self.max_abs_err = self.max_abs_err.max(abs_err);
        self.max_rel_err = self.max_rel_err.max(rel_err);
        self.coords += 1;
    }
}

/// Per-coordinate relative error between two gradient vectors:
/// `|analytic - numeric| / max(1e-8, |analytic| + |numeric|)`, folded to
/// the maximum.
pub fn compare_gradients(analytic: &[f64], numeric: &[f64]) -> GradCheckReport {
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        max_abs_err: 0.0,
        coords: 0,
    };
    for (&a, &n) in analytic.iter().zip(numeric) {
        report.fold(a, n);
    }
    report
}

/// Compare analytic gradients of a scalar-valued composition against
/// central finite differences.
///
/// `build` receives a fresh graph plus leaf ids for each input tensor (in
/// order) and must return the scalar root. Every input with
/// `requires_grad` set is perturbed coordinate-by-coordinate with `step`.
pub fn grad_check<F>(build: F, inputs: &[Tensor], step: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    let eval = |tensors: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = tensors.iter().map(|t| g.leaf(t)).collect();
        let root = build(&mut g, &ids)?;
        g.item(root)
    };

    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| g.leaf(t)).collect();
    let root = build(&mut g, &ids)?;
    let grads = g.backward(root)?;

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        max_abs_err: 0.0,
        coords: 0,
    };
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (ti, input) in inputs.iter().enumerate() {
        if !input.requires_grad {
            continue;
        }
        let analytic = grads.expect(ids[ti])?.to_vec();
        for k in 0..input.numel() {
            let orig = work[ti].data[k];
            work[ti].data[k] = orig + step;
            let plus = eval(&work)?;
            work[ti].data[k] = orig - step;
            let minus = eval(&work)?;
            work[ti].data[k] = orig;
            report.fold(analytic[k], (plus - minus) / (2.0 * step));
        }
    }
    Ok(report)
}
