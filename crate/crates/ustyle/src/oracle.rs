//! Independent brute-force reference implementations.
//!
//! Everything here exists to check the production paths and shares no
//! arithmetic code with them: convolution is a direct 7-nested loop with
//! explicit reflect indexing, statistics are two-pass, differentiation is
//! per-coordinate central differences. Runtime does not matter here;
//! clarity does. The hidden `verify` CLI subcommand drives these and emits
//! one [`OracleReport`] row per check.

use crate::error::Result;
use crate::tensor::{Shape, Tensor};

/// One row of the verify report.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub op: String,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub samples: usize,
}

impl OracleReport {
    pub fn new(op: &str) -> Self {
        OracleReport {
            op: op.to_string(),
            max_abs_err: 0.0,
            max_rel_err: 0.0,
            samples: 0,
        }
    }

    pub fn fold(&mut self, reference: f64, candidate: f64) {
        let abs = (reference - candidate).abs();
        self.max_abs_err = self.max_abs_err.max(abs);
        self.max_rel_err = self
            .max_rel_err
            .max(abs / (reference.abs() + candidate.abs()).max(1e-8));
        self.samples += 1;
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.op, self.max_abs_err, self.max_rel_err, self.samples
        )
    }
}

fn reflect_index(i: isize, len: usize) -> usize {
    // Mirror without repeating the edge sample: -1 -> 1, len -> len - 2.
    let mut j = i;
    if j < 0 {
        j = -j;
    }
    if j as usize >= len {
        j = 2 * (len as isize - 1) - j;
    }
    j as usize
}

/// Direct 3×3 convolution with reflect padding of 1, written as seven
/// nested loops.
pub fn oracle_conv2d(input: &Tensor, weights: &Tensor, bias: &[f64]) -> Tensor {
    let Shape { n, c, h, w } = input.shape;
    let o = weights.shape.n;
    let mut out = Tensor::zeros(Shape::new(n, o, h, w));
    for ni in 0..n {
        for oi in 0..o {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = bias[oi];
                    for ci in 0..c {
                        for ky in 0..3isize {
                            for kx in 0..3isize {
                                let sy = reflect_index(y as isize + ky - 1, h);
                                let sx = reflect_index(x as isize + kx - 1, w);
                                let iv = input.data[input.shape.index(ni, ci, sy, sx)];
                                let wv = weights.data[weights
                                    .shape
                                    .index(oi, ci, ky as usize, kx as usize)];
                                acc += iv * wv;
                            }
                        }
                    }
                    out.data[out.shape.index(ni, oi, y, x)] = acc;
                }
            }
        }
    }
    out
}

/// Two-pass per-(sample, channel) spatial mean and population variance.
pub fn oracle_moments(x: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let Shape { n, c, h, w } = x.shape;
    let area = (h * w) as f64;
    let mut mu = vec![0.0; n * c];
    let mut var = vec![0.0; n * c];
    for ni in 0..n {
        for ci in 0..c {
            let mut sum = 0.0;
            for y in 0..h {
                for xq in 0..w {
                    sum += x.data[x.shape.index(ni, ci, y, xq)];
                }
            }
            let m = sum / area;
            let mut sq = 0.0;
            for y in 0..h {
                for xq in 0..w {
                    let d = x.data[x.shape.index(ni, ci, y, xq)] - m;
                    sq += d * d;
                }
            }
            mu[ni * c + ci] = m;
            var[ni * c + ci] = sq / area;
        }
    }
    (mu, var)
}

/// Central-difference gradient estimate of an arbitrary scalar function of
/// a parameter vector. Costs two evaluations per coordinate.
pub fn finite_diff<F>(mut loss: F, params: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut work = params.to_vec();
    let mut grad = vec![0.0; params.len()];
    for k in 0..params.len() {
        let orig = work[k];
        work[k] = orig + step;
        let plus = loss(&work)?;
        work[k] = orig - step;
        let minus = loss(&work)?;
        work[k] = orig;
        grad[k] = (plus - minus) / (2.0 * step);
    }
    Ok(grad)
}

/// Direct weighted-sum assembly of the total training loss, mirroring the
/// documented breakdown ordering.
#[allow(clippy::too_many_arguments)]
pub fn oracle_weighted_total(
    w_c: f64,
    w_s: f64,
    w_t: f64,
    w_r: f64,
    content: f64,
    style: f64,
    tv: f64,
    u_content: f64,
    u_style: f64,
    u_tv: f64,
    reconstruct: f64,
    anchors: &[(f64, f64, f64)],
) -> f64 {
    let mut total = w_c * content + w_s * style + w_t * tv;
    total += w_c * u_content + w_s * u_style + w_t * u_tv + w_r * reconstruct;
    for &(a_content, a_style, a_tv) in anchors {
        total += w_c * a_content + w_s * a_style + w_t * a_tv;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_kernel_is_identity() {
        let input = Tensor::new(
            Shape::new(1, 1, 3, 3),
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
        )
        .unwrap();
        let mut kernel = Tensor::zeros(Shape::new(1, 1, 3, 3));
        kernel.data[4] = 1.0; // center tap
        let out = oracle_conv2d(&input, &kernel, &[0.0]);
        assert_eq!(out.data, input.data);
    }

    #[test]
    fn zero_weights_broadcast_bias() {
        let input = Tensor::filled(Shape::new(1, 2, 4, 4), 0.7);
        let kernel = Tensor::zeros(Shape::new(3, 2, 3, 3));
        let out = oracle_conv2d(&input, &kernel, &[1.0, -2.0, 0.5]);
        for oi in 0..3 {
            let expect = [1.0, -2.0, 0.5][oi];
            for y in 0..4 {
                for x in 0..4 {
                    assert_eq!(out.data[out.shape.index(0, oi, y, x)], expect);
                }
            }
        }
    }

    #[test]
    fn moments_of_two_point_channel() {
        let x = Tensor::new(Shape::new(1, 1, 1, 2), vec![0.0, 2.0]).unwrap();
        let (mu, var) = oracle_moments(&x);
        assert_eq!(mu, vec![1.0]);
        assert_eq!(var, vec![1.0]);
    }

    #[test]
    fn moments_of_constant_channel() {
        let x = Tensor::filled(Shape::new(2, 3, 4, 4), 5.5);
        let (mu, var) = oracle_moments(&x);
        assert!(mu.iter().all(|&m| (m - 5.5).abs() < 1e-15));
        assert!(var.iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn finite_diff_is_exact_on_linear() {
        let grad = finite_diff(
            |p| Ok(3.0 * p[0] - 2.0 * p[1] + 0.5 * p[2]),
            &[1.0, 2.0, 3.0],
            1e-5,
        )
        .unwrap();
        assert!((grad[0] - 3.0).abs() < 1e-9);
        assert!((grad[1] + 2.0).abs() < 1e-9);
        assert!((grad[2] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn finite_diff_on_quadratic_is_second_order() {
         // f(p) = p^2 at p=1.5: exact derivative 3; central diff error O(step^2).
        let grad = finite_diff(|p| Ok(p[0] * p[0]), &[1.5], 1e-5).unwrap();
        assert!((grad[0] - 3.0).abs() < 1e-9, "grad {}", grad[0]);
    }
}
