//! Dense N×C×H×W tensors in 64-bit reals with reverse-mode automatic
//! differentiation.
//!
//! The engine is a single-use tape: forward operations append nodes to a
//! [`Graph`], `backward` walks the tape once in reverse and populates leaf
//! gradients. Everything runs in f64 so gradients can be checked against
//! central finite differences at tight tolerances.

mod adam;
mod graph;
mod grad_check;

pub use adam::Adam;
pub use grad_check::{compare_gradients, grad_check, GradCheckReport};
pub use graph::{Gradients, Graph, NodeId};

use crate::error::{Error, Result};

/// Logical shape of a tensor: batch, channels, height, width.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { n, c, h, w }
    }

    /// Shape of a scalar (all axes 1).
    pub fn scalar() -> Self {
        Shape::new(1, 1, 1, 1)
    }

    pub fn numel(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub fn is_scalar(&self) -> bool {
        self.numel() == 1
    }

    /// Row-major flat index.
    #[inline]
    pub fn index(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        ((n * self.c + c) * self.h + y) * self.w + x
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}

/// A dense tensor of 64-bit reals with optional gradient storage.
#[derive(Clone, Debug)]
pub struct Tensor {
    pub shape: Shape,
    pub data: Vec<f64>,
    pub requires_grad: bool,
    /// Populated by the optimizer path after a backward pass.
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::Shape(format!(
                "data length {} does not match shape {} ({} elements)",
                data.len(),
                shape,
                shape.numel()
            )));
        }
        Ok(Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn zeros(shape: Shape) -> Self {
        Tensor {
            shape,
            data: vec![0.0; shape.numel()],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        Tensor {
            shape,
            data: vec![value; shape.numel()],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: Shape::scalar(),
            data: vec![value],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn requires_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn numel(&self) -> usize {
        self.shape.numel()
    }

    /// The single element of a scalar tensor.
    pub fn item(&self) -> Result<f64> {
        if !self.shape.is_scalar() {
            return Err(Error::Contract(format!(
                "item() requires a scalar tensor, got shape {}",
                self.shape
            )));
        }
        Ok(self.data[0])
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Reflect index for pad-1 access: -1 maps to 1, `len` maps to `len - 2`.
#[inline]
pub(crate) fn reflect(i: isize, len: usize) -> usize {
    if i < 0 {
        (-i) as usize
    } else if i as usize >= len {
        2 * len - 2 - i as usize
    } else {
        i as usize
    }
}

/// Copy one H×W plane into an (H+2)×(W+2) buffer with reflect borders.
pub(crate) fn reflect_pad_plane(src: &[f64], h: usize, w: usize, dst: &mut [f64]) {
    let pw = w + 2;
    debug_assert_eq!(dst.len(), (h + 2) * pw);
    for py in 0..h + 2 {
        let sy = reflect(py as isize - 1, h);
        let src_row = &src[sy * w..(sy + 1) * w];
        let dst_row = &mut dst[py * pw..(py + 1) * pw];
        dst_row[0] = src_row[1];
        dst_row[1..=w].copy_from_slice(src_row);
        dst_row[w + 1] = src_row[w - 2];
    }
}

/// Fold an (H+2)×(W+2) gradient buffer back onto an H×W plane, adding
/// border contributions into the reflected interior positions.
pub(crate) fn reflect_fold_plane(gpad: &[f64], h: usize, w: usize, gout: &mut [f64]) {
    let pw = w + 2;
    for py in 0..h + 2 {
        let sy = reflect(py as isize - 1, h);
        let pad_row = &gpad[py * pw..(py + 1) * pw];
        let out_row = &mut gout[sy * w..(sy + 1) * w];
        out_row[1] += pad_row[0];
        for x in 0..w {
            out_row[x] += pad_row[x + 1];
        }
        out_row[w - 2] += pad_row[w + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_rejects_wrong_data_length() {
        let err = Tensor::new(Shape::new(1, 1, 2, 2), vec![0.0; 3]).unwrap_err();
        assert!(matches!(err, Error::Shape(_)), "got {err}");
    }

    #[test]
    fn reflect_maps_pad_indices() {
        assert_eq!(reflect(-1, 4), 1);
        assert_eq!(reflect(0, 4), 0);
        assert_eq!(reflect(3, 4), 3);
        assert_eq!(reflect(4, 4), 2);
    }

    #[test]
    fn pad_then_fold_is_adjoint_of_pad() {
        // <pad(x), g> == <x, fold(g)> for random x, g: the fold is the
        // transpose of the padding operator.
        let h = 3;
        let w = 4;
        let x: Vec<f64> = (0..h * w).map(|i| (i as f64) * 0.37 - 1.0).collect();
        let g: Vec<f64> = (0..(h + 2) * (w + 2))
            .map(|i| ((i * 7919) % 23) as f64 * 0.11 - 1.2)
            .collect();
        let mut padded = vec![0.0; (h + 2) * (w + 2)];
        reflect_pad_plane(&x, h, w, &mut padded);
        let lhs: f64 = padded.iter().zip(&g).map(|(a, b)| a * b).sum();
        let mut folded = vec![0.0; h * w];
        reflect_fold_plane(&g, h, w, &mut folded);
        let rhs: f64 = x.iter().zip(&folded).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12, "lhs={lhs} rhs={rhs}");
    }
}
