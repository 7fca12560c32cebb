//! Single-use computation tape.
//!
//! Forward ops append nodes; the tape is topologically ordered by
//! construction because an op can only reference node ids that already
//! exist. `backward` walks the tape once in reverse, accumulating adjoints,
//! and then marks the graph consumed.

use crate::error::{Error, Result};
use crate::tensor::{reflect_fold_plane, reflect_pad_plane, Shape, Tensor};

/// Handle to a node in one specific [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d {
        input: NodeId,
        weights: NodeId,
        bias: NodeId,
    },
    Relu {
        input: NodeId,
    },
    MaxPool2 {
        input: NodeId,
        argmax: Vec<u32>,
    },
    Upsample2 {
        input: NodeId,
    },
    SpatialMean {
        input: NodeId,
    },
    MeanAll {
        input: NodeId,
    },
    Add {
        lhs: NodeId,
        rhs: NodeId,
    },
    Sub {
        lhs: NodeId,
        rhs: NodeId,
    },
    Mul {
        lhs: NodeId,
        rhs: NodeId,
    },
    Div {
        lhs: NodeId,
        rhs: NodeId,
    },
    Scale {
        input: NodeId,
        factor: f64,
    },
    AddScalar {
        input: NodeId,
    },
    Sqrt {
        input: NodeId,
    },
    Sigmoid {
        input: NodeId,
    },
    Abs {
        input: NodeId,
    },
    TvLoss {
        input: NodeId,
    },
    GatherRows {
        input: NodeId,
        ids: Vec<usize>,
    },
}

struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Append-only computation tape; consumed by its single backward pass.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients produced by [`Graph::backward`], indexed by node id.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&[f64]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }

    /// Gradient for a node that is known to require grad.
    pub fn expect(&self, id: NodeId) -> Result<&[f64]> {
        self.get(id)
            .ok_or_else(|| Error::State(format!("no gradient recorded for node {}", id.0)))
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> Shape {
        self.nodes[id.0].value.shape
    }

    /// Scalar value of a node, for loss readouts.
    pub fn item(&self, id: NodeId) -> Result<f64> {
        self.nodes[id.0].value.item()
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        id
    }

    fn requires(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Insert a copy of `t` as a leaf; gradient is recorded iff
    /// `t.requires_grad`.
    pub fn leaf(&mut self, t: &Tensor) -> NodeId {
        let rg = t.requires_grad;
        self.push(
            Op::Leaf,
            Tensor {
                shape: t.shape,
                data: t.data.clone(),
                requires_grad: rg,
                grad: None,
            },
            rg,
        )
    }

    /// Leaf that never receives a gradient (inputs, targets).
    pub fn constant(&mut self, t: &Tensor) -> NodeId {
        let mut v = t.clone();
        v.requires_grad = false;
        v.grad = None;
        self.push(Op::Leaf, v, false)
    }

    pub fn scalar(&mut self, value: f64) -> NodeId {
        self.push(Op::Leaf, Tensor::scalar(value), false)
    }

    // ── forward ops ─────────────────────────────────────────────────

    /// 3×3 convolution with reflect padding of 1; spatial size preserved.
    pub fn conv2d(&mut self, input: NodeId, weights: NodeId, bias: NodeId) -> Result<NodeId> {
        let ish = self.shape(input);
        let wsh = self.shape(weights);
        let bn = self.value(bias).numel();
        if wsh.h != 3 || wsh.w != 3 {
            return Err(Error::Shape(format!(
                "conv2d expects 3x3 kernels, got weights {wsh}"
            )));
        }
        if ish.c != wsh.c {
            return Err(Error::Shape(format!(
                "conv2d channel mismatch: input {ish} has {} channels, weights {wsh} expect {}",
                ish.c, wsh.c
            )));
        }
        if bn != wsh.n {
            return Err(Error::Shape(format!(
                "conv2d bias has {} elements, weights {wsh} produce {} channels",
                bn, wsh.n
            )));
        }
        if ish.h < 2 || ish.w < 2 {
            return Err(Error::Contract(format!(
                "conv2d reflect padding requires spatial dims >= 2, got {ish}"
            )));
        }
        let value = conv2d_forward(self.value(input), self.value(weights), &self.nodes[bias.0].value.data);
        let rg = self.requires(input) || self.requires(weights) || self.requires(bias);
        Ok(self.push(
            Op::Conv2d {
                input,
                weights,
                bias,
            },
            value,
            rg,
        ))
    }

    pub fn relu(&mut self, input: NodeId) -> NodeId {
        let x = self.value(input);
        let data = x.data.iter().map(|&v| v.max(0.0)).collect();
        let value = Tensor {
            shape: x.shape,
            data,
            requires_grad: false,
            grad: None,
        };
        let rg = self.requires(input);
        self.push(Op::Relu { input }, value, rg)
    }

    /// 2×2 non-overlapping max pool; ties route the gradient to the first
    /// element in row-major order.
    pub fn maxpool2(&mut self, input: NodeId) -> Result<NodeId> {
        let x = self.value(input);
        let sh = x.shape;
        if sh.h % 2 != 0 || sh.w % 2 != 0 {
            return Err(Error::Shape(format!(
                "maxpool2 requires even spatial dims, got {sh}"
            )));
        }
        let (oh, ow) = (sh.h / 2, sh.w / 2);
        let osh = Shape::new(sh.n, sh.c, oh, ow);
        let mut data = vec![0.0; osh.numel()];
        let mut argmax = vec![0u32; osh.numel()];
        let mut oi = 0;
        for n in 0..sh.n {
            for c in 0..sh.c {
                for y in 0..oh {
                    for xo in 0..ow {
                        let base = sh.index(n, c, 2 * y, 2 * xo);
                        let idxs = [base, base + 1, base + sh.w, base + sh.w + 1];
                        let mut best = idxs[0];
                        let mut bv = x.data[best];
                        for &i in &idxs[1..] {
                            if x.data[i] > bv {
                                bv = x.data[i];
                                best = i;
                            }
                        }
                        data[oi] = bv;
                        argmax[oi] = best as u32;
                        oi += 1;
                    }
                }
            }
        }
        let value = Tensor {
            shape: osh,
            data,
            requires_grad: false,
            grad: None,
        };
        let rg = self.requires(input);
        Ok(self.push(Op::MaxPool2 { input, argmax }, value, rg))
    }

    /// Nearest-neighbor ×2 upsampling; each pixel is replicated 2×2.
    pub fn upsample_nearest2(&mut self, input: NodeId) -> NodeId {
        let x = self.value(input);
        let sh = x.shape;
        let osh = Shape::new(sh.n, sh.c, sh.h * 2, sh.w * 2);
        let mut data = vec![0.0; osh.numel()];
        for n in 0..sh.n {
            for c in 0..sh.c {
                for y in 0..sh.h {
                    let src = &x.data[sh.index(n, c, y, 0)..][..sh.w];
                    for dy in 0..2 {
                        let dst = &mut data[osh.index(n, c, 2 * y + dy, 0)..][..osh.w];
                        for (xq, &v) in src.iter().enumerate() {
                            dst[2 * xq] = v;
                            dst[2 * xq + 1] = v;
                        }
                    }
                }
            }
        }
        let value = Tensor {
            shape: osh,
            data,
            requires_grad: false,
            grad: None,
        };
        let rg = self.requires(input);
        self.push(Op::Upsample2 { input }, value, rg)
    }

    /// Per-(sample, channel) spatial mean: (n,c,h,w) → (n,c,1,1).
    pub fn spatial_mean(&mut self, input: NodeId) -> NodeId {
        let x = self.value(input);
        let sh = x.shape;
        let area = (sh.h * sh.w) as f64;
        let osh = Shape::new(sh.n, sh.c, 1, 1);
        let mut data = vec![0.0; osh.numel()];
        for n in 0..sh.n {
            for c in 0..sh.c {
                let plane = &x.data[sh.index(n, c, 0, 0)..][..sh.h * sh.w];
                data[n * sh.c + c] = plane.iter().sum::<f64>() / area;
            }
        }
        let value = Tensor {
            shape: osh,
            data,
            requires_grad: false,
            grad: None,
        };
        let rg = self.requires(input);
        self.push(Op::SpatialMean { input }, value, rg)
    }

    /// Mean over every element, producing a scalar.
    pub fn mean_all(&mut self, input: NodeId) -> NodeId {
        let x = self.value(input);
        let mean = x.data.iter().sum::<f64>() / x.numel() as f64;
        let rg = self.requires(input);
        self.push(Op::MeanAll { input }, Tensor::scalar(mean), rg)
    }

    pub fn add(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        self.binary(lhs, rhs, BinaryKind::Add)
    }

    pub fn sub(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        self.binary(lhs, rhs, BinaryKind::Sub)
    }

    pub fn mul(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        self.binary(lhs, rhs, BinaryKind::Mul)
    }

    pub fn div(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        self.binary(lhs, rhs, BinaryKind::Div)
    }

    /// Elementwise square, recorded as `mul(x, x)`.
    pub fn square(&mut self, input: NodeId) -> NodeId {
        self.mul(input, input).expect("identical shapes always broadcast")
    }

    pub fn scale(&mut self, input: NodeId, factor: f64) -> NodeId {
        let x = self.value(input);
        let data = x.data.iter().map(|&v| factor * v).collect();
        let value = Tensor {
            shape: x.shape,
            data,
            requires_grad: false,
            grad: None,
        };
        let rg = self.requires(input);
        self.push(Op::Scale { input, factor }, value, rg)
    }

    pub fn add_scalar(&mut self, input: NodeId, offset: f64) -> NodeId {
        let x = self.value(input);
        let data = x.data.iter().map(|&v| v + offset).collect();
        let value = Tensor {
            shape: x.shape,
            data,
            requires_grad: false,
            grad: None,
        };
        let rg = self.requires(input);
        self.push(Op::AddScalar { input }, value, rg)
    }

    /// Elementwise square root; all inputs must be non-negative.
    pub fn sqrt(&mut self, input: NodeId) -> Result<NodeId> {
        let x = self.value(input);
        if x.data.iter().any(|&v| v < 0.0) {
            return Err(Error::Contract(
                "sqrt applied to a tensor with negative entries".to_string(),
            ));
        }
        let data = x.data.iter().map(|&v| v.sqrt()).collect();
        let value = Tensor {
            shape: x.shape,
            data,
            requires_grad: false,
            grad: None,
        };
        let rg = self.requires(input);
        Ok(self.push(Op::Sqrt { input }, value, rg))
    }

    pub fn sigmoid(&mut self, input: NodeId) -> NodeId {
        let x = self.value(input);
        let data = x.data.iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect();
        let value = Tensor {
            shape: x.shape,
            data,
            requires_grad: false,
            grad: None,
        };
        let rg = self.requires(input);
        self.push(Op::Sigmoid { input }, value, rg)
    }

    /// Elementwise absolute value; subgradient 0 at exactly 0.
    pub fn abs(&mut self, input: NodeId) -> NodeId {
        let x = self.value(input);
        let data = x.data.iter().map(|&v| v.abs()).collect();
        let value = Tensor {
            shape: x.shape,
            data,
            requires_grad: false,
            grad: None,
        };
        let rg = self.requires(input);
        self.push(Op::Abs { input }, value, rg)
    }

    /// Total-variation penalty: mean over all valid forward-difference
    /// positions (horizontal and vertical pooled together) of the squared
    /// difference.
    pub fn tv_loss(&mut self, input: NodeId) -> Result<NodeId> {
        let x = self.value(input);
        let sh = x.shape;
        let positions = sh.n * sh.c * (sh.h * (sh.w - 1) + (sh.h - 1) * sh.w);
        if positions == 0 {
            return Err(Error::Contract(format!(
                "tv_loss needs at least one adjacent pixel pair, got {sh}"
            )));
        }
        let mut sum = 0.0;
        for n in 0..sh.n {
            for c in 0..sh.c {
                let plane = &x.data[sh.index(n, c, 0, 0)..][..sh.h * sh.w];
                for y in 0..sh.h {
                    let row = &plane[y * sh.w..(y + 1) * sh.w];
                    for xq in 0..sh.w - 1 {
                        let d = row[xq + 1] - row[xq];
                        sum += d * d;
                    }
                }
                for y in 0..sh.h - 1 {
                    for xq in 0..sh.w {
                        let d = plane[(y + 1) * sh.w + xq] - plane[y * sh.w + xq];
                        sum += d * d;
                    }
                }
            }
        }
        let rg = self.requires(input);
        Ok(self.push(
            Op::TvLoss { input },
            Tensor::scalar(sum / positions as f64),
            rg,
        ))
    }

    /// Select rows of the batch axis: (S,c,h,w) gathered at `ids` gives
    /// (len(ids),c,h,w). The backward pass scatter-adds into the rows.
    pub fn gather_rows(&mut self, input: NodeId, ids: &[usize]) -> Result<NodeId> {
        let x = self.value(input);
        let sh = x.shape;
        if ids.is_empty() {
            return Err(Error::Contract("gather_rows with empty id list".to_string()));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= sh.n) {
            return Err(Error::Lookup(format!(
                "row id {bad} out of range for {} rows",
                sh.n
            )));
        }
        let row = sh.c * sh.h * sh.w;
        let osh = Shape::new(ids.len(), sh.c, sh.h, sh.w);
        let mut data = vec![0.0; osh.numel()];
        for (k, &id) in ids.iter().enumerate() {
            data[k * row..(k + 1) * row].copy_from_slice(&x.data[id * row..(id + 1) * row]);
        }
        let value = Tensor {
            shape: osh,
            data,
            requires_grad: false,
            grad: None,
        };
        let rg = self.requires(input);
        Ok(self.push(
            Op::GatherRows {
                input,
                ids: ids.to_vec(),
            },
            value,
            rg,
        ))
    }

    /// Per-(sample, channel) spatial mean and standard deviation, composed
    /// from primitives so both outputs stay differentiable.
    ///
    /// `sigma = sqrt(population variance + eps)`; with `eps > 0` a constant
    /// channel yields `sigma = sqrt(eps)` instead of a division hazard.
    pub fn instance_moments(&mut self, x: NodeId, eps: f64) -> Result<(NodeId, NodeId)> {
        if eps <= 0.0 {
            return Err(Error::Contract(format!(
                "instance_moments requires eps > 0, got {eps}"
            )));
        }
        let mu = self.spatial_mean(x);
        let centered = self.sub(x, mu)?;
        let sq = self.square(centered);
        let var = self.spatial_mean(sq);
        let shifted = self.add_scalar(var, eps);
        let sigma = self.sqrt(shifted)?;
        Ok((mu, sigma))
    }

    fn binary(&mut self, lhs: NodeId, rhs: NodeId, kind: BinaryKind) -> Result<NodeId> {
        let lsh = self.shape(lhs);
        let rsh = self.shape(rhs);
        let osh = broadcast_shape(lsh, rsh)?;
        let mut data = vec![0.0; osh.numel()];
        {
            let la = StridedView::new(&self.nodes[lhs.0].value, osh);
            let ra = StridedView::new(&self.nodes[rhs.0].value, osh);
            let mut i = 0;
            for n in 0..osh.n {
                for c in 0..osh.c {
                    for y in 0..osh.h {
                        for x in 0..osh.w {
                            let a = la.at(n, c, y, x);
                            let b = ra.at(n, c, y, x);
                            data[i] = match kind {
                                BinaryKind::Add => a + b,
                                BinaryKind::Sub => a - b,
                                BinaryKind::Mul => a * b,
                                BinaryKind::Div => a / b,
                            };
                            i += 1;
                        }
                    }
                }
            }
        }
        let value = Tensor {
            shape: osh,
            data,
            requires_grad: false,
            grad: None,
        };
        let rg = self.requires(lhs) || self.requires(rhs);
        let op = match kind {
            BinaryKind::Add => Op::Add { lhs, rhs },
            BinaryKind::Sub => Op::Sub { lhs, rhs },
            BinaryKind::Mul => Op::Mul { lhs, rhs },
            BinaryKind::Div => Op::Div { lhs, rhs },
        };
        Ok(self.push(op, value, rg))
    }

    // ── backward ────────────────────────────────────────────────────

    /// Reverse accumulation from a scalar root. Visits each node at most
    /// once and consumes the graph; a second call is a state error.
    pub fn backward(&mut self, root: NodeId) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::State(
                "backward called on an already-consumed graph".to_string(),
            ));
        }
        if !self.shape(root).is_scalar() {
            return Err(Error::Contract(format!(
                "backward root must be scalar, got shape {}",
                self.shape(root)
            )));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        if !self.nodes[root.0].requires_grad {
            // Nothing on the tape needs a gradient; still a valid pass.
            return Ok(Gradients { grads });
        }
        grads[root.0] = Some(vec![1.0]);

        for i in (0..=root.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let gout = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            match &self.nodes[i].op {
                Op::Leaf => {
                    // Leaves keep their gradient for the caller.
                    grads[i] = Some(gout);
                }
                Op::Conv2d {
                    input,
                    weights,
                    bias,
                } => {
                    let (input, weights, bias) = (*input, *weights, *bias);
                    let osh = self.nodes[i].value.shape;
                    if self.requires(input) {
                        let gin = conv2d_backward_input(
                            &gout,
                            osh,
                            &self.nodes[weights.0].value,
                            self.shape(input),
                        );
                        accumulate(&mut grads, input.0, &gin, self.shape(input).numel());
                    }
                    if self.requires(weights) {
                        let gw = conv2d_backward_weights(
                            &gout,
                            osh,
                            &self.nodes[input.0].value,
                            self.shape(weights),
                        );
                        accumulate(&mut grads, weights.0, &gw, self.shape(weights).numel());
                    }
                    if self.requires(bias) {
                        let o = osh.c;
                        let plane = osh.h * osh.w;
                        let mut gb = vec![0.0; o];
                        for n in 0..osh.n {
                            for oc in 0..o {
                                let g = &gout[(n * o + oc) * plane..][..plane];
                                gb[oc] += g.iter().sum::<f64>();
                            }
                        }
                        accumulate(&mut grads, bias.0, &gb, self.nodes[bias.0].value.numel());
                    }
                }
                Op::Relu { input } => {
                    let input = *input;
                    let x = &self.nodes[input.0].value.data;
                    let gin: Vec<f64> = gout
                        .iter()
                        .zip(x)
                        .map(|(&g, &v)| if v > 0.0 { g } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, input.0, &gin, gin.len());
                }
                Op::MaxPool2 { input, argmax } => {
                    let input = *input;
                    let numel = self.shape(input).numel();
                    let buf = grad_slot(&mut grads, input.0, numel);
                    for (g, &src) in gout.iter().zip(argmax) {
                        buf[src as usize] += g;
                    }
                }
                Op::Upsample2 { input } => {
                    let input = *input;
                    let ish = self.shape(input);
                    let osh = self.nodes[i].value.shape;
                    let buf = grad_slot(&mut grads, input.0, ish.numel());
                    for n in 0..ish.n {
                        for c in 0..ish.c {
                            for y in 0..ish.h {
                                for x in 0..ish.w {
                                    let mut s = 0.0;
                                    for dy in 0..2 {
                                        for dx in 0..2 {
                                            s += gout[osh.index(n, c, 2 * y + dy, 2 * x + dx)];
                                        }
                                    }
                                    buf[ish.index(n, c, y, x)] += s;
                                }
                            }
                        }
                    }
                }
                Op::SpatialMean { input } => {
                    let input = *input;
                    let ish = self.shape(input);
                    let area = (ish.h * ish.w) as f64;
                    let buf = grad_slot(&mut grads, input.0, ish.numel());
                    for n in 0..ish.n {
                        for c in 0..ish.c {
                            let g = gout[n * ish.c + c] / area;
                            let plane = &mut buf[ish.index(n, c, 0, 0)..][..ish.h * ish.w];
                            for v in plane {
                                *v += g;
                            }
                        }
                    }
                }
                Op::MeanAll { input } => {
                    let input = *input;
                    let numel = self.shape(input).numel();
                    let g = gout[0] / numel as f64;
                    let buf = grad_slot(&mut grads, input.0, numel);
                    for v in buf {
                        *v += g;
                    }
                }
                Op::Add { lhs, rhs } => {
                    let (lhs, rhs) = (*lhs, *rhs);
                    let osh = self.nodes[i].value.shape;
                    if self.requires(lhs) {
                        reduce_into(&mut grads, lhs.0, self.shape(lhs), osh, &gout, |_, g| g);
                    }
                    if self.requires(rhs) {
                        reduce_into(&mut grads, rhs.0, self.shape(rhs), osh, &gout, |_, g| g);
                    }
                }
                Op::Sub { lhs, rhs } => {
                    let (lhs, rhs) = (*lhs, *rhs);
                    let osh = self.nodes[i].value.shape;
                    if self.requires(lhs) {
                        reduce_into(&mut grads, lhs.0, self.shape(lhs), osh, &gout, |_, g| g);
                    }
                    if self.requires(rhs) {
                        reduce_into(&mut grads, rhs.0, self.shape(rhs), osh, &gout, |_, g| -g);
                    }
                }
                Op::Mul { lhs, rhs } => {
                    let (lhs, rhs) = (*lhs, *rhs);
                    let osh = self.nodes[i].value.shape;
                    if self.requires(lhs) {
                        let rv = StridedCopy::new(&self.nodes[rhs.0].value, osh);
                        reduce_into(&mut grads, lhs.0, self.shape(lhs), osh, &gout, |k, g| {
                            g * rv.at(k)
                        });
                    }
                    if self.requires(rhs) {
                        let lv = StridedCopy::new(&self.nodes[lhs.0].value, osh);
                        reduce_into(&mut grads, rhs.0, self.shape(rhs), osh, &gout, |k, g| {
                            g * lv.at(k)
                        });
                    }
                }
                Op::Div { lhs, rhs } => {
                    let (lhs, rhs) = (*lhs, *rhs);
                    let osh = self.nodes[i].value.shape;
                    if self.requires(lhs) {
                        let rv = StridedCopy::new(&self.nodes[rhs.0].value, osh);
                        reduce_into(&mut grads, lhs.0, self.shape(lhs), osh, &gout, |k, g| {
                            g / rv.at(k)
                        });
                    }
                    if self.requires(rhs) {
                        let lv = StridedCopy::new(&self.nodes[lhs.0].value, osh);
                        let rv = StridedCopy::new(&self.nodes[rhs.0].value, osh);
                        reduce_into(&mut grads, rhs.0, self.shape(rhs), osh, &gout, |k, g| {
                            let r = rv.at(k);
                            -g * lv.at(k) / (r * r)
                        });
                    }
                }
                Op::Scale { input, factor } => {
                    let (input, factor) = (*input, *factor);
                    let gin: Vec<f64> = gout.iter().map(|&g| g * factor).collect();
                    accumulate(&mut grads, input.0, &gin, gin.len());
                }
                Op::AddScalar { input } => {
                    let input = *input;
                    accumulate(&mut grads, input.0, &gout, gout.len());
                }
                Op::Sqrt { input } => {
                    let input = *input;
                    let out = &self.nodes[i].value.data;
                    let gin: Vec<f64> = gout
                        .iter()
                        .zip(out)
                        .map(|(&g, &y)| 0.5 * g / y)
                        .collect();
                    accumulate(&mut grads, input.0, &gin, gin.len());
                }
                Op::Sigmoid { input } => {
                    let input = *input;
                    let out = &self.nodes[i].value.data;
                    let gin: Vec<f64> = gout
                        .iter()
                        .zip(out)
                        .map(|(&g, &y)| g * y * (1.0 - y))
                        .collect();
                    accumulate(&mut grads, input.0, &gin, gin.len());
                }
                Op::Abs { input } => {
                    let input = *input;
                    let x = &self.nodes[input.0].value.data;
                    let gin: Vec<f64> = gout
                        .iter()
                        .zip(x)
                        .map(|(&g, &v)| {
                            if v > 0.0 {
                                g
                            } else if v < 0.0 {
                                -g
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    accumulate(&mut grads, input.0, &gin, gin.len());
                }
                Op::TvLoss { input } => {
                    let input = *input;
                    let ish = self.shape(input);
                    let positions =
                        (ish.n * ish.c * (ish.h * (ish.w - 1) + (ish.h - 1) * ish.w)) as f64;
                    let g = gout[0] / positions;
                    let x = self.nodes[input.0].value.data.clone();
                    let buf = grad_slot(&mut grads, input.0, ish.numel());
                    for n in 0..ish.n {
                        for c in 0..ish.c {
                            let base = ish.index(n, c, 0, 0);
                            for y in 0..ish.h {
                                for xq in 0..ish.w - 1 {
                                    let a = base + y * ish.w + xq;
                                    let d = x[a + 1] - x[a];
                                    buf[a + 1] += 2.0 * d * g;
                                    buf[a] -= 2.0 * d * g;
                                }
                            }
                            for y in 0..ish.h - 1 {
                                for xq in 0..ish.w {
                                    let a = base + y * ish.w + xq;
                                    let b = a + ish.w;
                                    let d = x[b] - x[a];
                                    buf[b] += 2.0 * d * g;
                                    buf[a] -= 2.0 * d * g;
                                }
                            }
                        }
                    }
                }
                Op::GatherRows { input, ids } => {
                    let input = *input;
                    let ids = ids.clone();
                    let ish = self.shape(input);
                    let row = ish.c * ish.h * ish.w;
                    let buf = grad_slot(&mut grads, input.0, ish.numel());
                    for (k, &id) in ids.iter().enumerate() {
                        let src = &gout[k * row..(k + 1) * row];
                        let dst = &mut buf[id * row..(id + 1) * row];
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d += s;
                        }
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }
}

enum BinaryKind {
    Add,
    Sub,
    Mul,
    Div,
}

fn broadcast_shape(a: Shape, b: Shape) -> Result<Shape> {
    fn axis(x: usize, y: usize) -> Option<usize> {
        if x == y {
            Some(x)
        } else if x == 1 {
            Some(y)
        } else if y == 1 {
            Some(x)
        } else {
            None
        }
    }
    match (
        axis(a.n, b.n),
        axis(a.c, b.c),
        axis(a.h, b.h),
        axis(a.w, b.w),
    ) {
        (Some(n), Some(c), Some(h), Some(w)) => Ok(Shape::new(n, c, h, w)),
        _ => Err(Error::Shape(format!(
            "shapes {a} and {b} do not broadcast"
        ))),
    }
}

/// View of a tensor addressed in a broadcast output shape.
struct StridedView<'a> {
    data: &'a [f64],
    sn: usize,
    sc: usize,
    sh: usize,
    sw: usize,
}

impl<'a> StridedView<'a> {
    fn new(t: &'a Tensor, out: Shape) -> Self {
        let s = t.shape;
        debug_assert!(s.n == out.n || s.n == 1);
        debug_assert!(s.c == out.c || s.c == 1);
        debug_assert!(s.h == out.h || s.h == 1);
        debug_assert!(s.w == out.w || s.w == 1);
        StridedView {
            data: &t.data,
            sn: if s.n == 1 { 0 } else { s.c * s.h * s.w },
            sc: if s.c == 1 { 0 } else { s.h * s.w },
            sh: if s.h == 1 { 0 } else { s.w },
            sw: if s.w == 1 { 0 } else { 1 },
        }
    }

    #[inline]
    fn at(&self, n: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[n * self.sn + c * self.sc + y * self.sh + x * self.sw]
    }
}

/// Owned variant used inside backward where node storage is borrowed.
struct StridedCopy {
    data: Vec<f64>,
    strides: [usize; 4],
    out: Shape,
}

impl StridedCopy {
    fn new(t: &Tensor, out: Shape) -> Self {
        let s = t.shape;
        StridedCopy {
            data: t.data.clone(),
            strides: [
                if s.n == 1 { 0 } else { s.c * s.h * s.w },
                if s.c == 1 { 0 } else { s.h * s.w },
                if s.h == 1 { 0 } else { s.w },
                if s.w == 1 { 0 } else { 1 },
            ],
            out,
        }
    }

    /// Value at the k-th element of the broadcast output (row-major).
    #[inline]
    fn at(&self, k: usize) -> f64 {
        let x = k % self.out.w;
        let r = k / self.out.w;
        let y = r % self.out.h;
        let r = r / self.out.h;
        let c = r % self.out.c;
        let n = r / self.out.c;
        self.data[n * self.strides[0] + c * self.strides[1] + y * self.strides[2] + x * self.strides[3]]
    }
}

fn grad_slot<'a>(grads: &'a mut [Option<Vec<f64>>], idx: usize, numel: usize) -> &'a mut Vec<f64> {
    grads[idx].get_or_insert_with(|| vec![0.0; numel])
}

fn accumulate(grads: &mut [Option<Vec<f64>>], idx: usize, gin: &[f64], numel: usize) {
    debug_assert_eq!(gin.len(), numel);
    let buf = grad_slot(grads, idx, numel);
    for (d, &s) in buf.iter_mut().zip(gin) {
        *d += s;
    }
}

/// Accumulate an output-shaped adjoint into an operand that may have been
/// broadcast, summing over the broadcast axes. `f(k, g)` maps the k-th
/// output adjoint to this operand's contribution.
fn reduce_into<F: Fn(usize, f64) -> f64>(
    grads: &mut [Option<Vec<f64>>],
    idx: usize,
    operand: Shape,
    out: Shape,
    gout: &[f64],
    f: F,
) {
    let strides = [
        if operand.n == 1 { 0 } else { operand.c * operand.h * operand.w },
        if operand.c == 1 { 0 } else { operand.h * operand.w },
        if operand.h == 1 { 0 } else { operand.w },
        if operand.w == 1 { 0 } else { 1 },
    ];
    let buf = grad_slot(grads, idx, operand.numel());
    let mut k = 0;
    for n in 0..out.n {
        for c in 0..out.c {
            for y in 0..out.h {
                for x in 0..out.w {
                    let dst =
                        n * strides[0] + c * strides[1] + y * strides[2] + x * strides[3];
                    buf[dst] += f(k, gout[k]);
                    k += 1;
                }
            }
        }
    }
}

// ── convolution kernels ─────────────────────────────────────────────

fn conv2d_forward(input: &Tensor, weights: &Tensor, bias: &[f64]) -> Tensor {
    let Shape { n, c, h, w } = input.shape;
    let o = weights.shape.n;
    let pw = w + 2;
    let plane = h * w;
    let pad_plane = (h + 2) * pw;
    let osh = Shape::new(n, o, h, w);
    let mut out = vec![0.0; osh.numel()];
    let mut padded = vec![0.0; c * pad_plane];
    for ni in 0..n {
        for ci in 0..c {
            reflect_pad_plane(
                &input.data[(ni * c + ci) * plane..][..plane],
                h,
                w,
                &mut padded[ci * pad_plane..][..pad_plane],
            );
        }
        for oi in 0..o {
            let out_plane = &mut out[(ni * o + oi) * plane..][..plane];
            out_plane.fill(bias[oi]);
            for ci in 0..c {
                let pad = &padded[ci * pad_plane..][..pad_plane];
                let wbase = (oi * c + ci) * 9;
                for ky in 0..3 {
                    for kx in 0..3 {
                        let wv = weights.data[wbase + ky * 3 + kx];
                        for y in 0..h {
                            let prow = &pad[(y + ky) * pw + kx..][..w];
                            let orow = &mut out_plane[y * w..][..w];
                            for (ov, &pv) in orow.iter_mut().zip(prow) {
                                *ov += wv * pv;
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor {
        shape: osh,
        data: out,
        requires_grad: false,
        grad: None,
    }
}

fn conv2d_backward_input(gout: &[f64], osh: Shape, weights: &Tensor, ish: Shape) -> Vec<f64> {
    let Shape { n, c, h, w } = ish;
    let o = osh.c;
    let pw = w + 2;
    let plane = h * w;
    let pad_plane = (h + 2) * pw;
    let mut gin = vec![0.0; ish.numel()];
    let mut gpad = vec![0.0; c * pad_plane];
    for ni in 0..n {
        gpad.fill(0.0);
        for oi in 0..o {
            let gplane = &gout[(ni * o + oi) * plane..][..plane];
            for ci in 0..c {
                let gp = &mut gpad[ci * pad_plane..][..pad_plane];
                let wbase = (oi * c + ci) * 9;
                for ky in 0..3 {
                    for kx in 0..3 {
                        let wv = weights.data[wbase + ky * 3 + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        for y in 0..h {
                            let grow = &gplane[y * w..][..w];
                            let prow = &mut gp[(y + ky) * pw + kx..][..w];
                            for (pv, &gv) in prow.iter_mut().zip(grow) {
                                *pv += wv * gv;
                            }
                        }
                    }
                }
            }
        }
        for ci in 0..c {
            reflect_fold_plane(
                &gpad[ci * pad_plane..][..pad_plane],
                h,
                w,
                &mut gin[(ni * c + ci) * plane..][..plane],
            );
        }
    }
    gin
}

fn conv2d_backward_weights(gout: &[f64], osh: Shape, input: &Tensor, wsh: Shape) -> Vec<f64> {
    let Shape { n, c, h, w } = input.shape;
    let o = osh.c;
    let pw = w + 2;
    let plane = h * w;
    let pad_plane = (h + 2) * pw;
    let mut gw = vec![0.0; wsh.numel()];
    let mut padded = vec![0.0; c * pad_plane];
    for ni in 0..n {
        for ci in 0..c {
            reflect_pad_plane(
                &input.data[(ni * c + ci) * plane..][..plane],
                h,
                w,
                &mut padded[ci * pad_plane..][..pad_plane],
            );
        }
        for oi in 0..o {
            let gplane = &gout[(ni * o + oi) * plane..][..plane];
            for ci in 0..c {
                let pad = &padded[ci * pad_plane..][..pad_plane];
                let wbase = (oi * c + ci) * 9;
                for ky in 0..3 {
                    for kx in 0..3 {
                        let mut s = 0.0;
                        for y in 0..h {
                            let grow = &gplane[y * w..][..w];
                            let prow = &pad[(y + ky) * pw + kx..][..w];
                            s += grow.iter().zip(prow).map(|(&g, &p)| g * p).sum::<f64>();
                        }
                        gw[wbase + ky * 3 + kx] += s;
                    }
                }
            }
        }
    }
    gw
}
