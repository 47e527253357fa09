use std::borrow::Cow;
use std::collections::HashMap;

use super::tensor::{self, Tensor};
use crate::error::{Error, Result};

/// Index of a node inside its [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive operations. Every node's inputs precede it, so insertion order
/// is a topological order.
#[derive(Debug, Clone)]
pub enum Op {
    Input(String),
    Param(String),
    Const(Tensor),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// Elementwise quotient, defined as 0 wherever the divisor is exactly 0.
    Div(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    /// Heaviside step (1 where x > 0); derivative taken as 0 everywhere.
    Step(NodeId),
    Sigmoid(NodeId),
    Exp(NodeId),
    Log(NodeId),
    Sqrt(NodeId),
    Square(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    Broadcast(NodeId),
    ReduceTo(NodeId),
    /// L2 norm over the last axis, kept as an axis of extent 1.
    RowNorm(NodeId),
    /// Log-sum-exp over the columns of a matrix, `[m,n] -> [m,1]`.
    RowLogSumExp(NodeId),
    ConcatRows(NodeId, NodeId),
    SliceRows {
        input: NodeId,
        start: usize,
        end: usize,
    },
    PadRows {
        input: NodeId,
        start: usize,
        total: usize,
    },
    /// `scale * x + shift`
    Affine {
        input: NodeId,
        scale: f64,
        shift: f64,
    },
}

impl Op {
    fn inputs(&self) -> Inputs {
        use Op::*;
        match *self {
            Input(_) | Param(_) | Const(_) => Inputs::None,
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | MatMul(a, b) | ConcatRows(a, b) => {
                Inputs::Two(a, b)
            }
            Transpose(a) | Tanh(a) | Relu(a) | Step(a) | Sigmoid(a) | Exp(a) | Log(a) | Sqrt(a)
            | Square(a) | Sum(a) | Mean(a) | Broadcast(a) | ReduceTo(a) | RowNorm(a)
            | RowLogSumExp(a) => Inputs::One(a),
            SliceRows { input, .. } | PadRows { input, .. } | Affine { input, .. } => {
                Inputs::One(input)
            }
        }
    }

    fn name(&self) -> &'static str {
        use Op::*;
        match self {
            Input(_) => "input",
            Param(_) => "param",
            Const(_) => "const",
            Add(..) => "add",
            Sub(..) => "sub",
            Mul(..) => "mul",
            Div(..) => "div",
            MatMul(..) => "matmul",
            Transpose(_) => "transpose",
            Tanh(_) => "tanh",
            Relu(_) => "relu",
            Step(_) => "step",
            Sigmoid(_) => "sigmoid",
            Exp(_) => "exp",
            Log(_) => "log",
            Sqrt(_) => "sqrt",
            Square(_) => "square",
            Sum(_) => "sum",
            Mean(_) => "mean",
            Broadcast(_) => "broadcast",
            ReduceTo(_) => "reduce",
            RowNorm(_) => "row_norm",
            RowLogSumExp(_) => "row_logsumexp",
            ConcatRows(..) => "concat",
            SliceRows { .. } => "slice",
            PadRows { .. } => "pad",
            Affine { .. } => "affine",
        }
    }
}

#[derive(Clone, Copy)]
enum Inputs {
    None,
    One(NodeId),
    Two(NodeId, NodeId),
}

impl Iterator for Inputs {
    type Item = NodeId;
    fn next(&mut self) -> Option<NodeId> {
        match *self {
            Inputs::None => None,
            Inputs::One(a) => {
                *self = Inputs::None;
                Some(a)
            }
            Inputs::Two(a, b) => {
                *self = Inputs::One(b);
                Some(a)
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    shape: Vec<usize>,
}

/// A static computation graph over [`Tensor`]s.
///
/// Leaves declare their shape up front; every operation checks shapes when
/// it is added, so a graph that builds is well-formed. Gradients are built
/// symbolically as additional nodes, which makes them differentiable again.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    leaves: HashMap<String, NodeId>,
    warnings: Vec<String>,
}

/// Leaf-name to tensor assignments for one evaluation.
#[derive(Debug, Clone, Default)]
pub struct Bindings<'a> {
    map: HashMap<String, Cow<'a, Tensor>>,
}

impl<'a> Bindings<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, name: impl Into<String>, value: &'a Tensor) -> &mut Self {
        self.map.insert(name.into(), Cow::Borrowed(value));
        self
    }

    pub fn bind_owned(&mut self, name: impl Into<String>, value: Tensor) -> &mut Self {
        self.map.insert(name.into(), Cow::Owned(value));
        self
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.map.get(name).map(|c| c.as_ref())
    }
}

/// Values of every node after a forward evaluation.
#[derive(Debug, Clone)]
pub struct Values {
    values: Vec<Tensor>,
}

impl Values {
    pub fn get(&self, id: NodeId) -> &Tensor {
        &self.values[id.0]
    }

    /// Value of a one-element node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        self.values[id.0].data()[0]
    }

    pub fn take(mut self, id: NodeId) -> Tensor {
        std::mem::replace(&mut self.values[id.0], Tensor::scalar(0.0))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn op(&self, id: NodeId) -> &Op {
        &self.nodes[id.0].op
    }

    /// Notes recorded while differentiating through non-smooth primitives.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn leaf(&self, name: &str) -> Option<NodeId> {
        self.leaves.get(name).copied()
    }

    /// Ids of all parameter leaves in insertion order.
    pub fn parameters(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n.op, Op::Param(_)))
            .map(|(i, _)| NodeId(i))
            .collect()
    }

    fn leaf_name(&self, id: NodeId) -> Option<&str> {
        match &self.nodes[id.0].op {
            Op::Input(n) | Op::Param(n) => Some(n),
            _ => None,
        }
    }

    fn push(&mut self, op: Op, shape: Vec<usize>) -> NodeId {
        self.nodes.push(Node { op, shape });
        NodeId(self.nodes.len() - 1)
    }

    fn next_id(&self) -> usize {
        self.nodes.len()
    }

    fn check(&self, id: NodeId) -> Result<&[usize]> {
        self.nodes
            .get(id.0)
            .map(|n| n.shape.as_slice())
            .ok_or_else(|| Error::shape(self.next_id(), format!("unknown input node {}", id.0)))
    }

    fn add_leaf(&mut self, name: String, shape: &[usize], param: bool) -> Result<NodeId> {
        if self.leaves.contains_key(&name) {
            return Err(Error::contract(format!("duplicate leaf name `{name}`")));
        }
        let op = if param {
            Op::Param(name.clone())
        } else {
            Op::Input(name.clone())
        };
        let id = self.push(op, shape.to_vec());
        self.leaves.insert(name, id);
        Ok(id)
    }

    pub fn input(&mut self, name: impl Into<String>, shape: &[usize]) -> Result<NodeId> {
        self.add_leaf(name.into(), shape, false)
    }

    pub fn param(&mut self, name: impl Into<String>, shape: &[usize]) -> Result<NodeId> {
        self.add_leaf(name.into(), shape, true)
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        let shape = value.shape().to_vec();
        self.push(Op::Const(value), shape)
    }

    fn same_shape(&mut self, a: NodeId, b: NodeId, op: Op) -> Result<NodeId> {
        let sa = self.check(a)?.to_vec();
        let sb = self.check(b)?;
        if sa != sb {
            return Err(Error::shape(
                self.next_id(),
                format!("{}: operand shapes {:?} and {:?} differ", op.name(), sa, sb),
            ));
        }
        Ok(self.push(op, sa))
    }

    fn unary(&mut self, a: NodeId, op: Op) -> Result<NodeId> {
        let s = self.check(a)?.to_vec();
        Ok(self.push(op, s))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, Op::Div(a, b))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let sa = self.check(a)?.to_vec();
        let sb = self.check(b)?.to_vec();
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::shape(
                self.next_id(),
                format!("matmul: incompatible shapes {sa:?} and {sb:?}"),
            ));
        }
        Ok(self.push(Op::MatMul(a, b), vec![sa[0], sb[1]]))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let s = self.check(a)?.to_vec();
        if s.len() != 2 {
            return Err(Error::shape(self.next_id(), "transpose needs a matrix"));
        }
        Ok(self.push(Op::Transpose(a), vec![s[1], s[0]]))
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Relu(a))
    }

    pub fn step(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Step(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Sigmoid(a))
    }

    pub fn exp(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Exp(a))
    }

    pub fn log(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Log(a))
    }

    pub fn sqrt(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Sqrt(a))
    }

    pub fn square(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Square(a))
    }

    pub fn affine(&mut self, a: NodeId, scale: f64, shift: f64) -> Result<NodeId> {
        self.unary(
            a,
            Op::Affine {
                input: a,
                scale,
                shift,
            },
        )
    }

    pub fn scale(&mut self, a: NodeId, by: f64) -> Result<NodeId> {
        self.affine(a, by, 0.0)
    }

    pub fn neg(&mut self, a: NodeId) -> Result<NodeId> {
        self.affine(a, -1.0, 0.0)
    }

    /// Sum of all elements, as a rank-0 node.
    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        self.check(a)?;
        Ok(self.push(Op::Sum(a), Vec::new()))
    }

    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        let s = self.check(a)?;
        if s.iter().product::<usize>() == 0 {
            return Err(Error::shape(self.next_id(), "mean of an empty tensor"));
        }
        Ok(self.push(Op::Mean(a), Vec::new()))
    }

    pub fn broadcast(&mut self, a: NodeId, shape: &[usize]) -> Result<NodeId> {
        let s = self.check(a)?;
        if !tensor::broadcastable(s, shape) {
            return Err(Error::shape(
                self.next_id(),
                format!("cannot broadcast {s:?} to {shape:?}"),
            ));
        }
        Ok(self.push(Op::Broadcast(a), shape.to_vec()))
    }

    /// Sums `a` down to `shape`, the adjoint of [`Graph::broadcast`].
    pub fn reduce_to(&mut self, a: NodeId, shape: &[usize]) -> Result<NodeId> {
        let s = self.check(a)?;
        if !tensor::broadcastable(shape, s) {
            return Err(Error::shape(
                self.next_id(),
                format!("cannot reduce {s:?} to {shape:?}"),
            ));
        }
        Ok(self.push(Op::ReduceTo(a), shape.to_vec()))
    }

    pub fn row_norm(&mut self, a: NodeId) -> Result<NodeId> {
        let mut s = self.check(a)?.to_vec();
        match s.last_mut() {
            Some(last) => *last = 1,
            None => return Err(Error::shape(self.next_id(), "row_norm of a scalar")),
        }
        Ok(self.push(Op::RowNorm(a), s))
    }

    pub fn row_logsumexp(&mut self, a: NodeId) -> Result<NodeId> {
        let s = self.check(a)?.to_vec();
        if s.len() != 2 || s[1] == 0 {
            return Err(Error::shape(
                self.next_id(),
                "row_logsumexp needs a non-empty matrix",
            ));
        }
        Ok(self.push(Op::RowLogSumExp(a), vec![s[0], 1]))
    }

    pub fn concat_rows(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let sa = self.check(a)?.to_vec();
        let sb = self.check(b)?.to_vec();
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[1] {
            return Err(Error::shape(
                self.next_id(),
                format!("concat: incompatible shapes {sa:?} and {sb:?}"),
            ));
        }
        Ok(self.push(Op::ConcatRows(a, b), vec![sa[0] + sb[0], sa[1]]))
    }

    pub fn slice_rows(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let s = self.check(a)?.to_vec();
        if s.len() != 2 || start > end || end > s[0] {
            return Err(Error::shape(
                self.next_id(),
                format!("slice {start}..{end} out of range for {s:?}"),
            ));
        }
        Ok(self.push(
            Op::SliceRows {
                input: a,
                start,
                end,
            },
            vec![end - start, s[1]],
        ))
    }

    /// Embeds `a` at row `start` of a zero matrix with `total` rows.
    pub fn pad_rows(&mut self, a: NodeId, start: usize, total: usize) -> Result<NodeId> {
        let s = self.check(a)?.to_vec();
        if s.len() != 2 || start + s[0] > total {
            return Err(Error::shape(
                self.next_id(),
                format!("pad of {s:?} at {start} exceeds {total} rows"),
            ));
        }
        Ok(self.push(
            Op::PadRows {
                input: a,
                start,
                total,
            },
            vec![total, s[1]],
        ))
    }

    /// `x W + b`, with `b` broadcast over rows.
    pub fn dense(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let xw = self.matmul(x, w)?;
        let s = self.shape(xw).to_vec();
        let bb = self.broadcast(b, &s)?;
        self.add(xw, bb)
    }

    /// Evaluates every node.
    pub fn forward_eval(&self, bindings: &Bindings<'_>) -> Result<Values> {
        let mut values: Vec<Tensor> = Vec::with_capacity(self.nodes.len());
        for (i, node) in self.nodes.iter().enumerate() {
            let v = |id: NodeId| &values[id.0];
            let out = match &node.op {
                Op::Input(name) | Op::Param(name) => {
                    let t = bindings.get(name).ok_or_else(|| Error::MissingBinding {
                        name: name.clone(),
                    })?;
                    if t.shape() != node.shape.as_slice() {
                        return Err(Error::shape(
                            i,
                            format!(
                                "binding `{name}` has shape {:?}, leaf declares {:?}",
                                t.shape(),
                                node.shape
                            ),
                        ));
                    }
                    t.clone()
                }
                Op::Const(t) => t.clone(),
                Op::Add(a, b) => v(*a).zip_map(v(*b), |x, y| x + y),
                Op::Sub(a, b) => v(*a).zip_map(v(*b), |x, y| x - y),
                Op::Mul(a, b) => v(*a).zip_map(v(*b), |x, y| x * y),
                Op::Div(a, b) => v(*a).zip_map(v(*b), |x, y| if y == 0.0 { 0.0 } else { x / y }),
                Op::MatMul(a, b) => tensor::matmul(v(*a), v(*b)),
                Op::Transpose(a) => tensor::transpose(v(*a)),
                Op::Tanh(a) => v(*a).map(f64::tanh),
                Op::Relu(a) => v(*a).map(|x| if x > 0.0 { x } else { 0.0 }),
                Op::Step(a) => v(*a).map(|x| if x > 0.0 { 1.0 } else { 0.0 }),
                Op::Sigmoid(a) => v(*a).map(sigmoid),
                Op::Exp(a) => v(*a).map(f64::exp),
                Op::Log(a) => v(*a).map(f64::ln),
                Op::Sqrt(a) => v(*a).map(f64::sqrt),
                Op::Square(a) => v(*a).map(|x| x * x),
                Op::Sum(a) => Tensor::scalar(v(*a).data().iter().sum()),
                Op::Mean(a) => {
                    let t = v(*a);
                    Tensor::scalar(t.data().iter().sum::<f64>() / t.len() as f64)
                }
                Op::Broadcast(a) => tensor::broadcast_to(v(*a), &node.shape),
                Op::ReduceTo(a) => tensor::reduce_to(v(*a), &node.shape),
                Op::RowNorm(a) => {
                    let t = v(*a);
                    let c = *t.shape().last().unwrap();
                    let data = if c == 0 {
                        vec![0.0; t.len()]
                    } else {
                        t.data()
                            .chunks(c)
                            .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
                            .collect()
                    };
                    Tensor::with_shape(node.shape.clone(), data)
                }
                Op::RowLogSumExp(a) => {
                    let t = v(*a);
                    let data = t.row_iter().map(log_sum_exp).collect();
                    Tensor::with_shape(node.shape.clone(), data)
                }
                Op::ConcatRows(a, b) => {
                    let mut data = v(*a).data().to_vec();
                    data.extend_from_slice(v(*b).data());
                    Tensor::with_shape(node.shape.clone(), data)
                }
                Op::SliceRows { input, start, end } => {
                    let t = v(*input);
                    let c = t.shape()[1];
                    Tensor::with_shape(node.shape.clone(), t.data()[start * c..end * c].to_vec())
                }
                Op::PadRows { input, start, .. } => {
                    let t = v(*input);
                    let c = t.shape()[1];
                    let mut data = vec![0.0; node.shape.iter().product()];
                    data[start * c..start * c + t.len()].copy_from_slice(t.data());
                    Tensor::with_shape(node.shape.clone(), data)
                }
                Op::Affine {
                    input,
                    scale,
                    shift,
                } => v(*input).map(|x| scale * x + shift),
            };
            values.push(out);
        }
        Ok(Values { values })
    }

    /// Appends nodes computing d`target`/d`leaf` for every leaf in `wrt`, and
    /// returns their ids in the same order. Leaves that `target` does not
    /// depend on get a zero constant of their own shape.
    pub fn gradient_nodes(&mut self, target: NodeId, wrt: &[NodeId]) -> Result<Vec<NodeId>> {
        let y = target.0;
        let shape_y = self.check(target)?.to_vec();
        if shape_y.iter().product::<usize>() != 1 {
            return Err(Error::contract(format!(
                "gradient target node {y} has shape {shape_y:?}, expected a single value"
            )));
        }
        for &w in wrt {
            self.check(w)?;
            if self.leaf_name(w).is_none() {
                return Err(Error::contract(format!(
                    "node {} is not an input or parameter leaf",
                    w.0
                )));
            }
        }

        let n = y + 1;
        let mut depends = vec![false; n];
        for &w in wrt {
            if w.0 < n {
                depends[w.0] = true;
            }
        }
        for i in 0..n {
            if !depends[i] && self.nodes[i].op.inputs().any(|p| depends[p.0]) {
                depends[i] = true;
            }
        }
        let reached = self.ancestors(target);

        let mut adjoint: Vec<Option<NodeId>> = vec![None; n];
        if depends[y] {
            adjoint[y] = Some(self.constant(Tensor::filled(&shape_y, 1.0)));
        }
        for i in (0..n).rev() {
            let Some(g) = adjoint[i] else { continue };
            if !depends[i] || !reached[i] {
                continue;
            }
            let op = self.nodes[i].op.clone();
            for (input, contribution) in self.vjp(NodeId(i), &op, g, &depends)? {
                adjoint[input.0] = Some(match adjoint[input.0] {
                    None => contribution,
                    Some(prev) => self.add(prev, contribution)?,
                });
            }
        }

        Ok(wrt
            .iter()
            .map(|&w| match adjoint.get(w.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let shape = self.nodes[w.0].shape.clone();
                    self.constant(Tensor::zeros(&shape))
                }
            })
            .collect())
    }

    /// Vector-Jacobian products of one node for the inputs that need them.
    fn vjp(
        &mut self,
        out: NodeId,
        op: &Op,
        g: NodeId,
        depends: &[bool],
    ) -> Result<Vec<(NodeId, NodeId)>> {
        let need = |id: NodeId| depends[id.0];
        let mut res = Vec::with_capacity(2);
        match *op {
            Op::Input(_) | Op::Param(_) | Op::Const(_) => {}
            Op::Add(a, b) => {
                if need(a) {
                    res.push((a, g));
                }
                if need(b) {
                    res.push((b, g));
                }
            }
            Op::Sub(a, b) => {
                if need(a) {
                    res.push((a, g));
                }
                if need(b) {
                    res.push((b, self.neg(g)?));
                }
            }
            Op::Mul(a, b) => {
                if need(a) {
                    res.push((a, self.mul(g, b)?));
                }
                if need(b) {
                    res.push((b, self.mul(g, a)?));
                }
            }
            Op::Div(a, b) => {
                if need(a) {
                    res.push((a, self.div(g, b)?));
                }
                if need(b) {
                    let go = self.mul(g, out)?;
                    let q = self.div(go, b)?;
                    res.push((b, self.neg(q)?));
                }
            }
            Op::MatMul(a, b) => {
                if need(a) {
                    let bt = self.transpose(b)?;
                    res.push((a, self.matmul(g, bt)?));
                }
                if need(b) {
                    let at = self.transpose(a)?;
                    res.push((b, self.matmul(at, g)?));
                }
            }
            Op::Transpose(a) => res.push((a, self.transpose(g)?)),
            Op::Tanh(a) => {
                let sq = self.square(out)?;
                let d = self.affine(sq, -1.0, 1.0)?;
                res.push((a, self.mul(g, d)?));
            }
            Op::Relu(a) => {
                let mask = self.step(a)?;
                res.push((a, self.mul(g, mask)?));
            }
            Op::Step(a) => {
                self.warnings.push(format!(
                    "node {}: differentiated through step of node {} (zero derivative)",
                    out.0, a.0
                ));
            }
            Op::Sigmoid(a) => {
                let one_minus = self.affine(out, -1.0, 1.0)?;
                let d = self.mul(out, one_minus)?;
                res.push((a, self.mul(g, d)?));
            }
            Op::Exp(a) => res.push((a, self.mul(g, out)?)),
            Op::Log(a) => res.push((a, self.div(g, a)?)),
            Op::Sqrt(a) => {
                let two_out = self.scale(out, 2.0)?;
                res.push((a, self.div(g, two_out)?));
            }
            Op::Square(a) => {
                let two_a = self.scale(a, 2.0)?;
                res.push((a, self.mul(g, two_a)?));
            }
            Op::Sum(a) => {
                let s = self.nodes[a.0].shape.clone();
                res.push((a, self.broadcast(g, &s)?));
            }
            Op::Mean(a) => {
                let s = self.nodes[a.0].shape.clone();
                let count = s.iter().product::<usize>() as f64;
                let b = self.broadcast(g, &s)?;
                res.push((a, self.scale(b, 1.0 / count)?));
            }
            Op::Broadcast(a) => {
                let s = self.nodes[a.0].shape.clone();
                res.push((a, self.reduce_to(g, &s)?));
            }
            Op::ReduceTo(a) => {
                let s = self.nodes[a.0].shape.clone();
                res.push((a, self.broadcast(g, &s)?));
            }
            Op::RowNorm(a) => {
                // d|x|/dx = x / |x|, taken as 0 at the origin
                let s = self.nodes[a.0].shape.clone();
                let q = self.div(g, out)?;
                let qb = self.broadcast(q, &s)?;
                res.push((a, self.mul(qb, a)?));
            }
            Op::RowLogSumExp(a) => {
                let s = self.nodes[a.0].shape.clone();
                let lse = self.broadcast(out, &s)?;
                let shifted = self.sub(a, lse)?;
                let softmax = self.exp(shifted)?;
                let gb = self.broadcast(g, &s)?;
                res.push((a, self.mul(gb, softmax)?));
            }
            Op::ConcatRows(a, b) => {
                let ra = self.nodes[a.0].shape[0];
                let rb = self.nodes[b.0].shape[0];
                if need(a) {
                    res.push((a, self.slice_rows(g, 0, ra)?));
                }
                if need(b) {
                    res.push((b, self.slice_rows(g, ra, ra + rb)?));
                }
            }
            Op::SliceRows { input, start, .. } => {
                let total = self.nodes[input.0].shape[0];
                res.push((input, self.pad_rows(g, start, total)?));
            }
            Op::PadRows { input, start, .. } => {
                let rows = self.nodes[input.0].shape[0];
                res.push((input, self.slice_rows(g, start, start + rows)?));
            }
            Op::Affine { input, scale, .. } => res.push((input, self.scale(g, scale)?)),
        }
        res.retain(|(id, _)| need(*id));
        Ok(res)
    }

    /// Extends the graph with a node equal to d`target`/d`input`.
    ///
    /// The new node is an ordinary part of the graph, so it can itself be
    /// differentiated with respect to parameters (double backpropagation).
    /// Passing through a relu records a warning, since its second-order
    /// path is piecewise constant.
    pub fn input_gradient_node(&mut self, target: NodeId, input: NodeId) -> Result<NodeId> {
        self.check(target)?;
        let relu_on_path = self
            .ancestors(target)
            .iter()
            .enumerate()
            .any(|(i, &r)| r && matches!(self.nodes[i].op, Op::Relu(_)));
        let g = self.gradient_nodes(target, &[input])?[0];
        if relu_on_path {
            self.warnings.push(format!(
                "input gradient node {}: relu on the path, second derivative is piecewise constant",
                g.0
            ));
        }
        Ok(g)
    }

    /// Evaluates gradients of `target` w.r.t. `wrt` without modifying `self`.
    pub fn gradient(
        &self,
        target: NodeId,
        wrt: &[NodeId],
        bindings: &Bindings<'_>,
    ) -> Result<Vec<Tensor>> {
        let mut g = self.clone();
        let ids = g.gradient_nodes(target, wrt)?;
        let mut values = g.forward_eval(bindings)?;
        Ok(ids
            .iter()
            .map(|&id| std::mem::replace(&mut values.values[id.0], Tensor::scalar(0.0)))
            .collect())
    }

    /// Marks every node `target` depends on (including itself).
    fn ancestors(&self, target: NodeId) -> Vec<bool> {
        let n = target.0 + 1;
        let mut reached = vec![false; n];
        reached[target.0] = true;
        for i in (0..n).rev() {
            if reached[i] {
                for p in self.nodes[i].op.inputs() {
                    reached[p.0] = true;
                }
            }
        }
        reached
    }

    pub(crate) fn leaf_name_of(&self, id: NodeId) -> Option<&str> {
        self.leaf_name(id)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn log_sum_exp(row: &[f64]) -> f64 {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
