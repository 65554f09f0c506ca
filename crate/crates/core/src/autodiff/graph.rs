use std::collections::{BTreeMap, HashMap};

use super::params::{ParamGrads, ParamId, ParamStore};
use super::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Differentiable operations supported by [`Graph::apply`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OpKind {
    Add,
    Sub,
    /// Elementwise product of two equally shaped tensors.
    Mul,
    /// Multiplication by a constant.
    Scale(f64),
    /// `[r, c] x [c] -> [r]`.
    MatVec,
    /// Row vector times matrix: `[r] x [r, c] -> [c]`.
    VecMat,
    /// Scalars and vectors concatenated into one vector.
    Concat,
    /// Equal-length vectors stacked as the rows of a matrix.
    StackRows,
    /// Scalar entry of a vector.
    Index(usize),
    /// Sum of all entries.
    Sum,
    Softmax,
    /// `exp(-|x - y|^2 / bandwidth)` of two equal-length vectors.
    GaussianKernel(f64),
    ReduceMin,
    ReduceMax,
    Log,
    Negate,
    Sigmoid,
    Clamp(f64, f64),
}

impl OpKind {
    fn name(&self) -> &'static str {
        match self {
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::Scale(_) => "scale",
            OpKind::MatVec => "matvec",
            OpKind::VecMat => "vecmat",
            OpKind::Concat => "concat",
            OpKind::StackRows => "stack_rows",
            OpKind::Index(_) => "index",
            OpKind::Sum => "sum",
            OpKind::Softmax => "softmax",
            OpKind::GaussianKernel(_) => "gaussian_kernel",
            OpKind::ReduceMin => "reduce_min",
            OpKind::ReduceMax => "reduce_max",
            OpKind::Log => "log",
            OpKind::Negate => "negate",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Clamp(..) => "clamp",
        }
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Apply(OpKind),
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
    inputs: Vec<NodeId>,
    requires_grad: bool,
    /// Position selected by min/max reductions.
    selected: usize,
}

/// Gradients of a scalar root with respect to every leaf that requires them.
#[derive(Clone, Debug, Default)]
pub struct GradientMap {
    grads: BTreeMap<NodeId, Tensor>,
}

impl GradientMap {
    pub fn get(&self, leaf: NodeId) -> Option<&Tensor> {
        self.grads.get(&leaf)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &Tensor)> {
        self.grads.iter().map(|(k, v)| (*k, v))
    }
}

/// A computation graph built in topological order; node values are fixed
/// at creation.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<ParamId, NodeId>,
    param_of: HashMap<NodeId, ParamId>,
}

fn shape_err(op: &OpKind, shapes: &[&[usize]]) -> Error {
    Error::Shape(format!("{} got incompatible shapes {:?}", op.name(), shapes))
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

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value.item()
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// New leaf node. Non-finite values are rejected.
    pub fn make(&mut self, value: Tensor, requires_grad: bool) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(Error::NonFinite("leaf".into()));
        }
        Ok(self.push(value, Op::Leaf, Vec::new(), requires_grad, 0))
    }

    pub fn constant(&mut self, v: f64) -> NodeId {
        self.push(Tensor::scalar(v), Op::Leaf, Vec::new(), false, 0)
    }

    /// Leaf holding the current value of a stored parameter. Repeated calls
    /// return the same node.
    pub fn param(&mut self, id: ParamId, store: &ParamStore) -> NodeId {
        if let Some(&n) = self.params.get(&id) {
            return n;
        }
        let p = store.get(id);
        let n = self.push(p.value.clone(), Op::Leaf, Vec::new(), p.trainable, 0);
        self.params.insert(id, n);
        self.param_of.insert(n, id);
        n
    }

    /// Makes `node` stand in for parameter `id` in later [`Graph::param`]
    /// calls. Shapes are not checked here.
    pub fn bind_param(&mut self, id: ParamId, node: NodeId) {
        self.params.insert(id, node);
        self.param_of.insert(node, id);
    }

    pub fn param_node(&self, id: ParamId) -> Option<NodeId> {
        self.params.get(&id).copied()
    }

    fn push(
        &mut self,
        value: Tensor,
        op: Op,
        inputs: Vec<NodeId>,
        requires_grad: bool,
        selected: usize,
    ) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            inputs,
            requires_grad,
            selected,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn apply(&mut self, kind: OpKind, inputs: &[NodeId]) -> Result<NodeId> {
        let (value, selected) = self.forward(&kind, inputs)?;
        if !value.is_finite() {
            return Err(Error::NonFinite(kind.name().into()));
        }
        let requires_grad = inputs.iter().any(|i| self.nodes[i.0].requires_grad);
        Ok(self.push(value, Op::Apply(kind), inputs.to_vec(), requires_grad, selected))
    }

    fn forward(&self, kind: &OpKind, inputs: &[NodeId]) -> Result<(Tensor, usize)> {
        let vals: Vec<&Tensor> = inputs.iter().map(|i| &self.nodes[i.0].value).collect();
        let shapes: Vec<&[usize]> = vals.iter().map(|v| v.shape()).collect();
        let arity = |n: usize| -> Result<()> {
            if vals.len() != n {
                Err(Error::Shape(format!(
                    "{} expects {n} input(s), got {}",
                    kind.name(),
                    vals.len()
                )))
            } else {
                Ok(())
            }
        };
        let out = match *kind {
            OpKind::Add | OpKind::Sub | OpKind::Mul => {
                arity(2)?;
                if vals[0].shape() != vals[1].shape() {
                    return Err(shape_err(kind, &shapes));
                }
                let data = vals[0]
                    .data()
                    .iter()
                    .zip(vals[1].data())
                    .map(|(a, b)| match kind {
                        OpKind::Add => a + b,
                        OpKind::Sub => a - b,
                        _ => a * b,
                    })
                    .collect();
                Tensor::new(vals[0].shape().to_vec(), data)?
            }
            OpKind::Scale(c) => {
                arity(1)?;
                vals[0].scaled(c)
            }
            OpKind::Negate => {
                arity(1)?;
                vals[0].scaled(-1.0)
            }
            OpKind::MatVec => {
                arity(2)?;
                let (m, v) = (vals[0], vals[1]);
                if !m.is_matrix() || !v.is_vector() || m.cols() != v.len() {
                    return Err(shape_err(kind, &shapes));
                }
                let out = (0..m.rows())
                    .map(|r| m.row(r).iter().zip(v.data()).map(|(a, b)| a * b).sum())
                    .collect();
                Tensor::vector(out)
            }
            OpKind::VecMat => {
                arity(2)?;
                let (v, m) = (vals[0], vals[1]);
                if !m.is_matrix() || !v.is_vector() || m.rows() != v.len() {
                    return Err(shape_err(kind, &shapes));
                }
                let mut out = vec![0.0; m.cols()];
                for (r, w) in v.data().iter().enumerate() {
                    for (o, x) in out.iter_mut().zip(m.row(r)) {
                        *o += w * x;
                    }
                }
                Tensor::vector(out)
            }
            OpKind::Concat => {
                if vals.is_empty() || vals.iter().any(|v| v.is_matrix()) {
                    return Err(shape_err(kind, &shapes));
                }
                Tensor::vector(vals.iter().flat_map(|v| v.data().iter().copied()).collect())
            }
            OpKind::StackRows => {
                if vals.is_empty()
                    || vals.iter().any(|v| !v.is_vector() || v.len() != vals[0].len())
                {
                    return Err(shape_err(kind, &shapes));
                }
                Tensor::matrix(
                    vals.len(),
                    vals[0].len(),
                    vals.iter().flat_map(|v| v.data().iter().copied()).collect(),
                )
            }
            OpKind::Index(i) => {
                arity(1)?;
                if !vals[0].is_vector() || i >= vals[0].len() {
                    return Err(shape_err(kind, &shapes));
                }
                Tensor::scalar(vals[0].data()[i])
            }
            OpKind::Sum => {
                arity(1)?;
                Tensor::scalar(vals[0].data().iter().sum())
            }
            OpKind::Softmax => {
                arity(1)?;
                if !vals[0].is_vector() {
                    return Err(shape_err(kind, &shapes));
                }
                Tensor::vector(softmax(vals[0].data()))
            }
            OpKind::GaussianKernel(bw) => {
                arity(2)?;
                if !vals[0].is_vector() || vals[0].shape() != vals[1].shape() || bw <= 0.0 {
                    return Err(shape_err(kind, &shapes));
                }
                Tensor::scalar(super::tensor::gaussian_kernel(vals[0].data(), vals[1].data(), bw))
            }
            OpKind::ReduceMin | OpKind::ReduceMax => {
                let items = reduction_items(&vals).ok_or_else(|| shape_err(kind, &shapes))?;
                let want_min = matches!(kind, OpKind::ReduceMin);
                let mut best = 0;
                for (i, &v) in items.iter().enumerate().skip(1) {
                    let better = if want_min { v < items[best] } else { v > items[best] };
                    if better {
                        best = i;
                    }
                }
                return Ok((Tensor::scalar(items[best]), best));
            }
            OpKind::Log => {
                arity(1)?;
                Tensor::new(
                    vals[0].shape().to_vec(),
                    vals[0].data().iter().map(|v| v.ln()).collect(),
                )?
            }
            OpKind::Sigmoid => {
                arity(1)?;
                Tensor::new(
                    vals[0].shape().to_vec(),
                    vals[0].data().iter().map(|&v| sigmoid(v)).collect(),
                )?
            }
            OpKind::Clamp(lo, hi) => {
                arity(1)?;
                Tensor::new(
                    vals[0].shape().to_vec(),
                    vals[0].data().iter().map(|v| v.clamp(lo, hi)).collect(),
                )?
            }
        };
        Ok((out, 0))
    }

    /// Reverse-mode gradients of a scalar root. Every leaf that requires
    /// gradients appears in the result, with zeros when it does not feed the
    /// root.
    pub fn backward(&self, root: NodeId) -> Result<GradientMap> {
        if !self.nodes[root.0].value.is_scalar() {
            return Err(Error::Shape(format!(
                "backward root must be scalar, got shape {:?}",
                self.nodes[root.0].value.shape()
            )));
        }
        let mut adj: Vec<Option<Tensor>> = vec![None; root.0 + 1];
        adj[root.0] = Some(Tensor::scalar(1.0));
        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Op::Apply(kind) = node.op else { continue };
            let Some(g) = adj[idx].take() else { continue };
            for (slot, contribution) in self.local_grads(node, &kind, &g) {
                let input = node.inputs[slot];
                if !self.nodes[input.0].requires_grad {
                    continue;
                }
                match &mut adj[input.0] {
                    Some(acc) => acc.add_assign(&contribution),
                    empty => *empty = Some(contribution),
                }
            }
        }
        let mut grads = BTreeMap::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            if node.requires_grad && matches!(node.op, Op::Leaf) {
                let g = adj
                    .get_mut(idx)
                    .and_then(Option::take)
                    .unwrap_or_else(|| Tensor::zeros(node.value.shape()));
                grads.insert(NodeId(idx), g);
            }
        }
        Ok(GradientMap { grads })
    }

    /// Gradients re-keyed by parameter id.
    pub fn param_grads(&self, grads: &GradientMap) -> ParamGrads {
        grads
            .iter()
            .filter_map(|(n, g)| self.param_of.get(&n).map(|p| (*p, g.clone())))
            .collect()
    }

    fn local_grads(&self, node: &Node, kind: &OpKind, g: &Tensor) -> Vec<(usize, Tensor)> {
        let val = |slot: usize| &self.nodes[node.inputs[slot].0].value;
        match *kind {
            OpKind::Add => vec![(0, g.clone()), (1, g.clone())],
            OpKind::Sub => vec![(0, g.clone()), (1, g.scaled(-1.0))],
            OpKind::Mul => {
                let (a, b) = (val(0), val(1));
                let ga = zip_map(g, b, |x, y| x * y);
                let gb = zip_map(g, a, |x, y| x * y);
                vec![(0, ga), (1, gb)]
            }
            OpKind::Scale(c) => vec![(0, g.scaled(c))],
            OpKind::Negate => vec![(0, g.scaled(-1.0))],
            OpKind::MatVec => {
                let (m, v) = (val(0), val(1));
                let (r, c) = (m.rows(), m.cols());
                let mut gm = vec![0.0; r * c];
                let mut gv = vec![0.0; c];
                for i in 0..r {
                    let gi = g.data()[i];
                    for j in 0..c {
                        gm[i * c + j] = gi * v.data()[j];
                        gv[j] += m.data()[i * c + j] * gi;
                    }
                }
                vec![(0, Tensor::matrix(r, c, gm)), (1, Tensor::vector(gv))]
            }
            OpKind::VecMat => {
                let (v, m) = (val(0), val(1));
                let (r, c) = (m.rows(), m.cols());
                let mut gv = vec![0.0; r];
                let mut gm = vec![0.0; r * c];
                for i in 0..r {
                    for j in 0..c {
                        gv[i] += m.data()[i * c + j] * g.data()[j];
                        gm[i * c + j] = v.data()[i] * g.data()[j];
                    }
                }
                vec![(0, Tensor::vector(gv)), (1, Tensor::matrix(r, c, gm))]
            }
            OpKind::Concat => {
                let mut offset = 0;
                let mut out = Vec::with_capacity(node.inputs.len());
                for slot in 0..node.inputs.len() {
                    let shape = val(slot).shape().to_vec();
                    let n = val(slot).len();
                    let part = g.data()[offset..offset + n].to_vec();
                    offset += n;
                    out.push((slot, Tensor::new(shape, part).expect("concat slice")));
                }
                out
            }
            OpKind::StackRows => (0..node.inputs.len())
                .map(|slot| (slot, Tensor::vector(g.row(slot).to_vec())))
                .collect(),
            OpKind::Index(i) => {
                let mut t = Tensor::zeros(val(0).shape());
                t.data_mut()[i] = g.item();
                vec![(0, t)]
            }
            OpKind::Sum => {
                let x = val(0);
                let d = vec![g.item(); x.len()];
                vec![(0, Tensor::new(x.shape().to_vec(), d).expect("sum shape"))]
            }
            OpKind::Softmax => {
                let y = node.value.data();
                let dot: f64 = y.iter().zip(g.data()).map(|(a, b)| a * b).sum();
                let d = y.iter().zip(g.data()).map(|(yi, gi)| yi * (gi - dot)).collect();
                vec![(0, Tensor::vector(d))]
            }
            OpKind::GaussianKernel(bw) => {
                let (x, y) = (val(0), val(1));
                let k = node.value.item();
                let coeff = -2.0 * k * g.item() / bw;
                let gx: Vec<f64> = x
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(a, b)| coeff * (a - b))
                    .collect();
                let gy = gx.iter().map(|v| -v).collect();
                vec![(0, Tensor::vector(gx)), (1, Tensor::vector(gy))]
            }
            OpKind::ReduceMin | OpKind::ReduceMax => {
                if node.inputs.len() == 1 {
                    let mut t = Tensor::zeros(val(0).shape());
                    t.data_mut()[node.selected] = g.item();
                    vec![(0, t)]
                } else {
                    vec![(node.selected, g.clone())]
                }
            }
            OpKind::Log => vec![(0, zip_map(g, val(0), |gi, x| gi / x))],
            OpKind::Sigmoid => {
                vec![(0, zip_map(g, &node.value, |gi, s| gi * s * (1.0 - s)))]
            }
            OpKind::Clamp(lo, hi) => vec![(
                0,
                zip_map(g, val(0), |gi, x| if x >= lo && x <= hi { gi } else { 0.0 }),
            )],
        }
    }

    // Convenience wrappers.

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Add, &[a, b])
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Sub, &[a, b])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Mul, &[a, b])
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        self.apply(OpKind::Scale(c), &[a])
    }

    pub fn matvec(&mut self, m: NodeId, v: NodeId) -> Result<NodeId> {
        self.apply(OpKind::MatVec, &[m, v])
    }

    pub fn vecmat(&mut self, v: NodeId, m: NodeId) -> Result<NodeId> {
        self.apply(OpKind::VecMat, &[v, m])
    }

    pub fn softmax(&mut self, v: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Softmax, &[v])
    }

    pub fn kernel(&mut self, a: NodeId, b: NodeId, bandwidth: f64) -> Result<NodeId> {
        self.apply(OpKind::GaussianKernel(bandwidth), &[a, b])
    }

    pub fn reduce_min(&mut self, inputs: &[NodeId]) -> Result<NodeId> {
        if inputs.len() == 1 && self.value(inputs[0]).is_scalar() {
            return Ok(inputs[0]);
        }
        self.apply(OpKind::ReduceMin, inputs)
    }

    pub fn reduce_max(&mut self, inputs: &[NodeId]) -> Result<NodeId> {
        if inputs.len() == 1 && self.value(inputs[0]).is_scalar() {
            return Ok(inputs[0]);
        }
        self.apply(OpKind::ReduceMax, inputs)
    }

    pub fn log(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Log, &[a])
    }

    pub fn concat(&mut self, inputs: &[NodeId]) -> Result<NodeId> {
        self.apply(OpKind::Concat, inputs)
    }

    pub fn stack_rows(&mut self, rows: &[NodeId]) -> Result<NodeId> {
        self.apply(OpKind::StackRows, rows)
    }

    pub fn index(&mut self, v: NodeId, i: usize) -> Result<NodeId> {
        self.apply(OpKind::Index(i), &[v])
    }

    pub fn sum(&mut self, v: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Sum, &[v])
    }
}

fn reduction_items(vals: &[&Tensor]) -> Option<Vec<f64>> {
    match vals {
        [] => None,
        [single] if single.is_vector() => Some(single.data().to_vec()),
        many if many.iter().all(|v| v.is_scalar()) => Some(many.iter().map(|v| v.item()).collect()),
        _ => None,
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}
