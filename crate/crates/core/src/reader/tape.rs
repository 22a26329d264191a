//! Reverse-mode differentiation over dense row-major matrices.
//!
//! A [`Graph`] records operations in creation order, so walking the node list
//! backwards is a valid reverse topological order.

use ndarray::{s, Array2, Axis};

pub type NodeId = usize;

/// Named parameter matrices. Vectors are stored as `1 × k` rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
}

impl ParamStore {
    pub fn add(&mut self, name: impl Into<String>, value: Array2<f64>) -> usize {
        self.names.push(name.into());
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> &Array2<f64> {
        &self.values[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Array2<f64> {
        &mut self.values[i]
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }
}

/// Gradients aligned with a [`ParamStore`]; `None` for untouched parameters.
pub type Grads = Vec<Option<Array2<f64>>>;

/// Adds `other` into `acc`, slot by slot.
pub fn accumulate(acc: &mut Grads, other: Grads) {
    for (slot, g) in acc.iter_mut().zip(other) {
        if let Some(g) = g {
            add_into(slot, g);
        }
    }
}

fn add_into(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
    match slot {
        Some(acc) => *acc += &g,
        None => *slot = Some(g),
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(usize),
    Gather { param: usize, ids: Vec<usize> },
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    MulRow(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    MatMulT(NodeId, NodeId),
    Scale(NodeId, f64),
    SoftmaxRows(NodeId),
    Normalize { x: NodeId, inv_std: Vec<f64> },
    Gelu(NodeId),
    Tanh(NodeId),
    SliceCols { x: NodeId, start: usize },
    ConcatCols(Vec<NodeId>),
    PairLogits(Box<PairCache>),
    BceMean { logits: NodeId, targets: Vec<f64> },
}

#[derive(Debug)]
struct PairCache {
    start: NodeId,
    end: NodeId,
    bias: NodeId,
    proj: NodeId,
    shift: NodeId,
    pairs: Vec<(usize, usize)>,
    hidden: Array2<f64>,
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Option<Array2<f64>>,
}

const GELU_K: f64 = 0.797_884_560_802_865_4;
const GELU_C: f64 = 0.044_715;
pub const NORM_EPS: f64 = 1e-5;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_K * (x + GELU_C * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_K * (x + GELU_C * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_K * (1.0 + 3.0 * GELU_C * x * x)
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `-[y ln σ(z) + (1-y) ln(1-σ(z))]` without overflow.
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, op: Op, value: Array2<f64>) -> NodeId {
        self.nodes.push(Node { op, value: Some(value) });
        self.nodes.len() - 1
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        match (&self.nodes[id].op, &self.nodes[id].value) {
            (Op::Param(p), _) => self.params.get(*p),
            (_, Some(v)) => v,
            (_, None) => unreachable!("non-parameter node without a value"),
        }
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.value(id)[[0, 0]]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A constant input; receives no gradient.
    pub fn leaf(&mut self, value: Array2<f64>) -> NodeId {
        self.push(Op::Leaf, value)
    }

    pub fn param(&mut self, p: usize) -> NodeId {
        self.nodes.push(Node {
            op: Op::Param(p),
            value: None,
        });
        self.nodes.len() - 1
    }

    /// Rows `ids` of parameter `p`.
    pub fn gather(&mut self, p: usize, ids: &[usize]) -> NodeId {
        let table = self.params.get(p);
        let mut out = Array2::zeros((ids.len(), table.ncols()));
        for (r, &id) in ids.iter().enumerate() {
            out.row_mut(r).assign(&table.row(id));
        }
        self.push(
            Op::Gather {
                param: p,
                ids: ids.to_vec(),
            },
            out,
        )
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) + self.value(b);
        self.push(Op::Add(a, b), v)
    }

    /// Adds a `1 × k` row to every row of `a`.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let v = self.value(a) + self.value(row);
        self.push(Op::AddRow(a, row), v)
    }

    /// Multiplies every row of `a` elementwise by a `1 × k` row.
    pub fn mul_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let v = self.value(a) * self.value(row);
        self.push(Op::MulRow(a, row), v)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).dot(self.value(b));
        self.push(Op::MatMul(a, b), v)
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).dot(&self.value(b).t());
        self.push(Op::MatMulT(a, b), v)
    }

    pub fn scale(&mut self, a: NodeId, k: f64) -> NodeId {
        let v = self.value(a) * k;
        self.push(Op::Scale(a, k), v)
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        for mut row in v.rows_mut() {
            let m = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - m).exp());
            let z = row.sum();
            row /= z;
        }
        self.push(Op::SoftmaxRows(a), v)
    }

    /// Per-row standardization to zero mean and unit variance.
    pub fn normalize(&mut self, x: NodeId) -> NodeId {
        let mut v = self.value(x).clone();
        let k = v.ncols() as f64;
        let mut inv_std = Vec::with_capacity(v.nrows());
        for mut row in v.rows_mut() {
            let mean = row.sum() / k;
            row -= mean;
            let var = row.fold(0.0, |s, &d| s + d * d) / k;
            let inv = 1.0 / (var + NORM_EPS).sqrt();
            row *= inv;
            inv_std.push(inv);
        }
        self.push(Op::Normalize { x, inv_std }, v)
    }

    /// Layer normalization with gain and bias rows.
    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId) -> NodeId {
        let n = self.normalize(x);
        let g = self.mul_row(n, gain);
        self.add_row(g, bias)
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(gelu);
        self.push(Op::Gelu(a), v)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(f64::tanh);
        self.push(Op::Tanh(a), v)
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, end: usize) -> NodeId {
        let v = self.value(x).slice(s![.., start..end]).to_owned();
        self.push(Op::SliceCols { x, start }, v)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("row counts agree");
        self.push(Op::ConcatCols(parts.to_vec()), v)
    }

    /// One logit per pair `(i, j)`:
    /// `proj · tanh(start_i + end_j + bias) + shift`,
    /// where `start` and `end` are `n × h`, `bias` and `proj` are `1 × h` and
    /// `shift` is `1 × 1`. Output is `m × 1`.
    pub fn pair_logits(
        &mut self,
        start: NodeId,
        end: NodeId,
        bias: NodeId,
        proj: NodeId,
        shift: NodeId,
        pairs: &[(usize, usize)],
    ) -> NodeId {
        let (a, b, bias_v, proj_v) = (self.value(start), self.value(end), self.value(bias), self.value(proj));
        let c = self.value(shift)[[0, 0]];
        let h = a.ncols();
        let mut hidden = Array2::zeros((pairs.len(), h));
        let mut out = Array2::zeros((pairs.len(), 1));
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let mut row = hidden.row_mut(k);
            let mut acc = c;
            for t in 0..h {
                let z = (a[[i, t]] + b[[j, t]] + bias_v[[0, t]]).tanh();
                row[t] = z;
                acc += z * proj_v[[0, t]];
            }
            out[[k, 0]] = acc;
        }
        let cache = PairCache {
            start,
            end,
            bias,
            proj,
            shift,
            pairs: pairs.to_vec(),
            hidden,
        };
        self.push(Op::PairLogits(Box::new(cache)), out)
    }

    /// Mean binary cross-entropy of an `m × 1` logit column against targets.
    pub fn bce_mean(&mut self, logits: NodeId, targets: Vec<f64>) -> NodeId {
        let z = self.value(logits);
        assert_eq!(z.nrows(), targets.len(), "one target per logit");
        let m = targets.len().max(1) as f64;
        let total: f64 = z.column(0).iter().zip(&targets).map(|(&z, &y)| bce_with_logit(z, y)).sum();
        self.push(Op::BceMean { logits, targets }, Array2::from_elem((1, 1), total / m))
    }

    /// Gradients of the scalar `root` with respect to every parameter.
    pub fn backward(&self, root: NodeId) -> Grads {
        let mut grads: Vec<Option<Array2<f64>>> = (0..=root).map(|_| None).collect();
        grads[root] = Some(Array2::ones(self.value(root).raw_dim()));
        let mut pgrads: Grads = (0..self.params.len()).map(|_| None).collect();

        for id in (0..=root).rev() {
            let Some(gy) = grads[id].take() else { continue };
            match &self.nodes[id].op {
                Op::Leaf => {}
                Op::Param(p) => add_into(&mut pgrads[*p], gy),
                Op::Gather { param, ids } => {
                    let slot = pgrads[*param].get_or_insert_with(|| Array2::zeros(self.params.get(*param).raw_dim()));
                    for (r, &tok) in ids.iter().enumerate() {
                        let mut dst = slot.row_mut(tok);
                        dst += &gy.row(r);
                    }
                }
                Op::Add(a, b) => {
                    add_into(&mut grads[*a], gy.clone());
                    add_into(&mut grads[*b], gy);
                }
                Op::AddRow(a, row) => {
                    let gr = gy.sum_axis(Axis(0)).insert_axis(Axis(0));
                    add_into(&mut grads[*row], gr);
                    add_into(&mut grads[*a], gy);
                }
                Op::MulRow(a, row) => {
                    let gr = (&gy * self.value(*a)).sum_axis(Axis(0)).insert_axis(Axis(0));
                    add_into(&mut grads[*row], gr);
                    add_into(&mut grads[*a], gy * self.value(*row));
                }
                Op::MatMul(a, b) => {
                    let ga = gy.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&gy);
                    add_into(&mut grads[*a], ga);
                    add_into(&mut grads[*b], gb);
                }
                Op::MatMulT(a, b) => {
                    let ga = gy.dot(self.value(*b));
                    let gb = gy.t().dot(self.value(*a));
                    add_into(&mut grads[*a], ga);
                    add_into(&mut grads[*b], gb);
                }
                Op::Scale(a, k) => add_into(&mut grads[*a], gy * *k),
                Op::SoftmaxRows(a) => {
                    let y = self.value(id);
                    let mut ga = &gy * y;
                    for (mut row, yrow) in ga.rows_mut().into_iter().zip(y.rows()) {
                        let dot = row.sum();
                        row.zip_mut_with(&yrow, |g, &y| *g -= y * dot);
                    }
                    add_into(&mut grads[*a], ga);
                }
                Op::Normalize { x, inv_std } => {
                    let y = self.value(id);
                    let k = y.ncols() as f64;
                    let mut ga = gy;
                    for ((mut g, yrow), &inv) in ga.rows_mut().into_iter().zip(y.rows()).zip(inv_std) {
                        let mean_g = g.sum() / k;
                        let mean_gy = g.iter().zip(yrow).map(|(a, b)| a * b).sum::<f64>() / k;
                        g.zip_mut_with(&yrow, |gv, &yv| *gv = inv * (*gv - mean_g - yv * mean_gy));
                    }
                    add_into(&mut grads[*x], ga);
                }
                Op::Gelu(a) => {
                    let mut ga = gy;
                    ga.zip_mut_with(self.value(*a), |g, &x| *g *= gelu_grad(x));
                    add_into(&mut grads[*a], ga);
                }
                Op::Tanh(a) => {
                    let mut ga = gy;
                    ga.zip_mut_with(self.value(id), |g, &y| *g *= 1.0 - y * y);
                    add_into(&mut grads[*a], ga);
                }
                Op::SliceCols { x, start } => {
                    let mut ga = Array2::zeros(self.value(*x).raw_dim());
                    ga.slice_mut(s![.., *start..*start + gy.ncols()]).assign(&gy);
                    add_into(&mut grads[*x], ga);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let w = self.value(p).ncols();
                        add_into(&mut grads[p], gy.slice(s![.., off..off + w]).to_owned());
                        off += w;
                    }
                }
                Op::PairLogits(cache) => {
                    let PairCache {
                        start,
                        end,
                        bias,
                        proj,
                        shift,
                        pairs,
                        hidden,
                    } = cache.as_ref();
                    let proj_v = self.value(*proj);
                    let h = hidden.ncols();
                    let mut ga = Array2::zeros(self.value(*start).raw_dim());
                    let mut gb = Array2::zeros(self.value(*end).raw_dim());
                    let mut gbias = Array2::zeros((1, h));
                    let mut gproj = Array2::zeros((1, h));
                    let mut gshift = 0.0;
                    for (k, &(i, j)) in pairs.iter().enumerate() {
                        let g = gy[[k, 0]];
                        if g == 0.0 {
                            continue;
                        }
                        gshift += g;
                        for t in 0..h {
                            let z = hidden[[k, t]];
                            gproj[[0, t]] += g * z;
                            let dz = g * proj_v[[0, t]] * (1.0 - z * z);
                            ga[[i, t]] += dz;
                            gb[[j, t]] += dz;
                            gbias[[0, t]] += dz;
                        }
                    }
                    add_into(&mut grads[*start], ga);
                    add_into(&mut grads[*end], gb);
                    add_into(&mut grads[*bias], gbias);
                    add_into(&mut grads[*proj], gproj);
                    add_into(&mut grads[*shift], Array2::from_elem((1, 1), gshift));
                }
                Op::BceMean { logits, targets } => {
                    let z = self.value(*logits);
                    let m = targets.len().max(1) as f64;
                    let scale = gy[[0, 0]] / m;
                    let mut gz = Array2::zeros(z.raw_dim());
                    for (k, &y) in targets.iter().enumerate() {
                        gz[[k, 0]] = (sigmoid(z[[k, 0]]) - y) * scale;
                    }
                    add_into(&mut grads[*logits], gz);
                }
            }
        }
        pgrads
    }
}
