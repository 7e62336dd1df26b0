//! Define-by-run computation graph with reverse-mode differentiation.
//!
//! Every operation appends a node holding its forward value; [`Graph::backward`]
//! walks the nodes in reverse creation order, which is a valid topological
//! order because parents always precede children.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use super::{AutodiffError, ParamId, ParamStore, Tensor, LOG_EPS};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Rows = 0,
    Cols = 1,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Concat(Vec<Var>, Axis),
    SliceCols(Var, usize),
    Transpose(Var),
    Tanh(Var),
    Sigmoid(Var),
    LogSigmoid(Var),
    Exp(Var),
    Log(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Embedding(Var, usize),
    Pick(Var, usize),
    LogSumExpPick(Var, Vec<usize>),
    Dropout(Var, Vec<f64>),
    Sum(Var),
    Mean(Var),
}

struct Node {
    value: Option<Tensor>,
    op: Op,
}

/// Gradients of a scalar loss with respect to the parameters it reached.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    params: BTreeMap<ParamId, Vec<f64>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.params.get(&id).map(Vec::as_slice)
    }

    /// Gradient for `id`, zeros when the loss never touched it.
    pub fn get_or_zeros(&self, id: ParamId, store: &ParamStore) -> Vec<f64> {
        self.get(id)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; store.value(id).len()])
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &[f64])> {
        self.params.iter().map(|(id, g)| (*id, g.as_slice()))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.params.keys().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}

pub struct Graph<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
    param_nodes: HashMap<ParamId, Var>,
}

fn mismatch(op: &'static str, a: [usize; 2], b: [usize; 2]) -> AutodiffError {
    AutodiffError::ShapeMismatch {
        op,
        left: a.to_vec(),
        right: b.to_vec(),
    }
}

fn softmax_row(row: &[f64], out: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &x) in out.iter_mut().zip(row) {
        *o = (x - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

fn log_softmax_row(row: &[f64], out: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
    for (o, &x) in out.iter_mut().zip(row) {
        *o = x - lse;
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_sigmoid(x: f64) -> f64 {
    // -softplus(-x)
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn transpose(t: &Tensor) -> Tensor {
    let [r, c] = t.shape();
    let mut out = vec![0.0; r * c];
    let d = t.data();
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = d[i * c + j];
        }
    }
    Tensor::new([c, r], out).expect("transpose keeps size")
}

impl<'s> Graph<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.store.value(*id),
            _ => unreachable!("only parameter nodes borrow their value"),
        }
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        self.value(v).shape()
    }

    /// Value of a scalar node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).item()
    }

    fn push(&mut self, op: Op, value: Tensor, name: &'static str) -> Result<Var, AutodiffError> {
        if !value.all_finite() {
            return Err(AutodiffError::NonFiniteValue(name));
        }
        self.nodes.push(Node {
            value: Some(value),
            op,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A constant input; it receives no gradient outside the graph.
    pub fn constant(&mut self, value: Tensor) -> Result<Var, AutodiffError> {
        self.push(Op::Leaf, value, "constant")
    }

    /// Node for a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_nodes.get(&id) {
            return v;
        }
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let ([m, k], [k2, n]) = (ta.shape(), tb.shape());
        if k != k2 {
            return Err(mismatch("matmul", ta.shape(), tb.shape()));
        }
        let mut out = vec![0.0; m * n];
        let (da, db) = (ta.data(), tb.data());
        for i in 0..m {
            let orow = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let x = da[i * k + p];
                if x == 0.0 {
                    continue;
                }
                for (o, &y) in orow.iter_mut().zip(&db[p * n..(p + 1) * n]) {
                    *o += x * y;
                }
            }
        }
        let t = Tensor::new([m, n], out)?;
        self.push(Op::MatMul(a, b), t, "matmul")
    }

    /// `a · bᵀ` for `a: [m, k]`, `b: [n, k]`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let ([m, k], [n, k2]) = (ta.shape(), tb.shape());
        if k != k2 {
            return Err(mismatch("matmul_nt", ta.shape(), tb.shape()));
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let ra = ta.row_slice(i);
            for j in 0..n {
                out[i * n + j] = ra.iter().zip(tb.row_slice(j)).map(|(x, y)| x * y).sum();
            }
        }
        let t = Tensor::new([m, n], out)?;
        self.push(Op::MatMulNt(a, b), t, "matmul_nt")
    }

    fn zip_same(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var, AutodiffError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch(name, ta.shape(), tb.shape()));
        }
        let out = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let t = Tensor::new(ta.shape(), out)?;
        self.push(op, t, name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.zip_same(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.zip_same(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.zip_same(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds the `[1, n]` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, AutodiffError> {
        let (ta, tb) = (self.value(a), self.value(row));
        if tb.rows() != 1 || tb.cols() != ta.cols() {
            return Err(mismatch("add_row", ta.shape(), tb.shape()));
        }
        let n = ta.cols();
        let out = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x + tb.data()[i % n])
            .collect();
        let t = Tensor::new(ta.shape(), out)?;
        self.push(Op::AddRow(a, row), t, "add_row")
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var, AutodiffError> {
        let ta = self.value(a);
        let t = Tensor::new(ta.shape(), ta.data().iter().map(|x| x * k).collect())?;
        self.push(Op::Scale(a, k), t, "scale")
    }

    pub fn concat(&mut self, parts: &[Var], axis: Axis) -> Result<Var, AutodiffError> {
        let first = *parts.first().ok_or(AutodiffError::EmptyInput("concat"))?;
        let s0 = self.shape(first);
        let t = match axis {
            Axis::Rows => {
                let mut data = Vec::new();
                let mut rows = 0;
                for &p in parts {
                    let t = self.value(p);
                    if t.cols() != s0[1] {
                        return Err(mismatch("concat", s0, t.shape()));
                    }
                    rows += t.rows();
                    data.extend_from_slice(t.data());
                }
                Tensor::new([rows, s0[1]], data)?
            }
            Axis::Cols => {
                let mut cols = 0;
                for &p in parts {
                    let t = self.value(p);
                    if t.rows() != s0[0] {
                        return Err(mismatch("concat", s0, t.shape()));
                    }
                    cols += t.cols();
                }
                let mut data = Vec::with_capacity(s0[0] * cols);
                for r in 0..s0[0] {
                    for &p in parts {
                        data.extend_from_slice(self.value(p).row_slice(r));
                    }
                }
                Tensor::new([s0[0], cols], data)?
            }
        };
        self.push(Op::Concat(parts.to_vec(), axis), t, "concat")
    }

    /// Columns `start..start + len` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var, AutodiffError> {
        let ta = self.value(a);
        if start + len > ta.cols() {
            return Err(mismatch("slice_cols", ta.shape(), [start, len]));
        }
        let mut data = Vec::with_capacity(ta.rows() * len);
        for r in 0..ta.rows() {
            data.extend_from_slice(&ta.row_slice(r)[start..start + len]);
        }
        let t = Tensor::new([ta.rows(), len], data)?;
        self.push(Op::SliceCols(a, start), t, "slice_cols")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let t = transpose(self.value(a));
        self.push(Op::Transpose(a), t, "transpose")
    }

    fn map(&mut self, a: Var, name: &'static str, f: impl Fn(f64) -> f64, op: Op) -> Result<Var, AutodiffError> {
        let ta = self.value(a);
        let t = Tensor::new(ta.shape(), ta.data().iter().map(|&x| f(x)).collect())?;
        self.push(op, t, name)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.map(a, "tanh", f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.map(a, "sigmoid", sigmoid, Op::Sigmoid(a))
    }

    /// `log σ(a)` without forming σ(a).
    pub fn log_sigmoid(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.map(a, "log_sigmoid", log_sigmoid, Op::LogSigmoid(a))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.map(a, "exp", f64::exp, Op::Exp(a))
    }

    /// `ln(max(a, LOG_EPS))`.
    pub fn log(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.map(a, "log", |x| x.max(LOG_EPS).ln(), Op::Log(a))
    }

    pub fn softmax(&mut self, a: Var, axis: Axis) -> Result<Var, AutodiffError> {
        match axis {
            Axis::Cols => {
                let ta = self.value(a);
                let c = ta.cols();
                let mut out = vec![0.0; ta.len()];
                for r in 0..ta.rows() {
                    softmax_row(ta.row_slice(r), &mut out[r * c..(r + 1) * c]);
                }
                let t = Tensor::new(ta.shape(), out)?;
                self.push(Op::Softmax(a), t, "softmax")
            }
            Axis::Rows => {
                let at = self.transpose(a)?;
                let s = self.softmax(at, Axis::Cols)?;
                self.transpose(s)
            }
        }
    }

    /// Row-wise log-softmax with max subtraction.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let ta = self.value(a);
        let c = ta.cols();
        let mut out = vec![0.0; ta.len()];
        for r in 0..ta.rows() {
            log_softmax_row(ta.row_slice(r), &mut out[r * c..(r + 1) * c]);
        }
        let t = Tensor::new(ta.shape(), out)?;
        self.push(Op::LogSoftmax(a), t, "log_softmax")
    }

    /// Row `index` of `table` as a `[1, cols]` node.
    pub fn embedding(&mut self, table: Var, index: usize) -> Result<Var, AutodiffError> {
        let tt = self.value(table);
        if index >= tt.rows() {
            return Err(mismatch("embedding", tt.shape(), [index, 1]));
        }
        let t = Tensor::row(tt.row_slice(index).to_vec());
        self.push(Op::Embedding(table, index), t, "embedding")
    }

    /// Element at flat index `index`, as a scalar node.
    pub fn pick(&mut self, a: Var, index: usize) -> Result<Var, AutodiffError> {
        let ta = self.value(a);
        let x = *ta
            .data()
            .get(index)
            .ok_or_else(|| mismatch("pick", ta.shape(), [index, 1]))?;
        self.push(Op::Pick(a, index), Tensor::scalar(x), "pick")
    }

    /// `log Σ_{i ∈ indices} exp(a[i])` over flat indices.
    pub fn log_sum_exp_pick(&mut self, a: Var, indices: &[usize]) -> Result<Var, AutodiffError> {
        let ta = self.value(a);
        if indices.is_empty() {
            return Err(AutodiffError::EmptyInput("log_sum_exp_pick"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= ta.len()) {
            return Err(mismatch("log_sum_exp_pick", ta.shape(), [bad, 1]));
        }
        let max = indices
            .iter()
            .map(|&i| ta.data()[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let lse = max + indices.iter().map(|&i| (ta.data()[i] - max).exp()).sum::<f64>().ln();
        self.push(
            Op::LogSumExpPick(a, indices.to_vec()),
            Tensor::scalar(lse),
            "log_sum_exp_pick",
        )
    }

    /// Inverted dropout: identity unless `train` and `p > 0`.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        a: Var,
        p: f64,
        train: bool,
        rng: &mut R,
    ) -> Result<Var, AutodiffError> {
        if !(0.0..1.0).contains(&p) {
            return Err(AutodiffError::InvalidArgument(format!("dropout p = {p}")));
        }
        if !train || p == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 - p;
        let ta = self.value(a);
        let mask: Vec<f64> = (0..ta.len())
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let out = ta.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let t = Tensor::new(ta.shape(), out)?;
        self.push(Op::Dropout(a, mask), t, "dropout")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let s = self.value(a).data().iter().sum();
        self.push(Op::Sum(a), Tensor::scalar(s), "sum")
    }

    pub fn mean(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let ta = self.value(a);
        if ta.is_empty() {
            return Err(AutodiffError::EmptyInput("mean"));
        }
        let s = ta.data().iter().sum::<f64>() / ta.len() as f64;
        self.push(Op::Mean(a), Tensor::scalar(s), "mean")
    }

    /// Sum of scalar nodes.
    pub fn add_all(&mut self, terms: &[Var]) -> Result<Var, AutodiffError> {
        let row = self.concat(terms, Axis::Cols)?;
        self.sum(row)
    }

    /// Reverse pass from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, AutodiffError> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(AutodiffError::NonScalarLoss(lt.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = BTreeMap::new();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = self.value(Var(idx));
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    out.insert(*id, g);
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let ([m, k], [_, n]) = (ta.shape(), tb.shape());
                    let (da, db) = (ta.data(), tb.data());
                    // dA = G Bᵀ
                    let ga = slot(&mut grads, *a, m * k);
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let brow = &db[p * n..(p + 1) * n];
                            ga[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                    // dB = Aᵀ G
                    let gb = slot(&mut grads, *b, k * n);
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let x = da[i * k + p];
                            if x == 0.0 {
                                continue;
                            }
                            for (o, &gv) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *o += x * gv;
                            }
                        }
                    }
                }
                Op::MatMulNt(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let ([m, k], [n, _]) = (ta.shape(), tb.shape());
                    // dA = G B
                    let ga = slot(&mut grads, *a, m * k);
                    for i in 0..m {
                        for j in 0..n {
                            let gv = g[i * n + j];
                            if gv == 0.0 {
                                continue;
                            }
                            for (o, &bv) in ga[i * k..(i + 1) * k].iter_mut().zip(tb.row_slice(j)) {
                                *o += gv * bv;
                            }
                        }
                    }
                    // dB = Gᵀ A
                    let gb = slot(&mut grads, *b, n * k);
                    for i in 0..m {
                        for j in 0..n {
                            let gv = g[i * n + j];
                            if gv == 0.0 {
                                continue;
                            }
                            for (o, &av) in gb[j * k..(j + 1) * k].iter_mut().zip(ta.row_slice(i)) {
                                *o += gv * av;
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    add_into(slot(&mut grads, *a, g.len()), &g);
                    add_into(slot(&mut grads, *b, g.len()), &g);
                }
                Op::Sub(a, b) => {
                    add_into(slot(&mut grads, *a, g.len()), &g);
                    let gb = slot(&mut grads, *b, g.len());
                    for (o, x) in gb.iter_mut().zip(&g) {
                        *o -= x;
                    }
                }
                Op::AddRow(a, row) => {
                    add_into(slot(&mut grads, *a, g.len()), &g);
                    let n = self.value(*row).cols();
                    let gr = slot(&mut grads, *row, n);
                    for (i, x) in g.iter().enumerate() {
                        gr[i % n] += x;
                    }
                }
                Op::Mul(a, b) => {
                    let (da, db) = (self.value(*a).data(), self.value(*b).data());
                    let ga = slot(&mut grads, *a, g.len());
                    for ((o, x), bv) in ga.iter_mut().zip(&g).zip(db) {
                        *o += x * bv;
                    }
                    let gb = slot(&mut grads, *b, g.len());
                    for ((o, x), av) in gb.iter_mut().zip(&g).zip(da) {
                        *o += x * av;
                    }
                }
                Op::Scale(a, k) => {
                    let ga = slot(&mut grads, *a, g.len());
                    for (o, x) in ga.iter_mut().zip(&g) {
                        *o += x * k;
                    }
                }
                Op::Concat(parts, axis) => {
                    let cols = y.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let [pr, pc] = self.shape(p);
                        let gp = slot(&mut grads, p, pr * pc);
                        match axis {
                            Axis::Rows => {
                                add_into(gp, &g[offset * cols..(offset + pr) * cols]);
                                offset += pr;
                            }
                            Axis::Cols => {
                                for r in 0..pr {
                                    add_into(
                                        &mut gp[r * pc..(r + 1) * pc],
                                        &g[r * cols + offset..r * cols + offset + pc],
                                    );
                                }
                                offset += pc;
                            }
                        }
                    }
                }
                Op::SliceCols(a, start) => {
                    let [r, c] = self.shape(*a);
                    let len = y.cols();
                    let ga = slot(&mut grads, *a, r * c);
                    for row in 0..r {
                        add_into(
                            &mut ga[row * c + start..row * c + start + len],
                            &g[row * len..(row + 1) * len],
                        );
                    }
                }
                Op::Transpose(a) => {
                    let gt = transpose(&Tensor::new(y.shape(), g).expect("grad matches value"));
                    add_into(slot(&mut grads, *a, gt.len()), gt.data());
                }
                Op::Tanh(a) => {
                    let ga = slot(&mut grads, *a, g.len());
                    for ((o, x), yv) in ga.iter_mut().zip(&g).zip(y.data()) {
                        *o += x * (1.0 - yv * yv);
                    }
                }
                Op::Sigmoid(a) => {
                    let ga = slot(&mut grads, *a, g.len());
                    for ((o, x), yv) in ga.iter_mut().zip(&g).zip(y.data()) {
                        *o += x * yv * (1.0 - yv);
                    }
                }
                Op::LogSigmoid(a) => {
                    let da = self.value(*a).data();
                    let ga = slot(&mut grads, *a, g.len());
                    for ((o, x), av) in ga.iter_mut().zip(&g).zip(da) {
                        *o += x * sigmoid(-av);
                    }
                }
                Op::Exp(a) => {
                    let ga = slot(&mut grads, *a, g.len());
                    for ((o, x), yv) in ga.iter_mut().zip(&g).zip(y.data()) {
                        *o += x * yv;
                    }
                }
                Op::Log(a) => {
                    let da = self.value(*a).data();
                    let ga = slot(&mut grads, *a, g.len());
                    for ((o, x), av) in ga.iter_mut().zip(&g).zip(da) {
                        if *av > LOG_EPS {
                            *o += x / av;
                        }
                    }
                }
                Op::Softmax(a) => {
                    let c = y.cols();
                    let ga = slot(&mut grads, *a, g.len());
                    for r in 0..y.rows() {
                        let yr = y.row_slice(r);
                        let gr = &g[r * c..(r + 1) * c];
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            ga[r * c + j] += yr[j] * (gr[j] - dot);
                        }
                    }
                }
                Op::LogSoftmax(a) => {
                    let c = y.cols();
                    let ga = slot(&mut grads, *a, g.len());
                    for r in 0..y.rows() {
                        let yr = y.row_slice(r);
                        let gr = &g[r * c..(r + 1) * c];
                        let total: f64 = gr.iter().sum();
                        for j in 0..c {
                            ga[r * c + j] += gr[j] - yr[j].exp() * total;
                        }
                    }
                }
                Op::Embedding(table, index) => {
                    let [r, c] = self.shape(*table);
                    let gt = slot(&mut grads, *table, r * c);
                    add_into(&mut gt[index * c..(index + 1) * c], &g);
                }
                Op::Pick(a, index) => {
                    let n = self.value(*a).len();
                    slot(&mut grads, *a, n)[*index] += g[0];
                }
                Op::LogSumExpPick(a, indices) => {
                    let da = self.value(*a).data();
                    let lse = y.item();
                    let ga = slot(&mut grads, *a, da.len());
                    for &i in indices {
                        ga[i] += g[0] * (da[i] - lse).exp();
                    }
                }
                Op::Dropout(a, mask) => {
                    let ga = slot(&mut grads, *a, g.len());
                    for ((o, x), m) in ga.iter_mut().zip(&g).zip(mask) {
                        *o += x * m;
                    }
                }
                Op::Sum(a) => {
                    let n = self.value(*a).len();
                    let ga = slot(&mut grads, *a, n);
                    ga.iter_mut().for_each(|o| *o += g[0]);
                }
                Op::Mean(a) => {
                    let n = self.value(*a).len();
                    let ga = slot(&mut grads, *a, n);
                    let share = g[0] / n as f64;
                    ga.iter_mut().for_each(|o| *o += share);
                }
            }
        }
        for g in out.values() {
            if g.iter().any(|x| !x.is_finite()) {
                return Err(AutodiffError::NonFiniteValue("backward"));
            }
        }
        Ok(Gradients { params: out })
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
