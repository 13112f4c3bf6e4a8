//! Define-by-run tape. Every op records its inputs; [`Tape::backward`]
//! walks the tape in reverse and accumulates gradients.

use super::tensor::{gemm_acc, matmul, ParamStore, Tensor};
use super::{NeuralError, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Param,
    MatMul { a: Var, b: Var, ta: bool, tb: bool },
    Add(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, T),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<T>, rstd: Vec<T> },
    Gelu(Var),
    Sigmoid(Var),
    LogSigmoid(Var),
    Softmax { x: Var, mask: Option<Var> },
    Embedding { table: Var, ids: Vec<usize> },
    CrossEntropy { logits: Var, targets: Vec<(usize, usize)>, probs: Vec<Vec<T>> },
    GatherRows { x: Var, rows: Vec<usize> },
    SliceCols { x: Var, start: usize },
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    MeanRows { x: Var, rows: Vec<usize> },
    Sum(Var),
    SumAbs(Var),
    Reshape(Var),
    ScatterBlock { block: Var, r0: usize, c0: usize },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Gradients indexed by tape variable.
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
    params: Vec<(usize, Var)>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads[v.0].as_ref()
    }

    /// Adds every parameter gradient into `acc` (indexed by parameter id).
    pub fn accumulate_params(&self, acc: &mut [Tensor<T>]) {
        for &(pid, v) in &self.params {
            if let Some(g) = &self.grads[v.0] {
                acc[pid].add_assign(g);
            }
        }
    }
}

#[derive(Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    params: Vec<(usize, Var)>,
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn log_sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn shape_err(op: &'static str, a: [usize; 2], b: [usize; 2]) -> NeuralError {
    NeuralError::Shape { op, left: a, right: b }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), params: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        self.nodes[v.0].value.shape()
    }

    /// Constant or differentiable input.
    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf)
    }

    /// Copies parameter `id` onto the tape; its gradient is reported by
    /// [`Gradients::accumulate_params`].
    pub fn param(&mut self, store: &ParamStore<T>, id: usize) -> Var {
        let v = self.push(store.tensor(id).clone(), Op::Param);
        self.params.push((id, v));
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_t(a, false, b, false)
    }

    /// `op(a) @ op(b)` where `op` optionally transposes.
    pub fn matmul_t(&mut self, a: Var, ta: bool, b: Var, tb: bool) -> Result<Var> {
        let v = matmul(self.value(a), ta, self.value(b), tb)?;
        Ok(self.push(v, Op::MatMul { a, b, ta, tb }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err("add", x.shape(), y.shape()));
        }
        let data = x.data.iter().zip(&y.data).map(|(&p, &q)| p + q).collect();
        let v = Tensor { rows: x.rows, cols: x.cols, data };
        Ok(self.push(v, Op::Add(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err("mul", x.shape(), y.shape()));
        }
        let data = x.data.iter().zip(&y.data).map(|(&p, &q)| p * q).collect();
        let v = Tensor { rows: x.rows, cols: x.cols, data };
        Ok(self.push(v, Op::Mul(a, b)))
    }

    /// Adds a `1 x n` row to every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (xv, rv) = (self.value(x), self.value(row));
        if rv.rows != 1 || rv.cols != xv.cols {
            return Err(shape_err("add_row", xv.shape(), rv.shape()));
        }
        let mut v = xv.clone();
        for r in 0..v.rows {
            for (o, &b) in v.row_mut(r).iter_mut().zip(&rv.data) {
                *o = *o + b;
            }
        }
        Ok(self.push(v, Op::AddRow(x, row)))
    }

    pub fn scale(&mut self, x: Var, s: T) -> Var {
        let v = self.value(x).map(|a| a * s);
        self.push(v, Op::Scale(x, s))
    }

    /// Row-wise layer normalization with affine `1 x n` gamma and beta.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let xv = self.value(x);
        let (gv, bv) = (self.value(gamma), self.value(beta));
        if gv.shape() != [1, xv.cols] || bv.shape() != [1, xv.cols] {
            return Err(shape_err("layer_norm", xv.shape(), gv.shape()));
        }
        let n = T::c(xv.cols as f64);
        let mut out = Tensor::zeros(xv.rows, xv.cols);
        let mut xhat = vec![T::zero(); xv.len()];
        let mut rstd = vec![T::zero(); xv.rows];
        for r in 0..xv.rows {
            let row = xv.row(r);
            let mean = row.iter().fold(T::zero(), |a, &b| a + b) / n;
            let var = row.iter().fold(T::zero(), |a, &b| a + (b - mean) * (b - mean)) / n;
            let rs = T::one() / (var + T::c(eps)).sqrt();
            rstd[r] = rs;
            for c in 0..xv.cols {
                let h = (row[c] - mean) * rs;
                xhat[r * xv.cols + c] = h;
                out.data[r * xv.cols + c] = h * gv.data[c] + bv.data[c];
            }
        }
        Ok(self.push(out, Op::LayerNorm { x, gamma, beta, xhat, rstd }))
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, x: Var) -> Var {
        let k = T::c((2.0 / std::f64::consts::PI).sqrt());
        let c = T::c(0.044715);
        let half = T::c(0.5);
        let v = self.value(x).map(|a| half * a * (T::one() + (k * (a + c * a * a * a)).tanh()));
        self.push(v, Op::Gelu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.value(x).map(sigmoid);
        self.push(v, Op::Sigmoid(x))
    }

    pub fn log_sigmoid(&mut self, x: Var) -> Var {
        let v = self.value(x).map(log_sigmoid);
        self.push(v, Op::LogSigmoid(x))
    }

    /// Row-wise softmax of `x + mask`. Entries where the mask is `-inf`
    /// get probability exactly 0; a fully masked row yields all zeros.
    pub fn softmax_masked(&mut self, x: Var, mask: Option<Var>) -> Result<Var> {
        let xv = self.value(x);
        let mut z = xv.clone();
        if let Some(m) = mask {
            let mv = self.value(m);
            if mv.shape() != xv.shape() {
                return Err(shape_err("softmax_masked", xv.shape(), mv.shape()));
            }
            for (a, &b) in z.data.iter_mut().zip(&mv.data) {
                *a = *a + b;
            }
        }
        for r in 0..z.rows {
            let row = z.row_mut(r);
            let max = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            if max == T::neg_infinity() {
                row.iter_mut().for_each(|v| *v = T::zero());
                continue;
            }
            let mut sum = T::zero();
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum = sum + *v;
            }
            for v in row.iter_mut() {
                *v = *v / sum;
            }
        }
        Ok(self.push(z, Op::Softmax { x, mask }))
    }

    /// Rows of `table` selected by `ids`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let t = self.value(table);
        let mut out = Tensor::zeros(ids.len(), t.cols);
        for (r, &id) in ids.iter().enumerate() {
            if id >= t.rows {
                return Err(NeuralError::Index { op: "embedding", index: id, len: t.rows });
            }
            out.row_mut(r).copy_from_slice(t.row(id));
        }
        Ok(self.push(out, Op::Embedding { table, ids: ids.to_vec() }))
    }

    /// Summed negative log-likelihood over `(row, class)` pairs, log-sum-exp stabilized.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[(usize, usize)]) -> Result<Var> {
        let lv = self.value(logits);
        let mut loss = T::zero();
        let mut probs = Vec::with_capacity(targets.len());
        for &(r, cls) in targets {
            if r >= lv.rows {
                return Err(NeuralError::Index { op: "cross_entropy", index: r, len: lv.rows });
            }
            if cls >= lv.cols {
                return Err(NeuralError::Index { op: "cross_entropy", index: cls, len: lv.cols });
            }
            let row = lv.row(r);
            let max = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            let exps: Vec<T> = row.iter().map(|&v| (v - max).exp()).collect();
            let sum = exps.iter().fold(T::zero(), |a, &b| a + b);
            loss = loss + (max + sum.ln() - row[cls]);
            probs.push(exps.into_iter().map(|e| e / sum).collect());
        }
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy { logits, targets: targets.to_vec(), probs }))
    }

    pub fn gather_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let xv = self.value(x);
        let mut out = Tensor::zeros(rows.len(), xv.cols);
        for (i, &r) in rows.iter().enumerate() {
            if r >= xv.rows {
                return Err(NeuralError::Index { op: "gather_rows", index: r, len: xv.rows });
            }
            out.row_mut(i).copy_from_slice(xv.row(r));
        }
        Ok(self.push(out, Op::GatherRows { x, rows: rows.to_vec() }))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let rows: Vec<usize> = (start..start + len).collect();
        self.gather_rows(x, &rows)
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.value(x);
        if start + len > xv.cols {
            return Err(NeuralError::Index { op: "slice_cols", index: start + len, len: xv.cols });
        }
        let mut out = Tensor::zeros(xv.rows, len);
        for r in 0..xv.rows {
            out.row_mut(r).copy_from_slice(&xv.row(r)[start..start + len]);
        }
        Ok(self.push(out, Op::SliceCols { x, start }))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            if v.cols != cols {
                return Err(shape_err("concat_rows", [rows, cols], v.shape()));
            }
            data.extend_from_slice(&v.data);
            rows += v.rows;
        }
        Ok(self.push(Tensor { rows, cols, data }, Op::ConcatRows(parts.to_vec())))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.value(parts[0]).rows;
        let mut cols = 0;
        for &p in parts {
            let v = self.value(p);
            if v.rows != rows {
                return Err(shape_err("concat_cols", [rows, cols], v.shape()));
            }
            cols += v.cols;
        }
        let mut out = Tensor::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let v = &self.nodes[p.0].value;
            for r in 0..rows {
                out.data[r * cols + off..r * cols + off + v.cols].copy_from_slice(v.row(r));
            }
            off += v.cols;
        }
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    /// Mean of the selected rows as a `1 x n` row.
    pub fn mean_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let xv = self.value(x);
        let mut out = Tensor::zeros(1, xv.cols);
        if rows.is_empty() {
            return Ok(self.push(out, Op::MeanRows { x, rows: Vec::new() }));
        }
        let inv = T::one() / T::c(rows.len() as f64);
        for &r in rows {
            if r >= xv.rows {
                return Err(NeuralError::Index { op: "mean_rows", index: r, len: xv.rows });
            }
            for (o, &v) in out.data.iter_mut().zip(xv.row(r)) {
                *o = *o + v * inv;
            }
        }
        Ok(self.push(out, Op::MeanRows { x, rows: rows.to_vec() }))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data.iter().fold(T::zero(), |a, &b| a + b);
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// Sum of absolute values.
    pub fn sum_abs(&mut self, x: Var) -> Var {
        let s = self.value(x).data.iter().fold(T::zero(), |a, &b| a + b.abs());
        self.push(Tensor::scalar(s), Op::SumAbs(x))
    }

    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Result<Var> {
        let xv = self.value(x);
        if rows * cols != xv.len() {
            return Err(shape_err("reshape", xv.shape(), [rows, cols]));
        }
        let v = Tensor { rows, cols, data: xv.data.clone() };
        Ok(self.push(v, Op::Reshape(x)))
    }

    /// Copy of the constant `base` with `block` added at `(r0, c0)`;
    /// `-inf` entries of `base` stay `-inf` and pass no gradient.
    pub fn scatter_block(&mut self, base: &Tensor<T>, block: Var, r0: usize, c0: usize) -> Result<Var> {
        let bv = self.value(block);
        if r0 + bv.rows > base.rows || c0 + bv.cols > base.cols {
            return Err(shape_err("scatter_block", base.shape(), bv.shape()));
        }
        let mut out = base.clone();
        for r in 0..bv.rows {
            for c in 0..bv.cols {
                let o = &mut out.data[(r0 + r) * base.cols + c0 + c];
                if o.is_finite() {
                    *o = *o + bv.data[r * bv.cols + c];
                }
            }
        }
        Ok(self.push(out, Op::ScatterBlock { block, r0, c0 }))
    }

    /// Reverse pass from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let lv = self.value(loss);
        if lv.shape() != [1, 1] {
            return Err(shape_err("backward", lv.shape(), [1, 1]));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(T::one()));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads, params: self.params.clone() })
    }

    fn propagate(&self, i: usize, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let node = &self.nodes[i];
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul { a, b, ta, tb } => {
                let (av, bv) = (val(*a), val(*b));
                let ga = slot(grads, *a, av);
                if *ta {
                    gemm_acc(bv, *tb, g, true, ga, T::one());
                } else {
                    gemm_acc(g, false, bv, !*tb, ga, T::one());
                }
                let gb = slot(grads, *b, bv);
                if *tb {
                    gemm_acc(g, true, av, *ta, gb, T::one());
                } else {
                    gemm_acc(av, !*ta, g, false, gb, T::one());
                }
            }
            Op::Add(a, b) => {
                slot(grads, *a, val(*a)).add_assign(g);
                slot(grads, *b, val(*b)).add_assign(g);
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let ga = slot(grads, *a, av);
                for ((o, &d), &y) in ga.data.iter_mut().zip(&g.data).zip(&bv.data) {
                    *o = *o + d * y;
                }
                let gb = slot(grads, *b, bv);
                for ((o, &d), &x) in gb.data.iter_mut().zip(&g.data).zip(&av.data) {
                    *o = *o + d * x;
                }
            }
            Op::AddRow(x, row) => {
                slot(grads, *x, val(*x)).add_assign(g);
                let gr = slot(grads, *row, val(*row));
                for r in 0..g.rows {
                    for (o, &d) in gr.data.iter_mut().zip(g.row(r)) {
                        *o = *o + d;
                    }
                }
            }
            Op::Scale(x, s) => {
                let gx = slot(grads, *x, val(*x));
                for (o, &d) in gx.data.iter_mut().zip(&g.data) {
                    *o = *o + d * *s;
                }
            }
            Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
                let gv = val(*gamma);
                let (rows, cols) = (g.rows, g.cols);
                let n = T::c(cols as f64);
                {
                    let gg = slot(grads, *gamma, gv);
                    for r in 0..rows {
                        for c in 0..cols {
                            gg.data[c] = gg.data[c] + g.data[r * cols + c] * xhat[r * cols + c];
                        }
                    }
                }
                {
                    let gb = slot(grads, *beta, val(*beta));
                    for r in 0..rows {
                        for (o, &d) in gb.data.iter_mut().zip(g.row(r)) {
                            *o = *o + d;
                        }
                    }
                }
                let gx = slot(grads, *x, val(*x));
                let mut dxhat = vec![T::zero(); cols];
                for r in 0..rows {
                    let mut s1 = T::zero();
                    let mut s2 = T::zero();
                    for c in 0..cols {
                        let d = g.data[r * cols + c] * gv.data[c];
                        dxhat[c] = d;
                        s1 = s1 + d;
                        s2 = s2 + d * xhat[r * cols + c];
                    }
                    let k = rstd[r] / n;
                    for c in 0..cols {
                        let o = &mut gx.data[r * cols + c];
                        *o = *o + k * (n * dxhat[c] - s1 - xhat[r * cols + c] * s2);
                    }
                }
            }
            Op::Gelu(x) => {
                let xv = val(*x);
                let k = T::c((2.0 / std::f64::consts::PI).sqrt());
                let c = T::c(0.044715);
                let half = T::c(0.5);
                let three = T::c(3.0);
                let gx = slot(grads, *x, xv);
                for ((o, &d), &a) in gx.data.iter_mut().zip(&g.data).zip(&xv.data) {
                    let t = (k * (a + c * a * a * a)).tanh();
                    let dy = half * (T::one() + t) + half * a * (T::one() - t * t) * k * (T::one() + three * c * a * a);
                    *o = *o + d * dy;
                }
            }
            Op::Sigmoid(x) => {
                let y = &node.value;
                let gx = slot(grads, *x, val(*x));
                for ((o, &d), &s) in gx.data.iter_mut().zip(&g.data).zip(&y.data) {
                    *o = *o + d * s * (T::one() - s);
                }
            }
            Op::LogSigmoid(x) => {
                let xv = val(*x);
                let gx = slot(grads, *x, xv);
                for ((o, &d), &a) in gx.data.iter_mut().zip(&g.data).zip(&xv.data) {
                    *o = *o + d * sigmoid(-a);
                }
            }
            Op::Softmax { x, mask } => {
                let y = &node.value;
                let mut dz = Tensor::zeros(y.rows, y.cols);
                for r in 0..y.rows {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let dot = yr.iter().zip(gr).fold(T::zero(), |a, (&p, &q)| a + p * q);
                    for (c, o) in dz.row_mut(r).iter_mut().enumerate() {
                        *o = yr[c] * (gr[c] - dot);
                    }
                }
                slot(grads, *x, val(*x)).add_assign(&dz);
                if let Some(m) = mask {
                    slot(grads, *m, val(*m)).add_assign(&dz);
                }
            }
            Op::Embedding { table, ids } => {
                let gt = slot(grads, *table, val(*table));
                for (r, &id) in ids.iter().enumerate() {
                    for (o, &d) in gt.row_mut(id).iter_mut().zip(g.row(r)) {
                        *o = *o + d;
                    }
                }
            }
            Op::CrossEntropy { logits, targets, probs } => {
                let d = g.item();
                let gl = slot(grads, *logits, val(*logits));
                for (&(r, cls), p) in targets.iter().zip(probs) {
                    let row = gl.row_mut(r);
                    for (o, &pv) in row.iter_mut().zip(p) {
                        *o = *o + d * pv;
                    }
                    row[cls] = row[cls] - d;
                }
            }
            Op::GatherRows { x, rows } => {
                let gx = slot(grads, *x, val(*x));
                for (i, &r) in rows.iter().enumerate() {
                    for (o, &d) in gx.row_mut(r).iter_mut().zip(g.row(i)) {
                        *o = *o + d;
                    }
                }
            }
            Op::SliceCols { x, start } => {
                let gx = slot(grads, *x, val(*x));
                for r in 0..g.rows {
                    for (o, &d) in gx.row_mut(r)[*start..*start + g.cols].iter_mut().zip(g.row(r)) {
                        *o = *o + d;
                    }
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let pv = val(p);
                    let n = pv.len();
                    let gp = slot(grads, p, pv);
                    for (o, &d) in gp.data.iter_mut().zip(&g.data[off..off + n]) {
                        *o = *o + d;
                    }
                    off += n;
                }
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let pv = val(p);
                    let w = pv.cols;
                    let gp = slot(grads, p, pv);
                    for r in 0..g.rows {
                        for (o, &d) in gp.row_mut(r).iter_mut().zip(&g.row(r)[off..off + w]) {
                            *o = *o + d;
                        }
                    }
                    off += w;
                }
            }
            Op::MeanRows { x, rows } => {
                if rows.is_empty() {
                    return;
                }
                let inv = T::one() / T::c(rows.len() as f64);
                let gx = slot(grads, *x, val(*x));
                for &r in rows {
                    for (o, &d) in gx.row_mut(r).iter_mut().zip(&g.data) {
                        *o = *o + d * inv;
                    }
                }
            }
            Op::Sum(x) => {
                let d = g.item();
                let gx = slot(grads, *x, val(*x));
                gx.data.iter_mut().for_each(|o| *o = *o + d);
            }
            Op::SumAbs(x) => {
                let d = g.item();
                let xv = val(*x);
                let gx = slot(grads, *x, xv);
                for (o, &a) in gx.data.iter_mut().zip(&xv.data) {
                    let s = if a > T::zero() {
                        T::one()
                    } else if a < T::zero() {
                        -T::one()
                    } else {
                        T::zero()
                    };
                    *o = *o + d * s;
                }
            }
            Op::Reshape(x) => {
                let gx = slot(grads, *x, val(*x));
                for (o, &d) in gx.data.iter_mut().zip(&g.data) {
                    *o = *o + d;
                }
            }
            Op::ScatterBlock { block, r0, c0 } => {
                let out = &node.value;
                let bv = val(*block);
                let gb = slot(grads, *block, bv);
                for r in 0..bv.rows {
                    for c in 0..bv.cols {
                        let idx = (r0 + r) * out.cols + c0 + c;
                        if out.data[idx].is_finite() {
                            gb.data[r * bv.cols + c] = gb.data[r * bv.cols + c] + g.data[idx];
                        }
                    }
                }
            }
        }
    }
}

fn slot<'a, T: Scalar>(grads: &'a mut [Option<Tensor<T>>], v: Var, like: &Tensor<T>) -> &'a mut Tensor<T> {
    grads[v.0].get_or_insert_with(|| Tensor::zeros(like.rows, like.cols))
}
