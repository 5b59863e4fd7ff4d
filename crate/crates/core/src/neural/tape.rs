//! Reverse-mode differentiation over matrix-valued nodes.
//!
//! Every operation appends a node holding its value and enough context to
//! push gradients back to its inputs. Parameters enter as borrowed leaves so
//! inference does not copy weights.

use std::borrow::Cow;
use std::rc::Rc;

use super::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    Param(usize),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Min(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    LeakyRelu(Var, f64),
    Exp(Var),
    Square(Var),
    Clamp(Var, f64, f64),
    LayerNorm(Var, Vec<f64>),
    Gather(Var, Rc<[usize]>),
    ConcatCols(Vec<Var>),
    HeadDot {
        z: Var,
        a: Var,
        heads: usize,
    },
    SegmentSoftmax(Var, Rc<[usize]>, usize),
    Aggregate {
        alpha: Var,
        v: Var,
        src: Rc<[usize]>,
        dst: Rc<[usize]>,
        heads: usize,
    },
    SegmentMean(Var, Rc<[usize]>, usize),
    SegmentMax(Var, Vec<usize>),
    MaskedLogSoftmax(Var, Rc<[usize]>, Rc<[bool]>),
    MaskedEntropy(Var, Rc<[usize]>, Rc<[bool]>),
    WeightedSum(Var, Rc<[f64]>),
    Sum(Var),
}

struct Node<'a> {
    value: Cow<'a, Matrix>,
    op: Op,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    fn push(&mut self, value: Cow<'a, Matrix>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Input with no gradient of interest.
    pub fn constant(&mut self, m: Matrix) -> Var {
        self.push(Cow::Owned(m), Op::Leaf)
    }

    /// Trainable parameter number `index`, borrowed.
    pub fn param(&mut self, m: &'a Matrix, index: usize) -> Var {
        self.push(Cow::Borrowed(m), Op::Param(index))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(Cow::Owned(v), Op::MatMul(a, b))
    }

    fn zip(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape(), "elementwise shapes");
        let data = x.data.iter().zip(&y.data).map(|(&p, &q)| f(p, q)).collect();
        let m = Matrix::from_vec(x.rows, x.cols, data);
        self.push(Cow::Owned(m), op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn min(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, f64::min, Op::Min(a, b))
    }

    fn row_op(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (x, r) = (self.value(a), self.value(b));
        assert_eq!((r.rows, r.cols), (1, x.cols), "row broadcast shapes");
        let mut m = x.clone();
        for i in 0..m.rows {
            for (v, &w) in m.row_mut(i).iter_mut().zip(&r.data) {
                *v = f(*v, w);
            }
        }
        self.push(Cow::Owned(m), op)
    }

    /// `a + b` with the `1 x m` row `b` broadcast over rows.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        self.row_op(a, b, |x, y| x + y, Op::AddRow(a, b))
    }

    pub fn mul_row(&mut self, a: Var, b: Var) -> Var {
        self.row_op(a, b, |x, y| x * y, Op::MulRow(a, b))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let m = self.value(a).map(f);
        self.push(Cow::Owned(m), op)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, |x| c * x, Op::Scale(a, c))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        self.unary(a, |x| if x > 0.0 { x } else { slope * x }, Op::LeakyRelu(a, slope))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, f64::exp, Op::Exp(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.unary(a, |x| x.clamp(lo, hi), Op::Clamp(a, lo, hi))
    }

    /// Per-row standardization (population variance), no affine part.
    pub fn layer_norm(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut out = x.clone();
        let mut inv_std = Vec::with_capacity(x.rows);
        for i in 0..x.rows {
            let row = out.row_mut(i);
            let d = row.len() as f64;
            let mean = row.iter().sum::<f64>() / d;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
            let s = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mean) * s;
            }
            inv_std.push(s);
        }
        self.push(Cow::Owned(out), Op::LayerNorm(a, inv_std))
    }

    /// Rows of `a` selected by `index`.
    pub fn gather(&mut self, a: Var, index: Rc<[usize]>) -> Var {
        let x = self.value(a);
        let mut out = Matrix::zeros(index.len(), x.cols);
        for (r, &i) in index.iter().enumerate() {
            out.row_mut(r).copy_from_slice(x.row(i));
        }
        self.push(Cow::Owned(out), Op::Gather(a, index))
    }

    pub fn concat_cols(&mut self, parts: Vec<Var>) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for &p in &parts {
            let x = self.value(p);
            assert_eq!(x.rows, rows, "concat row counts");
            for i in 0..rows {
                out.row_mut(i)[offset..offset + x.cols].copy_from_slice(x.row(i));
            }
            offset += x.cols;
        }
        self.push(Cow::Owned(out), Op::ConcatCols(parts))
    }

    /// Per-head dot products: `z` is `E x (heads * C)`, `a` is `1 x (heads * C)`,
    /// result `E x heads`.
    pub fn head_dot(&mut self, z: Var, a: Var, heads: usize) -> Var {
        let (zm, am) = (self.value(z), self.value(a));
        assert_eq!(am.cols, zm.cols);
        let c = zm.cols / heads;
        let mut out = Matrix::zeros(zm.rows, heads);
        for e in 0..zm.rows {
            let row = zm.row(e);
            for h in 0..heads {
                out.data[e * heads + h] = (0..c).map(|k| row[h * c + k] * am.data[h * c + k]).sum();
            }
        }
        self.push(Cow::Owned(out), Op::HeadDot { z, a, heads })
    }

    /// Softmax of each column over the rows sharing a segment id.
    pub fn segment_softmax(&mut self, s: Var, segment: Rc<[usize]>, count: usize) -> Var {
        let x = self.value(s);
        let cols = x.cols;
        let mut max = vec![f64::NEG_INFINITY; count * cols];
        for (r, &g) in segment.iter().enumerate() {
            for c in 0..cols {
                max[g * cols + c] = max[g * cols + c].max(x.get(r, c));
            }
        }
        let mut out = Matrix::zeros(x.rows, cols);
        let mut total = vec![0.0; count * cols];
        for (r, &g) in segment.iter().enumerate() {
            for c in 0..cols {
                let v = (x.get(r, c) - max[g * cols + c]).exp();
                out.data[r * cols + c] = v;
                total[g * cols + c] += v;
            }
        }
        for (r, &g) in segment.iter().enumerate() {
            for c in 0..cols {
                out.data[r * cols + c] /= total[g * cols + c];
            }
        }
        self.push(Cow::Owned(out), Op::SegmentSoftmax(s, segment, count))
    }

    /// Attention-weighted messages averaged over heads:
    /// `out[dst_e] += mean_h alpha[e, h] * v[src_e, head h]`, shape `n x C`.
    pub fn aggregate(&mut self, alpha: Var, v: Var, src: Rc<[usize]>, dst: Rc<[usize]>, n: usize, heads: usize) -> Var {
        let (am, vm) = (self.value(alpha), self.value(v));
        let c = vm.cols / heads;
        let inv = 1.0 / heads as f64;
        let mut out = Matrix::zeros(n, c);
        for e in 0..src.len() {
            let vs = vm.row(src[e]);
            let o = &mut out.data[dst[e] * c..(dst[e] + 1) * c];
            for h in 0..heads {
                let w = am.data[e * heads + h] * inv;
                for k in 0..c {
                    o[k] += w * vs[h * c + k];
                }
            }
        }
        self.push(
            Cow::Owned(out),
            Op::Aggregate {
                alpha,
                v,
                src,
                dst,
                heads,
            },
        )
    }

    pub fn segment_mean(&mut self, x: Var, segment: Rc<[usize]>, count: usize) -> Var {
        let m = self.value(x);
        let mut out = Matrix::zeros(count, m.cols);
        let mut sizes = vec![0usize; count];
        for (r, &g) in segment.iter().enumerate() {
            sizes[g] += 1;
            for (o, v) in out.row_mut(g).iter_mut().zip(m.row(r)) {
                *o += v;
            }
        }
        for g in 0..count {
            let s = sizes[g].max(1) as f64;
            for o in out.row_mut(g) {
                *o /= s;
            }
        }
        self.push(Cow::Owned(out), Op::SegmentMean(x, segment, count))
    }

    pub fn segment_max(&mut self, x: Var, segment: Rc<[usize]>, count: usize) -> Var {
        let m = self.value(x);
        let mut out = Matrix::filled(count, m.cols, f64::NEG_INFINITY);
        let mut arg = vec![usize::MAX; count * m.cols];
        for (r, &g) in segment.iter().enumerate() {
            for c in 0..m.cols {
                if m.get(r, c) > out.get(g, c) {
                    out.data[g * m.cols + c] = m.get(r, c);
                    arg[g * m.cols + c] = r;
                }
            }
        }
        for v in &mut out.data {
            if *v == f64::NEG_INFINITY {
                *v = 0.0;
            }
        }
        self.push(Cow::Owned(out), Op::SegmentMax(x, arg))
    }

    /// Column vector of log-probabilities: softmax over the unmasked rows of
    /// each segment; masked rows hold 0 and receive no gradient.
    pub fn masked_log_softmax(&mut self, x: Var, segment: Rc<[usize]>, mask: Rc<[bool]>, count: usize) -> Var {
        let m = self.value(x);
        assert_eq!(m.cols, 1);
        let mut max = vec![f64::NEG_INFINITY; count];
        for (r, &g) in segment.iter().enumerate() {
            if mask[r] {
                max[g] = max[g].max(m.data[r]);
            }
        }
        let mut total = vec![0.0; count];
        for (r, &g) in segment.iter().enumerate() {
            if mask[r] {
                total[g] += (m.data[r] - max[g]).exp();
            }
        }
        let data = segment
            .iter()
            .enumerate()
            .map(|(r, &g)| if mask[r] { m.data[r] - max[g] - total[g].ln() } else { 0.0 })
            .collect();
        let out = Matrix::column(data);
        self.push(Cow::Owned(out), Op::MaskedLogSoftmax(x, segment, mask))
    }

    /// Entropy per segment from a masked log-probability column.
    pub fn masked_entropy(&mut self, logp: Var, segment: Rc<[usize]>, mask: Rc<[bool]>, count: usize) -> Var {
        let m = self.value(logp);
        let mut out = Matrix::zeros(count, 1);
        for (r, &g) in segment.iter().enumerate() {
            if mask[r] {
                out.data[g] -= m.data[r].exp() * m.data[r];
            }
        }
        self.push(Cow::Owned(out), Op::MaskedEntropy(logp, segment, mask))
    }

    /// `sum_i w_i x_i` over all entries, as a `1 x 1`.
    pub fn weighted_sum(&mut self, x: Var, w: Rc<[f64]>) -> Var {
        let m = self.value(x);
        assert_eq!(m.len(), w.len());
        let s = m.data.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
        self.push(Cow::Owned(Matrix::scalar(s)), Op::WeightedSum(x, w))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data.iter().sum();
        self.push(Cow::Owned(Matrix::scalar(s)), Op::Sum(x))
    }

    /// Gradients of the `1 x 1` node `output` with respect to every node.
    pub fn backward(&self, output: Var) -> Gradients {
        assert_eq!(self.value(output).shape(), (1, 1), "backward from a scalar");
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Matrix::scalar(1.0));
        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.backprop(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Gradients { grads }
    }

    fn backprop(&self, i: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let node = &self.nodes[i];
        let val = |v: Var| -> &Matrix { &self.nodes[v.0].value };
        let mut acc = |v: Var, d: Matrix| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&d),
            slot @ None => *slot = Some(d),
        };
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                acc(*a, g.matmul_nt(val(*b)));
                acc(*b, val(*a).matmul_tn(g));
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (x, y) = (val(*a), val(*b));
                acc(*a, zip_with(g, y, |p, q| p * q));
                acc(*b, zip_with(g, x, |p, q| p * q));
            }
            Op::Min(a, b) => {
                let (x, y) = (val(*a), val(*b));
                let mut da = g.clone();
                let mut db = g.clone();
                for k in 0..g.len() {
                    if x.data[k] <= y.data[k] {
                        db.data[k] = 0.0;
                    } else {
                        da.data[k] = 0.0;
                    }
                }
                acc(*a, da);
                acc(*b, db);
            }
            Op::AddRow(a, b) => {
                acc(*a, g.clone());
                acc(*b, column_sums(g));
            }
            Op::MulRow(a, b) => {
                let (x, r) = (val(*a), val(*b));
                let mut da = g.clone();
                let mut db = Matrix::zeros(1, g.cols);
                for i in 0..g.rows {
                    for c in 0..g.cols {
                        da.data[i * g.cols + c] *= r.data[c];
                        db.data[c] += g.get(i, c) * x.get(i, c);
                    }
                }
                acc(*a, da);
                acc(*b, db);
            }
            Op::Scale(a, c) => acc(*a, g.map(|x| c * x)),
            Op::Tanh(a) => acc(*a, zip_with(g, &node.value, |p, y| p * (1.0 - y * y))),
            Op::LeakyRelu(a, slope) => acc(*a, zip_with(g, val(*a), |p, x| if x > 0.0 { p } else { slope * p })),
            Op::Exp(a) => acc(*a, zip_with(g, &node.value, |p, y| p * y)),
            Op::Square(a) => acc(*a, zip_with(g, val(*a), |p, x| 2.0 * x * p)),
            Op::Clamp(a, lo, hi) => acc(*a, zip_with(g, val(*a), |p, x| if x > *lo && x < *hi { p } else { 0.0 })),
            Op::LayerNorm(a, inv_std) => {
                let y = &node.value;
                let mut dx = Matrix::zeros(g.rows, g.cols);
                let d = g.cols as f64;
                for r in 0..g.rows {
                    let (gr, yr) = (g.row(r), y.row(r));
                    let sg: f64 = gr.iter().sum();
                    let sgy: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                    for c in 0..g.cols {
                        dx.data[r * g.cols + c] = inv_std[r] / d * (d * gr[c] - sg - yr[c] * sgy);
                    }
                }
                acc(*a, dx);
            }
            Op::Gather(a, index) => {
                let x = val(*a);
                let mut dx = Matrix::zeros(x.rows, x.cols);
                for (r, &src) in index.iter().enumerate() {
                    for (o, v) in dx.row_mut(src).iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
                acc(*a, dx);
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let cols = val(p).cols;
                    let mut dp = Matrix::zeros(g.rows, cols);
                    for r in 0..g.rows {
                        dp.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + cols]);
                    }
                    offset += cols;
                    acc(p, dp);
                }
            }
            Op::HeadDot { z, a, heads } => {
                let (zm, am) = (val(*z), val(*a));
                let c = zm.cols / heads;
                let mut dz = Matrix::zeros(zm.rows, zm.cols);
                let mut da = Matrix::zeros(1, am.cols);
                for e in 0..zm.rows {
                    for h in 0..*heads {
                        let ge = g.data[e * heads + h];
                        for k in 0..c {
                            let j = h * c + k;
                            dz.data[e * zm.cols + j] = ge * am.data[j];
                            da.data[j] += ge * zm.data[e * zm.cols + j];
                        }
                    }
                }
                acc(*z, dz);
                acc(*a, da);
            }
            Op::SegmentSoftmax(s, segment, count) => {
                let y = &node.value;
                let cols = y.cols;
                let mut dot = vec![0.0; count * cols];
                for (r, &seg) in segment.iter().enumerate() {
                    for c in 0..cols {
                        dot[seg * cols + c] += g.get(r, c) * y.get(r, c);
                    }
                }
                let mut ds = Matrix::zeros(y.rows, cols);
                for (r, &seg) in segment.iter().enumerate() {
                    for c in 0..cols {
                        ds.data[r * cols + c] = y.get(r, c) * (g.get(r, c) - dot[seg * cols + c]);
                    }
                }
                acc(*s, ds);
            }
            Op::Aggregate {
                alpha,
                v,
                src,
                dst,
                heads,
            } => {
                let (am, vm) = (val(*alpha), val(*v));
                let c = vm.cols / heads;
                let inv = 1.0 / *heads as f64;
                let mut dalpha = Matrix::zeros(am.rows, am.cols);
                let mut dv = Matrix::zeros(vm.rows, vm.cols);
                for e in 0..src.len() {
                    let gd = g.row(dst[e]);
                    let vs = vm.row(src[e]);
                    for h in 0..*heads {
                        let w = am.data[e * heads + h] * inv;
                        let mut s = 0.0;
                        let dvs = &mut dv.data[src[e] * vm.cols + h * c..src[e] * vm.cols + (h + 1) * c];
                        for k in 0..c {
                            s += gd[k] * vs[h * c + k];
                            dvs[k] += w * gd[k];
                        }
                        dalpha.data[e * heads + h] = s * inv;
                    }
                }
                acc(*alpha, dalpha);
                acc(*v, dv);
            }
            Op::SegmentMean(x, segment, count) => {
                let xm = val(*x);
                let mut sizes = vec![0usize; *count];
                for &s in segment.iter() {
                    sizes[s] += 1;
                }
                let mut dx = Matrix::zeros(xm.rows, xm.cols);
                for (r, &s) in segment.iter().enumerate() {
                    let k = sizes[s] as f64;
                    for (o, v) in dx.row_mut(r).iter_mut().zip(g.row(s)) {
                        *o = v / k;
                    }
                }
                acc(*x, dx);
            }
            Op::SegmentMax(x, arg) => {
                let xm = val(*x);
                let mut dx = Matrix::zeros(xm.rows, xm.cols);
                for (k, &r) in arg.iter().enumerate() {
                    if r != usize::MAX {
                        dx.data[r * xm.cols + k % xm.cols] += g.data[k];
                    }
                }
                acc(*x, dx);
            }
            Op::MaskedLogSoftmax(x, segment, mask) => {
                let y = &node.value;
                let count = segment.iter().copied().max().map_or(0, |m| m + 1);
                let mut gsum = vec![0.0; count];
                for (r, &s) in segment.iter().enumerate() {
                    if mask[r] {
                        gsum[s] += g.data[r];
                    }
                }
                let data = segment
                    .iter()
                    .enumerate()
                    .map(|(r, &s)| if mask[r] { g.data[r] - y.data[r].exp() * gsum[s] } else { 0.0 })
                    .collect();
                acc(*x, Matrix::column(data));
            }
            Op::MaskedEntropy(logp, segment, mask) => {
                let lp = val(*logp);
                let data = segment
                    .iter()
                    .enumerate()
                    .map(|(r, &s)| {
                        if mask[r] {
                            -g.data[s] * lp.data[r].exp() * (lp.data[r] + 1.0)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                acc(*logp, Matrix::column(data));
            }
            Op::WeightedSum(x, w) => {
                let xm = val(*x);
                let g0 = g.data[0];
                acc(*x, Matrix::from_vec(xm.rows, xm.cols, w.iter().map(|wi| g0 * wi).collect()));
            }
            Op::Sum(x) => {
                let xm = val(*x);
                acc(*x, Matrix::filled(xm.rows, xm.cols, g.data[0]));
            }
        }
    }

    /// Gradient per parameter index (zeros for parameters not on the tape).
    pub fn param_grads(&self, grads: &Gradients, shapes: &[(usize, usize)]) -> Vec<Matrix> {
        let mut out: Vec<Matrix> = shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect();
        for (i, node) in self.nodes.iter().enumerate() {
            if let (Op::Param(p), Some(g)) = (&node.op, &grads.grads[i]) {
                out[*p].add_assign(g);
            }
        }
        out
    }
}

fn zip_with(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    Matrix::from_vec(a.rows, a.cols, a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect())
}

fn column_sums(g: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(1, g.cols);
    for r in 0..g.rows {
        for (o, v) in out.data.iter_mut().zip(g.row(r)) {
            *o += v;
        }
    }
    out
}

pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads[v.0].as_ref()
    }
}
