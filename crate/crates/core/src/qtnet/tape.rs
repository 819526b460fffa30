//! Matrix-valued reverse-mode automatic differentiation.
//!
//! Every value on the tape is a 2-D `f64` array. Parameters enter as
//! leaves tagged with their index in the parameter set so that
//! [`Tape::backward`] can return gradients aligned with it.

use std::rc::Rc;

use ndarray::{s, Array2, Axis, Zip};

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf { param: Option<usize> },
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Silu { x: Var, sig: Array2<f64> },
    Tanh(Var),
    Sigmoid(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Array2<f64>, inv_std: Vec<f64> },
    Gather { x: Var, idx: Rc<Vec<usize>> },
    GatherSum(Vec<(Var, Option<Rc<Vec<usize>>>)>),
    Rows { x: Var, start: usize },
    ScatterSum { x: Var, idx: Rc<Vec<usize>> },
    Concat(Vec<Var>),
    Softmax(Var),
    Select { x: Var, col: usize },
    ScaleBy { x: Var, s: Var },
    WeightedSqErr { pred: Var, target: Rc<Array2<f64>>, weight: Rc<Array2<f64>> },
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn contiguous(a: &Array2<f64>) -> std::borrow::Cow<'_, [f64]> {
    match a.as_slice() {
        Some(sl) => std::borrow::Cow::Borrowed(sl),
        None => std::borrow::Cow::Owned(a.iter().copied().collect()),
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Elementwise `f(a, b)` for equal shapes.
fn zip_map(a: &Array2<f64>, b: &Array2<f64>, f: impl Fn(f64, f64) -> f64) -> Array2<f64> {
    assert_eq!(a.dim(), b.dim(), "elementwise shapes");
    match (a.as_slice(), b.as_slice()) {
        (Some(x), Some(y)) => {
            let v = x.iter().zip(y).map(|(&p, &q)| f(p, q)).collect();
            Array2::from_shape_vec(a.dim(), v).expect("same shape")
        }
        _ => Zip::from(a).and(b).map_collect(|&p, &q| f(p, q)),
    }
}

/// `out[idx[r]] += x[r]` into `n` rows.
fn scatter_rows(x: &Array2<f64>, idx: &[usize], n: usize) -> Array2<f64> {
    let m = x.ncols();
    let src = contiguous(x);
    let mut out = vec![0.0; n * m];
    for (row, &i) in src.chunks_exact(m.max(1)).zip(idx.iter()) {
        add_into(&mut out[i * m..(i + 1) * m], row);
    }
    Array2::from_shape_vec((n, m), out).expect("scatter shape")
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf { param: None })
    }

    pub fn param(&mut self, index: usize, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf { param: Some(index) })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// Adds a `1 × m` row to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Var {
        let mut v = self.value(a).as_standard_layout().into_owned();
        let b = contiguous(self.value(bias)).into_owned();
        assert_eq!(b.len(), v.ncols(), "bias width");
        let data = v.as_slice_mut().expect("standard layout");
        for row in data.chunks_exact_mut(b.len().max(1)) {
            add_into(row, &b);
        }
        self.push(v, Op::AddBias(a, bias))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = zip_map(self.value(a), self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = zip_map(self.value(a), self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let sig = self.value(a).mapv(sigmoid);
        let v = zip_map(self.value(a), &sig, |x, s| x * s);
        self.push(v, Op::Silu { x: a, sig })
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    /// Row-wise layer normalization with affine `1 × m` gamma and beta.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let xv = self.value(x);
        let m = xv.ncols() as f64;
        let mut xhat = xv.as_standard_layout().into_owned();
        let mut inv_std = Vec::with_capacity(xv.nrows());
        for mut row in xhat.rows_mut() {
            let mean = row.sum() / m;
            row.mapv_inplace(|v| v - mean);
            let var = row.iter().map(|v| v * v).sum::<f64>() / m;
            let is = 1.0 / (var + LN_EPS).sqrt();
            row.mapv_inplace(|v| v * is);
            inv_std.push(is);
        }
        let g = contiguous(self.value(gamma)).into_owned();
        let b = contiguous(self.value(beta)).into_owned();
        let mut out = xhat.clone();
        let data = out.as_slice_mut().expect("standard layout");
        for row in data.chunks_exact_mut(g.len().max(1)) {
            for ((v, gm), bt) in row.iter_mut().zip(&g).zip(&b) {
                *v = *v * gm + bt;
            }
        }
        self.push(out, Op::LayerNorm { x, gamma, beta, xhat, inv_std })
    }

    pub fn gather(&mut self, x: Var, idx: &Rc<Vec<usize>>) -> Var {
        let xv = self.value(x);
        let m = xv.ncols();
        let src = contiguous(xv);
        let mut out = vec![0.0; idx.len() * m];
        for (dst, &i) in out.chunks_exact_mut(m.max(1)).zip(idx.iter()) {
            dst.copy_from_slice(&src[i * m..(i + 1) * m]);
        }
        let out = Array2::from_shape_vec((idx.len(), m), out).expect("gather shape");
        self.push(out, Op::Gather { x, idx: Rc::clone(idx) })
    }

    /// `out[r] = Σ_p x_p[idx_p[r]]`, a missing index meaning row `r` itself.
    /// All parts must produce the same number of rows and columns.
    pub fn gather_sum(&mut self, parts: &[(Var, Option<&Rc<Vec<usize>>>)]) -> Var {
        assert!(!parts.is_empty(), "gather_sum needs at least one part");
        let rows_of = |t: &Tape, (v, idx): &(Var, Option<&Rc<Vec<usize>>>)| match idx {
            Some(ix) => ix.len(),
            None => t.value(*v).nrows(),
        };
        let n = rows_of(self, &parts[0]);
        let m = self.value(parts[0].0).ncols();
        let mut out = vec![0.0; n * m];
        for part in parts {
            assert_eq!(rows_of(self, part), n, "gather_sum row counts");
            let xv = self.value(part.0);
            assert_eq!(xv.ncols(), m, "gather_sum column counts");
            let src = contiguous(xv);
            match part.1 {
                Some(ix) => {
                    for (dst, &i) in out.chunks_exact_mut(m.max(1)).zip(ix.iter()) {
                        add_into(dst, &src[i * m..(i + 1) * m]);
                    }
                }
                None => add_into(&mut out, &src),
            }
        }
        let out = Array2::from_shape_vec((n, m), out).expect("gather_sum shape");
        let parts = parts.iter().map(|(v, ix)| (*v, ix.map(Rc::clone))).collect();
        self.push(out, Op::GatherSum(parts))
    }

    /// Rows `start..start + len` of `x`.
    pub fn rows(&mut self, x: Var, start: usize, len: usize) -> Var {
        let v = self.value(x).slice(s![start..start + len, ..]).to_owned();
        self.push(v, Op::Rows { x, start })
    }

    /// `out[idx[r]] += x[r]` into `n` rows.
    pub fn scatter_sum(&mut self, x: Var, idx: &Rc<Vec<usize>>, n: usize) -> Var {
        let xv = self.value(x);
        assert_eq!(xv.nrows(), idx.len(), "scatter index length");
        let out = scatter_rows(xv, idx, n);
        self.push(out, Op::ScatterSum { x, idx: Rc::clone(idx) })
    }

    /// Column-wise concatenation.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("row counts agree");
        self.push(v, Op::Concat(parts.to_vec()))
    }

    /// Softmax over the single row of a `1 × L` value.
    pub fn softmax(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let mx = xv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut v = xv.mapv(|a| (a - mx).exp());
        let s = v.sum();
        v /= s;
        self.push(v, Op::Softmax(x))
    }

    /// `1 × 1` view of column `col` of a `1 × L` value.
    pub fn select(&mut self, x: Var, col: usize) -> Var {
        let v = Array2::from_elem((1, 1), self.value(x)[(0, col)]);
        self.push(v, Op::Select { x, col })
    }

    /// Multiplies every entry of `x` by the `1 × 1` value `s`.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Var {
        let k = self.value(s)[(0, 0)];
        let v = self.value(x) * k;
        self.push(v, Op::ScaleBy { x, s })
    }

    /// `Σ w (pred − target)²` as a `1 × 1` value.
    pub fn weighted_sq_err(&mut self, pred: Var, target: Rc<Array2<f64>>, weight: Rc<Array2<f64>>) -> Var {
        let p = self.value(pred);
        assert_eq!(p.dim(), target.dim(), "prediction/target shape");
        assert_eq!(p.dim(), weight.dim(), "prediction/weight shape");
        let mut acc = 0.0;
        Zip::from(p).and(&*target).and(&*weight).for_each(|&a, &b, &w| acc += w * (a - b) * (a - b));
        self.push(Array2::from_elem((1, 1), acc), Op::WeightedSqErr { pred, target, weight })
    }

    /// Gradients of the scalar `out` with respect to every parameter leaf,
    /// returned as `(param index, gradient)` pairs accumulated per index.
    pub fn backward(&self, out: Var, n_params: usize) -> Vec<Option<Array2<f64>>> {
        assert_eq!(self.value(out).dim(), (1, 1), "backward needs a scalar output");
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[out.0] = Some(Array2::from_elem((1, 1), 1.0));
        let mut param_grads: Vec<Option<Array2<f64>>> = vec![None; n_params];

        fn acc(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
            match &mut grads[v.0] {
                Some(existing) => *existing += &g,
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf { param } => {
                    if let Some(p) = param {
                        match &mut param_grads[*p] {
                            Some(existing) => *existing += &g,
                            slot @ None => *slot = Some(g),
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::AddBias(a, b) => {
                    let gb = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut grads, *b, gb);
                    acc(&mut grads, *a, g);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = zip_map(&g, self.value(*b), |x, y| x * y);
                    let gb = zip_map(&g, self.value(*a), |x, y| x * y);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Silu { x, sig } => {
                    let mut ga = g;
                    Zip::from(&mut ga).and(self.value(*x)).and(sig).for_each(|g, &x, &s| {
                        *g *= s * (1.0 + x * (1.0 - s));
                    });
                    acc(&mut grads, *x, ga);
                }
                Op::Tanh(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga).and(&node.value).for_each(|g, &y| *g *= 1.0 - y * y);
                    acc(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga).and(&node.value).for_each(|g, &y| *g *= y * (1.0 - y));
                    acc(&mut grads, *a, ga);
                }
                Op::LayerNorm { x, gamma, beta, xhat, inv_std } => {
                    let gbeta = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    let ggamma = (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
                    let dxhat = &g * self.value(*gamma);
                    let m = xhat.ncols() as f64;
                    let mut gx = Array2::zeros(xhat.dim());
                    for r in 0..xhat.nrows() {
                        let dh = dxhat.row(r);
                        let xh = xhat.row(r);
                        let mean_dh = dh.sum() / m;
                        let mean_dh_xh = dh.iter().zip(xh.iter()).map(|(a, b)| a * b).sum::<f64>() / m;
                        let is = inv_std[r];
                        let mut out = gx.row_mut(r);
                        for c in 0..xh.len() {
                            out[c] = is * (dh[c] - mean_dh - xh[c] * mean_dh_xh);
                        }
                    }
                    acc(&mut grads, *beta, gbeta);
                    acc(&mut grads, *gamma, ggamma);
                    acc(&mut grads, *x, gx);
                }
                Op::Gather { x, idx } => {
                    let gx = scatter_rows(&g, idx, self.value(*x).nrows());
                    acc(&mut grads, *x, gx);
                }
                Op::GatherSum(parts) => {
                    for (x, idx) in parts {
                        let gx = match idx {
                            Some(ix) => scatter_rows(&g, ix, self.value(*x).nrows()),
                            None => g.clone(),
                        };
                        acc(&mut grads, *x, gx);
                    }
                }
                Op::Rows { x, start } => {
                    let mut gx = Array2::zeros(self.value(*x).dim());
                    gx.slice_mut(s![*start..*start + g.nrows(), ..]).assign(&g);
                    acc(&mut grads, *x, gx);
                }
                Op::ScatterSum { x, idx } => {
                    let m = g.ncols();
                    let src = contiguous(&g);
                    let mut gx = vec![0.0; idx.len() * m];
                    for (dst, &i) in gx.chunks_exact_mut(m.max(1)).zip(idx.iter()) {
                        dst.copy_from_slice(&src[i * m..(i + 1) * m]);
                    }
                    let gx = Array2::from_shape_vec((idx.len(), m), gx).expect("scatter grad shape");
                    acc(&mut grads, *x, gx);
                }
                Op::Concat(parts) => {
                    let mut c0 = 0;
                    for p in parts {
                        let w = self.value(*p).ncols();
                        acc(&mut grads, *p, g.slice(s![.., c0..c0 + w]).to_owned());
                        c0 += w;
                    }
                }
                Op::Softmax(x) => {
                    let y = &node.value;
                    let dot: f64 = (&g * y).sum();
                    let gx = y * &(&g - dot);
                    acc(&mut grads, *x, gx);
                }
                Op::Select { x, col } => {
                    let mut gx = Array2::zeros(self.value(*x).dim());
                    gx[(0, *col)] = g[(0, 0)];
                    acc(&mut grads, *x, gx);
                }
                Op::ScaleBy { x, s } => {
                    let k = self.value(*s)[(0, 0)];
                    let gs = (&g * self.value(*x)).sum();
                    acc(&mut grads, *s, Array2::from_elem((1, 1), gs));
                    acc(&mut grads, *x, g * k);
                }
                Op::WeightedSqErr { pred, target, weight } => {
                    let k = g[(0, 0)];
                    let mut gp = self.value(*pred).clone();
                    Zip::from(&mut gp).and(&**target).and(&**weight).for_each(|p, &t, &w| *p = 2.0 * k * w * (*p - t));
                    acc(&mut grads, *pred, gp);
                }
            }
        }
        param_grads
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Finite-difference check of d(loss)/d(param 0) for a scalar-valued builder.
    fn check(build: impl Fn(&mut Tape, Array2<f64>) -> Var, p0: Array2<f64>) {
        let mut t = Tape::new();
        let out = build(&mut t, p0.clone());
        let g = t.backward(out, 1)[0].clone().unwrap();
        let h = 1e-6;
        for idx in 0..p0.len() {
            let (r, c) = (idx / p0.ncols(), idx % p0.ncols());
            let mut plus = p0.clone();
            plus[(r, c)] += h;
            let mut minus = p0.clone();
            minus[(r, c)] -= h;
            let mut tp = Tape::new();
            let op = build(&mut tp, plus);
            let mut tm = Tape::new();
            let om = build(&mut tm, minus);
            let fd = (tp.value(op)[(0, 0)] - tm.value(om)[(0, 0)]) / (2.0 * h);
            let an = g[(r, c)];
            assert!((fd - an).abs() <= 1e-6 * (1.0 + fd.abs()), "({r},{c}): fd {fd} vs {an}");
        }
    }

    fn target(shape: (usize, usize)) -> Rc<Array2<f64>> {
        Rc::new(Array2::from_shape_fn(shape, |(i, j)| 0.1 * i as f64 - 0.2 * j as f64))
    }

    #[test]
    fn ops_match_finite_differences() {
        let x0 = array![[0.3, -1.2, 0.7], [1.1, 0.4, -0.5]];
        check(
            |t, p| {
                let x = t.param(0, p);
                let w = t.constant(array![[0.5, -0.3], [0.2, 0.8], [-0.6, 0.1]]);
                let y = t.matmul(x, w);
                let b = t.constant(array![[0.1, -0.2]]);
                let y = t.add_bias(y, b);
                let a = t.silu(y);
                let b2 = t.tanh(y);
                let c = t.sigmoid(y);
                let ab = t.mul(a, b2);
                let z = t.add(ab, c);
                t.weighted_sq_err(z, target((2, 2)), Rc::new(Array2::from_elem((2, 2), 0.7)))
            },
            x0.clone(),
        );
        check(
            |t, p| {
                let x = t.param(0, p);
                let g = t.constant(array![[1.2, 0.8, -0.4]]);
                let b = t.constant(array![[0.0, 0.1, 0.2]]);
                let y = t.layer_norm(x, g, b);
                let idx = Rc::new(vec![1, 0, 1, 1]);
                let gth = t.gather(y, &idx);
                let sc = t.scatter_sum(gth, &Rc::new(vec![2, 0, 0, 1]), 3);
                let sq = t.mul(sc, sc);
                let cat = t.concat(&[sc, sq]);
                t.weighted_sq_err(cat, target((3, 6)), Rc::new(Array2::from_elem((3, 6), 1.0)))
            },
            x0,
        );
        check(
            |t, p| {
                let w = t.param(0, p);
                let a = t.softmax(w);
                let x = t.constant(array![[1.0, 2.0], [0.5, -1.0]]);
                let s0 = t.select(a, 0);
                let s2 = t.select(a, 2);
                let y0 = t.scale_by(x, s0);
                let y2 = t.scale_by(x, s2);
                let y = t.add(y0, y2);
                t.weighted_sq_err(y, target((2, 2)), Rc::new(Array2::from_elem((2, 2), 1.0)))
            },
            array![[0.2, -0.4, 1.0]],
        );
    }

    #[test]
    fn layer_norm_rows_have_zero_mean() {
        let mut t = Tape::new();
        let x = t.constant(array![[1.0, 2.0, 3.0]]);
        let g = t.constant(array![[1.0, 1.0, 1.0]]);
        let b = t.constant(array![[0.0, 0.0, 0.0]]);
        let y = t.layer_norm(x, g, b);
        assert!(t.value(y).sum().abs() < 1e-12);
    }
}
