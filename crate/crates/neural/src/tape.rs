//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records each op's output and a closure that pushes the output
//! gradient back to its inputs. Nodes that do not depend on any leaf skip the
//! closure.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernels;
use crate::tensor::{matmul, matmul_nt, matmul_tn, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

pub type Grads = Vec<Option<Tensor>>;
type BackFn = Box<dyn Fn(&[Tensor], &Tensor, &mut Grads) + Send + Sync>;

#[derive(Default)]
pub struct Tape {
    values: Vec<Tensor>,
    backs: Vec<Option<BackFn>>,
    tracked: Vec<bool>,
    fault: Option<String>,
}

fn accumulate(grads: &mut Grads, v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(t) => t.add_assign(&g),
        slot => *slot = Some(g),
    }
}

fn elementwise(a: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::from_vec(a.rows, a.cols, a.data.iter().map(|&v| f(v)).collect())
}

fn zip_with(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    Tensor::from_vec(a.rows, a.cols, a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect())
}

fn column_sums(g: &Tensor) -> Tensor {
    let mut s = Tensor::zeros(1, g.cols);
    for r in 0..g.rows {
        for (o, v) in s.data.iter_mut().zip(g.row(r)) {
            *o += v;
        }
    }
    s
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One gated group of fixed pair tensors for [`Tape::gated_bias`].
pub struct BiasTerm {
    pub consts: Arc<Vec<Tensor>>,
    pub weight: Var,
    /// Element of `weight` used for each tensor.
    pub idx: Vec<usize>,
    /// Element of the gate tensor.
    pub gate: usize,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.values[v.0]
    }

    /// First op that produced a non-finite value, if any.
    pub fn check(&self) -> Result<()> {
        match &self.fault {
            Some(op) => Err(Error::NonFinite(op.clone())),
            None => Ok(()),
        }
    }

    fn push<F>(&mut self, op: &str, value: Tensor, parents: &[Var], back: F) -> Var
    where
        F: Fn(&[Tensor], &Tensor, &mut Grads) + Send + Sync + 'static,
    {
        if self.fault.is_none() && !value.is_finite() {
            self.fault = Some(op.to_string());
        }
        let tracked = parents.iter().any(|p| self.tracked[p.0]);
        self.values.push(value);
        self.tracked.push(tracked);
        self.backs.push(if tracked { Some(Box::new(back)) } else { None });
        Var(self.values.len() - 1)
    }

    /// Differentiable input.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.values.push(t);
        self.tracked.push(true);
        self.backs.push(None);
        Var(self.values.len() - 1)
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.values.push(t);
        self.tracked.push(false);
        self.backs.push(None);
        Var(self.values.len() - 1)
    }

    /// Gradients of the 1×1 node `out` with respect to every node.
    pub fn backward(&self, out: Var) -> Grads {
        assert_eq!(self.values[out.0].shape(), [1, 1], "backward needs a scalar output");
        let mut grads: Grads = vec![None; out.0 + 1];
        grads[out.0] = Some(Tensor::scalar(1.0));
        for i in (0..=out.0).rev() {
            let Some(back) = &self.backs[i] else { continue };
            let Some(g) = grads[i].take() else { continue };
            back(&self.values, &g, &mut grads);
            grads[i] = Some(g);
        }
        for (g, &tracked) in grads.iter_mut().zip(&self.tracked) {
            if !tracked {
                *g = None;
            }
        }
        grads
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = matmul(self.value(a), self.value(b));
        self.push("matmul", v, &[a, b], move |vals, g, grads| {
            accumulate(grads, a, matmul_nt(g, &vals[b.0]));
            accumulate(grads, b, matmul_tn(&vals[a.0], g));
        })
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let v = matmul_nt(self.value(a), self.value(b));
        self.push("matmul_nt", v, &[a, b], move |vals, g, grads| {
            accumulate(grads, a, matmul(g, &vals[b.0]));
            accumulate(grads, b, matmul_tn(g, &vals[a.0]));
        })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = zip_with(self.value(a), self.value(b), |x, y| x + y);
        self.push("add", v, &[a, b], move |_, g, grads| {
            accumulate(grads, a, g.clone());
            accumulate(grads, b, g.clone());
        })
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = zip_with(self.value(a), self.value(b), |x, y| x - y);
        self.push("sub", v, &[a, b], move |_, g, grads| {
            accumulate(grads, a, g.clone());
            accumulate(grads, b, elementwise(g, |x| -x));
        })
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = zip_with(self.value(a), self.value(b), |x, y| x * y);
        self.push("mul", v, &[a, b], move |vals, g, grads| {
            accumulate(grads, a, zip_with(g, &vals[b.0], |x, y| x * y));
            accumulate(grads, b, zip_with(g, &vals[a.0], |x, y| x * y));
        })
    }

    /// Adds the 1×m row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(bv.shape(), [1, av.cols], "add_row bias shape");
        let mut v = av.clone();
        for r in 0..v.rows {
            for (o, x) in v.data[r * v.cols..(r + 1) * v.cols].iter_mut().zip(&bv.data) {
                *o += x;
            }
        }
        self.push("add_row", v, &[a, b], move |_, g, grads| {
            accumulate(grads, a, g.clone());
            accumulate(grads, b, column_sums(g));
        })
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = elementwise(self.value(a), |x| x * c);
        self.push("scale", v, &[a], move |_, g, grads| accumulate(grads, a, elementwise(g, |x| x * c)))
    }

    /// Elementwise product with a fixed tensor (e.g. a dropout mask).
    pub fn mul_const(&mut self, a: Var, mask: Arc<Tensor>) -> Var {
        let v = zip_with(self.value(a), &mask, |x, m| x * m);
        self.push("mul_const", v, &[a], move |_, g, grads| {
            accumulate(grads, a, zip_with(g, &mask, |x, m| x * m))
        })
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let v = elementwise(self.value(a), |x| if x > 0.0 { x } else { slope * x });
        self.push("leaky_relu", v, &[a], move |vals, g, grads| {
            accumulate(grads, a, zip_with(g, &vals[a.0], |gv, x| if x > 0.0 { gv } else { slope * gv }))
        })
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let v = elementwise(self.value(a), kernels::gelu);
        self.push("gelu", v, &[a], move |vals, g, grads| {
            accumulate(grads, a, zip_with(g, &vals[a.0], |gv, x| gv * kernels::gelu_grad(x)))
        })
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = elementwise(self.value(a), kernels::sigmoid);
        let out = self.values.len();
        self.push("sigmoid", v, &[a], move |vals, g, grads| {
            accumulate(grads, a, zip_with(g, &vals[out], |gv, s| gv * s * (1.0 - s)))
        })
    }

    /// Row-wise layer normalization with 1×m scale and shift.
    pub fn layer_norm(&mut self, a: Var, gamma: Var, beta: Var) -> Var {
        let v = kernels::layer_norm(self.value(a), self.value(gamma), self.value(beta));
        self.push("layer_norm", v, &[a, gamma, beta], move |vals, g, grads| {
            let (xhat, inv) = kernels::normalize_rows(&vals[a.0]);
            let gam = &vals[gamma.0];
            let m = xhat.cols as f64;
            let mut gx = Tensor::zeros(xhat.rows, xhat.cols);
            for r in 0..xhat.rows {
                let dy: Vec<f64> = g.row(r).iter().zip(&gam.data).map(|(x, y)| x * y).collect();
                let sum_dy: f64 = dy.iter().sum();
                let sum_dy_xhat = dot(&dy, xhat.row(r));
                for c in 0..xhat.cols {
                    let v = inv[r] / m * (m * dy[c] - sum_dy - xhat.get(r, c) * sum_dy_xhat);
                    gx.set(r, c, v);
                }
            }
            accumulate(grads, a, gx);
            accumulate(grads, gamma, column_sums(&zip_with(g, &xhat, |x, y| x * y)));
            accumulate(grads, beta, column_sums(g));
        })
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let v = kernels::softmax_rows(self.value(a));
        let out = self.values.len();
        self.push("softmax", v, &[a], move |vals, g, grads| {
            let y = &vals[out];
            let mut ga = Tensor::zeros(y.rows, y.cols);
            for r in 0..y.rows {
                let gy = dot(g.row(r), y.row(r));
                for c in 0..y.cols {
                    ga.set(r, c, y.get(r, c) * (g.get(r, c) - gy));
                }
            }
            accumulate(grads, a, ga);
        })
    }

    /// Columns `start..start + len`.
    pub fn cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let av = self.value(a);
        assert!(start + len <= av.cols, "column slice out of range");
        let mut v = Tensor::zeros(av.rows, len);
        for r in 0..av.rows {
            v.data[r * len..(r + 1) * len].copy_from_slice(&av.row(r)[start..start + len]);
        }
        let total = av.cols;
        self.push("cols", v, &[a], move |_, g, grads| {
            let mut ga = Tensor::zeros(g.rows, total);
            for r in 0..g.rows {
                ga.data[r * total + start..r * total + start + len].copy_from_slice(g.row(r));
            }
            accumulate(grads, a, ga);
        })
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let widths: Vec<usize> = parts.iter().map(|&p| self.value(p).cols).collect();
        assert!(parts.iter().all(|&p| self.value(p).rows == rows), "concat row mismatch");
        let total: usize = widths.iter().sum();
        let mut v = Tensor::zeros(rows, total);
        let mut off = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let pv = self.value(p);
            for r in 0..rows {
                v.data[r * total + off..r * total + off + w].copy_from_slice(pv.row(r));
            }
            off += w;
        }
        let parts_owned = parts.to_vec();
        self.push("concat", v, parts, move |_, g, grads| {
            let mut off = 0;
            for (&p, &w) in parts_owned.iter().zip(&widths) {
                let mut gp = Tensor::zeros(g.rows, w);
                for r in 0..g.rows {
                    gp.data[r * w..(r + 1) * w].copy_from_slice(&g.row(r)[off..off + w]);
                }
                accumulate(grads, p, gp);
                off += w;
            }
        })
    }

    /// Row `i` of the result is row `idx[i]` of `a`.
    pub fn select_rows(&mut self, a: Var, idx: Arc<Vec<usize>>) -> Var {
        let v = self.value(a).select_rows(&idx);
        let rows = self.value(a).rows;
        self.push("select_rows", v, &[a], move |_, g, grads| {
            let mut ga = Tensor::zeros(rows, g.cols);
            for (i, &src) in idx.iter().enumerate() {
                for (o, x) in ga.data[src * g.cols..(src + 1) * g.cols].iter_mut().zip(g.row(i)) {
                    *o += x;
                }
            }
            accumulate(grads, a, ga);
        })
    }

    /// Column-wise max over consecutive groups of `k` rows; ties go to the
    /// first row of the group.
    pub fn group_max(&mut self, a: Var, k: usize) -> Var {
        let av = self.value(a);
        assert!(k > 0 && av.rows % k == 0, "group size {k} does not divide {} rows", av.rows);
        let groups = av.rows / k;
        let mut v = Tensor::zeros(groups, av.cols);
        let mut arg = vec![0usize; groups * av.cols];
        for gi in 0..groups {
            for c in 0..av.cols {
                let mut best = gi * k;
                for r in gi * k + 1..(gi + 1) * k {
                    if av.get(r, c) > av.get(best, c) {
                        best = r;
                    }
                }
                arg[gi * av.cols + c] = best;
                v.set(gi, c, av.get(best, c));
            }
        }
        let rows = av.rows;
        self.push("group_max", v, &[a], move |_, g, grads| {
            let mut ga = Tensor::zeros(rows, g.cols);
            for gi in 0..g.rows {
                for c in 0..g.cols {
                    let r = arg[gi * g.cols + c];
                    ga.data[r * g.cols + c] += g.get(gi, c);
                }
            }
            accumulate(grads, a, ga);
        })
    }

    /// 1×m column maxima.
    pub fn max_rows(&mut self, a: Var) -> Var {
        let rows = self.value(a).rows;
        self.group_max(a, rows)
    }

    /// 1×m column means.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let n = av.rows as f64;
        let v = elementwise(&column_sums(av), |x| x / n);
        let rows = av.rows;
        self.push("mean_rows", v, &[a], move |_, g, grads| {
            let mut ga = Tensor::zeros(rows, g.cols);
            for r in 0..rows {
                for c in 0..g.cols {
                    ga.set(r, c, g.data[c] / n);
                }
            }
            accumulate(grads, a, ga);
        })
    }

    /// `base + Σ_terms gates[gate] · Σ_c weight[idx[c]] · consts[c]` in one
    /// pass over the fixed tensors.
    pub fn gated_bias(&mut self, base: Var, gates: Var, terms: Vec<BiasTerm>) -> Var {
        let bv = self.value(base);
        let gv = self.value(gates);
        let mut bias = Tensor::zeros(bv.rows, bv.cols);
        for term in &terms {
            assert_eq!(term.consts.len(), term.idx.len());
            let g = gv.data[term.gate];
            let wv = self.value(term.weight);
            for (c, &i) in term.consts.iter().zip(&term.idx) {
                let coef = g * wv.data[i];
                for (o, x) in bias.data.iter_mut().zip(&c.data) {
                    *o += coef * x;
                }
            }
        }
        let v = zip_with(bv, &bias, |x, y| x + y);
        let mut parents = vec![base, gates];
        parents.extend(terms.iter().map(|t| t.weight));
        self.push("gated_bias", v, &parents, move |vals, g, grads| {
            accumulate(grads, base, g.clone());
            let gate_vals = &vals[gates.0];
            let mut ggate = Tensor::zeros(gate_vals.rows, gate_vals.cols);
            for term in &terms {
                let wv = &vals[term.weight.0];
                let gate = gate_vals.data[term.gate];
                let mut gw = Tensor::zeros(wv.rows, wv.cols);
                for (c, &i) in term.consts.iter().zip(&term.idx) {
                    let d = dot(&g.data, &c.data);
                    gw.data[i] += gate * d;
                    ggate.data[term.gate] += wv.data[i] * d;
                }
                accumulate(grads, term.weight, gw);
            }
            accumulate(grads, gates, ggate);
        })
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let v = Tensor::scalar(av.data.iter().sum());
        let shape = av.shape();
        self.push("sum", v, &[a], move |_, g, grads| {
            accumulate(grads, a, Tensor::from_vec(shape[0], shape[1], vec![g.item(); shape[0] * shape[1]]))
        })
    }

    /// `(a − y)²` for a 1×1 `a`.
    pub fn squared_error(&mut self, a: Var, y: f64) -> Var {
        let d = self.value(a).item() - y;
        self.push("squared_error", Tensor::scalar(d * d), &[a], move |vals, g, grads| {
            let d = vals[a.0].item() - y;
            accumulate(grads, a, Tensor::scalar(2.0 * d * g.item()))
        })
    }

    /// Logistic loss of logit `a` against a 0/1 label.
    pub fn logistic_loss(&mut self, a: Var, y: f64) -> Var {
        let z = self.value(a).item();
        let v = kernels::softplus(z) - y * z;
        self.push("logistic_loss", Tensor::scalar(v), &[a], move |vals, g, grads| {
            let z = vals[a.0].item();
            accumulate(grads, a, Tensor::scalar((kernels::sigmoid(z) - y) * g.item()))
        })
    }
}

/// Largest relative error between reverse-mode and central-difference
/// gradients of the scalar built by `f`, over every element of `inputs`.
/// Relative error is `|a − n| / max(|a|, |n|, 1e−8)`.
pub fn grad_check<F>(inputs: &[Tensor], eps: f64, f: F) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    assert!(eps > 0.0, "eps must be positive");
    let eval = |ins: &[Tensor]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ins.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&mut tape, &vars);
        (tape, vars, out)
    };
    let (tape, vars, out) = eval(inputs);
    let grads = tape.backward(out);
    let mut worst: f64 = 0.0;
    let mut probe = inputs.to_vec();
    for (k, v) in vars.iter().enumerate() {
        let analytic = grads[v.index()].clone().unwrap_or_else(|| Tensor::zeros(inputs[k].rows, inputs[k].cols));
        for e in 0..inputs[k].data.len() {
            let x0 = inputs[k].data[e];
            probe[k].data[e] = x0 + eps;
            let (t, _, o) = eval(&probe);
            let fp = t.value(o).item();
            probe[k].data[e] = x0 - eps;
            let (t, _, o) = eval(&probe);
            let fm = t.value(o).item();
            probe[k].data[e] = x0;
            let n = (fp - fm) / (2.0 * eps);
            let a = analytic.data[e];
            worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-8));
        }
    }
    worst
}
