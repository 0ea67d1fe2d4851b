use std::rc::Rc;

use ndarray::{Array2, Axis, Zip};

use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `(n x k) + (1 x k)` broadcast over rows
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    /// `1[x > 0]`, treated as a constant
    Step,
    Sigmoid(Var),
    Tanh(Var),
    Softplus(Var),
    LogSigmoid(Var),
    Log(Var),
    Square(Var),
    /// square root with zero derivative at zero
    Sqrt(Var),
    /// row sums, `(n x k) -> (n x 1)`
    SumCols(Var),
    Sum(Var),
    Mean(Var),
    /// `sum_i w_i a_i / sum_i w_i` over all entries
    WeightedMean(Var, Rc<Vec<f64>>),
}

struct Node {
    value: Array2<f64>,
    op: Op,
    needs_grad: bool,
}

/// Reverse-mode tape over dense matrices. Build it fresh for every
/// evaluation; leaves created with [`Graph::param`] receive gradients.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
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

    fn push(&mut self, value: Array2<f64>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf without gradient.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    /// Value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let value = self.value(a).mapv(f);
        let needs = self.needs(a);
        self.push(value, op, needs)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.ncols() != vb.nrows() {
            return Err(Error::Shape(format!("matmul {:?} x {:?}", va.dim(), vb.dim())));
        }
        let value = va.dot(vb);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::MatMul(a, b), needs))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (va, vr) = (self.value(a), self.value(row));
        if vr.nrows() != 1 || vr.ncols() != va.ncols() {
            return Err(Error::Shape(format!("add_row {:?} + {:?}", va.dim(), vr.dim())));
        }
        let value = va + vr;
        let needs = self.needs(a) || self.needs(row);
        Ok(self.push(value, Op::AddRow(a, row), needs))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.value(a).dim() != self.value(b).dim() {
            return Err(Error::Shape(format!(
                "{what} {:?} vs {:?}",
                self.value(a).dim(),
                self.value(b).dim()
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let value = self.value(a) + self.value(b);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add(a, b), needs))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let value = self.value(a) - self.value(b);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Sub(a, b), needs))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let value = self.value(a) * self.value(b);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Mul(a, b), needs))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::Scale(a, c), |x| c * x)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::AddScalar(a), |x| x + c)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn step(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
        self.push(value, Op::Step, false)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, Op::Softplus(a), softplus)
    }

    /// `ln sigmoid(x)`, computed stably.
    pub fn log_sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::LogSigmoid(a), |x| -softplus(-x))
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, Op::Log(a), f64::ln)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, Op::Square(a), |x| x * x)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sqrt(a), |x| x.max(0.0).sqrt())
    }

    pub fn sum_cols(&mut self, a: Var) -> Var {
        let value = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        let needs = self.needs(a);
        self.push(value, Op::SumCols(a), needs)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(a).sum());
        let needs = self.needs(a);
        self.push(value, Op::Sum(a), needs)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let value = Array2::from_elem((1, 1), v.sum() / v.len() as f64);
        let needs = self.needs(a);
        self.push(value, Op::Mean(a), needs)
    }

    /// Weighted mean over all entries, in row-major order.
    pub fn weighted_mean(&mut self, a: Var, weights: Rc<Vec<f64>>) -> Result<Var> {
        let v = self.value(a);
        if weights.len() != v.len() {
            return Err(Error::Shape(format!("weighted_mean: {} weights for {} entries", weights.len(), v.len())));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Shape("weighted_mean: weights must have positive sum".into()));
        }
        let num: f64 = v.iter().zip(weights.iter()).map(|(x, w)| x * w).sum();
        let value = Array2::from_elem((1, 1), num / total);
        let needs = self.needs(a);
        Ok(self.push(value, Op::WeightedMean(a, weights), needs))
    }

    /// Gradients of a scalar node with respect to every node that needs one.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.dim() != (1, 1) {
            return Err(Error::Shape(format!("loss must be 1 x 1, got {:?}", lv.dim())));
        }
        if !lv[[0, 0]].is_finite() {
            return Err(Error::NonFinite(format!("loss = {}", lv[[0, 0]])));
        }
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Array2::from_elem((1, 1), 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(d) = grads[idx].take() else { continue };
            let out = &node.value;
            let acc = |grads: &mut Vec<Option<Array2<f64>>>, v: Var, g: Array2<f64>| {
                if !self.needs(v) {
                    return;
                }
                match &mut grads[v.0] {
                    Some(existing) => *existing += &g,
                    slot @ None => *slot = Some(g),
                }
            };
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(d);
                    continue;
                }
                Op::MatMul(a, b) => {
                    if self.needs(*a) {
                        acc(&mut grads, *a, d.dot(&self.value(*b).t()));
                    }
                    if self.needs(*b) {
                        acc(&mut grads, *b, self.value(*a).t().dot(&d));
                    }
                }
                Op::AddRow(a, r) => {
                    if self.needs(*r) {
                        acc(&mut grads, *r, d.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    acc(&mut grads, *a, d);
                }
                Op::Add(a, b) => {
                    if self.needs(*b) {
                        acc(&mut grads, *b, d.clone());
                    }
                    acc(&mut grads, *a, d);
                }
                Op::Sub(a, b) => {
                    if self.needs(*b) {
                        acc(&mut grads, *b, -&d);
                    }
                    acc(&mut grads, *a, d);
                }
                Op::Mul(a, b) => {
                    if self.needs(*a) {
                        acc(&mut grads, *a, &d * self.value(*b));
                    }
                    if self.needs(*b) {
                        acc(&mut grads, *b, &d * self.value(*a));
                    }
                }
                Op::Scale(a, c) => acc(&mut grads, *a, d * *c),
                Op::AddScalar(a) => acc(&mut grads, *a, d),
                Op::Relu(a) => {
                    let mut g = d;
                    Zip::from(&mut g).and(self.value(*a)).for_each(|g, &x| {
                        if x <= 0.0 {
                            *g = 0.0;
                        }
                    });
                    acc(&mut grads, *a, g);
                }
                Op::Step => {}
                Op::Sigmoid(a) => {
                    let mut g = d;
                    Zip::from(&mut g).and(out).for_each(|g, &s| *g *= s * (1.0 - s));
                    acc(&mut grads, *a, g);
                }
                Op::Tanh(a) => {
                    let mut g = d;
                    Zip::from(&mut g).and(out).for_each(|g, &y| *g *= 1.0 - y * y);
                    acc(&mut grads, *a, g);
                }
                Op::Softplus(a) => {
                    let mut g = d;
                    Zip::from(&mut g).and(self.value(*a)).for_each(|g, &x| *g *= sigmoid(x));
                    acc(&mut grads, *a, g);
                }
                Op::LogSigmoid(a) => {
                    let mut g = d;
                    Zip::from(&mut g).and(self.value(*a)).for_each(|g, &x| *g *= sigmoid(-x));
                    acc(&mut grads, *a, g);
                }
                Op::Log(a) => {
                    let mut g = d;
                    Zip::from(&mut g).and(self.value(*a)).for_each(|g, &x| *g /= x);
                    acc(&mut grads, *a, g);
                }
                Op::Square(a) => {
                    let mut g = d;
                    Zip::from(&mut g).and(self.value(*a)).for_each(|g, &x| *g *= 2.0 * x);
                    acc(&mut grads, *a, g);
                }
                Op::Sqrt(a) => {
                    let mut g = d;
                    Zip::from(&mut g).and(out).for_each(|g, &y| {
                        *g = if y > 0.0 { *g / (2.0 * y) } else { 0.0 };
                    });
                    acc(&mut grads, *a, g);
                }
                Op::SumCols(a) => {
                    let shape = self.value(*a).dim();
                    let g = Array2::from_shape_fn(shape, |(i, _)| d[[i, 0]]);
                    acc(&mut grads, *a, g);
                }
                Op::Sum(a) => {
                    let g = Array2::from_elem(self.value(*a).dim(), d[[0, 0]]);
                    acc(&mut grads, *a, g);
                }
                Op::Mean(a) => {
                    let v = self.value(*a);
                    let g = Array2::from_elem(v.dim(), d[[0, 0]] / v.len() as f64);
                    acc(&mut grads, *a, g);
                }
                Op::WeightedMean(a, w) => {
                    let v = self.value(*a);
                    let scale = d[[0, 0]] / w.iter().sum::<f64>();
                    let g = Array2::from_shape_vec(v.dim(), w.iter().map(|w| w * scale).collect())
                        .expect("weights sized at construction");
                    acc(&mut grads, *a, g);
                }
            }
        }
        let out = Gradients { grads };
        if let Some(bad) = out.grads.iter().flatten().find(|g| g.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite(format!("gradient of shape {:?}", bad.dim())));
        }
        Ok(out)
    }
}

/// Result of [`Graph::backward`]; gradients are kept for leaves only.
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    /// Gradient of a leaf; `None` when the loss does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of a leaf, zeros when the loss does not depend on it.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Array2<f64> {
        self.get(v).cloned().unwrap_or_else(|| Array2::zeros(shape))
    }
}
