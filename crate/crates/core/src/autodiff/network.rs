use ndarray::{Array2, Axis};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::tape::{sigmoid, softplus, Graph, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
    Softplus,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Softplus => softplus(x),
        }
    }

    /// Range the activation maps into.
    pub fn range(self) -> OutputRange {
        match self {
            Activation::Identity => OutputRange::Real,
            Activation::Relu | Activation::Softplus => OutputRange::NonNegative,
            Activation::Tanh => OutputRange::Symmetric,
            Activation::Sigmoid => OutputRange::Unit,
        }
    }

    fn graph(self, g: &mut Graph, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Relu => g.relu(x),
            Activation::Tanh => g.tanh(x),
            Activation::Sigmoid => g.sigmoid(x),
            Activation::Softplus => g.softplus(x),
        }
    }

    /// Derivative `act'(pre)` as a graph node, given `pre` and `post = act(pre)`.
    fn derivative(self, g: &mut Graph, pre: Var, post: Var) -> Option<Var> {
        match self {
            Activation::Identity => None,
            Activation::Relu => Some(g.step(pre)),
            Activation::Tanh => {
                let sq = g.square(post);
                let neg = g.scale(sq, -1.0);
                Some(g.add_scalar(neg, 1.0))
            }
            Activation::Sigmoid => {
                let sq = g.square(post);
                Some(g.sub(post, sq).expect("same shape"))
            }
            Activation::Softplus => Some(g.sigmoid(pre)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputRange {
    Real,
    NonNegative,
    Symmetric,
    /// open interval `(0, 1)`
    Unit,
}

impl OutputRange {
    /// Membership in the closure of the range; saturated floating-point
    /// outputs may reach an open end.
    pub fn contains(self, x: f64) -> bool {
        match self {
            OutputRange::Real => x.is_finite(),
            OutputRange::NonNegative => x >= 0.0 && x.is_finite(),
            OutputRange::Symmetric => (-1.0..=1.0).contains(&x),
            OutputRange::Unit => (0.0..=1.0).contains(&x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `in x out`
    pub weight: Array2<f64>,
    /// `1 x out`
    pub bias: Array2<f64>,
    pub activation: Activation,
}

/// Fully connected feed-forward network acting on row batches.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    layers: Vec<Layer>,
}

/// Parameter leaves of a network registered on a [`Graph`], in
/// `[w0, b0, w1, b1, ...]` order.
#[derive(Debug, Clone)]
pub struct BoundNetwork {
    pub params: Vec<Var>,
}

impl DenseNetwork {
    /// `widths = [input, hidden.., output]`. Weights and biases are drawn from
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new(widths: &[usize], hidden: Activation, output: Activation, seed: u64) -> Result<Self> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Self::with_rng(widths, hidden, output, &mut rng)
    }

    pub fn with_rng(widths: &[usize], hidden: Activation, output: Activation, rng: &mut impl Rng) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Shape(format!("invalid layer widths {widths:?}")));
        }
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let (fan_in, fan_out) = (widths[i], widths[i + 1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let weight = Array2::from_shape_fn((fan_in, fan_out), |_| rng.gen_range(-bound..bound));
                let bias = Array2::from_shape_fn((1, fan_out), |_| rng.gen_range(-bound..bound));
                let activation = if i + 1 == n { output } else { hidden };
                Layer { weight, bias, activation }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.dim() != (1, l.weight.ncols()) {
                return Err(Error::Shape(format!("layer {i}: bias {:?} for weight {:?}", l.bias.dim(), l.weight.dim())));
            }
            if let Some(next) = layers.get(i + 1) {
                if next.weight.nrows() != l.weight.ncols() {
                    return Err(Error::Shape(format!("layer {} input {} != {}", i + 1, next.weight.nrows(), l.weight.ncols())));
                }
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.ncols()
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(|l| l.weight.ncols())).collect()
    }

    pub fn output_range(&self) -> OutputRange {
        self.layers[self.layers.len() - 1].activation.range()
    }

    pub fn output_activation(&self) -> Activation {
        self.layers[self.layers.len() - 1].activation
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn params(&self) -> Vec<&Array2<f64>> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Array2<f64>> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias]).collect()
    }

    /// Bias row of the last layer.
    pub fn output_bias_mut(&mut self) -> &mut Array2<f64> {
        &mut self.layers.last_mut().expect("at least one layer").bias
    }

    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        self.params().iter().map(|p| p.dim()).collect()
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.ncols() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for l in &self.layers {
            let mut a = h.dot(&l.weight);
            a += &l.bias;
            a.mapv_inplace(|v| l.activation.apply(v));
            h = a;
        }
        Ok(h)
    }

    /// Output-layer values before the output activation.
    pub fn forward_logits(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut a = h.dot(&l.weight);
            a += &l.bias;
            if i < last {
                a.mapv_inplace(|v| l.activation.apply(v));
            }
            h = a;
        }
        Ok(h)
    }

    /// Registers the parameters on `g`, as trainable leaves or as constants.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> BoundNetwork {
        let params = self
            .params()
            .into_iter()
            .map(|p| if trainable { g.param(p.clone()) } else { g.constant(p.clone()) })
            .collect();
        BoundNetwork { params }
    }

    /// Returns `(logits, output)` where `logits` precede the output activation.
    pub fn forward_graph(&self, g: &mut Graph, bound: &BoundNetwork, input: Var) -> Result<(Var, Var)> {
        if g.value(input).ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: g.value(input).ncols() });
        }
        let mut h = input;
        let mut pre = input;
        for (i, l) in self.layers.iter().enumerate() {
            let a = g.matmul(h, bound.params[2 * i])?;
            pre = g.add_row(a, bound.params[2 * i + 1])?;
            h = l.activation.graph(g, pre);
        }
        Ok((pre, h))
    }

    /// Per-row `||grad_z g(z)||_2` for a scalar-output network, built from one
    /// forward-mode tangent pass per input coordinate so that the result stays
    /// differentiable in the parameters.
    pub fn input_gradient_norms(&self, g: &mut Graph, bound: &BoundNetwork, input: Var) -> Result<Var> {
        if self.output_dim() != 1 {
            return Err(Error::Shape(format!("critic output width {} (expected 1)", self.output_dim())));
        }
        let (n, d) = g.value(input).dim();
        if d != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: d });
        }
        let mut h = input;
        let mut tangents: Vec<Var> = (0..d)
            .map(|k| g.constant(Array2::from_shape_fn((n, d), |(_, j)| if j == k { 1.0 } else { 0.0 })))
            .collect();
        for (i, l) in self.layers.iter().enumerate() {
            let (w, b) = (bound.params[2 * i], bound.params[2 * i + 1]);
            let a = g.matmul(h, w)?;
            let pre = g.add_row(a, b)?;
            let post = l.activation.graph(g, pre);
            let deriv = l.activation.derivative(g, pre, post);
            for t in tangents.iter_mut() {
                let dt = g.matmul(*t, w)?;
                *t = match deriv {
                    Some(dv) => g.mul(dv, dt)?,
                    None => dt,
                };
            }
            h = post;
        }
        let mut sq = g.square(tangents[0]);
        for t in &tangents[1..] {
            let s = g.square(*t);
            sq = g.add(sq, s)?;
        }
        Ok(g.sqrt(sq))
    }

    /// Input gradients `(n x d)` of a scalar-output network, numeric only.
    pub fn input_gradients(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if self.output_dim() != 1 {
            return Err(Error::Shape(format!("critic output width {} (expected 1)", self.output_dim())));
        }
        self.check_input(x)?;
        let (n, d) = x.dim();
        let mut out = Array2::zeros((n, d));
        let mut h = x.clone();
        let mut tangents: Vec<Array2<f64>> =
            (0..d).map(|k| Array2::from_shape_fn((n, d), |(_, j)| if j == k { 1.0 } else { 0.0 })).collect();
        for l in &self.layers {
            let mut pre = h.dot(&l.weight);
            pre += &l.bias;
            let post = pre.mapv(|v| l.activation.apply(v));
            let deriv = match l.activation {
                Activation::Identity => None,
                Activation::Relu => Some(pre.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 })),
                Activation::Tanh => Some(post.mapv(|y| 1.0 - y * y)),
                Activation::Sigmoid => Some(post.mapv(|s| s - s * s)),
                Activation::Softplus => Some(pre.mapv(sigmoid)),
            };
            for t in tangents.iter_mut() {
                let mut dt = t.dot(&l.weight);
                if let Some(dv) = &deriv {
                    dt *= dv;
                }
                *t = dt;
            }
            h = post;
        }
        for (k, t) in tangents.iter().enumerate() {
            out.column_mut(k).assign(&t.column(0));
        }
        Ok(out)
    }

    /// Sum of squared weights (biases excluded).
    pub fn weight_l2(&self) -> f64 {
        self.layers.iter().map(|l| l.weight.iter().map(|w| w * w).sum::<f64>()).sum()
    }

    /// Graph node for the sum of squared weights of a bound network.
    pub fn weight_l2_graph(&self, g: &mut Graph, bound: &BoundNetwork) -> Result<Var> {
        let mut total: Option<Var> = None;
        for i in 0..self.layers.len() {
            let sq = g.square(bound.params[2 * i]);
            let s = g.sum(sq);
            total = Some(match total {
                Some(t) => g.add(t, s)?,
                None => s,
            });
        }
        Ok(total.expect("at least one layer"))
    }

    pub fn to_record(&self) -> NetworkRecord {
        NetworkRecord {
            layers: self
                .layers
                .iter()
                .map(|l| LayerRecord {
                    inputs: l.weight.nrows(),
                    outputs: l.weight.ncols(),
                    weight: l.weight.iter().copied().collect(),
                    bias: l.bias.iter().copied().collect(),
                    activation: l.activation,
                })
                .collect(),
        }
    }

    pub fn from_record(record: &NetworkRecord) -> Result<Self> {
        let layers = record
            .layers
            .iter()
            .map(|r| {
                let weight = Array2::from_shape_vec((r.inputs, r.outputs), r.weight.clone())
                    .map_err(|e| Error::Shape(format!("weight: {e}")))?;
                let bias = Array2::from_shape_vec((1, r.outputs), r.bias.clone())
                    .map_err(|e| Error::Shape(format!("bias: {e}")))?;
                Ok(Layer { weight, bias, activation: r.activation })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers)
    }
}

/// Row-major serialized form of a [`DenseNetwork`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRecord {
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Serialize for DenseNetwork {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

impl<'de> Deserialize<'de> for DenseNetwork {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let record = NetworkRecord::deserialize(d)?;
        DenseNetwork::from_record(&record).map_err(serde::de::Error::custom)
    }
}

/// Mean over rows of a `(n x 1)` array.
pub fn column_mean(a: &Array2<f64>) -> f64 {
    a.mean_axis(Axis(0)).map(|m| m[0]).unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn affine_single_layer() {
        let net = DenseNetwork::from_layers(vec![Layer {
            weight: array![[2.0]],
            bias: array![[1.0]],
            activation: Activation::Identity,
        }])
        .unwrap();
        assert_eq!(net.forward(&array![[3.0]]).unwrap(), array![[7.0]]);
    }

    #[test]
    fn zero_weights_give_zero_output_and_norms() {
        let mut net = DenseNetwork::new(&[2, 5, 1], Activation::Relu, Activation::Identity, 3).unwrap();
        for p in net.params_mut() {
            p.fill(0.0);
        }
        let x = array![[0.3, -1.0], [2.0, 0.5]];
        assert!(net.forward(&x).unwrap().iter().all(|v| *v == 0.0));
        let mut g = Graph::new();
        let b = net.bind(&mut g, true);
        let xi = g.constant(x);
        let norms = net.input_gradient_norms(&mut g, &b, xi).unwrap();
        assert!(g.value(norms).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sigmoid_output_in_unit_interval() {
        let net = DenseNetwork::new(&[2, 8, 1], Activation::Tanh, Activation::Sigmoid, 11).unwrap();
        let x = Array2::from_shape_fn((30, 2), |(i, j)| (i as f64 - 15.0) * (j as f64 + 1.0));
        assert_eq!(net.output_range(), OutputRange::Unit);
        assert!(net.forward(&x).unwrap().iter().all(|v| *v > 0.0 && *v < 1.0));
    }

    #[test]
    fn linear_critic_norm_is_weight_norm() {
        let net = DenseNetwork::from_layers(vec![Layer {
            weight: array![[3.0], [-4.0]],
            bias: array![[0.5]],
            activation: Activation::Identity,
        }])
        .unwrap();
        let mut g = Graph::new();
        let b = net.bind(&mut g, true);
        let xi = g.constant(array![[1.0, 2.0], [-7.0, 0.1], [0.0, 0.0]]);
        let norms = net.input_gradient_norms(&mut g, &b, xi).unwrap();
        assert!(g.value(norms).iter().all(|v| (*v - 5.0).abs() < 1e-15));
    }

    #[test]
    fn non_scalar_critic_rejected() {
        let net = DenseNetwork::new(&[2, 3], Activation::Relu, Activation::Identity, 0).unwrap();
        let mut g = Graph::new();
        let b = net.bind(&mut g, true);
        let xi = g.constant(Array2::zeros((1, 2)));
        assert!(net.input_gradient_norms(&mut g, &b, xi).is_err());
        assert!(net.forward(&Array2::zeros((1, 3))).is_err());
    }

    #[test]
    fn graph_forward_matches_plain() {
        let net = DenseNetwork::new(&[2, 6, 4, 1], Activation::Relu, Activation::Softplus, 5).unwrap();
        let x = Array2::from_shape_fn((7, 2), |(i, j)| (i * 3 + j) as f64 * 0.37 - 1.0);
        let mut g = Graph::new();
        let b = net.bind(&mut g, false);
        let xi = g.constant(x.clone());
        let (logits, out) = net.forward_graph(&mut g, &b, xi).unwrap();
        assert_eq!(g.value(out), &net.forward(&x).unwrap());
        assert_eq!(g.value(logits), &net.forward_logits(&x).unwrap());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let net = DenseNetwork::new(&[2, 4, 1], Activation::Relu, Activation::Sigmoid, 9).unwrap();
        let s = serde_json::to_string(&net).unwrap();
        let back: DenseNetwork = serde_json::from_str(&s).unwrap();
        assert_eq!(net, back);
    }
}
