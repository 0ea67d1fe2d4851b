#![allow(dead_code)]

use ndarray::Array2;
use rand::Rng;
use relaxalign::autodiff::{one_sided_penalty, Activation, BoundNetwork, DenseNetwork, Graph, Var};
use relaxalign::distributions::DiscreteDistribution;

/// Masses on shared atoms `0..n` of the line; each entry is zero with
/// probability 1/4, and both sides keep some mass.
pub fn random_masses<R: Rng>(rng: &mut R, max_atoms: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rng.gen_range(1..=max_atoms);
    let draw = |rng: &mut R| -> Vec<f64> {
        loop {
            let m: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.25) { 0.0 } else { rng.gen::<f64>() }).collect();
            if m.iter().sum::<f64>() > 0.0 {
                return m;
            }
        }
    };
    let p = draw(rng);
    let q = draw(rng);
    (p, q)
}

/// Atoms at random distinct points of the plane.
pub fn random_points<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| vec![i as f64 + rng.gen::<f64>() * 0.5, rng.gen::<f64>() * 3.0]).collect()
}

pub fn pair_on(points: &[Vec<f64>], p: &[f64], q: &[f64]) -> (DiscreteDistribution, DiscreteDistribution) {
    (
        DiscreteDistribution::new(points.to_vec(), Some(p)).unwrap(),
        DiscreteDistribution::new(points.to_vec(), Some(q)).unwrap(),
    )
}

/// Random pair on up to `max_atoms` shared planar atoms.
pub fn random_pair<R: Rng>(rng: &mut R, max_atoms: usize) -> (DiscreteDistribution, DiscreteDistribution) {
    let (p, q) = random_masses(rng, max_atoms);
    let points = random_points(rng, p.len());
    pair_on(&points, &p, &q)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// `|a - b| / max(|a|, |b|, 1e-3)`, the relative error used by gradient checks.
pub fn grad_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Largest gradient error of `loss` over every entry of `params`, comparing
/// the tape with central differences of step `h`.
pub fn check_gradients<F>(params: &[Array2<f64>], h: f64, loss: F) -> f64
where
    F: Fn(&mut Graph, &[Var]) -> Var,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.param(p.clone())).collect();
    let l = loss(&mut g, &vars);
    let grads = g.backward(l).unwrap();
    let eval = |ps: &[Array2<f64>]| {
        let mut g = Graph::new();
        let vars: Vec<Var> = ps.iter().map(|p| g.param(p.clone())).collect();
        let l = loss(&mut g, &vars);
        g.scalar(l)
    };
    let mut worst: f64 = 0.0;
    let mut work = params.to_vec();
    for (k, p) in params.iter().enumerate() {
        let analytic = grads.get_or_zeros(vars[k], p.dim());
        for idx in 0..p.len() {
            let (r, c) = (idx / p.ncols(), idx % p.ncols());
            let x = p[[r, c]];
            work[k][[r, c]] = x + h;
            let up = eval(&work);
            work[k][[r, c]] = x - h;
            let down = eval(&work);
            work[k][[r, c]] = x;
            worst = worst.max(grad_err(analytic[[r, c]], (up - down) / (2.0 * h)));
        }
    }
    worst
}

pub const ACTIVATIONS: [Activation; 5] =
    [Activation::Identity, Activation::Relu, Activation::Tanh, Activation::Sigmoid, Activation::Softplus];

fn bound(ps: &[Var]) -> BoundNetwork {
    BoundNetwork { params: ps.to_vec() }
}

/// Random small network with given activations, its input batch and a random
/// output weighting. With `scalar` the output width is one.
pub fn random_network(seed: u64, hidden: Activation, output: Activation, scalar: bool) -> (DenseNetwork, Array2<f64>, Array2<f64>) {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let depth = rng.gen_range(1..=3);
    let mut widths = vec![rng.gen_range(1..=4)];
    for _ in 0..depth {
        widths.push(rng.gen_range(1..=5));
    }
    if scalar {
        *widths.last_mut().unwrap() = 1;
    }
    let mut net = DenseNetwork::with_rng(&widths, hidden, output, &mut rng).unwrap();
    // larger weights so that penalties and kinks are exercised
    for p in net.params_mut() {
        p.mapv_inplace(|v| 2.5 * v);
    }
    let n = rng.gen_range(1..=6);
    let x = Array2::from_shape_fn((n, widths[0]), |_| rng.gen_range(-1.5..1.5));
    let c = Array2::from_shape_fn((n, *widths.last().unwrap()), |_| rng.gen_range(-1.0..1.0));
    (net, x, c)
}

/// Errors of the layer gradients, of the input-gradient-norm sum and of the
/// one-sided penalty for two random networks drawn from `seed`.
pub fn network_gradient_errors(seed: u64, hidden: Activation, output: Activation) -> (f64, f64, f64) {
    let h = 1e-6;
    let (net, x, c) = random_network(seed, hidden, output, false);
    let params: Vec<Array2<f64>> = net.params().into_iter().cloned().collect();
    let layers = check_gradients(&params, h, |g, ps| {
        let input = g.constant(x.clone());
        let (_, out) = net.forward_graph(g, &bound(ps), input).unwrap();
        let cv = g.constant(c.clone());
        let weighted = g.mul(out, cv).unwrap();
        g.sum(weighted)
    });

    let (critic, z, _) = random_network(seed ^ 0x9e37_79b9, hidden, output, true);
    let params: Vec<Array2<f64>> = critic.params().into_iter().cloned().collect();
    let norms = check_gradients(&params, h, |g, ps| {
        let input = g.constant(z.clone());
        let n = critic.input_gradient_norms(g, &bound(ps), input).unwrap();
        g.sum(n)
    });
    let penalty = check_gradients(&params, h, |g, ps| {
        let input = g.constant(z.clone());
        let n = critic.input_gradient_norms(g, &bound(ps), input).unwrap();
        one_sided_penalty(g, n)
    });
    (layers, norms, penalty)
}

use relaxalign::align::{TrainConfig, Trainer};
use relaxalign::distributions::Dataset;

/// Steps two trainers side by side and reports the first step at which their
/// encoder or head parameters differ in any entry.
pub fn first_divergence(a: TrainConfig, b: TrainConfig, data: &Dataset, steps: usize) -> Option<usize> {
    let mut ta = Trainer::new(a, data).unwrap();
    let mut tb = Trainer::new(b, data).unwrap();
    let same = |x: &Trainer, y: &Trainer| {
        let (mx, my) = (x.model(), y.model());
        let pairs = mx.encoder.params().into_iter().zip(my.encoder.params()).chain(mx.head.params().into_iter().zip(my.head.params()));
        pairs.into_iter().all(|(p, q)| p == q)
    };
    if !same(&ta, &tb) {
        return Some(0);
    }
    for s in 1..=steps {
        ta.step().unwrap();
        tb.step().unwrap();
        if !same(&ta, &tb) {
            return Some(s);
        }
    }
    None
}
