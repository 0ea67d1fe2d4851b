mod common;

use std::rc::Rc;

use common::{check_gradients, network_gradient_errors, random_network, ACTIVATIONS};
use ndarray::{array, Array2};
use relaxalign::autodiff::{AdamConfig, AdamState, Graph};

#[test]
fn every_activation_pair_matches_finite_differences() {
    for (i, hidden) in ACTIVATIONS.iter().enumerate() {
        for (j, output) in ACTIVATIONS.iter().enumerate() {
            for s in 0..3 {
                let seed = (i * 10 + j) as u64 * 100 + s;
                let (layers, norms, penalty) = network_gradient_errors(seed, *hidden, *output);
                assert!(layers <= 1e-4, "{hidden:?}/{output:?} seed {seed}: layers {layers}");
                assert!(norms <= 1e-3, "{hidden:?}/{output:?} seed {seed}: norms {norms}");
                assert!(penalty <= 1e-3, "{hidden:?}/{output:?} seed {seed}: penalty {penalty}");
            }
        }
    }
}

#[test]
fn elementwise_ops_match_finite_differences() {
    let a = array![[0.3, 1.2, 0.7], [2.0, 0.4, 1.5]];
    let b = array![[-0.5, 0.8, 0.1], [0.9, -1.1, 0.6]];
    let params = vec![a, b];
    let w = Rc::new(vec![0.25, 1.75]);
    let err = check_gradients(&params, 1e-6, |g, v| {
        let (a, b) = (v[0], v[1]);
        let l = g.log(a);
        let r = g.sqrt(a);
        let ls = g.log_sigmoid(b);
        let sp = g.softplus(b);
        let sg = g.sigmoid(b);
        let th = g.tanh(b);
        let m = g.mul(a, b).unwrap();
        let sq = g.square(m);
        let d = g.sub(l, r).unwrap();
        let s1 = g.add(ls, sp).unwrap();
        let s2 = g.add(sg, th).unwrap();
        let s3 = g.add(s1, s2).unwrap();
        let s4 = g.add(d, sq).unwrap();
        let t = g.add(s3, s4).unwrap();
        let t = g.scale(t, 0.7);
        let t = g.add_scalar(t, 3.0);
        let cols = g.sum_cols(t);
        let wm = g.weighted_mean(cols, w.clone()).unwrap();
        let mean = g.mean(t);
        g.add(wm, mean).unwrap()
    });
    assert!(err <= 1e-4, "{err}");
}

#[test]
fn matrix_ops_match_finite_differences() {
    let x = array![[0.2, -0.4], [1.1, 0.5], [-0.3, 0.9]];
    let w = array![[0.7, -1.2, 0.4], [0.3, 0.8, -0.6]];
    let bias = array![[0.1, -0.2, 0.3]];
    let err = check_gradients(&[x, w, bias], 1e-6, |g, v| {
        let m = g.matmul(v[0], v[1]).unwrap();
        let r = g.add_row(m, v[2]).unwrap();
        let a = g.relu(r);
        let s = g.square(a);
        g.sum(s)
    });
    assert!(err <= 1e-4, "{err}");
}

#[test]
fn tape_input_norms_match_plain_input_gradients() {
    for (k, act) in ACTIVATIONS.iter().enumerate() {
        let (net, x, _) = random_network(7 + k as u64, *act, *act, true);
        let grads = net.input_gradients(&x).unwrap();
        let mut g = Graph::new();
        let bound = net.bind(&mut g, false);
        let input = g.constant(x.clone());
        let norms = net.input_gradient_norms(&mut g, &bound, input).unwrap();
        for (i, row) in grads.rows().into_iter().enumerate() {
            let plain = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((plain - g.value(norms)[[i, 0]]).abs() < 1e-12);
        }
        // numeric input gradients against central differences
        let h = 1e-6;
        for i in 0..x.nrows() {
            for j in 0..x.ncols() {
                let mut up = x.clone();
                up[[i, j]] += h;
                let mut down = x.clone();
                down[[i, j]] -= h;
                let fd = (net.forward(&up).unwrap()[[i, 0]] - net.forward(&down).unwrap()[[i, 0]]) / (2.0 * h);
                assert!(common::grad_err(grads[[i, j]], fd) <= 1e-4, "{act:?}: {} vs {fd}", grads[[i, j]]);
            }
        }
    }
}

#[test]
fn fifty_random_networks() {
    for seed in 0..50u64 {
        let hidden = ACTIVATIONS[(seed % 5) as usize];
        let output = ACTIVATIONS[((seed / 5) % 5) as usize];
        let (layers, norms, penalty) = network_gradient_errors(1000 + seed, hidden, output);
        assert!(layers <= 1e-4 && norms <= 1e-3 && penalty <= 1e-3, "seed {seed}: {layers} {norms} {penalty}");
    }
}

#[test]
fn adam_minimizes_a_quadratic() {
    let mut x: Array2<f64> = array![[3.0, -2.0]];
    let mut opt = AdamState::new(AdamConfig { learning_rate: 0.05, ..AdamConfig::default() }, &[(1, 2)]);
    for _ in 0..2000 {
        let grad = x.mapv(|v| 2.0 * (v - 1.0));
        opt.update(&mut [&mut x], &[grad]).unwrap();
    }
    assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-3), "{x}");
}
