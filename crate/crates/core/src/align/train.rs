use ndarray::{Array2, Axis};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::config::{PenaltyPoints, TrainConfig};
use super::metrics::{LatentSnapshot, RunMetrics, StepMetrics};
use super::model::{encode_samples, evaluate, Model};
use super::objective::{cross_entropy_graph, objective_graph, CriticNodes};
use crate::autodiff::{one_sided_penalty, AdamState, Graph, Var};
use crate::distributions::{Dataset, Domain};
use crate::error::{Error, Result};

const STREAM_INIT: u64 = 0;
const STREAM_SOURCE: u64 = 1;
const STREAM_TARGET: u64 = 2;
const STREAM_CRITIC: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn gather(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(0), idx)
}

fn draw(rng: &mut ChaCha20Rng, n: usize, size: usize) -> Vec<usize> {
    (0..size).map(|_| rng.gen_range(0..n)).collect()
}

/// Step-by-step trainer. Source batches, target batches and everything the
/// critic consumes come from separate random streams, so the encoder's data
/// order does not depend on the variant.
pub struct Trainer {
    config: TrainConfig,
    model: Model,
    xs: Array2<f64>,
    ys: Array2<f64>,
    xt: Array2<f64>,
    enc_opt: AdamState,
    head_opt: AdamState,
    critic_opt: AdamState,
    rng_source: ChaCha20Rng,
    rng_target: ChaCha20Rng,
    rng_critic: ChaCha20Rng,
    step: usize,
    last_critic_loss: f64,
    metrics: RunMetrics,
}

impl Trainer {
    pub fn new(config: TrainConfig, data: &Dataset) -> Result<Self> {
        config.validate()?;
        let xs = data.features(Domain::Source);
        let xt = data.features(Domain::Target);
        if xs.nrows() == 0 || (config.variant.is_adversarial() && xt.nrows() == 0) {
            return Err(Error::InvalidSpec("training needs samples from both domains".into()));
        }
        let labels = data.labels(Domain::Source);
        let ys = Array2::from_shape_fn((labels.len(), 1), |(i, _)| f64::from(labels[i]));
        let mut init = stream(config.seed, STREAM_INIT);
        let model = Model::new(&config, data.dim(), &mut init)?;
        let adam = config.adam();
        Ok(Self {
            enc_opt: AdamState::new(adam, &model.encoder.param_shapes()),
            head_opt: AdamState::new(adam, &model.head.param_shapes()),
            critic_opt: AdamState::new(adam, &model.critic.param_shapes()),
            rng_source: stream(config.seed, STREAM_SOURCE),
            rng_target: stream(config.seed, STREAM_TARGET),
            rng_critic: stream(config.seed, STREAM_CRITIC),
            config,
            model,
            xs,
            ys,
            xt,
            step: 0,
            last_critic_loss: 0.0,
            metrics: RunMetrics { steps: Vec::new(), evaluation: None, latents: Vec::new() },
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn metrics(&self) -> &RunMetrics {
        &self.metrics
    }

    /// One alternating step: critic update(s), then one encoder/head update.
    pub fn step(&mut self) -> Result<StepMetrics> {
        let b = self.config.batch_size;
        let is = draw(&mut self.rng_source, self.xs.nrows(), b);
        let bs = gather(&self.xs, &is);
        let by = gather(&self.ys, &is);
        let adversarial = self.config.variant.is_adversarial();
        let bt = if adversarial {
            let it = draw(&mut self.rng_target, self.xt.nrows(), b);
            Some(gather(&self.xt, &it))
        } else {
            None
        };
        if let Some(bt) = &bt {
            for k in 0..self.config.critic_steps {
                let loss = if k == 0 {
                    self.critic_update(&bs, bt)?
                } else {
                    let cs = gather(&self.xs, &draw(&mut self.rng_critic, self.xs.nrows(), b));
                    let ct = gather(&self.xt, &draw(&mut self.rng_critic, self.xt.nrows(), b));
                    self.critic_update(&cs, &ct)?
                };
                self.last_critic_loss = loss;
            }
        }
        let (source_loss, distance) = self.encoder_update(&bs, &by, bt.as_ref())?;
        self.step += 1;
        let m = StepMetrics { step: self.step, source_loss, distance, critic_loss: self.last_critic_loss };
        if self.step.is_multiple_of(self.config.log_interval) || self.step == self.config.steps {
            self.metrics.steps.push(m);
        }
        Ok(m)
    }

    fn critic_nodes(&self, g: &mut Graph, critic: &crate::autodiff::BoundNetwork, zs: Var, zt: Var) -> Result<CriticNodes> {
        let (logits_s, out_s) = self.model.critic.forward_graph(g, critic, zs)?;
        let (logits_t, out_t) = self.model.critic.forward_graph(g, critic, zt)?;
        Ok(CriticNodes { logits_s, out_s, logits_t, out_t })
    }

    fn critic_update(&mut self, xs: &Array2<f64>, xt: &Array2<f64>) -> Result<f64> {
        let zs_val = self.model.encoder.forward(xs)?;
        let zt_val = self.model.encoder.forward(xt)?;
        let mut g = Graph::new();
        let critic = self.model.critic.bind(&mut g, true);
        let zs = g.constant(zs_val.clone());
        let zt = g.constant(zt_val.clone());
        let nodes = self.critic_nodes(&mut g, &critic, zs, zt)?;
        let (obj, _) = objective_graph(&mut g, self.config.variant, self.config.beta, &nodes)?;
        let mut loss = g.scale(obj, -1.0);
        if self.config.variant.is_wasserstein() && self.config.gp_coeff > 0.0 {
            let points = match self.config.penalty_points {
                PenaltyPoints::Interpolates => {
                    let n = zs_val.nrows().min(zt_val.nrows());
                    let mut mix = Array2::zeros((n, zs_val.ncols()));
                    for i in 0..n {
                        let e: f64 = self.rng_critic.gen();
                        let row = &zs_val.row(i) * e + &zt_val.row(i) * (1.0 - e);
                        mix.row_mut(i).assign(&row);
                    }
                    mix
                }
                PenaltyPoints::Data => ndarray::concatenate(Axis(0), &[zs_val.view(), zt_val.view()])
                    .map_err(|e| Error::Shape(e.to_string()))?,
            };
            let pts = g.constant(points);
            let norms = self.model.critic.input_gradient_norms(&mut g, &critic, pts)?;
            let pen = one_sided_penalty(&mut g, norms);
            let scaled = g.scale(pen, self.config.gp_coeff);
            loss = g.add(loss, scaled)?;
        }
        let value = g.scalar(loss);
        let grads = g
            .backward(loss)
            .map_err(|e| Error::NonFinite(format!("critic step {}: {e}", self.step + 1)))?;
        let gv: Vec<Array2<f64>> = critic.params.iter().map(|&v| grads.get_or_zeros(v, g.value(v).dim())).collect();
        self.critic_opt.update(&mut self.model.critic.params_mut(), &gv)?;
        Ok(value)
    }

    fn encoder_update(&mut self, xs: &Array2<f64>, ys: &Array2<f64>, xt: Option<&Array2<f64>>) -> Result<(f64, f64)> {
        let mut g = Graph::new();
        let enc = self.model.encoder.bind(&mut g, true);
        let head = self.model.head.bind(&mut g, true);
        let xs_node = g.constant(xs.clone());
        let (_, zs) = self.model.encoder.forward_graph(&mut g, &enc, xs_node)?;
        let (logits, _) = self.model.head.forward_graph(&mut g, &head, zs)?;
        let ce = cross_entropy_graph(&mut g, logits, ys)?;
        let mut loss = ce;
        let mut distance = 0.0;
        if let Some(xt) = xt {
            let critic = self.model.critic.bind(&mut g, false);
            let xt_node = g.constant(xt.clone());
            let (_, zt) = self.model.encoder.forward_graph(&mut g, &enc, xt_node)?;
            let nodes = self.critic_nodes(&mut g, &critic, zs, zt)?;
            let (obj, _) = objective_graph(&mut g, self.config.variant, self.config.beta, &nodes)?;
            distance = g.scalar(obj);
            let weighted = g.scale(obj, self.config.lambda);
            loss = g.add(loss, weighted)?;
        }
        if self.config.l2_coeff > 0.0 {
            let le = self.model.encoder.weight_l2_graph(&mut g, &enc)?;
            let lh = self.model.head.weight_l2_graph(&mut g, &head)?;
            let l2 = g.add(le, lh)?;
            let scaled = g.scale(l2, self.config.l2_coeff);
            loss = g.add(loss, scaled)?;
        }
        let source_loss = g.scalar(ce);
        let grads = g
            .backward(loss)
            .map_err(|e| Error::NonFinite(format!("encoder step {}: {e}", self.step + 1)))?;
        let collect = |params: &[Var]| -> Vec<Array2<f64>> {
            params.iter().map(|&v| grads.get_or_zeros(v, g.value(v).dim())).collect()
        };
        let ge = collect(&enc.params);
        let gh = collect(&head.params);
        self.enc_opt.update(&mut self.model.encoder.params_mut(), &ge)?;
        self.head_opt.update(&mut self.model.head.params_mut(), &gh)?;
        Ok((source_loss, distance))
    }

    fn snapshot(&mut self, data: &Dataset) -> Result<()> {
        let points = encode_samples(&self.model, data, self.config.latent_points)?;
        self.metrics.latents.push(LatentSnapshot { step: self.step, points });
        Ok(())
    }

    /// Runs the remaining steps, evaluates on `data` and returns the model.
    pub fn run(mut self, data: &Dataset) -> Result<(Model, RunMetrics)> {
        while self.step < self.config.steps {
            self.step()?;
            let every = self.config.latent_interval;
            if every > 0 && self.step.is_multiple_of(every) && self.step != self.config.steps {
                self.snapshot(data)?;
            }
        }
        self.snapshot(data)?;
        self.metrics.evaluation = Some(evaluate(&self.model, data)?);
        Ok((self.model, self.metrics))
    }
}

/// Trains `config` on `data`; deterministic in the seed.
pub fn train(config: TrainConfig, data: &Dataset) -> Result<(Model, RunMetrics)> {
    Trainer::new(config, data)?.run(data)
}
