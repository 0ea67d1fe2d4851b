//! f-divergences, their partially linearized relaxations, closed-form duals
//! and reweighting distances.
//!
//! Argument order follows `D(p, q) = sum_z p(z) f(q(z) / p(z))`, so the
//! relaxed divergences vanish exactly when `p / q <= 1 + beta` everywhere.
//! In the adaptation setting `p` is the target encoding distribution and `q`
//! the source one.

use serde::{Deserialize, Serialize};

use crate::distributions::{ratio_sup_aligned, AlignedPair, DiscreteDistribution};
use crate::error::{Error, Result};

const LN_4: f64 = 2.0 * std::f64::consts::LN_2;

/// Convex generator of an f-divergence, together with its Fenchel conjugate.
pub trait Generator {
    fn name(&self) -> String;
    /// `f(u)` for `u >= 0`; `u = 0` is the right limit.
    fn eval(&self, u: f64) -> f64;
    fn deriv(&self, u: f64) -> f64;
    /// `f*(t)`; `+inf` outside the conjugate domain.
    fn conjugate(&self, t: f64) -> f64;
    /// `lim_{u -> inf} f(u) / u`, the per-unit cost of `q` mass where `p` is zero.
    fn recession_slope(&self) -> f64;
    /// `lim_{t -> -inf} f*(t)`.
    fn conjugate_at_neg_infinity(&self) -> f64;
    /// Upper end of the dual variable's range (inclusive unless equal to the
    /// conjugate's open domain boundary).
    fn dual_cap(&self) -> f64;
}

/// The two built-in generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorFunction {
    /// `u ln u - (1 + u) ln(1 + u) + ln 4`, the GAN / Jensen-Shannon
    /// generator shifted so that `f(1) = 0`.
    Gan,
    /// `u ln u`.
    Kl,
}

impl std::str::FromStr for GeneratorFunction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gan" | "js" => Ok(Self::Gan),
            "kl" => Ok(Self::Kl),
            other => Err(Error::Parse(format!("unknown generator `{other}`"))),
        }
    }
}

impl Generator for GeneratorFunction {
    fn name(&self) -> String {
        match self {
            Self::Gan => "gan".into(),
            Self::Kl => "kl".into(),
        }
    }

    fn eval(&self, u: f64) -> f64 {
        match self {
            Self::Gan => {
                if u == 0.0 {
                    LN_4
                } else if u.is_infinite() {
                    f64::NEG_INFINITY
                } else {
                    -u * (1.0 / u).ln_1p() - u.ln_1p() + LN_4
                }
            }
            Self::Kl => {
                if u == 0.0 {
                    0.0
                } else {
                    u * u.ln()
                }
            }
        }
    }

    fn deriv(&self, u: f64) -> f64 {
        match self {
            Self::Gan => -(1.0 / u).ln_1p(),
            Self::Kl => u.ln() + 1.0,
        }
    }

    fn conjugate(&self, t: f64) -> f64 {
        match self {
            Self::Gan => {
                if t >= 0.0 {
                    f64::INFINITY
                } else {
                    -(-t.exp_m1()).ln() - LN_4
                }
            }
            Self::Kl => (t - 1.0).exp(),
        }
    }

    fn recession_slope(&self) -> f64 {
        match self {
            Self::Gan => 0.0,
            Self::Kl => f64::INFINITY,
        }
    }

    fn conjugate_at_neg_infinity(&self) -> f64 {
        match self {
            Self::Gan => -LN_4,
            Self::Kl => 0.0,
        }
    }

    fn dual_cap(&self) -> f64 {
        match self {
            Self::Gan => 0.0,
            Self::Kl => f64::INFINITY,
        }
    }
}

/// `f` linearized to the right of the knee `1 / (1 + beta)`:
///
/// ```text
/// fbar(u) = f(u) + C          u <= knee
///         = slope * (u - 1)   u >  knee
/// ```
///
/// with `slope = f'(knee)` and `C = -f(knee) + slope * knee - slope`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxedGenerator<G = GeneratorFunction> {
    pub base: G,
    pub beta: f64,
    pub knee: f64,
    pub slope: f64,
    pub offset: f64,
}

/// Builds the partially linearized generator.
pub fn relax<G: Generator>(base: G, beta: f64) -> Result<RelaxedGenerator<G>> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidBeta(beta));
    }
    let knee = 1.0 / (1.0 + beta);
    let slope = base.deriv(knee);
    let offset = -base.eval(knee) + slope * knee - slope;
    Ok(RelaxedGenerator { base, beta, knee, slope, offset })
}

impl<G: Generator> Generator for RelaxedGenerator<G> {
    fn name(&self) -> String {
        format!("{}-relaxed({})", self.base.name(), self.beta)
    }

    fn eval(&self, u: f64) -> f64 {
        if u <= self.knee {
            self.base.eval(u) + self.offset
        } else {
            self.slope * (u - 1.0)
        }
    }

    fn deriv(&self, u: f64) -> f64 {
        if u <= self.knee {
            self.base.deriv(u)
        } else {
            self.slope
        }
    }

    fn conjugate(&self, t: f64) -> f64 {
        if t > self.slope {
            f64::INFINITY
        } else {
            self.base.conjugate(t) - self.offset
        }
    }

    fn recession_slope(&self) -> f64 {
        self.slope
    }

    fn conjugate_at_neg_infinity(&self) -> f64 {
        self.base.conjugate_at_neg_infinity() - self.offset
    }

    fn dual_cap(&self) -> f64 {
        self.slope
    }
}

/// Per-atom term `p f(q/p)`, with the perspective limits at `p = 0`.
fn perspective<G: Generator>(gen: &G, p: f64, q: f64) -> Result<f64> {
    if p > 0.0 {
        Ok(p * gen.eval(q / p))
    } else if q > 0.0 {
        let s = gen.recession_slope();
        if s.is_finite() {
            Ok(q * s)
        } else {
            Err(Error::Undefined(format!(
                "{} is unbounded where p has no mass and q does",
                gen.name()
            )))
        }
    } else {
        Ok(0.0)
    }
}

pub(crate) fn primal_aligned<G: Generator>(gen: &G, p: &[f64], q: &[f64]) -> Result<f64> {
    p.iter().zip(q).try_fold(0.0, |acc, (&pi, &qi)| Ok(acc + perspective(gen, pi, qi)?))
}

/// `sum_z p(z) f(q(z)/p(z))` over the union of supports.
pub fn primal_divergence<G: Generator>(gen: &G, p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    let pair = AlignedPair::new(p, q)?;
    primal_aligned(gen, &pair.p, &pair.q)
}

/// Optimal dual variable and contribution of one atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualAtom {
    /// Maximizer `T(z)`; `-inf` where `q(z) = 0`.
    pub t: f64,
    /// `T` sits on the cap `f'(1/(1+beta))`.
    pub clamped: bool,
    /// `q T - p f*(T) + C p`, equal to the atom's primal term.
    pub value: f64,
}

/// Per-atom closed-form maximization of `q T - p f*(T)` over `T <= f'(knee)`.
pub fn dual_atoms<G: Generator>(gen: &RelaxedGenerator<G>, p: &[f64], q: &[f64]) -> Vec<DualAtom> {
    let cap = gen.slope;
    p.iter()
        .zip(q)
        .map(|(&pi, &qi)| {
            if qi <= 0.0 {
                let value = if pi > 0.0 {
                    -pi * gen.base.conjugate_at_neg_infinity() + gen.offset * pi
                } else {
                    0.0
                };
                DualAtom { t: f64::NEG_INFINITY, clamped: false, value }
            } else if pi <= 0.0 {
                DualAtom { t: cap, clamped: true, value: qi * cap }
            } else {
                let free = gen.base.deriv(qi / pi);
                let clamped = free >= cap;
                let t = if clamped { cap } else { free };
                let value = qi * t - pi * gen.base.conjugate(t) + gen.offset * pi;
                DualAtom { t, clamped, value }
            }
        })
        .collect()
}

/// Closed-form evaluation of the variational form; the additive constant
/// `C_{f,beta} * sum p` is included, so the result equals the primal value.
pub fn dual_divergence_discrete<G: Generator>(
    gen: &RelaxedGenerator<G>,
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
) -> Result<f64> {
    let pair = AlignedPair::new(p, q)?;
    Ok(dual_atoms(gen, &pair.p, &pair.q).iter().map(|a| a.value).sum())
}

/// Constant separating [`gan_critic_objective`] at its supremum from the
/// relaxed GAN divergence: `D = sup_g objective + ln((2 + beta)^2 / (1 + beta))`
/// for unit-mass `p`.
pub fn gan_objective_offset(beta: f64) -> f64 {
    ((2.0 + beta) * (2.0 + beta) / (1.0 + beta)).ln()
}

fn check_unit_interval(values: &[f64]) -> Result<()> {
    for &g in values {
        if !(g > 0.0 && g <= 1.0) {
            return Err(Error::OutOfRange { value: g, range: "(0, 1]" });
        }
    }
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `mean_source ln(g / (2+beta)) + mean_target ln(1 - g / (2+beta))`.
pub fn gan_critic_objective(g_source: &[f64], g_target: &[f64], beta: f64) -> Result<f64> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidBeta(beta));
    }
    if g_source.is_empty() || g_target.is_empty() {
        return Err(Error::EmptySupport);
    }
    check_unit_interval(g_source)?;
    check_unit_interval(g_target)?;
    let s = 2.0 + beta;
    let source: Vec<f64> = g_source.iter().map(|g| (g / s).ln()).collect();
    let target: Vec<f64> = g_target.iter().map(|g| (-g / s).ln_1p()).collect();
    Ok(mean(&source) + mean(&target))
}

/// Per-atom weights in `[0, 1]`, for reweighting the `q` side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReweightVector {
    pub weights: Vec<f64>,
    pub beta: f64,
}

impl ReweightVector {
    /// `sum_z q(z) w(z)`.
    pub fn mass(&self, q: &[f64]) -> f64 {
        self.weights.iter().zip(q).map(|(w, q)| w * q).sum()
    }

    /// Indices with non-zero weight.
    pub fn kept(&self) -> Vec<usize> {
        self.weights.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(i, _)| i).collect()
    }
}

/// Number of batch entries kept: `ceil(n / (1 + beta))`, at least one.
pub fn kept_count(n: usize, beta: f64) -> usize {
    let exact = n as f64 / (1.0 + beta);
    // absorb rounding in the division, e.g. 3 / 1.5
    let k = (exact - 1e-9).ceil().max(1.0) as usize;
    k.min(n)
}

/// Keeps the highest-scoring `ceil(n/(1+beta))` entries of a uniformly
/// weighted batch; ties go to the lower index.
pub fn sort_reweight(scores: &[f64], beta: f64) -> Result<ReweightVector> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidBeta(beta));
    }
    if scores.is_empty() {
        return Err(Error::EmptySupport);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut weights = vec![0.0; scores.len()];
    for &i in &order[..kept_count(scores.len(), beta)] {
        weights[i] = 1.0;
    }
    Ok(ReweightVector { weights, beta })
}

/// A distance `D(p, v)` between probability vectors on shared atoms.
pub trait BaseDistance {
    fn eval(&self, atoms: &[Vec<f64>], p: &[f64], v: &[f64]) -> f64;
}

/// Half the l1 distance.
#[derive(Debug, Clone, Copy, Default)]
pub struct TotalVariation;

impl BaseDistance for TotalVariation {
    fn eval(&self, _atoms: &[Vec<f64>], p: &[f64], v: &[f64]) -> f64 {
        0.5 * p.iter().zip(v).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

/// `D_f(p, v)` for a base generator.
#[derive(Debug, Clone, Copy)]
pub struct FDivergence<G>(pub G);

impl<G: Generator> BaseDistance for FDivergence<G> {
    fn eval(&self, _atoms: &[Vec<f64>], p: &[f64], v: &[f64]) -> f64 {
        primal_aligned(&self.0, p, v).unwrap_or(f64::INFINITY)
    }
}

impl<F: Fn(&[f64], &[f64]) -> f64> BaseDistance for F {
    fn eval(&self, _atoms: &[Vec<f64>], p: &[f64], v: &[f64]) -> f64 {
        self(p, v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReweightedDistance {
    pub value: f64,
    /// Minimizing weights over the union of atoms (zero where `q` is).
    pub weights: ReweightVector,
    /// The reweighted distribution `q_w` at the minimizer.
    pub reweighted: Vec<f64>,
}

/// `min_{w in W_{beta,q}} D(p, q_w)`.
///
/// `q_w = (1+beta) q w` ranges over `{v : 0 <= v <= (1+beta) q, sum v = 1}`;
/// the search runs on `v` directly. Supports of at most three atoms use a
/// dense grid; larger ones use pairwise projected coordinate descent, started
/// from `w = 1/(1+beta)` and from the projection of `p`.
pub fn reweighted_distance_discrete<D: BaseDistance>(
    dist: &D,
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    beta: f64,
) -> Result<ReweightedDistance> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidBeta(beta));
    }
    let pair = AlignedPair::new(p, q)?;
    let cap: Vec<f64> = pair.q.iter().map(|q| (1.0 + beta) * q).collect();
    let objective = |v: &[f64]| dist.eval(&pair.atoms, &pair.p, v);

    let v = if pair.len() <= 3 {
        grid_minimize(&objective, &cap)
    } else {
        let starts = [pair.q.clone(), project_capped_simplex(&pair.p, &cap)];
        starts
            .into_iter()
            .map(|s| pairwise_descent(&objective, &cap, s))
            .min_by(|a, b| objective(a).total_cmp(&objective(b)))
            .expect("two starts")
    };
    let weights = v
        .iter()
        .zip(&pair.q)
        .map(|(vi, qi)| if *qi > 0.0 { (vi / ((1.0 + beta) * qi)).clamp(0.0, 1.0) } else { 0.0 })
        .collect();
    Ok(ReweightedDistance { value: objective(&v), weights: ReweightVector { weights, beta }, reweighted: v })
}

/// Euclidean projection onto `{v : 0 <= v <= cap, sum v = 1}` by bisection on
/// the shift. Requires `sum cap >= 1`.
pub(crate) fn project_capped_simplex(x: &[f64], cap: &[f64]) -> Vec<f64> {
    let at = |tau: f64| -> Vec<f64> { x.iter().zip(cap).map(|(xi, c)| (xi - tau).clamp(0.0, *c)).collect() };
    let total = |tau: f64| at(tau).iter().sum::<f64>();
    let lo0 = x.iter().zip(cap).map(|(a, c)| a - c).fold(f64::INFINITY, f64::min) - 1.0;
    let hi0 = x.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    let (mut lo, mut hi) = (lo0, hi0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut v = at(0.5 * (lo + hi));
    fix_total(&mut v, cap);
    v
}

/// Spreads the rounding residual of `sum v - 1` over coordinates with room.
fn fix_total(v: &mut [f64], cap: &[f64]) {
    let residual = 1.0 - v.iter().sum::<f64>();
    if residual == 0.0 {
        return;
    }
    for (vi, c) in v.iter_mut().zip(cap) {
        let nv = (*vi + residual).clamp(0.0, *c);
        if (nv - *vi - residual).abs() == 0.0 {
            *vi = nv;
            return;
        }
    }
}

fn golden_section<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    // endpoints and the midpoint candidate, whichever is lowest
    [(lo, f(lo)), (hi, f(hi)), (c, fc), (d, fd)]
        .into_iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap()
}

/// Coordinate descent over mass exchanges between pairs of atoms.
pub(crate) fn pairwise_descent<F: Fn(&[f64]) -> f64>(objective: &F, cap: &[f64], mut v: Vec<f64>) -> Vec<f64> {
    let n = v.len();
    let mut best = objective(&v);
    for _sweep in 0..500 {
        let before = best;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                // move t >= 0 from j to i
                let hi = (cap[i] - v[i]).min(v[j]).max(0.0);
                if hi <= 0.0 {
                    continue;
                }
                let eval = |t: f64| {
                    let mut trial = v.clone();
                    trial[i] += t;
                    trial[j] -= t;
                    objective(&trial)
                };
                let (t, ft) = golden_section(eval, 0.0, hi);
                if ft < best {
                    v[i] += t;
                    v[j] -= t;
                    best = ft;
                }
            }
        }
        if before - best <= 1e-16 {
            break;
        }
    }
    v
}

/// Grid search over the capped simplex for supports of at most three atoms,
/// polished by pairwise descent.
fn grid_minimize<F: Fn(&[f64]) -> f64>(objective: &F, cap: &[f64]) -> Vec<f64> {
    let n = cap.len();
    let v = match n {
        1 => vec![1.0],
        2 => {
            let lo = (1.0 - cap[1]).max(0.0);
            let hi = cap[0].min(1.0);
            let steps = 4000;
            let mut best = (f64::INFINITY, lo);
            for k in 0..=steps {
                let a = lo + (hi - lo) * k as f64 / steps as f64;
                let val = objective(&[a, 1.0 - a]);
                if val < best.0 {
                    best = (val, a);
                }
            }
            vec![best.1, 1.0 - best.1]
        }
        _ => {
            let steps = 400;
            let mut best = (f64::INFINITY, vec![cap[0].min(1.0), 0.0, 0.0]);
            for a in 0..=steps {
                let v0 = cap[0].min(1.0) * a as f64 / steps as f64;
                let rest = 1.0 - v0;
                let lo = (rest - cap[2]).max(0.0);
                let hi = cap[1].min(rest);
                if lo > hi {
                    continue;
                }
                for b in 0..=steps {
                    let v1 = lo + (hi - lo) * b as f64 / steps as f64;
                    let cand = [v0, v1, (rest - v1).max(0.0)];
                    let val = objective(&cand);
                    if val < best.0 {
                        best = (val, cand.to_vec());
                    }
                }
            }
            best.1
        }
    };
    pairwise_descent(objective, cap, v)
}

/// `sup p/q` on aligned vectors; re-exported for the property tests.
pub fn ratio_sup(p: &[f64], q: &[f64]) -> f64 {
    ratio_sup_aligned(p, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(masses: &[f64]) -> DiscreteDistribution {
        let pts: Vec<f64> = (0..masses.len()).map(|i| i as f64).collect();
        DiscreteDistribution::on_line(&pts, Some(masses)).unwrap()
    }

    #[test]
    fn generators_vanish_at_one() {
        for g in [GeneratorFunction::Gan, GeneratorFunction::Kl] {
            assert!(g.eval(1.0).abs() < 1e-12, "{g:?}");
        }
    }

    #[test]
    fn gan_slope_at_knee() {
        for beta in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let r = relax(GeneratorFunction::Gan, beta).unwrap();
            assert!((r.slope - (1.0 / (2.0 + beta)).ln()).abs() < 1e-14);
            assert!(r.eval(1.0).abs() < 1e-12);
            let left = r.base.eval(r.knee) + r.offset;
            let right = r.slope * r.knee - r.slope;
            assert!((left - right).abs() < 1e-12);
        }
        assert_eq!(relax(GeneratorFunction::Kl, 0.0).unwrap().knee, 1.0);
        assert!(matches!(relax(GeneratorFunction::Gan, -0.1), Err(Error::InvalidBeta(_))));
    }

    #[test]
    fn conjugate_consistency() {
        for g in [GeneratorFunction::Gan, GeneratorFunction::Kl] {
            for &u in &[0.01, 0.3, 1.0, 2.5, 9.0] {
                let lhs = g.conjugate(g.deriv(u));
                let rhs = u * g.deriv(u) - g.eval(u);
                assert!((lhs - rhs).abs() < 1e-9, "{g:?} u={u}");
            }
        }
    }

    #[test]
    fn two_atom_examples() {
        let p = line(&[0.5, 0.5]);
        let q = line(&[0.25, 0.75]);
        let r = relax(GeneratorFunction::Gan, 1.0).unwrap();
        let d = primal_divergence(&r, &p, &q).unwrap();
        assert!(d.abs() < 1e-15, "{d}");
        assert_eq!(primal_divergence(&r, &p, &p).unwrap().abs(), 0.0);
        let p2 = line(&[0.8, 0.2]);
        let d2 = primal_divergence(&r, &p2, &q).unwrap();
        assert!(d2 > 1e-3, "{d2}");
        let dual = dual_divergence_discrete(&r, &p2, &q).unwrap();
        assert!((dual - d2).abs() < 1e-12);
    }

    #[test]
    fn q_mass_outside_p_support() {
        // p/q = [2, 0] <= 2: admissible although q has an atom p misses.
        let p = line(&[1.0, 0.0]);
        let q = line(&[0.5, 0.5]);
        let r = relax(GeneratorFunction::Gan, 1.0).unwrap();
        assert!(primal_divergence(&r, &p, &q).unwrap().abs() < 1e-15);
        assert!(dual_divergence_discrete(&r, &p, &q).unwrap().abs() < 1e-15);
        // unrelaxed KL is unbounded there
        assert!(primal_divergence(&GeneratorFunction::Kl, &p, &q).is_err());
    }

    #[test]
    fn clamped_atoms_contribute_linear_term() {
        let p = [0.3, 0.1, 0.6];
        let q = [0.2, 0.5, 0.3];
        let r = relax(GeneratorFunction::Gan, 0.5).unwrap();
        for (a, (pi, qi)) in dual_atoms(&r, &p, &q).iter().zip(p.iter().zip(&q)) {
            if pi / qi <= 1.5 {
                assert!(a.clamped);
                assert!((a.value - r.slope * (qi - pi)).abs() < 1e-15);
            } else {
                assert!(!a.clamped);
            }
        }
    }

    #[test]
    fn gan_objective_plug_in() {
        let v = gan_critic_objective(&[1.0; 3], &[1.0; 2], 0.0).unwrap();
        assert!((v - 2.0 * 0.5f64.ln()).abs() < 1e-15);
        let v = gan_critic_objective(&[1.0], &[1.0], 2.0).unwrap();
        assert!((v - (0.25f64.ln() + 0.75f64.ln())).abs() < 1e-15);
        assert!(gan_critic_objective(&[0.0], &[0.5], 1.0).is_err());
        assert!(gan_critic_objective(&[0.5], &[1.5], 1.0).is_err());
    }

    #[test]
    fn gan_scan_matches_dual_on_single_atom() {
        // constant critic on p = q = delta: sup over g in (0, 1] by scanning
        for beta in [0.0, 0.5, 2.0] {
            let best = (1..=10_000)
                .map(|k| k as f64 / 10_000.0)
                .map(|g| gan_critic_objective(&[g], &[g], beta).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            let p = DiscreteDistribution::dirac(vec![0.0]).unwrap();
            let r = relax(GeneratorFunction::Gan, beta).unwrap();
            let dual = dual_divergence_discrete(&r, &p, &p).unwrap();
            assert!((best + gan_objective_offset(beta) - dual).abs() < 1e-9, "beta={beta}");
        }
    }

    #[test]
    fn sort_reweight_examples() {
        let w = sort_reweight(&[0.9, 0.2, 0.5, 0.7], 1.0).unwrap();
        assert_eq!(w.kept(), vec![0, 3]);
        let w = sort_reweight(&[0.9, 0.2, 0.5, 0.7], 0.0).unwrap();
        assert_eq!(w.kept(), vec![0, 1, 2, 3]);
        let w = sort_reweight(&[0.4; 4], 1.0).unwrap();
        assert_eq!(w.kept(), vec![0, 1]);
        assert_eq!(kept_count(3, 0.5), 2);
        assert_eq!(kept_count(10, 4.0), 2);
        assert_eq!(kept_count(7, 2.0), 3);
        assert!(sort_reweight(&[], 1.0).is_err());
    }

    fn tv_closed_form(p: &[f64], q: &[f64], beta: f64) -> f64 {
        p.iter().zip(q).map(|(p, q)| (p - (1.0 + beta) * q).max(0.0)).sum()
    }

    #[test]
    fn reweighted_tv_examples() {
        let q = line(&[0.25, 0.75]);
        let d = reweighted_distance_discrete(&TotalVariation, &line(&[0.5, 0.5]), &q, 1.0).unwrap();
        assert!(d.value < 1e-12, "{}", d.value);
        assert!((d.weights.weights[0] - 1.0).abs() < 1e-9);
        assert!((d.weights.weights[1] - 1.0 / 3.0).abs() < 1e-9);
        assert!((d.weights.mass(&[0.25, 0.75]) - 0.5).abs() < 1e-9);

        // exhaustive search over discretized w for p = [1, 0]
        let brute = (0..=1000)
            .filter_map(|k| {
                let w0 = k as f64 / 1000.0;
                // sum q w = 1/2  =>  w1 = (0.5 - 0.25 w0) / 0.75
                let w1 = (0.5 - 0.25 * w0) / 0.75;
                (0.0..=1.0).contains(&w1).then(|| {
                    let v = [2.0 * 0.25 * w0, 2.0 * 0.75 * w1];
                    0.5 * ((1.0 - v[0]).abs() + v[1].abs())
                })
            })
            .fold(f64::INFINITY, f64::min);
        let d = reweighted_distance_discrete(&TotalVariation, &line(&[1.0, 0.0]), &q, 1.0).unwrap();
        assert!((d.value - brute).abs() < 1e-9);
        assert!((d.value - 0.5).abs() < 1e-9);
        let same = reweighted_distance_discrete(&TotalVariation, &q, &q, 3.0).unwrap();
        assert!(same.value < 1e-12);
    }

    #[test]
    fn descent_from_uniform_weights_reaches_closed_form() {
        let cases: [(&[f64], &[f64], f64); 3] = [
            (&[0.1, 0.2, 0.3, 0.4, 0.0], &[0.3, 0.3, 0.1, 0.1, 0.2], 1.0),
            (&[0.05, 0.05, 0.3, 0.3, 0.3], &[0.2, 0.2, 0.2, 0.2, 0.2], 0.5),
            (&[0.25, 0.25, 0.25, 0.25], &[0.4, 0.3, 0.2, 0.1], 0.2),
        ];
        for (p, q, beta) in cases {
            let cap: Vec<f64> = q.iter().map(|q| (1.0 + beta) * q).collect();
            let v = pairwise_descent(&|v: &[f64]| TotalVariation.eval(&[], p, v), &cap, q.to_vec());
            let got = TotalVariation.eval(&[], p, &v);
            assert!((got - tv_closed_form(p, q, beta)).abs() < 1e-10, "{got}");
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(v.iter().zip(&cap).all(|(v, c)| *v >= 0.0 && *v <= c + 1e-15));
        }
    }

    #[test]
    fn projection_is_feasible() {
        let cap = [0.3, 0.9, 0.6];
        let v = project_capped_simplex(&[2.0, -1.0, 0.5], &cap);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((v[0] - 0.3).abs() < 1e-12);
        assert!((v[1] - 0.1).abs() < 1e-12);
        assert!((v[2] - 0.6).abs() < 1e-12);
    }
}
