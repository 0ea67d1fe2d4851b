//! Relaxed Wasserstein distance `W_beta(p, q)`: transport all of `p` into
//! sinks of capacity `(1 + beta) q` at Euclidean cost.
//!
//! The primal is solved as a min-cost flow by successive shortest paths; the
//! dual (non-negative 1-Lipschitz potentials on the union support) goes
//! through the dense simplex in [`crate::lp`]. The two routes are
//! independent, so their agreement is a real check of strong duality.

use serde::{Deserialize, Serialize};

use crate::distributions::{AlignedPair, DiscreteDistribution};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, Relation, Sense};

/// Tolerance used for the coupling invariants.
pub const COUPLING_TOL: f64 = 1e-9;

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Joint mass over `supp(p) x supp(q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    /// `mass[i][j]` moved from the i-th atom of `p` to the j-th atom of `q`.
    pub mass: Vec<Vec<f64>>,
    pub cost: Vec<Vec<f64>>,
}

impl Coupling {
    pub fn row_sums(&self) -> Vec<f64> {
        self.mass.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let m = self.mass.first().map_or(0, Vec::len);
        (0..m).map(|j| self.mass.iter().map(|r| r[j]).sum()).collect()
    }

    pub fn total_cost(&self) -> f64 {
        self.mass
            .iter()
            .zip(&self.cost)
            .map(|(m, c)| m.iter().zip(c).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }

    /// Row sums equal `p` and column sums stay below `(1+beta) q`.
    pub fn is_feasible(&self, p: &[f64], q: &[f64], beta: f64) -> bool {
        let rows_ok = self.row_sums().iter().zip(p).all(|(r, p)| (r - p).abs() <= COUPLING_TOL);
        let cols_ok = self.col_sums().iter().zip(q).all(|(c, q)| *c <= (1.0 + beta) * q + COUPLING_TOL);
        let nonneg = self.mass.iter().flatten().all(|m| *m >= 0.0);
        rows_ok && cols_ok && nonneg
    }
}

/// Potentials on the union support of `p` and `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialVector {
    pub atoms: Vec<Vec<f64>>,
    pub g: Vec<f64>,
}

impl PotentialVector {
    /// `g >= 0` and `|g_i - g_j| <= d_ij` up to `tol`.
    pub fn is_feasible(&self, tol: f64) -> bool {
        let n = self.g.len();
        self.g.iter().all(|v| *v >= -tol)
            && (0..n).all(|i| {
                (0..n).all(|j| (self.g[i] - self.g[j]).abs() <= euclidean(&self.atoms[i], &self.atoms[j]) + tol)
            })
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidBeta(beta));
    }
    Ok(())
}

struct Edge {
    to: usize,
    cap: f64,
    cost: f64,
}

/// Residual network with paired forward/backward edges.
struct FlowNetwork {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

const RESIDUAL_EPS: f64 = 1e-15;

impl FlowNetwork {
    fn new(n: usize) -> Self {
        Self { edges: Vec::new(), adj: vec![Vec::new(); n] }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: f64, cost: f64) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge { to, cap, cost });
        self.adj[from].push(id);
        self.edges.push(Edge { to: from, cap: 0.0, cost: -cost });
        self.adj[to].push(id + 1);
        id
    }

    /// Bellman-Ford shortest path tree; returns the incoming edge per node.
    fn shortest_paths(&self, source: usize) -> Vec<Option<usize>> {
        let n = self.adj.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut via = vec![None; n];
        dist[source] = 0.0;
        for _ in 0..n {
            let mut changed = false;
            for u in 0..n {
                if dist[u].is_infinite() {
                    continue;
                }
                for &e in &self.adj[u] {
                    let edge = &self.edges[e];
                    if edge.cap > RESIDUAL_EPS && dist[u] + edge.cost < dist[edge.to] - 1e-15 {
                        dist[edge.to] = dist[u] + edge.cost;
                        via[edge.to] = Some(e);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        via
    }

    /// Pushes up to `amount` from `s` to `t` along successive shortest paths.
    fn min_cost_flow(&mut self, s: usize, t: usize, amount: f64) -> f64 {
        let mut remaining = amount;
        while remaining > RESIDUAL_EPS {
            let via = self.shortest_paths(s);
            if via[t].is_none() {
                break;
            }
            let mut path = Vec::new();
            let mut v = t;
            while v != s {
                let e = via[v].expect("tree edge");
                path.push(e);
                v = self.edges[e ^ 1].to;
            }
            let push = path.iter().map(|&e| self.edges[e].cap).fold(remaining, f64::min);
            for &e in &path {
                self.edges[e].cap -= push;
                self.edges[e ^ 1].cap += push;
            }
            remaining -= push;
        }
        amount - remaining
    }
}

/// Optimal value and coupling of `inf { E|z1 - z2| : gamma in Pi_beta(p, q) }`.
pub fn relaxed_wasserstein_primal(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    beta: f64,
) -> Result<(f64, Coupling)> {
    check_beta(beta)?;
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: q.dim() });
    }
    let (n, m) = (p.len(), q.len());
    let cost: Vec<Vec<f64>> = p
        .atoms()
        .iter()
        .map(|a| q.atoms().iter().map(|b| euclidean(a, b)).collect())
        .collect();
    let (s, t) = (0, n + m + 1);
    let mut net = FlowNetwork::new(n + m + 2);
    for (i, &pi) in p.mass().iter().enumerate() {
        net.add_edge(s, 1 + i, pi, 0.0);
    }
    let mut arcs = vec![vec![0usize; m]; n];
    for i in 0..n {
        for j in 0..m {
            arcs[i][j] = net.add_edge(1 + i, 1 + n + j, f64::INFINITY, cost[i][j]);
        }
    }
    for (j, &qj) in q.mass().iter().enumerate() {
        net.add_edge(1 + n + j, t, (1.0 + beta) * qj, 0.0);
    }
    net.min_cost_flow(s, t, p.mass().iter().sum());
    // flow on an arc is the residual capacity of its reverse edge
    let mass: Vec<Vec<f64>> = arcs
        .iter()
        .map(|row| row.iter().map(|&e| net.edges[e ^ 1].cap).collect())
        .collect();
    let coupling = Coupling { mass, cost };
    Ok((coupling.total_cost(), coupling))
}

/// `sup { E_p g - (1+beta) E_q g : g >= 0, g 1-Lipschitz }` over the union
/// support, as a dense LP.
pub fn relaxed_wasserstein_dual(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    beta: f64,
) -> Result<(f64, PotentialVector)> {
    check_beta(beta)?;
    let pair = AlignedPair::new(p, q)?;
    let n = pair.len();
    let c: Vec<f64> = pair.p.iter().zip(&pair.q).map(|(p, q)| p - (1.0 + beta) * q).collect();
    let mut lp = LinearProgram::new(Sense::Maximize, c);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let mut row = vec![0.0; n];
                row[i] = 1.0;
                row[j] = -1.0;
                lp.constrain(row, Relation::Le, euclidean(&pair.atoms[i], &pair.atoms[j]));
            }
        }
    }
    let sol = lp.solve()?;
    Ok((sol.objective, PotentialVector { atoms: pair.atoms, g: sol.x }))
}

/// Classical Wasserstein-1 with equality marginals, as a transportation LP.
pub fn wasserstein1(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: q.dim() });
    }
    let (n, m) = (p.len(), q.len());
    let cost: Vec<f64> = p
        .atoms()
        .iter()
        .flat_map(|a| q.atoms().iter().map(move |b| euclidean(a, b)))
        .collect();
    let mut lp = LinearProgram::new(Sense::Minimize, cost);
    for (i, &pi) in p.mass().iter().enumerate() {
        let mut row = vec![0.0; n * m];
        row[i * m..(i + 1) * m].iter_mut().for_each(|v| *v = 1.0);
        lp.constrain(row, Relation::Eq, pi);
    }
    for (j, &qj) in q.mass().iter().enumerate() {
        let mut row = vec![0.0; n * m];
        for i in 0..n {
            row[i * m + j] = 1.0;
        }
        lp.constrain(row, Relation::Eq, qj);
    }
    Ok(lp.solve()?.objective)
}

/// `mean(g_target) - (1+beta) mean(g_source)`, the empirical dual objective
/// with `p` the target and `q` the source encodings.
pub fn critic_objective_w(g_on_target: &[f64], g_on_source: &[f64], beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if g_on_target.is_empty() || g_on_source.is_empty() {
        return Err(Error::EmptySupport);
    }
    if let Some(&bad) = g_on_target.iter().chain(g_on_source).find(|g| !(**g >= 0.0)) {
        return Err(Error::OutOfRange { value: bad, range: "[0, inf)" });
    }
    let mt = g_on_target.iter().sum::<f64>() / g_on_target.len() as f64;
    let ms = g_on_source.iter().sum::<f64>() / g_on_source.len() as f64;
    Ok(mt - (1.0 + beta) * ms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64], mass: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::on_line(points, Some(mass)).unwrap()
    }

    #[test]
    fn identical_distributions() {
        let p = line(&[0.0, 1.0, 3.0], &[0.2, 0.5, 0.3]);
        for beta in [0.0, 1.0] {
            let (v, c) = relaxed_wasserstein_primal(&p, &p, beta).unwrap();
            assert!(v.abs() < 1e-15);
            assert!(c.is_feasible(p.mass(), p.mass(), beta));
            let (d, g) = relaxed_wasserstein_dual(&p, &p, beta).unwrap();
            assert!(d.abs() < 1e-12);
            assert!(g.g.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn point_masses() {
        let p = DiscreteDistribution::on_line(&[0.0], None).unwrap();
        let q = DiscreteDistribution::on_line(&[1.0], None).unwrap();
        for beta in [0.0, 1.0, 4.0] {
            assert!((relaxed_wasserstein_primal(&p, &q, beta).unwrap().0 - 1.0).abs() < 1e-15);
        }
        let (d, g) = relaxed_wasserstein_dual(&p, &q, 0.0).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        assert!((g.g[0] - 1.0).abs() < 1e-12 && g.g[1].abs() < 1e-12);
    }

    #[test]
    fn capacity_example() {
        // capacity 2 at 0; the atom at 1 ships its half unit distance 1
        let p = line(&[0.0, 1.0], &[0.5, 0.5]);
        let q = DiscreteDistribution::on_line(&[0.0], None).unwrap();
        let (v, c) = relaxed_wasserstein_primal(&p, &q, 1.0).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        assert!(c.is_feasible(p.mass(), q.mass(), 1.0));
        let (d, _) = relaxed_wasserstein_dual(&p, &q, 1.0).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn beta_zero_matches_cdf_formula_on_line() {
        let p = line(&[0.0, 0.5, 2.0, 3.0], &[0.1, 0.4, 0.3, 0.2]);
        let q = line(&[0.2, 1.0, 2.5], &[0.3, 0.3, 0.4]);
        // W1 on R is the integral of |F_p - F_q|
        let mut pts: Vec<f64> = p.atoms().iter().chain(q.atoms()).map(|a| a[0]).collect();
        pts.sort_by(f64::total_cmp);
        let cdf = |d: &DiscreteDistribution, x: f64| -> f64 {
            d.atoms().iter().zip(d.mass()).filter(|(a, _)| a[0] <= x).map(|(_, m)| m).sum()
        };
        let oracle: f64 = pts.windows(2).map(|w| (cdf(&p, w[0]) - cdf(&q, w[0])).abs() * (w[1] - w[0])).sum();
        let (v, _) = relaxed_wasserstein_primal(&p, &q, 0.0).unwrap();
        assert!((v - oracle).abs() < 1e-12, "{v} vs {oracle}");
        assert!((wasserstein1(&p, &q).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn critic_objective_plug_in() {
        assert_eq!(critic_objective_w(&[0.0; 3], &[0.0; 2], 1.0).unwrap(), 0.0);
        assert!((critic_objective_w(&[0.7; 3], &[0.7; 5], 1.0).unwrap() + 0.7).abs() < 1e-15);
        assert!(critic_objective_w(&[-0.1], &[0.0], 1.0).is_err());
        assert!(critic_objective_w(&[0.1], &[0.0], -1.0).is_err());
    }

    #[test]
    fn critic_objective_with_exact_potentials() {
        // p = delta_0, q = delta_1, beta = 0; symmetric batches of the atoms
        let p = DiscreteDistribution::on_line(&[0.0], None).unwrap();
        let q = DiscreteDistribution::on_line(&[1.0], None).unwrap();
        let (d, pot) = relaxed_wasserstein_dual(&p, &q, 0.0).unwrap();
        let g_at = |x: f64| pot.atoms.iter().position(|a| a[0] == x).map(|i| pot.g[i]).unwrap();
        let obj = critic_objective_w(&[g_at(0.0); 8], &[g_at(1.0); 8], 0.0).unwrap();
        assert!((obj - d).abs() < 1e-12);
    }
}
