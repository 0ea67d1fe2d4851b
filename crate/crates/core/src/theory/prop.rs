use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::align::EncodedClassifier;
use crate::distributions::{Dataset, Domain, LabeledSample};
use crate::error::{Error, Result};

/// Tolerance of the analytic checks.
pub const EXACT_TOL: f64 = 1e-12;
/// Relative tolerance of the sampled density-ratio check.
pub const SAMPLING_TOL: f64 = 0.02;
pub const SAMPLING_POINTS: usize = 100_000;
const SAMPLING_BINS: usize = 20;

fn check_fraction(rho: f64, open: bool) -> Result<()> {
    let ok = if open { rho > 0.0 && rho < 1.0 } else { (0.0..=1.0).contains(&rho) };
    if ok {
        Ok(())
    } else {
        Err(Error::OutOfRange { value: rho, range: if open { "(0, 1)" } else { "[0, 1]" } })
    }
}

/// Target error lower bound `|rho_s - rho_t|` under exact alignment with zero
/// source error.
pub fn prop1_lower_bound(rho_s: f64, rho_t: f64) -> Result<f64> {
    check_fraction(rho_s, false)?;
    check_fraction(rho_t, false)?;
    Ok((rho_s - rho_t).abs())
}

/// `max(rho_t / rho_s, (1 - rho_t) / (1 - rho_s))`.
pub fn ratio_bound(rho_s: f64, rho_t: f64) -> Result<f64> {
    check_fraction(rho_s, true)?;
    check_fraction(rho_t, true)?;
    Ok((rho_t / rho_s).max((1.0 - rho_t) / (1.0 - rho_s)))
}

/// Smallest `beta` admitting a perfect classifier for the label proportions.
pub fn min_admissible_beta(rho_s: f64, rho_t: f64) -> Result<f64> {
    Ok(ratio_bound(rho_s, rho_t)? - 1.0)
}

/// `phi(x) = offset + slope (x - start)` on `[start, end]`; inputs are
/// uniform with unit density on each domain's union of pieces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub domain: Domain,
    pub start: f64,
    pub end: f64,
    pub slope: f64,
    pub offset: f64,
    /// inputs in `[start, label_cut]` have label 1
    pub label_cut: f64,
    /// `phi(end)`, stored exactly so that images of adjacent pieces meet
    pub image_end: f64,
}

impl AffinePiece {
    fn map(&self, x: f64) -> f64 {
        self.offset + self.slope * (x - self.start)
    }

    fn image(&self) -> (f64, f64) {
        (self.offset, self.image_end)
    }
}

/// Source uniform on `[0, 1]`, target uniform on `[2, 3]`, labels 1 on
/// `[0, rho_s]` and `[2, 2 + rho_t]`, and a piecewise affine map onto
/// `[0, 1]` that sends each target label block onto the matching source block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop2Construction {
    pub rho_s: f64,
    pub rho_t: f64,
    pub pieces: Vec<AffinePiece>,
}

impl Prop2Construction {
    pub fn new(rho_s: f64, rho_t: f64) -> Result<Self> {
        check_fraction(rho_s, true)?;
        check_fraction(rho_t, true)?;
        let pieces = vec![
            AffinePiece { domain: Domain::Source, start: 0.0, end: 1.0, slope: 1.0, offset: 0.0, label_cut: rho_s, image_end: 1.0 },
            AffinePiece {
                domain: Domain::Target,
                start: 2.0,
                end: 2.0 + rho_t,
                slope: rho_s / rho_t,
                offset: 0.0,
                label_cut: 2.0 + rho_t,
                image_end: rho_s,
            },
            AffinePiece {
                domain: Domain::Target,
                start: 2.0 + rho_t,
                end: 3.0,
                slope: (1.0 - rho_s) / (1.0 - rho_t),
                offset: rho_s,
                label_cut: f64::NEG_INFINITY,
                image_end: 1.0,
            },
        ];
        Ok(Self { rho_s, rho_t, pieces })
    }

    fn piece_of(&self, x: f64) -> Result<&AffinePiece> {
        self.pieces
            .iter()
            .find(|p| x >= p.start && x <= p.end)
            .ok_or(Error::OutOfRange { value: x, range: "[0, 1] u [2, 3]" })
    }

    pub fn phi(&self, x: f64) -> Result<f64> {
        Ok(self.piece_of(x)?.map(x))
    }

    pub fn label(&self, x: f64) -> Result<u8> {
        let p = self.piece_of(x)?;
        Ok(u8::from(x <= p.label_cut))
    }

    /// `h(z) = 1[z <= rho_s]`.
    pub fn classify(&self, z: f64) -> u8 {
        u8::from(z <= self.rho_s)
    }

    /// Exact 0-1 error of `h(phi(x))` on a domain, by interval arithmetic.
    pub fn analytic_error(&self, domain: Domain) -> f64 {
        let len = |lo: f64, hi: f64| (hi - lo).max(0.0);
        self.pieces
            .iter()
            .filter(|p| p.domain == domain)
            .map(|p| {
                // predicted-positive set: phi(x) <= rho_s, an initial segment
                let a_hi = if p.slope > 0.0 { (p.start + (self.rho_s - p.offset) / p.slope).min(p.end) } else { p.end };
                let b_hi = p.label_cut.min(p.end);
                let a = len(p.start, a_hi);
                let b = len(p.start, b_hi);
                let both = len(p.start, a_hi.min(b_hi));
                (a + b - 2.0 * both).abs()
            })
            .sum()
    }

    /// Piecewise-constant induced latent densities: `(lo, hi, source, target)`.
    pub fn latent_densities(&self) -> Vec<(f64, f64, f64, f64)> {
        let mut cuts: Vec<f64> = self.pieces.iter().flat_map(|p| {
            let (a, b) = p.image();
            [a, b]
        }).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                let mut dens = [0.0, 0.0];
                for p in &self.pieces {
                    let (a, b) = p.image();
                    if mid > a && mid < b {
                        let k = usize::from(p.domain == Domain::Target);
                        dens[k] += 1.0 / p.slope;
                    }
                }
                (w[0], w[1], dens[0], dens[1])
            })
            .collect()
    }

    /// `sup_z p_T(z) / p_S(z)` from the induced densities.
    pub fn analytic_ratio_sup(&self) -> f64 {
        self.latent_densities()
            .iter()
            .filter(|(_, _, _, t)| *t > 0.0)
            .map(|&(_, _, s, t)| if s > 0.0 { t / s } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }

    /// Stratified-sampling estimate of the latent ratio sup on a fixed
    /// histogram of `[0, 1]`.
    pub fn sampled_ratio_sup(&self, n: usize, seed: u64) -> f64 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut counts = [[0usize; SAMPLING_BINS]; 2];
        for (k, (lo, hi)) in [(0.0, 1.0), (2.0, 3.0)].into_iter().enumerate() {
            for i in 0..n {
                let x = lo + (hi - lo) * (i as f64 + rng.gen::<f64>()) / n as f64;
                let z = self.phi(x.min(hi)).expect("x inside the domain");
                let bin = ((z * SAMPLING_BINS as f64) as usize).min(SAMPLING_BINS - 1);
                counts[k][bin] += 1;
            }
        }
        (0..SAMPLING_BINS)
            .filter(|&b| counts[1][b] > 0)
            .map(|b| if counts[0][b] > 0 { counts[1][b] as f64 / counts[0][b] as f64 } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }

    /// Evenly spaced labeled samples, `n` per domain (midpoint rule).
    pub fn dataset(&self, n: usize) -> Result<Dataset> {
        let mut samples = Vec::with_capacity(2 * n);
        for (domain, lo) in [(Domain::Source, 0.0), (Domain::Target, 2.0)] {
            for i in 0..n {
                let x = lo + (i as f64 + 0.5) / n as f64;
                samples.push(LabeledSample { x: vec![x], label: self.label(x)?, domain });
            }
        }
        Dataset::new(samples)
    }
}

impl EncodedClassifier for Prop2Construction {
    fn encode(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: x.ncols() });
        }
        let z: Result<Vec<f64>> = x.column(0).iter().map(|&v| self.phi(v)).collect();
        Ok(Array2::from_shape_vec((x.nrows(), 1), z?).expect("column"))
    }

    fn classify_latent(&self, z: &Array2<f64>) -> Result<Vec<f64>> {
        Ok(z.column(0).iter().map(|&v| f64::from(self.classify(v))).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop2Report {
    pub rho_s: f64,
    pub rho_t: f64,
    pub ratio_bound: f64,
    pub analytic_ratio: f64,
    pub min_beta: f64,
    pub source_error: f64,
    pub target_error: f64,
    pub sampled_ratio: f64,
    pub sampled_relative_error: f64,
    pub passed: bool,
}

pub fn prop2_build_and_check(rho_s: f64, rho_t: f64) -> Result<(Prop2Construction, Prop2Report)> {
    let c = Prop2Construction::new(rho_s, rho_t)?;
    let bound = ratio_bound(rho_s, rho_t)?;
    let analytic_ratio = c.analytic_ratio_sup();
    let source_error = c.analytic_error(Domain::Source);
    let target_error = c.analytic_error(Domain::Target);
    let sampled_ratio = c.sampled_ratio_sup(SAMPLING_POINTS, 0);
    let sampled_relative_error = (sampled_ratio - bound).abs() / bound;
    let passed = (analytic_ratio - bound).abs() <= EXACT_TOL
        && source_error <= EXACT_TOL
        && target_error <= EXACT_TOL
        && sampled_relative_error <= SAMPLING_TOL;
    let report = Prop2Report {
        rho_s,
        rho_t,
        ratio_bound: bound,
        analytic_ratio,
        min_beta: bound - 1.0,
        source_error,
        target_error,
        sampled_ratio,
        sampled_relative_error,
        passed,
    };
    Ok((c, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prop1_examples() {
        assert!((prop1_lower_bound(0.5, 0.9).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(prop1_lower_bound(0.3, 0.3).unwrap(), 0.0);
        assert_eq!(prop1_lower_bound(0.0, 1.0).unwrap(), 1.0);
        assert!(prop1_lower_bound(1.2, 0.5).is_err());
    }

    #[test]
    fn prop2_examples() {
        let (_, r) = prop2_build_and_check(0.5, 0.9).unwrap();
        assert!((r.ratio_bound - 1.8).abs() < 1e-15);
        assert!((r.min_beta - 0.8).abs() < 1e-12);
        assert!(r.passed, "{r:?}");
        let (_, r) = prop2_build_and_check(0.5, 0.5).unwrap();
        assert!((r.analytic_ratio - 1.0).abs() < 1e-15 && r.min_beta.abs() < 1e-15);
        let (_, r) = prop2_build_and_check(0.3, 0.6).unwrap();
        assert!((r.analytic_ratio - 2.0).abs() < 1e-12);
        assert!(r.passed);
        assert!(prop2_build_and_check(0.0, 0.5).is_err());
        assert!(prop2_build_and_check(0.5, 1.0).is_err());
    }

    #[test]
    fn map_is_continuous_and_onto_unit_interval() {
        let c = Prop2Construction::new(0.3, 0.8).unwrap();
        assert!((c.phi(2.0).unwrap()).abs() < 1e-15);
        assert!((c.phi(2.8).unwrap() - 0.3).abs() < 1e-15);
        assert!((c.phi(3.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(c.phi(1.5).is_err());
        assert_eq!(c.label(2.79).unwrap(), 1);
        assert_eq!(c.label(2.81).unwrap(), 0);
    }

    #[test]
    fn densities_match_block_values() {
        let c = Prop2Construction::new(0.3, 0.8).unwrap();
        let d = c.latent_densities();
        assert_eq!(d.len(), 2);
        assert!((d[0].3 - 0.8 / 0.3).abs() < 1e-12 && (d[0].2 - 1.0).abs() < 1e-15);
        assert!((d[1].3 - 0.2 / 0.7).abs() < 1e-12);
    }
}
