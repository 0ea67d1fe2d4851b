//! Finite discrete distributions, labeled samples and the synthetic
//! mixture-of-Gaussians generator.

use std::collections::HashMap;
use std::io::{Read, Write};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a normalized distribution.
pub const MASS_TOL: f64 = 1e-12;

/// Hashable identity of a point: exact coordinates, with `-0.0` folded into `0.0`.
fn atom_key(point: &[f64]) -> Vec<u64> {
    point
        .iter()
        .map(|&c| if c == 0.0 { 0u64 } else { c.to_bits() })
        .collect()
}

/// A probability vector over finitely many distinct points of R^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    atoms: Vec<Vec<f64>>,
    mass: Vec<f64>,
}

impl DiscreteDistribution {
    /// Builds a normalized distribution, merging duplicate points. Without
    /// weights every input point gets equal mass.
    pub fn new(points: Vec<Vec<f64>>, weights: Option<&[f64]>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySupport);
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidSpec("points must have at least one coordinate".into()));
        }
        let raw: Vec<f64> = match weights {
            Some(w) => {
                if w.len() != points.len() {
                    return Err(Error::DimensionMismatch { expected: points.len(), got: w.len() });
                }
                w.to_vec()
            }
            None => vec![1.0; points.len()],
        };
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidWeights);
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidWeights);
        }

        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut atoms: Vec<Vec<f64>> = Vec::new();
        let mut mass: Vec<f64> = Vec::new();
        for (point, w) in points.into_iter().zip(raw) {
            if point.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: point.len() });
            }
            if point.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidSpec("non-finite coordinate".into()));
            }
            match index.get(&atom_key(&point)) {
                Some(&i) => mass[i] += w,
                None => {
                    index.insert(atom_key(&point), atoms.len());
                    atoms.push(point.iter().map(|&c| if c == 0.0 { 0.0 } else { c }).collect());
                    mass.push(w);
                }
            }
        }
        for m in &mut mass {
            *m /= total;
        }
        Ok(Self { atoms, mass })
    }

    /// Convenience constructor for distributions on the real line.
    pub fn on_line(points: &[f64], weights: Option<&[f64]>) -> Result<Self> {
        Self::new(points.iter().map(|&x| vec![x]).collect(), weights)
    }

    /// Point mass at `point`.
    pub fn dirac(point: Vec<f64>) -> Result<Self> {
        Self::new(vec![point], None)
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Mass at an exact point, zero when the point is not an atom.
    pub fn mass_at(&self, point: &[f64]) -> f64 {
        let key = atom_key(point);
        self.atoms
            .iter()
            .position(|a| atom_key(a) == key)
            .map_or(0.0, |i| self.mass[i])
    }
}

/// See [`DiscreteDistribution::new`].
pub fn make_discrete(points: Vec<Vec<f64>>, weights: Option<&[f64]>) -> Result<DiscreteDistribution> {
    DiscreteDistribution::new(points, weights)
}

/// Two distributions expressed on the union of their atoms.
#[derive(Debug, Clone)]
pub struct AlignedPair {
    pub atoms: Vec<Vec<f64>>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl AlignedPair {
    pub fn new(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<Self> {
        if p.dim() != q.dim() {
            return Err(Error::DimensionMismatch { expected: p.dim(), got: q.dim() });
        }
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut atoms = Vec::new();
        let mut pm = Vec::new();
        let mut qm = Vec::new();
        for (which, dist) in [(0usize, p), (1usize, q)] {
            for (a, &m) in dist.atoms().iter().zip(dist.mass()) {
                let i = *index.entry(atom_key(a)).or_insert_with(|| {
                    atoms.push(a.clone());
                    pm.push(0.0);
                    qm.push(0.0);
                    atoms.len() - 1
                });
                if which == 0 {
                    pm[i] += m;
                } else {
                    qm[i] += m;
                }
            }
        }
        Ok(Self { atoms, p: pm, q: qm })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// `sup_z p(z)/q(z)` over the union of supports; `+inf` when `p` puts mass
/// where `q` has none.
pub fn density_ratio_sup(p: &DiscreteDistribution, q: &DiscreteDistribution) -> f64 {
    let Ok(pair) = AlignedPair::new(p, q) else {
        return f64::INFINITY;
    };
    ratio_sup_aligned(&pair.p, &pair.q)
}

pub(crate) fn ratio_sup_aligned(p: &[f64], q: &[f64]) -> f64 {
    let mut sup = 0.0f64;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            sup = sup.max(pi / qi);
        }
    }
    sup
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Source => "source",
            Domain::Target => "target",
        }
    }
}

impl std::str::FromStr for Domain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "source" | "S" | "0" => Ok(Domain::Source),
            "target" | "T" | "1" => Ok(Domain::Target),
            other => Err(Error::Parse(format!("unknown domain `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub label: u8,
    pub domain: Domain,
}

/// Labeled samples from both domains. Target labels are carried for
/// evaluation only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
    rho_source: f64,
    rho_target: f64,
}

pub const DATASET_CSV_VERSION: &str = "# relaxalign dataset v1";

impl Dataset {
    pub fn new(samples: Vec<LabeledSample>) -> Result<Self> {
        let dim = samples.first().map(|s| s.x.len()).ok_or(Error::EmptySupport)?;
        for s in &samples {
            if s.label > 1 {
                return Err(Error::InvalidSpec(format!("label {} is not binary", s.label)));
            }
            if s.x.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: s.x.len() });
            }
        }
        let frac = |d: Domain| {
            let (n, pos) = samples
                .iter()
                .filter(|s| s.domain == d)
                .fold((0usize, 0usize), |(n, pos), s| (n + 1, pos + s.label as usize));
            if n == 0 {
                0.0
            } else {
                pos as f64 / n as f64
            }
        };
        let rho_source = frac(Domain::Source);
        let rho_target = frac(Domain::Target);
        Ok(Self { samples, rho_source, rho_target })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn rho_source(&self) -> f64 {
        self.rho_source
    }

    pub fn rho_target(&self) -> f64 {
        self.rho_target
    }

    pub fn dim(&self) -> usize {
        self.samples[0].x.len()
    }

    pub fn domain(&self, domain: Domain) -> impl Iterator<Item = &LabeledSample> {
        self.samples.iter().filter(move |s| s.domain == domain)
    }

    pub fn count(&self, domain: Domain) -> usize {
        self.domain(domain).count()
    }

    /// Feature matrix (one row per sample) of a domain.
    pub fn features(&self, domain: Domain) -> Array2<f64> {
        let rows: Vec<&LabeledSample> = self.domain(domain).collect();
        let d = self.dim();
        Array2::from_shape_fn((rows.len(), d), |(i, j)| rows[i].x[j])
    }

    pub fn labels(&self, domain: Domain) -> Vec<u8> {
        self.domain(domain).map(|s| s.label).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{DATASET_CSV_VERSION}")?;
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.dim()).map(|i| format!("x{i}")).collect();
        header.push("label".into());
        header.push("domain".into());
        w.write_record(&header)?;
        for s in &self.samples {
            let mut rec: Vec<String> = s.x.iter().map(|v| format!("{v:?}")).collect();
            rec.push(s.label.to_string());
            rec.push(s.domain.as_str().into());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let mut samples = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() < 3 {
                return Err(Error::Parse("dataset rows need x1..xd,label,domain".into()));
            }
            let d = rec.len() - 2;
            let x = (0..d)
                .map(|i| rec[i].trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            let label = rec[d].trim().parse::<u8>().map_err(|e| Error::Parse(e.to_string()))?;
            let domain = rec[d + 1].parse()?;
            samples.push(LabeledSample { x, label, domain });
        }
        Self::new(samples)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: Vec<f64>,
    /// Per-coordinate standard deviations (diagonal covariance).
    pub std_dev: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub class0: GaussianComponent,
    pub class1: GaussianComponent,
    /// Fraction of samples with label 1.
    pub positive_fraction: f64,
    pub count: usize,
}

impl DomainSpec {
    /// `(n0, n1)` with `n0 = floor(count * (1 - positive_fraction))` and the
    /// remainder assigned to the positive class.
    pub fn class_counts(&self) -> (usize, usize) {
        // tolerance absorbs representation error such as 1 - 0.9 < 0.1
        let n0 = (self.count as f64 * (1.0 - self.positive_fraction) + 1e-9).floor() as usize;
        let n0 = n0.min(self.count);
        (n0, self.count - n0)
    }
}

/// Two labeled Gaussians per domain with diagonal covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureSpec {
    pub source: DomainSpec,
    pub target: DomainSpec,
}

pub const DEFAULT_SAMPLES_PER_DOMAIN: usize = 1000;

impl GaussianMixtureSpec {
    /// Balanced source, 10%/90% target.
    pub fn label_shift() -> Self {
        Self::with_target_fraction(0.9)
    }

    /// Balanced source and target.
    pub fn no_shift() -> Self {
        Self::with_target_fraction(0.5)
    }

    pub fn with_target_fraction(positive_fraction: f64) -> Self {
        let g = |mean: [f64; 2], sd: [f64; 2]| GaussianComponent { mean: mean.to_vec(), std_dev: sd.to_vec() };
        Self {
            source: DomainSpec {
                class0: g([-1.0, -0.3], [0.1, 0.4]),
                class1: g([1.0, 0.3], [0.1, 0.4]),
                positive_fraction: 0.5,
                count: DEFAULT_SAMPLES_PER_DOMAIN,
            },
            target: DomainSpec {
                class0: g([-0.3, -1.0], [0.4, 0.1]),
                class1: g([0.3, 1.0], [0.4, 0.1]),
                positive_fraction,
                count: DEFAULT_SAMPLES_PER_DOMAIN,
            },
        }
    }

    pub fn with_counts(mut self, source: usize, target: usize) -> Self {
        self.source.count = source;
        self.target.count = target;
        self
    }

    pub fn dim(&self) -> usize {
        self.source.class0.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::InvalidSpec("empty mean vector".into()));
        }
        for (name, dom) in [("source", &self.source), ("target", &self.target)] {
            if dom.count == 0 {
                return Err(Error::InvalidSpec(format!("{name}: zero sample count")));
            }
            if !(0.0..=1.0).contains(&dom.positive_fraction) {
                return Err(Error::InvalidSpec(format!("{name}: proportion outside [0,1]")));
            }
            for c in [&dom.class0, &dom.class1] {
                if c.mean.len() != d || c.std_dev.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: c.mean.len().max(c.std_dev.len()) });
                }
                if c.std_dev.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                    return Err(Error::InvalidSpec(format!("{name}: standard deviations must be > 0")));
                }
                if c.mean.iter().any(|m| !m.is_finite()) {
                    return Err(Error::InvalidSpec(format!("{name}: non-finite mean")));
                }
            }
        }
        Ok(())
    }
}

/// Draws a labeled dataset; deterministic in `(spec, seed)`.
pub fn sample_synthetic(spec: &GaussianMixtureSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(spec.source.count + spec.target.count);
    for (domain, dom) in [(Domain::Source, &spec.source), (Domain::Target, &spec.target)] {
        let (n0, n1) = dom.class_counts();
        for (label, comp, n) in [(0u8, &dom.class0, n0), (1u8, &dom.class1, n1)] {
            for _ in 0..n {
                let x = comp
                    .mean
                    .iter()
                    .zip(&comp.std_dev)
                    .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                samples.push(LabeledSample { x, label, domain });
            }
        }
    }
    Dataset::new(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_without_weights() {
        let d = make_discrete(vec![vec![0.0], vec![1.0]], None).unwrap();
        assert_eq!(d.mass(), &[0.5, 0.5]);
    }

    #[test]
    fn duplicates_merge() {
        let d = make_discrete(vec![vec![3.0], vec![3.0], vec![1.0]], None).unwrap();
        assert_eq!(d.atoms(), &[vec![3.0], vec![1.0]]);
        assert!((d.mass()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((d.mass()[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn negative_zero_is_zero() {
        let d = make_discrete(vec![vec![0.0, 1.0], vec![-0.0, 1.0]], None).unwrap();
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn weights_normalize() {
        let d = make_discrete(vec![vec![0.0], vec![1.0]], Some(&[2.0, 6.0])).unwrap();
        assert_eq!(d.mass(), &[0.25, 0.75]);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(make_discrete(vec![], None), Err(Error::EmptySupport)));
        assert!(matches!(
            make_discrete(vec![vec![0.0], vec![1.0]], Some(&[0.0, 0.0])),
            Err(Error::InvalidWeights)
        ));
        assert!(make_discrete(vec![vec![0.0], vec![1.0]], Some(&[1.0, -1.0])).is_err());
        assert!(make_discrete(vec![vec![0.0], vec![1.0, 2.0]], None).is_err());
    }

    #[test]
    fn ratio_sup_cases() {
        let p = DiscreteDistribution::on_line(&[0.0, 1.0], Some(&[0.5, 0.5])).unwrap();
        let q = DiscreteDistribution::on_line(&[0.0, 1.0], Some(&[0.25, 0.75])).unwrap();
        assert_eq!(density_ratio_sup(&p, &p), 1.0);
        assert_eq!(density_ratio_sup(&p, &q), 2.0);
        let outside = DiscreteDistribution::on_line(&[0.0, 5.0], None).unwrap();
        assert_eq!(density_ratio_sup(&outside, &q), f64::INFINITY);
        // mass of q outside supp(p) does not matter
        assert_eq!(density_ratio_sup(&q, &outside), f64::INFINITY);
        let wide = DiscreteDistribution::on_line(&[0.0, 1.0, 5.0], None).unwrap();
        assert!((density_ratio_sup(&p, &wide) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn synthetic_counts_and_determinism() {
        let spec = GaussianMixtureSpec::label_shift();
        let a = sample_synthetic(&spec, 7).unwrap();
        let b = sample_synthetic(&spec, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.count(Domain::Source), 1000);
        assert_eq!(a.rho_source(), 0.5);
        assert_eq!(a.rho_target(), 0.9);
        let c = sample_synthetic(&spec, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rounding_goes_to_positive_class() {
        let spec = GaussianMixtureSpec::label_shift().with_counts(7, 13);
        // floor(13 * 0.1) = 1 negative, 12 positive; floor(7 * 0.5) = 3 negatives.
        assert_eq!(spec.target.class_counts(), (1, 12));
        assert_eq!(spec.source.class_counts(), (3, 4));
        let ds = sample_synthetic(&spec, 1).unwrap();
        assert_eq!(ds.rho_target(), 12.0 / 13.0);
        assert_eq!(ds.rho_source(), 4.0 / 7.0);
    }

    #[test]
    fn synthetic_moments_match_components() {
        let spec = GaussianMixtureSpec::label_shift().with_counts(20_000, 20_000);
        let ds = sample_synthetic(&spec, 3).unwrap();
        let class0_target: Vec<&LabeledSample> =
            ds.domain(Domain::Target).filter(|s| s.label == 0).collect();
        let n = class0_target.len() as f64;
        let mean: Vec<f64> = (0..2).map(|j| class0_target.iter().map(|s| s.x[j]).sum::<f64>() / n).collect();
        let var: Vec<f64> = (0..2)
            .map(|j| class0_target.iter().map(|s| (s.x[j] - mean[j]).powi(2)).sum::<f64>() / n)
            .collect();
        assert!((mean[0] + 0.3).abs() < 0.03 && (mean[1] + 1.0).abs() < 0.03, "{mean:?}");
        assert!((var[0] - 0.16).abs() < 0.01 && (var[1] - 0.01).abs() < 0.001, "{var:?}");
    }

    #[test]
    fn spec_validation() {
        let mut spec = GaussianMixtureSpec::label_shift();
        spec.target.count = 0;
        assert!(sample_synthetic(&spec, 0).is_err());
        let mut spec = GaussianMixtureSpec::label_shift();
        spec.source.class0.std_dev[1] = 0.0;
        assert!(spec.validate().is_err());
        let json = serde_json::to_string(&GaussianMixtureSpec::no_shift()).unwrap();
        let back: GaussianMixtureSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, GaussianMixtureSpec::no_shift());
    }

    #[test]
    fn dataset_csv_roundtrip() {
        let ds = sample_synthetic(&GaussianMixtureSpec::label_shift().with_counts(5, 5), 2).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(DATASET_CSV_VERSION));
        assert!(text.lines().nth(1).unwrap() == "x1,x2,label,domain");
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
    }
}
