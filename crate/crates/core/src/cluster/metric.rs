//! Pairwise distances and the named metric registry.

use rayon::prelude::*;

use crate::code::SplineCode;
use crate::error::{Error, Result};
use crate::linalg::distance;

/// Something a metric can measure: a real vector or a spline code.
#[derive(Debug, Clone, Copy)]
pub enum Item<'a> {
    Vector(&'a [f64]),
    Code(&'a SplineCode),
}

impl Item<'_> {
    fn shape(&self) -> (usize, Option<(usize, usize)>) {
        match self {
            Item::Vector(v) => (v.len(), None),
            Item::Code(c) => (c.len(), Some((c.span().start(), c.span().k()))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Euclidean,
    Hamming,
}

pub trait Metric: Send + Sync {
    fn name(&self) -> &'static str;
    fn kind(&self) -> MetricKind;
    fn distance(&self, a: Item<'_>, b: Item<'_>) -> Result<f64>;
}

pub struct Euclidean;

impl Metric for Euclidean {
    fn name(&self) -> &'static str {
        "euclidean"
    }

    fn kind(&self) -> MetricKind {
        MetricKind::Euclidean
    }

    /// Codes are treated as 0/1 vectors, giving `sqrt(hamming)`.
    fn distance(&self, a: Item<'_>, b: Item<'_>) -> Result<f64> {
        match (a, b) {
            (Item::Vector(x), Item::Vector(y)) => Ok(distance(x, y)),
            (Item::Code(x), Item::Code(y)) => Ok((x.hamming(y)? as f64).sqrt()),
            _ => Err(Error::InvalidArgument("cannot mix vectors and codes".into())),
        }
    }
}

pub struct Hamming;

impl Metric for Hamming {
    fn name(&self) -> &'static str {
        "hamming"
    }

    fn kind(&self) -> MetricKind {
        MetricKind::Hamming
    }

    /// Vectors count the coordinates that differ.
    fn distance(&self, a: Item<'_>, b: Item<'_>) -> Result<f64> {
        match (a, b) {
            (Item::Code(x), Item::Code(y)) => Ok(x.hamming(y)? as f64),
            (Item::Vector(x), Item::Vector(y)) => {
                crate::linalg::check_dim(x.len(), y.len())?;
                Ok(x.iter().zip(y).filter(|(p, q)| p != q).count() as f64)
            }
            _ => Err(Error::InvalidArgument("cannot mix vectors and codes".into())),
        }
    }
}

/// Metrics selectable by name.
pub struct MetricRegistry {
    metrics: Vec<Box<dyn Metric>>,
}

impl Default for MetricRegistry {
    fn default() -> Self {
        Self {
            metrics: vec![Box::new(Euclidean), Box::new(Hamming)],
        }
    }
}

impl MetricRegistry {
    pub fn register(&mut self, metric: Box<dyn Metric>) {
        self.metrics.retain(|m| m.name() != metric.name());
        self.metrics.push(metric);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Metric> {
        self.metrics
            .iter()
            .find(|m| m.name() == name)
            .map(|m| m.as_ref())
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown metric {name:?} (known: {})",
                    self.names().join(", ")
                ))
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.metrics.iter().map(|m| m.name()).collect()
    }
}

/// Condensed upper-triangular distances, row by row: (0,1), (0,2), …, (1,2), …
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
    metric: MetricKind,
}

fn condensed_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl DistanceMatrix {
    pub fn from_condensed(n: usize, data: Vec<f64>, metric: MetricKind) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument("need at least two items".into()));
        }
        if data.len() != n * (n - 1) / 2 {
            return Err(Error::DimensionMismatch {
                expected: n * (n - 1) / 2,
                got: data.len(),
            });
        }
        if data.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::InvalidArgument("distances must be finite and >= 0".into()));
        }
        Ok(Self { n, data, metric })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn condensed(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.data[condensed_index(self.n, i, j)],
            std::cmp::Ordering::Greater => self.data[condensed_index(self.n, j, i)],
        }
    }

    pub fn median(&self) -> f64 {
        let mut v = self.data.clone();
        v.sort_by(f64::total_cmp);
        crate::stats::quantile_sorted(&v, 0.5)
    }

    /// Same distances with items reordered so that new item `i` is old `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: perm.len(),
            });
        }
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.n {
            for j in i + 1..self.n {
                data.push(self.get(perm[i], perm[j]));
            }
        }
        Self::from_condensed(self.n, data, self.metric)
    }
}

/// All pairwise distances; rows are computed in parallel.
pub fn distance_matrix(items: &[Item<'_>], metric: &dyn Metric) -> Result<DistanceMatrix> {
    let n = items.len();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two items".into()));
    }
    let shape = items[0].shape();
    if let Some(bad) = items.iter().position(|it| it.shape() != shape) {
        return Err(Error::SpanMismatch(format!(
            "item {bad} has shape {:?}, expected {:?}",
            items[bad].shape(),
            shape
        )));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| metric.distance(items[i], items[j]))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    DistanceMatrix::from_condensed(n, rows.into_iter().flatten().collect(), metric.kind())
}

pub fn vectors(points: &[Vec<f64>]) -> Vec<Item<'_>> {
    points.iter().map(|p| Item::Vector(p)).collect()
}

pub fn codes(codes: &[SplineCode]) -> Vec<Item<'_>> {
    codes.iter().map(Item::Code).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::LayerSpan;
    use crate::seed;
    use rand::Rng;

    fn code(bits: &[bool]) -> SplineCode {
        SplineCode::from_bits(bits, LayerSpan::new(0, 0), vec![0]).unwrap()
    }

    #[test]
    fn hamming_example() {
        let cs = vec![
            code(&[true, false, true]),
            code(&[true, true, true]),
            code(&[false, false, false]),
        ];
        let reg = MetricRegistry::default();
        let dm = distance_matrix(&codes(&cs), reg.get("hamming").unwrap()).unwrap();
        assert_eq!(dm.condensed(), &[1.0, 2.0, 3.0]);
        assert_eq!(dm.get(2, 1), 3.0);
        assert_eq!(dm.get(1, 1), 0.0);
        let e = distance_matrix(&codes(&cs), reg.get("euclidean").unwrap()).unwrap();
        assert_eq!(e.get(0, 2), 2f64.sqrt());
    }

    #[test]
    fn identical_items_have_zero_distance() {
        let pts = vec![vec![1.0, 2.0], vec![1.0, 2.0]];
        let dm = distance_matrix(&vectors(&pts), &Euclidean).unwrap();
        assert_eq!(dm.condensed(), &[0.0]);
    }

    #[test]
    fn matches_naive_pairwise() {
        let mut rng = seed::rng(3);
        let pts: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let dm = distance_matrix(&vectors(&pts), &Euclidean).unwrap();
        for i in 0..200 {
            for j in 0..200 {
                let naive: f64 = pts[i]
                    .iter()
                    .zip(&pts[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                assert!((dm.get(i, j) - naive).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_mixed_items() {
        let pts = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(distance_matrix(&vectors(&pts), &Euclidean).is_err());
        let a = code(&[true, false]);
        let b = SplineCode::from_bits(&[true, false], LayerSpan::new(1, 0), vec![0]).unwrap();
        assert!(distance_matrix(&[Item::Code(&a), Item::Code(&b)], &Hamming).is_err());
        assert!(distance_matrix(&vectors(&pts[..1]), &Euclidean).is_err());
        assert!(MetricRegistry::default().get("cosine").is_err());
    }

    #[test]
    fn permutation_reorders_entries() {
        let pts = vec![vec![0.0], vec![1.0], vec![3.0]];
        let dm = distance_matrix(&vectors(&pts), &Euclidean).unwrap();
        let p = dm.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(p.get(0, 1), 3.0);
        assert_eq!(p.get(0, 2), 2.0);
        assert_eq!(p.get(1, 2), 1.0);
    }
}
