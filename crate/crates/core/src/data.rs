//! Labeled point sets and the seeded Gaussian blob generator.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::output::fmt_f64;
use crate::seed;

/// Radius of the circle blob centers sit on.
pub const BLOB_CENTER_RADIUS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    points: Vec<Vec<f64>>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledDataset {
    /// Points must share a dimension and labels must cover `0..k` without gaps.
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: labels.len(),
            });
        }
        if points.is_empty() {
            return Err(Error::InvalidArgument("dataset is empty".into()));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidArgument("points have dimension 0".into()));
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        let num_classes = labels.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; num_classes];
        for &l in &labels {
            seen[l] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(format!(
                "labels are not contiguous: class {missing} has no points"
            )));
        }
        Ok(Self {
            points,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (0..self.dim()).map(|i| format!("x{i}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for (p, l) in self.points.iter().zip(&self.labels) {
            let mut row: Vec<String> = p.iter().map(|&v| fmt_f64(v)).collect();
            row.push(l.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `features..., label` rows after a header line.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::Parse(format!(
                    "row {}: need at least one feature and a label",
                    line + 2
                )));
            }
            let parse_err = |col: usize| Error::Parse(format!("row {}, column {}", line + 2, col + 1));
            let point = (0..rec.len() - 1)
                .map(|c| rec[c].trim().parse::<f64>().map_err(|_| parse_err(c)))
                .collect::<Result<Vec<_>>>()?;
            let label = rec[rec.len() - 1]
                .trim()
                .parse::<usize>()
                .map_err(|_| parse_err(rec.len() - 1))?;
            points.push(point);
            labels.push(label);
        }
        Self::new(points, labels)
    }
}

/// `k` isotropic Gaussian clusters of `n_per_class` points each.
///
/// Centers lie evenly spaced on a circle of radius [`BLOB_CENTER_RADIUS`] in
/// the first two coordinates, rotated by a seeded phase; remaining
/// coordinates of each center are uniform in `[-1, 1]`. In one dimension the
/// centers are evenly spaced on a line with the same neighbour separation.
/// Points are emitted class by class.
pub fn make_blobs(
    k: usize,
    n_per_class: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if k < 2 || n_per_class == 0 || dim == 0 || !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::InvalidArgument(
            "make_blobs needs k >= 2, n_per_class >= 1, dim >= 1, spread > 0".into(),
        ));
    }
    let mut rng = seed::rng(seed);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let mut c = vec![0.0; dim];
            if dim == 1 {
                let step = 2.0 * BLOB_CENTER_RADIUS * (std::f64::consts::PI / k as f64).sin();
                c[0] = step * (j as f64 - (k as f64 - 1.0) / 2.0);
            } else {
                let angle = phase + std::f64::consts::TAU * j as f64 / k as f64;
                c[0] = BLOB_CENTER_RADIUS * angle.cos();
                c[1] = BLOB_CENTER_RADIUS * angle.sin();
                for v in c.iter_mut().skip(2) {
                    *v = rng.random_range(-1.0..1.0);
                }
            }
            c
        })
        .collect();
    let noise = Normal::new(0.0, spread).expect("valid normal");
    let mut points = Vec::with_capacity(k * n_per_class);
    let mut labels = Vec::with_capacity(k * n_per_class);
    for (label, center) in centers.iter().enumerate() {
        for _ in 0..n_per_class {
            points.push(center.iter().map(|c| c + noise.sample(&mut rng)).collect());
            labels.push(label);
        }
    }
    LabeledDataset::new(points, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::distance;

    #[test]
    fn blob_counts() {
        let d = make_blobs(3, 100, 2, 0.5, 1).unwrap();
        assert_eq!(d.len(), 300);
        for c in 0..3 {
            assert_eq!(d.labels().iter().filter(|&&l| l == c).count(), 100);
        }
        assert_eq!(d, make_blobs(3, 100, 2, 0.5, 1).unwrap());
    }

    #[test]
    fn vanishing_spread_collapses_to_centers() {
        let d = make_blobs(3, 5, 4, 1e-200, 2).unwrap();
        for i in 0..d.len() {
            let first = d.labels().iter().position(|&l| l == d.label(i)).unwrap();
            assert!(distance(d.point(i), d.point(first)) < 1e-150);
        }
    }

    #[test]
    fn nearest_center_classifier_is_accurate() {
        let d = make_blobs(3, 200, 2, 0.7, 8).unwrap();
        // Oracle: class means as centers, nearest-center rule.
        let mut means = vec![vec![0.0; 2]; 3];
        for i in 0..d.len() {
            for (m, v) in means[d.label(i)].iter_mut().zip(d.point(i)) {
                *m += v / 200.0;
            }
        }
        let correct = (0..d.len())
            .filter(|&i| {
                let best = (0..3)
                    .min_by(|&a, &b| {
                        distance(d.point(i), &means[a]).total_cmp(&distance(d.point(i), &means[b]))
                    })
                    .unwrap();
                best == d.label(i)
            })
            .count();
        assert!(correct as f64 / d.len() as f64 >= 0.99);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(make_blobs(1, 10, 2, 0.5, 0).is_err());
        assert!(make_blobs(3, 0, 2, 0.5, 0).is_err());
        assert!(make_blobs(3, 10, 0, 0.5, 0).is_err());
        assert!(make_blobs(3, 10, 2, 0.0, 0).is_err());
    }

    #[test]
    fn labels_must_be_contiguous() {
        assert!(LabeledDataset::new(vec![vec![0.0], vec![1.0]], vec![0, 2]).is_err());
        assert!(LabeledDataset::new(vec![vec![0.0], vec![1.0, 2.0]], vec![0, 1]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let d = make_blobs(2, 4, 3, 0.5, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        d.write_csv(&p).unwrap();
        assert_eq!(LabeledDataset::read_csv(&p).unwrap(), d);
    }
}
