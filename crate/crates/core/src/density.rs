//! Polytope-boundary density: how many code bits flip per unit of Euclidean
//! distance, measured between point pairs, along interpolation paths, in a
//! small sphere around a point, and along rays through the origin.
//!
//! All points here live in the input space of the span's first layer.

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::code::{code_at, LayerSpan, SplineCode};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::{axpy, check_dim, distance, dot, norm, scale};
use crate::net::{argmax, PwlNetwork};
use crate::seed;
use crate::stats::{welch_t, WelchResult};

pub const DEFAULT_LOCAL_SAMPLES: usize = 150;
pub const DEFAULT_RADIUS_FRACTION: f64 = 0.05;
pub const DEFAULT_MAX_PAIRS: usize = 2000;
pub const DEFAULT_PATH_SAMPLES: usize = 256;

/// Distances at or below this are treated as coincident points.
pub const COINCIDENT_DISTANCE: f64 = 1e-12;

fn density_of(c1: &SplineCode, c2: &SplineCode, x: &[f64], y: &[f64]) -> Result<f64> {
    let d = distance(x, y);
    if d <= COINCIDENT_DISTANCE {
        return Err(Error::CoincidentPoints);
    }
    Ok(c1.hamming(c2)? as f64 / d)
}

/// `hamming(code(x), code(y)) / ‖x − y‖`.
pub fn pair_density(net: &PwlNetwork, span: LayerSpan, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim(x.len(), y.len())?;
    density_of(&code_at(net, span, x)?, &code_at(net, span, y)?, x, y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport {
    pub span: LayerSpan,
    /// Raw (unnormalized) mean intra-class pair density.
    pub intra_mean: f64,
    pub inter_mean: f64,
    pub intra_samples: Vec<f64>,
    pub inter_samples: Vec<f64>,
    pub intra_pairs: Vec<(usize, usize)>,
    pub inter_pairs: Vec<(usize, usize)>,
    /// Mean raw density over all kept pairs, intra and inter together.
    pub normalization_constant: f64,
    /// Pairs dropped because their activations coincide.
    pub skipped_coincident: usize,
}

impl DensityReport {
    pub fn normalized_intra(&self) -> Vec<f64> {
        scale(&self.intra_samples, 1.0 / self.normalization_constant)
    }

    pub fn normalized_inter(&self) -> Vec<f64> {
        scale(&self.inter_samples, 1.0 / self.normalization_constant)
    }

    pub fn normalized_intra_mean(&self) -> f64 {
        self.intra_mean / self.normalization_constant
    }

    pub fn normalized_inter_mean(&self) -> f64 {
        self.inter_mean / self.normalization_constant
    }

    /// Normalized inter-class mean minus normalized intra-class mean.
    pub fn gap(&self) -> f64 {
        self.normalized_inter_mean() - self.normalized_intra_mean()
    }

    /// Welch's test of normalized intra against normalized inter densities.
    pub fn welch(&self) -> Result<WelchResult> {
        welch_t(&self.normalized_intra(), &self.normalized_inter())
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Picks at most `max_pairs` of `pairs`, keeping their original order.
fn subsample_pairs(pairs: Vec<(usize, usize)>, max_pairs: usize, seed: u64) -> Vec<(usize, usize)> {
    if pairs.len() <= max_pairs {
        return pairs;
    }
    let mut rng = seed::rng(seed);
    let mut picked = index::sample(&mut rng, pairs.len(), max_pairs).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| pairs[i]).collect()
}

/// Intra- versus inter-class boundary density in the input space of
/// `span.start`.
///
/// Each group keeps at most `max_pairs` pairs, subsampled with seeds derived
/// from `seed`. Pairs whose activations coincide are skipped and counted.
pub fn class_density_report(
    net: &PwlNetwork,
    span: LayerSpan,
    data: &LabeledDataset,
    max_pairs: usize,
    seed: u64,
) -> Result<DensityReport> {
    span.validate(net)?;
    if data.num_classes() < 2 {
        return Err(Error::Degenerate("need at least two classes".into()));
    }
    for c in 0..data.num_classes() {
        if data.labels().iter().filter(|&&l| l == c).count() < 2 {
            return Err(Error::Degenerate(format!("class {c} has fewer than two points")));
        }
    }
    if max_pairs == 0 {
        return Err(Error::InvalidArgument("max_pairs must be positive".into()));
    }
    let activations: Vec<Vec<f64>> = (0..data.len())
        .into_par_iter()
        .map(|i| net.activation_into(span.start(), data.point(i)))
        .collect::<Result<_>>()?;
    let codes: Vec<SplineCode> = activations
        .par_iter()
        .map(|h| code_at(net, span, h))
        .collect::<Result<_>>()?;

    let n = data.len();
    let (mut intra, mut inter) = (Vec::new(), Vec::new());
    for i in 0..n {
        for j in i + 1..n {
            if data.label(i) == data.label(j) {
                intra.push((i, j));
            } else {
                inter.push((i, j));
            }
        }
    }
    let intra = subsample_pairs(intra, max_pairs, seed::sub_seed(seed, 0));
    let inter = subsample_pairs(inter, max_pairs, seed::sub_seed(seed, 1));

    let measure = |pairs: Vec<(usize, usize)>| -> (Vec<(usize, usize)>, Vec<f64>, usize) {
        let results: Vec<Option<f64>> = pairs
            .par_iter()
            .map(|&(i, j)| {
                density_of(&codes[i], &codes[j], &activations[i], &activations[j]).ok()
            })
            .collect();
        let skipped = results.iter().filter(|r| r.is_none()).count();
        let (kept_pairs, kept): (Vec<_>, Vec<_>) = pairs
            .into_iter()
            .zip(results)
            .filter_map(|(p, r)| r.map(|d| (p, d)))
            .unzip();
        (kept_pairs, kept, skipped)
    };
    let (intra_pairs, intra_samples, skip_a) = measure(intra);
    let (inter_pairs, inter_samples, skip_b) = measure(inter);
    if intra_samples.is_empty() || inter_samples.is_empty() {
        return Err(Error::Degenerate(
            "no pair with distinct activations in one of the groups".into(),
        ));
    }
    let total: f64 = intra_samples.iter().chain(&inter_samples).sum();
    let normalization_constant = total / (intra_samples.len() + inter_samples.len()) as f64;
    if normalization_constant <= 0.0 {
        return Err(Error::Degenerate(
            "every pair lies in a single polytope; densities are all zero".into(),
        ));
    }
    Ok(DensityReport {
        span,
        intra_mean: mean(&intra_samples),
        inter_mean: mean(&inter_samples),
        intra_samples,
        inter_samples,
        intra_pairs,
        inter_pairs,
        normalization_constant,
        skipped_coincident: skip_a + skip_b,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGap {
    /// First layer of the span; the span always runs to the output.
    pub layer: usize,
    pub gap: f64,
    pub report: DensityReport,
}

/// One density report per Relu layer `L`, over span `L..output`.
pub fn layerwise_density_gap(
    net: &PwlNetwork,
    data: &LabeledDataset,
    max_pairs: usize,
    seed: u64,
) -> Result<Vec<LayerGap>> {
    let relu = net.relu_layer_indices();
    if relu.is_empty() {
        return Err(Error::InvalidArgument("network has no Relu layers".into()));
    }
    relu.into_iter()
        .map(|layer| {
            let span = LayerSpan::to_output(net, layer)?;
            let report = class_density_report(net, span, data, max_pairs, seed)?;
            Ok(LayerGap {
                layer,
                gap: report.gap(),
                report,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathMode {
    Linear,
    Spherical,
}

impl PathMode {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "linear" => Some(PathMode::Linear),
            "spherical" | "slerp" => Some(PathMode::Spherical),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub mode: PathMode,
    pub samples: usize,
}

/// `samples` points at `t = i/(samples-1)`, both endpoints included.
pub fn interpolate(spec: &PathSpec) -> Result<Vec<Vec<f64>>> {
    check_dim(spec.a.len(), spec.b.len())?;
    if spec.samples < 2 {
        return Err(Error::InvalidArgument("a path needs at least two samples".into()));
    }
    let ts = (0..spec.samples).map(|i| i as f64 / (spec.samples - 1) as f64);
    match spec.mode {
        PathMode::Linear => Ok(ts
            .map(|t| spec.a.iter().zip(&spec.b).map(|(a, b)| a + t * (b - a)).collect())
            .collect()),
        PathMode::Spherical => {
            let (na, nb) = (norm(&spec.a), norm(&spec.b));
            if na == 0.0 || nb == 0.0 {
                return Err(Error::Degenerate("spherical path with a zero endpoint".into()));
            }
            let cos = (dot(&spec.a, &spec.b) / (na * nb)).clamp(-1.0, 1.0);
            let omega = cos.acos();
            if std::f64::consts::PI - omega < 1e-9 {
                return Err(Error::Degenerate("antiparallel endpoints have no unique arc".into()));
            }
            if omega < 1e-12 {
                // Parallel endpoints: the arc degenerates to the chord.
                return interpolate(&PathSpec {
                    mode: PathMode::Linear,
                    ..spec.clone()
                });
            }
            let s = omega.sin();
            Ok(ts
                .map(|t| {
                    let wa = ((1.0 - t) * omega).sin() / s;
                    let wb = (t * omega).sin() / s;
                    spec.a.iter().zip(&spec.b).map(|(a, b)| wa * a + wb * b).collect()
                })
                .collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathCrossings {
    pub total_hamming: usize,
    pub per_segment: Vec<usize>,
    pub arc_length: f64,
    pub density: f64,
}

/// Code changes between consecutive path samples, and their count per unit
/// of arc length.
pub fn path_crossings(net: &PwlNetwork, span: LayerSpan, path: &[Vec<f64>]) -> Result<PathCrossings> {
    if path.len() < 2 {
        return Err(Error::InvalidArgument("a path needs at least two points".into()));
    }
    let codes: Vec<SplineCode> = path
        .par_iter()
        .map(|p| code_at(net, span, p))
        .collect::<Result<_>>()?;
    let per_segment = codes
        .windows(2)
        .map(|w| w[0].hamming(&w[1]))
        .collect::<Result<Vec<_>>>()?;
    let arc_length: f64 = path.windows(2).map(|w| distance(&w[0], &w[1])).sum();
    if arc_length <= 0.0 {
        return Err(Error::Degenerate("path has zero arc length".into()));
    }
    let total_hamming = per_segment.iter().sum();
    Ok(PathCrossings {
        total_hamming,
        per_segment,
        arc_length,
        density: total_hamming as f64 / arc_length,
    })
}

/// `0.05·‖x‖`, or `0.05` at the origin.
pub fn default_radius(x: &[f64]) -> f64 {
    let n = norm(x);
    if n > 0.0 {
        DEFAULT_RADIUS_FRACTION * n
    } else {
        DEFAULT_RADIUS_FRACTION
    }
}

/// Mean of `pair_density(x, x + radius·u)` over `n_samples` directions `u`
/// uniform on the unit sphere. Direction `i` comes from sub-seed `(seed, i)`.
pub fn local_density(
    net: &PwlNetwork,
    span: LayerSpan,
    x: &[f64],
    radius: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if !(radius > COINCIDENT_DISTANCE && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid radius {radius}")));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be positive".into()));
    }
    let center = code_at(net, span, x)?;
    let total: f64 = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let u = unit_direction(x.len(), seed::sub_seed(seed, i as u64));
            let y = axpy(x, radius, &u);
            Ok(center.hamming(&code_at(net, span, &y)?)? as f64 / radius)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .sum();
    Ok(total / n_samples as f64)
}

fn unit_direction(dim: usize, seed_value: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed_value);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = norm(&v);
        if n > 1e-300 {
            return scale(&v, 1.0 / n);
        }
    }
}

/// How the local-density probe radius is chosen at each sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusRule {
    /// `fraction·‖h‖`, falling back to `fraction` at the origin.
    RelativeToPoint(f64),
    /// Same absolute radius at every α.
    Fixed(f64),
}

impl RadiusRule {
    pub fn radius_at(&self, h: &[f64]) -> f64 {
        match *self {
            RadiusRule::RelativeToPoint(f) => {
                let n = norm(h);
                if n > 0.0 {
                    f * n
                } else {
                    f
                }
            }
            RadiusRule::Fixed(r) => r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub radius: RadiusRule,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            radius: RadiusRule::RelativeToPoint(DEFAULT_RADIUS_FRACTION),
            n_samples: DEFAULT_LOCAL_SAMPLES,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub layer_index: usize,
    pub alphas: Vec<f64>,
    pub logits: Vec<Vec<f64>>,
    pub predicted_class: Vec<usize>,
    pub local_density: Vec<f64>,
}

impl SweepResult {
    /// α of the largest local density; ties go to the smallest α.
    pub fn peak_alpha(&self) -> f64 {
        self.alphas[argmax(&self.local_density)]
    }

    /// Peak density over the median density across the sweep.
    pub fn peak_to_median(&self) -> f64 {
        let mut sorted = self.local_density.clone();
        sorted.sort_by(f64::total_cmp);
        let median = crate::stats::quantile_sorted(&sorted, 0.5);
        let max = sorted[sorted.len() - 1];
        if median > 0.0 {
            max / median
        } else if max > 0.0 {
            f64::INFINITY
        } else {
            1.0
        }
    }
}

fn check_alphas(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("alpha list is empty".into()));
    }
    if alphas.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
        return Err(Error::InvalidArgument("alphas must be finite and non-negative".into()));
    }
    if alphas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("alphas must be strictly increasing".into()));
    }
    Ok(())
}

/// Scales a fixed hidden direction `h0` by each α and evaluates the rest of
/// the network plus the local density over span `layer_index..output`.
pub fn sweep_direction(
    net: &PwlNetwork,
    layer_index: usize,
    h0: &[f64],
    alphas: &[f64],
    opts: &SweepOptions,
) -> Result<SweepResult> {
    check_alphas(alphas)?;
    check_dim(net.dim_into(layer_index)?, h0.len())?;
    let span = LayerSpan::to_output(net, layer_index)?;
    let rows = alphas
        .par_iter()
        .map(|&alpha| {
            let h = scale(h0, alpha);
            let (logits, _) = net.forward_from_layer(layer_index, &h)?;
            let density = local_density(
                net,
                span,
                &h,
                opts.radius.radius_at(&h),
                opts.n_samples,
                opts.seed,
            )?;
            Ok((logits, density))
        })
        .collect::<Result<Vec<_>>>()?;
    let (logits, local_density): (Vec<Vec<f64>>, Vec<f64>) = rows.into_iter().unzip();
    Ok(SweepResult {
        layer_index,
        alphas: alphas.to_vec(),
        predicted_class: logits.iter().map(|l| argmax(l)).collect(),
        logits,
        local_density,
    })
}

/// Sweep along the hidden activation that input `x` produces at `layer_index`.
pub fn scaling_sweep(
    net: &PwlNetwork,
    layer_index: usize,
    x: &[f64],
    alphas: &[f64],
    opts: &SweepOptions,
) -> Result<SweepResult> {
    let h0 = net.activation_into(layer_index, x)?;
    sweep_direction(net, layer_index, &h0, alphas, opts)
}

/// Per-dimension root-mean-square of the activations `reference` produces
/// at `layer_index`.
pub fn activation_scale(
    net: &PwlNetwork,
    layer_index: usize,
    reference: &LabeledDataset,
) -> Result<Vec<f64>> {
    let dim = net.dim_into(layer_index)?;
    let mut sq = vec![0.0; dim];
    for p in reference.points() {
        for (s, v) in sq.iter_mut().zip(net.activation_into(layer_index, p)?) {
            *s += v * v;
        }
    }
    Ok(sq.into_iter().map(|s| (s / reference.len() as f64).sqrt()).collect())
}

/// Sweep along a Gaussian direction whose per-dimension scale matches the
/// RMS hidden activation over `reference`.
pub fn noise_direction_sweep(
    net: &PwlNetwork,
    layer_index: usize,
    reference: &LabeledDataset,
    seed: u64,
    alphas: &[f64],
    opts: &SweepOptions,
) -> Result<SweepResult> {
    let scales = activation_scale(net, layer_index, reference)?;
    let mut rng = seed::rng(seed);
    let h0: Vec<f64> = scales
        .iter()
        .map(|s| s * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect();
    sweep_direction(net, layer_index, &h0, alphas, opts)
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::net::{ActivationKind, Layer};
    use rand::Rng;

    fn single_neuron() -> PwlNetwork {
        let l = Layer::new(Matrix::from_rows(&[vec![1.0]]).unwrap(), vec![0.0], ActivationKind::Relu)
            .unwrap();
        PwlNetwork::new(vec![l]).unwrap()
    }

    fn biased_net(sizes: &[usize], s: u64) -> PwlNetwork {
        let base = PwlNetwork::init_random(sizes, s).unwrap();
        let mut rng = seed::rng(s + 1);
        PwlNetwork::new(
            base.layers()
                .iter()
                .map(|l| {
                    let b = (0..l.fan_out()).map(|_| rng.random_range(-0.5..0.5)).collect();
                    Layer::new(l.weights().clone(), b, l.activation()).unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn pair_density_examples() {
        let net = single_neuron();
        let span = LayerSpan::new(0, 0);
        assert_eq!(pair_density(&net, span, &[-1.0], &[1.0]).unwrap(), 0.5);
        assert_eq!(pair_density(&net, span, &[1.0], &[2.0]).unwrap(), 0.0);
        assert!(matches!(
            pair_density(&net, span, &[1.0], &[1.0]),
            Err(Error::CoincidentPoints)
        ));
    }

    #[test]
    fn pair_density_matches_naive_and_is_symmetric() {
        let net = biased_net(&[3, 8, 6, 3], 4);
        let span = LayerSpan::to_output(&net, 0).unwrap();
        let mut rng = seed::rng(8);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            // Naive: bools from traces, count mismatches, divide by norm.
            let bits = |p: &[f64]| {
                let t = net.forward_traced(p).unwrap();
                crate::code::extract_code(&t, span).unwrap().bits()
            };
            let flips = bits(&x).iter().zip(bits(&y)).filter(|(a, b)| **a != *b).count();
            let d = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let got = pair_density(&net, span, &x, &y).unwrap();
            assert!((got - flips as f64 / d).abs() < 1e-12);
            assert_eq!(got, pair_density(&net, span, &y, &x).unwrap());
        }
    }

    #[test]
    fn report_normalizes_to_one() {
        let data = crate::data::make_blobs(3, 20, 2, 0.8, 2).unwrap();
        let net = biased_net(&[2, 10, 10, 3], 6);
        let span = LayerSpan::to_output(&net, 1).unwrap();
        let r = class_density_report(&net, span, &data, 150, 3).unwrap();
        assert!(r.intra_samples.len() <= 150 && r.inter_samples.len() <= 150);
        let all: Vec<f64> = r.normalized_intra().into_iter().chain(r.normalized_inter()).collect();
        assert!((mean(&all) - 1.0).abs() < 1e-9);
        assert_eq!(r, class_density_report(&net, span, &data, 150, 3).unwrap());
    }

    #[test]
    fn identical_activations_give_no_report() {
        let data = LabeledDataset::new(vec![vec![1.0, 1.0]; 6], vec![0, 0, 0, 1, 1, 1]).unwrap();
        let net = biased_net(&[2, 4, 2], 1);
        let span = LayerSpan::to_output(&net, 0).unwrap();
        assert!(matches!(
            class_density_report(&net, span, &data, 100, 0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn single_hidden_layer_has_one_gap() {
        let data = crate::data::make_blobs(2, 10, 2, 0.8, 2).unwrap();
        let net = biased_net(&[2, 12, 2], 3);
        assert_eq!(layerwise_density_gap(&net, &data, 100, 0).unwrap().len(), 1);
    }

    #[test]
    fn interpolation_examples() {
        let mid = interpolate(&PathSpec {
            a: vec![0.0, 0.0],
            b: vec![2.0, 4.0],
            mode: PathMode::Linear,
            samples: 3,
        })
        .unwrap();
        assert_eq!(mid[1], vec![1.0, 2.0]);
        assert_eq!(mid[0], vec![0.0, 0.0]);
        assert_eq!(mid[2], vec![2.0, 4.0]);

        let arc = interpolate(&PathSpec {
            a: vec![1.0, 0.0],
            b: vec![0.0, 1.0],
            mode: PathMode::Spherical,
            samples: 3,
        })
        .unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((arc[1][0] - h).abs() < 1e-12 && (arc[1][1] - h).abs() < 1e-12);

        let a = vec![3.0, 0.0, 4.0];
        let b = vec![0.0, 5.0, 0.0];
        for p in interpolate(&PathSpec {
            a,
            b,
            mode: PathMode::Spherical,
            samples: 17,
        })
        .unwrap()
        {
            assert!((norm(&p) - 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn interpolation_errors() {
        let spec = |a: Vec<f64>, b: Vec<f64>| PathSpec {
            a,
            b,
            mode: PathMode::Spherical,
            samples: 4,
        };
        assert!(interpolate(&spec(vec![1.0, 0.0], vec![-2.0, 0.0])).is_err());
        assert!(interpolate(&spec(vec![0.0, 0.0], vec![1.0, 0.0])).is_err());
        assert!(interpolate(&PathSpec {
            samples: 1,
            ..spec(vec![1.0, 0.0], vec![0.0, 1.0])
        })
        .is_err());
    }

    #[test]
    fn single_hyperplane_path_crosses_once() {
        let net = single_neuron();
        let span = LayerSpan::new(0, 0);
        for n in [2, 3, 10, 257] {
            let path = interpolate(&PathSpec {
                a: vec![-1.0],
                b: vec![1.0],
                mode: PathMode::Linear,
                samples: n,
            })
            .unwrap();
            let pc = path_crossings(&net, span, &path).unwrap();
            assert_eq!(pc.total_hamming, 1);
            assert!((pc.density - 0.5).abs() < 1e-12);
        }
        let inside = vec![vec![1.0], vec![2.0], vec![3.0]];
        assert_eq!(path_crossings(&net, span, &inside).unwrap().total_hamming, 0);
        assert!(path_crossings(&net, span, &[vec![1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn refinement_never_loses_crossings() {
        let net = biased_net(&[2, 8, 8, 3], 10);
        let span = LayerSpan::to_output(&net, 0).unwrap();
        let mut rng = seed::rng(3);
        for _ in 0..10 {
            let a: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
            let total = |n: usize| {
                let p = interpolate(&PathSpec {
                    a: a.clone(),
                    b: b.clone(),
                    mode: PathMode::Linear,
                    samples: n,
                })
                .unwrap();
                path_crossings(&net, span, &p).unwrap().total_hamming
            };
            // Samples of n points are nested in those of 2n - 1 points.
            assert!(total(129) <= total(257));
            assert!(total(257) <= total(513));
        }
    }

    #[test]
    fn local_density_null_and_determinism() {
        let net = biased_net(&[3, 6, 6, 2], 2);
        let linear = net.linearized();
        let span = LayerSpan::to_output(&net, 0).unwrap();
        let x = [0.2, 0.4, -0.1];
        assert_eq!(local_density(&linear, span, &x, 0.3, 50, 1).unwrap(), 0.0);
        let a = local_density(&net, span, &x, 0.3, 50, 1).unwrap();
        assert_eq!(a, local_density(&net, span, &x, 0.3, 50, 1).unwrap());
        assert!(local_density(&net, span, &x, 0.0, 50, 1).is_err());
        assert!(local_density(&net, span, &x, -1.0, 50, 1).is_err());
        assert_eq!(DEFAULT_LOCAL_SAMPLES, 150);
    }

    #[test]
    fn sweep_unit_and_zero_alpha() {
        let net = biased_net(&[2, 8, 8, 3], 5);
        let x = [0.5, -0.7];
        let y = [-1.5, 0.2];
        let alphas = [0.0, 0.5, 1.0, 2.0];
        let opts = SweepOptions {
            n_samples: 20,
            ..SweepOptions::default()
        };
        let sx = scaling_sweep(&net, 1, &x, &alphas, &opts).unwrap();
        let sy = scaling_sweep(&net, 1, &y, &alphas, &opts).unwrap();
        assert_eq!(sx.logits[2], net.forward(&x).unwrap());
        assert_eq!(sx.logits[0], sy.logits[0]);
        assert_eq!(sx.predicted_class[2], argmax(&net.forward(&x).unwrap()));
        assert!(scaling_sweep(&net, 1, &x, &[], &opts).is_err());
        assert!(scaling_sweep(&net, 1, &x, &[1.0, 0.5], &opts).is_err());
    }

    #[test]
    fn logits_affine_in_alpha_at_constant_code() {
        let net = biased_net(&[2, 8, 8, 3], 7);
        let x = [1.1, 0.4];
        let h0 = net.activation_into(1, &x).unwrap();
        let span = LayerSpan::to_output(&net, 1).unwrap();
        let alphas = linspace(0.0, 4.0, 401);
        let mut triples = 0;
        for w in alphas.windows(3) {
            let codes: Vec<_> = w.iter().map(|&a| code_at(&net, span, &scale(&h0, a)).unwrap()).collect();
            if codes[0] != codes[1] || codes[1] != codes[2] {
                continue;
            }
            let l: Vec<Vec<f64>> = w
                .iter()
                .map(|&a| net.forward_from_layer(1, &scale(&h0, a)).unwrap().0)
                .collect();
            for i in 0..l[0].len() {
                let mid = 0.5 * (l[0][i] + l[2][i]);
                assert!((l[1][i] - mid).abs() < 1e-9);
            }
            triples += 1;
        }
        assert!(triples > 100);
    }

    #[test]
    fn noise_sweep_is_deterministic() {
        let data = crate::data::make_blobs(3, 10, 2, 0.5, 1).unwrap();
        let net = biased_net(&[2, 8, 8, 3], 5);
        let opts = SweepOptions {
            n_samples: 10,
            ..SweepOptions::default()
        };
        let alphas = linspace(0.0, 2.0, 5);
        let a = noise_direction_sweep(&net, 1, &data, 9, &alphas, &opts).unwrap();
        assert_eq!(a, noise_direction_sweep(&net, 1, &data, 9, &alphas, &opts).unwrap());
    }
}
