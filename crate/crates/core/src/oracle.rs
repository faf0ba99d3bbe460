//! Ground truth by brute force: lattice enumeration of the regions of tiny
//! networks, checks of the region affine maps, and region adjacency.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::code::{code_at, region_affine, region_affine_distance, span_output, LayerSpan, RegionAffine, SplineCode};
use crate::error::{Error, Result};
use crate::linalg::{distance, norm, Matrix};
use crate::net::{ActivationKind, Layer, PwlNetwork};
use crate::output::{fmt_f64, write_csv};
use crate::seed;

pub const MAX_ENUM_DIM: usize = 3;
pub const MIN_RESOLUTION: usize = 8;
pub const MIN_ADJACENCY_RESOLUTION: usize = 32;
/// Largest `|cos|` allowed between two generic hyperplane normals.
pub const PARALLEL_COS: f64 = 0.999;

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidArgument("bounds need matching non-empty lo/hi".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(Error::InvalidArgument("bounds need finite lo < hi".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(dim: usize, half: f64) -> Result<Self> {
        Self::new(vec![-half; dim], vec![half; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionEntry {
    /// First lattice point (in lattice order) with this code.
    pub representative: Vec<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionCensus {
    pub span: LayerSpan,
    pub bounds: Bounds,
    /// Lattice points per axis.
    pub resolution: usize,
    pub regions: BTreeMap<SplineCode, RegionEntry>,
    /// Index into `regions` (in key order) of every lattice point, with the
    /// last axis varying fastest.
    pub cells: Vec<u32>,
}

impl RegionCensus {
    pub fn region_count(&self) -> usize {
        self.regions.len()
    }

    pub fn total_samples(&self) -> usize {
        self.cells.len()
    }

    pub fn codes(&self) -> Vec<&SplineCode> {
        self.regions.keys().collect()
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        lattice_point(&self.bounds, self.resolution, flat)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let dim = self.bounds.dim();
        let mut header = vec!["code_hex".to_string()];
        header.extend((0..dim).map(|i| format!("x{i}")));
        header.push("count".into());
        let rows: Vec<Vec<String>> = self
            .regions
            .iter()
            .map(|(code, e)| {
                let mut r = vec![code.to_hex()];
                r.extend(e.representative.iter().map(|v| fmt_f64(*v)));
                r.push(e.count.to_string());
                r
            })
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        write_csv(path, &header, &rows)
    }
}

fn lattice_point(bounds: &Bounds, res: usize, mut flat: usize) -> Vec<f64> {
    let dim = bounds.dim();
    let mut p = vec![0.0; dim];
    for d in (0..dim).rev() {
        let i = flat % res;
        flat /= res;
        p[d] = bounds.lo[d] + (bounds.hi[d] - bounds.lo[d]) * i as f64 / (res - 1) as f64;
    }
    p
}

/// Codes of every point of a `resolution^d` lattice over `bounds`.
pub fn enumerate_regions(
    net: &PwlNetwork,
    span: LayerSpan,
    bounds: &Bounds,
    resolution: usize,
) -> Result<RegionCensus> {
    let dim = span.input_dim(net)?;
    if dim > MAX_ENUM_DIM {
        return Err(Error::Unsupported(format!(
            "lattice enumeration supports input dimension <= {MAX_ENUM_DIM}, got {dim}"
        )));
    }
    crate::linalg::check_dim(dim, bounds.dim())?;
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidArgument(format!(
            "resolution must be >= {MIN_RESOLUTION}, got {resolution}"
        )));
    }
    let slab = resolution.pow(dim as u32 - 1);
    let rows: Vec<Vec<SplineCode>> = (0..resolution)
        .into_par_iter()
        .map(|r| {
            (r * slab..(r + 1) * slab)
                .map(|flat| code_at(net, span, &lattice_point(bounds, resolution, flat)))
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut regions: BTreeMap<SplineCode, RegionEntry> = BTreeMap::new();
    for (flat, code) in rows.iter().flatten().enumerate() {
        regions
            .entry(code.clone())
            .and_modify(|e| e.count += 1)
            .or_insert_with(|| RegionEntry {
                representative: lattice_point(bounds, resolution, flat),
                count: 1,
            });
    }
    let index: BTreeMap<&SplineCode, u32> = regions.keys().zip(0u32..).collect();
    let cells = rows.iter().flatten().map(|c| index[c]).collect();
    Ok(RegionCensus {
        span,
        bounds: bounds.clone(),
        resolution,
        regions,
        cells,
    })
}

/// Enumerates at `start`, `2·start − 1`, … (nested lattices) until two
/// consecutive counts agree or `max_resolution` is passed. Returns the last
/// census and whether it was stable.
pub fn enumerate_until_stable(
    net: &PwlNetwork,
    span: LayerSpan,
    bounds: &Bounds,
    start: usize,
    max_resolution: usize,
) -> Result<(RegionCensus, bool)> {
    let mut census = enumerate_regions(net, span, bounds, start)?;
    loop {
        let next = 2 * census.resolution - 1;
        if next > max_resolution {
            return Ok((census, false));
        }
        let finer = enumerate_regions(net, span, bounds, next)?;
        let stable = finer.region_count() == census.region_count();
        census = finer;
        if stable {
            return Ok((census, true));
        }
    }
}

/// `min(2^N, Σ_{i=0..d} C(N, i))`, saturating at `u64::MAX`.
pub fn region_count_bound(n_neurons: u64, input_dim: u64) -> Result<u64> {
    if input_dim < 1 {
        return Err(Error::InvalidArgument("input dimension must be >= 1".into()));
    }
    let pow = if n_neurons >= 64 { u64::MAX } else { 1u64 << n_neurons };
    let mut sum: u64 = 0;
    let mut binom: u128 = 1;
    for i in 0..=input_dim.min(n_neurons) {
        if i > 0 {
            match binom.checked_mul((n_neurons - i + 1) as u128) {
                Some(v) => binom = v / i as u128,
                None => return Ok(pow),
            }
        }
        sum = sum.saturating_add(binom.min(u64::MAX as u128) as u64);
        if binom > u64::MAX as u128 {
            sum = u64::MAX;
            break;
        }
    }
    Ok(pow.min(sum))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub code: SplineCode,
    pub point: Vec<f64>,
    pub error: f64,
    pub allowed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checked: usize,
    pub max_relative_error: f64,
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_census(net: &PwlNetwork, span: LayerSpan, census: &RegionCensus) -> Result<()> {
    if census.span != span {
        return Err(Error::SpanMismatch(format!(
            "census was taken over span {:?}, asked about {:?}",
            census.span, span
        )));
    }
    crate::linalg::check_dim(span.input_dim(net)?, census.bounds.dim())?;
    for (code, e) in &census.regions {
        if &code_at(net, span, &e.representative)? != code {
            return Err(Error::SpanMismatch(
                "census representatives do not reproduce their codes on this network".into(),
            ));
        }
    }
    Ok(())
}

/// Checks `‖A x + b − f(x)‖ ≤ tolerance · (1 + ‖f(x)‖)` at every lattice point.
pub fn verify_regions(
    net: &PwlNetwork,
    span: LayerSpan,
    census: &RegionCensus,
    tolerance: f64,
) -> Result<VerifyReport> {
    check_census(net, span, census)?;
    let affines = census
        .regions
        .keys()
        .map(|c| region_affine(net, c))
        .collect::<Result<Vec<_>>>()?;
    verify_with_affines(net, span, census, &affines, tolerance)
}

/// Like [`verify_regions`] with caller-supplied affines, one per census
/// region in key order.
pub fn verify_with_affines(
    net: &PwlNetwork,
    span: LayerSpan,
    census: &RegionCensus,
    affines: &[RegionAffine],
    tolerance: f64,
) -> Result<VerifyReport> {
    crate::linalg::check_dim(census.region_count(), affines.len())?;
    if tolerance.is_nan() || tolerance < 0.0 {
        return Err(Error::InvalidArgument("tolerance must be >= 0".into()));
    }
    let codes = census.codes();
    let results: Vec<(f64, Option<Violation>)> = census
        .cells
        .par_iter()
        .enumerate()
        .map(|(flat, &idx)| {
            let x = census.point(flat);
            let traced = span_output(net, span, &x)?;
            let predicted = affines[idx as usize].apply(&x)?;
            let err = distance(&traced, &predicted);
            let allowed = tolerance * (1.0 + norm(&traced));
            let rel = err / (1.0 + norm(&traced));
            let v = (err > allowed).then(|| Violation {
                code: codes[idx as usize].clone(),
                point: x,
                error: err,
                allowed,
            });
            Ok((rel, v))
        })
        .collect::<Result<_>>()?;
    let max_relative_error = results.iter().map(|r| r.0).fold(0.0, f64::max);
    Ok(VerifyReport {
        checked: results.len(),
        max_relative_error,
        violations: results.into_iter().filter_map(|r| r.1).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyGraph {
    pub nodes: Vec<SplineCode>,
    /// `(i, j)` with `i < j` into `nodes`, mapped to the Hamming distance.
    pub edges: BTreeMap<(usize, usize), usize>,
}

impl AdjacencyGraph {
    pub fn hamming_one_fraction(&self) -> f64 {
        if self.edges.is_empty() {
            return 1.0;
        }
        self.edges.values().filter(|&&h| h == 1).count() as f64 / self.edges.len() as f64
    }
}

/// Regions joined by an edge when some pair of axis-adjacent lattice points
/// falls in them.
pub fn adjacency_graph(census: &RegionCensus) -> Result<AdjacencyGraph> {
    let res = census.resolution;
    if res < MIN_ADJACENCY_RESOLUTION || census.cells.len() != res.pow(census.bounds.dim() as u32) {
        return Err(Error::Degenerate(format!(
            "adjacency needs a complete census at resolution >= {MIN_ADJACENCY_RESOLUTION}"
        )));
    }
    let dim = census.bounds.dim();
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    for flat in 0..census.cells.len() {
        let mut stride = 1;
        let mut rest = flat;
        for _ in 0..dim {
            let i = rest % res;
            rest /= res;
            if i + 1 < res {
                let (a, b) = (census.cells[flat] as usize, census.cells[flat + stride] as usize);
                if a != b {
                    pairs.insert((a.min(b), a.max(b)));
                }
            }
            stride *= res;
        }
    }
    let nodes: Vec<SplineCode> = census.regions.keys().cloned().collect();
    let edges = pairs
        .into_iter()
        .map(|(a, b)| Ok(((a, b), nodes[a].hamming(&nodes[b])?)))
        .collect::<Result<_>>()?;
    Ok(AdjacencyGraph { nodes, edges })
}

/// `(hamming, region_affine_distance)` for every unordered pair of regions.
pub fn region_pair_distances(net: &PwlNetwork, census: &RegionCensus) -> Result<Vec<(usize, f64)>> {
    let codes = census.codes();
    let affines = codes
        .iter()
        .map(|c| region_affine(net, c))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for i in 0..codes.len() {
        for j in i + 1..codes.len() {
            out.push((codes[i].hamming(codes[j])?, region_affine_distance(&affines[i], &affines[j])?));
        }
    }
    Ok(out)
}

fn intersection(w1: &[f64], b1: f64, w2: &[f64], b2: f64) -> [f64; 2] {
    let det = w1[0] * w2[1] - w1[1] * w2[0];
    [(-b1 * w2[1] + b2 * w1[1]) / det, (-w1[0] * b2 + w2[0] * b1) / det]
}

/// A single Relu layer of `n` lines in general position in the plane: normal
/// angles are drawn one per stratum of `[0, π)`, no two normals have
/// `|cos| > PARALLEL_COS`, and no crossing point closer than
/// `0.01` of the crossings' spread to a third line. Weights are redrawn until
/// both hold. The returned bounds contain every crossing with 25% padding.
pub fn generic_lines(n: usize, seed_value: u64) -> Result<(PwlNetwork, Bounds)> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one neuron".into()));
    }
    let mut rng = seed::rng(seed_value);
    for _ in 0..100_000 {
        // One normal direction per angular stratum of width π/n, with a
        // random orientation, so no pair is close to parallel.
        let normals: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let a = (i as f64 + rng.random_range(0.2..0.8)) * std::f64::consts::PI / n as f64;
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                vec![sign * a.cos(), sign * a.sin()]
            })
            .collect();
        let biases: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let parallel = (0..n).any(|i| {
            (i + 1..n).any(|j| crate::linalg::dot(&normals[i], &normals[j]).abs() > PARALLEL_COS)
        });
        if parallel {
            continue;
        }
        let mut crossings = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                crossings.push((i, j, intersection(&normals[i], biases[i], &normals[j], biases[j])));
            }
        }
        let (mut lo, mut hi) = ([-1.0f64, -1.0], [1.0f64, 1.0]);
        for (_, _, p) in &crossings {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let spread = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        let concurrent = crossings.iter().any(|(i, j, p)| {
            (0..n)
                .filter(|k| k != i && k != j)
                .any(|k| (crate::linalg::dot(&normals[k], p) + biases[k]).abs() < 0.01 * spread)
        });
        if concurrent {
            continue;
        }
        let pad = 0.25 * spread;
        let bounds = Bounds::new(vec![lo[0] - pad, lo[1] - pad], vec![hi[0] + pad, hi[1] + pad])?;
        let w = Matrix::from_rows(&normals)?;
        let net = PwlNetwork::new(vec![Layer::new(w, biases, ActivationKind::Relu)?])?;
        return Ok((net, bounds));
    }
    Err(Error::Degenerate("could not draw lines in general position".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::extract_code;

    fn biased(sizes: &[usize], s: u64) -> PwlNetwork {
        let base = PwlNetwork::init_random(sizes, s).unwrap();
        let mut rng = seed::rng(s ^ 0xabc);
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
    fn bound_examples() {
        assert_eq!(region_count_bound(2, 2).unwrap(), 4);
        assert_eq!(region_count_bound(2, 5).unwrap(), 4);
        assert_eq!(region_count_bound(3, 2).unwrap(), 7);
        assert_eq!(region_count_bound(10, 2).unwrap(), 56);
        assert_eq!(region_count_bound(0, 2).unwrap(), 1);
        assert_eq!(region_count_bound(200, 100).unwrap(), u64::MAX);
        assert_eq!(region_count_bound(70, 1).unwrap(), 71);
        assert_eq!(region_count_bound(u64::MAX, 3).unwrap(), u64::MAX);
        assert!(region_count_bound(3, 0).is_err());
    }

    #[test]
    fn small_line_arrangements() {
        for (n, expected) in [(1, 2), (2, 4), (3, 7)] {
            let (net, bounds) = generic_lines(n, 11 + n as u64).unwrap();
            let (census, stable) = enumerate_until_stable(&net, LayerSpan::new(0, 0), &bounds, 65, 1025).unwrap();
            assert!(stable);
            assert_eq!(census.region_count(), expected, "n = {n}");
        }
    }

    #[test]
    fn census_is_sound_and_complete() {
        let net = biased(&[2, 6, 4, 3], 3);
        let span = LayerSpan::to_output(&net, 0).unwrap();
        let census = enumerate_regions(&net, span, &Bounds::cube(2, 2.0).unwrap(), 64).unwrap();
        assert_eq!(census.regions.values().map(|e| e.count).sum::<usize>(), 64 * 64);
        for (code, e) in &census.regions {
            let trace = net.forward_traced(&e.representative).unwrap();
            assert_eq!(&extract_code(&trace, span).unwrap(), code);
        }
        let codes = census.codes();
        for (flat, &idx) in census.cells.iter().enumerate().step_by(97) {
            assert_eq!(&code_at(&net, span, &census.point(flat)).unwrap(), codes[idx as usize]);
        }
    }

    #[test]
    fn nested_lattices_only_discover_more() {
        let net = biased(&[2, 5, 5, 3], 8);
        let span = LayerSpan::to_output(&net, 0).unwrap();
        let b = Bounds::cube(2, 3.0).unwrap();
        let coarse = enumerate_regions(&net, span, &b, 33).unwrap();
        let fine = enumerate_regions(&net, span, &b, 65).unwrap();
        assert!(coarse.regions.keys().all(|c| fine.regions.contains_key(c)));
    }

    #[test]
    fn rejects_high_dimensions_and_coarse_grids() {
        let net = PwlNetwork::init_random(&[4, 3, 2], 0).unwrap();
        assert!(matches!(
            enumerate_regions(&net, LayerSpan::new(0, 1), &Bounds::cube(4, 1.0).unwrap(), 8),
            Err(Error::Unsupported(_))
        ));
        let net = PwlNetwork::init_random(&[2, 3, 2], 0).unwrap();
        assert!(enumerate_regions(&net, LayerSpan::new(0, 1), &Bounds::cube(2, 1.0).unwrap(), 7).is_err());
    }

    #[test]
    fn three_dimensional_census() {
        let net = biased(&[3, 4, 2], 5);
        let span = LayerSpan::to_output(&net, 0).unwrap();
        let census = enumerate_regions(&net, span, &Bounds::cube(3, 2.0).unwrap(), 33).unwrap();
        assert_eq!(census.total_samples(), 33 * 33 * 33);
        assert!(census.region_count() as u64 <= region_count_bound(4, 3).unwrap());
        let g = adjacency_graph(&census).unwrap();
        assert!(!g.edges.is_empty());
        assert!(verify_regions(&net, span, &census, 1e-9).unwrap().passed());
    }

    #[test]
    fn verification_passes_and_catches_corruption() {
        let net = biased(&[2, 6, 4, 3], 1);
        let span = LayerSpan::to_output(&net, 0).unwrap();
        let census = enumerate_regions(&net, span, &Bounds::cube(2, 2.0).unwrap(), 256).unwrap();
        let report = verify_regions(&net, span, &census, 1e-9).unwrap();
        assert!(report.passed(), "{:?}", report.violations.first());
        assert_eq!(report.checked, 256 * 256);

        let mut affines: Vec<RegionAffine> = census
            .regions
            .keys()
            .map(|c| region_affine(&net, c).unwrap())
            .collect();
        let (r, c) = (0, 0);
        let v = affines[0].a.get(r, c);
        affines[0].a.set(r, c, v + 1e-3);
        let bad = verify_with_affines(&net, span, &census, &affines, 1e-9).unwrap();
        assert!(!bad.violations.is_empty());
    }

    #[test]
    fn linear_network_is_one_region() {
        let net = biased(&[2, 6, 3], 2).linearized();
        let span = LayerSpan::to_output(&net, 0).unwrap();
        let census = enumerate_regions(&net, span, &Bounds::cube(2, 5.0).unwrap(), 32).unwrap();
        assert_eq!(census.region_count(), 1);
        assert!(verify_regions(&net, span, &census, 1e-9).unwrap().passed());
        assert!(adjacency_graph(&census).unwrap().edges.is_empty());
    }

    #[test]
    fn census_mismatch_is_rejected() {
        let a = biased(&[2, 5, 3], 1);
        let b = biased(&[2, 5, 3], 2);
        let span = LayerSpan::to_output(&a, 0).unwrap();
        let census = enumerate_regions(&a, span, &Bounds::cube(2, 2.0).unwrap(), 32).unwrap();
        assert!(verify_regions(&b, span, &census, 1e-9).is_err());
        assert!(verify_regions(&a, LayerSpan::new(0, 0), &census, 1e-9).is_err());
    }

    #[test]
    fn one_neuron_adjacency() {
        let (net, bounds) = generic_lines(1, 3).unwrap();
        let census = enumerate_regions(&net, LayerSpan::new(0, 0), &bounds, 64).unwrap();
        let g = adjacency_graph(&census).unwrap();
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges.values().next(), Some(&1));
        let coarse = enumerate_regions(&net, LayerSpan::new(0, 0), &bounds, 16).unwrap();
        assert!(adjacency_graph(&coarse).is_err());
    }

    #[test]
    fn single_layer_edges_match_the_arrangement() {
        // n lines with all n(n-1)/2 crossings in the box are cut into n
        // segments each, so exactly n^2 region pairs share a boundary piece.
        // Lattice edges that straddle a crossing add pairs of diagonally
        // opposite regions, at most one per crossing and at Hamming 2.
        for (n, s) in [(3, 2), (5, 21), (6, 4)] {
            let (net, bounds) = generic_lines(n, s).unwrap();
            let census = enumerate_regions(&net, LayerSpan::new(0, 0), &bounds, 512).unwrap();
            let g = adjacency_graph(&census).unwrap();
            let ones = g.edges.values().filter(|&&h| h == 1).count();
            let others: Vec<usize> = g.edges.values().copied().filter(|&h| h != 1).collect();
            assert_eq!(ones, n * n, "n = {n}");
            assert!(others.iter().all(|&h| h == 2));
            assert!(others.len() <= n * (n - 1) / 2);
        }
    }

    #[test]
    fn multi_hamming_edges_thin_out_with_resolution() {
        let net = biased(&[2, 8, 8, 2], 4);
        let span = LayerSpan::to_output(&net, 0).unwrap();
        let b = Bounds::cube(2, 3.0).unwrap();
        let multi = |res| {
            let g = adjacency_graph(&enumerate_regions(&net, span, &b, res).unwrap()).unwrap();
            g.edges.values().filter(|&&h| h > 1).count() as f64 / g.edges.len() as f64
        };
        let (coarse, fine) = (multi(64), multi(512));
        assert!(fine <= coarse, "{fine} > {coarse}");
    }

    #[test]
    fn census_csv_has_one_row_per_region() {
        let (net, bounds) = generic_lines(2, 5).unwrap();
        let census = enumerate_regions(&net, LayerSpan::new(0, 0), &bounds, 32).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("census.csv");
        census.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("code_hex,x0,x1,count\n"));
        assert_eq!(text.lines().count(), 1 + census.region_count());
    }
}
