//! Seeded end-to-end pipeline on a toy classifier: train a specimen, then
//! check the three predictions on it and write every number to CSV.
//!
//! - Prediction 1: clusters of activations and of spline codes line up
//!   with the generator's classes and with each other.
//! - Prediction 2: a trained net packs fewer polytope boundaries between
//!   same-class points than between different-class points; an untrained
//!   one does not, and the gap grows towards the output.
//! - Prediction 3: boundary density along a scaled activation peaks between
//!   the origin and the unscaled activation.
//!
//! All stochastic choices derive from one seed, and every parallel step
//! assembles its results in input order, so output files are identical for
//! any thread count.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::cluster::{
    adjusted_rand_index, cluster, cosine_histogram, cosine_profile, distance_matrix,
    metric, monosemanticity_score, nmf, ClusterLabels, MetricRegistry, DEFAULT_MIN_PTS,
};
use crate::code::{code_at, LayerSpan, SplineCode};
use crate::data::{make_blobs, LabeledDataset};
use crate::density::{
    layerwise_density_gap, linspace, noise_direction_sweep, scaling_sweep, LayerGap, SweepOptions,
    SweepResult,
};
use crate::error::Result;
use crate::linalg::Matrix;
use crate::net::{accuracy, save_network, train, PwlNetwork, TrainConfig};
use crate::output::{fmt_f64, write_csv, Manifest};
use crate::seed::{self, sub_seed};
use crate::stats::{bootstrap_ci, Statistic};

/// Significance level for Welch's test in Prediction 2.
pub const ALPHA_LEVEL: f64 = 0.01;
/// Fraction of sweeps whose peak must fall strictly inside (0, 1).
pub const PEAK_FRACTION: f64 = 0.7;
pub const NMF_COMPONENTS: usize = 8;
pub const NMF_ITERATIONS: usize = 500;
pub const SHUFFLE_CONTROLS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ReproConfig {
    pub sizes: Vec<usize>,
    pub classes: usize,
    pub per_class: usize,
    pub spread: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub max_pairs: usize,
    /// Hidden activation scaled by the sweeps (input of this layer).
    pub sweep_layer: usize,
    pub sweep_inputs: usize,
    pub alphas: Vec<f64>,
    pub local_samples: usize,
    pub bootstrap_resamples: usize,
    pub ci_level: f64,
    /// Hidden activation clustered for Prediction 1.
    pub cluster_layer: usize,
    /// DBSCAN radius as a fraction of the median pairwise distance.
    pub cluster_eps_fraction: f64,
}

impl Default for ReproConfig {
    fn default() -> Self {
        Self {
            sizes: vec![2, 16, 16, 16, 3],
            classes: 3,
            per_class: 100,
            spread: 1.0,
            learning_rate: 0.05,
            epochs: 200,
            batch_size: 16,
            max_pairs: 2000,
            sweep_layer: 2,
            sweep_inputs: 20,
            alphas: linspace(0.0, 4.0, 41),
            local_samples: 150,
            bootstrap_resamples: 10_000,
            ci_level: 0.99,
            cluster_layer: 2,
            cluster_eps_fraction: 0.2,
        }
    }
}

/// Sub-seed slots derived from the run seed.
mod slot {
    pub const DATA: u64 = 0;
    pub const INIT: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const PAIRS: u64 = 3;
    pub const TEST_INPUTS: u64 = 4;
    pub const SWEEP: u64 = 5;
    pub const NOISE: u64 = 6;
    pub const SHUFFLE: u64 = 7;
    pub const NMF: u64 = 8;
    pub const BOOTSTRAP: u64 = 9;
}

/// A dataset with the same network before and after training.
#[derive(Debug, Clone)]
pub struct Specimen {
    pub data: LabeledDataset,
    pub untrained: PwlNetwork,
    pub trained: PwlNetwork,
    pub loss_history: Vec<f64>,
    pub accuracy: f64,
}

pub fn build_specimen(cfg: &ReproConfig, seed_value: u64) -> Result<Specimen> {
    let data = make_blobs(
        cfg.classes,
        cfg.per_class,
        cfg.sizes[0],
        cfg.spread,
        sub_seed(seed_value, slot::DATA),
    )?;
    let untrained = PwlNetwork::init_random(&cfg.sizes, sub_seed(seed_value, slot::INIT))?;
    let tc = TrainConfig {
        learning_rate: cfg.learning_rate,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        seed: sub_seed(seed_value, slot::TRAIN),
    };
    let (trained, loss_history) = train(&untrained, &data, &tc)?;
    let accuracy = accuracy(&trained, &data)?;
    Ok(Specimen {
        data,
        untrained,
        trained,
        loss_history,
        accuracy,
    })
}

#[derive(Debug, Clone)]
pub struct Prediction2 {
    pub trained: Vec<LayerGap>,
    pub untrained: Vec<LayerGap>,
}

impl Prediction2 {
    /// Trained net, first span: normalized intra < inter with p < 0.01.
    pub fn trained_separates(&self) -> Result<bool> {
        let r = &self.trained[0].report;
        Ok(r.normalized_intra_mean() < r.normalized_inter_mean() && r.welch()?.p_two_sided < ALPHA_LEVEL)
    }

    /// Untrained net, first span: no significant difference at p < 0.01.
    pub fn untrained_null(&self) -> Result<bool> {
        Ok(self.untrained[0].report.welch()?.p_two_sided >= ALPHA_LEVEL)
    }

    pub fn holds(&self) -> Result<bool> {
        Ok(self.trained_separates()? && self.untrained_null()?)
    }

    /// Trained gap at the last Relu layer exceeds the gap at the first.
    pub fn layer_trend(&self) -> bool {
        self.trained.last().map(|g| g.gap) > self.trained.first().map(|g| g.gap)
    }
}

pub fn prediction2(spec: &Specimen, cfg: &ReproConfig, seed_value: u64) -> Result<Prediction2> {
    let pair_seed = sub_seed(seed_value, slot::PAIRS);
    Ok(Prediction2 {
        trained: layerwise_density_gap(&spec.trained, &spec.data, cfg.max_pairs, pair_seed)?,
        untrained: layerwise_density_gap(&spec.untrained, &spec.data, cfg.max_pairs, pair_seed)?,
    })
}

#[derive(Debug, Clone)]
pub struct Prediction3 {
    pub test_inputs: Vec<Vec<f64>>,
    pub trained: Vec<SweepResult>,
    pub untrained: Vec<SweepResult>,
    pub noise: Vec<SweepResult>,
}

fn inside_unit(sweeps: &[SweepResult]) -> f64 {
    let hits = sweeps
        .iter()
        .filter(|s| {
            let a = s.peak_alpha();
            a > 0.0 && a < 1.0
        })
        .count();
    hits as f64 / sweeps.len() as f64
}

impl Prediction3 {
    pub fn trained_peak_fraction(&self) -> f64 {
        inside_unit(&self.trained)
    }

    pub fn noise_peak_fraction(&self) -> f64 {
        inside_unit(&self.noise)
    }

    /// Fraction of paired sweeps where the untrained peak-to-median ratio
    /// is below the trained one.
    pub fn untrained_flatter_fraction(&self) -> f64 {
        let lower = self
            .trained
            .iter()
            .zip(&self.untrained)
            .filter(|(t, u)| u.peak_to_median() < t.peak_to_median())
            .count();
        lower as f64 / self.trained.len() as f64
    }

    pub fn holds(&self) -> bool {
        self.trained_peak_fraction() >= PEAK_FRACTION
            && self.noise_peak_fraction() >= PEAK_FRACTION
            && self.untrained_flatter_fraction() >= PEAK_FRACTION
    }
}

pub fn test_inputs(cfg: &ReproConfig, seed_value: u64) -> Result<Vec<Vec<f64>>> {
    let per_class = cfg.sweep_inputs.div_ceil(cfg.classes);
    let fresh = make_blobs(
        cfg.classes,
        per_class,
        cfg.sizes[0],
        cfg.spread,
        sub_seed(seed_value, slot::TEST_INPUTS),
    )?;
    Ok(fresh.points()[..cfg.sweep_inputs].to_vec())
}

pub fn prediction3(spec: &Specimen, cfg: &ReproConfig, seed_value: u64) -> Result<Prediction3> {
    let inputs = test_inputs(cfg, seed_value)?;
    let opts = |i: usize| SweepOptions {
        n_samples: cfg.local_samples,
        seed: sub_seed(sub_seed(seed_value, slot::SWEEP), i as u64),
        ..SweepOptions::default()
    };
    let mut trained = Vec::new();
    let mut untrained = Vec::new();
    let mut noise = Vec::new();
    for (i, x) in inputs.iter().enumerate() {
        trained.push(scaling_sweep(&spec.trained, cfg.sweep_layer, x, &cfg.alphas, &opts(i))?);
        untrained.push(scaling_sweep(&spec.untrained, cfg.sweep_layer, x, &cfg.alphas, &opts(i))?);
        noise.push(noise_direction_sweep(
            &spec.trained,
            cfg.sweep_layer,
            &spec.data,
            sub_seed(sub_seed(seed_value, slot::NOISE), i as u64),
            &cfg.alphas,
            &opts(i),
        )?);
    }
    Ok(Prediction3 {
        test_inputs: inputs,
        trained,
        untrained,
        noise,
    })
}

#[derive(Debug, Clone)]
pub struct Prediction1 {
    pub activation_labels: ClusterLabels,
    pub code_labels: ClusterLabels,
    pub activation_purity: f64,
    pub code_purity: f64,
    /// Purity of the activation clusters against shuffled class labels.
    pub shuffled_purity: Vec<f64>,
    pub agreement: f64,
    /// Agreement of the code clusters with shuffled activation labels.
    pub shuffled_agreement: Vec<f64>,
    pub nmf_direction: Vec<f64>,
    pub nmf_history: Vec<f64>,
    /// Cosine histogram of each activation cluster against `nmf_direction`.
    pub cosine_histograms: Vec<(i64, Vec<usize>)>,
}

impl Prediction1 {
    pub fn purity_beats_control(&self) -> bool {
        self.shuffled_purity.iter().all(|&p| self.activation_purity > p)
    }

    pub fn agreement_beats_control(&self) -> bool {
        self.shuffled_agreement.iter().all(|&a| self.agreement > a)
    }

    pub fn holds(&self) -> bool {
        self.purity_beats_control() && self.agreement_beats_control()
    }
}

pub fn prediction1(spec: &Specimen, cfg: &ReproConfig, seed_value: u64) -> Result<Prediction1> {
    let net = &spec.trained;
    let layer = cfg.cluster_layer;
    let span = LayerSpan::to_output(net, layer)?;
    let acts: Vec<Vec<f64>> = spec
        .data
        .points()
        .iter()
        .map(|p| net.activation_into(layer, p))
        .collect::<Result<_>>()?;
    let codes: Vec<SplineCode> = acts.iter().map(|h| code_at(net, span, h)).collect::<Result<_>>()?;
    let registry = MetricRegistry::default();

    let adm = distance_matrix(&metric::vectors(&acts), registry.get("euclidean")?)?;
    let activation_labels = cluster(&adm, cfg.cluster_eps_fraction * adm.median(), DEFAULT_MIN_PTS)?;
    let cdm = distance_matrix(&metric::codes(&codes), registry.get("hamming")?)?;
    let code_eps = (cfg.cluster_eps_fraction * cdm.median()).max(f64::MIN_POSITIVE);
    let code_labels = cluster(&cdm, code_eps, DEFAULT_MIN_PTS)?;

    let classes = spec.data.labels();
    let activation_purity = monosemanticity_score(&activation_labels, classes)?.mean_purity;
    let code_purity = monosemanticity_score(&code_labels, classes)?.mean_purity;
    let agreement = adjusted_rand_index(&code_labels.labels, &activation_labels.labels)?;

    let mut rng = seed::rng(sub_seed(seed_value, slot::SHUFFLE));
    let mut shuffled_purity = Vec::new();
    let mut shuffled_agreement = Vec::new();
    for _ in 0..SHUFFLE_CONTROLS {
        let mut c = classes.to_vec();
        c.shuffle(&mut rng);
        shuffled_purity.push(monosemanticity_score(&activation_labels, &c)?.mean_purity);
        let mut a = activation_labels.labels.clone();
        a.shuffle(&mut rng);
        shuffled_agreement.push(adjusted_rand_index(&code_labels.labels, &a)?);
    }

    let x = Matrix::from_rows(&acts)?;
    let k = NMF_COMPONENTS.min(x.rows()).min(x.cols());
    let factors = nmf(&x, k, NMF_ITERATIONS, sub_seed(seed_value, slot::NMF))?;
    // Component carrying the most weight over the samples.
    let weights: Vec<f64> = (0..k)
        .map(|j| (0..x.rows()).map(|i| factors.w.get(i, j)).sum::<f64>() * crate::linalg::norm(factors.h.row(j)))
        .collect();
    let top = crate::net::argmax(&weights);
    let nmf_direction = factors.h.row(top).to_vec();
    let mut cosine_histograms = Vec::new();
    if crate::linalg::norm(&nmf_direction) > 0.0 {
        let profile = cosine_profile(&nmf_direction, &acts, &activation_labels)?;
        for (label, values) in &profile.per_cluster {
            cosine_histograms.push((*label, cosine_histogram(values)));
        }
    }
    Ok(Prediction1 {
        activation_labels,
        code_labels,
        activation_purity,
        code_purity,
        shuffled_purity,
        agreement,
        shuffled_agreement,
        nmf_direction,
        nmf_history: factors.reconstruction_history,
        cosine_histograms,
    })
}

/// One pass/fail line of the run summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReproSummary {
    pub checks: Vec<Check>,
}

impl ReproSummary {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{} {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        s
    }
}

fn f(v: f64) -> String {
    fmt_f64(v)
}

fn sweep_rows(rows: &mut Vec<Vec<String>>, condition: &str, sweeps: &[SweepResult]) {
    for (i, s) in sweeps.iter().enumerate() {
        for (j, &alpha) in s.alphas.iter().enumerate() {
            rows.push(vec![
                condition.to_string(),
                i.to_string(),
                f(alpha),
                f(s.local_density[j]),
                s.predicted_class[j].to_string(),
            ]);
        }
    }
}

/// Runs all three predictions and writes the CSVs, both networks, the
/// manifest and `summary.txt` into `out`.
pub fn run(cfg: &ReproConfig, seed_value: u64, out: &Path) -> Result<ReproSummary> {
    fs::create_dir_all(out)?;
    let spec = build_specimen(cfg, seed_value)?;
    spec.data.write_csv(out.join("data.csv"))?;
    save_network(&spec.untrained, out.join("net_untrained.json"))?;
    save_network(&spec.trained, out.join("net_trained.json"))?;
    let loss_rows: Vec<Vec<String>> = spec
        .loss_history
        .iter()
        .enumerate()
        .map(|(e, l)| vec![e.to_string(), f(*l)])
        .collect();
    write_csv(out.join("train_loss.csv"), &["epoch", "loss"], &loss_rows)?;

    let mut checks = vec![Check {
        name: "training".into(),
        passed: spec.accuracy >= 0.9,
        detail: format!("training accuracy {:.4}", spec.accuracy),
    }];

    // Prediction 2.
    let p2 = prediction2(&spec, cfg, seed_value)?;
    let mut rows = Vec::new();
    for (condition, gaps) in [("trained", &p2.trained), ("untrained", &p2.untrained)] {
        for g in gaps.iter() {
            let r = &g.report;
            let w = r.welch()?;
            let bseed = sub_seed(seed_value, slot::BOOTSTRAP);
            let ci_intra = bootstrap_ci(&r.normalized_intra(), Statistic::Mean, cfg.ci_level, cfg.bootstrap_resamples, bseed)?;
            let ci_inter = bootstrap_ci(&r.normalized_inter(), Statistic::Mean, cfg.ci_level, cfg.bootstrap_resamples, bseed)?;
            rows.push(vec![
                condition.to_string(),
                g.layer.to_string(),
                r.intra_samples.len().to_string(),
                r.inter_samples.len().to_string(),
                f(r.intra_mean),
                f(r.inter_mean),
                f(r.normalization_constant),
                f(r.normalized_intra_mean()),
                f(r.normalized_inter_mean()),
                f(ci_intra.low),
                f(ci_intra.high),
                f(ci_inter.low),
                f(ci_inter.high),
                f(g.gap),
                f(w.t),
                f(w.dof),
                f(w.p_two_sided),
            ]);
        }
    }
    write_csv(
        out.join("density.csv"),
        &[
            "condition", "layer", "intra_pairs", "inter_pairs", "intra_mean", "inter_mean",
            "normalization", "norm_intra", "norm_inter", "intra_ci_low", "intra_ci_high",
            "inter_ci_low", "inter_ci_high", "gap", "t", "dof", "p",
        ],
        &rows,
    )?;
    let tw = p2.trained[0].report.welch()?;
    let uw = p2.untrained[0].report.welch()?;
    checks.push(Check {
        name: "prediction-2 trained".into(),
        passed: p2.trained_separates()?,
        detail: format!(
            "normalized intra {:.4} vs inter {:.4}, t({:.1}) = {:.2}, p = {:.3e}",
            p2.trained[0].report.normalized_intra_mean(),
            p2.trained[0].report.normalized_inter_mean(),
            tw.dof,
            tw.t,
            tw.p_two_sided
        ),
    });
    checks.push(Check {
        name: "prediction-2 untrained null".into(),
        passed: p2.untrained_null()?,
        detail: format!("t({:.1}) = {:.2}, p = {:.3e}", uw.dof, uw.t, uw.p_two_sided),
    });
    checks.push(Check {
        name: "prediction-2 layer trend".into(),
        passed: p2.layer_trend(),
        detail: format!(
            "gaps by layer: {}",
            p2.trained
                .iter()
                .map(|g| format!("{}:{:.4}", g.layer, g.gap))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    });

    // Prediction 3.
    let p3 = prediction3(&spec, cfg, seed_value)?;
    let mut rows = Vec::new();
    sweep_rows(&mut rows, "trained", &p3.trained);
    sweep_rows(&mut rows, "untrained", &p3.untrained);
    sweep_rows(&mut rows, "noise", &p3.noise);
    write_csv(
        out.join("sweep.csv"),
        &["condition", "input", "alpha", "local_density", "predicted_class"],
        &rows,
    )?;
    checks.push(Check {
        name: "prediction-3 peak".into(),
        passed: p3.trained_peak_fraction() >= PEAK_FRACTION,
        detail: format!("peak strictly inside (0, 1) for {:.2} of inputs", p3.trained_peak_fraction()),
    });
    checks.push(Check {
        name: "prediction-3 noise peak".into(),
        passed: p3.noise_peak_fraction() >= PEAK_FRACTION,
        detail: format!("peak strictly inside (0, 1) for {:.2} of directions", p3.noise_peak_fraction()),
    });
    checks.push(Check {
        name: "prediction-3 untrained flatter".into(),
        passed: p3.untrained_flatter_fraction() >= PEAK_FRACTION,
        detail: format!(
            "untrained peak/median below trained for {:.2} of pairs",
            p3.untrained_flatter_fraction()
        ),
    });

    // Prediction 1.
    let p1 = prediction1(&spec, cfg, seed_value)?;
    let rows: Vec<Vec<String>> = (0..spec.data.len())
        .map(|i| {
            vec![
                i.to_string(),
                spec.data.label(i).to_string(),
                p1.activation_labels.labels[i].to_string(),
                p1.code_labels.labels[i].to_string(),
            ]
        })
        .collect();
    write_csv(
        out.join("clusters.csv"),
        &["index", "class", "activation_cluster", "code_cluster"],
        &rows,
    )?;
    let mut rows = Vec::new();
    for (label, hist) in &p1.cosine_histograms {
        for (b, count) in hist.iter().enumerate() {
            rows.push(vec![
                label.to_string(),
                b.to_string(),
                f(crate::cluster::profile::bin_lower_edge(b)),
                count.to_string(),
            ]);
        }
    }
    write_csv(out.join("cosine_hist.csv"), &["cluster", "bin", "lower_edge", "count"], &rows)?;
    let rows: Vec<Vec<String>> = p1
        .nmf_history
        .iter()
        .enumerate()
        .map(|(i, e)| vec![i.to_string(), f(*e)])
        .collect();
    write_csv(out.join("nmf_history.csv"), &["iteration", "squared_error"], &rows)?;
    let max_shuffled = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check {
        name: "prediction-1 purity".into(),
        passed: p1.purity_beats_control(),
        detail: format!(
            "{} activation clusters, purity {:.4} vs best shuffled {:.4}; code purity {:.4}",
            p1.activation_labels.cluster_count,
            p1.activation_purity,
            max_shuffled(&p1.shuffled_purity),
            p1.code_purity
        ),
    });
    checks.push(Check {
        name: "prediction-1 agreement".into(),
        passed: p1.agreement_beats_control(),
        detail: format!(
            "adjusted Rand {:.4} vs best shuffled {:.4}",
            p1.agreement,
            max_shuffled(&p1.shuffled_agreement)
        ),
    });

    let summary = ReproSummary { checks };
    fs::write(out.join("summary.txt"), summary.render())?;
    Manifest::new("repro")
        .param("seed", seed_value)
        .param("sizes", cfg.sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","))
        .param("per_class", cfg.per_class)
        .param("spread", fmt_f64(cfg.spread))
        .param("learning_rate", fmt_f64(cfg.learning_rate))
        .param("epochs", cfg.epochs)
        .param("batch_size", cfg.batch_size)
        .param("max_pairs", cfg.max_pairs)
        .param("sweep_layer", cfg.sweep_layer)
        .param("sweep_inputs", cfg.sweep_inputs)
        .param("local_samples", cfg.local_samples)
        .param("cluster_eps_fraction", fmt_f64(cfg.cluster_eps_fraction))
        .param("bootstrap_resamples", cfg.bootstrap_resamples)
        .write(out)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ReproConfig {
        ReproConfig {
            sizes: vec![2, 8, 8, 3],
            per_class: 30,
            epochs: 30,
            max_pairs: 200,
            sweep_layer: 1,
            sweep_inputs: 4,
            alphas: linspace(0.0, 4.0, 9),
            local_samples: 20,
            bootstrap_resamples: 200,
            cluster_layer: 1,
            ..ReproConfig::default()
        }
    }

    #[test]
    fn run_writes_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let summary = run(&small(), 3, dir.path()).unwrap();
        for name in [
            "data.csv", "net_untrained.json", "net_trained.json", "train_loss.csv", "density.csv",
            "sweep.csv", "clusters.csv", "cosine_hist.csv", "nmf_history.csv", "summary.txt",
            "manifest.txt",
        ] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        assert_eq!(summary.checks.len(), 9);
        let text = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert_eq!(text.lines().count(), 9);
        assert!(text.lines().all(|l| l.starts_with("PASS ") || l.starts_with("FAIL ")));
    }

    #[test]
    fn specimen_is_deterministic() {
        let a = build_specimen(&small(), 5).unwrap();
        let b = build_specimen(&small(), 5).unwrap();
        assert_eq!(a.trained, b.trained);
        assert_eq!(a.loss_history, b.loss_history);
        assert_ne!(a.trained, build_specimen(&small(), 6).unwrap().trained);
    }
}
