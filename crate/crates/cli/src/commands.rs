//! One function per subcommand. Each writes its files plus `manifest.txt`
//! into `--out` and prints a short summary.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use polytope_core::cluster::profile::{bin_lower_edge, cosine_histogram, cosine_profile, monosemanticity_score};
use polytope_core::cluster::{self, distance_matrix, nmf as factorize, shift_to_min, ClusterLabels, Item, MetricKind, MetricRegistry};
use polytope_core::code::code_at;
use polytope_core::data::make_blobs;
use polytope_core::density::{
    class_density_report, interpolate as make_path, layerwise_density_gap, local_density, noise_direction_sweep,
    path_crossings, scaling_sweep, PathMode, PathSpec, RadiusRule, SweepOptions, SweepResult,
};
use polytope_core::net::{accuracy, load_network, save_network, train as fit};
use polytope_core::oracle::{adjacency_graph, enumerate_regions, region_count_bound, verify_regions, RegionCensus};
use polytope_core::output::{fmt_f64 as f, read_table, write_csv, Manifest};
use polytope_core::repro::{self, ReproConfig};
use polytope_core::seed::sub_seed;
use polytope_core::slice::{
    boundary_field, evaluate_grid, export_image, gaussian_smooth, plane_from_three, sidecar_text, triangle_mean,
    Extent, ImageScale,
};
use polytope_core::stats::{bootstrap_ci, welch_t, Statistic};
use polytope_core::{Error, LabeledDataset, LayerSpan, Matrix, PwlNetwork, Result, TrainConfig};

use crate::parse;
use crate::{
    BootstrapArgs, ClusterArgs, CodeArgs, DensityArgs, GenDataArgs, InterpolateArgs, LayerGapArgs, NmfArgs,
    OracleArgs, OracleCommand, ReproArgs, SliceArgs, StatsCommand, SweepArgs, TrainArgs, WelchArgs,
};

fn out_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path)?;
    Ok(())
}

fn strings<T: ToString>(xs: impl IntoIterator<Item = T>) -> Vec<String> {
    xs.into_iter().map(|x| x.to_string()).collect()
}

fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(path, &header, rows)
}

fn span_text(span: LayerSpan) -> String {
    format!("{} {}", span.start(), span.k())
}

pub fn gen_data(a: GenDataArgs) -> Result<ExitCode> {
    let data = make_blobs(a.classes, a.per_class, a.dim, a.spread, a.seed)?;
    out_dir(&a.out)?;
    data.write_csv(a.out.join("data.csv"))?;
    Manifest::new("gen-data")
        .param("classes", a.classes)
        .param("per_class", a.per_class)
        .param("dim", a.dim)
        .param("spread", a.spread)
        .param("seed", a.seed)
        .write(&a.out)?;
    println!("points={} classes={} dim={}", data.len(), data.num_classes(), data.dim());
    Ok(ExitCode::SUCCESS)
}

pub fn train(a: TrainArgs) -> Result<ExitCode> {
    let data = LabeledDataset::read_csv(&a.data)?;
    let sizes = parse::sizes(&a.sizes)?;
    if sizes.first() != Some(&data.dim()) {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: sizes.first().copied().unwrap_or(0),
        });
    }
    let init = PwlNetwork::init_random(&sizes, sub_seed(a.seed, 1))?;
    let cfg = TrainConfig {
        learning_rate: a.lr,
        epochs: a.epochs,
        batch_size: a.batch,
        seed: sub_seed(a.seed, 2),
    };
    let (net, losses) = fit(&init, &data, &cfg)?;
    out_dir(&a.out)?;
    save_network(&init, a.out.join("net_init.json"))?;
    save_network(&net, a.out.join("net.json"))?;
    let rows: Vec<Vec<String>> = losses.iter().enumerate().map(|(e, l)| vec![e.to_string(), f(*l)]).collect();
    write_csv(a.out.join("loss.csv"), &["epoch", "loss"], &rows)?;
    let acc = accuracy(&net, &data)?;
    Manifest::new("train")
        .param("sizes", &a.sizes)
        .param("lr", a.lr)
        .param("epochs", a.epochs)
        .param("batch", a.batch)
        .param("seed", a.seed)
        .input(&a.data)?
        .write(&a.out)?;
    println!(
        "final_loss={} accuracy={:.4}",
        f(losses.last().copied().unwrap_or(f64::NAN)),
        acc
    );
    Ok(ExitCode::SUCCESS)
}

pub fn code(a: CodeArgs) -> Result<ExitCode> {
    let net = load_network(&a.net)?;
    let span = parse::span(&Some(a.span), &net)?;
    let x = parse::vector(&a.input)?;
    let c = code_at(&net, span, &x)?;
    println!("{c}");
    Ok(ExitCode::SUCCESS)
}

pub fn density(a: DensityArgs) -> Result<ExitCode> {
    let net = load_network(&a.net)?;
    let data = LabeledDataset::read_csv(&a.data)?;
    let span = parse::span(&a.span.span, &net)?;
    let r = class_density_report(&net, span, &data, a.max_pairs, sub_seed(a.seed, 0))?;
    let w = r.welch()?;
    let bseed = sub_seed(a.seed, 1);
    let ci_intra = bootstrap_ci(&r.normalized_intra(), Statistic::Mean, a.level, a.resamples, bseed)?;
    let ci_inter = bootstrap_ci(&r.normalized_inter(), Statistic::Mean, a.level, a.resamples, bseed)?;
    out_dir(&a.out)?;
    write_csv(
        a.out.join("density.csv"),
        &[
            "span_start", "span_k", "intra_pairs", "inter_pairs", "intra_mean", "inter_mean", "normalization",
            "norm_intra", "norm_inter", "intra_ci_low", "intra_ci_high", "inter_ci_low", "inter_ci_high", "gap",
            "t", "dof", "p",
        ],
        &[vec![
            span.start().to_string(),
            span.k().to_string(),
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
            f(r.gap()),
            f(w.t),
            f(w.dof),
            f(w.p_two_sided),
        ]],
    )?;
    let mut rows = Vec::new();
    for (group, pairs, samples) in [
        ("intra", &r.intra_pairs, &r.intra_samples),
        ("inter", &r.inter_pairs, &r.inter_samples),
    ] {
        for (&(i, j), &d) in pairs.iter().zip(samples.iter()) {
            rows.push(vec![group.into(), i.to_string(), j.to_string(), f(d)]);
        }
    }
    write_csv(a.out.join("pairs.csv"), &["group", "i", "j", "density"], &rows)?;
    Manifest::new("density")
        .param("span", span_text(span))
        .param("max_pairs", a.max_pairs)
        .param("resamples", a.resamples)
        .param("level", a.level)
        .param("seed", a.seed)
        .input(&a.net)?
        .input(&a.data)?
        .write(&a.out)?;
    println!(
        "norm_intra={:.6} norm_inter={:.6} gap={:.6} t={:.4} dof={:.1} p={:.3e} skipped={}",
        r.normalized_intra_mean(),
        r.normalized_inter_mean(),
        r.gap(),
        w.t,
        w.dof,
        w.p_two_sided,
        r.skipped_coincident
    );
    Ok(ExitCode::SUCCESS)
}

pub fn layer_gap(a: LayerGapArgs) -> Result<ExitCode> {
    let net = load_network(&a.net)?;
    let data = LabeledDataset::read_csv(&a.data)?;
    let gaps = layerwise_density_gap(&net, &data, a.max_pairs, a.seed)?;
    let mut rows = Vec::new();
    for g in &gaps {
        let w = g.report.welch()?;
        rows.push(vec![
            g.layer.to_string(),
            f(g.report.normalized_intra_mean()),
            f(g.report.normalized_inter_mean()),
            f(g.gap),
            f(w.t),
            f(w.dof),
            f(w.p_two_sided),
        ]);
        println!("layer={} gap={:.6} p={:.3e}", g.layer, g.gap, w.p_two_sided);
    }
    out_dir(&a.out)?;
    write_csv(
        a.out.join("layer_gap.csv"),
        &["layer", "norm_intra", "norm_inter", "gap", "t", "dof", "p"],
        &rows,
    )?;
    Manifest::new("layer-gap")
        .param("max_pairs", a.max_pairs)
        .param("seed", a.seed)
        .input(&a.net)?
        .input(&a.data)?
        .write(&a.out)?;
    Ok(ExitCode::SUCCESS)
}

pub fn interpolate(a: InterpolateArgs) -> Result<ExitCode> {
    let net = load_network(&a.net)?;
    let span = parse::span(&a.span.span, &net)?;
    let mode = PathMode::from_name(&a.mode)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown mode {:?} (linear, spherical)", a.mode)))?;
    let mut from = parse::vector(&a.from)?;
    let mut to = parse::vector(&a.to)?;
    if a.from_inputs {
        from = net.activation_into(span.start(), &from)?;
        to = net.activation_into(span.start(), &to)?;
    }
    let path = make_path(&PathSpec {
        a: from,
        b: to,
        mode,
        samples: a.samples,
    })?;
    let crossings = path_crossings(&net, span, &path)?;
    let local = match (a.local_samples, a.seed) {
        (Some(n), Some(seed)) => {
            let rule = RadiusRule::RelativeToPoint(a.radius_fraction);
            Some(
                path.iter()
                    .map(|p| local_density(&net, span, p, rule.radius_at(p), n, seed))
                    .collect::<Result<Vec<f64>>>()?,
            )
        }
        (Some(_), None) => {
            return Err(Error::InvalidArgument("--local-samples needs --seed".into()));
        }
        (None, _) => None,
    };
    let dim = path[0].len();
    let mut header = vec!["index".to_string()];
    header.extend(numbered("h", dim));
    header.push("hamming_to_next".into());
    if local.is_some() {
        header.push("local_density".into());
    }
    let rows: Vec<Vec<String>> = path
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut r = vec![i.to_string()];
            r.extend(p.iter().map(|v| f(*v)));
            r.push(crossings.per_segment.get(i).map_or(String::new(), |h| h.to_string()));
            if let Some(l) = &local {
                r.push(f(l[i]));
            }
            r
        })
        .collect();
    out_dir(&a.out)?;
    write_table(&a.out.join("path.csv"), &header, &rows)?;
    let mut m = Manifest::new("interpolate")
        .param("span", span_text(span))
        .param("from", &a.from)
        .param("to", &a.to)
        .param("from_inputs", a.from_inputs)
        .param("mode", &a.mode)
        .param("samples", a.samples);
    if let (Some(n), Some(seed)) = (a.local_samples, a.seed) {
        m = m
            .param("local_samples", n)
            .param("radius_fraction", a.radius_fraction)
            .param("seed", seed);
    }
    m.input(&a.net)?.write(&a.out)?;
    println!(
        "total_hamming={} arc_length={:.6} density={:.6}",
        crossings.total_hamming, crossings.arc_length, crossings.density
    );
    Ok(ExitCode::SUCCESS)
}

fn sweep_table(s: &SweepResult) -> (Vec<String>, Vec<Vec<String>>) {
    let classes = s.logits.first().map_or(0, Vec::len);
    let mut header = strings(["alpha", "local_density", "predicted_class"]);
    header.extend(numbered("logit", classes));
    let rows = (0..s.alphas.len())
        .map(|i| {
            let mut r = vec![f(s.alphas[i]), f(s.local_density[i]), s.predicted_class[i].to_string()];
            r.extend(s.logits[i].iter().map(|v| f(*v)));
            r
        })
        .collect();
    (header, rows)
}

pub fn sweep(a: SweepArgs) -> Result<ExitCode> {
    let net = load_network(&a.net)?;
    let alphas = parse::alphas(&a.alphas)?;
    let opts = SweepOptions {
        radius: match a.radius {
            Some(r) => RadiusRule::Fixed(r),
            None => RadiusRule::RelativeToPoint(a.radius_fraction),
        },
        n_samples: a.samples,
        seed: sub_seed(a.seed, 1),
    };
    let mut m = Manifest::new("sweep")
        .param("layer", a.layer)
        .param("alphas", &a.alphas)
        .param("samples", a.samples)
        .param("seed", a.seed);
    m = match a.radius {
        Some(r) => m.param("radius", r),
        None => m.param("radius_fraction", a.radius_fraction),
    };
    let result = match (&a.input, &a.reference) {
        (Some(input), _) => {
            m = m.param("input", input);
            scaling_sweep(&net, a.layer, &parse::vector(input)?, &alphas, &opts)?
        }
        (None, Some(reference)) if a.noise => {
            let data = LabeledDataset::read_csv(reference)?;
            m = m.param("noise", true).input(reference)?;
            noise_direction_sweep(&net, a.layer, &data, sub_seed(a.seed, 0), &alphas, &opts)?
        }
        _ => return Err(Error::InvalidArgument("give --input, or --noise with --reference".into())),
    };
    let (header, rows) = sweep_table(&result);
    out_dir(&a.out)?;
    write_table(&a.out.join("sweep.csv"), &header, &rows)?;
    m.input(&a.net)?.write(&a.out)?;
    println!(
        "peak_alpha={} peak_to_median={:.6}",
        f(result.peak_alpha()),
        result.peak_to_median()
    );
    Ok(ExitCode::SUCCESS)
}

pub fn slice(a: SliceArgs) -> Result<ExitCode> {
    let net = load_network(&a.net)?;
    let span = parse::span(&a.span.span, &net)?;
    let scale = ImageScale::from_name(&a.scale)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown scale {:?} (linear, log1p)", a.scale)))?;
    let table = read_table(&a.anchors)?.numeric_rows()?;
    if table.len() != 3 {
        return Err(Error::InvalidArgument(format!(
            "anchors file needs exactly 3 rows, found {}",
            table.len()
        )));
    }
    let anchors = if a.from_inputs {
        table
            .iter()
            .map(|r| net.activation_into(span.start(), r))
            .collect::<Result<Vec<_>>>()?
    } else {
        table
    };
    let plane = plane_from_three(&anchors[0], &anchors[1], &anchors[2])?;
    let refs: Vec<&[f64]> = anchors.iter().map(Vec::as_slice).collect();
    let extent = Extent::around(&plane, &refs);
    let grid = evaluate_grid(&net, span, &plane, a.res, a.res, &extent)?;
    let regions = grid.codes.iter().collect::<BTreeSet<_>>().len();
    let field = gaussian_smooth(&boundary_field(&grid)?, a.sigma)?;
    out_dir(&a.out)?;
    export_image(&field, a.out.join("slice.pgm"), scale)?;
    fs::write(
        a.out.join("slice.txt"),
        sidecar_text(&plane, &extent, a.res, a.res, span, a.sigma, scale),
    )?;
    let (tri_mean, tri_pixels) = triangle_mean(&field, &plane, &extent, [refs[0], refs[1], refs[2]]);
    Manifest::new("slice")
        .param("span", span_text(span))
        .param("res", a.res)
        .param("sigma", a.sigma)
        .param("scale", scale.name())
        .param("from_inputs", a.from_inputs)
        .input(&a.net)?
        .input(&a.anchors)?
        .write(&a.out)?;
    println!(
        "regions={} field_mean={:.6} triangle_mean={:.6} triangle_pixels={}",
        regions,
        field.mean(),
        tri_mean,
        tri_pixels
    );
    Ok(ExitCode::SUCCESS)
}

fn activations(net: &PwlNetwork, layer: usize, data: &LabeledDataset) -> Result<Vec<Vec<f64>>> {
    data.points().iter().map(|p| net.activation_into(layer, p)).collect()
}

pub fn cluster(a: ClusterArgs) -> Result<ExitCode> {
    let net = load_network(&a.net)?;
    let data = LabeledDataset::read_csv(&a.data)?;
    let registry = MetricRegistry::default();
    let metric = registry.get(&a.metric)?;
    let acts = activations(&net, a.layer, &data)?;
    // Hamming metrics compare spline codes; the rest compare activations.
    let codes = match metric.kind() {
        MetricKind::Hamming => {
            let span = LayerSpan::to_output(&net, a.layer)?;
            acts.iter().map(|h| code_at(&net, span, h)).collect::<Result<Vec<_>>>()?
        }
        _ => Vec::new(),
    };
    let items: Vec<Item<'_>> = match metric.kind() {
        MetricKind::Hamming => cluster::metric::codes(&codes),
        _ => cluster::metric::vectors(&acts),
    };
    let dm = distance_matrix(&items, metric)?;
    let eps = a.eps.unwrap_or(a.eps_fraction * dm.median());
    let labels = cluster::cluster(&dm, eps, a.min_pts)?;
    let purity = monosemanticity_score(&labels, data.labels())?;
    out_dir(&a.out)?;
    let rows: Vec<Vec<String>> = (0..data.len())
        .map(|i| vec![i.to_string(), data.label(i).to_string(), labels.labels[i].to_string()])
        .collect();
    write_csv(a.out.join("labels.csv"), &["index", "class", "cluster"], &rows)?;
    let rows: Vec<Vec<String>> = purity
        .clusters
        .iter()
        .map(|c| vec![c.cluster.to_string(), c.size.to_string(), c.majority_class.to_string(), f(c.purity)])
        .collect();
    write_csv(a.out.join("purity.csv"), &["cluster", "size", "majority_class", "purity"], &rows)?;
    Manifest::new("cluster")
        .param("layer", a.layer)
        .param("metric", metric.name())
        .param("eps", f(eps))
        .param("min_pts", a.min_pts)
        .input(&a.net)?
        .input(&a.data)?
        .write(&a.out)?;
    println!(
        "clusters={} noise={} eps={:.6} mean_purity={:.4}",
        labels.cluster_count,
        labels.noise_count(),
        eps,
        purity.mean_purity
    );
    Ok(ExitCode::SUCCESS)
}

fn read_labels(path: &Path, n: usize) -> Result<ClusterLabels> {
    let table = read_table(path)?;
    let col = table.column("cluster")?;
    if col.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: col.len() });
    }
    let labels: Vec<i64> = col.iter().map(|&v| v as i64).collect();
    if col.iter().zip(&labels).any(|(&v, &l)| v != l as f64 || l < cluster::NOISE) {
        return Err(Error::Parse("cluster labels must be integers >= -1".into()));
    }
    let cluster_count = labels.iter().map(|&l| l + 1).max().unwrap_or(0) as usize;
    Ok(ClusterLabels { labels, cluster_count })
}

pub fn nmf(a: NmfArgs) -> Result<ExitCode> {
    let net = load_network(&a.net)?;
    let data = LabeledDataset::read_csv(&a.data)?;
    let acts = activations(&net, a.layer, &data)?;
    let mut x = Matrix::from_rows(&acts)?;
    if a.shift_to_min {
        x = shift_to_min(&x);
    }
    let labels = a.labels.as_deref().map(|p| read_labels(p, data.len())).transpose()?;
    let factors = factorize(&x, a.k, a.iters, a.seed)?;
    out_dir(&a.out)?;

    let mut header = strings(["sample"]);
    header.extend(numbered("c", a.k));
    let rows: Vec<Vec<String>> = (0..factors.w.rows())
        .map(|i| {
            let mut r = vec![i.to_string()];
            r.extend(factors.w.row(i).iter().map(|v| f(*v)));
            r
        })
        .collect();
    write_table(&a.out.join("w.csv"), &header, &rows)?;

    let mut header = strings(["component"]);
    header.extend(numbered("d", factors.h.cols()));
    let rows: Vec<Vec<String>> = (0..factors.h.rows())
        .map(|i| {
            let mut r = vec![i.to_string()];
            r.extend(factors.h.row(i).iter().map(|v| f(*v)));
            r
        })
        .collect();
    write_table(&a.out.join("h.csv"), &header, &rows)?;

    let rows: Vec<Vec<String>> = factors
        .reconstruction_history
        .iter()
        .enumerate()
        .map(|(i, e)| vec![i.to_string(), f(*e)])
        .collect();
    write_csv(a.out.join("history.csv"), &["iteration", "squared_error"], &rows)?;

    let mut m = Manifest::new("nmf")
        .param("layer", a.layer)
        .param("k", a.k)
        .param("iters", a.iters)
        .param("shift_to_min", a.shift_to_min)
        .param("seed", a.seed)
        .input(&a.net)?
        .input(&a.data)?;
    if let (Some(labels), Some(path)) = (&labels, &a.labels) {
        let mut rows = Vec::new();
        for c in 0..factors.h.rows() {
            let profile = cosine_profile(factors.h.row(c), &acts, labels)?;
            for (cl, values) in &profile.per_cluster {
                for (b, count) in cosine_histogram(values).iter().enumerate() {
                    rows.push(vec![c.to_string(), cl.to_string(), b.to_string(), f(bin_lower_edge(b)), count.to_string()]);
                }
            }
        }
        write_csv(
            a.out.join("cosine_hist.csv"),
            &["component", "cluster", "bin", "lower_edge", "count"],
            &rows,
        )?;
        m = m.input(path)?;
    }
    m.write(&a.out)?;
    println!("final_squared_error={}", f(factors.final_error()));
    Ok(ExitCode::SUCCESS)
}

fn census(args: &OracleArgs) -> Result<(PwlNetwork, LayerSpan, RegionCensus)> {
    let net = load_network(&args.net)?;
    let span = parse::span(&args.span.span, &net)?;
    let bounds = parse::bounds(&args.bounds, span.input_dim(&net)?)?;
    let census = enumerate_regions(&net, span, &bounds, args.res)?;
    Ok((net, span, census))
}

fn oracle_manifest(command: &str, args: &OracleArgs, span: LayerSpan) -> Result<Manifest> {
    Manifest::new(command)
        .param("span", span_text(span))
        .param("bounds", &args.bounds)
        .param("res", args.res)
        .input(&args.net)
}

pub fn oracle(command: OracleCommand) -> Result<ExitCode> {
    match command {
        OracleCommand::Enumerate(args) => {
            let (net, span, census) = census(&args)?;
            out_dir(&args.out)?;
            census.write_csv(args.out.join("census.csv"))?;
            oracle_manifest("oracle enumerate", &args, span)?.write(&args.out)?;
            let bound = region_count_bound(span.code_length(&net)? as u64, span.input_dim(&net)? as u64)?;
            println!("regions={} bound={}", census.region_count(), bound);
            Ok(ExitCode::SUCCESS)
        }
        OracleCommand::Verify { args, tol } => {
            let (net, span, census) = census(&args)?;
            let report = verify_regions(&net, span, &census, tol)?;
            out_dir(&args.out)?;
            let dim = census.bounds.dim();
            let mut header = strings(["code_hex"]);
            header.extend(numbered("x", dim));
            header.extend(strings(["error", "allowed"]));
            let rows: Vec<Vec<String>> = report
                .violations
                .iter()
                .map(|v| {
                    let mut r = vec![v.code.to_hex()];
                    r.extend(v.point.iter().map(|x| f(*x)));
                    r.push(f(v.error));
                    r.push(f(v.allowed));
                    r
                })
                .collect();
            write_table(&args.out.join("violations.csv"), &header, &rows)?;
            oracle_manifest("oracle verify", &args, span)?.param("tol", tol).write(&args.out)?;
            println!(
                "checked={} regions={} max_relative_error={:.3e} violations={}",
                report.checked,
                census.region_count(),
                report.max_relative_error,
                report.violations.len()
            );
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        OracleCommand::Adjacency(args) => {
            let (_, span, census) = census(&args)?;
            let graph = adjacency_graph(&census)?;
            out_dir(&args.out)?;
            let rows: Vec<Vec<String>> = graph
                .edges
                .iter()
                .map(|(&(i, j), h)| vec![graph.nodes[i].to_hex(), graph.nodes[j].to_hex(), h.to_string()])
                .collect();
            write_csv(args.out.join("edges.csv"), &["code_a", "code_b", "hamming"], &rows)?;
            oracle_manifest("oracle adjacency", &args, span)?.write(&args.out)?;
            println!(
                "regions={} edges={} hamming_one_fraction={:.4}",
                graph.nodes.len(),
                graph.edges.len(),
                graph.hamming_one_fraction()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn welch(a: WelchArgs) -> Result<ExitCode> {
    let xs = read_table(&a.a)?.column(&a.a_col)?;
    let ys = read_table(&a.b)?.column(&a.b_col)?;
    let w = welch_t(&xs, &ys)?;
    if let Some(out) = &a.out {
        out_dir(out)?;
        write_csv(
            out.join("welch.csv"),
            &["n_a", "n_b", "t", "dof", "p"],
            &[vec![xs.len().to_string(), ys.len().to_string(), f(w.t), f(w.dof), f(w.p_two_sided)]],
        )?;
        Manifest::new("stats welch")
            .param("a_col", &a.a_col)
            .param("b_col", &a.b_col)
            .input(&a.a)?
            .input(&a.b)?
            .write(out)?;
    }
    println!("t={} dof={} p={}", f(w.t), f(w.dof), f(w.p_two_sided));
    Ok(ExitCode::SUCCESS)
}

fn bootstrap(a: BootstrapArgs) -> Result<ExitCode> {
    let statistic = Statistic::from_name(&a.statistic)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown statistic {:?} (mean, median)", a.statistic)))?;
    let xs = read_table(&a.csv)?.column(&a.col)?;
    let ci = bootstrap_ci(&xs, statistic, a.level, a.resamples, a.seed)?;
    if let Some(out) = &a.out {
        out_dir(out)?;
        write_csv(
            out.join("bootstrap.csv"),
            &["statistic", "level", "resamples", "estimate", "low", "high"],
            &[vec![
                a.statistic.clone(),
                f(a.level),
                a.resamples.to_string(),
                f(ci.point_estimate),
                f(ci.low),
                f(ci.high),
            ]],
        )?;
        Manifest::new("stats bootstrap")
            .param("col", &a.col)
            .param("statistic", &a.statistic)
            .param("level", a.level)
            .param("resamples", a.resamples)
            .param("seed", a.seed)
            .input(&a.csv)?
            .write(out)?;
    }
    println!("estimate={} low={} high={}", f(ci.point_estimate), f(ci.low), f(ci.high));
    Ok(ExitCode::SUCCESS)
}

pub fn stats(command: StatsCommand) -> Result<ExitCode> {
    match command {
        StatsCommand::Welch(a) => welch(a),
        StatsCommand::Bootstrap(a) => bootstrap(a),
    }
}

pub fn repro(a: ReproArgs) -> Result<ExitCode> {
    let summary = repro::run(&ReproConfig::default(), a.seed, &a.out)?;
    print!("{}", summary.render());
    Ok(if a.strict && !summary.all_passed() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}
