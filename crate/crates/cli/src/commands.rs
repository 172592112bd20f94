//! The five subcommands. Every command prints a provenance line with its
//! fully resolved configuration to stdout and writes byte-deterministic
//! artifacts: reruns with identical inputs and seeds produce identical
//! files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;

use noisydet_core::anchors::{nms_indices, positive_census, AnchorConfig, ImageInfo};
use noisydet_core::froc::{afroc, froc_curve, BootstrapCase, BootstrapConfig};
use noisydet_core::mining::{build_pool, sample_training_rois, MiningPool, ScoredProposal};
use noisydet_core::noise::{inject_noise_dataset, Annotation, NoiseConfig};
use noisydet_core::{Detection, MatchCriterion};

use crate::boot::{bootstrap_afroc_parallel, sensitivity_band};
use crate::error::{CliError, Result};
use crate::io::{self, DatasetEntry};
use crate::svg;

fn provenance(command: &str, fields: &[(&str, String)]) {
    let body: Vec<String> = fields.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!("# noisydet {command} {}", body.join(" "));
}

/// Runs `f` inside a rayon pool sized by NOISYDET_THREADS when set;
/// results do not depend on the pool size.
fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match std::env::var("NOISYDET_THREADS") {
        Err(_) => Ok(f()),
        Ok(raw) => {
            let threads: usize = raw.parse().map_err(|_| {
                CliError::usage(format!("NOISYDET_THREADS must be a positive integer, got {raw:?}"))
            })?;
            if threads == 0 {
                return Err(CliError::usage("NOISYDET_THREADS must be at least 1"));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| CliError::validation(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Args)]
pub struct InjectNoiseArgs {
    /// Input dataset CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Output dataset CSV; a `<output>.hist.csv` sidecar with diameter
    /// histograms is written next to it.
    #[arg(long)]
    pub output: PathBuf,
    /// Mean of the multiplicative enlargement factor (non-negative).
    #[arg(long)]
    pub mu: f64,
    #[arg(long)]
    pub seed: u64,
    /// Upper clip bound of the noise factor (exclusive).
    #[arg(long, default_value_t = 6.0)]
    pub clip_high: f64,
    /// Cap on noisy box sides as a fraction of the image dimension.
    #[arg(long, default_value_t = 0.8)]
    pub max_fraction: f64,
}

/// Box diameter used in the histogram report: the larger side.
fn diameter(a: &Annotation) -> f64 {
    a.bbox().width().max(a.bbox().height())
}

fn diameter_histogram(input: &[Annotation], noisy: &[Annotation]) -> Vec<Vec<String>> {
    const BIN: f64 = 10.0;
    let max = input
        .iter()
        .chain(noisy)
        .map(diameter)
        .fold(0.0f64, f64::max);
    let bins = (max / BIN).ceil() as usize;
    let mut rows = Vec::new();
    for (name, data) in [("input", input), ("noisy", noisy)] {
        let mut counts = vec![0usize; bins];
        for a in data {
            let idx = ((diameter(a) / BIN) as usize).min(bins.saturating_sub(1));
            counts[idx] += 1;
        }
        for (i, count) in counts.iter().enumerate() {
            rows.push(vec![
                name.to_owned(),
                (i as f64 * BIN).to_string(),
                ((i + 1) as f64 * BIN).to_string(),
                count.to_string(),
            ]);
        }
    }
    rows
}

pub fn inject_noise(args: &InjectNoiseArgs) -> Result<()> {
    if !(args.mu.is_finite() && args.mu >= 0.0) {
        return Err(CliError::usage(format!(
            "--mu must be non-negative (the noise model only enlarges), got {}",
            args.mu
        )));
    }
    if !(args.clip_high.is_finite() && args.clip_high > 0.0) {
        return Err(CliError::usage(format!(
            "--clip-high must be positive, got {}",
            args.clip_high
        )));
    }
    if !(args.max_fraction > 0.0 && args.max_fraction <= 1.0) {
        return Err(CliError::usage(format!(
            "--max-fraction must lie in (0, 1], got {}",
            args.max_fraction
        )));
    }

    let entries = io::read_dataset(&args.input)?;
    let annotations: Vec<Annotation> = entries.iter().map(|e| e.annotation.clone()).collect();
    let config = NoiseConfig {
        clip_high: args.clip_high,
        max_image_fraction: args.max_fraction,
        ..NoiseConfig::new(args.mu, args.seed)
    };
    let noisy = inject_noise_dataset(&annotations, &config)?;

    let out_entries: Vec<DatasetEntry> = noisy
        .iter()
        .zip(&entries)
        .map(|(annotation, entry)| DatasetEntry {
            annotation: annotation.clone(),
            case_id: entry.case_id.clone(),
        })
        .collect();
    io::write_dataset(&args.output, &out_entries)?;

    let hist_path = args.output.with_extension("hist.csv");
    io::write_table(
        &hist_path,
        &["dataset", "bin_low", "bin_high", "count"],
        &diameter_histogram(&annotations, &noisy),
    )?;

    provenance(
        "inject-noise",
        &[
            ("input", args.input.display().to_string()),
            ("output", args.output.display().to_string()),
            ("histogram", hist_path.display().to_string()),
            ("mu", config.mu.to_string()),
            ("sigma", config.sigma.to_string()),
            ("clip_low", config.clip_low.to_string()),
            ("clip_high", config.clip_high.to_string()),
            ("max_image_fraction", config.max_image_fraction.to_string()),
            ("seed", config.seed.to_string()),
            ("annotations", annotations.len().to_string()),
        ],
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct CensusArgs {
    /// Annotation dataset tagged with a noise-level label, as
    /// `LABEL=PATH`. Repeat for several levels.
    #[arg(long = "annotations", required = true)]
    pub annotations: Vec<String>,
    /// Comma-separated criteria out of {iou, centroid, exp_iou}.
    #[arg(long, default_value = "iou,centroid,exp_iou")]
    pub criteria: String,
    #[arg(long, default_value_t = 0.5)]
    pub t_upper: f64,
    #[arg(long, default_value_t = 0.3)]
    pub t_lower: f64,
    /// Distance decay of the exp_iou criterion, 1/pixels.
    #[arg(long, default_value_t = 0.1)]
    pub beta: f64,
    /// Census CSV; the bar chart goes to the same path with a .svg
    /// extension.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_criteria(args: &CensusArgs) -> Result<Vec<MatchCriterion>> {
    let usage = |e: noisydet_core::Error| CliError::usage(e.to_string());
    args.criteria
        .split(',')
        .map(|name| match name.trim() {
            "iou" => MatchCriterion::iou(args.t_upper, args.t_lower).map_err(usage),
            "centroid" => Ok(MatchCriterion::centroid()),
            "exp_iou" => MatchCriterion::exp_iou(args.t_upper, args.t_lower, args.beta).map_err(usage),
            other => Err(CliError::usage(format!(
                "unknown criterion {other:?}; valid names are iou, centroid, exp_iou"
            ))),
        })
        .collect()
}

pub fn census(args: &CensusArgs) -> Result<()> {
    let criteria = parse_criteria(args)?;

    let mut datasets: Vec<(String, Vec<Annotation>)> = Vec::new();
    for spec in &args.annotations {
        let Some((level, path)) = spec.split_once('=') else {
            return Err(CliError::usage(format!(
                "--annotations expects LABEL=PATH, got {spec:?}"
            )));
        };
        if datasets.iter().any(|(l, _)| l == level) {
            return Err(CliError::usage(format!("duplicate noise-level label {level:?}")));
        }
        let entries = io::read_dataset(Path::new(path))?;
        datasets.push((
            level.to_owned(),
            entries.into_iter().map(|e| e.annotation).collect(),
        ));
    }

    // Image dimensions pooled across all levels, first appearance wins;
    // conflicting dimensions for one id are rejected.
    let mut images: Vec<ImageInfo> = Vec::new();
    let mut seen: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for (_, annotations) in &datasets {
        for a in annotations {
            match seen.get(a.image_id()) {
                None => {
                    seen.insert(a.image_id().to_owned(), (a.image_width(), a.image_height()));
                    images.push(ImageInfo {
                        image_id: a.image_id().to_owned(),
                        width: a.image_width(),
                        height: a.image_height(),
                    });
                }
                Some(&(w, h)) => {
                    if w != a.image_width() || h != a.image_height() {
                        return Err(CliError::validation(format!(
                            "conflicting dimensions for image {}",
                            a.image_id()
                        )));
                    }
                }
            }
        }
    }

    let config = AnchorConfig::default();
    let rows = positive_census(&datasets, &images, &criteria, &config)?;

    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.criterion.clone(),
                r.level.clone(),
                r.positives_per_lesion.to_string(),
            ]
        })
        .collect();
    io::write_table(&args.out, &["criterion", "level", "positives_per_lesion"], &table)?;

    let svg_path = args.out.with_extension("svg");
    let criteria_names: Vec<String> = criteria.iter().map(|c| c.name().to_owned()).collect();
    let levels: Vec<String> = datasets.iter().map(|(l, _)| l.clone()).collect();
    std::fs::write(&svg_path, svg::census_bar_chart(&rows, &criteria_names, &levels))?;

    provenance(
        "census",
        &[
            ("criteria", criteria_names.join(",")),
            ("levels", levels.join(",")),
            ("t_upper", args.t_upper.to_string()),
            ("t_lower", args.t_lower.to_string()),
            ("beta", args.beta.to_string()),
            ("scales", "128,256,512".to_owned()),
            ("ratios", "1:1,0.7:1.4,1.4:0.7".to_owned()),
            ("stride", "16".to_owned()),
            ("out", args.out.display().to_string()),
            ("svg", svg_path.display().to_string()),
        ],
    );
    for r in &rows {
        println!("{} {} {}", r.criterion, r.level, r.positives_per_lesion);
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalFrocArgs {
    /// Detections CSV.
    #[arg(long)]
    pub detections: PathBuf,
    /// Ground-truth dataset CSV; its image list is the FP denominator.
    #[arg(long)]
    pub ground_truth: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub fp_cut: f64,
    /// Number of bootstrap resamples; enables the confidence interval.
    #[arg(long, num_args = 0..=1, default_missing_value = "1000", requires = "seed")]
    pub bootstrap: Option<usize>,
    /// Cases per bootstrap resample.
    #[arg(long, default_value_t = 200)]
    pub cases: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Curve CSV; the plot goes to the same path with a .svg extension.
    #[arg(long)]
    pub out: PathBuf,
}

fn bootstrap_cases(entries: &[DatasetEntry]) -> Result<Vec<BootstrapCase>> {
    let mut image_case: BTreeMap<&str, &str> = BTreeMap::new();
    let mut cases: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for e in entries {
        if e.case_id.is_empty() {
            return Err(CliError::validation(format!(
                "bootstrap requires a case_id for every record; image {} has none",
                e.annotation.image_id()
            )));
        }
        let image = e.annotation.image_id();
        match image_case.get(image) {
            Some(&case) if case != e.case_id => {
                return Err(CliError::validation(format!(
                    "image {image} appears under cases {case:?} and {:?}",
                    e.case_id
                )));
            }
            Some(_) => {}
            None => {
                image_case.insert(image, &e.case_id);
                cases.entry(&e.case_id).or_default().push(image.to_owned());
            }
        }
    }
    Ok(cases
        .into_iter()
        .map(|(case_id, image_ids)| BootstrapCase {
            case_id: case_id.to_owned(),
            image_ids,
        })
        .collect())
}

pub fn eval_froc(args: &EvalFrocArgs) -> Result<()> {
    if !(args.fp_cut.is_finite() && args.fp_cut > 0.0) {
        return Err(CliError::usage(format!(
            "--fp-cut must be positive, got {}",
            args.fp_cut
        )));
    }

    let detections = io::read_detections(&args.detections)?;
    let entries = io::read_dataset(&args.ground_truth)?;
    let ground_truths: Vec<Annotation> = entries.iter().map(|e| e.annotation.clone()).collect();

    let mut images: Vec<String> = Vec::new();
    for a in &ground_truths {
        if !images.iter().any(|i| i == a.image_id()) {
            images.push(a.image_id().to_owned());
        }
    }

    let curve = froc_curve(&detections, &ground_truths, &images, args.fp_cut)?;
    let area = afroc(&curve);

    let table: Vec<Vec<String>> = curve
        .points
        .iter()
        .map(|p| vec![p.fp_per_image.to_string(), p.sensitivity.to_string()])
        .collect();
    io::write_table(&args.out, &["fp_per_image", "sensitivity"], &table)?;

    let mut summary = None;
    let mut band = None;
    if let Some(n_resamples) = args.bootstrap {
        let config = BootstrapConfig {
            n_resamples,
            resample_size: args.cases,
            seed: args.seed.expect("clap enforces --seed with --bootstrap"),
            fp_cut: args.fp_cut,
        };
        let cases = bootstrap_cases(&entries)?;
        let grid: Vec<f64> = (0..=100).map(|i| args.fp_cut * i as f64 / 100.0).collect();
        let (s, b) = with_thread_cap(|| -> Result<_> {
            let s = bootstrap_afroc_parallel(&detections, &ground_truths, &cases, config)?;
            let b = sensitivity_band(&detections, &ground_truths, &cases, config, &grid)?;
            Ok((s, b))
        })??;
        summary = Some(s);
        band = Some(b);
    }

    let svg_path = args.out.with_extension("svg");
    std::fs::write(
        &svg_path,
        svg::froc_chart(&curve, band.as_deref(), area, summary.as_ref()),
    )?;

    let mut fields = vec![
        ("detections", args.detections.display().to_string()),
        ("ground_truth", args.ground_truth.display().to_string()),
        ("fp_cut", args.fp_cut.to_string()),
        ("images", images.len().to_string()),
        ("lesions", ground_truths.len().to_string()),
        ("out", args.out.display().to_string()),
        ("svg", svg_path.display().to_string()),
    ];
    if let Some(s) = &summary {
        fields.push(("bootstrap", s.n_resamples.to_string()));
        fields.push(("cases", s.resample_size.to_string()));
        fields.push(("seed", s.seed.to_string()));
    }
    provenance("eval-froc", &fields);

    match &summary {
        Some(s) => println!("AFROC={area:.3} CI=[{:.3},{:.3}]", s.ci_low, s.ci_high),
        None => println!("AFROC={area:.3}"),
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct MineArgs {
    /// Proposals CSV with predicted probabilities and true labels.
    #[arg(long)]
    pub proposals: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// ROIs to sample from the pooled categories.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Per-category cap of the mining pool.
    #[arg(long, default_value_t = 25)]
    pub cap: usize,
    /// Selected-ROI CSV.
    #[arg(long)]
    pub out: PathBuf,
}

fn category_of(pool: &MiningPool, proposal: &ScoredProposal) -> &'static str {
    if pool.easy_pos.contains(proposal) {
        "easy_pos"
    } else if pool.hard_pos.contains(proposal) {
        "hard_pos"
    } else if pool.easy_neg.contains(proposal) {
        "easy_neg"
    } else {
        "hard_neg"
    }
}

pub fn mine(args: &MineArgs) -> Result<()> {
    if args.n == 0 {
        return Err(CliError::usage("--n must be at least 1"));
    }
    if args.cap == 0 {
        return Err(CliError::usage("--cap must be at least 1"));
    }

    let proposals = io::read_proposals(&args.proposals)?;
    if proposals.is_empty() {
        return Err(CliError::validation(format!(
            "{}: no proposals to mine",
            args.proposals.display()
        )));
    }
    let pool = build_pool(&proposals, args.cap)?;
    let selected = sample_training_rois(&pool, args.n, args.seed);

    let rows: Vec<Vec<String>> = selected
        .iter()
        .map(|p| {
            vec![
                p.bbox.x1().to_string(),
                p.bbox.y1().to_string(),
                p.bbox.x2().to_string(),
                p.bbox.y2().to_string(),
                (p.true_label as u8).to_string(),
                p.predicted_prob.to_string(),
                p.mining_score().to_string(),
                category_of(&pool, p).to_owned(),
            ]
        })
        .collect();
    io::write_table(
        &args.out,
        &[
            "x1",
            "y1",
            "x2",
            "y2",
            "true_label",
            "predicted_prob",
            "mining_score",
            "category",
        ],
        &rows,
    )?;

    let fmt_mean = |m: Option<f64>| m.map_or("none".to_owned(), |v| v.to_string());
    provenance(
        "mine",
        &[
            ("proposals", args.proposals.display().to_string()),
            ("out", args.out.display().to_string()),
            ("n", args.n.to_string()),
            ("cap", args.cap.to_string()),
            ("seed", args.seed.to_string()),
        ],
    );
    println!(
        "S_P={} S_N={} easy_pos={} hard_pos={} easy_neg={} hard_neg={} selected={}",
        fmt_mean(pool.mean_pos_score),
        fmt_mean(pool.mean_neg_score),
        pool.easy_pos.len(),
        pool.hard_pos.len(),
        pool.easy_neg.len(),
        pool.hard_neg.len(),
        selected.len()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct NmsArgs {
    /// Detections CSV.
    #[arg(long)]
    pub detections: PathBuf,
    /// IoU above which a lower-scored box is suppressed.
    #[arg(long)]
    pub threshold: f64,
    /// Maximum survivors per image.
    #[arg(long, default_value_t = 300)]
    pub max: usize,
    /// Filtered detections CSV.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn nms(args: &NmsArgs) -> Result<()> {
    if !(args.threshold >= 0.0 && args.threshold <= 1.0) {
        return Err(CliError::usage(format!(
            "--threshold must lie in [0, 1], got {}",
            args.threshold
        )));
    }

    let detections = io::read_detections(&args.detections)?;

    // Suppression never crosses images: group, run per image, then merge
    // score-descending with ties in input-file order.
    let mut groups: Vec<(&str, Vec<usize>)> = Vec::new();
    for (i, d) in detections.iter().enumerate() {
        match groups.iter_mut().find(|(id, _)| *id == d.image_id()) {
            Some((_, indices)) => indices.push(i),
            None => groups.push((d.image_id(), vec![i])),
        }
    }

    let mut survivors: Vec<usize> = Vec::new();
    for (_, indices) in &groups {
        let group: Vec<Detection> = indices.iter().map(|&i| detections[i].clone()).collect();
        for local in nms_indices(&group, args.threshold, args.max)? {
            survivors.push(indices[local]);
        }
    }
    survivors.sort_by(|&a, &b| {
        detections[b]
            .score()
            .partial_cmp(&detections[a].score())
            .expect("scores are finite")
            .then(a.cmp(&b))
    });

    let kept: Vec<Detection> = survivors.iter().map(|&i| detections[i].clone()).collect();
    io::write_detections(&args.out, &kept)?;

    provenance(
        "nms",
        &[
            ("detections", args.detections.display().to_string()),
            ("out", args.out.display().to_string()),
            ("threshold", args.threshold.to_string()),
            ("max_per_image", args.max.to_string()),
            ("input_count", detections.len().to_string()),
            ("kept", kept.len().to_string()),
        ],
    );
    Ok(())
}
