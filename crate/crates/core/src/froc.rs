//! FROC curve construction, AFROC summary, and case-level bootstrap
//! confidence intervals.
//!
//! Detections are matched to lesions with the centroid-inside rule: a
//! detection whose box center falls inside a ground-truth box marks that
//! lesion. The first (highest-scored) mark on a lesion is its true
//! positive; later marks on the same lesion are ignored, neither true nor
//! false positives. Detections containing no lesion center are false
//! positives.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::geom::{centroid_distance, centroid_inside, BBox};
use crate::noise::Annotation;
use crate::rng::CounterRng;
use crate::{Error, Result};

/// A proposed box with a confidence score, bound to an image.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    image_id: String,
    bbox: BBox,
    score: f64,
}

impl Detection {
    pub fn new(image_id: impl Into<String>, bbox: BBox, score: f64) -> Result<Self> {
        if !score.is_finite() {
            return Err(Error::InvalidScore(score));
        }
        Ok(Self {
            image_id: image_id.into(),
            bbox,
            score,
        })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn bbox(&self) -> &BBox {
        &self.bbox
    }

    pub fn score(&self) -> f64 {
        self.score
    }
}

/// Evaluation outcome of one detection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DetectionClass {
    TruePositive { lesion_id: String },
    FalsePositive,
    /// Extra mark on a lesion already detected at this or a higher score.
    Ignored,
}

struct ClassifyOutcome {
    classes: Vec<DetectionClass>,
    /// Per ground truth: the score at which the lesion was first detected.
    lesion_scores: Vec<Option<f64>>,
}

/// Shared classifier. `allowed_images` is the image universe; detections
/// and ground truths outside it are rejected.
fn classify_core(
    detections: &[Detection],
    ground_truths: &[Annotation],
    allowed_images: &BTreeSet<&str>,
) -> Result<ClassifyOutcome> {
    let mut seen = BTreeSet::new();
    let mut gts_by_image: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (gi, gt) in ground_truths.iter().enumerate() {
        if !seen.insert((gt.image_id(), gt.lesion_id())) {
            return Err(Error::DuplicateAnnotation {
                image_id: String::from(gt.image_id()),
                lesion_id: String::from(gt.lesion_id()),
            });
        }
        if !allowed_images.contains(gt.image_id()) {
            return Err(Error::UnknownImage {
                image_id: String::from(gt.image_id()),
            });
        }
        gts_by_image.entry(gt.image_id()).or_default().push(gi);
    }

    let mut dets_by_image: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (di, det) in detections.iter().enumerate() {
        if !allowed_images.contains(det.image_id()) {
            return Err(Error::UnknownImage {
                image_id: String::from(det.image_id()),
            });
        }
        dets_by_image.entry(det.image_id()).or_default().push(di);
    }

    let no_gts: Vec<usize> = Vec::new();
    let mut classes = alloc::vec![DetectionClass::FalsePositive; detections.len()];
    let mut lesion_scores = alloc::vec![None; ground_truths.len()];
    for (image_id, det_indices) in &dets_by_image {
        let gt_indices = gts_by_image.get(image_id).unwrap_or(&no_gts);

        // Descending score, ties by input order.
        let mut order = det_indices.clone();
        order.sort_by(|&a, &b| {
            detections[b]
                .score()
                .partial_cmp(&detections[a].score())
                .expect("detection scores are finite")
                .then(a.cmp(&b))
        });

        for di in order {
            let det = &detections[di];
            // Containing lesion with the nearest center; ties toward the
            // lowest lesion index.
            let mut best: Option<(f64, usize)> = None;
            for &gi in gt_indices {
                let gt_box = ground_truths[gi].bbox();
                if centroid_inside(det.bbox(), gt_box) {
                    let d = centroid_distance(det.bbox(), gt_box);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, gi));
                    }
                }
            }
            classes[di] = match best {
                None => DetectionClass::FalsePositive,
                Some((_, gi)) => {
                    if lesion_scores[gi].is_none() {
                        lesion_scores[gi] = Some(det.score());
                        DetectionClass::TruePositive {
                            lesion_id: String::from(ground_truths[gi].lesion_id()),
                        }
                    } else {
                        DetectionClass::Ignored
                    }
                }
            };
        }
    }

    Ok(ClassifyOutcome {
        classes,
        lesion_scores,
    })
}

/// Classifies each detection as TP / FP / Ignored against the ground
/// truth, processing detections in descending score order. The image
/// universe here is the set of images carrying annotations; see
/// [`froc_curve`] for an explicit image list.
pub fn classify_detections(
    detections: &[Detection],
    ground_truths: &[Annotation],
) -> Result<Vec<DetectionClass>> {
    let allowed: BTreeSet<&str> = ground_truths.iter().map(|g| g.image_id()).collect();
    Ok(classify_core(detections, ground_truths, &allowed)?.classes)
}

/// One FROC operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub fp_per_image: f64,
    pub sensitivity: f64,
}

/// FROC operating points sorted by FP/image, cut at `fp_cut`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrocCurve {
    pub points: Vec<OperatingPoint>,
    pub fp_cut: f64,
}

impl FrocCurve {
    /// Step-function sensitivity at the given FP/image rate: the
    /// sensitivity of the last operating point at or below it, 0 before
    /// the first point.
    pub fn sensitivity_at(&self, fp_per_image: f64) -> f64 {
        let idx = self
            .points
            .partition_point(|p| p.fp_per_image <= fp_per_image);
        if idx == 0 {
            0.0
        } else {
            self.points[idx - 1].sensitivity
        }
    }
}

/// Builds the curve from per-lesion detection scores and FP scores.
fn curve_from_scores(
    mut tp_scores: Vec<f64>,
    mut fp_scores: Vec<f64>,
    n_images: usize,
    n_lesions: usize,
    fp_cut: f64,
) -> FrocCurve {
    debug_assert!(n_images > 0 && n_lesions > 0);
    tp_scores.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite"));
    fp_scores.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite"));

    let mut points: Vec<OperatingPoint> = Vec::new();
    let (mut ti, mut fi) = (0usize, 0usize);
    while ti < tp_scores.len() || fi < fp_scores.len() {
        // Next distinct threshold, descending.
        let threshold = match (tp_scores.get(ti), fp_scores.get(fi)) {
            (Some(&t), Some(&f)) => t.max(f),
            (Some(&t), None) => t,
            (None, Some(&f)) => f,
            (None, None) => unreachable!(),
        };
        while ti < tp_scores.len() && tp_scores[ti] == threshold {
            ti += 1;
        }
        while fi < fp_scores.len() && fp_scores[fi] == threshold {
            fi += 1;
        }
        let point = OperatingPoint {
            fp_per_image: fi as f64 / n_images as f64,
            sensitivity: ti as f64 / n_lesions as f64,
        };
        if points.last() != Some(&point) {
            points.push(point);
        }
    }

    // Cut at fp_cut: drop beyond it and close the curve exactly at the cut
    // with the step convention.
    let kept = points.partition_point(|p| p.fp_per_image <= fp_cut);
    if kept < points.len() {
        points.truncate(kept);
        let sensitivity = points.last().map_or(0.0, |p| p.sensitivity);
        if points.last().map(|p| p.fp_per_image) != Some(fp_cut) {
            points.push(OperatingPoint {
                fp_per_image: fp_cut,
                sensitivity,
            });
        }
    }

    FrocCurve { points, fp_cut }
}

/// Sweeps the score threshold over all distinct detection scores and
/// records (FP count / |images|, detected lesions / total lesions) at
/// each, deduplicated and cut at `fp_cut`. `images` is the full
/// evaluation image list (it is the FP denominator, so images without
/// detections count); every detection and annotation must reference one
/// of its entries.
pub fn froc_curve(
    detections: &[Detection],
    ground_truths: &[Annotation],
    images: &[String],
    fp_cut: f64,
) -> Result<FrocCurve> {
    if !(fp_cut.is_finite() && fp_cut > 0.0) {
        return Err(Error::InvalidFpCut(fp_cut));
    }
    if images.is_empty() {
        return Err(Error::EmptyInput("evaluation image list"));
    }
    if ground_truths.is_empty() {
        return Err(Error::NoLesions);
    }
    let mut allowed: BTreeSet<&str> = BTreeSet::new();
    for id in images {
        if !allowed.insert(id.as_str()) {
            return Err(Error::DuplicateImage {
                image_id: id.clone(),
            });
        }
    }

    let outcome = classify_core(detections, ground_truths, &allowed)?;
    let tp_scores: Vec<f64> = outcome.lesion_scores.iter().flatten().copied().collect();
    let fp_scores: Vec<f64> = detections
        .iter()
        .zip(&outcome.classes)
        .filter(|(_, c)| **c == DetectionClass::FalsePositive)
        .map(|(d, _)| d.score())
        .collect();

    Ok(curve_from_scores(
        tp_scores,
        fp_scores,
        images.len(),
        ground_truths.len(),
        fp_cut,
    ))
}

/// Area under the step-interpolated curve from 0 to `fp_cut`, extending
/// the final sensitivity horizontally to the cut.
pub fn afroc(curve: &FrocCurve) -> f64 {
    let mut area = 0.0;
    for pair in curve.points.windows(2) {
        area += pair[0].sensitivity * (pair[1].fp_per_image - pair[0].fp_per_image);
    }
    if let Some(last) = curve.points.last() {
        area += last.sensitivity * (curve.fp_cut - last.fp_per_image);
    }
    area
}

/// Bootstrap resampling parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub n_resamples: usize,
    pub resample_size: usize,
    pub seed: u64,
    pub fp_cut: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            n_resamples: 1000,
            resample_size: 200,
            seed: 0,
            fp_cut: 2.0,
        }
    }
}

/// A case (patient-level grouping); the bootstrap resampling unit. Each
/// drawn case contributes all its images, lesions, and detections.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapCase {
    pub case_id: String,
    pub image_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSummary {
    pub mean_afroc: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_resamples: usize,
    pub resample_size: usize,
    pub seed: u64,
}

struct ImageSummary {
    n_lesions: usize,
    tp_scores: Vec<f64>,
    fp_scores: Vec<f64>,
}

/// Validated, pre-classified bootstrap input. Resample `i` is a pure
/// function of `(seed, i)`, so resamples may be computed in any order (or
/// in parallel) with results identical to the sequential loop.
pub struct BootstrapPlan {
    config: BootstrapConfig,
    case_images: Vec<Vec<usize>>,
    summaries: Vec<ImageSummary>,
}

impl BootstrapPlan {
    pub fn new(
        detections: &[Detection],
        ground_truths: &[Annotation],
        cases: &[BootstrapCase],
        config: BootstrapConfig,
    ) -> Result<Self> {
        if cases.is_empty() {
            return Err(Error::EmptyCases);
        }
        if config.n_resamples == 0 || config.resample_size == 0 {
            return Err(Error::InvalidBootstrapConfig(String::from(
                "n_resamples and resample_size must be at least 1",
            )));
        }
        if !(config.fp_cut.is_finite() && config.fp_cut > 0.0) {
            return Err(Error::InvalidFpCut(config.fp_cut));
        }

        // Every image belongs to exactly one case.
        let mut image_index: BTreeMap<&str, usize> = BTreeMap::new();
        let mut image_case: BTreeMap<&str, usize> = BTreeMap::new();
        let mut case_images: Vec<Vec<usize>> = Vec::with_capacity(cases.len());
        for (ci, case) in cases.iter().enumerate() {
            let mut indices = Vec::with_capacity(case.image_ids.len());
            for id in &case.image_ids {
                match image_case.get(id.as_str()) {
                    Some(&other) if other == ci => {
                        return Err(Error::DuplicateImage { image_id: id.clone() })
                    }
                    Some(_) => {
                        return Err(Error::ImageInMultipleCases { image_id: id.clone() })
                    }
                    None => {}
                }
                image_case.insert(id.as_str(), ci);
                let next = image_index.len();
                image_index.insert(id.as_str(), next);
                indices.push(next);
            }
            case_images.push(indices);
        }

        let allowed: BTreeSet<&str> = image_index.keys().copied().collect();
        let outcome = classify_core(detections, ground_truths, &allowed)?;

        let mut summaries: Vec<ImageSummary> = (0..image_index.len())
            .map(|_| ImageSummary {
                n_lesions: 0,
                tp_scores: Vec::new(),
                fp_scores: Vec::new(),
            })
            .collect();
        for (gi, gt) in ground_truths.iter().enumerate() {
            let img = image_index[gt.image_id()];
            summaries[img].n_lesions += 1;
            if let Some(score) = outcome.lesion_scores[gi] {
                summaries[img].tp_scores.push(score);
            }
        }
        for (det, class) in detections.iter().zip(&outcome.classes) {
            if *class == DetectionClass::FalsePositive {
                summaries[image_index[det.image_id()]]
                    .fp_scores
                    .push(det.score());
            }
        }

        // A case without lesions could produce resamples with undefined
        // sensitivity; reject upfront.
        for (ci, images) in case_images.iter().enumerate() {
            let lesions: usize = images.iter().map(|&i| summaries[i].n_lesions).sum();
            if lesions == 0 {
                let _ = ci;
                return Err(Error::NoLesions);
            }
        }

        Ok(Self {
            config,
            case_images,
            summaries,
        })
    }

    pub fn n_resamples(&self) -> usize {
        self.config.n_resamples
    }

    fn resample(&self, index: usize) -> FrocCurve {
        let mut rng = CounterRng::substream(self.config.seed, index as u64);
        let mut tp_scores = Vec::new();
        let mut fp_scores = Vec::new();
        let mut n_images = 0usize;
        let mut n_lesions = 0usize;
        for _ in 0..self.config.resample_size {
            let case = rng.next_index(self.case_images.len());
            for &img in &self.case_images[case] {
                let s = &self.summaries[img];
                n_images += 1;
                n_lesions += s.n_lesions;
                tp_scores.extend_from_slice(&s.tp_scores);
                fp_scores.extend_from_slice(&s.fp_scores);
            }
        }
        curve_from_scores(tp_scores, fp_scores, n_images, n_lesions, self.config.fp_cut)
    }

    /// AFROC of resample `index`.
    pub fn resample_afroc(&self, index: usize) -> f64 {
        afroc(&self.resample(index))
    }

    /// Full curve of resample `index` (for confidence bands).
    pub fn resample_curve(&self, index: usize) -> FrocCurve {
        self.resample(index)
    }

    /// Mean and 2.5/97.5 percentile interval of the resample AFROCs.
    /// `afrocs` must hold `n_resamples` values in resample order.
    pub fn summarize(&self, afrocs: &[f64]) -> BootstrapSummary {
        debug_assert_eq!(afrocs.len(), self.config.n_resamples);
        let mean_afroc = afrocs.iter().sum::<f64>() / afrocs.len() as f64;
        let mut sorted = afrocs.to_vec();
        sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite"));
        BootstrapSummary {
            mean_afroc,
            ci_low: percentile(&sorted, 2.5),
            ci_high: percentile(&sorted, 97.5),
            n_resamples: self.config.n_resamples,
            resample_size: self.config.resample_size,
            seed: self.config.seed,
        }
    }
}

/// Linear-interpolated percentile of pre-sorted values.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty() && (0.0..=100.0).contains(&q));
    if sorted.len() == 1 {
        return sorted[0];
    }
    let rank = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Case-level bootstrap of the AFROC: draws `n_resamples` datasets of
/// `resample_size` cases with replacement, computes the AFROC of each,
/// and reports the mean with the 2.5/97.5 percentile interval.
/// Deterministic given the seed.
pub fn bootstrap_afroc(
    detections: &[Detection],
    ground_truths: &[Annotation],
    cases: &[BootstrapCase],
    config: BootstrapConfig,
) -> Result<BootstrapSummary> {
    let plan = BootstrapPlan::new(detections, ground_truths, cases, config)?;
    let afrocs: Vec<f64> = (0..plan.n_resamples())
        .map(|i| plan.resample_afroc(i))
        .collect();
    Ok(plan.summarize(&afrocs))
}
