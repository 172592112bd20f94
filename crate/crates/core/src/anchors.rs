//! Anchor grids, anchor labeling with the per-lesion fallback rule, the
//! positive-anchor census, and greedy non-maximum suppression.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::froc::Detection;
use crate::geom::{self, BBox, MatchCriterion, MatchLabel};
use crate::noise::Annotation;
use crate::{Error, Result};

/// Faster R-CNN style anchor grid parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorConfig {
    pub scales: Vec<f64>,
    /// (height factor, width factor) pairs.
    pub aspect_ratios: Vec<(f64, f64)>,
    pub stride: f64,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        Self {
            scales: vec![128.0, 256.0, 512.0],
            aspect_ratios: vec![(1.0, 1.0), (0.7, 1.4), (1.4, 0.7)],
            stride: 16.0,
        }
    }
}

impl AnchorConfig {
    pub fn validate(&self) -> Result<()> {
        let msg = if self.scales.is_empty() {
            Some("scales must be nonempty")
        } else if self.scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            Some("scales must be positive")
        } else if self.aspect_ratios.is_empty() {
            Some("aspect ratios must be nonempty")
        } else if self
            .aspect_ratios
            .iter()
            .any(|(h, w)| !(h.is_finite() && w.is_finite() && *h > 0.0 && *w > 0.0))
        {
            Some("aspect ratio factors must be positive")
        } else if !(self.stride.is_finite() && self.stride >= 1.0) {
            Some("stride must be at least 1")
        } else {
            None
        };
        match msg {
            Some(m) => Err(Error::InvalidAnchorConfig(String::from(m))),
            None => Ok(()),
        }
    }

    /// Anchors per grid location (9 with the defaults).
    pub fn anchors_per_location(&self) -> usize {
        self.scales.len() * self.aspect_ratios.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub bbox: BBox,
    /// Extends beyond the image bounds. Such anchors are kept; labeling
    /// handles them like any other proposal.
    pub cross_boundary: bool,
}

/// Generates the anchor grid for an image.
///
/// Grid locations are the centers `(i * stride + stride/2, j * stride +
/// stride/2)` of the `floor(w/stride) x floor(h/stride)` feature-map
/// cells; an image smaller than one stride yields no anchors. Output
/// order is row-major by location, then scale-major, then ratio.
pub fn generate_anchors(
    image_width: f64,
    image_height: f64,
    config: &AnchorConfig,
) -> Result<Vec<Anchor>> {
    config.validate()?;
    let mut anchors = Vec::new();
    if !image_width.is_finite()
        || !image_height.is_finite()
        || image_width < config.stride
        || image_height < config.stride
    {
        return Ok(anchors);
    }
    let cols = (image_width / config.stride) as usize;
    let rows = (image_height / config.stride) as usize;
    anchors.reserve(rows * cols * config.anchors_per_location());
    for j in 0..rows {
        let cy = j as f64 * config.stride + config.stride / 2.0;
        for i in 0..cols {
            let cx = i as f64 * config.stride + config.stride / 2.0;
            for &scale in &config.scales {
                for &(hf, wf) in &config.aspect_ratios {
                    let bbox = BBox::centered(cx, cy, scale * wf, scale * hf)
                        .expect("anchor sides are positive");
                    let cross_boundary = bbox.x1() < 0.0
                        || bbox.y1() < 0.0
                        || bbox.x2() > image_width
                        || bbox.y2() > image_height;
                    anchors.push(Anchor { bbox, cross_boundary });
                }
            }
        }
    }
    Ok(anchors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorLabel {
    Positive,
    Negative,
    Neutral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledAnchor {
    pub bbox: BBox,
    pub label: AnchorLabel,
    /// Lesion id of the matched ground truth; present iff positive.
    pub matched_lesion: Option<String>,
    /// Criterion score against the matched lesion for positives, best
    /// score over all lesions otherwise. Fallback promotions record the
    /// ranking score that selected them.
    pub score: f64,
}

/// Labels every anchor against the ground truths, then applies the
/// fallback rule: a ground truth left without any positive anchor gets
/// its highest-ranking anchor promoted to positive (ties break toward the
/// lowest anchor index). Promotion never demotes or reassigns an anchor
/// that is already positive, so with a nonempty anchor list every ground
/// truth ends up with its best anchor positive.
pub fn label_anchors(
    anchors: &[BBox],
    ground_truths: &[Annotation],
    criterion: &MatchCriterion,
) -> Vec<LabeledAnchor> {
    let gt_boxes: Vec<BBox> = ground_truths.iter().map(|a| *a.bbox()).collect();

    let mut matched: Vec<Option<usize>> = Vec::with_capacity(anchors.len());
    let mut labeled: Vec<LabeledAnchor> = anchors
        .iter()
        .map(|anchor| {
            let label = geom::match_label(anchor, &gt_boxes, criterion);
            let (anchor_label, gt_idx) = match label {
                MatchLabel::Positive(idx) => (AnchorLabel::Positive, Some(idx)),
                MatchLabel::Negative => (AnchorLabel::Negative, None),
                MatchLabel::Neutral => (AnchorLabel::Neutral, None),
            };
            matched.push(gt_idx);
            let score = match gt_idx {
                Some(idx) => criterion.pair_score(anchor, &gt_boxes[idx]),
                None => gt_boxes
                    .iter()
                    .map(|gt| criterion.pair_score(anchor, gt))
                    .fold(0.0, f64::max),
            };
            LabeledAnchor {
                bbox: *anchor,
                label: anchor_label,
                matched_lesion: gt_idx.map(|idx| String::from(ground_truths[idx].lesion_id())),
                score,
            }
        })
        .collect();

    if anchors.is_empty() {
        return labeled;
    }

    let mut gt_has_positive = vec![false; gt_boxes.len()];
    for idx in matched.iter().flatten() {
        gt_has_positive[*idx] = true;
    }

    for (g, gt) in gt_boxes.iter().enumerate() {
        if gt_has_positive[g] {
            continue;
        }
        let mut best = f64::NEG_INFINITY;
        let mut best_anchor = 0;
        for (ai, anchor) in anchors.iter().enumerate() {
            let s = criterion.fallback_score(anchor, gt);
            if s > best {
                best = s;
                best_anchor = ai;
            }
        }
        let entry = &mut labeled[best_anchor];
        if entry.label != AnchorLabel::Positive {
            entry.label = AnchorLabel::Positive;
            entry.matched_lesion = Some(String::from(ground_truths[g].lesion_id()));
            entry.score = best;
        }
    }

    labeled
}

/// Image dimensions keyed by id, as needed to build anchor grids.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageInfo {
    pub image_id: String,
    pub width: f64,
    pub height: f64,
}

/// One cell of the census table.
#[derive(Debug, Clone, PartialEq)]
pub struct CensusRow {
    pub criterion: String,
    pub level: String,
    pub positives_per_lesion: f64,
}

/// Mean number of positive anchors per lesion for every (criterion,
/// dataset) pair. `datasets` associates a noise-level label with its
/// annotations; rows come out criterion-major, then in dataset order.
/// The denominator is the total lesion count of the dataset
/// (micro-average); fallback positives are included.
pub fn positive_census(
    datasets: &[(String, Vec<Annotation>)],
    images: &[ImageInfo],
    criteria: &[MatchCriterion],
    config: &AnchorConfig,
) -> Result<Vec<CensusRow>> {
    config.validate()?;

    let mut dims: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for image in images {
        if dims
            .insert(image.image_id.as_str(), (image.width, image.height))
            .is_some()
        {
            return Err(Error::DuplicateImage {
                image_id: image.image_id.clone(),
            });
        }
    }
    for (_, annotations) in datasets {
        for a in annotations {
            match dims.get(a.image_id()) {
                None => {
                    return Err(Error::MissingImage {
                        image_id: String::from(a.image_id()),
                    })
                }
                Some(&(w, h)) => {
                    if w != a.image_width() || h != a.image_height() {
                        return Err(Error::ImageDimensionMismatch {
                            image_id: String::from(a.image_id()),
                        });
                    }
                }
            }
        }
    }

    // Grids are shared across images of equal size.
    let mut grids: BTreeMap<(u64, u64), Vec<BBox>> = BTreeMap::new();
    for &(w, h) in dims.values() {
        grids.entry((w.to_bits(), h.to_bits())).or_insert_with(|| {
            generate_anchors(w, h, config)
                .expect("config already validated")
                .into_iter()
                .map(|a| a.bbox)
                .collect()
        });
    }

    let mut rows = Vec::new();
    for criterion in criteria {
        for (level, annotations) in datasets {
            if annotations.is_empty() {
                return Err(Error::NoLesions);
            }
            let mut per_image: BTreeMap<&str, Vec<Annotation>> = BTreeMap::new();
            for a in annotations {
                per_image.entry(a.image_id()).or_default().push(a.clone());
            }
            let mut positives = 0usize;
            for (image_id, gts) in &per_image {
                let (w, h) = dims[image_id];
                let grid = &grids[&(w.to_bits(), h.to_bits())];
                positives += label_anchors(grid, gts, criterion)
                    .iter()
                    .filter(|la| la.label == AnchorLabel::Positive)
                    .count();
            }
            rows.push(CensusRow {
                criterion: String::from(criterion.name()),
                level: level.clone(),
                positives_per_lesion: positives as f64 / annotations.len() as f64,
            });
        }
    }
    Ok(rows)
}

/// Greedy non-maximum suppression over one pool of detections.
///
/// Sorts by score descending (ties keep input order), repeatedly keeps
/// the best remaining box and drops the rest whose IoU with it exceeds
/// `overlap_threshold`, stopping after `max_output` survivors. Detections
/// from different images suppress each other here; group upstream when
/// that is not wanted.
pub fn nms(
    detections: &[Detection],
    overlap_threshold: f64,
    max_output: usize,
) -> Result<Vec<Detection>> {
    Ok(nms_indices(detections, overlap_threshold, max_output)?
        .into_iter()
        .map(|i| detections[i].clone())
        .collect())
}

/// [`nms`] returning survivor indices into the input, in score-descending
/// keep order.
pub fn nms_indices(
    detections: &[Detection],
    overlap_threshold: f64,
    max_output: usize,
) -> Result<Vec<usize>> {
    if !(overlap_threshold >= 0.0 && overlap_threshold <= 1.0) {
        return Err(Error::InvalidThreshold(overlap_threshold));
    }
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| {
        detections[b]
            .score()
            .partial_cmp(&detections[a].score())
            .expect("detection scores are finite")
            .then(a.cmp(&b))
    });

    let mut kept: Vec<usize> = Vec::new();
    for &idx in &order {
        if kept.len() == max_output {
            break;
        }
        let candidate = detections[idx].bbox();
        if kept
            .iter()
            .all(|&k| geom::iou(detections[k].bbox(), candidate) <= overlap_threshold)
        {
            kept.push(idx);
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    fn ann(id: &str, lesion: &str, bbox: BBox) -> Annotation {
        Annotation::new(id, lesion, bbox, 600.0, 600.0).unwrap()
    }

    fn det(score: f64, bbox: BBox) -> Detection {
        Detection::new("img", bbox, score).unwrap()
    }

    #[test]
    fn single_cell_image_gets_k_anchors() {
        let anchors = generate_anchors(16.0, 16.0, &AnchorConfig::default()).unwrap();
        assert_eq!(anchors.len(), 9);
        for a in &anchors {
            assert_eq!(a.bbox.center(), (8.0, 8.0));
            assert!(a.cross_boundary);
        }
    }

    #[test]
    fn grid_arithmetic_matches() {
        let anchors = generate_anchors(160.0, 160.0, &AnchorConfig::default()).unwrap();
        assert_eq!(anchors.len(), 10 * 10 * 9);
    }

    #[test]
    fn sub_stride_image_yields_nothing() {
        assert!(generate_anchors(15.0, 160.0, &AnchorConfig::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn anchor_sides_follow_scale_and_ratio() {
        let config = AnchorConfig {
            scales: vec![128.0],
            aspect_ratios: vec![(0.7, 1.4)],
            stride: 16.0,
        };
        let anchors = generate_anchors(16.0, 16.0, &config).unwrap();
        assert!((anchors[0].bbox.width() - 179.2).abs() < 1e-9);
        assert!((anchors[0].bbox.height() - 89.6).abs() < 1e-9);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_anchors(320.0, 240.0, &AnchorConfig::default()).unwrap();
        let b = generate_anchors(320.0, 240.0, &AnchorConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exact_match_is_positive_with_score_one() {
        let anchors = [bx(100.0, 100.0, 200.0, 200.0), bx(400.0, 400.0, 500.0, 500.0)];
        let gts = [ann("img", "l0", anchors[0])];
        let crit = MatchCriterion::iou(0.5, 0.3).unwrap();
        let labeled = label_anchors(&anchors, &gts, &crit);
        assert_eq!(labeled[0].label, AnchorLabel::Positive);
        assert_eq!(labeled[0].matched_lesion.as_deref(), Some("l0"));
        assert_eq!(labeled[0].score, 1.0);
        assert_eq!(labeled[1].label, AnchorLabel::Negative);
        assert_eq!(labeled[1].matched_lesion, None);
    }

    #[test]
    fn fallback_promotes_exactly_one_anchor() {
        // No anchor reaches t_upper; the best one must be promoted.
        // IoU with the lesion: anchor 0 contains it fully (900/10000),
        // anchor 1 clips it (400/10500), anchor 2 is disjoint.
        let anchors = [
            bx(0.0, 0.0, 100.0, 100.0),
            bx(50.0, 50.0, 150.0, 150.0),
            bx(300.0, 300.0, 400.0, 400.0),
        ];
        let gts = [ann("img", "l0", bx(40.0, 40.0, 70.0, 70.0))];
        let crit = MatchCriterion::iou(0.5, 0.3).unwrap();
        let labeled = label_anchors(&anchors, &gts, &crit);
        let positives: Vec<usize> = labeled
            .iter()
            .enumerate()
            .filter(|(_, la)| la.label == AnchorLabel::Positive)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(positives, vec![0]);
        assert_eq!(labeled[0].matched_lesion.as_deref(), Some("l0"));
        assert!((labeled[0].score - 0.09).abs() < 1e-12);
    }

    #[test]
    fn fallback_applies_per_ground_truth() {
        let anchors = [bx(0.0, 0.0, 100.0, 100.0), bx(200.0, 200.0, 300.0, 300.0)];
        let gts = [
            ann("img", "a", bx(10.0, 10.0, 30.0, 30.0)),
            ann("img", "b", bx(210.0, 210.0, 230.0, 230.0)),
        ];
        let crit = MatchCriterion::iou(0.5, 0.3).unwrap();
        let labeled = label_anchors(&anchors, &gts, &crit);
        assert_eq!(labeled[0].matched_lesion.as_deref(), Some("a"));
        assert_eq!(labeled[1].matched_lesion.as_deref(), Some("b"));
    }

    #[test]
    fn fallback_never_demotes_an_existing_positive() {
        // Both lesions share the same best anchor; the second keeps no
        // dedicated positive but the first match is left untouched.
        let anchors = [bx(0.0, 0.0, 100.0, 100.0)];
        let gts = [
            ann("img", "a", bx(0.0, 0.0, 100.0, 100.0)),
            ann("img", "b", bx(10.0, 10.0, 90.0, 90.0)),
        ];
        let crit = MatchCriterion::iou(0.5, 0.3).unwrap();
        let labeled = label_anchors(&anchors, &gts, &crit);
        assert_eq!(labeled[0].label, AnchorLabel::Positive);
        assert_eq!(labeled[0].matched_lesion.as_deref(), Some("a"));
    }

    #[test]
    fn census_counts_match_direct_labeling() {
        let images = vec![ImageInfo {
            image_id: String::from("img"),
            width: 600.0,
            height: 600.0,
        }];
        let gts = vec![ann("img", "l0", bx(270.0, 270.0, 330.0, 330.0))];
        let criteria = vec![
            MatchCriterion::iou(0.5, 0.3).unwrap(),
            MatchCriterion::centroid(),
            MatchCriterion::exp_iou(0.5, 0.3, 0.1).unwrap(),
        ];
        let config = AnchorConfig::default();
        let datasets = vec![(String::from("clean"), gts.clone())];
        let rows = positive_census(&datasets, &images, &criteria, &config).unwrap();
        assert_eq!(rows.len(), 3);

        let grid: Vec<BBox> = generate_anchors(600.0, 600.0, &config)
            .unwrap()
            .into_iter()
            .map(|a| a.bbox)
            .collect();
        for (row, criterion) in rows.iter().zip(&criteria) {
            let direct = label_anchors(&grid, &gts, criterion)
                .iter()
                .filter(|la| la.label == AnchorLabel::Positive)
                .count();
            assert_eq!(row.positives_per_lesion, direct as f64);
            assert!(row.positives_per_lesion >= 1.0);
        }
    }

    #[test]
    fn census_rejects_unknown_images() {
        let gts = vec![ann("ghost", "l0", bx(10.0, 10.0, 60.0, 60.0))];
        let err = positive_census(
            &[(String::from("clean"), gts)],
            &[],
            &[MatchCriterion::centroid()],
            &AnchorConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingImage { .. }));
    }

    #[test]
    fn nms_single_detection_survives() {
        let d = det(0.5, bx(0.0, 0.0, 10.0, 10.0));
        let out = nms(&[d.clone()], 0.5, 300).unwrap();
        assert_eq!(out, vec![d]);
    }

    #[test]
    fn nms_suppresses_duplicates() {
        let a = det(0.9, bx(0.0, 0.0, 10.0, 10.0));
        let b = det(0.8, bx(0.0, 0.0, 10.0, 10.0));
        let out = nms(&[b, a.clone()], 0.5, 300).unwrap();
        assert_eq!(out, vec![a]);
    }

    #[test]
    fn nms_respects_max_output() {
        let dets: Vec<Detection> = (0..10)
            .map(|i| {
                let x = i as f64 * 100.0;
                det(1.0 - i as f64 * 0.05, bx(x, 0.0, x + 10.0, 10.0))
            })
            .collect();
        let out = nms(&dets, 0.5, 3).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.windows(2).all(|w| w[0].score() >= w[1].score()));
    }

    #[test]
    fn nms_rejects_bad_threshold() {
        assert!(matches!(
            nms(&[], 1.5, 300),
            Err(Error::InvalidThreshold(_))
        ));
    }
}
