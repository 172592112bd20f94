//! Multiplicative bounding-box enlargement noise.
//!
//! Each box side is scaled by `(1 + n)` where `n` is drawn from a normal
//! distribution and clamped into `[clip_low, clip_high)`. Draw order is
//! `(n_w, n_h)` per annotation, in dataset order, from a counter-based
//! stream seeded by the config, so the whole transformation is
//! reproducible from the config alone.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::geom::BBox;
use crate::rng::CounterRng;
use crate::{Error, Result};

/// Parameters of the enlargement-noise model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Mean of the multiplicative noise factor.
    pub mu: f64,
    /// Standard deviation of the noise factor.
    pub sigma: f64,
    /// Draws below this collapse onto it.
    pub clip_low: f64,
    /// Draws at or above this map to the largest value strictly below it.
    pub clip_high: f64,
    /// Noisy sides are capped at this fraction of the image dimension.
    pub max_image_fraction: f64,
    pub seed: u64,
}

impl NoiseConfig {
    /// Defaults: unit sigma, clip range [0, 6), 80% image-fraction cap.
    pub fn new(mu: f64, seed: u64) -> Self {
        Self {
            mu,
            sigma: 1.0,
            clip_low: 0.0,
            clip_high: 6.0,
            max_image_fraction: 0.8,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let msg = if !self.mu.is_finite() {
            Some("mu must be finite")
        } else if !(self.sigma.is_finite() && self.sigma > 0.0) {
            Some("sigma must be positive")
        } else if !(self.clip_low.is_finite() && self.clip_low >= 0.0) {
            Some("clip_low must be finite and non-negative (the model only enlarges)")
        } else if !(self.clip_high.is_finite() && self.clip_high > self.clip_low) {
            Some("clip_high must be finite and greater than clip_low")
        } else if !(self.max_image_fraction > 0.0 && self.max_image_fraction <= 1.0) {
            Some("max_image_fraction must lie in (0, 1]")
        } else {
            None
        };
        match msg {
            Some(m) => Err(Error::InvalidNoiseConfig(String::from(m))),
            None => Ok(()),
        }
    }
}

/// A ground-truth lesion box bound to an image and its dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    image_id: String,
    lesion_id: String,
    bbox: BBox,
    image_width: f64,
    image_height: f64,
}

impl Annotation {
    pub fn new(
        image_id: impl Into<String>,
        lesion_id: impl Into<String>,
        bbox: BBox,
        image_width: f64,
        image_height: f64,
    ) -> Result<Self> {
        let image_id = image_id.into();
        let lesion_id = lesion_id.into();
        let dims_ok = image_width.is_finite()
            && image_height.is_finite()
            && image_width > 0.0
            && image_height > 0.0;
        let inside = bbox.x1() >= 0.0
            && bbox.y1() >= 0.0
            && bbox.x2() <= image_width
            && bbox.y2() <= image_height;
        if !dims_ok || !inside {
            return Err(Error::AnnotationOutOfBounds { image_id, lesion_id });
        }
        Ok(Self {
            image_id,
            lesion_id,
            bbox,
            image_width,
            image_height,
        })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn lesion_id(&self) -> &str {
        &self.lesion_id
    }

    pub fn bbox(&self) -> &BBox {
        &self.bbox
    }

    pub fn image_width(&self) -> f64 {
        self.image_width
    }

    pub fn image_height(&self) -> f64 {
        self.image_height
    }
}

/// One clamped-normal noise factor. Consumes exactly one draw from `rng`.
pub fn sample_noise_factor(config: &NoiseConfig, rng: &mut CounterRng) -> f64 {
    let z = rng.next_normal(config.mu, config.sigma);
    let top = config.clip_high.next_down();
    if z < config.clip_low {
        config.clip_low
    } else if z > top {
        top
    } else {
        z
    }
}

/// Applies given noise factors to an annotation: sides become
/// `(1 + n) * side`, capped at `max_image_fraction` of the corresponding
/// image dimension; the center is preserved unless the enlarged box must
/// be translated to fit inside the image.
pub fn apply_noise_factors(
    annotation: &Annotation,
    n_w: f64,
    n_h: f64,
    config: &NoiseConfig,
) -> Annotation {
    let bbox = annotation.bbox();
    let width = ((1.0 + n_w) * bbox.width())
        .min(config.max_image_fraction * annotation.image_width);
    let height = ((1.0 + n_h) * bbox.height())
        .min(config.max_image_fraction * annotation.image_height);

    // Growing symmetrically from the original corners keeps containment
    // and enlargement exact in floating point; the center moves by at
    // most an ulp.
    let half_dw = (width - bbox.width()) / 2.0;
    let half_dh = (height - bbox.height()) / 2.0;
    let grown = BBox::new(
        bbox.x1() - half_dw,
        bbox.y1() - half_dh,
        bbox.x2() + half_dw,
        bbox.y2() + half_dh,
    )
    .expect("noisy box keeps positive size");
    let dx = if grown.x1() < 0.0 {
        -grown.x1()
    } else if grown.x2() > annotation.image_width {
        annotation.image_width - grown.x2()
    } else {
        0.0
    };
    let dy = if grown.y1() < 0.0 {
        -grown.y1()
    } else if grown.y2() > annotation.image_height {
        annotation.image_height - grown.y2()
    } else {
        0.0
    };
    let shifted = grown.translated(dx, dy).expect("translation keeps the box valid");

    Annotation {
        image_id: annotation.image_id.clone(),
        lesion_id: annotation.lesion_id.clone(),
        bbox: shifted,
        image_width: annotation.image_width,
        image_height: annotation.image_height,
    }
}

/// Draws `(n_w, n_h)` from `rng` and applies them.
pub fn inject_noise(
    annotation: &Annotation,
    config: &NoiseConfig,
    rng: &mut CounterRng,
) -> Annotation {
    let n_w = sample_noise_factor(config, rng);
    let n_h = sample_noise_factor(config, rng);
    apply_noise_factors(annotation, n_w, n_h, config)
}

/// Applies [`inject_noise`] to every annotation in input order, consuming
/// one RNG stream seeded from `config.seed`. Output order equals input
/// order; rejects duplicate `(image_id, lesion_id)` pairs.
pub fn inject_noise_dataset(
    annotations: &[Annotation],
    config: &NoiseConfig,
) -> Result<Vec<Annotation>> {
    config.validate()?;
    let mut seen = BTreeSet::new();
    for a in annotations {
        if !seen.insert((a.image_id(), a.lesion_id())) {
            return Err(Error::DuplicateAnnotation {
                image_id: a.image_id.clone(),
                lesion_id: a.lesion_id.clone(),
            });
        }
    }
    let mut rng = CounterRng::new(config.seed);
    Ok(annotations
        .iter()
        .map(|a| inject_noise(a, config, &mut rng))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ann(x1: f64, y1: f64, x2: f64, y2: f64, w: f64, h: f64) -> Annotation {
        Annotation::new("img", "l0", BBox::new(x1, y1, x2, y2).unwrap(), w, h).unwrap()
    }

    /// Degenerate clamp range [0, 5e-324) forcing every factor to 0.
    fn identity_config(seed: u64) -> NoiseConfig {
        NoiseConfig {
            clip_high: f64::from_bits(1),
            ..NoiseConfig::new(3.0, seed)
        }
    }

    #[test]
    fn annotation_must_lie_within_image() {
        let b = BBox::new(0.0, 0.0, 20.0, 20.0).unwrap();
        assert!(Annotation::new("i", "l", b, 10.0, 30.0).is_err());
        assert!(Annotation::new("i", "l", b, 20.0, 20.0).is_ok());
    }

    #[test]
    fn degenerate_clamp_is_identity() {
        let a = ann(40.0, 40.0, 60.0, 60.0, 1000.0, 1000.0);
        let config = identity_config(9);
        let mut rng = CounterRng::new(config.seed);
        let noisy = inject_noise(&a, &config, &mut rng);
        assert_eq!(noisy.bbox(), a.bbox());
    }

    #[test]
    fn worked_example_doubles_width_quadruples_height() {
        // w = h = 20 centered at (50, 50); n_w = 1, n_h = 3.
        let a = ann(40.0, 40.0, 60.0, 60.0, 1000.0, 1000.0);
        let noisy = apply_noise_factors(&a, 1.0, 3.0, &NoiseConfig::new(0.0, 0));
        let b = noisy.bbox();
        assert_eq!((b.x1(), b.y1(), b.x2(), b.y2()), (30.0, 10.0, 70.0, 90.0));
        assert_eq!(b.center(), a.bbox().center());
    }

    #[test]
    fn width_capped_at_image_fraction() {
        let a = ann(100.0, 100.0, 400.0, 400.0, 1000.0, 1000.0);
        let noisy = apply_noise_factors(&a, 5.0, 0.0, &NoiseConfig::new(0.0, 0));
        assert!((noisy.bbox().width() - 800.0).abs() < 1e-9);
        assert!(noisy.bbox().x1() >= 0.0 && noisy.bbox().x2() <= 1000.0);
    }

    #[test]
    fn cropped_box_is_translated_inside() {
        // Lesion near the left edge; enlargement pushes past x = 0.
        let a = ann(5.0, 450.0, 45.0, 490.0, 1000.0, 1000.0);
        let noisy = apply_noise_factors(&a, 2.0, 0.0, &NoiseConfig::new(0.0, 0));
        let b = noisy.bbox();
        assert_eq!(b.x1(), 0.0);
        assert!((b.width() - 120.0).abs() < 1e-9);
        // Height untouched, so the vertical center is preserved.
        assert_eq!(b.center().1, a.bbox().center().1);
    }

    #[test]
    fn dataset_is_deterministic_and_order_preserving() {
        let anns: Vec<Annotation> = (0..20)
            .map(|i| {
                let x = 10.0 + i as f64 * 5.0;
                Annotation::new(
                    alloc::format!("img{i}"),
                    "l0",
                    BBox::new(x, 10.0, x + 30.0, 60.0).unwrap(),
                    600.0,
                    600.0,
                )
                .unwrap()
            })
            .collect();
        let config = NoiseConfig::new(2.0, 77);
        let a = inject_noise_dataset(&anns, &config).unwrap();
        let b = inject_noise_dataset(&anns, &config).unwrap();
        assert_eq!(a, b);
        for (orig, noisy) in anns.iter().zip(&a) {
            assert_eq!(orig.image_id(), noisy.image_id());
            assert_eq!(orig.lesion_id(), noisy.lesion_id());
        }
    }

    #[test]
    fn dataset_rejects_duplicates() {
        let b = BBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let a = Annotation::new("img", "l0", b, 100.0, 100.0).unwrap();
        let err = inject_noise_dataset(&[a.clone(), a], &NoiseConfig::new(0.0, 0)).unwrap_err();
        assert!(matches!(err, Error::DuplicateAnnotation { .. }));
    }

    #[test]
    fn empty_dataset_stays_empty() {
        assert!(inject_noise_dataset(&[], &NoiseConfig::new(1.0, 0))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn mu_zero_point_mass_and_mean() {
        let config = NoiseConfig::new(0.0, 123);
        let mut rng = CounterRng::new(config.seed);
        let n = 100_000;
        let mut zeros = 0usize;
        let mut sum = 0.0;
        for _ in 0..n {
            let v = sample_noise_factor(&config, &mut rng);
            if v == 0.0 {
                zeros += 1;
            }
            sum += v;
        }
        // Half the normal mass clamps onto 0; the rest averages to
        // E[max(0, Z)] = 1/sqrt(2*pi).
        assert!((zeros as f64 / n as f64 - 0.5).abs() < 0.01);
        assert!((sum / n as f64 - 0.3989422804014327).abs() < 0.01);
    }

    #[test]
    fn higher_mu_shifts_diameters_right() {
        // 613 synthetic lesions; mean noisy diameter must grow with mu.
        let anns: Vec<Annotation> = (0..613)
            .map(|i| {
                let mut rng = CounterRng::substream(5, i as u64);
                let d = 30.0 + 120.0 * rng.next_f64();
                let cx = d / 2.0 + (600.0 - d) * rng.next_f64().min(0.999);
                let cx = cx.min(600.0 - d / 2.0);
                Annotation::new(
                    alloc::format!("img{i}"),
                    "l0",
                    BBox::centered(cx, 300.0, d, d).unwrap(),
                    600.0,
                    600.0,
                )
                .unwrap()
            })
            .collect();
        let diameter = |xs: &[Annotation]| {
            xs.iter()
                .map(|a| a.bbox().width().max(a.bbox().height()))
                .sum::<f64>()
                / xs.len() as f64
        };
        let noisy0 = inject_noise_dataset(&anns, &NoiseConfig::new(0.0, 42)).unwrap();
        let noisy3 = inject_noise_dataset(&anns, &NoiseConfig::new(3.0, 42)).unwrap();
        assert!(diameter(&noisy0) > diameter(&anns));
        assert!(diameter(&noisy3) > diameter(&noisy0));
    }
}
