use alloc::string::String;
use core::fmt;

/// Validation and evaluation errors.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Coordinates do not describe a rectangle with positive area.
    InvalidBox { x1: f64, y1: f64, x2: f64, y2: f64 },
    /// Matching-criterion thresholds or parameters out of range.
    InvalidCriterion(String),
    InvalidNoiseConfig(String),
    InvalidAnchorConfig(String),
    InvalidLossConfig(String),
    /// Annotation box does not lie within its image bounds.
    AnnotationOutOfBounds { image_id: String, lesion_id: String },
    /// Two annotations share the same (image_id, lesion_id) pair.
    DuplicateAnnotation { image_id: String, lesion_id: String },
    /// An annotation references an image with no known dimensions.
    MissingImage { image_id: String },
    /// A detection references an image outside the evaluation image list.
    UnknownImage { image_id: String },
    /// The same image id appears twice in an evaluation image list.
    DuplicateImage { image_id: String },
    /// An image is claimed by more than one case.
    ImageInMultipleCases { image_id: String },
    /// Two sources disagree on an image's dimensions.
    ImageDimensionMismatch { image_id: String },
    /// Probability outside [0, 1].
    InvalidProbability(f64),
    /// Score is NaN or infinite.
    InvalidScore(f64),
    /// Overlap threshold outside [0, 1].
    InvalidThreshold(f64),
    /// FP/image cut must be positive and finite.
    InvalidFpCut(f64),
    /// A numeric input is NaN or infinite.
    NonFinite { what: &'static str },
    /// Ground truth contains no lesions; sensitivity is undefined.
    NoLesions,
    /// Bootstrap requested over an empty case list.
    EmptyCases,
    InvalidBootstrapConfig(String),
    EmptyInput(&'static str),
    /// Gradient requested at a smooth-L1 kink (|residual| == 1).
    GradientAtKink { sample: usize, component: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidBox { x1, y1, x2, y2 } => write!(
                f,
                "invalid box ({x1}, {y1}, {x2}, {y2}): corners must be finite with x2 > x1 and y2 > y1"
            ),
            Error::InvalidCriterion(msg) => write!(f, "invalid matching criterion: {msg}"),
            Error::InvalidNoiseConfig(msg) => write!(f, "invalid noise config: {msg}"),
            Error::InvalidAnchorConfig(msg) => write!(f, "invalid anchor config: {msg}"),
            Error::InvalidLossConfig(msg) => write!(f, "invalid loss config: {msg}"),
            Error::AnnotationOutOfBounds { image_id, lesion_id } => write!(
                f,
                "annotation {lesion_id} on image {image_id} lies outside the image bounds"
            ),
            Error::DuplicateAnnotation { image_id, lesion_id } => write!(
                f,
                "duplicate annotation ({image_id}, {lesion_id})"
            ),
            Error::MissingImage { image_id } => {
                write!(f, "no image dimensions known for image {image_id}")
            }
            Error::UnknownImage { image_id } => {
                write!(f, "unknown image reference: {image_id}")
            }
            Error::DuplicateImage { image_id } => {
                write!(f, "image {image_id} listed more than once")
            }
            Error::ImageInMultipleCases { image_id } => {
                write!(f, "image {image_id} belongs to more than one case")
            }
            Error::ImageDimensionMismatch { image_id } => {
                write!(f, "conflicting dimensions recorded for image {image_id}")
            }
            Error::InvalidProbability(p) => write!(f, "probability {p} outside [0, 1]"),
            Error::InvalidScore(s) => write!(f, "score {s} is not finite"),
            Error::InvalidThreshold(t) => write!(f, "overlap threshold {t} outside [0, 1]"),
            Error::InvalidFpCut(c) => write!(f, "FP/image cut {c} must be positive and finite"),
            Error::NonFinite { what } => write!(f, "{what} is not finite"),
            Error::NoLesions => write!(f, "ground truth contains no lesions"),
            Error::EmptyCases => write!(f, "bootstrap case list is empty"),
            Error::InvalidBootstrapConfig(msg) => write!(f, "invalid bootstrap config: {msg}"),
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::GradientAtKink { sample, component } => write!(
                f,
                "gradient evaluated at a smooth-L1 kink (sample {sample}, offset component {component})"
            ),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
