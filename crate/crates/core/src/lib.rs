//! Geometry and evaluation core for 3DMM-driven face reenactment.
//!
//! The crate covers the non-neural half of the pipeline: recovering camera
//! pose and morphable-model coefficients from dense per-frame vertices,
//! rendering normalized mean face coordinate (NMFC) images and eye sketches
//! as conditioning inputs, routing parameters between source and target
//! sequences, and the evaluation metrics used to compare real and generated
//! video.

pub mod camera;
pub mod error;
pub mod eyes;
pub mod frame;
pub mod io;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod raster;
pub mod recon;
pub mod synth;

pub use camera::{compose_rotation, decompose_rotation, estimate_pose, project, CameraPose, EulerAngles, PoseFit};
pub use error::{Error, Result};
pub use eyes::{detect_pupil, detect_pupils, render_eye_sketch, EyeLandmarks, EyeSketch, EyeTrack, PupilPair};
pub use frame::{GrayFrame, PixelMask, RgbFrame};
pub use metrics::{aed, aeld, apd, ard, dai, fid_from_features, mapd, mmd2_from_features, FeatureSet, MetricReport};
pub use model::{FaceShape, MorphableModel, NormalizedMeanFace, ShapeCoefficients};
pub use pipeline::{
    average_bounding_box, crop_roi, generate_conditional_inputs, nn_baseline_render, route_parameters, BoundingBox,
    ConditionalInput, ConditionalRenderer, NnBaseline, ReenactmentMode, RoutedFrame,
};
pub use raster::{nmfc_facial_mask, rasterize_visibility, render_nmfc, NmfcPalette, VisibilityMask};
pub use recon::{average_identity, recover_frame, FrameObservation, FrameRecovery};
