//! Event-camera data path for overhead object detection experiments.
//!
//! The crate covers everything around the neural detectors: synthesizing
//! event streams from video ([`simulator`]), dense event representations
//! ([`representations`]), grayscale reconstruction ([`reconstruction`]),
//! annotation ingestion and time alignment ([`annotations`]) and the
//! COCO-style detection metrics ([`deteval`]).
//!
//! Real-valued math is generic over [`Scalar`] (`f32` or `f64`). The type
//! aliases below pin the `f64` instantiation used by the command line tool.

pub mod annotations;
pub mod deteval;
pub mod error;
pub mod events;
pub mod io_util;
pub mod pnm;
pub mod reconstruction;
pub mod representations;
pub mod scalar;
pub mod simulator;

pub use error::{Error, Result};
pub use events::{Event, EventFormat, EventStream, Polarity, Timestamp};
pub use representations::{EcmFrame, EcmMode, EcmSequence, Normalization};
pub use scalar::Scalar;

pub type BBox = deteval::BBox<f64>;
pub type Detection = annotations::Detection<f64>;
pub type GroundTruthBox = annotations::GroundTruthBox<f64>;
pub type EvalReport = deteval::EvalReport<f64>;
pub type EvalConfig = deteval::EvalConfig<f64>;
pub type MatchResult = deteval::MatchResult;
pub type SimulatorConfig = simulator::SimulatorConfig<f64>;
pub type FrameSequence = simulator::FrameSequence<f64>;
pub type VoxelGrid = representations::VoxelGrid<f64>;
pub type VoxelGridF32 = representations::VoxelGrid<f32>;
pub type ReconConfig = reconstruction::ReconConfig<f64>;
pub type GrayFrame = reconstruction::GrayFrame<f64>;
pub type ToneMap = reconstruction::ToneMap<f64>;
