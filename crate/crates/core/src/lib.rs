//! Delay-Doppler sensing and communication benchmark core: channel and
//! scene models, transmit waveforms, estimators, classical and unified
//! metrics, and particle belief propagation for network synchronization.

pub mod conventions;
pub(crate) mod dsp;
pub mod estimators;
pub mod metrics;
pub mod scene;
pub mod seed;
pub mod syncnet;
pub mod unified;
pub mod waveform;

pub use estimators::{CostLedger, Dictionary, EstimateReport};
pub use scene::{ChannelWindow, NoiseModel, ReceivedSignal, SensingPrior, Target, TargetScene};
pub use waveform::{Band, ModulationLayout, Waveform};
