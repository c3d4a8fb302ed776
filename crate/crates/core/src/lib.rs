//! Event-study analytics linking organizations' frame-labeled posts to
//! election outcomes.

pub mod analysis;
pub mod cli;
pub mod eventstudy;
pub mod frames;
pub mod ingest;
pub mod pipeline;
pub mod stats;
pub mod synth;
pub mod timeseries;
