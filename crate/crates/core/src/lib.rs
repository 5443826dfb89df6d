//! Anisotropy-aware evaluation engine: stratified adaptive sampling over a
//! capability taxonomy, tiered scoring, and cross-dimension diagnostics.

pub mod analytics;
pub mod datapipe;
pub mod model;
pub mod oracle;
pub mod report;
pub mod rng;
pub mod scheduler;
pub mod scoring;
pub mod synth;

pub use analytics::{AnalyticsError, AnisotropyReport, Interval, RankTrajectory, RankedModel, StabilityReport};
pub use datapipe::{ContaminationFlag, ContaminationReason, CorpusDoc, DatapipeError};
pub use model::{
    default_dimensions, default_schemes, default_schemes_for, CapabilityCell, GoldAnswer, ModelCategory, ModelDescriptor, ModelError,
    Sample, ScoreMatrix, SourceTier, Stratum, StratumAccumulator, TextMatch, ToolCall, WeightScheme,
};
pub use oracle::{Grading, Responder, ResponderError, Response, SyntheticProfile};
pub use report::{AnalysisReport, ControlReport, ControlSettings, ReportError};
pub use scheduler::{
    run_evaluation, EvaluationRun, Mode, Population, RunRecord, SchedulerConfig, SchedulerError, StopReason,
};
pub use scoring::{ScoreFlag, ScoreRecord, Scorer, Tier};
pub use synth::{CohortKind, CohortSpec, PopulationSpec};
