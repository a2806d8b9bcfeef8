//! Datasets, evaluation protocols and reports.
//!
//! Interactive runs report, per target IoU, the mean number of interactions
//! needed (NoC for clicks, NoS for scribbles; unreached targets count as the
//! cap) and the number of samples that never reached it (NoF), along with the
//! final mean IoU and the mean IoU after k interactions. Box and coarse-mask
//! runs report single-shot mean IoU.

mod dataset;
mod protocol;
mod report;
pub mod synthetic;

pub use dataset::{
    build_subset, file_stem, load_dataset, read_index, write_dataset, write_index, Dataset, IndexRecord,
    Sample, SkippedSample, SubsetSelection, INDEX_FILE,
};
pub use protocol::{
    coarse_levels, eval_boxes, eval_coarse, eval_interactive, provider_fn, BackendProvider,
    BoxConfig, CoarseConfig, FnProvider, InteractiveConfig, LevelSummary,
};
pub use report::{
    k_miou, read_report, target_key, target_threshold, write_report, EvalMode, EvalReport,
    ReportFormat, SampleRecord, StartMode, REPORT_SCHEMA,
};
