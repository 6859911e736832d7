//! Score-table data model, file I/O, stratified folds and synthetic data.

mod folds;
mod io;
mod synth;
mod table;

pub use folds::{stratified_kfold, FoldAssignment, SmallCell};
pub use io::{
    load_score_table, read_score_table, save_score_table, write_fold_assignment,
    write_score_table,
};
pub use synth::{synthesize, Correlation, LatentClass, ScoreModel, SynthConfig};
pub use table::{
    MemberScores, Sample, SampleRecord, ScoreTable, Split, GROUP_SCORE_TOLERANCE,
};
