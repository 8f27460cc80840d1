pub mod dump_gmm;
pub mod eval_offline;
pub mod generate;
pub mod report;
pub mod rerun;
pub mod simulate;
pub mod traces;
pub mod train;
