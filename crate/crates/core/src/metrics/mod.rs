//! Spectral losses, SI-SDR scores and paired significance tests.

mod loss;
mod report;
mod sisdr;
mod wilcoxon;

pub use loss::{loss_mr, loss_source, loss_sp, loss_total, LossBreakdown, LossConfig};
pub use report::{
    compare_methods, evaluate_run, Aggregate, EvalOptions, EvalReport, EvalRow, MethodInfo, MethodRun, Metric,
    RunInfo, Skipped, StatRow, RUN_INFO_FILE,
};
pub use sisdr::{activity_ranges, si_sdr, si_sdr_active, ACTIVITY_PAD_S, SI_SDR_CAP_DB};
pub use wilcoxon::{bonferroni, signed_rank_test, wilcoxon_bonferroni, WilcoxonOptions, WilcoxonResult, EXACT_BELOW};
