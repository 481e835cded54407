//! Synthetic evaluation kit: world and scene generation, object-existence
//! probes, caption hallucination ratios, compute profiling, and report files.

mod chair;
mod efficiency;
mod harness;
mod pope;
mod report;
mod world;

pub use chair::{chair_metrics, ChairResult};
pub use efficiency::{efficiency_profile, EfficiencyEntry, EfficiencyProfile};
pub use harness::{run_chair, run_pope, ChairRun, PopeRun};
pub use pope::{build_pope_probes, pope_metrics, PopeProbe, PopeResult, PopeSetting};
pub use report::{
    read_chair_csv, read_efficiency_json, read_pope_csv, read_scenes_jsonl, write_report,
    write_scenes_jsonl, ChairReportRow, PopeReportRow, Report, ReportFormat,
};
pub use world::{gen_scenes, gen_world, Scene, World};
