//! Machine-readable report documents: JSON (one object per run, an array
//! for sweeps) and TSV (one row per run or grid cell).

use serde::Serialize;

use crate::harness::{ConfigEcho, RunReport};

#[derive(Serialize)]
struct ReportDoc<'a> {
    config: &'a ConfigEcho,
    accuracy: f64,
    ci95: f64,
    tasks: usize,
    per_task_retained: usize,
    per_branch_mean_scores: PerBranch,
    stream_hash: String,
    wall_time_s: f64,
}

#[derive(Serialize)]
struct PerBranch {
    part: f64,
    pixel: f64,
    dist: f64,
}

fn doc(report: &RunReport) -> ReportDoc<'_> {
    ReportDoc {
        config: &report.config,
        accuracy: report.accuracy,
        ci95: report.ci95,
        tasks: report.tasks,
        per_task_retained: report.per_task_retained,
        per_branch_mean_scores: PerBranch {
            part: report.per_branch_mean[0],
            pixel: report.per_branch_mean[1],
            dist: report.per_branch_mean[2],
        },
        stream_hash: format!("{:016x}", report.stream_hash),
        wall_time_s: report.wall_time_s,
    }
}

pub fn report_to_json(report: &RunReport) -> String {
    serde_json::to_string_pretty(&doc(report)).expect("report serialization cannot fail")
}

pub fn reports_to_json(reports: &[RunReport]) -> String {
    let docs: Vec<ReportDoc<'_>> = reports.iter().map(doc).collect();
    serde_json::to_string_pretty(&docs).expect("report serialization cannot fail")
}

pub const TSV_HEADER: &str = "mode\tsource\tsplit\tn_way\tm_shot\tqueries\ttasks\txi\tk\tdistribution\tbranches\tseed\taccuracy\tci95\tpart_mean\tpixel_mean\tdist_mean\tstream_hash\twall_time_s";

pub fn reports_to_tsv(reports: &[RunReport]) -> String {
    let mut out = String::from(TSV_HEADER);
    out.push('\n');
    for r in reports {
        let c = &r.config;
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:016x}\t{}\n",
            c.mode,
            c.source,
            c.split,
            c.n_way,
            c.m_shot,
            c.queries_per_class,
            c.tasks,
            c.xi,
            c.k,
            c.distribution,
            c.branches,
            c.seed,
            r.accuracy,
            r.ci95,
            r.per_branch_mean[0],
            r.per_branch_mean[1],
            r.per_branch_mean[2],
            r.stream_hash,
            r.wall_time_s,
        ));
    }
    out
}
