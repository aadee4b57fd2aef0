//! Run reports: aggregation of per-send results, a stable JSON form that
//! roundtrips exactly, and a self-contained HTML rendering.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use switchsim_core::{ChannelKind, IsoMsg};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("report JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("inconsistent report: {0}")]
    Inconsistent(String),
}

/// A message frozen for the report: MTI plus stringified fields (binary
/// values as uppercase hex).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MsgSnapshot {
    pub mti: String,
    pub fields: BTreeMap<u16, String>,
}

impl From<&IsoMsg> for MsgSnapshot {
    fn from(msg: &IsoMsg) -> MsgSnapshot {
        MsgSnapshot {
            mti: msg.mti().as_str().to_string(),
            fields: msg
                .fields()
                .map(|(n, v)| (n, v.display_string()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Timeout,
    Error,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Timeout => "timeout",
            Verdict::Error => "error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub field: u16,
    pub expected: String,
    /// `None` when the response lacks the field entirely.
    pub actual: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestResult {
    pub template: String,
    pub iteration: u32,
    pub channel: ChannelKind,
    pub endpoint: String,
    pub request: MsgSnapshot,
    pub response: Option<MsgSnapshot>,
    pub verdict: Verdict,
    pub mismatches: Vec<Mismatch>,
    pub latency_ms: u64,
    /// Transport-level detail for error verdicts.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Totals {
    pub pass: usize,
    pub fail: usize,
    pub timeout: usize,
    pub error: usize,
}

impl Totals {
    pub fn sum(&self) -> usize {
        self.pass + self.fail + self.timeout + self.error
    }

    pub fn all_passed(&self) -> bool {
        self.fail == 0 && self.timeout == 0 && self.error == 0
    }
}

pub fn summarize(results: &[TestResult]) -> Totals {
    let mut totals = Totals::default();
    for r in results {
        match r.verdict {
            Verdict::Pass => totals.pass += 1,
            Verdict::Fail => totals.fail += 1,
            Verdict::Timeout => totals.timeout += 1,
            Verdict::Error => totals.error += 1,
        }
    }
    totals
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub suite_size: usize,
    pub endpoints: Vec<String>,
    pub iterations: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestReport {
    pub run_id: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub plan: PlanSummary,
    pub totals: Totals,
    pub results: Vec<TestResult>,
}

impl TestReport {
    /// Builds a report with totals computed from the results, upholding
    /// the totals/results consistency invariant by construction.
    pub fn new(
        run_id: String,
        started_at: DateTime<Utc>,
        finished_at: DateTime<Utc>,
        plan: PlanSummary,
        results: Vec<TestResult>,
    ) -> TestReport {
        let totals = summarize(&results);
        TestReport {
            run_id,
            started_at,
            finished_at,
            plan,
            totals,
            results,
        }
    }

    fn validate(&self) -> Result<(), ReportError> {
        if self.totals != summarize(&self.results) {
            return Err(ReportError::Inconsistent(
                "totals do not match results".to_string(),
            ));
        }
        if self.finished_at < self.started_at {
            return Err(ReportError::Inconsistent(
                "finished_at precedes started_at".to_string(),
            ));
        }
        Ok(())
    }
}

pub fn run_id(started_at: DateTime<Utc>, seed: u64) -> String {
    format!("{}-seed{}", started_at.format("%Y%m%dT%H%M%SZ"), seed)
}

pub fn render_json(report: &TestReport) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(report).expect("report serializes");
    bytes.push(b'\n');
    bytes
}

pub fn parse_json(bytes: &[u8]) -> Result<TestReport, ReportError> {
    let report: TestReport = serde_json::from_slice(bytes)?;
    report.validate()?;
    Ok(report)
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn snapshot_lines(snapshot: &MsgSnapshot) -> String {
    let mut out = format!("mti={}", esc(&snapshot.mti));
    for (n, v) in &snapshot.fields {
        out.push_str(&format!("\n{n}={}", esc(v)));
    }
    out
}

/// Renders a single self-contained HTML page: a summary table and one
/// result row per send, with expandable mismatch/message detail.
pub fn render_html(report: &TestReport) -> Vec<u8> {
    let mut html = String::with_capacity(4096 + report.results.len() * 512);
    html.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\"/>\n");
    html.push_str(&format!("<title>switchsim report {}</title>\n", esc(&report.run_id)));
    html.push_str(
        "<style>\n\
         body{font-family:system-ui,sans-serif;margin:2em;color:#222}\n\
         table{border-collapse:collapse;margin:1em 0}\n\
         th,td{border:1px solid #bbb;padding:0.3em 0.7em;text-align:left;vertical-align:top}\n\
         th{background:#eee}\n\
         tr.result.pass td.verdict{background:#c8e6c9}\n\
         tr.result.fail td.verdict{background:#ffcdd2}\n\
         tr.result.timeout td.verdict{background:#ffe0b2}\n\
         tr.result.error td.verdict{background:#e1bee7}\n\
         details{max-width:60em}\n\
         pre{background:#f6f6f6;padding:0.5em;overflow-x:auto}\n\
         </style>\n</head>\n<body>\n",
    );
    html.push_str(&format!("<h1>switchsim run {}</h1>\n", esc(&report.run_id)));

    html.push_str("<table class=\"summary\">\n");
    let endpoints = report.plan.endpoints.join(", ");
    for (k, v) in [
        ("run id", report.run_id.clone()),
        ("started", report.started_at.to_rfc3339()),
        ("finished", report.finished_at.to_rfc3339()),
        ("seed", report.plan.seed.to_string()),
        ("suite size", report.plan.suite_size.to_string()),
        ("iterations", report.plan.iterations.to_string()),
        ("endpoints", endpoints),
        ("pass", report.totals.pass.to_string()),
        ("fail", report.totals.fail.to_string()),
        ("timeout", report.totals.timeout.to_string()),
        ("error", report.totals.error.to_string()),
        ("total", report.totals.sum().to_string()),
    ] {
        html.push_str(&format!("<tr><th>{}</th><td>{}</td></tr>\n", esc(k), esc(&v)));
    }
    html.push_str("</table>\n");

    html.push_str(
        "<table class=\"results\">\n<thead><tr>\
         <th>#</th><th>template</th><th>iteration</th><th>channel</th>\
         <th>endpoint</th><th>verdict</th><th>latency (ms)</th><th>detail</th>\
         </tr></thead>\n<tbody>\n",
    );
    for (i, r) in report.results.iter().enumerate() {
        let mut detail = String::new();
        if r.mismatches.is_empty() && r.error.is_none() {
            detail.push_str("<details><summary>messages</summary>");
        } else {
            let label = if let Some(err) = &r.error {
                esc(err)
            } else {
                format!("{} mismatched field(s)", r.mismatches.len())
            };
            detail.push_str(&format!("<details open><summary>{label}</summary>"));
            if !r.mismatches.is_empty() {
                detail.push_str("<ul>");
                for m in &r.mismatches {
                    let actual = match &m.actual {
                        Some(a) => format!("got \"{}\"", esc(a)),
                        None => "field absent".to_string(),
                    };
                    detail.push_str(&format!(
                        "<li>field {}: expected \"{}\", {}</li>",
                        m.field,
                        esc(&m.expected),
                        actual
                    ));
                }
                detail.push_str("</ul>");
            }
        }
        detail.push_str(&format!("<pre>request\n{}</pre>", snapshot_lines(&r.request)));
        match &r.response {
            Some(resp) => {
                detail.push_str(&format!("<pre>response\n{}</pre>", snapshot_lines(resp)))
            }
            None => detail.push_str("<pre>response: none</pre>"),
        }
        detail.push_str("</details>");

        html.push_str(&format!(
            "<tr class=\"result {}\"><td>{}</td><td>{}</td><td>{}</td><td>{}</td>\
             <td>{}</td><td class=\"verdict\">{}</td><td>{}</td><td>{}</td></tr>\n",
            r.verdict,
            i + 1,
            esc(&r.template),
            r.iteration,
            r.channel,
            esc(&r.endpoint),
            r.verdict,
            r.latency_ms,
            detail,
        ));
    }
    html.push_str("</tbody>\n</table>\n</body>\n</html>\n");
    html.into_bytes()
}

/// Writes `<run-id>.report.json` and `<run-id>.report.html` into `out_dir`,
/// returning both paths.
pub fn write_report_files(
    report: &TestReport,
    out_dir: &Path,
) -> Result<(PathBuf, PathBuf), ReportError> {
    std::fs::create_dir_all(out_dir).map_err(|source| ReportError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let json_path = out_dir.join(format!("{}.report.json", report.run_id));
    let html_path = out_dir.join(format!("{}.report.html", report.run_id));
    std::fs::write(&json_path, render_json(report)).map_err(|source| ReportError::Io {
        path: json_path.display().to_string(),
        source,
    })?;
    std::fs::write(&html_path, render_html(report)).map_err(|source| ReportError::Io {
        path: html_path.display().to_string(),
        source,
    })?;
    Ok((json_path, html_path))
}
