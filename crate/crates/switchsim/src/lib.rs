//! Switch-side tooling built on top of `switchsim-core`: a three-channel
//! switch simulator, a template-driven regression client, report
//! rendering, and the `switchsim` command-line entry points.

pub mod cli;
pub mod client;
pub mod net;
pub mod packager_file;
pub mod report;
pub mod simulator;
pub mod template;

pub use client::{compare, derive_message_seed, execute, plan, PlanError, RunPlan};
pub use net::{default_port, parse_tpdu, Connection, Endpoint, NetError};
pub use packager_file::{load_packager, parse_packager, PackagerFileError};
pub use report::{
    parse_json, render_html, render_json, run_id, summarize, write_report_files, Mismatch,
    MsgSnapshot, PlanSummary, ReportError, TestReport, TestResult, Totals, Verdict,
};
pub use simulator::{
    participants, route, validate_balance_enquiry, EndpointConfig, SimError, Simulator,
    SimulatorConfig,
};
pub use template::{
    instantiate, load_field_config, load_suite, load_template, parse_field_config,
    parse_template, FieldConfig, TemplateError, TestTemplate,
};
