//! The regression client: instantiates every template for every endpoint
//! and iteration, sends the lot over persistent connections with bounded
//! in-flight windows, correlates responses by STAN (field 11), scores
//! them against the template's expectations, and hands back a report.
//!
//! Every planned send produces exactly one result — pass, fail, timeout,
//! or error — so totals always conserve.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use chrono::Utc;
use switchsim_core::{ChannelKind, IsoMsg, Packager, WireDirection};

use crate::net::{Connection, Endpoint, NetError, RecvHalf};
use crate::report::{
    run_id, Mismatch, MsgSnapshot, PlanSummary, TestReport, TestResult, Verdict,
};
use crate::template::{
    instantiate, load_suite, regex_expectation, FieldConfig, TemplateError, TestTemplate,
};

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("suite directory {} contains no templates", .0.display())]
    EmptySuite(PathBuf),
    #[error("template {file}: {source}")]
    Template {
        file: String,
        source: TemplateError,
    },
    #[error("invalid plan: {0}")]
    Invalid(String),
}

/// Everything needed to execute one run. Built by [`plan`], immutable
/// afterwards; the same plan always generates the same request messages.
#[derive(Debug)]
pub struct RunPlan {
    /// (file name, template) pairs, ordered by file name.
    pub suite: Vec<(String, TestTemplate)>,
    pub field_config: FieldConfig,
    pub endpoints: Vec<Endpoint>,
    pub iterations: u32,
    pub timeout_ms: u64,
    pub max_in_flight: usize,
    pub seed: u64,
    pub packager: Arc<Packager>,
    pub tpdu: [u8; 5],
    /// Emit sent/received/pending counters on standard error.
    pub progress: bool,
}

impl RunPlan {
    pub fn planned_sends(&self) -> usize {
        self.suite.len() * self.endpoints.len() * self.iterations as usize
    }
}

#[allow(clippy::too_many_arguments)]
pub fn plan(
    suite_dir: &Path,
    field_config: FieldConfig,
    endpoints: Vec<Endpoint>,
    iterations: u32,
    timeout_ms: u64,
    max_in_flight: usize,
    seed: u64,
    packager: Arc<Packager>,
    tpdu: [u8; 5],
) -> Result<RunPlan, PlanError> {
    if endpoints.is_empty() {
        return Err(PlanError::Invalid("at least one endpoint is required".into()));
    }
    if iterations == 0 {
        return Err(PlanError::Invalid("iterations must be >= 1".into()));
    }
    if max_in_flight == 0 {
        return Err(PlanError::Invalid("max-in-flight must be >= 1".into()));
    }
    let suite = load_suite(suite_dir).map_err(|e| {
        let file = match &e {
            TemplateError::Io { path, .. } | TemplateError::Schema { path, .. } => path.clone(),
            _ => suite_dir.display().to_string(),
        };
        PlanError::Template { file, source: e }
    })?;
    if suite.is_empty() {
        return Err(PlanError::EmptySuite(suite_dir.to_path_buf()));
    }
    // resolve every randomized field to a pattern now, so a hole fails the
    // plan instead of surfacing mid-run
    for (file, template) in &suite {
        for &number in &template.randomize {
            if !template.patterns.contains_key(&number)
                && !field_config.patterns.contains_key(&number)
            {
                return Err(PlanError::Template {
                    file: file.clone(),
                    source: TemplateError::MissingPattern(number),
                });
            }
        }
    }
    Ok(RunPlan {
        suite,
        field_config,
        endpoints,
        iterations,
        timeout_ms,
        max_in_flight,
        seed,
        packager,
        tpdu,
        progress: false,
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-message seed: a deterministic hash of the run seed and the
/// message's coordinates in the plan.
pub fn derive_message_seed(
    run_seed: u64,
    template_idx: usize,
    endpoint_idx: usize,
    iteration: u32,
) -> u64 {
    let mut s = splitmix64(run_seed);
    s = splitmix64(s ^ (template_idx as u64).wrapping_add(0xD1B5_4A32_D192_ED03));
    s = splitmix64(s ^ (endpoint_idx as u64).wrapping_add(0x8CB9_2BA7_2F3D_8DD7));
    s = splitmix64(s ^ (iteration as u64).wrapping_add(0xEB44_ACCA_B455_D165));
    s
}

/// Scores a response against a template's expectations. An expected value
/// wrapped in `/.../` must fully match as a regex; anything else must
/// match exactly. Absent fields always mismatch.
pub fn compare(expected: &BTreeMap<u16, String>, response: &IsoMsg) -> Vec<Mismatch> {
    let mut mismatches = Vec::new();
    for (&field, exp) in expected {
        let actual = response.get(field).map(|v| v.display_string());
        let ok = match (&actual, regex_expectation(exp)) {
            (None, _) => false,
            (Some(a), Some(pattern)) => regex::Regex::new(&format!("^(?:{pattern})$"))
                .map(|re| re.is_match(a))
                .unwrap_or(false),
            (Some(a), None) => a == exp,
        };
        if !ok {
            mismatches.push(Mismatch {
                field,
                expected: exp.clone(),
                actual,
            });
        }
    }
    mismatches
}

fn format_stan(counter: u64) -> String {
    format!("{:06}", counter % 1_000_000)
}

struct Pending {
    slot: usize,
    template: String,
    iteration: u32,
    request: MsgSnapshot,
    expected: BTreeMap<u16, String>,
    sent_at: Instant,
    deadline: Instant,
}

struct EndpointState {
    pending: HashMap<String, Pending>,
    dead: Option<String>,
    done_sending: bool,
}

type Shared = (Mutex<EndpointState>, Condvar);

struct Recorder<'a> {
    results: &'a Mutex<Vec<Option<TestResult>>>,
    completed: &'a AtomicUsize,
}

impl Recorder<'_> {
    fn record(&self, slot: usize, result: TestResult) {
        let mut results = self.results.lock().expect("results lock");
        debug_assert!(results[slot].is_none(), "slot {slot} written twice");
        results[slot] = Some(result);
        self.completed.fetch_add(1, Ordering::SeqCst);
    }
}

/// Runs the whole plan and returns the report. Endpoint failures degrade
/// to error-verdict results for that endpoint's sends; the run continues.
pub fn execute(plan: &RunPlan) -> TestReport {
    let started_at = Utc::now();
    let total = plan.planned_sends();
    let results: Mutex<Vec<Option<TestResult>>> = Mutex::new((0..total).map(|_| None).collect());
    let sent = AtomicUsize::new(0);
    let completed = AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for (endpoint_idx, endpoint) in plan.endpoints.iter().enumerate() {
            let recorder = Recorder {
                results: &results,
                completed: &completed,
            };
            let sent = &sent;
            scope.spawn(move || run_endpoint(plan, endpoint_idx, endpoint, recorder, sent));
        }
        if plan.progress {
            let sent = &sent;
            let completed = &completed;
            scope.spawn(move || loop {
                let s = sent.load(Ordering::SeqCst);
                let c = completed.load(Ordering::SeqCst);
                eprintln!("progress: sent={s} received={c} pending={}", s.saturating_sub(c));
                if c >= total {
                    return;
                }
                std::thread::sleep(Duration::from_millis(500));
            });
        }
    });

    let results: Vec<TestResult> = results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every planned send yields a result"))
        .collect();
    let finished_at = Utc::now();
    TestReport::new(
        run_id(started_at, plan.seed),
        started_at,
        finished_at,
        PlanSummary {
            suite_size: plan.suite.len(),
            endpoints: plan.endpoints.iter().map(|e| e.to_string()).collect(),
            iterations: plan.iterations,
            seed: plan.seed,
        },
        results,
    )
}

fn run_endpoint(
    plan: &RunPlan,
    endpoint_idx: usize,
    endpoint: &Endpoint,
    recorder: Recorder<'_>,
    sent_ctr: &AtomicUsize,
) {
    let suite_len = plan.suite.len();
    let iterations = plan.iterations as usize;
    let slot_of = |iteration: usize, template_idx: usize| {
        (endpoint_idx * iterations + iteration) * suite_len + template_idx
    };
    let skeleton = |template_idx: usize, iteration: usize, request: MsgSnapshot| TestResult {
        template: plan.suite[template_idx].1.name.clone(),
        iteration: iteration as u32,
        channel: endpoint.channel,
        endpoint: endpoint.to_string(),
        request,
        response: None,
        verdict: Verdict::Error,
        mismatches: Vec::new(),
        latency_ms: 0,
        error: None,
    };
    let make_request = |template_idx: usize, iteration: usize, stan: &str| {
        let template = &plan.suite[template_idx].1;
        let seed = derive_message_seed(plan.seed, template_idx, endpoint_idx, iteration as u32);
        instantiate(template, &plan.field_config, seed).map(|mut msg| {
            msg.set_text(11, stan).expect("stan is printable digits");
            msg
        })
    };

    let connect_timeout = Duration::from_millis(plan.timeout_ms.max(1000));
    let conn = Connection::connect(endpoint, plan.packager.clone(), plan.tpdu, connect_timeout)
        .and_then(Connection::split);
    let (mut send_half, recv_half) = match conn {
        Ok(halves) => halves,
        Err(e) => {
            // dark endpoint: every planned send for it becomes an error
            // result, other endpoints are unaffected
            let reason = e.to_string();
            let mut stan_counter = 0u64;
            for iteration in 0..iterations {
                for template_idx in 0..suite_len {
                    stan_counter += 1;
                    let request = make_request(template_idx, iteration, &format_stan(stan_counter))
                        .map(|m| MsgSnapshot::from(&m))
                        .unwrap_or_else(|_| MsgSnapshot {
                            mti: plan.suite[template_idx].1.mti.as_str().to_string(),
                            fields: BTreeMap::new(),
                        });
                    let mut result = skeleton(template_idx, iteration, request);
                    result.error = Some(reason.clone());
                    recorder.record(slot_of(iteration, template_idx), result);
                }
            }
            return;
        }
    };

    let shared: Shared = (
        Mutex::new(EndpointState {
            pending: HashMap::new(),
            dead: None,
            done_sending: false,
        }),
        Condvar::new(),
    );

    std::thread::scope(|scope| {
        scope.spawn(|| {
            reader_loop(
                recv_half,
                &shared,
                &recorder,
                endpoint.channel,
                &endpoint.to_string(),
            )
        });

        let (lock, cv) = &shared;
        let mut stan_counter = 0u64;
        for iteration in 0..iterations {
            for template_idx in 0..suite_len {
                stan_counter += 1;
                let stan = format_stan(stan_counter);
                let slot = slot_of(iteration, template_idx);
                let request = match make_request(template_idx, iteration, &stan) {
                    Ok(msg) => msg,
                    Err(e) => {
                        let mut result =
                            skeleton(template_idx, iteration, MsgSnapshot {
                                mti: plan.suite[template_idx].1.mti.as_str().to_string(),
                                fields: BTreeMap::new(),
                            });
                        result.error = Some(e.to_string());
                        recorder.record(slot, result);
                        continue;
                    }
                };
                let snapshot = MsgSnapshot::from(&request);

                {
                    let mut st = lock.lock().expect("endpoint state");
                    while st.dead.is_none() && st.pending.len() >= plan.max_in_flight {
                        st = cv.wait(st).expect("endpoint state");
                    }
                    if let Some(reason) = st.dead.clone() {
                        drop(st);
                        let mut result = skeleton(template_idx, iteration, snapshot);
                        result.error = Some(reason);
                        recorder.record(slot, result);
                        continue;
                    }
                    let now = Instant::now();
                    st.pending.insert(
                        stan.clone(),
                        Pending {
                            slot,
                            template: plan.suite[template_idx].1.name.clone(),
                            iteration: iteration as u32,
                            request: snapshot,
                            expected: plan.suite[template_idx].1.expected.clone(),
                            sent_at: now,
                            deadline: now + Duration::from_millis(plan.timeout_ms),
                        },
                    );
                }

                match send_half.send(&request, WireDirection::Outgoing) {
                    Ok(()) => {
                        sent_ctr.fetch_add(1, Ordering::SeqCst);
                    }
                    Err(e) => {
                        let mut st = lock.lock().expect("endpoint state");
                        let pending = st.pending.remove(&stan);
                        let fatal = !matches!(e, NetError::Codec(_) | NetError::Xml(_));
                        if fatal {
                            st.dead = Some(e.to_string());
                        }
                        cv.notify_all();
                        drop(st);
                        if let Some(p) = pending {
                            let mut result = skeleton(template_idx, iteration, p.request);
                            result.error = Some(e.to_string());
                            recorder.record(p.slot, result);
                        }
                    }
                }
            }
        }
        let mut st = lock.lock().expect("endpoint state");
        st.done_sending = true;
        cv.notify_all();
    });
}

/// Per-connection reader: correlates responses by STAN, sweeps timed-out
/// sends, and drains everything as errors when the connection dies.
fn reader_loop(
    mut recv: RecvHalf,
    shared: &Shared,
    recorder: &Recorder<'_>,
    channel: ChannelKind,
    endpoint_label: &str,
) {
    let (lock, cv) = shared;
    loop {
        {
            let mut st = lock.lock().expect("endpoint state");
            let now = Instant::now();
            let expired: Vec<String> = st
                .pending
                .iter()
                .filter(|(_, p)| now >= p.deadline)
                .map(|(stan, _)| stan.clone())
                .collect();
            for stan in expired {
                let p = st.pending.remove(&stan).expect("expired entry present");
                recorder.record(
                    p.slot,
                    TestResult {
                        template: p.template,
                        iteration: p.iteration,
                        channel,
                        endpoint: endpoint_label.to_string(),
                        request: p.request,
                        response: None,
                        verdict: Verdict::Timeout,
                        mismatches: Vec::new(),
                        latency_ms: p.sent_at.elapsed().as_millis() as u64,
                        error: None,
                    },
                );
                cv.notify_all();
            }
            if let Some(reason) = st.dead.clone() {
                for (_, p) in st.pending.drain() {
                    recorder.record(
                        p.slot,
                        TestResult {
                            template: p.template,
                            iteration: p.iteration,
                            channel,
                            endpoint: endpoint_label.to_string(),
                            request: p.request,
                            response: None,
                            verdict: Verdict::Error,
                            mismatches: Vec::new(),
                            latency_ms: p.sent_at.elapsed().as_millis() as u64,
                            error: Some(reason.clone()),
                        },
                    );
                }
                cv.notify_all();
                return;
            }
            if st.done_sending && st.pending.is_empty() {
                return;
            }
        }

        match recv.poll_message(Duration::from_millis(25)) {
            Ok(Some(response)) => {
                let stan = response.get_text(11).map(str::to_string);
                let mut st = lock.lock().expect("endpoint state");
                let matched = stan.as_ref().and_then(|s| st.pending.remove(s));
                drop(st);
                match matched {
                    Some(p) => {
                        let mismatches = compare(&p.expected, &response);
                        let verdict = if mismatches.is_empty() {
                            Verdict::Pass
                        } else {
                            Verdict::Fail
                        };
                        recorder.record(
                            p.slot,
                            TestResult {
                                template: p.template,
                                iteration: p.iteration,
                                channel,
                                endpoint: endpoint_label.to_string(),
                                request: p.request,
                                response: Some(MsgSnapshot::from(&response)),
                                verdict,
                                mismatches,
                                latency_ms: p.sent_at.elapsed().as_millis() as u64,
                                error: None,
                            },
                        );
                        cv.notify_all();
                    }
                    None => {
                        eprintln!(
                            "{endpoint_label}: unmatched response (stan {:?}) discarded",
                            stan.as_deref().unwrap_or("absent")
                        );
                    }
                }
            }
            Ok(None) => {}
            Err(NetError::Codec(e)) => {
                eprintln!("{endpoint_label}: skipping undecodable response: {e}");
            }
            Err(NetError::Xml(e)) => {
                eprintln!("{endpoint_label}: skipping undecodable response: {e}");
            }
            Err(e) => {
                let mut st = lock.lock().expect("endpoint state");
                if st.done_sending && st.pending.is_empty() {
                    // a close after everything settled is a clean end
                    return;
                }
                st.dead = Some(e.to_string());
                cv.notify_all();
                // the next loop iteration drains pending and exits
            }
        }
    }
}
