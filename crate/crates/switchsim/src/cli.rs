//! Command-line interface: `serve` (simulator), `run` (regression suite),
//! `gen` (one-off template instantiation) and `report` (HTML re-render).
//!
//! Exit codes: 0 success, 1 completed run with non-pass verdicts, 2 bad
//! configuration or usage, 3 simulator port already in use.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use switchsim_core::{frame_xml, ChannelKind, Packager, WireDirection, DEFAULT_TPDU};

use crate::client::{self, execute};
use crate::net::{default_port, parse_tpdu, Endpoint};
use crate::packager_file::load_packager;
use crate::report::{parse_json, render_html, write_report_files};
use crate::simulator::{EndpointConfig, SimError, Simulator, SimulatorConfig};
use crate::template::{instantiate, load_field_config, load_template, FieldConfig};

#[derive(Parser)]
#[command(
    name = "switchsim",
    version,
    about = "ISO 8583 switch simulator and regression test client"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the switch simulator until interrupted
    Serve(ServeArgs),
    /// Execute a regression suite and write the report files
    Run(RunArgs),
    /// Instantiate one template and print it as an <isomsg> document
    Gen(GenArgs),
    /// Re-render the HTML report from an existing JSON report
    Report(ReportArgs),
}

#[derive(Args)]
struct ServeArgs {
    /// Simulator config file (JSON); the flags below override it
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Ports for the ascii, nac and xml channels
    #[arg(long, value_name = "A,N,X")]
    ports: Option<String>,
    /// Balance placed in field 54 of approved balance enquiries
    #[arg(long, value_name = "AMT")]
    balance: Option<String>,
    /// Response delay in milliseconds
    #[arg(long, value_name = "MS")]
    delay: Option<u64>,
    /// Packager definition file (JSON); built-in packager when omitted
    #[arg(long, value_name = "PATH")]
    packager: Option<PathBuf>,
    /// TPDU for the nac channel as 10 hex digits
    #[arg(long, value_name = "HEX10")]
    tpdu: Option<String>,
    /// Suppress the per-message log lines
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Directory containing the template files (*.json)
    #[arg(long, value_name = "DIR")]
    suite: PathBuf,
    /// Field pattern config (JSON); built-in defaults when omitted
    #[arg(long, value_name = "PATH")]
    field_config: Option<PathBuf>,
    /// Host running the switch
    #[arg(long, default_value = "127.0.0.1")]
    target: String,
    /// Channels to exercise
    #[arg(
        long,
        value_delimiter = ',',
        default_values_t = [ChannelKind::Ascii, ChannelKind::Nac, ChannelKind::Xml]
    )]
    channels: Vec<ChannelKind>,
    /// Ports for the ascii, nac and xml channels (defaults 8001,8002,8003)
    #[arg(long, value_name = "A,N,X")]
    ports: Option<String>,
    /// How many times to send the whole suite per channel
    #[arg(long, default_value_t = 1)]
    iterations: u32,
    /// Run seed; equal seeds reproduce identical requests
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-message response timeout in milliseconds
    #[arg(long, default_value_t = 5000, value_name = "MS")]
    timeout: u64,
    /// Upper bound on unanswered messages per connection
    #[arg(long, default_value_t = 32)]
    max_in_flight: usize,
    /// Directory for the report files
    #[arg(long, env = "SWITCHSIM_OUT", default_value = ".", value_name = "DIR")]
    out: PathBuf,
    /// Packager definition file (JSON); built-in packager when omitted
    #[arg(long, value_name = "PATH")]
    packager: Option<PathBuf>,
    /// TPDU for the nac channel as 10 hex digits
    #[arg(long, value_name = "HEX10")]
    tpdu: Option<String>,
    /// Print progress counters to standard error while running
    #[arg(long)]
    progress: bool,
}

#[derive(Args)]
struct GenArgs {
    /// Template file (JSON)
    #[arg(long, value_name = "PATH")]
    template: PathBuf,
    /// Field pattern config (JSON); built-in defaults when omitted
    #[arg(long, value_name = "PATH")]
    field_config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    /// Report JSON produced by a previous run
    #[arg(long, value_name = "PATH")]
    json: PathBuf,
    /// Output directory; defaults to the directory of the JSON file
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

/// Parses the command line and runs the selected subcommand, returning the
/// process exit code. Usage errors exit directly via clap with code 2.
pub fn run_cli() -> i32 {
    match Cli::parse().command {
        Command::Serve(args) => cmd_serve(args),
        Command::Run(args) => cmd_run(args),
        Command::Gen(args) => cmd_gen(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn fail(message: impl std::fmt::Display) -> i32 {
    eprintln!("error: {message}");
    2
}

fn parse_ports(s: &str) -> Result<[u16; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!(
            "--ports wants three comma-separated ports (ascii,nac,xml), got {s:?}"
        ));
    }
    let mut ports = [0u16; 3];
    for (i, part) in parts.iter().enumerate() {
        ports[i] = part
            .trim()
            .parse()
            .map_err(|_| format!("--ports: {part:?} is not a port number"))?;
    }
    Ok(ports)
}

fn packager_arg(path: Option<&Path>) -> Result<Arc<Packager>, String> {
    match path {
        Some(p) => load_packager(p).map(Arc::new).map_err(|e| e.to_string()),
        None => Ok(Arc::new(Packager::default_ascii())),
    }
}

fn field_config_arg(path: Option<&Path>) -> Result<FieldConfig, String> {
    match path {
        Some(p) => load_field_config(p).map_err(|e| e.to_string()),
        None => Ok(FieldConfig::default_config()),
    }
}

static SHUTDOWN: AtomicBool = AtomicBool::new(false);

extern "C" fn on_signal(_: libc::c_int) {
    SHUTDOWN.store(true, Ordering::SeqCst);
}

fn install_signal_handler() {
    let handler = on_signal as extern "C" fn(libc::c_int);
    unsafe {
        libc::signal(libc::SIGINT, handler as libc::sighandler_t);
        libc::signal(libc::SIGTERM, handler as libc::sighandler_t);
    }
}

fn cmd_serve(args: ServeArgs) -> i32 {
    let mut config = match &args.config {
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(text) => text,
                Err(e) => return fail(format_args!("cannot read {}: {e}", path.display())),
            };
            match serde_json::from_str::<SimulatorConfig>(&text) {
                Ok(config) => config,
                Err(e) => {
                    return fail(format_args!(
                        "invalid simulator config {}: {e}",
                        path.display()
                    ))
                }
            }
        }
        None => SimulatorConfig::default(),
    };
    if let Some(spec) = &args.ports {
        let ports = match parse_ports(spec) {
            Ok(ports) => ports,
            Err(e) => return fail(e),
        };
        config.endpoints = ChannelKind::ALL
            .iter()
            .zip(ports)
            .map(|(&channel, port)| EndpointConfig { channel, port })
            .collect();
    }
    if let Some(balance) = args.balance {
        config.balance = balance;
    }
    if let Some(delay) = args.delay {
        config.response_delay_ms = delay;
    }
    if args.tpdu.is_some() {
        config.tpdu = args.tpdu;
    }
    if args.quiet {
        config.log = false;
    }
    let packager = match packager_arg(args.packager.as_deref()) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };

    let sim = match Simulator::start_with_packager(config, packager) {
        Ok(sim) => sim,
        Err(e @ SimError::PortInUse(_)) => {
            eprintln!("error: {e}");
            return 3;
        }
        Err(e) => return fail(e),
    };
    for ep in sim.endpoints() {
        println!("listening {} on {}", ep.channel, ep.addr());
    }

    install_signal_handler();
    while !SHUTDOWN.load(Ordering::SeqCst) {
        std::thread::sleep(Duration::from_millis(100));
    }
    eprintln!("shutting down");
    sim.stop();
    0
}

fn cmd_run(args: RunArgs) -> i32 {
    let mut seen = Vec::new();
    for &channel in &args.channels {
        if seen.contains(&channel) {
            return fail(format_args!("--channels lists {channel} twice"));
        }
        seen.push(channel);
    }
    let field_config = match field_config_arg(args.field_config.as_deref()) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let packager = match packager_arg(args.packager.as_deref()) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let tpdu = match &args.tpdu {
        Some(s) => match parse_tpdu(s) {
            Ok(t) => t,
            Err(e) => return fail(e),
        },
        None => DEFAULT_TPDU,
    };
    let ports = match &args.ports {
        Some(spec) => match parse_ports(spec) {
            Ok(ports) => Some(ports),
            Err(e) => return fail(e),
        },
        None => None,
    };
    let port_of = |channel: ChannelKind| match (ports, channel) {
        (Some(p), ChannelKind::Ascii) => p[0],
        (Some(p), ChannelKind::Nac) => p[1],
        (Some(p), ChannelKind::Xml) => p[2],
        (None, channel) => default_port(channel),
    };
    let endpoints: Vec<Endpoint> = args
        .channels
        .iter()
        .map(|&channel| Endpoint::new(args.target.clone(), port_of(channel), channel))
        .collect();

    let mut plan = match client::plan(
        &args.suite,
        field_config,
        endpoints,
        args.iterations,
        args.timeout,
        args.max_in_flight,
        args.seed,
        packager,
        tpdu,
    ) {
        Ok(plan) => plan,
        Err(e) => return fail(e),
    };
    plan.progress = args.progress;

    let report = execute(&plan);
    let totals = report.totals;
    match write_report_files(&report, &args.out) {
        Ok((json_path, html_path)) => {
            println!("report: {}", json_path.display());
            println!("report: {}", html_path.display());
        }
        Err(e) => return fail(e),
    }
    println!(
        "totals: pass={} fail={} timeout={} error={} (of {})",
        totals.pass,
        totals.fail,
        totals.timeout,
        totals.error,
        totals.sum()
    );
    if totals.all_passed() {
        0
    } else {
        1
    }
}

fn cmd_gen(args: GenArgs) -> i32 {
    let template = match load_template(&args.template) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    let field_config = match field_config_arg(args.field_config.as_deref()) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let msg = match instantiate(&template, &field_config, args.seed) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    let xml = frame_xml(&msg, WireDirection::Outgoing);
    println!("{}", String::from_utf8_lossy(&xml));
    0
}

fn cmd_report(args: ReportArgs) -> i32 {
    let bytes = match std::fs::read(&args.json) {
        Ok(b) => b,
        Err(e) => return fail(format_args!("cannot read {}: {e}", args.json.display())),
    };
    let report = match parse_json(&bytes) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let out_dir = args.out.unwrap_or_else(|| {
        let parent = args.json.parent().unwrap_or(Path::new("."));
        if parent.as_os_str().is_empty() {
            PathBuf::from(".")
        } else {
            parent.to_path_buf()
        }
    });
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        return fail(format_args!("cannot create {}: {e}", out_dir.display()));
    }
    let html_path = out_dir.join(format!("{}.report.html", report.run_id));
    if let Err(e) = std::fs::write(&html_path, render_html(&report)) {
        return fail(format_args!("cannot write {}: {e}", html_path.display()));
    }
    println!("report: {}", html_path.display());
    0
}
