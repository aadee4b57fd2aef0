//! Over-the-wire simulator behavior: participant routing, the balance
//! enquiry response rules, pipelining, fault tolerance and lifecycle.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use switchsim::{
    route, validate_balance_enquiry, Connection, EndpointConfig, SimError, Simulator,
    SimulatorConfig,
};
use switchsim_core::{
    frame_ascii, pack, parse_xml, ChannelKind, FrameDecoder, IsoMsg, Mti, Packager,
    WireDirection, DEFAULT_TPDU,
};

const BALANCE: &str = "000000010000";

fn quiet_config() -> SimulatorConfig {
    SimulatorConfig {
        endpoints: ChannelKind::ALL
            .iter()
            .map(|&channel| EndpointConfig { channel, port: 0 })
            .collect(),
        log: false,
        ..SimulatorConfig::default()
    }
}

fn connect(sim: &Simulator, channel: ChannelKind) -> Connection {
    let endpoint = sim.endpoint(channel).expect("bound endpoint");
    Connection::connect(
        endpoint,
        Arc::new(Packager::default_ascii()),
        DEFAULT_TPDU,
        Duration::from_secs(2),
    )
    .expect("connect to simulator")
}

fn request(mti: &str, proc_code: &str, stan: &str) -> IsoMsg {
    let mut msg = IsoMsg::new(Mti::new(mti).unwrap());
    msg.set_text(2, "4000001234567890").unwrap();
    msg.set_text(3, proc_code).unwrap();
    msg.set_text(11, stan).unwrap();
    msg.set_text(41, "TERM0001").unwrap();
    msg
}

fn free_port() -> u16 {
    TcpListener::bind(("127.0.0.1", 0))
        .expect("bind ephemeral")
        .local_addr()
        .expect("local addr")
        .port()
}

#[test]
fn balance_enquiry_rows_apply_on_every_channel() {
    let sim = Simulator::start(quiet_config()).expect("simulator");
    for &channel in &ChannelKind::ALL {
        let mut conn = connect(&sim, channel);

        conn.send(&request("0200", "310000", "000001"), WireDirection::Outgoing)
            .unwrap();
        let approved = conn.receive(Duration::from_secs(2)).unwrap();
        assert_eq!(approved.mti().as_str(), "0210", "channel {channel}");
        assert_eq!(approved.get_text(39), Some("00"), "channel {channel}");
        assert_eq!(approved.get_text(54), Some(BALANCE), "channel {channel}");

        // 99xxxx matches no registered participant, so the catch-all
        // declines it
        conn.send(&request("0200", "990000", "000002"), WireDirection::Outgoing)
            .unwrap();
        let declined = conn.receive(Duration::from_secs(2)).unwrap();
        assert_eq!(declined.get_text(39), Some("12"), "channel {channel}");
        assert_eq!(declined.get_text(54), None, "channel {channel}");
    }
    sim.stop();
}

#[test]
fn balance_enquiry_conformance_rows() {
    // approved: 0200 with a 31xxxx processing code
    let approved = validate_balance_enquiry(&request("0200", "310000", "000001"), BALANCE);
    assert_eq!(approved.mti().as_str(), "0210");
    assert_eq!(approved.get_text(39), Some("00"));
    assert_eq!(approved.get_text(54), Some(BALANCE));

    // wrong MTI declines even with a balance-enquiry processing code
    let wrong_mti = validate_balance_enquiry(&request("0100", "310000", "000001"), BALANCE);
    assert_eq!(wrong_mti.mti().as_str(), "0210");
    assert_eq!(wrong_mti.get_text(39), Some("12"));
    assert_eq!(wrong_mti.get_text(54), None);

    // wrong processing code declines
    let wrong_code = validate_balance_enquiry(&request("0200", "000000", "000001"), BALANCE);
    assert_eq!(wrong_code.get_text(39), Some("12"));
    assert_eq!(wrong_code.get_text(54), None);
}

#[test]
fn echo_property_on_randomized_requests() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mtis = ["0200", "0100", "0420", "0800"];
    for _ in 0..100 {
        let mti = mtis[(rng.next_u32() % mtis.len() as u32) as usize];
        let mut req = IsoMsg::new(Mti::new(mti).unwrap());
        let code: String = (0..6).map(|_| char::from(b'0' + (rng.next_u32() % 10) as u8)).collect();
        req.set_text(3, &code).unwrap();
        req.set_text(11, &format!("{:06}", rng.next_u32() % 1_000_000)).unwrap();
        if rng.next_u32() % 2 == 0 {
            req.set_text(4, "000000005000").unwrap();
        }
        if rng.next_u32() % 2 == 0 {
            req.set_text(41, "TERM0042").unwrap();
        }

        let resp = validate_balance_enquiry(&req, BALANCE);
        let code39 = resp.get_text(39).expect("39 always set");
        assert!(code39 == "00" || code39 == "12");
        assert_eq!(resp.mti().as_str(), "0210");
        assert_eq!(resp.get_text(54).is_some(), code39 == "00", "54 present iff approved");
        for (number, value) in req.fields() {
            if number == 39 || number == 54 {
                continue;
            }
            assert_eq!(resp.get(number), Some(value), "field {number} not echoed");
        }
    }
}

#[test]
fn routing_table_matches_registration_order() {
    let cases = [
        ("0200", Some("310000"), "balance-enquiry"),
        ("0200", Some("003000"), "purchase-echo"),
        ("0800", None, "network-echo"),
        ("0999", Some("310000"), "default"),
        ("0200", None, "default"),
        ("0200", Some("990000"), "default"),
    ];
    for (mti, code, expected) in cases {
        let mut msg = IsoMsg::new(Mti::new(mti).unwrap());
        if let Some(code) = code {
            msg.set_text(3, code).unwrap();
        }
        assert_eq!(route(&msg).name, expected, "mti {mti} f3 {code:?}");
    }
}

#[test]
fn pipelined_requests_come_back_in_order() {
    let sim = Simulator::start(quiet_config()).expect("simulator");
    let mut conn = connect(&sim, ChannelKind::Ascii);
    for i in 0..5 {
        conn.send(
            &request("0200", "310000", &format!("{:06}", i + 1)),
            WireDirection::Outgoing,
        )
        .unwrap();
    }
    for i in 0..5 {
        let resp = conn.receive(Duration::from_secs(2)).unwrap();
        assert_eq!(resp.get_text(11), Some(format!("{:06}", i + 1).as_str()));
        assert_eq!(resp.get_text(39), Some("00"));
    }
    sim.stop();
}

#[test]
fn garbage_frame_is_dropped_but_connection_survives() {
    let sim = Simulator::start(quiet_config()).expect("simulator");
    let endpoint = sim.endpoint(ChannelKind::Ascii).unwrap();
    let mut stream = TcpStream::connect(endpoint.addr()).expect("raw connect");

    // a well-framed payload that cannot unpack (MTI is not digits)
    stream.write_all(&frame_ascii(b"ZZZZ").unwrap()).unwrap();
    let packager = Packager::default_ascii();
    let valid = pack(&request("0200", "310000", "000007"), &packager).unwrap();
    stream.write_all(&frame_ascii(&valid).unwrap()).unwrap();

    stream
        .set_read_timeout(Some(Duration::from_secs(2)))
        .unwrap();
    let mut decoder = FrameDecoder::new(ChannelKind::Ascii, 0);
    let mut buf = [0u8; 4096];
    let frame = loop {
        if let Some(frame) = decoder.next_frame().unwrap() {
            break frame;
        }
        let n = stream.read(&mut buf).expect("simulator reply");
        assert_ne!(n, 0, "simulator closed the connection on a bad payload");
        decoder.push(&buf[..n]);
    };
    let resp = switchsim_core::unpack(&frame, &packager).unwrap();
    assert_eq!(resp.get_text(11), Some("000007"));
    assert_eq!(resp.get_text(39), Some("00"));
    sim.stop();
}

#[test]
fn occupied_port_fails_startup_and_leaves_nothing_bound() {
    let holder = TcpListener::bind(("127.0.0.1", 0)).unwrap();
    let taken = holder.local_addr().unwrap().port();
    let probe = free_port();

    let mut config = quiet_config();
    config.endpoints[0].port = probe; // binds first, must be released again
    config.endpoints[1].port = taken; // this bind fails
    match Simulator::start(config) {
        Err(SimError::PortInUse(port)) => assert_eq!(port, taken),
        other => panic!("expected PortInUse, got {other:?}", other = other.map(|_| ())),
    }
    assert!(
        TcpStream::connect(("127.0.0.1", probe)).is_err(),
        "first listener must be released after a failed startup"
    );
}

#[test]
fn duplicate_ports_in_config_are_rejected_as_port_in_use() {
    let port = free_port();
    let mut config = quiet_config();
    config.endpoints[0].port = port;
    config.endpoints[2].port = port;
    match Simulator::start(config) {
        Err(SimError::PortInUse(p)) => assert_eq!(p, port),
        other => panic!("expected PortInUse, got {other:?}", other = other.map(|_| ())),
    }
}

#[test]
fn stop_with_no_connections_returns_quickly() {
    let sim = Simulator::start(quiet_config()).expect("simulator");
    let begun = Instant::now();
    sim.stop();
    assert!(begun.elapsed() < Duration::from_secs(1));
}

#[test]
fn stop_drains_delayed_inflight_responses() {
    let mut config = quiet_config();
    config.response_delay_ms = 80;
    let sim = Simulator::start(config).expect("simulator");
    let mut conn = connect(&sim, ChannelKind::Nac);
    conn.send(&request("0200", "310000", "000009"), WireDirection::Outgoing)
        .unwrap();
    // give the simulator a moment to take the request before stopping
    std::thread::sleep(Duration::from_millis(20));
    sim.stop();
    let resp = conn.receive(Duration::from_secs(2)).expect("drained response");
    assert_eq!(resp.get_text(11), Some("000009"));
    assert_eq!(resp.get_text(39), Some("00"));
}

#[test]
fn xml_responses_are_marked_incoming() {
    let sim = Simulator::start(quiet_config()).expect("simulator");
    let endpoint = sim.endpoint(ChannelKind::Xml).unwrap();
    let mut stream = TcpStream::connect(endpoint.addr()).expect("raw connect");
    let req = request("0800", "990000", "000011");
    stream
        .write_all(&switchsim_core::frame_xml(&req, WireDirection::Outgoing))
        .unwrap();

    stream
        .set_read_timeout(Some(Duration::from_secs(2)))
        .unwrap();
    let mut decoder = FrameDecoder::new(ChannelKind::Xml, 0);
    let mut buf = [0u8; 4096];
    let frame = loop {
        if let Some(frame) = decoder.next_frame().unwrap() {
            break frame;
        }
        let n = stream.read(&mut buf).expect("simulator reply");
        assert_ne!(n, 0);
        decoder.push(&buf[..n]);
    };
    let (resp, direction) = parse_xml(&frame).unwrap();
    assert_eq!(direction, WireDirection::Incoming);
    assert_eq!(resp.mti().as_str(), "0810");
    assert_eq!(resp.get_text(39), Some("00"));
    sim.stop();
}

#[test]
fn identical_requests_get_identical_responses() {
    let sim = Simulator::start(quiet_config()).expect("simulator");
    let mut conn = connect(&sim, ChannelKind::Ascii);
    let req = request("0200", "310000", "000042");
    conn.send(&req, WireDirection::Outgoing).unwrap();
    let first = conn.receive(Duration::from_secs(2)).unwrap();
    conn.send(&req, WireDirection::Outgoing).unwrap();
    let second = conn.receive(Duration::from_secs(2)).unwrap();
    assert_eq!(first, second);
    sim.stop();
}
