//! Client side: one persistent connection per server, queried concurrently.

use std::io::BufReader;
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use ipir_core::intermittent::Servers;
use ipir_core::pir::{PirAnswer, PirQuery};
use serde::{Deserialize, Serialize};

use crate::error::{NetError, NetResult};
use crate::frame::{read_frame, write_frame, HEADER};
use crate::wire::{answer_from_wire, WireMessage, PROTO_VERSION};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

struct Conn {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

/// Traffic counters. `answer_bits` counts payload bits only; the byte
/// counters include frame headers and JSON.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireStats {
    pub round_trips: u64,
    pub answer_bits: u64,
    pub bytes_sent: u64,
    pub bytes_received: u64,
}

#[derive(Default)]
struct Counters {
    round_trips: AtomicU64,
    answer_bits: AtomicU64,
    bytes_sent: AtomicU64,
    bytes_received: AtomicU64,
}

pub struct RemoteServers {
    endpoints: Vec<String>,
    timeout: Duration,
    conns: Vec<Mutex<Option<Conn>>>,
    params: (usize, usize),
    session: AtomicU64,
    counters: Counters,
}

impl RemoteServers {
    /// Connects to every endpoint and checks that all replicas report the
    /// same K and L.
    pub fn connect(endpoints: &[String], timeout: Duration) -> NetResult<Self> {
        if endpoints.is_empty() {
            return Err(NetError::Protocol { endpoint: String::new(), detail: "no endpoints".into() });
        }
        let mut conns = Vec::with_capacity(endpoints.len());
        let mut params = None;
        for ep in endpoints {
            let (conn, p) = open(ep, timeout)?;
            match params {
                None => params = Some(p),
                Some(q) if q != p => {
                    return Err(NetError::Protocol {
                        endpoint: ep.clone(),
                        detail: format!(
                            "store has K = {}, L = {} but {} has K = {}, L = {}",
                            p.0, p.1, endpoints[0], q.0, q.1
                        ),
                    })
                }
                Some(_) => {}
            }
            conns.push(Mutex::new(Some(conn)));
        }
        Ok(RemoteServers {
            endpoints: endpoints.to_vec(),
            timeout,
            conns,
            params: params.expect("at least one endpoint"),
            session: AtomicU64::new(0),
            counters: Counters::default(),
        })
    }

    /// `(K, L)` reported by the servers.
    pub fn params(&self) -> (usize, usize) {
        self.params
    }

    pub fn endpoints(&self) -> &[String] {
        &self.endpoints
    }

    pub fn stats(&self) -> WireStats {
        let c = &self.counters;
        WireStats {
            round_trips: c.round_trips.load(Ordering::Relaxed),
            answer_bits: c.answer_bits.load(Ordering::Relaxed),
            bytes_sent: c.bytes_sent.load(Ordering::Relaxed),
            bytes_received: c.bytes_received.load(Ordering::Relaxed),
        }
    }

    pub fn fetch_all(&self, queries: &[PirQuery]) -> NetResult<Vec<PirAnswer>> {
        if queries.len() != self.endpoints.len() {
            return Err(NetError::Protocol {
                endpoint: String::new(),
                detail: format!("{} queries for {} servers", queries.len(), self.endpoints.len()),
            });
        }
        let session = format!("{:016x}", self.session.fetch_add(1, Ordering::Relaxed));
        thread::scope(|scope| {
            let handles: Vec<_> = queries.iter().map(|q| scope.spawn(|| self.fetch_one(q, &session))).collect();
            handles.into_iter().map(|h| h.join().expect("fetch thread panicked")).collect()
        })
    }

    fn fetch_one(&self, query: &PirQuery, session: &str) -> NetResult<PirAnswer> {
        let i = query.server;
        let endpoint = self.endpoints.get(i).ok_or_else(|| NetError::Protocol {
            endpoint: String::new(),
            detail: format!("no endpoint for server {}", i + 1),
        })?;
        let mut slot = self.conns[i].lock().unwrap();
        if slot.is_none() {
            *slot = Some(open(endpoint, self.timeout)?.0);
        }
        let conn = slot.as_mut().expect("connection just opened");
        let result = self.exchange(conn, endpoint, query, session);
        if result.is_err() {
            // the stream may hold a half-read reply
            *slot = None;
        }
        result
    }

    fn exchange(&self, conn: &mut Conn, endpoint: &str, query: &PirQuery, session: &str) -> NetResult<PirAnswer> {
        let sent = WireMessage::query(session, query).to_bytes();
        write_frame(&mut conn.writer, &sent).map_err(|e| on_io(e, endpoint))?;
        let got = read_frame(&mut conn.reader)
            .map_err(|e| on_io(e, endpoint))?
            .ok_or_else(|| NetError::Protocol { endpoint: endpoint.into(), detail: "connection closed".into() })?;
        let c = &self.counters;
        c.round_trips.fetch_add(1, Ordering::Relaxed);
        c.bytes_sent.fetch_add((HEADER + sent.len()) as u64, Ordering::Relaxed);
        c.bytes_received.fetch_add((HEADER + got.len()) as u64, Ordering::Relaxed);
        match WireMessage::from_bytes(&got)? {
            WireMessage::Answer { session: echoed, bits } => {
                if echoed != session {
                    return Err(NetError::Protocol {
                        endpoint: endpoint.into(),
                        detail: format!("session {echoed} does not match {session}"),
                    });
                }
                if bits.len() != query.combos.len() {
                    return Err(NetError::LengthMismatch {
                        endpoint: endpoint.into(),
                        expected: query.combos.len(),
                        got: bits.len(),
                    });
                }
                c.answer_bits.fetch_add(bits.len() as u64, Ordering::Relaxed);
                answer_from_wire(query.server, &bits)
            }
            WireMessage::Error { code, detail } => Err(NetError::Remote { endpoint: endpoint.into(), code, detail }),
            other => {
                Err(NetError::Protocol { endpoint: endpoint.into(), detail: format!("unexpected reply {other:?}") })
            }
        }
    }
}

impl Servers for RemoteServers {
    fn count(&self) -> usize {
        self.endpoints.len()
    }

    fn fetch(&self, queries: &[PirQuery]) -> ipir_core::Result<Vec<PirAnswer>> {
        Ok(self.fetch_all(queries)?)
    }
}

fn on_io(e: NetError, endpoint: &str) -> NetError {
    match e {
        NetError::Io(io) if matches!(io.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {
            NetError::Timeout(endpoint.into())
        }
        NetError::Io(io) => NetError::Protocol { endpoint: endpoint.into(), detail: io.to_string() },
        other => other,
    }
}

fn open(endpoint: &str, timeout: Duration) -> NetResult<(Conn, (usize, usize))> {
    let mut last = None;
    let mut stream = None;
    for addr in endpoint.to_socket_addrs().map_err(|e| on_io(e.into(), endpoint))? {
        match TcpStream::connect_timeout(&addr, timeout) {
            Ok(s) => {
                stream = Some(s);
                break;
            }
            Err(e) => last = Some(e),
        }
    }
    let stream = match (stream, last) {
        (Some(s), _) => s,
        (None, Some(e)) => return Err(on_io(e.into(), endpoint)),
        (None, None) => {
            return Err(NetError::Protocol { endpoint: endpoint.into(), detail: "address did not resolve".into() })
        }
    };
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(timeout))?;
    stream.set_write_timeout(Some(timeout))?;
    let mut conn = Conn { reader: BufReader::new(stream.try_clone()?), writer: stream };
    let hello = WireMessage::Hello { proto_version: PROTO_VERSION, k: 0, l: 0 };
    write_frame(&mut conn.writer, &hello.to_bytes()).map_err(|e| on_io(e, endpoint))?;
    let reply = read_frame(&mut conn.reader)
        .map_err(|e| on_io(e, endpoint))?
        .ok_or_else(|| NetError::Protocol { endpoint: endpoint.into(), detail: "closed during hello".into() })?;
    match WireMessage::from_bytes(&reply)? {
        WireMessage::Hello { proto_version, k, l } if proto_version == PROTO_VERSION => Ok((conn, (k, l))),
        other => Err(NetError::Protocol { endpoint: endpoint.into(), detail: format!("bad hello reply {other:?}") }),
    }
}
