//! One replicated database per listener. Connections are served on their
//! own threads and share the store read-only.

use std::io::BufReader;
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use ipir_core::pir::{pir_answer, PirQuery};
use ipir_core::MessageStore;

use crate::error::{NetError, NetResult};
use crate::frame::{read_frame, write_frame};
use crate::wire::{bits_to_wire, combos_from_wire, WireMessage, PROTO_VERSION};

pub struct Server {
    listener: TcpListener,
    store: Arc<MessageStore>,
}

impl Server {
    pub fn bind(store: MessageStore, addr: impl ToSocketAddrs) -> NetResult<Self> {
        Ok(Server { listener: TcpListener::bind(addr)?, store: Arc::new(store) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    /// Serves until the process exits.
    pub fn run(self) -> NetResult<()> {
        let stop = Arc::new(AtomicBool::new(false));
        accept_loop(self.listener, self.store, stop, Arc::default());
        Ok(())
    }

    pub fn spawn(self) -> ServerHandle {
        let addr = self.local_addr();
        let stop = Arc::new(AtomicBool::new(false));
        let open: Arc<Mutex<Vec<TcpStream>>> = Arc::default();
        let thread = {
            let (stop, open) = (stop.clone(), open.clone());
            thread::spawn(move || accept_loop(self.listener, self.store, stop, open))
        };
        ServerHandle { addr, stop, open, thread: Some(thread) }
    }
}

/// Binds and starts serving on a background thread.
pub fn serve(store: MessageStore, addr: impl ToSocketAddrs) -> NetResult<ServerHandle> {
    Ok(Server::bind(store, addr)?.spawn())
}

/// Stops the server when dropped.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    open: Arc<Mutex<Vec<TcpStream>>>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        let Some(thread) = self.thread.take() else { return };
        self.stop.store(true, Ordering::SeqCst);
        // wake the accept call
        let _ = TcpStream::connect(self.addr);
        let _ = thread.join();
        for s in self.open.lock().unwrap().drain(..) {
            let _ = s.shutdown(Shutdown::Both);
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_now();
    }
}

fn accept_loop(
    listener: TcpListener,
    store: Arc<MessageStore>,
    stop: Arc<AtomicBool>,
    open: Arc<Mutex<Vec<TcpStream>>>,
) {
    log::info!("serving K = {}, L = {} on {:?}", store.k(), store.length(), listener.local_addr());
    for stream in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        if let Ok(clone) = stream.try_clone() {
            open.lock().unwrap().push(clone);
        }
        let store = store.clone();
        thread::spawn(move || {
            let peer = stream.peer_addr().ok();
            if let Err(e) = handle(stream, &store) {
                log::debug!("connection {peer:?} ended: {e}");
            }
        });
    }
}

fn handle(stream: TcpStream, store: &MessageStore) -> NetResult<()> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = stream;
    loop {
        let bytes = match read_frame(&mut reader) {
            Ok(Some(b)) => b,
            Ok(None) => return Ok(()),
            Err(NetError::FrameTooLarge(n)) => {
                let reply = WireMessage::error("frame_too_large", format!("{n} bytes exceeds the limit"));
                write_frame(&mut writer, &reply.to_bytes())?;
                let _ = writer.shutdown(Shutdown::Both);
                return Err(NetError::FrameTooLarge(n));
            }
            Err(e) => return Err(e),
        };
        let reply = match WireMessage::from_bytes(&bytes).and_then(|m| respond(m, store)) {
            Ok(reply) => reply,
            Err(e) => {
                write_frame(&mut writer, &WireMessage::error("malformed", e.to_string()).to_bytes())?;
                let _ = writer.shutdown(Shutdown::Both);
                return Err(e);
            }
        };
        write_frame(&mut writer, &reply.to_bytes())?;
    }
}

fn respond(msg: WireMessage, store: &MessageStore) -> NetResult<WireMessage> {
    Ok(match msg {
        WireMessage::Hello { .. } => {
            WireMessage::Hello { proto_version: PROTO_VERSION, k: store.k(), l: store.length() }
        }
        WireMessage::Query { session, combos } => {
            let query = PirQuery { server: 0, combos: combos_from_wire(&combos)? };
            match pir_answer(&query, store) {
                Ok(a) => WireMessage::Answer { session, bits: bits_to_wire(&a.bits) },
                Err(ipir_core::Error::OutOfRange { message, bit }) => {
                    WireMessage::error("range", format!("message {} bit {bit} is outside the store", message + 1))
                }
                Err(e) => WireMessage::error("internal", e.to_string()),
            }
        }
        other => WireMessage::error("unexpected", format!("servers do not accept {other:?}")),
    })
}
