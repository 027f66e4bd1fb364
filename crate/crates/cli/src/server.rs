//! TCP server streaming cage frames to viewers.
//!
//! One simulation thread owns the [`Simulation`]. Each client gets a reader
//! thread, which forwards decoded messages to the simulation thread, and a
//! writer thread fed by a bounded frame queue plus an unbounded control
//! queue. Frames that do not fit a slow client's queue are dropped.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender, SyncSender, TryRecvError, TrySendError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use splatdyn::pipeline::Simulation;
use splatdyn::protocol::{encode, Message, ProtocolError, StreamDecoder, PROTOCOL_VERSION};
use splatdyn::script::ParamField;
use splatdyn::sim::SimError;
use splatdyn::{Error, Vec3};

#[derive(Debug, Clone)]
pub struct ServerOptions {
    /// Sleep between frames to hold the script's frame rate.
    pub realtime: bool,
    /// Stop after this many frames.
    pub max_frames: Option<u64>,
    /// Frames buffered per client before new ones are dropped.
    pub queue: usize,
}

impl Default for ServerOptions {
    fn default() -> Self {
        Self {
            realtime: true,
            max_frames: None,
            queue: 4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ServerStats {
    pub frames: u64,
    pub dropped: u64,
    pub clients: u64,
    /// Attachments still held when the server stopped.
    pub attachments: usize,
}

type Bytes = Arc<Vec<u8>>;

enum Command {
    Join {
        id: u64,
        frames: SyncSender<Bytes>,
        control: Sender<Bytes>,
    },
    Leave {
        id: u64,
    },
    Message {
        id: u64,
        message: Message,
    },
}

struct Client {
    frames: SyncSender<Bytes>,
    control: Sender<Bytes>,
    grab: Option<u32>,
}

pub struct ServerHandle {
    pub addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    sim: JoinHandle<Result<ServerStats, Error>>,
    accept: JoinHandle<()>,
}

impl ServerHandle {
    /// Stops the server and waits for the simulation thread.
    pub fn stop(self) -> Result<ServerStats, Error> {
        self.shutdown.store(true, Ordering::SeqCst);
        self.join()
    }

    /// Waits for the simulation thread to finish on its own.
    pub fn join(self) -> Result<ServerStats, Error> {
        let r = self.sim.join().expect("simulation thread panicked");
        self.shutdown.store(true, Ordering::SeqCst);
        let _ = self.accept.join();
        r
    }
}

fn bytes(m: &Message) -> Bytes {
    Arc::new(encode(m))
}

fn error(text: impl Into<String>) -> Bytes {
    bytes(&Message::Error(text.into()))
}

/// Starts serving `sim` on `listener`.
pub fn spawn(listener: TcpListener, sim: Simulation, options: ServerOptions) -> io::Result<ServerHandle> {
    let addr = listener.local_addr()?;
    listener.set_nonblocking(true)?;
    let shutdown = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::channel();
    let scene_init = bytes(&sim.scene.scene_init());
    let queue = options.queue.max(1);

    let accept = {
        let shutdown = shutdown.clone();
        thread::spawn(move || accept_loop(listener, tx, scene_init, queue, shutdown))
    };
    let sim = {
        let shutdown = shutdown.clone();
        thread::spawn(move || sim_loop(sim, rx, options, shutdown))
    };
    Ok(ServerHandle {
        addr,
        shutdown,
        sim,
        accept,
    })
}

fn accept_loop(listener: TcpListener, tx: Sender<Command>, scene_init: Bytes, queue: usize, shutdown: Arc<AtomicBool>) {
    let next_id = AtomicU64::new(0);
    while !shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let id = next_id.fetch_add(1, Ordering::SeqCst);
                log::info!("client {id} connected from {peer}");
                let (tx, scene_init, shutdown) = (tx.clone(), scene_init.clone(), shutdown.clone());
                thread::spawn(move || {
                    if let Err(e) = serve_client(id, stream, tx, scene_init, queue, shutdown) {
                        log::info!("client {id}: {e}");
                    }
                });
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(e) => {
                log::warn!("accept: {e}");
                thread::sleep(Duration::from_millis(50));
            }
        }
    }
}

/// Reads until one complete message is decoded.
fn read_message(
    stream: &mut TcpStream,
    dec: &mut StreamDecoder,
    shutdown: &AtomicBool,
) -> io::Result<Option<Result<Message, ProtocolError>>> {
    let mut buf = [0u8; 64 * 1024];
    loop {
        if let Some(m) = dec.next_message() {
            return Ok(Some(m));
        }
        if shutdown.load(Ordering::SeqCst) {
            return Ok(None);
        }
        match stream.read(&mut buf) {
            Ok(0) => return Ok(None),
            Ok(n) => dec.feed(&buf[..n]),
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(e) => return Err(e),
        }
    }
}

fn serve_client(
    id: u64,
    mut stream: TcpStream,
    tx: Sender<Command>,
    scene_init: Bytes,
    queue: usize,
    shutdown: Arc<AtomicBool>,
) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(Duration::from_millis(50)))?;
    stream.set_write_timeout(Some(Duration::from_secs(10)))?;
    let mut dec = StreamDecoder::default();
    match read_message(&mut stream, &mut dec, &shutdown)? {
        Some(Ok(Message::Hello { version })) if version == PROTOCOL_VERSION => {}
        Some(Ok(Message::Hello { version })) => {
            stream.write_all(&error(format!(
                "version mismatch: server {PROTOCOL_VERSION}, client {version}"
            )))?;
            return Ok(());
        }
        Some(Ok(other)) => {
            stream.write_all(&error(format!("expected HELLO, got type {}", other.type_code())))?;
            return Ok(());
        }
        Some(Err(e)) => {
            stream.write_all(&error(e.to_string()))?;
            return Ok(());
        }
        None => return Ok(()),
    }

    let (frames_tx, frames_rx) = mpsc::sync_channel(queue);
    let (control_tx, control_rx) = mpsc::channel();
    let writer = {
        let stream = stream.try_clone()?;
        let shutdown = shutdown.clone();
        let hello = bytes(&Message::Hello {
            version: PROTOCOL_VERSION,
        });
        thread::spawn(move || write_loop(stream, [hello, scene_init], frames_rx, control_rx, shutdown))
    };
    let _ = tx.send(Command::Join {
        id,
        frames: frames_tx,
        control: control_tx.clone(),
    });

    let result = loop {
        match read_message(&mut stream, &mut dec, &shutdown) {
            Ok(Some(Ok(message))) => {
                if tx.send(Command::Message { id, message }).is_err() {
                    break Ok(());
                }
            }
            Ok(Some(Err(e))) => {
                // The decoder has skipped the bad frame, unless framing is lost.
                let _ = control_tx.send(error(e.to_string()));
                if e.skip_len().is_none() {
                    break Err(io::Error::new(io::ErrorKind::InvalidData, e));
                }
            }
            Ok(None) => break Ok(()),
            Err(e) => break Err(e),
        }
    };
    let _ = tx.send(Command::Leave { id });
    drop(control_tx);
    let _ = writer.join();
    log::info!("client {id} disconnected");
    result
}

fn write_loop(
    mut stream: TcpStream,
    first: [Bytes; 2],
    frames: Receiver<Bytes>,
    control: Receiver<Bytes>,
    shutdown: Arc<AtomicBool>,
) {
    for b in first {
        if stream.write_all(&b).is_err() {
            return;
        }
    }
    loop {
        loop {
            match control.try_recv() {
                Ok(b) => {
                    if stream.write_all(&b).is_err() {
                        return;
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return,
            }
        }
        if shutdown.load(Ordering::SeqCst) {
            return;
        }
        match frames.recv_timeout(Duration::from_millis(10)) {
            Ok(b) => {
                if stream.write_all(&b).is_err() {
                    return;
                }
            }
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => {
                // Flush remaining control messages, then stop.
                while let Ok(b) = control.try_recv() {
                    let _ = stream.write_all(&b);
                }
                return;
            }
        }
    }
}

fn v3(p: [f32; 3]) -> Vec3 {
    Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64)
}

fn handle(sim: &mut Simulation, clients: &mut BTreeMap<u64, Client>, cmd: Command, stats: &mut ServerStats) {
    match cmd {
        Command::Join { id, frames, control } => {
            stats.clients += 1;
            clients.insert(
                id,
                Client {
                    frames,
                    control,
                    grab: None,
                },
            );
        }
        Command::Leave { id } => {
            if let Some(c) = clients.remove(&id) {
                if let Some(h) = c.grab {
                    let _ = sim.release(h);
                }
            }
        }
        Command::Message { id, message } => {
            let Some(client) = clients.get_mut(&id) else {
                return;
            };
            let reply = match message {
                Message::Grab {
                    object,
                    point,
                    radius,
                } => {
                    if let Some(h) = client.grab.take() {
                        let _ = sim.release(h);
                    }
                    match sim.grab(object as usize, v3(point), radius as f64) {
                        Ok(h) => {
                            client.grab = Some(h);
                            None
                        }
                        Err(Error::Sim(SimError::EmptyGrab { .. })) => Some("empty grab".to_string()),
                        Err(e) => Some(e.to_string()),
                    }
                }
                Message::Drag { target } => match client.grab {
                    Some(h) => sim.drag(h, v3(target)).err().map(|e| e.to_string()),
                    None => Some("drag without grab".into()),
                },
                Message::Release => {
                    if let Some(h) = client.grab.take() {
                        let _ = sim.release(h);
                    }
                    None
                }
                Message::SetParam { object, field, value } => match ParamField::from_code(field) {
                    Some(f) => sim
                        .set_param(object as usize, f, value as f64)
                        .err()
                        .map(|e| e.to_string()),
                    None => Some(format!("unknown parameter field {field}")),
                },
                m @ Message::Light { .. } => {
                    // Lighting is applied by viewers; share it with all of them.
                    let b = bytes(&m);
                    for c in clients.values() {
                        let _ = c.control.send(b.clone());
                    }
                    None
                }
                other => Some(format!("unexpected message type {}", other.type_code())),
            };
            if let (Some(text), Some(c)) = (reply, clients.get(&id)) {
                let _ = c.control.send(error(text));
            }
        }
    }
}

fn sim_loop(
    mut sim: Simulation,
    rx: Receiver<Command>,
    options: ServerOptions,
    shutdown: Arc<AtomicBool>,
) -> Result<ServerStats, Error> {
    let mut clients: BTreeMap<u64, Client> = BTreeMap::new();
    let mut stats = ServerStats::default();
    let per_frame = sim.sim.substeps_per_frame();
    let frame_time = Duration::from_secs_f64(1.0 / sim.sim.fps);
    let mut deadline = Instant::now();
    while !shutdown.load(Ordering::SeqCst) && options.max_frames.is_none_or(|m| stats.frames < m) {
        for _ in 0..per_frame {
            loop {
                match rx.try_recv() {
                    Ok(cmd) => handle(&mut sim, &mut clients, cmd, &mut stats),
                    Err(TryRecvError::Empty) => break,
                    Err(TryRecvError::Disconnected) => {
                        shutdown.store(true, Ordering::SeqCst);
                        break;
                    }
                }
            }
            if let Err(e) = sim.step(1) {
                let msg = error(format!("simulation stopped: {e}"));
                for c in clients.values() {
                    let _ = c.control.send(msg.clone());
                }
                shutdown.store(true, Ordering::SeqCst);
                return Err(e);
            }
        }
        let frame = bytes(&Message::Frame {
            id: stats.frames,
            positions: sim.frame_positions(),
        });
        stats.frames += 1;
        clients.retain(|_, c| match c.frames.try_send(frame.clone()) {
            Ok(()) => true,
            Err(TrySendError::Full(_)) => {
                stats.dropped += 1;
                true
            }
            Err(TrySendError::Disconnected(_)) => false,
        });
        if options.realtime {
            deadline += frame_time;
            let now = Instant::now();
            if deadline > now {
                thread::sleep(deadline - now);
            } else {
                deadline = now;
            }
        }
    }
    // Let pending commands (such as disconnects) settle.
    while let Ok(cmd) = rx.try_recv() {
        handle(&mut sim, &mut clients, cmd, &mut stats);
    }
    shutdown.store(true, Ordering::SeqCst);
    stats.attachments = sim.state.attachments.len();
    Ok(stats)
}
