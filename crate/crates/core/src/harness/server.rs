use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::kv::{FieldError, KvConfig};
use crate::plant::{self, apply_gain, measure, GainAction, PlantError, PlantScenario, PlantState};

use super::protocol::{fmt_f64, Request, RequestKind, Response, ResponseBody, TracePayload};

/// Server-wide defaults every session starts from.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerConfig {
    pub scenario: PlantScenario,
    pub seed: u64,
    pub kp_min: f64,
    pub kp_max: f64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            scenario: PlantScenario::default(),
            seed: 7,
            kp_min: 0.5,
            kp_max: 4.0,
        }
    }
}

/// One connection's plant. Errors never end the session.
#[derive(Debug)]
pub struct Session {
    config: ServerConfig,
    scenario: PlantScenario,
    seed: u64,
    state: PlantState,
    rng: ChaCha8Rng,
    diverged: bool,
    last_seq: Option<u64>,
}

impl Session {
    pub fn new(config: ServerConfig) -> Self {
        let scenario = config.scenario.clone();
        let seed = config.seed;
        Self {
            state: PlantState::initial(&scenario),
            rng: ChaCha8Rng::seed_from_u64(seed),
            diverged: false,
            last_seq: None,
            config,
            scenario,
            seed,
        }
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    /// Handles one request line and returns the response line.
    pub fn handle_line(&mut self, line: &str) -> String {
        let resp = match Request::parse(line) {
            Err(e) => Response::error(e.seq.unwrap_or(0), "parse", e.message),
            Ok(req) => match self.last_seq {
                Some(last) if req.seq <= last => Response::error(
                    req.seq,
                    "sequence",
                    format!("sequence id {} does not follow {last}", req.seq),
                ),
                _ => {
                    self.last_seq = Some(req.seq);
                    self.handle(req)
                }
            },
        };
        resp.to_line()
    }

    fn check_gain(&self, kp: f64) -> Result<(), String> {
        if kp.is_finite() && kp >= self.config.kp_min && kp <= self.config.kp_max {
            Ok(())
        } else {
            Err(format!(
                "kp = {kp} outside [{}, {}]",
                self.config.kp_min, self.config.kp_max
            ))
        }
    }

    fn handle(&mut self, req: Request) -> Response {
        let seq = req.seq;
        let t_now = |s: &PlantState| vec![("t".to_string(), fmt_f64(s.t))];
        match req.kind {
            RequestKind::Reset { overrides } => {
                let mut scenario = self.config.scenario.clone();
                let mut seed = self.config.seed;
                for (k, v) in &overrides {
                    let res = if k == "seed" {
                        v.parse().map(|s| seed = s).map_err(|_| FieldError::Invalid(format!("`{v}`")))
                    } else {
                        scenario.set_field(k, v)
                    };
                    match res {
                        Ok(()) => {}
                        Err(FieldError::Unknown) => {
                            return Response::error(seq, "parse", format!("unknown reset key `{k}`"))
                        }
                        Err(FieldError::Invalid(m)) => {
                            return Response::error(seq, "parse", format!("bad value for `{k}`: {m}"))
                        }
                    }
                }
                if let Err(e) = scenario.validate_timeline() {
                    return Response::error(seq, "invalid", e.to_string());
                }
                self.state = PlantState::initial(&scenario);
                self.rng = ChaCha8Rng::seed_from_u64(seed);
                self.scenario = scenario;
                self.seed = seed;
                self.diverged = false;
                Response::ok(seq, t_now(&self.state))
            }
            RequestKind::SetGain { kp } => {
                if let Err(m) = self.check_gain(kp) {
                    return Response::error(seq, "bounds", m);
                }
                self.state = apply_gain(&self.state, GainAction::new(kp));
                Response::ok(seq, t_now(&self.state))
            }
            RequestKind::Step { n_steps } => {
                if self.diverged {
                    return Response::error(seq, "diverged", "plant diverged; reset required");
                }
                let dyn_ = plant::ModeDynamics::new(&self.scenario, self.state.active_kp, self.scenario.sim_dt);
                for _ in 0..n_steps {
                    match plant::step_with(&dyn_, &self.state, &self.scenario, self.scenario.sim_dt, &mut self.rng) {
                        Ok(next) => self.state = next,
                        Err(PlantError::Diverged { t }) => {
                            self.diverged = true;
                            return Response::error(seq, "diverged", format!("plant diverged after t = {t}"));
                        }
                        Err(e) => return Response::error(seq, "invalid", e.to_string()),
                    }
                }
                Response::ok(seq, t_now(&self.state))
            }
            RequestKind::Measure => {
                let v = measure(&self.state, &self.scenario, &mut self.rng);
                Response {
                    seq,
                    body: ResponseBody::Trace(TracePayload {
                        rate: self.scenario.sample_rate(),
                        t0: self.state.t,
                        diverged_at: None,
                        samples: vec![v],
                    }),
                }
            }
            RequestKind::RunEpisode { kp } => {
                if let Err(m) = self.check_gain(kp) {
                    return Response::error(seq, "bounds", m);
                }
                match plant::run_episode(&self.scenario, GainAction::new(kp), self.seed) {
                    Ok(out) => Response {
                        seq,
                        body: ResponseBody::Trace(TracePayload {
                            rate: out.trace.sample_rate(),
                            t0: out.trace.t0(),
                            diverged_at: out.diverged_at,
                            samples: out.trace.into_samples(),
                        }),
                    },
                    Err(e) => Response::error(seq, "invalid", e.to_string()),
                }
            }
        }
    }
}

fn serve_connection(stream: TcpStream, config: ServerConfig) -> std::io::Result<()> {
    let peer = stream.peer_addr().ok();
    log::debug!("session opened: {peer:?}");
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let mut session = Session::new(config);
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let reply = session.handle_line(&line);
        writer.write_all(reply.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    log::debug!("session closed: {peer:?}");
    Ok(())
}

/// Running server; dropping the handle leaves it running.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting connections; open sessions finish on their own.
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    /// Blocks until the accept loop ends.
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Binds `addr` and serves each connection on its own thread.
pub fn spawn_server(addr: impl ToSocketAddrs, config: ServerConfig) -> std::io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let thread = std::thread::spawn(move || {
        for conn in listener.incoming() {
            if flag.load(Ordering::SeqCst) {
                break;
            }
            match conn {
                Ok(stream) => {
                    let cfg = config.clone();
                    std::thread::spawn(move || {
                        if let Err(e) = serve_connection(stream, cfg) {
                            log::debug!("session ended with error: {e}");
                        }
                    });
                }
                Err(e) => log::warn!("accept failed: {e}"),
            }
        }
    });
    Ok(ServerHandle {
        addr: local,
        stop,
        thread: Some(thread),
    })
}
