use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use crate::kv::KvConfig;
use crate::plant::{EpisodeOutcome, PlantScenario};
use crate::sigproc::SignalTrace;
use crate::trainer::{EnvError, Environment};

use super::protocol::{Request, RequestKind, Response, ResponseBody};

struct Connection {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

/// [`Environment`] backed by a protocol server.
///
/// Every episode is preceded by a full `reset`, so a dropped connection can
/// be replaced transparently on the next call.
pub struct RemoteEnv {
    addr: String,
    timeout: Duration,
    conn: Option<Connection>,
    next_seq: u64,
}

impl RemoteEnv {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

    /// Connects immediately so an unreachable server is reported up front.
    pub fn connect(addr: &str) -> Result<Self, EnvError> {
        Self::connect_with_timeout(addr, Self::DEFAULT_TIMEOUT)
    }

    pub fn connect_with_timeout(addr: &str, timeout: Duration) -> Result<Self, EnvError> {
        let mut env = Self {
            addr: addr.to_string(),
            timeout,
            conn: None,
            next_seq: 1,
        };
        env.ensure_connected()?;
        Ok(env)
    }

    pub fn addr(&self) -> &str {
        &self.addr
    }

    fn ensure_connected(&mut self) -> Result<&mut Connection, EnvError> {
        if self.conn.is_none() {
            let err = |e: std::io::Error| EnvError::Connection(format!("{}: {e}", self.addr));
            let sock = self
                .addr
                .to_socket_addrs()
                .map_err(err)?
                .next()
                .ok_or_else(|| EnvError::Connection(format!("{}: no address", self.addr)))?;
            let stream = TcpStream::connect_timeout(&sock, self.timeout).map_err(err)?;
            stream.set_read_timeout(Some(self.timeout)).map_err(err)?;
            stream.set_write_timeout(Some(self.timeout)).map_err(err)?;
            stream.set_nodelay(true).map_err(err)?;
            let reader = BufReader::new(stream.try_clone().map_err(err)?);
            self.conn = Some(Connection {
                reader,
                writer: BufWriter::new(stream),
            });
        }
        Ok(self.conn.as_mut().unwrap())
    }

    /// Sends one request and waits for its response. Any I/O failure drops
    /// the connection.
    pub fn request(&mut self, kind: RequestKind) -> Result<Response, EnvError> {
        let seq = self.next_seq;
        self.next_seq += 1;
        let line = Request { seq, kind }.to_line();
        let result = self.exchange(&line);
        if let Err(EnvError::Connection(_)) = &result {
            self.conn = None;
        }
        let resp = result?;
        if resp.seq != seq {
            self.conn = None;
            return Err(EnvError::Protocol(format!(
                "response id {} does not match request {seq}",
                resp.seq
            )));
        }
        Ok(resp)
    }

    fn exchange(&mut self, line: &str) -> Result<Response, EnvError> {
        let addr = self.addr.clone();
        let io = move |e: std::io::Error| EnvError::Connection(format!("{addr}: {e}"));
        let conn = self.ensure_connected()?;
        conn.writer.write_all(line.as_bytes()).map_err(&io)?;
        conn.writer.write_all(b"\n").map_err(&io)?;
        conn.writer.flush().map_err(&io)?;
        let mut reply = String::new();
        if conn.reader.read_line(&mut reply).map_err(&io)? == 0 {
            return Err(EnvError::Connection(format!("{}: connection closed", self.addr)));
        }
        Response::parse(&reply).map_err(|e| EnvError::Protocol(e.message))
    }

    fn expect_ok(resp: Response) -> Result<Vec<(String, String)>, EnvError> {
        match resp.body {
            ResponseBody::Ok(p) => Ok(p),
            ResponseBody::Error { code, message } => Err(EnvError::Remote { code, message }),
            ResponseBody::Trace(_) => Err(EnvError::Protocol("expected ok, got trace".into())),
        }
    }
}

impl Environment for RemoteEnv {
    fn run_episode(
        &mut self,
        scenario: &PlantScenario,
        kp: f64,
        seed: u64,
    ) -> Result<EpisodeOutcome, EnvError> {
        let mut overrides: Vec<(String, String)> = scenario
            .entries()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        overrides.push(("seed".into(), seed.to_string()));
        Self::expect_ok(self.request(RequestKind::Reset { overrides })?)?;
        match self.request(RequestKind::RunEpisode { kp })?.body {
            ResponseBody::Trace(t) => {
                let trace = SignalTrace::new(t.samples, t.rate, t.t0)
                    .map_err(|e| EnvError::Protocol(format!("bad trace: {e}")))?;
                Ok(EpisodeOutcome {
                    trace,
                    diverged_at: t.diverged_at,
                })
            }
            ResponseBody::Error { code, message } => Err(EnvError::Remote { code, message }),
            ResponseBody::Ok(_) => Err(EnvError::Protocol("expected trace, got ok".into())),
        }
    }
}
