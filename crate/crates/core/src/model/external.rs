//! Line protocol for models that live in a child process.
//!
//! ```text
//! SIM <dim_a> <dim_e> a... e...                 ->  OK <T+1> <dt> y0 ... yT
//! REQ <dim_a> <dim_e> <dim_theta> a... e... th...  ->  OK <G> g1 ... gG
//! any request                                   ->  ERR <message>
//! ```
//!
//! Numbers are written with Rust's shortest round-trip exponent format.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use super::{check_len, ModelDims, SimulationModel};
use crate::error::{Error, Result};
use crate::summary::TimeSeries;

struct ChildProc {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Drop for ChildProc {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Adapter from a child process to [`SimulationModel`]. Each worker slot owns
/// one child, spawned on first use; requests on a slot are serialized.
pub struct ExternalModel {
    program: String,
    args: Vec<String>,
    dims: ModelDims,
    timeout: Duration,
    slots: Vec<Mutex<Option<ChildProc>>>,
}

impl ExternalModel {
    /// `command` is split on whitespace into program and arguments.
    pub fn new(command: &str, dims: ModelDims, timeout: Duration, workers: usize) -> Result<Self> {
        let mut parts = command.split_whitespace().map(str::to_owned);
        let program = parts
            .next()
            .ok_or_else(|| Error::invalid("external model command is empty"))?;
        Ok(Self::with_args(program, parts.collect(), dims, timeout, workers))
    }

    pub fn with_args(program: String, args: Vec<String>, dims: ModelDims, timeout: Duration, workers: usize) -> Self {
        ExternalModel {
            program,
            args,
            dims,
            timeout,
            slots: (0..workers.max(1)).map(|_| Mutex::new(None)).collect(),
        }
    }

    fn spawn(&self) -> Result<ChildProc> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Model(format!("cannot start `{}`: {e}", self.program)))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(ChildProc {
            child,
            stdin,
            lines: rx,
        })
    }

    fn request(&self, line: &str) -> Result<Vec<String>> {
        let idx = rayon::current_thread_index().unwrap_or(0) % self.slots.len();
        let mut slot = self.slots[idx].lock().unwrap_or_else(|p| p.into_inner());
        if slot.is_none() {
            *slot = Some(self.spawn()?);
        }
        let proc = slot.as_mut().expect("spawned");
        let reply = Self::exchange(proc, line, self.timeout);
        if reply.is_err() {
            // The child may be wedged or gone; start fresh next time.
            *slot = None;
        }
        let reply = reply?;
        let mut tokens = reply.split_whitespace();
        match tokens.next() {
            Some("OK") => Ok(tokens.map(str::to_owned).collect()),
            Some("ERR") => Err(Error::Model(format!(
                "model reported: {}",
                reply.trim_start().trim_start_matches("ERR").trim()
            ))),
            _ => Err(Error::Model(format!("malformed response line: {reply:?}"))),
        }
    }

    fn exchange(proc: &mut ChildProc, line: &str, timeout: Duration) -> Result<String> {
        writeln!(proc.stdin, "{line}")
            .and_then(|_| proc.stdin.flush())
            .map_err(|e| Error::Model(format!("write to model failed: {e}")))?;
        match proc.lines.recv_timeout(timeout) {
            Ok(Ok(reply)) => Ok(reply),
            Ok(Err(e)) => Err(Error::Model(format!("read from model failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(Error::Model(format!("model timed out after {timeout:?}"))),
            Err(RecvTimeoutError::Disconnected) => {
                let status = proc.child.wait().map(|s| s.to_string()).unwrap_or_else(|e| e.to_string());
                Err(Error::Model(format!("model exited ({status})")))
            }
        }
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ")
}

fn parse_f64(tok: &str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| Error::Model(format!("bad number in response: {tok:?}")))
}

fn parse_count(tok: Option<&String>) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::Model("response is missing a count".into()))?;
    tok.parse::<usize>()
        .map_err(|_| Error::Model(format!("bad count in response: {tok:?}")))
}

impl SimulationModel for ExternalModel {
    fn dims(&self) -> ModelDims {
        self.dims
    }

    fn simulate(&self, a: &[f64], e: &[f64]) -> Result<TimeSeries> {
        check_len("a", a, self.dims.a)?;
        check_len("e", e, self.dims.e)?;
        let toks = self.request(&format!("SIM {} {} {} {}", a.len(), e.len(), join(a), join(e)))?;
        let n = parse_count(toks.first())?;
        let dt = parse_f64(toks.get(1).map(String::as_str).unwrap_or(""))?;
        if toks.len() != n + 2 {
            return Err(Error::Model(format!(
                "SIM response announced {n} samples but carried {}",
                toks.len().saturating_sub(2)
            )));
        }
        let y = toks[2..].iter().map(|t| parse_f64(t)).collect::<Result<Vec<_>>>()?;
        TimeSeries::new(y, dt).map_err(|e| Error::Model(format!("model returned an invalid series: {e}")))
    }

    fn requirements(&self, a: &[f64], e: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
        check_len("a", a, self.dims.a)?;
        check_len("e", e, self.dims.e)?;
        check_len("theta", theta, self.dims.theta)?;
        let toks = self.request(&format!(
            "REQ {} {} {} {} {} {}",
            a.len(),
            e.len(),
            theta.len(),
            join(a),
            join(e),
            join(theta)
        ))?;
        let g = parse_count(toks.first())?;
        if toks.len() != g + 1 {
            return Err(Error::Model(format!(
                "REQ response announced {g} values but carried {}",
                toks.len() - 1
            )));
        }
        if g != self.dims.requirements {
            return Err(Error::Model(format!(
                "model returned {g} requirements, expected {}",
                self.dims.requirements
            )));
        }
        toks[1..].iter().map(|t| parse_f64(t)).collect()
    }
}

/// Answer protocol requests from `input` with `model` until end of input.
pub fn serve<M: SimulationModel + ?Sized>(
    model: &M,
    input: impl BufRead,
    mut output: impl Write,
) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match handle(model, &line) {
            Ok(r) => r,
            Err(e) => format!("ERR {}", e.to_string().replace('\n', " ")),
        };
        writeln!(output, "{reply}")?;
        output.flush()?;
    }
    Ok(())
}

fn handle<M: SimulationModel + ?Sized>(model: &M, line: &str) -> Result<String> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    let count = |i: usize| -> Result<usize> {
        toks.get(i)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::invalid(format!("bad dimension field {i}")))
    };
    let nums = |from: usize, len: usize| -> Result<Vec<f64>> {
        let slice = toks
            .get(from..from + len)
            .ok_or_else(|| Error::invalid("request too short"))?;
        slice
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| Error::invalid(format!("bad number {t:?}"))))
            .collect()
    };
    match toks.first().copied() {
        Some("SIM") => {
            let (da, de) = (count(1)?, count(2)?);
            if toks.len() != 3 + da + de {
                return Err(Error::invalid("SIM request length mismatch"));
            }
            let y = model.simulate(&nums(3, da)?, &nums(3 + da, de)?)?;
            Ok(format!("OK {} {:e} {}", y.len(), y.dt(), join(y.values())))
        }
        Some("REQ") => {
            let (da, de, dt) = (count(1)?, count(2)?, count(3)?);
            if toks.len() != 4 + da + de + dt {
                return Err(Error::invalid("REQ request length mismatch"));
            }
            let g = model.requirements(&nums(4, da)?, &nums(4 + da, de)?, &nums(4 + da + de, dt)?)?;
            Ok(format!("OK {} {}", g.len(), join(&g)))
        }
        other => Err(Error::invalid(format!("unknown request {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Oscillator;

    fn dims() -> ModelDims {
        ModelDims {
            a: 1,
            e: 1,
            theta: 1,
            requirements: 2,
        }
    }

    fn script(body: &str) -> ExternalModel {
        ExternalModel::with_args("sh".into(), vec!["-c".into(), body.into()], dims(), Duration::from_secs(5), 1)
    }

    #[test]
    fn echo_harness_series_passes_through() {
        let m = script("while read l; do echo 'OK 3 0.5 1 -2.5 3e-1'; done");
        let y = m.simulate(&[0.1], &[0.2]).unwrap();
        assert_eq!(y.values(), &[1.0, -2.5, 0.3]);
        assert_eq!(y.dt(), 0.5);
    }

    #[test]
    fn malformed_and_error_lines() {
        let m = script("while read l; do echo 'OK 4 0.5 1 2'; done");
        assert!(matches!(m.simulate(&[0.1], &[0.2]), Err(Error::Model(_))));
        let m = script("while read l; do echo 'garbage'; done");
        assert!(matches!(m.simulate(&[0.1], &[0.2]), Err(Error::Model(_))));
        let m = script("while read l; do echo 'ERR nope'; done");
        let err = m.requirements(&[0.1], &[0.2], &[0.3]).unwrap_err();
        assert!(err.to_string().contains("nope"));
    }

    #[test]
    fn exit_and_timeout_are_model_errors() {
        let m = script("exit 3");
        assert!(matches!(m.simulate(&[0.1], &[0.2]), Err(Error::Model(_))));
        let mut m = script("sleep 5");
        m.timeout = Duration::from_millis(200);
        assert!(matches!(m.simulate(&[0.1], &[0.2]), Err(Error::Model(_))));
    }

    #[test]
    fn missing_program() {
        let m = ExternalModel::new("/nonexistent/model-binary", dims(), Duration::from_secs(1), 1).unwrap();
        assert!(matches!(m.simulate(&[0.0], &[0.0]), Err(Error::Model(_))));
        assert!(ExternalModel::new("   ", dims(), Duration::from_secs(1), 1).is_err());
    }

    #[test]
    fn serve_round_trips_in_process() {
        let req = "SIM 2 4 2.5e-1 5e-1 1e0 1e0 1e0 1e0\nREQ 2 4 9 0.25 0.5 1 1 1 1 1.2 1 1.4 0.5 2 0.6 1 0.5 2.5\nBOGUS\n";
        let mut out = Vec::new();
        serve(&Oscillator, req.as_bytes(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        let toks: Vec<&str> = lines[0].split_whitespace().collect();
        assert_eq!(toks[0], "OK");
        assert_eq!(toks[1], "256");
        let direct = Oscillator.simulate(&[0.25, 0.5], &[1.0; 4]).unwrap();
        for (t, v) in toks[3..].iter().zip(direct.values()) {
            assert_eq!(t.parse::<f64>().unwrap(), *v);
        }
        assert!(lines[1].starts_with("OK 3 "));
        assert!(lines[2].starts_with("ERR "));
    }
}
