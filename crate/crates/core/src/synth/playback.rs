//! Exclusive audio output with start-signal synchronization.
//!
//! A buffer handed to [`AudioDevice::enqueue`] is held until its
//! [`StartSignal`] fires (speech onset), then submitted to the backend. One
//! worker thread owns the backend, so playbacks are serialized FIFO and never
//! interleave.

use super::{encode_wav, WaveBuffer};
use serde::Serialize;
use std::io::Write;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

pub const DEFAULT_EXPIRY: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DeviceError {
    #[error("audio device unavailable: {0}")]
    Unavailable(String),
    #[error("playback failed: {0}")]
    Playback(String),
    #[error("audio device closed")]
    Closed,
}

#[derive(Debug, Default)]
struct SignalState {
    armed: bool,
    fired_at: Option<Instant>,
    cancelled: bool,
}

/// One-shot speech-onset event.
///
/// Firing only has an effect once the signal is attached to a queued
/// playback; firing an unattached or already-fired signal is a no-op.
#[derive(Debug, Clone, Default)]
pub struct StartSignal {
    inner: Arc<(Mutex<SignalState>, Condvar)>,
}

enum Wait {
    Fired(Instant),
    Expired,
    Cancelled,
}

impl StartSignal {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns whether this call started a playback.
    pub fn fire(&self) -> bool {
        let (lock, cv) = &*self.inner;
        let mut st = lock.lock().unwrap();
        if st.armed && st.fired_at.is_none() && !st.cancelled {
            st.fired_at = Some(Instant::now());
            cv.notify_all();
            true
        } else {
            false
        }
    }

    pub fn is_fired(&self) -> bool {
        self.inner.0.lock().unwrap().fired_at.is_some()
    }

    pub fn is_armed(&self) -> bool {
        self.inner.0.lock().unwrap().armed
    }

    fn arm(&self) {
        self.inner.0.lock().unwrap().armed = true;
    }

    fn cancel(&self) {
        let (lock, cv) = &*self.inner;
        let mut st = lock.lock().unwrap();
        st.cancelled = true;
        st.armed = false;
        cv.notify_all();
    }

    fn wait_until(&self, deadline: Instant) -> Wait {
        let (lock, cv) = &*self.inner;
        let mut st = lock.lock().unwrap();
        loop {
            if let Some(at) = st.fired_at {
                return Wait::Fired(at);
            }
            if st.cancelled {
                return Wait::Cancelled;
            }
            let now = Instant::now();
            if now >= deadline {
                st.armed = false;
                return Wait::Expired;
            }
            st = cv.wait_timeout(st, deadline - now).unwrap().0;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BackendReport {
    pub underruns: u32,
    /// Timing is computed rather than observed on hardware.
    pub simulated: bool,
}

pub trait AudioBackend: Send {
    fn name(&self) -> &str;
    /// Plays the whole buffer, returning when the device is done with it.
    fn play(&mut self, buf: &WaveBuffer) -> Result<BackendReport, DeviceError>;
}

/// Everything a [`NullBackend`] was asked to play.
#[derive(Debug, Clone, Default)]
pub struct NullSink(Arc<Mutex<Vec<WaveBuffer>>>);

impl NullSink {
    pub fn played(&self) -> Vec<WaveBuffer> {
        self.0.lock().unwrap().clone()
    }

    pub fn count(&self) -> usize {
        self.0.lock().unwrap().len()
    }
}

/// In-memory device for headless runs and tests.
#[derive(Debug, Default)]
pub struct NullBackend {
    sink: NullSink,
    realtime: bool,
}

impl NullBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sleeps for the buffer's duration, like a real device would block.
    pub fn realtime() -> Self {
        NullBackend {
            realtime: true,
            ..Self::default()
        }
    }

    pub fn sink(&self) -> NullSink {
        self.sink.clone()
    }
}

impl AudioBackend for NullBackend {
    fn name(&self) -> &str {
        "null"
    }

    fn play(&mut self, buf: &WaveBuffer) -> Result<BackendReport, DeviceError> {
        self.sink.0.lock().unwrap().push(buf.clone());
        if self.realtime {
            thread::sleep(Duration::from_secs_f64(buf.duration_s()));
        }
        Ok(BackendReport {
            underruns: 0,
            simulated: true,
        })
    }
}

/// Pipes each buffer as a WAV file to an external player's stdin, e.g.
/// `aplay -q -` or `paplay`.
#[derive(Debug)]
pub struct CommandBackend {
    program: String,
    args: Vec<String>,
    label: String,
}

impl CommandBackend {
    pub fn new(command_line: &str) -> Result<Self, DeviceError> {
        let mut parts = command_line.split_whitespace().map(str::to_string);
        let program = parts
            .next()
            .ok_or_else(|| DeviceError::Unavailable("empty player command".into()))?;
        Ok(CommandBackend {
            label: format!("command:{command_line}"),
            program,
            args: parts.collect(),
        })
    }
}

impl AudioBackend for CommandBackend {
    fn name(&self) -> &str {
        &self.label
    }

    fn play(&mut self, buf: &WaveBuffer) -> Result<BackendReport, DeviceError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| DeviceError::Unavailable(format!("{}: {e}", self.program)))?;
        let wav = encode_wav(buf);
        let write = child.stdin.take().expect("piped stdin").write_all(&wav);
        let status = child.wait().map_err(|e| DeviceError::Playback(e.to_string()))?;
        write.map_err(|e| DeviceError::Playback(format!("writing to {}: {e}", self.program)))?;
        if !status.success() {
            return Err(DeviceError::Playback(format!("{} exited with {status}", self.program)));
        }
        Ok(BackendReport::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlaybackOutcome {
    Played,
    /// The start signal never fired before the expiry; nothing was output.
    Expired,
    /// The device shut down while waiting for the start signal.
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaybackReport {
    pub outcome: PlaybackOutcome,
    pub backend: String,
    pub samples: usize,
    pub sample_rate: u32,
    /// Time from the start signal firing to submission of the first sample.
    pub start_offset: Option<Duration>,
    pub duration_s: f64,
    pub underruns: u32,
    pub simulated: bool,
}

struct Job {
    buf: WaveBuffer,
    signal: StartSignal,
    expiry: Duration,
    reply: mpsc::Sender<Result<PlaybackReport, DeviceError>>,
}

/// Pending playback. Dropping it does not cancel the playback.
#[derive(Debug)]
pub struct PlaybackHandle {
    signal: StartSignal,
    rx: mpsc::Receiver<Result<PlaybackReport, DeviceError>>,
}

impl PlaybackHandle {
    pub fn signal(&self) -> &StartSignal {
        &self.signal
    }

    /// Blocks until the playback finishes, expires or fails.
    pub fn wait(self) -> Result<PlaybackReport, DeviceError> {
        self.rx.recv().unwrap_or(Err(DeviceError::Closed))
    }

    pub fn wait_timeout(&self, timeout: Duration) -> Option<Result<PlaybackReport, DeviceError>> {
        match self.rx.recv_timeout(timeout) {
            Ok(r) => Some(r),
            Err(mpsc::RecvTimeoutError::Timeout) => None,
            Err(mpsc::RecvTimeoutError::Disconnected) => Some(Err(DeviceError::Closed)),
        }
    }
}

/// Single owner of an [`AudioBackend`].
pub struct AudioDevice {
    name: String,
    tx: Mutex<Option<mpsc::Sender<Job>>>,
    worker: Mutex<Option<JoinHandle<()>>>,
    current: Arc<Mutex<Option<StartSignal>>>,
    closing: Arc<AtomicBool>,
    expiry: Duration,
}

impl std::fmt::Debug for AudioDevice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AudioDevice").field("name", &self.name).finish()
    }
}

impl AudioDevice {
    pub fn open(backend: Box<dyn AudioBackend>) -> Self {
        Self::with_expiry(backend, DEFAULT_EXPIRY)
    }

    pub fn with_expiry(mut backend: Box<dyn AudioBackend>, expiry: Duration) -> Self {
        let name = backend.name().to_string();
        let (tx, rx) = mpsc::channel::<Job>();
        let current = Arc::new(Mutex::new(None::<StartSignal>));
        let closing = Arc::new(AtomicBool::new(false));
        let worker = {
            let current = current.clone();
            let closing = closing.clone();
            thread::Builder::new()
                .name("audio-device".into())
                .spawn(move || {
                    for job in rx {
                        *current.lock().unwrap() = Some(job.signal.clone());
                        // close() may have run before `current` was set
                        if closing.load(Ordering::SeqCst) {
                            job.signal.cancel();
                        }
                        let report = run_job(backend.as_mut(), &job);
                        *current.lock().unwrap() = None;
                        let _ = job.reply.send(report);
                    }
                })
                .expect("spawn audio worker")
        };
        AudioDevice {
            name,
            tx: Mutex::new(Some(tx)),
            worker: Mutex::new(Some(worker)),
            current,
            closing,
            expiry,
        }
    }

    /// Opens a device by config name: `null`, or `command:<player argv>`.
    /// `none` (or an empty name) means no device.
    pub fn from_name(name: &str) -> Result<Self, DeviceError> {
        match name.trim() {
            "null" => Ok(Self::open(Box::new(NullBackend::new()))),
            "" | "none" => Err(DeviceError::Unavailable("no audio device configured".into())),
            other => match other.strip_prefix("command:") {
                Some(cmd) => Ok(Self::open(Box::new(CommandBackend::new(cmd)?))),
                None => Err(DeviceError::Unavailable(format!("unknown audio device `{other}`"))),
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Queues `buf` to start when `signal` fires.
    pub fn enqueue(&self, buf: WaveBuffer, signal: StartSignal) -> Result<PlaybackHandle, DeviceError> {
        let (reply, rx) = mpsc::channel();
        signal.arm();
        let job = Job {
            buf,
            signal: signal.clone(),
            expiry: self.expiry,
            reply,
        };
        let tx = self.tx.lock().unwrap();
        tx.as_ref()
            .ok_or(DeviceError::Closed)?
            .send(job)
            .map_err(|_| DeviceError::Closed)?;
        Ok(PlaybackHandle { signal, rx })
    }

    /// Queues `buf` and blocks until it has played.
    pub fn play(&self, buf: WaveBuffer, signal: StartSignal) -> Result<PlaybackReport, DeviceError> {
        self.enqueue(buf, signal)?.wait()
    }

    pub fn close(&self) {
        self.closing.store(true, Ordering::SeqCst);
        self.tx.lock().unwrap().take();
        if let Some(sig) = self.current.lock().unwrap().as_ref() {
            sig.cancel();
        }
        if let Some(worker) = self.worker.lock().unwrap().take() {
            let _ = worker.join();
        }
    }
}

impl Drop for AudioDevice {
    fn drop(&mut self) {
        self.close();
    }
}

fn run_job(backend: &mut dyn AudioBackend, job: &Job) -> Result<PlaybackReport, DeviceError> {
    let mut report = PlaybackReport {
        outcome: PlaybackOutcome::Expired,
        backend: backend.name().to_string(),
        samples: job.buf.len(),
        sample_rate: job.buf.sample_rate().hz(),
        start_offset: None,
        duration_s: job.buf.duration_s(),
        underruns: 0,
        simulated: false,
    };
    let fired_at = match job.signal.wait_until(Instant::now() + job.expiry) {
        Wait::Fired(at) => at,
        Wait::Expired => return Ok(report),
        Wait::Cancelled => {
            report.outcome = PlaybackOutcome::Cancelled;
            return Ok(report);
        }
    };
    let submitted = Instant::now();
    let played = backend.play(&job.buf)?;
    report.outcome = PlaybackOutcome::Played;
    report.start_offset = Some(submitted.saturating_duration_since(fired_at));
    report.underruns = played.underruns;
    report.simulated = played.simulated;
    Ok(report)
}
