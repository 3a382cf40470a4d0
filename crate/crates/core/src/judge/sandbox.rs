//! Child-process execution of untrusted Python programs.
//!
//! Each run gets its own scratch directory and process group. Limits are
//! applied between fork and exec: address space, CPU seconds, written file
//! size, no core dumps, and (when permitted) a fresh network namespace with
//! no interfaces. Inside the interpreter an audit hook refuses sockets,
//! subprocesses, native code loading and any filesystem mutation outside
//! the scratch directory. Wall-clock overruns kill the whole group.

use std::io::{Read, Write};
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

const BOOTSTRAP: &str = include_str!("bootstrap.py");

/// Exit code of a check run that found a syntax error.
const SYNTAX_ERROR_EXIT: i32 = 3;
/// Exit code of a program that died on `MemoryError`.
pub(crate) const MEMORY_ERROR_EXIT: i32 = 86;

const STDERR_CAP: usize = 64 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum SandboxError {
    #[error("cannot prepare scratch directory: {0}")]
    Scratch(#[source] std::io::Error),
    #[error("cannot start `{interpreter}`: {source}")]
    Spawn {
        interpreter: String,
        #[source]
        source: std::io::Error,
    },
    #[error("wait on child failed: {0}")]
    Wait(#[source] std::io::Error),
    #[error("syntax check ended abnormally ({status}): {stderr}")]
    CheckFailed { status: String, stderr: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SandboxConfig {
    pub interpreter: PathBuf,
    /// Unshare the network namespace before exec. Silently skipped when
    /// the kernel refuses; the audit hook still blocks sockets.
    pub isolate_network: bool,
    /// Captured stdout beyond this is discarded.
    pub max_output_bytes: usize,
    pub max_file_bytes: u64,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        Self {
            interpreter: PathBuf::from("python3"),
            isolate_network: true,
            max_output_bytes: 16 << 20,
            max_file_bytes: 16 << 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mode {
    Check,
    Run,
}

impl Mode {
    fn arg(self) -> &'static str {
        match self {
            Mode::Check => "check",
            Mode::Run => "run",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Limits {
    pub time_ms: u64,
    pub memory_kib: u64,
}

#[derive(Debug)]
pub(crate) struct RunOutcome {
    pub status: ExitStatus,
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
    pub wall_ms: u64,
    pub cpu_ms: u64,
    pub peak_kib: u64,
    /// Killed by the wall-clock watchdog.
    pub timed_out: bool,
}

impl RunOutcome {
    pub fn exit_code(&self) -> Option<i32> {
        self.status.code()
    }

    pub fn signal(&self) -> Option<i32> {
        self.status.signal()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Sandbox {
    config: SandboxConfig,
}

/// Scratch directory holding the candidate as `main.py`.
pub(crate) struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new(source: &str) -> Result<Self, SandboxError> {
        let dir = tempfile::Builder::new()
            .prefix("minrepair-")
            .tempdir()
            .map_err(SandboxError::Scratch)?;
        std::fs::write(dir.path().join("main.py"), source).map_err(SandboxError::Scratch)?;
        Ok(Self { dir })
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }
}

impl Sandbox {
    pub fn new(config: SandboxConfig) -> Self {
        Self { config }
    }

    pub fn config(&self) -> &SandboxConfig {
        &self.config
    }

    /// Parse/byte-compile `source` without running it.
    pub(crate) fn check_syntax(&self, source: &str, limits: Limits) -> Result<bool, SandboxError> {
        let ws = Workspace::new(source)?;
        let out = self.run(Mode::Check, &ws, b"", limits)?;
        match out.exit_code() {
            Some(0) => Ok(true),
            Some(SYNTAX_ERROR_EXIT) => Ok(false),
            _ => Err(SandboxError::CheckFailed {
                status: describe(&out),
                stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
            }),
        }
    }

    pub(crate) fn run(
        &self,
        mode: Mode,
        ws: &Workspace,
        stdin: &[u8],
        limits: Limits,
    ) -> Result<RunOutcome, SandboxError> {
        let scratch = ws.path();
        let mut cmd = Command::new(&self.config.interpreter);
        cmd.args(["-s", "-B", "-X", "utf8", "-c", BOOTSTRAP, mode.arg(), "main.py"])
            .arg(scratch)
            .current_dir(scratch)
            .env_clear()
            .env("PATH", "/usr/local/bin:/usr/bin:/bin")
            .env("HOME", scratch)
            .env("TMPDIR", scratch)
            .env("LANG", "C.UTF-8")
            .env("PYTHONHASHSEED", "0")
            .env("PYTHONIOENCODING", "utf-8")
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());

        let cpu_secs = limits.time_ms.div_ceil(1000) + 1;
        let as_bytes = limits.memory_kib.saturating_mul(1024);
        let fsize = self.config.max_file_bytes;
        let isolate = self.config.isolate_network;
        // SAFETY: only async-signal-safe libc calls between fork and exec.
        unsafe {
            cmd.pre_exec(move || {
                libc::setpgid(0, 0);
                if isolate {
                    libc::unshare(libc::CLONE_NEWNET);
                }
                set_limit(libc::RLIMIT_CPU, cpu_secs, cpu_secs + 1)?;
                set_limit(libc::RLIMIT_AS, as_bytes, as_bytes)?;
                set_limit(libc::RLIMIT_FSIZE, fsize, fsize)?;
                set_limit(libc::RLIMIT_CORE, 0, 0)?;
                Ok(())
            });
        }

        let start = Instant::now();
        let mut child = cmd.spawn().map_err(|source| SandboxError::Spawn {
            interpreter: self.config.interpreter.display().to_string(),
            source,
        })?;
        let pid = child.id() as libc::pid_t;

        let mut child_in = child.stdin.take().expect("piped stdin");
        let input = stdin.to_vec();
        let writer = thread::spawn(move || {
            // the program may exit without reading; EPIPE is expected
            let _ = child_in.write_all(&input);
        });
        let stdout = spawn_reader(child.stdout.take().expect("piped stdout"), self.config.max_output_bytes);
        let stderr = spawn_reader(child.stderr.take().expect("piped stderr"), STDERR_CAP);

        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let _ = tx.send(wait_rusage(pid));
        });

        let mut timed_out = false;
        let waited = match rx.recv_timeout(Duration::from_millis(limits.time_ms)) {
            Ok(res) => res,
            Err(_) => {
                timed_out = true;
                // SAFETY: signalling our own child's process group.
                unsafe {
                    libc::killpg(pid, libc::SIGKILL);
                }
                rx.recv().map_err(|_| {
                    SandboxError::Wait(std::io::Error::other("waiter thread vanished"))
                })?
            }
        };
        let wall_ms = start.elapsed().as_millis() as u64;
        // stragglers left in the group keep the pipes open
        unsafe {
            libc::killpg(pid, libc::SIGKILL);
        }
        let (raw_status, usage) = waited.map_err(SandboxError::Wait)?;
        let _ = writer.join();
        let stdout = stdout.join().unwrap_or_default();
        let stderr = stderr.join().unwrap_or_default();

        let cpu = |tv: libc::timeval| tv.tv_sec as u64 * 1000 + tv.tv_usec as u64 / 1000;
        Ok(RunOutcome {
            status: ExitStatus::from_raw(raw_status),
            stdout,
            stderr,
            wall_ms,
            cpu_ms: cpu(usage.ru_utime) + cpu(usage.ru_stime),
            peak_kib: usage.ru_maxrss.max(0) as u64,
            timed_out,
        })
    }
}

fn set_limit(resource: libc::__rlimit_resource_t, soft: u64, hard: u64) -> std::io::Result<()> {
    let lim = libc::rlimit {
        rlim_cur: soft as libc::rlim_t,
        rlim_max: hard as libc::rlim_t,
    };
    // SAFETY: plain syscall on a stack value.
    if unsafe { libc::setrlimit(resource, &lim) } != 0 {
        return Err(std::io::Error::last_os_error());
    }
    Ok(())
}

fn wait_rusage(pid: libc::pid_t) -> std::io::Result<(i32, libc::rusage)> {
    let mut status = 0;
    // SAFETY: zeroed rusage is a valid out-parameter.
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    loop {
        let r = unsafe { libc::wait4(pid, &mut status, 0, &mut usage) };
        if r == pid {
            return Ok((status, usage));
        }
        let err = std::io::Error::last_os_error();
        if err.kind() != std::io::ErrorKind::Interrupted {
            return Err(err);
        }
    }
}

fn spawn_reader<R: Read + Send + 'static>(mut pipe: R, cap: usize) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut kept = Vec::new();
        let mut buf = [0u8; 8192];
        loop {
            match pipe.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = cap.saturating_sub(kept.len());
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
        kept
    })
}

fn describe(out: &RunOutcome) -> String {
    match (out.exit_code(), out.signal()) {
        _ if out.timed_out => "timed out".to_string(),
        (Some(code), _) => format!("exit code {code}"),
        (_, Some(sig)) => format!("signal {sig}"),
        _ => "unknown status".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LIMITS: Limits = Limits {
        time_ms: 2000,
        memory_kib: 262_144,
    };

    fn run(src: &str, input: &[u8]) -> RunOutcome {
        let sb = Sandbox::default();
        let ws = Workspace::new(src).unwrap();
        sb.run(Mode::Run, &ws, input, LIMITS).unwrap()
    }

    #[test]
    fn echoes_stdin() {
        let out = run("print(input()[::-1])\n", b"abc\n");
        assert_eq!(out.exit_code(), Some(0));
        assert_eq!(out.stdout, b"cba\n");
        assert!(out.peak_kib > 0);
    }

    #[test]
    fn exit_builtin_available() {
        let out = run("print(1)\nexit()\nprint(2)\n", b"");
        assert_eq!(out.exit_code(), Some(0));
        assert_eq!(out.stdout, b"1\n");
    }

    #[test]
    fn syntax_check() {
        let sb = Sandbox::default();
        assert!(sb.check_syntax("print(1)\n", LIMITS).unwrap());
        assert!(!sb.check_syntax("def f(:\n", LIMITS).unwrap());
        assert!(sb.check_syntax("1/0\n", LIMITS).unwrap());
        assert!(!sb.check_syntax("x = '\0'\0\n", LIMITS).unwrap());
    }

    #[test]
    fn missing_interpreter_is_infrastructure_error() {
        let sb = Sandbox::new(SandboxConfig {
            interpreter: "/nonexistent/python".into(),
            ..SandboxConfig::default()
        });
        assert!(matches!(
            sb.check_syntax("print(1)\n", LIMITS),
            Err(SandboxError::Spawn { .. })
        ));
    }

    #[test]
    fn scratch_writes_allowed_outside_denied() {
        let out = run("open('ok.txt', 'w').write('x')\nprint(open('ok.txt').read())\n", b"");
        assert_eq!(out.exit_code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let out = run("import os\nos.remove('/etc/hostname')\n", b"");
        assert_eq!(out.exit_code(), Some(1));
        assert!(String::from_utf8_lossy(&out.stderr).contains("sandbox"));
    }
}
