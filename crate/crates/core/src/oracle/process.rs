//! Oracle that compiles and runs the test program with a real toolchain.
//!
//! The compiler is invoked as `<compiler> <flags...> <source> -o <exe>` in a
//! scratch directory, then `<exe>` runs with no arguments. Output is
//! captured byte-exact.

use std::fs::File;
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use wait_timeout::ChildExt;

use super::binary::CompilerHandle;
use super::{
    BinaryResolver, CompileConfig, FailureCheck, Oracle, OracleError, Revision, TestProgram,
    Verdict, ENV_RUN_TIMEOUT, ENV_TOOLCHAIN_TIMEOUT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RunStatus {
    Exited(i32),
    Signaled(i32),
    TimedOut,
}

/// Runs `cmd` in its own process group with stdout and stderr redirected to
/// files. On timeout the whole group is killed.
pub(crate) fn run_captured(
    mut cmd: Command,
    timeout: Duration,
    stdout: &Path,
    stderr: &Path,
) -> std::io::Result<RunStatus> {
    cmd.stdin(Stdio::null())
        .stdout(File::create(stdout)?)
        .stderr(File::create(stderr)?)
        .process_group(0);
    let mut child = cmd.spawn()?;
    match child.wait_timeout(timeout)? {
        Some(status) => Ok(match (status.code(), status.signal()) {
            (Some(code), _) => RunStatus::Exited(code),
            (None, Some(sig)) => RunStatus::Signaled(sig),
            (None, None) => RunStatus::Exited(-1),
        }),
        None => {
            // SAFETY: plain syscall on the group we created above.
            unsafe {
                libc::kill(-(child.id() as i32), libc::SIGKILL);
            }
            let _ = child.kill();
            let _ = child.wait();
            Ok(RunStatus::TimedOut)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Budget for building and invoking the compiler.
    pub toolchain: Duration,
    /// Budget for running the compiled test binary.
    pub run: Duration,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            toolchain: Duration::from_secs(3600),
            run: Duration::from_secs(10),
        }
    }
}

impl Limits {
    /// Defaults overridden by `BISECTFL_TOOLCHAIN_TIMEOUT_S` and
    /// `BISECTFL_RUN_TIMEOUT_S`. Unparseable values are ignored.
    pub fn from_env() -> Self {
        let read = |name: &str| {
            std::env::var(name)
                .ok()
                .and_then(|v| v.trim().parse::<f64>().ok())
                .filter(|s| s.is_finite() && *s > 0.0)
                .map(Duration::from_secs_f64)
        };
        let d = Limits::default();
        Limits {
            toolchain: read(ENV_TOOLCHAIN_TIMEOUT).unwrap_or(d.toolchain),
            run: read(ENV_RUN_TIMEOUT).unwrap_or(d.run),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Execution {
    Exited { stdout: Vec<u8>, code: i32 },
    Signaled { stdout: Vec<u8>, signal: i32 },
    TimedOut,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Outcome {
    Ran(Execution),
    CompileFailed(String),
    CompileTimedOut,
}

#[derive(Debug, Clone)]
pub struct ProcessOracle {
    resolver: BinaryResolver,
    limits: Limits,
}

impl ProcessOracle {
    pub fn new(mut resolver: BinaryResolver, limits: Limits) -> Self {
        resolver.build_env.timeout = limits.toolchain;
        ProcessOracle { resolver, limits }
    }

    pub fn with_build_var(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.resolver.build_env.vars.push((key.into(), value.into()));
        self
    }

    fn compile_and_run(
        &self,
        compiler: &CompilerHandle,
        config: &CompileConfig,
        source: &Path,
        work: &Path,
        tag: &str,
    ) -> Result<Outcome, OracleError> {
        let exe = work.join(format!("{tag}.out"));
        let mut cmd = compiler.command();
        cmd.args(&config.flags).arg(source).arg("-o").arg(&exe).current_dir(work);
        let c_out = work.join(format!("{tag}.cc.out"));
        let c_err = work.join(format!("{tag}.cc.err"));
        match run_captured(cmd, self.limits.toolchain, &c_out, &c_err)? {
            RunStatus::TimedOut => return Ok(Outcome::CompileTimedOut),
            RunStatus::Exited(0) if exe.is_file() => {}
            status => {
                let stderr = std::fs::read_to_string(&c_err).unwrap_or_default();
                let first = stderr.lines().next().unwrap_or("").trim().to_string();
                return Ok(Outcome::CompileFailed(format!("{status:?} {first}")));
            }
        }
        let r_out = work.join(format!("{tag}.run.out"));
        let r_err = work.join(format!("{tag}.run.err"));
        let mut run = Command::new(&exe);
        run.current_dir(work);
        let status = run_captured(run, self.limits.run, &r_out, &r_err)?;
        let stdout = std::fs::read(&r_out)?;
        Ok(Outcome::Ran(match status {
            RunStatus::Exited(code) => Execution::Exited { stdout, code },
            RunStatus::Signaled(signal) => Execution::Signaled { stdout, signal },
            RunStatus::TimedOut => Execution::TimedOut,
        }))
    }
}

fn unresolved(outcome: &Outcome) -> Option<Verdict> {
    match outcome {
        Outcome::CompileFailed(msg) => Some(Verdict::unresolvable(format!("compile {msg}"))),
        Outcome::CompileTimedOut => Some(Verdict::unresolvable("timeout")),
        Outcome::Ran(_) => None,
    }
}

fn judge(check: &FailureCheck, probe: &Execution, baseline: Option<&Execution>) -> Verdict {
    match check {
        FailureCheck::ExpectedOutput { stdout, exit_code } => match probe {
            Execution::Exited { stdout: out, code } => {
                if out == stdout.as_bytes() && code == exit_code {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                }
            }
            Execution::Signaled { .. } => Verdict::Fail,
            Execution::TimedOut => Verdict::unresolvable("timeout"),
        },
        FailureCheck::AbnormalTermination => match probe {
            Execution::Exited { .. } => Verdict::Pass,
            Execution::Signaled { .. } | Execution::TimedOut => Verdict::Fail,
        },
        FailureCheck::DifferentialBaseline { .. } => match (probe, baseline) {
            (Execution::TimedOut, _) | (_, Some(Execution::TimedOut)) => {
                Verdict::unresolvable("timeout")
            }
            (_, None) => Verdict::unresolvable("missing baseline run"),
            (p, Some(b)) => {
                if p == b {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                }
            }
        },
    }
}

impl Oracle for ProcessOracle {
    fn evaluate(
        &self,
        revision: &Revision,
        config: &CompileConfig,
        program: &TestProgram,
    ) -> Result<Verdict, OracleError> {
        let source: PathBuf = program
            .source
            .canonicalize()
            .map_err(|source| OracleError::ProgramUnreadable {
                path: program.source.clone(),
                source,
            })?;
        let compiler = match self.resolver.resolve(revision) {
            Ok(h) => h,
            Err(OracleError::BuildFailed { rev, log }) => {
                log::warn!("build of {rev} failed:\n{log}");
                return Ok(Verdict::unresolvable("build"));
            }
            Err(OracleError::NotFound(what)) => {
                return Err(OracleError::ToolchainMissing(format!("{revision}: {what}")))
            }
            Err(e) => return Err(e),
        };
        let work = tempfile::tempdir()?;
        let probe = self.compile_and_run(&compiler, config, &source, work.path(), "probe")?;
        if let Some(v) = unresolved(&probe) {
            return Ok(v);
        }
        let baseline = match &program.check {
            FailureCheck::DifferentialBaseline { baseline } => {
                let b = self.compile_and_run(&compiler, baseline, &source, work.path(), "base")?;
                if let Some(v) = unresolved(&b) {
                    return Ok(v);
                }
                Some(b)
            }
            _ => None,
        };
        let exec = |o: Option<&Outcome>| match o {
            Some(Outcome::Ran(e)) => Some(e.clone()),
            _ => None,
        };
        let probe = exec(Some(&probe)).expect("resolved above");
        Ok(judge(&program.check, &probe, exec(baseline.as_ref()).as_ref()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{BinarySource, Language};
    use crate::vcs::CommitId;
    use std::os::unix::fs::PermissionsExt;

    /// A fake compiler: the "program" is a shell fragment; `-Obad` makes the
    /// compiled binary print 1 instead of the program's output.
    const FAKE_CC: &str = r#"#!/bin/sh
mode=ok
out=
src=
while [ $# -gt 0 ]; do
  case "$1" in
    -Obad) mode=bad ;;
    -Ohang) mode=hang ;;
    -Oabort) mode=abort ;;
    -Obroken) echo "internal compiler error" >&2; exit 1 ;;
    -o) out="$2"; shift ;;
    -*) ;;
    *) src="$1" ;;
  esac
  shift
done
case $mode in
  ok) { echo '#!/bin/sh'; cat "$src"; } > "$out" ;;
  bad) printf '#!/bin/sh\necho 1\n' > "$out" ;;
  hang) printf '#!/bin/sh\nsleep 30\n' > "$out" ;;
  abort) printf '#!/bin/sh\nkill -ABRT $$\n' > "$out" ;;
esac
chmod +x "$out"
"#;

    struct Fixture {
        _dir: tempfile::TempDir,
        oracle: ProcessOracle,
        program: PathBuf,
    }

    fn fixture() -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let cc = dir.path().join("r1/bin/cc");
        std::fs::create_dir_all(cc.parent().unwrap()).unwrap();
        std::fs::write(&cc, FAKE_CC).unwrap();
        std::fs::set_permissions(&cc, std::fs::Permissions::from_mode(0o755)).unwrap();
        let program = dir.path().join("small.c");
        std::fs::write(&program, "echo 0\n").unwrap();
        let resolver = BinaryResolver::new(vec![BinarySource::Prebuilt {
            template: format!("{}/{{rev}}/bin/cc", dir.path().display()),
        }])
        .unwrap();
        let limits = Limits {
            toolchain: Duration::from_secs(20),
            run: Duration::from_millis(500),
        };
        Fixture {
            _dir: dir,
            oracle: ProcessOracle::new(resolver, limits),
            program,
        }
    }

    fn eval(f: &Fixture, rev: &str, flags: &[&str], check: FailureCheck) -> Result<Verdict, OracleError> {
        let config = CompileConfig::new(flags.iter().copied(), Language::C).unwrap();
        let program = TestProgram {
            source: f.program.clone(),
            check,
        };
        f.oracle
            .evaluate(&Revision::commit(CommitId::new(rev).unwrap()), &config, &program)
    }

    fn expect_zero() -> FailureCheck {
        FailureCheck::ExpectedOutput {
            stdout: "0\n".into(),
            exit_code: 0,
        }
    }

    #[test]
    fn expected_output_pass_and_fail() {
        let f = fixture();
        assert_eq!(eval(&f, "r1", &["-m64", "-O1"], expect_zero()).unwrap(), Verdict::Pass);
        assert_eq!(eval(&f, "r1", &["-m64", "-Obad"], expect_zero()).unwrap(), Verdict::Fail);
    }

    #[test]
    fn hang_is_unresolvable_unless_checking_termination() {
        let f = fixture();
        assert_eq!(
            eval(&f, "r1", &["-Ohang"], expect_zero()).unwrap(),
            Verdict::Unresolvable("timeout".into())
        );
        assert_eq!(
            eval(&f, "r1", &["-Ohang"], FailureCheck::AbnormalTermination).unwrap(),
            Verdict::Fail
        );
    }

    #[test]
    fn abort_detected() {
        let f = fixture();
        assert_eq!(
            eval(&f, "r1", &["-Oabort"], FailureCheck::AbnormalTermination).unwrap(),
            Verdict::Fail
        );
        assert_eq!(
            eval(&f, "r1", &["-O2"], FailureCheck::AbnormalTermination).unwrap(),
            Verdict::Pass
        );
    }

    #[test]
    fn differential_baseline() {
        let f = fixture();
        let check = FailureCheck::DifferentialBaseline {
            baseline: CompileConfig::new(["-O0"], Language::C).unwrap(),
        };
        assert_eq!(eval(&f, "r1", &["-O2"], check.clone()).unwrap(), Verdict::Pass);
        assert_eq!(eval(&f, "r1", &["-Obad"], check).unwrap(), Verdict::Fail);
    }

    #[test]
    fn compiler_error_is_unresolvable() {
        let f = fixture();
        match eval(&f, "r1", &["-Obroken"], expect_zero()).unwrap() {
            Verdict::Unresolvable(r) => assert!(r.starts_with("compile"), "{r}"),
            v => panic!("unexpected {v:?}"),
        }
    }

    #[test]
    fn missing_toolchain_is_an_error() {
        let f = fixture();
        assert!(matches!(
            eval(&f, "r2", &[], expect_zero()),
            Err(OracleError::ToolchainMissing(_))
        ));
    }

    #[test]
    fn limits_from_env_defaults() {
        let d = Limits::default();
        assert_eq!(d.run, Duration::from_secs(10));
    }
}
