//! Helpers shared by the integration tests: independent reference
//! implementations, fixture builders and the synthetic benchmark.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::process::Command;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bisectfl::sbfl::{CoverageRun, Outcome, StatementId};
use bisectfl::vcs::{manifest::render_manifest, ChangeKind, CommitId, GitBackend, History, Release, SimHistory};

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_bisectfl"))
}

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

// ---------------------------------------------------------------------
// formula reference

fn big(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// What a formula evaluates to, written straight from the closed forms.
/// Square-root formulas are returned squared so they stay rational.
#[derive(Debug, Clone, PartialEq)]
pub enum Exact {
    Value(BigRational),
    Squared(BigRational),
    PosInf,
}

/// Independent evaluation of a formula on `(ef, ep, nf, np)`; `name` is
/// one of ochiai, tarantula, ochiai2, op2, barinel, dstar2, dstar3.
pub fn reference(name: &str, ef: u64, ep: u64, nf: u64, np: u64) -> Exact {
    let zero = BigRational::from_integer(BigInt::from(0));
    let one = big(1);
    let (efr, epr, npr) = (big(ef), big(ep), big(np));
    match name {
        "ochiai" => {
            let den = (ef + nf) * (ef + ep);
            if den == 0 {
                Exact::Squared(zero)
            } else {
                Exact::Squared(&efr * &efr / big(den))
            }
        }
        "ochiai2" => {
            let den = (ef + ep) * (nf + np) * (ef + nf) * (ep + np);
            if den == 0 {
                Exact::Squared(zero)
            } else {
                let num = &efr * &npr;
                Exact::Squared(&num * &num / big(den))
            }
        }
        "tarantula" => {
            let f = if ef + nf == 0 { zero.clone() } else { &efr / big(ef + nf) };
            let p = if ep + np == 0 { zero.clone() } else { &epr / big(ep + np) };
            let den = &f + &p;
            if den == zero {
                Exact::Value(zero)
            } else {
                Exact::Value(&f / den)
            }
        }
        "op2" => Exact::Value(&efr - &epr / (big(ep + np) + &one)),
        "barinel" => {
            if ef + ep == 0 {
                Exact::Value(zero)
            } else {
                Exact::Value(&one - &epr / big(ep + ef))
            }
        }
        "dstar2" | "dstar3" => {
            let star: u32 = if name == "dstar2" { 2 } else { 3 };
            if ep + nf == 0 {
                if ef > 0 {
                    Exact::PosInf
                } else {
                    Exact::Value(zero)
                }
            } else {
                Exact::Value(big(ef.pow(star)) / big(ep + nf))
            }
        }
        other => panic!("unknown formula {other}"),
    }
}

fn to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().expect("finite")
}

/// Whether `got` agrees with the reference within `tol` (relative for
/// large magnitudes).
pub fn agrees(exact: &Exact, got: f64, tol: f64) -> bool {
    match exact {
        Exact::PosInf => got == f64::INFINITY,
        Exact::Value(v) => {
            let want = to_f64(v);
            (got - want).abs() <= tol * want.abs().max(1.0)
        }
        Exact::Squared(v) => {
            let want = to_f64(v).sqrt();
            got >= 0.0 && (got - want).abs() <= tol * want.abs().max(1.0)
        }
    }
}

// ---------------------------------------------------------------------
// metric reference

/// A technique output for the brute-force metrics: either `(file, score)`
/// pairs or a plain file set.
#[derive(Debug, Clone)]
pub enum RefOutput {
    Ranked(Vec<(String, f64)>),
    Set(Vec<String>),
}

/// Rank of `file` counted directly: for ranked lists, the number of files
/// scoring strictly higher plus one (best case); for sets, the set size
/// (worst case).
pub fn ref_rank(out: &RefOutput, file: &str) -> Option<usize> {
    match out {
        RefOutput::Ranked(v) => {
            let mine = v.iter().find(|(f, _)| f == file)?.1;
            Some(v.iter().filter(|(_, s)| *s > mine).count() + 1)
        }
        RefOutput::Set(v) => v.iter().any(|f| f == file).then_some(v.len()),
    }
}

pub fn ref_len(out: &RefOutput) -> usize {
    match out {
        RefOutput::Ranked(v) => v.len(),
        RefOutput::Set(v) => v.len(),
    }
}

/// Top-N counts, MFR and MAR as exact fractions `(numerator, denominator)`
/// over bugs, computed without the library.
pub struct RefMetrics {
    pub top: BTreeMap<usize, usize>,
    pub mfr: Option<BigRational>,
    pub mar: Option<BigRational>,
}

pub fn ref_metrics(outputs: &BTreeMap<String, RefOutput>, truth: &BTreeMap<String, Vec<String>>) -> RefMetrics {
    let mut top = BTreeMap::new();
    for n in [1usize, 5, 10, 20] {
        let hits = outputs
            .iter()
            .filter(|(b, o)| truth[*b].iter().filter_map(|f| ref_rank(o, f)).any(|r| r <= n))
            .count();
        top.insert(n, hits);
    }
    let any_set = outputs.values().any(|o| matches!(o, RefOutput::Set(_)));
    if any_set {
        return RefMetrics { top, mfr: None, mar: None };
    }
    let nb = big(outputs.len() as u64);
    let mut mfr = big(0);
    let mut mar = big(0);
    for (b, o) in outputs {
        let miss = ref_len(o) + 1;
        let ranks: Vec<usize> = truth[b].iter().map(|f| ref_rank(o, f).unwrap_or(miss)).collect();
        mfr += big(*ranks.iter().min().unwrap() as u64);
        mar += big(ranks.iter().sum::<usize>() as u64) / big(ranks.len() as u64);
    }
    RefMetrics {
        top,
        mfr: Some(mfr / &nb),
        mar: Some(mar / nb),
    }
}

// ---------------------------------------------------------------------
// git mirror of a simulated history

fn git(repo: &Path, args: &[&str], env: &[(&str, String)]) -> String {
    let mut cmd = Command::new("git");
    cmd.arg("-C").arg(repo).args(args);
    cmd.env("GIT_CONFIG_NOSYSTEM", "1")
        .env("HOME", repo)
        .env("GIT_AUTHOR_NAME", "Sim")
        .env("GIT_AUTHOR_EMAIL", "sim@example.org")
        .env("GIT_COMMITTER_NAME", "Sim")
        .env("GIT_COMMITTER_EMAIL", "sim@example.org");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("git runs");
    assert!(out.status.success(), "git {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Replays `sim` into a git repository under `dir` and writes its release
/// manifest. Returns the backend and the sim-to-git commit id map.
pub fn mirror_to_git(sim: &SimHistory, dir: &Path) -> (GitBackend, HashMap<CommitId, CommitId>) {
    let repo = dir.join("repo");
    std::fs::create_dir_all(&repo).unwrap();
    git(&repo, &["init", "-q", "-b", "main", "."], &[]);
    let mut map = HashMap::new();
    // The sim marks later touches as modifications, so every path has to
    // exist from the root commit on.
    let all: BTreeSet<&str> = sim
        .commits()
        .iter()
        .flat_map(|c| c.changes.iter().map(|ch| ch.path.as_str()))
        .collect();
    for path in &all {
        let p = repo.join(path);
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(&p, format!("{path}\n")).unwrap();
    }
    for (i, c) in sim.commits().iter().enumerate() {
        for ch in &c.changes {
            let p = repo.join(&ch.path);
            match ch.change {
                ChangeKind::Deleted => std::fs::remove_file(&p).unwrap(),
                _ => {
                    std::fs::create_dir_all(p.parent().unwrap()).unwrap();
                    std::fs::write(&p, format!("{} @ {}\n", ch.path, c.id)).unwrap();
                }
            }
        }
        let stamp = format!("{} +0000", 946_684_800 + i as u64 * 86_400);
        git(&repo, &["add", "-A"], &[]);
        git(
            &repo,
            &["commit", "-q", "--allow-empty", "-m", c.id.as_str()],
            &[("GIT_AUTHOR_DATE", stamp.clone()), ("GIT_COMMITTER_DATE", stamp)],
        );
        let hash = git(&repo, &["rev-parse", "HEAD"], &[]).trim().to_string();
        map.insert(c.id.clone(), CommitId::new(hash).unwrap());
    }
    let releases: Vec<Release> = sim
        .list_releases()
        .unwrap()
        .into_iter()
        .map(|mut r| {
            r.commit = map[&r.commit].clone();
            r
        })
        .collect();
    let manifest = dir.join("releases.txt");
    std::fs::write(&manifest, render_manifest(&releases)).unwrap();
    (GitBackend::open(&repo, Some(manifest)).unwrap(), map)
}

// ---------------------------------------------------------------------
// synthetic spectra

pub const FAULTY_FILE: &str = "src/faulty.c";

/// Coverage runs where statements of `src/faulty.c` are covered by failing
/// runs more often than the rest. `clarity` in [0, 1] controls how strongly.
pub fn synthetic_runs(seed: u64, files: usize, clarity: f64) -> Vec<CoverageRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut names: Vec<String> = (0..files).map(|i| format!("src/unit_{i}.c")).collect();
    names.push(FAULTY_FILE.to_string());
    let stmts: Vec<StatementId> = names
        .iter()
        .flat_map(|f| (1..=6u32).map(move |l| StatementId::new(f.clone(), l).unwrap()))
        .collect();
    let failing = rng.gen_range(1..=3);
    let passing = rng.gen_range(2..=8);
    let mut runs = Vec::new();
    for k in 0..failing + passing {
        let fail = k < failing;
        let mut covered = BTreeSet::new();
        for s in &stmts {
            let faulty = s.file == FAULTY_FILE;
            let p = match (fail, faulty) {
                (true, true) => 0.5 + 0.5 * clarity,
                (false, true) => 0.5 - 0.45 * clarity,
                _ => 0.5,
            };
            if rng.gen_bool(p) {
                covered.insert(s.clone());
            }
        }
        if fail {
            covered.insert(StatementId::new(FAULTY_FILE, 1).unwrap());
        }
        runs.push(CoverageRun {
            label: format!("t{k}"),
            outcome: if fail { Outcome::Failing } else { Outcome::Passing },
            covered,
        });
    }
    runs
}
