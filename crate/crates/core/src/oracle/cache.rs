//! Persistent verdict cache.
//!
//! Append-only text file, one record per line:
//!
//! ```text
//! <key-digest> PASS
//! <key-digest> FAIL
//! <key-digest> UNRESOLVABLE <reason>
//! ```
//!
//! `key-digest` is 64 lowercase hex characters (SHA-256). Later records
//! override earlier ones. A file that fails to parse is discarded with a
//! warning and truncated.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, RwLock};

use sha2::{Digest, Sha256};

use super::{CompileConfig, FailureCheck, Oracle, OracleError, Revision, TestProgram, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey(String);

impl CacheKey {
    /// Key over the commit, the flags, and digests of the program bytes and
    /// the check. Paths do not participate.
    pub fn new(
        revision: &Revision,
        config: &CompileConfig,
        program_bytes: &[u8],
        check: &FailureCheck,
    ) -> Self {
        let program_digest = hex::encode(Sha256::digest(program_bytes));
        let check_json = serde_json::to_string(check).expect("check serializes");
        let check_digest = hex::encode(Sha256::digest(check_json.as_bytes()));
        let language = serde_json::to_string(&config.language).expect("language serializes");
        let mut h = Sha256::new();
        for part in [
            revision.commit.as_str(),
            &config.flags.join("\u{1f}"),
            &language,
            &program_digest,
            &check_digest,
        ] {
            h.update(part.as_bytes());
            h.update([0u8]);
        }
        CacheKey(hex::encode(h.finalize()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Default)]
pub struct VerdictCache {
    entries: RwLock<HashMap<String, Verdict>>,
    file: Option<Mutex<File>>,
    path: Option<PathBuf>,
}

fn parse_line(line: &str) -> Option<(String, Verdict)> {
    let (digest, rest) = line.split_once(' ')?;
    if digest.len() != 64 || !digest.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
        return None;
    }
    let verdict = match rest.split_once(' ') {
        None if rest == "PASS" => Verdict::Pass,
        None if rest == "FAIL" => Verdict::Fail,
        Some(("UNRESOLVABLE", reason)) if !reason.trim().is_empty() => {
            Verdict::Unresolvable(reason.to_string())
        }
        _ => return None,
    };
    Some((digest.to_string(), verdict))
}

fn parse_cache(text: &str) -> Option<HashMap<String, Verdict>> {
    if !text.is_empty() && !text.ends_with('\n') {
        return None;
    }
    text.lines().map(parse_line).collect()
}

impl VerdictCache {
    pub fn in_memory() -> Self {
        VerdictCache::default()
    }

    /// Opens (or creates) the cache file. Returns a warning message when an
    /// existing file was corrupt and has been reset.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Option<String>), OracleError> {
        let path = path.as_ref();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let mut warning = None;
        let entries = match std::fs::read(path) {
            Ok(bytes) => match String::from_utf8(bytes).ok().as_deref().and_then(parse_cache) {
                Some(entries) => entries,
                None => {
                    let msg = format!("verdict cache {} is corrupt; starting empty", path.display());
                    log::warn!("{msg}");
                    warning = Some(msg);
                    File::create(path)?;
                    HashMap::new()
                }
            },
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => HashMap::new(),
            Err(e) => return Err(e.into()),
        };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok((
            VerdictCache {
                entries: RwLock::new(entries),
                file: Some(Mutex::new(file)),
                path: Some(path.to_path_buf()),
            },
            warning,
        ))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn lookup(&self, key: &CacheKey) -> Option<Verdict> {
        self.entries
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(key.as_str())
            .cloned()
    }

    pub fn store(&self, key: &CacheKey, verdict: &Verdict) -> Result<(), OracleError> {
        let verdict = match verdict {
            Verdict::Unresolvable(r) => Verdict::unresolvable(r.clone()),
            v => v.clone(),
        };
        if let Some(file) = &self.file {
            let mut f = file.lock().unwrap_or_else(|e| e.into_inner());
            writeln!(f, "{} {}", key.as_str(), verdict)?;
            f.flush()?;
        }
        self.entries
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(key.as_str().to_string(), verdict);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Wraps an oracle with a verdict cache and counts real invocations.
pub struct CachedOracle<O> {
    inner: O,
    cache: VerdictCache,
    invocations: AtomicUsize,
}

impl<O: Oracle> CachedOracle<O> {
    pub fn new(inner: O, cache: VerdictCache) -> Self {
        CachedOracle {
            inner,
            cache,
            invocations: AtomicUsize::new(0),
        }
    }

    /// Number of evaluations that missed the cache.
    pub fn invocations(&self) -> usize {
        self.invocations.load(Ordering::SeqCst)
    }

    pub fn cache(&self) -> &VerdictCache {
        &self.cache
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: Oracle> Oracle for CachedOracle<O> {
    fn evaluate(
        &self,
        revision: &Revision,
        config: &CompileConfig,
        program: &TestProgram,
    ) -> Result<Verdict, OracleError> {
        let bytes = std::fs::read(&program.source).map_err(|source| OracleError::ProgramUnreadable {
            path: program.source.clone(),
            source,
        })?;
        let key = CacheKey::new(revision, config, &bytes, &program.check);
        if let Some(v) = self.cache.lookup(&key) {
            return Ok(v);
        }
        self.invocations.fetch_add(1, Ordering::SeqCst);
        let verdict = self.inner.evaluate(revision, config, program)?;
        self.cache.store(&key, &verdict)?;
        Ok(verdict)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Language;
    use crate::vcs::CommitId;

    fn key(rev: &str, flag: &str, program: &[u8]) -> CacheKey {
        CacheKey::new(
            &Revision::commit(CommitId::new(rev).unwrap()),
            &CompileConfig::new([flag], Language::C).unwrap(),
            program,
            &FailureCheck::AbnormalTermination,
        )
    }

    #[test]
    fn store_then_lookup() {
        let cache = VerdictCache::in_memory();
        let k = key("c5", "-O2", b"d1");
        assert_eq!(cache.lookup(&k), None);
        cache.store(&k, &Verdict::Fail).unwrap();
        assert_eq!(cache.lookup(&k), Some(Verdict::Fail));
        assert_eq!(cache.lookup(&key("c5", "-O2", b"d2")), None);
        assert_eq!(cache.lookup(&key("c6", "-O2", b"d1")), None);
        assert_eq!(cache.lookup(&key("c5", "-O1", b"d1")), None);
    }

    #[test]
    fn persists_across_opens() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/verdicts.txt");
        let k1 = key("c5", "-O2", b"d1");
        let k2 = key("c6", "-O2", b"d1");
        {
            let (cache, warn) = VerdictCache::open(&path).unwrap();
            assert!(warn.is_none());
            cache.store(&k1, &Verdict::Fail).unwrap();
            cache.store(&k2, &Verdict::unresolvable("build failed")).unwrap();
        }
        let (cache, warn) = VerdictCache::open(&path).unwrap();
        assert!(warn.is_none());
        assert_eq!(cache.lookup(&k1), Some(Verdict::Fail));
        assert_eq!(cache.lookup(&k2), Some(Verdict::Unresolvable("build failed".into())));
    }

    #[test]
    fn corrupt_file_resets_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("verdicts.txt");
        let k1 = key("c5", "-O2", b"d1");
        {
            let (cache, _) = VerdictCache::open(&path).unwrap();
            cache.store(&k1, &Verdict::Pass).unwrap();
            cache.store(&key("c7", "-O2", b"d1"), &Verdict::Fail).unwrap();
        }
        let len = std::fs::metadata(&path).unwrap().len();
        let f = OpenOptions::new().write(true).open(&path).unwrap();
        f.set_len(len - 3).unwrap();
        drop(f);

        let (cache, warn) = VerdictCache::open(&path).unwrap();
        assert!(warn.is_some());
        assert!(cache.is_empty());
        cache.store(&k1, &Verdict::Fail).unwrap();
        let (reopened, warn) = VerdictCache::open(&path).unwrap();
        assert!(warn.is_none());
        assert_eq!(reopened.lookup(&k1), Some(Verdict::Fail));
    }

    #[test]
    fn line_grammar() {
        let d = "a".repeat(64);
        assert_eq!(parse_line(&format!("{d} PASS")), Some((d.clone(), Verdict::Pass)));
        assert_eq!(
            parse_line(&format!("{d} UNRESOLVABLE run timed out")),
            Some((d.clone(), Verdict::Unresolvable("run timed out".into())))
        );
        assert_eq!(parse_line(&format!("{d} UNRESOLVABLE ")), None);
        assert_eq!(parse_line(&format!("{d} PASS extra")), None);
        assert_eq!(parse_line("abc PASS"), None);
        assert_eq!(parse_line(&format!("{} FAIL", "A".repeat(64))), None);
    }
}
