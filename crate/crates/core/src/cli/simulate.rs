use std::path::{Path, PathBuf};

use crate::engine::{BackendSpec, CaseFile, CheckSpec, CompileSpec, ProgramSpec, SimReleaseEntry};
use crate::vcs::{make_sim_history, ReleaseKind, SimReleaseSpec, VcsError};

/// Seed used when `--seed` is omitted.
pub const DEFAULT_SEED: u64 = 20_240_607;

/// Files of a simulated case bundle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimBundle {
    pub case_toml: String,
    pub program_c: String,
    pub history_txt: String,
}

/// Majors at a quarter, half and three quarters of the history; one minor
/// halfway between consecutive majors and after the last one.
pub fn sim_releases(n: usize) -> Vec<SimReleaseEntry> {
    let mut majors: Vec<usize> = (1..=3).map(|k| n * k / 4).filter(|&i| i < n).collect();
    majors.dedup();
    let mut out = Vec::new();
    for (k, &m) in majors.iter().enumerate() {
        out.push(SimReleaseEntry {
            label: format!("{}.0", k + 1),
            kind: ReleaseKind::Major,
            index: m,
        });
    }
    for (k, &m) in majors.iter().enumerate() {
        let end = majors.get(k + 1).copied().unwrap_or(n);
        let mid = (m + end) / 2;
        if mid > m && mid < end {
            out.push(SimReleaseEntry {
                label: format!("{}.1", k + 1),
                kind: ReleaseKind::Minor,
                index: mid,
            });
        }
    }
    out
}

pub fn simulate_bundle(n: usize, bic: usize, seed: u64, files_per_commit: usize) -> Result<SimBundle, VcsError> {
    let releases = sim_releases(n);
    let specs: Vec<SimReleaseSpec> = releases
        .iter()
        .map(|r| SimReleaseSpec::new(r.label.clone(), r.kind, r.index))
        .collect();
    let history = make_sim_history(n, bic, &specs, files_per_commit, seed)?;
    let case = CaseFile {
        id: format!("sim-n{n}-bic{bic}-s{seed}"),
        bad_revision: None,
        pattern: None,
        pattern_preset: None,
        backend: BackendSpec::Sim {
            num_commits: n,
            bic_index: bic,
            seed,
            files_per_commit,
            releases,
            unresolvable: Vec::new(),
        },
        compile: CompileSpec {
            flags: vec!["-O2".into()],
            language: "c".into(),
        },
        program: ProgramSpec {
            source: PathBuf::from("program.c"),
            check: CheckSpec::ExpectedOutput {
                stdout: "ok\n".into(),
                exit_code: 0,
            },
        },
        binary: Vec::new(),
    };
    let case_toml = toml::to_string(&case).expect("case serializes");
    let program_c = format!(
        "/* simulated test program; the simulated oracle fails from commit {bic} on */\n\
         #include <stdio.h>\n\nint main(void) {{\n    puts(\"ok\");\n    return 0;\n}}\n"
    );
    Ok(SimBundle {
        case_toml,
        program_c,
        history_txt: history.render(),
    })
}

impl SimBundle {
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("case.toml"), &self.case_toml)?;
        std::fs::write(dir.join("program.c"), &self.program_c)?;
        std::fs::write(dir.join("history.txt"), &self.history_txt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn release_layout() {
        let r = sim_releases(100);
        let idx: Vec<(String, usize)> = r.iter().map(|e| (e.label.clone(), e.index)).collect();
        assert_eq!(
            idx,
            vec![
                ("1.0".to_string(), 25),
                ("2.0".to_string(), 50),
                ("3.0".to_string(), 75),
                ("1.1".to_string(), 37),
                ("2.1".to_string(), 62),
                ("3.1".to_string(), 87),
            ]
        );
        assert!(sim_releases(1).iter().all(|e| e.index < 1));
        for n in 1..40 {
            let specs: Vec<SimReleaseSpec> = sim_releases(n)
                .iter()
                .map(|r| SimReleaseSpec::new(r.label.clone(), r.kind, r.index))
                .collect();
            assert!(make_sim_history(n, n - 1, &specs, 2, 1).is_ok(), "n={n}");
        }
    }

    #[test]
    fn bundles_are_deterministic() {
        let a = simulate_bundle(100, 57, 3, 3).unwrap();
        assert_eq!(a, simulate_bundle(100, 57, 3, 3).unwrap());
        assert_ne!(a.history_txt, simulate_bundle(100, 57, 4, 3).unwrap().history_txt);
        assert!(simulate_bundle(10, 10, 3, 3).is_err());
    }
}
