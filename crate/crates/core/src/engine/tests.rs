use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::oracle::{FailureCheck, Language, SimOracle};
use crate::vcs::{
    make_sim_history, sim_commit_id as cid, ChangeKind, FileChange, SimCommit, SimHistory,
    SimReleaseSpec, FAULTY_PATH,
};

/// Majors get labels "1.0", "2.0", ...; each minor joins the series of the
/// closest earlier major (or the first one).
pub(crate) fn release_specs(majors: &[usize], minors: &[usize]) -> Vec<SimReleaseSpec> {
    let mut majors = majors.to_vec();
    majors.sort_unstable();
    let mut out: Vec<SimReleaseSpec> = majors
        .iter()
        .enumerate()
        .map(|(k, &i)| SimReleaseSpec::new(format!("{}.0", k + 1), ReleaseKind::Major, i))
        .collect();
    let mut next_minor: BTreeMap<usize, usize> = BTreeMap::new();
    let mut minors = minors.to_vec();
    minors.sort_unstable();
    for &i in &minors {
        let series = majors.iter().rposition(|&m| m < i).unwrap_or(0) + 1;
        let n = next_minor.entry(series).or_insert(1);
        out.push(SimReleaseSpec::new(format!("{series}.{n}"), ReleaseKind::Minor, i));
        *n += 1;
    }
    out
}

fn sim(n: usize, bic: usize, majors: &[usize], minors: &[usize], seed: u64) -> Arc<SimHistory> {
    Arc::new(make_sim_history(n, bic, &release_specs(majors, minors), 3, seed).unwrap())
}

fn case_for(h: &SimHistory, bad: Option<usize>) -> BugCase {
    BugCase {
        id: "sim".into(),
        bad_revision: bad.map(cid).unwrap_or_else(|| h.head().unwrap().clone()),
        config: CompileConfig::new(["-O2"], Language::C).unwrap(),
        program: TestProgram {
            source: "unused.c".into(),
            check: FailureCheck::AbnormalTermination,
        },
        source_pattern: Regex::new(r"\.c$").unwrap(),
    }
}

fn release_at(h: &SimHistory, index: usize) -> Boundary {
    let r = h
        .list_releases()
        .unwrap()
        .into_iter()
        .find(|r| r.commit == cid(index))
        .expect("release at index");
    Boundary::Release {
        label: r.label,
        commit: r.commit,
    }
}

fn commit_at(index: usize) -> Boundary {
    Boundary::Commit { commit: cid(index) }
}

fn rough_for(h: &Arc<SimHistory>) -> Result<RangeResult, EngineError> {
    let oracle = SimOracle::new(h.clone());
    let case = case_for(h, None);
    let mut e = Basic::new(h.as_ref(), &oracle, &case, EngineOptions::default())?;
    e.rough_range(&h.list_releases().unwrap())
}

#[test]
fn rough_range_picks_first_failing_major() {
    let h = sim(60, 37, &[10, 30, 50], &[], 1);
    let r = rough_for(&h).unwrap();
    assert_eq!(r.bad, release_at(&h, 50));
    assert_eq!(r.good, release_at(&h, 30));
    assert!(!r.no_passing_release);
    assert_eq!(r.probes.len(), 3);
}

#[test]
fn rough_range_falls_back_to_root() {
    let h = sim(60, 5, &[10, 30, 50], &[], 1);
    let r = rough_for(&h).unwrap();
    assert_eq!(r.bad, release_at(&h, 10));
    assert_eq!(r.good, commit_at(0));
    assert!(r.no_passing_release);
}

#[test]
fn rough_range_without_failing_major_uses_bad_revision() {
    let h = sim(60, 55, &[10, 30, 50], &[], 1);
    let r = rough_for(&h).unwrap();
    assert_eq!(r.bad, commit_at(59));
    assert_eq!(r.good, release_at(&h, 50));
}

#[test]
fn rough_range_skips_unresolvable_major() {
    let h = Arc::new(
        make_sim_history(60, 37, &release_specs(&[10, 30, 50], &[]), 2, 1)
            .unwrap()
            .with_unresolvable([30]),
    );
    let r = rough_for(&h).unwrap();
    assert_eq!(r.bad, release_at(&h, 50));
    assert_eq!(r.good, release_at(&h, 10));
}

#[test]
fn exhaustive_majors_agree_under_monotonicity() {
    let h = sim(80, 37, &[10, 30, 50, 70], &[], 2);
    let oracle = SimOracle::new(h.clone());
    let case = case_for(&h, None);
    let opts = EngineOptions {
        exhaustive_majors: true,
        max_probes: None,
    };
    let mut e = Basic::new(h.as_ref(), &oracle, &case, opts).unwrap();
    let r = e.rough_range(&h.list_releases().unwrap()).unwrap();
    assert_eq!(r.probes.len(), 4);
    assert_eq!(r.bad, release_at(&h, 50));
    assert_eq!(r.good, release_at(&h, 30));
    let early = rough_for(&h).unwrap();
    assert_eq!(early.probes.len(), 3);
    assert_eq!((early.good, early.bad), (r.good, r.bad));
}

fn fine_for(h: &Arc<SimHistory>, extra_unresolvable: &[usize]) -> (RangeResult, RangeResult) {
    let oracle = SimOracle::new(h.clone()).with_unresolvable(extra_unresolvable.iter().copied());
    let case = case_for(h, None);
    let mut e = Basic::new(h.as_ref(), &oracle, &case, EngineOptions::default()).unwrap();
    let releases = h.list_releases().unwrap();
    let rough = e.rough_range(&releases).unwrap();
    let fine = e.fine_range(&rough, &releases).unwrap();
    (rough, fine)
}

#[test]
fn fine_range_tightens_with_minors() {
    let h = sim(60, 44, &[30, 50], &[35, 42, 47], 4);
    let (rough, fine) = fine_for(&h, &[]);
    assert_eq!((rough.good.clone(), rough.bad.clone()), (release_at(&h, 30), release_at(&h, 50)));
    assert_eq!(fine.good, release_at(&h, 42));
    assert_eq!(fine.bad, release_at(&h, 47));
    assert_eq!(fine.probes.len(), 3);
}

#[test]
fn fine_range_without_minors_is_identity() {
    let h = sim(60, 44, &[30, 50], &[], 4);
    let (rough, fine) = fine_for(&h, &[]);
    assert_eq!((fine.good, fine.bad), (rough.good, rough.bad));
    assert!(fine.probes.is_empty());
}

#[test]
fn fine_range_skips_unresolvable_minor() {
    let h = sim(60, 44, &[30, 50], &[35, 42, 47], 4);
    let (_, fine) = fine_for(&h, &[42]);
    assert_eq!(fine.good, release_at(&h, 35));
    assert_eq!(fine.bad, release_at(&h, 47));
    assert!(fine.probes.iter().any(|p| !p.verdict.is_resolved()));
}

fn bisect_sim(h: &Arc<SimHistory>, good: usize, bad: usize, unresolvable: &[usize]) -> (BisectOutcome, usize) {
    let oracle = SimOracle::new(h.clone()).with_unresolvable(unresolvable.iter().copied());
    let case = case_for(h, None);
    let mut e = Basic::new(h.as_ref(), &oracle, &case, EngineOptions::default()).unwrap();
    // endpoints are known from the range stages in a real run
    e.probe_commit(&cid(good), Stage::Fine).unwrap();
    e.probe_commit(&cid(bad), Stage::Fine).unwrap();
    let range = h.commits_between(&cid(good), &cid(bad)).unwrap();
    let before = e.oracle_calls();
    let out = e.bisect(&range).unwrap();
    (out, e.oracle_calls() - before)
}

#[test]
fn bisect_finds_bic_within_log_budget() {
    let h = sim(16, 9, &[], &[], 0);
    let (out, calls) = bisect_sim(&h, 0, 15, &[]);
    assert_eq!(out, BisectOutcome::Found(cid(9)));
    assert!(calls <= 4, "{calls} calls");
}

#[test]
fn bisect_adjacent_range_needs_no_probe() {
    let h = sim(16, 7, &[], &[], 0);
    let (out, calls) = bisect_sim(&h, 6, 7, &[]);
    assert_eq!(out, BisectOutcome::Found(cid(7)));
    assert_eq!(calls, 0);
}

#[test]
fn bisect_skips_unresolvable_band() {
    let h = sim(64, 40, &[], &[], 0);
    // the first midpoint of (0, 63] is 31; make its neighbourhood unbuildable
    let band: Vec<usize> = (28..=35).collect();
    let (out, calls) = bisect_sim(&h, 0, 63, &band);
    assert_eq!(out, BisectOutcome::Found(cid(40)));
    assert!(calls > 6);
}

#[test]
fn bisect_all_unresolvable_is_inconclusive() {
    let h = sim(20, 12, &[], &[], 0);
    let band: Vec<usize> = (11..=13).collect();
    let (out, _) = bisect_sim(&h, 10, 14, &band);
    match out {
        BisectOutcome::Inconclusive(r) => {
            assert_eq!(r.good, cid(10));
            assert_eq!(r.bad, cid(14));
            assert_eq!(r.commits, vec![cid(11), cid(12), cid(13), cid(14)]);
        }
        other => panic!("expected inconclusive, got {other:?}"),
    }
}

#[test]
fn bisect_rejects_unsound_range() {
    let h = sim(20, 12, &[], &[], 0);
    let oracle = SimOracle::new(h.clone());
    let case = case_for(&h, None);
    let mut e = Basic::new(h.as_ref(), &oracle, &case, EngineOptions::default()).unwrap();
    let range = h.commits_between(&cid(13), &cid(19)).unwrap();
    assert!(matches!(e.bisect(&range), Err(EngineError::RangeUnsound { .. })));
}

#[test]
fn differential_analysis_filters_touch_set() {
    let mk = |path: &str| FileChange {
        path: path.into(),
        change: ChangeKind::Modified,
    };
    let commits = vec![
        SimCommit {
            id: cid(0),
            changes: vec![],
        },
        SimCommit {
            id: cid(1),
            changes: vec![mk("src/opt.c"), mk("src/ir.c"), mk("docs/x.md")],
        },
    ];
    let h = SimHistory::from_commits(commits, &[], Some(1)).unwrap();
    let files = differential_analysis(&h, &cid(1), &Regex::new(r"\.c$").unwrap()).unwrap();
    assert_eq!(files, vec!["src/opt.c", "src/ir.c"]);
    assert!(matches!(
        differential_analysis(&h, &cid(0), &Regex::new(r"\.c$").unwrap()),
        Err(VcsError::RootCommit(_))
    ));
}

fn run(h: &Arc<SimHistory>, opts: EngineOptions) -> Result<IsolationReport, EngineError> {
    let oracle = SimOracle::new(h.clone());
    run_basic(h.as_ref(), &oracle, &case_for(h, None), opts)
}

#[test]
fn end_to_end_sim() {
    let h = sim(100, 57, &[20, 60], &[30, 45, 55], 9);
    let report = run(&h, EngineOptions::default()).unwrap();
    assert_eq!(report.status, ReportStatus::Found);
    assert_eq!(report.bic, Some(cid(57)));
    let mut expected: Vec<String> = h
        .commit(57)
        .unwrap()
        .changes
        .iter()
        .map(|c| c.path.clone())
        .filter(|p| p.ends_with(".c"))
        .collect();
    expected.sort();
    assert_eq!(report.candidate_files, expected);
    assert!(report.candidate_files.iter().any(|p| p == FAULTY_PATH));
    assert_eq!(report.oracle_calls, report.probe_log.len());
    assert_eq!(report.fine_range, (release_at(&h, 55), release_at(&h, 60)));
    // 5 commits after the 1.3 minor: ceil(log2 5) = 3
    assert!(report.bisect_calls <= 3);
}

#[test]
fn two_commit_history() {
    let h = sim(2, 1, &[], &[], 0);
    let report = run(&h, EngineOptions::default()).unwrap();
    assert_eq!(report.bic, Some(cid(1)));
    assert_eq!(report.bisect_calls, 0);
}

#[test]
fn bug_at_root_cannot_be_isolated() {
    let h = sim(1, 0, &[], &[], 0);
    assert!(matches!(
        run(&h, EngineOptions::default()),
        Err(EngineError::BugPredatesHistory(_))
    ));
    let h = sim(10, 0, &[], &[], 0);
    assert!(matches!(
        run(&h, EngineOptions::default()),
        Err(EngineError::BugPredatesHistory(_))
    ));
}

#[test]
fn intake_rejects_passing_revision() {
    let h = sim(10, 5, &[], &[], 0);
    let oracle = SimOracle::new(h.clone());
    let case = case_for(&h, Some(3));
    assert!(matches!(
        run_basic(h.as_ref(), &oracle, &case, EngineOptions::default()),
        Err(EngineError::IntakeFailed { .. })
    ));
}

#[test]
fn probe_budget_makes_bisection_inconclusive() {
    let h = sim(1000, 613, &[], &[], 0);
    let opts = EngineOptions {
        exhaustive_majors: false,
        max_probes: Some(5),
    };
    let report = run(&h, opts).unwrap();
    assert_eq!(report.status, ReportStatus::Inconclusive);
    assert_eq!(report.oracle_calls, 5);
    let remaining = report.remaining.unwrap();
    let lo = h.index_of(&remaining.good).unwrap();
    let hi = h.index_of(&remaining.bad).unwrap();
    assert!(lo < 613 && 613 <= hi);
}

#[test]
fn reports_are_deterministic() {
    let h = sim(500, 321, &[50, 200, 400], &[100, 250, 300, 350], 11);
    let a = run(&h, EngineOptions::default()).unwrap();
    let b = run(&h, EngineOptions::default()).unwrap();
    assert_eq!(a.canonical_json(), b.canonical_json());
}

fn arb_case() -> impl Strategy<Value = (usize, usize, Vec<usize>, Vec<usize>, u64)> {
    (2usize..10_000).prop_flat_map(|n| {
        (
            Just(n),
            1..n,
            proptest::collection::btree_set(0..n, 0..5),
            proptest::collection::btree_set(0..n, 0..8),
            any::<u64>(),
        )
            .prop_map(|(n, bic, majors, minors, seed)| {
                let majors: Vec<usize> = majors.into_iter().collect();
                // every minor needs an earlier major to belong to
                let first = majors.first().copied().unwrap_or(usize::MAX);
                let minors: Vec<usize> = minors.into_iter().filter(|&m| m > first).collect();
                (n, bic, majors, minors, seed)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recovers_injected_bic((n, bic, majors, minors, seed) in arb_case()) {
        let h = Arc::new(make_sim_history(n, bic, &release_specs(&majors, &minors), 1, seed).unwrap());
        let report = run(&h, EngineOptions::default()).unwrap();
        prop_assert_eq!(report.bic, Some(cid(bic)));
        prop_assert_eq!(report.oracle_calls, report.probe_log.len());
        let g = h.index_of(report.fine_range.0.commit()).unwrap();
        let b = h.index_of(report.fine_range.1.commit()).unwrap();
        let budget = (usize::BITS - (b - g - 1).leading_zeros()) as usize; // ceil(log2(b - g))
        prop_assert!(report.bisect_calls <= budget, "{} > {}", report.bisect_calls, budget);
        for p in &report.probe_log {
            let i = h.index_of(&p.revision).unwrap();
            prop_assert_eq!(p.verdict.is_fail(), i >= bic);
        }
    }
}
