use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::{CompileConfig, Oracle, OracleError, Revision, TestProgram, Verdict};
use crate::vcs::SimHistory;

/// Oracle paired with a [`SimHistory`]: Pass before the injected
/// bug-inducing commit, Fail at and after it, Unresolvable on commits the
/// history marks as unbuildable.
#[derive(Debug)]
pub struct SimOracle {
    history: Arc<SimHistory>,
    extra_unresolvable: BTreeSet<usize>,
    calls: AtomicUsize,
}

impl SimOracle {
    pub fn new(history: Arc<SimHistory>) -> Self {
        SimOracle {
            history,
            extra_unresolvable: BTreeSet::new(),
            calls: AtomicUsize::new(0),
        }
    }

    /// Additional unbuildable commits, on top of those in the history.
    pub fn with_unresolvable(mut self, indices: impl IntoIterator<Item = usize>) -> Self {
        self.extra_unresolvable.extend(indices);
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn history(&self) -> &SimHistory {
        &self.history
    }
}

impl Oracle for SimOracle {
    fn evaluate(
        &self,
        revision: &Revision,
        _config: &CompileConfig,
        _program: &TestProgram,
    ) -> Result<Verdict, OracleError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let i = self
            .history
            .index_of(&revision.commit)
            .ok_or_else(|| OracleError::UnknownRevision(revision.commit.clone()))?;
        Ok(
            if self.history.is_unresolvable(i) || self.extra_unresolvable.contains(&i) {
                Verdict::unresolvable("build")
            } else if self.history.manifests_bug(i) {
                Verdict::Fail
            } else {
                Verdict::Pass
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{FailureCheck, Language};
    use crate::vcs::make_sim_history;
    use proptest::prelude::*;

    fn probe(o: &SimOracle, i: usize) -> Verdict {
        let config = CompileConfig::new(Vec::<String>::new(), Language::C).unwrap();
        let program = TestProgram {
            source: "unused.c".into(),
            check: FailureCheck::AbnormalTermination,
        };
        let commit = o.history().commit(i).unwrap().id.clone();
        o.evaluate(&Revision::commit(commit), &config, &program).unwrap()
    }

    #[test]
    fn unresolvable_injection() {
        let h = Arc::new(make_sim_history(10, 4, &[], 1, 0).unwrap().with_unresolvable([2]));
        let o = SimOracle::new(h).with_unresolvable([7]);
        assert_eq!(probe(&o, 1), Verdict::Pass);
        assert!(!probe(&o, 2).is_resolved());
        assert_eq!(probe(&o, 4), Verdict::Fail);
        assert!(!probe(&o, 7).is_resolved());
        assert_eq!(o.calls(), 4);
    }

    proptest! {
        #[test]
        fn monotone_around_bic(n in 1usize..200, bic_frac in 0.0f64..1.0, seed: u64) {
            let bic = ((n as f64) * bic_frac) as usize % n;
            let o = SimOracle::new(Arc::new(make_sim_history(n, bic, &[], 2, seed).unwrap()));
            for i in 0..n {
                let v = probe(&o, i);
                prop_assert_eq!(v, if i < bic { Verdict::Pass } else { Verdict::Fail });
            }
        }
    }
}
