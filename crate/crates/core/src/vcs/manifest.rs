//! Release manifest reader and writer.
//!
//! One record per line, fields separated by spaces or tabs:
//!
//! ```text
//! <label> <major|minor> <commit-id> <YYYY-MM-DD>
//! ```
//!
//! `#` starts a comment running to the end of the line. Blank lines are
//! ignored. Labels and commit ids are unique across the file.

use std::collections::HashMap;
use std::path::Path;

use chrono::NaiveDate;

use super::{validate_releases, CommitId, Release, ReleaseKind, VcsError};

pub fn parse_manifest(text: &str) -> Result<Vec<Release>, VcsError> {
    let mut releases = Vec::new();
    let mut labels: HashMap<String, usize> = HashMap::new();
    let mut commits: HashMap<String, usize> = HashMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| VcsError::ManifestParse { line, message };
        let fields: Vec<&str> = content.split_whitespace().collect();
        let [label, kind, commit, date] = fields[..] else {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        };
        let kind = match kind {
            "major" => ReleaseKind::Major,
            "minor" => ReleaseKind::Minor,
            other => return Err(err(format!("unknown release kind `{other}`"))),
        };
        let date = NaiveDate::parse_from_str(date, "%Y-%m-%d")
            .map_err(|e| err(format!("bad date `{date}`: {e}")))?;
        if let Some(prev) = labels.insert(label.to_string(), line) {
            return Err(err(format!("duplicate label `{label}` (first on line {prev})")));
        }
        if let Some(prev) = commits.insert(commit.to_string(), line) {
            return Err(err(format!("duplicate commit `{commit}` (first on line {prev})")));
        }
        releases.push(Release {
            label: label.to_string(),
            kind,
            commit: CommitId::new(commit).map_err(|_| err("empty commit id".into()))?,
            date,
        });
    }

    validate_releases(releases).map_err(|e| VcsError::ManifestParse {
        line: 0,
        message: e.to_string(),
    })
}

pub fn read_manifest(path: &Path) -> Result<Vec<Release>, VcsError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| VcsError::BackendUnavailable(format!("{}: {e}", path.display())))?;
    parse_manifest(&text)
}

pub fn render_manifest(releases: &[Release]) -> String {
    let mut out = String::new();
    for r in releases {
        let kind = match r.kind {
            ReleaseKind::Major => "major",
            ReleaseKind::Minor => "minor",
        };
        out.push_str(&format!("{} {} {} {}\n", r.label, kind, r.commit, r.date.format("%Y-%m-%d")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_comments_and_sorts() {
        let text = "# gcc releases\n\
                    2.0 major c30 2020-03-01\n\
                    \n\
                    1.0\tmajor c10 2020-01-01  # first\n\
                    1.1 minor c14 2020-02-01\n";
        let rel = parse_manifest(text).unwrap();
        let labels: Vec<_> = rel.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["1.0", "1.1", "2.0"]);
        assert_eq!(rel[1].kind, ReleaseKind::Minor);
        assert_eq!(parse_manifest(&render_manifest(&rel)).unwrap(), rel);
    }

    #[test]
    fn duplicate_label_is_rejected() {
        let text = "1.0 major c10 2020-01-01\n1.0 major c11 2020-01-02\n";
        match parse_manifest(text) {
            Err(VcsError::ManifestParse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected ManifestParse, got {other:?}"),
        }
    }

    #[test]
    fn malformed_lines_are_rejected() {
        for bad in [
            "1.0 major c10\n",
            "1.0 beta c10 2020-01-01\n",
            "1.0 major c10 2020-13-01\n",
            "1.1 minor c11 2020-01-01\n",
        ] {
            assert!(
                matches!(parse_manifest(bad), Err(VcsError::ManifestParse { .. })),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn empty_manifest_is_empty() {
        assert!(parse_manifest("# nothing\n\n").unwrap().is_empty());
    }
}
