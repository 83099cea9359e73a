use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{CodedUtterance, CommCode, TimeWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("co-occurrence window size must be at least 2, got {0}")]
pub struct WindowSizeError(pub usize);

/// Unordered pair of distinct codes with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CodePairCount {
    pub a: CommCode,
    pub b: CommCode,
    pub count: u64,
}

/// Code frequencies and co-occurrence counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommNetwork {
    pub window: TimeWindow,
    pub window_size: usize,
    pub node_counts: BTreeMap<CommCode, u64>,
    pub edge_counts: Vec<CodePairCount>,
}

impl CommNetwork {
    pub fn edge(&self, x: CommCode, y: CommCode) -> u64 {
        let (a, b) = if x < y { (x, y) } else { (y, x) };
        self.edge_counts
            .iter()
            .find(|e| e.a == a && e.b == b)
            .map_or(0, |e| e.count)
    }

    pub fn utterance_count(&self) -> u64 {
        self.node_counts.values().sum()
    }
}

fn code_index(code: CommCode) -> usize {
    CommCode::ALL.iter().position(|c| *c == code).expect("code listed")
}

/// Counts co-occurrences over moving windows of `window_size` consecutive
/// utterances (team-wide, in start order). A moving window is attributed to
/// the time window containing the start of its last utterance, so counts add
/// up across any partition of the session.
pub fn compute_comm_network(
    utterances: &[CodedUtterance],
    window: &TimeWindow,
    window_size: usize,
) -> Result<CommNetwork, WindowSizeError> {
    if window_size < 2 {
        return Err(WindowSizeError(window_size));
    }
    debug_assert!(utterances
        .windows(2)
        .all(|w| w[0].window.from_ms <= w[1].window.from_ms));

    let mut node_counts: BTreeMap<CommCode, u64> = CommCode::ALL.iter().map(|c| (*c, 0)).collect();
    let mut pairs = [[0u64; 6]; 6];
    for (j, utt) in utterances.iter().enumerate() {
        if !window.contains(utt.window.from_ms) {
            continue;
        }
        *node_counts.entry(utt.code).or_default() += 1;
        if j + 1 < window_size {
            continue;
        }
        let mut present = [false; 6];
        for u in &utterances[j + 1 - window_size..=j] {
            present[code_index(u.code)] = true;
        }
        for a in 0..6 {
            for b in a + 1..6 {
                if present[a] && present[b] {
                    pairs[a][b] += 1;
                }
            }
        }
    }

    let mut edge_counts = Vec::new();
    for (a, row) in pairs.iter().enumerate() {
        for (b, count) in row.iter().enumerate() {
            if *count > 0 {
                edge_counts.push(CodePairCount {
                    a: CommCode::ALL[a],
                    b: CommCode::ALL[b],
                    count: *count,
                });
            }
        }
    }
    Ok(CommNetwork {
        window: *window,
        window_size,
        node_counts,
        edge_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EntityRole;
    use CommCode::*;

    fn utterances(codes: &[CommCode]) -> Vec<CodedUtterance> {
        codes
            .iter()
            .enumerate()
            .map(|(i, code)| CodedUtterance {
                entity: EntityRole::Pn1,
                window: TimeWindow {
                    from_ms: i as u64 * 1000,
                    to_ms: i as u64 * 1000 + 500,
                },
                text: "x".into(),
                code: *code,
            })
            .collect()
    }

    fn all() -> TimeWindow {
        TimeWindow::new(0, 1_000_000).unwrap()
    }

    /// Nested-loop enumeration of every full moving window.
    fn brute(codes: &[CommCode], size: usize) -> BTreeMap<(CommCode, CommCode), u64> {
        let mut out = BTreeMap::new();
        if codes.len() < size {
            return out;
        }
        for start in 0..=codes.len() - size {
            let slice = &codes[start..start + size];
            for x in CommCode::ALL {
                for y in CommCode::ALL {
                    if x < y && slice.contains(&x) && slice.contains(&y) {
                        *out.entry((x, y)).or_default() += 1;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn adjacent_pairs() {
        let codes = [TaskAllocation, Acknowledging, TaskAllocation, SharingInformation];
        let net = compute_comm_network(&utterances(&codes), &all(), 2).unwrap();
        assert_eq!(net.edge(TaskAllocation, Acknowledging), 2);
        assert_eq!(net.edge(TaskAllocation, SharingInformation), 1);
        assert_eq!(net.edge_counts.len(), 2);
        assert_eq!(net.node_counts[&TaskAllocation], 2);
        assert_eq!(net.node_counts[&Acknowledging], 1);
        assert_eq!(net.node_counts[&SharingInformation], 1);
        let oracle = brute(&codes, 2);
        assert_eq!(oracle[&(Acknowledging, TaskAllocation)], 2);
    }

    #[test]
    fn single_and_repeated_codes() {
        let net = compute_comm_network(&utterances(&[TaskAllocation]), &all(), 2).unwrap();
        assert!(net.edge_counts.is_empty());
        assert_eq!(net.node_counts[&TaskAllocation], 1);
        let net = compute_comm_network(&utterances(&[TaskAllocation; 3]), &all(), 2).unwrap();
        assert!(net.edge_counts.is_empty());
        assert_eq!(net.node_counts[&TaskAllocation], 3);
    }

    #[test]
    fn rejects_tiny_window_size() {
        assert_eq!(
            compute_comm_network(&[], &all(), 1),
            Err(WindowSizeError(1))
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn matches_enumeration(
                idx in proptest::collection::vec(0usize..6, 0..200),
                size in 2usize..5,
            ) {
                let codes: Vec<CommCode> = idx.iter().map(|i| CommCode::ALL[*i]).collect();
                let net = compute_comm_network(&utterances(&codes), &all(), size).unwrap();
                let got: BTreeMap<_, _> =
                    net.edge_counts.iter().map(|e| ((e.a, e.b), e.count)).collect();
                prop_assert_eq!(got, brute(&codes, size));
                prop_assert_eq!(net.utterance_count(), codes.len() as u64);
            }

            #[test]
            fn additive_over_splits(
                idx in proptest::collection::vec(0usize..6, 0..80),
                cut in 0u64..80_000,
            ) {
                let codes: Vec<CommCode> = idx.iter().map(|i| CommCode::ALL[*i]).collect();
                let utts = utterances(&codes);
                let whole = compute_comm_network(&utts, &all(), 3).unwrap();
                let left = compute_comm_network(&utts, &TimeWindow::new(0, cut).unwrap(), 3).unwrap();
                let right = compute_comm_network(&utts, &TimeWindow::new(cut, 1_000_000).unwrap(), 3).unwrap();
                for x in CommCode::ALL {
                    prop_assert_eq!(whole.node_counts[&x], left.node_counts[&x] + right.node_counts[&x]);
                    for y in CommCode::ALL {
                        if x < y {
                            prop_assert_eq!(whole.edge(x, y), left.edge(x, y) + right.edge(x, y));
                        }
                    }
                }
            }
        }
    }
}
