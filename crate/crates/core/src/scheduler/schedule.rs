use serde::{Deserialize, Serialize};

use crate::dispatch::DecisionVector;

use super::ScheduleError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntryStatus {
    Past,
    Committed,
    Tentative,
}

/// One dispatch interval of the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    /// First step of the interval.
    pub start: usize,
    pub p_grid: f64,
    pub q_c: f64,
    pub status: EntryStatus,
    /// Decision instant (step) that committed the entry.
    pub committed_at: Option<usize>,
}

/// Contiguous dispatch-interval entries starting at `origin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSchedule {
    origin: usize,
    n_di: usize,
    entries: Vec<ScheduleEntry>,
}

impl DispatchSchedule {
    pub fn new(origin: usize, n_di: usize) -> Self {
        assert!(n_di > 0, "dispatch interval must span at least one step");
        Self {
            origin,
            n_di,
            entries: Vec::new(),
        }
    }

    /// Schedule whose first `blocks` intervals are committed at zero.
    pub fn bootstrap(origin: usize, n_di: usize, blocks: usize) -> Self {
        let mut s = Self::new(origin, n_di);
        for b in 0..blocks {
            s.entries.push(ScheduleEntry {
                start: origin + b * n_di,
                p_grid: 0.0,
                q_c: 0.0,
                status: EntryStatus::Committed,
                committed_at: Some(origin),
            });
        }
        s
    }

    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    pub fn n_di(&self) -> usize {
        self.n_di
    }

    fn slot(&self, step: usize) -> Option<usize> {
        step.checked_sub(self.origin).map(|o| o / self.n_di)
    }

    pub fn entry_at(&self, step: usize) -> Option<&ScheduleEntry> {
        self.slot(step).and_then(|s| self.entries.get(s))
    }

    /// Committed `(p_grid, q_c)` for every step of `range`.
    pub fn committed_controls(
        &self,
        range: std::ops::Range<usize>,
    ) -> Result<Vec<(f64, f64)>, ScheduleError> {
        range
            .map(|i| match self.entry_at(i) {
                Some(e) if e.status != EntryStatus::Tentative => Ok((e.p_grid, e.q_c)),
                _ => Err(ScheduleError::MissingCommitment { step: i }),
            })
            .collect()
    }

    /// Writes a decision covering the intervals from `start` on. The first
    /// `commit_blocks` become committed, the rest tentative. A committed
    /// entry may only be rewritten with bit-identical values.
    pub fn apply(
        &mut self,
        start: usize,
        decision: &DecisionVector,
        commit_blocks: usize,
        decided_at: usize,
    ) -> Result<(), ScheduleError> {
        let first = self
            .slot(start)
            .filter(|_| (start - self.origin) % self.n_di == 0)
            .ok_or(ScheduleError::Misaligned { step: start })?;
        if first > self.entries.len() {
            return Err(ScheduleError::Gap {
                step: start,
                covered_until: self.origin + self.entries.len() * self.n_di,
            });
        }
        // validate before touching anything
        for b in 0..decision.blocks() {
            if let Some(e) = self.entries.get(first + b) {
                if e.status != EntryStatus::Tentative
                    && (e.p_grid.to_bits() != decision.p_grid[b].to_bits()
                        || e.q_c.to_bits() != decision.q_c[b].to_bits())
                {
                    return Err(ScheduleError::Immutable {
                        start: e.start,
                        committed: (e.p_grid, e.q_c),
                        attempted: (decision.p_grid[b], decision.q_c[b]),
                    });
                }
            }
        }
        for b in 0..decision.blocks() {
            let slot = first + b;
            let commit = b < commit_blocks;
            if slot == self.entries.len() {
                self.entries.push(ScheduleEntry {
                    start: self.origin + slot * self.n_di,
                    p_grid: decision.p_grid[b],
                    q_c: decision.q_c[b],
                    status: EntryStatus::Tentative,
                    committed_at: None,
                });
            }
            let e = &mut self.entries[slot];
            if e.status == EntryStatus::Tentative {
                e.p_grid = decision.p_grid[b];
                e.q_c = decision.q_c[b];
                if commit {
                    e.status = EntryStatus::Committed;
                    e.committed_at = Some(decided_at);
                }
            }
        }
        Ok(())
    }

    /// Marks every interval that ends at or before `step` as past.
    pub fn retire_until(&mut self, step: usize) {
        for e in &mut self.entries {
            if e.start + self.n_di <= step && e.status == EntryStatus::Committed {
                e.status = EntryStatus::Past;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decision(p: &[f64]) -> DecisionVector {
        DecisionVector {
            p_grid: p.to_vec(),
            q_c: vec![0.0; p.len()],
            slack: [0.0; 4],
        }
    }

    #[test]
    fn commits_first_block_and_keeps_rest_tentative() {
        let mut s = DispatchSchedule::bootstrap(0, 4, 2);
        assert_eq!(s.committed_controls(0..8).unwrap(), vec![(0.0, 0.0); 8]);
        s.apply(8, &decision(&[1.0, 2.0, 3.0]), 1, 0).unwrap();
        assert_eq!(s.entry_at(9).unwrap().status, EntryStatus::Committed);
        assert_eq!(s.entry_at(12).unwrap().status, EntryStatus::Tentative);
        assert!(s.committed_controls(8..16).is_err());
        // next decision rewrites tentative entries freely
        s.apply(12, &decision(&[5.0, 6.0]), 1, 4).unwrap();
        assert_eq!(s.entry_at(12).unwrap().p_grid, 5.0);
        assert_eq!(s.entry_at(12).unwrap().committed_at, Some(4));
        assert_eq!(s.entry_at(16).unwrap().status, EntryStatus::Tentative);
    }

    #[test]
    fn committed_entries_are_immutable() {
        let mut s = DispatchSchedule::bootstrap(0, 4, 2);
        s.apply(8, &decision(&[1.0]), 1, 0).unwrap();
        let before = s.clone();
        let err = s.apply(4, &decision(&[0.0, 1.5]), 0, 4).unwrap_err();
        assert!(matches!(err, ScheduleError::Immutable { start: 8, .. }));
        assert_eq!(s, before);
        // identical values are accepted and change nothing
        s.apply(4, &decision(&[0.0, 1.0]), 2, 4).unwrap();
        assert_eq!(s.entries(), before.entries());
    }

    #[test]
    fn rejects_gaps_and_misalignment() {
        let mut s = DispatchSchedule::bootstrap(0, 4, 2);
        assert!(s.apply(6, &decision(&[1.0]), 1, 0).is_err());
        assert!(s.apply(16, &decision(&[1.0]), 1, 0).is_err());
        s.retire_until(4);
        assert_eq!(s.entries()[0].status, EntryStatus::Past);
        assert_eq!(s.entries()[1].status, EntryStatus::Committed);
    }
}
