//! Sliding window of per-resource usage observations.
//!
//! Row `t` of the window is the binary vector `u_j(t)` over all resources;
//! rows are stored sparsely as the sorted list of resources with `u_j = 1`.
//! Per-resource totals `U_j` are maintained incrementally as rows enter and
//! leave the window.

use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageLedger {
    num_resources: usize,
    window: usize,
    rows: VecDeque<Vec<u32>>,
    totals: Vec<u32>,
    /// `by_total[u]`: number of resources with `U_j = u`.
    by_total: Vec<usize>,
    spare: Vec<u32>,
}

impl UsageLedger {
    pub fn new(num_resources: usize, window: usize) -> Self {
        assert!(window >= 1, "ledger window must hold at least one period");
        UsageLedger {
            num_resources,
            window,
            rows: VecDeque::with_capacity(window + 1),
            totals: vec![0; num_resources],
            by_total: {
                let mut b = vec![0; window + 1];
                b[0] = num_resources;
                b
            },
            spare: Vec::new(),
        }
    }

    pub fn num_resources(&self) -> usize {
        self.num_resources
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Number of rows currently retained.
    pub fn period_count(&self) -> usize {
        self.rows.len()
    }

    /// Appends one period's observations, evicting the oldest row once the
    /// window is full. Duplicate indices count once.
    pub fn record_period(&mut self, used: &[usize]) {
        let mut row = std::mem::take(&mut self.spare);
        row.clear();
        row.extend(used.iter().map(|&j| {
            assert!(j < self.num_resources, "resource {j} out of range");
            j as u32
        }));
        if !row.is_sorted() {
            row.sort_unstable();
        }
        row.dedup();
        if self.rows.len() == self.window {
            let old = self.rows.pop_front().expect("non-empty");
            for &j in &old {
                let total = &mut self.totals[j as usize];
                self.by_total[*total as usize] -= 1;
                *total -= 1;
                self.by_total[*total as usize] += 1;
            }
            self.spare = old;
        }
        for &j in &row {
            let total = &mut self.totals[j as usize];
            self.by_total[*total as usize] -= 1;
            *total += 1;
            self.by_total[*total as usize] += 1;
        }
        self.rows.push_back(row);
    }

    /// `U_j`: number of retained periods in which `j` was used.
    pub fn usage_total(&self, j: usize) -> u32 {
        self.totals[j]
    }

    pub fn totals(&self) -> &[u32] {
        &self.totals
    }

    /// `u_j(t)` for retained row `t` (0 is the oldest).
    pub fn used(&self, t: usize, j: usize) -> bool {
        self.rows[t].binary_search(&(j as u32)).is_ok()
    }

    pub fn column(&self, j: usize) -> Vec<bool> {
        (0..self.rows.len()).map(|t| self.used(t, j)).collect()
    }

    /// Resources used at least once in the window, ascending.
    pub fn used_resources(&self) -> Vec<usize> {
        self.totals
            .iter()
            .enumerate()
            .filter(|(_, &u)| u > 0)
            .map(|(j, _)| j)
            .collect()
    }

    /// `|{ j : U_j > 0 }|` without scanning.
    pub fn used_count(&self) -> usize {
        self.num_resources - self.by_total[0]
    }

    /// Number of resources per usage total: entry `u` counts the `j` with
    /// `U_j = u`, for `u` in `0..=window`.
    pub fn usage_histogram(&self) -> &[usize] {
        &self.by_total
    }
}
