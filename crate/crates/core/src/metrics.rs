//! Delivery, inter-packet gap (IPG) and age-of-information (AoI) statistics.
//!
//! All quantities are kept as integer histograms keyed in periods and only
//! converted to milliseconds when summarized.
//!
//! The network is fully connected and a delivered packet reaches every other
//! vehicle, so all ordered pairs `(rx, tx)` sharing a transmitter see the same
//! reception history. Pair cursors are therefore kept per transmitter and each
//! sample is weighted by the `V - 1` receivers; the histograms are identical
//! to tracking every pair separately.

use serde::{Deserialize, Serialize};

/// Integer-keyed histogram of non-negative values.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Histogram {
    counts: Vec<u64>,
    total: u64,
}

impl Histogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples(samples: impl IntoIterator<Item = u64>) -> Self {
        let mut h = Histogram::new();
        for s in samples {
            h.add(s, 1);
        }
        h
    }

    pub fn add(&mut self, value: u64, weight: u64) {
        if weight == 0 {
            return;
        }
        let idx = value as usize;
        if idx >= self.counts.len() {
            self.counts.resize(idx + 1, 0);
        }
        self.counts[idx] += weight;
        self.total += weight;
    }

    pub fn count(&self, value: u64) -> u64 {
        self.counts.get(value as usize).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn max_value(&self) -> Option<u64> {
        self.counts.iter().rposition(|&c| c > 0).map(|v| v as u64)
    }

    /// `(value, count)` for every present value, ascending.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(v, &c)| (v as u64, c))
    }

    /// Smallest present value `v` with `P(X > v) <= p`.
    pub fn tail(&self, p: f64) -> Option<u64> {
        if self.total == 0 {
            return None;
        }
        let n = self.total as f64;
        let mut greater = 0u64;
        let mut best = None;
        for (v, &c) in self.counts.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            if greater as f64 / n <= p {
                best = Some(v as u64);
            } else {
                break;
            }
            greater += c;
        }
        best
    }

    /// `P(X = value)`.
    pub fn prob_at(&self, value: u64) -> Option<f64> {
        (self.total > 0).then(|| self.count(value) as f64 / self.total as f64)
    }

    pub fn merge(&mut self, other: &Histogram) {
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, &b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
    }
}

/// CCDF tail of `hist` at probability `p`, in milliseconds.
pub fn ccdf_value(hist: &Histogram, p: f64, period_ms: u32) -> Option<u64> {
    hist.tail(p).map(|v| v * period_ms as u64)
}

/// Probability that a sample equals `ms` milliseconds. Zero when `ms` is not
/// a whole number of periods.
pub fn prob_at(hist: &Histogram, ms: u64, period_ms: u32) -> Option<f64> {
    let period_ms = period_ms as u64;
    if !ms.is_multiple_of(period_ms) {
        return (!hist.is_empty()).then_some(0.0);
    }
    hist.prob_at(ms / period_ms)
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct PairCursors {
    receivers: u64,
    measurement_start: u64,
    last_rx_period: Vec<Option<u64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MetricsStore {
    /// `R`: successful receptions over all ordered pairs.
    pub rx_count: u64,
    /// `T`: transmission attempts over all ordered pairs.
    pub attempt_count: u64,
    /// Ordered pairs with at least one reception.
    pub pairs_with_rx: u64,
    pub ipg: Histogram,
    pub aoi: Histogram,
    cursors: Option<PairCursors>,
}

impl MetricsStore {
    /// Store for `num_targets` vehicles measuring from `measurement_start`.
    pub fn new(num_targets: usize, measurement_start: u64) -> Self {
        MetricsStore {
            cursors: Some(PairCursors {
                receivers: num_targets.saturating_sub(1) as u64,
                measurement_start,
                last_rx_period: vec![None; num_targets],
            }),
            ..Default::default()
        }
    }

    /// Records one measured period. `delivered[v]` says whether vehicle `v`'s
    /// packet got through to every other vehicle.
    ///
    /// Before a pair's first reception its age counts from one period before
    /// the measurement start, so a zero age always means a reception.
    pub fn record_report(&mut self, delivered: &[bool], t: u64) {
        let cursors = self
            .cursors
            .as_mut()
            .expect("record_report on a finalized store");
        assert_eq!(delivered.len(), cursors.last_rx_period.len());
        let w = cursors.receivers;
        if w == 0 {
            return;
        }
        for (last, &ok) in cursors.last_rx_period.iter_mut().zip(delivered) {
            self.attempt_count += w;
            if ok {
                self.rx_count += w;
                match *last {
                    Some(prev) => self.ipg.add(t - prev, w),
                    None => self.pairs_with_rx += w,
                }
                *last = Some(t);
            }
            let age = match *last {
                Some(gen) => t - gen,
                None => t + 1 - cursors.measurement_start,
            };
            self.aoi.add(age, w);
        }
    }

    /// Drops the per-pair cursors. Further recording is not allowed.
    pub fn finalize(mut self) -> Self {
        self.cursors = None;
        self
    }

    pub fn is_finalized(&self) -> bool {
        self.cursors.is_none()
    }

    /// Pointwise sum of counters and histograms; the result is finalized.
    pub fn merge(&self, other: &MetricsStore) -> MetricsStore {
        let mut ipg = self.ipg.clone();
        ipg.merge(&other.ipg);
        let mut aoi = self.aoi.clone();
        aoi.merge(&other.aoi);
        MetricsStore {
            rx_count: self.rx_count + other.rx_count,
            attempt_count: self.attempt_count + other.attempt_count,
            pairs_with_rx: self.pairs_with_rx + other.pairs_with_rx,
            ipg,
            aoi,
            cursors: None,
        }
    }

    /// `R / T`, absent when no attempts were measured.
    pub fn pdr(&self) -> Option<f64> {
        (self.attempt_count > 0).then(|| self.rx_count as f64 / self.attempt_count as f64)
    }

    pub fn summary(&self, period_ms: u32) -> Summary {
        let ms = |v: Option<u64>| v.map(|x| x as f64);
        Summary {
            pdr: self.pdr(),
            ipg_tail_1e5_ms: ms(ccdf_value(&self.ipg, 1e-5, period_ms)),
            ipg_tail_1e4_ms: ms(ccdf_value(&self.ipg, 1e-4, period_ms)),
            prob_ipg_100ms: prob_at(&self.ipg, 100, period_ms),
            aoi_tail_1e5_ms: ms(ccdf_value(&self.aoi, 1e-5, period_ms)),
            aoi_tail_1e4_ms: ms(ccdf_value(&self.aoi, 1e-4, period_ms)),
            prob_aoi_0ms: prob_at(&self.aoi, 0, period_ms),
            n_ipg: self.ipg.total() as f64,
            n_aoi: self.aoi.total() as f64,
            r: self.rx_count as f64,
            t: self.attempt_count as f64,
        }
    }
}

/// The reported statistics of one run. Absent values are `None`.
///
/// Counts are carried as `f64` so aggregate rows (means, standard deviations)
/// share the same shape; per-run counts are exact integers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub pdr: Option<f64>,
    pub ipg_tail_1e5_ms: Option<f64>,
    pub ipg_tail_1e4_ms: Option<f64>,
    pub prob_ipg_100ms: Option<f64>,
    pub aoi_tail_1e5_ms: Option<f64>,
    pub aoi_tail_1e4_ms: Option<f64>,
    pub prob_aoi_0ms: Option<f64>,
    pub n_ipg: f64,
    pub n_aoi: f64,
    pub r: f64,
    pub t: f64,
}

impl Summary {
    pub const FIELDS: [&'static str; 11] = [
        "pdr",
        "ipg_tail_1e5_ms",
        "ipg_tail_1e4_ms",
        "prob_ipg_100ms",
        "aoi_tail_1e5_ms",
        "aoi_tail_1e4_ms",
        "prob_aoi_0ms",
        "n_ipg",
        "n_aoi",
        "r",
        "t",
    ];

    pub fn values(&self) -> [Option<f64>; 11] {
        [
            self.pdr,
            self.ipg_tail_1e5_ms,
            self.ipg_tail_1e4_ms,
            self.prob_ipg_100ms,
            self.aoi_tail_1e5_ms,
            self.aoi_tail_1e4_ms,
            self.prob_aoi_0ms,
            Some(self.n_ipg),
            Some(self.n_aoi),
            Some(self.r),
            Some(self.t),
        ]
    }

    /// Inverse of [`Summary::values`]; missing counts become 0.
    pub fn from_values(v: [Option<f64>; 11]) -> Self {
        Summary {
            pdr: v[0],
            ipg_tail_1e5_ms: v[1],
            ipg_tail_1e4_ms: v[2],
            prob_ipg_100ms: v[3],
            aoi_tail_1e5_ms: v[4],
            aoi_tail_1e4_ms: v[5],
            prob_aoi_0ms: v[6],
            n_ipg: v[7].unwrap_or(0.0),
            n_aoi: v[8].unwrap_or(0.0),
            r: v[9].unwrap_or(0.0),
            t: v[10].unwrap_or(0.0),
        }
    }

    /// Field-wise mean and sample standard deviation over `runs`. A field is
    /// absent in the mean when absent in every run; the deviation needs at
    /// least two present values.
    pub fn aggregate(runs: &[Summary]) -> (Summary, Summary) {
        let mut mean = [None; 11];
        let mut std = [None; 11];
        for i in 0..11 {
            let xs: Vec<f64> = runs.iter().filter_map(|s| s.values()[i]).collect();
            if xs.is_empty() {
                continue;
            }
            let n = xs.len() as f64;
            let m = xs.iter().sum::<f64>() / n;
            mean[i] = Some(m);
            if xs.len() >= 2 {
                let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
                std[i] = Some(var.sqrt());
            }
        }
        (Summary::from_values(mean), Summary::from_values(std))
    }
}
