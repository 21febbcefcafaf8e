//! Target-vehicle scheduling: semi-persistent scheduling with optional
//! interleaved one-shot transmissions.
//!
//! Per period a vehicle first asks [`tx_decision`] which resource to transmit
//! on, then after the transmission calls [`advance_after_tx`] to decrement its
//! counters and resolve expiries. When the one-shot counter expires the
//! vehicle arms a one-shot: its next transmission goes out on a freshly
//! selected resource, after which the persistent grant resumes untouched.

use rand::Rng;

use crate::config::{IntRange, ScenarioConfig, SelectionPolicy};
use crate::ledger::UsageLedger;

/// Scheduling parameters shared by all target vehicles of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SpsParams {
    pub num_resources: usize,
    pub sps_range: IntRange,
    /// `None` when one-shot transmissions are disabled.
    pub oneshot_range: Option<IntRange>,
    pub reselect_prob: f64,
    pub policy: SelectionPolicy,
    pub oneshot_policy: SelectionPolicy,
    pub min_fraction: f64,
    pub extra_co_decrement_on_keep: bool,
}

impl SpsParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        SpsParams {
            num_resources: cfg.num_resources,
            sps_range: cfg.sps_range,
            oneshot_range: cfg.oneshot_enabled.then_some(cfg.oneshot_range),
            reselect_prob: cfg.reselect_prob(),
            policy: cfg.selection_policy,
            oneshot_policy: cfg.oneshot_policy,
            min_fraction: cfg.candidate_min_fraction,
            extra_co_decrement_on_keep: cfg.extra_co_decrement_on_keep,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VehicleState {
    pub vehicle_id: usize,
    pub current_resource: usize,
    pub cs: u32,
    /// Always 0 when one-shot transmissions are disabled.
    pub co: u32,
    pub pending_oneshot: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TxDecision {
    pub resource: usize,
    pub is_oneshot: bool,
}

/// Which expiry case, if any, [`advance_after_tx`] resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expiry {
    None,
    /// SPS counter expired alone and the grant was kept.
    SpsKept,
    /// SPS counter expired alone and a new grant was selected.
    SpsReselected,
    /// One-shot counter expired alone; the next transmission is a one-shot.
    OneShotArmed,
    /// Both counters expired together and the grant was kept.
    BothKept,
    /// Both counters expired together and a new grant was selected.
    BothReselected,
}

impl Expiry {
    pub fn reselected(self) -> bool {
        matches!(self, Expiry::SpsReselected | Expiry::BothReselected)
    }
}

/// Uniform draw from the closed interval.
pub fn draw_counter<R: Rng + ?Sized>(range: IntRange, rng: &mut R) -> u32 {
    debug_assert!(!range.is_empty(), "empty counter range {range}");
    range.sample(rng)
}

/// Smallest candidate pool allowed for `m` resources.
pub fn min_pool_size(m: usize, min_fraction: f64) -> usize {
    // The epsilon keeps products like 0.2 * 100 from rounding up to 21.
    let raw = (min_fraction * m as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(m)
}

/// The sensing candidate pool, described without materializing it.
///
/// Members are the resources other than `own` whose usage total is below
/// `threshold`, plus the first `quota` resources (by index) whose total equals
/// `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct CandidatePool {
    own: Option<usize>,
    threshold: u32,
    quota: usize,
    size: usize,
}

impl CandidatePool {
    fn build(ledger: &UsageLedger, own: Option<usize>, min_fraction: f64) -> Self {
        let hist = ledger.usage_histogram();
        let own_u = own.map(|o| ledger.usage_total(o) as usize);
        let count = |u: usize| hist[u] - usize::from(own_u == Some(u));
        let target = min_pool_size(ledger.num_resources(), min_fraction);
        let free = count(0);
        if free >= target {
            return CandidatePool { own, threshold: 0, quota: free, size: free };
        }
        let mut below = 0;
        for u in 0..hist.len() {
            let c = count(u);
            if below + c >= target {
                return CandidatePool { own, threshold: u as u32, quota: target - below, size: target };
            }
            below += c;
        }
        // Fewer resources than the minimum pool: take everything but `own`.
        let top = ledger.window();
        CandidatePool { own, threshold: top as u32, quota: count(top), size: below }
    }

    /// Members in ascending index order.
    fn members<'a>(&self, ledger: &'a UsageLedger) -> impl Iterator<Item = usize> + 'a {
        let pool = *self;
        let mut ties = 0;
        ledger.totals().iter().enumerate().filter_map(move |(j, &u)| {
            if Some(j) == pool.own {
                return None;
            }
            if u < pool.threshold {
                return Some(j);
            }
            if u == pool.threshold && ties < pool.quota {
                ties += 1;
                return Some(j);
            }
            None
        })
    }
}

/// Resources considered free by the sensing procedure, ascending.
///
/// Free means no recorded use in the window, excluding `own`. When fewer than
/// the minimum pool remain, the least-used resources (ascending `U_j`, then
/// ascending index) are added until the pool reaches the minimum. `own` is
/// only ever used when there is no other resource at all.
pub fn sensing_candidates(ledger: &UsageLedger, own: Option<usize>, min_fraction: f64) -> Vec<usize> {
    let pool = CandidatePool::build(ledger, own, min_fraction);
    if pool.size == 0 {
        return own.into_iter().collect();
    }
    pool.members(ledger).collect()
}

pub fn select_resource<R: Rng + ?Sized>(
    policy: SelectionPolicy,
    ledger: &UsageLedger,
    own: Option<usize>,
    min_fraction: f64,
    rng: &mut R,
) -> usize {
    match policy {
        SelectionPolicy::Uniform => rng.random_range(0..ledger.num_resources()),
        SelectionPolicy::Sensing => {
            let pool = CandidatePool::build(ledger, own, min_fraction);
            if pool.size == 0 {
                return own.unwrap_or(0);
            }
            let k = rng.random_range(0..pool.size);
            pool.members(ledger).nth(k).expect("pool size counts its members")
        }
    }
}

impl VehicleState {
    /// Fresh vehicle: initial grant and counters.
    pub fn new<R: Rng + ?Sized>(vehicle_id: usize, params: &SpsParams, ledger: &UsageLedger, rng: &mut R) -> Self {
        let current_resource = select_resource(params.policy, ledger, None, params.min_fraction, rng);
        let cs = draw_counter(params.sps_range, rng);
        let co = params.oneshot_range.map_or(0, |r| draw_counter(r, rng));
        VehicleState {
            vehicle_id,
            current_resource,
            cs,
            co,
            pending_oneshot: false,
        }
    }

    /// Checks the state invariants against `params`.
    pub fn is_consistent(&self, params: &SpsParams) -> bool {
        let co_ok = match params.oneshot_range {
            Some(r) => self.co <= r.hi,
            None => self.co == 0 && !self.pending_oneshot,
        };
        self.current_resource < params.num_resources && self.cs <= params.sps_range.hi && co_ok
    }
}

/// Chooses the resource for this period's transmission.
pub fn tx_decision<R: Rng + ?Sized>(
    state: &mut VehicleState,
    params: &SpsParams,
    ledger: &UsageLedger,
    rng: &mut R,
) -> TxDecision {
    if !state.pending_oneshot {
        return TxDecision {
            resource: state.current_resource,
            is_oneshot: false,
        };
    }
    let range = params
        .oneshot_range
        .expect("pending one-shot requires one-shot transmissions enabled");
    let resource = select_resource(
        params.oneshot_policy,
        ledger,
        Some(state.current_resource),
        params.min_fraction,
        rng,
    );
    state.pending_oneshot = false;
    state.co = draw_counter(range, rng);
    TxDecision {
        resource,
        is_oneshot: true,
    }
}

/// Decrements the counters after a transmission and resolves expiries.
pub fn advance_after_tx<R: Rng + ?Sized>(
    state: &mut VehicleState,
    params: &SpsParams,
    ledger: &UsageLedger,
    rng: &mut R,
) -> Expiry {
    state.cs = state.cs.saturating_sub(1);
    if params.oneshot_range.is_some() {
        state.co = state.co.saturating_sub(1);
    }
    let sps_expired = state.cs == 0;
    let os_expired = params.oneshot_range.is_some() && state.co == 0;

    match (sps_expired, os_expired) {
        (false, false) => Expiry::None,
        (false, true) => {
            state.pending_oneshot = true;
            Expiry::OneShotArmed
        }
        (true, false) => {
            if reselect_draw(params, rng) {
                reselect(state, params, ledger, rng);
                state.cs = draw_counter(params.sps_range, rng);
                if let Some(r) = params.oneshot_range {
                    state.co = draw_counter(r, rng);
                }
                Expiry::SpsReselected
            } else {
                state.cs = draw_counter(params.sps_range, rng);
                if params.extra_co_decrement_on_keep && params.oneshot_range.is_some() {
                    state.co = state.co.saturating_sub(1);
                    if state.co == 0 {
                        state.pending_oneshot = true;
                    }
                }
                Expiry::SpsKept
            }
        }
        (true, true) => {
            let range = params.oneshot_range.expect("checked above");
            let reselected = reselect_draw(params, rng);
            if reselected {
                reselect(state, params, ledger, rng);
            }
            state.cs = draw_counter(params.sps_range, rng);
            state.co = draw_counter(range, rng);
            if reselected {
                Expiry::BothReselected
            } else {
                Expiry::BothKept
            }
        }
    }
}

fn reselect_draw<R: Rng + ?Sized>(params: &SpsParams, rng: &mut R) -> bool {
    rng.random::<f64>() < params.reselect_prob
}

fn reselect<R: Rng + ?Sized>(state: &mut VehicleState, params: &SpsParams, ledger: &UsageLedger, rng: &mut R) {
    state.current_resource = select_resource(
        params.policy,
        ledger,
        Some(state.current_resource),
        params.min_fraction,
        rng,
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;
    use rand::SeedableRng;

    fn rng(seed: u64) -> SimRng {
        SimRng::seed_from_u64(seed)
    }

    fn params(oneshot: bool, reselect_prob: f64) -> SpsParams {
        SpsParams {
            num_resources: 100,
            sps_range: IntRange::new(5, 15),
            oneshot_range: oneshot.then_some(IntRange::new(2, 6)),
            reselect_prob,
            policy: SelectionPolicy::Sensing,
            oneshot_policy: SelectionPolicy::Sensing,
            min_fraction: 0.2,
            extra_co_decrement_on_keep: false,
        }
    }

    fn state(resource: usize, cs: u32, co: u32) -> VehicleState {
        VehicleState {
            vehicle_id: 0,
            current_resource: resource,
            cs,
            co,
            pending_oneshot: false,
        }
    }

    /// Ledger where only `free` is unused in the last period.
    fn ledger_with_only_free(m: usize, free: usize) -> UsageLedger {
        let mut l = UsageLedger::new(m, 10);
        let busy: Vec<usize> = (0..m).filter(|&j| j != free).collect();
        l.record_period(&busy);
        l
    }

    #[test]
    fn degenerate_counter_range() {
        let mut r = rng(1);
        for _ in 0..100 {
            assert_eq!(draw_counter(IntRange::new(7, 7), &mut r), 7);
        }
    }

    #[test]
    fn counter_chi_square_5_15() {
        let mut r = rng(2);
        let n = 1_000_000u64;
        let mut counts = [0u64; 11];
        for _ in 0..n {
            let v = draw_counter(IntRange::new(5, 15), &mut r);
            assert!((5..=15).contains(&v));
            counts[(v - 5) as usize] += 1;
        }
        let expected = n as f64 / 11.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 10 degrees of freedom, 0.999 quantile.
        assert!(chi2 < 29.59, "chi2 = {chi2}");
    }

    #[test]
    fn counter_mean_2_6() {
        let mut r = rng(3);
        let n = 1_000_000;
        let sum: u64 = (0..n).map(|_| draw_counter(IntRange::new(2, 6), &mut r) as u64).sum();
        let mean = sum as f64 / n as f64;
        assert!((mean - 4.0).abs() < 0.01, "mean = {mean}");
    }

    #[test]
    fn candidates_set_difference() {
        let mut l = UsageLedger::new(100, 10);
        l.record_period(&[5, 7]);
        let c = sensing_candidates(&l, Some(3), 0.2);
        assert_eq!(c.len(), 97);
        assert!(!c.contains(&3) && !c.contains(&5) && !c.contains(&7));
    }

    #[test]
    fn candidates_top_up_lowest_usage() {
        let mut l = UsageLedger::new(5, 10);
        // U = [1, 2, 3, 4, 5]
        for t in 0..5 {
            let row: Vec<usize> = (0..5).filter(|&j| j >= t).collect();
            l.record_period(&row);
        }
        assert_eq!(l.totals(), &[1, 2, 3, 4, 5]);
        assert_eq!(sensing_candidates(&l, Some(4), 0.2), vec![0]);
        // Ties break by index.
        let mut tied = UsageLedger::new(5, 10);
        tied.record_period(&[0, 1, 2, 3, 4]);
        assert_eq!(sensing_candidates(&tied, Some(0), 0.4), vec![1, 2]);
    }

    #[test]
    fn candidates_empty_ledger() {
        let l = UsageLedger::new(10, 10);
        assert_eq!(sensing_candidates(&l, Some(0), 0.2), (1..10).collect::<Vec<_>>());
    }

    #[test]
    fn candidates_single_resource_falls_back_to_own() {
        let mut l = UsageLedger::new(1, 10);
        l.record_period(&[0]);
        assert_eq!(sensing_candidates(&l, Some(0), 0.2), vec![0]);
    }

    /// Materialized reference: free set, then explicit sort-based top-up.
    fn candidates_oracle(ledger: &UsageLedger, own: Option<usize>, min_fraction: f64) -> Vec<usize> {
        let m = ledger.num_resources();
        let totals = ledger.totals();
        let mut c: Vec<usize> = (0..m).filter(|&j| totals[j] == 0 && Some(j) != own).collect();
        let target = min_pool_size(m, min_fraction);
        if c.len() < target {
            let mut rest: Vec<usize> = (0..m).filter(|&j| totals[j] > 0 && Some(j) != own).collect();
            rest.sort_by_key(|&j| (totals[j], j));
            let need = target - c.len();
            c.extend(rest.into_iter().take(need));
            if c.is_empty() {
                c.extend(own);
            }
            c.sort_unstable();
        }
        c
    }

    proptest::proptest! {
        #[test]
        fn candidates_match_oracle(
            m in 1usize..40,
            window in 1usize..6,
            rows in proptest::collection::vec(proptest::collection::vec(0usize..40, 0..40), 0..8),
            own in proptest::option::of(0usize..40),
            frac in 0.01f64..=1.0,
        ) {
            let mut l = UsageLedger::new(m, window);
            for r in &rows {
                let r: Vec<usize> = r.iter().map(|&j| j % m).collect();
                l.record_period(&r);
            }
            let own = own.map(|o| o % m);
            let got = sensing_candidates(&l, own, frac);
            proptest::prop_assert_eq!(&got, &candidates_oracle(&l, own, frac));
            let mut r = rng(m as u64);
            for _ in 0..8 {
                let pick = select_resource(SelectionPolicy::Sensing, &l, own, frac, &mut r);
                proptest::prop_assert!(got.contains(&pick));
            }
        }
    }

    #[test]
    fn min_pool_sizes() {
        assert_eq!(min_pool_size(100, 0.2), 20);
        assert_eq!(min_pool_size(5, 0.2), 1);
        assert_eq!(min_pool_size(7, 0.2), 2);
        assert_eq!(min_pool_size(10, 1.0), 10);
        assert_eq!(min_pool_size(1, 0.01), 1);
    }

    #[test]
    fn select_uniform_single_resource() {
        let l = UsageLedger::new(1, 10);
        let mut r = rng(4);
        for _ in 0..10 {
            assert_eq!(select_resource(SelectionPolicy::Uniform, &l, None, 0.2, &mut r), 0);
        }
    }

    #[test]
    fn select_sensing_singleton() {
        let l = ledger_with_only_free(100, 4);
        // Pool is topped up to 20; with min_fraction 0.01 the pool is just {4}.
        let mut r = rng(5);
        for _ in 0..50 {
            assert_eq!(select_resource(SelectionPolicy::Sensing, &l, Some(9), 0.01, &mut r), 4);
        }
    }

    #[test]
    fn select_uniform_frequencies() {
        let l = UsageLedger::new(100, 10);
        let mut r = rng(6);
        let n = 1_000_000;
        let mut counts = vec![0u64; 100];
        for _ in 0..n {
            counts[select_resource(SelectionPolicy::Uniform, &l, None, 0.2, &mut r)] += 1;
        }
        for c in counts {
            let f = c as f64 / n as f64;
            assert!((f - 0.01).abs() < 0.001, "freq {f}");
        }
    }

    #[test]
    fn persistent_decision_leaves_state() {
        let p = params(true, 0.2);
        let l = UsageLedger::new(100, 10);
        let mut s = state(17, 4, 3);
        let before = s.clone();
        let d = tx_decision(&mut s, &p, &l, &mut rng(7));
        assert_eq!(d, TxDecision { resource: 17, is_oneshot: false });
        assert_eq!(s, before);
    }

    #[test]
    fn oneshot_decision_uses_fresh_resource_once() {
        let mut p = params(true, 0.2);
        p.min_fraction = 0.01;
        let l = ledger_with_only_free(100, 9);
        let mut s = state(17, 4, 0);
        s.pending_oneshot = true;
        let mut r = rng(8);
        let d = tx_decision(&mut s, &p, &l, &mut r);
        assert_eq!(d, TxDecision { resource: 9, is_oneshot: true });
        assert!(!s.pending_oneshot);
        assert!((2..=6).contains(&s.co));
        assert_eq!(s.current_resource, 17);
        let d2 = tx_decision(&mut s, &p, &l, &mut r);
        assert_eq!(d2, TxDecision { resource: 17, is_oneshot: false });
    }

    #[test]
    fn plain_decrement() {
        let p = params(true, 0.2);
        let l = UsageLedger::new(100, 10);
        let mut s = state(17, 3, 5);
        assert_eq!(advance_after_tx(&mut s, &p, &l, &mut rng(9)), Expiry::None);
        assert_eq!(s, state(17, 2, 4));
    }

    #[test]
    fn sps_expiry_keep_resets_cs_only() {
        let p = params(true, 0.0);
        let l = UsageLedger::new(100, 10);
        let mut s = state(17, 1, 4);
        assert_eq!(advance_after_tx(&mut s, &p, &l, &mut rng(10)), Expiry::SpsKept);
        assert!((5..=15).contains(&s.cs));
        assert_eq!(s.co, 3);
        assert_eq!(s.current_resource, 17);
        assert!(!s.pending_oneshot);
    }

    #[test]
    fn sps_expiry_keep_with_extra_decrement() {
        let mut p = params(true, 0.0);
        p.extra_co_decrement_on_keep = true;
        let l = UsageLedger::new(100, 10);
        let mut s = state(17, 1, 4);
        advance_after_tx(&mut s, &p, &l, &mut rng(11));
        assert_eq!(s.co, 2);
        let mut s = state(17, 1, 2);
        advance_after_tx(&mut s, &p, &l, &mut rng(11));
        assert_eq!(s.co, 0);
        assert!(s.pending_oneshot);
    }

    #[test]
    fn sps_expiry_reselect_resets_both() {
        let mut p = params(true, 1.0);
        p.min_fraction = 0.01;
        let l = ledger_with_only_free(100, 42);
        let mut s = state(17, 1, 4);
        assert_eq!(advance_after_tx(&mut s, &p, &l, &mut rng(12)), Expiry::SpsReselected);
        assert_eq!(s.current_resource, 42);
        assert!((5..=15).contains(&s.cs));
        assert!((2..=6).contains(&s.co));
    }

    #[test]
    fn oneshot_expiry_arms() {
        let p = params(true, 0.2);
        let l = UsageLedger::new(100, 10);
        let mut s = state(17, 4, 1);
        assert_eq!(advance_after_tx(&mut s, &p, &l, &mut rng(13)), Expiry::OneShotArmed);
        assert_eq!((s.cs, s.co, s.pending_oneshot), (3, 0, true));
        assert_eq!(s.current_resource, 17);
    }

    #[test]
    fn simultaneous_expiry_reselect() {
        let mut p = params(true, 1.0);
        p.min_fraction = 0.01;
        let l = ledger_with_only_free(100, 3);
        let mut s = state(17, 1, 1);
        assert_eq!(advance_after_tx(&mut s, &p, &l, &mut rng(14)), Expiry::BothReselected);
        assert_eq!(s.current_resource, 3);
        assert!((5..=15).contains(&s.cs));
        assert!((2..=6).contains(&s.co));
        assert!(!s.pending_oneshot);
    }

    #[test]
    fn simultaneous_expiry_keep() {
        let p = params(true, 0.0);
        let l = UsageLedger::new(100, 10);
        let mut s = state(17, 1, 1);
        assert_eq!(advance_after_tx(&mut s, &p, &l, &mut rng(15)), Expiry::BothKept);
        assert_eq!(s.current_resource, 17);
        assert!((5..=15).contains(&s.cs));
        assert!((2..=6).contains(&s.co));
        assert!(!s.pending_oneshot);
    }

    #[test]
    fn classic_sps_never_moves_without_reselection() {
        let p = params(false, 0.0);
        let l = UsageLedger::new(100, 10);
        let mut r = rng(16);
        let mut s = VehicleState::new(0, &p, &l, &mut r);
        let start = s.current_resource;
        for _ in 0..100_000 {
            let d = tx_decision(&mut s, &p, &l, &mut r);
            assert_eq!(d.resource, start);
            assert!(!d.is_oneshot);
            advance_after_tx(&mut s, &p, &l, &mut r);
        }
        assert_eq!(s.co, 0);
    }

    #[test]
    fn classic_sps_reselection_cadence_uniform() {
        let mut p = params(false, 1.0);
        p.sps_range = IntRange::new(5, 15);
        let l = UsageLedger::new(100, 10);
        let mut r = rng(17);
        let mut s = VehicleState::new(0, &p, &l, &mut r);
        let mut counts = [0u64; 11];
        let mut since = 0u32;
        let mut events = 0u64;
        // Skip the first interval (initial draw, not a reselection gap).
        let mut started = false;
        while events < 1_000_000 {
            tx_decision(&mut s, &p, &l, &mut r);
            since += 1;
            if advance_after_tx(&mut s, &p, &l, &mut r).reselected() {
                if started {
                    assert!((5..=15).contains(&since));
                    counts[(since - 5) as usize] += 1;
                    events += 1;
                }
                started = true;
                since = 0;
            }
        }
        let expected = events as f64 / 11.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 29.59, "chi2 = {chi2}");
    }

    #[test]
    fn randomized_steps_keep_invariants() {
        for (oneshot, pr, extra) in [(true, 0.2, false), (true, 0.7, true), (false, 0.2, false), (true, 1.0, false)] {
            let mut p = params(oneshot, pr);
            p.extra_co_decrement_on_keep = extra;
            let mut r = rng(18);
            let mut l = UsageLedger::new(100, 10);
            let mut s = VehicleState::new(0, &p, &l, &mut r);
            let mut last_resource = s.current_resource;
            for step in 0..100_000u32 {
                assert!(s.is_consistent(&p));
                let d = tx_decision(&mut s, &p, &l, &mut r);
                assert!(d.resource < 100);
                // One-shot transmissions never move the grant; persistent
                // ones always use it.
                assert_eq!(s.current_resource, last_resource);
                if !d.is_oneshot {
                    assert_eq!(d.resource, s.current_resource);
                }
                l.record_period(&[d.resource, (step % 100) as usize]);
                let e = advance_after_tx(&mut s, &p, &l, &mut r);
                if !e.reselected() {
                    assert_eq!(s.current_resource, last_resource);
                }
                if !oneshot {
                    assert!(!matches!(e, Expiry::OneShotArmed | Expiry::BothKept | Expiry::BothReselected));
                }
                last_resource = s.current_resource;
            }
        }
    }
}
