//! Slotted broadcast channel and the single-replication loop.
//!
//! The network is fully connected: a packet is delivered to every other
//! vehicle exactly when its transmitter is alone on its resource, counting
//! both target vehicles and attackers. There is no capture, fading or
//! half-duplex loss.

use crate::attacker::{attacker_advance, AttackerState};
use crate::config::{ConfigError, ScenarioConfig};
use crate::ledger::UsageLedger;
use crate::metrics::MetricsStore;
use crate::rng::RngStreams;
use crate::sps::{advance_after_tx, tx_decision, SpsParams, TxDecision, VehicleState};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PeriodReport {
    pub period: u64,
    /// Resource used by each target vehicle.
    pub resources: Vec<usize>,
    pub delivered: Vec<bool>,
    /// Resources with exactly one target transmitter and no attacker, ascending.
    pub decodable: Vec<usize>,
    /// Resources with at least one transmitter of any kind, ascending.
    pub occupied: Vec<usize>,
}

impl PeriodReport {
    pub fn delivered_count(&self) -> usize {
        self.delivered.iter().filter(|&&d| d).count()
    }
}

/// Reusable per-resource occupancy counters.
#[derive(Debug, Clone)]
pub struct Channel {
    targets_on: Vec<u32>,
    attackers_on: Vec<u32>,
}

impl Channel {
    pub fn new(num_resources: usize) -> Self {
        Channel {
            targets_on: vec![0; num_resources],
            attackers_on: vec![0; num_resources],
        }
    }

    pub fn resolve_into(&mut self, target_tx: &[usize], attacker_tx: &[usize], report: &mut PeriodReport) {
        for &r in target_tx {
            self.targets_on[r] += 1;
        }
        for &r in attacker_tx {
            self.attackers_on[r] += 1;
        }

        report.resources.clear();
        report.resources.extend_from_slice(target_tx);
        report.delivered.clear();
        report
            .delivered
            .extend(target_tx.iter().map(|&r| self.targets_on[r] == 1 && self.attackers_on[r] == 0));

        report.decodable.clear();
        report.occupied.clear();
        let transmitters = target_tx.len() + attacker_tx.len();
        if 4 * transmitters >= self.targets_on.len() {
            // Dense: one ordered pass over all resources beats sorting.
            for (r, (t, a)) in self.targets_on.iter_mut().zip(&mut self.attackers_on).enumerate() {
                if *t + *a > 0 {
                    report.occupied.push(r);
                    if *t == 1 && *a == 0 {
                        report.decodable.push(r);
                    }
                    *t = 0;
                    *a = 0;
                }
            }
            return;
        }
        for &r in target_tx.iter().chain(attacker_tx) {
            if self.targets_on[r] + self.attackers_on[r] > 0 {
                report.occupied.push(r);
                if self.targets_on[r] == 1 && self.attackers_on[r] == 0 {
                    report.decodable.push(r);
                }
                // Zeroing marks the resource as already visited.
                self.targets_on[r] = 0;
                self.attackers_on[r] = 0;
            }
        }
        report.decodable.sort_unstable();
        report.occupied.sort_unstable();
    }
}

/// Resolves one period's transmissions.
pub fn resolve_period(num_resources: usize, target_tx: &[usize], attacker_tx: &[usize]) -> PeriodReport {
    let mut report = PeriodReport::default();
    Channel::new(num_resources).resolve_into(target_tx, attacker_tx, &mut report);
    report
}

/// Everything an observer may inspect after a period's transmissions were
/// resolved, before ledgers and counters advance.
pub struct PeriodView<'a> {
    pub period: u64,
    pub vehicles: &'a [VehicleState],
    pub decisions: &'a [TxDecision],
    pub attackers: &'a [AttackerState],
    pub report: &'a PeriodReport,
    /// `|S|` as the attackers currently see it.
    pub target_set_size: usize,
}

pub trait Observer {
    fn on_period(&mut self, view: &PeriodView<'_>);
}

impl Observer for () {
    fn on_period(&mut self, _: &PeriodView<'_>) {}
}

impl<F: FnMut(&PeriodView<'_>)> Observer for F {
    fn on_period(&mut self, view: &PeriodView<'_>) {
        self(view)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    pub attacker_expiries: u64,
    pub attacker_reselections: u64,
    pub oneshots: u64,
    pub reselections: u64,
}

/// One replication's world state.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: ScenarioConfig,
    params: SpsParams,
    period: u64,
    vehicles: Vec<VehicleState>,
    attackers: Vec<AttackerState>,
    streams: RngStreams,
    ledger: UsageLedger,
    metrics: MetricsStore,
    channel: Channel,
    decisions: Vec<TxDecision>,
    target_tx: Vec<usize>,
    attacker_tx: Vec<usize>,
    report: PeriodReport,
    stats: RunStats,
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig, replication_id: u32) -> Result<Self, ConfigError> {
        let cfg = cfg.clone().validate()?;
        let params = SpsParams::from_config(&cfg);
        let mut streams = RngStreams::derive(cfg.master_seed, replication_id, cfg.num_targets, cfg.num_attackers);
        let ledger = UsageLedger::new(cfg.num_resources, cfg.sensing_window_periods);
        let vehicles = streams
            .targets
            .iter_mut()
            .enumerate()
            .map(|(i, rng)| VehicleState::new(i, &params, &ledger, rng))
            .collect();
        let attackers = streams
            .attackers
            .iter_mut()
            .enumerate()
            .map(|(i, rng)| AttackerState::new(i, &ledger, cfg.attacker_interval, rng))
            .collect();
        Ok(Simulation {
            metrics: MetricsStore::new(cfg.num_targets, cfg.warmup_periods),
            channel: Channel::new(cfg.num_resources),
            decisions: Vec::with_capacity(cfg.num_targets),
            target_tx: Vec::with_capacity(cfg.num_targets),
            attacker_tx: Vec::with_capacity(cfg.num_attackers),
            report: PeriodReport::default(),
            stats: RunStats::default(),
            period: 0,
            cfg,
            params,
            vehicles,
            attackers,
            streams,
            ledger,
        })
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn vehicles(&self) -> &[VehicleState] {
        &self.vehicles
    }

    pub fn attackers(&self) -> &[AttackerState] {
        &self.attackers
    }

    pub fn ledger(&self) -> &UsageLedger {
        &self.ledger
    }

    pub fn metrics(&self) -> &MetricsStore {
        &self.metrics
    }

    pub fn stats(&self) -> RunStats {
        self.stats
    }

    pub fn last_report(&self) -> &PeriodReport {
        &self.report
    }

    /// Runs one period: decide, jam, resolve, measure, sense, advance.
    pub fn step<O: Observer + ?Sized>(&mut self, observer: &mut O) {
        let t = self.period;

        self.decisions.clear();
        for (v, rng) in self.vehicles.iter_mut().zip(&mut self.streams.targets) {
            let d = tx_decision(v, &self.params, &self.ledger, rng);
            self.stats.oneshots += u64::from(d.is_oneshot);
            self.decisions.push(d);
        }
        self.target_tx.clear();
        self.target_tx.extend(self.decisions.iter().map(|d| d.resource));
        self.attacker_tx.clear();
        self.attacker_tx.extend(self.attackers.iter().map(|a| a.attack_resource));

        self.channel
            .resolve_into(&self.target_tx, &self.attacker_tx, &mut self.report);
        self.report.period = t;

        if t >= self.cfg.warmup_periods {
            self.metrics.record_report(&self.report.delivered, t);
        }

        observer.on_period(&PeriodView {
            period: t,
            vehicles: &self.vehicles,
            decisions: &self.decisions,
            attackers: &self.attackers,
            report: &self.report,
            target_set_size: self.ledger.used_count(),
        });

        if self.cfg.sense_any_energy {
            self.ledger.record_period(&self.report.occupied);
        } else {
            self.ledger.record_period(&self.report.decodable);
        }

        for (v, rng) in self.vehicles.iter_mut().zip(&mut self.streams.targets) {
            let e = advance_after_tx(v, &self.params, &self.ledger, rng);
            self.stats.reselections += u64::from(e.reselected());
        }
        for (a, rng) in self.attackers.iter_mut().zip(&mut self.streams.attackers) {
            self.stats.attacker_expiries += u64::from(a.hold_counter <= 1);
            let reselected = attacker_advance(a, &self.ledger, self.cfg.attacker_interval, rng);
            self.stats.attacker_reselections += u64::from(reselected);
        }

        self.period += 1;
    }

    /// Runs the remaining periods and returns the finalized metrics.
    pub fn run_with<O: Observer + ?Sized>(mut self, observer: &mut O) -> MetricsStore {
        while self.period < self.cfg.sim_periods {
            self.step(observer);
        }
        self.metrics.finalize()
    }

    pub fn run(self) -> MetricsStore {
        self.run_with(&mut ())
    }
}

/// Runs one full replication. Deterministic in `(cfg, replication_id)`.
pub fn run_replication(cfg: &ScenarioConfig, replication_id: u32) -> Result<MetricsStore, ConfigError> {
    Ok(Simulation::new(cfg, replication_id)?.run())
}
