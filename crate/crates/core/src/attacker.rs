//! Smart DoS attacker.
//!
//! An attacker jams one resource per period. It holds that resource for an
//! attack interval and, unlike a target vehicle, always reselects when the
//! interval runs out. The new resource is drawn uniformly from the target set:
//! every resource that carried at least one decodable transmission during the
//! sensing window.

use rand::Rng;

use crate::config::AttackerInterval;
use crate::ledger::UsageLedger;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackerState {
    pub attacker_id: usize,
    pub attack_resource: usize,
    pub hold_counter: u32,
}

/// `{ j : U_j > 0 }`, ascending.
pub fn build_target_set(ledger: &UsageLedger) -> Vec<usize> {
    ledger.used_resources()
}

/// Uniform pick from the target set, or from all resources when it is empty.
pub fn pick_attack_resource<R: Rng + ?Sized>(ledger: &UsageLedger, rng: &mut R) -> usize {
    if ledger.used_count() == 0 {
        return rng.random_range(0..ledger.num_resources());
    }
    let targets = build_target_set(ledger);
    targets[rng.random_range(0..targets.len())]
}

impl AttackerState {
    pub fn new<R: Rng + ?Sized>(
        attacker_id: usize,
        ledger: &UsageLedger,
        interval: AttackerInterval,
        rng: &mut R,
    ) -> Self {
        let attack_resource = pick_attack_resource(ledger, rng);
        let hold_counter = interval.sample(rng);
        AttackerState {
            attacker_id,
            attack_resource,
            hold_counter,
        }
    }
}

/// Decrements the hold counter; on expiry always reselects. Returns whether a
/// reselection happened.
pub fn attacker_advance<R: Rng + ?Sized>(
    state: &mut AttackerState,
    ledger: &UsageLedger,
    interval: AttackerInterval,
    rng: &mut R,
) -> bool {
    state.hold_counter = state.hold_counter.saturating_sub(1);
    if state.hold_counter > 0 {
        return false;
    }
    state.attack_resource = pick_attack_resource(ledger, rng);
    state.hold_counter = interval.sample(rng);
    true
}
