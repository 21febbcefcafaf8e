//! Deterministic per-agent random streams.
//!
//! Every agent of a replication owns its own ChaCha8 stream. The key is built
//! from `(master_seed, replication_id)` and the ChaCha stream id from the
//! agent identity, so an agent's draws never depend on how many draws other
//! agents made, or on how many other agents exist.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const ATTACKER_STREAM_BASE: u64 = 1 << 32;
const CHANNEL_STREAM: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentId {
    Target(usize),
    Attacker(usize),
    /// Reserved for channel-level randomness.
    Channel,
}

impl AgentId {
    fn stream(self) -> u64 {
        match self {
            AgentId::Target(i) => i as u64,
            AgentId::Attacker(i) => ATTACKER_STREAM_BASE + i as u64,
            AgentId::Channel => CHANNEL_STREAM,
        }
    }
}

/// Stream for one agent of one replication.
pub fn agent_stream(master_seed: u64, replication_id: u32, agent: AgentId) -> SimRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..12].copy_from_slice(&replication_id.to_le_bytes());
    key[16..24].copy_from_slice(b"cv2x-sps");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(agent.stream());
    rng
}

/// All streams of one replication.
#[derive(Debug, Clone)]
pub struct RngStreams {
    pub replication_id: u32,
    pub targets: Vec<SimRng>,
    pub attackers: Vec<SimRng>,
    pub channel: SimRng,
}

impl RngStreams {
    pub fn derive(master_seed: u64, replication_id: u32, num_targets: usize, num_attackers: usize) -> Self {
        RngStreams {
            replication_id,
            targets: (0..num_targets)
                .map(|i| agent_stream(master_seed, replication_id, AgentId::Target(i)))
                .collect(),
            attackers: (0..num_attackers)
                .map(|i| agent_stream(master_seed, replication_id, AgentId::Attacker(i)))
                .collect(),
            channel: agent_stream(master_seed, replication_id, AgentId::Channel),
        }
    }

    pub fn get_mut(&mut self, agent: AgentId) -> &mut SimRng {
        match agent {
            AgentId::Target(i) => &mut self.targets[i],
            AgentId::Attacker(i) => &mut self.attackers[i],
            AgentId::Channel => &mut self.channel,
        }
    }
}
