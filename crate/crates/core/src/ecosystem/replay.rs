//! Reconstruction of counters from an event log.

use std::collections::{BTreeMap, BTreeSet};

use super::events::{Event, EventKind};
use crate::model::{AgentId, HabitatId};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReplaySummary {
    /// Executed sequences containing each agent.
    pub uses: BTreeMap<AgentId, u64>,
    pub executions: BTreeMap<HabitatId, u64>,
    pub counts: BTreeMap<EventKind, u64>,
    /// Longest agent list found in any EVOLVED, EXECUTED or REGISTERED
    /// payload, or reported as `max_length_seen`.
    pub max_sequence_length: usize,
}

fn agent_list(e: &Event) -> Vec<AgentId> {
    e.payload
        .get("agents")
        .and_then(|v| v.as_array())
        .map(|a| a.iter().filter_map(|x| x.as_u64()).map(AgentId).collect())
        .unwrap_or_default()
}

pub fn replay(events: &[Event]) -> ReplaySummary {
    let mut s = ReplaySummary::default();
    for e in events {
        *s.counts.entry(e.kind).or_default() += 1;
        let agents = agent_list(e);
        match e.kind {
            EventKind::Executed => {
                *s.executions.entry(e.habitat).or_default() += 1;
                for id in agents.iter().copied().collect::<BTreeSet<_>>() {
                    *s.uses.entry(id).or_default() += 1;
                }
                s.max_sequence_length = s.max_sequence_length.max(agents.len());
            }
            EventKind::Evolved => {
                let seen = e.payload.get("max_length_seen").and_then(|v| v.as_u64()).unwrap_or(0);
                s.max_sequence_length = s.max_sequence_length.max(agents.len()).max(seen as usize);
            }
            EventKind::Registered => {
                s.max_sequence_length = s.max_sequence_length.max(agents.len());
            }
            _ => {}
        }
    }
    s
}
