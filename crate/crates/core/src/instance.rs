//! Compact text form of small oracle instances.
//!
//! A pool lists one agent per `;`-separated item, each a `,`-separated token
//! list: `"0,1;2;3"` is three agents, `a0 = {0, 1}`, `a1 = {2}`, `a2 = {3}`.
//! A request is a single token list such as `"0,2"`.

use std::collections::BTreeMap;

use crate::error::InstanceError;
use crate::model::{AgentId, SemanticDescription, Token};

fn parse_tokens(item: &str, what: &'static str, index: usize, alphabet_size: u32) -> Result<SemanticDescription, InstanceError> {
    let mut tokens = Vec::new();
    for raw in item.split(',') {
        let raw = raw.trim();
        let t: Token = raw.parse().map_err(|_| InstanceError::Syntax {
            what,
            index,
            reason: format!("{raw:?} is not a token id"),
        })?;
        tokens.push(t);
    }
    Ok(SemanticDescription::new(tokens, alphabet_size)?)
}

/// Agents get ids `0..n` in listed order.
pub fn parse_pool_spec(spec: &str, alphabet_size: u32) -> Result<BTreeMap<AgentId, SemanticDescription>, InstanceError> {
    if spec.trim().is_empty() {
        return Err(InstanceError::EmptyPool);
    }
    spec.split(';')
        .enumerate()
        .map(|(i, item)| Ok((AgentId(i as u64), parse_tokens(item, "agent", i, alphabet_size)?)))
        .collect()
}

pub fn parse_request_spec(spec: &str, alphabet_size: u32) -> Result<SemanticDescription, InstanceError> {
    parse_tokens(spec, "request", 0, alphabet_size)
}
