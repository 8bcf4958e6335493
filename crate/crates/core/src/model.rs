//! Domain types shared by every layer of the simulator: attribute token sets,
//! requests, agents and agent sequences, plus the set arithmetic used to score
//! a sequence against a request.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::ModelError;

/// Attribute alphabet size used when nothing else is configured.
pub const DEFAULT_ALPHABET_SIZE: u32 = 64;

pub type Token = u32;

/// Identifier of a habitat (one per simulated user).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HabitatId(pub u32);

impl fmt::Display for HabitatId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "h{}", self.0)
    }
}

/// Identifier of an agent. Copies made by migration keep the id of the agent
/// they were copied from; each habitat holds at most one instance per id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u64);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

type Mask = SmallVec<[u64; 2]>;

/// Non-empty set of attribute tokens. Stands in both for an agent's semantic
/// description and for the content of a user request.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "Vec<Token>", try_from = "Vec<Token>")]
pub struct SemanticDescription {
    tokens: Box<[Token]>,
    mask: Mask,
}

impl SemanticDescription {
    /// Validates `tokens` against an alphabet of `alphabet_size` symbols.
    /// Duplicates collapse; order is irrelevant.
    pub fn new<I>(tokens: I, alphabet_size: u32) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = Token>,
    {
        let sorted: Vec<Token> = tokens.into_iter().collect();
        if let Some(&bad) = sorted.iter().find(|&&t| t >= alphabet_size) {
            return Err(ModelError::TokenOutOfRange {
                token: bad,
                alphabet_size,
            });
        }
        Self::from_vec(sorted)
    }

    fn from_vec(mut tokens: Vec<Token>) -> Result<Self, ModelError> {
        if tokens.is_empty() {
            return Err(ModelError::EmptyDescription);
        }
        tokens.sort_unstable();
        tokens.dedup();
        let mut mask = Mask::new();
        for &t in &tokens {
            set_bit(&mut mask, t);
        }
        Ok(Self {
            tokens: tokens.into_boxed_slice(),
            mask,
        })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, token: Token) -> bool {
        self.tokens.binary_search(&token).is_ok()
    }

    /// Number of tokens shared with `other`.
    pub fn overlap(&self, other: &SemanticDescription) -> usize {
        self.mask
            .iter()
            .zip(other.mask.iter())
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn max_token(&self) -> Token {
        *self.tokens.last().expect("non-empty")
    }
}

impl fmt::Debug for SemanticDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.tokens.iter()).finish()
    }
}

impl From<SemanticDescription> for Vec<Token> {
    fn from(d: SemanticDescription) -> Self {
        d.tokens.into_vec()
    }
}

impl TryFrom<Vec<Token>> for SemanticDescription {
    type Error = ModelError;

    fn try_from(tokens: Vec<Token>) -> Result<Self, Self::Error> {
        Self::from_vec(tokens)
    }
}

fn set_bit(mask: &mut Mask, token: Token) {
    let word = (token / 64) as usize;
    if mask.len() <= word {
        mask.resize(word + 1, 0);
    }
    mask[word] |= 1u64 << (token % 64);
}

/// Checks a raw token set against the alphabet and returns the validated
/// description.
pub fn validate_description<I>(tokens: I, alphabet_size: u32) -> Result<SemanticDescription, ModelError>
where
    I: IntoIterator<Item = Token>,
{
    SemanticDescription::new(tokens, alphabet_size)
}

/// A user request: the wanted attributes, where it was issued and when.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub tokens: SemanticDescription,
    pub origin: HabitatId,
    pub round: u64,
}

impl Request {
    pub fn new(tokens: SemanticDescription, origin: HabitatId, round: u64) -> Self {
        Self {
            tokens,
            origin,
            round,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// One resident instance of an agent inside a habitat's pool.
///
/// Usage counts are global per agent id and live in the ecosystem's registry;
/// everything here is local to the habitat holding the instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: AgentId,
    pub description: SemanticDescription,
    /// Habitat the agent was deployed to by its developer.
    pub owner: HabitatId,
    /// Requests processed at the current habitat since this instance was last
    /// part of an executed solution (or since it arrived).
    pub requests_seen_unused: u32,
    pub escapes_remaining: u32,
    /// Whether this instance has been part of an executed solution at the
    /// habitat it currently resides in.
    pub used_here: bool,
    /// Habitats visited, creation habitat first, current habitat last.
    pub migration_history: Vec<HabitatId>,
}

impl Agent {
    pub fn new(id: AgentId, description: SemanticDescription, owner: HabitatId, escapes: u32) -> Self {
        Self {
            id,
            description,
            owner,
            requests_seen_unused: 0,
            escapes_remaining: escapes,
            used_here: false,
            migration_history: vec![owner],
        }
    }

    pub fn current_habitat(&self) -> HabitatId {
        *self.migration_history.last().expect("history is never empty")
    }

    /// The habitat this instance arrived from, if it has migrated at all.
    pub fn last_hop_source(&self) -> Option<HabitatId> {
        let n = self.migration_history.len();
        (n >= 2).then(|| self.migration_history[n - 2])
    }
}

/// Ordered list of agent ids with repetition allowed, plus the habitats where
/// it (or a registered ancestor) was evolved.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentSequence {
    pub agents: Vec<AgentId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub provenance: Vec<HabitatId>,
}

impl AgentSequence {
    pub fn new(agents: Vec<AgentId>) -> Result<Self, ModelError> {
        if agents.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        Ok(Self {
            agents,
            provenance: Vec::new(),
        })
    }

    pub fn with_provenance(mut self, provenance: impl IntoIterator<Item = HabitatId>) -> Self {
        for h in provenance {
            self.add_provenance(h);
        }
        self
    }

    pub fn add_provenance(&mut self, h: HabitatId) {
        if let Err(pos) = self.provenance.binary_search(&h) {
            self.provenance.insert(pos, h);
        }
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }
}

/// Resolves agent ids to their descriptions.
pub trait DescriptionLookup {
    fn description(&self, id: AgentId) -> Option<&SemanticDescription>;

    fn resolve(&self, id: AgentId) -> Result<&SemanticDescription, ModelError> {
        self.description(id).ok_or(ModelError::UnknownAgent(id))
    }
}

impl DescriptionLookup for BTreeMap<AgentId, SemanticDescription> {
    fn description(&self, id: AgentId) -> Option<&SemanticDescription> {
        self.get(&id)
    }
}

impl DescriptionLookup for HashMap<AgentId, SemanticDescription> {
    fn description(&self, id: AgentId) -> Option<&SemanticDescription> {
        self.get(&id)
    }
}

impl<T: DescriptionLookup + ?Sized> DescriptionLookup for &T {
    fn description(&self, id: AgentId) -> Option<&SemanticDescription> {
        (**self).description(id)
    }
}

fn union_mask<L: DescriptionLookup + ?Sized>(
    agents: impl Iterator<Item = AgentId>,
    resolve: &L,
) -> Result<Mask, ModelError> {
    let mut acc = Mask::new();
    for id in agents {
        let d = resolve.resolve(id)?;
        if acc.len() < d.mask.len() {
            acc.resize(d.mask.len(), 0);
        }
        for (a, b) in acc.iter_mut().zip(d.mask.iter()) {
            *a |= b;
        }
    }
    Ok(acc)
}

fn masked_count(union: &Mask, req: &SemanticDescription) -> usize {
    union
        .iter()
        .zip(req.mask.iter())
        .map(|(a, b)| (a & b).count_ones() as usize)
        .sum()
}

/// Number of request tokens provided by at least one member of `agents`.
pub fn coverage<L: DescriptionLookup + ?Sized>(
    agents: &[AgentId],
    req: &SemanticDescription,
    resolve: &L,
) -> Result<usize, ModelError> {
    let union = union_mask(agents.iter().copied(), resolve)?;
    Ok(masked_count(&union, req))
}

/// Counts agents that can be dropped without lowering coverage.
///
/// Scans left to right; an agent whose removal from the current (already
/// thinned) sequence keeps the full sequence's coverage is counted and
/// removed. The survivors each contribute at least one token of their own.
pub fn redundant_count<L: DescriptionLookup + ?Sized>(
    agents: &[AgentId],
    req: &SemanticDescription,
    resolve: &L,
) -> Result<usize, ModelError> {
    let full = coverage(agents, req, resolve)?;
    let mut kept: Vec<bool> = vec![true; agents.len()];
    let mut redundant = 0;
    for skip in 0..agents.len() {
        let rest = agents
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != skip && kept[i])
            .map(|(_, &id)| id);
        let union = union_mask(rest, resolve)?;
        if masked_count(&union, req) == full {
            kept[skip] = false;
            redundant += 1;
        }
    }
    Ok(redundant)
}

/// Union of the member descriptions shares at least one token with `req`.
pub fn is_relevant<L: DescriptionLookup + ?Sized>(
    agents: &[AgentId],
    req: &SemanticDescription,
    resolve: &L,
) -> Result<bool, ModelError> {
    Ok(coverage(agents, req, resolve)? > 0)
}
