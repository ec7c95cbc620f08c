//! Capacity-achieving PIR over a subset of the messages, with bits as
//! symbols and XOR as the only operation.
//!
//! For k messages and N servers each block holds `N^k` bits per message.
//! Round m asks every server for sums of m symbols, one per message of each
//! m-subset, `(N-1)^(m-1)` sums per subset. Sums without the desired message
//! use fresh symbols; sums with it pair a fresh desired symbol with a sum of
//! undesired symbols that another server returned in round m-1, which the
//! decoder cancels. Each message's symbols are read through a secret random
//! permutation, so every server sees the same query law whatever is wanted.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{checked_pow, MessageStore};
use crate::subset::Subset;

/// XOR of `(message, bit)` pairs, sorted. Message indices are 0-based.
pub type Combo = Vec<(usize, usize)>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeParams {
    pub servers: usize,
    /// Messages taking part, ascending.
    pub subset: Vec<usize>,
    pub k: usize,
    /// `N^k` bits per message per block.
    pub block: usize,
    pub blocks: usize,
}

impl SchemeParams {
    pub fn length(&self) -> usize {
        self.block * self.blocks
    }

    /// Sums returned by one server over all blocks.
    pub fn per_server_download(&self) -> usize {
        let mut per_block = 0;
        let mut binom = 1usize;
        let mut power = 1usize;
        for m in 1..=self.k {
            binom = binom * (self.k - m + 1) / m;
            per_block += binom * power;
            power *= self.servers - 1;
        }
        per_block * self.blocks
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PirQuery {
    pub server: usize,
    /// Canonical order: sorted lexicographically.
    pub combos: Vec<Combo>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PirAnswer {
    pub server: usize,
    pub bits: Vec<bool>,
}

/// Per block and per subset member, a permutation of `0..block`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PirKey {
    pub perms: Vec<Vec<Vec<usize>>>,
}

impl PirKey {
    pub fn random<R: Rng + ?Sized>(params: &SchemeParams, rng: &mut R) -> Self {
        let perms = (0..params.blocks)
            .map(|_| {
                (0..params.k)
                    .map(|_| {
                        let mut p: Vec<usize> = (0..params.block).collect();
                        p.shuffle(rng);
                        p
                    })
                    .collect()
            })
            .collect();
        PirKey { perms }
    }

    pub fn identity(params: &SchemeParams) -> Self {
        PirKey { perms: vec![vec![(0..params.block).collect(); params.k]; params.blocks] }
    }
}

pub fn pir_setup(servers: usize, subset: Subset, length: usize) -> Result<SchemeParams> {
    if servers < 2 {
        return Err(Error::InvalidParams(format!("N = {servers} < 2")));
    }
    if subset.is_empty() {
        return Err(Error::InvalidParams("empty message subset".into()));
    }
    let k = subset.len();
    let block = checked_pow(servers, k).ok_or_else(|| Error::InvalidParams("N^k overflows".into()))?;
    if length == 0 || !length.is_multiple_of(block) {
        return Err(Error::BlockMismatch { block, length });
    }
    Ok(SchemeParams { servers, subset: subset.iter().collect(), k, block, blocks: length / block })
}

#[derive(Clone, Debug)]
enum Role {
    /// Fresh desired bit alone.
    Direct(usize),
    /// Undesired symbols only; side information for other servers.
    Side,
    /// Fresh desired bit plus a side sum fetched from server `from`.
    Mixed { bit: usize, side: Combo, from: usize },
}

/// Per server, the planned sums and how each one is used when decoding.
fn plan(params: &SchemeParams, desired: usize, key: &PirKey) -> Result<Vec<Vec<(Combo, Role)>>> {
    let d = params.subset.iter().position(|&m| m == desired).ok_or(Error::DesiredNotInSubset { desired })?;
    let (n, k) = (params.servers, params.k);
    if key.perms.len() != params.blocks
        || key.perms.iter().any(|b| b.len() != k || b.iter().any(|p| p.len() != params.block))
    {
        return Err(Error::InvalidParams("key does not match scheme parameters".into()));
    }
    let subsets: Vec<Vec<Vec<usize>>> = (0..=k).map(|m| m_subsets(k, m)).collect();

    let mut out: Vec<Vec<(Combo, Role)>> = vec![Vec::new(); n];
    for (b, perms) in key.perms.iter().enumerate() {
        let offset = b * params.block;
        let mut next = vec![0usize; k];
        let mut take = |j: usize| {
            let pos = offset + perms[j][next[j]];
            next[j] += 1;
            (params.subset[j], pos)
        };
        // side[server] maps an undesired subset to the sums fetched for it last round
        let mut side_prev: Vec<HashMap<Vec<usize>, Vec<Combo>>> = vec![HashMap::new(); n];
        for m in 1..=k {
            let reps = (n - 1).pow(m as u32 - 1);
            let mut side_now: Vec<HashMap<Vec<usize>, Vec<Combo>>> = vec![HashMap::new(); n];
            for server in 0..n {
                for t in &subsets[m] {
                    if let Some(di) = t.iter().position(|&j| j == d) {
                        let mut rest = t.clone();
                        rest.remove(di);
                        let pool: Vec<(Combo, usize)> = if m == 1 {
                            vec![(Vec::new(), server)]
                        } else {
                            (0..n)
                                .filter(|&o| o != server)
                                .flat_map(|o| side_prev[o][&rest].iter().map(move |c| (c.clone(), o)))
                                .collect()
                        };
                        debug_assert_eq!(pool.len(), reps);
                        for (side, from) in pool {
                            let (msg, bit) = take(d);
                            let mut combo = side.clone();
                            combo.push((msg, bit));
                            combo.sort_unstable();
                            let role = if m == 1 { Role::Direct(bit) } else { Role::Mixed { bit, side, from } };
                            out[server].push((combo, role));
                        }
                    } else {
                        for _ in 0..reps {
                            let mut combo: Combo = t.iter().map(|&j| take(j)).collect();
                            combo.sort_unstable();
                            side_now[server].entry(t.clone()).or_default().push(combo.clone());
                            out[server].push((combo, Role::Side));
                        }
                    }
                }
            }
            side_prev = side_now;
        }
    }
    Ok(out)
}

fn m_subsets(k: usize, m: usize) -> Vec<Vec<usize>> {
    Subset::all_nonempty(k)
        .filter(|s| s.len() == m)
        .map(|s| s.iter().collect())
        .collect::<BTreeSet<Vec<usize>>>()
        .into_iter()
        .collect()
}

/// Queries for a fixed key. Deterministic.
pub fn pir_query_with_key(params: &SchemeParams, desired: usize, key: &PirKey) -> Result<Vec<PirQuery>> {
    Ok(plan(params, desired, key)?
        .into_iter()
        .enumerate()
        .map(|(server, planned)| {
            let mut combos: Vec<Combo> = planned.into_iter().map(|(c, _)| c).collect();
            combos.sort();
            PirQuery { server, combos }
        })
        .collect())
}

/// Fresh key and the N queries for `desired` (a 0-based message index).
pub fn pir_query<R: Rng + ?Sized>(
    params: &SchemeParams,
    desired: usize,
    rng: &mut R,
) -> Result<(Vec<PirQuery>, PirKey)> {
    if !params.subset.contains(&desired) {
        return Err(Error::DesiredNotInSubset { desired });
    }
    let key = PirKey::random(params, rng);
    let queries = pir_query_with_key(params, desired, &key)?;
    Ok((queries, key))
}

pub fn pir_answer(query: &PirQuery, store: &MessageStore) -> Result<PirAnswer> {
    let bits = query
        .combos
        .iter()
        .map(|combo| {
            combo.iter().try_fold(false, |acc, &(message, bit)| {
                store.bit(message, bit).map(|v| acc ^ v).ok_or(Error::OutOfRange { message, bit })
            })
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(PirAnswer { server: query.server, bits })
}

pub fn answer_length(query: &PirQuery) -> usize {
    query.combos.len()
}

/// Recovers the `L` bits of `desired` from the N answers.
pub fn pir_decode(answers: &[PirAnswer], key: &PirKey, params: &SchemeParams, desired: usize) -> Result<Vec<bool>> {
    let planned = plan(params, desired, key)?;
    if answers.len() != params.servers {
        return Err(Error::InconsistentAnswers(format!("{} answers for {} servers", answers.len(), params.servers)));
    }
    let mut lookup: Vec<HashMap<Combo, bool>> = Vec::with_capacity(params.servers);
    for (server, plan) in planned.iter().enumerate() {
        let answer = answers
            .iter()
            .find(|a| a.server == server)
            .ok_or_else(|| Error::InconsistentAnswers(format!("no answer from server {}", server + 1)))?;
        if answer.bits.len() != plan.len() {
            return Err(Error::InconsistentAnswers(format!(
                "server {} returned {} bits for {} sums",
                server + 1,
                answer.bits.len(),
                plan.len()
            )));
        }
        let mut combos: Vec<&Combo> = plan.iter().map(|(c, _)| c).collect();
        combos.sort();
        lookup.push(combos.into_iter().cloned().zip(answer.bits.iter().copied()).collect());
    }

    let mut out: Vec<Option<bool>> = vec![None; params.length()];
    for (server, plan) in planned.iter().enumerate() {
        for (combo, role) in plan {
            let value = lookup[server][combo];
            match role {
                Role::Side => {}
                Role::Direct(bit) => out[*bit] = Some(value),
                Role::Mixed { bit, side, from } => out[*bit] = Some(value ^ lookup[*from][side]),
            }
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(i, b)| b.ok_or_else(|| Error::InconsistentAnswers(format!("bit {i} not covered"))))
        .collect()
}

/// Number of distinct keys, `(block!)^(k * blocks)`, saturating.
pub fn key_space_size(params: &SchemeParams) -> u128 {
    let fact = (1..=params.block as u128).try_fold(1u128, |acc, i| acc.checked_mul(i)).unwrap_or(u128::MAX);
    let mut total = 1u128;
    for _ in 0..params.k * params.blocks {
        total = total.saturating_mul(fact);
    }
    total
}

/// Every key, in a fixed order. Only sensible for tiny parameters.
pub fn all_keys(params: &SchemeParams) -> Vec<PirKey> {
    let perms = permutations(params.block);
    let slots = params.k * params.blocks;
    let mut keys = Vec::new();
    let mut idx = vec![0usize; slots];
    loop {
        let mut chosen = idx.iter().map(|&i| perms[i].clone());
        let key = PirKey {
            perms: (0..params.blocks).map(|_| (0..params.k).map(|_| chosen.next().expect("slot")).collect()).collect(),
        };
        keys.push(key);
        let mut pos = 0;
        loop {
            if pos == slots {
                return keys;
            }
            idx[pos] += 1;
            if idx[pos] < perms.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for at in 0..=p.len() {
            let mut q = p.clone();
            q.insert(at, n - 1);
            out.push(q);
        }
    }
    out
}
