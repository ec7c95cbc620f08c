//! JSON payloads carried in frames.
//!
//! Messages are numbered from 1 on the wire and bits from 0, so the combo
//! `[1, 0]` is the first bit of W_1.

use ipir_core::pir::{Combo, PirAnswer, PirQuery};
use serde::{Deserialize, Serialize};

use crate::error::{NetError, NetResult};

pub const PROTO_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum WireMessage {
    Hello {
        proto_version: u32,
        #[serde(rename = "K")]
        k: usize,
        #[serde(rename = "L")]
        l: usize,
    },
    Query {
        session: String,
        combos: Vec<Vec<[usize; 2]>>,
    },
    Answer {
        session: String,
        bits: String,
    },
    Error {
        code: String,
        detail: String,
    },
}

impl WireMessage {
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("wire messages serialize")
    }

    pub fn from_bytes(bytes: &[u8]) -> NetResult<Self> {
        serde_json::from_slice(bytes).map_err(|e| NetError::Malformed(e.to_string()))
    }

    pub fn error(code: &str, detail: impl Into<String>) -> Self {
        WireMessage::Error { code: code.into(), detail: detail.into() }
    }

    pub fn query(session: &str, query: &PirQuery) -> Self {
        let combos = query.combos.iter().map(|c| c.iter().map(|&(m, b)| [m + 1, b]).collect()).collect();
        WireMessage::Query { session: session.into(), combos }
    }
}

/// Wire combos back to 0-based message indices.
pub fn combos_from_wire(combos: &[Vec<[usize; 2]>]) -> NetResult<Vec<Combo>> {
    combos
        .iter()
        .map(|c| {
            c.iter()
                .map(|&[m, b]| match m.checked_sub(1) {
                    Some(m) => Ok((m, b)),
                    None => Err(NetError::Malformed("message indices start at 1".into())),
                })
                .collect()
        })
        .collect()
}

pub fn bits_to_wire(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn bits_from_wire(bits: &str) -> NetResult<Vec<bool>> {
    bits.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(NetError::Malformed(format!("bad bit {other:?}"))),
        })
        .collect()
}

pub fn answer_from_wire(server: usize, bits: &str) -> NetResult<PirAnswer> {
    Ok(PirAnswer { server, bits: bits_from_wire(bits)? })
}
