//! Binary store format: K and L as 4-byte big-endian integers, then the K
//! messages packed most significant bit first, `L / 8` bytes each.

use std::fs;
use std::path::Path;

use ipir_core::MessageStore;

use crate::error::{NetError, NetResult};

pub fn encode(store: &MessageStore) -> NetResult<Vec<u8>> {
    let (k, l) = (store.k(), store.length());
    if l % 8 != 0 {
        return Err(NetError::Store(format!("L = {l} is not a multiple of 8")));
    }
    let header = |v: usize| u32::try_from(v).map_err(|_| NetError::Store(format!("{v} does not fit in 32 bits")));
    let mut out = Vec::with_capacity(8 + k * l / 8);
    out.extend_from_slice(&header(k)?.to_be_bytes());
    out.extend_from_slice(&header(l)?.to_be_bytes());
    for m in 0..k {
        for chunk in store.message(m).chunks(8) {
            out.push(chunk.iter().fold(0u8, |acc, &b| acc << 1 | u8::from(b)));
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> NetResult<MessageStore> {
    if bytes.len() < 8 {
        return Err(NetError::Store(format!("{} bytes is shorter than the header", bytes.len())));
    }
    let k = u32::from_be_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let l = u32::from_be_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if k == 0 || l == 0 || !l.is_multiple_of(8) {
        return Err(NetError::Store(format!("bad header K = {k}, L = {l}")));
    }
    let per = l / 8;
    let expected = k.checked_mul(per).and_then(|n| n.checked_add(8));
    if expected != Some(bytes.len()) {
        return Err(NetError::Store(format!(
            "K = {k}, L = {l} needs {} payload bytes, file has {}",
            k * per,
            bytes.len() - 8
        )));
    }
    let messages = bytes[8..]
        .chunks(per)
        .map(|m| m.iter().flat_map(|&byte| (0..8).rev().map(move |i| byte >> i & 1 == 1)).collect())
        .collect();
    MessageStore::new(messages).map_err(|e| NetError::Store(e.to_string()))
}

pub fn read(path: &Path) -> NetResult<MessageStore> {
    decode(&fs::read(path)?)
}

pub fn write(path: &Path, store: &MessageStore) -> NetResult<()> {
    fs::write(path, encode(store)?)?;
    Ok(())
}
