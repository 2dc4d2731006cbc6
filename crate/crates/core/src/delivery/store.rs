use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DeliveryError;
use crate::digest::Digest;
use crate::storage::PlanEntry;
use crate::Tick;

/// A contiguous slice of a sealed file bound for one miner.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chunk {
    pub miner_id: String,
    pub bytes: Vec<u8>,
}

/// Self-verifying location of a stored chunk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkAddress {
    pub miner_id: String,
    pub chunk_digest: Digest,
    pub length: u64,
}

/// Splits `sealed` into consecutive chunks sized by the plan entries.
pub fn chop<F>(sealed: &[u8], entries: &[PlanEntry<F>]) -> Result<Vec<Chunk>, DeliveryError> {
    let planned: u64 = entries.iter().map(|e| e.allotted).sum();
    if planned != sealed.len() as u64 {
        return Err(DeliveryError::SizeMismatch {
            planned,
            actual: sealed.len() as u64,
        });
    }
    let mut offset = 0usize;
    let chunks = entries
        .iter()
        .map(|e| {
            let end = offset + e.allotted as usize;
            let chunk = Chunk {
                miner_id: e.miner_id.clone(),
                bytes: sealed[offset..end].to_vec(),
            };
            offset = end;
            chunk
        })
        .collect();
    Ok(chunks)
}

#[derive(Clone, Debug)]
struct StoredChunk {
    bytes: Vec<u8>,
    expires_at: Option<Tick>,
}

#[derive(Clone, Debug, Default)]
struct Vault {
    free_space: u64,
    chunks: BTreeMap<Digest, StoredChunk>,
}

impl Vault {
    fn remove(&mut self, digest: &Digest) -> bool {
        match self.chunks.remove(digest) {
            Some(c) => {
                self.free_space += c.bytes.len() as u64;
                true
            }
            None => false,
        }
    }
}

/// Per-miner chunk storage with lazily evaluated deletion timers.
///
/// A chunk's timer is started by the first retrieval; once the logical clock
/// is past `expires_at` the chunk is deleted on next touch and its space is
/// returned to the miner.
#[derive(Clone, Debug, Default)]
pub struct ChunkStore {
    vaults: BTreeMap<String, Vault>,
}

impl ChunkStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_miner(&mut self, miner_id: impl Into<String>, free_space: u64) {
        self.vaults.insert(
            miner_id.into(),
            Vault {
                free_space,
                chunks: BTreeMap::new(),
            },
        );
    }

    pub fn free_space(&self, miner_id: &str) -> Option<u64> {
        self.vaults.get(miner_id).map(|v| v.free_space)
    }

    pub fn stored_bytes(&self, miner_id: &str) -> u64 {
        self.vaults
            .get(miner_id)
            .map(|v| v.chunks.values().map(|c| c.bytes.len() as u64).sum())
            .unwrap_or(0)
    }

    pub fn holds(&self, address: &ChunkAddress) -> bool {
        self.vaults
            .get(&address.miner_id)
            .is_some_and(|v| v.chunks.contains_key(&address.chunk_digest))
    }

    pub fn expires_at(&self, address: &ChunkAddress) -> Option<Tick> {
        self.vaults
            .get(&address.miner_id)?
            .chunks
            .get(&address.chunk_digest)?
            .expires_at
    }

    /// Stores every chunk with its plan miner, all or nothing. Identical
    /// content already held by the same miner is shared, not duplicated.
    pub fn store_chunks(&mut self, chunks: &[Chunk]) -> Result<Vec<ChunkAddress>, DeliveryError> {
        let mut needed: BTreeMap<&str, (u64, Vec<Digest>)> = BTreeMap::new();
        let addresses: Vec<ChunkAddress> = chunks
            .iter()
            .map(|c| ChunkAddress {
                miner_id: c.miner_id.clone(),
                chunk_digest: Digest::of(&c.bytes),
                length: c.bytes.len() as u64,
            })
            .collect();
        for addr in &addresses {
            let vault = self
                .vaults
                .get(&addr.miner_id)
                .ok_or_else(|| DeliveryError::UnknownMiner(addr.miner_id.clone()))?;
            let slot = needed.entry(&addr.miner_id).or_default();
            if vault.chunks.contains_key(&addr.chunk_digest) || slot.1.contains(&addr.chunk_digest) {
                continue;
            }
            slot.0 += addr.length;
            slot.1.push(addr.chunk_digest);
        }
        for (miner, (bytes, _)) in &needed {
            if self.vaults[*miner].free_space < *bytes {
                return Err(DeliveryError::MinerFull(miner.to_string()));
            }
        }
        for (chunk, addr) in chunks.iter().zip(&addresses) {
            let vault = self.vaults.get_mut(&addr.miner_id).expect("checked above");
            if vault.chunks.contains_key(&addr.chunk_digest) {
                continue;
            }
            vault.free_space -= addr.length;
            vault.chunks.insert(
                addr.chunk_digest,
                StoredChunk {
                    bytes: chunk.bytes.clone(),
                    expires_at: None,
                },
            );
        }
        Ok(addresses)
    }

    /// Reads a chunk at logical time `now`. Expired chunks are deleted here.
    pub fn fetch(&mut self, address: &ChunkAddress, now: Tick) -> Result<Vec<u8>, DeliveryError> {
        let vault = self
            .vaults
            .get_mut(&address.miner_id)
            .ok_or(DeliveryError::ChunkMissing(address.chunk_digest))?;
        let chunk = vault
            .chunks
            .get(&address.chunk_digest)
            .ok_or(DeliveryError::ChunkMissing(address.chunk_digest))?;
        if chunk.expires_at.is_some_and(|t| now > t) {
            vault.remove(&address.chunk_digest);
            return Err(DeliveryError::ChunkExpired(address.chunk_digest));
        }
        if chunk.bytes.len() as u64 != address.length || Digest::of(&chunk.bytes) != address.chunk_digest {
            return Err(DeliveryError::ChunkMissing(address.chunk_digest));
        }
        Ok(chunk.bytes.clone())
    }

    /// Starts the deletion timer unless one is already running.
    pub fn start_timer(&mut self, address: &ChunkAddress, expires_at: Tick) {
        if let Some(chunk) = self
            .vaults
            .get_mut(&address.miner_id)
            .and_then(|v| v.chunks.get_mut(&address.chunk_digest))
        {
            chunk.expires_at.get_or_insert(expires_at);
        }
    }

    /// Drops a chunk outright, as a misbehaving miner would.
    pub fn delete(&mut self, address: &ChunkAddress) -> bool {
        self.vaults
            .get_mut(&address.miner_id)
            .is_some_and(|v| v.remove(&address.chunk_digest))
    }

    /// Drops everything a miner holds. Returns the removed digests.
    pub fn wipe_miner(&mut self, miner_id: &str) -> Vec<Digest> {
        let Some(vault) = self.vaults.get_mut(miner_id) else {
            return Vec::new();
        };
        let digests: Vec<Digest> = vault.chunks.keys().copied().collect();
        for d in &digests {
            vault.remove(d);
        }
        digests
    }

    /// Deletes every chunk whose timer ran out before `now`.
    pub fn purge_expired(&mut self, now: Tick) -> usize {
        let mut purged = 0;
        for vault in self.vaults.values_mut() {
            let expired: Vec<Digest> = vault
                .chunks
                .iter()
                .filter(|(_, c)| c.expires_at.is_some_and(|t| now > t))
                .map(|(d, _)| *d)
                .collect();
            for d in expired {
                vault.remove(&d);
                purged += 1;
            }
        }
        purged
    }
}
