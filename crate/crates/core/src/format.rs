//! Binary index format (little-endian).
//!
//! ```text
//! magic        "PSPTIDX1"                     8 bytes
//! version      u32 = 1
//! n_original   u64
//! n_surviving  u64
//! alpha        f64
//! beta         u64
//! id map       n_original x u64, ascending
//! redirects    n_original x (tag u8 [, anchor u64, weight f64 when tag = 1])
//!              tag 0 = survivor, 1 = degree-1 redirect, 2 = isolated
//! blocks       n_surviving x (root u64, count u32,
//!                             count x (member u64, distance f64, first_hop u32))
//! footer       CRC32 (IEEE) of every byte after the magic
//! ```

use std::io::{Read, Write};

use crc32fast::Hasher;

use crate::error::FormatError;
use crate::graph::{NodeId, NodeRole};
use crate::index::Index;
use crate::pspt::{Pspt, PsptEntry};

pub const MAGIC: &[u8; 8] = b"PSPTIDX1";
pub const VERSION: u32 = 1;

const HEADER_LEN: usize = 8 + 4 + 8 + 8 + 8 + 8;
const ENTRY_LEN: usize = 8 + 8 + 4;
const BLOCK_HEADER_LEN: usize = 8 + 4;
const LEAF_RECORD_LEN: usize = 1 + 8 + 8;

const TAG_SURVIVOR: u8 = 0;
const TAG_LEAF: u8 = 1;
const TAG_ISOLATED: u8 = 2;

/// Exact number of bytes [`serialize`] writes for `index`.
pub fn serialized_len(index: &Index) -> usize {
    let n = index.node_count();
    let redirects: usize = index
        .pruned()
        .roles()
        .iter()
        .map(|r| match r {
            NodeRole::Leaf { .. } => LEAF_RECORD_LEN,
            _ => 1,
        })
        .sum();
    HEADER_LEN
        + 8 * n
        + redirects
        + index.block_count() * BLOCK_HEADER_LEN
        + index.total_entries() * ENTRY_LEN
        + 4
}

struct CrcWriter<W> {
    inner: W,
    crc: Hasher,
}

impl<W: Write> CrcWriter<W> {
    fn put(&mut self, bytes: &[u8]) -> std::io::Result<()> {
        self.crc.update(bytes);
        self.inner.write_all(bytes)
    }
}

/// Writes a complete index.
pub fn serialize<W: Write>(index: &Index, mut sink: W) -> Result<(), FormatError> {
    if !index.is_complete() {
        return Err(FormatError::Incomplete {
            present: index.block_count(),
            expected: index.pruned().survivor_count(),
        });
    }
    sink.write_all(MAGIC)?;
    let mut w = CrcWriter {
        inner: sink,
        crc: Hasher::new(),
    };
    w.put(&VERSION.to_le_bytes())?;
    w.put(&(index.node_count() as u64).to_le_bytes())?;
    w.put(&(index.block_count() as u64).to_le_bytes())?;
    w.put(&index.alpha().to_le_bytes())?;
    w.put(&(index.beta() as u64).to_le_bytes())?;
    for id in index.original_ids() {
        w.put(&id.to_le_bytes())?;
    }
    for role in index.pruned().roles() {
        match *role {
            NodeRole::Survivor => w.put(&[TAG_SURVIVOR])?,
            NodeRole::Isolated => w.put(&[TAG_ISOLATED])?,
            NodeRole::Leaf { anchor, weight } => {
                w.put(&[TAG_LEAF])?;
                w.put(&(anchor as u64).to_le_bytes())?;
                w.put(&weight.to_le_bytes())?;
            }
        }
    }
    for block in index.blocks() {
        w.put(&(block.root() as u64).to_le_bytes())?;
        w.put(&(block.len() as u32).to_le_bytes())?;
        for e in block.entries() {
            w.put(&(e.member as u64).to_le_bytes())?;
            w.put(&e.distance.to_le_bytes())?;
            w.put(&e.first_hop_idx.to_le_bytes())?;
        }
    }
    let crc = w.crc.finalize();
    w.inner.write_all(&crc.to_le_bytes())?;
    w.inner.flush()?;
    Ok(())
}

pub fn serialize_to_vec(index: &Index) -> Result<Vec<u8>, FormatError> {
    let mut buf = Vec::with_capacity(serialized_len(index));
    serialize(index, &mut buf)?;
    Ok(buf)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(len).ok_or(FormatError::Truncated)?;
        let bytes = self.buf.get(self.pos..end).ok_or(FormatError::Truncated)?;
        self.pos = end;
        Ok(bytes)
    }

    fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn skip(&mut self, len: usize) -> Result<(), FormatError> {
        self.take(len).map(|_| ())
    }
}

fn node_id(raw: u64, n: u64, what: &str) -> Result<NodeId, FormatError> {
    if raw >= n {
        return Err(FormatError::InvariantViolation(format!(
            "{what} {raw} out of range (n = {n})"
        )));
    }
    Ok(raw as NodeId)
}

// Walks the layout without allocating; Err(Truncated) if the payload is too
// short for the counts it declares.
fn scan_layout(payload: &[u8]) -> Result<(), FormatError> {
    let mut c = Cursor { buf: payload, pos: 4 };
    let n = c.u64()?;
    let n_blocks = c.u64()?;
    c.skip(16)?;
    c.skip((n as usize).checked_mul(8).ok_or(FormatError::Truncated)?)?;
    for _ in 0..n {
        if c.u8()? == TAG_LEAF {
            c.skip(16)?;
        }
    }
    for _ in 0..n_blocks {
        c.skip(8)?;
        let count = c.u32()? as usize;
        c.skip(count * ENTRY_LEN)?;
    }
    Ok(())
}

/// Reads and validates an index.
pub fn deserialize<R: Read>(mut source: R) -> Result<Index, FormatError> {
    let mut buf = Vec::new();
    source.read_to_end(&mut buf)?;
    deserialize_bytes(&buf)
}

pub fn deserialize_bytes(buf: &[u8]) -> Result<Index, FormatError> {
    if buf.len() < MAGIC.len() {
        return Err(FormatError::Truncated);
    }
    if &buf[..8] != MAGIC {
        return Err(FormatError::BadMagic);
    }
    if buf.len() < HEADER_LEN + 4 {
        return Err(FormatError::Truncated);
    }
    let version = u32::from_le_bytes(buf[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(FormatError::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let payload = &buf[8..buf.len() - 4];
    let stored = u32::from_le_bytes(buf[buf.len() - 4..].try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        // a short read looks like a bad checksum; report it as truncation
        scan_layout(payload)?;
        return Err(FormatError::ChecksumMismatch { stored, computed });
    }

    let mut c = Cursor { buf: payload, pos: 4 };
    let n = c.u64()?;
    let n_blocks = c.u64()?;
    let alpha = c.f64()?;
    let beta = c.u64()?;
    if n >= NodeId::MAX as u64 || n_blocks > n {
        return Err(FormatError::InvariantViolation(format!(
            "implausible counts n = {n}, blocks = {n_blocks}"
        )));
    }
    if (n as usize).saturating_mul(8) > payload.len() {
        return Err(FormatError::Truncated);
    }
    let mut ids = Vec::with_capacity(n as usize);
    for _ in 0..n {
        ids.push(c.u64()?);
    }
    let mut roles = Vec::with_capacity(n as usize);
    for _ in 0..n {
        roles.push(match c.u8()? {
            TAG_SURVIVOR => NodeRole::Survivor,
            TAG_ISOLATED => NodeRole::Isolated,
            TAG_LEAF => NodeRole::Leaf {
                anchor: node_id(c.u64()?, n, "redirect anchor")?,
                weight: c.f64()?,
            },
            tag => {
                return Err(FormatError::InvariantViolation(format!(
                    "unknown redirect tag {tag}"
                )))
            }
        });
    }
    let mut blocks = Vec::with_capacity(n_blocks as usize);
    let mut last_root = None;
    for _ in 0..n_blocks {
        let root = node_id(c.u64()?, n, "block root")?;
        if last_root.is_some_and(|r| r >= root) {
            return Err(FormatError::InvariantViolation(
                "blocks not ascending by root".into(),
            ));
        }
        last_root = Some(root);
        let count = c.u32()? as usize;
        if count.saturating_mul(ENTRY_LEN) > payload.len() - c.pos {
            return Err(FormatError::Truncated);
        }
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            entries.push(PsptEntry {
                member: node_id(c.u64()?, n, "block member")?,
                distance: c.f64()?,
                first_hop_idx: c.u32()?,
            });
        }
        blocks.push(Pspt::from_parts(root, entries));
    }
    if c.pos != payload.len() {
        return Err(FormatError::InvariantViolation(format!(
            "{} trailing bytes",
            payload.len() - c.pos
        )));
    }
    if beta == 0 {
        return Err(FormatError::InvariantViolation("beta is zero".into()));
    }
    Index::from_parts(alpha, beta as usize, roles, ids, blocks).map_err(FormatError::InvariantViolation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{sixteen_node, random_graph};
    use crate::index::build_index;
    use crate::pspt::TieOrder;

    #[test]
    fn sixteen_node_round_trip() {
        let g = sixteen_node();
        let idx = build_index(&g, 1.25).unwrap();
        let bytes = serialize_to_vec(&idx).unwrap();
        assert_eq!(bytes.len(), serialized_len(&idx));
        assert_eq!(deserialize_bytes(&bytes).unwrap(), idx);
    }

    #[test]
    fn size_matches_format_arithmetic() {
        let g = random_graph(1000, 1800, 7, 12);
        let idx = build_index(&g, 1.0).unwrap();
        let bytes = serialize_to_vec(&idx).unwrap();
        // independent count straight from the layout description
        let n = g.node_count();
        let leaves = (0..n as NodeId).filter(|&u| g.degree(u) == 1).count();
        let survivors = (0..n as NodeId).filter(|&u| g.degree(u) >= 2).count();
        let entries: usize = idx.blocks().map(|b| b.len()).sum();
        let expected = 8 + 4 + 8 * 4 + 8 * n + n + 16 * leaves + 12 * survivors + 20 * entries + 4;
        assert_eq!(bytes.len(), expected);
    }

    #[test]
    fn bad_magic() {
        let idx = build_index(&sixteen_node(), 1.25).unwrap();
        let mut bytes = serialize_to_vec(&idx).unwrap();
        bytes[0] ^= 0xff;
        assert!(matches!(deserialize_bytes(&bytes), Err(FormatError::BadMagic)));
    }

    #[test]
    fn version_mismatch() {
        let idx = build_index(&sixteen_node(), 1.25).unwrap();
        let mut bytes = serialize_to_vec(&idx).unwrap();
        bytes[8] = 2;
        assert!(matches!(
            deserialize_bytes(&bytes),
            Err(FormatError::VersionMismatch { found: 2, .. })
        ));
    }

    #[test]
    fn truncation() {
        let idx = build_index(&sixteen_node(), 1.25).unwrap();
        let bytes = serialize_to_vec(&idx).unwrap();
        for cut in [0, 5, 20, bytes.len() / 2, bytes.len() - 30] {
            assert!(
                matches!(deserialize_bytes(&bytes[..cut]), Err(FormatError::Truncated)),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn checksum_catches_payload_flip() {
        let idx = build_index(&sixteen_node(), 1.25).unwrap();
        let mut bytes = serialize_to_vec(&idx).unwrap();
        let last_entry_byte = bytes.len() - 6;
        bytes[last_entry_byte] ^= 0x01;
        assert!(matches!(
            deserialize_bytes(&bytes),
            Err(FormatError::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn invariant_violation_with_valid_checksum() {
        let idx = build_index(&sixteen_node(), 1.25).unwrap();
        let mut bytes = serialize_to_vec(&idx).unwrap();
        // first redirect tag lives right after the id map; node 1 survives
        let tag_pos = HEADER_LEN + 8 * idx.node_count();
        assert_eq!(bytes[tag_pos], TAG_SURVIVOR);
        bytes[tag_pos] = 7;
        let len = bytes.len();
        let crc = crc32fast::hash(&bytes[8..len - 4]);
        bytes[len - 4..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(
            deserialize_bytes(&bytes),
            Err(FormatError::InvariantViolation(_))
        ));
    }

    #[test]
    fn partial_index_is_not_serializable() {
        let g = sixteen_node();
        let idx = Index::build_for_roots(&g, 1.25, &[0], &TieOrder::Consistent).unwrap();
        assert!(matches!(
            serialize_to_vec(&idx),
            Err(FormatError::Incomplete { present: 1, expected: 8 })
        ));
    }
}
