use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::INDEX_MAGIC;
use crate::error::{Error, Result};

/// Header fields of a saved index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexMeta {
    pub d: u32,
    pub l: u32,
    pub s: u32,
    pub t: u32,
    pub c_r: u32,
    pub c_n: u32,
    pub n_records: u64,
}

/// Bytes per residue in a bucket key.
pub fn key_width(c_n: u32) -> usize {
    c_n.div_ceil(8) as usize
}

/// Concatenates residues in the given order, each little-endian in
/// [`key_width`] bytes.
pub fn bucket_key(values: &[u64], c_n: u32) -> Vec<u8> {
    let w = key_width(c_n);
    let mut key = Vec::with_capacity(values.len() * w);
    for v in values {
        key.extend_from_slice(&v.to_le_bytes()[..w]);
    }
    key
}

/// `L` hash tables from nested-signature keys to record ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchIndex {
    meta: IndexMeta,
    tables: Vec<HashMap<Vec<u8>, Vec<u64>>>,
}

impl SearchIndex {
    pub fn new(meta: IndexMeta) -> Self {
        Self { meta, tables: vec![HashMap::new(); meta.l as usize] }
    }

    pub fn meta(&self) -> &IndexMeta {
        &self.meta
    }

    pub fn table(&self, i: usize) -> &HashMap<Vec<u8>, Vec<u64>> {
        &self.tables[i]
    }

    /// Adds `id` to a bucket, keeping bucket lists sorted and duplicate-free.
    pub fn insert(&mut self, table: usize, key: Vec<u8>, id: u64) {
        let ids = self.tables[table].entry(key).or_default();
        if let Err(at) = ids.binary_search(&id) {
            ids.insert(at, id);
        }
    }

    pub fn bucket(&self, table: usize, key: &[u8]) -> Option<&[u64]> {
        self.tables[table].get(key).map(Vec::as_slice)
    }

    pub fn bucket_count(&self) -> usize {
        self.tables.iter().map(HashMap::len).sum()
    }
}

pub fn write_index<W: Write>(index: &SearchIndex, w: &mut W) -> Result<()> {
    let m = &index.meta;
    w.write_all(INDEX_MAGIC)?;
    for v in [m.d, m.l, m.s, m.t, m.c_r, m.c_n] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&m.n_records.to_le_bytes())?;
    for table in &index.tables {
        w.write_all(&(table.len() as u64).to_le_bytes())?;
        let mut keys: Vec<&Vec<u8>> = table.keys().collect();
        keys.sort();
        for key in keys {
            let ids = &table[key];
            w.write_all(&(key.len() as u32).to_le_bytes())?;
            w.write_all(key)?;
            w.write_all(&(ids.len() as u32).to_le_bytes())?;
            for id in ids {
                w.write_all(&id.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn save_index(index: &SearchIndex, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_index(index, &mut w)?;
    w.flush()?;
    Ok(())
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptIndex(msg.into())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, n: usize, what: &str) -> Result<Vec<u8>> {
        let mut buf = vec![0; n];
        self.inner.read_exact(&mut buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => corrupt(format!("truncated while reading {what}")),
            _ => Error::Io(e),
        })?;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8, what)?.try_into().expect("8 bytes")))
    }
}

pub fn read_index<R: Read>(r: R) -> Result<SearchIndex> {
    let mut r = Reader { inner: r };
    if r.bytes(8, "magic")? != INDEX_MAGIC {
        return Err(corrupt("bad magic, not a MIMPIDX1 file"));
    }
    let mut h = [0u32; 6];
    for v in &mut h {
        *v = r.u32("header")?;
    }
    let meta = IndexMeta { d: h[0], l: h[1], s: h[2], t: h[3], c_r: h[4], c_n: h[5], n_records: r.u64("header")? };
    if meta.l == 0 || meta.l > meta.d || meta.t == 0 || meta.c_n == 0 || meta.c_n > 32 {
        return Err(corrupt(format!("implausible header {meta:?}")));
    }
    let key_len = (meta.t * meta.t) as usize * key_width(meta.c_n);
    let mut index = SearchIndex::new(meta);
    for i in 0..meta.l as usize {
        let buckets = r.u64("bucket count")?;
        let mut prev: Option<Vec<u8>> = None;
        for _ in 0..buckets {
            let len = r.u32("key length")? as usize;
            if len != key_len {
                return Err(corrupt(format!("table {i}: key of {len} bytes, expected {key_len}")));
            }
            let key = r.bytes(len, "key")?;
            if prev.as_ref().is_some_and(|p| *p >= key) {
                return Err(corrupt(format!("table {i}: keys out of order")));
            }
            let count = r.u32("id count")? as usize;
            if count == 0 {
                return Err(corrupt(format!("table {i}: empty bucket")));
            }
            let mut ids = Vec::with_capacity(count.min(1 << 20));
            for _ in 0..count {
                let id = r.u64("record id")?;
                if id >= meta.n_records || ids.last().is_some_and(|&last| last >= id) {
                    return Err(corrupt(format!("table {i}: bad record id {id}")));
                }
                ids.push(id);
            }
            index.tables[i].insert(key.clone(), ids);
            prev = Some(key);
        }
    }
    let mut rest = [0u8; 1];
    if r.inner.read(&mut rest)? != 0 {
        return Err(corrupt("trailing bytes after the last table"));
    }
    Ok(index)
}

pub fn load_index(path: &Path) -> Result<SearchIndex> {
    read_index(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(n: u64) -> IndexMeta {
        IndexMeta { d: 120, l: 3, s: 40, t: 2, c_r: 15, c_n: 15, n_records: n }
    }

    fn bytes(index: &SearchIndex) -> Vec<u8> {
        let mut out = Vec::new();
        write_index(index, &mut out).unwrap();
        out
    }

    #[test]
    fn key_layout() {
        assert_eq!(key_width(15), 2);
        assert_eq!(key_width(16), 2);
        assert_eq!(key_width(17), 3);
        assert_eq!(bucket_key(&[0x1234, 0x7fff], 15), vec![0x34, 0x12, 0xff, 0x7f]);
    }

    #[test]
    fn empty_round_trip() {
        let index = SearchIndex::new(meta(0));
        let b = bytes(&index);
        assert!(b.starts_with(b"MIMPIDX1"));
        assert_eq!(b.len(), 8 + 24 + 8 + 3 * 8);
        assert_eq!(read_index(&b[..]).unwrap(), index);
    }

    #[test]
    fn buckets_are_sorted_sets() {
        let mut index = SearchIndex::new(meta(5));
        let key = bucket_key(&[1, 2, 3, 4], 15);
        for id in [4, 1, 4, 2] {
            index.insert(0, key.clone(), id);
        }
        assert_eq!(index.bucket(0, &key).unwrap(), &[1, 2, 4]);
        let b = bytes(&index);
        assert_eq!(bytes(&read_index(&b[..]).unwrap()), b);
    }

    #[test]
    fn corruption_detected() {
        let mut index = SearchIndex::new(meta(5));
        index.insert(1, bucket_key(&[1, 2, 3, 4], 15), 3);
        let b = bytes(&index);
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(read_index(&bad[..]), Err(Error::CorruptIndex(_))));
        for cut in [4, 20, b.len() - 1] {
            assert!(matches!(read_index(&b[..cut]), Err(Error::CorruptIndex(_))), "cut {cut}");
        }
        let mut extra = b.clone();
        extra.push(0);
        assert!(matches!(read_index(&extra[..]), Err(Error::CorruptIndex(_))));
    }
}
