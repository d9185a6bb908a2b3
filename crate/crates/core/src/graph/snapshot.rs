//! Versioned binary snapshot of a [`TemporalRetweetNetwork`].
//!
//! Layout (little endian): magic `RTNET\0\0\0`, `u32` version, `u32` user
//! count, then each user name as `u32` byte length + UTF-8, then `u32` week
//! count and per week `u32` index, `u64` edge count and `(u32 retweeter,
//! u32 author, u32 count)` triples in global ids.

use std::io::{Read, Write};

use super::{TemporalRetweetNetwork, UserIndex, WeeklyGraph};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"RTNET\0\0\0";
pub const SNAPSHOT_VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(net: &TemporalRetweetNetwork, mut out: W) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    let names = net.user_index().names();
    out.write_all(&(names.len() as u32).to_le_bytes())?;
    for name in names {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
    }
    out.write_all(&(net.weeks().len() as u32).to_le_bytes())?;
    let mut buf = Vec::new();
    for g in net.weeks() {
        out.write_all(&g.week().to_le_bytes())?;
        out.write_all(&(g.n_edges() as u64).to_le_bytes())?;
        buf.clear();
        for e in g.edges() {
            buf.extend_from_slice(&e.retweeter.to_le_bytes());
            buf.extend_from_slice(&e.author.to_le_bytes());
            buf.extend_from_slice(&e.count.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

fn truncated(e: std::io::Error) -> Error {
    Error::Snapshot(format!("truncated input ({e})"))
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<TemporalRetweetNetwork> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::Snapshot(format!(
            "unsupported version {version} (expected {SNAPSHOT_VERSION})"
        )));
    }
    let n_users = read_u32(&mut r)?;
    let mut index = UserIndex::new();
    for expected in 0..n_users {
        let len = read_u32(&mut r)? as usize;
        let mut bytes = vec![0u8; len];
        r.read_exact(&mut bytes).map_err(truncated)?;
        let name = String::from_utf8(bytes).map_err(|_| Error::Snapshot("user name is not UTF-8".into()))?;
        if index.intern(&name) != expected {
            return Err(Error::Snapshot(format!("duplicate user `{name}`")));
        }
    }
    let n_weeks = read_u32(&mut r)?;
    let mut weeks = Vec::with_capacity(n_weeks as usize);
    let mut prev: Option<u32> = None;
    for _ in 0..n_weeks {
        let week = read_u32(&mut r)?;
        if prev.is_some_and(|p| p >= week) {
            return Err(Error::Snapshot("weeks not strictly increasing".into()));
        }
        prev = Some(week);
        let n_edges = read_u64(&mut r)? as usize;
        let mut raw = vec![0u8; n_edges * 12];
        r.read_exact(&mut raw).map_err(truncated)?;
        let triples: Vec<(u32, u32, u32)> = raw
            .chunks_exact(12)
            .map(|c| {
                let f = |k: usize| u32::from_le_bytes(c[k..k + 4].try_into().unwrap());
                (f(0), f(4), f(8))
            })
            .collect();
        if triples.iter().any(|&(i, j, _)| i >= n_users || j >= n_users) {
            return Err(Error::Snapshot(format!("week {week} references an unknown user")));
        }
        weeks.push(WeeklyGraph::from_triples(week, triples).0);
    }
    Ok(TemporalRetweetNetwork::new(index, weeks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn build(weeks: Vec<Vec<(u32, u32, u32)>>, users: u32) -> TemporalRetweetNetwork {
        let mut idx = UserIndex::new();
        for u in 0..users {
            idx.intern(&format!("user-{u}"));
        }
        let graphs = weeks
            .into_iter()
            .enumerate()
            .map(|(w, t)| WeeklyGraph::from_triples(w as u32 * 2, t).0)
            .collect();
        TemporalRetweetNetwork::new(idx, graphs)
    }

    #[test]
    fn rejects_bad_header() {
        assert!(matches!(read_snapshot(&b"NOPE"[..]), Err(Error::Snapshot(_))));
        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&99u32.to_le_bytes());
        assert!(matches!(read_snapshot(&bytes[..]), Err(Error::Snapshot(m)) if m.contains("version")));
    }

    proptest! {
        #[test]
        fn round_trip_preserves_edges(weeks in proptest::collection::vec(
            proptest::collection::vec((0u32..20, 0u32..20, 1u32..9), 0..40), 0..5)) {
            let net = build(weeks, 20);
            let mut bytes = Vec::new();
            write_snapshot(&net, &mut bytes).unwrap();
            let back = read_snapshot(&bytes[..]).unwrap();
            prop_assert_eq!(back.edge_rows(), net.edge_rows());
            prop_assert_eq!(back, net);
        }
    }
}
