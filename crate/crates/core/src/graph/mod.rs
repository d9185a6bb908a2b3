//! Temporal retweet networks: interned users and one sparse weighted directed
//! graph per week.
//!
//! An edge `(i, j, w)` means user `i` retweeted `w` posts originally authored
//! by `j` during that week. Each [`WeeklyGraph`] numbers its active users
//! densely ("local ids") in increasing order of their global id, so sorted
//! local-id sets map to sorted global-id sets without re-sorting.

mod impact;
mod ingest;
mod snapshot;

use std::collections::HashMap;

pub use impact::{gini, gini_counts, impact, ImpactProfile, WeekImpact};
pub use ingest::{ingest, ingest_path, ingest_paths, parse_timestamp, ErrorPolicy, IngestOptions, IngestReport, TimeFormat};
pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_VERSION};

use crate::sets::IdSet;

/// Bijection between external user handles and dense internal ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UserIndex {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl UserIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id for `name`, assigning the next free id if unseen.
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = u32::try_from(self.names.len()).expect("more than u32::MAX users");
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// One retweet edge in global ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub retweeter: u32,
    pub author: u32,
    pub count: u32,
}

/// Sparse weighted directed retweet graph for a single week.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeeklyGraph {
    week: u32,
    /// Global ids of active users, strictly increasing; index = local id.
    nodes: Vec<u32>,
    out_offsets: Vec<u32>,
    out_targets: Vec<u32>,
    out_counts: Vec<u32>,
    in_offsets: Vec<u32>,
    in_sources: Vec<u32>,
}

impl WeeklyGraph {
    /// Builds a week from raw `(retweeter, author, count)` triples in global
    /// ids. Duplicate pairs are summed, zero counts and self-loops dropped.
    /// Returns the graph and the number of dropped self-loop records.
    pub fn from_triples(week: u32, mut triples: Vec<(u32, u32, u32)>) -> (Self, u64) {
        let before = triples.len();
        triples.retain(|&(i, j, w)| i != j && w > 0);
        let self_loops = (before - triples.len()) as u64;
        triples.sort_unstable_by_key(|&(i, j, _)| (i, j));

        let mut merged: Vec<(u32, u32, u32)> = Vec::with_capacity(triples.len());
        for (i, j, w) in triples {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => {
                    last.2 = last.2.checked_add(w).expect("edge weight overflow");
                }
                _ => merged.push((i, j, w)),
            }
        }

        let mut nodes: Vec<u32> = merged.iter().flat_map(|&(i, j, _)| [i, j]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let local = |g: u32| nodes.binary_search(&g).unwrap() as u32;

        let n = nodes.len();
        let mut out_offsets = vec![0u32; n + 1];
        let mut in_offsets = vec![0u32; n + 1];
        let mut out_targets = Vec::with_capacity(merged.len());
        let mut out_counts = Vec::with_capacity(merged.len());
        let mut srcs = Vec::with_capacity(merged.len());
        for &(i, j, w) in &merged {
            let (li, lj) = (local(i), local(j));
            out_offsets[li as usize + 1] += 1;
            in_offsets[lj as usize + 1] += 1;
            srcs.push(li);
            out_targets.push(lj);
            out_counts.push(w);
        }
        for k in 0..n {
            out_offsets[k + 1] += out_offsets[k];
            in_offsets[k + 1] += in_offsets[k];
        }
        // Edges are sorted by (src, dst), so filling by destination keeps each
        // in-list sorted by source.
        let mut cursor = in_offsets.clone();
        let mut in_sources = vec![0u32; merged.len()];
        for (&s, &t) in srcs.iter().zip(&out_targets) {
            let slot = &mut cursor[t as usize];
            in_sources[*slot as usize] = s;
            *slot += 1;
        }

        let graph = WeeklyGraph {
            week,
            nodes,
            out_offsets,
            out_targets,
            out_counts,
            in_offsets,
            in_sources,
        };
        (graph, self_loops)
    }

    pub fn week(&self) -> u32 {
        self.week
    }

    /// Number of users that retweeted or were retweeted this week.
    pub fn n_users(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.out_targets.len()
    }

    pub fn total_weight(&self) -> u64 {
        self.out_counts.iter().map(|&c| u64::from(c)).sum()
    }

    /// Global ids of active users; position is the local id.
    pub fn nodes(&self) -> &[u32] {
        &self.nodes
    }

    pub fn global(&self, local: u32) -> u32 {
        self.nodes[local as usize]
    }

    pub fn local(&self, global: u32) -> Option<u32> {
        self.nodes.binary_search(&global).ok().map(|p| p as u32)
    }

    /// Local ids of users retweeted by `local`, increasing.
    pub fn out_neighbors(&self, local: u32) -> &[u32] {
        let (a, b) = self.range(&self.out_offsets, local);
        &self.out_targets[a..b]
    }

    pub fn out_counts(&self, local: u32) -> &[u32] {
        let (a, b) = self.range(&self.out_offsets, local);
        &self.out_counts[a..b]
    }

    /// Local ids of users who retweeted `local`, increasing.
    pub fn in_neighbors(&self, local: u32) -> &[u32] {
        let (a, b) = self.range(&self.in_offsets, local);
        &self.in_sources[a..b]
    }

    fn range(&self, offsets: &[u32], local: u32) -> (usize, usize) {
        let l = local as usize;
        (offsets[l] as usize, offsets[l + 1] as usize)
    }

    /// All edges in global ids, ordered by (retweeter, author).
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        (0..self.nodes.len() as u32).flat_map(move |s| {
            let retweeter = self.nodes[s as usize];
            self.out_neighbors(s)
                .iter()
                .zip(self.out_counts(s))
                .map(move |(&t, &count)| Edge {
                    retweeter,
                    author: self.nodes[t as usize],
                    count,
                })
        })
    }

    /// Maps a set of local ids to the corresponding global-id set.
    pub fn to_global(&self, locals: &[u32]) -> IdSet {
        IdSet::from_sorted(locals.iter().map(|&l| self.nodes[l as usize]).collect())
    }
}

/// Ordered weekly retweet graphs over a shared user index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalRetweetNetwork {
    user_index: UserIndex,
    weeks: Vec<WeeklyGraph>,
}

impl TemporalRetweetNetwork {
    pub fn new(user_index: UserIndex, mut weeks: Vec<WeeklyGraph>) -> Self {
        weeks.sort_by_key(WeeklyGraph::week);
        assert!(
            weeks.windows(2).all(|w| w[0].week < w[1].week),
            "duplicate week index"
        );
        let n = user_index.len() as u32;
        assert!(
            weeks.iter().all(|g| g.nodes.last().is_none_or(|&m| m < n)),
            "edge references an unknown user"
        );
        TemporalRetweetNetwork { user_index, weeks }
    }

    pub fn user_index(&self) -> &UserIndex {
        &self.user_index
    }

    pub fn weeks(&self) -> &[WeeklyGraph] {
        &self.weeks
    }

    pub fn week(&self, week: u32) -> Option<&WeeklyGraph> {
        self.weeks
            .binary_search_by_key(&week, WeeklyGraph::week)
            .ok()
            .map(|p| &self.weeks[p])
    }

    pub fn is_empty(&self) -> bool {
        self.weeks.is_empty()
    }

    /// Sorted multiset of `(week, retweeter, author, count)` rows.
    pub fn edge_rows(&self) -> Vec<(u32, Edge)> {
        self.weeks
            .iter()
            .flat_map(|g| g.edges().map(move |e| (g.week, e)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_triples_merges_and_drops_self_loops() {
        let (g, dropped) = WeeklyGraph::from_triples(0, vec![(3, 1, 1), (3, 1, 2), (5, 5, 4), (1, 3, 1)]);
        assert_eq!(dropped, 1);
        assert_eq!(g.nodes(), &[1, 3]);
        let edges: Vec<Edge> = g.edges().collect();
        assert_eq!(
            edges,
            vec![
                Edge { retweeter: 1, author: 3, count: 1 },
                Edge { retweeter: 3, author: 1, count: 3 },
            ]
        );
        assert_eq!(g.in_neighbors(g.local(1).unwrap()), &[g.local(3).unwrap()]);
    }

    #[test]
    fn adjacency_is_consistent() {
        let triples = vec![(0, 4, 1), (2, 4, 1), (1, 4, 2), (2, 3, 1), (4, 0, 1)];
        let (g, _) = WeeklyGraph::from_triples(7, triples);
        let hub = g.local(4).unwrap();
        let retweeters: Vec<u32> = g.in_neighbors(hub).iter().map(|&l| g.global(l)).collect();
        assert_eq!(retweeters, vec![0, 1, 2]);
        assert_eq!(g.total_weight(), 6);
        assert_eq!(g.n_edges(), 5);
    }

    #[test]
    fn user_index_is_bijective() {
        let mut idx = UserIndex::new();
        assert_eq!(idx.intern("alice"), 0);
        assert_eq!(idx.intern("bob"), 1);
        assert_eq!(idx.intern("alice"), 0);
        assert_eq!(idx.name(1), Some("bob"));
        assert_eq!(idx.id("bob"), Some(1));
        assert_eq!(idx.len(), 2);
    }
}
