use super::phash::{hamming, PHash64};

struct Node<T> {
    hash: PHash64,
    payload: T,
    // (distance to this node, child index); distances are unique per node
    children: Vec<(u32, usize)>,
}

/// BK-tree over Hamming distance.
///
/// Built by a single writer, then shareable for concurrent read-only queries.
/// Equal hashes are kept as distance-0 children so every payload is retrievable.
pub struct HammingIndex<T> {
    nodes: Vec<Node<T>>,
}

impl<T> Default for HammingIndex<T> {
    fn default() -> Self {
        Self { nodes: Vec::new() }
    }
}

impl<T> HammingIndex<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn insert(&mut self, hash: PHash64, payload: T) {
        let new_idx = self.nodes.len();
        if new_idx == 0 {
            self.nodes.push(Node { hash, payload, children: Vec::new() });
            return;
        }
        let mut cur = 0;
        loop {
            let d = hamming(self.nodes[cur].hash, hash);
            match self.nodes[cur].children.iter().find(|(cd, _)| *cd == d) {
                Some(&(_, next)) => cur = next,
                None => {
                    self.nodes[cur].children.push((d, new_idx));
                    break;
                }
            }
        }
        self.nodes.push(Node { hash, payload, children: Vec::new() });
    }

    /// All entries within `radius` of `probe`, as `(hash, payload, distance)`.
    /// Order follows tree traversal, not distance.
    pub fn radius_query(&self, probe: PHash64, radius: u32) -> Vec<(PHash64, &T, u32)> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let mut stack = vec![0usize];
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx];
            let d = hamming(node.hash, probe);
            if d <= radius {
                out.push((node.hash, &node.payload, d));
            }
            let lo = d.saturating_sub(radius);
            let hi = d + radius;
            for &(cd, child) in &node.children {
                if cd >= lo && cd <= hi {
                    stack.push(child);
                }
            }
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (PHash64, &T)> {
        self.nodes.iter().map(|n| (n.hash, &n.payload))
    }

    /// Checks that every stored edge label equals the metric distance.
    pub fn edges_consistent(&self) -> bool {
        self.nodes.iter().all(|n| {
            n.children
                .iter()
                .all(|&(d, c)| hamming(n.hash, self.nodes[c].hash) == d)
        })
    }
}

impl<T> FromIterator<(PHash64, T)> for HammingIndex<T> {
    fn from_iter<I: IntoIterator<Item = (PHash64, T)>>(iter: I) -> Self {
        let mut idx = HammingIndex::new();
        for (h, p) in iter {
            idx.insert(h, p);
        }
        idx
    }
}
