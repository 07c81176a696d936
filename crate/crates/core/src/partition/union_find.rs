/// Disjoint sets with union by size and path compression.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, mut i: usize) -> usize {
        let mut root = i;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[i] != root {
            let next = self.parent[i];
            self.parent[i] = root;
            i = next;
        }
        root
    }

    /// Joins two roots and returns `(new_root, absorbed_root)`. Ties in size
    /// keep the smaller index as root.
    pub fn union_roots(&mut self, a: usize, b: usize) -> (usize, usize) {
        debug_assert!(self.parent[a] == a && self.parent[b] == b && a != b);
        let (root, child) = match self.size[a].cmp(&self.size[b]) {
            std::cmp::Ordering::Greater => (a, b),
            std::cmp::Ordering::Less => (b, a),
            std::cmp::Ordering::Equal => (a.min(b), a.max(b)),
        };
        self.parent[child] = root;
        self.size[root] += self.size[child];
        (root, child)
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.union_roots(ra, rb);
        true
    }

    /// Component ids `1..=n`, numbered by first appearance in index order.
    pub fn labels(&mut self) -> Vec<u64> {
        let n = self.len();
        let mut id_of_root = vec![0u64; n];
        let mut next = 0u64;
        (0..n)
            .map(|i| {
                let r = self.find(i);
                if id_of_root[r] == 0 {
                    next += 1;
                    id_of_root[r] = next;
                }
                id_of_root[r]
            })
            .collect()
    }
}
