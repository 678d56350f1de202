//! Disjoint-set union with path compression and union by size.

pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(len: usize) -> Self {
        Self { parent: (0..len as u32).collect(), size: vec![1; len] }
    }

    pub fn find(&mut self, id: usize) -> usize {
        let mut root = id as u32;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut cur = id as u32;
        while self.parent[cur as usize] != root {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = next;
        }
        root as usize
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return;
        }
        if self.size[ra] >= self.size[rb] {
            self.parent[rb as u32 as usize] = ra as u32;
            self.size[ra] += self.size[rb];
        } else {
            self.parent[ra] = rb as u32;
            self.size[rb] += self.size[ra];
        }
    }
}
