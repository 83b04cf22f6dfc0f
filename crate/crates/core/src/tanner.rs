//! Tanner graph obtained by lifting a polynomial matrix.
//!
//! Check node `i Q + r` is joined to variable node `j Q + s` iff
//! `(s - r) mod Q` is in the support of entry `(i, j)`. Edges are numbered in
//! check-node order and both adjacency directions are stored as flat arrays
//! with per-node offsets, so decoders keep their messages in flat per-edge
//! buffers.

use std::collections::BTreeMap;

use crate::protograph::PolyMatrix;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TannerGraph {
    q: usize,
    vn_count: usize,
    cn_count: usize,
    punctured: Vec<bool>,
    /// `cn_offsets[c]..cn_offsets[c + 1]` are the edges of check `c`.
    cn_offsets: Vec<usize>,
    edge_vn: Vec<u32>,
    /// `vn_offsets[v]..vn_offsets[v + 1]` index into `vn_edges`.
    vn_offsets: Vec<usize>,
    vn_edges: Vec<u32>,
    /// `(v, c)`: punctured `v` is the only punctured neighbour of check `c`
    /// and meets it over a single edge, so the observed neighbours of `c`
    /// fix its value.
    pivots: Vec<(u32, u32)>,
}

/// Histogram of node degrees (degree -> number of nodes).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DegreeProfile {
    pub vn: BTreeMap<usize, usize>,
    pub cn: BTreeMap<usize, usize>,
    /// Degree histogram restricted to punctured variable nodes.
    pub punctured_vn: BTreeMap<usize, usize>,
}

impl TannerGraph {
    /// Lifts `pm`; variable nodes of the block columns in `state_columns` are
    /// flagged as punctured.
    pub fn expand(pm: &PolyMatrix, state_columns: &[usize]) -> Self {
        let q = pm.q();
        let (m0, n0) = (pm.rows(), pm.cols());
        let vn_count = n0 * q;
        let cn_count = m0 * q;
        let total: usize = pm.entries().iter().map(|p| p.weight()).sum::<usize>() * q;

        let mut cn_offsets = Vec::with_capacity(cn_count + 1);
        let mut edge_vn = Vec::with_capacity(total);
        cn_offsets.push(0);
        for i in 0..m0 {
            for r in 0..q {
                for j in 0..n0 {
                    for &e in pm.get(i, j).support() {
                        edge_vn.push((j * q + (r + e as usize) % q) as u32);
                    }
                }
                cn_offsets.push(edge_vn.len());
            }
        }

        let mut vn_degree = vec![0usize; vn_count];
        for &v in &edge_vn {
            vn_degree[v as usize] += 1;
        }
        let mut vn_offsets = Vec::with_capacity(vn_count + 1);
        vn_offsets.push(0);
        for d in &vn_degree {
            vn_offsets.push(vn_offsets.last().unwrap() + d);
        }
        let mut fill = vn_offsets[..vn_count].to_vec();
        let mut vn_edges = vec![0u32; edge_vn.len()];
        for (e, &v) in edge_vn.iter().enumerate() {
            vn_edges[fill[v as usize]] = e as u32;
            fill[v as usize] += 1;
        }

        let punctured: Vec<bool> = (0..vn_count).map(|v| state_columns.contains(&(v / q))).collect();
        let mut pivots = Vec::new();
        for v in (0..vn_count).filter(|&v| punctured[v]) {
            let edges = &vn_edges[vn_offsets[v]..vn_offsets[v + 1]];
            let pivot = edges.iter().map(|&e| cn_of_edge(&cn_offsets, e as usize)).find(|&c| {
                edge_vn[cn_offsets[c]..cn_offsets[c + 1]]
                    .iter()
                    .filter(|&&u| punctured[u as usize])
                    .count()
                    == 1
            });
            if let Some(c) = pivot {
                pivots.push((v as u32, c as u32));
            }
        }
        Self {
            q,
            vn_count,
            cn_count,
            punctured,
            cn_offsets,
            edge_vn,
            vn_offsets,
            vn_edges,
            pivots,
        }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn vn_count(&self) -> usize {
        self.vn_count
    }

    pub fn cn_count(&self) -> usize {
        self.cn_count
    }

    pub fn edge_count(&self) -> usize {
        self.edge_vn.len()
    }

    pub fn vn_type(&self, v: usize) -> usize {
        v / self.q
    }

    pub fn is_punctured(&self, v: usize) -> bool {
        self.punctured[v]
    }

    /// Non-punctured variable nodes in increasing order; position `k` in this
    /// list carries ciphertext bit `k`.
    pub fn observed_vns(&self) -> Vec<usize> {
        (0..self.vn_count).filter(|&v| !self.punctured[v]).collect()
    }

    pub fn observed_count(&self) -> usize {
        self.punctured.iter().filter(|&&p| !p).count()
    }

    /// Edge ids of check `c` (contiguous).
    pub fn cn_edge_range(&self, c: usize) -> std::ops::Range<usize> {
        self.cn_offsets[c]..self.cn_offsets[c + 1]
    }

    /// Variable node at the far end of edge `e`.
    pub fn edge_vn(&self, e: usize) -> usize {
        self.edge_vn[e] as usize
    }

    /// Edge ids incident to variable `v`.
    pub fn vn_edges(&self, v: usize) -> &[u32] {
        &self.vn_edges[self.vn_offsets[v]..self.vn_offsets[v + 1]]
    }

    pub fn cn_neighbors(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        self.edge_vn[self.cn_edge_range(c)].iter().map(|&v| v as usize)
    }

    pub fn vn_degree(&self, v: usize) -> usize {
        self.vn_offsets[v + 1] - self.vn_offsets[v]
    }

    pub fn cn_degree(&self, c: usize) -> usize {
        self.cn_offsets[c + 1] - self.cn_offsets[c]
    }

    /// True iff every check is satisfied by the hard decisions `bits` (one
    /// 0/1 value per variable node).
    pub fn syndrome_is_zero(&self, bits: &[u8]) -> bool {
        (0..self.cn_count).all(|c| self.cn_neighbors(c).fold(0u8, |acc, v| acc ^ bits[v]) == 0)
    }

    /// Overwrites the punctured entries of `bits` that a pivot check
    /// determines with the value that check forces. When every punctured node
    /// has a pivot, the completed word satisfies all checks iff its observed
    /// part is a codeword of the punctured code.
    pub fn complete_punctured(&self, bits: &mut [u8]) {
        for &(v, c) in &self.pivots {
            bits[v as usize] = self
                .cn_neighbors(c as usize)
                .filter(|&u| u != v as usize)
                .fold(0u8, |acc, u| acc ^ bits[u]);
        }
    }

    pub fn degree_profile(&self) -> DegreeProfile {
        let mut profile = DegreeProfile::default();
        for v in 0..self.vn_count {
            let d = self.vn_degree(v);
            *profile.vn.entry(d).or_default() += 1;
            if self.punctured[v] {
                *profile.punctured_vn.entry(d).or_default() += 1;
            }
        }
        for c in 0..self.cn_count {
            *profile.cn.entry(self.cn_degree(c)).or_default() += 1;
        }
        profile
    }
}

fn cn_of_edge(cn_offsets: &[usize], e: usize) -> usize {
    cn_offsets.partition_point(|&o| o <= e) - 1
}
