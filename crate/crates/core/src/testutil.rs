//! Dense GF(2) linear algebra used only as an independent oracle in tests.

use crate::ring::SparsePoly;

/// Row-major binary matrix, one `Vec<u8>` of 0/1 per row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitMatrix {
    pub rows: Vec<Vec<u8>>,
    pub cols: usize,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows: vec![vec![0; cols]; rows],
            cols,
        }
    }

    /// Block matrix whose `(i, j)` block is the circulant of `blocks[i][j]`.
    pub fn from_circulants(blocks: &[Vec<SparsePoly>]) -> Self {
        let q = blocks[0][0].q();
        let (br, bc) = (blocks.len(), blocks[0].len());
        let mut m = Self::zeros(br * q, bc * q);
        for (i, row) in blocks.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                for r in 0..q {
                    for &e in p.support() {
                        let c = (r + e as usize) % q;
                        m.rows[i * q + r][j * q + c] = 1;
                    }
                }
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &[u8]) -> Vec<u8> {
        self.rows
            .iter()
            .map(|r| r.iter().zip(x).fold(0u8, |a, (&h, &v)| a ^ (h & v)))
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows.len());
        for (i, r) in self.rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                t.rows[j][i] = v;
            }
        }
        t
    }

    pub fn mul(&self, other: &Self) -> Self {
        let t = other.transpose();
        let mut out = Self::zeros(self.rows.len(), other.cols);
        for (i, r) in self.rows.iter().enumerate() {
            for (j, c) in t.rows.iter().enumerate() {
                out.rows[i][j] = r.iter().zip(c).fold(0u8, |a, (&x, &y)| a ^ (x & y));
            }
        }
        out
    }

    /// Reduced row echelon form in place; returns pivot columns.
    pub fn rref(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            let Some(p) = (r..self.rows.len()).find(|&i| self.rows[i][c] == 1) else {
                continue;
            };
            self.rows.swap(r, p);
            for i in 0..self.rows.len() {
                if i != r && self.rows[i][c] == 1 {
                    let pivot = self.rows[r].clone();
                    for (a, b) in self.rows[i].iter_mut().zip(&pivot) {
                        *a ^= b;
                    }
                }
            }
            pivots.push(c);
            r += 1;
            if r == self.rows.len() {
                break;
            }
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        self.clone().rref().len()
    }

    /// Basis of the right kernel `{x : M x = 0}`.
    pub fn kernel(&self) -> Vec<Vec<u8>> {
        let mut m = self.clone();
        let pivots = m.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut x = vec![0u8; self.cols];
                x[f] = 1;
                for (row, &pc) in pivots.iter().enumerate() {
                    x[pc] = m.rows[row][f];
                }
                x
            })
            .collect()
    }
}

/// Rank of a set of vectors.
pub fn span_rank(vectors: &[Vec<u8>]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    BitMatrix {
        cols: vectors[0].len(),
        rows: vectors.to_vec(),
    }
    .rank()
}
