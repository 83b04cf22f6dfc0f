//! Protograph base matrices, their quasi-cyclic expansion into a polynomial
//! matrix, and the derived MDPC parity-check matrix.
//!
//! Two shapes are supported:
//!
//! * the *reference* shape `(b_00 b_01 ... )`, a single row without state
//!   columns, whose expansion is directly the MDPC parity-check matrix;
//! * the *state* shape
//!
//! ```text
//!     ( 1    | b_01  b_02 )
//!     ( b_10 | b_11  b_12 )
//! ```
//!
//! where column 0 holds punctured state variable nodes. Its expansion
//! `Gamma(X)` pins `gamma_00 = 1` and the MDPC matrix is obtained by eliminating
//! the state block:
//! `h_00 = gamma_11 + gamma_01 gamma_10`, `h_01 = gamma_12 + gamma_02 gamma_10`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::combinatorics::log2_binomial;
use crate::error::{Error, Result};
use crate::ring::{sample_sparse, SparsePoly};

/// `M0 x N0` matrix of edge multiplicities with punctured column flags.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseMatrix {
    pub rows: Vec<Vec<u32>>,
    #[serde(default)]
    pub state_columns: Vec<usize>,
}

/// Which of the supported layouts a base matrix follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    /// One row, no state columns.
    Reference,
    /// Two rows, three columns, column 0 punctured with `b_00 = 1`.
    State,
}

impl BaseMatrix {
    pub fn new(rows: Vec<Vec<u32>>, state_columns: Vec<usize>) -> Result<Self> {
        let b = Self {
            rows,
            state_columns,
        };
        b.shape()?;
        Ok(b)
    }

    pub fn m0(&self) -> usize {
        self.rows.len()
    }

    pub fn n0(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.rows[i][j]
    }

    pub fn is_state_column(&self, j: usize) -> bool {
        self.state_columns.contains(&j)
    }

    pub fn shape(&self) -> Result<Shape> {
        let n0 = self.n0();
        if self.rows.is_empty() || n0 == 0 || self.rows.iter().any(|r| r.len() != n0) {
            return Err(Error::Shape("base matrix must be a non-empty rectangle".into()));
        }
        match (self.m0(), n0, self.state_columns.as_slice()) {
            (1, _, []) => Ok(Shape::Reference),
            (2, 3, [0]) if self.rows[0][0] == 1 => Ok(Shape::State),
            (2, 3, [0]) => Err(Error::Shape(format!(
                "state shape needs b_00 = 1, found {}",
                self.rows[0][0]
            ))),
            (m, n, s) => Err(Error::Shape(format!(
                "unsupported base matrix {m}x{n} with state columns {s:?}"
            ))),
        }
    }

    /// Sum of all entries, i.e. the number of protograph edges.
    pub fn edge_count(&self) -> usize {
        self.rows.iter().flatten().map(|&b| b as usize).sum()
    }
}

/// Upper bound on the row weight of the derived parity-check matrix:
/// `b_11 + b_01 b_10 + b_12 + b_02 b_10`. Only defined for the state shape.
pub fn weight_bound(base: &BaseMatrix) -> Result<usize> {
    if base.shape()? != Shape::State {
        return Err(Error::Shape("weight bound needs the 2x3 state shape".into()));
    }
    let b = |i: usize, j: usize| base.get(i, j) as usize;
    Ok(b(1, 1) + b(0, 1) * b(1, 0) + b(1, 2) + b(0, 2) * b(1, 0))
}

/// A named base matrix together with its lifting size.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub name: String,
    pub base: BaseMatrix,
    pub q: usize,
}

/// Built-in ensembles.
///
/// `A` is the regular reference `(45 45)`. For `B` and `C` the entry order
/// `(1 8 8 | 5 5 5)` and `(1 22 22 | 2 1 1)` is the only assignment for which
/// both the row-weight-90 constraint and the key-space sizes `2^328` and
/// `2^446` hold.
pub fn ensemble(name: &str, q: usize) -> Result<EnsembleSpec> {
    let (rows, state) = match name {
        "A" | "a" => (vec![vec![45, 45]], vec![]),
        "B" | "b" => (vec![vec![1, 8, 8], vec![5, 5, 5]], vec![0]),
        "C" | "c" => (vec![vec![1, 22, 22], vec![2, 1, 1]], vec![0]),
        other => return Err(Error::UnknownEnsemble(other.to_string())),
    };
    EnsembleSpec::new(name.to_ascii_uppercase(), BaseMatrix::new(rows, state)?, q)
}

impl EnsembleSpec {
    pub fn new(name: impl Into<String>, base: BaseMatrix, q: usize) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            base,
            q,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let shape = self.base.shape()?;
        if self.q == 0 {
            return Err(Error::InvalidParameter("Q must be positive".into()));
        }
        if let Some(&b) = self.base.rows.iter().flatten().find(|&&b| b as usize > self.q) {
            return Err(Error::WeightTooLarge {
                weight: b as usize,
                len: self.q,
            });
        }
        if shape == Shape::Reference && self.base.n0() != 2 {
            return Err(Error::Shape(
                "the cryptosystem uses rate-1/2 reference matrices (two columns)".into(),
            ));
        }
        Ok(())
    }

    pub fn shape(&self) -> Shape {
        self.base.shape().expect("validated at construction")
    }

    /// Code length `n = (N0 - #state) Q`.
    pub fn block_length(&self) -> usize {
        (self.base.n0() - self.base.state_columns.len()) * self.q
    }

    /// Variable nodes of the graph the decoder runs on, `N0 Q`.
    pub fn extended_vns(&self) -> usize {
        self.base.n0() * self.q
    }

    /// Bound on `wt(h_00) + wt(h_01)`: the single-row weight for the
    /// reference shape, the elimination bound for the state shape.
    pub fn h_row_weight_bound(&self) -> usize {
        match self.shape() {
            Shape::Reference => self.base.rows[0].iter().map(|&b| b as usize).sum(),
            Shape::State => weight_bound(&self.base).expect("state shape"),
        }
    }
}

/// log2 of the number of distinct private keys.
///
/// The product of `C(Q, b_ij)` counts every choice of circulants; keys related
/// by a common cyclic shift define the same code, which removes a factor `Q`.
/// For the state shape the pinned `gamma_00 = 1` already selects one
/// representative, so its `C(Q, 1) = Q` factor cancels the division.
pub fn key_space_bits(spec: &EnsembleSpec) -> f64 {
    let q = spec.q as u64;
    let product: f64 = spec
        .base
        .rows
        .iter()
        .flatten()
        .map(|&b| log2_binomial(q, b as u64))
        .sum();
    (product - (q as f64).log2()).max(0.0)
}

/// Small matrix of polynomials sharing one modulus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<SparsePoly>,
}

impl PolyMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<SparsePoly>) -> Result<Self> {
        if rows * cols != entries.len() || entries.is_empty() {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        let q = entries[0].q();
        if let Some(p) = entries.iter().find(|p| p.q() != q) {
            return Err(Error::ModulusMismatch {
                left: q,
                right: p.q(),
            });
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn q(&self) -> usize {
        self.entries[0].q()
    }

    pub fn get(&self, i: usize, j: usize) -> &SparsePoly {
        &self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[SparsePoly] {
        &self.entries
    }

    pub fn weights(&self) -> Vec<Vec<usize>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j).weight()).collect())
            .collect()
    }
}

/// Draws `Gamma(X)`: every entry uniform among weight-`b_ij` polynomials,
/// except `gamma_00`, which is pinned to `1` for the state shape.
pub fn sample_gamma<R: Rng + ?Sized>(spec: &EnsembleSpec, rng: &mut R) -> Result<PolyMatrix> {
    let base = &spec.base;
    let pinned = spec.shape() == Shape::State;
    let mut entries = Vec::with_capacity(base.m0() * base.n0());
    for i in 0..base.m0() {
        for j in 0..base.n0() {
            if pinned && i == 0 && j == 0 {
                entries.push(SparsePoly::one(spec.q));
            } else {
                entries.push(sample_sparse(spec.q, base.get(i, j) as usize, rng)?);
            }
        }
    }
    PolyMatrix::new(base.m0(), base.n0(), entries)
}

/// Eliminates the state block of a `2 x 3` `Gamma(X)` with `gamma_00 = 1`.
pub fn derive_h(gamma: &PolyMatrix) -> Result<PolyMatrix> {
    if gamma.rows() != 2 || gamma.cols() != 3 {
        return Err(Error::Shape(format!(
            "expected 2x3 Gamma, got {}x{}",
            gamma.rows(),
            gamma.cols()
        )));
    }
    if *gamma.get(0, 0) != SparsePoly::one(gamma.q()) {
        return Err(Error::Shape("gamma_00 must be the constant 1".into()));
    }
    let g10 = gamma.get(1, 0);
    let h00 = gamma.get(1, 1).add(&gamma.get(0, 1).mul(g10)?)?;
    let h01 = gamma.get(1, 2).add(&gamma.get(0, 2).mul(g10)?)?;
    PolyMatrix::new(1, 2, vec![h00, h01])
}
