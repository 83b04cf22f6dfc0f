//! Arithmetic in `F2[X]/(X^Q - 1)`, the polynomial image of the ring of
//! `Q x Q` binary circulant matrices.
//!
//! Two representations are used. [`SparsePoly`] keeps the sorted support and
//! is what every private-key object is made of (weights stay well below `Q`).
//! [`DensePoly`] is a packed bit-vector for the public key and for plaintexts,
//! whose weights are around `Q/2`.
//!
//! The circulant associated with `a(X)` has first row `(a_0, ..., a_{Q-1})` and
//! each following row is the previous one cyclically shifted to the right, so
//! row `r` has a one in column `c` iff `c - r mod Q` is in the support.

use std::cmp::Ordering;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse element of `F2[X]/(X^Q - 1)`: the strictly increasing list of
/// exponents with a non-zero coefficient.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSparse", into = "RawSparse")]
pub struct SparsePoly {
    q: usize,
    support: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct RawSparse {
    q: usize,
    support: Vec<u32>,
}

impl TryFrom<RawSparse> for SparsePoly {
    type Error = Error;

    fn try_from(raw: RawSparse) -> Result<Self> {
        SparsePoly::new(raw.q, raw.support)
    }
}

impl From<SparsePoly> for RawSparse {
    fn from(p: SparsePoly) -> Self {
        RawSparse {
            q: p.q,
            support: p.support,
        }
    }
}

impl fmt::Debug for SparsePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SparsePoly(Q={}, {:?})", self.q, self.support)
    }
}

fn check_q(q: usize) -> Result<()> {
    if q == 0 || q > u32::MAX as usize {
        return Err(Error::InvalidParameter(format!("modulus size Q={q}")));
    }
    Ok(())
}

impl SparsePoly {
    /// Builds a polynomial from a strictly increasing support.
    pub fn new(q: usize, support: Vec<u32>) -> Result<Self> {
        check_q(q)?;
        for w in support.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Shape(format!(
                    "support must be strictly increasing, found {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(&last) = support.last() {
            if last as usize >= q {
                return Err(Error::ExponentOutOfRange {
                    exponent: last as usize,
                    q,
                });
            }
        }
        Ok(Self { q, support })
    }

    /// Builds a polynomial from arbitrary exponents: each is reduced mod `Q`
    /// and repeated exponents cancel in pairs.
    pub fn from_exponents<I: IntoIterator<Item = usize>>(q: usize, exponents: I) -> Result<Self> {
        check_q(q)?;
        let mut exps: Vec<u32> = exponents.into_iter().map(|e| (e % q) as u32).collect();
        exps.sort_unstable();
        Ok(Self {
            q,
            support: cancel_pairs(&exps),
        })
    }

    pub fn zero(q: usize) -> Self {
        Self {
            q,
            support: Vec::new(),
        }
    }

    pub fn one(q: usize) -> Self {
        Self {
            q,
            support: vec![0],
        }
    }

    /// `X^e mod (X^Q - 1)`.
    pub fn monomial(q: usize, e: usize) -> Self {
        Self {
            q,
            support: vec![(e % q) as u32],
        }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn support(&self) -> &[u32] {
        &self.support
    }

    pub fn weight(&self) -> usize {
        self.support.len()
    }

    pub fn is_zero(&self) -> bool {
        self.support.is_empty()
    }

    pub fn coefficient(&self, e: usize) -> bool {
        self.support.binary_search(&(e as u32)).is_ok()
    }

    fn same_ring(&self, other: &Self) -> Result<()> {
        if self.q != other.q {
            return Err(Error::ModulusMismatch {
                left: self.q,
                right: other.q,
            });
        }
        Ok(())
    }

    /// Sum in characteristic two: the symmetric difference of the supports.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_ring(other)?;
        let (a, b) = (&self.support, &other.support);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Ok(Self {
            q: self.q,
            support: out,
        })
    }

    /// Product modulo `X^Q - 1` by convolution of the supports.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_ring(other)?;
        let q = self.q as u64;
        let mut exps = Vec::with_capacity(self.weight() * other.weight());
        for &x in &self.support {
            for &y in &other.support {
                exps.push(((x as u64 + y as u64) % q) as u32);
            }
        }
        exps.sort_unstable();
        Ok(Self {
            q: self.q,
            support: cancel_pairs(&exps),
        })
    }

    /// Multiplicative inverse by the extended Euclidean algorithm against
    /// `X^Q - 1`.
    pub fn invert(&self) -> Result<Self> {
        let q = self.q;
        if self.is_zero() {
            return Err(Error::NonInvertible { q });
        }
        let mut r0 = BinPoly::zero();
        r0.flip(0);
        r0.flip(q);
        let mut r1 = BinPoly::from_support(&self.support);
        let mut s0 = BinPoly::zero();
        let mut s1 = BinPoly::zero();
        s1.flip(0);
        // r_i = s_i * a  (mod X^Q - 1) holds for both rows throughout.
        while let Some(d1) = r1.degree() {
            while let Some(d0) = r0.degree() {
                if d0 < d1 {
                    break;
                }
                let shift = d0 - d1;
                r0.xor_shifted(&r1, shift);
                s0.xor_shifted(&s1, shift);
            }
            std::mem::swap(&mut r0, &mut r1);
            std::mem::swap(&mut s0, &mut s1);
        }
        if r0.degree() != Some(0) {
            return Err(Error::NonInvertible { q });
        }
        let inv = Self::from_exponents(q, s0.support())?;
        Ok(inv)
    }

    /// Support of the transposed circulant: `e -> (Q - e) mod Q`.
    pub fn transpose(&self) -> Self {
        let q = self.q as u32;
        let mut support: Vec<u32> = self.support.iter().map(|&e| (q - e) % q).collect();
        support.sort_unstable();
        Self { q: self.q, support }
    }

    pub fn to_dense(&self) -> DensePoly {
        let mut d = DensePoly::zero(self.q);
        for &e in &self.support {
            d.set(e as usize, true);
        }
        d
    }

    /// Product with a dense polynomial by shift-and-XOR accumulation.
    pub fn mul_dense(&self, other: &DensePoly) -> Result<DensePoly> {
        if self.q != other.q {
            return Err(Error::ModulusMismatch {
                left: self.q,
                right: other.q,
            });
        }
        let rot = Rotator::new(other);
        let mut acc = DensePoly::zero(self.q);
        for &e in &self.support {
            rot.xor_rotated_into(&mut acc, e as usize);
        }
        Ok(acc)
    }
}

fn cancel_pairs(sorted: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(sorted.len());
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if (j - i) % 2 == 1 {
            out.push(sorted[i]);
        }
        i = j;
    }
    out
}

/// Uniformly random weight-`w` polynomial of `F2[X]/(X^Q - 1)`.
pub fn sample_sparse<R: Rng + ?Sized>(q: usize, w: usize, rng: &mut R) -> Result<SparsePoly> {
    check_q(q)?;
    if w > q {
        return Err(Error::WeightTooLarge { weight: w, len: q });
    }
    let mut support: Vec<u32> = rand::seq::index::sample(rng, q, w)
        .into_iter()
        .map(|e| e as u32)
        .collect();
    support.sort_unstable();
    Ok(SparsePoly { q, support })
}

/// Growable polynomial over F2 used by the Euclidean inversion.
#[derive(Clone, Debug)]
struct BinPoly {
    words: Vec<u64>,
}

impl BinPoly {
    fn zero() -> Self {
        Self { words: Vec::new() }
    }

    fn from_support(support: &[u32]) -> Self {
        let mut p = Self::zero();
        for &e in support {
            p.flip(e as usize);
        }
        p
    }

    fn flip(&mut self, bit: usize) {
        let w = bit / 64;
        if self.words.len() <= w {
            self.words.resize(w + 1, 0);
        }
        self.words[w] ^= 1u64 << (bit % 64);
    }

    fn degree(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .rev()
            .find(|(_, &w)| w != 0)
            .map(|(i, &w)| i * 64 + 63 - w.leading_zeros() as usize)
    }

    fn xor_shifted(&mut self, other: &BinPoly, shift: usize) {
        let Some(deg) = other.degree() else { return };
        let ws = shift / 64;
        let bs = shift % 64;
        let need = (deg + shift) / 64 + 1;
        if self.words.len() < need {
            self.words.resize(need, 0);
        }
        let top = deg / 64;
        for (i, &w) in other.words[..=top].iter().enumerate() {
            if w == 0 {
                continue;
            }
            self.words[i + ws] ^= w << bs;
            if bs != 0 && i + ws + 1 < self.words.len() {
                self.words[i + ws + 1] ^= w >> (64 - bs);
            }
        }
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }

    fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(i * 64 + b)
            })
        })
    }
}

/// Dense element of `F2[X]/(X^Q - 1)` stored as packed coefficients,
/// coefficient `i` at bit `i % 64` of word `i / 64`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DensePoly {
    q: usize,
    words: Vec<u64>,
}

impl fmt::Debug for DensePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DensePoly(Q={}, wt={})", self.q, self.weight())
    }
}

impl DensePoly {
    pub fn zero(q: usize) -> Self {
        Self {
            q,
            words: vec![0; q.div_ceil(64)],
        }
    }

    /// From a slice of 0/1 coefficients of length exactly `Q`.
    pub fn from_bits(bits: &[u8]) -> Self {
        let mut d = Self::zero(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b & 1 == 1 {
                d.set(i, true);
            }
        }
        d
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.q).map(|i| self.get(i) as u8).collect()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn get(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, v: bool) {
        let m = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= m;
        } else {
            self.words[i / 64] &= !m;
        }
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn to_sparse(&self) -> SparsePoly {
        let support = self
            .words
            .iter()
            .enumerate()
            .flat_map(|(i, &w)| {
                let mut w = w;
                std::iter::from_fn(move || {
                    if w == 0 {
                        return None;
                    }
                    let b = w.trailing_zeros();
                    w &= w - 1;
                    Some(i as u32 * 64 + b)
                })
            })
            .collect();
        SparsePoly { q: self.q, support }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.q != other.q {
            return Err(Error::ModulusMismatch {
                left: self.q,
                right: other.q,
            });
        }
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(Self { q: self.q, words })
    }

    /// Dense-by-dense product, iterating over the support of `self`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.to_sparse().mul_dense(other)
    }

    pub fn transpose(&self) -> Self {
        self.to_sparse().transpose().to_dense()
    }

    /// Lowercase hex of the packed coefficients: byte `i` carries coefficients
    /// `8i..8i+7`, least-significant bit first.
    pub fn to_hex(&self) -> String {
        let nbytes = self.q.div_ceil(8);
        let mut s = String::with_capacity(2 * nbytes);
        for i in 0..nbytes {
            let byte = (self.words[i / 8] >> (8 * (i % 8))) as u8;
            s.push_str(&format!("{byte:02x}"));
        }
        s
    }

    pub fn from_hex(q: usize, hex: &str) -> Result<Self> {
        let nbytes = q.div_ceil(8);
        if hex.len() != 2 * nbytes {
            return Err(Error::MalformedKey(format!(
                "hex length {} does not match Q={q} ({} bytes)",
                hex.len(),
                nbytes
            )));
        }
        if hex.bytes().any(|c| c.is_ascii_uppercase()) {
            return Err(Error::MalformedKey("hex must be lowercase".into()));
        }
        let mut d = Self::zero(q);
        for i in 0..nbytes {
            let byte = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
                .map_err(|e| Error::MalformedKey(format!("bad hex digit: {e}")))?;
            d.words[i / 8] |= (byte as u64) << (8 * (i % 8));
        }
        let tail = q % 64;
        if tail != 0 && d.words[q / 64] >> tail != 0 {
            return Err(Error::MalformedKey("bits set beyond Q".into()));
        }
        Ok(d)
    }
}

/// Doubled copy of a dense polynomial from which any cyclic rotation can be
/// read a word at a time.
struct Rotator<'a> {
    src: &'a DensePoly,
    doubled: Vec<u64>,
}

impl<'a> Rotator<'a> {
    fn new(src: &'a DensePoly) -> Self {
        let q = src.q;
        let mut doubled = vec![0u64; (2 * q).div_ceil(64) + 2];
        if q >= 64 {
            for i in 0..q {
                if src.get(i) {
                    doubled[i / 64] |= 1 << (i % 64);
                    let j = i + q;
                    doubled[j / 64] |= 1 << (j % 64);
                }
            }
        }
        Self { src, doubled }
    }

    fn window(&self, start: usize) -> u64 {
        let w = start / 64;
        let off = start % 64;
        if off == 0 {
            self.doubled[w]
        } else {
            (self.doubled[w] >> off) | (self.doubled[w + 1] << (64 - off))
        }
    }

    /// `acc += X^shift * src`.
    fn xor_rotated_into(&self, acc: &mut DensePoly, shift: usize) {
        let q = self.src.q;
        let shift = shift % q;
        if q < 64 {
            for i in 0..q {
                if self.src.get(i) {
                    let j = (i + shift) % q;
                    let cur = acc.get(j);
                    acc.set(j, !cur);
                }
            }
            return;
        }
        // Output bit i takes input bit (i - shift) mod Q.
        let start = q - shift;
        let nw = acc.words.len();
        for k in 0..nw {
            let mut w = self.window((start + 64 * k) % q);
            if k == nw - 1 && !q.is_multiple_of(64) {
                w &= (1u64 << (q % 64)) - 1;
            }
            acc.words[k] ^= w;
        }
    }
}
