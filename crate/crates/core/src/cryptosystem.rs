//! Key generation, encryption and decryption, and key files.
//!
//! The private key is the parity-check row `h = (h_00 h_01)`, plus the
//! extended matrix `Gamma` for the state shape. The public key is the dense
//! polynomial `p` of the systematic generator `G = (I | circ(p))`, chosen so
//! that `h_00 + transpose(p) h_01 = 0`. A plaintext occupies the first `Q`
//! codeword positions.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::decoders::{to_bipolar, Decoder, DecoderConfig};
use crate::error::{Error, Result};
use crate::protograph::{derive_h, sample_gamma, EnsembleSpec, PolyMatrix, Shape};
use crate::ring::{DensePoly, SparsePoly};
use crate::simulation::sample_error_vector;
use crate::tanner::TannerGraph;

pub const KEY_FILE_VERSION: u32 = 1;
pub const KEYGEN_ATTEMPTS: usize = 100;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrivateKey {
    pub spec: EnsembleSpec,
    /// Extended description; `None` for the reference shape.
    pub gamma: Option<PolyMatrix>,
    pub h: PolyMatrix,
    pub error_weight: usize,
    graph: TannerGraph,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicKey {
    pub spec: EnsembleSpec,
    pub p: DensePoly,
    pub error_weight: usize,
}

impl PrivateKey {
    /// Builds a key from its parts and checks every invariant.
    pub fn from_parts(spec: EnsembleSpec, gamma: Option<PolyMatrix>, h: PolyMatrix, error_weight: usize) -> Result<Self> {
        spec.validate()?;
        if h.rows() != 1 || h.cols() != 2 || h.q() != spec.q {
            return Err(Error::InvariantViolation(format!(
                "h must be 1x2 over Q = {}, got {}x{} over Q = {}",
                spec.q,
                h.rows(),
                h.cols(),
                h.q()
            )));
        }
        if error_weight > 2 * spec.q {
            return Err(Error::WeightTooLarge {
                weight: error_weight,
                len: 2 * spec.q,
            });
        }
        let graph = match spec.shape() {
            Shape::Reference => {
                if gamma.is_some() {
                    return Err(Error::InvariantViolation("reference keys carry no Gamma".into()));
                }
                let expected: Vec<usize> = spec.base.rows[0].iter().map(|&b| b as usize).collect();
                if h.weights()[0] != expected {
                    return Err(Error::InvariantViolation(format!(
                        "h weights {:?} differ from base {:?}",
                        h.weights()[0],
                        expected
                    )));
                }
                TannerGraph::expand(&h, &[])
            }
            Shape::State => {
                let gamma = gamma
                    .as_ref()
                    .ok_or_else(|| Error::InvariantViolation("state-shape key without Gamma".into()))?;
                if gamma.q() != spec.q {
                    return Err(Error::ModulusMismatch {
                        left: spec.q,
                        right: gamma.q(),
                    });
                }
                let base: Vec<Vec<usize>> = spec
                    .base
                    .rows
                    .iter()
                    .map(|r| r.iter().map(|&b| b as usize).collect())
                    .collect();
                if gamma.weights() != base {
                    return Err(Error::InvariantViolation(format!(
                        "Gamma weights {:?} differ from base {:?}",
                        gamma.weights(),
                        base
                    )));
                }
                if derive_h(gamma)? != h {
                    return Err(Error::InvariantViolation("h is not derived from Gamma".into()));
                }
                TannerGraph::expand(gamma, &spec.base.state_columns)
            }
        };
        let weight = h.get(0, 0).weight() + h.get(0, 1).weight();
        let bound = spec.h_row_weight_bound();
        if weight > bound {
            return Err(Error::InvariantViolation(format!(
                "row weight {weight} of h exceeds the bound {bound}"
            )));
        }
        Ok(Self {
            spec,
            gamma,
            h,
            error_weight,
            graph,
        })
    }

    /// Graph the decoder runs on: extended for the state shape.
    pub fn decoding_graph(&self) -> &TannerGraph {
        &self.graph
    }

    pub fn q(&self) -> usize {
        self.spec.q
    }

    /// Recomputes the public key.
    pub fn public_key(&self) -> Result<PublicKey> {
        let p = systematic_p(&self.h)?;
        Ok(PublicKey {
            spec: self.spec.clone(),
            p,
            error_weight: self.error_weight,
        })
    }

    pub fn with_error_weight(&self, error_weight: usize) -> Result<Self> {
        if error_weight > 2 * self.spec.q {
            return Err(Error::WeightTooLarge {
                weight: error_weight,
                len: 2 * self.spec.q,
            });
        }
        Ok(Self {
            error_weight,
            ..self.clone()
        })
    }
}

impl PublicKey {
    pub fn q(&self) -> usize {
        self.spec.q
    }

    pub fn with_error_weight(&self, error_weight: usize) -> Result<Self> {
        if error_weight > 2 * self.spec.q {
            return Err(Error::WeightTooLarge {
                weight: error_weight,
                len: 2 * self.spec.q,
            });
        }
        Ok(Self {
            error_weight,
            ..self.clone()
        })
    }

    /// Codeword `u G = (u | u p)`.
    pub fn encode(&self, u: &[u8]) -> Result<Vec<u8>> {
        let q = self.q();
        if u.len() != q {
            return Err(Error::Dimension {
                expected: q,
                actual: u.len(),
            });
        }
        let ud = DensePoly::from_bits(u);
        let redundancy = ud.to_sparse().mul_dense(&self.p)?;
        let mut x = u.iter().map(|b| b & 1).collect::<Vec<u8>>();
        x.extend(redundancy.to_bits());
        Ok(x)
    }
}

/// `p = transpose(h_00 h_01^{-1})`.
fn systematic_p(h: &PolyMatrix) -> Result<DensePoly> {
    let inv = h.get(0, 1).invert()?;
    Ok(h.get(0, 0).mul(&inv)?.transpose().to_dense())
}

/// Samples a private key and its public key, resampling while `h_01` is not
/// invertible.
pub fn keygen<R: Rng + ?Sized>(spec: &EnsembleSpec, error_weight: usize, rng: &mut R) -> Result<(PrivateKey, PublicKey)> {
    spec.validate()?;
    let mut last = String::new();
    for _ in 0..KEYGEN_ATTEMPTS {
        let sampled = sample_gamma(spec, rng)?;
        let (gamma, h) = match spec.shape() {
            Shape::Reference => (None, sampled),
            Shape::State => {
                let h = derive_h(&sampled)?;
                (Some(sampled), h)
            }
        };
        match systematic_p(&h) {
            Ok(p) => {
                let private = PrivateKey::from_parts(spec.clone(), gamma, h, error_weight)?;
                let public = PublicKey {
                    spec: spec.clone(),
                    p,
                    error_weight,
                };
                return Ok((private, public));
            }
            Err(Error::NonInvertible { .. }) => {
                last = format!("h_01 of weight {} is not invertible", h.get(0, 1).weight());
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::KeyGeneration {
        attempts: KEYGEN_ATTEMPTS,
        reason: last,
    })
}

/// `c = u G + e` with `e` uniform of weight `pk.error_weight`.
pub fn encrypt<R: Rng + ?Sized>(pk: &PublicKey, u: &[u8], rng: &mut R) -> Result<Vec<u8>> {
    let e = sample_error_vector(2 * pk.q(), pk.error_weight, rng)?;
    encrypt_with_error(pk, u, &e)
}

/// `c = u G + e` for a given error vector.
pub fn encrypt_with_error(pk: &PublicKey, u: &[u8], e: &[u8]) -> Result<Vec<u8>> {
    if e.len() != 2 * pk.q() {
        return Err(Error::Dimension {
            expected: 2 * pk.q(),
            actual: e.len(),
        });
    }
    let mut c = pk.encode(u)?;
    for (ci, ei) in c.iter_mut().zip(e) {
        *ci ^= ei & 1;
    }
    Ok(c)
}

/// Decodes `c` on the private graph and returns the first `Q` bits.
pub fn decrypt(sk: &PrivateKey, c: &[u8], cfg: &DecoderConfig) -> Result<Vec<u8>> {
    let mut decoder = Decoder::new(sk.decoding_graph());
    decrypt_with(&mut decoder, sk, c, cfg)
}

/// [`decrypt`] reusing caller-owned decoder buffers built on
/// `sk.decoding_graph()`.
pub fn decrypt_with(decoder: &mut Decoder<'_>, sk: &PrivateKey, c: &[u8], cfg: &DecoderConfig) -> Result<Vec<u8>> {
    let q = sk.q();
    if c.len() != 2 * q {
        return Err(Error::Dimension {
            expected: 2 * q,
            actual: c.len(),
        });
    }
    let r = decoder.decode(&to_bipolar(c), sk.error_weight, cfg)?;
    if !r.syndrome_zero {
        return Err(Error::DecodingFailure {
            iterations: r.iterations_used,
        });
    }
    Ok(r.estimate[..q].to_vec())
}

#[derive(Serialize, Deserialize)]
struct Container {
    version: u32,
    spec: EnsembleSpec,
    #[serde(rename = "Q")]
    q: usize,
    role: Role,
    payload: Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Private,
    Public,
}

#[derive(Serialize, Deserialize)]
struct PrivatePayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<Vec<Vec<SparsePoly>>>,
    h: Vec<SparsePoly>,
    error_weight: usize,
}

#[derive(Serialize, Deserialize)]
struct PublicPayload {
    p: String,
    error_weight: usize,
}

/// Either kind of key, as read from a file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Key {
    Private(PrivateKey),
    Public(PublicKey),
}

impl Key {
    pub fn role(&self) -> Role {
        match self {
            Key::Private(_) => Role::Private,
            Key::Public(_) => Role::Public,
        }
    }

    pub fn spec(&self) -> &EnsembleSpec {
        match self {
            Key::Private(k) => &k.spec,
            Key::Public(k) => &k.spec,
        }
    }
}

fn poly_rows(m: &PolyMatrix) -> Vec<Vec<SparsePoly>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m.get(i, j).clone()).collect())
        .collect()
}

fn from_rows(rows: Vec<Vec<SparsePoly>>) -> Result<PolyMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::MalformedKey("ragged polynomial matrix".into()));
    }
    PolyMatrix::new(r, c, rows.into_iter().flatten().collect())
}

/// Serializes a key to the JSON container format.
pub fn key_to_string(key: &Key) -> Result<String> {
    let (spec, role, payload) = match key {
        Key::Private(k) => (
            &k.spec,
            Role::Private,
            serde_json::to_value(PrivatePayload {
                gamma: k.gamma.as_ref().map(poly_rows),
                h: poly_rows(&k.h).remove(0),
                error_weight: k.error_weight,
            })?,
        ),
        Key::Public(k) => (
            &k.spec,
            Role::Public,
            serde_json::to_value(PublicPayload {
                p: k.p.to_hex(),
                error_weight: k.error_weight,
            })?,
        ),
    };
    let container = Container {
        version: KEY_FILE_VERSION,
        spec: spec.clone(),
        q: spec.q,
        role,
        payload,
    };
    let mut s = serde_json::to_string_pretty(&container)?;
    s.push('\n');
    Ok(s)
}

/// Parses and validates a key container.
pub fn key_from_str(text: &str) -> Result<Key> {
    let container: Container =
        serde_json::from_str(text).map_err(|e| Error::MalformedKey(format!("unreadable key container: {e}")))?;
    if container.version != KEY_FILE_VERSION {
        return Err(Error::VersionMismatch {
            found: container.version,
            expected: KEY_FILE_VERSION,
        });
    }
    if container.q != container.spec.q {
        return Err(Error::MalformedKey(format!(
            "container Q = {} but spec Q = {}",
            container.q, container.spec.q
        )));
    }
    let spec = container.spec;
    spec.validate()?;
    match container.role {
        Role::Private => {
            let payload: PrivatePayload = serde_json::from_value(container.payload)
                .map_err(|e| Error::MalformedKey(format!("private payload: {e}")))?;
            let gamma = payload.gamma.map(from_rows).transpose()?;
            let h = from_rows(vec![payload.h])?;
            if h.q() != spec.q {
                return Err(Error::ModulusMismatch {
                    left: spec.q,
                    right: h.q(),
                });
            }
            Ok(Key::Private(PrivateKey::from_parts(spec, gamma, h, payload.error_weight)?))
        }
        Role::Public => {
            let payload: PublicPayload = serde_json::from_value(container.payload)
                .map_err(|e| Error::MalformedKey(format!("public payload: {e}")))?;
            let p = DensePoly::from_hex(spec.q, &payload.p).map_err(|e| Error::MalformedKey(e.to_string()))?;
            if payload.error_weight > 2 * spec.q {
                return Err(Error::WeightTooLarge {
                    weight: payload.error_weight,
                    len: 2 * spec.q,
                });
            }
            Ok(Key::Public(PublicKey {
                spec,
                p,
                error_weight: payload.error_weight,
            }))
        }
    }
}

pub fn save_key(key: &Key, path: &Path) -> Result<()> {
    std::fs::write(path, key_to_string(key)?)?;
    Ok(())
}

pub fn load_key(path: &Path) -> Result<Key> {
    key_from_str(&std::fs::read_to_string(path)?)
}

pub fn load_private(path: &Path) -> Result<PrivateKey> {
    match load_key(path)? {
        Key::Private(k) => Ok(k),
        Key::Public(_) => Err(Error::MalformedKey(format!("{} holds a public key", path.display()))),
    }
}

pub fn load_public(path: &Path) -> Result<PublicKey> {
    match load_key(path)? {
        Key::Public(k) => Ok(k),
        Key::Private(k) => k.public_key(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoders::Algorithm;
    use crate::protograph::{ensemble, BaseMatrix};
    use crate::testutil::BitMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy(rows: Vec<Vec<u32>>, state: Vec<usize>, q: usize) -> EnsembleSpec {
        EnsembleSpec::new("toy", BaseMatrix::new(rows, state).unwrap(), q).unwrap()
    }

    fn toy_specs() -> Vec<EnsembleSpec> {
        vec![
            toy(vec![vec![3, 5]], vec![], 13),
            toy(vec![vec![1, 2, 2], vec![1, 3, 1]], vec![0], 13),
            ensemble("B", 13).unwrap(),
        ]
    }

    fn random_bits(n: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
        (0..n).map(|_| rng.gen_range(0..2)).collect()
    }

    #[test]
    fn generator_is_orthogonal_to_h_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for spec in toy_specs() {
            let (sk, pk) = keygen(&spec, 0, &mut rng).unwrap();
            let q = spec.q;
            let h = BitMatrix::from_circulants(&[vec![sk.h.get(0, 0).clone(), sk.h.get(0, 1).clone()]]);
            // G = [I | circ(p)]
            let mut g = BitMatrix::zeros(q, 2 * q);
            let p = pk.p.to_sparse();
            let circ = BitMatrix::from_circulants(&[vec![p]]);
            for r in 0..q {
                g.rows[r][r] = 1;
                g.rows[r][q..].copy_from_slice(&circ.rows[r]);
            }
            let prod = g.mul(&h.transpose());
            assert!(prod.rows.iter().flatten().all(|&b| b == 0), "{}", spec.name);
            for _ in 0..100 {
                let u = random_bits(q, &mut rng);
                assert_eq!(pk.encode(&u).unwrap(), g.transpose().mul_vec(&u));
                assert!(h.mul_vec(&pk.encode(&u).unwrap()).iter().all(|&b| b == 0));
            }
        }
    }

    #[test]
    fn polynomial_contract_at_full_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for name in ["A", "B", "C"] {
            let spec = ensemble(name, 4801).unwrap();
            let (sk, pk) = keygen(&spec, 0, &mut rng).unwrap();
            let pt = pk.p.to_sparse().transpose();
            let lhs = sk.h.get(0, 0).add(&pt.mul(sk.h.get(0, 1)).unwrap()).unwrap();
            assert!(lhs.is_zero());
            if name == "A" {
                assert_eq!(sk.h.weights(), vec![vec![45, 45]]);
            } else {
                let w = sk.h.get(0, 0).weight() + sk.h.get(0, 1).weight();
                assert!(w <= 90);
            }
        }
    }

    #[test]
    fn noiseless_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut specs = toy_specs();
        specs.extend(["A", "B", "C"].map(|n| ensemble(n, 4801).unwrap()));
        for spec in specs {
            let (sk, pk) = keygen(&spec, 0, &mut rng).unwrap();
            for algorithm in [Algorithm::AlgE, Algorithm::Spa] {
                let cfg = DecoderConfig::new(algorithm, 1.0);
                let u = random_bits(spec.q, &mut rng);
                let c = encrypt(&pk, &u, &mut rng).unwrap();
                assert_eq!(c, pk.encode(&u).unwrap());
                assert_eq!(decrypt(&sk, &c, &cfg).unwrap(), u, "{} {algorithm}", spec.name);
            }
        }
    }

    #[test]
    fn encryption_adds_exact_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (_, pk) = keygen(&ensemble("C", 4801).unwrap(), 77, &mut rng).unwrap();
        let zero = vec![0u8; 4801];
        assert!(pk.encode(&zero).unwrap().iter().all(|&b| b == 0));
        for _ in 0..5 {
            let u = random_bits(4801, &mut rng);
            let x = pk.encode(&u).unwrap();
            let c = encrypt(&pk, &u, &mut rng).unwrap();
            let diff = x.iter().zip(&c).filter(|(a, b)| a != b).count();
            assert_eq!(diff, 77);
        }
        assert!(encrypt(&pk, &[0, 1], &mut rng).is_err());
    }

    #[test]
    fn heavy_noise_fails_to_decrypt() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = ensemble("A", 4801).unwrap();
        let (sk, pk) = keygen(&spec, 4801, &mut rng).unwrap();
        let cfg = DecoderConfig {
            max_iterations: 20,
            ..DecoderConfig::new(Algorithm::AlgE, 1.0)
        };
        let mut decoder = Decoder::new(sk.decoding_graph());
        for _ in 0..10 {
            let u = random_bits(4801, &mut rng);
            let c = encrypt(&pk, &u, &mut rng).unwrap();
            match decrypt_with(&mut decoder, &sk, &c, &cfg) {
                Err(Error::DecodingFailure { .. }) => {}
                Ok(v) => assert_ne!(v, u),
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn key_files_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for name in ["A", "C"] {
            let (sk, pk) = keygen(&ensemble(name, 4801).unwrap(), 40, &mut rng).unwrap();
            let sp = dir.path().join(format!("{name}.key"));
            let pp = dir.path().join(format!("{name}.pub"));
            save_key(&Key::Private(sk.clone()), &sp).unwrap();
            save_key(&Key::Public(pk.clone()), &pp).unwrap();
            assert_eq!(load_private(&sp).unwrap(), sk);
            assert_eq!(load_public(&pp).unwrap(), pk);
            assert_eq!(load_public(&sp).unwrap(), pk);
            assert!(load_private(&pp).is_err());
        }
    }

    #[test]
    fn malformed_key_files_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (sk, pk) = keygen(&ensemble("C", 4801).unwrap(), 40, &mut rng).unwrap();
        let text = key_to_string(&Key::Private(sk.clone())).unwrap();
        assert!(matches!(
            key_from_str(&text[..text.len() / 2]),
            Err(Error::MalformedKey(_))
        ));

        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["version"] = Value::from(9);
        assert!(matches!(
            key_from_str(&v.to_string()),
            Err(Error::VersionMismatch { found: 9, .. })
        ));

        // Raise wt(gamma_01) far enough that wt(h) breaks the weight bound.
        let mut v: Value = serde_json::from_str(&text).unwrap();
        let support: Vec<u32> = (0..60).collect();
        v["payload"]["gamma"][0][1]["support"] = serde_json::to_value(&support).unwrap();
        v["spec"]["base"]["rows"][0][1] = Value::from(60);
        assert!(matches!(key_from_str(&v.to_string()), Err(Error::InvariantViolation(_))));

        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["payload"]["h"][0]["support"] = Value::from(vec![0, 1, 2]);
        assert!(matches!(key_from_str(&v.to_string()), Err(Error::InvariantViolation(_))));

        let ptext = key_to_string(&Key::Public(pk)).unwrap();
        let mut v: Value = serde_json::from_str(&ptext).unwrap();
        let hex = v["payload"]["p"].as_str().unwrap().to_string();
        v["payload"]["p"] = Value::from(&hex[..hex.len() - 2]);
        assert!(matches!(key_from_str(&v.to_string()), Err(Error::MalformedKey(_))));
    }

    #[test]
    fn keygen_reports_exhausted_retries() {
        // Even weight h_01 is never invertible.
        let spec = toy(vec![vec![3, 4]], vec![], 13);
        let err = keygen(&spec, 0, &mut ChaCha8Rng::seed_from_u64(8)).unwrap_err();
        assert!(matches!(err, Error::KeyGeneration { attempts: 100, .. }));
    }
}
