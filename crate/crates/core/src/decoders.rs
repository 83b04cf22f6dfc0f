//! Flooding message-passing decoders over a [`TannerGraph`] with optional
//! punctured (state) variable nodes.
//!
//! Ciphertext symbols use the bipolar mapping `0 -> +1`, `1 -> -1`. Punctured
//! variable nodes have no channel observation and start as erasures.
//!
//! * Scaled sum-product: real log-likelihood messages, check outputs scaled by
//!   `omega`.
//! * Algorithm E: ternary messages in `{-1, 0, +1}`, channel message amplified
//!   by `omega` at the variable nodes and left unscaled in the final decision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tanner::TannerGraph;

/// Magnitude at which messages are clipped before entering `tanh`.
pub const LLR_CLIP: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Spa,
    #[serde(rename = "e", alias = "alge")]
    AlgE,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Algorithm::Spa => f.write_str("spa"),
            Algorithm::AlgE => f.write_str("e"),
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spa" => Ok(Algorithm::Spa),
            "e" | "alge" | "algorithm-e" => Ok(Algorithm::AlgE),
            other => Err(Error::InvalidParameter(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub algorithm: Algorithm,
    pub omega: f64,
    pub max_iterations: usize,
    pub early_stop: bool,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::AlgE,
            omega: 1.0,
            max_iterations: 100,
            early_stop: true,
        }
    }
}

impl DecoderConfig {
    pub fn new(algorithm: Algorithm, omega: f64) -> Self {
        Self {
            algorithm,
            omega,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        // omega = 0 is accepted: it silences the check nodes entirely.
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega = {}", self.omega)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeResult {
    /// Hard decisions (0/1) on the non-punctured variable nodes, in order.
    pub estimate: Vec<u8>,
    pub syndrome_zero: bool,
    pub iterations_used: usize,
}

/// Bit `b` to bipolar symbol `(-1)^b`.
pub fn to_bipolar(bits: &[u8]) -> Vec<i8> {
    bits.iter().map(|&b| if b & 1 == 0 { 1 } else { -1 }).collect()
}

/// Reusable message buffers for one graph. Create one per worker.
pub struct Decoder<'g> {
    graph: &'g TannerGraph,
    observed: Vec<usize>,
    channel: Vec<f64>,
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    v2c_e: Vec<i8>,
    c2v_e: Vec<i8>,
    scratch: Vec<f64>,
    bits: Vec<u8>,
}

impl<'g> Decoder<'g> {
    pub fn new(graph: &'g TannerGraph) -> Self {
        let edges = graph.edge_count();
        Self {
            graph,
            observed: graph.observed_vns(),
            channel: vec![0.0; graph.vn_count()],
            v2c: Vec::new(),
            c2v: Vec::new(),
            v2c_e: Vec::new(),
            c2v_e: Vec::new(),
            scratch: Vec::with_capacity(128),
            bits: vec![0; graph.vn_count()],
        }
        .with_capacity(edges)
    }

    fn with_capacity(mut self, edges: usize) -> Self {
        self.v2c.reserve(edges);
        self.c2v.reserve(edges);
        self.v2c_e.reserve(edges);
        self.c2v_e.reserve(edges);
        self
    }

    pub fn graph(&self) -> &TannerGraph {
        self.graph
    }

    fn check_input(&self, ciphertext: &[i8]) -> Result<()> {
        if ciphertext.len() != self.observed.len() {
            return Err(Error::Dimension {
                expected: self.observed.len(),
                actual: ciphertext.len(),
            });
        }
        if let Some(&bad) = ciphertext.iter().find(|&&c| c != 1 && c != -1) {
            return Err(Error::InvalidParameter(format!("ciphertext symbol {bad} is not +-1")));
        }
        Ok(())
    }

    fn set_channel(&mut self, ciphertext: &[i8], scale: f64) {
        self.channel.iter_mut().for_each(|c| *c = 0.0);
        for (k, &v) in self.observed.iter().enumerate() {
            self.channel[v] = ciphertext[k] as f64 * scale;
        }
    }

    /// Hard decision from an a-posteriori total; a zero total falls back to the
    /// channel sign (observed nodes) or to 0 (punctured nodes).
    fn decide(&self, v: usize, total: f64) -> u8 {
        (total < 0.0 || (total == 0.0 && self.channel[v] < 0.0)) as u8
    }

    /// Syndrome test on the decoding graph. Punctured decisions are first
    /// replaced by the values their pivot checks force, so the verdict
    /// depends on whether the observed estimate is a codeword, not on how
    /// far the punctured beliefs have settled.
    fn syndrome_ok(&mut self) -> bool {
        self.graph.complete_punctured(&mut self.bits);
        self.graph.syndrome_is_zero(&self.bits)
    }

    fn result(&self, syndrome_zero: bool, iterations_used: usize) -> DecodeResult {
        DecodeResult {
            estimate: self.observed.iter().map(|&v| self.bits[v]).collect(),
            syndrome_zero,
            iterations_used,
        }
    }

    /// Scaled sum-product decoding. `error_weight` sets the channel
    /// reliability `ln((n - e) / e)` with `n` the number of observed bits.
    pub fn decode_spa(&mut self, ciphertext: &[i8], error_weight: usize, cfg: &DecoderConfig) -> Result<DecodeResult> {
        cfg.validate()?;
        self.check_input(ciphertext)?;
        let n = self.observed.len();
        if error_weight > n {
            return Err(Error::WeightTooLarge {
                weight: error_weight,
                len: n,
            });
        }
        let llr = if error_weight == 0 {
            LLR_CLIP
        } else {
            (((n - error_weight) as f64) / error_weight as f64).ln().clamp(-LLR_CLIP, LLR_CLIP)
        };
        self.set_channel(ciphertext, llr);
        let g = self.graph;
        let edges = g.edge_count();
        self.v2c.clear();
        self.v2c.extend((0..edges).map(|e| self.channel[g.edge_vn(e)]));
        self.c2v.clear();
        self.c2v.resize(edges, 0.0);

        self.spa_decisions();
        if cfg.early_stop && self.syndrome_ok() {
            return Ok(self.result(true, 0));
        }
        for it in 1..=cfg.max_iterations {
            self.spa_check_pass(cfg.omega);
            self.spa_variable_pass();
            if cfg.early_stop && self.syndrome_ok() {
                return Ok(self.result(true, it));
            }
        }
        let ok = self.syndrome_ok();
        Ok(self.result(ok, cfg.max_iterations))
    }

    fn spa_check_pass(&mut self, omega: f64) {
        let g = self.graph;
        for c in 0..g.cn_count() {
            let range = g.cn_edge_range(c);
            let d = range.len();
            // scratch[0..d] holds tanh(m/2); prefix products go to c2v, suffix runs backwards.
            self.scratch.clear();
            self.scratch
                .extend(self.v2c[range.clone()].iter().map(|&m| (m.clamp(-LLR_CLIP, LLR_CLIP) * 0.5).tanh()));
            let out = &mut self.c2v[range];
            let mut acc = 1.0;
            for k in 0..d {
                out[k] = acc;
                acc *= self.scratch[k];
            }
            let mut acc = 1.0;
            for k in (0..d).rev() {
                let p = out[k] * acc;
                out[k] = omega * 2.0 * p.atanh();
                acc *= self.scratch[k];
            }
        }
    }

    fn spa_variable_pass(&mut self) {
        let g = self.graph;
        for v in 0..g.vn_count() {
            let edges = g.vn_edges(v);
            let total = self.channel[v] + edges.iter().map(|&e| self.c2v[e as usize]).sum::<f64>();
            for &e in edges {
                self.v2c[e as usize] = total - self.c2v[e as usize];
            }
            self.bits[v] = self.decide(v, total);
        }
    }

    fn spa_decisions(&mut self) {
        for v in 0..self.graph.vn_count() {
            self.bits[v] = self.decide(v, self.channel[v]);
        }
    }

    /// Algorithm E decoding.
    pub fn decode_e(&mut self, ciphertext: &[i8], cfg: &DecoderConfig) -> Result<DecodeResult> {
        cfg.validate()?;
        self.check_input(ciphertext)?;
        self.set_channel(ciphertext, 1.0);
        let g = self.graph;
        let edges = g.edge_count();
        let omega = cfg.omega;
        self.v2c_e.clear();
        self.v2c_e
            .extend((0..edges).map(|e| sign(omega * self.channel[g.edge_vn(e)])));
        self.c2v_e.clear();
        self.c2v_e.resize(edges, 0);

        for v in 0..g.vn_count() {
            self.bits[v] = self.decide(v, self.channel[v]);
        }
        if cfg.early_stop && self.syndrome_ok() {
            return Ok(self.result(true, 0));
        }
        for it in 1..=cfg.max_iterations {
            self.e_check_pass();
            self.e_variable_pass(omega);
            if cfg.early_stop && self.syndrome_ok() {
                return Ok(self.result(true, it));
            }
        }
        let ok = self.syndrome_ok();
        Ok(self.result(ok, cfg.max_iterations))
    }

    fn e_check_pass(&mut self) {
        let g = self.graph;
        for c in 0..g.cn_count() {
            let range = g.cn_edge_range(c);
            let inputs = &self.v2c_e[range.clone()];
            let zeros = inputs.iter().filter(|&&m| m == 0).count();
            let negative = inputs.iter().filter(|&&m| m < 0).count() % 2 == 1;
            let out = &mut self.c2v_e[range];
            for (o, &m) in out.iter_mut().zip(inputs) {
                *o = if m == 0 {
                    if zeros > 1 {
                        0
                    } else if negative {
                        -1
                    } else {
                        1
                    }
                } else if zeros > 0 {
                    0
                } else if negative != (m < 0) {
                    -1
                } else {
                    1
                };
            }
        }
    }

    fn e_variable_pass(&mut self, omega: f64) {
        let g = self.graph;
        for v in 0..g.vn_count() {
            let edges = g.vn_edges(v);
            let sum: i32 = edges.iter().map(|&e| self.c2v_e[e as usize] as i32).sum();
            let amplified = omega * self.channel[v];
            for &e in edges {
                let extrinsic = amplified + (sum - self.c2v_e[e as usize] as i32) as f64;
                self.v2c_e[e as usize] = sign(extrinsic);
            }
            self.bits[v] = self.decide(v, self.channel[v] + sum as f64);
        }
        debug_assert!(self.v2c_e.iter().all(|m| (-1..=1).contains(m)));
    }

    /// Dispatches on `cfg.algorithm`.
    pub fn decode(&mut self, ciphertext: &[i8], error_weight: usize, cfg: &DecoderConfig) -> Result<DecodeResult> {
        match cfg.algorithm {
            Algorithm::Spa => self.decode_spa(ciphertext, error_weight, cfg),
            Algorithm::AlgE => self.decode_e(ciphertext, cfg),
        }
    }
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// One-shot scaled sum-product decode.
pub fn decode_spa(g: &TannerGraph, ciphertext: &[i8], error_weight: usize, cfg: &DecoderConfig) -> Result<DecodeResult> {
    if cfg.algorithm != Algorithm::Spa {
        return Err(Error::InvalidParameter("decode_spa needs algorithm = spa".into()));
    }
    Decoder::new(g).decode_spa(ciphertext, error_weight, cfg)
}

/// One-shot Algorithm E decode.
pub fn decode_e(g: &TannerGraph, ciphertext: &[i8], cfg: &DecoderConfig) -> Result<DecodeResult> {
    if cfg.algorithm != Algorithm::AlgE {
        return Err(Error::InvalidParameter("decode_e needs algorithm = e".into()));
    }
    Decoder::new(g).decode_e(ciphertext, cfg)
}
