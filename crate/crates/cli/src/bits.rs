//! Bit vectors on disk: packed bytes, bit `i` in byte `i / 8` at position
//! `i % 8`, either raw or as lowercase hex text.

use crate::CliError;

pub fn pack(bits: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        out[i / 8] |= (b & 1) << (i % 8);
    }
    out
}

/// Unpacks exactly `len` bits; trailing padding must be zero.
pub fn unpack(bytes: &[u8], len: usize) -> Result<Vec<u8>, CliError> {
    if bytes.len() != len.div_ceil(8) {
        return Err(CliError::io(format!(
            "expected {} bytes for {len} bits, got {}",
            len.div_ceil(8),
            bytes.len()
        )));
    }
    let bits: Vec<u8> = (0..bytes.len() * 8).map(|i| bytes[i / 8] >> (i % 8) & 1).collect();
    if bits[len..].iter().any(|&b| b != 0) {
        return Err(CliError::io("non-zero padding bits"));
    }
    Ok(bits[..len].to_vec())
}

pub fn encode(bits: &[u8], hex: bool) -> Vec<u8> {
    let packed = pack(bits);
    if hex {
        let mut text = hex::encode(packed).into_bytes();
        text.push(b'\n');
        text
    } else {
        packed
    }
}

pub fn decode(data: &[u8], len: usize, hex: bool) -> Result<Vec<u8>, CliError> {
    if hex {
        let text = std::str::from_utf8(data).map_err(|_| CliError::io("hex input is not text"))?;
        let bytes = hex::decode(text.trim()).map_err(|e| CliError::io(format!("bad hex: {e}")))?;
        unpack(&bytes, len)
    } else {
        unpack(data, len)
    }
}
