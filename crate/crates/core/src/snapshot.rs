//! Grid snapshot format: a 24-byte header `[u64 subdomains][u64 points][u64 iteration]`
//! followed by `subdomains * points` little-endian f64 values.

use alloc::vec::Vec;

use crate::codec::CodecError;

pub const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSnapshot {
    pub subdomains: u64,
    pub points: u64,
    pub iteration: u64,
    pub values: Vec<f64>,
}

impl GridSnapshot {
    pub fn encode(&self) -> Vec<u8> {
        assert_eq!(
            self.values.len() as u64,
            self.subdomains * self.points,
            "snapshot value count does not match its header"
        );
        let mut out = Vec::with_capacity(HEADER_LEN + self.values.len() * 8);
        out.extend_from_slice(&self.subdomains.to_le_bytes());
        out.extend_from_slice(&self.points.to_le_bytes());
        out.extend_from_slice(&self.iteration.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < HEADER_LEN {
            return Err(CodecError::Truncated);
        }
        let word = |i: usize| {
            let mut a = [0u8; 8];
            a.copy_from_slice(&bytes[i * 8..i * 8 + 8]);
            u64::from_le_bytes(a)
        };
        let (subdomains, points, iteration) = (word(0), word(1), word(2));
        let count = subdomains
            .checked_mul(points)
            .and_then(|n| usize::try_from(n).ok())
            .ok_or(CodecError::Truncated)?;
        let body = &bytes[HEADER_LEN..];
        match body.len().checked_sub(count.checked_mul(8).ok_or(CodecError::Truncated)?) {
            None => return Err(CodecError::Truncated),
            Some(0) => {}
            Some(n) => return Err(CodecError::TrailingBytes(n)),
        }
        let values = body
            .chunks_exact(8)
            .map(|c| {
                let mut a = [0u8; 8];
                a.copy_from_slice(c);
                f64::from_le_bytes(a)
            })
            .collect();
        Ok(GridSnapshot {
            subdomains,
            points,
            iteration,
            values,
        })
    }
}
