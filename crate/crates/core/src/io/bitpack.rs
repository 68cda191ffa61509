//! Fixed-width little-endian bit packing: code `i` occupies bits
//! `[i·k, (i+1)·k)` of the stream, least significant bit first.

use crate::error::{Error, Result};
use crate::quant::BitWidth;

pub fn packed_len(count: usize, k: BitWidth) -> usize {
    (count * k.get() as usize).div_ceil(8)
}

pub fn pack(codes: &[u8], k: BitWidth) -> Result<Vec<u8>> {
    let bits = k.get() as usize;
    let mut out = vec![0u8; packed_len(codes.len(), k)];
    for (i, &c) in codes.iter().enumerate() {
        if c as u32 > k.max_code() {
            return Err(Error::contract(format!("code {c} does not fit in {k} bits")));
        }
        let mut v = c as u16;
        let mut pos = i * bits;
        let mut left = bits;
        while left > 0 {
            let (byte, off) = (pos / 8, pos % 8);
            let take = left.min(8 - off);
            out[byte] |= ((v & ((1 << take) - 1)) as u8) << off;
            v >>= take;
            pos += take;
            left -= take;
        }
    }
    Ok(out)
}

pub fn unpack(bytes: &[u8], k: BitWidth, count: usize) -> Result<Vec<u8>> {
    if bytes.len() != packed_len(count, k) {
        return Err(Error::Format(format!(
            "{count} codes of {k} bits need {} bytes, found {}",
            packed_len(count, k),
            bytes.len()
        )));
    }
    let bits = k.get() as usize;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut v = 0u16;
        let mut pos = i * bits;
        let mut got = 0;
        while got < bits {
            let (byte, off) = (pos / 8, pos % 8);
            let take = (bits - got).min(8 - off);
            let chunk = (bytes[byte] >> off) as u16 & ((1 << take) - 1);
            v |= chunk << got;
            got += take;
            pos += take;
        }
        out.push(v as u8);
    }
    Ok(out)
}
