//! `SLRC` container layout (all integers little-endian):
//!
//! | field              | size                                  |
//! |--------------------|---------------------------------------|
//! | magic `SLRC`       | 4                                     |
//! | format version     | u16                                   |
//! | predictor model id | 32 (raw SHA-256)                      |
//! | context length K   | u16                                   |
//! | token count N      | u64                                   |
//! | code-length table  | varint count, then (varint gap, u8)*  |
//! | payload bit length | u64                                   |
//! | CRC-32             | u32, over every field above plus text |
//! | payload            | ceil(bit length / 8)                  |

use super::entropy::{read_length_table, write_length_table};
use super::CodecError;

pub const MAGIC: &[u8; 4] = b"SLRC";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodecHeader {
    pub version: u16,
    pub model_id: [u8; 32],
    pub context_len: u16,
    pub token_count: u64,
    /// (rank symbol, canonical code length), ascending by symbol.
    pub code_lengths: Vec<(u32, u8)>,
    pub payload_bits: u64,
    pub checksum: u32,
}

impl CodecHeader {
    pub fn model_id_hex(&self) -> String {
        hex::encode(self.model_id)
    }

    /// CRC-32 over the serialized fields before the checksum, then `text`.
    pub fn compute_checksum(&self, text: &[u8]) -> u32 {
        let mut fields = Vec::with_capacity(64 + 4 * self.code_lengths.len());
        self.write_fields(&mut fields);
        let mut h = crc32fast::Hasher::new();
        h.update(&fields);
        h.update(text);
        h.finalize()
    }

    pub fn write(&self, out: &mut Vec<u8>) {
        self.write_fields(out);
        out.extend_from_slice(&self.checksum.to_le_bytes());
    }

    fn write_fields(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&self.model_id);
        out.extend_from_slice(&self.context_len.to_le_bytes());
        out.extend_from_slice(&self.token_count.to_le_bytes());
        write_length_table(out, &self.code_lengths);
        out.extend_from_slice(&self.payload_bits.to_le_bytes());
    }

    /// Parses a header and returns it with the offset of the payload.
    pub fn parse(buf: &[u8]) -> Result<(Self, usize), CodecError> {
        let truncated = || CodecError::CorruptHeader("truncated header".into());
        let mut pos = 0usize;
        let take = |n: usize, pos: &mut usize| -> Result<&[u8], CodecError> {
            let end = pos.checked_add(n).filter(|&e| e <= buf.len()).ok_or_else(truncated)?;
            let s = &buf[*pos..end];
            *pos = end;
            Ok(s)
        };
        if take(4, &mut pos)? != MAGIC {
            return Err(CodecError::CorruptHeader("bad magic".into()));
        }
        let version = u16::from_le_bytes(take(2, &mut pos)?.try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(CodecError::CorruptHeader(format!("unsupported version {version}")));
        }
        let model_id: [u8; 32] = take(32, &mut pos)?.try_into().unwrap();
        let context_len = u16::from_le_bytes(take(2, &mut pos)?.try_into().unwrap());
        if context_len == 0 {
            return Err(CodecError::CorruptHeader("context length is zero".into()));
        }
        let token_count = u64::from_le_bytes(take(8, &mut pos)?.try_into().unwrap());
        let code_lengths = read_length_table(buf, &mut pos)
            .ok_or_else(|| CodecError::CorruptHeader("malformed code-length table".into()))?;
        let payload_bits = u64::from_le_bytes(take(8, &mut pos)?.try_into().unwrap());
        let checksum = u32::from_le_bytes(take(4, &mut pos)?.try_into().unwrap());
        let header = Self { version, model_id, context_len, token_count, code_lengths, payload_bits, checksum };
        Ok((header, pos))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedBlob {
    pub header: CodecHeader,
    pub payload: Vec<u8>,
}

impl CompressedBlob {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.payload.len());
        self.header.write(&mut out);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, CodecError> {
        let (header, start) = CodecHeader::parse(buf)?;
        let payload = buf[start..].to_vec();
        if payload.len() as u64 != header.payload_bits.div_ceil(8) {
            return Err(CodecError::CorruptPayload(format!(
                "payload is {} bytes, header declares {} bits",
                payload.len(),
                header.payload_bits
            )));
        }
        Ok(Self { header, payload })
    }

    pub fn byte_len(&self) -> usize {
        self.to_bytes().len()
    }
}
