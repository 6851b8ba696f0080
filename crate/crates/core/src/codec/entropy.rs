//! Static canonical prefix coding of rank symbols.
//!
//! Ranks below [`DIRECT_SYMBOLS`] are their own symbol. Larger ranks share a
//! symbol per half-octave and carry the remaining low bits verbatim, so the
//! code table stays small no matter how large the vocabulary is.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

pub const DIRECT_SYMBOLS: u32 = 16;
pub const MAX_CODE_LEN: u8 = 15;

/// Maps a rank to (symbol, number of extra bits, extra bits value).
pub fn rank_to_symbol(rank: u32) -> (u32, u32, u32) {
    if rank < DIRECT_SYMBOLS {
        return (rank, 0, 0);
    }
    let b = 31 - rank.leading_zeros();
    let half = (rank >> (b - 1)) & 1;
    let symbol = DIRECT_SYMBOLS + 2 * (b - 4) + half;
    let base = (1u32 << b) | (half << (b - 1));
    (symbol, b - 1, rank - base)
}

/// Inverse of [`rank_to_symbol`]: (base rank, number of extra bits).
pub fn symbol_base(symbol: u32) -> Option<(u32, u32)> {
    if symbol < DIRECT_SYMBOLS {
        return Some((symbol, 0));
    }
    let k = symbol - DIRECT_SYMBOLS;
    let b = k / 2 + 4;
    if b > 31 {
        return None;
    }
    let half = k % 2;
    Some(((1u32 << b) | (half << (b - 1)), b - 1))
}

#[derive(Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bits: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the low `n` bits of `value`, most significant first.
    pub fn write(&mut self, value: u32, n: u32) {
        for i in (0..n).rev() {
            let bit = (value >> i) & 1;
            let byte = (self.bits / 8) as usize;
            if byte == self.bytes.len() {
                self.bytes.push(0);
            }
            if bit == 1 {
                self.bytes[byte] |= 0x80 >> (self.bits % 8);
            }
            self.bits += 1;
        }
    }

    pub fn bit_len(&self) -> u64 {
        self.bits
    }

    pub fn finish(self) -> Vec<u8> {
        self.bytes
    }
}

pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
    limit: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8], bit_len: u64) -> Self {
        Self { bytes, pos: 0, limit: bit_len.min(bytes.len() as u64 * 8) }
    }

    pub fn read_bit(&mut self) -> Option<u32> {
        if self.pos >= self.limit {
            return None;
        }
        let byte = self.bytes[(self.pos / 8) as usize];
        let bit = (byte >> (7 - self.pos % 8)) & 1;
        self.pos += 1;
        Some(u32::from(bit))
    }

    pub fn read(&mut self, n: u32) -> Option<u32> {
        let mut v = 0u32;
        for _ in 0..n {
            v = (v << 1) | self.read_bit()?;
        }
        Some(v)
    }

    pub fn position(&self) -> u64 {
        self.pos
    }
}

/// Huffman code lengths for `freqs` (symbol → count), limited to `max_len`.
/// Returns (symbol, length) sorted by symbol. A lone symbol gets length 1.
pub fn code_lengths(freqs: &BTreeMap<u32, u64>, max_len: u8) -> Vec<(u32, u8)> {
    let symbols: Vec<(u32, u64)> = freqs.iter().filter(|(_, &c)| c > 0).map(|(&s, &c)| (s, c)).collect();
    match symbols.len() {
        0 => return Vec::new(),
        1 => return vec![(symbols[0].0, 1)],
        _ => {}
    }
    // nodes: leaves first, then internal nodes; parent links give depths
    let n = symbols.len();
    let mut parent = vec![usize::MAX; 2 * n - 1];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
        symbols.iter().enumerate().map(|(i, &(_, c))| Reverse((c, i))).collect();
    let mut next = n;
    while heap.len() > 1 {
        let Reverse((ca, a)) = heap.pop().unwrap();
        let Reverse((cb, b)) = heap.pop().unwrap();
        parent[a] = next;
        parent[b] = next;
        heap.push(Reverse((ca + cb, next)));
        next += 1;
    }
    let mut lengths: Vec<u8> = (0..n)
        .map(|i| {
            let mut depth = 0u32;
            let mut node = i;
            while parent[node] != usize::MAX {
                node = parent[node];
                depth += 1;
            }
            depth.min(255) as u8
        })
        .collect();
    limit_lengths(&mut lengths, &symbols, max_len);
    symbols.iter().zip(lengths).map(|(&(s, _), l)| (s, l)).collect()
}

fn limit_lengths(lengths: &mut [u8], symbols: &[(u32, u64)], max_len: u8) {
    if lengths.iter().all(|&l| l <= max_len) {
        return;
    }
    let cap = 1u64 << max_len;
    lengths.iter_mut().for_each(|l| *l = (*l).min(max_len));
    let mut kraft: u64 = lengths.iter().map(|&l| 1u64 << (max_len - l)).sum();
    // lengthen the least frequent codes that still have room until Kraft holds
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.sort_by_key(|&i| (symbols[i].1, Reverse(symbols[i].0)));
    while kraft > cap {
        let i = *order
            .iter()
            .filter(|&&i| lengths[i] < max_len)
            .max_by_key(|&&i| (lengths[i], Reverse(symbols[i].1)))
            .expect("alphabet fits within max_len");
        kraft -= 1u64 << (max_len - lengths[i] - 1);
        lengths[i] += 1;
    }
}

/// Canonical prefix code built from code lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalCode {
    /// (symbol, length, code), in canonical order.
    entries: Vec<(u32, u8, u32)>,
    encode: BTreeMap<u32, (u32, u8)>,
    /// Per length: first code and index of its first entry.
    first_code: Vec<u32>,
    first_index: Vec<usize>,
    count: Vec<usize>,
}

impl CanonicalCode {
    pub fn from_lengths(lengths: &[(u32, u8)]) -> Option<Self> {
        if lengths.iter().any(|&(_, l)| l == 0 || l > 31) {
            return None;
        }
        let mut sorted: Vec<(u32, u8)> = lengths.to_vec();
        sorted.sort_by_key(|&(s, l)| (l, s));
        if sorted.windows(2).any(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1) {
            return None;
        }
        let max_len = sorted.last().map_or(0, |&(_, l)| l) as usize;
        // Kraft inequality must hold for a valid prefix code
        let kraft: u64 = sorted.iter().map(|&(_, l)| 1u64 << (max_len - l as usize)).sum();
        if kraft > 1u64 << max_len {
            return None;
        }
        let mut entries = Vec::with_capacity(sorted.len());
        let mut encode = BTreeMap::new();
        let mut first_code = vec![0u32; max_len + 2];
        let mut first_index = vec![0usize; max_len + 2];
        let mut count = vec![0usize; max_len + 2];
        let mut code = 0u32;
        let mut prev_len = 0u8;
        for (i, &(s, l)) in sorted.iter().enumerate() {
            if l != prev_len {
                code <<= l - prev_len;
                first_code[l as usize] = code;
                first_index[l as usize] = i;
                prev_len = l;
            }
            count[l as usize] += 1;
            if encode.insert(s, (code, l)).is_some() {
                return None;
            }
            entries.push((s, l, code));
            code += 1;
        }
        Some(Self { entries, encode, first_code, first_index, count })
    }

    pub fn lookup(&self, symbol: u32) -> Option<(u32, u8)> {
        self.encode.get(&symbol).copied()
    }

    pub fn write(&self, symbol: u32, out: &mut BitWriter) -> bool {
        match self.lookup(symbol) {
            Some((code, len)) => {
                out.write(code, u32::from(len));
                true
            }
            None => false,
        }
    }

    pub fn read(&self, input: &mut BitReader<'_>) -> Option<u32> {
        let mut code = 0u32;
        for len in 1..self.count.len() {
            code = (code << 1) | input.read_bit()?;
            let n = self.count[len];
            if n > 0 {
                let first = self.first_code[len];
                if code >= first && ((code - first) as usize) < n {
                    return Some(self.entries[self.first_index[len] + (code - first) as usize].0);
                }
            }
        }
        None
    }
}

/// Appends `value` as an unsigned LEB128 varint.
pub fn write_varint(out: &mut Vec<u8>, mut value: u64) {
    loop {
        let byte = (value & 0x7f) as u8;
        value >>= 7;
        if value == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

pub fn read_varint(buf: &[u8], pos: &mut usize) -> Option<u64> {
    let mut value = 0u64;
    for shift in (0..64).step_by(7) {
        let byte = *buf.get(*pos)?;
        *pos += 1;
        value |= u64::from(byte & 0x7f) << shift;
        if byte & 0x80 == 0 {
            return Some(value);
        }
    }
    None
}

/// Code-length table: symbol count, then per symbol (ascending) the gap to
/// the previous symbol as a varint and the code length as one byte.
pub fn write_length_table(out: &mut Vec<u8>, lengths: &[(u32, u8)]) {
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    write_varint(out, sorted.len() as u64);
    let mut prev: i64 = -1;
    for (s, l) in sorted {
        write_varint(out, (i64::from(s) - prev - 1) as u64);
        out.push(l);
        prev = i64::from(s);
    }
}

pub fn read_length_table(buf: &[u8], pos: &mut usize) -> Option<Vec<(u32, u8)>> {
    let n = read_varint(buf, pos)?;
    if n > u64::from(u32::MAX) {
        return None;
    }
    let mut out = Vec::with_capacity(n.min(4096) as usize);
    let mut prev: i64 = -1;
    for _ in 0..n {
        let gap = read_varint(buf, pos)?;
        let s = prev.checked_add(1)?.checked_add(i64::try_from(gap).ok()?)?;
        let s = u32::try_from(s).ok()?;
        let l = *buf.get(*pos)?;
        *pos += 1;
        out.push((s, l));
        prev = i64::from(s);
    }
    Some(out)
}

/// Size in bytes of `data` under a byte-level static Huffman code, counting
/// the code-length table and an 8-byte length field. Used as the order-0
/// reference point for compression efficiency.
pub fn huffman_baseline_size(data: &[u8]) -> usize {
    let mut freqs = BTreeMap::new();
    for &b in data {
        *freqs.entry(u32::from(b)).or_insert(0u64) += 1;
    }
    let lengths = code_lengths(&freqs, MAX_CODE_LEN);
    let mut table = Vec::new();
    write_length_table(&mut table, &lengths);
    let bits: u64 = lengths.iter().map(|&(s, l)| freqs[&s] * u64::from(l)).sum();
    table.len() + 8 + bits.div_ceil(8) as usize
}
