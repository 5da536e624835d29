//! The blackboard: an ordered, bit-accounted record of every message.
//!
//! Payload bits are packed MSB-first into one contiguous bit buffer.
//! Consecutive messages from consecutive machines in the same round with the
//! same payload width are stored as one run, so a protocol that writes a
//! million one-bit messages costs a million bits plus a handful of headers.
//! Machine ids, rounds and run headers are free metadata: the communication
//! cost is the number of payload bits.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// A maximal run of equally sized messages from consecutive machines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageRun {
    pub round: usize,
    pub first_machine: usize,
    pub count: usize,
    pub bits_per_message: u32,
    pub bit_offset: u64,
}

impl MessageRun {
    pub fn bit_len(&self) -> u64 {
        self.count as u64 * self.bits_per_message as u64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    words: Vec<u64>,
    total_bits: u64,
    runs: Vec<MessageRun>,
}

/// View of one blackboard write.
#[derive(Debug, Clone, Copy)]
pub struct Message<'a> {
    pub machine_id: usize,
    pub round: usize,
    bit_offset: u64,
    bit_len: u32,
    transcript: &'a Transcript,
}

impl Message<'_> {
    pub fn bit_len(&self) -> u32 {
        self.bit_len
    }

    /// Reads `len ≤ 64` payload bits starting `at` bits into the message.
    pub fn read(&self, at: u32, len: u32) -> u64 {
        assert!(at + len <= self.bit_len, "read past end of message payload");
        self.transcript.read_bits(self.bit_offset + at as u64, len)
    }

    pub fn payload(&self) -> Vec<bool> {
        (0..self.bit_len)
            .map(|k| self.transcript.bit(self.bit_offset + k as u64))
            .collect()
    }

    /// Payload as lowercase hex, left-padded with zero bits to whole nibbles.
    pub fn payload_hex(&self) -> String {
        let pad = (4 - self.bit_len % 4) % 4;
        let mut bits = vec![false; pad as usize];
        bits.extend(self.payload());
        bits.chunks(4)
            .map(|nibble| {
                let v = nibble.iter().fold(0u32, |acc, b| (acc << 1) | *b as u32);
                char::from_digit(v, 16).expect("nibble")
            })
            .collect()
    }
}

/// Appends payload bits for a single message; see [`Transcript::push_message`].
pub struct PayloadWriter<'a> {
    transcript: &'a mut Transcript,
}

impl PayloadWriter<'_> {
    pub fn put(&mut self, value: u64, len: u32) {
        self.transcript.append_bits(value, len);
    }
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    /// CC(Π): payload bits on the blackboard.
    pub fn total_bits(&self) -> u64 {
        self.total_bits
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn message_count(&self) -> usize {
        self.runs.iter().map(|r| r.count).sum()
    }

    pub fn runs(&self) -> &[MessageRun] {
        &self.runs
    }

    pub fn messages(&self) -> impl Iterator<Item = Message<'_>> + '_ {
        self.runs.iter().flat_map(move |run| {
            (0..run.count).map(move |k| Message {
                machine_id: run.first_machine + k,
                round: run.round,
                bit_offset: run.bit_offset + k as u64 * run.bits_per_message as u64,
                bit_len: run.bits_per_message,
                transcript: self,
            })
        })
    }

    /// Writes one message whose payload is produced by `fill`.
    pub fn push_message<F>(&mut self, machine: usize, round: usize, fill: F) -> Result<()>
    where
        F: FnOnce(&mut PayloadWriter<'_>) -> Result<()>,
    {
        let start = self.total_bits;
        fill(&mut PayloadWriter { transcript: self })?;
        let len = self.total_bits - start;
        if len == 0 {
            return Err(Error::Transcript(format!(
                "machine {machine} wrote an empty payload in round {round}"
            )));
        }
        let len = u32::try_from(len)
            .map_err(|_| Error::Transcript("message payload exceeds u32::MAX bits".into()))?;
        self.register(machine, round, len, start);
        Ok(())
    }

    /// Writes a one-bit message.
    #[inline]
    pub fn push_bit(&mut self, machine: usize, round: usize, bit: bool) {
        let start = self.total_bits;
        self.append_bits(bit as u64, 1);
        self.register(machine, round, 1, start);
    }

    /// Writes one-bit messages from machines `first_machine..first_machine + count`
    /// in round `round`, the bit of machine `j` being `bit(j)`. Returns the
    /// number of ones written.
    pub fn push_bit_run<F>(&mut self, first_machine: usize, round: usize, count: usize, mut bit: F) -> usize
    where
        F: FnMut(usize) -> bool,
    {
        if count == 0 {
            return 0;
        }
        self.register_many(first_machine, round, 1, count, self.total_bits);
        let mut ones = 0;
        let mut j = 0;
        while j < count && self.total_bits % 64 != 0 {
            let b = bit(first_machine + j);
            self.append_bits(b as u64, 1);
            ones += b as usize;
            j += 1;
        }
        // Whole words at a time once aligned.
        while count - j >= 64 {
            let mut word = 0u64;
            for k in 0..64 {
                word = (word << 1) | bit(first_machine + j + k) as u64;
            }
            ones += word.count_ones() as usize;
            self.words.push(word);
            self.total_bits += 64;
            j += 64;
        }
        while j < count {
            let b = bit(first_machine + j);
            self.append_bits(b as u64, 1);
            ones += b as usize;
            j += 1;
        }
        ones
    }

    #[inline]
    fn register(&mut self, machine: usize, round: usize, len: u32, start: u64) {
        self.register_many(machine, round, len, 1, start);
    }

    #[inline]
    fn register_many(&mut self, machine: usize, round: usize, len: u32, count: usize, start: u64) {
        if let Some(last) = self.runs.last_mut() {
            if last.round == round
                && last.bits_per_message == len
                && last.first_machine + last.count == machine
            {
                last.count += count;
                return;
            }
        }
        self.runs.push(MessageRun {
            round,
            first_machine: machine,
            count,
            bits_per_message: len,
            bit_offset: start,
        });
    }

    #[inline]
    fn append_bits(&mut self, value: u64, len: u32) {
        debug_assert!(len <= 64);
        if len == 0 {
            return;
        }
        let value = if len == 64 { value } else { value & ((1u64 << len) - 1) };
        let offset = (self.total_bits % 64) as u32;
        if offset == 0 {
            self.words.push(0);
        }
        let free = 64 - offset;
        let last = self.words.len() - 1;
        if len <= free {
            self.words[last] |= value << (free - len);
        } else {
            let spill = len - free;
            self.words[last] |= value >> spill;
            self.words.push(value << (64 - spill));
        }
        self.total_bits += len as u64;
    }

    #[inline]
    pub fn bit(&self, offset: u64) -> bool {
        (self.words[(offset / 64) as usize] >> (63 - offset % 64)) & 1 == 1
    }

    /// Reads `len ≤ 64` bits starting at absolute bit `offset`.
    pub fn read_bits(&self, offset: u64, len: u32) -> u64 {
        assert!(len <= 64 && offset + len as u64 <= self.total_bits);
        if len == 0 {
            return 0;
        }
        let w = (offset / 64) as usize;
        let o = (offset % 64) as u32;
        let head = self.words[w] << o;
        if o + len <= 64 {
            head >> (64 - len)
        } else {
            let spill = o + len - 64;
            (head >> (64 - len)) | (self.words[w + 1] >> (64 - spill))
        }
    }

    /// Number of set bits in `[offset, offset + len)`.
    pub fn count_ones(&self, offset: u64, len: u64) -> u64 {
        assert!(offset + len <= self.total_bits);
        let mut ones = 0u64;
        let mut pos = offset;
        let end = offset + len;
        while pos < end {
            let w = (pos / 64) as usize;
            let o = pos % 64;
            let take = (64 - o).min(end - pos);
            let word = self.words[w] << o;
            let masked = if take == 64 { word } else { word >> (64 - take) };
            ones += masked.count_ones() as u64;
            pos += take;
        }
        ones
    }

    /// Appends every message of `other` after the messages of `self`.
    pub fn append(&mut self, other: &Transcript) {
        for run in &other.runs {
            for k in 0..run.count {
                let start = self.total_bits;
                let mut remaining = run.bits_per_message;
                let mut src = run.bit_offset + k as u64 * run.bits_per_message as u64;
                while remaining > 0 {
                    let chunk = remaining.min(64);
                    self.append_bits(other.read_bits(src, chunk), chunk);
                    src += chunk as u64;
                    remaining -= chunk;
                }
                self.register(run.first_machine + k, run.round, run.bits_per_message, start);
            }
        }
    }

    /// One line per message: `round,machine_id,bits_hex,bit_len`.
    pub fn to_debug_text(&self) -> String {
        let mut out = String::new();
        for msg in self.messages() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                msg.round,
                msg.machine_id,
                msg.payload_hex(),
                msg.bit_len()
            );
        }
        out
    }

    pub fn from_debug_text(text: &str) -> Result<Self> {
        let mut t = Transcript::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |what: &str| Error::Transcript(format!("line {}: {what}", lineno + 1));
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != 4 {
                return Err(bad("expected 4 comma-separated fields"));
            }
            let round: usize = fields[0].parse().map_err(|_| bad("bad round"))?;
            let machine: usize = fields[1].parse().map_err(|_| bad("bad machine id"))?;
            let len: usize = fields[3].parse().map_err(|_| bad("bad bit length"))?;
            let hex = fields[2];
            if len == 0 || hex.len() != len.div_ceil(4) {
                return Err(bad("hex width does not match bit length"));
            }
            let mut bits = Vec::with_capacity(hex.len() * 4);
            for c in hex.chars() {
                let v = c.to_digit(16).ok_or_else(|| bad("non-hex payload"))?;
                bits.extend((0..4).rev().map(|s| (v >> s) & 1 == 1));
            }
            let pad = bits.len() - len;
            if bits[..pad].iter().any(|b| *b) {
                return Err(bad("nonzero padding bits"));
            }
            t.push_message(machine, round, |w| {
                for b in &bits[pad..] {
                    w.put(*b as u64, 1);
                }
                Ok(())
            })?;
        }
        Ok(t)
    }
}

/// CC(Π) of a transcript.
pub fn transcript_cost(t: &Transcript) -> u64 {
    t.total_bits()
}
