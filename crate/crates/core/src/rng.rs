//! Counter-based random numbers (Philox4x32-10).
//!
//! Every draw is a pure function of `(seed, stream, index)`, so event `i` gets
//! the same random numbers no matter which thread computes it or in what order.
//! The round constants and schedule follow the Random123 reference and the
//! known-answer vectors from that distribution are checked in the tests.

/// Identifier written into output files next to the seed.
pub const ALGORITHM_ID: &str = "philox4x32-10";

const MUL0: u32 = 0xD251_1F53;
const MUL1: u32 = 0xCD9E_8D57;
const WEYL0: u32 = 0x9E37_79B9;
const WEYL1: u32 = 0xBB67_AE85;
const ROUNDS: usize = 10;

/// Stream ids used inside the crate. Distinct streams never share counters.
pub mod streams {
    pub const EVENTS: u32 = 0;
    pub const DEFLECTION: u32 = 1;
    pub const RESTARTS: u32 = 2;
    pub const SPECIES: u32 = 3;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Philox4x32 {
    key: [u32; 2],
}

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

#[inline]
fn round(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let (hi0, lo0) = mulhilo(MUL0, ctr[0]);
    let (hi1, lo1) = mulhilo(MUL1, ctr[2]);
    [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0]
}

impl Philox4x32 {
    pub fn new(seed: u64) -> Self {
        Self::from_key([seed as u32, (seed >> 32) as u32])
    }

    pub fn from_key(key: [u32; 2]) -> Self {
        Self { key }
    }

    /// The raw bijection: one 128-bit counter to one 128-bit output block.
    pub fn block(&self, counter: [u32; 4]) -> [u32; 4] {
        let mut key = self.key;
        let mut ctr = round(counter, key);
        for _ in 1..ROUNDS {
            key[0] = key[0].wrapping_add(WEYL0);
            key[1] = key[1].wrapping_add(WEYL1);
            ctr = round(ctr, key);
        }
        ctr
    }

    /// Output block for draw `index` of `stream`.
    pub fn draw(&self, stream: u32, index: u64) -> [u32; 4] {
        self.block([index as u32, (index >> 32) as u32, stream, 0])
    }

    /// Sequential view over one stream, for callers that just need a sequence.
    pub fn sequence(&self, stream: u32) -> Sequence {
        Sequence {
            gen: *self,
            stream,
            next_index: 0,
            buffered: None,
        }
    }
}

/// Uniform in [0, 1) with 53 random bits taken from two words.
#[inline]
pub fn unit_f64(hi: u32, lo: u32) -> f64 {
    let bits = (u64::from(hi) << 21) ^ (u64::from(lo) >> 11);
    (bits & ((1u64 << 53) - 1)) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in the open interval (0, 1) from a single word.
#[inline]
pub fn open_unit_f32_bits(word: u32) -> f64 {
    (f64::from(word) + 0.5) * (1.0 / 4_294_967_296.0)
}

/// Box–Muller: two standard normal deviates from one output block.
pub fn standard_normal_pair(block: [u32; 4]) -> (f64, f64) {
    let u1 = unit_f64(block[0], block[1]);
    let u2 = unit_f64(block[2], block[3]);
    // 1 - u1 lies in (0, 1], keeping the log finite
    let r = (-2.0 * (1.0 - u1).ln()).sqrt();
    let t = std::f64::consts::TAU * u2;
    (r * t.cos(), r * t.sin())
}

#[derive(Debug, Clone)]
pub struct Sequence {
    gen: Philox4x32,
    stream: u32,
    next_index: u64,
    buffered: Option<f64>,
}

impl Sequence {
    pub fn next_block(&mut self) -> [u32; 4] {
        let b = self.gen.draw(self.stream, self.next_index);
        self.next_index += 1;
        b
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        if let Some(v) = self.buffered.take() {
            return v;
        }
        let b = self.next_block();
        self.buffered = Some(unit_f64(b[2], b[3]));
        unit_f64(b[0], b[1])
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}
