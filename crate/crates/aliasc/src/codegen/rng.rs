//! Seeded constant drawing with a complete draw log.
//!
//! Every randomized constant the compiler bakes into a program comes from
//! one sequential stream keyed by the compilation seed. Each draw is logged;
//! emitted constants record which draws they combine (see
//! [`super::meta::AffineConst`]), so a report can re-derive every constant
//! in the binary from the log alone.

/// One logged draw: its position in the log and the value drawn.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Draw {
    pub idx: u32,
    pub v: i32,
}

/// Sequential seeded source of 32-bit constants.
///
/// In the plain modes the stream still advances and logs — so code layout
/// decisions and affine records are identical across modes — but every value
/// is zero, which collapses all offsets to the nominal encoding.
pub struct Draws {
    state: u64,
    zeroed: bool,
    log: Vec<i32>,
}

impl Draws {
    pub fn new(seed: u64, zeroed: bool) -> Self {
        Draws { state: seed, zeroed, log: Vec::new() }
    }

    /// Draw the next constant.
    pub fn draw(&mut self) -> Draw {
        // splitmix64 step; the low half of the mix is the drawn value.
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        let v = if self.zeroed { 0 } else { z as u32 as i32 };
        let idx = self.log.len() as u32;
        self.log.push(v);
        Draw { idx, v }
    }

    pub fn into_log(self) -> Vec<i32> {
        self.log
    }
}
