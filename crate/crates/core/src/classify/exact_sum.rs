//! Order-independent exact summation of `f32` values.
//!
//! Every finite `f32` is an integer multiple of 2^-149 below 2^128, so a
//! fixed-point accumulator of 32-bit limbs holds any sum exactly. Merging two
//! accumulators is plain limb addition, which makes streamed per-file
//! statistics independent of the order in which files arrive.

const LIMBS: usize = 10;
const LIMB_BITS: u32 = 32;
/// Weight of bit 0 of limb 0 is 2^-149.
const BASE_EXP: i32 = -149;
// Each add contributes < 2^56 to one limb; normalize well before i64 overflow.
const ADDS_BEFORE_NORMALIZE: u32 = 64;

#[derive(Debug, Clone, Copy)]
pub struct ExactSum {
    limbs: [i64; LIMBS],
    pending: u32,
}

impl Default for ExactSum {
    fn default() -> Self {
        Self {
            limbs: [0; LIMBS],
            pending: 0,
        }
    }
}

impl PartialEq for ExactSum {
    fn eq(&self, other: &Self) -> bool {
        self.normalized().limbs == other.normalized().limbs
    }
}

impl ExactSum {
    pub fn add(&mut self, x: f32) {
        debug_assert!(x.is_finite());
        let bits = x.to_bits();
        let negative = bits >> 31 == 1;
        let exp = ((bits >> 23) & 0xff) as i32;
        let frac = i64::from(bits & 0x7f_ffff);
        let (mantissa, e) = if exp == 0 {
            (frac, -149)
        } else {
            (frac | 1 << 23, exp - 150)
        };
        if mantissa == 0 {
            return;
        }
        let pos = (e - BASE_EXP) as u32;
        let (limb, shift) = ((pos / LIMB_BITS) as usize, pos % LIMB_BITS);
        let v = mantissa << shift;
        self.limbs[limb] += if negative { -v } else { v };
        self.pending += 1;
        if self.pending >= ADDS_BEFORE_NORMALIZE {
            self.normalize();
        }
    }

    pub fn merge(&mut self, other: &ExactSum) {
        let other = other.normalized();
        self.normalize();
        for (a, b) in self.limbs.iter_mut().zip(other.limbs) {
            *a += b;
        }
        self.normalize();
    }

    fn normalize(&mut self) {
        for j in 0..LIMBS - 1 {
            let carry = self.limbs[j] >> LIMB_BITS;
            self.limbs[j] -= carry << LIMB_BITS;
            self.limbs[j + 1] += carry;
        }
        self.pending = 0;
    }

    fn normalized(&self) -> Self {
        let mut c = *self;
        c.normalize();
        c
    }

    /// Rounds the exact sum to `f64`. Equal sums always give equal results.
    pub fn value(&self) -> f64 {
        let n = self.normalized();
        let mut acc = 0.0f64;
        for j in (0..LIMBS).rev() {
            let scale = 2f64.powi(BASE_EXP + (j as i32) * LIMB_BITS as i32);
            acc += n.limbs[j] as f64 * scale;
        }
        acc
    }

    pub fn limbs(&self) -> [i64; LIMBS] {
        self.normalized().limbs
    }

    pub fn from_limbs(limbs: [i64; LIMBS]) -> Option<Self> {
        let s = Self { limbs, pending: 0 };
        (s.normalized().limbs == limbs).then_some(s)
    }

    pub const LIMB_COUNT: usize = LIMBS;
}
