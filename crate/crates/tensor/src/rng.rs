//! Seeded PRNG used for parameter init, synthetic textures and sampling.
//!
//! The generator is xorshift64* (Marsaglia shifts 12/25/27, output multiplier
//! `0x2545F4914F6CDD1D`). The seed is first passed through one SplitMix64
//! step so that small and zero seeds still give a well-mixed non-zero state.
//! Floats take the top 53 bits; normals use the Box–Muller cosine branch.
//! Any implementation following these rules reproduces the same streams.

use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct XorShift64 {
    state: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl XorShift64 {
    pub fn new(seed: u64) -> Self {
        let state = splitmix64(seed);
        XorShift64 { state: if state == 0 { 0x9E37_79B9_7F4A_7C15 } else { state } }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub fn uniform_tensor(&mut self, shape: impl Into<Vec<usize>>, lo: f64, hi: f64) -> Tensor {
        Tensor::from_fn(shape, |_| self.uniform(lo, hi))
    }

    pub fn normal_tensor(&mut self, shape: impl Into<Vec<usize>>, std: f64) -> Tensor {
        Tensor::from_fn(shape, |_| std * self.normal())
    }
}

/// He (Kaiming) normal init: `N(0, 2 / fan_in)` with `fan_in = C·∏kernel`.
pub fn he_normal(rng: &mut XorShift64, shape: &[usize]) -> Tensor {
    let fan_in: usize = shape[1..].iter().product();
    rng.normal_tensor(shape.to_vec(), (2.0 / fan_in.max(1) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_streams() {
        let mut a = XorShift64::new(42);
        let mut b = XorShift64::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        assert_ne!(XorShift64::new(1).next_u64(), XorShift64::new(2).next_u64());
    }

    #[test]
    fn zero_seed_is_usable() {
        let mut r = XorShift64::new(0);
        assert_ne!(r.next_u64(), 0);
    }

    #[test]
    fn unit_interval() {
        let mut r = XorShift64::new(7);
        for _ in 0..10_000 {
            let v = r.next_f64();
            assert!((0.0..1.0).contains(&v));
        }
    }

    #[test]
    fn he_scale_is_plausible() {
        let mut r = XorShift64::new(3);
        let w = he_normal(&mut r, &[64, 16, 3, 3, 3]);
        let var = w.data().iter().map(|v| v * v).sum::<f64>() / w.numel() as f64;
        let expected = 2.0 / (16.0 * 27.0);
        assert!((var / expected - 1.0).abs() < 0.1, "{var} vs {expected}");
    }
}
