/// Decaying triangular learning-rate wave.
///
/// `lr(i) = base + (max - base) * tri(i) * decay^i`, where `tri` rises
/// linearly from 0 at `i = 0` to 1 at `i = half_cycle` and back to 0 at
/// `2 * half_cycle`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CyclicLr {
    pub base: f64,
    pub max: f64,
    pub decay: f64,
    pub half_cycle: u64,
}

impl CyclicLr {
    pub fn triangle(&self, iteration: u64) -> f64 {
        let h = self.half_cycle.max(1);
        let c = iteration % (2 * h);
        if c <= h {
            c as f64 / h as f64
        } else {
            (2 * h - c) as f64 / h as f64
        }
    }

    pub fn at(&self, iteration: u64) -> f64 {
        self.base + (self.max - self.base) * self.triangle(iteration) * self.decay.powf(iteration as f64)
    }
}
