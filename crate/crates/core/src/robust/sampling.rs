use rand::seq::index;
use rand_chacha::ChaCha8Rng;

/// Number of PROSAC draws after which sampling is effectively uniform.
const PROSAC_HORIZON: f64 = 200_000.0;

/// Standard RANSAC termination bound `ceil(log(1 - confidence) / log(1 - w^s))`,
/// capped at `max_iterations`.
///
/// ```
/// use fmbench::robust::adaptive_iterations;
/// assert_eq!(adaptive_iterations(0.99, 0.5, 8, 2000), 1177);
/// assert_eq!(adaptive_iterations(0.99, 0.0, 8, 2000), 2000);
/// ```
pub fn adaptive_iterations(confidence: f64, inlier_rate: f64, sample_size: usize, max_iterations: usize) -> usize {
    let w = inlier_rate.clamp(0.0, 1.0);
    let p_good = libm::pow(w, sample_size as f64);
    if p_good <= 0.0 {
        return max_iterations;
    }
    if p_good >= 1.0 {
        return 1.min(max_iterations);
    }
    let denom = libm::log1p(-p_good);
    if denom >= 0.0 {
        return max_iterations;
    }
    let n = (libm::log1p(-confidence) / denom).ceil();
    if !(n < max_iterations as f64) {
        max_iterations
    } else {
        (n as usize).max(1)
    }
}

/// Source of minimal-sample indices.
pub(crate) enum Sampler {
    Uniform { n: usize },
    Prosac(Prosac),
}

impl Sampler {
    pub(super) fn draw(&mut self, rng: &mut ChaCha8Rng, m: usize, out: &mut Vec<usize>) {
        out.clear();
        match self {
            Sampler::Uniform { n } => out.extend(index::sample(rng, *n, m).into_iter()),
            Sampler::Prosac(p) => p.draw(rng, m, out),
        }
    }
}

/// Progressive sampling over correspondences sorted best-first
/// (Chum and Matas growth function).
pub(crate) struct Prosac {
    order: Vec<usize>,
    m: usize,
    n: usize,
    t: u64,
    tn: f64,
    tn_prime: u64,
}

impl Prosac {
    pub(super) fn new(order: Vec<usize>, m: usize) -> Self {
        let big_n = order.len();
        let mut tn = PROSAC_HORIZON;
        for i in 0..m {
            tn *= (m - i) as f64 / (big_n - i) as f64;
        }
        Self {
            order,
            m,
            n: m,
            t: 0,
            tn,
            tn_prime: 1,
        }
    }

    fn draw(&mut self, rng: &mut ChaCha8Rng, m: usize, out: &mut Vec<usize>) {
        debug_assert_eq!(m, self.m);
        out.clear();
        self.t += 1;
        if self.t == self.tn_prime && self.n < self.order.len() {
            let next = self.tn * (self.n + 1) as f64 / (self.n + 1 - m) as f64;
            self.tn_prime += (next - self.tn).ceil().max(1.0) as u64;
            self.tn = next;
            self.n += 1;
        }
        if self.tn_prime < self.t {
            out.extend(index::sample(rng, self.n, m).into_iter().map(|i| self.order[i]));
        } else {
            out.extend(
                index::sample(rng, self.n - 1, m - 1)
                    .into_iter()
                    .map(|i| self.order[i]),
            );
            out.push(self.order[self.n - 1]);
        }
    }

    #[cfg(test)]
    fn subset_size(&self) -> usize {
        self.n
    }
}
