//! Bump mollifier and Gauss–Legendre rules on intervals.

use std::sync::OnceLock;

const GL5_NODES: [f64; 5] =
    [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Five-point Gauss–Legendre `(node, weight)` pairs on `[a, b]`.
pub fn gauss5_rule(a: f64, b: f64) -> [(f64, f64); 5] {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    std::array::from_fn(|k| (mid + half * GL5_NODES[k], half * GL5_WEIGHTS[k]))
}

pub fn gauss5(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    gauss5_rule(a, b).iter().map(|&(x, w)| w * f(x)).sum()
}

/// `gauss5` on `pieces` equal subintervals.
pub fn composite(a: f64, b: f64, pieces: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces).map(|k| gauss5(a + k as f64 * h, a + (k + 1) as f64 * h, &f)).sum()
}

const CDF_CELLS: usize = 1 << 14;

/// `φ(x) = C exp(−1/(1−x²))` on `(−1, 1)`, unit mass.
#[derive(Debug)]
pub struct Bump {
    norm: f64,
    cdf: Vec<f64>,
    max_slope: f64,
}

fn raw(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

impl Bump {
    pub fn get() -> &'static Bump {
        static BUMP: OnceLock<Bump> = OnceLock::new();
        BUMP.get_or_init(|| {
            let h = 2.0 / CDF_CELLS as f64;
            let mut cdf = Vec::with_capacity(CDF_CELLS + 1);
            let mut acc = 0.0;
            cdf.push(0.0);
            for k in 0..CDF_CELLS {
                let a = -1.0 + k as f64 * h;
                acc += gauss5(a, a + h, raw);
                cdf.push(acc);
            }
            let norm = acc;
            cdf.iter_mut().for_each(|c| *c /= norm);
            let slope = |x: f64| raw(x) * 2.0 * x.abs() / (1.0 - x * x).powi(2) / norm;
            let max_slope = (1..CDF_CELLS).map(|k| slope(-1.0 + k as f64 * h)).fold(0.0, f64::max);
            Bump { norm, cdf, max_slope }
        })
    }

    pub fn value(&self, x: f64) -> f64 {
        raw(x) / self.norm
    }

    /// `∫_{−∞}^x φ`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= -1.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let u = (x + 1.0) * CDF_CELLS as f64 / 2.0;
        let k = (u.floor() as usize).min(CDF_CELLS - 1);
        let f = u - k as f64;
        self.cdf[k] * (1.0 - f) + self.cdf[k + 1] * f
    }

    /// `M = sup |φ'|`.
    pub fn max_slope(&self) -> f64 {
        self.max_slope
    }

    /// `φ_t(x) = φ(x/t)/t`.
    pub fn scaled(&self, t: f64, x: f64) -> f64 {
        self.value(x / t) / t
    }

    /// `∫_a^b φ_t(x − y) dy`.
    pub fn window(&self, t: f64, x: f64, a: f64, b: f64) -> f64 {
        self.cdf((x - a) / t) - self.cdf((x - b) / t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_is_exact_on_quartics() {
        let v = gauss5(0.0, 2.0, |x| x.powi(4) - 3.0 * x + 1.0);
        assert!((v - (32.0 / 5.0 - 6.0 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn bump_has_unit_mass_and_symmetric_cdf() {
        let b = Bump::get();
        assert!((composite(-1.0, 1.0, 256, |x| b.value(x)) - 1.0).abs() < 1e-12);
        assert!((b.cdf(0.0) - 0.5).abs() < 1e-12);
        assert_eq!(b.cdf(-2.0), 0.0);
        assert_eq!(b.cdf(1.5), 1.0);
        assert!((b.window(0.1, 0.5, 0.0, 1.0) - 1.0).abs() < 1e-12);
        assert!(b.max_slope() > 1.5 && b.max_slope() < 2.0);
    }
}
