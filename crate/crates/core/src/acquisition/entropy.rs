use crate::scalar::Scalar;

/// Entropy in nats of a Bernoulli variable with success probability `p`, with `0 log 0 = 0`.
pub fn binary_entropy<T: Scalar>(p: T) -> T {
    if !(p > T::zero() && p < T::one()) {
        return T::zero();
    }
    let q = T::one() - p;
    -(p * p.ln() + q * q.ln())
}

/// Gauss–Hermite rule for `int f(x) exp(-x^2) dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Rule with `n` nodes, located by Newton iteration on the orthonormal Hermite recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let pim4 = std::f64::consts::PI.powf(-0.25);
        let nf = n as f64;
        let m = n.div_ceil(2);
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() <= 1e-14 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `E[f(X)]` for `X ~ N(mean, sd^2)`.
    pub fn expect_normal<F: FnMut(f64) -> f64>(&self, mean: f64, sd: f64, mut f: F) -> f64 {
        let s = std::f64::consts::SQRT_2 * sd;
        let acc: f64 = self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(mean + s * x)).sum();
        acc / std::f64::consts::PI.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.0f64), 0.0);
        assert_eq!(binary_entropy(1.0f64), 0.0);
        assert_relative_eq!(binary_entropy(0.5f64), std::f64::consts::LN_2, epsilon = 1e-15);
        let p: f64 = 0.25;
        let direct = -(p * p.ln() + (1.0 - p) * (1.0 - p).ln());
        assert_relative_eq!(binary_entropy(p), direct, epsilon = 1e-15);
        assert_relative_eq!(binary_entropy(p), 0.562335, epsilon = 1e-6);
        assert_relative_eq!(binary_entropy(0.25f32), 0.562335f32, epsilon = 1e-6);
    }

    #[test]
    fn hermite_rule_integrates_moments() {
        for n in [1, 2, 5, 32, 64] {
            let gh = GaussHermite::new(n);
            assert_relative_eq!(gh.weights.iter().sum::<f64>(), std::f64::consts::PI.sqrt(), max_relative = 1e-12);
            assert_relative_eq!(gh.expect_normal(1.5, 2.0, |x| x), 1.5, epsilon = 1e-12);
            if n >= 2 {
                assert_relative_eq!(gh.expect_normal(1.5, 2.0, |x| x * x), 1.5 * 1.5 + 4.0, max_relative = 1e-12);
            }
        }
        let gh = GaussHermite::new(32);
        // E[x^8] = 105 for a standard normal
        assert_relative_eq!(gh.expect_normal(0.0, 1.0, |x| x.powi(8)), 105.0, max_relative = 1e-10);
        // E[cos x] = exp(-1/2)
        assert_relative_eq!(gh.expect_normal(0.0, 1.0, f64::cos), (-0.5f64).exp(), epsilon = 1e-13);
    }
}
