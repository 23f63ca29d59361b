use alloc::vec::Vec;

/// Polynomial basis of a ChebNet kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChebBasis {
    /// `Σ α_k λ^k`
    Monomial,
    /// `Σ α_k T_k(λ − 1)`, i.e. Chebyshev polynomials of the rescaled
    /// spectrum with `λ_max = 2` (the trainable layer's form).
    Chebyshev,
}

/// Scalar spectral kernels `g(λ)` of the filter families.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterKernel {
    /// `1 − λ`
    Gcn,
    ChebNet { alphas: Vec<f64>, basis: ChebBasis },
    /// Enhanced low-pass `(ε + 1) − λ`.
    FagcnLow { eps: f64 },
    /// Enhanced high-pass `(ε + 1) + λ`.
    FagcnHigh { eps: f64 },
    /// Structure-free layer: gain 1 at every frequency.
    AllPass,
}

/// Gain of `kernel` at Laplacian eigenvalue `lambda` (expected in `[0, 2]`).
pub fn spectral_filter_response(kernel: &FilterKernel, lambda: f64) -> f64 {
    match kernel {
        FilterKernel::Gcn => 1.0 - lambda,
        FilterKernel::ChebNet { alphas, basis } => match basis {
            ChebBasis::Monomial => {
                let mut power = 1.0;
                let mut acc = 0.0;
                for &a in alphas {
                    acc += a * power;
                    power *= lambda;
                }
                acc
            }
            ChebBasis::Chebyshev => {
                let x = lambda - 1.0;
                let (mut prev, mut cur) = (1.0, x);
                let mut acc = 0.0;
                for (k, &a) in alphas.iter().enumerate() {
                    let t = match k {
                        0 => 1.0,
                        1 => x,
                        _ => {
                            let next = 2.0 * x * cur - prev;
                            prev = cur;
                            cur = next;
                            next
                        }
                    };
                    acc += a * t;
                }
                acc
            }
        },
        FilterKernel::FagcnLow { eps } => eps + 1.0 - lambda,
        FilterKernel::FagcnHigh { eps } => eps + 1.0 + lambda,
        FilterKernel::AllPass => 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn gcn_kernel() {
        assert_eq!(spectral_filter_response(&FilterKernel::Gcn, 0.0), 1.0);
        assert_eq!(spectral_filter_response(&FilterKernel::Gcn, 2.0), -1.0);
    }

    #[test]
    fn fagcn_kernels() {
        let low = spectral_filter_response(&FilterKernel::FagcnLow { eps: 0.3 }, 0.0);
        let high = spectral_filter_response(&FilterKernel::FagcnHigh { eps: 0.3 }, 2.0);
        assert!((low - 1.3).abs() < 1e-15);
        assert!((high - 3.3).abs() < 1e-15);
    }

    #[test]
    fn chebnet_monomial_mode() {
        let k = FilterKernel::ChebNet {
            alphas: vec![0.0, 1.0, 0.0, 0.0],
            basis: ChebBasis::Monomial,
        };
        for lambda in [0.0, 0.25, 1.0, 1.7, 2.0] {
            assert_eq!(spectral_filter_response(&k, lambda), lambda);
        }
    }

    #[test]
    fn chebyshev_basis_matches_explicit_polynomials() {
        // T0 = 1, T1 = x, T2 = 2x² − 1, T3 = 4x³ − 3x with x = λ − 1.
        let k = FilterKernel::ChebNet {
            alphas: vec![0.5, -1.0, 2.0, 0.25],
            basis: ChebBasis::Chebyshev,
        };
        for lambda in [0.0, 0.3, 1.0, 1.9] {
            let x: f64 = lambda - 1.0;
            let expected = 0.5 - x + 2.0 * (2.0 * x * x - 1.0) + 0.25 * (4.0 * x * x * x - 3.0 * x);
            assert!((spectral_filter_response(&k, lambda) - expected).abs() < 1e-14);
        }
    }
}
