use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adaptive bandwidths are padded by this factor so the k-th neighbour keeps a positive weight.
pub const ADAPTIVE_PAD: f64 = 1.000_000_1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    #[default]
    Bisquare,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthMode {
    /// Bandwidth is a distance shared by every location.
    Fixed,
    /// Bandwidth is a neighbour count; the radius adapts to local density.
    #[default]
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub mode: BandwidthMode,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, mode: BandwidthMode) -> Self {
        Self { family, mode }
    }

    /// Check a bandwidth value against the mode; `n_terms` counts the intercept.
    pub fn validate_bandwidth(&self, bw: f64, n_terms: usize, n: usize) -> Result<()> {
        match self.mode {
            BandwidthMode::Fixed if !(bw > 0.0 && bw.is_finite()) => Err(Error::InvalidArgument(
                format!("fixed bandwidth must be positive and finite, got {bw}"),
            )),
            BandwidthMode::Adaptive
                if bw.fract() != 0.0 || bw < (n_terms + 1) as f64 || bw > n as f64 =>
            {
                Err(Error::InvalidArgument(format!(
                    "adaptive bandwidth must be an integer in [{}, {n}], got {bw}",
                    n_terms + 1
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Kernel weight at distance `d` for bandwidth `bw`.
pub fn kernel_weight(d: f64, bw: f64, family: KernelFamily) -> f64 {
    let u = d / bw;
    match family {
        KernelFamily::Bisquare => {
            if u < 1.0 {
                let t = 1.0 - u * u;
                t * t
            } else {
                0.0
            }
        }
        KernelFamily::Gaussian => (-0.5 * u * u).exp(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisquare_values() {
        assert_eq!(kernel_weight(0.0, 2.0, KernelFamily::Bisquare), 1.0);
        assert_eq!(kernel_weight(2.0, 2.0, KernelFamily::Bisquare), 0.0);
        assert_eq!(kernel_weight(3.0, 2.0, KernelFamily::Bisquare), 0.0);
        assert_eq!(kernel_weight(1.0, 2.0, KernelFamily::Bisquare), 0.5625);
    }

    #[test]
    fn gaussian_values() {
        assert_eq!(kernel_weight(0.0, 2.0, KernelFamily::Gaussian), 1.0);
        assert!((kernel_weight(2.0, 2.0, KernelFamily::Gaussian) - (-0.5f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn adaptive_bandwidth_validation() {
        let k = KernelSpec::default();
        assert!(k.validate_bandwidth(10.0, 3, 50).is_ok());
        assert!(k.validate_bandwidth(3.0, 3, 50).is_err());
        assert!(k.validate_bandwidth(10.5, 3, 50).is_err());
        assert!(k.validate_bandwidth(51.0, 3, 50).is_err());
        let f = KernelSpec::new(KernelFamily::Gaussian, BandwidthMode::Fixed);
        assert!(f.validate_bandwidth(0.0, 3, 50).is_err());
        assert!(f.validate_bandwidth(2.5, 3, 50).is_ok());
    }
}
