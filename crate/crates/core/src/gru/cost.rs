//! Analytical parameter and multiplication counts for the feedforward and
//! recurrent networks, as closed-form formulas in `c` (input channels),
//! image size `S1 x S2` and patch grid `b1 x b2`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    /// `27 c + 27`.
    pub n_p_gru: u64,
    /// `9 c`.
    pub n_p_dnn: u64,
    /// `(S1/b1)(S2/b2) 27 c + (S1/b1)(S2/b2) 27`.
    pub n_m_gru_per_step: u64,
    /// `S1 S2 9 c`.
    pub n_m_dnn: u64,
    /// `S1 S2 27 c + S1 S2 27`.
    pub n_m_gru_unrolled: u64,
}

impl CostReport {
    /// `n_m_gru_unrolled / n_m_dnn`, which equals `3 (c + 1) / c`.
    pub fn unrolled_ratio(&self) -> f64 {
        self.n_m_gru_unrolled as f64 / self.n_m_dnn as f64
    }
}

fn mul(values: &[u64]) -> Result<u64> {
    values.iter().try_fold(1u64, |acc, &v| acc.checked_mul(v)).map_or_else(|| invalid("cost model overflows u64"), Ok)
}

fn add(a: u64, b: u64) -> Result<u64> {
    a.checked_add(b).map_or_else(|| invalid("cost model overflows u64"), Ok)
}

pub fn cost_model(c: u64, s1: u64, s2: u64, b1: u64, b2: u64) -> Result<CostReport> {
    ensure!(c > 0 && s1 > 0 && s2 > 0 && b1 > 0 && b2 > 0, "cost model arguments must be positive");
    ensure!(s1.is_multiple_of(b1) && s2.is_multiple_of(b2), "{s1}x{s2} is not divisible by a {b1}x{b2} patch grid");
    let patch = mul(&[s1 / b1, s2 / b2])?;
    let image = mul(&[s1, s2])?;
    Ok(CostReport {
        n_p_gru: add(mul(&[27, c])?, 27)?,
        n_p_dnn: mul(&[9, c])?,
        n_m_gru_per_step: add(mul(&[patch, 27, c])?, mul(&[patch, 27])?)?,
        n_m_dnn: mul(&[image, 9, c])?,
        n_m_gru_unrolled: add(mul(&[image, 27, c])?, mul(&[image, 27])?)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_channel_counts() {
        let r = cost_model(1, 64, 64, 2, 2).unwrap();
        assert_eq!((r.n_p_gru, r.n_p_dnn), (54, 9));
    }

    #[test]
    fn per_step_multiplications() {
        assert_eq!(cost_model(4, 512, 512, 4, 4).unwrap().n_m_gru_per_step, 2_211_840);
    }

    #[test]
    fn ratio_is_exact() {
        for c in 1..20u64 {
            let r = cost_model(c, 128, 96, 4, 3).unwrap();
            assert_eq!(r.n_m_gru_unrolled * c, 3 * (c + 1) * r.n_m_dnn);
        }
    }

    #[test]
    fn bad_arguments() {
        assert!(cost_model(1, 10, 10, 3, 1).is_err());
        assert!(cost_model(0, 8, 8, 1, 1).is_err());
        assert!(cost_model(u64::MAX / 2, 1 << 20, 1 << 20, 1, 1).is_err());
    }
}
