use crate::error::{ensure, Result};

/// A named, shaped group of trainable parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

/// Models that expose their trainable parameters as ordered flat groups.
pub trait Parameterized {
    fn param_specs(&self) -> Vec<ParamSpec>;
    fn params(&self) -> Vec<&[f64]>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_parameters(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        self.params().concat()
    }

    fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        let n = self.num_parameters();
        ensure!(flat.len() == n, "expected {n} parameters, got {}", flat.len());
        let mut offset = 0;
        for group in self.params_mut() {
            let len = group.len();
            group.copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }
}

/// `acc += other`, group by group. Both must share a layout.
pub fn accumulate<P: Parameterized>(acc: &mut P, other: &P) {
    for (a, b) in acc.params_mut().into_iter().zip(other.params()) {
        assert_eq!(a.len(), b.len(), "parameter layouts differ");
        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    }
}
