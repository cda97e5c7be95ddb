use crate::error::{Error, Result};
use crate::runtime::{PackedTernaryVec, TernaryLayer};

/// A ternary neuron: `y = w · x` without bias, fired against two integer thresholds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StudentNeuron {
    pub weights: Vec<i8>,
    pub b_lo: i32,
    pub b_hi: i32,
}

impl StudentNeuron {
    /// Thresholds are clamped to `±fan_in`, the range of the transfer output.
    pub fn new(weights: Vec<i8>, b_lo: i32, b_hi: i32) -> Result<Self> {
        if weights.iter().any(|w| !(-1..=1).contains(w)) {
            return Err(Error::InvalidArgument("student weights must be ternary".into()));
        }
        if b_lo > b_hi {
            return Err(Error::InvalidArgument(format!("b_lo {b_lo} > b_hi {b_hi}")));
        }
        let bound = weights.len() as i32;
        Ok(StudentNeuron {
            weights,
            b_lo: b_lo.clamp(-bound, bound),
            b_hi: b_hi.clamp(-bound, bound),
        })
    }

    pub fn fan_in(&self) -> usize {
        self.weights.len()
    }

    pub fn transfer(&self, x: &[i8]) -> i32 {
        let mut y = 0;
        for (&w, &v) in self.weights.iter().zip(x) {
            match w.signum() * v.signum() {
                1 => y += 1,
                -1 => y -= 1,
                _ => {}
            }
        }
        y
    }

    pub fn fire(&self, y: i32) -> i8 {
        crate::runtime::step_activation(y, self.b_lo, self.b_hi)
    }

    pub fn nonzeros(&self) -> usize {
        self.weights.iter().filter(|&&w| w != 0).count()
    }
}

/// Unpacked ternary layer used while the student is being built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StudentLayer {
    pub neurons: Vec<StudentNeuron>,
}

impl StudentLayer {
    pub fn new(neurons: Vec<StudentNeuron>) -> Result<Self> {
        let fan_in = neurons
            .first()
            .map(StudentNeuron::fan_in)
            .ok_or_else(|| Error::Empty("student layer".into()))?;
        if neurons.iter().any(|n| n.fan_in() != fan_in) {
            return Err(Error::DimensionMismatch("student neurons with different fan-in".into()));
        }
        Ok(StudentLayer { neurons })
    }

    pub fn len(&self) -> usize {
        self.neurons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neurons.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.neurons[0].fan_in()
    }

    pub fn forward(&self, x: &[i8]) -> Vec<i8> {
        self.neurons.iter().map(|n| n.fire(n.transfer(x))).collect()
    }

    pub fn to_packed(&self) -> Result<TernaryLayer> {
        let rows = self
            .neurons
            .iter()
            .map(|n| PackedTernaryVec::pack(&n.weights))
            .collect::<Result<Vec<_>>>()?;
        TernaryLayer::new(
            self.input_dim(),
            rows,
            self.neurons.iter().map(|n| n.b_lo).collect(),
            self.neurons.iter().map(|n| n.b_hi).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds_are_clamped_and_ordered() {
        let n = StudentNeuron::new(vec![1, -1, 0], -10, 10).unwrap();
        assert_eq!((n.b_lo, n.b_hi), (-3, 3));
        assert!(StudentNeuron::new(vec![1], 2, 1).is_err());
        assert!(StudentNeuron::new(vec![2], 0, 1).is_err());
    }

    #[test]
    fn transfer_and_fire() {
        let n = StudentNeuron::new(vec![1, -1, 1], 0, 1).unwrap();
        assert_eq!(n.transfer(&[1, -1, 1]), 3);
        assert_eq!(n.fire(3), 1);
        assert_eq!(n.fire(1), 0);
        assert_eq!(n.fire(-1), -1);
    }

    #[test]
    fn packed_layer_matches_unpacked() {
        let mut rng = crate::math::Rng::new(51);
        let neurons = (0..7)
            .map(|_| {
                let w: Vec<i8> = (0..90).map(|_| rng.below(3) as i8 - 1).collect();
                let lo = -(rng.below(5) as i32);
                StudentNeuron::new(w, lo, lo + rng.below(6) as i32).unwrap()
            })
            .collect();
        let layer = StudentLayer::new(neurons).unwrap();
        let packed = layer.to_packed().unwrap();
        for _ in 0..50 {
            let x: Vec<i8> = (0..90).map(|_| rng.below(3) as i8 - 1).collect();
            let got = packed.forward(&PackedTernaryVec::pack(&x).unwrap()).unwrap().unpack();
            assert_eq!(got, layer.forward(&x));
        }
    }
}
