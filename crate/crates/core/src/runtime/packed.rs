use crate::error::{Error, Result};

/// Ternary vector as two disjoint bitsets.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PackedTernaryVec {
    len: usize,
    plus: Vec<u64>,
    minus: Vec<u64>,
}

#[inline]
pub(crate) fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

impl PackedTernaryVec {
    pub fn zeros(len: usize) -> Self {
        let w = words_for(len);
        PackedTernaryVec {
            len,
            plus: vec![0; w],
            minus: vec![0; w],
        }
    }

    pub fn pack(values: &[i8]) -> Result<Self> {
        let mut p = PackedTernaryVec::zeros(values.len());
        for (j, &v) in values.iter().enumerate() {
            match v {
                1 => p.plus[j / 64] |= 1 << (j % 64),
                -1 => p.minus[j / 64] |= 1 << (j % 64),
                0 => {}
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "value {v} at position {j} is not ternary"
                    )))
                }
            }
        }
        Ok(p)
    }

    /// Builds from raw masks, enforcing disjointness and zero padding.
    pub fn from_masks(len: usize, plus: Vec<u64>, minus: Vec<u64>) -> Result<Self> {
        let w = words_for(len);
        if plus.len() != w || minus.len() != w {
            return Err(Error::DimensionMismatch(format!(
                "{} / {} mask words for length {len}",
                plus.len(),
                minus.len()
            )));
        }
        if plus.iter().zip(&minus).any(|(p, m)| p & m != 0) {
            return Err(Error::InvalidArgument("a position is both +1 and -1".into()));
        }
        if len % 64 != 0 && w > 0 {
            let pad = !0u64 << (len % 64);
            if (plus[w - 1] | minus[w - 1]) & pad != 0 {
                return Err(Error::InvalidArgument("bits set beyond the vector length".into()));
            }
        }
        Ok(PackedTernaryVec { len, plus, minus })
    }

    pub fn unpack(&self) -> Vec<i8> {
        (0..self.len).map(|j| self.get(j)).collect()
    }

    #[inline]
    pub fn get(&self, j: usize) -> i8 {
        assert!(j < self.len, "index {j} out of range for length {}", self.len);
        let bit = 1u64 << (j % 64);
        if self.plus[j / 64] & bit != 0 {
            1
        } else if self.minus[j / 64] & bit != 0 {
            -1
        } else {
            0
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn plus_mask(&self) -> &[u64] {
        &self.plus
    }

    pub fn minus_mask(&self) -> &[u64] {
        &self.minus
    }

    /// Number of nonzero positions.
    pub fn nnz(&self) -> usize {
        self.plus
            .iter()
            .chain(&self.minus)
            .map(|w| w.count_ones() as usize)
            .sum()
    }
}

/// `Σ w_j x_j` via popcounts over the mask pairs.
pub fn ternary_dot(w: &PackedTernaryVec, x: &PackedTernaryVec) -> Result<i32> {
    super::engine::ternary_dot_with(&mut super::engine::Plain, w, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Rng;

    fn random_vec(rng: &mut Rng, len: usize) -> Vec<i8> {
        (0..len).map(|_| rng.below(3) as i8 - 1).collect()
    }

    #[test]
    fn pack_hand_cases() {
        let e = PackedTernaryVec::pack(&[]).unwrap();
        assert!(e.plus_mask().is_empty() && e.minus_mask().is_empty());
        let p = PackedTernaryVec::pack(&[1, 0, -1]).unwrap();
        assert_eq!(p.plus_mask(), &[0b001]);
        assert_eq!(p.minus_mask(), &[0b100]);
        assert!(PackedTernaryVec::pack(&[2]).is_err());
    }

    #[test]
    fn round_trips_random_vectors() {
        let mut rng = Rng::new(1);
        for _ in 0..10_000 {
            let len = rng.below(200);
            let v = random_vec(&mut rng, len);
            assert_eq!(PackedTernaryVec::pack(&v).unwrap().unpack(), v);
        }
    }

    #[test]
    fn dot_matches_naive_oracle() {
        let mut rng = Rng::new(2);
        for _ in 0..100_000 {
            let len = 1 + rng.below(150);
            let a = random_vec(&mut rng, len);
            let b = random_vec(&mut rng, len);
            let naive: i32 = a.iter().zip(&b).map(|(&x, &y)| x as i32 * y as i32).sum();
            let pa = PackedTernaryVec::pack(&a).unwrap();
            let pb = PackedTernaryVec::pack(&b).unwrap();
            assert_eq!(ternary_dot(&pa, &pb).unwrap(), naive);
        }
    }

    #[test]
    fn dot_hand_cases() {
        let w = PackedTernaryVec::pack(&[1, 1, -1]).unwrap();
        assert_eq!(ternary_dot(&w, &w).unwrap(), 3);
        assert_eq!(ternary_dot(&w, &PackedTernaryVec::zeros(3)).unwrap(), 0);
        assert!(ternary_dot(&w, &PackedTernaryVec::zeros(4)).is_err());
    }

    #[test]
    fn from_masks_checks_invariants() {
        assert!(PackedTernaryVec::from_masks(3, vec![1], vec![1]).is_err());
        assert!(PackedTernaryVec::from_masks(3, vec![0b1000], vec![0]).is_err());
        assert!(PackedTernaryVec::from_masks(3, vec![0b001], vec![0b100]).is_ok());
        assert!(PackedTernaryVec::from_masks(64, vec![!0], vec![0]).is_ok());
    }
}
