//! Coordinate permutations and the affine permutation group of cyclic codes.

use super::CodeError;

/// A permutation of n coordinates. Applying it gathers: out[i] = v[map[i]].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    /// Build from an index map; rejects non-bijections.
    pub fn new(map: Vec<usize>) -> Result<Self, CodeError> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &i in &map {
            if i >= n || seen[i] {
                return Err(CodeError::NotAPermutation);
            }
            seen[i] = true;
        }
        Ok(Self { map })
    }

    pub fn identity(n: usize) -> Self {
        Self { map: (0..n).collect() }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &j)| i == j)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &j) in self.map.iter().enumerate() {
            inv[j] = i;
        }
        Self { map: inv }
    }

    /// Composition: applying the result once equals applying `other`, then `self`.
    pub fn compose(&self, other: &Permutation) -> Self {
        assert_eq!(self.len(), other.len());
        Self { map: self.map.iter().map(|&i| other.map[i]).collect() }
    }

    /// Gather v through the permutation: out[i] = v[map[i]].
    pub fn permute<T: Copy>(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.map.len(), "length mismatch");
        self.map.iter().map(|&i| v[i]).collect()
    }

    /// Exact inverse of `permute`: out[map[i]] = v[i].
    pub fn unpermute<T: Copy>(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.map.len(), "length mismatch");
        let mut out = vec![v[0]; v.len()];
        for (i, &j) in self.map.iter().enumerate() {
            out[j] = v[i];
        }
        out
    }
}

/// Enumerate the affine permutation group of a length-(2^m − 1) cyclic code:
/// all maps i ↦ (2^α·i + β) mod n for α ∈ {1..m}, β ∈ {1..n}, on 0-based
/// coordinates (β = n wraps to offset 0). Yields n·m permutations; the last
/// (α = m, β = n) is the identity.
pub fn pg_enumerate(n: usize) -> Result<Vec<Permutation>, CodeError> {
    if !(n + 1).is_power_of_two() || n < 3 {
        return Err(CodeError::NotCyclicLength { n });
    }
    let m = (n + 1).trailing_zeros() as usize;
    let mut perms = Vec::with_capacity(n * m);
    for alpha in 1..=m {
        for beta in 1..=n {
            let map = (0..n)
                .map(|i| (((1usize << alpha) % n * i) + beta) % n)
                .collect();
            perms.push(Permutation::new(map).expect("affine map on Z_n is a bijection"));
        }
    }
    Ok(perms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_non_bijection() {
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
        assert!(Permutation::new(vec![0, 3]).is_err());
    }

    #[test]
    fn permute_unpermute_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.random_range(1..40);
            let mut map: Vec<usize> = (0..n).collect();
            map.shuffle(&mut rng);
            let p = Permutation::new(map).unwrap();
            let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            assert_eq!(p.unpermute(&p.permute(&v)), v);
            let bits: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
            assert_eq!(p.unpermute(&p.permute(&bits)), bits);
        }
    }

    #[test]
    fn identity_is_noop() {
        let p = Permutation::identity(6);
        let v = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0];
        assert_eq!(p.permute(&v), v);
        assert!(p.is_identity());
    }

    #[test]
    fn compose_matches_sequential_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let n = rng.random_range(2..25);
            let mut m1: Vec<usize> = (0..n).collect();
            let mut m2: Vec<usize> = (0..n).collect();
            m1.shuffle(&mut rng);
            m2.shuffle(&mut rng);
            let (p, q) = (Permutation::new(m1).unwrap(), Permutation::new(m2).unwrap());
            let v: Vec<u32> = (0..n as u32).map(|_| rng.random()).collect();
            assert_eq!(p.compose(&q).permute(&v), p.permute(&q.permute(&v)));
        }
    }

    #[test]
    fn inverse_composes_to_identity() {
        let p = Permutation::new(vec![2, 0, 3, 1]).unwrap();
        assert!(p.compose(&p.inverse()).is_identity());
        assert!(p.inverse().compose(&p).is_identity());
    }

    #[test]
    fn pg_size_and_distinctness() {
        for (n, expect) in [(7, 21), (31, 155), (63, 378)] {
            let perms = pg_enumerate(n).unwrap();
            assert_eq!(perms.len(), expect);
            let mut maps: Vec<&[usize]> = perms.iter().map(|p| p.map()).collect();
            maps.sort();
            maps.dedup();
            assert_eq!(maps.len(), expect, "n={n}: permutations must be distinct");
        }
    }

    #[test]
    fn pg_rejects_bad_length() {
        assert!(pg_enumerate(6).is_err());
        assert!(pg_enumerate(32).is_err());
    }

    #[test]
    fn pg_last_entry_is_identity_n7() {
        // α=3, β=7: 8i+7 ≡ i (mod 7)
        let perms = pg_enumerate(7).unwrap();
        assert!(perms.last().unwrap().is_identity());
    }

    #[test]
    fn pg_direct_formula_n7_alpha1_beta1() {
        // i ↦ 2i+1 (mod 7): positions (1,3,5,0,2,4,6)
        let perms = pg_enumerate(7).unwrap();
        assert_eq!(perms[0].map(), &[1, 3, 5, 0, 2, 4, 6]);
    }
}
