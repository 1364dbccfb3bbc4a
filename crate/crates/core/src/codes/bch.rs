//! BCH code construction over GF(2^m) and the resulting systematic code.

use super::binmat::BinaryMatrix;
use super::gf2m::Gf2m;
use super::perm::Permutation;
use super::CodeError;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// A binary linear block code in systematic form: G = [I_k | P],
/// H = [Pᵀ | I_{n−k}], so G·Hᵀ = 0.
#[derive(Debug, Clone)]
pub struct LinearCode {
    pub n: usize,
    pub k: usize,
    pub g: BinaryMatrix,
    pub h: BinaryMatrix,
    pub label: String,
}

impl LinearCode {
    /// Build from a full-row-rank parity-check matrix already in systematic
    /// form H = [Pᵀ | I_{n−k}]; derives G = [I_k | P].
    pub fn from_systematic_h(h: BinaryMatrix, label: String) -> Result<Self, CodeError> {
        let n = h.cols();
        let r = h.rows();
        if r >= n {
            return Err(CodeError::RankDeficient { rank: h.rank(), rows: r });
        }
        let k = n - r;
        for i in 0..r {
            for j in 0..r {
                if h.get(i, k + j) != (i == j) {
                    return Err(CodeError::NotSystematic);
                }
            }
        }
        let mut g = BinaryMatrix::zeros(k, n);
        for i in 0..k {
            g.set(i, i, true);
            for j in 0..r {
                g.set(i, k + j, h.get(j, i));
            }
        }
        Ok(Self { n, k, g, h, label })
    }

    /// Encode a k-bit message: c = m·G. With systematic G the first k bits
    /// of c equal m.
    pub fn encode(&self, msg: &[u8]) -> Vec<u8> {
        assert_eq!(msg.len(), self.k, "message length must equal k");
        self.g.vec_mul(msg)
    }

    /// Syndrome s = H·ĉ mod 2.
    pub fn syndrome(&self, c_hat: &[u8]) -> Vec<u8> {
        self.h.mul_vec(c_hat)
    }

    /// True iff H·ĉ = 0.
    pub fn is_codeword(&self, c_hat: &[u8]) -> bool {
        self.syndrome(c_hat).iter().all(|&b| b == 0)
    }

    /// Check that permuting codeword coordinates by `p` lands back in the
    /// code. Exact (full codeword enumeration) when 2^k ≤ 2^16, otherwise
    /// sampled over `trials` random codewords.
    pub fn is_automorphism(&self, p: &Permutation, trials: usize) -> bool {
        if p.len() != self.n {
            return false;
        }
        if self.k <= 16 {
            for w in 0u32..1 << self.k {
                let msg: Vec<u8> = (0..self.k).map(|i| (w >> i & 1) as u8).collect();
                if !self.is_codeword(&p.permute(&self.encode(&msg))) {
                    return false;
                }
            }
            true
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0x6175746f);
            (0..trials).all(|_| {
                let msg: Vec<u8> = (0..self.k).map(|_| rng.random_range(0..2)).collect();
                self.is_codeword(&p.permute(&self.encode(&msg)))
            })
        }
    }

    /// Code rate k/n.
    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }
}

/// Hard decision: bit 1 where y_i < 0, else 0 (BPSK maps 0→+1, 1→−1).
pub fn hard_decision(y: &[f64]) -> Vec<u8> {
    y.iter().map(|&v| (v < 0.0) as u8).collect()
}

/// Product of two GF(2) polynomials given as 0/1 coefficient vectors
/// in ascending order.
fn poly_mul_gf2(a: &[u8], b: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai != 0 {
            for (j, &bj) in b.iter().enumerate() {
                out[i + j] ^= bj;
            }
        }
    }
    out
}

/// Cyclotomic coset of `j` mod n under doubling: {j, 2j, 4j, ...}.
fn cyclotomic_coset(j: usize, n: usize) -> Vec<usize> {
    let mut coset = vec![j % n];
    let mut next = (2 * j) % n;
    while next != coset[0] {
        coset.push(next);
        next = (2 * next) % n;
    }
    coset
}

/// Minimal polynomial of α^j over GF(2): ∏_{i ∈ coset(j)} (x + α^i).
/// The product collapses into the base field, so the result is 0/1.
fn minimal_poly(field: &Gf2m, j: usize) -> Vec<u8> {
    let n = field.order() as usize;
    let mut poly: Vec<u32> = vec![1]; // constant 1
    for i in cyclotomic_coset(j, n) {
        let root = field.alpha_pow(i as u64);
        // multiply by (x + root)
        let mut next = vec![0u32; poly.len() + 1];
        for (d, &c) in poly.iter().enumerate() {
            next[d + 1] ^= c;
            next[d] ^= field.mul(c, root);
        }
        poly = next;
    }
    poly.iter()
        .map(|&c| {
            debug_assert!(c <= 1, "minimal polynomial must have GF(2) coefficients");
            c as u8
        })
        .collect()
}

/// Generator polynomial for designed error count t:
/// lcm of the minimal polynomials of α, α², …, α^(2t).
fn generator_poly(field: &Gf2m, t: usize) -> Vec<u8> {
    let n = field.order() as usize;
    let mut covered = vec![false; n];
    let mut g = vec![1u8];
    for j in 1..=2 * t {
        let j = j % n;
        if covered[j] {
            continue;
        }
        for i in cyclotomic_coset(j, n) {
            covered[i] = true;
        }
        g = poly_mul_gf2(&g, &minimal_poly(field, j));
    }
    g
}

/// Construct the systematic BCH code of length n = 2^m − 1 and dimension k.
///
/// Scans the designed error count t upward, keeping the largest t whose
/// generator degree is exactly n − k. The cyclic generator matrix (rows
/// x^i·g(x)) has a unit-lower-triangular leading k×k block, so row
/// reduction alone yields G = [I_k | P] with the codeword set unchanged —
/// which is what lets the code's permutation group act on the systematic
/// coordinates directly.
pub fn bch_build(n: usize, k: usize, field: &Gf2m) -> Result<LinearCode, CodeError> {
    if field.order() as usize != n {
        return Err(CodeError::NotCyclicLength { n });
    }
    let mut best: Option<(usize, Vec<u8>)> = None;
    for t in 1..=n / 2 {
        let g = generator_poly(field, t);
        let deg = g.len() - 1;
        if deg == n - k {
            best = Some((t, g));
        } else if deg > n - k {
            break;
        }
    }
    let Some((t, gen)) = best else {
        return Err(CodeError::UnsupportedCode { n, k });
    };

    // cyclic generator matrix: row i = coefficients of x^i · g(x)
    let mut rows = vec![vec![0u8; n]; k];
    for (i, row) in rows.iter_mut().enumerate() {
        for (d, &c) in gen.iter().enumerate() {
            row[i + d] = c;
        }
    }
    // Gauss-Jordan on the first k columns; pivots always on the diagonal
    // because g has a nonzero constant term.
    for col in 0..k {
        debug_assert_eq!(rows[col][col], 1);
        for r in 0..k {
            if r != col && rows[r][col] == 1 {
                let (pivot, rest) = {
                    let (a, b) = rows.split_at_mut(r.max(col));
                    if r < col {
                        (&b[0], &mut a[r])
                    } else {
                        (&a[col], &mut b[0])
                    }
                };
                for (x, &p) in rest.iter_mut().zip(pivot.iter()) {
                    *x ^= p;
                }
            }
        }
    }
    let g_mat = BinaryMatrix::from_rows(&rows);

    let mut h = BinaryMatrix::zeros(n - k, n);
    for i in 0..n - k {
        h.set(i, k + i, true);
        for j in 0..k {
            h.set(i, j, g_mat.get(j, k + i));
        }
    }

    let label = format!("BCH({n},{k}) t={t} poly=0x{:X}", field.primitive_poly());
    Ok(LinearCode { n, k, g: g_mat, h, label })
}

/// Primitive polynomial pinned for each supported extension degree.
pub fn pinned_primitive_poly(m: u32) -> Result<u64, CodeError> {
    match m {
        3 => Ok(0b1011),           // x³+x+1
        5 => Ok(0b100101),         // x⁵+x²+1
        6 => Ok(0b1000011),        // x⁶+x+1
        7 => Ok(0b10001001),       // x⁷+x³+1
        8 => Ok(0b100011101),      // x⁸+x⁴+x³+x²+1
        _ => Err(CodeError::UnsupportedField { m }),
    }
}

/// Convenience constructor: BCH(n, k) with the pinned primitive polynomial.
pub fn bch(n: usize, k: usize) -> Result<LinearCode, CodeError> {
    if !(n + 1).is_power_of_two() || n < 7 {
        return Err(CodeError::NotCyclicLength { n });
    }
    let m = (n + 1).trailing_zeros();
    let field = Gf2m::new(m, pinned_primitive_poly(m)?)?;
    bch_build(n, k, &field)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_poly_7_4_is_defining_poly() {
        // coset of 1 mod 7 is {1,2,4}; minimal poly of α is x³+x+1
        let f = Gf2m::new(3, 0b1011).unwrap();
        assert_eq!(cyclotomic_coset(1, 7), vec![1, 2, 4]);
        assert_eq!(minimal_poly(&f, 1), vec![1, 1, 0, 1]);
    }

    #[test]
    fn bch_7_4_generator() {
        let code = bch(7, 4).unwrap();
        assert_eq!((code.n, code.k), (7, 4));
        // g(x) = x³+x+1 → degree 3, chosen at t=1
        assert!(code.label.contains("t=1"));
    }

    #[test]
    fn bch_31_16_degree_and_t() {
        let f = Gf2m::new(5, 0b100101).unwrap();
        let g = generator_poly(&f, 3);
        assert_eq!(g.len() - 1, 15);
        let code = bch(31, 16).unwrap();
        assert!(code.label.contains("t=3"));
    }

    #[test]
    fn generator_roots_at_designed_powers() {
        // g(α^j) = 0 for j = 1..2t — the defining property, checked by
        // direct evaluation in the field rather than via the coset algebra
        let f = Gf2m::new(6, 0b1000011).unwrap();
        for (k, t) in [(36, 5), (45, 3)] {
            let g = generator_poly(&f, t);
            assert_eq!(g.len() - 1, 63 - k);
            for j in 1..=2 * t as u64 {
                let mut acc = 0u32;
                for (d, &c) in g.iter().enumerate() {
                    if c == 1 {
                        acc = f.add(acc, f.alpha_pow(d as u64 * j));
                    }
                }
                assert_eq!(acc, 0, "g(α^{j}) must vanish");
            }
        }
    }

    #[test]
    fn g_times_h_transpose_is_zero() {
        for (n, k) in [(7, 4), (31, 16), (63, 36), (63, 45), (127, 64)] {
            let code = bch(n, k).unwrap();
            let prod = code.g.mul_transpose(&code.h);
            assert_eq!(prod.popcount(), 0, "G·Hᵀ ≠ 0 for ({n},{k})");
            assert_eq!(code.g.rank(), k);
            assert_eq!(code.h.rank(), n - k);
        }
    }

    #[test]
    fn systematic_blocks() {
        let code = bch(31, 16).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                assert_eq!(code.g.get(i, j), i == j);
            }
        }
        for i in 0..15 {
            for j in 0..15 {
                assert_eq!(code.h.get(i, 16 + j), i == j);
            }
        }
    }

    #[test]
    fn encode_zero_and_systematic_prefix() {
        let code = bch(31, 16).unwrap();
        assert_eq!(code.encode(&vec![0; 16]), vec![0; 31]);
        let msg: Vec<u8> = (0..16).map(|i| (i % 3 == 0) as u8).collect();
        let c = code.encode(&msg);
        assert_eq!(&c[..16], &msg[..]);
        assert!(code.is_codeword(&c));
    }

    #[test]
    fn all_messages_distinct_codewords_7_4() {
        let code = bch(7, 4).unwrap();
        let mut words: Vec<Vec<u8>> = (0u32..16)
            .map(|w| code.encode(&(0..4).map(|i| (w >> i & 1) as u8).collect::<Vec<_>>()))
            .collect();
        for w in &words {
            assert!(code.is_codeword(w));
        }
        words.sort();
        words.dedup();
        assert_eq!(words.len(), 16);
    }

    #[test]
    fn syndrome_of_single_flip_is_h_column() {
        let code = bch(31, 16).unwrap();
        let c = code.encode(&vec![1; 16]);
        for j in 0..31 {
            let mut y = c.clone();
            y[j] ^= 1;
            let s = code.syndrome(&y);
            let col: Vec<u8> = (0..15).map(|i| code.h.get(i, j) as u8).collect();
            assert_eq!(s, col);
        }
    }

    #[test]
    fn syndrome_matches_naive_dot() {
        let code = bch(63, 45).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let y: Vec<u8> = (0..63).map(|_| rng.random_range(0..2)).collect();
            let naive: Vec<u8> = (0..18)
                .map(|i| (0..63).map(|j| code.h.get(i, j) as u8 & y[j]).fold(0, |a, b| a ^ b))
                .collect();
            assert_eq!(code.syndrome(&y), naive);
        }
    }

    #[test]
    fn hard_decision_rule() {
        assert_eq!(hard_decision(&[0.3, -0.1, 2.0]), vec![0, 1, 0]);
        assert_eq!(hard_decision(&[0.0]), vec![0]);
    }

    #[test]
    fn hard_decision_recovers_noiseless_bpsk() {
        let code = bch(7, 4).unwrap();
        let c = code.encode(&[1, 0, 1, 1]);
        let y: Vec<f64> = c.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(hard_decision(&y), c);
    }

    #[test]
    fn unsupported_dimension_rejected() {
        assert!(bch(31, 17).is_err());
        assert!(bch(30, 16).is_err());
    }

    #[test]
    fn coordinate_swap_is_not_an_automorphism() {
        let code = bch(31, 16).unwrap();
        let mut map: Vec<usize> = (0..31).collect();
        map.swap(0, 1);
        let p = Permutation::new(map).unwrap();
        assert!(!code.is_automorphism(&p, 64));
    }

    #[test]
    fn identity_is_automorphism() {
        let code = bch(31, 16).unwrap();
        assert!(code.is_automorphism(&Permutation::identity(31), 8));
    }
}
