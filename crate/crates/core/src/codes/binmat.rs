//! Dense binary matrices with packed-u64 rows; all arithmetic mod 2.

use super::CodeError;

/// Row-major binary matrix, each row packed into u64 words (LSB-first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl BinaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(64).max(1);
        Self { rows, cols, words_per_row, bits: vec![0; rows * words_per_row] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Build from per-row bit slices (`0`/`1` entries).
    pub fn from_rows(rows: &[Vec<u8>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &b) in row.iter().enumerate() {
                if b != 0 {
                    m.set(i, j, true);
                }
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.rows && c < self.cols);
        self.bits[r * self.words_per_row + c / 64] >> (c % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        debug_assert!(r < self.rows && c < self.cols);
        let w = &mut self.bits[r * self.words_per_row + c / 64];
        if v {
            *w |= 1 << (c % 64);
        } else {
            *w &= !(1 << (c % 64));
        }
    }

    pub fn row_as_bits(&self, r: usize) -> Vec<u8> {
        (0..self.cols).map(|c| self.get(r, c) as u8).collect()
    }

    /// Number of ones in the matrix.
    pub fn popcount(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn xor_row_into(&mut self, src: usize, dst: usize) {
        let (s, d) = (src * self.words_per_row, dst * self.words_per_row);
        for w in 0..self.words_per_row {
            let v = self.bits[s + w];
            self.bits[d + w] ^= v;
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for w in 0..self.words_per_row {
            self.bits.swap(a * self.words_per_row + w, b * self.words_per_row + w);
        }
    }

    pub fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for r in 0..self.rows {
            let (va, vb) = (self.get(r, a), self.get(r, b));
            self.set(r, a, vb);
            self.set(r, b, va);
        }
    }

    /// Rank over GF(2) (non-destructive).
    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        let mut rank = 0;
        for c in 0..m.cols {
            if rank == m.rows {
                break;
            }
            if let Some(p) = (rank..m.rows).find(|&r| m.get(r, c)) {
                m.swap_rows(rank, p);
                for r in 0..m.rows {
                    if r != rank && m.get(r, c) {
                        m.xor_row_into(rank, r);
                    }
                }
                rank += 1;
            }
        }
        rank
    }

    /// self · otherᵀ over GF(2). Requires matching column counts.
    pub fn mul_transpose(&self, other: &BinaryMatrix) -> BinaryMatrix {
        assert_eq!(self.cols, other.cols, "inner dimensions must match");
        let mut out = BinaryMatrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            for j in 0..other.rows {
                let mut acc = 0u64;
                let (a, b) = (i * self.words_per_row, j * other.words_per_row);
                for w in 0..self.words_per_row {
                    acc ^= self.bits[a + w] & other.bits[b + w];
                }
                out.set(i, j, acc.count_ones() % 2 == 1);
            }
        }
        out
    }

    /// self · v over GF(2), v given as 0/1 bytes of length `cols`.
    pub fn mul_vec(&self, v: &[u8]) -> Vec<u8> {
        assert_eq!(v.len(), self.cols, "vector length must equal cols");
        let mut packed = vec![0u64; self.words_per_row];
        for (j, &b) in v.iter().enumerate() {
            if b != 0 {
                packed[j / 64] |= 1 << (j % 64);
            }
        }
        (0..self.rows)
            .map(|i| {
                let base = i * self.words_per_row;
                let mut acc = 0u64;
                for w in 0..self.words_per_row {
                    acc ^= self.bits[base + w] & packed[w];
                }
                (acc.count_ones() % 2) as u8
            })
            .collect()
    }

    /// vᵀ · self over GF(2), v given as 0/1 bytes of length `rows`.
    pub fn vec_mul(&self, v: &[u8]) -> Vec<u8> {
        assert_eq!(v.len(), self.rows, "vector length must equal rows");
        let mut out = vec![0u8; self.cols];
        for (i, &b) in v.iter().enumerate() {
            if b != 0 {
                for (j, o) in out.iter_mut().enumerate() {
                    *o ^= self.get(i, j) as u8;
                }
            }
        }
        out
    }

    /// Gauss-Jordan elimination placing the identity in the LAST `rows`
    /// columns. Returns the reduced matrix and the column permutation applied
    /// to reach it (`perm[i]` = original index of output column i; identity
    /// when no swaps were needed).
    pub fn systematic_form(&self) -> Result<(BinaryMatrix, Vec<usize>), CodeError> {
        let (r, n) = (self.rows, self.cols);
        if r > n {
            return Err(CodeError::RankDeficient { rank: self.rank(), rows: r });
        }
        let mut m = self.clone();
        let mut colperm: Vec<usize> = (0..n).collect();
        // pivot row i targets column n - r + i
        for i in 0..r {
            let target = n - r + i;
            // prefer a pivot already in the target column, else pull one in
            // from the leftmost column that has a 1 below the finished rows
            let pivot = (i..r).find(|&row| m.get(row, target)).or_else(|| {
                (0..n - r + i).find_map(|c| {
                    (i..r).find(|&row| m.get(row, c)).map(|row| {
                        m.swap_cols(c, target);
                        colperm.swap(c, target);
                        row
                    })
                })
            });
            let Some(pivot) = pivot else {
                return Err(CodeError::RankDeficient { rank: m.rank(), rows: r });
            };
            m.swap_rows(i, pivot);
            for row in 0..r {
                if row != i && m.get(row, target) {
                    m.xor_row_into(i, row);
                }
            }
        }
        Ok((m, colperm))
    }
}

impl std::fmt::Display for BinaryMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for r in 0..self.rows {
            for c in 0..self.cols {
                write!(f, "{}", self.get(r, c) as u8)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> BinaryMatrix {
        let rows: Vec<Vec<u8>> =
            (0..r).map(|_| (0..c).map(|_| rng.random_range(0..2u8)).collect()).collect();
        BinaryMatrix::from_rows(&rows)
    }

    #[test]
    fn get_set_roundtrip_across_word_boundary() {
        let mut m = BinaryMatrix::zeros(2, 130);
        m.set(1, 63, true);
        m.set(1, 64, true);
        m.set(1, 129, true);
        assert!(m.get(1, 63) && m.get(1, 64) && m.get(1, 129));
        assert!(!m.get(0, 64));
        m.set(1, 64, false);
        assert!(!m.get(1, 64));
    }

    #[test]
    fn rank_of_identity_and_duplicates() {
        assert_eq!(BinaryMatrix::identity(5).rank(), 5);
        let m = BinaryMatrix::from_rows(&[vec![1, 0, 1], vec![1, 0, 1], vec![0, 1, 0]]);
        assert_eq!(m.rank(), 2);
    }

    #[test]
    fn mul_vec_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let (r, c) = (rng.random_range(1..10), rng.random_range(1..90));
            let m = random_matrix(&mut rng, r, c);
            let v: Vec<u8> = (0..c).map(|_| rng.random_range(0..2u8)).collect();
            let naive: Vec<u8> = (0..r)
                .map(|i| (0..c).map(|j| m.get(i, j) as u8 & v[j]).fold(0, |a, b| a ^ b))
                .collect();
            assert_eq!(m.mul_vec(&v), naive);
        }
    }

    #[test]
    fn mul_transpose_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 4, 70);
        let b = random_matrix(&mut rng, 6, 70);
        let prod = a.mul_transpose(&b);
        for i in 0..4 {
            for j in 0..6 {
                let dot =
                    (0..70).map(|t| (a.get(i, t) && b.get(j, t)) as u8).fold(0, |x, y| x ^ y);
                assert_eq!(prod.get(i, j) as u8, dot);
            }
        }
    }

    #[test]
    fn systematic_form_right_block_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut found = 0;
        while found < 10 {
            let m = random_matrix(&mut rng, 3, 6);
            if m.rank() < 3 {
                continue;
            }
            found += 1;
            let (sys, _) = m.systematic_form().unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(sys.get(i, 3 + j), i == j);
                }
            }
        }
    }

    #[test]
    fn systematic_form_identity_perm_when_already_systematic() {
        // H = [Pᵀ | I₂]
        let h = BinaryMatrix::from_rows(&[vec![1, 0, 1, 1, 0], vec![0, 1, 1, 0, 1]]);
        let (sys, perm) = h.systematic_form().unwrap();
        assert_eq!(perm, vec![0, 1, 2, 3, 4]);
        assert_eq!(sys, h);
    }

    #[test]
    fn systematic_form_rejects_rank_deficiency() {
        let m = BinaryMatrix::from_rows(&[vec![1, 1, 0, 0], vec![1, 1, 0, 0]]);
        assert!(m.systematic_form().is_err());
    }

    #[test]
    fn systematic_form_preserves_row_space_up_to_column_perm() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let m = random_matrix(&mut rng, 3, 7);
            if m.rank() < 3 {
                continue;
            }
            let (sys, perm) = m.systematic_form().unwrap();
            // enumerate the row spaces; permuting columns of the original by
            // `perm` must give exactly the row space of `sys`
            let span = |mat: &BinaryMatrix, colmap: Option<&[usize]>| {
                let mut set: Vec<Vec<u8>> = Vec::new();
                for mask in 0u32..8 {
                    let sel: Vec<u8> = (0..3).map(|i| (mask >> i & 1) as u8).collect();
                    let row = mat.vec_mul(&sel);
                    let row = match colmap {
                        Some(p) => (0..7).map(|j| row[p[j]]).collect(),
                        None => row,
                    };
                    set.push(row);
                }
                set.sort();
                set
            };
            assert_eq!(span(&m, Some(&perm)), span(&sys, None));
        }
    }
}
