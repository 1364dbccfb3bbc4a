//! Binary extension field GF(2^m) arithmetic via log/antilog tables.

use super::CodeError;

/// The field GF(2^m) generated by a primitive polynomial.
///
/// Elements are bitmasks over the polynomial basis {1, α, ..., α^(m-1)}.
/// Multiplication goes through log/antilog tables, so the construction cost
/// is O(2^m) and products are O(1).
#[derive(Debug, Clone)]
pub struct Gf2m {
    m: u32,
    primitive_poly: u64,
    /// antilog[i] = α^i for i in 0..2^m-1.
    antilog: Vec<u32>,
    /// log[x] = i such that α^i = x, for nonzero x; log[0] is unused.
    log: Vec<u32>,
}

impl Gf2m {
    /// Build the field tables for GF(2^m) under `primitive_poly`.
    ///
    /// `primitive_poly` is the bitmask of the defining polynomial, e.g.
    /// x^3 + x + 1 is `0b1011`. Primitivity is validated by checking that
    /// the powers of α only repeat after 2^m - 1 steps; a reducible or
    /// merely irreducible (non-primitive) polynomial is rejected.
    pub fn new(m: u32, primitive_poly: u64) -> Result<Self, CodeError> {
        if m == 0 || m > 16 {
            return Err(CodeError::UnsupportedField { m });
        }
        if primitive_poly >> m != 1 {
            return Err(CodeError::NonPrimitivePoly { m, poly: primitive_poly });
        }

        let order = (1u32 << m) - 1;
        let mut antilog = vec![0u32; order as usize];
        let mut log = vec![0u32; 1 << m];

        let mut x = 1u32; // α^0
        for i in 0..order {
            if i > 0 && x == 1 {
                // powers repeated before covering the full group
                return Err(CodeError::NonPrimitivePoly { m, poly: primitive_poly });
            }
            if log[x as usize] != 0 && x != 1 {
                return Err(CodeError::NonPrimitivePoly { m, poly: primitive_poly });
            }
            antilog[i as usize] = x;
            log[x as usize] = i;
            // multiply by α, reduce by the defining polynomial
            x <<= 1;
            if x >> m != 0 {
                x ^= primitive_poly as u32;
            }
        }
        if x != 1 {
            return Err(CodeError::NonPrimitivePoly { m, poly: primitive_poly });
        }

        Ok(Self { m, primitive_poly, antilog, log })
    }

    /// Extension degree m.
    pub fn m(&self) -> u32 {
        self.m
    }

    /// Defining polynomial bitmask.
    pub fn primitive_poly(&self) -> u64 {
        self.primitive_poly
    }

    /// Multiplicative group order, 2^m - 1.
    pub fn order(&self) -> u32 {
        (1 << self.m) - 1
    }

    /// α^i, with i reduced mod 2^m - 1.
    pub fn alpha_pow(&self, i: u64) -> u32 {
        self.antilog[(i % self.order() as u64) as usize]
    }

    /// Product of two field elements.
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        if a == 0 || b == 0 {
            return 0;
        }
        let i = self.log[a as usize] as u64 + self.log[b as usize] as u64;
        self.antilog[(i % self.order() as u64) as usize]
    }

    /// Sum (XOR) of two field elements.
    pub fn add(&self, a: u32, b: u32) -> u32 {
        a ^ b
    }
}
