//! Symmetric tensors over R^2.
//!
//! A symmetric rank-s tensor is stored as s+1 components; entry l is the
//! component whose multi-index contains l ones and s-l twos. The symmetric
//! (normalized) product is evaluated through the polynomial view: a tensor T
//! corresponds to the binary form T(x) = sum_l C(s,l) comps[l] x1^l x2^(s-l),
//! under which the symmetric tensor product is polynomial multiplication.

use crate::quad::binomial;
use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor2 {
    rank: usize,
    comps: Vec<f64>,
}

impl SymTensor2 {
    /// Zero tensor of the given rank.
    pub fn zero(rank: usize) -> Self {
        Self {
            rank,
            comps: vec![0.0; rank + 1],
        }
    }

    /// Rank-0 tensor (a scalar).
    pub fn scalar(v: f64) -> Self {
        Self {
            rank: 0,
            comps: vec![v],
        }
    }

    /// Build from components; comps[l] carries l ones, rank - l twos.
    pub fn from_comps(comps: Vec<f64>) -> Self {
        assert!(!comps.is_empty());
        Self {
            rank: comps.len() - 1,
            comps,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn comps(&self) -> &[f64] {
        &self.comps
    }

    /// Component with `ones` indices equal to 1.
    pub fn get(&self, ones: usize) -> f64 {
        self.comps[ones]
    }

    pub fn set(&mut self, ones: usize, v: f64) {
        self.comps[ones] = v;
    }

    /// The s-fold tensor power v^s of a vector, as a symmetric tensor.
    pub fn vec_power(x: f64, y: f64, s: usize) -> Self {
        let comps = (0..=s).map(|l| x.powi(l as i32) * y.powi((s - l) as i32)).collect();
        Self { rank: s, comps }
    }

    /// Q^(s/2), the (s/2)-th symmetric power of the metric tensor.
    ///
    /// In the polynomial view Q is x1^2 + x2^2, so Q^(s/2) has binomial
    /// coefficients C(s/2, l/2) on even monomials; components follow by
    /// dividing out C(s, l). For s = 2 this is (1, 0, 1) (the identity
    /// matrix); for s = 4 the (1,1,2,2) component is 1/3.
    pub fn q_power(s: usize) -> Self {
        assert!(s % 2 == 0, "Q^(s/2) requires even s (got {s})");
        let comps = (0..=s)
            .map(|l| {
                if l % 2 == 0 {
                    binomial(s / 2, l / 2) / binomial(s, l)
                } else {
                    0.0
                }
            })
            .collect();
        Self { rank: s, comps }
    }

    /// Normalized symmetric tensor product (polynomial multiplication in the
    /// binary-form view).
    pub fn sym_mul(&self, other: &Self) -> Self {
        let (r, s) = (self.rank, other.rank);
        let mut poly = vec![0.0; r + s + 1];
        for i in 0..=r {
            let pi = binomial(r, i) * self.comps[i];
            if pi == 0.0 {
                continue;
            }
            for j in 0..=s {
                poly[i + j] += pi * binomial(s, j) * other.comps[j];
            }
        }
        let comps = (0..=r + s).map(|l| poly[l] / binomial(r + s, l)).collect();
        Self {
            rank: r + s,
            comps,
        }
    }

    /// Image under the s-fold action of the rotation by `theta`:
    /// (rot T)(x) = T(rot^T x) in the polynomial view.
    pub fn rotate(&self, theta: f64) -> Self {
        let (c, sn) = (theta.cos(), theta.sin());
        let s = self.rank;
        // Substitute x1 -> c x1 + sn x2, x2 -> -sn x1 + c x2 into the form.
        let mut poly_out = vec![0.0; s + 1];
        for l in 0..=s {
            let coeff = binomial(s, l) * self.comps[l];
            if coeff == 0.0 {
                continue;
            }
            for a in 0..=l {
                let fa = binomial(l, a) * c.powi(a as i32) * sn.powi((l - a) as i32);
                for b in 0..=(s - l) {
                    let fb = binomial(s - l, b)
                        * (-sn).powi(b as i32)
                        * c.powi((s - l - b) as i32);
                    poly_out[a + b] += coeff * fa * fb;
                }
            }
        }
        let comps = (0..=s).map(|l| poly_out[l] / binomial(s, l)).collect();
        Self { rank: s, comps }
    }

    /// Trace over one index pair of a rank-2 tensor: T11 + T22.
    pub fn trace(&self) -> f64 {
        assert_eq!(self.rank, 2, "trace is defined for rank-2 tensors");
        self.comps[2] + self.comps[0]
    }

    /// Rank-2 tensor as [[T11, T12], [T12, T22]].
    pub fn as_matrix2(&self) -> [[f64; 2]; 2] {
        assert_eq!(self.rank, 2);
        [[self.comps[2], self.comps[1]], [self.comps[1], self.comps[0]]]
    }

    /// Rank-2 tensor from its matrix entries.
    pub fn from_matrix2(t11: f64, t12: f64, t22: f64) -> Self {
        Self {
            rank: 2,
            comps: vec![t22, t12, t11],
        }
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

impl Add<&SymTensor2> for &SymTensor2 {
    type Output = SymTensor2;
    fn add(self, rhs: &SymTensor2) -> SymTensor2 {
        assert_eq!(self.rank, rhs.rank, "rank mismatch in tensor addition");
        SymTensor2 {
            rank: self.rank,
            comps: self
                .comps
                .iter()
                .zip(&rhs.comps)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub<&SymTensor2> for &SymTensor2 {
    type Output = SymTensor2;
    fn sub(self, rhs: &SymTensor2) -> SymTensor2 {
        assert_eq!(self.rank, rhs.rank, "rank mismatch in tensor subtraction");
        SymTensor2 {
            rank: self.rank,
            comps: self
                .comps
                .iter()
                .zip(&rhs.comps)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul<f64> for &SymTensor2 {
    type Output = SymTensor2;
    fn mul(self, rhs: f64) -> SymTensor2 {
        SymTensor2 {
            rank: self.rank,
            comps: self.comps.iter().map(|a| a * rhs).collect(),
        }
    }
}
