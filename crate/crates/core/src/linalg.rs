//! Fixed-size phase-space algebra. Phase-space vectors are ordered
//! (τ, x, y, p_τ, p_x, p_y).

use nalgebra::{SMatrix, SVector};

pub type Vector6 = SVector<f64, 6>;
pub type Matrix6 = SMatrix<f64, 6, 6>;
pub type Matrix6x3 = SMatrix<f64, 6, 3>;
pub type Matrix3x6 = SMatrix<f64, 3, 6>;
pub type Matrix6x2 = SMatrix<f64, 6, 2>;
pub type Matrix3 = SMatrix<f64, 3, 3>;

/// Symplectic unit J = [[0, I₃], [−I₃, 0]].
pub fn symplectic_j() -> Matrix6 {
    let mut j = Matrix6::zeros();
    for i in 0..3 {
        j[(i, i + 3)] = 1.0;
        j[(i + 3, i)] = -1.0;
    }
    j
}

/// J·M without forming J.
pub fn j_mul(m: &Matrix6) -> Matrix6 {
    let mut out = Matrix6::zeros();
    for c in 0..6 {
        for i in 0..3 {
            out[(i, c)] = m[(i + 3, c)];
            out[(i + 3, c)] = -m[(i, c)];
        }
    }
    out
}

pub fn j_mul_vec(v: &Vector6) -> Vector6 {
    Vector6::new(v[3], v[4], v[5], -v[0], -v[1], -v[2])
}

/// Dense 6×6×6 tensor, row-major in (i, j, k).
#[derive(Clone, PartialEq)]
pub struct Tensor3 {
    data: [f64; 216],
}

impl std::fmt::Debug for Tensor3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tensor3(max |·| = {:e})", self.max_abs())
    }
}

impl Default for Tensor3 {
    fn default() -> Self {
        Self::zeros()
    }
}

impl Tensor3 {
    pub fn zeros() -> Self {
        Self { data: [0.0; 216] }
    }

    pub fn from_slice(s: &[f64]) -> Self {
        let mut data = [0.0; 216];
        data.copy_from_slice(s);
        Self { data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[36 * i + 6 * j + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[36 * i + 6 * j + k] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Contraction over the middle slot: (𝔓{u, ·})_{ik} = Σₙ 𝔓_{ink} uₙ.
    pub fn apply(&self, u: &Vector6) -> Matrix6 {
        let mut out = Matrix6::zeros();
        for i in 0..6 {
            for n in 0..6 {
                let un = u[n];
                if un == 0.0 {
                    continue;
                }
                for k in 0..6 {
                    out[(i, k)] += self.get(i, n, k) * un;
                }
            }
        }
        out
    }

    /// The (j, k) matrix slice at fixed first index.
    pub fn slice(&self, i: usize) -> Matrix6 {
        Matrix6::from_fn(|j, k| self.get(i, j, k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j_is_symplectic_unit() {
        let j = symplectic_j();
        assert_eq!(j * j, -Matrix6::identity());
        assert_eq!(j.transpose(), -j);
        let m = Matrix6::from_fn(|i, k| (i * 7 + k * 3) as f64 - 10.0);
        assert_eq!(j_mul(&m), j * m);
        let v = Vector6::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0);
        assert_eq!(j_mul_vec(&v), j * v);
    }

    #[test]
    fn tensor_contraction() {
        let mut t = Tensor3::zeros();
        t.set(1, 2, 3, 2.0);
        t.set(1, 4, 3, -1.0);
        let mut u = Vector6::zeros();
        u[2] = 3.0;
        u[4] = 1.0;
        let m = t.apply(&u);
        assert_eq!(m[(1, 3)], 5.0);
        assert_eq!(m.iter().filter(|v| **v != 0.0).count(), 1);
    }
}
