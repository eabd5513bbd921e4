use alloc::vec::Vec;

use crate::channel::ChannelMatrix;
use crate::{Complex64, Error, Result};

/// Inverts a dense n x n complex matrix (row-major) by Gauss-Jordan
/// elimination with partial pivoting.
pub(crate) fn invert(n: usize, a: &[Complex64]) -> Result<Vec<Complex64>> {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let mut m = a.to_vec();
    let mut inv = alloc::vec![zero; n * n];
    for i in 0..n {
        inv[i * n + i] = one;
    }
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale.is_nan() || scale <= 0.0 {
        return Err(Error::DegenerateChannel);
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| m[p * n + col].norm().total_cmp(&m[q * n + col].norm()))
            .unwrap();
        if m[pivot * n + col].norm() <= 1e-12 * scale {
            return Err(Error::DegenerateChannel);
        }
        if pivot != col {
            for j in 0..n {
                m.swap(pivot * n + j, col * n + j);
                inv.swap(pivot * n + j, col * n + j);
            }
        }
        let d = one / m[col * n + col];
        for j in 0..n {
            m[col * n + j] *= d;
            inv[col * n + j] *= d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col];
            if f == zero {
                continue;
            }
            for j in 0..n {
                let mv = m[col * n + j];
                let iv = inv[col * n + j];
                m[r * n + j] -= f * mv;
                inv[r * n + j] -= f * iv;
            }
        }
    }
    Ok(inv)
}

/// Right pseudo-inverse `H^H (H H^H)^{-1}`, returned as a B x K row-major matrix.
pub(crate) fn right_pseudo_inverse(h: &ChannelMatrix) -> Result<Vec<Complex64>> {
    let k = h.users();
    let b = h.antennas();
    let mut gram = alloc::vec![Complex64::new(0.0, 0.0); k * k];
    for i in 0..k {
        for j in 0..k {
            gram[i * k + j] = (0..b).map(|t| h.get(i, t) * h.get(j, t).conj()).sum();
        }
    }
    let gram_inv = invert(k, &gram)?;
    let mut p = alloc::vec![Complex64::new(0.0, 0.0); b * k];
    for t in 0..b {
        for j in 0..k {
            p[t * k + j] = (0..k)
                .map(|i| h.get(i, t).conj() * gram_inv[i * k + j])
                .sum();
        }
    }
    Ok(p)
}
