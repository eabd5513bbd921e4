//! PSK alphabets, Gray labelling and the bit-level partitions used by the
//! max-log demappers.
//!
//! Symbol `i` of an `order`-PSK alphabet sits at angle `(2i + 3) * pi / order`
//! (0-based), so every symbol angle is an odd multiple of `pi / order`. The
//! coordinates are built from the first quadrant by exact quarter-turn
//! rotations, which keeps rotations by `pi/2` bit-exact on the table values.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::{Complex64, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PskAlphabet {
    order: usize,
    bits_per_symbol: usize,
    symbols: Vec<Complex64>,
}

impl PskAlphabet {
    /// Builds the `order`-PSK alphabet. `order` must be a power of two in
    /// `2..=64`.
    pub fn new(order: usize) -> Result<Self> {
        if !(2..=64).contains(&order) || !order.is_power_of_two() {
            return Err(Error::InvalidOrder(order));
        }
        // Counterclockwise position j (angle (2j+1)pi/order) holds symbol
        // index (j + order - 1) % order.
        let by_position = ring_points(order);
        let symbols = (0..order).map(|i| by_position[(i + 1) % order]).collect();
        Ok(Self {
            order,
            bits_per_symbol: order.trailing_zeros() as usize,
            symbols,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }

    #[inline]
    pub fn symbol(&self, index: usize) -> Complex64 {
        self.symbols[index]
    }

    /// Average symbol energy. Exactly one for PSK.
    pub fn symbol_power(&self) -> f64 {
        1.0
    }

    /// Index of the symbol obtained by rotating symbol `index` by
    /// `m * 2pi / order`.
    #[inline]
    pub fn rotate_index(&self, index: usize, m: usize) -> usize {
        (index + m) % self.order
    }

    /// Index of the alphabet element closest in angle to `u`, i.e. the one
    /// maximising `Re(conj(x) u)`. Ties go to the lower index.
    pub fn nearest_by_angle(&self, u: Complex64) -> usize {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, x) in self.symbols.iter().enumerate() {
            let score = x.re * u.re + x.im * u.im;
            if score > best_score {
                best_score = score;
                best = i;
            }
        }
        best
    }
}

/// Unit-circle points at angles `(2j+1) pi / order`, `j = 0..order`.
fn ring_points(order: usize) -> Vec<Complex64> {
    if order == 2 {
        return alloc::vec![Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0)];
    }
    let per_quadrant = order / 4;
    let mut quadrant = alloc::vec![Complex64::new(0.0, 0.0); per_quadrant];
    if per_quadrant == 1 {
        quadrant[0] = Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2);
    } else {
        for j in 0..per_quadrant / 2 {
            let angle = (2 * j + 1) as f64 * PI / order as f64;
            let (s, c) = angle.sin_cos();
            quadrant[j] = Complex64::new(c, s);
            quadrant[per_quadrant - 1 - j] = Complex64::new(s, c);
        }
    }
    let mut points = Vec::with_capacity(order);
    for r in 0..4 {
        for p in &quadrant {
            let mut z = *p;
            for _ in 0..r {
                z = Complex64::new(-z.im, z.re);
            }
            points.push(z);
        }
    }
    points
}

/// Reflected-binary Gray labelling, assigned counterclockwise from the
/// symbol with the smallest non-negative angle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayMap {
    word_to_index: Vec<usize>,
    index_to_word: Vec<usize>,
    bits_per_symbol: usize,
}

impl GrayMap {
    pub fn new(alphabet: &PskAlphabet) -> Self {
        let order = alphabet.order();
        let mut word_to_index = alloc::vec![0; order];
        let mut index_to_word = alloc::vec![0; order];
        for position in 0..order {
            let word = position ^ (position >> 1);
            let index = (position + order - 1) % order;
            word_to_index[word] = index;
            index_to_word[index] = word;
        }
        Self {
            word_to_index,
            index_to_word,
            bits_per_symbol: alphabet.bits_per_symbol(),
        }
    }

    #[inline]
    pub fn index_of(&self, word: usize) -> usize {
        self.word_to_index[word]
    }

    #[inline]
    pub fn word_of(&self, index: usize) -> usize {
        self.index_to_word[index]
    }

    /// Bit `position` (0 = most significant) of the word labelling `index`.
    #[inline]
    pub fn bit(&self, index: usize, position: usize) -> u8 {
        ((self.index_to_word[index] >> (self.bits_per_symbol - 1 - position)) & 1) as u8
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    /// Maps MSB-first groups of `bits_per_symbol` bits to symbol indices.
    pub fn modulate(&self, bits: &[u8]) -> Result<Vec<usize>> {
        let m = self.bits_per_symbol;
        if !bits.len().is_multiple_of(m) {
            return Err(Error::BitLength {
                len: bits.len(),
                bits_per_symbol: m,
            });
        }
        Ok(bits
            .chunks_exact(m)
            .map(|group| {
                let word = group
                    .iter()
                    .fold(0usize, |w, &b| (w << 1) | (b & 1) as usize);
                self.word_to_index[word]
            })
            .collect())
    }

    /// Appends the Gray word of every symbol index, MSB first.
    pub fn demodulate_into(&self, indices: &[usize], out: &mut Vec<u8>) {
        for &index in indices {
            for position in 0..self.bits_per_symbol {
                out.push(self.bit(index, position));
            }
        }
    }
}

/// Per bit position, the symbol indices whose Gray word carries a 0 or a 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitPartition {
    zeros: Vec<Vec<usize>>,
    ones: Vec<Vec<usize>>,
}

impl BitPartition {
    pub fn new(alphabet: &PskAlphabet, gray: &GrayMap) -> Self {
        let m = alphabet.bits_per_symbol();
        let mut zeros = alloc::vec![Vec::new(); m];
        let mut ones = alloc::vec![Vec::new(); m];
        for index in 0..alphabet.order() {
            for position in 0..m {
                if gray.bit(index, position) == 1 {
                    ones[position].push(index);
                } else {
                    zeros[position].push(index);
                }
            }
        }
        Self { zeros, ones }
    }

    pub fn bits(&self) -> usize {
        self.zeros.len()
    }

    pub fn zeros(&self, position: usize) -> &[usize] {
        &self.zeros[position]
    }

    pub fn ones(&self, position: usize) -> &[usize] {
        &self.ones[position]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn angle(z: Complex64) -> f64 {
        let a = z.im.atan2(z.re);
        if a < 0.0 {
            a + 2.0 * PI
        } else {
            a
        }
    }

    #[test]
    fn qpsk_on_diagonals() {
        let a = PskAlphabet::new(4).unwrap();
        let expected = [3.0 * PI / 4.0, 5.0 * PI / 4.0, 7.0 * PI / 4.0, PI / 4.0];
        for (s, e) in a.symbols().iter().zip(expected) {
            assert!((angle(*s) - e).abs() < 1e-12);
        }
        let sum: Complex64 = a.symbols().iter().sum();
        assert_eq!(sum, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn symbols_follow_closed_form() {
        for order in [2usize, 4, 8, 16, 32, 64] {
            let a = PskAlphabet::new(order).unwrap();
            for (i, s) in a.symbols().iter().enumerate() {
                let phi = PI * (2.0 * (i as f64 + 1.0) + 1.0) / order as f64;
                let expect = Complex64::new(phi.cos(), phi.sin());
                assert!((s - expect).norm() < 1e-12, "order {order} index {i}");
            }
        }
    }

    #[test]
    fn unit_modulus_balanced_rotation_closed() {
        for order in [2usize, 4, 8, 16] {
            let a = PskAlphabet::new(order).unwrap();
            let sum: Complex64 = a.symbols().iter().sum();
            assert!(sum.norm() < 1e-12);
            let rot = Complex64::from_polar(1.0, 2.0 * PI / order as f64);
            for (i, s) in a.symbols().iter().enumerate() {
                assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
                let r = s * rot;
                let j = a.rotate_index(i, 1);
                assert!((r - a.symbol(j)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn eight_psk_min_gap() {
        let a = PskAlphabet::new(8).unwrap();
        let mut gap = f64::INFINITY;
        for (i, s) in a.symbols().iter().enumerate() {
            for t in &a.symbols()[i + 1..] {
                let d = (s.conj() * t).arg().abs();
                gap = gap.min(d);
            }
        }
        assert!((gap - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_orders() {
        for order in [0usize, 1, 3, 6, 128] {
            assert_eq!(PskAlphabet::new(order), Err(Error::InvalidOrder(order)));
        }
    }

    #[test]
    fn qpsk_gray_table() {
        let a = PskAlphabet::new(4).unwrap();
        let g = GrayMap::new(&a);
        let cases = [
            (0b00, PI / 4.0),
            (0b01, 3.0 * PI / 4.0),
            (0b11, 5.0 * PI / 4.0),
            (0b10, 7.0 * PI / 4.0),
        ];
        for (word, phi) in cases {
            assert!((angle(a.symbol(g.index_of(word))) - phi).abs() < 1e-12);
        }
    }

    #[test]
    fn adjacent_symbols_differ_in_one_bit() {
        for order in [2usize, 4, 8, 16, 64] {
            let a = PskAlphabet::new(order).unwrap();
            let g = GrayMap::new(&a);
            for i in 0..order {
                let j = a.rotate_index(i, 1);
                assert_eq!((g.word_of(i) ^ g.word_of(j)).count_ones(), 1);
            }
        }
    }

    #[test]
    fn partitions_are_halves() {
        for order in [2usize, 4, 8, 16] {
            let a = PskAlphabet::new(order).unwrap();
            let g = GrayMap::new(&a);
            let p = BitPartition::new(&a, &g);
            for bit in 0..p.bits() {
                assert_eq!(p.zeros(bit).len(), order / 2);
                assert_eq!(p.ones(bit).len(), order / 2);
                let mut all: Vec<usize> = p.zeros(bit).iter().chain(p.ones(bit)).copied().collect();
                all.sort_unstable();
                assert_eq!(all, (0..order).collect::<Vec<_>>());
                let mut min_dist = f64::INFINITY;
                for &i in p.zeros(bit) {
                    for &j in p.ones(bit) {
                        min_dist = min_dist.min((a.symbol(i) - a.symbol(j)).norm());
                    }
                }
                assert!(min_dist > 0.0);
            }
        }
    }

    #[test]
    fn eight_psk_bit_two_by_enumeration() {
        let a = PskAlphabet::new(8).unwrap();
        let g = GrayMap::new(&a);
        let p = BitPartition::new(&a, &g);
        // Enumerate the Gray table directly: position j gets word j ^ (j >> 1)
        // and holds symbol index (j + 7) % 8.
        let mut ones = Vec::new();
        for j in 0..8usize {
            let word = j ^ (j >> 1);
            if word & 1 == 1 {
                ones.push((j + 7) % 8);
            }
        }
        ones.sort_unstable();
        let mut got = p.ones(2).to_vec();
        got.sort_unstable();
        assert_eq!(got, ones);
    }

    #[test]
    fn modulate_examples() {
        let a = PskAlphabet::new(4).unwrap();
        let g = GrayMap::new(&a);
        let idx = g.modulate(&[0, 0, 1, 1]).unwrap();
        assert_eq!(idx.len(), 2);
        assert!((angle(a.symbol(idx[0])) - PI / 4.0).abs() < 1e-12);
        assert!((angle(a.symbol(idx[1])) - 5.0 * PI / 4.0).abs() < 1e-12);
        assert!(g.modulate(&[]).unwrap().is_empty());
        assert_eq!(
            g.modulate(&[1, 0, 1]),
            Err(Error::BitLength {
                len: 3,
                bits_per_symbol: 2
            })
        );
    }

    #[test]
    fn nearest_by_angle_ties_to_lower_index() {
        let a = PskAlphabet::new(4).unwrap();
        assert_eq!(a.nearest_by_angle(Complex64::new(0.0, 0.0)), 0);
        for i in 0..4 {
            assert_eq!(a.nearest_by_angle(a.symbol(i) * 0.3), i);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn modulate_then_demodulate_is_identity(
                log_order in 1usize..=4,
                groups in proptest::collection::vec(0usize..16, 0..512),
            ) {
                let order = 1usize << log_order;
                let a = PskAlphabet::new(order).unwrap();
                let g = GrayMap::new(&a);
                let m = a.bits_per_symbol();
                let mut bits = Vec::new();
                for w in groups {
                    for p in (0..m).rev() {
                        bits.push(((w % order) >> p & 1) as u8);
                    }
                }
                let idx = g.modulate(&bits).unwrap();
                prop_assert_eq!(idx.len(), bits.len() / m);
                let mut back = Vec::new();
                g.demodulate_into(&idx, &mut back);
                prop_assert_eq!(back, bits);
            }
        }
    }
}
