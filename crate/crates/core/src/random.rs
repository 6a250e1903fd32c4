//! Seeded random instances used by the self-test and the test suites.
//!
//! Everything is driven by `ChaCha8Rng`, so a seed pins the stream on every
//! platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matcore::{inner, norm, ComplexMatrix, HermitianObservable, C64};

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard complex normal: real and imaginary parts `N(0, 1/2)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// `(G + G†) / 2` with `G` Ginibre.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianObservable {
    HermitianObservable::new(ginibre(rng, n, n).hermitian_part()).expect("Hermitian by construction")
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..n).map(|_| complex_normal(rng)).collect();
        let len = norm(&v);
        if len > 1e-6 {
            return v.into_iter().map(|z| z / len).collect();
        }
    }
}

/// `G G† / tr(G G†)`; full rank with probability one.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let g = ginibre(rng, n, n);
    let gg = g.matmul(&g.adjoint()).expect("square");
    let tr = gg.trace().re;
    gg.scale_real(1.0 / tr).hermitian_part()
}

/// Haar-ish unitary from Gram–Schmidt on Ginibre columns.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut x: Vec<C64> = (0..n).map(|_| complex_normal(rng)).collect();
        for q in &cols {
            let p = inner(q, &x);
            for (xi, qi) in x.iter_mut().zip(q) {
                *xi -= p * qi;
            }
        }
        let len = norm(&x);
        if len > 1e-8 {
            cols.push(x.into_iter().map(|z| z / len).collect());
        }
    }
    ComplexMatrix::from_columns(&cols).expect("square")
}

/// Probability vector with exponential weights.
pub fn random_spectrum<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}
