//! Fixtures shared by the benchmarks.

use cellot::complex::GeneratorSpec;
use cellot::{rng, CwComplex, GaussianSignal};

/// `count` random complexes on `vertices` vertices.
pub fn complexes(count: usize, vertices: usize, seed: u64) -> Vec<CwComplex> {
    let spec = GeneratorSpec { n_vertices: vertices, ..Default::default() };
    (0..count as u64).map(|i| CwComplex::random(rng::mix(seed, i), &spec).expect("valid generator spec")).collect()
}

/// Vertex signals of two random complexes of the same size.
pub fn signal_pair(vertices: usize, seed: u64) -> (GaussianSignal, GaussianSignal) {
    let c = complexes(2, vertices, seed);
    (
        GaussianSignal::from_complex(&c[0], 0).expect("vertex signal"),
        GaussianSignal::from_complex(&c[1], 0).expect("vertex signal"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_deterministic() {
        assert_eq!(complexes(3, 6, 1), complexes(3, 6, 1));
        let (a, b) = signal_pair(5, 2);
        assert_eq!((a.dim(), b.dim()), (5, 5));
    }
}
