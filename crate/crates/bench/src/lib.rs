//! Seeded inputs shared by the benchmarks.

use mogfn::{Front, ObjectiveVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A mutually non-dominated front of `n` points on the positive unit sphere.
pub fn sphere_front(n: usize, d: usize, seed: u64) -> Front {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 1e-3).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            ObjectiveVector::new(v.into_iter().map(|x| x / norm).collect()).expect("finite")
        })
        .collect();
    Front::new(points).expect("uniform dimension")
}

pub fn random_string(len: usize, alphabet: &str, seed: u64) -> String {
    let letters: Vec<char> = alphabet.chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| letters[rng.random_range(0..letters.len())]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_well_formed() {
        let f = sphere_front(50, 3, 1);
        assert_eq!(f.len(), 50);
        assert_eq!(mogfn::nondominated_indices(f.points()).unwrap().len(), 50);
        assert_eq!(random_string(12, "AB", 2).len(), 12);
        assert_eq!(random_string(12, "AB", 2), random_string(12, "AB", 2));
    }
}
