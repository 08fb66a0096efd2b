//! Synthetic embedding tables with a known, planted association.
//!
//! Every male attribute and male-stereotyped target is the first basis
//! direction plus Gaussian noise; every female attribute and
//! female-stereotyped target is the second basis direction plus noise. Any
//! correct WEAT implementation must then report a large positive effect for
//! every category.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::embedding::EmbeddingTable;
use crate::lexicon::{Lexicon, WordEntry};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedTable {
    pub dimension: usize,
    /// Standard deviation of the per-coordinate noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for PlantedTable {
    fn default() -> Self {
        Self {
            dimension: 16,
            noise: 0.1,
            seed: 0,
        }
    }
}

impl PlantedTable {
    /// Build a table holding every lexicon phrase as an underscored token.
    ///
    /// # Panics
    ///
    /// If `dimension < 2`, or if a phrase appears on both the male and the
    /// female side somewhere in the lexicon.
    pub fn build(&self, lexicon: &Lexicon, label: &str) -> EmbeddingTable {
        assert!(self.dimension >= 2, "need two planted directions");
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
        let mut sides = std::collections::HashMap::new();

        let male = lexicon
            .attributes
            .male
            .iter()
            .chain(lexicon.categories.iter().flat_map(|c| &c.male_stereotyped));
        let female = lexicon.attributes.female.iter().chain(
            lexicon
                .categories
                .iter()
                .flat_map(|c| &c.female_stereotyped),
        );
        let tagged = male.map(|e| (e, 0usize)).chain(female.map(|e| (e, 1usize)));

        for (entry, axis) in tagged {
            let token = token_for(entry);
            match sides.get(&token) {
                Some(&prev) => {
                    assert_eq!(prev, axis, "{token:?} is planted on both sides");
                    continue;
                }
                None => {
                    sides.insert(token.clone(), axis);
                }
            }
            let mut v: Vec<f64> = (0..self.dimension)
                .map(|_| self.noise * rng.sample::<f64, _>(StandardNormal))
                .collect();
            v[axis] += 1.0;
            rows.push((token, v));
        }
        EmbeddingTable::from_rows(label, self.dimension, rows)
            .expect("planted rows are well formed")
    }
}

fn token_for(entry: &WordEntry) -> String {
    entry
        .word()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join("_")
}
