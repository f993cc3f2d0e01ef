use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};

use super::{Dataset, EncodingScheme, RatingEvent, RatingScale, COMODA_CONTEXT_COLUMNS};
use crate::error::{Error, Result};

/// Category counts of the twelve LDOS-CoMoDa context variables, in
/// [`COMODA_CONTEXT_COLUMNS`] order.
pub const COMODA_CATEGORY_COUNTS: [usize; 12] = [4, 3, 4, 3, 5, 7, 7, 7, 3, 2, 2, 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub n_events: usize,
    pub zipf_exponent: f64,
    /// Category count of each context column; codes run `1..=count`.
    pub context_columns: Vec<usize>,
    pub seed: u64,
}

impl Default for SynthSpec {
    /// Roughly the size of LDOS-CoMoDa.
    fn default() -> Self {
        SynthSpec {
            n_users: 120,
            n_items: 400,
            n_events: 2300,
            zipf_exponent: 1.0,
            context_columns: COMODA_CATEGORY_COUNTS.to_vec(),
            seed: 42,
        }
    }
}

impl SynthSpec {
    pub fn column_names(&self) -> Vec<String> {
        (0..self.context_columns.len())
            .map(|i| match COMODA_CONTEXT_COLUMNS.get(i) {
                Some(name) => name.to_string(),
                None => format!("context{}", i + 1),
            })
            .collect()
    }
}

/// Synthetic dataset: users uniform, item popularity Zipf-distributed with
/// item `"1"` the most popular, integer ratings uniform on the scale, and
/// context codes uniform per column.
pub fn synth_generate(spec: &SynthSpec, scale: RatingScale) -> Result<Dataset> {
    if spec.n_users == 0 || spec.n_items == 0 || spec.n_events == 0 {
        return Err(Error::Config("synthetic sizes must be positive".into()));
    }
    if !(spec.zipf_exponent.is_finite() && spec.zipf_exponent > 0.0) {
        return Err(Error::Config(format!(
            "zipf_exponent must be > 0, got {}",
            spec.zipf_exponent
        )));
    }
    if spec.context_columns.is_empty() || spec.context_columns.contains(&0) {
        return Err(Error::Config(
            "context columns must be non-empty with positive category counts".into(),
        ));
    }
    scale.validate()?;
    let low = scale.rating_min.ceil() as i64;
    let high = scale.r_max.floor() as i64;
    if low > high {
        return Err(Error::Config("rating scale holds no integer rating".into()));
    }

    let zipf = Zipf::new(spec.n_items as f64, spec.zipf_exponent)
        .map_err(|e| Error::Config(format!("zipf: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let events = (0..spec.n_events)
        .map(|_| {
            let user = rng.random_range(1..=spec.n_users);
            let item = zipf.sample(&mut rng) as usize;
            let rating = rng.random_range(low..=high) as f64;
            let context_attrs = spec
                .context_columns
                .iter()
                .map(|&n| rng.random_range(1..=n as i64))
                .collect();
            RatingEvent {
                user_id: user.to_string(),
                item_id: item.to_string(),
                rating,
                context_attrs,
            }
        })
        .collect();
    Dataset::fit(events, spec.column_names(), EncodingScheme::OneHot, scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n_events: usize) -> SynthSpec {
        SynthSpec {
            n_users: 20,
            n_items: 50,
            n_events,
            zipf_exponent: 1.0,
            context_columns: vec![3, 2],
            seed: 5,
        }
    }

    #[test]
    fn rejects_zero_events() {
        assert!(synth_generate(&spec(0), RatingScale::default()).is_err());
        let bad = SynthSpec { zipf_exponent: 0.0, ..spec(10) };
        assert!(synth_generate(&bad, RatingScale::default()).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = synth_generate(&spec(300), RatingScale::default()).unwrap();
        let b = synth_generate(&spec(300), RatingScale::default()).unwrap();
        assert_eq!(a, b);
        let c = synth_generate(&SynthSpec { seed: 6, ..spec(300) }, RatingScale::default()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn values_in_range() {
        let ds = synth_generate(&spec(500), RatingScale::default()).unwrap();
        for ev in ds.events() {
            assert!([1.0, 2.0, 3.0, 4.0, 5.0].contains(&ev.rating));
            assert!((1..=3).contains(&ev.context_attrs[0]));
            assert!((1..=2).contains(&ev.context_attrs[1]));
        }
        assert_eq!(ds.encoder().dim(), 5);
    }

    #[test]
    fn popularity_follows_zipf() {
        let ds = synth_generate(&SynthSpec { n_events: 1000, ..spec(0) }, RatingScale::default()).unwrap();
        let counts: Vec<f64> = ds.item_counts().into_iter().map(|c| c as f64).collect();
        let slope = crate::metrics::zipf_slope(&counts).unwrap();
        assert!((-1.15..=-0.85).contains(&slope), "slope {slope}");
    }
}
