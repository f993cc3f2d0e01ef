use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};

/// Seeded random per-event holdout. Both sides keep the parent's encoder and
/// scale; each gets its own dense index maps. Events keep their original
/// relative order.
pub fn split(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test_fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let n = dataset.len();
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::Config(format!(
            "split of {n} events at fraction {test_fraction} leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_test = vec![false; n];
    for &i in &order[..n_test] {
        is_test[i] = true;
    }
    let (mut train, mut test) = (Vec::with_capacity(n - n_test), Vec::with_capacity(n_test));
    for (ev, t) in dataset.events().iter().zip(is_test) {
        if t {
            test.push(ev.clone());
        } else {
            train.push(ev.clone());
        }
    }
    Ok((
        Dataset::new(train, dataset.encoder().clone(), dataset.scale())?,
        Dataset::new(test, dataset.encoder().clone(), dataset.scale())?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{EncodingScheme, RatingEvent, RatingScale};
    use proptest::prelude::*;

    fn dataset(n: usize) -> Dataset {
        let events = (0..n)
            .map(|i| RatingEvent {
                user_id: format!("u{}", i % 7),
                item_id: format!("i{i}"),
                rating: 1.0 + (i % 5) as f64,
                context_attrs: vec![(i % 3) as i64],
            })
            .collect();
        Dataset::fit(events, vec!["time".into()], EncodingScheme::OneHot, RatingScale::default()).unwrap()
    }

    #[test]
    fn sizes() {
        let (train, test) = split(&dataset(10), 0.2, 7).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let (train, test) = split(&dataset(2), 0.5, 7).unwrap();
        assert_eq!((train.len(), test.len()), (1, 1));
    }

    #[test]
    fn deterministic() {
        let ds = dataset(50);
        assert_eq!(split(&ds, 0.3, 11).unwrap(), split(&ds, 0.3, 11).unwrap());
        assert_ne!(split(&ds, 0.3, 11).unwrap().1, split(&ds, 0.3, 12).unwrap().1);
    }

    #[test]
    fn degenerate() {
        assert!(split(&dataset(1), 0.2, 0).is_err());
        assert!(split(&dataset(10), 0.0, 0).is_err());
        assert!(split(&dataset(10), 1.0, 0).is_err());
        assert!(split(&dataset(3), 0.01, 0).is_err());
    }

    proptest! {
        #[test]
        fn partition(n in 2usize..60, frac in 0.05f64..0.95, seed in any::<u64>()) {
            let ds = dataset(n);
            let n_test = (n as f64 * frac).round() as usize;
            prop_assume!(n_test > 0 && n_test < n);
            let (train, test) = split(&ds, frac, seed).unwrap();
            prop_assert_eq!(train.len() + test.len(), n);
            prop_assert!((test.len() as f64 - n as f64 * frac).abs() <= 1.0);
            // item ids are unique per event here, so ids identify events
            let mut ids: Vec<&str> = train.events().iter().chain(test.events()).map(|e| e.item_id.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            prop_assert_eq!(ids.len(), n);
        }
    }
}
