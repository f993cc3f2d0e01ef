//! Rating events, datasets and their ingestion.

mod encoder;
mod parse;
mod split;
mod synth;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::ContextVector;

pub use encoder::{ColumnEncoding, ContextEncoder, EncodingScheme, UNKNOWN_CODE};
pub use parse::{parse_comoda, write_csv, ColumnMapping, ParseOutcome, RowDiagnostic, COMODA_CONTEXT_COLUMNS};
pub use split::split;
pub use synth::{synth_generate, SynthSpec, COMODA_CATEGORY_COUNTS};

/// One observed interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingEvent {
    pub user_id: String,
    pub item_id: String,
    pub rating: f64,
    /// One code per configured context column; `-1` marks unknown.
    pub context_attrs: Vec<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingScale {
    pub rating_min: f64,
    pub r_max: f64,
}

impl Default for RatingScale {
    fn default() -> Self {
        RatingScale {
            rating_min: 1.0,
            r_max: 5.0,
        }
    }
}

impl RatingScale {
    pub fn validate(&self) -> Result<()> {
        if !(self.rating_min.is_finite() && self.r_max.is_finite() && self.r_max > 0.0)
            || self.rating_min < 0.0
            || self.rating_min >= self.r_max
        {
            return Err(Error::Config(format!(
                "invalid rating scale [{}, {}]",
                self.rating_min, self.r_max
            )));
        }
        Ok(())
    }

    pub fn contains(&self, rating: f64) -> bool {
        rating >= self.rating_min && rating <= self.r_max
    }

    pub fn clip(&self, value: f64) -> f64 {
        value.clamp(self.rating_min, self.r_max)
    }
}

/// Immutable collection of events with dense user/item indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    events: Vec<RatingEvent>,
    users: IndexSet<String>,
    items: IndexSet<String>,
    user_of: Vec<usize>,
    item_of: Vec<usize>,
    encoder: ContextEncoder,
    scale: RatingScale,
}

impl Dataset {
    /// Builds a dataset over `events`, assigning indices in first-seen order.
    pub fn new(events: Vec<RatingEvent>, encoder: ContextEncoder, scale: RatingScale) -> Result<Self> {
        scale.validate()?;
        let mut users = IndexSet::new();
        let mut items = IndexSet::new();
        let mut user_of = Vec::with_capacity(events.len());
        let mut item_of = Vec::with_capacity(events.len());
        for (i, ev) in events.iter().enumerate() {
            if !scale.contains(ev.rating) {
                return Err(Error::Validation(format!(
                    "event {i}: rating {} outside [{}, {}]",
                    ev.rating, scale.rating_min, scale.r_max
                )));
            }
            if ev.context_attrs.len() != encoder.columns().len() {
                return Err(Error::Dimension {
                    expected: encoder.columns().len(),
                    actual: ev.context_attrs.len(),
                });
            }
            user_of.push(users.insert_full(ev.user_id.clone()).0);
            item_of.push(items.insert_full(ev.item_id.clone()).0);
        }
        Ok(Dataset {
            events,
            users,
            items,
            user_of,
            item_of,
            encoder,
            scale,
        })
    }

    /// Fits a fresh encoder on `events` and builds the dataset.
    pub fn fit(
        events: Vec<RatingEvent>,
        column_names: Vec<String>,
        scheme: EncodingScheme,
        scale: RatingScale,
    ) -> Result<Self> {
        let encoder = ContextEncoder::fit(&events, column_names, scheme)?;
        Dataset::new(events, encoder, scale)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events(&self) -> &[RatingEvent] {
        &self.events
    }

    pub fn users(&self) -> &IndexSet<String> {
        &self.users
    }

    pub fn items(&self) -> &IndexSet<String> {
        &self.items
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// Dense user index of event `i`.
    pub fn user_of(&self, i: usize) -> usize {
        self.user_of[i]
    }

    /// Dense item index of event `i`.
    pub fn item_of(&self, i: usize) -> usize {
        self.item_of[i]
    }

    pub fn encoder(&self) -> &ContextEncoder {
        &self.encoder
    }

    pub fn scale(&self) -> RatingScale {
        self.scale
    }

    pub fn encode(&self, i: usize) -> Result<ContextVector> {
        self.encoder.encode(&self.events[i].context_attrs)
    }

    /// Encoded contexts of every event, in event order.
    pub fn encode_all(&self) -> Result<Vec<ContextVector>> {
        (0..self.len()).map(|i| self.encode(i)).collect()
    }

    /// Number of events per item, indexed by dense item index.
    pub fn item_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_items()];
        for &it in &self.item_of {
            counts[it] += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(u: &str, i: &str, r: f64, ctx: &[i64]) -> RatingEvent {
        RatingEvent {
            user_id: u.into(),
            item_id: i.into(),
            rating: r,
            context_attrs: ctx.to_vec(),
        }
    }

    #[test]
    fn dense_indices_in_first_seen_order() {
        let events = vec![ev("b", "x", 3.0, &[1]), ev("a", "y", 4.0, &[2]), ev("b", "y", 5.0, &[1])];
        let ds = Dataset::fit(events, vec!["time".into()], EncodingScheme::OneHot, RatingScale::default()).unwrap();
        assert_eq!(ds.n_users(), 2);
        assert_eq!(ds.n_items(), 2);
        assert_eq!((ds.user_of(2), ds.item_of(2)), (0, 1));
        assert_eq!(ds.item_counts(), vec![1, 2]);
        assert_eq!(ds.users().get_index(1).unwrap(), "a");
    }

    #[test]
    fn rejects_out_of_scale_rating() {
        let events = vec![ev("a", "x", 6.0, &[1])];
        let err = Dataset::fit(events, vec!["time".into()], EncodingScheme::OneHot, RatingScale::default()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn clip_to_scale() {
        let s = RatingScale::default();
        assert_eq!(s.clip(7.2), 5.0);
        assert_eq!(s.clip(-3.0), 1.0);
        assert_eq!(s.clip(2.5), 2.5);
    }
}
