//! Decade identifiers and the temporal train/validation/test layout.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A decade, identified by its first year (1800, 1810, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Decade(pub u16);

impl Decade {
    /// Decade containing `year`: `floor(year / 10) * 10`.
    pub fn of_year(year: u16) -> Self {
        Decade(year / 10 * 10)
    }

    pub fn year(self) -> u16 {
        self.0
    }

    pub fn next(self) -> Self {
        Decade(self.0 + 10)
    }
}

impl fmt::Display for Decade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LayoutError {
    #[error("decade {0} is not aligned to a multiple of ten")]
    Unaligned(u16),
    #[error("training range {first}..={last} is empty")]
    EmptyTraining { first: Decade, last: Decade },
    #[error("validation decade {validation} overlaps or precedes the training range ending {last_training}")]
    ValidationOverlap { validation: Decade, last_training: Decade },
    #[error("test decade {test} must come after validation decade {validation}")]
    TestOverlap { test: Decade, validation: Decade },
}

/// Which part of the temporal holdout a decade belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Period {
    Training,
    Validation,
    Test,
}

/// Training decades, one validation decade and one test decade, in strictly
/// increasing order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecadeLayout {
    first_training: Decade,
    last_training: Decade,
    validation: Decade,
    test: Decade,
}

impl Default for DecadeLayout {
    /// 1800s-1980s for training (19 decades), 1990s validation, 2000s test.
    fn default() -> Self {
        DecadeLayout {
            first_training: Decade(1800),
            last_training: Decade(1980),
            validation: Decade(1990),
            test: Decade(2000),
        }
    }
}

impl DecadeLayout {
    pub fn new(
        first_training: u16,
        last_training: u16,
        validation: u16,
        test: u16,
    ) -> Result<Self, LayoutError> {
        for y in [first_training, last_training, validation, test] {
            if y % 10 != 0 {
                return Err(LayoutError::Unaligned(y));
            }
        }
        let (first, last) = (Decade(first_training), Decade(last_training));
        if last < first {
            return Err(LayoutError::EmptyTraining { first, last });
        }
        if validation <= last_training {
            return Err(LayoutError::ValidationOverlap {
                validation: Decade(validation),
                last_training: last,
            });
        }
        if test <= validation {
            return Err(LayoutError::TestOverlap {
                test: Decade(test),
                validation: Decade(validation),
            });
        }
        Ok(DecadeLayout {
            first_training: first,
            last_training: last,
            validation: Decade(validation),
            test: Decade(test),
        })
    }

    pub fn training_decades(&self) -> Vec<Decade> {
        (self.first_training.0..=self.last_training.0)
            .step_by(10)
            .map(Decade)
            .collect()
    }

    pub fn n_training(&self) -> usize {
        ((self.last_training.0 - self.first_training.0) / 10 + 1) as usize
    }

    pub fn first_training(&self) -> Decade {
        self.first_training
    }

    pub fn last_training(&self) -> Decade {
        self.last_training
    }

    pub fn validation(&self) -> Decade {
        self.validation
    }

    pub fn test(&self) -> Decade {
        self.test
    }

    /// First and last year (inclusive) of the whole corpus range.
    pub fn year_range(&self) -> (u16, u16) {
        (self.first_training.0, self.test.0 + 9)
    }

    /// Maps a year to its decade if it falls inside the corpus range.
    pub fn decade_of(&self, year: u16) -> Option<Decade> {
        let (lo, hi) = self.year_range();
        (lo..=hi).contains(&year).then(|| Decade::of_year(year))
    }

    /// Period of a decade. Decades between validation and test (when the
    /// layout leaves a gap) belong to no period.
    pub fn period(&self, decade: Decade) -> Option<Period> {
        if decade >= self.first_training && decade <= self.last_training {
            Some(Period::Training)
        } else if decade == self.validation {
            Some(Period::Validation)
        } else if decade == self.test {
            Some(Period::Test)
        } else {
            None
        }
    }

    pub fn is_training(&self, decade: Decade) -> bool {
        self.period(decade) == Some(Period::Training)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout_has_nineteen_training_decades() {
        let layout = DecadeLayout::default();
        assert_eq!(layout.n_training(), 19);
        let decades = layout.training_decades();
        assert_eq!(decades.first(), Some(&Decade(1800)));
        assert_eq!(decades.last(), Some(&Decade(1980)));
        assert_eq!(layout.year_range(), (1800, 2009));
    }

    #[test]
    fn decade_bucketing() {
        assert_eq!(Decade::of_year(1905), Decade(1900));
        assert_eq!(Decade::of_year(1899), Decade(1890));
        let layout = DecadeLayout::default();
        assert_eq!(layout.decade_of(1799), None);
        assert_eq!(layout.decade_of(2010), None);
        assert_eq!(layout.decade_of(2009), Some(Decade(2000)));
    }

    #[test]
    fn overlapping_layouts_are_rejected() {
        assert!(matches!(
            DecadeLayout::new(1800, 1990, 1990, 2000),
            Err(LayoutError::ValidationOverlap { .. })
        ));
        assert!(matches!(
            DecadeLayout::new(1800, 1980, 1990, 1990),
            Err(LayoutError::TestOverlap { .. })
        ));
        assert!(matches!(
            DecadeLayout::new(1805, 1980, 1990, 2000),
            Err(LayoutError::Unaligned(1805))
        ));
    }
}
