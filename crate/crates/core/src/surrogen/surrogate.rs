use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Lexicons, SurrogateError};
use crate::note::PhiCategory;
use crate::rng::{self, StreamRng};

/// Shapes of generated surrogates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    /// Probability that a PATIENT_NAME uses the female first-name list.
    pub female_probability: f64,
    /// Inclusive year range for DATE surrogates.
    pub first_year: i32,
    pub last_year: i32,
    /// ID surrogates have a uniformly drawn length in `1..=max_id_digits`.
    pub max_id_digits: u32,
    /// LOCATION surrogate when no city lexicon is loaded.
    pub fallback_location: String,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            female_probability: 0.5,
            first_year: 1990,
            last_year: 2014,
            max_id_digits: 7,
            fallback_location: "Boston".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogatePlan {
    pub seed: u64,
    /// Reuse one surrogate for placeholders of a note whose inner texts are
    /// identical.
    pub consistency_mode: bool,
    pub config: SurrogateConfig,
}

impl SurrogatePlan {
    pub fn new(seed: u64) -> Self {
        SurrogatePlan {
            seed,
            consistency_mode: false,
            config: SurrogateConfig::default(),
        }
    }

    /// The random stream for one note: `seed ^ stable_hash(note_id)`.
    pub fn note_rng(&self, note_id: &str) -> StreamRng {
        rng::stream(self.seed, note_id)
    }
}

pub fn days_in_month(year: i32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if (year % 4 == 0 && year % 100 != 0) || year % 400 == 0 => 29,
        2 => 28,
        _ => 0,
    }
}

/// Draws a surrogate surface string for one PHI instance.
///
/// * PATIENT_NAME: `"<First> <Surname>"`, first name from the female or male
///   list with `female_probability`, both drawn by frequency weight.
/// * HOSPITAL: uniform over the hospital list.
/// * DATE: `YYYY-M-D`, uniform year then month then valid day.
/// * ID: uniform length, then uniform digits without a leading zero.
/// * LOCATION: uniform over the city list, or the fallback location.
pub fn make_surrogate<R: Rng + ?Sized>(
    category: PhiCategory,
    lexicons: &Lexicons,
    config: &SurrogateConfig,
    rng: &mut R,
) -> Result<String, SurrogateError> {
    match category {
        PhiCategory::PatientName => {
            let female = rng.random_bool(config.female_probability.clamp(0.0, 1.0));
            let first = if female {
                lexicons.female_first.as_ref().ok_or_else(|| SurrogateError::missing(category, "female first names"))?
            } else {
                lexicons.male_first.as_ref().ok_or_else(|| SurrogateError::missing(category, "male first names"))?
            };
            let surname = lexicons
                .surname
                .as_ref()
                .ok_or_else(|| SurrogateError::missing(category, "surnames"))?;
            let first = first.sample(rng).to_string();
            Ok(format!("{first} {}", surname.sample(rng)))
        }
        PhiCategory::Hospital => lexicons
            .hospital
            .as_ref()
            .map(|h| h.sample_uniform(rng).to_string())
            .ok_or_else(|| SurrogateError::missing(category, "hospitals")),
        PhiCategory::Date => {
            let year = rng.random_range(config.first_year..=config.last_year);
            let month = rng.random_range(1..=12);
            let day = rng.random_range(1..=days_in_month(year, month));
            Ok(format!("{year}-{month}-{day}"))
        }
        PhiCategory::Id => {
            let len = rng.random_range(1..=config.max_id_digits.max(1));
            let mut id = String::with_capacity(len as usize);
            for i in 0..len {
                let low = if i == 0 && len > 1 { 1 } else { 0 };
                let digit: u32 = rng.random_range(low..=9);
                id.push(char::from_digit(digit, 10).expect("digit"));
            }
            Ok(id)
        }
        PhiCategory::Location => Ok(match &lexicons.city {
            Some(cities) => cities.sample_uniform(rng).to_string(),
            None => config.fallback_location.clone(),
        }),
    }
}
