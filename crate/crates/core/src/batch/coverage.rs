use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Ethnicity {
    Black,
    Asian,
    Hispanic,
    WhiteOrMiddleEastern,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Male, Gender::Female];

    pub fn as_str(&self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

impl Ethnicity {
    pub const ALL: [Ethnicity; 4] = [
        Ethnicity::Black,
        Ethnicity::Asian,
        Ethnicity::Hispanic,
        Ethnicity::WhiteOrMiddleEastern,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Ethnicity::Black => "black",
            Ethnicity::Asian => "asian",
            Ethnicity::Hispanic => "hispanic",
            Ethnicity::WhiteOrMiddleEastern => "white-or-middle-eastern",
        }
    }
}

/// Lowercase with separators removed, so "White or Middle Eastern",
/// "white_or_middle_eastern" and "White-or-MiddleEastern" all match.
fn normalize(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match normalize(s).as_str() {
            "male" | "man" => Ok(Gender::Male),
            "female" | "woman" => Ok(Gender::Female),
            _ => Err(format!("unknown gender label {s:?}")),
        }
    }
}

impl FromStr for Ethnicity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match normalize(s).as_str() {
            "black" => Ok(Ethnicity::Black),
            "asian" => Ok(Ethnicity::Asian),
            "hispanic" | "latinohispanic" => Ok(Ethnicity::Hispanic),
            "whiteormiddleeastern" => Ok(Ethnicity::WhiteOrMiddleEastern),
            _ => Err(format!("unknown ethnicity label {s:?}")),
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Ethnicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledImage {
    pub image_id: String,
    pub gender: Gender,
    pub ethnicity: Ethnicity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledBatch {
    pub id: String,
    pub images: Vec<LabeledImage>,
}

impl LabeledBatch {
    fn combinations(&self) -> HashSet<(Gender, Ethnicity)> {
        self.images.iter().map(|i| (i.gender, i.ethnicity)).collect()
    }

    fn ethnicities(&self) -> HashSet<Ethnicity> {
        self.images.iter().map(|i| i.ethnicity).collect()
    }

    fn genders(&self) -> HashSet<Gender> {
        self.images.iter().map(|i| i.gender).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledBatchSet {
    pub batches: Vec<LabeledBatch>,
}

impl LabeledBatchSet {
    fn fraction(&self, pred: impl Fn(&LabeledBatch) -> bool) -> Result<f64, MetricError> {
        if self.batches.is_empty() {
            return Err(MetricError::EmptyBatchSet);
        }
        let hits = self.batches.iter().filter(|b| pred(b)).count();
        Ok(hits as f64 / self.batches.len() as f64)
    }
}

/// Fraction of batches containing all eight gender × ethnicity combinations.
pub fn coverage_all_pairs(set: &LabeledBatchSet) -> Result<f64, MetricError> {
    set.fraction(|b| b.combinations().len() == Gender::ALL.len() * Ethnicity::ALL.len())
}

/// Fraction of batches showing at least `m` of the four ethnicities.
pub fn coverage_at_least(set: &LabeledBatchSet, m: usize) -> Result<f64, MetricError> {
    if !(1..=Ethnicity::ALL.len()).contains(&m) {
        return Err(MetricError::InvalidThreshold(m));
    }
    set.fraction(|b| b.ethnicities().len() >= m)
}

/// Looser reading of full coverage: both genders and all four ethnicities
/// appear, not necessarily in every combination.
pub fn coverage_genders_and_ethnicities(set: &LabeledBatchSet) -> Result<f64, MetricError> {
    set.fraction(|b| b.genders().len() == Gender::ALL.len() && b.ethnicities().len() == Ethnicity::ALL.len())
}

/// Fraction of batches with at least one image of the given combination.
pub fn coverage_combination(set: &LabeledBatchSet, gender: Gender, ethnicity: Ethnicity) -> Result<f64, MetricError> {
    set.fraction(|b| b.images.iter().any(|i| i.gender == gender && i.ethnicity == ethnicity))
}
