use std::fmt;
use std::str::FromStr;

/// Ordinal label space of one severity score.
///
/// MES, bleeding and erosion span 0..=3; vascular pattern spans 0..=2.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScoreSchema {
    #[default]
    Mes,
    Bleeding,
    Erosion,
    Vascular,
}

impl ScoreSchema {
    pub const ALL: [ScoreSchema; 4] = [
        ScoreSchema::Mes,
        ScoreSchema::Bleeding,
        ScoreSchema::Erosion,
        ScoreSchema::Vascular,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScoreSchema::Mes => "mes",
            ScoreSchema::Bleeding => "bleeding",
            ScoreSchema::Erosion => "erosion",
            ScoreSchema::Vascular => "vascular",
        }
    }

    pub fn min_score(self) -> u8 {
        0
    }

    pub fn max_score(self) -> u8 {
        match self {
            ScoreSchema::Vascular => 2,
            _ => 3,
        }
    }

    pub fn num_classes(self) -> usize {
        (self.max_score() - self.min_score()) as usize + 1
    }

    pub fn contains(self, score: i64) -> bool {
        (self.min_score() as i64..=self.max_score() as i64).contains(&score)
    }

    /// Class index of an in-range score.
    pub fn class_of(self, score: u8) -> Option<usize> {
        self.contains(score as i64).then(|| (score - self.min_score()) as usize)
    }

    pub fn score_of(self, class: usize) -> u8 {
        self.min_score() + class as u8
    }

    /// Schema with the given class count (the first in [`ScoreSchema::ALL`] order).
    pub fn with_classes(classes: usize) -> Option<ScoreSchema> {
        Self::ALL.into_iter().find(|s| s.num_classes() == classes)
    }
}

impl fmt::Display for ScoreSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreSchema {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mes" => Ok(ScoreSchema::Mes),
            "bleeding" | "uceis_bleeding" => Ok(ScoreSchema::Bleeding),
            "erosion" | "uceis_erosion" => Ok(ScoreSchema::Erosion),
            "vascular" | "uceis_vascular" => Ok(ScoreSchema::Vascular),
            other => Err(format!(
                "unknown schema `{other}` (expected mes, bleeding, erosion or vascular)"
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(ScoreSchema::Mes.num_classes(), 4);
        assert_eq!(ScoreSchema::Bleeding.num_classes(), 4);
        assert_eq!(ScoreSchema::Erosion.num_classes(), 4);
        assert_eq!(ScoreSchema::Vascular.num_classes(), 3);
        assert!(ScoreSchema::Vascular.contains(2));
        assert!(!ScoreSchema::Vascular.contains(3));
        assert!(!ScoreSchema::Mes.contains(5));
        assert!(!ScoreSchema::Mes.contains(-1));
        for s in ScoreSchema::ALL {
            assert!(s.num_classes() >= 2);
            assert_eq!(s.name().parse::<ScoreSchema>().unwrap(), s);
        }
    }
}
