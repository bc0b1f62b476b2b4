//! Link quality grades and the RSRP binning component.
//!
//! A forecast RSRP value (dBm) maps onto one of five ordered grades. The
//! cut points are fixed contract values; interior boundaries belong to the
//! lower-quality grade, while -84 dBm itself is already `VeryGood`.

use std::fmt;
use std::str::FromStr;

use crate::error::{LqeError, Result};

/// Ordered link quality grades, worst to best.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QualityGrade {
    VeryBad,
    Bad,
    Intermediate,
    Good,
    VeryGood,
}

/// Grade cut points in dBm, strictly increasing.
pub const BIN_THRESHOLDS_DBM: [f64; 4] = [-115.0, -105.0, -95.0, -84.0];

/// Number of grades.
pub const GRADE_COUNT: usize = 5;

impl QualityGrade {
    /// All grades in ascending quality order.
    pub const ALL: [QualityGrade; GRADE_COUNT] = [
        QualityGrade::VeryBad,
        QualityGrade::Bad,
        QualityGrade::Intermediate,
        QualityGrade::Good,
        QualityGrade::VeryGood,
    ];

    /// Index in ascending quality order (VeryBad = 0 .. VeryGood = 4).
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<QualityGrade> {
        Self::ALL.get(index).copied()
    }

    /// Stable report name: `very_bad`, `bad`, `intermediate`, `good`, `very_good`.
    pub fn name(self) -> &'static str {
        match self {
            QualityGrade::VeryBad => "very_bad",
            QualityGrade::Bad => "bad",
            QualityGrade::Intermediate => "intermediate",
            QualityGrade::Good => "good",
            QualityGrade::VeryGood => "very_good",
        }
    }
}

impl fmt::Display for QualityGrade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QualityGrade {
    type Err = LqeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "very_bad" => Ok(QualityGrade::VeryBad),
            "bad" => Ok(QualityGrade::Bad),
            "intermediate" => Ok(QualityGrade::Intermediate),
            "good" => Ok(QualityGrade::Good),
            "very_good" => Ok(QualityGrade::VeryGood),
            other => Err(LqeError::Validation(format!("unknown grade `{other}`"))),
        }
    }
}

/// Recombine a predicted trend and noise term into an RSRP value in dBm.
pub fn recombine(trend_dbm: f64, noise_dbm: f64) -> Result<f64> {
    if !trend_dbm.is_finite() || !noise_dbm.is_finite() {
        return Err(LqeError::Validation(format!(
            "recombine requires finite inputs, got trend={trend_dbm}, noise={noise_dbm}"
        )));
    }
    Ok(trend_dbm + noise_dbm)
}

/// Map an RSRP value in dBm onto its link quality grade.
///
/// `VeryGood` for `rsrp >= -84`; interior cut points (-95, -105) belong to
/// the lower-quality grade; `rsrp <= -115` is `VeryBad`.
pub fn grade_of(rsrp_dbm: f64) -> Result<QualityGrade> {
    if !rsrp_dbm.is_finite() {
        return Err(LqeError::Validation(format!(
            "grade_of requires a finite RSRP, got {rsrp_dbm}"
        )));
    }
    Ok(if rsrp_dbm >= -84.0 {
        QualityGrade::VeryGood
    } else if rsrp_dbm > -95.0 {
        QualityGrade::Good
    } else if rsrp_dbm > -105.0 {
        QualityGrade::Intermediate
    } else if rsrp_dbm > -115.0 {
        QualityGrade::Bad
    } else {
        QualityGrade::VeryBad
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grades_at_table_rows() {
        assert_eq!(grade_of(-80.0).unwrap(), QualityGrade::VeryGood);
        assert_eq!(grade_of(-84.0).unwrap(), QualityGrade::VeryGood);
        assert_eq!(grade_of(-100.0).unwrap(), QualityGrade::Intermediate);
        assert_eq!(grade_of(-120.0).unwrap(), QualityGrade::VeryBad);
        assert_eq!(grade_of(-115.0).unwrap(), QualityGrade::VeryBad);
    }

    #[test]
    fn interior_boundaries_take_lower_grade() {
        assert_eq!(grade_of(-95.0).unwrap(), QualityGrade::Intermediate);
        assert_eq!(grade_of(-105.0).unwrap(), QualityGrade::Bad);
    }

    #[test]
    fn grade_order_is_total() {
        assert!(QualityGrade::VeryBad < QualityGrade::Bad);
        assert!(QualityGrade::Bad < QualityGrade::Intermediate);
        assert!(QualityGrade::Intermediate < QualityGrade::Good);
        assert!(QualityGrade::Good < QualityGrade::VeryGood);
    }

    #[test]
    fn recombine_adds() {
        assert_eq!(recombine(-90.0, 0.0).unwrap(), -90.0);
        assert_eq!(recombine(-90.5, -1.5).unwrap(), -92.0);
    }

    #[test]
    fn recombine_rejects_non_finite() {
        assert!(recombine(f64::NAN, 0.0).is_err());
        assert!(recombine(-90.0, f64::INFINITY).is_err());
    }

    #[test]
    fn grade_of_rejects_nan() {
        assert!(grade_of(f64::NAN).is_err());
    }

    #[test]
    fn grade_names_round_trip() {
        for g in QualityGrade::ALL {
            assert_eq!(g.name().parse::<QualityGrade>().unwrap(), g);
        }
    }

    #[test]
    fn monotone_over_fine_scan() {
        let mut prev = grade_of(-140.0).unwrap();
        for i in 1..=8000i64 {
            let rsrp = (-14000 + i) as f64 / 100.0;
            let g = grade_of(rsrp).unwrap();
            assert!(g >= prev, "grade decreased at {rsrp}");
            prev = g;
        }
    }
}
