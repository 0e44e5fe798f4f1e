//! Frequency plans: which CW tones are transmitted and for which method.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlanRole {
    Fsk2,
    Fsk3,
    Broadband,
}

impl fmt::Display for PlanRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlanRole::Fsk2 => "FSK2",
            PlanRole::Fsk3 => "FSK3",
            PlanRole::Broadband => "BROADBAND",
        })
    }
}

/// An ordered list of CW frequencies (Hz) tagged with the method it serves.
///
/// FSK plans keep their tones in role order `f1, f2[, f3]`; the order matters
/// because `f1`/`f2` form the small step and `f3` the large one. Broadband
/// plans are stored ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyPlan {
    pub(crate) frequencies: Vec<f64>,
    pub(crate) role: PlanRole,
}

impl FrequencyPlan {
    pub fn new(frequencies: Vec<f64>, role: PlanRole) -> Result<Self> {
        let expected = match role {
            PlanRole::Fsk2 => frequencies.len() == 2,
            PlanRole::Fsk3 => frequencies.len() == 3,
            PlanRole::Broadband => frequencies.len() >= 4,
        };
        if !expected {
            return Err(Error::invalid(format!(
                "{role} plan cannot have {} frequencies",
                frequencies.len()
            )));
        }
        if frequencies.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::invalid("frequencies must be positive and finite"));
        }
        let mut sorted = frequencies.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("frequencies must be distinct"));
        }
        let frequencies = match role {
            PlanRole::Broadband => sorted,
            PlanRole::Fsk3 => {
                let small = (frequencies[1] - frequencies[0]).abs();
                let large = (frequencies[2] - frequencies[0]).abs();
                if large <= small {
                    return Err(Error::invalid(format!(
                        "FSK3 large step |f3-f1| = {large} Hz must exceed small step |f2-f1| = {small} Hz"
                    )));
                }
                frequencies
            }
            PlanRole::Fsk2 => frequencies,
        };
        Ok(FrequencyPlan { frequencies, role })
    }

    pub fn fsk2(f1: f64, f2: f64) -> Result<Self> {
        Self::new(vec![f1, f2], PlanRole::Fsk2)
    }

    pub fn fsk3(f1: f64, f2: f64, f3: f64) -> Result<Self> {
        Self::new(vec![f1, f2, f3], PlanRole::Fsk3)
    }

    /// `steps` equally spaced tones from `start` to `stop` inclusive.
    pub fn broadband(start: f64, stop: f64, steps: usize) -> Result<Self> {
        if steps < 4 {
            return Err(Error::invalid("broadband plan needs at least 4 steps"));
        }
        let step = (stop - start) / (steps - 1) as f64;
        let freqs = (0..steps).map(|i| start + step * i as f64).collect();
        Self::new(freqs, PlanRole::Broadband)
    }

    /// Infers the role from the tone count; used when loading cube files.
    pub fn from_frequencies(frequencies: Vec<f64>) -> Result<Self> {
        let role = match frequencies.len() {
            2 => PlanRole::Fsk2,
            3 => PlanRole::Fsk3,
            n if n >= 4 => PlanRole::Broadband,
            n => return Err(Error::invalid(format!("no plan role has {n} frequencies"))),
        };
        Self::new(frequencies, role)
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn role(&self) -> PlanRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn require(&self, role: PlanRole) -> Result<()> {
        if self.role != role {
            return Err(Error::RoleMismatch {
                expected: role.to_string(),
                found: self.role.to_string(),
            });
        }
        Ok(())
    }

    /// Total swept bandwidth.
    pub fn bandwidth(&self) -> f64 {
        let (lo, hi) = self
            .frequencies
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &f| (lo.min(f), hi.max(f)));
        hi - lo
    }
}
