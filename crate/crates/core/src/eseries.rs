//! IEC 60063 preferred-number snapping.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

const E12: [f64; 12] = [1.0, 1.2, 1.5, 1.8, 2.2, 2.7, 3.3, 3.9, 4.7, 5.6, 6.8, 8.2];

const E24: [f64; 24] = [
    1.0, 1.1, 1.2, 1.3, 1.5, 1.6, 1.8, 2.0, 2.2, 2.4, 2.7, 3.0, 3.3, 3.6, 3.9, 4.3, 4.7, 5.1, 5.6,
    6.2, 6.8, 7.5, 8.2, 9.1,
];

/// Component value series to snap to, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Snap {
    #[default]
    #[serde(rename = "none", alias = "None")]
    None,
    #[serde(rename = "E12", alias = "e12")]
    E12,
    #[serde(rename = "E24", alias = "e24")]
    E24,
}

impl Snap {
    fn mantissas(self) -> Option<&'static [f64]> {
        match self {
            Snap::None => None,
            Snap::E12 => Some(&E12),
            Snap::E24 => Some(&E24),
        }
    }

    /// Smallest series value `>= value` (identity for `Snap::None`).
    pub fn up(self, value: f64) -> f64 {
        self.snap(value, Direction::Up)
    }

    /// Largest series value `<= value` (identity for `Snap::None`).
    pub fn down(self, value: f64) -> f64 {
        self.snap(value, Direction::Down)
    }

    fn snap(self, value: f64, dir: Direction) -> f64 {
        let Some(series) = self.mantissas() else {
            return value;
        };
        if !(value > 0.0) || !value.is_finite() {
            return value;
        }
        let decade = value.log10().floor() as i32;
        // Candidates from the neighbouring decades cover log10 rounding at decade edges.
        let candidates =
            (decade - 1..=decade + 1).flat_map(|d| series.iter().map(move |m| preferred(*m, d)));
        // Values already on the series (within float noise) map to themselves.
        let slack = value * 1e-9;
        match dir {
            Direction::Up => candidates
                .filter(|c| *c >= value - slack)
                .fold(f64::INFINITY, f64::min),
            Direction::Down => candidates
                .filter(|c| *c <= value + slack)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// `mantissa * 10^decade`, rounded to the mantissa's two significant digits.
fn preferred(mantissa: f64, decade: i32) -> f64 {
    let scaled = (mantissa * 10.0).round();
    if decade >= 1 {
        scaled * 10f64.powi(decade - 1)
    } else {
        scaled / 10f64.powi(1 - decade)
    }
}

#[derive(Clone, Copy)]
enum Direction {
    Up,
    Down,
}

impl fmt::Display for Snap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Snap::None => "none",
            Snap::E12 => "E12",
            Snap::E24 => "E24",
        })
    }
}

impl FromStr for Snap {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Snap::None),
            "e12" => Ok(Snap::E12),
            "e24" => Ok(Snap::E24),
            other => Err(format!(
                "unknown series '{other}' (expected none, e12 or e24)"
            )),
        }
    }
}
