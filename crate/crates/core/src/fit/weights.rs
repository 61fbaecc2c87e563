//! Weight-function families and the `z` grid.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::spectra::{WeightFunction, WeightKind};
use crate::{Error, Result, C64};

pub const DEFAULT_SHIFT: f64 = 0.05;

/// `5 x 25` grid (real parts `0.1..0.5`, imaginary parts `-2..2`) folded into
/// the upper half plane: imaginary parts are replaced by their absolute
/// values, the real-axis row is dropped and duplicates removed (60 points).
pub fn default_z_grid() -> Vec<C64> {
    let mut out = Vec::new();
    for r in 1..=5 {
        let re = r as f64 / 10.0;
        for k in 0..25i32 {
            out.push(C64::new(re, f64::from(k - 12) / 6.0));
        }
    }
    fold_upper(&out)
}

/// Reflects `z` with negative imaginary part to `conj(z)`, drops real
/// points and duplicates, keeping first-seen order.
pub fn fold_upper(z: &[C64]) -> Vec<C64> {
    let mut out: Vec<C64> = Vec::new();
    for zz in z {
        if zz.im == 0.0 || !zz.re.is_finite() || !zz.im.is_finite() {
            continue;
        }
        let w = C64::new(zz.re, zz.im.abs());
        if !out.contains(&w) {
            out.push(w);
        }
    }
    out
}

/// Clamped uniform B-spline basis of `count` functions on `[0, 2 pi]`, each
/// shifted by `shift`. The degree is cubic when `count >= 4`.
pub fn bspline_weights(count: usize, shift: f64) -> Result<Vec<WeightFunction>> {
    if count == 0 {
        return Err(Error::domain("B-spline count must be at least 1"));
    }
    if !(shift.is_finite() && shift >= 0.0) {
        return Err(Error::domain(format!("shift must be >= 0, got {shift}")));
    }
    let degree = 3.min(count - 1);
    let spans = count - degree;
    let h = 2.0 * PI / spans as f64;
    let mut knots = vec![0.0; degree + 1];
    knots.extend((1..spans).map(|i| i as f64 * h));
    knots.extend(std::iter::repeat_n(2.0 * PI, degree + 1));
    // |B'| <= degree / (minimum support span), and every span here is >= h
    let lipschitz = if degree == 0 { 0.0 } else { degree as f64 / h };
    Ok((0..count)
        .map(|index| WeightFunction {
            kind: WeightKind::Bspline {
                knots: knots.clone(),
                degree,
                index,
            },
            shift,
            lipschitz_bound: lipschitz,
        })
        .collect())
}

/// `2 pi / delta` periodic triangle bumps of half-width `delta`, centred at
/// `k delta`, each with unit peak and integral `delta`, plus the shift.
pub fn narrowband_weights(delta: f64, shift: f64) -> Result<Vec<WeightFunction>> {
    if !(delta > 0.0 && delta < PI) {
        return Err(Error::domain(format!("delta must lie in (0, pi), got {delta}")));
    }
    let count = 2.0 * PI / delta;
    if (count - count.round()).abs() > 1e-9 * count {
        return Err(Error::domain(format!("2 pi / delta = {count} is not an integer")));
    }
    Ok((0..count.round() as usize)
        .map(|k| WeightFunction {
            kind: WeightKind::Bump {
                center: k as f64 * delta,
                delta,
            },
            shift,
            lipschitz_bound: 1.0 / delta,
        })
        .collect())
}

/// Named weight-function families selectable from configs and the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GFamily {
    Bspline(usize),
    Constant,
    /// Bumps of half-width `delta`.
    Narrowband(f64),
}

impl GFamily {
    pub const DEFAULT_NARROWBAND_DELTA: f64 = PI / 4.0;

    pub fn build(&self) -> Result<Vec<WeightFunction>> {
        match *self {
            GFamily::Bspline(count) => bspline_weights(count, DEFAULT_SHIFT),
            GFamily::Constant => Ok(vec![WeightFunction::constant(1.0)?]),
            GFamily::Narrowband(delta) => narrowband_weights(delta, DEFAULT_SHIFT),
        }
    }
}

impl FromStr for GFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "constant" {
            return Ok(GFamily::Constant);
        }
        if let Some(rest) = s.strip_prefix("narrowband") {
            return match rest.strip_prefix(':') {
                None if rest.is_empty() => Ok(GFamily::Narrowband(Self::DEFAULT_NARROWBAND_DELTA)),
                Some(bumps) => {
                    let n: usize = bumps
                        .parse()
                        .map_err(|_| Error::domain(format!("bad bump count in '{s}'")))?;
                    if n < 3 {
                        return Err(Error::domain("narrowband needs at least 3 bumps"));
                    }
                    Ok(GFamily::Narrowband(2.0 * PI / n as f64))
                }
                None => Err(Error::domain(format!("unknown weight family '{s}'"))),
            };
        }
        if let Some(count) = s.strip_prefix("bspline") {
            let count: usize = count
                .parse()
                .map_err(|_| Error::domain(format!("bad B-spline count in '{s}'")))?;
            if count == 0 {
                return Err(Error::domain("B-spline count must be at least 1"));
            }
            return Ok(GFamily::Bspline(count));
        }
        Err(Error::domain(format!("unknown weight family '{s}'")))
    }
}

impl TryFrom<String> for GFamily {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl fmt::Display for GFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GFamily::Bspline(c) => write!(f, "bspline{c}"),
            GFamily::Constant => write!(f, "constant"),
            GFamily::Narrowband(d) => write!(f, "narrowband:{}", (2.0 * PI / d).round() as usize),
        }
    }
}

impl From<GFamily> for String {
    fn from(g: GFamily) -> Self {
        g.to_string()
    }
}
