use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::fem::{Cutout, PlateModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Normal,
    #[serde(alias = "log-normal")]
    LogNormal,
}

/// Spread of a variable: relative (CoV) or absolute standard deviation.
///
/// Parameters whose mean is zero (cutout offsets, ply-angle perturbations)
/// must use an absolute standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dispersion {
    Cov(f64),
    Std(f64),
}

/// Plate parameter driven by a random variable.
///
/// Material bindings act on every ply. Ply indices are zero-based here and
/// one-based in the text form (`thickness.1`, `angle.3`). `Angle` adds a
/// perturbation, in degrees, to both `theta0` and `theta1` of its ply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Binding {
    E1,
    E2,
    G12,
    G13,
    G23,
    Nu12,
    Rho,
    CutoutDiameter,
    CutoutEllipticity,
    CutoutXc,
    CutoutYc,
    Thickness(usize),
    Angle(usize),
}

impl Binding {
    /// Writes `value` into the bound parameter of `plate`.
    pub fn apply(&self, plate: &mut PlateModel, value: f64) -> Result<()> {
        let n = plate.plies.len();
        match *self {
            Binding::E1 => plate.plies.iter_mut().for_each(|p| p.e1 = value),
            Binding::E2 => plate.plies.iter_mut().for_each(|p| p.e2 = value),
            Binding::G12 => plate.plies.iter_mut().for_each(|p| p.g12 = value),
            Binding::G13 => plate.plies.iter_mut().for_each(|p| p.g13 = value),
            Binding::G23 => plate.plies.iter_mut().for_each(|p| p.g23 = value),
            Binding::Nu12 => plate.plies.iter_mut().for_each(|p| p.nu12 = value),
            Binding::Rho => plate.plies.iter_mut().for_each(|p| p.rho = value),
            Binding::CutoutDiameter => cutout(plate, self)?.d_major = value,
            Binding::CutoutEllipticity => cutout(plate, self)?.ellipticity = value,
            Binding::CutoutXc => cutout(plate, self)?.xc = value,
            Binding::CutoutYc => cutout(plate, self)?.yc = value,
            Binding::Thickness(k) | Binding::Angle(k) if k >= n => {
                return Err(Error::Binding(format!("{self} refers to ply {} of a {n}-ply plate", k + 1)));
            }
            Binding::Thickness(k) => plate.plies[k].thickness = value,
            Binding::Angle(k) => {
                plate.plies[k].theta0 += value;
                plate.plies[k].theta1 += value;
            }
        }
        Ok(())
    }

    /// Checks that the binding has a target on `plate`.
    pub fn check(&self, plate: &PlateModel) -> Result<()> {
        self.apply(&mut plate.clone(), 0.0).map(|_| ())
    }
}

fn cutout<'a>(plate: &'a mut PlateModel, binding: &Binding) -> Result<&'a mut Cutout> {
    plate.cutout.as_mut().ok_or_else(|| Error::Binding(format!("{binding} needs a plate with a cutout")))
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Binding::E1 => f.write_str("e1"),
            Binding::E2 => f.write_str("e2"),
            Binding::G12 => f.write_str("g12"),
            Binding::G13 => f.write_str("g13"),
            Binding::G23 => f.write_str("g23"),
            Binding::Nu12 => f.write_str("nu12"),
            Binding::Rho => f.write_str("rho"),
            Binding::CutoutDiameter => f.write_str("d"),
            Binding::CutoutEllipticity => f.write_str("c_over_d"),
            Binding::CutoutXc => f.write_str("xc"),
            Binding::CutoutYc => f.write_str("yc"),
            Binding::Thickness(k) => write!(f, "thickness.{}", k + 1),
            Binding::Angle(k) => write!(f, "angle.{}", k + 1),
        }
    }
}

impl FromStr for Binding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let simple = match s {
            "e1" => Some(Binding::E1),
            "e2" => Some(Binding::E2),
            "g12" => Some(Binding::G12),
            "g13" => Some(Binding::G13),
            "g23" => Some(Binding::G23),
            "nu12" => Some(Binding::Nu12),
            "rho" => Some(Binding::Rho),
            "d" => Some(Binding::CutoutDiameter),
            "c_over_d" => Some(Binding::CutoutEllipticity),
            "xc" => Some(Binding::CutoutXc),
            "yc" => Some(Binding::CutoutYc),
            _ => None,
        };
        if let Some(b) = simple {
            return Ok(b);
        }
        let bad = || Error::Binding(format!("unknown binding target {s:?}"));
        let (kind, idx) = s.split_once('.').ok_or_else(bad)?;
        let k: usize = idx.parse().map_err(|_| bad())?;
        if k == 0 {
            return Err(bad());
        }
        match kind {
            "thickness" => Ok(Binding::Thickness(k - 1)),
            "angle" => Ok(Binding::Angle(k - 1)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Binding {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Binding {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomVariableSpec {
    pub name: String,
    pub target: Binding,
    pub family: Family,
    pub mean: f64,
    pub dispersion: Dispersion,
}

impl RandomVariableSpec {
    pub fn std_dev(&self) -> f64 {
        match self.dispersion {
            Dispersion::Cov(c) => c * self.mean.abs(),
            Dispersion::Std(s) => s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("random variable {:?}: {msg}", self.name)));
        if self.name.is_empty() {
            return Err(Error::InvalidArgument("random variable without a name".into()));
        }
        if !self.mean.is_finite() {
            return bad(format!("mean must be finite, got {}", self.mean));
        }
        match self.dispersion {
            Dispersion::Cov(c) if !(c > 0.0 && c.is_finite()) => return bad(format!("CoV must be positive, got {c}")),
            Dispersion::Cov(_) if self.mean == 0.0 => {
                return bad("zero-mean variables need an absolute standard deviation".into())
            }
            Dispersion::Std(s) if !(s > 0.0 && s.is_finite()) => {
                return bad(format!("standard deviation must be positive, got {s}"))
            }
            _ => {}
        }
        if self.family == Family::LogNormal && !(self.mean > 0.0) {
            return bad(format!("lognormal mean must be positive, got {}", self.mean));
        }
        Ok(())
    }
}

/// Copy of `base` with every bound parameter set from the point `x`.
pub fn realize(base: &PlateModel, specs: &[RandomVariableSpec], x: &[f64]) -> Result<PlateModel> {
    if x.len() != specs.len() {
        return Err(Error::InvalidArgument(format!("point has {} coordinates for {} variables", x.len(), specs.len())));
    }
    let mut plate = base.clone();
    for (s, &v) in specs.iter().zip(x) {
        s.target.apply(&mut plate, v)?;
    }
    Ok(plate)
}

/// One variable per ply for a ply-indexed quantity; names get the one-based
/// ply number appended (`t` becomes `t1, t2, ...`).
pub fn expand_per_ply(
    name: &str,
    ply_binding: fn(usize) -> Binding,
    n_plies: usize,
    family: Family,
    mean: f64,
    dispersion: Dispersion,
) -> Vec<RandomVariableSpec> {
    (0..n_plies)
        .map(|k| RandomVariableSpec {
            name: format!("{name}{}", k + 1),
            target: ply_binding(k),
            family,
            mean,
            dispersion,
        })
        .collect()
}
