//! Regression design matrices: polynomial (Vandermonde), truncated-power
//! spline and B-spline bases.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::dataset::fmt_num;

/// Dense `m × d` regression matrix for one curve.
pub type DesignMatrix = DMatrix<f64>;

#[derive(Debug, Error, PartialEq)]
pub enum BasisError {
    #[error("spline order must be at least 1")]
    ZeroOrder,
    #[error("boundary knots must satisfy lower < upper, got ({0}, {1})")]
    BadBoundary(f64, f64),
    #[error("interior knot {index} ({value}) lies outside the open boundary interval ({lower}, {upper})")]
    KnotOutside {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("interior knots are not strictly increasing at position {0}")]
    KnotsNotIncreasing(usize),
    #[error("abscissa {value} lies outside the boundary knots [{lower}, {upper}]")]
    OutsideBoundary { value: f64, lower: f64, upper: f64 },
    #[error("unknown basis family `{0}` (expected poly, spline or bspline)")]
    UnknownFamily(String),
    #[error("bad design setting `{key}`: {message}")]
    Config { key: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisFamily {
    Polynomial,
    Spline,
    BSpline,
}

impl FromStr for BasisFamily {
    type Err = BasisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "poly" | "polynomial" => Ok(Self::Polynomial),
            "spline" => Ok(Self::Spline),
            "bspline" => Ok(Self::BSpline),
            other => Err(BasisError::UnknownFamily(other.to_string())),
        }
    }
}

impl fmt::Display for BasisFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Polynomial => "poly",
            Self::Spline => "spline",
            Self::BSpline => "bspline",
        })
    }
}

/// Basis family together with its degree and knots.
///
/// For the spline families `degree = order - 1` and `boundary` holds the two
/// outer knots; polynomials carry no knots.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    family: BasisFamily,
    degree: usize,
    interior_knots: Vec<f64>,
    boundary: Option<(f64, f64)>,
}

impl DesignSpec {
    pub fn polynomial(degree: usize) -> Self {
        Self {
            family: BasisFamily::Polynomial,
            degree,
            interior_knots: Vec::new(),
            boundary: None,
        }
    }

    /// Truncated-power spline of the given order (degree + 1).
    pub fn spline(order: usize, interior_knots: Vec<f64>, boundary: (f64, f64)) -> Result<Self, BasisError> {
        Self::with_knots(BasisFamily::Spline, order, interior_knots, boundary)
    }

    /// B-spline of the given order (degree + 1).
    pub fn bspline(order: usize, interior_knots: Vec<f64>, boundary: (f64, f64)) -> Result<Self, BasisError> {
        Self::with_knots(BasisFamily::BSpline, order, interior_knots, boundary)
    }

    /// Spline-family spec with `n_knots` equispaced interior knots on `[lower, upper]`.
    /// For [`BasisFamily::Polynomial`] `order` is read as `degree + 1`.
    pub fn equispaced(
        family: BasisFamily,
        order: usize,
        n_knots: usize,
        lower: f64,
        upper: f64,
    ) -> Result<Self, BasisError> {
        match family {
            BasisFamily::Polynomial => {
                if order == 0 {
                    return Err(BasisError::ZeroOrder);
                }
                Ok(Self::polynomial(order - 1))
            }
            _ => {
                if !(lower < upper) {
                    return Err(BasisError::BadBoundary(lower, upper));
                }
                let knots = equispaced_knots(lower, upper, n_knots);
                Self::with_knots(family, order, knots, (lower, upper))
            }
        }
    }

    fn with_knots(
        family: BasisFamily,
        order: usize,
        interior_knots: Vec<f64>,
        boundary: (f64, f64),
    ) -> Result<Self, BasisError> {
        if order == 0 {
            return Err(BasisError::ZeroOrder);
        }
        let (lower, upper) = boundary;
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(BasisError::BadBoundary(lower, upper));
        }
        for (index, &value) in interior_knots.iter().enumerate() {
            if !(value > lower && value < upper) {
                return Err(BasisError::KnotOutside {
                    index,
                    value,
                    lower,
                    upper,
                });
            }
        }
        if let Some(p) = interior_knots.windows(2).position(|w| w[1] <= w[0]) {
            return Err(BasisError::KnotsNotIncreasing(p + 1));
        }
        Ok(Self {
            family,
            degree: order - 1,
            interior_knots,
            boundary: Some(boundary),
        })
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn order(&self) -> usize {
        self.degree + 1
    }

    pub fn interior_knots(&self) -> &[f64] {
        &self.interior_knots
    }

    pub fn boundary(&self) -> Option<(f64, f64)> {
        self.boundary
    }

    /// Number of regression coefficients: `p + 1` or `L + M`.
    pub fn dim(&self) -> usize {
        match self.family {
            BasisFamily::Polynomial => self.degree + 1,
            _ => self.interior_knots.len() + self.order(),
        }
    }

    /// Builds the design matrix for abscissae `x`.
    pub fn design(&self, x: &[f64]) -> Result<DesignMatrix, BasisError> {
        match self.family {
            BasisFamily::Polynomial => Ok(polynomial_design(x, self.degree)),
            BasisFamily::Spline => Ok(spline_design(x, self)),
            BasisFamily::BSpline => bspline_design(x, self),
        }
    }

    /// Flat `key=value` pairs, the same keys the CLI accepts as flags.
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let mut out = vec![("basis".to_string(), self.family.to_string())];
        match self.family {
            BasisFamily::Polynomial => out.push(("degree".into(), self.degree.to_string())),
            _ => {
                out.push(("order".into(), self.order().to_string()));
                let knots: Vec<String> = self.interior_knots.iter().map(|k| fmt_num(*k)).collect();
                out.push(("knot-positions".into(), knots.join(";")));
                let (lo, hi) = self.boundary.expect("spline specs carry a boundary");
                out.push(("boundary".into(), format!("{};{}", fmt_num(lo), fmt_num(hi))));
            }
        }
        out
    }

    /// Inverse of [`DesignSpec::to_key_values`].
    pub fn from_key_values(map: &BTreeMap<String, String>) -> Result<Self, BasisError> {
        let get = |key: &str| {
            map.get(key).ok_or_else(|| BasisError::Config {
                key: key.into(),
                message: "missing".into(),
            })
        };
        let int = |key: &str| -> Result<usize, BasisError> {
            get(key)?.trim().parse().map_err(|_| BasisError::Config {
                key: key.into(),
                message: "not a non-negative integer".into(),
            })
        };
        let floats = |key: &str| -> Result<Vec<f64>, BasisError> {
            get(key)?
                .split(';')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| BasisError::Config {
                        key: key.into(),
                        message: format!("cannot parse `{s}`"),
                    })
                })
                .collect()
        };
        let family: BasisFamily = get("basis")?.parse()?;
        match family {
            BasisFamily::Polynomial => Ok(Self::polynomial(int("degree")?)),
            _ => {
                let bounds = floats("boundary")?;
                if bounds.len() != 2 {
                    return Err(BasisError::Config {
                        key: "boundary".into(),
                        message: "expected two values".into(),
                    });
                }
                Self::with_knots(family, int("order")?, floats("knot-positions")?, (bounds[0], bounds[1]))
            }
        }
    }
}

/// Interior knots `lower + l (upper - lower) / (L + 1)` for `l = 1..=L`.
pub fn equispaced_knots(lower: f64, upper: f64, n_knots: usize) -> Vec<f64> {
    let step = (upper - lower) / (n_knots + 1) as f64;
    (1..=n_knots).map(|l| lower + l as f64 * step).collect()
}

/// Vandermonde matrix with rows `(1, x, x², …, x^p)`.
pub fn polynomial_design(x: &[f64], degree: usize) -> DesignMatrix {
    DMatrix::from_fn(x.len(), degree + 1, |j, k| x[j].powi(k as i32))
}

/// `(u)_+^p` with the convention `0⁰ = 1`.
fn truncated_power(u: f64, p: usize) -> f64 {
    if u < 0.0 {
        0.0
    } else if p == 0 {
        1.0
    } else {
        u.powi(p as i32)
    }
}

/// Truncated-power basis: polynomial columns followed by `(x - ξ_l)_+^p`.
pub fn spline_design(x: &[f64], spec: &DesignSpec) -> DesignMatrix {
    let p = spec.degree;
    let knots = &spec.interior_knots;
    DMatrix::from_fn(x.len(), p + 1 + knots.len(), |j, c| {
        if c <= p {
            x[j].powi(c as i32)
        } else {
            truncated_power(x[j] - knots[c - p - 1], p)
        }
    })
}

/// Augmented knot sequence: `M` copies of each boundary knot around the
/// interior knots (length `L + 2M`).
pub fn augment_knots(spec: &DesignSpec) -> Vec<f64> {
    let m = spec.order();
    let (lower, upper) = spec.boundary.unwrap_or((0.0, 1.0));
    let mut zeta = Vec::with_capacity(spec.interior_knots.len() + 2 * m);
    zeta.extend(std::iter::repeat_n(lower, m));
    zeta.extend_from_slice(&spec.interior_knots);
    zeta.extend(std::iter::repeat_n(upper, m));
    zeta
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Values of all `L + M` order-`M` B-splines at `x` (Cox–de Boor).
pub fn bspline_row(x: f64, zeta: &[f64], order: usize) -> Vec<f64> {
    let intervals = zeta.len() - 1;
    let upper = zeta[zeta.len() - 1];
    // the last non-degenerate interval is closed on the right
    let last = (0..intervals).rev().find(|&l| zeta[l] < zeta[l + 1]);
    let mut b: Vec<f64> = (0..intervals)
        .map(|l| {
            let inside = zeta[l] <= x && x < zeta[l + 1];
            let at_end = x == upper && Some(l) == last;
            if inside || at_end {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for k in 2..=order {
        b = (0..=intervals - k)
            .map(|l| {
                let left = ratio(x - zeta[l], zeta[l + k - 1] - zeta[l]) * b[l];
                let right = ratio(zeta[l + k] - x, zeta[l + k] - zeta[l + 1]) * b[l + 1];
                left + right
            })
            .collect();
    }
    b
}

/// B-spline design matrix; every abscissa must lie within the boundary knots.
pub fn bspline_design(x: &[f64], spec: &DesignSpec) -> Result<DesignMatrix, BasisError> {
    let (lower, upper) = spec.boundary.unwrap_or((0.0, 1.0));
    if let Some(&value) = x.iter().find(|&&v| !(v >= lower && v <= upper)) {
        return Err(BasisError::OutsideBoundary { value, lower, upper });
    }
    let zeta = augment_knots(spec);
    let order = spec.order();
    let d = spec.dim();
    let mut out = DMatrix::zeros(x.len(), d);
    for (j, &xj) in x.iter().enumerate() {
        for (c, v) in bspline_row(xj, &zeta, order).into_iter().enumerate() {
            out[(j, c)] = v;
        }
    }
    Ok(out)
}
