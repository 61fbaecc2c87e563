//! Process families, grid points and joint spectral grids.
//!
//! A coordinate of the rotated process is the scalar linear process
//! `x_t = sigma * sum_l f_l(params) z_{t-l}` with `f_0 = 1`. A [`GridPoint`]
//! carries `(params, sigma)`; the [`ProcessFamily`] maps it to the impulse
//! response `f_l`, the transfer function `psi`, the spectral density `h =
//! |psi|^2` and the autocovariances `gamma_l`.
//!
//! Coefficient conventions:
//!
//! - `AR(q)`: `x_t = sum_k a_k x_{t-k} + sigma z_t`, `params = [a_1..a_q]`.
//! - `MA(q)`: `x_t = sigma (z_t + sum_k b_k z_{t-k})`, `params = [b_1..b_q]`.
//! - `ARMA(1,1)`: `x_t = a x_{t-1} + sigma (z_t + b z_{t-1})`, `params = [a, b]`.
//! - `IID`: `x_t = sigma z_t`, no params.
//!
//! `sigma` is a standard-deviation scale, so the innovation covariance
//! eigenvalue of a coordinate is `sigma^2`. Grid factors for the innovation
//! covariance are specified as variances and converted on construction.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Magnitude below which an impulse-response coefficient counts as negligible.
pub const COEFF_CUTOFF: f64 = 1e-14;

/// Hard cap on impulse-response length for truncated convolutions.
const MAX_IMPULSE_LEN: usize = 1_000_000;

/// Tolerance for simplex membership of weight vectors.
pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "FamilySpec", into = "FamilySpec")]
pub enum ProcessFamily {
    Iid,
    Ma(usize),
    Ar(usize),
    Arma11,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FamilyKind {
    Iid,
    Ma,
    Ar,
    Arma,
}

/// Serialized form of a [`ProcessFamily`]: `{"family": "AR", "order": 1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: FamilyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
}

impl TryFrom<FamilySpec> for ProcessFamily {
    type Error = Error;

    fn try_from(spec: FamilySpec) -> Result<Self> {
        ProcessFamily::from_kind(spec.family, spec.order)
    }
}

impl From<ProcessFamily> for FamilySpec {
    fn from(f: ProcessFamily) -> Self {
        let (family, order) = match f {
            ProcessFamily::Iid => (FamilyKind::Iid, None),
            ProcessFamily::Ma(q) => (FamilyKind::Ma, Some(q)),
            ProcessFamily::Ar(q) => (FamilyKind::Ar, Some(q)),
            ProcessFamily::Arma11 => (FamilyKind::Arma, Some(1)),
        };
        FamilySpec { family, order }
    }
}

impl fmt::Display for ProcessFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessFamily::Iid => write!(f, "IID"),
            ProcessFamily::Ma(q) => write!(f, "MA({q})"),
            ProcessFamily::Ar(q) => write!(f, "AR({q})"),
            ProcessFamily::Arma11 => write!(f, "ARMA(1,1)"),
        }
    }
}

/// Candidate eigenvalue tuple `(params, sigma)` of one coordinate process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub params: Vec<f64>,
    pub sigma: f64,
}

impl GridPoint {
    pub fn new(params: Vec<f64>, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
        }
        if let Some(x) = params.iter().find(|x| !x.is_finite()) {
            return Err(Error::domain(format!("non-finite parameter {x}")));
        }
        Ok(Self { params, sigma })
    }

    /// Builds a point from an innovation variance rather than a scale.
    pub fn with_variance(params: Vec<f64>, variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::domain(format!(
                "innovation variance must be positive, got {variance}"
            )));
        }
        Self::new(params, variance.sqrt())
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }
}

impl ProcessFamily {
    pub fn from_kind(kind: FamilyKind, order: Option<usize>) -> Result<Self> {
        match (kind, order) {
            (FamilyKind::Iid, None | Some(0)) => Ok(ProcessFamily::Iid),
            (FamilyKind::Ma, Some(q)) if q >= 1 => Ok(ProcessFamily::Ma(q)),
            (FamilyKind::Ar, Some(q)) if q >= 1 => Ok(ProcessFamily::Ar(q)),
            (FamilyKind::Arma, None | Some(1)) => Ok(ProcessFamily::Arma11),
            (kind, order) => Err(Error::domain(format!(
                "invalid order {order:?} for family {kind:?}"
            ))),
        }
    }

    /// Number of entries in `GridPoint::params`.
    pub fn param_len(&self) -> usize {
        match *self {
            ProcessFamily::Iid => 0,
            ProcessFamily::Ma(q) | ProcessFamily::Ar(q) => q,
            ProcessFamily::Arma11 => 2,
        }
    }

    /// Human-readable names of the parameter coordinates, then `"Sigma"`.
    pub fn factor_names(&self) -> Vec<String> {
        let mut names: Vec<String> = match *self {
            ProcessFamily::Iid => Vec::new(),
            ProcessFamily::Ar(1) => vec!["AR".into()],
            ProcessFamily::Ma(1) => vec!["MA".into()],
            ProcessFamily::Ar(q) => (1..=q).map(|k| format!("A{k}")).collect(),
            ProcessFamily::Ma(q) => (1..=q).map(|k| format!("B{k}")).collect(),
            ProcessFamily::Arma11 => vec!["AR".into(), "MA".into()],
        };
        names.push("Sigma".into());
        names
    }

    fn ar_part<'a>(&self, point: &'a GridPoint) -> &'a [f64] {
        match *self {
            ProcessFamily::Ar(_) => &point.params,
            ProcessFamily::Arma11 => &point.params[..1],
            _ => &[],
        }
    }

    fn ma_part<'a>(&self, point: &'a GridPoint) -> &'a [f64] {
        match *self {
            ProcessFamily::Ma(_) => &point.params,
            ProcessFamily::Arma11 => &point.params[1..],
            _ => &[],
        }
    }

    /// Checks parameter count, the MA box `[-1, 1]` and AR stationarity.
    pub fn validate(&self, point: &GridPoint) -> Result<()> {
        if point.params.len() != self.param_len() {
            return Err(Error::domain(format!(
                "{self} expects {} parameters, got {}",
                self.param_len(),
                point.params.len()
            )));
        }
        if !(point.sigma.is_finite() && point.sigma > 0.0) {
            return Err(Error::domain(format!(
                "sigma must be positive, got {}",
                point.sigma
            )));
        }
        if let Some(b) = self.ma_part(point).iter().find(|b| !(b.abs() <= 1.0)) {
            return Err(Error::domain(format!("MA coefficient {b} outside [-1, 1]")));
        }
        let ar = self.ar_part(point);
        if !ar_is_stationary(ar) {
            return Err(Error::Nonstationary(format!(
                "{self} coefficients {ar:?} have a characteristic root on or inside the unit circle"
            )));
        }
        Ok(())
    }

    /// Impulse-response coefficient `f_l` (without the `sigma` factor).
    pub fn transfer_coeff(&self, point: &GridPoint, ell: usize) -> Result<f64> {
        self.validate(point)?;
        Ok(match *self {
            ProcessFamily::Iid => f64::from(u8::from(ell == 0)),
            ProcessFamily::Ma(_) => match ell {
                0 => 1.0,
                l => point.params.get(l - 1).copied().unwrap_or(0.0),
            },
            ProcessFamily::Arma11 => {
                let (a, b) = (point.params[0], point.params[1]);
                if ell == 0 {
                    1.0
                } else {
                    a.powi(ell as i32 - 1) * (a + b)
                }
            }
            ProcessFamily::Ar(_) => ImpulseResponse::new(*self, point).nth(ell).unwrap_or(0.0),
        })
    }

    /// Transfer function `psi(params, theta) = sigma * sum_l f_l e^{i l theta}`.
    pub fn transfer_psi(&self, point: &GridPoint, theta: f64) -> Result<C64> {
        self.validate(point)?;
        Ok(self.psi_unchecked(point, theta))
    }

    /// Spectral density `h = |psi|^2`.
    pub fn spectral_h(&self, point: &GridPoint, theta: f64) -> Result<f64> {
        self.validate(point)?;
        Ok(self.h_unchecked(point, theta))
    }

    /// `psi` for a point already validated against this family.
    pub(crate) fn psi_unchecked(&self, point: &GridPoint, theta: f64) -> C64 {
        let e = |k: usize| C64::from_polar(1.0, k as f64 * theta);
        let mut num = C64::new(1.0, 0.0);
        for (k, b) in self.ma_part(point).iter().enumerate() {
            num += e(k + 1) * *b;
        }
        let mut den = C64::new(1.0, 0.0);
        for (k, a) in self.ar_part(point).iter().enumerate() {
            den -= e(k + 1) * *a;
        }
        num / den * point.sigma
    }

    pub(crate) fn h_unchecked(&self, point: &GridPoint, theta: f64) -> f64 {
        self.psi_unchecked(point, theta).norm_sqr()
    }

    /// Lag-`ell` autocovariance of the coordinate process.
    ///
    /// AR(1) uses `sigma^2 a^ell / (1 - a^2)`; every other family uses the
    /// truncated convolution `sigma^2 sum_k f_k f_{k+ell}`.
    pub fn autocov(&self, point: &GridPoint, ell: usize) -> Result<f64> {
        self.validate(point)?;
        if let ProcessFamily::Ar(1) = self {
            let a = point.params[0];
            return Ok(point.sigma2() * a.powi(ell as i32) / (1.0 - a * a));
        }
        let coeffs: Vec<f64> = ImpulseResponse::new(*self, point).collect();
        let sum: f64 = coeffs
            .iter()
            .zip(coeffs.iter().skip(ell))
            .map(|(x, y)| x * y)
            .sum();
        Ok(point.sigma2() * sum)
    }

    /// `(1/2pi) int h dtheta` by the trapezoid rule on `quad_points` nodes.
    pub fn parseval_gamma0(&self, point: &GridPoint, quad_points: usize) -> Result<f64> {
        if quad_points < 64 {
            return Err(Error::domain(format!(
                "need at least 64 quadrature points, got {quad_points}"
            )));
        }
        self.validate(point)?;
        let total: f64 = (1..=quad_points)
            .map(|t| self.h_unchecked(point, 2.0 * PI * t as f64 / quad_points as f64))
            .sum();
        Ok(total / quad_points as f64)
    }
}

/// Schur-Cohn step-down test for `1 - sum a_k z^k` having all roots outside
/// the unit circle.
pub fn ar_is_stationary(coeffs: &[f64]) -> bool {
    let mut a = coeffs.to_vec();
    while let Some(&kappa) = a.last() {
        if !(kappa.abs() < 1.0) {
            return false;
        }
        let m = a.len();
        let denom = 1.0 - kappa * kappa;
        let reduced: Vec<f64> = (0..m - 1)
            .map(|k| (a[k] + kappa * a[m - 2 - k]) / denom)
            .collect();
        a = reduced;
    }
    true
}

/// Iterator over `f_0, f_1, ...` stopping once the tail is negligible.
///
/// For families with an autoregressive part the sequence ends after `q`
/// consecutive coefficients below [`COEFF_CUTOFF`] (later terms are linear in
/// the last `q`, so they stay negligible).
pub struct ImpulseResponse {
    ar: Vec<f64>,
    ma: Vec<f64>,
    history: Vec<f64>,
    small_run: usize,
    done: bool,
}

impl ImpulseResponse {
    pub(crate) fn new(family: ProcessFamily, point: &GridPoint) -> Self {
        Self {
            ar: family.ar_part(point).to_vec(),
            ma: family.ma_part(point).to_vec(),
            history: Vec::new(),
            small_run: 0,
            done: false,
        }
    }
}

impl Iterator for ImpulseResponse {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        if self.done {
            return None;
        }
        let l = self.history.len();
        let ma_term = match l {
            0 => 1.0,
            l => self.ma.get(l - 1).copied().unwrap_or(0.0),
        };
        let ar_term: f64 = self
            .ar
            .iter()
            .enumerate()
            .filter(|(k, _)| *k < l)
            .map(|(k, a)| a * self.history[l - k - 1])
            .sum();
        let f = ma_term + ar_term;
        self.history.push(f);

        if self.ar.is_empty() {
            if l >= self.ma.len() {
                self.done = true;
            }
        } else if l >= self.ma.len() {
            if f.abs() < COEFF_CUTOFF {
                self.small_run += 1;
                if self.small_run >= self.ar.len() {
                    self.done = true;
                }
            } else {
                self.small_run = 0;
            }
        }
        if self.history.len() >= MAX_IMPULSE_LEN {
            self.done = true;
        }
        Some(f)
    }
}

/// Step CDF of a finite mixture of point masses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepCdf {
    /// `(location, mass)` sorted by location with duplicates merged.
    atoms: Vec<(f64, f64)>,
}

impl StepCdf {
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        Self { atoms: merged }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .take_while(|(a, _)| *a <= x)
            .map(|(_, w)| w)
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridStructure {
    /// One weight per point of the grid.
    Full,
    /// One simplex per factor; point weights are products of factor weights.
    Product,
}

/// Values (and weights) of one marginal factor of a product grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

/// Serialized description of a [`JointSpectralGrid`].
///
/// `factors` lists one entry per parameter coordinate followed by the
/// innovation-variance factor. The grid points are the Cartesian product of
/// the factor values. In `full` mode `weights` (length = number of points)
/// gives the point weights; in `product` mode each factor carries its own.
/// Missing weights default to uniform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    #[serde(flatten)]
    pub family: FamilySpec,
    pub structure: GridStructure,
    pub factors: Vec<Factor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

/// Mixture of point masses `F^{A,Sigma}` on a finite grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridConfig", into = "GridConfig")]
pub struct JointSpectralGrid {
    family: ProcessFamily,
    structure: GridStructure,
    points: Vec<GridPoint>,
    /// Full weights, one per point.
    weights: Vec<f64>,
    /// Factor values when the grid is a Cartesian product.
    factor_values: Option<Vec<Vec<f64>>>,
    /// Per-factor weights in product mode.
    factor_weights: Option<Vec<Vec<f64>>>,
}

pub(crate) fn check_simplex(w: &[f64], what: &str) -> Result<()> {
    if w.is_empty() {
        return Err(Error::domain(format!("{what}: empty weight vector")));
    }
    if let Some(x) = w.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::domain(format!("{what}: invalid weight {x}")));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::domain(format!("{what}: weights sum to {s}, expected 1")));
    }
    Ok(())
}

fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Row-major Cartesian product (first factor varies slowest).
fn cartesian_indices(sizes: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = sizes.iter().product();
    (0..total)
        .map(|mut flat| {
            let mut idx = vec![0; sizes.len()];
            for (k, &s) in sizes.iter().enumerate().rev() {
                idx[k] = flat % s;
                flat /= s;
            }
            idx
        })
        .collect()
}

impl JointSpectralGrid {
    /// Full grid over explicit points.
    pub fn full(family: ProcessFamily, points: Vec<GridPoint>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::domain(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        for p in &points {
            family.validate(p)?;
        }
        check_simplex(&weights, "grid weights")?;
        Ok(Self {
            family,
            structure: GridStructure::Full,
            points,
            weights,
            factor_values: None,
            factor_weights: None,
        })
    }

    fn product_points(family: ProcessFamily, values: &[Vec<f64>]) -> Result<Vec<GridPoint>> {
        let m = family.param_len();
        if values.len() != m + 1 {
            return Err(Error::domain(format!(
                "{family} needs {} factors ({} parameters + innovation variance), got {}",
                m + 1,
                m,
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| v.is_empty()) {
            return Err(Error::domain(format!("factor {k} has no values")));
        }
        let sizes: Vec<usize> = values.iter().map(Vec::len).collect();
        cartesian_indices(&sizes)
            .into_iter()
            .map(|idx| {
                let params = (0..m).map(|k| values[k][idx[k]]).collect();
                let point = GridPoint::with_variance(params, values[m][idx[m]])?;
                family.validate(&point)?;
                Ok(point)
            })
            .collect()
    }

    /// Full grid over the Cartesian product of factor values.
    pub fn full_from_factors(
        family: ProcessFamily,
        factor_values: Vec<Vec<f64>>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let points = Self::product_points(family, &factor_values)?;
        let mut grid = Self::full(family, points, weights)?;
        grid.factor_values = Some(factor_values);
        Ok(grid)
    }

    /// Product grid: one weight vector per factor.
    pub fn product(
        family: ProcessFamily,
        factor_values: Vec<Vec<f64>>,
        factor_weights: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let points = Self::product_points(family, &factor_values)?;
        if factor_weights.len() != factor_values.len() {
            return Err(Error::domain("one weight vector per factor is required"));
        }
        for (k, (v, w)) in factor_values.iter().zip(&factor_weights).enumerate() {
            if v.len() != w.len() {
                return Err(Error::domain(format!(
                    "factor {k}: {} values but {} weights",
                    v.len(),
                    w.len()
                )));
            }
            check_simplex(w, &format!("factor {k}"))?;
        }
        let weights = product_weights(&factor_weights);
        Ok(Self {
            family,
            structure: GridStructure::Product,
            points,
            weights,
            factor_values: Some(factor_values),
            factor_weights: Some(factor_weights),
        })
    }

    pub fn family(&self) -> ProcessFamily {
        self.family
    }

    pub fn structure(&self) -> GridStructure {
        self.structure
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    /// Full weights (one per point; products of factor weights in product mode).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn factor_values(&self) -> Option<&[Vec<f64>]> {
        self.factor_values.as_deref()
    }

    pub fn factor_weights(&self) -> Option<&[Vec<f64>]> {
        self.factor_weights.as_deref()
    }

    /// Sizes of the per-factor simplices in product mode.
    pub fn factor_sizes(&self) -> Option<Vec<usize>> {
        self.factor_values
            .as_ref()
            .map(|v| v.iter().map(Vec::len).collect())
    }

    /// Same atoms, new full weights. Product structure is dropped.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        let mut grid = Self::full(self.family, self.points.clone(), weights)?;
        grid.factor_values = self.factor_values.clone();
        Ok(grid)
    }

    /// Same atoms, new per-factor weights.
    pub fn with_factor_weights(&self, factor_weights: Vec<Vec<f64>>) -> Result<Self> {
        let values = self
            .factor_values
            .clone()
            .ok_or_else(|| Error::domain("grid has no factor structure"))?;
        Self::product(self.family, values, factor_weights)
    }

    /// Product mode expanded to an equivalent full grid.
    pub fn expand_to_full(&self) -> Self {
        Self {
            structure: GridStructure::Full,
            factor_weights: None,
            ..self.clone()
        }
    }

    /// Value of marginal coordinate `k` at a point: parameter `k`, or the
    /// innovation variance when `k == param_len()`.
    fn coordinate(&self, point: &GridPoint, k: usize) -> f64 {
        if k < self.family.param_len() {
            point.params[k]
        } else {
            point.sigma2()
        }
    }

    /// Marginal step CDF of coordinate `k` (see [`Self::factor_names`]).
    pub fn marginal(&self, k: usize) -> Result<StepCdf> {
        if k > self.family.param_len() {
            return Err(Error::domain(format!("no marginal coordinate {k}")));
        }
        // factor values as given, so variances do not pass through sqrt and back
        if let Some(values) = &self.factor_values {
            let sizes: Vec<usize> = values.iter().map(Vec::len).collect();
            return Ok(StepCdf::new(
                cartesian_indices(&sizes)
                    .into_iter()
                    .zip(&self.weights)
                    .map(|(idx, w)| (values[k][idx[k]], *w)),
            ));
        }
        Ok(StepCdf::new(
            self.points
                .iter()
                .zip(&self.weights)
                .map(|(p, w)| (self.coordinate(p, k), *w)),
        ))
    }

    pub fn factor_names(&self) -> Vec<String> {
        self.family.factor_names()
    }

    pub fn to_config(&self) -> GridConfig {
        match (&self.factor_values, self.structure) {
            (Some(values), GridStructure::Product) => GridConfig {
                family: self.family.into(),
                structure: GridStructure::Product,
                factors: values
                    .iter()
                    .zip(
                        self.factor_weights
                            .as_ref()
                            .expect("product grid has factor weights"),
                    )
                    .map(|(v, w)| Factor {
                        values: v.clone(),
                        weights: Some(w.clone()),
                    })
                    .collect(),
                weights: None,
            },
            (Some(values), GridStructure::Full) => GridConfig {
                family: self.family.into(),
                structure: GridStructure::Full,
                factors: values
                    .iter()
                    .map(|v| Factor {
                        values: v.clone(),
                        weights: None,
                    })
                    .collect(),
                weights: Some(self.weights.clone()),
            },
            (None, _) => {
                // explicit points: one single-valued factor list per point is not
                // representable, so encode each point as its own full grid row
                let m = self.family.param_len();
                let mut factors: Vec<Factor> = (0..=m)
                    .map(|_| Factor {
                        values: Vec::new(),
                        weights: None,
                    })
                    .collect();
                for p in &self.points {
                    for (k, f) in factors.iter_mut().enumerate() {
                        f.values.push(self.coordinate(p, k));
                    }
                }
                GridConfig {
                    family: self.family.into(),
                    structure: GridStructure::Full,
                    factors,
                    weights: Some(self.weights.clone()),
                }
            }
        }
    }
}

/// Full weights implied by per-factor weights (row-major product order).
pub fn product_weights(factor_weights: &[Vec<f64>]) -> Vec<f64> {
    let sizes: Vec<usize> = factor_weights.iter().map(Vec::len).collect();
    cartesian_indices(&sizes)
        .into_iter()
        .map(|idx| {
            idx.iter()
                .enumerate()
                .map(|(k, &i)| factor_weights[k][i])
                .product()
        })
        .collect()
}

impl TryFrom<GridConfig> for JointSpectralGrid {
    type Error = Error;

    fn try_from(cfg: GridConfig) -> Result<Self> {
        let family = ProcessFamily::try_from(cfg.family)?;
        let values: Vec<Vec<f64>> = cfg.factors.iter().map(|f| f.values.clone()).collect();
        match cfg.structure {
            GridStructure::Product => {
                let weights = cfg
                    .factors
                    .iter()
                    .map(|f| f.weights.clone().unwrap_or_else(|| uniform(f.values.len())))
                    .collect();
                Self::product(family, values, weights)
            }
            GridStructure::Full => {
                // factors of equal length with no per-factor weights and
                // explicit full weights of that same length describe a point
                // list; otherwise the grid is the Cartesian product
                let j: usize = values.iter().map(Vec::len).product();
                let weights = cfg.weights.unwrap_or_else(|| uniform(j));
                let listed = values.iter().all(|v| v.len() == weights.len()) && weights.len() != j;
                if listed {
                    let m = family.param_len();
                    let points = (0..weights.len())
                        .map(|i| {
                            GridPoint::with_variance((0..m).map(|k| values[k][i]).collect(), values[m][i])
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Self::full(family, points, weights)
                } else {
                    Self::full_from_factors(family, values, weights)
                }
            }
        }
    }
}

impl From<JointSpectralGrid> for GridConfig {
    fn from(g: JointSpectralGrid) -> Self {
        g.to_config()
    }
}
