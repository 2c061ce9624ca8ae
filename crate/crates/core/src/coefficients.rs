//! Rate sequences `k_i`, `p_i`, `q_i` of the coagulation-death model and the
//! normalised quantities derived from them.
//!
//! * `d_i = (p_i + q_i) / k_i`: total removal rate per unit uptake rate,
//! * `rho_i = p_i / k_i`: escalator clearance per unit uptake rate,
//! * `z = inf_i d_i`: must be positive for any of the equilibrium series to
//!   converge.
//!
//! Three concrete families are provided: the piecewise-constant family with a
//! sharp switch from clearance to death at cohort `N`, power laws in `i`, and
//! finite tables extended by a constant tail.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    PiecewiseConstant,
    PowerLaw,
    Tabulated,
}

/// `k_i = k`; macrophages with at most `N` particles are cleared (`p_i = 1`),
/// heavier ones die and release their load (`q_i = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstantParams {
    pub k: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

impl PiecewiseConstantParams {
    pub fn new(k: f64, n: usize) -> Result<Self> {
        let params = Self { k, n };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(invalid(format!("k must be positive and finite, got {}", self.k)));
        }
        Ok(())
    }
}

/// `p_i = i^-p`, `q_i = i^q`, `k_i = i^-k` for `i >= 1`, with free index-0
/// values.  Then `d_i = i^a + i^b` and `rho_i = i^b` with `a = q + k` and
/// `b = k - p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawParams {
    pub p_exp: f64,
    pub q_exp: f64,
    pub k_exp: f64,
    #[serde(default = "one")]
    pub p0: f64,
    #[serde(default)]
    pub q0: f64,
    #[serde(default = "one")]
    pub k0: f64,
}

fn one() -> f64 {
    1.0
}

impl PowerLawParams {
    /// Exponents with the default index-0 rates `p_0 = 1, q_0 = 0, k_0 = 1`.
    pub fn new(p_exp: f64, q_exp: f64, k_exp: f64) -> Result<Self> {
        let params = Self {
            p_exp,
            q_exp,
            k_exp,
            p0: 1.0,
            q0: 0.0,
            k0: 1.0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_index_zero(mut self, p0: f64, q0: f64, k0: f64) -> Result<Self> {
        self.p0 = p0;
        self.q0 = q0;
        self.k0 = k0;
        self.validate()?;
        Ok(self)
    }

    /// Picks nonnegative `(p, q, k)` exponents realising the given `(a, b)`.
    ///
    /// The equilibrium function depends on the exponents only through `a`
    /// and `b`; we take `k = max(b, 0)`.  No nonnegative triple exists when
    /// `b > a`.
    pub fn from_ab(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a < 0.0 {
            return Err(invalid(format!("need finite a >= 0 and finite b, got a={a}, b={b}")));
        }
        if b > a {
            return Err(invalid(format!(
                "b = {b} > a = {a}: no nonnegative exponents p, q, k realise this pair"
            )));
        }
        let k = b.max(0.0);
        Self::new(k - b, a - k, k)
    }

    pub fn a(&self) -> f64 {
        self.q_exp + self.k_exp
    }

    pub fn b(&self) -> f64 {
        self.k_exp - self.p_exp
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p_exp", self.p_exp), ("q_exp", self.q_exp), ("k_exp", self.k_exp)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} must be nonnegative and finite, got {v}")));
            }
        }
        for (name, v) in [("p0", self.p0), ("q0", self.q0)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} must be nonnegative and finite, got {v}")));
            }
        }
        if !(self.k0.is_finite() && self.k0 > 0.0) {
            return Err(invalid(format!("k0 must be positive, got {}", self.k0)));
        }
        Ok(())
    }
}

/// How a finite table is extended past its last stored index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailPolicy {
    /// Every rate keeps its last stored value.
    #[default]
    Constant,
}

/// Finite tables of `k_i`, `p_i`, `q_i`.
///
/// Users are responsible for the polynomial-growth hypothesis on
/// `q_i / k_i`; it cannot be checked from finite data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedParams {
    pub k: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    #[serde(default)]
    pub tail: TailPolicy,
}

impl TabulatedParams {
    pub fn validate(&self) -> Result<()> {
        let n = self.k.len();
        if n == 0 || self.p.len() != n || self.q.len() != n {
            return Err(invalid(format!(
                "tabulated arrays must be nonempty and of equal length (k: {}, p: {}, q: {})",
                self.k.len(),
                self.p.len(),
                self.q.len()
            )));
        }
        if let Some((i, v)) = self.k.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(invalid(format!("k[{i}] = {v} must be positive")));
        }
        for (name, arr) in [("p", &self.p), ("q", &self.q)] {
            if let Some((i, v)) = arr.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
                return Err(invalid(format!("{name}[{i}] = {v} must be nonnegative")));
            }
        }
        Ok(())
    }
}

/// Serialisable description of a family; this is the config-file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilySpec {
    PiecewiseConstant(PiecewiseConstantParams),
    PowerLaw(PowerLawParams),
    Tabulated(TabulatedParams),
}

impl FamilySpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Quantities for which families can supply polynomial growth envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// `q_i / k_i`
    QOverK,
    /// `rho_i = p_i / k_i`
    Rho,
    /// `d_i`
    D,
    /// `1 / k_i`
    InvK,
}

/// `quantity(i) <= weight * i^exponent` for every `i` at or past the index the
/// envelope was requested for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub weight: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct TableCache {
    d: Vec<f64>,
    suffix_min_d: Vec<f64>,
    suffix_max: [Vec<f64>; 4],
}

/// A validated, immutable coefficient family.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFamily {
    spec: FamilySpec,
    z: f64,
    table: Option<TableCache>,
}

impl CoefficientFamily {
    pub fn new(spec: FamilySpec) -> Result<Self> {
        let table = match &spec {
            FamilySpec::PiecewiseConstant(p) => {
                p.validate()?;
                None
            }
            FamilySpec::PowerLaw(p) => {
                p.validate()?;
                None
            }
            FamilySpec::Tabulated(t) => {
                t.validate()?;
                Some(build_table(t))
            }
        };
        let mut fam = Self { spec, z: 0.0, table };
        fam.z = fam.d(0).min(fam.inf_d_beyond(0));
        Ok(fam)
    }

    pub fn piecewise(k: f64, n: usize) -> Result<Self> {
        Self::new(FamilySpec::PiecewiseConstant(PiecewiseConstantParams::new(k, n)?))
    }

    pub fn power_law(params: PowerLawParams) -> Result<Self> {
        Self::new(FamilySpec::PowerLaw(params))
    }

    pub fn tabulated(k: Vec<f64>, p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        Self::new(FamilySpec::Tabulated(TabulatedParams {
            k,
            p,
            q,
            tail: TailPolicy::Constant,
        }))
    }

    pub fn spec(&self) -> &FamilySpec {
        &self.spec
    }

    pub fn kind(&self) -> FamilyKind {
        match self.spec {
            FamilySpec::PiecewiseConstant(_) => FamilyKind::PiecewiseConstant,
            FamilySpec::PowerLaw(_) => FamilyKind::PowerLaw,
            FamilySpec::Tabulated(_) => FamilyKind::Tabulated,
        }
    }

    pub fn k(&self, i: usize) -> f64 {
        match &self.spec {
            FamilySpec::PiecewiseConstant(pc) => pc.k,
            FamilySpec::PowerLaw(pl) if i == 0 => pl.k0,
            FamilySpec::PowerLaw(pl) => (i as f64).powf(-pl.k_exp),
            FamilySpec::Tabulated(t) => t.k[i.min(t.k.len() - 1)],
        }
    }

    pub fn p(&self, i: usize) -> f64 {
        match &self.spec {
            FamilySpec::PiecewiseConstant(pc) => {
                if i <= pc.n {
                    1.0
                } else {
                    0.0
                }
            }
            FamilySpec::PowerLaw(pl) if i == 0 => pl.p0,
            FamilySpec::PowerLaw(pl) => (i as f64).powf(-pl.p_exp),
            FamilySpec::Tabulated(t) => t.p[i.min(t.p.len() - 1)],
        }
    }

    pub fn q(&self, i: usize) -> f64 {
        match &self.spec {
            FamilySpec::PiecewiseConstant(pc) => {
                if i <= pc.n {
                    0.0
                } else {
                    1.0
                }
            }
            FamilySpec::PowerLaw(pl) if i == 0 => pl.q0,
            FamilySpec::PowerLaw(pl) => (i as f64).powf(pl.q_exp),
            FamilySpec::Tabulated(t) => t.q[i.min(t.q.len() - 1)],
        }
    }

    pub fn d(&self, i: usize) -> f64 {
        match &self.spec {
            FamilySpec::PiecewiseConstant(pc) => 1.0 / pc.k,
            FamilySpec::PowerLaw(pl) if i > 0 => {
                let x = i as f64;
                x.powf(pl.a()) + x.powf(pl.b())
            }
            FamilySpec::Tabulated(_) => {
                let d = &self.table.as_ref().expect("table cache").d;
                d[i.min(d.len() - 1)]
            }
            _ => (self.p(i) + self.q(i)) / self.k(i),
        }
    }

    pub fn rho(&self, i: usize) -> f64 {
        match &self.spec {
            FamilySpec::PowerLaw(pl) if i > 0 => (i as f64).powf(pl.b()),
            _ => self.p(i) / self.k(i),
        }
    }

    pub fn q_over_k(&self, i: usize) -> f64 {
        match &self.spec {
            FamilySpec::PowerLaw(pl) if i > 0 => (i as f64).powf(pl.a()),
            _ => self.q(i) / self.k(i),
        }
    }

    /// `z = inf_i d_i`, computed at construction.
    pub fn z(&self) -> f64 {
        self.z
    }

    /// Fails unless `z > 0`.
    pub fn require_positive_z(&self) -> Result<f64> {
        if self.z > 0.0 && self.z.is_finite() {
            Ok(self.z)
        } else {
            Err(Error::NonPositiveInfimum(self.z))
        }
    }

    /// `z = inf_i d_i`.
    ///
    /// Exact for the piecewise-constant and power-law families, and for
    /// tables under the constant tail policy.  As a cross-check the first
    /// `probe_limit` values of `d_i` are scanned; a scanned value below the
    /// analytic infimum indicates a bug and is reported as an error.
    pub fn infimum_d(&self, probe_limit: usize) -> Result<f64> {
        if probe_limit == 0 {
            return Err(invalid("probe_limit must be at least 1"));
        }
        let z = self.require_positive_z()?;
        let scanned = (0..probe_limit).map(|i| self.d(i)).fold(f64::INFINITY, f64::min);
        if scanned < z * (1.0 - 4.0 * f64::EPSILON) {
            return Err(Error::Consistency {
                what: "scanned d_i below the analytic infimum",
                discrepancy: z - scanned,
                allowed: 4.0 * f64::EPSILON * z,
            });
        }
        Ok(z)
    }

    /// `inf_{j > i} d_j`: a lower bound on every denominator shift past `i`.
    pub fn inf_d_beyond(&self, i: usize) -> f64 {
        match &self.spec {
            FamilySpec::PiecewiseConstant(pc) => 1.0 / pc.k,
            FamilySpec::PowerLaw(pl) => power_sum_inf(pl.a(), pl.b(), i + 1),
            FamilySpec::Tabulated(_) => {
                let cache = self.table.as_ref().expect("table cache");
                let j = (i + 1).min(cache.suffix_min_d.len() - 1);
                cache.suffix_min_d[j]
            }
        }
    }

    /// Geometric ratio `x / (x + z)` bounding every consecutive-term ratio of
    /// `k_i M_i`.
    pub fn ratio_bound(&self, x: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else {
            x / (x + self.z)
        }
    }

    /// Growth envelope of `quantity` valid for all indices `>= from` (`from >= 1`).
    pub fn envelope(&self, quantity: Quantity, from: usize) -> Envelope {
        let from = from.max(1);
        match &self.spec {
            FamilySpec::PiecewiseConstant(pc) => Envelope {
                weight: 1.0 / pc.k,
                exponent: 0.0,
            },
            FamilySpec::PowerLaw(pl) => match quantity {
                Quantity::QOverK => Envelope { weight: 1.0, exponent: pl.a() },
                Quantity::Rho => Envelope { weight: 1.0, exponent: pl.b() },
                Quantity::D => Envelope {
                    weight: 2.0,
                    exponent: pl.a().max(pl.b()),
                },
                Quantity::InvK => Envelope {
                    weight: 1.0,
                    exponent: pl.k_exp,
                },
            },
            FamilySpec::Tabulated(_) => {
                let cache = self.table.as_ref().expect("table cache");
                let arr = &cache.suffix_max[quantity as usize];
                Envelope {
                    weight: arr[from.min(arr.len() - 1)],
                    exponent: 0.0,
                }
            }
        }
    }

    /// Reports where `k_i` or `p_i` increase within the first `probe_limit`
    /// indices; the model assumes both are non-increasing.
    pub fn monotonicity_warnings(&self, probe_limit: usize) -> Vec<String> {
        let mut out = Vec::new();
        for (name, f) in [("k", Self::k as fn(&Self, usize) -> f64), ("p", Self::p)] {
            if let Some(i) = (1..probe_limit).find(|&i| f(self, i) > f(self, i - 1)) {
                out.push(format!(
                    "{name}_i is not non-increasing: {name}_{i} = {} > {name}_{} = {}",
                    f(self, i),
                    i - 1,
                    f(self, i - 1)
                ));
            }
        }
        out
    }
}

/// `inf_{t >= from, t integer} t^a + t^b` for `a >= 0`, `from >= 1`.
pub(crate) fn power_sum_inf(a: f64, b: f64, from: usize) -> f64 {
    let g = |t: f64| t.powf(a) + t.powf(b);
    let t0 = from as f64;
    if b >= 0.0 {
        return g(t0);
    }
    if a == 0.0 {
        // 1 + t^b decreases to 1
        return 1.0;
    }
    // a > 0 > b: g decreases up to t* and increases afterwards
    let t_star = (-b / a).powf(1.0 / (a - b));
    if t_star <= t0 {
        g(t0)
    } else {
        let lo = t_star.floor().max(t0);
        g(lo).min(g(t_star.ceil()))
    }
}

fn build_table(t: &TabulatedParams) -> TableCache {
    let n = t.k.len();
    let d: Vec<f64> = (0..n).map(|i| (t.p[i] + t.q[i]) / t.k[i]).collect();
    let suffix = |vals: Vec<f64>, pick: fn(f64, f64) -> f64| {
        let mut out = vals.clone();
        for i in (0..n.saturating_sub(1)).rev() {
            out[i] = pick(out[i], out[i + 1]);
        }
        out
    };
    let q_over_k = (0..n).map(|i| t.q[i] / t.k[i]).collect();
    let rho = (0..n).map(|i| t.p[i] / t.k[i]).collect();
    let inv_k = t.k.iter().map(|k| 1.0 / k).collect();
    TableCache {
        suffix_min_d: suffix(d.clone(), f64::min),
        suffix_max: [
            suffix(q_over_k, f64::max),
            suffix(rho, f64::max),
            suffix(d.clone(), f64::max),
            suffix(inv_k, f64::max),
        ],
        d,
    }
}
