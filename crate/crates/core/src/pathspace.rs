//! Discretized bundle morphisms `(X, η): TI → T*M` on a uniform grid of the
//! unit interval, with the Gauss-law constraint, gauge flows, the symplectic
//! pairing and the constraint Hamiltonians `H_β`.
//!
//! `η` is stored as its `du` coefficient sampled at the nodes `u_k = k/N`.
//! Derivatives of `X` are central differences at interior nodes and
//! second-order one-sided differences at the two ends; integrals use the
//! composite trapezoid rule.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Function;
use crate::poisson::{coordinate_names, koszul_components, OneForm, PoissonStructure};

pub const DEFAULT_INTERVALS: usize = 1000;
pub const DEFAULT_FLOW_STEPS: usize = 64;
/// Largest Gauss residual accepted by [`gauge_flow`].
pub const FLOW_RESIDUAL_LIMIT: f64 = 1e-5;
/// Largest `|η|` allowed at a concatenation junction.
pub const JUNCTION_LIMIT: f64 = 1e-6;
/// Largest endpoint mismatch allowed by [`concatenate`].
pub const ENDPOINT_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedMorphism {
    pub n: usize,
    #[serde(rename = "N")]
    pub intervals: usize,
    #[serde(rename = "X")]
    pub x: Vec<Vec<f64>>,
    #[serde(rename = "etaU")]
    pub eta_u: Vec<Vec<f64>>,
}

impl DiscretizedMorphism {
    pub fn new(x: Vec<Vec<f64>>, eta_u: Vec<Vec<f64>>) -> Result<Self> {
        let n = x.first().map(Vec::len).unwrap_or(0);
        let intervals = x.len().saturating_sub(1);
        let m = DiscretizedMorphism {
            n,
            intervals,
            x,
            eta_u,
        };
        m.validate()?;
        Ok(m)
    }

    /// The constant map at `x0` with `η ≡ 0`.
    pub fn constant(x0: &[f64], intervals: usize) -> Self {
        DiscretizedMorphism {
            n: x0.len(),
            intervals,
            x: vec![x0.to_vec(); intervals + 1],
            eta_u: vec![vec![0.0; x0.len()]; intervals + 1],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.intervals < 2 {
            return Err(Error::Grid(format!(
                "need at least 2 intervals, got {}",
                self.intervals
            )));
        }
        if self.n == 0 {
            return Err(Error::Grid("dimension must be positive".into()));
        }
        let len = self.intervals + 1;
        if self.x.len() != len || self.eta_u.len() != len {
            return Err(Error::Grid(format!(
                "expected {len} nodes, got X: {}, etaU: {}",
                self.x.len(),
                self.eta_u.len()
            )));
        }
        if self
            .x
            .iter()
            .chain(&self.eta_u)
            .any(|row| row.len() != self.n || row.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Grid(format!(
                "every node must carry {} finite components",
                self.n
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: DiscretizedMorphism = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("morphism serializes")
    }

    pub fn step(&self) -> f64 {
        1.0 / self.intervals as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        k as f64 / self.intervals as f64
    }

    pub fn nodes(&self) -> usize {
        self.intervals + 1
    }

    pub fn start(&self) -> &[f64] {
        &self.x[0]
    }

    pub fn end(&self) -> &[f64] {
        &self.x[self.intervals]
    }

    /// Nodal derivative `X'(u_k)`.
    pub fn x_derivative(&self) -> Vec<Vec<f64>> {
        nodal_derivative(&self.x, self.step())
    }

    /// `m + t ζ`, node by node.
    pub fn displaced(&self, zeta: &TangentVector, t: f64) -> DiscretizedMorphism {
        let add = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Vec<Vec<f64>> {
            a.iter()
                .zip(b)
                .map(|(r, d)| r.iter().zip(d).map(|(v, dv)| v + t * dv).collect())
                .collect()
        };
        DiscretizedMorphism {
            n: self.n,
            intervals: self.intervals,
            x: add(&self.x, &zeta.dx),
            eta_u: add(&self.eta_u, &zeta.d_eta),
        }
    }

    fn check_dim(&self, s: &PoissonStructure) -> Result<()> {
        if self.n != s.dim() {
            return Err(Error::Dimension {
                expected: s.dim(),
                got: self.n,
            });
        }
        Ok(())
    }
}

/// Reparametrization `s(u)` with `s(0) = 0`, `s(1) = 1` and speed
/// `s'(u) = (8/3) sin⁴(πu)`, returned as `(s, s')`. The speed and its first
/// two derivatives vanish at both ends.
pub fn taper(u: f64) -> (f64, f64) {
    use std::f64::consts::PI;
    let w = 2.0 * PI * u;
    let s = u - 2.0 / (3.0 * PI) * w.sin() + 1.0 / (12.0 * PI) * (2.0 * w).sin();
    let speed = 8.0 / 3.0 * (PI * u).sin().powi(4);
    (s, speed)
}

pub(crate) fn nodal_derivative(values: &[Vec<f64>], h: f64) -> Vec<Vec<f64>> {
    let len = values.len();
    let n = values[0].len();
    (0..len)
        .map(|k| {
            (0..n)
                .map(|i| {
                    if k == 0 {
                        (-3.0 * values[0][i] + 4.0 * values[1][i] - values[2][i]) / (2.0 * h)
                    } else if k == len - 1 {
                        (3.0 * values[k][i] - 4.0 * values[k - 1][i] + values[k - 2][i])
                            / (2.0 * h)
                    } else {
                        (values[k + 1][i] - values[k - 1][i]) / (2.0 * h)
                    }
                })
                .collect()
        })
        .collect()
}

pub(crate) fn trapezoid(values: &[f64], h: f64) -> f64 {
    let last = values.len() - 1;
    let inner: f64 = values[1..last].iter().sum();
    h * (inner + 0.5 * (values[0] + values[last]))
}

fn mat_vec(a: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * v[j]).sum())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Gauss-law defect `C(u_k) = X'(u_k) + α(X(u_k)) η_u(u_k)` at every node.
pub fn gauss_defect(s: &PoissonStructure, m: &DiscretizedMorphism) -> Result<Vec<Vec<f64>>> {
    m.check_dim(s)?;
    let xp = m.x_derivative();
    m.x.iter()
        .zip(&m.eta_u)
        .zip(xp)
        .enumerate()
        .map(|(k, ((x, eta), dx))| {
            let a = s.alpha(x).map_err(|_| Error::ExitedDomain { index: k })?;
            let ae = mat_vec(&a, eta);
            Ok(dx.iter().zip(ae).map(|(d, v)| d + v).collect())
        })
        .collect()
}

/// Max over nodes of `|X' + α(X) η_u|`.
pub fn gauss_residual(s: &PoissonStructure, m: &DiscretizedMorphism) -> Result<f64> {
    Ok(gauss_defect(s, m)?
        .iter()
        .map(|c| norm(c))
        .fold(0.0, f64::max))
}

/// Integrates `X' = -α(X) η_u` from `X(0) = x0` with classical RK4, `η_u`
/// interpolated linearly between nodes.
pub fn solve_gauss(
    s: &PoissonStructure,
    x0: &[f64],
    eta_u: &[Vec<f64>],
    intervals: usize,
) -> Result<DiscretizedMorphism> {
    let n = s.dim();
    if x0.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: x0.len(),
        });
    }
    if eta_u.len() != intervals + 1 {
        return Err(Error::Grid(format!(
            "etaU has {} samples for {} intervals",
            eta_u.len(),
            intervals
        )));
    }
    if !s.contains(x0) {
        return Err(Error::OutsideDomain { point: x0.to_vec() });
    }
    let h = 1.0 / intervals as f64;
    let rhs = |x: &[f64], eta: &[f64], index: usize| -> Result<Vec<f64>> {
        let a = s.alpha(x).map_err(|_| Error::ExitedDomain { index })?;
        Ok(mat_vec(&a, eta).into_iter().map(|v| -v).collect())
    };
    let axpy = |x: &[f64], k: &[f64], t: f64| -> Vec<f64> {
        x.iter().zip(k).map(|(a, b)| a + t * b).collect()
    };
    let mut xs = Vec::with_capacity(intervals + 1);
    xs.push(x0.to_vec());
    for k in 0..intervals {
        let x = &xs[k];
        let e0 = &eta_u[k];
        let e1 = &eta_u[k + 1];
        let em: Vec<f64> = e0.iter().zip(e1).map(|(a, b)| 0.5 * (a + b)).collect();
        let k1 = rhs(x, e0, k + 1)?;
        let k2 = rhs(&axpy(x, &k1, 0.5 * h), &em, k + 1)?;
        let k3 = rhs(&axpy(x, &k2, 0.5 * h), &em, k + 1)?;
        let k4 = rhs(&axpy(x, &k3, h), e1, k + 1)?;
        let next: Vec<f64> = (0..n)
            .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        if !s.contains(&next) {
            return Err(Error::ExitedDomain { index: k + 1 });
        }
        xs.push(next);
    }
    DiscretizedMorphism::new(xs, eta_u.to_vec())
}

/// A gauge parameter `β_i(x, u)` vanishing at `u = 0` and `u = 1`.
/// Variables are `x1..xn, u`.
#[derive(Debug, Clone)]
pub struct GaugeField {
    n: usize,
    components: Vec<Function>,
}

/// Number of random base points used to check the boundary condition.
const BOUNDARY_SAMPLES: usize = 50;
const BOUNDARY_TOLERANCE: f64 = 1e-12;

impl GaugeField {
    pub fn parse(components: &[&str]) -> Result<Self> {
        let n = components.len();
        let mut names = coordinate_names(n);
        names.push("u".into());
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let components = components
            .iter()
            .map(|src| Function::parse(src, &names))
            .collect::<Result<Vec<_>, _>>()?;
        let field = GaugeField { n, components };
        field.check_boundary()?;
        Ok(field)
    }

    pub fn zero(n: usize) -> Self {
        GaugeField::parse(&vec!["0"; n]).expect("zero field parses")
    }

    fn check_boundary(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6761_7567_65);
        let mut evaluated = 0;
        for _ in 0..BOUNDARY_SAMPLES {
            let x: Vec<f64> = (0..self.n).map(|_| rng.random_range(-2.0..2.0)).collect();
            for u in [0.0, 1.0] {
                let Ok(v) = self.value(&x, u) else { continue };
                evaluated += 1;
                let size = norm(&v);
                if size > BOUNDARY_TOLERANCE {
                    return Err(Error::GaugeBoundary(size));
                }
            }
        }
        if evaluated == 0 {
            return Err(Error::Invalid(
                "gauge field could not be evaluated at any sample point".into(),
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn point(x: &[f64], u: f64) -> Vec<f64> {
        let mut p = x.to_vec();
        p.push(u);
        p
    }

    pub fn value(&self, x: &[f64], u: f64) -> Result<Vec<f64>> {
        let p = Self::point(x, u);
        Ok(self
            .components
            .iter()
            .map(|c| c.eval(&p))
            .collect::<Result<_, _>>()?)
    }

    /// `∂_j β_i` at `(x, u)`.
    pub fn x_jacobian(&self, x: &[f64], u: f64) -> Result<DMatrix<f64>> {
        let p = Self::point(x, u);
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, c) in self.components.iter().enumerate() {
            for j in 0..self.n {
                m[(i, j)] = c.partial(j).eval(&p)?;
            }
        }
        Ok(m)
    }

    pub fn u_partial(&self, x: &[f64], u: f64) -> Result<Vec<f64>> {
        let p = Self::point(x, u);
        Ok(self
            .components
            .iter()
            .map(|c| c.partial(self.n).eval(&p))
            .collect::<Result<_, _>>()?)
    }

    /// The 1-form `β(·, u)` on the target.
    pub fn at(&self, u: f64) -> GaugeSlice<'_> {
        GaugeSlice { field: self, u }
    }
}

pub struct GaugeSlice<'a> {
    field: &'a GaugeField,
    u: f64,
}

impl OneForm for GaugeSlice<'_> {
    fn dim(&self) -> usize {
        self.field.n
    }

    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.field.value(x, self.u)
    }

    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.field.x_jacobian(x, self.u)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub dx: Vec<Vec<f64>>,
    pub d_eta: Vec<Vec<f64>>,
}

impl TangentVector {
    pub fn zeros(n: usize, intervals: usize) -> Self {
        TangentVector {
            dx: vec![vec![0.0; n]; intervals + 1],
            d_eta: vec![vec![0.0; n]; intervals + 1],
        }
    }

    pub fn intervals(&self) -> usize {
        self.dx.len().saturating_sub(1)
    }

    fn scaled_sum(&self, other: &TangentVector, t: f64) -> TangentVector {
        let f = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Vec<Vec<f64>> {
            a.iter()
                .zip(b)
                .map(|(r, d)| r.iter().zip(d).map(|(v, w)| v + t * w).collect())
                .collect()
        };
        TangentVector {
            dx: f(&self.dx, &other.dx),
            d_eta: f(&self.d_eta, &other.d_eta),
        }
    }

    /// A random smooth tangent vector: each component is a low-order
    /// trigonometric polynomial in `u` with coefficients in `[-1, 1]`.
    pub fn random_smooth(n: usize, intervals: usize, rng: &mut impl Rng) -> Self {
        let mut component = || {
            let c: [f64; 5] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            move |u: f64| {
                let w = std::f64::consts::PI * u;
                c[0] + c[1] * w.sin() + c[2] * w.cos() + c[3] * (2.0 * w).sin() + c[4] * (2.0 * w).cos()
            }
        };
        let mut sample = || {
            let fs: Vec<_> = (0..n).map(|_| component()).collect();
            (0..=intervals)
                .map(|k| {
                    let u = k as f64 / intervals as f64;
                    fs.iter().map(|f| f(u)).collect()
                })
                .collect::<Vec<Vec<f64>>>()
        };
        let dx = sample();
        let d_eta = sample();
        TangentVector { dx, d_eta }
    }
}

/// The Hamiltonian vector field `ξ_β` at `m`, valid on and off the
/// constraint surface:
/// `δX^i = -α^{ij}β_j`,
/// `δη_i = d_uβ_i + ∂_iα^{jk}η_jβ_k - C^j∂_iβ_j`, `C = X' + αη`,
/// where `d_u` is the total derivative along `X`.
pub fn gauge_vector_field(
    s: &PoissonStructure,
    m: &DiscretizedMorphism,
    beta: &GaugeField,
) -> Result<TangentVector> {
    m.check_dim(s)?;
    if beta.dim() != m.n {
        return Err(Error::Dimension {
            expected: m.n,
            got: beta.dim(),
        });
    }
    let n = m.n;
    let xp = m.x_derivative();
    let mut out = TangentVector::zeros(n, m.intervals);
    for k in 0..m.nodes() {
        let u = m.node(k);
        let x = &m.x[k];
        let eta = &m.eta_u[k];
        let a = s.alpha(x).map_err(|_| Error::ExitedDomain { index: k })?;
        let da = s.d_alpha(x)?;
        let b = beta.value(x, u)?;
        let db = beta.x_jacobian(x, u)?;
        let bu = beta.u_partial(x, u)?;
        let ae = mat_vec(&a, eta);
        let c: Vec<f64> = (0..n).map(|j| xp[k][j] + ae[j]).collect();
        let ab = mat_vec(&a, &b);
        for i in 0..n {
            out.dx[k][i] = -ab[i];
            let total_u = bu[i] + (0..n).map(|j| db[(i, j)] * xp[k][j]).sum::<f64>();
            let mut coad = 0.0;
            for j in 0..n {
                for l in 0..n {
                    coad += da[i][(j, l)] * eta[j] * b[l];
                }
            }
            let constraint: f64 = (0..n).map(|j| c[j] * db[(j, i)]).sum();
            out.d_eta[k][i] = total_u + coad - constraint;
        }
    }
    Ok(out)
}

fn flow(
    s: &PoissonStructure,
    m: &DiscretizedMorphism,
    beta: &GaugeField,
    duration: f64,
    steps: usize,
) -> Result<DiscretizedMorphism> {
    let dt = duration / steps as f64;
    let mut cur = m.clone();
    for _ in 0..steps {
        let k1 = gauge_vector_field(s, &cur, beta)?;
        let k2 = gauge_vector_field(s, &cur.displaced(&k1, 0.5 * dt), beta)?;
        let k3 = gauge_vector_field(s, &cur.displaced(&k2, 0.5 * dt), beta)?;
        let k4 = gauge_vector_field(s, &cur.displaced(&k3, dt), beta)?;
        let incr = k1
            .scaled_sum(&k2, 2.0)
            .scaled_sum(&k3, 2.0)
            .scaled_sum(&k4, 1.0);
        cur = cur.displaced(&incr, dt / 6.0);
        if let Some(index) = cur.x.iter().position(|x| !s.contains(x)) {
            return Err(Error::ExitedDomain { index });
        }
    }
    Ok(cur)
}

/// Flows a constraint solution along `ξ_β` for unit time with `steps` RK4
/// steps.
pub fn gauge_flow(
    s: &PoissonStructure,
    m: &DiscretizedMorphism,
    beta: &GaugeField,
    steps: usize,
) -> Result<DiscretizedMorphism> {
    let residual = gauss_residual(s, m)?;
    if residual > FLOW_RESIDUAL_LIMIT {
        return Err(Error::Residual {
            residual,
            limit: FLOW_RESIDUAL_LIMIT,
        });
    }
    flow(s, m, beta, 1.0, steps.max(1))
}

/// `ω(a, b) = ∫ (δ_a X^i δ_b η_i - δ_b X^i δ_a η_i) du`.
pub fn symplectic_pairing(a: &TangentVector, b: &TangentVector) -> Result<f64> {
    if a.dx.len() != b.dx.len()
        || a.d_eta.len() != b.d_eta.len()
        || a.dx.len() != a.d_eta.len()
        || a.dx.len() < 2
    {
        return Err(Error::Grid("tangent vectors live on different grids".into()));
    }
    let integrand: Vec<f64> = (0..a.dx.len())
        .map(|k| dot(&a.dx[k], &b.d_eta[k]) - dot(&b.dx[k], &a.d_eta[k]))
        .collect();
    Ok(trapezoid(&integrand, 1.0 / a.intervals() as f64))
}

/// `H_β = ∫ ⟨X' + α(X)η_u, β(X, u)⟩ du`.
pub fn hamiltonian(
    s: &PoissonStructure,
    m: &DiscretizedMorphism,
    beta: &GaugeField,
) -> Result<f64> {
    let c = gauss_defect(s, m)?;
    let integrand = (0..m.nodes())
        .map(|k| Ok(dot(&c[k], &beta.value(&m.x[k], m.node(k))?)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(trapezoid(&integrand, m.step()))
}

/// `H_{[β,γ]}` with the Koszul bracket taken pointwise in `u`.
pub fn bracket_hamiltonian(
    s: &PoissonStructure,
    m: &DiscretizedMorphism,
    beta: &GaugeField,
    gamma: &GaugeField,
) -> Result<f64> {
    let c = gauss_defect(s, m)?;
    let integrand = (0..m.nodes())
        .map(|k| {
            let u = m.node(k);
            let x = &m.x[k];
            let bracket = koszul_components(
                &s.alpha(x)?,
                &s.d_alpha(x)?,
                &beta.value(x, u)?,
                &gamma.value(x, u)?,
                &beta.x_jacobian(x, u)?,
                &gamma.x_jacobian(x, u)?,
            );
            Ok(dot(&c[k], &bracket))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(trapezoid(&integrand, m.step()))
}

/// Step used for the finite-difference differential of `H_β`.
pub const HAMILTONIAN_FD_STEP: f64 = 1e-5;

/// Max over `trials` random smooth `ζ` of
/// `|ω(ξ_β, ζ) - (H_β(m + εζ) - H_β(m - εζ)) / 2ε|`.
pub fn hamiltonian_check(
    s: &PoissonStructure,
    m: &DiscretizedMorphism,
    beta: &GaugeField,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let xi = gauge_vector_field(s, m, beta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = HAMILTONIAN_FD_STEP;
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let zeta = TangentVector::random_smooth(m.n, m.intervals, &mut rng);
        let lhs = symplectic_pairing(&xi, &zeta)?;
        let hp = hamiltonian(s, &m.displaced(&zeta, eps), beta)?;
        let hm = hamiltonian(s, &m.displaced(&zeta, -eps), beta)?;
        worst = worst.max((lhs - (hp - hm) / (2.0 * eps)).abs());
    }
    Ok(worst)
}

/// `|ξ_β H_γ - H_{[β,γ]}|` at `m`, with `ξ_β H_γ` taken as the central
/// difference of `H_γ` along the flow of `ξ_β` over `±eps`.
pub fn equivariance_defect(
    s: &PoissonStructure,
    m: &DiscretizedMorphism,
    beta: &GaugeField,
    gamma: &GaugeField,
    eps: f64,
) -> Result<f64> {
    let forward = flow(s, m, beta, eps, 1)?;
    let backward = flow(s, m, beta, -eps, 1)?;
    let derivative = (hamiltonian(s, &forward, gamma)? - hamiltonian(s, &backward, gamma)?)
        / (2.0 * eps);
    Ok((derivative - bracket_hamiltonian(s, m, beta, gamma)?).abs())
}

/// Glues `m1` and `m2` at doubled speed: the first half samples `m1` at
/// `2u`, the second `m2` at `2u - 1`, and `η_u` is doubled.
pub fn concatenate(
    m1: &DiscretizedMorphism,
    m2: &DiscretizedMorphism,
) -> Result<DiscretizedMorphism> {
    if m1.n != m2.n {
        return Err(Error::Dimension {
            expected: m1.n,
            got: m2.n,
        });
    }
    if m1.intervals != m2.intervals {
        return Err(Error::Grid(format!(
            "cannot concatenate grids of {} and {} intervals",
            m1.intervals, m2.intervals
        )));
    }
    let gap = norm(
        &m1.end()
            .iter()
            .zip(m2.start())
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>(),
    );
    if gap > ENDPOINT_LIMIT {
        return Err(Error::EndpointMismatch(gap));
    }
    let junction = norm(&m1.eta_u[m1.intervals]).max(norm(&m2.eta_u[0]));
    if junction > JUNCTION_LIMIT {
        return Err(Error::JunctionCovector(junction));
    }
    let n = m1.intervals;
    let mut x = Vec::with_capacity(2 * n + 1);
    let mut eta = Vec::with_capacity(2 * n + 1);
    let double = |v: &[f64]| v.iter().map(|e| 2.0 * e).collect::<Vec<_>>();
    x.extend(m1.x.iter().cloned());
    eta.extend(m1.eta_u.iter().map(|e| double(e)));
    eta[n] = m1.eta_u[n]
        .iter()
        .zip(&m2.eta_u[0])
        .map(|(a, b)| a + b)
        .collect();
    x.extend(m2.x[1..].iter().cloned());
    eta.extend(m2.eta_u[1..].iter().map(|e| double(e)));
    DiscretizedMorphism::new(x, eta)
}

/// Reparametrizes by `u ↦ 1 - u`: `X[k] ↦ X[N-k]`, `η_u[k] ↦ -η_u[N-k]`.
pub fn reverse(m: &DiscretizedMorphism) -> DiscretizedMorphism {
    DiscretizedMorphism {
        n: m.n,
        intervals: m.intervals,
        x: m.x.iter().rev().cloned().collect(),
        eta_u: m
            .eta_u
            .iter()
            .rev()
            .map(|e| e.iter().map(|v| -v).collect())
            .collect(),
    }
}
