//! Rotation-invariant Poisson structures `α^{ij} = f(|x|) ε^{ijk} x^k` on
//! `ℝ³∖{0}`: leaf areas, the invariant `C(R)`, fiber types, periods and the
//! singular set of the groupoid.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Expr, Function};
use crate::pathspace::{nodal_derivative, DiscretizedMorphism};
use crate::poisson::ORIGIN_EXCLUSION;

pub const FIBER_TOLERANCE: f64 = 1e-9;
/// Rescaling is refused when `|C - 1|` is at most this.
pub const RESCALE_EXCLUSION: f64 = 1e-6;
pub const PROFILE_SAMPLES: usize = 1024;
pub const BISECTION_WIDTH: f64 = 1e-10;
/// `|A'| ≤ PLATEAU · scale` counts as a critical point.
pub const PLATEAU: f64 = 1e-12;
/// `max A - min A ≤ CONSTANT_AREA · scale` counts as constant area.
pub const CONSTANT_AREA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Fiber {
    #[serde(rename = "SU2")]
    Su2,
    #[serde(rename = "S2xR")]
    S2xR,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    SmoothConstantArea,
    SmoothRegular,
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    /// `A'` changes sign.
    SignChange,
    /// `A'` vanishes at a sample.
    Exact,
    /// `A'` touches zero without changing sign.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoint {
    #[serde(rename = "R")]
    pub r: f64,
    pub kind: CriticalKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileSample {
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "dA")]
    pub da: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub fiber: Fiber,
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub range: [f64; 2],
    pub area_nonconstant: bool,
    pub samples: Vec<ProfileSample>,
    pub critical_points: Vec<CriticalPoint>,
    pub verdict: Verdict,
}

/// A nonvanishing profile `f(R)` on `[rmin, rmax]`, with the leaf area
/// `A(R) = 4πR/f(R)` and its first two derivatives kept symbolically.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    f: Function,
    area: Function,
    area_second: Expr,
    pub rmin: f64,
    pub rmax: f64,
}

impl RadialProfile {
    pub fn parse(source: &str, rmin: f64, rmax: f64) -> Result<Self> {
        if !(rmin > 0.0 && rmin < rmax && rmax.is_finite()) {
            return Err(Error::Invalid(format!(
                "profile range must satisfy 0 < Rmin < Rmax, got [{rmin}, {rmax}]"
            )));
        }
        let f = Function::parse(source, &["R"])?;
        let area = Function::parse(&format!("4*pi*R/({source})"), &["R"])?;
        let area_second = area.partial(0).diff(0);
        let profile = RadialProfile {
            f,
            area,
            area_second,
            rmin,
            rmax,
        };
        profile.check_nonvanishing()?;
        Ok(profile)
    }

    fn check_nonvanishing(&self) -> Result<()> {
        let mut previous: Option<f64> = None;
        for i in 0..PROFILE_SAMPLES {
            let r = self.sample(i, PROFILE_SAMPLES);
            let v = self.f.eval(&[r]).map_err(|_| Error::VanishingProfile(r))?;
            if v == 0.0 || previous.is_some_and(|p| p.signum() != v.signum()) {
                return Err(Error::VanishingProfile(r));
            }
            previous = Some(v);
        }
        Ok(())
    }

    fn sample(&self, i: usize, n: usize) -> f64 {
        if i + 1 == n {
            self.rmax
        } else {
            self.rmin + (self.rmax - self.rmin) * i as f64 / (n - 1) as f64
        }
    }

    fn check(&self, r: f64) -> Result<()> {
        if r >= self.rmin && r <= self.rmax {
            Ok(())
        } else {
            Err(Error::OutsideDomain { point: vec![r] })
        }
    }

    pub fn source(&self) -> String {
        self.f.source()
    }

    pub fn f(&self, r: f64) -> Result<f64> {
        Ok(self.f.eval(&[r])?)
    }

    pub fn df(&self, r: f64) -> Result<f64> {
        Ok(self.f.partial(0).eval(&[r])?)
    }

    pub fn area(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(self.area.eval(&[r])?)
    }

    pub fn area_derivative(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(self.area.partial(0).eval(&[r])?)
    }

    fn area_second(&self, r: f64) -> Result<f64> {
        Ok(self.area_second.eval(&[r])?)
    }

    /// `C(R) = R f'(R) / f(R)`.
    pub fn c_invariant(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(r * self.df(r)? / self.f(r)?)
    }

    /// `C(R) = 1 - f(R) A'(R) / 4π`.
    pub fn c_invariant_from_area(&self, r: f64) -> Result<f64> {
        Ok(1.0 - self.f(r)? * self.area_derivative(r)? / (4.0 * PI))
    }

    pub fn classify_fiber(&self, r: f64, tol: f64) -> Result<Fiber> {
        Ok(if (self.c_invariant(r)? - 1.0).abs() <= tol {
            Fiber::S2xR
        } else {
            Fiber::Su2
        })
    }

    /// `4π (1 - C(R)) / f(R)`.
    pub fn period(&self, r: f64) -> Result<f64> {
        Ok(4.0 * PI * (1.0 - self.c_invariant(r)?) / self.f(r)?)
    }

    fn bisect(&self, mut lo: f64, mut hi: f64, g: impl Fn(f64) -> Result<f64>) -> Result<f64> {
        let mut glo = g(lo)?;
        while hi - lo > BISECTION_WIDTH {
            let mid = 0.5 * (lo + hi);
            let gm = g(mid)?;
            if gm == 0.0 {
                return Ok(mid);
            }
            if gm.signum() == glo.signum() {
                lo = mid;
                glo = gm;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Samples `A`, `A'`, `C`, the fiber type and the period, finds the
    /// critical points of `A` and classifies the groupoid.
    pub fn analyze(&self, n_samples: usize) -> Result<AnalysisReport> {
        let n = n_samples.max(3);
        let rs: Vec<f64> = (0..n).map(|i| self.sample(i, n)).collect();
        let samples = rs
            .iter()
            .map(|&r| {
                Ok(ProfileSample {
                    r,
                    a: self.area(r)?,
                    da: self.area_derivative(r)?,
                    c: self.c_invariant(r)?,
                    fiber: self.classify_fiber(r, FIBER_TOLERANCE)?,
                    period: self.period(r)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (amin, amax) = samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s.a), hi.max(s.a))
            });
        let area_scale = amin.abs().max(amax.abs()).max(1.0);
        let area_nonconstant = amax - amin > CONSTANT_AREA * area_scale;
        let critical_points = if area_nonconstant {
            self.critical_points(&samples)?
        } else {
            Vec::new()
        };
        let verdict = if !area_nonconstant {
            Verdict::SmoothConstantArea
        } else if critical_points.is_empty() {
            Verdict::SmoothRegular
        } else {
            Verdict::Singular
        };
        Ok(AnalysisReport {
            range: [self.rmin, self.rmax],
            area_nonconstant,
            samples,
            critical_points,
            verdict,
        })
    }

    fn critical_points(&self, samples: &[ProfileSample]) -> Result<Vec<CriticalPoint>> {
        let scale = samples.iter().map(|s| s.da.abs()).fold(0.0, f64::max).max(1.0);
        let plateau = PLATEAU * scale;
        let mut found: Vec<CriticalPoint> = Vec::new();
        let mut push = |p: CriticalPoint| {
            if found.iter().all(|q| (q.r - p.r).abs() > 1e-8) {
                found.push(p);
            }
        };
        for (i, s) in samples.iter().enumerate() {
            if s.da.abs() <= plateau {
                push(CriticalPoint {
                    r: s.r,
                    kind: CriticalKind::Exact,
                });
                continue;
            }
            if let Some(next) = samples.get(i + 1) {
                if next.da.abs() > plateau && s.da.signum() != next.da.signum() {
                    let r = self.bisect(s.r, next.r, |r| self.area_derivative(r))?;
                    push(CriticalPoint {
                        r,
                        kind: CriticalKind::SignChange,
                    });
                }
            }
            if i == 0 || i + 1 == samples.len() {
                continue;
            }
            let (before, after) = (&samples[i - 1], &samples[i + 1]);
            let local_min = s.da.abs() < before.da.abs() && s.da.abs() < after.da.abs();
            let same_sign = before.da.signum() == s.da.signum() && s.da.signum() == after.da.signum();
            if local_min && same_sign {
                let (a, b) = (self.area_second(before.r)?, self.area_second(after.r)?);
                if a.signum() == b.signum() {
                    continue;
                }
                let r = self.bisect(before.r, after.r, |r| self.area_second(r))?;
                if self.area_derivative(r)?.abs() <= plateau {
                    push(CriticalPoint {
                        r,
                        kind: CriticalKind::Degenerate,
                    });
                }
            }
        }
        found.sort_by(|a, b| a.r.total_cmp(&b.r));
        Ok(found)
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn triple(v: &[f64]) -> Result<[f64; 3]> {
    v.try_into().map_err(|_| Error::Dimension {
        expected: 3,
        got: v.len(),
    })
}

/// Splits `v` at `X` into `v_r = v·X̂` and `v_t = v - v_r X̂`.
pub fn decompose(v: [f64; 3], x: [f64; 3]) -> Result<(f64, [f64; 3])> {
    let r = dot(&x, &x).sqrt();
    if r == 0.0 {
        return Err(Error::OutsideDomain { point: x.to_vec() });
    }
    let unit = x.map(|c| c / r);
    let vr = dot(&v, &unit);
    Ok((vr, [0, 1, 2].map(|i| v[i] - vr * unit[i])))
}

fn node_radius(x: &[f64; 3], index: usize) -> Result<f64> {
    let r = dot(x, x).sqrt();
    if r < ORIGIN_EXCLUSION {
        return Err(Error::ExitedDomain { index });
    }
    Ok(r)
}

/// Max over nodes of `|X' + f(|X|) η_t × X|`.
pub fn radial_gauss_residual(p: &RadialProfile, m: &DiscretizedMorphism) -> Result<f64> {
    if m.n != 3 {
        return Err(Error::Dimension {
            expected: 3,
            got: m.n,
        });
    }
    let xp = nodal_derivative(&m.x, m.step());
    let mut worst = 0.0f64;
    for k in 0..m.nodes() {
        let x = triple(&m.x[k])?;
        let r = node_radius(&x, k)?;
        let (_, eta_t) = decompose(triple(&m.eta_u[k])?, x)?;
        let f = p.f(r)?;
        let c = cross(&eta_t, &x);
        let res: f64 = (0..3)
            .map(|i| (xp[k][i] + f * c[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(res);
    }
    Ok(worst)
}

/// `(X, η) ↦ (X, a)` with `a_r = f/(1 - C) η_r`, `a_t = f η_t`; the result
/// solves the Gauss law of the constant profile `f ≡ 1`.
pub fn rescale(p: &RadialProfile, m: &DiscretizedMorphism) -> Result<DiscretizedMorphism> {
    if m.n != 3 {
        return Err(Error::Dimension {
            expected: 3,
            got: m.n,
        });
    }
    let mut a = Vec::with_capacity(m.nodes());
    for k in 0..m.nodes() {
        let x = triple(&m.x[k])?;
        let r = node_radius(&x, k)?;
        let c = r * p.df(r)? / p.f(r)?;
        if (c - 1.0).abs() <= RESCALE_EXCLUSION {
            return Err(Error::CriticalStratum { index: k, c });
        }
        let f = p.f(r)?;
        let (eta_r, eta_t) = decompose(triple(&m.eta_u[k])?, x)?;
        let ar = f / (1.0 - c) * eta_r;
        a.push((0..3).map(|i| ar * x[i] / r + f * eta_t[i]).collect());
    }
    DiscretizedMorphism::new(m.x.clone(), a)
}
