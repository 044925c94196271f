//! The symplectic groupoid of a planar Poisson structure `{x¹, x²} = φ`,
//! in the coordinates `(x, π)` obtained from the initial point and the
//! integrated covector of a Gauss-law solution.
//!
//! Orientation is fixed by `ε^{12} = +1`. Vectors on the groupoid are
//! ordered `(x¹, x², π₁, π₂)`.

use std::collections::BTreeMap;

use nalgebra::{Matrix4, SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, Function};
use crate::pathspace::{gauss_residual, taper, trapezoid, DiscretizedMorphism};
use crate::poisson::PoissonStructure;

/// Below this `|φ(x)|` the zero-locus formulas for `h` and `ψ` are used.
pub const BRANCH_SWITCH: f64 = 1e-9;
pub const RAY_SAMPLES: usize = 256;
pub const RAY_BISECTION_WIDTH: f64 = 1e-10;
pub const COMPOSABLE_TOLERANCE: f64 = 1e-8;
/// Largest Gauss residual accepted by [`PlanarGroupoid::invariants`].
pub const INVARIANTS_RESIDUAL_LIMIT: f64 = 1e-4;
pub const FD_STEP: f64 = 1e-5;
/// Step of the fourth-order stencil.
pub const STENCIL_STEP: f64 = 1e-5;

/// A smooth function `φ(x1, x2)` with its first and second partials.
#[derive(Debug, Clone)]
pub struct Phi2D {
    f: Function,
    d11: Expr,
    d12: Expr,
    d22: Expr,
}

impl Phi2D {
    pub fn parse(source: &str) -> Result<Self> {
        let f = Function::parse(source, &["x1", "x2"])?;
        let d11 = f.partial(0).diff(0);
        let d12 = f.partial(0).diff(1);
        let d22 = f.partial(1).diff(1);
        Ok(Phi2D { f, d11, d12, d22 })
    }

    pub fn source(&self) -> String {
        self.f.source()
    }

    pub fn value(&self, x: [f64; 2]) -> Result<f64> {
        Ok(self.f.eval(&x)?)
    }

    pub fn gradient(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        Ok([self.f.partial(0).eval(&x)?, self.f.partial(1).eval(&x)?])
    }

    pub fn hessian(&self, x: [f64; 2]) -> Result<[[f64; 2]; 2]> {
        let d12 = self.d12.eval(&x)?;
        Ok([[self.d11.eval(&x)?, d12], [d12, self.d22.eval(&x)?]])
    }
}

/// An open axis-aligned rectangle; infinite bounds are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain2D {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Domain2D {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        if !(xmin < xmax && ymin < ymax) {
            return Err(Error::Invalid(format!(
                "empty rectangle ({xmin}, {xmax}) x ({ymin}, {ymax})"
            )));
        }
        Ok(Domain2D {
            xmin,
            xmax,
            ymin,
            ymax,
        })
    }

    pub fn plane() -> Self {
        Domain2D {
            xmin: f64::NEG_INFINITY,
            xmax: f64::INFINITY,
            ymin: f64::NEG_INFINITY,
            ymax: f64::INFINITY,
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] > self.xmin && p[0] < self.xmax && p[1] > self.ymin && p[1] < self.ymax
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupoidPoint2D {
    pub x: [f64; 2],
    pub pi: [f64; 2],
}

impl GroupoidPoint2D {
    pub fn new(x: [f64; 2], pi: [f64; 2]) -> Self {
        GroupoidPoint2D { x, pi }
    }

    /// The unit `j(x) = (x, 0)`.
    pub fn identity(x: [f64; 2]) -> Self {
        GroupoidPoint2D { x, pi: [0.0; 2] }
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.x[0], self.x[1], self.pi[0], self.pi[1]]
    }

    pub fn from_coords(c: [f64; 4]) -> Self {
        GroupoidPoint2D {
            x: [c[0], c[1]],
            pi: [c[2], c[3]],
        }
    }

    fn vector(&self) -> SVector<f64, 4> {
        SVector::from(self.coords())
    }

    fn from_vector(v: &SVector<f64, 4>) -> Self {
        GroupoidPoint2D::from_coords([v[0], v[1], v[2], v[3]])
    }
}

/// One printed coefficient of the closed-form 2-form next to the
/// corresponding entry of `P⁻¹`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormTerm {
    pub term: &'static str,
    pub printed: f64,
    pub inverse: f64,
    pub difference: f64,
}

const FORM_TERMS: [(&str, usize, usize); 6] = [
    ("dx1^dx2", 0, 1),
    ("dx1^dpi1", 0, 2),
    ("dx1^dpi2", 0, 3),
    ("dx2^dpi1", 1, 2),
    ("dx2^dpi2", 1, 3),
    ("dpi1^dpi2", 2, 3),
];

/// Rejection-sampling box for groupoid points: `[lo, hi]` per coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleBox {
    pub x: [[f64; 2]; 2],
    pub pi: [[f64; 2]; 2],
}

impl SampleBox {
    /// The domain clipped to `[-x_radius, x_radius]²`, momenta in
    /// `[-pi_radius, pi_radius]²`.
    pub fn around(domain: &Domain2D, x_radius: f64, pi_radius: f64) -> Self {
        SampleBox {
            x: [
                [domain.xmin.max(-x_radius), domain.xmax.min(x_radius)],
                [domain.ymin.max(-x_radius), domain.ymax.min(x_radius)],
            ],
            pi: [[-pi_radius, pi_radius]; 2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomCheck {
    pub max_dev: f64,
    pub tolerance: f64,
    pub worst_point: Vec<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub samples: usize,
    pub seed: u64,
    pub checks: BTreeMap<String, AxiomCheck>,
}

impl AxiomReport {
    pub fn all_passed(&self) -> bool {
        self.checks.values().all(|c| c.passed)
    }
}

#[derive(Debug, Clone)]
pub struct PlanarGroupoid {
    pub phi: Phi2D,
    pub domain: Domain2D,
    pub switch: f64,
}

impl PlanarGroupoid {
    pub fn new(phi: Phi2D, domain: Domain2D) -> Self {
        PlanarGroupoid {
            phi,
            domain,
            switch: BRANCH_SWITCH,
        }
    }

    pub fn with_switch(mut self, switch: f64) -> Self {
        self.switch = switch;
        self
    }

    pub fn structure(&self) -> PoissonStructure {
        PoissonStructure::two_domain(self.phi.clone(), self.domain)
    }

    pub fn x_f(&self, g: &GroupoidPoint2D) -> Result<[f64; 2]> {
        let p = self.phi.value(g.x)?;
        Ok([g.x[0] - p * g.pi[1], g.x[1] + p * g.pi[0]])
    }

    pub fn left(&self, g: &GroupoidPoint2D) -> [f64; 2] {
        g.x
    }

    pub fn right(&self, g: &GroupoidPoint2D) -> Result<[f64; 2]> {
        self.x_f(g)
    }

    fn h_unchecked(&self, g: &GroupoidPoint2D, xf: [f64; 2]) -> Result<f64> {
        let p = self.phi.value(g.x)?;
        if p.abs() >= self.switch {
            Ok(self.phi.value(xf)? / p)
        } else {
            let [d1, d2] = self.phi.gradient(g.x)?;
            Ok(1.0 - g.pi[1] * d1 + g.pi[0] * d2)
        }
    }

    pub fn h(&self, g: &GroupoidPoint2D) -> Result<f64> {
        let xf = self.x_f(g)?;
        if !self.domain.contains(xf) {
            return Err(Error::OutsideDomain { point: xf.to_vec() });
        }
        self.h_unchecked(g, xf)
    }

    pub fn psi(&self, g: &GroupoidPoint2D) -> Result<f64> {
        let p = self.phi.value(g.x)?;
        let [p1, p2] = g.pi;
        if p.abs() >= self.switch {
            let [d1, d2] = self.phi.gradient(g.x)?;
            Ok((1.0 + p1 * d2 - p2 * d1 - self.h(g)?) / p)
        } else {
            let xf = self.x_f(g)?;
            if !self.domain.contains(xf) {
                return Err(Error::OutsideDomain { point: xf.to_vec() });
            }
            let [[d11, d12], [_, d22]] = self.phi.hessian(g.x)?;
            Ok(p1 * p2 * d12 - 0.5 * p1 * p1 * d22 - 0.5 * p2 * p2 * d11)
        }
    }

    fn admissible(&self, g: &GroupoidPoint2D) -> bool {
        let Ok(xf) = self.x_f(g) else { return false };
        if !self.domain.contains(xf) {
            return false;
        }
        matches!(self.h_unchecked(g, xf), Ok(h) if h > 0.0 && h.is_finite())
    }

    /// First `t ∈ (0, 1]` where the ray `t ↦ (x, tπ)` leaves `{h > 0, x_f ∈ U}`,
    /// located by bisection; `None` if the whole ray is admissible.
    pub fn ray_exit(&self, g: &GroupoidPoint2D) -> Option<f64> {
        let at = |t: f64| GroupoidPoint2D::new(g.x, [t * g.pi[0], t * g.pi[1]]);
        let mut good = 0.0;
        for k in 1..=RAY_SAMPLES {
            let t = k as f64 / RAY_SAMPLES as f64;
            if self.admissible(&at(t)) {
                good = t;
                continue;
            }
            let mut bad = t;
            while bad - good > RAY_BISECTION_WIDTH {
                let mid = 0.5 * (good + bad);
                if self.admissible(&at(mid)) {
                    good = mid;
                } else {
                    bad = mid;
                }
            }
            return Some(bad);
        }
        None
    }

    /// Membership in the component of `{h > 0, x_f ∈ U}` containing the
    /// units, witnessed by the straight ray from `(x, 0)`.
    pub fn contains(&self, g: &GroupoidPoint2D) -> bool {
        self.domain.contains(g.x) && self.ray_exit(g).is_none()
    }

    pub fn multiply(
        &self,
        g: &GroupoidPoint2D,
        gt: &GroupoidPoint2D,
        tol: f64,
    ) -> Result<GroupoidPoint2D> {
        let r = self.x_f(g)?;
        let gap = (r[0] - gt.x[0]).hypot(r[1] - gt.x[1]);
        if gap > tol {
            return Err(Error::NotComposable(gap));
        }
        let h = self.h(g)?;
        Ok(GroupoidPoint2D::new(
            g.x,
            [g.pi[0] + h * gt.pi[0], g.pi[1] + h * gt.pi[1]],
        ))
    }

    pub fn inverse(&self, g: &GroupoidPoint2D) -> Result<GroupoidPoint2D> {
        let xf = self.x_f(g)?;
        let h = self.h(g)?;
        Ok(GroupoidPoint2D::new(xf, [-g.pi[0] / h, -g.pi[1] / h]))
    }

    pub fn bivector(&self, g: &GroupoidPoint2D) -> Result<Matrix4<f64>> {
        let p = self.phi.value(g.x)?;
        let [d1, d2] = self.phi.gradient(g.x)?;
        let psi = self.psi(g)?;
        let [p1, p2] = g.pi;
        #[rustfmt::skip]
        let m = Matrix4::new(
            0.0, p, -1.0 - p1 * d2, -p2 * d2,
            -p, 0.0, p1 * d1, -1.0 + p2 * d1,
            1.0 + p1 * d2, -p1 * d1, 0.0, psi,
            p2 * d2, 1.0 - p2 * d1, -psi, 0.0,
        );
        Ok(m)
    }

    /// `P⁻¹` by LU decomposition.
    pub fn bivector_inverse(&self, g: &GroupoidPoint2D) -> Result<Matrix4<f64>> {
        self.bivector(g)?
            .try_inverse()
            .ok_or_else(|| Error::Invalid("bivector is singular".into()))
    }

    /// `ω_G = P⁻¹` in closed form:
    /// `[ψ dx¹∧dx² + (1 - π₂∂₁φ) dx¹∧dπ₁ + π₁∂₁φ dx¹∧dπ₂ - π₂∂₂φ dx²∧dπ₁
    ///   + (1 + π₁∂₂φ) dx²∧dπ₂ + φ dπ₁∧dπ₂] / h`.
    pub fn symplectic_form(&self, g: &GroupoidPoint2D) -> Result<Matrix4<f64>> {
        let p = self.phi.value(g.x)?;
        let [d1, d2] = self.phi.gradient(g.x)?;
        let psi = self.psi(g)?;
        let h = self.h(g)?;
        let [p1, p2] = g.pi;
        Ok(two_form(&[
            (0, 1, psi / h),
            (0, 2, (1.0 - p2 * d1) / h),
            (0, 3, p1 * d1 / h),
            (1, 2, -p2 * d2 / h),
            (1, 3, (1.0 + p1 * d2) / h),
            (2, 3, p / h),
        ]))
    }

    /// The closed-form 2-form with its coefficients read literally; both
    /// printed `dx²∧dπ₂` coefficients are summed.
    pub fn printed_symplectic_form(&self, g: &GroupoidPoint2D) -> Result<Matrix4<f64>> {
        let p = self.phi.value(g.x)?;
        let [d1, d2] = self.phi.gradient(g.x)?;
        let psi = self.psi(g)?;
        let h = self.h(g)?;
        let [p1, p2] = g.pi;
        Ok(two_form(&[
            (0, 1, psi / h),
            (0, 2, (1.0 - p2 * d1) / h),
            (1, 3, p1 * d1 / h),
            (1, 2, -p2 * d2 / h),
            (1, 3, (1.0 + p1 * d2) / h),
            (2, 3, -p / h),
        ]))
    }

    /// Term-by-term comparison of the printed 2-form against `P⁻¹`.
    pub fn printed_form_discrepancies(&self, g: &GroupoidPoint2D) -> Result<Vec<FormTerm>> {
        let printed = self.printed_symplectic_form(g)?;
        let inverse = self.bivector_inverse(g)?;
        Ok(FORM_TERMS
            .iter()
            .map(|&(term, a, b)| FormTerm {
                term,
                printed: printed[(a, b)],
                inverse: inverse[(a, b)],
                difference: printed[(a, b)] - inverse[(a, b)],
            })
            .collect())
    }

    /// A Gauss-law solution with invariants `g`, along the straight segment
    /// from `x` to `x_f`. The tapered variant reparametrizes by [`taper`] so
    /// that `η` vanishes at both ends.
    pub fn embed(
        &self,
        g: &GroupoidPoint2D,
        intervals: usize,
        tapered: bool,
    ) -> Result<DiscretizedMorphism> {
        if !self.domain.contains(g.x) {
            return Err(Error::OutsideDomain { point: g.x.to_vec() });
        }
        if intervals < 2 {
            return Err(Error::Grid(format!(
                "need at least 2 intervals, got {intervals}"
            )));
        }
        let p0 = self.phi.value(g.x)?;
        let [p1, p2] = g.pi;
        let s = |u: f64| if tapered { taper(u).0 } else { u };
        let speed = |u: f64| if tapered { taper(u).1 } else { 1.0 };
        let position = |u: f64| [g.x[0] - s(u) * p0 * p2, g.x[1] + s(u) * p0 * p1];
        let t_hat = |u: f64| -> Result<f64> {
            let [d1, d2] = self.phi.gradient(position(u))?;
            Ok(speed(u) * (d2 * p1 - d1 * p2))
        };
        let step = 1.0 / intervals as f64;
        let gauss = [
            (-(0.6f64).sqrt(), 5.0 / 9.0),
            (0.0, 8.0 / 9.0),
            ((0.6f64).sqrt(), 5.0 / 9.0),
        ];
        let mut x = Vec::with_capacity(intervals + 1);
        let mut eta = Vec::with_capacity(intervals + 1);
        let mut h = 1.0;
        for k in 0..=intervals {
            let u = k as f64 * step;
            if k > 0 {
                let mid = u - 0.5 * step;
                for (node, weight) in gauss {
                    h += 0.5 * step * weight * t_hat(mid + 0.5 * step * node)?;
                }
            }
            let xk = position(u);
            if !self.domain.contains(xk) {
                return Err(Error::ExitedDomain { index: k });
            }
            if h <= 0.0 {
                return Err(Error::NonPositiveScale { index: k, value: h });
            }
            x.push(xk.to_vec());
            eta.push(vec![speed(u) * p1 / h, speed(u) * p2 / h]);
        }
        DiscretizedMorphism::new(x, eta)
    }

    /// The coordinates `(x, π)` of a Gauss-law solution: `x = X(0)` and
    /// `π = ∫ η H` with `H = exp ∫ (∂₂φ η₁ - ∂₁φ η₂)`.
    pub fn invariants(&self, m: &DiscretizedMorphism) -> Result<GroupoidPoint2D> {
        if m.n != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: m.n,
            });
        }
        let residual = gauss_residual(&self.structure(), m)?;
        if residual > INVARIANTS_RESIDUAL_LIMIT {
            return Err(Error::Residual {
                residual,
                limit: INVARIANTS_RESIDUAL_LIMIT,
            });
        }
        let t = m
            .x
            .iter()
            .zip(&m.eta_u)
            .map(|(x, e)| {
                let [d1, d2] = self.phi.gradient([x[0], x[1]])?;
                Ok(d2 * e[0] - d1 * e[1])
            })
            .collect::<Result<Vec<f64>>>()?;
        let step = m.step();
        let mut log_h = 0.0;
        let mut e1 = Vec::with_capacity(m.nodes());
        let mut e2 = Vec::with_capacity(m.nodes());
        for k in 0..m.nodes() {
            if k > 0 {
                log_h += 0.5 * step * (t[k - 1] + t[k]);
            }
            let h = log_h.exp();
            e1.push(m.eta_u[k][0] * h);
            e2.push(m.eta_u[k][1] * h);
        }
        Ok(GroupoidPoint2D::new(
            [m.x[0][0], m.x[0][1]],
            [trapezoid(&e1, step), trapezoid(&e2, step)],
        ))
    }

    fn draw(&self, bx: &SampleBox, rng: &mut impl Rng) -> GroupoidPoint2D {
        let mut pick = |r: [f64; 2]| {
            if r[0] < r[1] {
                rng.random_range(r[0]..r[1])
            } else {
                r[0]
            }
        };
        GroupoidPoint2D::new(
            [pick(bx.x[0]), pick(bx.x[1])],
            [pick(bx.pi[0]), pick(bx.pi[1])],
        )
    }

    fn draw_momentum(&self, bx: &SampleBox, rng: &mut impl Rng) -> [f64; 2] {
        let mut pick = |r: [f64; 2]| {
            if r[0] < r[1] {
                rng.random_range(r[0]..r[1])
            } else {
                r[0]
            }
        };
        [pick(bx.pi[0]), pick(bx.pi[1])]
    }

    /// Rejection-samples `count` points of the groupoid.
    pub fn sample_points(
        &self,
        bx: &SampleBox,
        count: usize,
        rng: &mut impl Rng,
    ) -> Result<Vec<GroupoidPoint2D>> {
        let budget = 1000 * count.max(1);
        let mut out = Vec::with_capacity(count);
        for _ in 0..budget {
            if out.len() == count {
                break;
            }
            let g = self.draw(bx, rng);
            if self.contains(&g) {
                out.push(g);
            }
        }
        if out.len() < count {
            return Err(Error::Sampling(format!(
                "found {} of {count} groupoid points",
                out.len()
            )));
        }
        Ok(out)
    }

    /// A chain `g₀, g₁, …` with `r(gᵢ) = l(gᵢ₊₁)` whose consecutive
    /// products all lie in the groupoid.
    pub fn sample_chain(
        &self,
        bx: &SampleBox,
        length: usize,
        rng: &mut impl Rng,
    ) -> Result<Vec<GroupoidPoint2D>> {
        for _ in 0..1000 {
            let mut chain = self.sample_points(bx, 1, rng)?;
            let mut product = chain[0];
            while chain.len() < length {
                let last = chain[chain.len() - 1];
                let next = GroupoidPoint2D::new(self.x_f(&last)?, self.draw_momentum(bx, rng));
                if !self.contains(&next) {
                    break;
                }
                let Ok(p) = self.multiply(&product, &next, COMPOSABLE_TOLERANCE) else {
                    break;
                };
                if !self.contains(&p) {
                    break;
                }
                product = p;
                chain.push(next);
            }
            if chain.len() == length {
                return Ok(chain);
            }
        }
        Err(Error::Sampling(format!(
            "could not build a composable chain of length {length}"
        )))
    }

    /// Checks the groupoid axioms, the cocycle identity and the Poisson and
    /// symplectic compatibilities at seeded random points.
    pub fn verify_axioms(
        &self,
        bx: &SampleBox,
        samples: usize,
        seed: u64,
        tol: f64,
    ) -> Result<AxiomReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Trackers::default();
        for _ in 0..samples {
            let chain = self.sample_chain(bx, 3, &mut rng)?;
            let (g, gt, gtt) = (chain[0], chain[1], chain[2]);
            self.check_algebra(&mut t, &g, &gt, &gtt)?;
            self.check_geometry(&mut t, &g, &gt)?;
        }
        let mut checks = BTreeMap::new();
        for (name, tracker, tolerance) in [
            ("i_units", t.units, tol),
            ("ii_composition", t.composition, tol),
            ("iii_identity", t.identity, tol),
            ("iv_inverse", t.inverse, tol),
            ("v_associativity", t.associativity, tol),
            ("cocycle", t.cocycle, tol),
            ("vii_lagrangian_units", t.lagrangian, 1e-12),
            ("viii_left_poisson", t.left_poisson, 1e-9),
            ("viii_right_anti_poisson", t.right_anti_poisson, 1e-9),
            ("ix_multiplicative_form", t.multiplicative, 1e-4),
            ("x_inverse_anti_poisson", t.inverse_anti_poisson, 1e-6),
            ("jacobi_bivector", t.jacobi, 1e-4),
            ("closed_form", t.closed, 1e-4),
            ("form_inverts_bivector", t.inverts, 1e-9),
        ] {
            checks.insert(
                name.to_string(),
                AxiomCheck {
                    max_dev: tracker.max_dev,
                    tolerance,
                    passed: tracker.max_dev <= tolerance,
                    worst_point: tracker.worst_point,
                },
            );
        }
        Ok(AxiomReport {
            samples,
            seed,
            checks,
        })
    }

    fn check_algebra(
        &self,
        t: &mut Trackers,
        g: &GroupoidPoint2D,
        gt: &GroupoidPoint2D,
        gtt: &GroupoidPoint2D,
    ) -> Result<()> {
        let tol = COMPOSABLE_TOLERANCE;
        let at = g.coords();
        let x = g.x;
        let y = self.x_f(g)?;
        let unit = GroupoidPoint2D::identity(x);
        t.units.record(dev2(self.left(&unit), x), &at);
        t.units.record(dev2(self.right(&unit)?, x), &at);

        let prod = self.multiply(g, gt, tol)?;
        t.composition.record(dev2(self.left(&prod), x), &at);
        t.composition
            .record(dev2(self.right(&prod)?, self.right(gt)?), &at);

        t.identity.record(
            dev4(self.multiply(&unit, g, tol)?.coords(), g.coords()),
            &at,
        );
        t.identity.record(
            dev4(
                self.multiply(g, &GroupoidPoint2D::identity(y), tol)?.coords(),
                g.coords(),
            ),
            &at,
        );

        let inv = self.inverse(g)?;
        t.inverse.record(
            dev4(self.multiply(g, &inv, tol)?.coords(), unit.coords()),
            &at,
        );
        t.inverse.record(
            dev4(
                self.multiply(&inv, g, tol)?.coords(),
                GroupoidPoint2D::identity(y).coords(),
            ),
            &at,
        );
        t.inverse
            .record(dev4(self.inverse(&inv)?.coords(), g.coords()), &at);

        let left_first = self.multiply(&prod, gtt, tol)?;
        let right_first = self.multiply(g, &self.multiply(gt, gtt, tol)?, tol)?;
        t.associativity
            .record(dev4(left_first.coords(), right_first.coords()), &at);

        let expected = self.h(g)? * self.h(gt)?;
        t.cocycle
            .record(rel(self.h(&prod)?, expected), &at);
        Ok(())
    }

    fn check_geometry(
        &self,
        t: &mut Trackers,
        g: &GroupoidPoint2D,
        gt: &GroupoidPoint2D,
    ) -> Result<()> {
        let at = g.coords();
        let p = self.bivector(g)?;
        let omega = self.symplectic_form(g)?;
        t.inverts
            .record((omega * p - Matrix4::identity()).amax(), &at);

        let unit = GroupoidPoint2D::identity(g.x);
        t.lagrangian
            .record(self.symplectic_form(&unit)?[(0, 1)].abs(), &unit.coords());

        let phi_x = self.phi.value(g.x)?;
        t.left_poisson.record(rel(p[(0, 1)], phi_x), &at);

        let xf = self.x_f(g)?;
        let [d1, d2] = self.phi.gradient(g.x)?;
        let [p1, p2] = g.pi;
        let grad_r1 = SVector::<f64, 4>::new(1.0 - d1 * p2, -d2 * p2, 0.0, -phi_x);
        let grad_r2 = SVector::<f64, 4>::new(d1 * p1, 1.0 + d2 * p1, phi_x, 0.0);
        let bracket = (grad_r1.transpose() * p * grad_r2)[(0, 0)];
        let phi_r = self.phi.value(xf)?;
        t.right_anti_poisson.record(rel(bracket, -phi_r), &at);

        let inverse_map = |v: &SVector<f64, 4>| -> Result<SVector<f64, 4>> {
            Ok(self.inverse(&GroupoidPoint2D::from_vector(v))?.vector())
        };
        let di = jacobian(inverse_map, &g.vector())?;
        let image = self.inverse(g)?;
        let target = self.bivector(&image)?;
        let pushed = di * p * di.transpose() + target;
        t.inverse_anti_poisson
            .record(pushed.amax() / target.amax().max(1.0), &at);

        let bivector_at = |v: &SVector<f64, 4>| self.bivector(&GroupoidPoint2D::from_vector(v));
        let dp = partials(bivector_at, &g.vector())?;
        let mut jacobi = 0.0f64;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    let s: f64 = (0..4)
                        .map(|d| {
                            p[(a, d)] * dp[d][(b, c)]
                                + p[(b, d)] * dp[d][(c, a)]
                                + p[(c, d)] * dp[d][(a, b)]
                        })
                        .sum();
                    jacobi = jacobi.max(s.abs());
                }
            }
        }
        t.jacobi.record(jacobi, &at);

        let form_at = |v: &SVector<f64, 4>| self.symplectic_form(&GroupoidPoint2D::from_vector(v));
        let dw = partials4(form_at, &g.vector())?;
        let mut closed = 0.0f64;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    let s = dw[a][(b, c)] + dw[b][(c, a)] + dw[c][(a, b)];
                    closed = closed.max(s.abs());
                }
            }
        }
        t.closed.record(closed, &at);

        let w = SVector::<f64, 6>::from([g.x[0], g.x[1], g.pi[0], g.pi[1], gt.pi[0], gt.pi[1]]);
        let first = |w: &SVector<f64, 6>| -> Result<SVector<f64, 4>> {
            Ok(SVector::<f64, 4>::new(w[0], w[1], w[2], w[3]))
        };
        let second = |w: &SVector<f64, 6>| -> Result<SVector<f64, 4>> {
            let y = self.x_f(&GroupoidPoint2D::new([w[0], w[1]], [w[2], w[3]]))?;
            Ok(SVector::<f64, 4>::new(y[0], y[1], w[4], w[5]))
        };
        let product = |w: &SVector<f64, 6>| -> Result<SVector<f64, 4>> {
            let a = GroupoidPoint2D::from_vector(&first(w)?);
            let b = GroupoidPoint2D::from_vector(&second(w)?);
            Ok(self.multiply(&a, &b, COMPOSABLE_TOLERANCE)?.vector())
        };
        let pullback = |map: &dyn Fn(&SVector<f64, 6>) -> Result<SVector<f64, 4>>|
         -> Result<SMatrix<f64, 6, 6>> {
            let j = jacobian(map, &w)?;
            let omega = self.symplectic_form(&GroupoidPoint2D::from_vector(&map(&w)?))?;
            Ok(j.transpose() * omega * j)
        };
        let defect = pullback(&product)? - pullback(&first)? - pullback(&second)?;
        t.multiplicative.record(defect.amax(), w.as_slice());
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
struct Tracker {
    max_dev: f64,
    worst_point: Vec<f64>,
}

impl Tracker {
    fn record(&mut self, dev: f64, at: &[f64]) {
        let worse = self.worst_point.is_empty() || dev > self.max_dev || dev.is_nan();
        if worse && !self.max_dev.is_nan() {
            self.max_dev = dev;
            self.worst_point = at.to_vec();
        }
    }
}

#[derive(Debug, Default)]
struct Trackers {
    units: Tracker,
    composition: Tracker,
    identity: Tracker,
    inverse: Tracker,
    associativity: Tracker,
    cocycle: Tracker,
    lagrangian: Tracker,
    left_poisson: Tracker,
    right_anti_poisson: Tracker,
    multiplicative: Tracker,
    inverse_anti_poisson: Tracker,
    jacobi: Tracker,
    closed: Tracker,
    inverts: Tracker,
}

fn two_form(terms: &[(usize, usize, f64)]) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    for &(a, b, c) in terms {
        m[(a, b)] += c;
        m[(b, a)] -= c;
    }
    m
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn dev2(a: [f64; 2], b: [f64; 2]) -> f64 {
    rel(a[0], b[0]).max(rel(a[1], b[1]))
}

fn dev4(a: [f64; 4], b: [f64; 4]) -> f64 {
    a.iter().zip(&b).map(|(x, y)| rel(*x, *y)).fold(0.0, f64::max)
}

/// Fourth-order central difference `(-f(+2s) + 8f(+s) - 8f(-s) + f(-2s)) / 12s`.
fn stencil<T, const K: usize>(
    f: impl Fn(&SVector<f64, K>) -> Result<T>,
    at: &SVector<f64, K>,
    d: usize,
) -> Result<T>
where
    T: std::ops::Add<Output = T>
        + std::ops::Sub<Output = T>
        + std::ops::Mul<f64, Output = T>,
{
    let shifted = |k: f64| {
        let mut p = *at;
        p[d] += k * STENCIL_STEP;
        f(&p)
    };
    let (p1, m1) = (shifted(1.0)?, shifted(-1.0)?);
    let (p2, m2) = (shifted(2.0)?, shifted(-2.0)?);
    Ok(((p1 - m1) * 8.0 - (p2 - m2)) * (1.0 / (12.0 * STENCIL_STEP)))
}

fn jacobian<const M: usize, const K: usize>(
    f: impl Fn(&SVector<f64, K>) -> Result<SVector<f64, M>>,
    at: &SVector<f64, K>,
) -> Result<SMatrix<f64, M, K>> {
    let mut j = SMatrix::<f64, M, K>::zeros();
    for d in 0..K {
        j.set_column(d, &stencil(&f, at, d)?);
    }
    Ok(j)
}

/// Second-order central differences of a matrix field, one per coordinate.
fn partials(
    f: impl Fn(&SVector<f64, 4>) -> Result<Matrix4<f64>>,
    at: &SVector<f64, 4>,
) -> Result<Vec<Matrix4<f64>>> {
    (0..4)
        .map(|d| {
            let mut plus = *at;
            let mut minus = *at;
            plus[d] += FD_STEP;
            minus[d] -= FD_STEP;
            Ok((f(&plus)? - f(&minus)?) / (2.0 * FD_STEP))
        })
        .collect()
}

fn partials4(
    f: impl Fn(&SVector<f64, 4>) -> Result<Matrix4<f64>>,
    at: &SVector<f64, 4>,
) -> Result<Vec<Matrix4<f64>>> {
    (0..4).map(|d| stencil(&f, at, d)).collect()
}
