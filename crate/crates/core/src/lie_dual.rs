//! The groupoid `T*G ≅ 𝔤* × G` over the dual of a Lie algebra with its
//! Kirillov–Kostant structure `α^{ij}(x) = f^{ij}_k x^k`.
//!
//! Convention contract, used everywhere in this module:
//! - the holonomy solves `h' = h ρ(η_u)`, `h(0) = I`, so `η = h⁻¹ dh`;
//! - a solution with holonomy path `h` has `X(u) = Ad*_{h(u)⁻¹} ξ`;
//! - `coadjoint(g, ξ) = Ad*_g ξ = (Ad_{g⁻¹})ᵀ ξ`, hence
//!   `r(ξ, g) = Ad*_{g⁻¹} ξ = Ad_gᵀ ξ`;
//! - concatenating `j(ξ, g)` with `j(r(ξ, g), h)` has invariants `(ξ, g h)`.
//!
//! [`LieAlgebraSpec::self_test`] checks the contract numerically.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pathspace::{concatenate, gauss_residual, taper, DiscretizedMorphism};
use crate::poisson::{jacobi_residual, PoissonStructure, StructureConstants};

pub const GROUP_TOLERANCE: f64 = 1e-10;
/// Largest Gauss residual accepted by [`to_groupoid`].
pub const TO_GROUPOID_RESIDUAL_LIMIT: f64 = 1e-5;
/// Unit quaternions closer than this to `-1` have no preferred logarithm.
pub const ANTIPODE_EXCLUSION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    /// Left multiplication by unit quaternions on `ℝ⁴`.
    UnitQuaternion,
    Orthogonal,
    /// Upper triangular with unit diagonal.
    Unipotent,
    #[default]
    General,
}

#[derive(Debug, Clone)]
pub struct LieAlgebraSpec {
    pub name: String,
    pub constants: StructureConstants,
    pub basis: Vec<DMatrix<f64>>,
    pub kind: GroupKind,
    gram_inverse: DMatrix<f64>,
}

#[derive(Deserialize)]
struct CustomSpec {
    #[serde(default)]
    name: Option<String>,
    constants: Vec<(usize, usize, usize, f64)>,
    basis: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    group: GroupKind,
}

fn quaternion_matrix(q: [f64; 4]) -> DMatrix<f64> {
    let [w, x, y, z] = q;
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        w, -x, -y, -z,
        x, w, -z, y,
        y, z, w, -x,
        z, -y, x, w,
    ]);
    m
}

fn unit(d: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    m[(i, j)] = 1.0;
    m
}

impl LieAlgebraSpec {
    pub fn new(
        name: &str,
        constants: StructureConstants,
        basis: Vec<DMatrix<f64>>,
        kind: GroupKind,
    ) -> Result<Self> {
        let n = constants.dim();
        if basis.len() != n || n == 0 {
            return Err(Error::LieAlgebra(format!(
                "{} basis matrices for a {n}-dimensional algebra",
                basis.len()
            )));
        }
        let d = basis[0].nrows();
        if basis.iter().any(|b| b.nrows() != d || b.ncols() != d) {
            return Err(Error::LieAlgebra("basis matrices must be square of one size".into()));
        }
        let gram = DMatrix::from_fn(n, n, |a, b| basis[a].dot(&basis[b]));
        let gram_inverse = gram
            .try_inverse()
            .ok_or_else(|| Error::LieAlgebra("basis matrices are linearly dependent".into()))?;
        let spec = LieAlgebraSpec {
            name: name.to_string(),
            constants,
            basis,
            kind,
            gram_inverse,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                let commutator =
                    &self.basis[i] * &self.basis[j] - &self.basis[j] * &self.basis[i];
                let expected = self.matrix(
                    &(0..n)
                        .map(|k| self.constants.get(i, j, k))
                        .collect::<Vec<_>>(),
                );
                let dev = (commutator - expected).amax();
                if dev > 1e-12 {
                    return Err(Error::LieAlgebra(format!(
                        "representation is not a homomorphism on (e{}, e{}): deviation {dev:e}",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let kk = self.kk_structure();
        let mut rng = ChaCha8Rng::seed_from_u64(0x6b6b);
        for _ in 0..8 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let r = jacobi_residual(&kk, &x)?;
            if r > 1e-10 {
                return Err(Error::StructureConstants(format!(
                    "Jacobi identity fails: residual {r:e}"
                )));
            }
        }
        Ok(())
    }

    /// `su(2)` with `[e_i, e_j] = ε_{ijk} e_k`, `e = (i, j, k)/2` acting on
    /// quaternions by left multiplication.
    pub fn su2() -> Self {
        let basis = (1..4)
            .map(|a| {
                let mut q = [0.0; 4];
                q[a] = 0.5;
                quaternion_matrix(q)
            })
            .collect();
        Self::new(
            "su2",
            StructureConstants::levi_civita(),
            basis,
            GroupKind::UnitQuaternion,
        )
        .expect("su2 is valid")
    }

    /// `so(3)` with `(L_i)_{jk} = -ε_{ijk}`.
    pub fn so3() -> Self {
        let eps = StructureConstants::levi_civita();
        let basis = (0..3)
            .map(|i| DMatrix::from_fn(3, 3, |j, k| -eps.get(i, j, k)))
            .collect();
        Self::new("so3", eps, basis, GroupKind::Orthogonal).expect("so3 is valid")
    }

    /// The Heisenberg algebra `[e₁, e₂] = e₃` on strictly upper triangular
    /// 3×3 matrices.
    pub fn heisenberg3() -> Self {
        let constants = StructureConstants::from_entries(3, &[(0, 1, 2, 1.0)]).expect("valid");
        let basis = vec![unit(3, 0, 1), unit(3, 1, 2), unit(3, 0, 2)];
        Self::new("heisenberg3", constants, basis, GroupKind::Unipotent)
            .expect("heisenberg3 is valid")
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "su2" => Some(Self::su2()),
            "so3" => Some(Self::so3()),
            "heisenberg3" => Some(Self::heisenberg3()),
            _ => None,
        }
    }

    /// `{"constants": [[i, j, k, v], …], "basis": [[row, …], …], "group": …}`
    /// with 0-based indices.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: CustomSpec = serde_json::from_str(text)?;
        let n = raw.basis.len();
        let constants = StructureConstants::from_entries(n, &raw.constants)?;
        let basis = raw
            .basis
            .iter()
            .map(|rows| {
                let d = rows.len();
                if rows.iter().any(|r| r.len() != d) {
                    return Err(Error::LieAlgebra("basis matrices must be square".into()));
                }
                Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            raw.name.as_deref().unwrap_or("custom"),
            constants,
            basis,
            raw.group,
        )
    }

    pub fn dim(&self) -> usize {
        self.constants.dim()
    }

    pub fn rep_dim(&self) -> usize {
        self.basis[0].nrows()
    }

    pub fn kk_structure(&self) -> PoissonStructure {
        PoissonStructure::KirillovKostant(self.constants.clone())
    }

    /// `ρ(Σ c_i e_i)`.
    pub fn matrix(&self, c: &[f64]) -> DMatrix<f64> {
        let d = self.rep_dim();
        c.iter()
            .zip(&self.basis)
            .fold(DMatrix::zeros(d, d), |acc, (ci, b)| acc + b * *ci)
    }

    /// Coordinates of an algebra element, by least squares in the trace
    /// inner product.
    pub fn coordinates(&self, m: &DMatrix<f64>) -> Result<Vec<f64>> {
        let rhs = DMatrix::from_fn(self.dim(), 1, |a, _| self.basis[a].dot(m));
        let c: Vec<f64> = (&self.gram_inverse * rhs).iter().copied().collect();
        let miss = (self.matrix(&c) - m).amax();
        if miss > 1e-8 * m.amax().max(1.0) {
            return Err(Error::LieAlgebra(format!(
                "matrix is not in the algebra (distance {miss:e})"
            )));
        }
        Ok(c)
    }

    pub fn identity(&self) -> DMatrix<f64> {
        DMatrix::identity(self.rep_dim(), self.rep_dim())
    }

    /// Nearest point of the group manifold.
    pub fn project(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        match self.kind {
            GroupKind::UnitQuaternion => {
                let q = [g[(0, 0)], g[(1, 0)], g[(2, 0)], g[(3, 0)]];
                let r = q.iter().map(|v| v * v).sum::<f64>().sqrt();
                quaternion_matrix(q.map(|v| v / r))
            }
            GroupKind::Orthogonal => {
                let svd = g.clone().svd(true, true);
                match (svd.u, svd.v_t) {
                    (Some(u), Some(v_t)) => u * v_t,
                    _ => g.clone(),
                }
            }
            GroupKind::Unipotent => DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| {
                if i == j {
                    1.0
                } else if i > j {
                    0.0
                } else {
                    g[(i, j)]
                }
            }),
            GroupKind::General => g.clone(),
        }
    }

    /// Distance of `g` from the group manifold in the representation's own
    /// membership test.
    pub fn group_defect(&self, g: &DMatrix<f64>) -> f64 {
        if g.nrows() != self.rep_dim() || g.ncols() != self.rep_dim() {
            return f64::INFINITY;
        }
        let orthogonality = || (g.transpose() * g - self.identity()).amax();
        match self.kind {
            GroupKind::UnitQuaternion => {
                let q = [g[(0, 0)], g[(1, 0)], g[(2, 0)], g[(3, 0)]];
                orthogonality().max((g - quaternion_matrix(q)).amax())
            }
            GroupKind::Orthogonal => orthogonality(),
            GroupKind::Unipotent => (g - self.project(g)).amax(),
            GroupKind::General => {
                if g.determinant().abs() > 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    fn check_group(&self, g: &DMatrix<f64>) -> Result<()> {
        let defect = self.group_defect(g);
        if defect > GROUP_TOLERANCE {
            return Err(Error::LieAlgebra(format!(
                "matrix is not on the group (defect {defect:e})"
            )));
        }
        Ok(())
    }

    /// Group element from flat values: a quaternion `w,x,y,z` for unit
    /// quaternion groups, row-major matrix entries otherwise.
    pub fn element(&self, values: &[f64]) -> Result<DMatrix<f64>> {
        let g = match self.kind {
            GroupKind::UnitQuaternion => {
                let q: [f64; 4] = values.try_into().map_err(|_| Error::Dimension {
                    expected: 4,
                    got: values.len(),
                })?;
                quaternion_matrix(q)
            }
            _ => {
                let d = self.rep_dim();
                if values.len() != d * d {
                    return Err(Error::Dimension {
                        expected: d * d,
                        got: values.len(),
                    });
                }
                DMatrix::from_row_slice(d, d, values)
            }
        };
        self.check_group(&g)?;
        Ok(g)
    }

    /// Inverse of [`LieAlgebraSpec::element`].
    pub fn element_values(&self, g: &DMatrix<f64>) -> Vec<f64> {
        match self.kind {
            GroupKind::UnitQuaternion => g.column(0).iter().copied().collect(),
            _ => g.transpose().iter().copied().collect(),
        }
    }

    pub fn inverse_element(&self, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let inv = match self.kind {
            GroupKind::UnitQuaternion | GroupKind::Orthogonal => g.transpose(),
            _ => g
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::LieAlgebra("group element is singular".into()))?,
        };
        Ok(self.project(&inv))
    }

    /// `exp(ρ(c))`, projected onto the group.
    pub fn exp(&self, c: &[f64]) -> DMatrix<f64> {
        self.project(&expm(&self.matrix(c)))
    }

    /// Coordinates of the principal logarithm of `g`.
    pub fn log(&self, g: &DMatrix<f64>) -> Result<Vec<f64>> {
        if self.kind == GroupKind::UnitQuaternion {
            let q = [g[(0, 0)], g[(1, 0)], g[(2, 0)], g[(3, 0)]];
            let antipode = ((q[0] + 1.0).powi(2) + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
            if antipode <= ANTIPODE_EXCLUSION {
                return Err(Error::CutLocus(format!(
                    "element is {antipode:e} from -I"
                )));
            }
            let v = [q[1], q[2], q[3]];
            let s = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if s == 0.0 {
                return Ok(vec![0.0; 3]);
            }
            let theta = s.atan2(q[0]);
            let imag = v.map(|vi| theta * vi / s);
            return self.coordinates(&quaternion_matrix([0.0, imag[0], imag[1], imag[2]]));
        }
        let l = logm(g)?;
        self.coordinates(&l)
    }

    /// The matrix of `Ad_g` in the basis: `ρ(g) ρ(e_j) ρ(g)⁻¹ = Σ_i (Ad_g)_{ij} ρ(e_i)`.
    pub fn adjoint(&self, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let inv = self.inverse_element(g)?;
        let n = self.dim();
        let mut ad = DMatrix::zeros(n, n);
        for j in 0..n {
            let col = self.coordinates(&(g * &self.basis[j] * &inv))?;
            for i in 0..n {
                ad[(i, j)] = col[i];
            }
        }
        Ok(ad)
    }

    /// `Ad*_g ξ = (Ad_{g⁻¹})ᵀ ξ`.
    pub fn coadjoint(&self, g: &DMatrix<f64>, xi: &[f64]) -> Result<Vec<f64>> {
        self.check_xi(xi)?;
        let ad = self.adjoint(&self.inverse_element(g)?)?;
        Ok((0..self.dim())
            .map(|j| (0..self.dim()).map(|i| ad[(i, j)] * xi[i]).sum())
            .collect())
    }

    /// Target map `r(ξ, g) = Ad*_{g⁻¹} ξ`.
    pub fn right(&self, p: &LieGroupoidPoint) -> Result<Vec<f64>> {
        self.coadjoint(&self.inverse_element(&p.g)?, &p.xi)
    }

    fn check_xi(&self, xi: &[f64]) -> Result<()> {
        if xi.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: xi.len(),
            });
        }
        Ok(())
    }

    /// Checks the convention contract on a fixed composable pair: the
    /// constructed paths solve the Gauss law and concatenation multiplies
    /// holonomies in the order `g h`.
    pub fn self_test(&self) -> Result<()> {
        let n = self.dim();
        let xi: Vec<f64> = (0..n).map(|i| 1.0 - 0.4 * i as f64).collect();
        let g = self.exp(&(0..n).map(|i| 0.7 - 0.5 * i as f64).collect::<Vec<_>>());
        let h = self.exp(&(0..n).map(|i| -0.3 + 0.45 * i as f64).collect::<Vec<_>>());
        let a = LieGroupoidPoint::new(xi.clone(), g.clone());
        let b = LieGroupoidPoint::new(self.right(&a)?, h.clone());
        let m1 = from_groupoid(self, &a, 400, true)?;
        let m2 = from_groupoid(self, &b, 400, true)?;
        let residual = gauss_residual(&self.kk_structure(), &m1)?;
        if residual > 1e-3 {
            return Err(Error::LieAlgebra(format!(
                "convention self-test: Gauss residual {residual:e}"
            )));
        }
        let glued = holonomy(self, &concatenate(&m1, &m2)?)?;
        let gap = (glued - &g * &h).amax();
        if gap > 1e-4 {
            return Err(Error::LieAlgebra(format!(
                "convention self-test: concatenation holonomy off by {gap:e}"
            )));
        }
        Ok(())
    }
}

/// A point `(ξ, g)` of `𝔤* × G`.
#[derive(Debug, Clone, PartialEq)]
pub struct LieGroupoidPoint {
    pub xi: Vec<f64>,
    pub g: DMatrix<f64>,
}

impl LieGroupoidPoint {
    pub fn new(xi: Vec<f64>, g: DMatrix<f64>) -> Self {
        LieGroupoidPoint { xi, g }
    }

    pub fn distance(&self, other: &LieGroupoidPoint) -> f64 {
        let dxi = self
            .xi
            .iter()
            .zip(&other.xi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        dxi.max((&self.g - &other.g).amax())
    }
}

/// Scaling and squaring with a Taylor series on the scaled matrix.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = a.norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);
    let d = a.nrows();
    let mut sum = DMatrix::identity(d, d);
    let mut term = DMatrix::identity(d, d);
    for k in 1..=30 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if term.norm() <= 1e-18 * sum.norm() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Denman–Beavers iteration for the principal square root.
fn sqrtm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::identity(d, d);
    for _ in 0..100 {
        let (yi, zi) = match (y.clone().try_inverse(), z.clone().try_inverse()) {
            (Some(yi), Some(zi)) => (yi, zi),
            _ => break,
        };
        let next = (&y + zi) * 0.5;
        z = (&z + yi) * 0.5;
        let change = (&next - &y).norm();
        y = next;
        if change <= 1e-15 * y.norm() {
            return Ok(y);
        }
    }
    Err(Error::CutLocus("matrix square root did not converge".into()))
}

/// Principal logarithm by inverse scaling and squaring.
pub fn logm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = a.nrows();
    let id = DMatrix::<f64>::identity(d, d);
    let mut x = a.clone();
    let mut roots = 0;
    while (&x - &id).norm() > 0.25 {
        x = sqrtm(&x)?;
        roots += 1;
        if roots > 60 {
            return Err(Error::CutLocus("logarithm did not converge".into()));
        }
    }
    let b = &x - &id;
    let mut power = b.clone();
    let mut sum = b.clone();
    for k in 2..=200 {
        power = &power * &b;
        let term = &power * ((if k % 2 == 0 { -1.0 } else { 1.0 }) / k as f64);
        sum += &term;
        if term.norm() <= 1e-18 * sum.norm().max(1e-300) {
            break;
        }
    }
    let log = sum * 2f64.powi(roots);
    if (expm(&log) - a).amax() > 1e-8 * a.amax().max(1.0) {
        return Err(Error::CutLocus("logarithm is not principal".into()));
    }
    Ok(log)
}

/// Holonomy `h(1)` of `h' = h ρ(η_u)`, `h(0) = I`, by RK4 with `η_u`
/// interpolated linearly and projection onto the group after each step.
pub fn holonomy(spec: &LieAlgebraSpec, m: &DiscretizedMorphism) -> Result<DMatrix<f64>> {
    if m.n != spec.dim() {
        return Err(Error::Dimension {
            expected: spec.dim(),
            got: m.n,
        });
    }
    let step = m.step();
    let mut h = spec.identity();
    for k in 0..m.intervals {
        let a0 = spec.matrix(&m.eta_u[k]);
        let a1 = spec.matrix(&m.eta_u[k + 1]);
        let am = (&a0 + &a1) * 0.5;
        let k1 = &h * &a0;
        let k2 = (&h + &k1 * (0.5 * step)) * &am;
        let k3 = (&h + &k2 * (0.5 * step)) * &am;
        let k4 = (&h + &k3 * step) * &a1;
        h += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (step / 6.0);
        h = spec.project(&h);
    }
    Ok(h)
}

/// The map `i`: a Gauss-law solution to `(X(0), hol(η))`.
pub fn to_groupoid(spec: &LieAlgebraSpec, m: &DiscretizedMorphism) -> Result<LieGroupoidPoint> {
    let residual = gauss_residual(&spec.kk_structure(), m)?;
    if residual > TO_GROUPOID_RESIDUAL_LIMIT {
        return Err(Error::Residual {
            residual,
            limit: TO_GROUPOID_RESIDUAL_LIMIT,
        });
    }
    Ok(LieGroupoidPoint::new(m.x[0].clone(), holonomy(spec, m)?))
}

/// The map `j`: the solution along the one-parameter path
/// `h(u) = exp(s(u) log g)` with `X(u) = Ad*_{h(u)⁻¹} ξ`. The tapered
/// variant reparametrizes by [`taper`], so `η_u` vanishes at both ends.
pub fn from_groupoid(
    spec: &LieAlgebraSpec,
    p: &LieGroupoidPoint,
    intervals: usize,
    tapered: bool,
) -> Result<DiscretizedMorphism> {
    spec.check_xi(&p.xi)?;
    spec.check_group(&p.g)?;
    let c = spec.log(&p.g)?;
    let mut x = Vec::with_capacity(intervals + 1);
    let mut eta = Vec::with_capacity(intervals + 1);
    for k in 0..=intervals {
        let u = k as f64 / intervals as f64;
        let (s, speed) = if tapered { taper(u) } else { (u, 1.0) };
        let h = spec.exp(&c.iter().map(|v| s * v).collect::<Vec<_>>());
        x.push(spec.coadjoint(&spec.inverse_element(&h)?, &p.xi)?);
        eta.push(c.iter().map(|v| speed * v).collect());
    }
    DiscretizedMorphism::new(x, eta)
}

/// `(ξ, g) • (ξ̃, h) = (ξ, g h)`, defined when `ξ̃ = r(ξ, g)`.
pub fn multiply_lie(
    spec: &LieAlgebraSpec,
    a: &LieGroupoidPoint,
    b: &LieGroupoidPoint,
    tol: f64,
) -> Result<LieGroupoidPoint> {
    let r = spec.right(a)?;
    spec.check_xi(&b.xi)?;
    let gap = r
        .iter()
        .zip(&b.xi)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    if gap > tol {
        return Err(Error::NotComposable(gap));
    }
    Ok(LieGroupoidPoint::new(
        a.xi.clone(),
        spec.project(&(&a.g * &b.g)),
    ))
}

/// `(ξ, g)⁻¹ = (r(ξ, g), g⁻¹)`.
pub fn inverse_lie(spec: &LieAlgebraSpec, p: &LieGroupoidPoint) -> Result<LieGroupoidPoint> {
    Ok(LieGroupoidPoint::new(
        spec.right(p)?,
        spec.inverse_element(&p.g)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathspace::{gauge_flow, GaugeField};
    use std::f64::consts::PI;

    fn su2() -> LieAlgebraSpec {
        LieAlgebraSpec::su2()
    }

    fn quaternion_exp(c: [f64; 3]) -> [f64; 4] {
        // exp(Σ c_i e_i) with e_i = (i, j, k)/2: half-angle formula.
        let v = c.map(|x| 0.5 * x);
        let t = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let s = if t == 0.0 { 0.0 } else { t.sin() / t };
        [t.cos(), s * v[0], s * v[1], s * v[2]]
    }

    fn rodrigues(c: [f64; 3]) -> DMatrix<f64> {
        let t = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        #[rustfmt::skip]
        let k = DMatrix::from_row_slice(3, 3, &[
            0.0, -c[2] / t, c[1] / t,
            c[2] / t, 0.0, -c[0] / t,
            -c[1] / t, c[0] / t, 0.0,
        ]);
        DMatrix::identity(3, 3) + &k * t.sin() + &k * &k * (1.0 - t.cos())
    }

    #[test]
    fn kk_structure_reference_values() {
        let s = su2().kk_structure();
        let a = s.alpha(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(a[(0, 1)], 1.0);
        assert_eq!(a[(0, 2)], 0.0);
        assert_eq!(a[(1, 2)], 0.0);
        assert_eq!(s.alpha(&[0.0; 3]).unwrap(), DMatrix::zeros(3, 3));
        for x in [[0.3, -1.2, 2.0], [5.0, 0.1, -0.7]] {
            assert!(jacobi_residual(&s, &x).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn builtins_are_homomorphisms() {
        for spec in [LieAlgebraSpec::su2(), LieAlgebraSpec::so3(), LieAlgebraSpec::heisenberg3()] {
            spec.validate().unwrap();
            assert_eq!(LieAlgebraSpec::builtin(&spec.name).unwrap().name, spec.name);
        }
        assert!(LieAlgebraSpec::builtin("sl2").is_none());
    }

    #[test]
    fn element_values_round_trip() {
        let su2 = su2();
        let q = [0.5, 0.5, -0.5, 0.5];
        let g = su2.element(&q).unwrap();
        assert_eq!(su2.element_values(&g), q.to_vec());
        assert!(su2.element(&[1.0, 1.0, 0.0, 0.0]).is_err());
        let heis = LieAlgebraSpec::heisenberg3();
        let m = [1.0, 2.0, 3.0, 0.0, 1.0, 4.0, 0.0, 0.0, 1.0];
        assert_eq!(heis.element_values(&heis.element(&m).unwrap()), m.to_vec());
        assert!(heis.element(&[1.0; 4]).is_err());
    }

    #[test]
    fn custom_spec_is_validated() {
        let so3 = r#"{"constants": [[0,1,2,1],[1,2,0,1],[2,0,1,1]],
            "basis": [[[0,0,0],[0,0,-1],[0,1,0]],[[0,0,1],[0,0,0],[-1,0,0]],[[0,-1,0],[1,0,0],[0,0,0]]],
            "group": "orthogonal"}"#;
        let spec = LieAlgebraSpec::from_json(so3).unwrap();
        assert_eq!(spec.kind, GroupKind::Orthogonal);
        let wrong = so3.replace("[0,1,2,1]", "[0,1,2,-1]");
        assert!(LieAlgebraSpec::from_json(&wrong).is_err());
    }

    #[test]
    fn exp_matches_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let c: [f64; 3] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
            let q = quaternion_exp(c);
            assert!((su2().exp(&c) - quaternion_matrix(q)).amax() <= 1e-12);
            assert!((LieAlgebraSpec::so3().exp(&c) - rodrigues(c)).amax() <= 1e-12);
            let h = LieAlgebraSpec::heisenberg3();
            let a = h.matrix(&c);
            let closed = DMatrix::identity(3, 3) + &a + &a * &a * 0.5;
            assert!((h.exp(&c) - closed).amax() <= 1e-12);
        }
    }

    #[test]
    fn log_inverts_exp() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for spec in [LieAlgebraSpec::su2(), LieAlgebraSpec::so3(), LieAlgebraSpec::heisenberg3()] {
            for _ in 0..20 {
                let mut c: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
                if spec.kind != GroupKind::Unipotent {
                    let norm = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
                    c = c.map(|v| v / norm * rng.random_range(0.0..3.0));
                }
                let back = spec.log(&spec.exp(&c)).unwrap();
                for (a, b) in back.iter().zip(&c) {
                    assert!((a - b).abs() <= 1e-9, "{}: {back:?} vs {c:?}", spec.name);
                }
            }
        }
    }

    #[test]
    fn antipode_has_no_logarithm() {
        let minus = quaternion_matrix([-1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(su2().log(&minus), Err(Error::CutLocus(_))));
        let p = LieGroupoidPoint::new(vec![1.0, 0.0, 0.0], minus);
        assert!(matches!(from_groupoid(&su2(), &p, 10, false), Err(Error::CutLocus(_))));
    }

    #[test]
    fn coadjoint_is_orthogonal_for_su2() {
        let spec = su2();
        let g = spec.exp(&[0.4, -1.7, 2.2]);
        let xi = [0.3, 1.1, -0.8];
        let out = spec.coadjoint(&g, &xi).unwrap();
        let n = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((n(&out) - n(&xi)).abs() <= 1e-12);
        assert_eq!(spec.coadjoint(&spec.identity(), &xi).unwrap(), xi.to_vec());
    }

    #[test]
    fn coadjoint_is_a_left_action() {
        let spec = LieAlgebraSpec::heisenberg3();
        let g = spec.exp(&[0.4, -1.7, 2.2]);
        let h = spec.exp(&[1.0, 0.5, -0.3]);
        let xi = [0.3, 1.1, -0.8];
        let lhs = spec.coadjoint(&(&g * &h), &xi).unwrap();
        let rhs = spec.coadjoint(&g, &spec.coadjoint(&h, &xi).unwrap()).unwrap();
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn holonomy_of_zero_and_constant_covectors() {
        let spec = su2();
        let zero = DiscretizedMorphism::constant(&[1.0, 0.0, 0.0], 100);
        assert_eq!(holonomy(&spec, &zero).unwrap(), spec.identity());
        let c = [0.9, -1.4, 0.6];
        let m = DiscretizedMorphism::new(vec![vec![0.0; 3]; 101], vec![c.to_vec(); 101]).unwrap();
        let h = holonomy(&spec, &m).unwrap();
        assert!((h - quaternion_matrix(quaternion_exp(c))).amax() <= 1e-8);
    }

    #[test]
    fn group_drift_stays_small() {
        for spec in [LieAlgebraSpec::su2(), LieAlgebraSpec::so3()] {
            let eta: Vec<Vec<f64>> = (0..=2000)
                .map(|k| {
                    let u = k as f64 / 2000.0;
                    vec![3.0 * (5.0 * u).sin(), 2.0 * u, -1.5 * (2.0 * u).cos()]
                })
                .collect();
            let m = DiscretizedMorphism::new(vec![vec![0.0; 3]; 2001], eta).unwrap();
            let h = holonomy(&spec, &m).unwrap();
            assert!(spec.group_defect(&h) <= 1e-10);
        }
    }

    #[test]
    fn from_groupoid_identity_is_constant() {
        let spec = su2();
        let p = LieGroupoidPoint::new(vec![0.2, 0.3, -0.1], spec.identity());
        let m = from_groupoid(&spec, &p, 50, false).unwrap();
        assert!(m.x.iter().all(|x| x == &p.xi));
        assert!(m.eta_u.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn quarter_turn_reference() {
        let spec = su2();
        let g = spec.exp(&[0.0, 0.0, PI / 2.0]);
        let p = LieGroupoidPoint::new(vec![0.0, 0.0, 1.0], g.clone());
        let m = from_groupoid(&spec, &p, 2000, false).unwrap();
        let target = spec.coadjoint(&spec.inverse_element(&g).unwrap(), &p.xi).unwrap();
        for (a, b) in m.end().iter().zip(&target) {
            assert!((a - b).abs() <= 1e-8);
        }
        for x in &m.x {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((r - 1.0).abs() <= 1e-12);
        }
        assert!(gauss_residual(&spec.kk_structure(), &m).unwrap() <= 1e-6);
    }

    #[test]
    fn maps_i_and_j_are_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for spec in [LieAlgebraSpec::su2(), LieAlgebraSpec::so3(), LieAlgebraSpec::heisenberg3()] {
            for tapered in [false, true] {
                let xi: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
                let c: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
                let p = LieGroupoidPoint::new(xi, spec.exp(&c));
                let (intervals, limit) = if tapered { (4000, 1e-5) } else { (2000, 1e-6) };
                let m = from_groupoid(&spec, &p, intervals, tapered).unwrap();
                assert!(gauss_residual(&spec.kk_structure(), &m).unwrap() <= limit);
                let back = to_groupoid(&spec, &m).unwrap();
                assert!(back.distance(&p) <= 1e-6, "{} {tapered}: {}", spec.name, back.distance(&p));
                let r = spec.right(&p).unwrap();
                for (a, b) in m.end().iter().zip(&r) {
                    assert!((a - b).abs() <= 1e-8);
                }
            }
        }
    }

    #[test]
    fn product_identities() {
        let spec = su2();
        let g = spec.exp(&[0.5, 1.0, -0.2]);
        let p = LieGroupoidPoint::new(vec![0.4, -0.9, 1.3], g.clone());
        let unit = LieGroupoidPoint::new(spec.right(&p).unwrap(), spec.identity());
        assert!(multiply_lie(&spec, &p, &unit, 1e-8).unwrap().distance(&p) <= 1e-12);
        let inv = inverse_lie(&spec, &p).unwrap();
        let e = multiply_lie(&spec, &p, &inv, 1e-8).unwrap();
        assert!(e.distance(&LieGroupoidPoint::new(p.xi.clone(), spec.identity())) <= 1e-12);
        let bad = LieGroupoidPoint::new(p.xi.clone(), spec.identity());
        assert!(matches!(
            multiply_lie(&spec, &p, &bad, 1e-8),
            Err(Error::NotComposable(_))
        ));
    }

    #[test]
    fn concatenation_multiplies_in_order() {
        for spec in [LieAlgebraSpec::su2(), LieAlgebraSpec::heisenberg3()] {
            spec.self_test().unwrap();
            let g = spec.exp(&[0.8, -0.6, 0.9]);
            let h = spec.exp(&[-0.4, 1.1, 0.3]);
            let a = LieGroupoidPoint::new(vec![0.5, 1.2, -0.7], g);
            let b = LieGroupoidPoint::new(spec.right(&a).unwrap(), h);
            let m1 = from_groupoid(&spec, &a, 4000, true).unwrap();
            let m2 = from_groupoid(&spec, &b, 4000, true).unwrap();
            let glued = to_groupoid(&spec, &concatenate(&m1, &m2).unwrap()).unwrap();
            let want = multiply_lie(&spec, &a, &b, 1e-8).unwrap();
            assert!(glued.distance(&want) <= 1e-5, "{}", glued.distance(&want));
        }
    }

    #[test]
    fn gauge_flow_preserves_the_groupoid_point() {
        let spec = su2();
        let p = LieGroupoidPoint::new(vec![0.6, -0.2, 0.9], spec.exp(&[1.0, 0.4, -0.8]));
        let m = from_groupoid(&spec, &p, 2000, false).unwrap();
        let beta =
            GaugeField::parse(&["0.3*sin(pi*u)*x2", "0.3*u*(1-u)", "0.3*sin(2*pi*u)*x1"]).unwrap();
        let s = spec.kk_structure();
        let flowed = gauge_flow(&s, &m, &beta, 64).unwrap();
        assert_eq!(flowed.start(), m.start());
        assert!(gauss_residual(&s, &flowed).unwrap() <= 1e-5);
        let back = to_groupoid(&spec, &flowed).unwrap();
        assert!(back.distance(&p) <= 1e-6, "{}", back.distance(&p));
    }
}
