//! Poisson bivectors with their first derivatives, the Jacobi residual and
//! the Koszul bracket of 1-forms.

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::{Expr, Function};
use crate::groupoid2d::{Domain2D, Phi2D};

/// Radius below which rotation-invariant structures are undefined.
pub const ORIGIN_EXCLUSION: f64 = 1e-6;

/// Structure constants `f^{ij}_k` of a Lie algebra, `[e_i, e_j] = f^{ij}_k e_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureConstants {
    n: usize,
    f: Vec<f64>,
}

impl StructureConstants {
    pub fn zeros(n: usize) -> Self {
        StructureConstants {
            n,
            f: vec![0.0; n * n * n],
        }
    }

    /// Builds the tensor from `(i, j, k, value)` entries (0-based). Entries for
    /// `(j, i, k)` are filled in by antisymmetry; if both orders are given
    /// they must be negatives of each other.
    pub fn from_entries(n: usize, entries: &[(usize, usize, usize, f64)]) -> Result<Self> {
        let mut out = StructureConstants::zeros(n);
        let mut given = vec![false; n * n * n];
        for &(i, j, k, v) in entries {
            if i >= n || j >= n || k >= n {
                return Err(Error::StructureConstants(format!(
                    "index ({i}, {j}, {k}) out of range for dimension {n}"
                )));
            }
            if i == j {
                if v != 0.0 {
                    return Err(Error::StructureConstants(format!(
                        "f^{{{i}{i}}}_{k} = {v} violates antisymmetry"
                    )));
                }
                continue;
            }
            let ij = out.index(i, j, k);
            let ji = out.index(j, i, k);
            if given[ij] && out.f[ij] != v {
                return Err(Error::StructureConstants(format!(
                    "entry ({i}, {j}, {k}) given twice with different values"
                )));
            }
            if given[ji] && out.f[ji] != -v {
                return Err(Error::StructureConstants(format!(
                    "entries ({i}, {j}, {k}) and ({j}, {i}, {k}) are not antisymmetric"
                )));
            }
            given[ij] = true;
            out.f[ij] = v;
            out.f[ji] = -v;
        }
        Ok(out)
    }

    /// Parses the JSON form: an array of `[i, j, k, value]` quadruples.
    /// The dimension is the largest index plus one unless given.
    pub fn from_json(text: &str, n: Option<usize>) -> Result<Self> {
        let raw: Vec<(usize, usize, usize, f64)> = serde_json::from_str(text)?;
        let inferred = raw
            .iter()
            .map(|&(i, j, k, _)| i.max(j).max(k) + 1)
            .max()
            .unwrap_or(0);
        let n = n.unwrap_or(inferred);
        Self::from_entries(n, &raw)
    }

    pub fn to_json(&self) -> String {
        let mut entries = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                for k in 0..self.n {
                    let v = self.get(i, j, k);
                    if v != 0.0 {
                        entries.push((i, j, k, v));
                    }
                }
            }
        }
        serde_json::to_string(&entries).expect("plain tuples serialize")
    }

    /// Totally antisymmetric `f^{ij}_k = ε_{ijk}` (the `su(2)` / `so(3)` constants).
    pub fn levi_civita() -> Self {
        let mut out = StructureConstants::zeros(3);
        for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            out.set(i, j, k, 1.0);
            out.set(j, i, k, -1.0);
        }
        out
    }

    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.f[self.index(i, j, k)]
    }

    fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.index(i, j, k);
        self.f[idx] = v;
    }
}

/// The profile `f(R)` of a rotation-invariant bivector `f(|x|) ε^{ijk} x^k`.
#[derive(Debug, Clone)]
pub struct RadialFunction {
    f: Function,
}

impl RadialFunction {
    pub fn parse(source: &str) -> Result<Self> {
        Ok(RadialFunction {
            f: Function::parse(source, &["R"])?,
        })
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        Ok(self.f.eval(&[r])?)
    }

    pub fn derivative(&self, r: f64) -> Result<f64> {
        Ok(self.f.partial(0).eval(&[r])?)
    }

    pub fn function(&self) -> &Function {
        &self.f
    }
}

/// A bivector given entrywise by expressions for `i < j`.
#[derive(Debug, Clone)]
pub struct SymbolicBivector {
    n: usize,
    entries: Vec<(usize, usize, Function)>,
}

impl SymbolicBivector {
    /// `entries` lists `(i, j, source)` with `i < j`, 0-based; variables are
    /// `x1..xn`. Unlisted entries are zero.
    pub fn parse(n: usize, entries: &[(usize, usize, &str)]) -> Result<Self> {
        let names = coordinate_names(n);
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut parsed = Vec::with_capacity(entries.len());
        for &(i, j, src) in entries {
            if i >= j || j >= n {
                return Err(Error::Invalid(format!(
                    "bivector entry ({i}, {j}) must satisfy i < j < {n}"
                )));
            }
            parsed.push((i, j, Function::parse(src, &names)?));
        }
        Ok(SymbolicBivector { n, entries: parsed })
    }
}

/// `x1, ..., xn`.
pub fn coordinate_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

#[derive(Debug, Clone)]
pub enum PoissonStructure {
    Constant(DMatrix<f64>),
    /// `α^{ij} = ε^{ij} φ` on a planar domain, `ε^{12} = +1`.
    TwoDomain { phi: Phi2D, domain: Domain2D },
    /// `α^{ij}(x) = f^{ij}_k x^k` on the dual of a Lie algebra.
    KirillovKostant(StructureConstants),
    /// `α^{ij}(x) = f(|x|) ε^{ijk} x^k` on `ℝ³ ∖ {0}`.
    RotInvariant3(RadialFunction),
    Symbolic(SymbolicBivector),
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

impl PoissonStructure {
    pub fn constant(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Invalid("constant structure must be square".into()));
        }
        let asym = (&matrix + matrix.transpose()).amax();
        if asym > 0.0 {
            return Err(Error::Invalid(format!(
                "constant structure is not antisymmetric (|A + Aᵀ| = {asym:e})"
            )));
        }
        Ok(PoissonStructure::Constant(matrix))
    }

    /// Reads a constant structure from JSON rows, e.g. `[[0, 1], [-1, 0]]`
    /// or `{"matrix": [[0, 1], [-1, 0]]}`.
    pub fn constant_from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Form {
            Rows(Vec<Vec<f64>>),
            Wrapped { matrix: Vec<Vec<f64>> },
        }
        let rows = match serde_json::from_str::<Form>(text)? {
            Form::Rows(r) | Form::Wrapped { matrix: r } => r,
        };
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid("constant structure rows must be square".into()));
        }
        Self::constant(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn two_domain(phi: Phi2D, domain: Domain2D) -> Self {
        PoissonStructure::TwoDomain { phi, domain }
    }

    pub fn dim(&self) -> usize {
        match self {
            PoissonStructure::Constant(m) => m.nrows(),
            PoissonStructure::TwoDomain { .. } => 2,
            PoissonStructure::KirillovKostant(f) => f.dim(),
            PoissonStructure::RotInvariant3(_) => 3,
            PoissonStructure::Symbolic(s) => s.n,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            PoissonStructure::TwoDomain { domain, .. } => domain.contains([x[0], x[1]]),
            PoissonStructure::RotInvariant3(_) => norm(x) >= ORIGIN_EXCLUSION,
            _ => true,
        }
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if !self.contains(x) {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
        Ok(())
    }

    /// The matrix `α^{ij}(x)`.
    pub fn alpha(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check(x)?;
        let n = self.dim();
        Ok(match self {
            PoissonStructure::Constant(m) => m.clone(),
            PoissonStructure::TwoDomain { phi, .. } => {
                let v = phi.value([x[0], x[1]])?;
                DMatrix::from_row_slice(2, 2, &[0.0, v, -v, 0.0])
            }
            PoissonStructure::KirillovKostant(f) => DMatrix::from_fn(n, n, |i, j| {
                (0..n).map(|k| f.get(i, j, k) * x[k]).sum()
            }),
            PoissonStructure::RotInvariant3(rf) => {
                let fr = rf.value(norm(x))?;
                DMatrix::from_fn(3, 3, |i, j| {
                    fr * (0..3).map(|k| levi_civita(i, j, k) * x[k]).sum::<f64>()
                })
            }
            PoissonStructure::Symbolic(s) => {
                let mut m = DMatrix::zeros(n, n);
                for (i, j, e) in &s.entries {
                    let v = e.eval(x)?;
                    m[(*i, *j)] = v;
                    m[(*j, *i)] = -v;
                }
                m
            }
        })
    }

    /// First partials: element `k` of the result is the matrix `∂_k α^{ij}(x)`.
    pub fn d_alpha(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        self.check(x)?;
        let n = self.dim();
        Ok(match self {
            PoissonStructure::Constant(_) => vec![DMatrix::zeros(n, n); n],
            PoissonStructure::TwoDomain { phi, .. } => {
                let g = phi.gradient([x[0], x[1]])?;
                g.iter()
                    .map(|&d| DMatrix::from_row_slice(2, 2, &[0.0, d, -d, 0.0]))
                    .collect()
            }
            PoissonStructure::KirillovKostant(f) => (0..n)
                .map(|k| DMatrix::from_fn(n, n, |i, j| f.get(i, j, k)))
                .collect(),
            PoissonStructure::RotInvariant3(rf) => {
                let r = norm(x);
                let fr = rf.value(r)?;
                let dfr = rf.derivative(r)?;
                (0..3)
                    .map(|l| {
                        DMatrix::from_fn(3, 3, |i, j| {
                            let eps_x: f64 = (0..3).map(|k| levi_civita(i, j, k) * x[k]).sum();
                            dfr * x[l] / r * eps_x + fr * levi_civita(i, j, l)
                        })
                    })
                    .collect()
            }
            PoissonStructure::Symbolic(s) => {
                let mut out = vec![DMatrix::zeros(n, n); n];
                for (i, j, e) in &s.entries {
                    for (k, m) in out.iter_mut().enumerate() {
                        let v = e.partial(k).eval(x)?;
                        m[(*i, *j)] = v;
                        m[(*j, *i)] = -v;
                    }
                }
                out
            }
        })
    }

    /// Second partials `∂_l ∂_k α^{ij}` indexed `[l][k]`, available for the
    /// planar and linear structures.
    pub fn d2_alpha(&self, x: &[f64]) -> Option<Result<Vec<Vec<DMatrix<f64>>>>> {
        let n = self.dim();
        let zero = || vec![vec![DMatrix::zeros(n, n); n]; n];
        match self {
            PoissonStructure::Constant(_) | PoissonStructure::KirillovKostant(_) => {
                Some(self.check(x).map(|_| zero()))
            }
            PoissonStructure::TwoDomain { phi, .. } => Some(self.check(x).and_then(|_| {
                let hess = phi.hessian([x[0], x[1]])?;
                Ok((0..2)
                    .map(|l| {
                        (0..2)
                            .map(|k| {
                                let d = hess[l][k];
                                DMatrix::from_row_slice(2, 2, &[0.0, d, -d, 0.0])
                            })
                            .collect()
                    })
                    .collect())
            })),
            _ => None,
        }
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Largest component of the Jacobi tensor
/// `J^{ijk} = Σ_l α^{il}∂_lα^{jk} + α^{jl}∂_lα^{ki} + α^{kl}∂_lα^{ij}`.
pub fn jacobi_residual(s: &PoissonStructure, x: &[f64]) -> Result<f64> {
    let a = s.alpha(x)?;
    let da = s.d_alpha(x)?;
    let n = s.dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut sum = 0.0;
                for (l, dl) in da.iter().enumerate() {
                    sum += a[(i, l)] * dl[(j, k)] + a[(j, l)] * dl[(k, i)] + a[(k, l)] * dl[(i, j)];
                }
                worst = worst.max(sum.abs());
            }
        }
    }
    Ok(worst)
}

/// A covector field evaluated pointwise together with its Jacobian
/// `J[(i, j)] = ∂_j β_i`.
pub trait OneForm {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>>;
}

/// A 1-form `β_i(x) dx^i` with symbolic partials.
#[derive(Debug, Clone)]
pub struct CovectorField1Form {
    components: Vec<Function>,
}

impl CovectorField1Form {
    /// Components as sources over `x1..xn`.
    pub fn parse(components: &[&str]) -> Result<Self> {
        let n = components.len();
        let names = coordinate_names(n);
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let components = components
            .iter()
            .map(|src| Function::parse(src, &names))
            .collect::<Result<_, _>>()?;
        Ok(CovectorField1Form { components })
    }

    pub fn from_exprs(components: Vec<Expr>) -> Self {
        let n = components.len();
        let names = coordinate_names(n);
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        CovectorField1Form {
            components: components
                .into_iter()
                .map(|e| Function::new(e, &names))
                .collect(),
        }
    }
}

impl OneForm for CovectorField1Form {
    fn dim(&self) -> usize {
        self.components.len()
    }

    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .components
            .iter()
            .map(|c| c.eval(x))
            .collect::<Result<_, _>>()?)
    }

    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (i, c) in self.components.iter().enumerate() {
            for j in 0..n {
                m[(i, j)] = c.partial(j).eval(x)?;
            }
        }
        Ok(m)
    }
}

/// Wraps a pointwise covector map; the Jacobian is taken by central
/// differences.
pub struct FiniteDifferenceForm<F> {
    n: usize,
    step: f64,
    f: F,
}

impl<F> FiniteDifferenceForm<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    pub fn new(n: usize, step: f64, f: F) -> Self {
        FiniteDifferenceForm { n, step, f }
    }
}

impl<F> OneForm for FiniteDifferenceForm<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        (self.f)(x)
    }

    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        let mut xp = x.to_vec();
        for j in 0..n {
            xp[j] = x[j] + self.step;
            let fp = (self.f)(&xp)?;
            xp[j] = x[j] - self.step;
            let fm = (self.f)(&xp)?;
            xp[j] = x[j];
            for i in 0..n {
                m[(i, j)] = (fp[i] - fm[i]) / (2.0 * self.step);
            }
        }
        Ok(m)
    }
}

/// Components of the Koszul bracket `[β, γ]` at `x`:
/// `∂_iα^{jk}β_jγ_k + α^{jk}∂_jβ_iγ_k + α^{jk}β_j∂_kγ_i`.
pub fn koszul_bracket(
    s: &PoissonStructure,
    beta: &dyn OneForm,
    gamma: &dyn OneForm,
    x: &[f64],
) -> Result<Vec<f64>> {
    let n = s.dim();
    for d in [beta.dim(), gamma.dim()] {
        if d != n {
            return Err(Error::Dimension {
                expected: n,
                got: d,
            });
        }
    }
    let a = s.alpha(x)?;
    let da = s.d_alpha(x)?;
    let b = beta.value(x)?;
    let g = gamma.value(x)?;
    let db = beta.jacobian(x)?;
    let dg = gamma.jacobian(x)?;
    Ok(koszul_components(&a, &da, &b, &g, &db, &dg))
}

pub(crate) fn koszul_components(
    a: &DMatrix<f64>,
    da: &[DMatrix<f64>],
    b: &[f64],
    g: &[f64],
    db: &DMatrix<f64>,
    dg: &DMatrix<f64>,
) -> Vec<f64> {
    let n = b.len();
    let ab: Vec<f64> = (0..n).map(|k| (0..n).map(|j| b[j] * a[(j, k)]).sum()).collect();
    let ag: Vec<f64> = (0..n).map(|j| (0..n).map(|k| a[(j, k)] * g[k]).sum()).collect();
    (0..n)
        .map(|i| {
            let mut s = 0.0;
            for j in 0..n {
                for k in 0..n {
                    s += da[i][(j, k)] * b[j] * g[k];
                }
                // α^{jk} ∂_j β_i γ_k
                s += db[(i, j)] * ag[j];
                // α^{jk} β_j ∂_k γ_i
                s += ab[j] * dg[(i, j)];
            }
            s
        })
        .collect()
}

/// `[β, γ]` as a 1-form whose Jacobian is taken by finite differences, so
/// it can be nested inside further brackets.
pub fn bracket_form<'a>(
    s: &'a PoissonStructure,
    beta: &'a dyn OneForm,
    gamma: &'a dyn OneForm,
    step: f64,
) -> FiniteDifferenceForm<impl Fn(&[f64]) -> Result<Vec<f64>> + 'a> {
    FiniteDifferenceForm::new(s.dim(), step, move |x: &[f64]| {
        koszul_bracket(s, beta, gamma, x)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn su2() -> PoissonStructure {
        PoissonStructure::KirillovKostant(StructureConstants::levi_civita())
    }

    // Independent transcription of the cyclic sum with entries computed from
    // closed-form α and ∂α supplied by the caller.
    fn brute_jacobi(
        alpha: impl Fn(&[f64]) -> [[f64; 3]; 3],
        x: &[f64],
        h: f64,
    ) -> f64 {
        let a = alpha(x);
        let mut da = [[[0.0; 3]; 3]; 3];
        for (l, dal) in da.iter_mut().enumerate() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[l] += h;
            xm[l] -= h;
            let (ap, am) = (alpha(&xp), alpha(&xm));
            for i in 0..3 {
                for j in 0..3 {
                    dal[i][j] = (ap[i][j] - am[i][j]) / (2.0 * h);
                }
            }
        }
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let mut s = 0.0;
                    for l in 0..3 {
                        s += a[i][l] * da[l][j][k] + a[j][l] * da[l][k][i] + a[k][l] * da[l][i][j];
                    }
                    worst = worst.max(s.abs());
                }
            }
        }
        worst
    }

    #[test]
    fn planar_structures_are_poisson() {
        let phi = Phi2D::parse("sin(x1)*x2^3 + exp(x2)").unwrap();
        let s = PoissonStructure::two_domain(phi, Domain2D::plane());
        for x in [[0.3, -1.2], [2.0, 0.5], [-1.0, 1.0]] {
            assert!(jacobi_residual(&s, &x).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn su2_is_poisson() {
        let r = jacobi_residual(&su2(), &[1.0, 2.0, 3.0]).unwrap();
        assert!(r <= 1e-12);
        let oracle = brute_jacobi(
            |x| {
                [
                    [0.0, x[2], -x[1]],
                    [-x[2], 0.0, x[0]],
                    [x[1], -x[0], 0.0],
                ]
            },
            &[1.0, 2.0, 3.0],
            1e-3,
        );
        assert!(oracle <= 1e-12);
    }

    #[test]
    fn perturbed_bivector_fails_jacobi() {
        let s = PoissonStructure::Symbolic(
            SymbolicBivector::parse(3, &[(0, 1, "x3*x1"), (0, 2, "x2"), (1, 2, "1")]).unwrap(),
        );
        let x = [1.0, 1.0, 1.0];
        let r = jacobi_residual(&s, &x).unwrap();
        let oracle = brute_jacobi(
            |x| {
                [
                    [0.0, x[2] * x[0], x[1]],
                    [-x[2] * x[0], 0.0, 1.0],
                    [-x[1], -1.0, 0.0],
                ]
            },
            &x,
            1e-4,
        );
        assert!(r > 0.1);
        assert!((r - oracle).abs() < 1e-8, "{r} vs {oracle}");
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rot_invariant_excludes_origin() {
        let s = PoissonStructure::RotInvariant3(RadialFunction::parse("R^2 + 1").unwrap());
        assert!(matches!(
            s.alpha(&[0.0, 0.0, 1e-7]),
            Err(Error::OutsideDomain { .. })
        ));
        assert!(jacobi_residual(&s, &[0.3, -0.4, 1.1]).unwrap() <= 1e-12);
    }

    #[test]
    fn koszul_constant_structure_constant_forms() {
        let s = PoissonStructure::constant(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 1.0, 2.0, -1.0, 0.0, -0.5, -2.0, 0.5, 0.0],
        ))
        .unwrap();
        let b = CovectorField1Form::parse(&["1", "2", "3"]).unwrap();
        let g = CovectorField1Form::parse(&["-1", "0.5", "4"]).unwrap();
        let out = koszul_bracket(&s, &b, &g, &[0.1, 0.2, 0.3]).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn koszul_su2_coordinate_forms() {
        let b = CovectorField1Form::parse(&["1", "0", "0"]).unwrap();
        let g = CovectorField1Form::parse(&["0", "1", "0"]).unwrap();
        for x in [[1.0, 2.0, 3.0], [-0.5, 0.0, 7.0]] {
            let out = koszul_bracket(&su2(), &b, &g, &x).unwrap();
            assert_eq!(out, vec![0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn koszul_self_bracket_vanishes() {
        let b = CovectorField1Form::parse(&["x2*x3", "sin(x1)", "x1^2"]).unwrap();
        let out = koszul_bracket(&su2(), &b, &b, &[0.4, -0.3, 1.2]).unwrap();
        assert!(out.iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let b = CovectorField1Form::parse(&["1", "0"]).unwrap();
        let g = CovectorField1Form::parse(&["0", "1", "0"]).unwrap();
        assert!(matches!(
            koszul_bracket(&su2(), &b, &g, &[1.0, 1.0, 1.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn structure_constants_validate_antisymmetry() {
        let ok = StructureConstants::from_json("[[0,1,2,1.0],[1,0,2,-1.0]]", None).unwrap();
        assert_eq!(ok.get(1, 0, 2), -1.0);
        assert_eq!(ok.dim(), 3);
        assert!(StructureConstants::from_json("[[0,1,2,1.0],[1,0,2,1.0]]", None).is_err());
        assert!(StructureConstants::from_json("[[1,1,0,2.0]]", None).is_err());
        let eps = StructureConstants::levi_civita();
        let back = StructureConstants::from_json(&eps.to_json(), Some(3)).unwrap();
        assert_eq!(back, eps);
    }

    #[test]
    fn constant_structure_from_json() {
        let s = PoissonStructure::constant_from_json("{\"matrix\": [[0, 2], [-2, 0]]}").unwrap();
        assert_eq!(s.alpha(&[5.0, 5.0]).unwrap()[(0, 1)], 2.0);
        assert!(PoissonStructure::constant_from_json("[[0, 1], [1, 0]]").is_err());
    }
}
