//! Choi matrices of unital maps that keep a chosen observable fixed.
//!
//! A map is represented by `Z` acting as `Φ†[B] = tr₂[Z (𝟙 ⊗ Bᵀ)]`. For an
//! observable `A` and a unit vector `v` the fixed-point family is
//!
//! ```text
//! Z_A = A ⊗ P / e + (𝟙 − A/e) / (N/t − 1/e) ⊗ (𝟙/t − P/e)
//! ```
//!
//! with `P = (|v⟩⟨v|)ᵀ`, `e = ⟨v|A|v⟩` and `t = tr A`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{
    eigenvalues, is_psd, kron, norm, partial_trace_second, ComplexMatrix, HermitianObservable,
    C64, HERM_TOL,
};

/// Default threshold on the smallest eigenvalue when deciding positivity.
pub const PSD_TOL: f64 = 1e-9;
/// Unitality / fixed-point residual every constructed `Z_A` must meet.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Inputs within this distance of unit norm are normalised silently.
pub const NORMALISE_TOL: f64 = 1e-6;
const DEGENERACY_TOL: f64 = 1e-12;

/// `{"re": [...], "im": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorJson {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl VectorJson {
    pub fn from_vec(v: &[C64]) -> Self {
        VectorJson {
            re: v.iter().map(|z| z.re).collect(),
            im: v.iter().map(|z| z.im).collect(),
        }
    }

    pub fn to_vec(&self) -> Result<Vec<C64>> {
        if self.re.len() != self.im.len() || self.re.is_empty() {
            return Err(Error::Dimension(format!(
                "vector with {} real and {} imaginary parts",
                self.re.len(),
                self.im.len()
            )));
        }
        let v: Vec<C64> = self.re.iter().zip(&self.im).map(|(&r, &i)| C64::new(r, i)).collect();
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(v)
    }
}

/// The pair `(A, v)` that parameterises the fixed-point family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecJson", into = "SpecJson")]
pub struct FixedPointSpec {
    a: HermitianObservable,
    v: Vec<C64>,
    expectation: f64,
    trace: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecJson {
    #[serde(rename = "A")]
    pub a: ComplexMatrix,
    pub v: VectorJson,
}

impl TryFrom<SpecJson> for FixedPointSpec {
    type Error = Error;

    fn try_from(j: SpecJson) -> Result<Self> {
        FixedPointSpec::new(HermitianObservable::new(j.a)?, j.v.to_vec()?)
    }
}

impl From<FixedPointSpec> for SpecJson {
    fn from(s: FixedPointSpec) -> Self {
        SpecJson {
            v: VectorJson::from_vec(&s.v),
            a: s.a.into_matrix(),
        }
    }
}

impl FixedPointSpec {
    pub fn new(a: HermitianObservable, v: Vec<C64>) -> Result<Self> {
        let n = a.dim();
        if v.len() != n {
            return Err(Error::Dimension(format!(
                "vector of length {} for a {n}-dimensional observable",
                v.len()
            )));
        }
        let len = norm(&v);
        if (len - 1.0).abs() > NORMALISE_TOL {
            return Err(Error::InvalidVector(len));
        }
        // Leave already-unit vectors bit-identical so JSON round-trips are exact.
        let v: Vec<C64> = if (len - 1.0).abs() <= 4.0 * f64::EPSILON {
            v
        } else {
            v.into_iter().map(|z| z / len).collect()
        };

        let scale = a.matrix().max_abs();
        let trace = a.trace();
        if scale == 0.0 || trace.abs() <= DEGENERACY_TOL * scale * n as f64 {
            return Err(Error::ZeroTrace);
        }
        let expectation = a.expectation(&v)?;
        if expectation.abs() <= DEGENERACY_TOL * scale {
            return Err(Error::ZeroExpectation);
        }
        let mean = trace / n as f64;
        if (expectation - mean).abs() <= DEGENERACY_TOL * scale {
            return Err(Error::DegenerateDenominator { expectation, mean });
        }
        Ok(FixedPointSpec {
            a,
            v,
            expectation,
            trace,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn observable(&self) -> &HermitianObservable {
        &self.a
    }

    pub fn vector(&self) -> &[C64] {
        &self.v
    }

    /// `⟨v|A|v⟩`.
    pub fn expectation(&self) -> f64 {
        self.expectation
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    /// `N/tr A − 1/⟨v|A|v⟩`, nonzero by construction.
    pub fn denominator(&self) -> f64 {
        self.dim() as f64 / self.trace - 1.0 / self.expectation
    }

    /// `(|v⟩⟨v|)ᵀ = |v̄⟩⟨v̄|`.
    pub fn transposed_projector(&self) -> ComplexMatrix {
        let vbar: Vec<C64> = self.v.iter().map(|z| z.conj()).collect();
        ComplexMatrix::outer(&vbar, &vbar)
    }

    /// Same construction with `A` replaced by `c·A`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        FixedPointSpec::new(
            HermitianObservable::new(self.a.matrix().scale_real(c))?,
            self.v.clone(),
        )
    }
}

/// `N² × N²` Choi matrix of a linear map on `N × N` observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChoiJson", into = "ChoiJson")]
pub struct ChoiMatrix {
    dim: usize,
    matrix: HermitianObservable,
    #[serde(skip)]
    source: Option<FixedPointSpec>,
}

/// Matrix JSON with an extra `"dim"` key.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChoiJson {
    pub dim: usize,
    #[serde(flatten)]
    pub matrix: ComplexMatrix,
}

impl TryFrom<ChoiJson> for ChoiMatrix {
    type Error = Error;

    fn try_from(j: ChoiJson) -> Result<Self> {
        ChoiMatrix::new(j.dim, j.matrix)
    }
}

impl From<ChoiMatrix> for ChoiJson {
    fn from(z: ChoiMatrix) -> Self {
        ChoiJson {
            dim: z.dim,
            matrix: z.matrix.into_matrix(),
        }
    }
}

impl ChoiMatrix {
    /// Wraps an arbitrary Hermitian `N² × N²` matrix; unitality is not enforced
    /// here so that [`check_unital`] has something to measure.
    pub fn new(dim: usize, matrix: ComplexMatrix) -> Result<Self> {
        if dim == 0 || matrix.rows() != dim * dim || matrix.cols() != dim * dim {
            return Err(Error::Dimension(format!(
                "Choi matrix for N = {dim} must be {0}x{0}, got {1}x{2}",
                dim * dim,
                matrix.rows(),
                matrix.cols()
            )));
        }
        let matrix = HermitianObservable::with_tolerance(matrix, HERM_TOL)?;
        Ok(ChoiMatrix {
            dim,
            matrix,
            source: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.matrix.matrix()
    }

    pub fn as_observable(&self) -> &HermitianObservable {
        &self.matrix
    }

    /// The `(A, v)` pair, when built by [`build_fixed_point_choi`].
    pub fn source(&self) -> Option<&FixedPointSpec> {
        self.source.as_ref()
    }

    pub fn is_completely_positive(&self, tol: f64) -> bool {
        is_psd(&self.matrix, tol)
    }

    /// `tr₂[Z (𝟙 ⊗ Bᵀ)]`, i.e. `Σ_{k,m} Z[(i,k),(j,m)] B[k,m]`.
    pub fn apply_dual(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        let n = self.dim;
        if b.rows() != n || b.cols() != n {
            return Err(Error::Dimension(format!(
                "map on {n}x{n} observables applied to {}x{}",
                b.rows(),
                b.cols()
            )));
        }
        let z = self.matrix();
        Ok(ComplexMatrix::from_fn(n, n, |i, j| {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n {
                for m in 0..n {
                    acc += z[(i * n + k, j * n + m)] * b[(k, m)];
                }
            }
            acc
        }))
    }
}

/// Builds `Z_A` for the given pair. Unital and fixing `A` by construction;
/// positivity is up to the caller (see [`theorem1_bounds`]).
pub fn build_fixed_point_choi(spec: &FixedPointSpec) -> ChoiMatrix {
    let n = spec.dim();
    let e = spec.expectation();
    let t = spec.trace();
    let a = spec.observable().matrix();
    let p = spec.transposed_projector();
    let id = ComplexMatrix::identity(n);

    let a_over_e = a.scale_real(1.0 / e);
    let first = kron(&a_over_e, &p);
    let left = (&id - &a_over_e).scale_real(1.0 / spec.denominator());
    let right = &id.scale_real(1.0 / t) - &p.scale_real(1.0 / e);
    let z = (&first + &kron(&left, &right)).hermitian_part();

    ChoiMatrix {
        dim: n,
        matrix: HermitianObservable::new(z).expect("Hermitian by construction"),
        source: Some(spec.clone()),
    }
}

/// `‖tr₂ Z − 𝟙‖_max`.
pub fn check_unital(z: &ChoiMatrix) -> f64 {
    let n = z.dim();
    partial_trace_second(z.matrix(), n, n)
        .expect("shape checked at construction")
        .max_abs_diff(&ComplexMatrix::identity(n))
}

/// `‖tr₂[Z (𝟙 ⊗ Aᵀ)] − A‖_max`.
pub fn check_fixed_point(z: &ChoiMatrix, a: &HermitianObservable) -> Result<f64> {
    Ok(z.apply_dual(a.matrix())?.max_abs_diff(a.matrix()))
}

/// Outcome of the two operator inequalities that decide positivity of `Z_A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityBounds {
    pub lower_ok: bool,
    pub upper_ok: bool,
    /// Smallest eigenvalue of `((N−1)A − (t−e)𝟙) / s`.
    pub lower_margin: f64,
    /// Smallest eigenvalue of `(e𝟙 − A) / s`.
    pub upper_margin: f64,
}

impl PositivityBounds {
    pub fn holds(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

/// Spectral test for `Z_A ⪰ 0` without forming `Z_A`.
///
/// Splitting the second factor into `P` and `𝟙 − P` block-diagonalises
/// `Z_A` into `L ⊗ P + U ⊗ (𝟙 − P)` with `L = ((N−1)A − (t−e)𝟙)/s`,
/// `U = (e𝟙 − A)/s` and `s = N·e − t`. For `s > 0` the conditions read
/// `A ⪰ 𝟙(t − e)/(N − 1)` and `e𝟙 ⪰ A`; for `s < 0` both flip.
pub fn theorem1_bounds(spec: &FixedPointSpec) -> Result<PositivityBounds> {
    let n = spec.dim();
    if n < 2 {
        return Err(Error::Dimension("positivity bounds need N >= 2".into()));
    }
    let nf = n as f64;
    let e = spec.expectation();
    let t = spec.trace();
    let s = nf * e - t;
    let spectrum = eigenvalues(spec.observable());

    let lower_margin = spectrum
        .iter()
        .map(|&a| ((nf - 1.0) * a - (t - e)) / s)
        .fold(f64::INFINITY, f64::min);
    let upper_margin = spectrum
        .iter()
        .map(|&a| (e - a) / s)
        .fold(f64::INFINITY, f64::min);

    Ok(PositivityBounds {
        lower_ok: lower_margin >= -PSD_TOL,
        upper_ok: upper_margin >= -PSD_TOL,
        lower_margin,
        upper_margin,
    })
}
