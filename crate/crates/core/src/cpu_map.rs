//! Heisenberg-picture action of unital maps in Choi and Kraus form, the
//! Kraus family of the fixed-point construction, and linear-growth
//! evolution of observables.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::choi::{ChoiMatrix, FixedPointSpec};
use crate::error::{Error, Result};
use crate::matcore::{
    eig_hermitian, inner, is_psd, norm, ComplexMatrix, HermitianObservable, C64, ZERO,
};

/// Kraus unitality residual accepted by [`KrausSet::new`].
pub const UNITALITY_TOL: f64 = 1e-9;
/// Square-root arguments down to this value are clamped to zero.
pub const SQRT_TOL: f64 = 1e-12;
/// Unit-trace / positivity tolerance for density matrices.
pub const DENSITY_TOL: f64 = 1e-9;
/// Relative agreement required between the Euler accumulator and the closed form.
pub const EULER_TOL: f64 = 1e-9;
const BASIS_DROP_TOL: f64 = 1e-8;

/// Role of a Kraus operator in the family it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum KrausTag {
    B { i: usize },
    C { i: usize, j: usize },
    E { i: usize, j: usize },
}

impl fmt::Display for KrausTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KrausTag::B { i } => write!(f, "B({i})"),
            KrausTag::C { i, j } => write!(f, "C({i},{j})"),
            KrausTag::E { i, j } => write!(f, "E({i},{j})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedKraus {
    pub tag: KrausTag,
    pub op: ComplexMatrix,
}

/// Operators `K` with `Φ†[X] = Σ K† X K` and `Σ K† K = 𝟙`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KrausJson", into = "KrausJson")]
pub struct KrausSet {
    dim: usize,
    ops: Vec<TaggedKraus>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KrausJson {
    pub dim: usize,
    pub ops: Vec<TaggedKraus>,
}

impl TryFrom<KrausJson> for KrausSet {
    type Error = Error;
    fn try_from(j: KrausJson) -> Result<Self> {
        KrausSet::new(j.dim, j.ops)
    }
}

impl From<KrausSet> for KrausJson {
    fn from(k: KrausSet) -> Self {
        KrausJson {
            dim: k.dim,
            ops: k.ops,
        }
    }
}

impl KrausSet {
    pub fn new(dim: usize, ops: Vec<TaggedKraus>) -> Result<Self> {
        if dim == 0 || ops.is_empty() {
            return Err(Error::Dimension("empty Kraus set".into()));
        }
        if let Some(bad) = ops.iter().find(|k| k.op.rows() != dim || k.op.cols() != dim) {
            return Err(Error::Dimension(format!(
                "Kraus operator {} is {}x{}, expected {dim}x{dim}",
                bad.tag,
                bad.op.rows(),
                bad.op.cols()
            )));
        }
        let set = KrausSet { dim, ops };
        let residual = set.unitality_residual();
        if residual > UNITALITY_TOL {
            return Err(Error::Dimension(format!(
                "Kraus set is not unital (residual {residual:e})"
            )));
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ops(&self) -> &[TaggedKraus] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn get(&self, tag: KrausTag) -> Option<&ComplexMatrix> {
        self.ops.iter().find(|k| k.tag == tag).map(|k| &k.op)
    }

    /// `‖Σ K†K − 𝟙‖_max`.
    pub fn unitality_residual(&self) -> f64 {
        let mut acc = ComplexMatrix::zeros(self.dim, self.dim);
        for k in &self.ops {
            acc = &acc + &(&k.op.adjoint() * &k.op);
        }
        acc.max_abs_diff(&ComplexMatrix::identity(self.dim))
    }

    /// `Σ K† X K` on an arbitrary square matrix.
    pub fn apply_dual(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_dim(x)?;
        let mut acc = ComplexMatrix::zeros(self.dim, self.dim);
        for k in &self.ops {
            acc = &acc + &(&(&k.op.adjoint() * x) * &k.op);
        }
        Ok(acc)
    }

    /// Schrödinger-picture partner `ρ ↦ Σ K ρ K†`.
    pub fn apply_primal(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_dim(rho)?;
        let mut acc = ComplexMatrix::zeros(self.dim, self.dim);
        for k in &self.ops {
            acc = &acc + &(&(&k.op * rho) * &k.op.adjoint());
        }
        Ok(acc)
    }

    fn check_dim(&self, x: &ComplexMatrix) -> Result<()> {
        if x.rows() != self.dim || x.cols() != self.dim {
            return Err(Error::Dimension(format!(
                "Kraus set on {0}x{0} applied to {1}x{2}",
                self.dim,
                x.rows(),
                x.cols()
            )));
        }
        Ok(())
    }
}

pub fn apply_dual_choi(z: &ChoiMatrix, b: &HermitianObservable) -> Result<HermitianObservable> {
    HermitianObservable::symmetrized(&z.apply_dual(b.matrix())?)
}

pub fn apply_dual_kraus(k: &KrausSet, b: &HermitianObservable) -> Result<HermitianObservable> {
    HermitianObservable::symmetrized(&k.apply_dual(b.matrix())?)
}

/// `‖Φ†[Φ†[B]] − Φ†[B]‖_max`.
pub fn idempotence_residual(z: &ChoiMatrix, b: &HermitianObservable) -> Result<f64> {
    let once = z.apply_dual(b.matrix())?;
    let twice = z.apply_dual(&once)?;
    Ok(twice.max_abs_diff(&once))
}

/// Choi matrix `Σ_{k,l} Φ†[|k⟩⟨l|] ⊗ |k⟩⟨l|` of the dual map, entry by entry
/// `Z[(i,k),(j,l)] = Σ_K conj(K[k,i]) K[l,j]`.
pub fn choi_from_kraus(k: &KrausSet) -> ChoiMatrix {
    let n = k.dim();
    let mut z = ComplexMatrix::zeros(n * n, n * n);
    for op in k.ops() {
        let m = &op.op;
        for i in 0..n {
            for kk in 0..n {
                let left = m[(kk, i)].conj();
                if left == ZERO {
                    continue;
                }
                for j in 0..n {
                    for l in 0..n {
                        z[(i * n + kk, j * n + l)] += left * m[(l, j)];
                    }
                }
            }
        }
    }
    ChoiMatrix::new(n, z.hermitian_part()).expect("Hermitian by construction")
}

/// Orthonormal basis whose first element is `seed`, completed with the
/// canonical vectors in index order (near-dependent candidates dropped).
pub fn complete_basis(seed: &[C64]) -> Vec<Vec<C64>> {
    let n = seed.len();
    let len = norm(seed);
    let mut basis: Vec<Vec<C64>> = vec![seed.iter().map(|z| z / len).collect()];
    for e in 0..n {
        if basis.len() == n {
            break;
        }
        let mut x = vec![ZERO; n];
        x[e] = C64::new(1.0, 0.0);
        for q in &basis {
            let p = inner(q, &x);
            for (xi, qi) in x.iter_mut().zip(q) {
                *xi -= p * qi;
            }
        }
        let len = norm(&x);
        if len >= BASIS_DROP_TOL {
            basis.push(x.into_iter().map(|z| z / len).collect());
        }
    }
    basis
}

fn checked_sqrt(value: f64, tag: KrausTag) -> Result<f64> {
    if value < -SQRT_TOL {
        return Err(Error::NegativeSqrtArgument {
            tag: tag.to_string(),
            value,
        });
    }
    Ok(value.max(0.0).sqrt())
}

/// Kraus operators of the fixed-point map:
///
/// ```text
/// B_i† = √(a_i/e) |a_i⟩⟨v|
/// C_ij† = √( (1 − a_i/e)/(N/t − 1/e) · (1/t − δ_{j0}/e) ) |a_i⟩⟨w_j|
/// ```
///
/// where `A = Σ a_i |a_i⟩⟨a_i|` and `{w_j}` is an orthonormal basis with
/// `w_0 = v`. The basis is completed in the transposed picture starting from
/// `v̄`, then conjugated back, so that `|w_0⟩⟨w_0|ᵀ = |v̄⟩⟨v̄|ᵀ`.
/// The C-coefficient is a product of two factors that may both be negative;
/// only the product is required to be nonnegative.
pub fn kraus_from_fixed_point(spec: &FixedPointSpec) -> Result<KrausSet> {
    let n = spec.dim();
    let e = spec.expectation();
    let t = spec.trace();
    let den = spec.denominator();
    let v = spec.vector();

    let eig = eig_hermitian(spec.observable());
    let vbar: Vec<C64> = v.iter().map(|z| z.conj()).collect();
    let bras: Vec<Vec<C64>> = complete_basis(&vbar)
        .into_iter()
        .map(|w| w.into_iter().map(|z| z.conj()).collect())
        .collect();

    let mut ops = Vec::with_capacity(n + n * n);
    for (i, &a_i) in eig.values.iter().enumerate() {
        let ket = eig.vectors.column(i);
        let tag = KrausTag::B { i };
        let coef = checked_sqrt(a_i / e, tag)?;
        // B_i = (B_i†)† = coef |v⟩⟨a_i|
        ops.push(TaggedKraus {
            tag,
            op: ComplexMatrix::outer(v, &ket).scale_real(coef),
        });
    }
    for (i, &a_i) in eig.values.iter().enumerate() {
        let ket = eig.vectors.column(i);
        let left = (1.0 - a_i / e) / den;
        for (j, w) in bras.iter().enumerate() {
            let right = 1.0 / t - if j == 0 { 1.0 / e } else { 0.0 };
            let tag = KrausTag::C { i, j };
            let coef = checked_sqrt(left * right, tag)?;
            ops.push(TaggedKraus {
                tag,
                op: ComplexMatrix::outer(w, &ket).scale_real(coef),
            });
        }
    }
    KrausSet::new(n, ops)
}

/// Validates a density matrix: Hermitian, unit trace and PSD within [`DENSITY_TOL`].
pub fn density_matrix(m: &ComplexMatrix) -> Result<HermitianObservable> {
    let h = HermitianObservable::new(m.clone())
        .map_err(|e| Error::InvalidDensityMatrix(e.to_string()))?;
    let tr = m.trace();
    if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
        return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
    }
    if !is_psd(&h, DENSITY_TOL) {
        return Err(Error::InvalidDensityMatrix("negative eigenvalue".into()));
    }
    Ok(h)
}

pub fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidTimes("empty time grid".into()));
    }
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidTimes("times must be finite and nonnegative".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidTimes("times must be ascending".into()));
    }
    Ok(())
}

/// Expectation values `⟨A(t)⟩` along a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Slope of the linear law, `rate · tr[ρ Φ†[A₀]]`.
    pub phi_fit: f64,
    pub rho: ComplexMatrix,
    /// Largest relative gap between the Euler accumulator and the closed form.
    pub euler_deviation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceJson {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub phi: f64,
}

impl EvolutionTrace {
    pub fn to_json_value(&self) -> TraceJson {
        TraceJson {
            times: self.times.clone(),
            values: self.values.clone(),
            phi: self.phi_fit,
        }
    }

    /// `t,expectation` rows, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,expectation\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            out.push_str(&format!("{},{}\n", crate::io::fmt_f64(*t), crate::io::fmt_f64(*v)));
        }
        out
    }
}

/// Integrates `dA/dt = Φ†[A₀]` with `A(0) = 0`: `A(t) = rate · t · Φ†[A₀]`.
///
/// The closed form is cross-checked by an Euler accumulator whose increment is
/// re-applied through the map at every step; for maps with `Φ†∘Φ† = Φ†` the
/// two agree on every grid point, otherwise [`Error::NotIdempotent`] is returned.
pub fn evolve_linear(
    z: &ChoiMatrix,
    a0: &HermitianObservable,
    rho: &ComplexMatrix,
    times: &[f64],
    rate: f64,
) -> Result<EvolutionTrace> {
    let rho_h = density_matrix(rho)?;
    validate_times(times)?;
    if !rate.is_finite() {
        return Err(Error::Domain(format!("rate {rate}")));
    }
    let generator = z.apply_dual(a0.matrix())?;
    let slope = rate * (rho_h.matrix() * &generator).trace().re;
    let values: Vec<f64> = times.iter().map(|&t| slope * t).collect();

    let scale = generator.max_abs();
    let mut increment = generator.clone();
    let mut acc = generator.scale_real(rate * times[0]);
    let mut worst = 0.0f64;
    for w in times.windows(2) {
        increment = z.apply_dual(&increment)?;
        acc = &acc + &increment.scale_real(rate * (w[1] - w[0]));
        let closed = generator.scale_real(rate * w[1]);
        let gap = acc.max_abs_diff(&closed) / (rate.abs() * w[1] * scale).max(1.0);
        worst = worst.max(gap);
    }
    if worst > EULER_TOL {
        return Err(Error::NotIdempotent(worst));
    }

    Ok(EvolutionTrace {
        times: times.to_vec(),
        values,
        phi_fit: slope,
        rho: rho.clone(),
        euler_deviation: worst,
    })
}
