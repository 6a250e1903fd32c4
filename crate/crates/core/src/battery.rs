//! Battery charging on a truncated Fock space.
//!
//! Battery and environment are oscillators truncated to `d` levels and
//! coupled by the number-conserving swap `U = Σ_{n,r} |n,r⟩⟨r,n|`. Tracing
//! the environment out after one collision gives the replacement channel
//! `ρ ↦ σ`, whose dual sends the number operator to `φ𝟙` with
//! `φ = Σ_{j,n} σ_j n |⟨j|n⟩|²`.

use serde::{Deserialize, Serialize};

use crate::choi::{build_fixed_point_choi, FixedPointSpec};
use crate::cpu_map::{
    choi_from_kraus, density_matrix, validate_times, EvolutionTrace, KrausSet, KrausTag,
    TaggedKraus,
};
use crate::error::{Error, Result};
use crate::matcore::{ComplexMatrix, HermitianObservable, C64, ONE};

pub const DEFAULT_TRUNCATION: usize = 16;
const SPECTRUM_SUM_TOL: f64 = 1e-12;
const SPECTRUM_NEG_TOL: f64 = 1e-15;
const UNITARY_TOL: f64 = 1e-9;

/// Environment state `σ = Σ_j σ_j |j⟩⟨j|`; column `j` of `basis` is `|j⟩`
/// in the Fock basis, so `⟨j|n⟩ = conj(V[n][j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnvJson", into = "EnvJson")]
pub struct EnvState {
    d: usize,
    spectrum: Vec<f64>,
    basis: ComplexMatrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvJson {
    pub d: usize,
    pub spectrum: Vec<f64>,
    #[serde(rename = "V")]
    pub basis: ComplexMatrix,
}

impl TryFrom<EnvJson> for EnvState {
    type Error = Error;
    fn try_from(j: EnvJson) -> Result<Self> {
        EnvState::new(j.d, j.spectrum, j.basis)
    }
}

impl From<EnvState> for EnvJson {
    fn from(e: EnvState) -> Self {
        EnvJson {
            d: e.d,
            spectrum: e.spectrum,
            basis: e.basis,
        }
    }
}

impl EnvState {
    pub fn new(d: usize, spectrum: Vec<f64>, basis: ComplexMatrix) -> Result<Self> {
        if d < 2 {
            return Err(Error::Dimension(format!("truncation d = {d} < 2")));
        }
        if spectrum.len() != d || basis.rows() != d || basis.cols() != d {
            return Err(Error::Dimension(format!(
                "d = {d} with {} weights and a {}x{} basis",
                spectrum.len(),
                basis.rows(),
                basis.cols()
            )));
        }
        if spectrum.iter().any(|s| !s.is_finite() || *s < -SPECTRUM_NEG_TOL) {
            return Err(Error::InvalidEnvState("negative or non-finite weight".into()));
        }
        let total: f64 = spectrum.iter().sum();
        if (total - 1.0).abs() > SPECTRUM_SUM_TOL {
            return Err(Error::InvalidEnvState(format!("weights sum to {total}")));
        }
        let gram = &basis.adjoint() * &basis;
        let defect = gram.max_abs_diff(&ComplexMatrix::identity(d));
        if defect > UNITARY_TOL {
            return Err(Error::InvalidEnvState(format!(
                "basis is not unitary (defect {defect:e})"
            )));
        }
        Ok(EnvState { d, spectrum, basis })
    }

    /// Eigenbasis aligned with the Fock basis (`V = 𝟙`).
    pub fn fock_diagonal(spectrum: Vec<f64>) -> Result<Self> {
        let d = spectrum.len();
        EnvState::new(d, spectrum, ComplexMatrix::identity(d))
    }

    /// Pure Fock state `|level⟩⟨level|`.
    pub fn fock_level(d: usize, level: usize) -> Result<Self> {
        if level >= d {
            return Err(Error::Dimension(format!("level {level} outside d = {d}")));
        }
        let mut s = vec![0.0; d];
        s[level] = 1.0;
        EnvState::fock_diagonal(s)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn basis(&self) -> &ComplexMatrix {
        &self.basis
    }

    /// `⟨j|n⟩`.
    pub fn overlap(&self, j: usize, n: usize) -> C64 {
        self.basis[(n, j)].conj()
    }

    /// `σ` in the Fock basis, `V diag(σ) V†`.
    pub fn fock_state(&self) -> ComplexMatrix {
        let d = self.d;
        ComplexMatrix::from_fn(d, d, |n, m| {
            (0..d)
                .map(|j| self.basis[(n, j)] * self.spectrum[j] * self.basis[(m, j)].conj())
                .sum()
        })
    }

    /// Largest `φ` reachable with this spectrum over all eigenbases: weights
    /// sorted ascending paired with levels `0..d`. Equals `Σ_j σ_j j` when the
    /// spectrum is already ascending.
    pub fn phi_max(&self) -> f64 {
        let mut s = self.spectrum.clone();
        s.sort_by(f64::total_cmp);
        s.iter().enumerate().map(|(k, w)| w * k as f64).sum()
    }
}

pub fn number_operator(d: usize) -> Result<HermitianObservable> {
    if d < 2 {
        return Err(Error::Dimension(format!("number operator needs d >= 2, got {d}")));
    }
    let levels: Vec<f64> = (0..d).map(|n| n as f64).collect();
    Ok(HermitianObservable::from_real_diag(&levels))
}

/// `U = Σ_{n,r} |n,r⟩⟨r,n|` on `d² ` dimensions (battery ⊗ environment).
pub fn swap_unitary(d: usize) -> ComplexMatrix {
    let mut u = ComplexMatrix::zeros(d * d, d * d);
    for n in 0..d {
        for r in 0..d {
            u[(n * d + r, r * d + n)] = ONE;
        }
    }
    u
}

/// Kraus operators `E_{i,j}` with `E_{i,j}† = √σ_j Σ_{n,r} ⟨j|n⟩⟨r|i⟩ |r⟩⟨n|`,
/// `i` running over the Fock basis of the traced environment.
pub fn env_kraus(env: &EnvState) -> KrausSet {
    let d = env.dim();
    let mut ops = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let amp = env.spectrum[j].max(0.0).sqrt();
            let mut e_dag = ComplexMatrix::zeros(d, d);
            for n in 0..d {
                for r in 0..d {
                    let fock_ri = if r == i { 1.0 } else { 0.0 };
                    e_dag[(r, n)] = env.overlap(j, n) * (amp * fock_ri);
                }
            }
            ops.push(TaggedKraus {
                tag: KrausTag::E { i, j },
                op: e_dag.adjoint(),
            });
        }
    }
    KrausSet::new(d, ops).expect("replacement channel is unital")
}

/// Label under which `E_{i,j}` is identified with the fixed-point family:
/// `E_{0,j} ↔ B_j`, `E_{i,j} ↔ C_{i,j}` for `i > 0`.
pub fn fixed_point_family_tag(i: usize, j: usize) -> KrausTag {
    if i == 0 {
        KrausTag::B { i: j }
    } else {
        KrausTag::C { i, j }
    }
}

/// `‖Z_env − Z_A‖_max` between the battery channel and a member of the
/// fixed-point family; reported, not asserted, since the battery channel only
/// fixes multiples of `𝟙`.
pub fn fixed_point_family_residual(env: &EnvState, spec: &FixedPointSpec) -> Result<f64> {
    if spec.dim() != env.dim() {
        return Err(Error::Dimension(format!(
            "spec on N = {} against d = {}",
            spec.dim(),
            env.dim()
        )));
    }
    let z_env = choi_from_kraus(&env_kraus(env));
    Ok(z_env.matrix().max_abs_diff(build_fixed_point_choi(spec).matrix()))
}

/// `φ = Σ_{j,n} σ_j · n · |⟨j|n⟩|²`.
pub fn phi(env: &EnvState) -> f64 {
    let d = env.dim();
    let mut acc = 0.0;
    for j in 0..d {
        for n in 0..d {
            acc += env.spectrum[j] * n as f64 * env.overlap(j, n).norm_sqr();
        }
    }
    acc
}

/// `Σ_{i,j} E_{i,j}† (a†a) E_{i,j}`, computed by explicit Kraus summation.
pub fn dual_apply_number(env: &EnvState) -> HermitianObservable {
    let num = number_operator(env.dim()).expect("d >= 2 by invariant");
    let out = env_kraus(env)
        .apply_dual(num.matrix())
        .expect("dimensions match");
    HermitianObservable::symmetrized(&out).expect("Hermitian by construction")
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryConfig {
    env: EnvState,
    rho0: ComplexMatrix,
    rate: f64,
}

impl BatteryConfig {
    pub fn new(env: EnvState, rho0: ComplexMatrix, rate: f64) -> Result<Self> {
        if rho0.rows() != env.dim() || rho0.cols() != env.dim() {
            return Err(Error::Dimension(format!(
                "initial state is {}x{} for d = {}",
                rho0.rows(),
                rho0.cols(),
                env.dim()
            )));
        }
        density_matrix(&rho0)?;
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::Domain(format!("rate must be positive, got {rate}")));
        }
        Ok(BatteryConfig { env, rho0, rate })
    }

    pub fn dim(&self) -> usize {
        self.env.dim()
    }

    pub fn env(&self) -> &EnvState {
        &self.env
    }

    pub fn rho0(&self) -> &ComplexMatrix {
        &self.rho0
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

/// `⟨a†a(t)⟩ = rate · φ · t`.
///
/// The slope comes from `φ(σ)` alone: `Φ†[a†a] = φ𝟙`, so the initial state
/// drops out. The repeated-application check `Φ†ᵏ[a†a] = φ𝟙` is recorded in
/// `euler_deviation`.
pub fn simulate_charging(cfg: &BatteryConfig, times: &[f64]) -> Result<EvolutionTrace> {
    density_matrix(&cfg.rho0)?;
    validate_times(times)?;
    let slope = cfg.rate * phi(&cfg.env);
    let values = times.iter().map(|&t| slope * t).collect();

    let kraus = env_kraus(&cfg.env);
    let num = number_operator(cfg.dim())?;
    let target = ComplexMatrix::identity(cfg.dim()).scale_real(phi(&cfg.env));
    let mut generator = kraus.apply_dual(num.matrix())?;
    let scale = target.max_abs().max(1.0);
    let mut worst = generator.max_abs_diff(&target) / scale;
    for _ in 1..times.len().min(4) {
        generator = kraus.apply_dual(&generator)?;
        worst = worst.max(generator.max_abs_diff(&target) / scale);
    }

    Ok(EvolutionTrace {
        times: times.to_vec(),
        values,
        phi_fit: slope,
        rho: cfg.rho0.clone(),
        euler_deviation: worst,
    })
}

/// One-parameter family of eigenbases from anti-aligned (`θ = 0`, the
/// reversal `|j⟩ ↦ |d−1−j⟩`) to aligned (`θ = 1`, `V = 𝟙`).
///
/// Each reversal pair `(j, d−1−j)` is rotated by the same Givens angle; for an
/// ascending spectrum `φ` is nondecreasing in `θ`.
pub fn alignment_basis(d: usize, theta: f64) -> ComplexMatrix {
    let angle = std::f64::consts::FRAC_PI_2 * theta.clamp(0.0, 1.0);
    let (s, c) = angle.sin_cos();
    let mut v = ComplexMatrix::zeros(d, d);
    for j in 0..d / 2 {
        let k = d - 1 - j;
        // column j: s|j⟩ + c|k⟩, column k: −c|j⟩ + s|k⟩
        v[(j, j)] = C64::new(s, 0.0);
        v[(k, j)] = C64::new(c, 0.0);
        v[(j, k)] = C64::new(-c, 0.0);
        v[(k, k)] = C64::new(s, 0.0);
    }
    if d % 2 == 1 {
        v[(d / 2, d / 2)] = ONE;
    }
    v
}

pub fn aligned_env(spectrum: Vec<f64>, theta: f64) -> Result<EnvState> {
    let d = spectrum.len();
    EnvState::new(d, spectrum, alignment_basis(d, theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{kron, partial_trace_second};
    use crate::random::{random_density, random_spectrum, random_unitary, seeded_rng, SeededRng};

    fn random_env(rng: &mut SeededRng, d: usize) -> EnvState {
        EnvState::new(d, random_spectrum(rng, d), random_unitary(rng, d)).unwrap()
    }

    #[test]
    fn number_operator_examples() {
        assert_eq!(number_operator(2).unwrap(), HermitianObservable::from_real_diag(&[0.0, 1.0]));
        let n4 = number_operator(4).unwrap();
        assert_eq!(n4, HermitianObservable::from_real_diag(&[0.0, 1.0, 2.0, 3.0]));
        for n in 0..4 {
            assert_eq!(n4.matrix()[(n, n)].re, n as f64);
        }
        assert!(matches!(number_operator(1), Err(Error::Dimension(_))));
    }

    #[test]
    fn swap_examples() {
        let u = swap_unitary(2);
        #[rustfmt::skip]
        let expect = ComplexMatrix::from_real(4, 4, &[
            1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        ]).unwrap();
        assert_eq!(u, expect);

        let u3 = swap_unitary(3);
        assert_eq!(&u3 * &u3, ComplexMatrix::identity(9));
        assert_eq!(u3.adjoint(), u3);

        let mut rng = seeded_rng(1);
        let x = crate::random::random_unit_vector(&mut rng, 3);
        let y = crate::random::random_unit_vector(&mut rng, 3);
        let xy: Vec<C64> = x.iter().flat_map(|a| y.iter().map(move |b| a * b)).collect();
        let yx: Vec<C64> = y.iter().flat_map(|a| x.iter().map(move |b| a * b)).collect();
        let out = u3.matvec(&xy).unwrap();
        assert!(out.iter().zip(&yx).all(|(a, b)| (a - b).norm() < 1e-15));

        let rho = random_density(&mut rng, 3);
        let sigma = random_density(&mut rng, 3);
        let swapped = &(&u3 * &kron(&rho, &sigma)) * &u3.adjoint();
        assert!(swapped.max_abs_diff(&kron(&sigma, &rho)) < 1e-15);
    }

    #[test]
    fn pure_vacuum_replacement() {
        let env = EnvState::fock_level(4, 0).unwrap();
        let k = env_kraus(&env);
        let mut rng = seeded_rng(2);
        let rho = random_density(&mut rng, 4);
        let out = k.apply_primal(&rho).unwrap();
        let vac = ComplexMatrix::from_real_diag(&[1.0, 0.0, 0.0, 0.0]);
        assert!(out.max_abs_diff(&vac) < 1e-12);
    }

    #[test]
    fn aligned_kraus_structure() {
        let env = EnvState::fock_diagonal(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let k = env_kraus(&env);
        for i in 0..4 {
            for j in 0..4 {
                let mut expect = ComplexMatrix::zeros(4, 4);
                expect[(j, i)] = C64::new(env.spectrum()[j].sqrt(), 0.0);
                assert!(k.get(KrausTag::E { i, j }).unwrap().max_abs_diff(&expect) < 1e-15);
            }
        }
    }

    #[test]
    fn random_env_matches_swap_oracle() {
        let mut rng = seeded_rng(3);
        let env = random_env(&mut rng, 4);
        let k = env_kraus(&env);
        assert!(k.unitality_residual() < 1e-9);
        let u = swap_unitary(4);
        let sigma = env.fock_state();
        for _ in 0..3 {
            let rho = random_density(&mut rng, 4);
            let joint = &(&u * &kron(&rho, &sigma)) * &u.adjoint();
            let oracle = partial_trace_second(&joint, 4, 4).unwrap();
            assert!(k.apply_primal(&rho).unwrap().max_abs_diff(&oracle) < 1e-10);
            assert!(oracle.max_abs_diff(&sigma) < 1e-12);
        }
    }

    #[test]
    fn phi_examples() {
        let env = EnvState::fock_diagonal(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let expect: f64 = [0.1, 0.2, 0.3, 0.4].iter().enumerate().map(|(j, s)| j as f64 * s).sum();
        assert!((phi(&env) - expect).abs() < 1e-15);
        assert!((env.phi_max() - expect).abs() < 1e-15);

        // Pure σ on |2⟩ whose eigenvector is the Fock vacuum: all overlap on n = 0.
        let mut perm = ComplexMatrix::zeros(4, 4);
        for (j, n) in [(0, 1), (1, 2), (2, 0), (3, 3)] {
            perm[(n, j)] = ONE;
        }
        let env = EnvState::new(4, vec![0.0, 0.0, 1.0, 0.0], perm).unwrap();
        assert_eq!(phi(&env), 0.0);
    }

    #[test]
    fn phi_matches_trace_oracle() {
        let mut rng = seeded_rng(4);
        let env = random_env(&mut rng, 8);
        let sigma = env.fock_state();
        let mut oracle = 0.0;
        for n in 0..8 {
            for m in 0..8 {
                let num = if n == m { n as f64 } else { 0.0 };
                oracle += (sigma[(n, m)] * num).re;
            }
        }
        assert!((phi(&env) - oracle).abs() < 1e-12);
        assert!(phi(&env) >= 0.0 && phi(&env) <= 7.0);
    }

    #[test]
    fn dual_number_examples() {
        let env = EnvState::fock_level(5, 1).unwrap();
        let out = dual_apply_number(&env);
        assert!(out.matrix().max_abs_diff(&ComplexMatrix::identity(5)) < 1e-12);

        let mut rng = seeded_rng(5);
        let env = random_env(&mut rng, 6);
        let out = dual_apply_number(&env);
        let m = out.matrix();
        let mut off = 0.0f64;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..6 {
            for j in 0..6 {
                if i == j {
                    lo = lo.min(m[(i, i)].re);
                    hi = hi.max(m[(i, i)].re);
                } else {
                    off = off.max(m[(i, j)].norm());
                }
            }
        }
        assert!(off < 1e-10);
        assert!(hi - lo < 1e-10);
        assert!((out.trace() / 6.0 - phi(&env)).abs() < 1e-12);
    }

    #[test]
    fn charging_examples() {
        let env = EnvState::fock_level(5, 2).unwrap();
        let mut rng = seeded_rng(6);
        let cfg = BatteryConfig::new(env.clone(), random_density(&mut rng, 5), 1.0).unwrap();
        let tr = simulate_charging(&cfg, &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(tr.values, vec![0.0, 2.0, 4.0]);
        assert!(tr.euler_deviation < 1e-12);

        let other = BatteryConfig::new(env, random_density(&mut rng, 5), 1.0).unwrap();
        assert_eq!(simulate_charging(&other, &[0.0, 1.0, 2.0]).unwrap().values, tr.values);
    }

    #[test]
    fn config_validation() {
        let env = EnvState::fock_level(3, 1).unwrap();
        assert!(matches!(
            BatteryConfig::new(env.clone(), ComplexMatrix::from_real_diag(&[1.0, 1.0, 0.0]), 1.0),
            Err(Error::InvalidDensityMatrix(_))
        ));
        assert!(BatteryConfig::new(env.clone(), ComplexMatrix::from_real_diag(&[1.0, 0.0, 0.0]), 0.0).is_err());
        assert!(matches!(
            BatteryConfig::new(env, ComplexMatrix::identity(2).scale_real(0.5), 1.0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn env_validation() {
        assert!(EnvState::fock_diagonal(vec![0.5, 0.6]).is_err());
        assert!(EnvState::fock_diagonal(vec![1.5, -0.5]).is_err());
        let not_unitary = ComplexMatrix::from_real(2, 2, &[1.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            EnvState::new(2, vec![0.5, 0.5], not_unitary),
            Err(Error::InvalidEnvState(_))
        ));
    }

    #[test]
    fn alignment_path_endpoints_and_monotonicity() {
        let spectrum = vec![0.05, 0.1, 0.15, 0.3, 0.4];
        let start = aligned_env(spectrum.clone(), 0.0).unwrap();
        let end = aligned_env(spectrum.clone(), 1.0).unwrap();
        let anti: f64 = spectrum.iter().enumerate().map(|(j, s)| s * (4 - j) as f64).sum();
        assert!((phi(&start) - anti).abs() < 1e-12);
        assert!((phi(&end) - end.phi_max()).abs() < 1e-12);
        let mut prev = phi(&start);
        for k in 1..=20 {
            let p = phi(&aligned_env(spectrum.clone(), k as f64 / 20.0).unwrap());
            assert!(p >= prev - 1e-12);
            prev = p;
        }
        // pure top level: anti-aligned start has φ = 0
        let pure = aligned_env(vec![0.0, 0.0, 0.0, 1.0], 0.0).unwrap();
        assert!(phi(&pure).abs() < 1e-15);
    }

    #[test]
    fn env_json_layout() {
        let env = EnvState::fock_level(2, 1).unwrap();
        let j = serde_json::to_value(&env).unwrap();
        assert_eq!(j["d"], 2);
        assert_eq!(j["V"]["rows"], 2);
        let back: EnvState = serde_json::from_value(j).unwrap();
        assert_eq!(back, env);
    }

    #[test]
    fn family_tags() {
        assert_eq!(fixed_point_family_tag(0, 3), KrausTag::B { i: 3 });
        assert_eq!(fixed_point_family_tag(2, 1), KrausTag::C { i: 2, j: 1 });
    }
}
