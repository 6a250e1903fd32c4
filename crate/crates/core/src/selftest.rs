//! Seeded invariant sweep behind `cpumap selftest`.
//!
//! Every check draws from its own stream (`seed` mixed with the check index)
//! and results are aggregated in index order, so the rendered report depends
//! only on the seed.

use rayon::prelude::*;

use crate::battery::{
    aligned_env, env_kraus, phi, simulate_charging, swap_unitary, BatteryConfig, EnvState,
};
use crate::choi::{
    build_fixed_point_choi, check_fixed_point, check_unital, theorem1_bounds, FixedPointSpec,
};
use crate::cpu_map::{
    apply_dual_choi, apply_dual_kraus, choi_from_kraus, idempotence_residual,
    kraus_from_fixed_point,
};
use crate::io::fmt_f64;
use crate::matcore::{
    eig_hermitian, kron, min_eigenvalue, partial_trace_second, ComplexMatrix,
    HermitianObservable, C64,
};
use crate::metric::{build_profile, offset_factor, MetricParams};
use crate::random::{
    random_density, random_hermitian, random_spectrum, random_unit_vector, random_unitary,
    seeded_rng, SeededRng,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> usize {
        self.checks.iter().filter(|c| c.passed).count()
    }

    pub fn failed(&self) -> usize {
        self.checks.len() - self.passed()
    }

    pub fn all_passed(&self) -> bool {
        self.failed() == 0
    }

    pub fn render(&self) -> String {
        let mut out = format!("selftest seed={}\n", self.seed);
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("{status} {} {}\n", c.name, c.detail));
        }
        out.push_str(&format!(
            "summary passed={} failed={}\n",
            self.passed(),
            self.failed()
        ));
        out
    }
}

/// Kinds of `(A, v)` pairs drawn for the positivity sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceKind {
    /// `A = (G + G†)/2`, `v` complex normal.
    Generic,
    /// `v` is an eigenvector of a generic `A`.
    EigenAligned,
    /// `A = α𝟙 + β|v⟩⟨v|`.
    TwoLevel,
    /// Degenerate spectrum with `v` inside an eigenspace.
    DegenerateAligned,
}

/// Draws one valid spec; retries on the measure-zero invalid draws.
pub fn random_spec(rng: &mut SeededRng, n: usize, kind: InstanceKind) -> FixedPointSpec {
    loop {
        let attempt = match kind {
            InstanceKind::Generic => {
                let a = random_hermitian(rng, n);
                FixedPointSpec::new(a, random_unit_vector(rng, n))
            }
            InstanceKind::EigenAligned => {
                let a = random_hermitian(rng, n);
                let eig = eig_hermitian(&a);
                let pick = rng_index(rng, n);
                FixedPointSpec::new(a, eig.vectors.column(pick))
            }
            InstanceKind::TwoLevel => {
                let v = random_unit_vector(rng, n);
                let alpha = 4.0 * uniform(rng) - 2.0;
                let beta = 6.0 * uniform(rng) - 3.0;
                let a = &ComplexMatrix::identity(n).scale_real(alpha)
                    + &ComplexMatrix::outer(&v, &v).scale_real(beta);
                HermitianObservable::symmetrized(&a).and_then(|a| FixedPointSpec::new(a, v))
            }
            InstanceKind::DegenerateAligned => {
                // Eigenvalues drawn from two values; v is a unit vector in one eigenspace.
                let u = random_unitary(rng, n);
                let low = 4.0 * uniform(rng) - 2.0;
                let high = low + 0.5 + 2.0 * uniform(rng);
                let split = 1 + rng_index(rng, n - 1);
                let values: Vec<f64> = (0..n).map(|k| if k < split { low } else { high }).collect();
                let a = ComplexMatrix::from_fn(n, n, |i, j| {
                    (0..n).map(|k| u[(i, k)] * values[k] * u[(j, k)].conj()).sum()
                });
                let use_low = uniform(rng) < 0.5;
                let range: Vec<usize> = if use_low { (0..split).collect() } else { (split..n).collect() };
                let mut v = vec![C64::new(0.0, 0.0); n];
                for &k in &range {
                    let w = crate::random::complex_normal(rng);
                    for (vi, i) in v.iter_mut().zip(0..n) {
                        *vi += u[(i, k)] * w;
                    }
                }
                let len = crate::matcore::norm(&v);
                let v = v.into_iter().map(|z| z / len).collect();
                HermitianObservable::symmetrized(&a).and_then(|a| FixedPointSpec::new(a, v))
            }
        };
        if let Ok(spec) = attempt {
            return spec;
        }
    }
}

fn uniform(rng: &mut SeededRng) -> f64 {
    use rand::Rng;
    rng.random::<f64>()
}

fn rng_index(rng: &mut SeededRng, n: usize) -> usize {
    use rand::Rng;
    rng.random_range(0..n)
}

fn sub_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9))
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

const KINDS: [InstanceKind; 4] = [
    InstanceKind::Generic,
    InstanceKind::EigenAligned,
    InstanceKind::TwoLevel,
    InstanceKind::DegenerateAligned,
];

fn positivity_equivalence(seed: u64) -> CheckResult {
    let outcomes: Vec<(bool, bool)> = (0..240u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = seeded_rng(sub_seed(seed, 1000 + k));
            let n = [2, 3, 4, 8][(k % 4) as usize];
            let kind = KINDS[((k / 4) % 4) as usize];
            let spec = random_spec(&mut rng, n, kind);
            let bounds = theorem1_bounds(&spec).expect("n >= 2").holds();
            let psd = min_eigenvalue(build_fixed_point_choi(&spec).as_observable()) >= -1e-8;
            (bounds == psd, psd)
        })
        .collect();
    let mismatches = outcomes.iter().filter(|o| !o.0).count();
    let positives = outcomes.iter().filter(|o| o.1).count();
    check(
        "positivity_equivalence",
        mismatches == 0,
        format!("instances={} psd={} counterexamples={}", outcomes.len(), positives, mismatches),
    )
}

fn residuals(seed: u64) -> Vec<CheckResult> {
    let rows: Vec<(f64, f64, f64)> = (0..60u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = seeded_rng(sub_seed(seed, 2000 + k));
            let n = 2 + (k % 5) as usize;
            let spec = random_spec(&mut rng, n, InstanceKind::Generic);
            let z = build_fixed_point_choi(&spec);
            let fixed = check_fixed_point(&z, spec.observable()).expect("dims");
            let b = random_hermitian(&mut rng, n);
            (check_unital(&z), fixed, idempotence_residual(&z, &b).expect("dims"))
        })
        .collect();
    let unital = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let fixed = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let idem = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    vec![
        check("unitality", unital < 1e-9, format!("max={}", fmt_f64(unital))),
        check("fixed_point", fixed < 1e-9, format!("max={}", fmt_f64(fixed))),
        check("idempotence", idem < 1e-9, format!("max={}", fmt_f64(idem))),
    ]
}

fn kraus_round_trip(seed: u64) -> Vec<CheckResult> {
    let rows: Vec<(f64, f64, f64)> = (0..24u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = seeded_rng(sub_seed(seed, 3000 + k));
            let n = 2 + (k % 4) as usize;
            let v = random_unit_vector(&mut rng, n);
            let c = if k % 2 == 0 { 0.5 + uniform(&mut rng) } else { -0.5 - uniform(&mut rng) };
            let a = HermitianObservable::symmetrized(&ComplexMatrix::outer(&v, &v).scale_real(c))
                .expect("Hermitian");
            let spec = FixedPointSpec::new(a, v).expect("rank-one spec is valid");
            let kraus = kraus_from_fixed_point(&spec).expect("rank-one spec has real square roots");
            let z = build_fixed_point_choi(&spec);
            let round = choi_from_kraus(&kraus).matrix().max_abs_diff(z.matrix());
            let b = random_hermitian(&mut rng, n);
            let rep = apply_dual_kraus(&kraus, &b)
                .expect("dims")
                .matrix()
                .max_abs_diff(apply_dual_choi(&z, &b).expect("dims").matrix());
            (round, kraus.unitality_residual(), rep)
        })
        .collect();
    let round = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let unital = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let rep = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    vec![
        check("kraus_round_trip", round < 1e-8, format!("max={}", fmt_f64(round))),
        check("kraus_unitality", unital < 1e-9, format!("max={}", fmt_f64(unital))),
        check("representation_equivalence", rep < 1e-8, format!("max={}", fmt_f64(rep))),
    ]
}

fn random_env(rng: &mut SeededRng, d: usize, ascending: bool) -> EnvState {
    let mut spectrum = random_spectrum(rng, d);
    if ascending {
        spectrum.sort_by(f64::total_cmp);
    }
    EnvState::new(d, spectrum, random_unitary(rng, d)).expect("valid random env")
}

fn battery_checks(seed: u64) -> Vec<CheckResult> {
    let gaps: Vec<f64> = (0..12u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = seeded_rng(sub_seed(seed, 4000 + k));
            let d = [4, 8][(k % 2) as usize];
            let env = random_env(&mut rng, d, false);
            let rho = random_density(&mut rng, d);
            let u = swap_unitary(d);
            let joint = &(&u * &kron(&rho, &env.fock_state())) * &u.adjoint();
            let oracle = partial_trace_second(&joint, d, d).expect("dims");
            env_kraus(&env).apply_primal(&rho).expect("dims").max_abs_diff(&oracle)
        })
        .collect();
    let oracle_gap = gaps.iter().copied().fold(0.0, f64::max);

    let env = EnvState::fock_level(6, 2).expect("valid level");
    let mut rng = seeded_rng(sub_seed(seed, 4100));
    let traces: Vec<Vec<f64>> = (0..4)
        .map(|_| {
            let cfg = BatteryConfig::new(env.clone(), random_density(&mut rng, 6), 1.0)
                .expect("valid config");
            simulate_charging(&cfg, &[0.0, 1.0, 2.0]).expect("valid times").values
        })
        .collect();
    let charging_ok = traces.iter().all(|t| t == &[0.0, 2.0, 4.0]);

    let mut rng = seeded_rng(sub_seed(seed, 4200));
    let mut bounds_ok = true;
    for _ in 0..20 {
        let env = random_env(&mut rng, 6, true);
        let p = phi(&env);
        let cap: f64 = env.spectrum().iter().enumerate().map(|(j, s)| s * j as f64).sum();
        bounds_ok &= p >= -1e-12 && p <= cap + 1e-12;
    }
    let mut spectrum = random_spectrum(&mut rng, 6);
    spectrum.sort_by(f64::total_cmp);
    let path: Vec<f64> = (0..50)
        .map(|k| phi(&aligned_env(spectrum.clone(), k as f64 / 49.0).expect("valid path")))
        .collect();
    let monotone = path.windows(2).all(|w| w[1] >= w[0] - 1e-12);

    vec![
        check("battery_replacement_oracle", oracle_gap < 1e-9, format!("max={}", fmt_f64(oracle_gap))),
        check("charging_law", charging_ok, format!("states={}", traces.len())),
        check("phi_bounds", bounds_ok, "envs=20".into()),
        check("alignment_monotone", monotone, format!("points={}", path.len())),
    ]
}

fn metric_checks() -> Vec<CheckResult> {
    let grid: Vec<f64> = (0..50).map(|k| 10.0 * k as f64 / 49.0).collect();
    let params = MetricParams::new(1.0, 0.1, 16, grid).expect("valid params");
    let profile = build_profile(&params).expect("valid profile");
    let finite = profile
        .records
        .iter()
        .all(|r| r.target_factor.is_finite() && r.phi_achieved.is_finite());
    let mut worst = 0.0f64;
    for rec in profile.records.iter().filter(|r| !r.clipped) {
        let cfg = BatteryConfig::new(rec.env.clone(), ComplexMatrix::from_real_diag(&unit(16)), 1.0)
            .expect("valid config");
        let slope = simulate_charging(&cfg, &[0.0, 1.0]).expect("valid times").phi_fit;
        worst = worst.max((slope - rec.target_factor).abs());
    }
    let horizon = offset_factor(2.0, &params).expect("r >= 0");
    vec![
        check("profile_finite", finite, format!("records={}", profile.records.len())),
        check("profile_consistency", worst < 1e-9, format!("max={}", fmt_f64(worst))),
        check("horizon_value", horizon.is_finite(), format!("value={}", fmt_f64(horizon))),
    ]
}

fn unit(d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[0] = 1.0;
    v
}

pub fn run(seed: u64) -> SelftestReport {
    let mut checks = vec![positivity_equivalence(seed)];
    checks.extend(residuals(seed));
    checks.extend(kraus_round_trip(seed));
    checks.extend(battery_checks(seed));
    checks.extend(metric_checks());
    SelftestReport { seed, checks }
}
