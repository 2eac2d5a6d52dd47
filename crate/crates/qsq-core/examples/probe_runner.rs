use qsq_core::runner::*;
use qsq_core::qsq_oracle::{Backend, NoiseModel, QsqOracle};
use qsq_core::period_finder::{uniform_thresholds, SamplingMode};

fn main() {
    let config = ExperimentConfig {
        d: 1,
        cap_d: 1,
        r_w: 0.008,
        instance: InstanceSpec::Seeded { instance_seed: 5 },
        dist: DistributionFamily::Uniform,
        mode: ParameterMode::Theorem,
        noise: NoiseKind::Zero,
        eps: 0.16,
        delta: 0.1,
        eta: 0.5,
        trials: 1,
        seed: 3,
        backend: Backend::Analytic,
        sampling: SamplingMode::PairQuery,
        amplification_constant: 2.0,
        max_attempts: Some(5),
        unsafe_params: false,
    };
    let plan = plan_experiment(&config).unwrap();
    let noise = NoiseModel::exact(plan.tau);
    let verifier = QsqOracle::new(
        plan.instance.clone(),
        config.dist.spec(config.d, plan.verification_params.radius().unwrap()).unwrap(),
        plan.verification_params,
        noise,
    ).unwrap();
    let th = uniform_thresholds(10, 49, 1, 0.008);
    eprintln!("thresholds: tau_bound={:.6e} alpha1_min={:.6e} sum_max={:.6e}", th.tau_bound, th.alpha1_min, th.sum_max);
    for t in [2i64, 43, 44, 250, 603, 938, 1249, 1250, 1251, 2500] {
        let r = verifier.shift_correlation(0, t, 1, Backend::Analytic, 7).unwrap();
        let rb = verifier.shift_correlation(0, t, 1, Backend::Brute, 7);
        let brute = rb.map(|x| format!("{:.6e}", x.alpha)).unwrap_or_else(|e| format!("{e}"));
        eprintln!("T={t:5}  alpha1={:.6e}  (brute {brute})  accept={}", r.alpha,
            r.alpha >= th.alpha1_min && r.alpha <= th.sum_max);
    }
}
