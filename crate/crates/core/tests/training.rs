use pgtail::algos::{Algorithm, StepContext, StepObserver, Trainer};
use pgtail::env::EnvKind;
use pgtail::harness::{HarnessConfig, RunDriver, RunStatus};
use pgtail::nn::SampleLoss;
use pgtail::taildiag::{CaptureConfig, CaptureMode, GradientCapture, Quantity, Stage};
use pgtail::Result;

fn small(algorithm: Algorithm, env: EnvKind) -> HarnessConfig {
    HarnessConfig {
        algorithm,
        env,
        hidden: vec![8],
        iterations: Some(2),
        checkpoint_every: 0,
        ..HarnessConfig::default()
    }
}

#[test]
fn default_batch_structure_gives_320_steps() {
    for alg in [Algorithm::Ppo, Algorithm::PpoNoclip, Algorithm::RobustPpoNoclip] {
        let cfg = small(alg, EnvKind::Pendulum).resolve().unwrap();
        let mut t = Trainer::new(cfg.train, 0).unwrap();
        let r = t.train_iteration(None).unwrap();
        assert_eq!(r.gradient_steps, 320, "{alg}");
        assert_eq!(r.episodes, 10);
        assert_eq!(r.ratio.first_step_mean, 1.0);
    }
}

#[test]
fn a2c_takes_one_step_per_iteration() {
    let cfg = small(Algorithm::A2c, EnvKind::Pointmass).resolve().unwrap();
    let mut t = Trainer::new(cfg.train, 0).unwrap();
    assert_eq!(t.train_iteration(None).unwrap().gradient_steps, 1);
}

/// Records every ratio seen at the first step of each iteration.
struct FirstStepRatios(Vec<f64>);

impl StepObserver for FirstStepRatios {
    fn wants_iteration(&self, _iteration: u64) -> bool {
        true
    }

    fn on_step(&mut self, ctx: &StepContext<'_>) -> Result<()> {
        if ctx.step == 0 {
            let obj = pgtail::algos::ActorObjective::new(ctx.actor_net, ctx.batch, ctx.indices, ctx.loss);
            for i in 0..obj.num_samples() {
                self.0.push(obj.log_prob_and_ratio(ctx.actor_params, i)?.1);
            }
        }
        Ok(())
    }
}

#[test]
fn on_policy_step_has_unit_ratios() {
    let cfg = small(Algorithm::PpoNoclip, EnvKind::Pointmass).resolve().unwrap();
    let mut obs = FirstStepRatios(Vec::new());
    RunDriver::new(&cfg, 4).unwrap().run_until(2, Some(&mut obs)).unwrap();
    assert_eq!(obs.0.len(), 2 * 64);
    assert!(obs.0.iter().all(|&r| r == 1.0));
}

#[test]
fn identical_seeds_give_identical_reports() {
    for alg in [Algorithm::Ppo, Algorithm::RobustPpoNoclip, Algorithm::A2c] {
        let cfg = small(alg, EnvKind::Pointmass).resolve().unwrap();
        let a = RunDriver::new(&cfg, 9).unwrap().run_until(2, None).unwrap();
        let b = RunDriver::new(&cfg, 9).unwrap().run_until(2, None).unwrap();
        assert_eq!(a, b);
        let c = RunDriver::new(&cfg, 10).unwrap().run_until(2, None).unwrap();
        assert_ne!(a.reports, c.reports);
    }
}

#[test]
fn capture_does_not_perturb_training() {
    let cfg = small(Algorithm::Ppo, EnvKind::Pendulum).resolve().unwrap();
    let plain = RunDriver::new(&cfg, 2).unwrap().run_until(2, None).unwrap();
    let mut cap = GradientCapture::new(CaptureConfig {
        ad_directions: 10,
        ..CaptureConfig::off_policy(2, 1, Stage::Init)
    });
    let observed = RunDriver::new(&cfg, 2).unwrap().run_until(2, Some(&mut cap)).unwrap();
    assert_eq!(plain.reports, observed.reports);
    assert!(!cap.reports.is_empty());
    assert!(cap.reports.iter().all(|r| r.iteration == 1));
}

#[test]
fn on_policy_capture_sees_unit_ratios() {
    let cfg = small(Algorithm::PpoNoclip, EnvKind::Pendulum).resolve().unwrap();
    let mut cap = GradientCapture::new(CaptureConfig {
        keep_samples: true,
        ad_directions: 0,
        mode: CaptureMode::OnPolicy { every: 1 },
        ..CaptureConfig::on_policy(0)
    });
    RunDriver::new(&cfg, 0).unwrap().run_until(2, Some(&mut cap)).unwrap();
    assert_eq!(cap.steps.len(), 2);
    for s in &cap.steps {
        assert_eq!(s.step, 0);
        assert!(s.samples.quantity(Quantity::Ratio).iter().all(|&r| r == 1.0));
    }
}

#[test]
fn exploding_learning_rate_is_reported_as_divergence() {
    let mut c = small(Algorithm::PpoNoclip, EnvKind::Pendulum);
    c.learning_rate = Some(1e6);
    c.iterations = Some(5);
    let cfg = c.resolve().unwrap();
    let rec = RunDriver::new(&cfg, 0).unwrap().run_until(5, None).unwrap();
    assert_eq!(rec.status, RunStatus::Diverged, "{:?}", rec.reports.last());
    assert!(rec.failure.is_some());
    assert_eq!(rec.last_finite_iteration, rec.reports.last().map(|r| r.iteration));
}
