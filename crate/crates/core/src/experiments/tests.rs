use super::*;

fn small(kind: ExperimentKind) -> ExperimentConfig {
    let mut c = ExperimentConfig::desk(kind);
    if let Some(n) = c.numerics.as_mut() {
        n.n_max = 5;
        n.noisy_n_max = 4;
        n.scan_points = 11;
        n.record_points = 101;
    }
    c
}

#[test]
fn modes_table_has_the_two_ion_ratio() {
    let out = run(&ExperimentConfig::desk(ExperimentKind::Modes)).unwrap();
    let ratios = out.tables[0].column("omega_over_omega_x").unwrap();
    assert_eq!(ratios[0], 1.0);
    assert!((ratios[1] - 0.9682).abs() < 1e-4);
    let x = out.tables[1].column("position").unwrap();
    assert!((x[1] - 0.5f64.powf(2.0 / 3.0)).abs() < 1e-9);
}

#[test]
fn jeff_reports_the_gate_time() {
    let out = run(&ExperimentConfig::desk(ExperimentKind::Jeff)).unwrap();
    let tg: f64 = out.tables[0]
        .metadata
        .iter()
        .find(|(k, _)| k == "t_gate_s")
        .map(|(_, v)| v.parse().unwrap())
        .unwrap();
    assert!((tg - 0.7026e-3).abs() < 1e-6);
}

#[test]
fn swap_traces_follow_the_xy_model_and_damp_with_temperature() {
    let mut c = small(ExperimentKind::Fig2aSwap);
    c.thermal.as_mut().unwrap().nbar = vec![0.0, 1.0, 2.0];
    let r = run_fig2a(&c).unwrap();
    let t0 = &r.traces[0];
    assert_eq!(t0.p10_exact[0], 1.0);
    let peak = t0.peak_time.unwrap();
    assert!((peak / r.swap_time - 1.0).abs() < 0.02, "{peak} vs {}", r.swap_time);
    let a: Vec<f64> = r.traces.iter().map(|t| t.amplitude_at_swap).collect();
    assert!(a[0] > a[1] && a[1] > a[2], "{a:?}");
    let out = r.output();
    assert_eq!(out.tables.len(), 3);
    assert_eq!(out.tables[1].name, "fig2a_swap_nbar1");
}

#[test]
fn driving_suppresses_the_bell_error() {
    let mut c = small(ExperimentKind::Fig2bThermal);
    c.thermal.as_mut().unwrap().nbar = vec![0.0];
    c.drive.as_mut().unwrap().omega_d_over_omega_z = vec![0.0, 5.2];
    let r = run_fig2b(&c).unwrap();
    let (e0, e52) = (r.error_at(0.0, 0.0).unwrap(), r.error_at(0.0, 5.2).unwrap());
    assert!(e52 < 1e-2, "{e52}");
    assert!(e0 > 10.0 * e52, "{e0} vs {e52}");
}

#[test]
fn laser_phase_drift_leaves_the_bell_error_unchanged() {
    let mut c = small(ExperimentKind::Fig2bThermal);
    c.thermal.as_mut().unwrap().nbar = vec![0.5];
    c.drive.as_mut().unwrap().omega_d_over_omega_z = vec![5.2];
    let a = run_fig2b(&c).unwrap();
    c.lab.as_mut().unwrap().phi_l += std::f64::consts::FRAC_PI_3;
    let b = run_fig2b(&c).unwrap();
    assert!((a.points[0].error - b.points[0].error).abs() < 1e-6);
}

#[test]
fn noiseless_limit_of_the_noise_experiment_matches_a_plain_bell_scan() {
    let mut a = small(ExperimentKind::Fig4bNoise);
    a.noise.as_mut().unwrap().t2 = vec![f64::INFINITY];
    let fa = run_fig4b(&a).unwrap();
    let mut b = small(ExperimentKind::Custom);
    let n = b.numerics.as_mut().unwrap();
    n.n_max = n.noisy_n_max;
    n.target = "phi_minus".into();
    let fb = run(&b).unwrap();
    let err = fb.tables[0].column("error").unwrap()[0];
    assert!((fa.points[0].error - err).abs() < 1e-12, "{} vs {err}", fa.points[0].error);
    assert!(err < 1e-2);
    assert_eq!(fa.points[0].trajectories, 0);
}

#[test]
fn coherence_pipeline_recovers_t2() {
    let mut c = ExperimentConfig::desk(ExperimentKind::Fig4aCoherence);
    c.coherence.as_mut().unwrap().trajectories = 2000;
    let runs = run_fig4a(&c).unwrap();
    let fit = &runs[0].fit;
    assert!((fit.t2 - 5e-3).abs() < 4.0 * fit.t2_stderr, "{fit:?}");
    let out = fig4a_output(&runs);
    assert_eq!(out.tables[0].name, "fig4a_coherence_t2_5p000ms");
}

#[test]
fn channel_estimators_agree_without_noise() {
    let mut c = small(ExperimentKind::ChannelError);
    c.noise.as_mut().unwrap().t2 = vec![f64::INFINITY];
    c.haar.as_mut().unwrap().states = 40;
    let r = run_channel_error(&c).unwrap();
    let p = &r.points[0];
    assert!(p.deviation().abs() < 3.0 * p.stderr, "{p:?}");
    assert!(p.eps_aa < 1e-2);
}

#[test]
fn outputs_are_reproducible_across_thread_counts() {
    let mut c = small(ExperimentKind::Custom);
    c.numerics.as_mut().unwrap().scan_points = 3;
    let th = c.thermal.as_mut().unwrap();
    th.nbar = vec![0.3];
    th.tolerance = 1e-2;
    c.noise = Some(NoiseConfig {
        t2: vec![1e-3],
        trajectories: 3,
        ..NoiseConfig::default()
    });
    let csv = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let out = pool.install(|| run(&c)).unwrap();
        out.tables[0].to_csv(&c.to_toml().unwrap())
    };
    let a = csv(1);
    assert_eq!(a, csv(3));
    assert_eq!(a, csv(1));
}

#[test]
fn polaron_check_scales_the_couplings() {
    let c = ExperimentConfig::desk(ExperimentKind::Jeff);
    let mut lab = *c.lab().unwrap();
    lab.num_ions = 1;
    let c = ExperimentConfig {
        lab: Some(lab),
        ..c
    };
    let r = run_polaron_check(&c, 8, 0.05, 8).unwrap();
    assert!(r.displacement_residual < 1e-8 && r.spin_residual < 1e-8, "{r:?}");
}

#[test]
fn written_tables_carry_the_configuration() {
    let c = ExperimentConfig::desk(ExperimentKind::Modes);
    let dir = tempfile::tempdir().unwrap();
    let paths = run(&c).unwrap().write(dir.path(), &c).unwrap();
    let text = std::fs::read_to_string(&paths[0]).unwrap();
    assert!(text.contains("# experiment = \"modes\""));
    assert!(text.contains("# trap_x_hz = 4000000.0"));
}
