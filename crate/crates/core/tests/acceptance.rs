//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any check disagrees with its expected outcome. Criteria with
//! a known defect in their as-stated form print the as-stated variant, which
//! must fail in the analyzed way, next to the corrected variant, which must pass.

use std::f64::consts::PI;
use std::time::Instant;

use iongate::crystal::{compute_modes, solve_equilibrium, TrapParams};
use iongate::effective::{compute_j_eff, ideal_gate, BellTarget};
use iongate::experiments::{self, ExperimentConfig, ExperimentKind, NoiseConfig};
use iongate::fidelity::{
    entanglement_fidelity, haar_channel_fidelity, relation_deviation, Estimate, KrausChannel,
};
use iongate::hamiltonian::{interaction_hamiltonian, LabParams};
use iongate::noise::ou_from_t2;
use iongate::propagate::{
    convergence_probe, NoisePath, NoiseSpec, ProbeCase, PulseSchedule, SimOptions, Simulator, ThermalSpec,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Rounding allowance for channels whose two estimators are both exactly one.
const ROUNDING: f64 = 1e-12;

struct Report {
    failures: Vec<String>,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, detail: String) {
        println!("criterion {id}: {} {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failures.push(id.to_string());
        }
    }

    /// A variant that must fail: the check succeeds when `pass` is false.
    fn expected_fail(&mut self, id: &str, pass: bool, detail: String) {
        println!("criterion {id}: {} {detail} (expected FAIL)", if pass { "PASS" } else { "FAIL" });
        if pass {
            self.failures.push(format!("{id} passed but was expected to fail"));
        }
    }
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn criterion_1(r: &mut Report) {
    let t = Instant::now();
    let trap = TrapParams::new(2, 2.0 * PI * 4e6, 2.0 * PI * 1e6).unwrap();
    let modes = compute_modes(&trap, &solve_equilibrium(&trap).unwrap()).unwrap();
    let ratio = modes.frequencies[1] / modes.frequencies[0];
    let com = modes.frequencies[0] == trap.omega_x;
    let el = secs(t);
    r.line(
        "1",
        (ratio - 0.9682).abs() <= 1e-4 && com && el < 1.0,
        format!("omega_zz/omega_x = {ratio:.6}, COM exact = {com}, {el:.3} s"),
    );
}

fn criterion_2(r: &mut Report) {
    let x2 = solve_equilibrium(&TrapParams::new(2, 4.0, 1.0).unwrap()).unwrap().positions;
    let x3 = solve_equilibrium(&TrapParams::new(3, 4.0, 1.0).unwrap()).unwrap().positions;
    let a = 1.25f64.cbrt();
    let e2 = (x2[0] + 0.62996).abs().max((x2[1] - 0.62996).abs());
    let e3 = (x3[0] + a).abs().max(x3[1].abs()).max((x3[2] - a).abs());
    r.line(
        "2",
        e2 <= 1e-6 && e3 <= 1e-6,
        format!("N=2 {x2:?} (dev {e2:.1e}), N=3 dev from (5/4)^(1/3) {e3:.1e}"),
    );
}

fn gate_time(delta_l: f64) -> f64 {
    let p = LabParams {
        delta_l,
        ..LabParams::reference()
    };
    let sim = Simulator::from_params(p, 2, 1, SimOptions::default()).unwrap();
    compute_j_eff(sim.couplings()).unwrap().t_gate.unwrap()
}

fn criterion_3(r: &mut Report) {
    let t = Instant::now();
    let literal = gate_time(-2.0 * PI * 800e3);
    let corrected = gate_time(2.0 * PI * 800e3);
    let el = secs(t);
    let window = |tg: f64| (0.66e-3..=0.80e-3).contains(&tg);
    r.expected_fail(
        "3 [as stated, delta_L = -800 kHz]",
        window(literal),
        format!("t_gate = {:.4} ms, window [0.66, 0.80] ms", literal * 1e3),
    );
    r.line(
        "3 [delta_L = +800 kHz]",
        window(corrected) && el < 1.0,
        format!("t_gate = {:.4} ms, {el:.3} s", corrected * 1e3),
    );
}

fn criterion_4(r: &mut Report) {
    let t = Instant::now();
    let mut cfg = ExperimentConfig::desk(ExperimentKind::Fig2bThermal);
    cfg.thermal.as_mut().unwrap().nbar = vec![0.0, 1.0];
    let out = experiments::run_fig2b(&cfg).unwrap();
    let ratios = &cfg.drive.as_ref().unwrap().omega_d_over_omega_z;
    let e0 = out.error_at(0.0, 5.2).unwrap();
    let mut monotone = true;
    let mut rows = Vec::new();
    for nbar in [0.0, 1.0] {
        let e: Vec<f64> = ratios.iter().map(|&x| out.error_at(nbar, x).unwrap()).collect();
        monotone &= e.windows(2).all(|w| w[1] <= w[0]);
        rows.push(format!("nbar {nbar}: {}", e.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(" ")));
    }
    r.line(
        "4",
        e0 < 1e-2 && monotone,
        format!("eps(nbar 0, 5.2 omega_z) = {e0:.2e}; {}; {:.0} s", rows.join("; "), secs(t)),
    );
}

fn criterion_5(r: &mut Report) {
    let t = Instant::now();
    let mut cfg = ExperimentConfig::desk(ExperimentKind::Fig2aSwap);
    cfg.thermal.as_mut().unwrap().nbar = vec![0.0, 1.0, 2.0];
    let out = experiments::run_fig2a(&cfg).unwrap();
    let peak = out.traces[0].peak_time.unwrap_or(f64::NAN);
    let dev = (peak / out.swap_time - 1.0).abs();
    let a: Vec<f64> = out.traces.iter().map(|tr| tr.amplitude_at_swap).collect();
    r.line(
        "5",
        dev < 0.02 && a[0] > a[1] && a[1] > a[2],
        format!(
            "swap peak {:.4} ms vs XY {:.4} ms ({:.2}%), amplitudes {:.4} > {:.4} > {:.4}, {:.0} s",
            peak * 1e3,
            out.swap_time * 1e3,
            dev * 100.0,
            a[0],
            a[1],
            a[2],
            secs(t)
        ),
    );
}

fn criterion_6(r: &mut Report) {
    let t = Instant::now();
    let cfg = ExperimentConfig::desk(ExperimentKind::Fig4aCoherence);
    let run = &experiments::run_fig4a(&cfg).unwrap()[0];
    let el = secs(t);
    let rel = run.fit.t2 / 5e-3 - 1.0;
    r.line(
        "6",
        rel.abs() < 0.05 && el < 60.0 && run.curve.trajectories == 5000,
        format!(
            "T2 fit {:.4} ms ({:+.2}%, jackknife stderr {:.3} ms), tau {:.2} ms, N = {}, {el:.2} s",
            run.fit.t2 * 1e3,
            rel * 100.0,
            run.fit.t2_stderr * 1e3,
            run.ou.tau * 1e3,
            run.curve.trajectories
        ),
    );
}

fn criterion_7(r: &mut Report) {
    for (label, trajectories, threshold, sigmas) in [("7 [smoke]", 20, 3e-2, 0.0), ("7", 200, 1e-2, 3.0)] {
        let t = Instant::now();
        let mut cfg = ExperimentConfig::desk(ExperimentKind::Fig4bNoise);
        cfg.noise = Some(NoiseConfig {
            t2: vec![5e-3],
            trajectories,
            ..NoiseConfig::default()
        });
        let out = experiments::run_fig4b(&cfg).unwrap();
        let p = &out.points[0];
        r.line(
            label,
            p.error < threshold + sigmas * p.stderr && p.trajectories == trajectories,
            format!(
                "eps(Phi-) = {:.2e} +- {:.1e} at t_f = {:.4} ms, {} trajectories, {:.0} s",
                p.error,
                p.stderr,
                p.t_final * 1e3,
                p.trajectories,
                secs(t)
            ),
        );
    }
}

fn relation_line(r: &mut Report, label: &str, fe: &Estimate, haar: &Estimate) {
    let (dev, se) = relation_deviation(fe, haar);
    r.line(
        label,
        dev.abs() < 3.0 * se + ROUNDING && haar.samples >= 100,
        format!(
            "F_e {:.6}, F_haar {:.6} ({} states), |dev| {:.2e} vs 3 stderr {:.2e}",
            fe.mean,
            haar.mean,
            haar.samples,
            dev.abs(),
            3.0 * se
        ),
    );
}

fn criterion_8(r: &mut Report) {
    let t = Instant::now();
    let v = ideal_gate(0.0);
    let ideal = KrausChannel::unitary(v.clone()).unwrap();
    relation_line(
        r,
        "8 [ideal gate]",
        &entanglement_fidelity(&ideal, &v).unwrap(),
        &haar_channel_fidelity(&ideal, &v, 100, 7).unwrap(),
    );
    let dep = KrausChannel::depolarizing(0.2).unwrap();
    let id = DMatrix::<Complex64>::identity(4, 4);
    relation_line(
        r,
        "8 [depolarizing p = 0.2]",
        &entanglement_fidelity(&dep, &id).unwrap(),
        &haar_channel_fidelity(&dep, &id, 100, 7).unwrap(),
    );
    let mut cfg = ExperimentConfig::desk(ExperimentKind::ChannelError);
    cfg.noise.as_mut().unwrap().t2 = vec![f64::INFINITY, 5e-3];
    let out = experiments::run_channel_error(&cfg).unwrap();
    for p in &out.points {
        let label = if p.t2.is_finite() { "8 [simulated, T2 = 5 ms]" } else { "8 [simulated, noiseless]" };
        relation_line(r, label, &p.fe, &p.haar);
    }
    println!("  criterion 8 runtime {:.0} s", secs(t));
}

fn criterion_9(r: &mut Report) {
    let t = Instant::now();
    let cfg = ExperimentConfig::desk(ExperimentKind::Jeff);
    let bare = experiments::run_polaron_check(&cfg, 8, 0.05, 0).unwrap();
    let padded = experiments::run_polaron_check(&cfg, 8, 0.05, 8).unwrap();
    r.expected_fail(
        "9 [as stated, cosh(theta) form]",
        padded.spin_residual_single_angle < 1e-8,
        format!("spin residual {:.3e}", padded.spin_residual_single_angle),
    );
    r.expected_fail(
        "9 [no Fock headroom]",
        bare.displacement_residual < 1e-8,
        format!("displacement residual {:.3e}", bare.displacement_residual),
    );
    r.line(
        "9 [cosh(2 theta) form, headroom 8]",
        padded.displacement_residual < 1e-8 && padded.spin_residual < 1e-8,
        format!(
            "displacement {:.2e}, spin {:.2e}, {} interior states, {:.0} s",
            padded.displacement_residual,
            padded.spin_residual,
            padded.interior_states,
            secs(t)
        ),
    );
}

fn unitarity_defect() -> f64 {
    let sim = Simulator::from_params(LabParams::reference(), 2, 3, SimOptions::default()).unwrap();
    let dim = sim.layout().dim();
    let t = 2e-4;
    let ou = ou_from_t2(1e-3, 0.1, 3).unwrap();
    let path = NoisePath::sample(&ou, 0, sim.options().dt, t, 1).unwrap();
    let mut worst = 0.0_f64;
    for noise in [None, Some(&path)] {
        let mut psi = vec![c(0.0); dim * dim];
        for k in 0..dim {
            psi[k * dim + k] = c(1.0);
        }
        sim.evolve_columns(&mut psi, dim, &PulseSchedule::echo(t).unwrap(), t, noise, &[], &mut |_, _| {})
            .unwrap();
        let u = DMatrix::from_column_slice(dim, dim, &psi);
        worst = worst.max((u.adjoint() * &u - DMatrix::identity(dim, dim)).camax());
    }
    worst
}

fn hermiticity_defect() -> f64 {
    let p = LabParams::reference();
    let sim = Simulator::from_params(p, 2, 4, SimOptions::default()).unwrap();
    let layout = *sim.layout();
    (0..8)
        .map(|k| {
            let h = interaction_hamiltonian(&layout, &p, sim.couplings(), k as f64 * 1.3e-5, k % 2 == 1).unwrap();
            h.hermiticity_defect() / p.omega_d
        })
        .fold(0.0, f64::max)
}

fn orthogonality_defect() -> f64 {
    (1..=8)
        .map(|n| {
            let trap = TrapParams::new(n, 2.0 * PI * 4e6 * (1.0 + n as f64 / 4.0), 2.0 * PI * 1e6).unwrap();
            compute_modes(&trap, &solve_equilibrium(&trap).unwrap()).unwrap().orthogonality_defect()
        })
        .fold(0.0, f64::max)
}

fn dfs_defect() -> f64 {
    let p = LabParams {
        omega_l: 0.0,
        omega_d: 0.0,
        ..LabParams::reference()
    };
    let sim = Simulator::from_params(p, 2, 1, SimOptions::default()).unwrap();
    let s = 0.5f64.sqrt();
    let psi = DVector::from_vec(vec![c(0.0), c(s), Complex64::new(0.0, s), c(0.0)]);
    let rho0 = &psi * psi.adjoint();
    let noise = NoiseSpec::new(ou_from_t2(0.2e-3, 0.1, 9).unwrap(), 8);
    let t = 1e-3;
    let res = sim
        .evolve_thermal(&psi, &ThermalSpec::vacuum(1), &PulseSchedule::empty(), Some(&noise), t, &[0.5 * t, t])
        .unwrap();
    res.per_trajectory
        .iter()
        .flatten()
        .map(|rho| (rho - &rho0).camax())
        .fold(0.0, f64::max)
}

fn gauge_defect() -> f64 {
    let mut cfg = ExperimentConfig::desk(ExperimentKind::Fig2bThermal);
    cfg.thermal.as_mut().unwrap().nbar = vec![0.5];
    cfg.drive.as_mut().unwrap().omega_d_over_omega_z = vec![5.2];
    let n = cfg.numerics.as_mut().unwrap();
    n.n_max = 6;
    n.scan_points = 11;
    let a = experiments::run_fig2b(&cfg).unwrap().points[0].error;
    cfg.lab.as_mut().unwrap().phi_l += PI / 3.0;
    let b = experiments::run_fig2b(&cfg).unwrap().points[0].error;
    (a - b).abs()
}

fn probe_case() -> ProbeCase {
    let params = LabParams::reference();
    let sim = Simulator::from_params(params, 2, 3, SimOptions::default()).unwrap();
    let tg = compute_j_eff(sim.couplings()).unwrap().t_gate.unwrap();
    let target = BellTarget::PhiMinus;
    ProbeCase {
        params,
        num_ions: 2,
        n_max: 3,
        options: SimOptions::default(),
        spin_state: target.input(),
        nbar: 0.0,
        thermal_tolerance: 1e-4,
        schedule: PulseSchedule::echo(tg).unwrap(),
        noise: Some(NoiseSpec::new(ou_from_t2(5e-3, 0.1, 1).unwrap(), 4)),
        t_final: tg,
        record_times: vec![0.5 * tg, tg],
        target: Some(target.state(params.phi_d)),
    }
}

fn seeds_bit_exact() -> bool {
    let case = probe_case();
    let sim = Simulator::from_params(case.params, 2, 3, case.options).unwrap();
    let thermal = ThermalSpec::new(0.3, 3, 1e-3).unwrap();
    let t = 1e-4;
    let schedule = PulseSchedule::echo(t).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                sim.evolve_thermal(&case.spin_state, &thermal, &schedule, case.noise.as_ref(), t, &[0.5 * t, t])
                    .unwrap()
            })
    };
    let bits = |r: &iongate::propagate::SimResult| {
        r.per_trajectory
            .iter()
            .flatten()
            .flat_map(|m| m.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect::<Vec<_>>())
            .collect::<Vec<u64>>()
    };
    let a = bits(&run(1));
    a == bits(&run(1)) && a == bits(&run(4))
}

fn criterion_10(r: &mut Report) {
    let t = Instant::now();
    let u = unitarity_defect();
    r.line("10 [unitarity]", u < 1e-9, format!("max |U'U - 1| = {u:.2e}"));
    let h = hermiticity_defect();
    r.line("10 [hermiticity]", h < 1e-12, format!("max |H - H'| / Omega_d = {h:.2e}"));
    let o = orthogonality_defect();
    r.line("10 [mode orthogonality]", o < 1e-12, format!("max |M M^T - 1| = {o:.2e}, N = 1..8"));
    let d = dfs_defect();
    r.line("10 [decoherence-free subspace]", d < 1e-10, format!("max |rho - rho0| = {d:.2e} under T2 = 0.2 ms"));
    let g = gauge_defect();
    r.line("10 [laser-phase gauge]", g < 1e-6, format!("|d eps| = {g:.2e} for phi_L + pi/3"));
    let probe = convergence_probe(&probe_case()).unwrap();
    let f = probe.fidelity_dt_drift.unwrap();
    r.line("10 [dt halving]", f < 1e-6, format!("fidelity drift {f:.2e} at dt = 1 us with OU noise"));
    let s = seeds_bit_exact();
    r.line("10 [seed determinism]", s, format!("bit-exact across reruns and 1/4 threads = {s}"));
    println!("  criterion 10 runtime {:.0} s", secs(t));
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |id: &str| filter.is_empty() || filter.iter().any(|f| f == id);
    let mut r = Report { failures: Vec::new() };
    let all: [(&str, fn(&mut Report)); 10] = [
        ("1", criterion_1),
        ("2", criterion_2),
        ("3", criterion_3),
        ("4", criterion_4),
        ("5", criterion_5),
        ("6", criterion_6),
        ("7", criterion_7),
        ("8", criterion_8),
        ("9", criterion_9),
        ("10", criterion_10),
    ];
    for (id, f) in all {
        if wanted(id) {
            f(&mut r);
        }
    }
    if !r.failures.is_empty() {
        eprintln!("acceptance failures: {:?}", r.failures);
        std::process::exit(1);
    }
}
