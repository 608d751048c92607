//! Acceptance criteria shared by `muhs selftest` and the `acceptance` test
//! target. Each criterion returns an [`Outcome`]; nothing here panics on a
//! failed check.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use muhs_core::besov::{lp_norm, max_block_index, sobolev_norm, BesovIndex, DyadicCutoffs};
use muhs_core::characteristics::{
    global_existence_certificate, rho_identity_residual, FlowHistory, FlowOptions, FlowTracker,
    SlopeSource, IDENTITY_TOLERANCE,
};
use muhs_core::dynamics::{
    run, run_observed, Model, Parameters, RunControl, RunStatus, State, Trajectory,
};
use muhs_core::picard::{
    compare_to_direct, direct_on_mesh, run_adaptive, run_iteration, IterationConfig,
};
use muhs_core::spectral::{apply_pd, derivative, mean, PeriodicGrid, SpectralField, Spectrum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: &'static str,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "{} {} [{}] {} ({:.1}s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Collects sub-checks of one criterion.
struct Checks {
    passed: bool,
    notes: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self {
            passed: true,
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, note: String) {
        self.passed &= ok;
        self.notes
            .push(if ok { note } else { format!("NOT {note}") });
    }

    fn finish(self, id: &'static str, title: &'static str, start: Instant) -> Outcome {
        Outcome {
            id,
            title,
            passed: self.passed,
            detail: self.notes.join("; "),
            elapsed: start.elapsed(),
        }
    }
}

pub type Criterion = fn(u64) -> Outcome;

pub fn all() -> [(&'static str, Criterion); 10] {
    [
        ("AC1", ac1),
        ("AC2", ac2),
        ("AC3", ac3),
        ("AC4", ac4),
        ("AC5", ac5),
        ("AC6", ac6),
        ("AC7", ac7),
        ("AC8", ac8),
        ("AC9", ac9),
        ("AC10", ac10),
    ]
}

/// Real trig polynomial of the given degree with `β^{-decay}` amplitudes.
pub fn random_trig(
    grid: &PeriodicGrid,
    rng: &mut ChaCha8Rng,
    degree: usize,
    mean: f64,
    decay: f64,
) -> SpectralField {
    let mut modes = vec![(0, Complex64::new(mean, 0.0))];
    for beta in 1..=degree as i64 {
        let w = (beta as f64).powf(-decay);
        let c = Complex64::new(
            w * rng.random_range(-1.0..1.0),
            w * rng.random_range(-1.0..1.0),
        );
        modes.push((beta, c));
        modes.push((-beta, c.conj()));
    }
    Spectrum::from_modes(grid, modes)
        .expect("degree below n/2")
        .to_field()
}

fn sample_state(
    n: usize,
    u: impl Fn(f64) -> f64,
    rho: impl Fn(f64) -> f64,
    params: Parameters,
) -> State {
    let g = PeriodicGrid::new(n).expect("power of two");
    State::new(g.sample(u), g.sample(rho), params).expect("shared grid")
}

fn sine(n: usize, scale: f64) -> State {
    sample_state(
        n,
        |x| scale * (2.0 * PI * x).sin(),
        |x| scale * (2.0 * PI * x).cos(),
        Parameters::default(),
    )
}

fn global(n: usize) -> State {
    sample_state(
        n,
        |x| 0.5 * (2.0 * PI * x).cos(),
        |x| 1.0 + 0.5 * (2.0 * PI * x).sin(),
        Parameters::new(0.2, 0.1),
    )
}

struct TrackedRun {
    initial: State,
    trajectory: Trajectory,
    flow: FlowHistory,
    elapsed: Duration,
}

fn tracked_run(initial: State, t_end: f64, dt: f64) -> TrackedRun {
    let start = Instant::now();
    let mut tracker: Option<FlowTracker> = None;
    let control = RunControl {
        sample_every: 100,
        ..RunControl::with_dt(dt)
    };
    let options = FlowOptions {
        checkpoint_every: 100,
        ..FlowOptions::default()
    };
    let trajectory = run_observed(&initial, t_end, &control, |model, state| {
        match tracker.as_mut() {
            None => tracker = Some(FlowTracker::new(model, state, options)),
            Some(t) => t.advance(model, state),
        }
    })
    .expect("finite run");
    let flow = tracker.expect("observer saw the initial state").finish();
    TrackedRun {
        initial,
        trajectory,
        flow,
        elapsed: start.elapsed(),
    }
}

/// The reference sine run: n = 256, dt = 1e-4, t_end = 1.
fn run1() -> &'static TrackedRun {
    static RUN: OnceLock<TrackedRun> = OnceLock::new();
    RUN.get_or_init(|| tracked_run(sine(256, 1.0), 1.0, 1e-4))
}

/// The global-existence run: n = 256, dt = 1e-4, t_end = 5.
fn global_run() -> &'static TrackedRun {
    static RUN: OnceLock<TrackedRun> = OnceLock::new();
    RUN.get_or_init(|| tracked_run(global(256), 5.0, 1e-4))
}

pub fn ac1(_seed: u64) -> Outcome {
    let start = Instant::now();
    let s = sine(256, 1.0);
    let traj = run(&s, 1.0, &RunControl::with_dt(1e-4)).expect("finite run");
    let elapsed = start.elapsed();
    let mut c = Checks::new();
    c.check(
        traj.termination.status == RunStatus::Completed,
        format!(
            "run {:?} at t = {}",
            traj.termination.status, traj.termination.t_final
        ),
    );
    c.check(
        traj.mean_drift() < 1e-10,
        format!("mean drift {:.2e} < 1e-10", traj.mean_drift()),
    );
    c.check(
        traj.energy_drift() < 1e-6,
        format!("energy drift {:.2e} < 1e-6", traj.energy_drift()),
    );
    c.check(
        traj.a_drift() < 1e-6,
        format!("a drift {:.2e} < 1e-6", traj.a_drift()),
    );
    c.check(
        elapsed < Duration::from_secs(60),
        format!("runtime {:.1}s < 60s", elapsed.as_secs_f64()),
    );
    c.finish("AC1", "conservation", start)
}

pub fn ac2(_seed: u64) -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let r = run1();
    let worst = r.trajectory.max_utx_residual();
    let first_bad = r
        .trajectory
        .diagnostics
        .iter()
        .find(|d| d.utx_residual >= 1e-6)
        .map(|d| d.t);
    c.check(
        worst < 1e-6,
        format!(
            "max u_tx residual on run 1 {worst:.2e} < 1e-6{}",
            first_bad.map_or(String::new(), |t| format!(
                " (first exceeded at t = {t:.4})"
            ))
        ),
    );
    let mut steady = 0.0f64;
    for (c0, params) in [
        (0.0, Parameters::default()),
        (1.3, Parameters::default()),
        (-0.7, Parameters::new(0.4, -0.3)),
    ] {
        let s = sample_state(64, |_| c0, |_| 0.0, params);
        steady = steady.max(Model::new(&s).utx_residual(&s));
    }
    c.check(
        steady <= 1e-12,
        format!("steady-state residual {steady:.2e} <= 1e-12"),
    );
    c.finish("AC2", "reformulation identity", start)
}

pub fn ac3(seed: u64) -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let g = PeriodicGrid::new(64).expect("grid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = rng.random_range(-2.0..2.0);
        let f = random_trig(&g, &mut rng, 31, m, 1.0);
        // ∂ₓ(μ − ∂ₓ²)⁻¹ mode by mode: μ contributes only at β = 0.
        let oracle = f.spectrum().map_modes(|beta, c| {
            let w = 2.0 * PI * beta as f64;
            let helmholtz = if beta == 0 { 1.0 } else { w * w };
            c * Complex64::new(0.0, w) / helmholtz
        });
        worst = worst.max((&apply_pd(&f) - &oracle.to_field()).sup_norm());
    }
    c.check(
        worst < 1e-12,
        format!("P(D) vs mode-wise derivative of Helmholtz inverse {worst:.2e} < 1e-12"),
    );

    let sin = g.sample(|x| (2.0 * PI * x).sin());
    let pd = apply_pd(&sin);
    let stated = g.sample(|x| -(2.0 * PI * x).cos() / (2.0 * PI));
    let dev = (&pd - &stated).sup_norm();
    let opposite = (&pd + &stated).sup_norm();
    c.check(
        dev < 1e-12,
        format!("apply_pd(sin) = -cos/(2pi): deviation {dev:.3e} < 1e-12 (deviation from +cos/(2pi) is {opposite:.1e})"),
    );
    c.finish("AC3", "operator identities", start)
}

pub fn ac4(seed: u64) -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let mut runs: Vec<(&str, f64, bool)> = Vec::new();
    let r1 = run1();
    runs.push((
        "sine",
        r1.trajectory.monitor.sup_bound_excess,
        r1.trajectory.termination.status == RunStatus::Completed,
    ));
    let rg = global_run();
    runs.push((
        "global",
        rg.trajectory.monitor.sup_bound_excess,
        rg.trajectory.termination.status == RunStatus::Completed,
    ));
    for (name, s) in [("zero", sine(64, 0.0)), ("sine x0.1", sine(64, 0.1))] {
        let t = run(&s, 1.0, &RunControl::with_dt(1e-3)).expect("finite run");
        runs.push((
            name,
            t.monitor.sup_bound_excess,
            t.termination.status == RunStatus::Completed,
        ));
    }
    for (name, excess, completed) in &runs {
        if *completed {
            c.check(
                *excess <= 1e-6,
                format!("{name}: max(|u|_inf - bound) = {excess:.2e} <= 1e-6"),
            );
        } else {
            c.notes.push(format!("{name}: not completed, excluded"));
        }
    }
    let g = PeriodicGrid::new(128).expect("grid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let degree = rng.random_range(1..40);
        let f = random_trig(&g, &mut rng, degree, 0.0, 1.5);
        let interp = f.spectrum().interpolant();
        let peak = (0..4096)
            .map(|i| interp.eval(i as f64 / 4096.0).powi(2))
            .fold(0.0, f64::max);
        let energy = mean(&derivative(&f, 1).map(|v| v * v));
        worst = worst.max(peak / (energy / 12.0));
    }
    c.check(
        worst <= 1.0 + 1e-12,
        format!("max f^2 / (int f_x^2 / 12) over 1000 polynomials {worst:.4} <= 1"),
    );
    c.finish("AC4", "sup bound", start)
}

pub fn ac5(_seed: u64) -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let r = run1();
    let reports = r.flow.diffeo_reports(1e-5);
    let min_qx = r.flow.min_qx();
    c.check(min_qx > 0.0, format!("min q_x {min_qx:.3e} > 0"));
    let disc = r.flow.max_qx_discrepancy();
    let first_bad = reports
        .iter()
        .find(|d| d.max_discrepancy >= 1e-5)
        .map(|d| d.t);
    c.check(
        disc < 1e-5,
        format!(
            "max |qx_fd - qx_formula| {disc:.2e} < 1e-5{}",
            first_bad.map_or(String::new(), |t| format!(
                " (first exceeded at t = {t:.3})"
            ))
        ),
    );
    let residual = r.flow.max_identity_residual();
    let last = r.flow.last();
    let final_residual = rho_identity_residual(
        &last.map,
        &r.trajectory.last().rho,
        &r.initial.rho,
        SlopeSource::Formula,
    );
    c.check(
        residual < 1e-5,
        format!("rho identity residual {residual:.2e} < 1e-5 (final sample {final_residual:.2e})"),
    );
    c.check(
        r.elapsed < Duration::from_secs(120),
        format!("run + flow {:.1}s < 120s", r.elapsed.as_secs_f64()),
    );
    c.finish("AC5", "characteristics", start)
}

pub fn ac6(_seed: u64) -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let r = global_run();
    let t = &r.trajectory.termination;
    c.check(
        t.status == RunStatus::Completed && t.t_final == 5.0,
        format!("run {:?} at t = {}", t.status, t.t_final),
    );
    let cert = global_existence_certificate(r.initial.params, &r.flow);
    let floor = r
        .initial
        .rho
        .values()
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let (lo, hi) = r
        .flow
        .checkpoints
        .iter()
        .map(|cp| {
            cp.identity
                .iter()
                .fold(f64::INFINITY, |m, v| m.min(v.abs()))
        })
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| {
            (lo.min(m), hi.max(m))
        });
    let first_bad = r
        .flow
        .checkpoints
        .iter()
        .find(|cp| {
            let m = cp
                .identity
                .iter()
                .fold(f64::INFINITY, |m, v| m.min(v.abs()));
            (m - 0.5).abs() > IDENTITY_TOLERANCE
        })
        .map(|cp| cp.map.t);
    c.check(
        cert.applicable,
        format!("certificate applicable (min |rho0| = {floor})"),
    );
    c.check(
        (lo - 0.5).abs() <= 1e-4 && (hi - 0.5).abs() <= 1e-4,
        format!(
            "identity minimum in [{lo:.6}, {hi:.6}] within 0.5 +- 1e-4{}",
            first_bad.map_or(String::new(), |t| format!(" (first left at t = {t:.3})"))
        ),
    );
    c.finish("AC6", "global existence", start)
}

pub fn ac7(seed: u64) -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let g = PeriodicGrid::new(64).expect("grid");
    let params = Parameters::default();

    let zero = run_iteration(
        &IterationConfig::new(6, 1.0, Parameters::new(0.3, 0.2)),
        &g.zeros(),
        &g.zeros(),
    )
    .expect("valid config");
    let exact_zero = zero.rows.iter().all(|r| r.h_n == 0.0 && r.sup_l_n == 0.0)
        && zero
            .last
            .u
            .fields
            .iter()
            .chain(&zero.last.rho.fields)
            .all(|f| f.values().iter().all(|&v| v == 0.0));
    c.check(exact_zero, "zero data reproduced exactly".to_string());

    // |1 − χ(2^{−n−1}β)| vanishes for |β| ≤ (3/4)2^{n+1}, so the H^{s−1}
    // defect is at most 2^{−n}/(3π) times the H^s norm.
    let bound = 1.0 / (3.0 * PI);
    let cut = DyadicCutoffs::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7);
    let small = sine(64, 0.1);
    let big = PeriodicGrid::new(256).expect("grid");
    let mut data = vec![
        small.u.clone(),
        small.rho.clone(),
        global(64).u,
        global(64).rho,
    ];
    for _ in 0..10 {
        let m = rng.random_range(-1.0..1.0);
        data.push(random_trig(&big, &mut rng, 127, m, 1.0));
    }
    let s = 2.0;
    let mut worst = 0.0f64;
    for f in &data {
        let norm = sobolev_norm(f, s);
        for n in 0..=10 {
            let defect = sobolev_norm(&(&cut.low_pass(n + 1, f) - f), s - 1.0);
            worst = worst.max(defect / ((-(n as f64)).exp2() * norm));
        }
    }
    c.check(
        worst <= bound,
        format!("truncation constant {worst:.4} <= 1/(3pi) = {bound:.4} for n <= 10"),
    );

    let u0 = small.u.clone();
    let rho0 = small.rho.clone();
    let out =
        run_adaptive(&IterationConfig::new(12, 1.0, params), &u0, &rho0, 6).expect("valid config");
    let t_iter = out.config.t_iter;
    let ratio = out.max_ratio_from(4);
    c.check(
        out.converged && ratio.is_some_and(|r| r <= 0.9),
        format!(
            "T_iter = {t_iter}: max h ratio for n >= 4 {:.3} <= 0.9",
            ratio.unwrap_or(f64::NAN)
        ),
    );
    let mesh = out.config.mesh();
    let direct = direct_on_mesh(&small, &mesh, 16);
    let e12 = compare_to_direct(&out.last, &direct, s);
    let six = run_iteration(
        &IterationConfig {
            n_max: 6,
            ..out.config
        },
        &u0,
        &rho0,
    )
    .expect("valid config");
    let e6 = compare_to_direct(&six.last, &direct, s);
    c.check(
        e12 < e6,
        format!("error vs direct n=12 {e12:.2e} < n=6 {e6:.2e}"),
    );
    c.finish("AC7", "picard", start)
}

pub fn ac8(seed: u64) -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let cut = DyadicCutoffs::new();
    let mut partition = 0.0f64;
    for i in 0..10_000 {
        let xi = -128.0 + 256.0 * i as f64 / 9_999.0;
        let total = cut.chi(xi)
            + (0..12)
                .map(|q| cut.phi(xi * (-q as f64).exp2()))
                .sum::<f64>();
        partition = partition.max((total - 1.0).abs());
    }
    c.check(
        partition <= 1e-10,
        format!("partition of unity {partition:.1e} <= 1e-10"),
    );

    let g = PeriodicGrid::new(128).expect("grid");
    let qmax = max_block_index(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x8);
    let mut orth = 0.0f64;
    let mut interp = 0.0f64;
    for _ in 0..100 {
        let m = rng.random_range(-1.0..1.0);
        let f = random_trig(&g, &mut rng, 63, m, 1.0);
        let base = lp_norm(&f, 2.0);
        for p in -1..=qmax {
            for q in -1..=qmax {
                if (p - q).abs() >= 2 {
                    orth = orth.max(lp_norm(&cut.block(p, &cut.block(q, &f)), 2.0) / base);
                }
            }
        }
        let (s1, s2, theta) = (
            rng.random_range(-1.0..3.0),
            rng.random_range(-1.0..3.0),
            rng.random_range(0.0..1.0),
        );
        let p = [1.0, 2.0, 4.0, f64::INFINITY][rng.random_range(0..4)];
        let r = [1.0, 2.0, 3.0, f64::INFINITY][rng.random_range(0..4)];
        let norm = |s: f64| cut.besov_norm(&f, BesovIndex::new(s, p, r).expect("index"));
        let lhs = norm(theta * s1 + (1.0 - theta) * s2);
        let rhs = norm(s1).powf(theta) * norm(s2).powf(1.0 - theta);
        interp = interp.max((lhs - rhs) / rhs.max(1.0));
    }
    c.check(
        orth <= 1e-10,
        format!("max |Delta_p Delta_q f| / |f| for |p-q| >= 2 {orth:.1e} <= 1e-10"),
    );
    c.check(
        interp <= 1e-9,
        format!("interpolation excess {interp:.1e} <= 1e-9"),
    );

    let mut moser = 0.0f64;
    for s in [1.6, 2.0, 2.6] {
        let idx = BesovIndex::sobolev(s);
        for _ in 0..100 {
            let (a, b) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let f = random_trig(&g, &mut rng, 20, a, 2.0);
            let h = random_trig(&g, &mut rng, 20, b, 2.0);
            let lhs = cut.besov_norm(&(&f * &h), idx);
            let rhs =
                cut.besov_norm(&f, idx) * h.sup_norm() + cut.besov_norm(&h, idx) * f.sup_norm();
            moser = moser.max(lhs / rhs);
        }
    }
    c.check(
        moser <= 1.0,
        format!("Moser ratio over 300 pairs {moser:.3} <= C = 1"),
    );

    let mut constant = 0.0f64;
    for (cst, s) in [(2.5, 1.0), (-0.7, 2.6), (4.0, -1.5)] {
        let v = cut.besov_norm(
            &g.constant(cst),
            BesovIndex::new(s, 2.0, 2.0).expect("index"),
        );
        constant = constant.max((v - (-s).exp2() * f64::abs(cst)).abs());
    }
    c.check(
        constant <= 1e-12,
        format!("besov_norm(c) - 2^-s|c| {constant:.1e} <= 1e-12"),
    );
    c.finish("AC8", "besov", start)
}

pub fn ac9(_seed: u64) -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let s = sine(64, 1.0);
    let at = |dt: f64| {
        run(&s, 0.1, &RunControl::with_dt(dt))
            .expect("finite run")
            .last()
            .clone()
    };
    let reference = at(1e-5);
    let err = |dt: f64| {
        let z = at(dt);
        (&z.u - &reference.u).sup_norm() + (&z.rho - &reference.rho).sup_norm()
    };
    let (e1, e2) = (err(1e-3), err(5e-4));
    let ratio = e1 / e2;
    c.check(
        (12.0..=20.0).contains(&ratio),
        format!("error ratio {ratio:.2} in [12, 20] (errors {e1:.2e}, {e2:.2e})"),
    );
    c.finish("AC9", "rk4 order", start)
}

pub fn ac10(_seed: u64) -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let base = sine(64, 0.1);
    let g = base.grid().clone();
    let control = RunControl::with_dt(1e-3);
    let end = |s: &State| run(s, 0.5, &control).expect("finite run").last().clone();
    let reference = end(&base);
    let du = g.sample(|x| (4.0 * PI * x).cos());
    let drho = g.sample(|x| (2.0 * PI * x).sin());
    let s = 2.0;
    let mut ratios = Vec::new();
    for eps in [1e-3, 1e-4] {
        let perturbed = State::new(
            base.u.axpy(eps, &du),
            base.rho.axpy(eps, &drho),
            base.params,
        )
        .expect("grid");
        let z = end(&perturbed);
        let d = sobolev_norm(&(&z.u - &reference.u), s - 1.0)
            + sobolev_norm(&(&z.rho - &reference.rho), s - 2.0);
        ratios.push(d / eps);
    }
    let spread = ratios[0].max(ratios[1]) / ratios[0].min(ratios[1]);
    c.check(
        spread <= 2.0,
        format!(
            "response ratios {:.4} and {:.4} agree within factor {spread:.4} <= 2",
            ratios[0], ratios[1]
        ),
    );
    c.finish("AC10", "data continuity", start)
}
