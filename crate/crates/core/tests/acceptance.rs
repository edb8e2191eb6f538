//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test --release --test acceptance`.

mod common;

use std::f64::consts::PI;
use std::fs;
use std::time::Instant;

use common::*;
use num_complex::Complex64 as C;
use torus_echo::analysis::{
    fit_decay_rate_with, gdm_rate_prediction, loglog_slope, purity_initial_state, purity_row_curve,
    FitOptions, PurityModel, RateFit,
};
use torus_echo::config::{parse_config_with, Mode};
use torus_echo::decoherence::{apply_decoherence, chord_multiplier, evolve_purity, Channel};
use torus_echo::dynamics::{lyapunov_closed_form, lyapunov_numeric, Direction, MapParams, Propagator};
use torus_echo::echo::{averaged_le, PerturbationSpec};
use torus_echo::hilbert::{coherent_state, rho_to_chord, translate, DensityMatrix, Space};
use torus_echo::runner;
use torus_echo::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// One sweep row with the curve-level diagnostic used in failure reports:
/// the steepest single-step drop of `-ln` while above the fit threshold.
struct Row {
    control: f64,
    fit: Result<RateFit>,
    peak_step_rate: f64,
}

impl Row {
    fn new(control: f64, values: &[f64], floor: f64, opts: &FitOptions) -> Self {
        let threshold = opts.floor_factor * floor;
        let peak_step_rate = values
            .windows(2)
            .take_while(|w| w[0] > threshold)
            .map(|w| (w[0] / w[1].max(f64::MIN_POSITIVE)).ln())
            .fold(f64::NEG_INFINITY, f64::max);
        Row {
            control,
            fit: fit_decay_rate_with(values, floor, opts),
            peak_step_rate,
        }
    }

    fn gamma(&self) -> Option<f64> {
        self.fit.as_ref().ok().map(|f| f.gamma)
    }
}

fn describe(rows: &[Row]) -> String {
    rows.iter()
        .map(|r| match &r.fit {
            Ok(f) => format!("{:.3e}:{:.4}", r.control, f.gamma),
            Err(_) => format!("{:.3e}:fail(peak {:.2})", r.control, r.peak_step_rate),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn slope_of(rows: &[Row]) -> Option<f64> {
    let pts: Option<Vec<(f64, f64)>> = rows.iter().map(|r| r.gamma().map(|g| (r.control, g))).collect();
    pts.map(|p| loglog_slope(&p))
}

/// First contiguous run of fitted rows spanning at least a decade of the
/// control with every rate in `[lo, hi]`.
fn banded_decade(rows: &[Row], lo: f64, hi: f64) -> Option<(f64, f64)> {
    let inside = |r: &Row| r.gamma().is_some_and(|g| g >= lo && g <= hi);
    for i in 0..rows.len() {
        for j in i..rows.len() {
            if !inside(&rows[j]) {
                break;
            }
            if rows[j].control / rows[i].control >= 10.0 * (1.0 - 1e-9) {
                return Some((rows[i].control, rows[j].control));
            }
        }
    }
    None
}

fn decades(lo_exp: i32, hi_exp: i32, per_decade: i32) -> Vec<f64> {
    (lo_exp * per_decade..=hi_exp * per_decade)
        .map(|i| 10f64.powf(i as f64 / per_decade as f64))
        .collect()
}

const PURITY_N: usize = 800;
const PURITY_K: f64 = 0.01;
const PURITY_T_MAX: usize = runner::DEFAULT_PURITY_T_MAX;
const LDM_CUTOFF: usize = 100;

fn purity_rows(model: PurityModel, eps: &[f64]) -> Vec<Row> {
    let space = Space::new(PURITY_N).unwrap();
    let prop = Propagator::new(space, MapParams::new(2, 2, PURITY_K).unwrap()).unwrap();
    let rho0 = purity_initial_state(&space, 0).unwrap();
    let opts = FitOptions::default();
    eps.iter()
        .map(|&e| {
            let curve = purity_row_curve(&space, &prop, &model, e, &rho0, PURITY_T_MAX, &opts).unwrap();
            Row::new(e, &curve, 1.0 / PURITY_N as f64, &opts)
        })
        .collect()
}

fn echo_rows(n: usize, ab: i64, sigmas: &[f64], t_max: usize, n_states: usize) -> Vec<Row> {
    let space = Space::new(n).unwrap();
    let params = MapParams::new(ab, ab, 0.0002).unwrap();
    let opts = FitOptions::default();
    sigmas
        .iter()
        .map(|&s| {
            let pert = PerturbationSpec::from_sigma_over_hbar(&space, params.k, s);
            let curve = averaged_le(&space, &params, &pert, t_max, n_states, 0).unwrap();
            Row::new(s, &curve.values, 1.0 / n as f64, &opts)
        })
        .collect()
}

fn lambda2() -> f64 {
    lyapunov_closed_form(2, 2).unwrap()
}

fn c1_oracles() -> Outcome {
    let mut worst_channel = 0.0f64;
    let mut worst_prop = 0.0f64;
    for n in [4, 8, 16] {
        let space = Space::new(n).unwrap();
        let rho = random_density(n, 100 + n as u64);
        let kernels = [
            PurityModel::Gaussian.kernel(&space, 0.4).unwrap(),
            PurityModel::Depolarizing.kernel(&space, 0.3).unwrap(),
            PurityModel::Lorentz { cutoff: 20 }.kernel(&space, 0.2).unwrap(),
        ];
        for kernel in &kernels {
            let fast = apply_decoherence(&rho, &chord_multiplier(kernel).unwrap()).unwrap();
            let slow = kraus_dense(&rho.entries().to_vec(), kernel.weights(), n);
            worst_channel = worst_channel.max(max_abs(fast.entries(), &slow));
        }
        for (a, k) in [(2, 0.01), (2, 0.0002), (4, 0.3)] {
            let prop = Propagator::new(space, MapParams::new(a, a, k).unwrap()).unwrap();
            let u = cat_unitary(n, a, a, k);
            for j in 0..n {
                let e = torus_echo::hilbert::PureState::basis(&space, j);
                let col: Vec<C> = (0..n).map(|i| u[i * n + j]).collect();
                let out = prop.apply(&e, Direction::Forward).unwrap();
                worst_prop = worst_prop.max(max_abs(out.amplitudes(), &col));
            }
        }
    }
    outcome(
        worst_channel < 1e-10 && worst_prop < 1e-10,
        format!("channel vs Kraus {worst_channel:.2e}, propagator vs dense {worst_prop:.2e} (tol 1e-10)"),
    )
}

fn c2_invariants() -> Outcome {
    let mut worst = [0.0f64; 6];
    let labels = ["unitarity", "trace", "unitality", "purity increase", "parseval", "commutation"];
    for n in [8usize, 64, 256] {
        let space = Space::new(n).unwrap();
        let prop = Propagator::new(space, MapParams::new(2, 2, PURITY_K).unwrap()).unwrap();
        let a = random_state(n, 1);
        let b = random_state(n, 2);
        let ua = prop.apply(&a, Direction::Forward).unwrap();
        let ub = prop.apply(&b, Direction::Forward).unwrap();
        let back = prop.apply(&ua, Direction::Adjoint).unwrap();
        worst[0] = worst[0]
            .max((ua.inner(&ub) - a.inner(&b)).norm())
            .max(max_abs(back.amplitudes(), a.amplitudes()));

        let rho0 = DensityMatrix::from_pure(&coherent_state(&space, 0.31, 0.62).unwrap());
        let mixed = DensityMatrix::maximally_mixed(&space);
        let models = [
            PurityModel::Gaussian,
            PurityModel::Depolarizing,
            PurityModel::Lorentz { cutoff: LDM_CUTOFF },
            PurityModel::Mixture { weight: 0.5, cutoff: LDM_CUTOFF },
        ];
        for model in models {
            let kernel = model.kernel(&space, 0.05).unwrap();
            let mult = chord_multiplier(&kernel).unwrap();
            worst[1] = worst[1].max((apply_decoherence(&rho0, &mult).unwrap().trace() - 1.0).norm());
            worst[2] = worst[2].max(apply_decoherence(&mixed, &mult).unwrap().max_abs_diff(&mixed));
            let values = evolve_purity(&rho0, &prop, &Channel::from_kernel(&kernel).unwrap(), 20, None).unwrap();
            let rise = values.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
            worst[3] = worst[3].max(rise);
        }

        let rho = random_density(n, 3);
        worst[4] = worst[4].max((rho_to_chord(&rho).purity() - rho.purity()).abs());

        let ni = n as i64;
        for (q, p, qq, pp) in [(1, 2, 3, 5), (-7, 4, 11, -2), (n as i64 - 1, 3, 2, n as i64 + 5)] {
            let phase = C::from_polar(1.0, 2.0 * PI * (p * qq - q * pp).rem_euclid(ni) as f64 / n as f64);
            let lhs = translate(&translate(&a, qq, pp), q, p);
            let rhs: Vec<C> = translate(&translate(&a, q, p), qq, pp).amplitudes().iter().map(|x| x * phase).collect();
            worst[5] = worst[5].max(max_abs(lhs.amplitudes(), &rhs));
        }
    }
    let tol = [1e-12, 1e-12, 1e-12, 1e-10, 1e-12, 1e-12];
    let pass = worst.iter().zip(&tol).all(|(w, t)| w < t);
    let detail = labels
        .iter()
        .zip(&worst)
        .map(|(l, w)| format!("{l} {w:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(pass, detail)
}

fn c3_lyapunov() -> Outcome {
    let l2 = lambda2();
    let l4 = lyapunov_closed_form(4, 4).unwrap();
    let n2 = lyapunov_numeric(&MapParams::new(2, 2, 0.0002).unwrap(), 200_000, 7).unwrap();
    let n4 = lyapunov_numeric(&MapParams::new(4, 4, 0.0002).unwrap(), 200_000, 7).unwrap();
    let pass = (l2 - 1.76275).abs() < 1e-5
        && (l4 - 2.88727).abs() < 1e-5
        && (n2 - l2).abs() < 1e-2
        && (n4 - l4).abs() < 1e-2;
    outcome(pass, format!("closed {l2:.6} {l4:.6}, numeric {n2:.5} {n4:.5}"))
}

fn c4_fgr_echo() -> Outcome {
    let rows = echo_rows(1 << 12, 2, &log_spaced(0.05, 0.5, 8), 400, 64);
    let slope = slope_of(&rows);
    let pass = slope.is_some_and(|s| (s - 2.0).abs() <= 0.3);
    outcome(pass, format!("slope {slope:.4?} (2 +- 0.3); {}", describe(&rows)))
}

fn c5_echo_overshoot() -> Outcome {
    let lambda = lyapunov_closed_form(4, 4).unwrap();
    let rows = echo_rows(1 << 14, 4, &log_spaced(1.0, 10.0, 10), 30, 64);
    let max = rows.iter().filter_map(Row::gamma).fold(f64::NEG_INFINITY, f64::max);
    let last = rows.last().unwrap().gamma();
    let pass = max >= 1.2 * lambda && last.is_some_and(|g| (g / lambda - 1.0).abs() <= 0.25);
    outcome(
        pass,
        format!("max fitted {max:.4} (need >= {:.4}), largest-sigma {last:.4?} (lambda {lambda:.5}); {}", 1.2 * lambda, describe(&rows)),
    )
}

fn c6_gdm_plateau(rows: &[Row]) -> Outcome {
    let l = lambda2();
    let decade = banded_decade(rows, 0.9 * l, 1.1 * l);
    outcome(decade.is_some(), format!("plateau decade {decade:?} in [{:.4}, {:.4}]; {}", 0.9 * l, 1.1 * l, describe(rows)))
}

fn c7_gdm_small_eps() -> Outcome {
    let eps: Vec<f64> = log_spaced(0.5, 2.0, 5).iter().map(|x| x * 2.0 * PI / PURITY_N as f64).collect();
    let rows = purity_rows(PurityModel::Gaussian, &eps);
    let mut worst = 0.0f64;
    let mut all = true;
    let parts: Vec<String> = rows
        .iter()
        .map(|r| {
            let pred = gdm_rate_prediction(r.control, PURITY_N);
            match r.gamma() {
                Some(g) => {
                    worst = worst.max((g - pred).abs() / pred);
                    format!("{:.3e}:{g:.4}/{pred:.4}", r.control)
                }
                None => {
                    all = false;
                    format!("{:.3e}:fail(peak {:.2})/{pred:.4}", r.control, r.peak_step_rate)
                }
            }
        })
        .collect();
    outcome(all && worst < 0.15, format!("max rel dev {worst:.3} (< 0.15); fitted/predicted {}", parts.join(" ")))
}

fn c8_dc() -> Outcome {
    let linear = purity_rows(PurityModel::Depolarizing, &log_spaced(0.005, 0.05, 5));
    let mut worst = 0.0f64;
    let mut all = true;
    for r in &linear {
        match r.gamma() {
            Some(g) => worst = worst.max((g - 2.0 * r.control).abs() / (2.0 * r.control)),
            None => all = false,
        }
    }
    let wide = purity_rows(PurityModel::Depolarizing, &log_spaced(0.005, 0.9, 8));
    let gammas: Vec<Option<f64>> = wide.iter().map(Row::gamma).collect();
    let increasing = gammas.iter().all(Option::is_some)
        && gammas.windows(2).all(|w| w[1].unwrap() > w[0].unwrap());
    outcome(
        all && worst < 0.10 && increasing,
        format!(
            "linear max rel dev {worst:.4} (< 0.10); strictly increasing {increasing}; {}",
            describe(&wide)
        ),
    )
}

fn small_decade_slope(rows: &[Row]) -> Option<f64> {
    let small: Vec<&Row> = rows.iter().filter(|r| r.control <= 1e-4 * (1.0 + 1e-9)).collect();
    let pts: Option<Vec<(f64, f64)>> = small.iter().map(|r| r.gamma().map(|g| (r.control, g))).collect();
    pts.map(|p| loglog_slope(&p))
}

fn c9_ldm(rows: &[Row]) -> Outcome {
    let l = lambda2();
    let slope = small_decade_slope(rows);
    let first_above = rows.iter().position(|r| r.gamma().is_some_and(|g| g > l));
    let crosses = first_above.is_some_and(|i| rows[..i].iter().any(|r| r.gamma().is_some_and(|g| g < l)));
    let plateau = banded_decade(rows, 0.9 * l, 1.1 * l);
    let pass = slope.is_some_and(|s| (s - 2.0).abs() <= 0.3) && crosses && plateau.is_none();
    outcome(
        pass,
        format!("small-eps slope {slope:.4?} (2 +- 0.3); exceeds lambda {crosses}; plateau {plateau:?}; {}", describe(rows)),
    )
}

fn c10_mixture(rows: &[Row]) -> Outcome {
    let l = lambda2();
    let slope = small_decade_slope(rows);
    let near = |r: &Row| r.gamma().is_some_and(|g| (g / l - 1.0).abs() <= 0.15);
    let window = rows.windows(2).find(|w| near(&w[0]) && near(&w[1])).map(|w| (w[0].control, w[1].control));
    let pass = slope.is_some_and(|s| (s - 2.0).abs() <= 0.4) && window.is_some();
    outcome(
        pass,
        format!("small-eps slope {slope:.4?} (2 +- 0.4); lambda window {window:?}; {}", describe(rows)),
    )
}

fn run_twice(text: &str, mode: Mode) -> std::result::Result<(Vec<String>, usize), String> {
    let tmp = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let mut bodies = Vec::new();
    for i in 0..2 {
        let dir = tmp.path().join(i.to_string());
        let dir_override = format!("out_dir=\"{}\"", dir.display());
        let config = parse_config_with(text, Some(mode), &[dir_override]).map_err(|e| e.to_string())?;
        let manifest = runner::run(&config).map_err(|e| e.to_string())?;
        let mut files = Vec::new();
        for name in manifest.outputs.iter().filter(|f| f.ends_with(".csv")) {
            files.push((name.clone(), fs::read(dir.join(name)).map_err(|e| e.to_string())?));
        }
        bodies.push(files);
    }
    let names: Vec<String> = bodies[0].iter().map(|f| f.0.clone()).collect();
    let differing = bodies[0].iter().zip(&bodies[1]).filter(|(a, b)| a != b).count() + bodies[0].len().abs_diff(bodies[1].len());
    Ok((names, differing))
}

fn c11_determinism() -> Outcome {
    let echo = "N = 4096\na = 2\nb = 2\nk = 0.0002\nsigma_over_hbar = [0.05, 0.2, 0.5]\nt_max = 120\nn_states = 64\nseed = 0\n";
    let purity = "N = 128\na = 2\nb = 2\nk = 0.01\nepsilon = [0.001, 0.01, 0.1]\nseed = 0\n";
    let runs = [
        (echo, Mode::LeSweep, "le-sweep"),
        (echo, Mode::LeCurve, "le-curve"),
        (&*format!("{purity}model = \"gdm\"\n"), Mode::PuritySweep, "purity-sweep gdm"),
        (&*format!("{purity}model = \"dc\"\n"), Mode::PuritySweep, "purity-sweep dc"),
        (&*format!("{purity}model = \"mixture\"\n"), Mode::PuritySweep, "purity-sweep mixture"),
        (&*format!("{purity}model = \"ldm\"\nt_max = 40\n"), Mode::PurityCurve, "purity-curve ldm"),
    ];
    let mut files = 0;
    let mut differing = 0;
    let mut errors = Vec::new();
    for (text, mode, label) in runs {
        match run_twice(text, mode) {
            Ok((names, d)) => {
                files += names.len();
                differing += d;
            }
            Err(e) => errors.push(format!("{label}: {e}")),
        }
    }
    outcome(
        errors.is_empty() && differing == 0 && files > 0,
        format!("{files} CSV files compared, {differing} differ; errors {errors:?}"),
    )
}

fn main() {
    let mut failures = 0;
    let mut report = |id: u32, name: &str, limit: Option<f64>, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        let in_time = limit.is_none_or(|l| secs < l);
        let pass = out.pass && in_time;
        if !pass {
            failures += 1;
        }
        let limit = limit.map(|l| format!(" (limit {l:.0} s)")).unwrap_or_default();
        println!(
            "criterion {id:>2} {} {name}: {} [{secs:.1} s{limit}]",
            if pass { "PASS" } else { "FAIL" },
            out.detail
        );
    };

    report(1, "oracle equivalence", Some(10.0), &mut c1_oracles);
    report(2, "invariant suite", Some(60.0), &mut c2_invariants);
    report(3, "Lyapunov values", Some(10.0), &mut c3_lyapunov);
    report(4, "quadratic echo regime", None, &mut c4_fgr_echo);
    report(5, "echo overshoot and return", None, &mut c5_echo_overshoot);

    report(6, "GDM Lyapunov plateau", None, &mut || c6_gdm_plateau(&purity_rows(PurityModel::Gaussian, &decades(-3, 0, 4))));
    report(7, "GDM small-eps law", None, &mut c7_gdm_small_eps);
    report(8, "DC linear law, no plateau", None, &mut c8_dc);
    report(9, "LDM quadratic law, unbounded growth", None, &mut || {
        c9_ldm(&purity_rows(PurityModel::Lorentz { cutoff: LDM_CUTOFF }, &decades(-5, -1, 4)))
    });
    report(10, "mixture shows both regimes", None, &mut || {
        c10_mixture(&purity_rows(PurityModel::Mixture { weight: 0.5, cutoff: LDM_CUTOFF }, &decades(-5, -1, 4)))
    });
    report(11, "determinism", None, &mut c11_determinism);

    println!("acceptance: {} of 11 criteria passed", 11 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
