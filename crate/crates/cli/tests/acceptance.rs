//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Criteria listed in `KNOWN_FAILURES` fail for reasons documented in the
//! README; the run only errors if one of the others fails or a known failure
//! starts passing.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use qnd_cli::config::ScenarioConfig;
use qnd_cli::run_in;
use qnd_core::oracle::{
    free_propagator_magnitude, momentum_slice_check, oracle_log_probability, oscillator_propagator_magnitude,
    richardson_log_magnitude, LatticeHamiltonian, SliceCoupling,
};
use qnd_core::propagator::{log_probabilities_at, spread, uniform_probability_check, zero_resolution_limit};
use qnd_core::qd::sql_contrast_report;
use qnd_core::qnd::{analytic_f, heisenberg_components, integrate_riccati_oracle, qnd_commutator};
use qnd_core::{
    build_qnd_variable, make_params, MeasurementWindow, OutputRecord, ParamOverrides, PhysicalParams,
    QndVariable, RecordFamily, SampledSeries, SigmaChoice, UnitRegime,
};

const KNOWN_FAILURES: [u32; 2] = [3, 5];

type Criterion = (u32, &'static str, Duration, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn natural() -> PhysicalParams {
    make_params(UnitRegime::Natural, &ParamOverrides::default()).unwrap()
}

fn cosh_variable(w: &MeasurementWindow, p: &PhysicalParams) -> QndVariable {
    build_qnd_variable(SigmaChoice::CoshDefault, w, p).unwrap()
}

fn records(seed: u64, count: usize, w: &MeasurementWindow) -> Vec<OutputRecord> {
    RecordFamily::new(seed, 4, 1.0).unwrap().generate(count, w)
}

fn riccati_closure() -> Verdict {
    let p = natural();
    let w = MeasurementWindow::new(0.0, 3.0 / p.omega_rate(), 1.0, 3).unwrap();
    let steps = 10_000;
    let sol = integrate_riccati_oracle(0.0, &w, &p, steps).unwrap();
    let max_rel = sol
        .iter()
        .skip(1)
        .map(|(t, f)| {
            let e = analytic_f(t, 0.0, &p);
            (f - e).abs() / e.abs()
        })
        .fold(0.0, f64::max);
    Verdict {
        pass: max_rel <= 1e-8 && sol.values[0] == 0.0,
        detail: format!("max rel err {max_rel:.3e} <= 1e-8 over {steps} steps"),
    }
}

fn qnd_property() -> Verdict {
    let p = natural();
    let w = MeasurementWindow::new(0.0, 1.0, 1.0, 1001).unwrap();
    let tabulated = SampledSeries::from_fn(w.full_grid(), |t| 2.0 + (3.0 * t).sin());
    let mut worst_pair = 0.0_f64;
    let mut worst_point = 0.0_f64;
    for choice in [SigmaChoice::CoshDefault, SigmaChoice::UnitConstant, SigmaChoice::Tabulated(tabulated)] {
        let q = build_qnd_variable(choice, &w, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..100 {
            let (t1, t2) = (rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0));
            let c = qnd_commutator(t1, t2, &q, 0.0, &p).norm();
            let (_, v1) = heisenberg_components(&q, t1, 0.0, &p);
            let (_, v2) = heisenberg_components(&q, t2, 0.0, &p);
            worst_pair = worst_pair.max(c / (1e-12 * p.hbar() * (v1 * v2).abs()));
        }
        for t in w.full_grid().nodes() {
            let (u, v) = heisenberg_components(&q, t, 0.0, &p);
            worst_point = worst_point.max(u.abs() / (1e-12 * v.abs()));
        }
    }
    Verdict {
        pass: worst_pair <= 1.0 && worst_point <= 1.0,
        detail: format!("worst pair {worst_pair:.3e}, worst point {worst_point:.3e} of bound (1e-12)"),
    }
}

fn uniform_probability() -> Verdict {
    let p = natural();
    let w = MeasurementWindow::new(0.0, 1.0, 1.0, 2001).unwrap();
    let q = cosh_variable(&w, &p);
    let recs = records(42, 100, &w);
    let rep = uniform_probability_check(&p, &w, &q, &recs).unwrap();
    let worst_term = rep.max_abs_term.iter().copied().fold(0.0, f64::max);
    let wc = w.with_resolution_product(p.critical_resolution()).unwrap();
    let lattice: Vec<f64> = recs
        .iter()
        .map(|a| oracle_log_probability(a, &q, &p, &wc, 4096, (0.0, 0.0)).unwrap())
        .collect();
    let lattice_spread = spread(&lattice);
    let closed = rep.max_abs_log_p <= 1e-10 && worst_term <= 1e-10 && rep.max_abs_two_re_log_u <= 1e-10;
    Verdict {
        pass: closed && lattice_spread <= 1e-6,
        detail: format!(
            "closed form |log P| {:.1e}, worst term {:.1e}, |2 Re log U| {:.1e} (<= 1e-10); lattice spread {:.3e} (<= 1e-6)",
            rep.max_abs_log_p, worst_term, rep.max_abs_two_re_log_u, lattice_spread
        ),
    }
}

fn sharpness() -> Verdict {
    let p = natural();
    let w = MeasurementWindow::new(0.0, 1.0, 1.0, 2001).unwrap();
    let q = cosh_variable(&w, &p);
    let recs = records(42, 100, &w);
    let spread_at = |f: f64| {
        let v: Vec<f64> = log_probabilities_at(&recs, &q, &p, &w, f * p.critical_resolution())
            .unwrap()
            .into_iter()
            .map(|(lp, _)| lp.total.re)
            .collect();
        spread(&v)
    };
    let (lo, hi) = (spread_at(0.9), spread_at(1.1));
    Verdict {
        pass: lo > 1e-3 && hi > 1e-3,
        detail: format!("spread at -10% {lo:.3e}, at +10% {hi:.3e} (> 1e-3)"),
    }
}

fn zero_resolution() -> Verdict {
    let p = natural();
    let w = MeasurementWindow::new(0.0, 1.0, 1.0, 4001).unwrap();
    let q = cosh_variable(&w, &p);
    let recs = records(7, 5, &w);
    let deltas: Vec<f64> = (0..7).map(|k| 10f64.powf(-0.5 * k as f64)).collect();
    let base = zero_resolution_limit(&recs, &q, &p, &w, &deltas).unwrap();
    let hbar2 = zero_resolution_limit(&recs, &q, &p.with_hbar(2.0).unwrap(), &w, &deltas).unwrap();
    let mass2 = zero_resolution_limit(&recs, &q, &p.with_mass(2.0).unwrap(), &w, &deltas).unwrap();
    let hbar_change = ((hbar2.mean_c - base.mean_c) / base.mean_c).abs();
    let mass_dev = (mass2.mean_c / base.mean_c / 4.0 - 1.0).abs();
    Verdict {
        pass: base.relative_spread_c <= 0.01 && hbar_change < 1e-3 && mass_dev <= 0.05,
        detail: format!(
            "record spread of C {:.3e} (<= 1e-2), hbar change {hbar_change:.3e} (< 1e-3), m^2 deviation {mass_dev:.3e} (<= 5e-2)",
            base.relative_spread_c
        ),
    }
}

fn oracle_anchors() -> Verdict {
    let p = natural();
    let free = richardson_log_magnitude(&LatticeHamiltonian::free(&p), SliceCoupling::none, 1.0, (0.3, -0.4), 4096).unwrap();
    let free_err = (free.extrapolated - free_propagator_magnitude(1.0, 1.0, 1.0).ln()).exp_m1().abs();
    let (omega, t) = (2.0, 1.0);
    let osc = richardson_log_magnitude(
        &LatticeHamiltonian::free(&p).with_omega_sq(omega * omega),
        SliceCoupling::none,
        t,
        (0.0, 0.0),
        4096,
    )
    .unwrap();
    let osc_err = (osc.extrapolated - oscillator_propagator_magnitude(1.0, 1.0, omega, t).ln()).exp_m1().abs();
    Verdict {
        pass: free_err <= 1e-6 && osc_err <= 1e-6,
        detail: format!("free {free_err:.3e}, oscillator {osc_err:.3e} (<= 1e-6)"),
    }
}

fn momentum_slices() -> Verdict {
    let p = natural();
    let w = MeasurementWindow::new(0.0, 1.0, 3.0, 101).unwrap();
    let q = cosh_variable(&w, &p);
    let rep = momentum_slice_check(&p, &w, &q, 64, 50, 99).unwrap();
    Verdict {
        pass: rep.trials == 50 && rep.max_rel_err <= 1e-6,
        detail: format!("max rel err {:.3e} over {} slices (<= 1e-6)", rep.max_rel_err, rep.trials),
    }
}

fn qnd_qd_contrast() -> Verdict {
    let p = natural();
    let w = MeasurementWindow::new(0.0, 1.0, 1.0, 2001).unwrap();
    let q = cosh_variable(&w, &p);
    let recs = records(4, 6, &w);
    let critical = p.critical_resolution() / w.duration();
    let deltas = [1e9 * critical, 10.0 * critical, critical, 0.1 * critical];
    let rep = sql_contrast_report(&p, &w, &q, &recs, &deltas, 1024, (0.0, 0.0)).unwrap();
    let crit = rep.row_near(1.0).unwrap();
    let far = rep.row_near(1e9).unwrap();
    let far_max = far.qnd_spread_closed_form.max(far.qd_spread);
    Verdict {
        pass: crit.qnd_spread_closed_form <= 1e-6 && crit.qd_spread > 1e-3 && far_max < 1e-6,
        detail: format!(
            "QND {:.1e} (<= 1e-6), QD {:.3e} (> 1e-3), unmonitored {:.1e}; lattice QND {:.3e} reported",
            crit.qnd_spread_closed_form, crit.qd_spread, far_max, crit.qnd_spread_lattice
        ),
    }
}

fn shipped_config(name: &str) -> ScenarioConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    ScenarioConfig::from_json(&fs::read_to_string(path).unwrap()).unwrap()
}

fn residual_reporting() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let s = run_in(&shipped_config("probability.json"), tmp.path()).unwrap();
    let disk: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    let own = disk["residuals"]["consistency"].as_f64();
    let grid = disk["residuals"]["consistency_grid_max_abs"].as_f64();
    let rows = disk["details"]["residual_grid"].as_array().map_or(0, Vec::len);
    Verdict {
        pass: own.is_some_and(f64::is_finite) && grid.is_some_and(f64::is_finite) && rows > 0 && s.pass,
        detail: format!("residual {:.3e}, grid max {:.3e} over {rows} points persisted", own.unwrap_or(f64::NAN), grid.unwrap_or(f64::NAN)),
    }
}

fn strip_timestamp(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with("\"generated_at_unix\""))
        .collect::<Vec<_>>()
        .join("\n")
}

fn reproducibility() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut names: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let mut mismatched = Vec::new();
    for name in &names {
        let texts: Vec<String> = ["a", "b"]
            .iter()
            .map(|tag| {
                let out = tmp.path().join(format!("{name}-{tag}"));
                Command::new(env!("CARGO_BIN_EXE_qndsim"))
                    .arg("run")
                    .arg(dir.join(name))
                    .env("QNDSIM_OUTPUT_DIR", &out)
                    .output()
                    .unwrap();
                strip_timestamp(&fs::read_to_string(out.join("summary.json")).unwrap_or_default())
            })
            .collect();
        if texts[0].is_empty() || texts[0] != texts[1] {
            mismatched.push(name.clone());
        }
    }
    Verdict {
        pass: mismatched.is_empty(),
        detail: format!("{} scenarios rerun, mismatched: {:?}", names.len(), mismatched),
    }
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "Riccati closure", Duration::from_secs(1), riccati_closure),
        (2, "QND property", Duration::from_secs(1), qnd_property),
        (3, "uniform probability at TΔa² = 2mℏ", Duration::from_secs(60), uniform_probability),
        (4, "sharpness", Duration::from_secs(10), sharpness),
        (5, "zero-resolution limit", Duration::from_secs(60), zero_resolution),
        (6, "oracle anchors", Duration::from_secs(10), oracle_anchors),
        (7, "momentum-slice check", Duration::from_secs(10), momentum_slices),
        (8, "QND/QD contrast", Duration::from_secs(60), qnd_qd_contrast),
        (9, "consistency residual reporting", Duration::from_secs(60), residual_reporting),
        (10, "reproducibility", Duration::from_secs(120), reproducibility),
    ];
    let mut unexpected = Vec::new();
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let v = check();
        let elapsed = start.elapsed();
        let pass = v.pass && elapsed <= budget;
        let known = KNOWN_FAILURES.contains(&id);
        let tag = if pass { "PASS" } else { "FAIL" };
        let note = if known && !pass { " [known]" } else { "" };
        println!(
            "{tag} criterion {id:>2} {name}: {} [{:.2}s of {}s]{note}",
            v.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        if pass == known {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected outcome for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
