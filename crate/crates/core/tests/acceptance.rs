//! Acceptance checks, one line per criterion.
//!
//! Runs with its own `main` so every criterion reports even when an earlier one
//! fails. A criterion listed in `EXPECTED_FAILURES` must fail; if it starts
//! passing the run fails too, so the list cannot hide a regression in either direction.

mod common;

use std::time::{Duration, Instant};

use equidissect::adpoly::{assemble, map_to_vars, minimize_ssr, structural_checks, OptimizeConfig};
use equidissect::coloring::certify;
use equidissect::constructions::{
    add_two, build_trapezoid_cut, predicted_bound, prouhet_check, search_signs, slice_family,
    solve_epsilon, tarry_escott, thue_morse, thue_morse_range, SearchMode, SignSequence,
    TrapezoidCutSpec, DEFAULT_SEARCH_BUDGET, DEFAULT_TARRY_BUDGET,
};
use equidissect::dissection::{
    check_legality, metrics, metrics_of_areas, sum_signed_areas, validate_abstract,
    AbstractDissection, FramedMap,
};
use equidissect::fixtures;
use equidissect::gapbound::{dissection_lower_bound, dmm_exponent, exponent_f64, DmmInput, LowerBoundOptions};
use equidissect::numerics::{int, BigFloat, Rational, Scalar, TwoAdicValue};
use num_traits::{ToPrimitive, Zero};
use rand::Rng;

/// Criteria that cannot hold as stated, with the reason.
const EXPECTED_FAILURES: &[(&str, &str)] = &[(
    "10b",
    "X(n+2)/X(n) tends to 81 times a bracket ratio, not 9: k = 2n+4 grows by 4 per step and the leading factor is 3^(k-1)",
)];

type Check = Result<String, String>;

fn rel(got: f64, want: f64) -> f64 {
    (got / want - 1.0).abs()
}

fn within(label: &str, got: f64, want: f64, tol: f64) -> Result<String, String> {
    let r = rel(got, want);
    let text = format!("{label}={got:.6e} (want {want:.5e}, rel {r:.1e})");
    if r <= tol {
        Ok(text)
    } else {
        Err(text)
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn c1_thue_morse() -> Check {
    let cases = [
        (9, 3.2719e-4),
        (17, 6.7688e-7),
        (33, 2.1229e-10),
        (65, 9.8506e-15),
        (129, 6.6218e-20),
    ];
    let mut notes = Vec::new();
    for (n, want) in cases {
        let (r, dt) = timed(|| thue_morse_range(n, None));
        let r = r.map_err(|e| format!("n={n}: {e}"))?;
        notes.push(within(&format!("R_C({n})"), r.to_f64(), want, 1e-4)?);
        if dt > Duration::from_secs(5) {
            return Err(format!("n={n} took {dt:?}"));
        }
    }
    let (r, dt) = timed(|| thue_morse_range(1025, None));
    let r = r.map_err(|e| format!("n=1025: {e}"))?;
    notes.push(within("R_C(1025)", r.to_f64(), 1.5875e-40, 1e-4)?);
    if dt > Duration::from_secs(60) {
        return Err(format!("n=1025 took {dt:?}"));
    }
    notes.push(format!("n=1025 in {:.1}s", dt.as_secs_f64()));
    Ok(notes.join("; "))
}

fn c2_predicted() -> Check {
    let cases = [
        (5, 85.333),
        (7, 60.952),
        (9, 2.0480),
        (17, 0.028682),
        (33, 1.3313e-4),
        (65, 1.8172e-7),
    ];
    for (n, want) in cases {
        within(&format!("R*({n})"), predicted_bound(n).value_f64(), want, 1e-3)?;
    }
    let three = predicted_bound(3);
    if three.valid || rel(three.value_f64(), -32.0) > 1e-3 {
        return Err(format!("R*(3) = {} valid={}", three.value_f64(), three.valid));
    }
    Ok("six values within 1e-3, R*(3) = -32 flagged invalid".into())
}

fn c3_search() -> Check {
    let cases = [
        (3, 0.16667),
        (5, 0.01250),
        (7, 1.0248e-4),
        (9, 1.6360e-4),
        (11, 4.1201e-6),
        (13, 5.9928e-6),
    ];
    let start = Instant::now();
    for (n, want) in cases {
        let out = search_signs(n, &SearchMode::Exhaustive { budget: DEFAULT_SEARCH_BUDGET }, 128)
            .map_err(|e| format!("n={n}: {e}"))?;
        let best = out.ranked.first().ok_or(format!("n={n}: nothing ranked"))?;
        let eps = best.epsilon.abs();
        within(&format!("|eps|({n})"), eps.to_f64(), want, 1e-3)?;
        let factor = ((n - 1) as f64 / n as f64).sqrt();
        if rel(best.rms.to_f64(), eps.to_f64() * factor) > 1e-12 {
            return Err(format!("n={n}: rms {} vs |eps| sqrt((n-1)/n)", best.rms.to_f64()));
        }
        if n == 9 && best.signs.canonical() != thue_morse(8).canonical() {
            return Err(format!("n=9 winner {} is not Thue-Morse", best.signs));
        }
    }
    let dt = start.elapsed();
    if dt > Duration::from_secs(120) {
        return Err(format!("took {dt:?}"));
    }
    Ok(format!("n=3..13 in {:.1}s, n=9 winner is Thue-Morse", dt.as_secs_f64()))
}

fn c4_slices() -> Check {
    let prec = 128;
    let scaled = |n: usize| -> Result<f64, String> {
        let (d, m) = slice_family(n, prec).map_err(|e| format!("n={n}: {e}"))?;
        check_legality(&d, &m).map_err(|e| format!("n={n}: {e}"))?;
        let r = metrics(&d, &m, prec).range.to_f64();
        Ok(r * (n as f64).powi(5))
    };
    let base = scaled(9)?;
    let mut worst: f64 = 0.0;
    for n in (5..=101).step_by(4) {
        let v = scaled(n)?;
        worst = worst.max(v / base);
        if v > 2.0 * base {
            return Err(format!("n={n}: range n^5 = {v:.4e} exceeds twice {base:.4e}"));
        }
    }
    Ok(format!("25 sizes legal, max range n^5 ratio to n=9 is {worst:.3}"))
}

fn c5_optimizer() -> Check {
    let cfg = OptimizeConfig {
        restarts: 64,
        ..Default::default()
    };
    let (d3, _) = fixtures::three_triangle();
    let r3 = minimize_ssr(&d3, &cfg).map_err(|e| e.to_string())?;
    let a = r3.metrics.rms.to_f64();
    let (d5, _) = fixtures::five_triangle();
    let r5 = minimize_ssr(&d5, &cfg).map_err(|e| e.to_string())?;
    let b = r5.metrics.rms.to_f64();
    check_legality(&d3, &r3.map).map_err(|e| e.to_string())?;
    check_legality(&d5, &r5.map).map_err(|e| e.to_string())?;
    let text = format!("three-triangle rms {a:.7}, five-triangle rms {b:.8}");
    if a <= 0.1179 && b <= 0.0103 {
        Ok(text)
    } else {
        Err(text)
    }
}

fn c6_monsky() -> Check {
    let start = Instant::now();
    let cases: Vec<(&str, (AbstractDissection, FramedMap<Rational>))> = vec![
        ("three_triangle", fixtures::three_triangle()),
        ("long_side_nodes", fixtures::long_side_nodes()),
        ("octagon", fixtures::octagon()),
    ];
    for (name, (d, m)) in &cases {
        let c = certify(d, m).map_err(|e| format!("{name}: {e}"))?;
        if c.rb_boundary_edge_count % 2 != 1 {
            return Err(format!("{name}: rb count {}", c.rb_boundary_edge_count));
        }
        let face = c.colorful_face.ok_or(format!("{name}: no colorful face"))?;
        // |area|_2 >= 2 means valuation <= -1.
        if face.area_value < TwoAdicValue::Pow2(-1) {
            return Err(format!("{name}: colorful area value {}", face.area_value));
        }
    }
    let dt = start.elapsed();
    if dt > Duration::from_secs(1) {
        return Err(format!("took {dt:?}"));
    }
    Ok(format!("three fixtures certified in {:.0} ms", dt.as_secs_f64() * 1e3))
}

fn c7_prouhet_tarry() -> Check {
    let start = Instant::now();
    let mut rng = common::rng(7);
    for trial in 0..100 {
        let k = rng.gen_range(1..=10u32);
        let b = common::small_rational(&mut rng, -5, 5);
        let x0 = common::small_rational(&mut rng, -5, 5);
        let deg = rng.gen_range(0..k as usize);
        let coeffs: Vec<Rational> = (0..=deg).map(|_| common::small_rational(&mut rng, -9, 9)).collect();
        let v = prouhet_check(k, &b, &x0, &coeffs);
        if !v.is_zero() {
            return Err(format!("trial {trial}: k={k} deg={deg} gives {v}"));
        }
    }
    let sols = tarry_escott(3, 16, DEFAULT_TARRY_BUDGET).map_err(|e| e.to_string())?;
    let want: Vec<u32> = vec![1, 4, 6, 7, 10, 11, 13, 16];
    if sols.len() != 1 || sols[0].length != 16 || sols[0].first != want {
        return Err(format!("tarry solutions {sols:?}"));
    }
    let dt = start.elapsed();
    if dt > Duration::from_secs(30) {
        return Err(format!("took {dt:?}"));
    }
    Ok(format!("100 prouhet instances exact, single Tarry split at 16 ({:.1}s)", dt.as_secs_f64()))
}

fn c8_structural() -> Check {
    let mut names = Vec::new();
    for (name, d, _) in fixtures::all_rational() {
        let (dx, dy) = common::nonnegative_shift(&d);
        let d = common::translated(&d, &dx, &dy);
        let p = assemble(&d).map_err(|e| format!("{name}: {e}"))?;
        let r = structural_checks(&p, &d, common::coordinate_scale(&d));
        if !r.passed() {
            return Err(format!("{name}: {:?}", r.failures));
        }
        names.push(name);
    }
    Ok(format!("passed on {}", names.join(", ")))
}

/// Every dissection the construction module produces at small and medium sizes.
fn constructed() -> Vec<(String, AbstractDissection, FramedMap<BigFloat>)> {
    let mut out = Vec::new();
    for n in [3usize, 5, 9, 17, 33] {
        let spec = TrapezoidCutSpec::new(thue_morse(n - 1), 128).unwrap();
        let s = solve_epsilon(&spec).unwrap();
        let (d, m) = build_trapezoid_cut(&spec, &s).unwrap();
        out.push((format!("thue-morse {n}"), d, m));
    }
    for signs in ["+-+--+", "++--+-+-+-", "+--++--+-++-"] {
        let seq = SignSequence::parse(signs).unwrap();
        let spec = TrapezoidCutSpec::new(seq, 128).unwrap();
        let s = solve_epsilon(&spec).unwrap();
        let (d, m) = build_trapezoid_cut(&spec, &s).unwrap();
        out.push((format!("signs {signs}"), d, m));
    }
    for n in [5usize, 9, 13, 17] {
        let (d, m) = slice_family(n, 128).unwrap();
        out.push((format!("slices {n}"), d, m));
    }
    let (d, m) = slice_family(9, 128).unwrap();
    let (d, m) = add_two(&d, &m).unwrap();
    let (d, m) = add_two(&d, &m).unwrap();
    out.push(("slices 9 + 4".into(), d, m));
    out
}

fn c9_invariants() -> Check {
    let mut rng = common::rng(9);
    // Sandwich: range / (2 sqrt n) <= rms <= range.
    for _ in 0..1000 {
        let n = rng.gen_range(3..=99usize);
        let areas: Vec<Rational> = (0..n).map(|_| common::small_rational(&mut rng, 0, 3)).collect();
        let total: Rational = areas.iter().cloned().sum();
        let m = metrics_of_areas(&areas, &total, 128);
        let (range, rms) = (m.range.as_f64(), m.rms.to_f64());
        if rms > range * (1.0 + 1e-12) || range / (2.0 * (n as f64).sqrt()) > rms * (1.0 + 1e-12) {
            return Err(format!("sandwich fails: n={n} range={range} rms={rms}"));
        }
    }
    // Exact area invariance on random constrained maps.
    let mut maps = 0;
    for (name, d, _) in fixtures::all_rational() {
        for _ in 0..100 {
            let m = common::random_constrained_map(&d, &mut rng).ok_or(format!("{name}: cyclic sides"))?;
            let s = sum_signed_areas(&d, &m);
            if s != d.area {
                return Err(format!("{name}: signed areas sum to {s}, not {}", d.area));
            }
            maps += 1;
        }
    }
    // Count identity.
    let built = constructed();
    for (name, d, m) in &built {
        validate_abstract(d).map_err(|e| format!("{name}: {e}"))?;
        check_legality(d, m).map_err(|e| format!("{name}: {e}"))?;
        if 2 * d.node_count != d.n() + d.k() + d.ell() + 2 {
            return Err(format!("{name}: count identity fails"));
        }
    }
    // Gradient against central differences.
    let prec = 128;
    let h = BigFloat::from_f64(1e-12, prec);
    let two_h = BigFloat::from_f64(2e-12, prec);
    let mut worst: f64 = 0.0;
    for (name, d, m) in fixtures::all_rational() {
        let p = assemble(&d).map_err(|e| format!("{name}: {e}"))?;
        let base: Vec<BigFloat> = map_to_vars(&m)
            .iter()
            .map(|v| v.to_bigfloat(prec) + BigFloat::from_f64(rng.gen_range(-0.05..0.05), prec))
            .collect();
        let g = p.gradient(&base);
        for i in 0..base.len() {
            let mut up = base.clone();
            let mut down = base.clone();
            up[i] = up[i].clone() + h.clone();
            down[i] = down[i].clone() - h.clone();
            let fd = (p.eval(&up) - p.eval(&down)).checked_div(&two_h).unwrap();
            let gi = g[i].to_f64();
            let err = (g[i].clone() - fd.clone()).abs().to_f64();
            let scale = gi.abs().max(1e-9);
            worst = worst.max(err / scale);
            if err > 1e-6 * scale {
                return Err(format!("{name}: d/dv{i} analytic {gi:e} vs difference {:e}", fd.to_f64()));
            }
        }
    }
    Ok(format!(
        "sandwich x1000, area invariance on {maps} maps, count identity on {} constructions, gradient rel err <= {worst:.1e}",
        built.len()
    ))
}

fn c10a_gap() -> Check {
    let hand = [((4, 1, 0), 78), ((4, 2, 0), 558), ((1, 1, 0), 6)];
    for ((d, k, tau), want) in hand {
        let got = dmm_exponent(DmmInput::new(d, k, tau).unwrap()).exponent;
        if got != int(want) {
            return Err(format!("dmm({d},{k},{tau}) = {got}, want {want}"));
        }
    }
    let square = fixtures::three_triangle().0.polygon;
    let mut checked = 0;
    for (name, d, m) in constructed() {
        let n = d.n();
        if !(3..=15).contains(&n) {
            continue;
        }
        let x = dissection_lower_bound(&square, n, &LowerBoundOptions::default())
            .map_err(|e| format!("{name}: {e}"))?;
        // range >= 2^-X  <=>  log2(range) >= -X
        let range = metrics(&d, &m, 128).range;
        let lg = range.log2().map_err(|e| e.to_string())?.to_f64();
        if lg < -exponent_f64(&x) {
            return Err(format!("{name}: log2 range {lg} below -{}", exponent_f64(&x)));
        }
        checked += 1;
    }
    Ok(format!("hand values match, {checked} constructions exceed 2^-X"))
}

fn c10b_growth() -> Check {
    let opts = LowerBoundOptions::default();
    let square = fixtures::three_triangle().0.polygon;
    let x = |n: usize| dissection_lower_bound(&square, n, &opts).map(|b| b.exponent.to_f64().unwrap());
    let mut ratios = Vec::new();
    for n in (3..=13).step_by(2) {
        let a = x(n).map_err(|e| e.to_string())?;
        let b = x(n + 2).map_err(|e| e.to_string())?;
        ratios.push((n, b / a));
    }
    let last = ratios.last().unwrap().1;
    let text = ratios
        .iter()
        .map(|(n, r)| format!("X({})/X({n})={r:.2}", n + 2))
        .collect::<Vec<_>>()
        .join(", ");
    if rel(last, 9.0) <= 0.05 {
        Ok(text)
    } else {
        Err(text)
    }
}

fn main() {
    let criteria: Vec<(&str, &str, fn() -> Check)> = vec![
        ("1", "Thue-Morse construction ranges and timings", c1_thue_morse),
        ("2", "predicted-bound evaluator", c2_predicted),
        ("3", "exhaustive sign search", c3_search),
        ("4", "slice family legality and n^5 scaling", c4_slices),
        ("5", "optimizer on the three- and five-triangle types", c5_optimizer),
        ("6", "Monsky certificates on rational fixtures", c6_monsky),
        ("7", "Prouhet identity and Tarry-Escott search", c7_prouhet_tarry),
        ("8", "structural polynomial checks", c8_structural),
        ("9", "invariant suites", c9_invariants),
        ("10a", "gap bound hand values and consistency", c10a_gap),
        ("10b", "gap bound growth ratio toward 9", c10b_growth),
    ];
    let mut unexpected = Vec::new();
    for (id, title, f) in criteria {
        let (result, dt) = timed(f);
        let expected = EXPECTED_FAILURES.iter().find(|(e, _)| *e == id);
        let secs = dt.as_secs_f64();
        match (&result, expected) {
            (Ok(note), None) => println!("PASS criterion {id}: {title} [{secs:.1}s] {note}"),
            (Err(note), None) => {
                println!("FAIL criterion {id}: {title} [{secs:.1}s] {note}");
                unexpected.push(id);
            }
            (Err(note), Some((_, why))) => {
                println!("FAIL criterion {id}: {title} [{secs:.1}s] {note} (expected: {why})")
            }
            (Ok(note), Some(_)) => {
                println!("PASS criterion {id}: {title} [{secs:.1}s] {note} (listed as expected failure)");
                unexpected.push(id);
            }
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected outcome for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
