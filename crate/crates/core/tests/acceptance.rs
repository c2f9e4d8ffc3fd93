//! Acceptance criteria, one line each. Run with
//! `cargo test -p stabrank --test acceptance`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stabrank::chains;
use stabrank::codes::{self, LinearCode};
use stabrank::decomp::{self, Decomposition};
use stabrank::denseoracle::{self as dense, Qubit};
use stabrank::simulator::{self, CircuitGate, QuantumCircuit, SimOptions, Strategy};
use stabrank::spectrum::{self, PauliOperator};
use stabrank::{F2Matrix, F2Vector, Scalar};

struct Outcome {
    pass: bool,
    details: String,
}

/// Accumulates sub-checks of one criterion.
#[derive(Default)]
struct Checks {
    failed: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failed.push(what.into());
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    fn finish(self, elapsed: Duration, budget: Duration) -> Outcome {
        let mut failed = self.failed;
        if elapsed > budget {
            failed.push(format!("runtime {:.1?} over budget {:?}", elapsed, budget));
        }
        let mut details = self.notes.join("; ");
        if !failed.is_empty() {
            details = format!("{details}; failed: {}", failed.join("; "));
        }
        Outcome {
            pass: failed.is_empty(),
            details: format!("{details} [{elapsed:.2?}]"),
        }
    }
}

fn fidelity(d: &Decomposition, want: &[Complex64]) -> f64 {
    d.fidelity_vs_dense(want).expect("dense comparison")
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut c = Checks::default();
    let mut worst: f64 = 1.0;
    let mut fixed: Vec<(&str, Decomposition, Vec<Complex64>)> = vec![
        ("t2", decomp::t2(), dense::power(Qubit::T, 2)),
        ("cat2", decomp::cat2(), dense::cat_t(2)),
        ("cat4", decomp::cat4(), dense::cat_t(4)),
        ("cat6", decomp::cat6(), dense::cat_t(6)),
        ("cat6_F", decomp::cat6_f(), dense::cat_f(6)),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..10 {
        let th = rng.gen_range(0.0..2.0 * PI);
        fixed.push(("cat2_R", decomp::cat2_r(th), dense::cat_r(th, 2)));
        fixed.push(("cat6_R", decomp::cat6_r(th), dense::cat_r(th, 6)));
    }
    for (name, d, want) in &fixed {
        let f = fidelity(d, want);
        worst = worst.min(f);
        c.check(f >= 1.0 - 1e-10, format!("{name} fidelity {f}"));
    }
    c.note(format!("{} builders, min fidelity {worst:.15}", fixed.len()));
    c.finish(start.elapsed(), Duration::from_secs(1))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut c = Checks::default();
    let t_known = [2usize, 3, 4, 6, 6, 12, 12];
    let cat_known = [1usize, 2, 2, 3, 3, 6, 6];
    let mut ts = Vec::new();
    let mut cats = Vec::new();
    for (i, m) in (2..=8).enumerate() {
        let t = chains::t_power(m).unwrap();
        let cat = chains::cat_power(m).unwrap();
        ts.push(t.len());
        cats.push(cat.len());
        c.check(t.len() <= t_known[i], format!("T^{m}: {} terms", t.len()));
        c.check(cat.len() <= cat_known[i], format!("cat_{m}: {} terms", cat.len()));
        let ft = fidelity(&t, &dense::power(Qubit::T, m));
        let fc = fidelity(&cat, &dense::cat_t(m));
        c.check((ft - 1.0).abs() <= 1e-10, format!("T^{m} fidelity {ft}"));
        c.check((fc - 1.0).abs() <= 1e-10, format!("cat_{m} fidelity {fc}"));
        // Exact equality, not only up to phase.
        let diff = dense::max_diff(&t.to_dense().unwrap(), &dense::power(Qubit::T, m));
        c.check(diff <= 1e-12, format!("T^{m} max diff {diff}"));
    }
    c.note(format!("T terms {ts:?}, cat terms {cats:?}"));
    c.finish(start.elapsed(), Duration::from_secs(10))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut c = Checks::default();
    let mut counts = Vec::new();
    for ell in 1..=12usize {
        let n = chains::chain_t_count(ell).unwrap();
        counts.push(n);
        c.check(n == 3u64.pow(ell as u32), format!("chain_T({ell}) has {n} terms"));
    }
    c.note(format!("chain_T term counts for l = 1..12 equal 3^l: {}", counts.iter().enumerate().all(|(i, &n)| n == 3u64.pow(i as u32 + 1))));
    let mut worst: f64 = 1.0;
    for ell in 1..=5usize {
        let d = chains::chain_t(ell).unwrap();
        c.check(d.len() as u64 == 3u64.pow(ell as u32), format!("built chain_T({ell}) has {} terms", d.len()));
        let f = fidelity(&d, &dense::cat_t(4 * ell + 2));
        worst = worst.min(f);
        c.check((f - 1.0).abs() <= 1e-9, format!("chain_T({ell}) fidelity {f}"));
    }
    c.note(format!("dense fidelity for l <= 5 (up to 22 qubits) min {worst:.12}"));
    let t10 = chains::t_power(10).unwrap();
    c.check(t10.len() <= 18, format!("t_power(10) has {} terms", t10.len()));
    c.note(format!("t_power(10) = {} terms", t10.len()));
    let terms50 = chains::t_power_plan(50).unwrap().terms();
    let exponent = (terms50 as f64).log2() / 50.0;
    c.note(format!("t_power(50) plans {terms50} terms, log2/50 = {exponent:.5}"));
    c.check(exponent <= 0.40, format!("exponent at m = 50 is {exponent:.5} > 0.40"));
    c.finish(start.elapsed(), Duration::from_secs(120))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let thetas: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let mut worst: f64 = 1.0;
    let mut max_terms12 = 0;
    for &th in &thetas {
        for m in 1..=12usize {
            let d = chains::r_power(th, m).unwrap();
            let f = fidelity(&d, &dense::power(Qubit::R(th), m));
            worst = worst.min(f);
            c.check((f - 1.0).abs() <= 1e-8, format!("r_power({th:.3}, {m}) fidelity {f}"));
            if m == 12 {
                max_terms12 = max_terms12.max(d.len());
            }
        }
    }
    c.note(format!("r_power m <= 12 over 10 angles, min fidelity {worst:.12}, max terms at m=12 {max_terms12}"));
    let ledger = chains::r_ledger(60);
    let mut over = Vec::new();
    for e in ledger.iter().filter(|e| e.m >= 1) {
        let bound = 2f64.powf(e.m as f64 / 2.0 + 3.0);
        if e.terms as f64 > bound {
            over.push(e.m);
        }
    }
    c.check(ledger.len() >= 60 && over.is_empty(), format!("ledger over 2^(m/2+3) at m = {over:?}"));
    c.note(format!("ledger m <= 60 within 2^(m/2+3): {}", over.is_empty()));

    // <cat_2(R)|_{ab} (I (x) |R>_b) = 2^{-1/2} <R|_a
    let mut bra_ok = true;
    for &th in &thetas {
        let c2 = dense::cat_r(th, 2);
        let r = dense::qubit(Qubit::R(th));
        for a in 0..2 {
            let f: Complex64 = (0..2).map(|b| c2[a + 2 * b].conj() * r[b]).sum();
            bra_ok &= (f - r[a].conj() * FRAC_1_SQRT_2).norm() < 1e-14;
        }
    }
    c.check(bra_ok, "effective-bra identity");
    let mut glue_ok = true;
    for &th in &thetas[..3] {
        let two = decomp::cat6_r(th).tensor(&decomp::cat6_r(th));
        let d = two.contract_bra(&decomp::cat2_r(th), &[5, 6]).unwrap().scaled(Scalar::exact(0, 2));
        glue_ok &= dense::max_diff(&d.to_dense().unwrap(), &dense::cat_r(th, 10)) < 1e-12;
    }
    c.check(glue_ok, "cat6(R) ~ cat6(R) = cat10(R)");
    c.note(format!("effective bra {bra_ok}, cat10(R) contraction {glue_ok}"));
    let ch = chains::chain_r(thetas[0], 1).unwrap();
    let raw = chains::chain_r_raw_terms(1);
    c.check(ch.num_qubits() == 30, format!("chain_R(1) has {} qubits", ch.num_qubits()));
    c.check(raw == 4u64.pow(7) && ch.len() as u64 <= raw, format!("chain_R(1) raw {raw}, kept {}", ch.len()));
    c.note(format!("chain_R(t=1): 30 qubits, {raw} raw terms, {} nonzero", ch.len()));
    c.finish(start.elapsed(), Duration::from_secs(120))
}

fn random_qubit(rng: &mut impl Rng) -> (Complex64, Complex64) {
    loop {
        let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = Complex64::new(v[0], v[1]);
        let b = Complex64::new(v[2], v[3]);
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        if n > 0.1 && n <= 1.0 {
            return (a / n, b / n);
        }
    }
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst: f64 = 1.0;
    for i in 0..50 {
        let (a, b) = random_qubit(&mut rng);
        let m = 1 + i % 12;
        let d = chains::symmetric_power(a, b, m).unwrap();
        let want = dense::tensor_power(&[a, b], m);
        let f = fidelity(&d, &want);
        worst = worst.min(f);
        c.check((f - 1.0).abs() <= 1e-7, format!("state {i} m={m} fidelity {f}"));
        let bound = (m as f64 + 1.0) * 2f64.powf(m as f64 / 2.0 + 3.0);
        c.check(d.len() as f64 <= bound, format!("state {i} m={m} has {} terms", d.len()));
    }
    c.note(format!("50 random qubits, m cycling 1..12, min fidelity {worst:.12}"));
    c.finish(start.elapsed(), Duration::from_secs(120))
}

fn random_circuit(rng: &mut impl Rng) -> QuantumCircuit {
    let n = rng.gen_range(1..=8);
    let depth = rng.gen_range(0..=40);
    let m = rng.gen_range(0..=10);
    let angles = [0.3, -1.2, 2.5];
    let mut c = QuantumCircuit::new(n);
    for q in 0..n {
        c.push(CircuitGate::H(q)).unwrap();
    }
    let mut slots: Vec<bool> = (0..depth + m).map(|i| i < m).collect();
    for i in (1..slots.len()).rev() {
        slots.swap(i, rng.gen_range(0..=i));
    }
    for magic in slots {
        let q = rng.gen_range(0..n);
        let g = if magic {
            match rng.gen_range(0..4) {
                0 | 1 => CircuitGate::T(q),
                2 => CircuitGate::Tdg(q),
                _ => CircuitGate::RZ(q, angles[rng.gen_range(0..angles.len())]),
            }
        } else if n > 1 && rng.gen_bool(0.35) {
            let mut r = rng.gen_range(0..n - 1);
            if r >= q {
                r += 1;
            }
            if rng.gen_bool(0.5) {
                CircuitGate::CX(q, r)
            } else {
                CircuitGate::CZ(q, r)
            }
        } else {
            [CircuitGate::H(q), CircuitGate::S(q), CircuitGate::Sdg(q), CircuitGate::X(q), CircuitGate::Y(q), CircuitGate::Z(q)][rng.gen_range(0..6)]
        };
        c.push(g).unwrap();
    }
    c
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut amp_err: f64 = 0.0;
    let mut prob_err: f64 = 0.0;
    let mut max_m = 0;
    for i in 0..200 {
        let circ = random_circuit(&mut rng);
        let n = circ.n;
        max_m = max_m.max(circ.t_count() + circ.rotation_count());
        let want = simulator::simulate_dense(&circ, 20).unwrap();
        let prepared = simulator::prepare(&circ, &SimOptions::default()).unwrap();
        for _ in 0..3 {
            let x = rng.gen_range(0..1u64 << n);
            let a = prepared.amplitude(&F2Vector::from_u64(n, x)).unwrap();
            amp_err = amp_err.max((a - want[x as usize]).norm());
        }
        let fixed: Vec<(usize, bool)> = (0..n).filter(|q| (i + q) % 3 != 0).map(|q| (q, rng.gen_bool(0.5))).collect();
        let p = prepared.probability(&fixed, simulator::DEFAULT_MARGINAL_CAP).unwrap();
        let pw: f64 = want
            .iter()
            .enumerate()
            .filter(|(idx, _)| fixed.iter().all(|&(q, b)| ((idx >> q) & 1 == 1) == b))
            .map(|(_, a)| a.norm_sqr())
            .sum();
        prob_err = prob_err.max((p - pw).abs());
    }
    c.check(amp_err <= 1e-8, format!("amplitude error {amp_err:e}"));
    c.check(prob_err <= 1e-8, format!("probability error {prob_err:e}"));
    c.note(format!("200 circuits (max m {max_m}): amplitude error {amp_err:.1e}, marginal error {prob_err:.1e}"));
    let t_circuit = |m: usize| {
        let mut q = QuantumCircuit::new(1);
        for _ in 0..m {
            q.push(CircuitGate::T(0)).unwrap();
        }
        q
    };
    let r6 = simulator::cost_report(&t_circuit(6), Strategy::Auto).unwrap();
    let r10 = simulator::cost_report(&t_circuit(10), Strategy::Auto).unwrap();
    let (e6, e10) = (r6.exponent.unwrap(), r10.exponent.unwrap());
    c.check(r6.terms == 6 && (e6 - 0.4308).abs() < 5e-5, format!("m=6: {} terms, exponent {e6}", r6.terms));
    c.check(r10.terms == 18 && e10 <= 0.417, format!("m=10: {} terms, exponent {e10}", r10.terms));
    c.note(format!("cost exponents m=6 {e6:.4} ({} terms), m=10 {e10:.4} ({} terms)", r6.terms, r10.terms));
    c.finish(start.elapsed(), Duration::from_secs(300))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut c = Checks::default();
    let cat3 = dense::cat_t(3);
    let xx = spectrum::pauli_expectation(&cat3, &PauliOperator::parse("XXI").unwrap()).unwrap();
    c.check((xx - 0.5).norm() <= 1e-12, format!("<XXI> = {xx}"));
    let states = spectrum::enumerate_stabilizer_states(3).unwrap();
    c.check(states.len() == 1080, format!("{} three-qubit stabilizer states", states.len()));
    let best = spectrum::max_stabilizer_overlap(&cat3).unwrap();
    c.check(best < 1.0 - 1e-9, format!("max overlap {best}"));
    let cert = spectrum::cat5_certificate().unwrap();
    c.check(cert.passed(), format!("certificate: {:?}", cert.first_failure().map(|a| &a.name)));
    c.check(cert.zero_counts.cat5 == 782, format!("cat5 zero count {}", cert.zero_counts.cat5));
    let orth: Vec<u64> = cert.zero_counts.candidates[..4].iter().map(|z| z.zero_count).collect();
    c.check(orth.iter().all(|&z| z == 710), format!("orthogonal zero counts {orth:?}"));
    let catp = cert.assertions.iter().any(|a| a.name.starts_with("cat5 |<P>|") && a.pass);
    c.check(catp, "cat5 value set");
    c.note(format!(
        "<XXI> = {:.3}, {} stabilizer states, max overlap {best:.4}, zero counts cat5 {} vs candidates {:?}, {} assertions",
        xx.re,
        states.len(),
        cert.zero_counts.cat5,
        cert.zero_counts.candidates.iter().map(|z| z.zero_count).collect::<Vec<_>>(),
        cert.assertions.len()
    ));
    c.finish(start.elapsed(), Duration::from_secs(60))
}

fn random_code(rng: &mut impl Rng, m: usize, k: usize) -> LinearCode {
    loop {
        let rows = (0..k).map(|_| F2Vector::from_u64(m, rng.gen::<u64>())).collect();
        if let Ok(c) = LinearCode::new(F2Matrix::from_rows(m, rows).unwrap()) {
            return c;
        }
    }
}

fn phase_free_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let ip = dense::inner(a, b);
    let ph = ip / ip.norm();
    let (na, nb) = (dense::norm(a), dense::norm(b));
    a.iter().zip(b).map(|(x, y)| (x / na * ph - y / nb).norm()).fold(0.0, f64::max)
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let m = rng.gen_range(1..=14);
        let k = rng.gen_range(0..=m);
        let code = random_code(&mut rng, m, k);
        let a = codes::code_state_dense(&code).unwrap();
        let b = codes::dual_phase_dense(&code).unwrap();
        worst = worst.max(phase_free_diff(&a, &b));
    }
    c.check(worst <= 1e-12, format!("construction mismatch {worst:e}"));
    c.note(format!("200 random codes m <= 14 agree to {worst:.1e}"));
    let r13 = LinearCode::reed_muller(1, 3).unwrap();
    let (d, _) = codes::code_state_decomposition(&r13).unwrap();
    let v = codes::code_state_dense(&r13).unwrap();
    c.check(d.len() == 2, format!("R13 has {} terms", d.len()));
    c.check(dense::max_diff(&d.to_dense().unwrap(), &v) < 1e-12, "R13 decomposition exact");
    let stab = spectrum::is_stabilizer_state(&v).unwrap();
    c.check(!stab, "R13 code state is not a stabilizer state");
    let pre = codes::contract_t_prefix(&r13).unwrap();
    c.check((pre.fidelity - 1.0).abs() < 1e-12, format!("R13 prefix fidelity {}", pre.fidelity));
    c.note(format!("R13: {} terms, stabilizer {stab}, <T|^4 prefix constant {:.4}", d.len(), pre.constant.norm()));
    let mut rm_checked = 0;
    let mut rm_ok = true;
    for b in 1..=5usize {
        for a in 0..=b {
            if codes::rm_stabilizer_condition(a, b) {
                rm_checked += 1;
                let dual = LinearCode::reed_muller(a, b).unwrap().dual();
                rm_ok &= dual.codewords().iter().all(|u| u.weight() % 8 == 0);
                let (d, _) = codes::code_state_decomposition(&LinearCode::reed_muller(a, b).unwrap()).unwrap();
                rm_ok &= d.len() == 1;
            }
        }
    }
    c.check(rm_ok, "RM weight condition");
    c.note(format!("RM condition holds for {rm_checked} (a, b) pairs with b <= 5"));
    let bound = codes::theorem5_bound(&LinearCode::repetition(6), 3).unwrap();
    c.check((bound - 3f64.log2() / 4.0).abs() <= 1e-12, format!("bound {bound}"));
    c.note(format!("repetition-6 bound {bound:.5}"));
    c.finish(start.elapsed(), Duration::from_secs(60))
}

fn main() -> ExitCode {
    // Ignore libtest flags passed by `cargo test`.
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 canonical decompositions", criterion_1),
        ("2 small-m table", criterion_2),
        ("3 T chain", criterion_3),
        ("4 equatorial chain", criterion_4),
        ("5 symmetric powers", criterion_5),
        ("6 simulator", criterion_6),
        ("7 certificates", criterion_7),
        ("8 codes", criterion_8),
    ];
    let mut failures = 0;
    for (name, f) in criteria {
        if filter.as_deref().is_some_and(|p| !name.contains(p)) {
            continue;
        }
        let o = f();
        println!("criterion {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.details);
        failures += usize::from(!o.pass);
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criterion(s) failed");
        ExitCode::FAILURE
    }
}
