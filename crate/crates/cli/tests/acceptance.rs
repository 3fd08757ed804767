//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use strongsec::channel::induced_joint;
use strongsec::codec::{covering_fallback_bracket, estimate_error, index_count, CodeParams, Epsilons, EstimationMode};
use strongsec::presets;
use strongsec::prob::{mutual_information, ProbTable};
use strongsec::region::{optimize_region, theorem1_rates, RatePoint, SearchConfig};
use strongsec::secrecy::{e_split, leakage_vs_rate_sweep, secrecy_threshold, single_letter_stealth, SweepConfig};
use strongsec::suites;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn c1() -> Verdict {
    let o = suites::decomposition_suite(200, 4, 4, 11).expect("exact enumeration");
    verdict(o.passed(), format!("{} instances, {} failures, worst residual {:.2e}", o.cases, o.failures, o.worst))
}

fn c2() -> Verdict {
    let o = suites::divergence_bound_suite(10_000, 12);
    verdict(o.passed(), format!("{} pairs, {} failures, worst witness gap {:.2e}", o.cases, o.failures, o.worst))
}

fn c3() -> Verdict {
    let joints = suites::random_joints(20, 13);
    let o = suites::output_bound_suite(&joints, &[4, 6, 8], 0.1).expect("enumeration");
    verdict(
        o.passed(),
        format!("{} (joint, n) runs, {} failing, worst type-identity error {:.2e}", o.cases, o.failures, o.worst),
    )
}

/// Direct sums over the eight cells of a binary `(V1, V2, Y2)` table.
fn letter_stealth_oracle(m: &[f64]) -> (f64, f64) {
    let c = |a: usize, b: usize, y: usize| m[4 * a + 2 * b + y];
    let pab = |a: usize, b: usize| c(a, b, 0) + c(a, b, 1);
    let pa = |a: usize| pab(a, 0) + pab(a, 1);
    let pb = |b: usize| pab(0, b) + pab(1, b);
    let mut d = 0.0;
    let mut i = 0.0;
    for b in 0..2 {
        for y in 0..2 {
            let p = c(0, b, y) + c(1, b, y);
            let q: f64 = (0..2).map(|a| pa(a) * c(a, b, y) / pab(a, b)).sum();
            d += p * (p / (pb(b) * q)).log2();
        }
        for a in 0..2 {
            i += pab(a, b) * (pab(a, b) / (pa(a) * pb(b))).log2();
        }
    }
    (d, i)
}

fn c4() -> Verdict {
    let joints = suites::random_joints(1000, 14);
    let o = suites::letter_stealth_suite(&joints).expect("valid tables");
    let mut disagreements = 0;
    for j in &joints {
        let (d, i) = single_letter_stealth(j).expect("valid table");
        let (d0, i0) = letter_stealth_oracle(j.mass());
        if (d.to_f64() - d0).abs() > 1e-12 || (i - i0).abs() > 1e-12 || d0 > i0 + 1e-9 {
            disagreements += 1;
        }
    }
    verdict(
        o.passed() && disagreements == 0,
        format!("{} tables, {} over the bound, {} oracle disagreements, max excess {:.2e}", o.cases, o.failures, disagreements, o.worst),
    )
}

fn c5() -> Verdict {
    let scheme = presets::dsbs_scheme(0.2);
    let i = mutual_information(&scheme.p_v1v2(), &[0], &[1], &[]).expect("two axes");
    let n = 200;
    let hi = covering_fallback_bracket(&scheme, n, i + 0.15, 0.1, 1000, 15).expect("type classes");
    let lo = covering_fallback_bracket(&scheme, n, (i - 0.15).max(0.0), 0.1, 1000, 16).expect("type classes");
    verdict(
        hi.upper <= 0.05 && lo.lower >= 0.5,
        format!(
            "I(V1;V2) = {i:.4}; fallback in [{}, {}] at Rco = I + 0.15 and in [{}, {}] at Rco = I - 0.15",
            hi.lower, hi.upper, lo.lower, lo.upper
        ),
    )
}

fn c6() -> Verdict {
    let scheme = presets::orthogonal_scheme();
    let ch = presets::orthogonal_clean_channel();
    let good = RatePoint::new(0.5, 0.5, 0.1, 0.1, 0.05).expect("valid");
    let over = RatePoint::new(1.05, 0.5, 0.1, 0.1, 0.05).expect("valid");
    let run = |r, seed| {
        let p = CodeParams::new(50, r, Epsilons::default(), seed).expect("valid");
        estimate_error(&scheme, &ch, &p, 1000, EstimationMode::Auto).expect("simulation")
    };
    let a = run(good, 17);
    let b = run(over, 18);
    verdict(
        a.pe1 <= 0.01 && a.pe2 <= 0.01 && b.pe1 >= 0.5,
        format!("pe = ({}, {}) below capacity, pe1 = {} above ({:?} mode)", a.pe1, a.pe2, b.pe1, a.mode),
    )
}

fn c7() -> Verdict {
    let scheme = presets::silent_v2_scheme();
    let ch = presets::xor_leak_channel();
    let thr = secrecy_threshold(&scheme, &ch).expect("valid scheme");
    let (lo_rate, hi_rate) = ((thr - 0.3).max(0.0), thr + 0.3);
    let cfg = SweepConfig { n: 8, r1: 0.125, rco: 0.0, epsilons: Epsilons::default(), draws: 50, seed: 19 };
    let rows = leakage_vs_rate_sweep(&scheme, &ch, &[lo_rate, hi_rate], &cfg).expect("exact sweep");
    let e2: Vec<f64> = [4usize, 6, 8]
        .iter()
        .map(|&n| e_split(&scheme, &ch, &vec![0; n], index_count(n, hi_rate), 0.1).expect("enumeration").e2)
        .collect();
    let trend = rows[1].mean_effective_secrecy < rows[0].mean_effective_secrecy;
    let decreasing = e2.windows(2).all(|w| w[1] < w[0]);
    verdict(
        thr > 0.2 && trend && decreasing,
        format!(
            "threshold {thr:.3}; mean effective secrecy {:.4} at R1' = {lo_rate:.2}, {:.4} at {hi_rate:.2}; e2 over n = 4, 6, 8: {:.4}, {:.4}, {:.4}",
            rows[0].mean_effective_secrecy, rows[1].mean_effective_secrecy, e2[0], e2[1], e2[2]
        ),
    )
}

fn c8() -> Verdict {
    let cfg = SearchConfig { restarts: 1000, seed: 20, ..SearchConfig::default() };
    let clean = optimize_region(&presets::orthogonal_clean_channel(), &cfg).expect("search");
    let best = clean.iter().map(|f| f.point.r1 + f.point.r2).fold(0.0, f64::max);
    let ident_ch = presets::identical_outputs_channel(0.1);
    let ident = optimize_region(&ident_ch, &cfg).expect("search");
    let both = ident.iter().filter(|f| f.point.r1 > 1e-6 && f.point.r2 > 1e-6).count();
    let rates_both = ident
        .iter()
        .filter(|f| {
            let (a, b) = theorem1_rates(&induced_joint(&ident_ch, &f.scheme).expect("joint")).expect("rates");
            a > 1e-6 && b > 1e-6
        })
        .count();
    verdict(
        best >= 1.9 && both == 0 && rates_both == 0,
        format!("best r1 + r2 = {best:.4}; identical outputs: {} frontier points, {both} with both rates positive", ident.len()),
    )
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn c9() -> Verdict {
    let dir = tempfile::tempdir().expect("temp dir");
    let ortho = bundled("orthogonal.json");
    let wiretap = bundled("wiretap.json");
    let cases: Vec<(&str, Vec<&str>, &Path)> = vec![
        ("region-eval", vec!["region", "eval"], &ortho),
        ("region-search", vec!["region", "search"], &ortho),
        ("simulate", vec!["simulate", "--trials", "300"], &ortho),
        ("secrecy", vec!["secrecy"], &wiretap),
        ("secrecy-sweep", vec!["secrecy", "--sweep"], &wiretap),
        ("verify", vec!["verify"], &ortho),
    ];
    let mut failed = Vec::new();
    for (name, args, cfg) in &cases {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("{name}-{run}.out"));
            let mut cmd = Command::new(env!("CARGO_BIN_EXE_strongsec"));
            cmd.args(args).arg("--config").arg(cfg).arg("--out").arg(&out);
            let configs = dir.path().join(format!("{name}-{run}-configs"));
            if *name == "region-search" {
                cmd.arg("--emit-configs").arg(&configs);
            }
            let status = cmd.status().expect("binary runs");
            let mut bytes = std::fs::read(&out).unwrap_or_default();
            if let Ok(entries) = std::fs::read_dir(&configs) {
                let mut files: Vec<PathBuf> = entries.map(|e| e.expect("entry").path()).collect();
                files.sort();
                for f in files {
                    bytes.extend(std::fs::read(f).expect("emitted config"));
                }
            }
            outputs.push((status.success(), bytes));
        }
        if !(outputs[0].0 && outputs[1].0 && !outputs[0].1.is_empty() && outputs[0].1 == outputs[1].1) {
            failed.push(*name);
        }
    }
    verdict(
        failed.is_empty(),
        format!("{} subcommands run twice; differing or failing: {failed:?}", cases.len()),
    )
}

type Criterion = (&'static str, fn() -> Verdict, Duration);

fn main() {
    let criteria: [Criterion; 9] = [
        ("effective secrecy = leakage + stealth", c1, Duration::from_secs(60)),
        ("divergence bound log2(1/min q)", c2, Duration::from_secs(10)),
        ("typical-output lower bound", c3, Duration::from_secs(300)),
        ("single-letter stealth bound", c4, Duration::from_secs(30)),
        ("mutual covering regimes", c5, Duration::from_secs(120)),
        ("reliability", c6, Duration::from_secs(120)),
        ("secrecy threshold trend", c7, Duration::from_secs(600)),
        ("rate-region search", c8, Duration::from_secs(300)),
        ("determinism", c9, Duration::from_secs(600)),
    ];
    let mut all = true;
    for (k, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        let took = start.elapsed();
        let pass = v.pass && took <= *budget;
        all &= pass;
        println!(
            "C{} {} {name}: {} [{:.1}s of {}s]",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    if !all {
        std::process::exit(1);
    }
}
