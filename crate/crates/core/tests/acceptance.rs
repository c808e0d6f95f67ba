//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion's outcome differs from [`KNOWN_FAILURES`].

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{oracle, Deployment, DEPLOYMENTS};
use ndarray::{s, Array2};
use pcnflow::dataflow::{
    analytic_perf, map_network, validate, ArchParams, DataflowGraph, DepthTable, PerfEstimate,
};
use pcnflow::events::{compact, expand, SensorFrame};
use pcnflow::fixnum::FixFormat;
use pcnflow::golden::{
    condense, gravnet_forward, isolation, knn_all, max_abs_deviation, run_network,
    CondensationParams, GravNetLayer, Model, NetworkConfig, Precision, PreparedLayer,
    SelectionVariant,
};
use pcnflow::sim::{check_equivalence, measure, simulate, SimConfig, SimReport};
use rand::Rng;

/// Relative tolerance on events-per-second arithmetic.
const EPS_REL_TOL: f64 = 1e-9;
/// Relative tolerance of real-mode GravNet against the matrix oracle.
const GRAVNET_REL_TOL: f64 = 1e-5;
const LATENCY_LIMIT_S: f64 = 10e-6;
const STREAM_EVENTS: usize = 10_000;
const ORACLE_EVENTS: usize = 1_000;
const EQUIV_EVENTS: usize = 1_000;
const COMPACTION_FRAMES: usize = 10_000;
const QUANT_EVENTS: usize = 1_000;

/// Criteria expected to fail, with the reason. The run fails if one of these
/// starts passing, so the list cannot go stale.
///
/// 2: the 16-bit, 64-point configuration clocks at 249 MHz with a 32-cycle
/// interval, 7.78 MEPS, so not every 64-point configuration meets 8 MEPS.
const KNOWN_FAILURES: &[&str] = &["2"];

/// Compute throughput per configuration: kernel clock over a
/// `ceil(n_bar / par)`-cycle interval.
const EXPECTED: [(&str, u64, f64); 5] = [
    ("A", 16, 18.125e6),
    ("B", 16, 16.25e6),
    ("C", 32, 8.75e6),
    ("D", 32, 7.78125e6),
    ("E", 128, 127e6 / 128.0),
];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn config(p: Precision) -> NetworkConfig {
    NetworkConfig::reference().with_precision(p)
}

fn graph(d: &Deployment) -> DataflowGraph {
    let arch = ArchParams {
        n_bar: d.n_bar,
        par: d.par,
        f_kernel: d.f_kernel,
    };
    map_network(&config(d.precision), arch, &DepthTable::default()).expect("mapping succeeds")
}

fn perf(g: &DataflowGraph) -> PerfEstimate {
    analytic_perf(g).expect("mapped graph validates")
}

fn stream(d: &Deployment, events: usize, seed: u64) -> SimReport {
    let evs = common::random_events(d.n_bar, 5, events, seed);
    simulate(&graph(d), None, &evs, &SimConfig::timing_only()).expect("simulation completes")
}

fn criterion_1() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (d, &(v, ii, eps)) in DEPLOYMENTS.iter().zip(&EXPECTED) {
        assert_eq!(d.version, v);
        let g = graph(d);
        let p = perf(&g);
        let rep = stream(d, 100, 10);
        let sim_eps = measure(&rep, d.f_kernel).throughput_eps;
        let good = p.ii_cycles == ii
            && rep.ii_measured == ii as f64
            && rel(p.throughput_eps, eps) <= EPS_REL_TOL
            && rel(sim_eps, eps) <= EPS_REL_TOL;
        ok &= good;
        notes.push(format!(
            "{v}: ii {}/{} cycles, {:.6} MEPS",
            p.ii_cycles,
            rep.ii_measured,
            sim_eps / 1e6
        ));
    }
    outcome(
        ok,
        format!(
            "throughput = f/ceil(n_bar/par) (ii exact, EPS rel <= {EPS_REL_TOL:e}); {}",
            notes.join(", ")
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let mut by_size = std::collections::BTreeMap::<usize, bool>::new();
    for d in &DEPLOYMENTS {
        let p = perf(&graph(d));
        let expected = d.n_bar != 128;
        ok &= p.meets_throughput_req == expected;
        *by_size.entry(d.n_bar).or_default() |= p.meets_throughput_req;
        notes.push(format!(
            "{}: {} ({:.5} MEPS)",
            d.version,
            p.meets_throughput_req,
            p.throughput_eps / 1e6
        ));
    }
    let sizes: Vec<String> = by_size.iter().map(|(n, m)| format!("{n}: {m}")).collect();
    outcome(
        ok,
        format!(
            "every config with n_bar in {{32, 64}} meets 8 MEPS, n_bar 128 does not; {}; any config per event size: {}",
            notes.join(", "),
            sizes.join(", ")
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for d in &DEPLOYMENTS {
        let g = graph(d);
        let p = perf(&g);
        let single = stream(d, 1, 30);
        let many = stream(d, 200, 31);
        let secs = many.latency_max as f64 / d.f_kernel;
        let good = single.latency_max == p.latency_cycles
            && many.latency_min == p.latency_cycles
            && many.latency_max == p.latency_cycles
            && secs < LATENCY_LIMIT_S;
        ok &= good;
        notes.push(format!(
            "{}: {} cycles = {:.3} us",
            d.version,
            many.latency_max,
            secs * 1e6
        ));
    }
    // extra validated graphs away from the published points
    for (n_bar, par) in [(16, 1), (48, 3), (96, 4), (128, 2)] {
        let arch = ArchParams {
            n_bar,
            par,
            f_kernel: 2e8,
        };
        let g = map_network(&NetworkConfig::reference(), arch, &DepthTable::default()).unwrap();
        let p = perf(&g);
        let rep = simulate(
            &g,
            None,
            &common::random_events(n_bar, 5, 50, 32),
            &SimConfig::timing_only(),
        )
        .unwrap();
        ok &= rep.latency_min == p.latency_cycles && rep.latency_max == p.latency_cycles;
    }
    outcome(
        ok,
        format!(
            "simulated = analytic latency (exact), < {} us at published clocks; {}",
            LATENCY_LIMIT_S * 1e6,
            notes.join(", ")
        ),
    )
}

fn criteria_4_and_5() -> (Outcome, Outcome) {
    let mut det = true;
    let mut stall_free = true;
    let mut det_notes = Vec::new();
    let mut stall_notes = Vec::new();
    for d in &DEPLOYMENTS {
        let rep = stream(d, STREAM_EVENTS, 40);
        det &= rep.events == STREAM_EVENTS && rep.latency_max == rep.latency_min;
        stall_free &= rep.total_stalls == 0 && rep.in_order;
        det_notes.push(format!(
            "{}: [{}, {}]",
            d.version, rep.latency_min, rep.latency_max
        ));
        stall_notes.push(format!("{}: {}", d.version, rep.total_stalls));
    }
    let (neg, _) = common::fork_join(32, 2, 10, 50, 1);
    let neg_rep = simulate(
        &neg,
        None,
        &common::random_events(32, 5, 200, 41),
        &SimConfig::timing_only(),
    )
    .unwrap();
    let neg_ok = !validate(&neg).is_empty() && neg_rep.total_stalls > 0;
    stall_notes.push(format!(
        "under-buffered fork/join: {} stalls, ii {}",
        neg_rep.total_stalls, neg_rep.ii_measured
    ));
    (
        outcome(
            det,
            format!(
                "{STREAM_EVENTS} events, n uniform in [1, n_bar]: latency max = min; {}",
                det_notes.join(", ")
            ),
        ),
        outcome(
            stall_free && neg_ok,
            format!(
                "total stalls = 0 on mapped graphs, > 0 on negative control; {}",
                stall_notes.join(", ")
            ),
        ),
    )
}

fn gravnet_layer(m: &Model) -> GravNetLayer {
    m.layers()
        .iter()
        .find_map(|l| match l {
            PreparedLayer::GravNet(g) => Some(g.clone()),
            _ => None,
        })
        .unwrap()
}

fn criterion_6() -> Outcome {
    const N_BAR: usize = 32;
    let mut r = common::rng(60);
    let mut failures = Vec::new();
    let mut worst_rel: f64 = 0.0;
    let beta_fmt = FixFormat::new(8, 7).unwrap();
    // coarse grid so that equal distances and threshold ties are common
    let coarse = FixFormat::new(8, 2).unwrap();

    for fixed in [false, true] {
        let mode = if fixed { "fixed" } else { "real" };
        let models: Vec<Model> = if fixed {
            vec![
                Model::from_config(&config(Precision::Fixed8)).unwrap(),
                Model::from_config(&config(Precision::Fixed16)).unwrap(),
            ]
        } else {
            vec![Model::from_config(&config(Precision::Real)).unwrap()]
        };
        for e in 0..ORACLE_EVENTS {
            let n = r.random_range(1..=N_BAR);
            let k = r.random_range(1..N_BAR);
            let grid = fixed.then_some(FixFormat::q8());

            let pts = common::random_rows(&mut r, N_BAR, n, 6, grid, (-2.0, 2.0));
            let got = knn_all(pts.view(), n, k);
            let want = oracle::knn(pts.view(), n, k);
            let knn_ok = (0..N_BAR).all(|i| {
                (0..k).all(|sl| {
                    got.indices[[i, sl]] == want[i][sl].0
                        && got.sq_dists[[i, sl]].to_bits() == want[i][sl].1.to_bits()
                })
            });
            if !knn_ok {
                failures.push(format!("knn {mode} event {e}"));
            }

            let beta: Vec<f64> = (0..N_BAR)
                .map(|i| match (fixed, i < n) {
                    (_, false) => 0.0,
                    (true, true) => beta_fmt
                        .from_raw(16 * r.random_range(0..=8i64))
                        .min(beta_fmt.max_value()),
                    (false, true) => r.random_range(0.0..1.0),
                })
                .collect();
            let coords =
                common::random_rows(&mut r, N_BAR, n, 2, fixed.then_some(coarse), (-1.0, 1.0));
            if isolation(&beta, coords.view(), n) != oracle::isolation(&beta, coords.view(), n) {
                failures.push(format!("isolation {mode} event {e}"));
            }
            for variant in [SelectionVariant::Isolation, SelectionVariant::Greedy] {
                let p = CondensationParams {
                    variant,
                    ..Default::default()
                };
                let sel = condense(&beta, coords.view(), &p, n);
                if (sel.flags, sel.ids, sel.points) != oracle::condense(&beta, coords.view(), &p, n)
                {
                    failures.push(format!("condense {variant:?} {mode} event {e}"));
                }
            }

            let m = &models[e % models.len()];
            let layer = gravnet_layer(m);
            let x = common::random_rows(&mut r, N_BAR, n, 32, m.input_format(), (0.0, 2.0));
            let got = gravnet_forward(x.view(), &layer, n).unwrap();
            let want = oracle::gravnet(x.view(), &layer, n);
            let gn_ok = got.iter().zip(want.iter()).all(|(a, b)| {
                if fixed {
                    a.to_bits() == b.to_bits()
                } else {
                    let d = (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
                    if a != b {
                        worst_rel = worst_rel.max(d);
                    }
                    a == b || d <= GRAVNET_REL_TOL
                }
            });
            if !gn_ok {
                failures.push(format!("gravnet {mode} event {e}"));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{ORACLE_EVENTS} events per mode: knn/isolation/condense exact, gravnet real rel <= {GRAVNET_REL_TOL:e} (worst {worst_rel:.1e}), fixed bit-exact; {} failures{}",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for d in &DEPLOYMENTS {
        let model = Model::from_config(&config(d.precision)).unwrap();
        let evs = common::random_events(d.n_bar, 5, EQUIV_EVENTS, 70 + d.n_bar as u64);
        let rep = simulate(&graph(d), Some(&model), &evs, &SimConfig::default()).unwrap();
        let golden: Vec<_> = evs
            .iter()
            .map(|e| run_network(&model, e).unwrap())
            .collect();
        let mism = check_equivalence(&rep, &golden);
        ok &= mism.is_empty() && rep.outputs.len() == EQUIV_EVENTS;
        notes.push(format!("{}: {} mismatches", d.version, mism.len()));
    }
    outcome(
        ok,
        format!(
            "{EQUIV_EVENTS} events per config, bitwise; {}",
            notes.join(", ")
        ),
    )
}

fn criterion_8() -> Outcome {
    const N_BAR: usize = 32;
    const N_TOTAL: usize = 320;
    let mut r = common::rng(80);
    let mut failures = 0usize;
    let mut overflowed = 0usize;
    for _ in 0..COMPACTION_FRAMES {
        let hits_n = r.random_range(0..=2 * N_BAR);
        let mut hits = rand::seq::index::sample(&mut r, N_TOTAL, hits_n).into_vec();
        hits.sort_unstable();
        let mut x = Array2::zeros((N_TOTAL, 5));
        for &h in &hits {
            x[[h, 0]] = r.random_range(0.05f32..3.0) as f64;
            for c in 1..5 {
                x[[h, c]] = r.random_range(-1.0f32..1.0) as f64;
            }
        }
        let frame = SensorFrame::new(x);
        let ev = compact(&frame, N_BAR).unwrap();
        let good = if hits_n <= N_BAR {
            ev.n == hits_n && expand(ev.x.view(), &ev.y, ev.n, N_TOTAL).unwrap() == frame.features
        } else {
            overflowed += 1;
            let kept: Vec<usize> = ev.y.iter().map(|&s| s as usize).collect();
            ev.n == N_BAR
                && kept == hits[..N_BAR]
                && (0..N_BAR).all(|i| ev.x.row(i) == frame.features.row(hits[i]))
        };
        if !good || ev.x.slice(s![ev.n.., ..]).iter().any(|&v| v != 0.0) {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!(
            "{COMPACTION_FRAMES} frames ({overflowed} over capacity): round trip identity and lowest-index drop rule; {failures} failures"
        ),
    )
}

fn criterion_9() -> Outcome {
    let evs = common::workload(32, QUANT_EVENTS, 90);
    let real = Model::from_config(&config(Precision::Real)).unwrap();
    let q8 = Model::from_config(&config(Precision::Fixed8)).unwrap();
    let q16 = Model::from_config(&config(Precision::Fixed16)).unwrap();
    let mut d8 = Vec::with_capacity(evs.len());
    let mut d16 = Vec::with_capacity(evs.len());
    for ev in &evs {
        let reference = run_network(&real, ev).unwrap();
        d8.push(max_abs_deviation(
            &run_network(&q8, ev).unwrap(),
            &reference,
        ));
        d16.push(max_abs_deviation(
            &run_network(&q16, ev).unwrap(),
            &reference,
        ));
    }
    let all_finite = d8.iter().chain(&d16).all(|d| d.is_finite());
    let (m8, m16) = (common::median(&mut d8), common::median(&mut d16));
    outcome(
        all_finite && m16 < m8,
        format!("{QUANT_EVENTS} events: median max-abs deviation 16 bit {m16:.5} < 8 bit {m8:.5}"),
    )
}

fn main() -> ExitCode {
    let mut unexpected = Vec::new();
    let mut report = |n: &'static str, o: Outcome, t: Instant| {
        let known = KNOWN_FAILURES.contains(&n);
        let status = match (o.pass, known) {
            (true, false) => "PASS",
            (true, true) => "PASS (listed as known failure)",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!(
            "[criterion {n}] {status} {} ({:.1}s)",
            o.detail,
            t.elapsed().as_secs_f64()
        );
        if o.pass == known {
            unexpected.push(n);
        }
    };
    let t = Instant::now();
    report("1", criterion_1(), t);
    let t = Instant::now();
    report("2", criterion_2(), t);
    let t = Instant::now();
    report("3", criterion_3(), t);
    let t = Instant::now();
    let (c4, c5) = criteria_4_and_5();
    report("4", c4, t);
    report("5", c5, t);
    let t = Instant::now();
    report("6", criterion_6(), t);
    let t = Instant::now();
    report("7", criterion_7(), t);
    let t = Instant::now();
    report("8", criterion_8(), t);
    let t = Instant::now();
    report("9", criterion_9(), t);
    if unexpected.is_empty() {
        println!(
            "acceptance: results as expected; known failures: {}",
            KNOWN_FAILURES.join(", ")
        );
        ExitCode::SUCCESS
    } else {
        println!(
            "acceptance: unexpected result for criteria {}",
            unexpected.join(", ")
        );
        ExitCode::FAILURE
    }
}
