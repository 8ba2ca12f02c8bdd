//! Acceptance checks, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach the terminal; exits non-zero if any
//! check fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use lumharch::experiment::{run_experiment, ExperimentConfig};
use lumharch::hierarchy::{cost, is_light_tree, parse_dump, validate, Rule};
use lumharch::model::Assignment;
use lumharch::oracle::enumerate_optimal;
use lumharch::solver::{SolveOptions, SolveStatus};
use lumharch::{build_model, builtin_topology, solve, Builtin, IlpModel, Mode, MulticastSession, Network, NodeKind};
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_xoshiro::SplitMix64;

const FIG_BUDGET: Duration = Duration::from_secs(5);
const ORACLE_BUDGET: Duration = Duration::from_secs(10 * 60);
const NSF_BUDGET: Duration = Duration::from_secs(30 * 60);
const RANDOM_INSTANCES: usize = 50;
const RANDOM_SEED: u64 = 0x5eed_0001;
const ROUND_TRIP_MODELS: usize = 20;
const ROUND_TRIP_SEED: u64 = 0x5eed_0002;
const NSF_SESSIONS: usize = 10;
const NSF_SEED: u64 = 2024;
const NSF_MIN_OPTIMAL: usize = 7;
const MAX_RANDOM_EDGES: usize = 12;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn session(net: &Network, s: &str, ds: &[&str]) -> MulticastSession {
    MulticastSession::from_names(net, s, ds).expect("valid session")
}

fn cost_of(model: &IlpModel, opts: &SolveOptions) -> (SolveStatus, Option<(i64, i64)>, lumharch::SolveReport) {
    let r = solve(model, opts);
    (r.status, r.cost_and_wavelengths(model), r)
}

fn fig3_reproduction() -> Outcome {
    let start = Instant::now();
    let net = builtin_topology(Builtin::Fig3);
    let ms = session(&net, "s", &["d1", "d2"]);
    let opts = SolveOptions::default();
    let (_, lh, lh_report) = cost_of(&build_model(&net, &ms, Mode::Lh, true), &opts);
    let (_, lt, _) = cost_of(&build_model(&net, &ms, Mode::Lt, true), &opts);
    let cps = lh_report.structures.as_ref().is_some_and(|s| s.uses_cps(&net));
    let elapsed = start.elapsed();
    let lh_cost = lh.map(|c| c.0);
    let lt_cost = lt.map(|c| c.0);
    let pass = lh_cost == Some(8) && lt_cost == Some(9) && cps && elapsed < FIG_BUDGET;
    outcome(
        pass,
        format!(
            "LH cost {lh_cost:?} (expected 8), LT cost {lt_cost:?} (expected 9), LH crosses pairs: {cps}, {elapsed:.2?}"
        ),
    )
}

fn fig5_regression() -> Outcome {
    let start = Instant::now();
    let net = builtin_topology(Builtin::Fig5);
    let ms = session(&net, "s", &["d1", "d2", "d3"]);
    let opts = SolveOptions { greedy_incumbent: false, ..Default::default() };
    let loose = solve(&build_model(&net, &ms, Mode::Lh, false), &opts);
    let loose_report = loose.structures.as_ref().map(|s| validate(&net, s));
    let loose_broken = loose.status == SolveStatus::Optimal
        && loose_report.as_ref().is_some_and(|r| r.has(Rule::Connectivity));
    let tight_model = build_model(&net, &ms, Mode::Lh, true);
    let tight = solve(&tight_model, &SolveOptions::default());
    let tight_cost = tight.cost_and_wavelengths(&tight_model).map(|c| c.0);
    let tight_ok = tight.structures.as_ref().is_some_and(|s| validate(&net, s).ok());
    let elapsed = start.elapsed();
    outcome(
        loose_broken && tight_cost == Some(5) && tight_ok && elapsed < FIG_BUDGET,
        format!(
            "structure-only optimum fails reachability: {loose_broken}; with connectivity cost {tight_cost:?}, validates: {tight_ok}, {elapsed:.2?}"
        ),
    )
}

/// Connected graph with unit costs: a random spanning tree plus a few
/// chords, at most `MAX_RANDOM_EDGES` edges so the oracle stays in range.
fn random_instance(rng: &mut SplitMix64) -> (Network, MulticastSession) {
    let n = rng.random_range(4..=7usize);
    let name = |i: usize| format!("v{i}");
    let nodes = (0..n)
        .map(|i| (name(i), if rng.random_bool(0.3) { NodeKind::Mc } else { NodeKind::Mi }))
        .collect();
    let mut pairs = std::collections::BTreeSet::new();
    for i in 1..n {
        let p = rng.random_range(0..i);
        pairs.insert((p, i));
    }
    let chords = rng.random_range(0..=4usize);
    for _ in 0..chords {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b && pairs.len() < MAX_RANDOM_EDGES {
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    let edges = pairs.iter().map(|&(a, b)| (name(a), name(b), 1)).collect();
    let w = rng.random_range(1..=2usize);
    let net = Network::new(nodes, edges, w).expect("generated network is valid");
    let group = rng.random_range(1..=3usize.min(n - 1));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let ms = MulticastSession::new(&net, order[0], order[1..=group].to_vec()).expect("generated session is valid");
    (net, ms)
}

fn random_instances(count: usize, seed: u64) -> Vec<(Network, MulticastSession)> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    (0..count).map(|_| random_instance(&mut rng)).collect()
}

/// Objective per mode from the solver, `None` when infeasible.
type ModeObjectives = BTreeMap<Mode, Option<i64>>;

fn oracle_equivalence(instances: &[(Network, MulticastSession)], solved: &mut Vec<ModeObjectives>) -> Outcome {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    for (i, (net, ms)) in instances.iter().enumerate() {
        let mut per_mode = ModeObjectives::new();
        for mode in [Mode::Lh, Mode::Lt] {
            let model = build_model(net, ms, mode, true);
            let r = solve(&model, &SolveOptions::default());
            let expected = match enumerate_optimal(net, ms, mode) {
                Ok(o) => o.map(|o| model.delta() * o.best_cost as i64 + o.best_wavelengths as i64),
                Err(e) => {
                    mismatches.push(format!("#{i} {mode}: oracle refused: {e}"));
                    continue;
                }
            };
            let proven = matches!(r.status, SolveStatus::Optimal | SolveStatus::Infeasible);
            if !proven || r.objective != expected {
                mismatches.push(format!("#{i} {mode}: solver {:?} {:?}, oracle {expected:?}", r.status, r.objective));
            }
            per_mode.insert(mode, r.objective);
        }
        solved.push(per_mode);
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches.is_empty() && elapsed < ORACLE_BUDGET,
        format!(
            "{} instances x 2 modes, {} mismatches{}, {elapsed:.2?}",
            instances.len(),
            mismatches.len(),
            mismatches.first().map(|m| format!(" (first: {m})")).unwrap_or_default()
        ),
    )
}

fn dominance(instances: &[(Network, MulticastSession)], solved: &[ModeObjectives]) -> Outcome {
    let mut violations = 0;
    let mut strict = 0;
    for ((net, _), per_mode) in instances.iter().zip(solved) {
        let delta = net.wavelengths() as i64 + 1;
        let lh = per_mode.get(&Mode::Lh).copied().flatten().map(|o| o / delta);
        let lt = per_mode.get(&Mode::Lt).copied().flatten().map(|o| o / delta);
        match (lh, lt) {
            (Some(h), Some(t)) if h > t => violations += 1,
            (Some(h), Some(t)) if h < t => strict += 1,
            (None, Some(_)) => violations += 1,
            _ => {}
        }
    }
    let mut note = String::new();
    if strict == 0 {
        // fall back to a seeded instance with a degree-4 MI node
        let net = builtin_topology(Builtin::Fig3);
        let ms = session(&net, "s", &["d1", "d2"]);
        let h = solve(&build_model(&net, &ms, Mode::Lh, true), &SolveOptions::default()).objective;
        let t = solve(&build_model(&net, &ms, Mode::Lt, true), &SolveOptions::default()).objective;
        if let (Some(h), Some(t)) = (h, t) {
            if h / 3 < t / 3 {
                strict += 1;
                note = " (strict case from the seeded degree-4 instance)".into();
            }
        }
    }
    outcome(
        violations == 0 && strict > 0,
        format!("{} instances, LH > LT in {violations}, LH < LT in {strict}{note}", instances.len()),
    )
}

fn nsf_directional() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        topology: "nsf".into(),
        group_size: 2,
        session_count: NSF_SESSIONS,
        seed: NSF_SEED,
        // one light-tree per destination always suffices
        wavelengths: 2,
        ..Default::default()
    };
    let result = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("experiment failed: {e}")),
    };
    let m = &result.metrics;
    let lh = m.totals(Mode::Lh).expect("LH ran");
    let lt = m.totals(Mode::Lt).expect("LT ran");
    let violations = result.property_violations();
    let elapsed = start.elapsed();
    let pass = m.comparable >= NSF_MIN_OPTIMAL
        && lh.total_cost <= lt.total_cost
        && lh.total_wavelengths <= lt.total_wavelengths
        && violations.is_empty()
        && elapsed < NSF_BUDGET;
    outcome(
        pass,
        format!(
            "{}/{} sessions optimal in both modes; cost LH {} vs LT {}; wavelengths LH {} vs LT {}; {} relation violations; {elapsed:.2?}",
            m.comparable,
            m.sessions,
            lh.total_cost,
            lt.total_cost,
            lh.total_wavelengths,
            lt.total_wavelengths,
            violations.len()
        ),
    )
}

/// Objective and row check computed from the LP text alone.
type Terms = Vec<(i64, String)>;

struct LpText {
    objective: Terms,
    rows: Vec<(Terms, String, i64)>,
}

fn parse_terms(text: &str) -> Terms {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let mut out = Vec::new();
    let mut sign = 1;
    let mut i = 0;
    while i < tokens.len() {
        match tokens[i] {
            "+" => sign = 1,
            "-" => sign = -1,
            t => {
                let (coef, name) = match t.parse::<i64>() {
                    Ok(c) => {
                        i += 1;
                        (c, tokens[i])
                    }
                    Err(_) => (1, t),
                };
                if name != "0" {
                    out.push((sign * coef, name.to_string()));
                }
                sign = 1;
            }
        }
        i += 1;
    }
    out
}

fn parse_lp(text: &str) -> LpText {
    let mut section = "";
    let mut statements: Vec<(String, String)> = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.starts_with('\\') || trimmed.is_empty() {
            continue;
        }
        match trimmed {
            "Minimize" | "Subject To" | "Bounds" | "General" | "Binary" | "End" => {
                section = match trimmed {
                    "Minimize" => "obj",
                    "Subject To" => "rows",
                    _ => "other",
                };
                continue;
            }
            _ => {}
        }
        if section == "other" {
            continue;
        }
        if line.starts_with("   ") && !statements.is_empty() {
            statements.last_mut().unwrap().1.push(' ');
            statements.last_mut().unwrap().1.push_str(trimmed);
        } else {
            statements.push((section.to_string(), trimmed.to_string()));
        }
    }
    let mut lp = LpText { objective: Vec::new(), rows: Vec::new() };
    for (section, body) in statements {
        let body = body.split_once(':').map(|(_, b)| b.to_string()).unwrap_or(body);
        if section == "obj" {
            lp.objective = parse_terms(&body);
        } else {
            let rel = ["<=", ">=", "="].into_iter().find(|r| body.contains(r)).expect("row has a relation");
            let (lhs, rhs) = body.split_once(rel).unwrap();
            lp.rows.push((parse_terms(lhs), rel.to_string(), rhs.trim().parse().expect("integral rhs")));
        }
    }
    lp
}

fn lp_round_trip() -> Outcome {
    let instances = random_instances(ROUND_TRIP_MODELS, ROUND_TRIP_SEED);
    let mut failures = Vec::new();
    let mut checked = 0;
    for (i, (net, ms)) in instances.iter().enumerate() {
        let mode = if i % 2 == 0 { Mode::Lh } else { Mode::Lt };
        let model = build_model(net, ms, mode, true);
        let r = solve(&model, &SolveOptions::default());
        let Some(a) = r.assignment else {
            // infeasible sessions have no optimum to carry across
            continue;
        };
        checked += 1;
        let imported: Assignment = match model.import_solution(&model.write_solution(&a)) {
            Ok(x) => x,
            Err(e) => {
                failures.push(format!("#{i}: import failed: {e}"));
                continue;
            }
        };
        let lp = parse_lp(&model.emit_lp());
        let value = |name: &str| imported.values[model.var_index(name).expect("LP names model variables")];
        let from_text: i64 = lp.objective.iter().map(|(c, n)| c * value(n)).sum();
        let rows_hold = lp.rows.iter().all(|(terms, rel, rhs)| {
            let lhs: i64 = terms.iter().map(|(c, n)| c * value(n)).sum();
            match rel.as_str() {
                "<=" => lhs <= *rhs,
                ">=" => lhs >= *rhs,
                _ => lhs == *rhs,
            }
        });
        if Some(model.evaluate(&imported)) != r.objective || Some(from_text) != r.objective || !rows_hold {
            failures.push(format!(
                "#{i}: solver {:?}, imported {}, LP text {from_text}, rows hold {rows_hold}",
                r.objective,
                model.evaluate(&imported)
            ));
        }
    }
    outcome(
        failures.is_empty() && checked > 0,
        format!(
            "{checked}/{} models with an optimum round-tripped, {} failures{}",
            instances.len(),
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

fn batch_determinism() -> Outcome {
    let cfg = ExperimentConfig { topology: "nsf".into(), group_size: 3, session_count: 6, seed: 42, ..Default::default() };
    let first = run_experiment(&ExperimentConfig { threads: 4, ..cfg.clone() }).and_then(|r| r.to_csv());
    let second = run_experiment(&ExperimentConfig { threads: 1, ..cfg }).and_then(|r| r.to_csv());
    match (first, second) {
        (Ok(a), Ok(b)) => outcome(a == b, format!("{} bytes, identical: {}", a.len(), a == b)),
        (Err(e), _) | (_, Err(e)) => outcome(false, format!("batch failed: {e}")),
    }
}

fn fig4a_net() -> Network {
    let mc = |n: &str| if n == "1" { NodeKind::Mc } else { NodeKind::Mi };
    Network::new(
        ["s", "1", "2", "3", "4", "d1", "d2"].iter().map(|n| (n.to_string(), mc(n))).collect(),
        [("s", "1"), ("1", "2"), ("1", "3"), ("2", "4"), ("3", "4"), ("4", "d1"), ("4", "d2")]
            .iter()
            .map(|&(a, b)| (a.to_string(), b.to_string(), 1))
            .collect(),
        1,
    )
    .expect("fig 4(a) network")
}

fn fig4b_net() -> Network {
    Network::new(
        ["s", "2", "d1", "d2"].iter().map(|n| (n.to_string(), NodeKind::Mi)).collect(),
        [("s", "2"), ("2", "d1"), ("2", "d2")].iter().map(|&(a, b)| (a.to_string(), b.to_string(), 1)).collect(),
        1,
    )
    .expect("fig 4(b) network")
}

enum Expect {
    Valid { cost: u64, light_trees: bool },
    Breaks(Rule),
}

struct Case {
    name: &'static str,
    net: Network,
    source: &'static str,
    destinations: &'static [&'static str],
    dump: &'static str,
    expect: Expect,
}

fn corpus() -> Vec<Case> {
    let fig3 = builtin_topology(Builtin::Fig3);
    let fig5 = builtin_topology(Builtin::Fig5);
    vec![
        Case {
            name: "(a) link used twice",
            net: fig3.clone(),
            source: "s",
            destinations: &["d1"],
            dump: "λ0: (s(l_s1,1(l_12,2(l_23,3(l_34,4(l_43,3(l_34,4(l_4d1,d1))))))))",
            expect: Expect::Breaks(Rule::A),
        },
        Case {
            name: "(b) link without predecessor",
            net: fig3.clone(),
            source: "s",
            destinations: &["d2"],
            dump: "λ0: (s(l_s1,1(l_12,2(l_23,3(l_3d2,d2))))) (4(l_4d1,d1))",
            expect: Expect::Breaks(Rule::B),
        },
        Case {
            name: "(c) cycle through a destination",
            net: fig3.clone(),
            source: "s",
            destinations: &["d1", "d2"],
            dump: "λ0: (s(l_s1,1(l_12,2(l_23,3(l_3d2,d2(l_d23,3(l_34,4(l_4d1,d1))))))))",
            expect: Expect::Valid { cost: 7, light_trees: false },
        },
        Case {
            name: "(d) two structures on one wavelength",
            net: fig3.clone(),
            source: "s",
            destinations: &["d1", "d2"],
            dump: "λ0: (s(l_s1,1(l_12,2(l_23,3(l_35,5(l_5d1,d1))))))\nλ0: (s(l_s1,1(l_12,2(l_23,3(l_3d2,d2)))))",
            expect: Expect::Breaks(Rule::D),
        },
        Case {
            name: "(e) three links between one pair",
            net: fig3.clone(),
            source: "s",
            destinations: &["d2"],
            dump: "λ0: (s(l_s1,1(l_12,2(l_21,1(l_12,2(l_23,3(l_3d2,d2)))))))",
            expect: Expect::Breaks(Rule::E),
        },
        Case {
            name: "(f) MI node splitting",
            net: fig3.clone(),
            source: "s",
            destinations: &["d1", "d2"],
            dump: "λ0: (s(l_s1,1(l_12,2(l_23,3(l_3d2,d2,l_34,4(l_4d1,d1))))))",
            expect: Expect::Breaks(Rule::F),
        },
        Case {
            name: "Fig. 4(a) splitter feeding a crossed MI node",
            net: fig4a_net(),
            source: "s",
            destinations: &["d1", "d2"],
            dump: "λ0: (s(l_s1,1(l_12,2(l_24,4(l_4d1,d1)),l_13,3(l_34,4(l_4d2,d2)))))",
            expect: Expect::Valid { cost: 7, light_trees: false },
        },
        Case {
            name: "Fig. 4(b) round trip",
            net: fig4b_net(),
            source: "s",
            destinations: &["d1", "d2"],
            dump: "λ0: (s(l_s2,2(l_2d1,d1(l_d12,2(l_2d2,d2)))))",
            expect: Expect::Valid { cost: 4, light_trees: false },
        },
        Case {
            name: "Fig. 3 light-hierarchy",
            net: fig3.clone(),
            source: "s",
            destinations: &["d1", "d2"],
            dump: "λ0: (s(l_s1,1(l_12,2(l_23,3(l_35,5(l_5d1,d1(l_d14,4(l_43,3(l_3d2,d2)))))))))",
            expect: Expect::Valid { cost: 8, light_trees: false },
        },
        Case {
            name: "Fig. 3 light-tree pair",
            net: fig3.clone(),
            source: "s",
            destinations: &["d1", "d2"],
            dump: "λ0: (s(l_s1,1(l_12,2(l_23,3(l_35,5(l_5d1,d1))))))\nλ1: (s(l_s1,1(l_12,2(l_23,3(l_3d2,d2)))))",
            expect: Expect::Valid { cost: 9, light_trees: true },
        },
        Case {
            name: "floating cycle",
            net: fig5.clone(),
            source: "s",
            destinations: &["d1", "d2", "d3"],
            dump: "λ0: (s(l_sd1,d1)) (d2(l_d2d3,d3(l_d3d2,d2)))",
            expect: Expect::Breaks(Rule::Connectivity),
        },
        Case {
            name: "unicast path",
            net: fig5,
            source: "s",
            destinations: &["d2"],
            dump: "λ0: (s(l_sd1,d1(l_d1d2,d2)))",
            expect: Expect::Valid { cost: 4, light_trees: true },
        },
    ]
}

fn validator_corpus() -> Outcome {
    let cases = corpus();
    let mut wrong = Vec::new();
    for case in &cases {
        let ms = session(&case.net, case.source, case.destinations);
        let set = match parse_dump(case.dump, &case.net, &ms) {
            Ok(s) => s,
            Err(e) => {
                wrong.push(format!("{}: unparseable: {e}", case.name));
                continue;
            }
        };
        let report = validate(&case.net, &set);
        let right = match &case.expect {
            Expect::Valid { cost: c, light_trees } => {
                report.ok()
                    && cost(&set, &case.net) == *c
                    && set.structures.iter().all(is_light_tree) == *light_trees
            }
            Expect::Breaks(rule) => report.has(*rule),
        };
        if !right {
            wrong.push(format!("{}: got {:?}", case.name, report.rules()));
        }
    }
    outcome(
        wrong.is_empty(),
        format!(
            "{}/{} dumps classified as expected{}",
            cases.len() - wrong.len(),
            cases.len(),
            if wrong.is_empty() { String::new() } else { format!(" (wrong: {})", wrong.join("; ")) }
        ),
    )
}

fn main() {
    let instances = random_instances(RANDOM_INSTANCES, RANDOM_SEED);
    let mut solved = Vec::new();
    let mut results = vec![
        ("fig3 reproduction", fig3_reproduction()),
        ("fig5 connectivity regression", fig5_regression()),
        ("solver equals oracle", oracle_equivalence(&instances, &mut solved)),
    ];
    results.push(("LH never costs more than LT", dominance(&instances, &solved)));
    results.push(("NSF directional properties", nsf_directional()));
    results.push(("LP and solution round trip", lp_round_trip()));
    results.push(("batch determinism", batch_determinism()));
    results.push(("validator corpus", validator_corpus()));

    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!("{tag} criterion {}: {name}: {}", i + 1, o.detail);
    }
    println!("{} passed, {} failed", results.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
