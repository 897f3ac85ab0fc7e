//! One function per experiment kind. Each returns its records in replica
//! order, so the stream does not depend on the worker count.

use std::sync::Arc;

use serde_json::{json, Value};

use trapwalk::analysis::{
    circular_resultant, collect_snapshots, displacement_exponent, estimate_d2, estimate_eta, estimate_psi,
    lattice_dichotomy, snapshot_stability, trap_time_tail, trap_weight_tail, ConstantEstimates, DisplacementOptions,
    Estimate, ScalingFit, SnapshotPlan, SnapshotRecord, TailFit, WeightTailOptions,
};
use trapwalk::ensemble::map_replicas;
use trapwalk::exact::{pair_constants, BiasBounds, PairConstants};
use trapwalk::rng::{substream, Purpose};
use trapwalk::tree::{sample_trap, BackboneTreePair, Environment};
use trapwalk::walk::{late_trap_snapshot, run_walk, Mode, SnapshotOptions, Stop, WalkError, WalkOptions};
use trapwalk::{BiasLaw, Execution, Model};

use crate::config::{ExperimentConfig, Kind};
use crate::error::CliError;
use crate::output::Outcome;

/// File written by `dump-trap` when an output directory is given.
pub const TRAPS_FILE: &str = "traps.txt";

pub fn build_model(cfg: &ExperimentConfig, bias: BiasLaw) -> Result<Arc<Model>, CliError> {
    Ok(Arc::new(Model::new(&cfg.offspring_law()?, bias)?))
}

pub fn run(kind: Kind, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let model = build_model(cfg, cfg.bias_law()?)?;
    let exec = Execution::from_workers(cfg.workers);
    match kind {
        Kind::Gamma => gamma(&model),
        Kind::TrapTail => trap_tail(cfg, &model, exec),
        Kind::TrapTimeTail => trap_time(cfg, &model, exec),
        Kind::Walk => walk(cfg, &model, exec),
        Kind::Displacement => displacement(cfg, &model, exec),
        Kind::Dichotomy => dichotomy(cfg, &model, exec),
        Kind::PairConstants => constants_of_pairs(cfg, &model, exec),
        Kind::SnapshotStability => stability(cfg, &model, exec),
        Kind::Constants => scale_constant(cfg, &model, exec),
        Kind::DumpTrap => dump_trap(cfg, &model, exec),
    }
}

fn est(e: Estimate) -> Value {
    json!({ "value": e.value, "se": e.se })
}

fn tail_fit(f: &TailFit) -> Value {
    json!({
        "gamma_hat": f.gamma,
        "se": f.se,
        "n": f.n,
        "k": f.k,
        "fraction": f.fraction,
        "loglog_gamma": f.loglog_gamma,
        "instability": f.instability,
        "power_law": f.power_law,
        "rungs": f.rungs,
    })
}

fn scaling(f: &ScalingFit) -> Value {
    json!({ "slope": f.fit.slope, "intercept": f.fit.intercept, "ci": [f.ci.0, f.ci.1], "points": f.points })
}

fn gamma(model: &Model) -> Result<Outcome, CliError> {
    let g = model.gamma()?;
    let residual = model.bias.moment(g.gamma) * g.m_h - 1.0;
    let regime = if g.sub_ballistic { "sub-ballistic" } else { "ballistic" };
    let mut o = Outcome::default();
    o.record(
        "gamma",
        json!({ "gamma": g.gamma, "m_h": g.m_h, "q_ext": g.q_ext, "residual": residual, "regime": regime }),
    );
    o.row("gamma", format!("{:.10}", g.gamma));
    o.row("regime", regime);
    o.row("trap mean m_h", format!("{:.10}", g.m_h));
    o.row("extinction q_ext", format!("{:.10}", g.q_ext));
    o.row("residual", format!("{residual:.3e}"));
    Ok(o)
}

fn trap_tail(cfg: &ExperimentConfig, model: &Model, exec: Execution) -> Result<Outcome, CliError> {
    let opts = WeightTailOptions { samples: cfg.samples as usize, top_fraction: cfg.top_fraction };
    let r = trap_weight_tail(model, opts, cfg.seed, exec)?;
    let mut o = Outcome::default();
    o.record("weight_tail", tail_fit(&r.fit));
    for rung in &r.tail_grid {
        o.record("d1_tail_rung", json!({ "fraction": rung.at, "value": rung.value, "se": rung.se }));
    }
    for rung in &r.depth_ladder {
        o.record("d1_depth_rung", json!({ "depth": rung.at, "value": rung.value, "se": rung.se }));
    }
    o.record(
        "d1",
        json!({ "gamma": r.gamma, "d1_tail": est(r.d1_tail), "d1_depth": est(r.d1_depth), "ratio": r.ratio }),
    );
    o.row("gamma", format!("{:.6}", r.gamma));
    o.row("gamma_hat", format!("{:.4} +- {:.4}", r.fit.gamma, r.fit.se));
    o.row("power law", r.fit.power_law);
    o.row("d1 (tail)", format!("{:.4} +- {:.4}", r.d1_tail.value, r.d1_tail.se));
    o.row("d1 (depth)", format!("{:.4} +- {:.4}", r.d1_depth.value, r.d1_depth.se));
    o.row("d1 ratio", format!("{:.4}", r.ratio));
    Ok(o)
}

fn snapshot_options(cfg: &ExperimentConfig) -> SnapshotOptions {
    SnapshotOptions { n: cfg.snapshot_n, k: cfg.k, budget: cfg.budget }
}

fn plan(cfg: &ExperimentConfig, tau_reps: u32, constants: bool) -> SnapshotPlan {
    SnapshotPlan {
        snapshots: cfg.replicas,
        traps_per_snapshot: cfg.traps_per_snapshot,
        snapshot: snapshot_options(cfg),
        tau_reps,
        k_stop: cfg.k_stop,
        tau_budget: cfg.budget,
        constants,
    }
}

fn snapshot_record(r: &SnapshotRecord) -> Value {
    json!({
        "snapshot": r.snapshot,
        "trap": r.trap,
        "omega_ent": r.omega_ent,
        "trap_depth": r.trap_depth,
        "components": r.r,
        "p_esc_k": r.p_esc_k,
        "p_de": r.p_de,
        "fd_prob": r.fd_prob,
        "c_f_k": r.c_f.last(),
        "tau": r.tau,
        "fell_deep": r.fell_deep,
        "censored": r.censored,
    })
}

fn trap_time(cfg: &ExperimentConfig, model: &Arc<Model>, exec: Execution) -> Result<Outcome, CliError> {
    let gamma = model.gamma()?.gamma;
    let records = collect_snapshots(model, plan(cfg, cfg.tau_reps.max(1), true), cfg.seed, exec)?;
    let r = trap_time_tail(&records, gamma, cfg.top_fraction, None)?;
    let mut o = Outcome::default();
    for rec in &records {
        o.record("pair", snapshot_record(rec));
    }
    let mut fit = tail_fit(&r.fit);
    fit["gamma"] = json!(gamma);
    fit["censored_fraction"] = json!(r.censored_fraction);
    fit["prefactor"] = est(r.prefactor);
    o.record("trap_time_tail", fit);
    o.row("gamma", format!("{gamma:.6}"));
    o.row("gamma_hat (tau)", format!("{:.4} +- {:.4}", r.fit.gamma, r.fit.se));
    o.row("power law", r.fit.power_law);
    o.row("holding times", r.samples);
    o.row("censored fraction", format!("{:.5}", r.censored_fraction));
    o.row("prefactor", format!("{:.4} +- {:.4}", r.prefactor.value, r.prefactor.se));
    Ok(o)
}

fn walk(cfg: &ExperimentConfig, model: &Arc<Model>, exec: Execution) -> Result<Outcome, CliError> {
    let n_max = *cfg.ns.last().expect("validated non-empty");
    let opts = WalkOptions::new(Stop::BackboneDistance(n_max), cfg.budget).mode(Mode::Full).horizon(cfg.horizon);
    let runs = map_replicas(cfg.replicas, exec, |r| {
        let mut env = Environment::new(model.clone(), substream(cfg.seed, Purpose::Environment, r));
        match run_walk(&mut env, &opts, &mut substream(cfg.seed, Purpose::Walk, r)) {
            Ok(t) => Ok(Some(t)),
            Err(WalkError::StepBudgetExceeded { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    });
    let mut o = Outcome::default();
    let mut finished = 0u64;
    for (r, run) in runs.into_iter().enumerate() {
        match run? {
            Some(t) => {
                finished += 1;
                let hits: Vec<Option<u64>> = cfg.ns.iter().map(|&n| t.first_hit(n)).collect();
                let bb: Vec<Option<u64>> = cfg.ns.iter().map(|&n| t.first_backbone_hit(n)).collect();
                o.record(
                    "walk",
                    json!({
                        "replica": r,
                        "complete": true,
                        "time": t.time,
                        "max_depth": t.max_depth(),
                        "backbone_time": t.backbone_time,
                        "entrances": t.entrances.len(),
                        "regenerations": t.regenerations.len(),
                        "first_hit": hits,
                        "first_backbone_hit": bb,
                    }),
                );
            }
            None => o.record("walk", json!({ "replica": r, "complete": false })),
        }
    }
    o.row("replicas", cfg.replicas);
    o.row("finished", finished);
    o.row("target depth", n_max);
    Ok(o)
}

fn displacement(cfg: &ExperimentConfig, model: &Arc<Model>, exec: Execution) -> Result<Outcome, CliError> {
    let opts = DisplacementOptions {
        ns: cfg.ns.clone(),
        replicas: cfg.replicas,
        budget: cfg.budget,
        boot_reps: 200,
        relaxed: cfg.relaxed,
    };
    let r = displacement_exponent(model, &opts, cfg.seed, exec)?;
    let gamma = model.gamma()?.gamma;
    let mut o = Outcome::default();
    for (i, &n) in r.ns.iter().enumerate() {
        let open = r.backbone_hits[i].iter().filter(|&&t| t == u64::MAX).count();
        o.record("level", json!({ "n": n, "median": r.hitting.points.get(i).map(|p| p.1), "unfinished": open }));
    }
    let mut fit = scaling(&r.hitting);
    fit["target"] = json!(1.0 / gamma.min(1.0));
    o.record("hitting_fit", fit);
    if let Some(d) = &r.displacement {
        let mut fit = scaling(d);
        fit["target"] = json!(gamma.min(1.0));
        o.record("displacement_fit", fit);
    }
    o.row("gamma", format!("{gamma:.6}"));
    o.row(
        "hitting slope",
        format!("{:.4} [{:.4}, {:.4}] vs {:.4}", r.hitting.fit.slope, r.hitting.ci.0, r.hitting.ci.1, 1.0 / gamma.min(1.0)),
    );
    if let Some(d) = &r.displacement {
        o.row("displacement slope", format!("{:.4} [{:.4}, {:.4}]", d.fit.slope, d.ci.0, d.ci.1));
    }
    o.row("unfinished", r.unfinished);
    Ok(o)
}

fn dichotomy(cfg: &ExperimentConfig, model: &Arc<Model>, exec: Execution) -> Result<Outcome, CliError> {
    let lattice = build_model(cfg, BiasLaw::point(cfg.lattice_beta)?)?;
    let plan = plan(cfg, cfg.tau_reps.max(1), false);
    let taus = |m: &Arc<Model>| -> Result<(Vec<f64>, Vec<f64>), CliError> {
        let recs = collect_snapshots(m, plan, cfg.seed, exec)?;
        let t = recs.iter().flat_map(|r| r.tau.iter().map(|&x| x as f64)).collect();
        let w = recs.iter().map(|r| r.omega_ent).filter(|&w| w > cfg.threshold).collect();
        Ok((t, w))
    };
    let (ta, wa) = taus(&lattice)?;
    let (tb, wb) = taus(model)?;
    let r = lattice_dichotomy(&ta, &tb, cfg.lattice_beta, cfg.threshold)?;
    let (rwa, rwb) = (circular_resultant(&wa, cfg.lattice_beta), circular_resultant(&wb, cfg.lattice_beta));
    let mut o = Outcome::default();
    o.record(
        "dichotomy",
        json!({
            "beta": r.beta,
            "threshold": r.threshold,
            "r_lattice": r.r_lattice,
            "r_nonlattice": r.r_nonlattice,
            "n_lattice": r.n_lattice,
            "n_nonlattice": r.n_nonlattice,
            "ratio": r.ratio,
            "noise_lattice": r.noise_lattice,
            "noise_nonlattice": r.noise_nonlattice,
        }),
    );
    o.record(
        "weight_phases",
        json!({ "r_lattice": rwa, "r_nonlattice": rwb, "n_lattice": wa.len(), "n_nonlattice": wb.len() }),
    );
    o.row("holding R lattice", format!("{:.4} (n = {}, noise {:.4})", r.r_lattice, r.n_lattice, r.noise_lattice));
    o.row(
        "holding R non-lattice",
        format!("{:.4} (n = {}, noise {:.4})", r.r_nonlattice, r.n_nonlattice, r.noise_nonlattice),
    );
    o.row("holding ratio", format!("{:.3}", r.ratio));
    o.row("weight R lattice", format!("{rwa:.4} (n = {})", wa.len()));
    o.row("weight R non-lattice", format!("{rwb:.4} (n = {})", wb.len()));
    Ok(o)
}

fn pair_record(index: u64, pc: &PairConstants, bounds: BiasBounds) -> Value {
    let ladder: Vec<Value> = pc
        .ladder
        .iter()
        .map(|r| json!({ "k": r.k, "p_esc_k": r.p_esc_k, "esc_width": r.esc_width, "p_de_k": r.p_de_k, "c_f_k": r.c_f_k, "c_f_upper": r.c_f_upper }))
        .collect();
    let in_box =
        pc.p_esc_k >= bounds.p_esc_min() && pc.p_de >= bounds.p_de_min() && pc.c_f_k <= bounds.c_f_max();
    let narrowing = pc.ladder.windows(2).all(|w| w[1].c_f_upper - w[1].c_f_k <= w[0].c_f_upper - w[0].c_f_k);
    let t = pc.expected_trap_time();
    json!({
        "pair": index,
        "k": pc.k,
        "omega_ent": pc.omega_ent,
        "p_esc_k": pc.p_esc_k,
        "esc_width": pc.esc_width,
        "p_de": pc.p_de,
        "p_de_k": pc.p_de_k,
        "c_f_k": pc.c_f_k,
        "c_f_upper": pc.c_f_upper,
        "fd_prob": pc.fd_prob,
        "expected_trap_time": t.value,
        "expected_trap_time_width": t.width,
        "in_box": in_box,
        "narrowing": narrowing,
        "ladder": ladder,
    })
}

fn constants_of_pairs(cfg: &ExperimentConfig, model: &Arc<Model>, exec: Execution) -> Result<Outcome, CliError> {
    let bounds = BiasBounds::from(&model.bias);
    let pairs: Vec<BackboneTreePair> = match &cfg.input {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            vec![BackboneTreePair::from_text(&text)?]
        }
        None => map_replicas(cfg.replicas, exec, |r| late_trap_snapshot(model, snapshot_options(cfg), cfg.seed, r))
            .into_iter()
            .collect::<Result<_, _>>()?,
    };
    let consts: Vec<PairConstants> = map_replicas(pairs.len() as u64, exec, |i| {
        let p = &pairs[i as usize];
        pair_constants(p, cfg.k.min(p.radius()), bounds)
    })
    .into_iter()
    .collect::<Result<_, _>>()?;
    let mut o = Outcome::default();
    let (mut in_box, mut narrowing) = (0, 0);
    for (i, pc) in consts.iter().enumerate() {
        let rec = pair_record(i as u64, pc, bounds);
        in_box += usize::from(rec["in_box"] == true);
        narrowing += usize::from(rec["narrowing"] == true);
        o.record("pair_constants", rec);
    }
    o.row("pairs", consts.len());
    o.row("within box bounds", in_box);
    o.row("narrowing enclosures", narrowing);
    if let [pc] = consts.as_slice() {
        o.row("p_esc_k", format!("{} +- {:.3e}", pc.p_esc_k, pc.esc_width));
        o.row("p_de", pc.p_de);
        o.row("c_f", format!("[{}, {}]", pc.c_f_k, pc.c_f_upper));
        o.row("fall-deep probability", pc.fd_prob);
    }
    Ok(o)
}

fn stability(cfg: &ExperimentConfig, model: &Arc<Model>, exec: Execution) -> Result<Outcome, CliError> {
    let n = cfg.snapshot_n;
    let r = snapshot_stability(model, n, 2 * n, cfg.replicas, cfg.budget, cfg.seed, exec)?;
    let mut o = Outcome::default();
    let shapes: std::collections::BTreeSet<&String> = r.early.keys().chain(r.late.keys()).collect();
    for s in shapes {
        let count = |m: &std::collections::BTreeMap<String, u64>| m.get(s).copied().unwrap_or(0);
        o.record("shape", json!({ "shape": s, "early": count(&r.early), "late": count(&r.late) }));
    }
    o.record("stability", json!({ "n_early": n, "n_late": 2 * n, "snapshots": r.snapshots, "tv": r.tv }));
    o.row("entrances", format!("{n} vs {}", 2 * n));
    o.row("snapshots", r.snapshots);
    o.row("distinct shapes", r.early.len().max(r.late.len()));
    o.row("total variation", format!("{:.4}", r.tv));
    Ok(o)
}

fn scale_constant(cfg: &ExperimentConfig, model: &Arc<Model>, exec: Execution) -> Result<Outcome, CliError> {
    let gamma = model.gamma()?.gamma;
    let w = trap_weight_tail(model, WeightTailOptions { samples: cfg.samples as usize, top_fraction: cfg.top_fraction }, cfg.seed, exec)?;
    let records = collect_snapshots(model, plan(cfg, 0, true), cfg.seed, exec)?;
    let mut ks = vec![cfg.xi_k];
    ks.extend(cfg.d2_ks.iter().filter(|&&k| k != cfg.xi_k));
    let d2 = estimate_d2(&records, gamma, model.harris.h.prob(0), &ks)?;
    let mut qs = vec![cfg.xi_quantile];
    qs.extend(cfg.quantiles.iter().filter(|&&q| q != cfg.xi_quantile));
    let eta = estimate_eta(&records, &qs)?;
    let psi = estimate_psi(model, cfg.psi_n, cfg.psi_replicas, cfg.budget, cfg.horizon, cfg.seed, exec)?;
    let d2_used = Estimate::new(d2.rungs[0].value, d2.rungs[0].se);
    let eta_used = Estimate::new(eta.rungs[0].value, eta.rungs[0].se);
    let c = ConstantEstimates::new(w.d1_tail, d2_used, eta_used, psi.indirect, gamma)?
        .with_provenance("d1", format!("tail route, {} traps", cfg.samples))
        .with_provenance("d2", format!("radius {}, {} snapshots", cfg.xi_k, records.len()))
        .with_provenance("eta", format!("quantile {}, {} snapshots", cfg.xi_quantile, records.len()))
        .with_provenance("psi", format!("indirect, n = {}, {} walks", cfg.psi_n, cfg.psi_replicas));

    let mut o = Outcome::default();
    for r in &d2.rungs {
        o.record("d2_rung", json!({ "k": r.k, "value": r.value, "se": r.se, "effective": r.effective }));
    }
    for r in &eta.rungs {
        o.record(
            "eta_rung",
            json!({ "quantile": r.quantile, "threshold": r.threshold, "value": r.value, "se": r.se, "count": r.count }),
        );
    }
    o.record(
        "psi",
        json!({
            "direct": est(psi.direct),
            "indirect": est(psi.indirect),
            "relative_gap": psi.relative_gap,
            "ks_statistic": psi.stationarity.statistic,
            "ks_p_value": psi.stationarity.p_value,
            "blocks": psi.blocks,
        }),
    );
    let provenance: serde_json::Map<String, Value> =
        c.provenance.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
    o.record(
        "constants",
        json!({
            "gamma": c.gamma,
            "d1": est(c.d1),
            "d2": est(c.d2),
            "eta": est(c.eta),
            "psi": est(c.psi),
            "xi": c.xi,
            "provenance": provenance,
        }),
    );
    o.row("gamma", format!("{gamma:.6}"));
    for (name, e) in [("d1", c.d1), ("d2", c.d2), ("eta", c.eta), ("psi", c.psi)] {
        o.row(name, format!("{:.4} +- {:.4}", e.value, e.se));
    }
    o.row("xi", format!("{:.4}", c.xi));
    Ok(o)
}

fn dump_trap(cfg: &ExperimentConfig, model: &Arc<Model>, exec: Execution) -> Result<Outcome, CliError> {
    let traps = map_replicas(cfg.count, exec, |i| {
        sample_trap(&model.harris.h, &model.bias, &mut substream(cfg.seed, Purpose::Trap, i))
    });
    let mut o = Outcome::default();
    let mut text = String::new();
    for (i, t) in traps.into_iter().enumerate() {
        let t = t?;
        o.record("trap", json!({ "index": i, "omega": t.omega_ent(), "depth": t.depth(), "vertices": t.len() }));
        text.push_str(&t.to_text());
        text.push('\n');
    }
    o.row("traps", cfg.count);
    o.files.push((TRAPS_FILE.into(), text.clone()));
    o.stdout = Some(text);
    Ok(o)
}
