use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use fairvote::competence::{improvement_report, restricted_competence, Restriction};
use fairvote::dataio::{
    load_score_table, save_score_table, stratified_kfold, synthesize, write_fold_assignment, Correlation,
    LatentClass, ScoreModel, ScoreTable, Split, SynthConfig,
};
use fairvote::ensemble::{build_ensemble, predict, FairEnsemble};
use fairvote::evaluation::{
    baseline_frontier, bootstrap_ci, evaluate_ensembles, fair_auc, fair_auc_with_ci, FairnessMetric, FrontierData,
};
use fairvote::fairfit::{ConstraintKind, FairnessConstraint, GridSpec};
use fairvote::theory::min_observed_recall;
use fairvote::{Error, Result};
use serde_json::json;

use crate::args::{
    Command, DiagnoseArgs, FairaucArgs, FitArgs, FitOptions, ModelArg, PredictArgs, ReplayArgs, SamplesizeArgs,
    SimulateArgs,
};
use crate::manifest::{manifest_path, sibling, write_file, RunManifest};

pub fn dispatch(command: &Command, argv: &[String]) -> Result<()> {
    match command {
        Command::Fit(a) => fit(a, argv),
        Command::Predict(a) => predict_cmd(a, argv),
        Command::Diagnose(a) => diagnose(a, argv),
        Command::Fairauc(a) => fairauc(a, argv),
        Command::Samplesize(a) => samplesize(a, argv),
        Command::Simulate(a) => simulate(a, argv),
        Command::Replay(a) => replay(a),
    }
}

fn constraint_of(kind: ConstraintKind, bound: Option<f64>) -> Result<FairnessConstraint> {
    match (kind, bound) {
        (ConstraintKind::None, _) => Ok(FairnessConstraint::none()),
        (kind, Some(b)) => FairnessConstraint::new(kind, b),
        (kind, None) => Err(Error::InvalidArgument(format!("--bound is required with --constraint {}", kind.as_str()))),
    }
}

fn load_ensemble(path: &Path) -> Result<FairEnsemble> {
    let text = fs::read_to_string(path).map_err(|e| Error::MalformedFile(format!("{}: {e}", path.display())))?;
    FairEnsemble::from_json(&text)
}

fn fit_ensemble(table: &ScoreTable, opts: &FitOptions, constraint: &FairnessConstraint) -> Result<FairEnsemble> {
    let grid = GridSpec::new(opts.grid_resolution, opts.grid_range)?;
    let folds = stratified_kfold(table, opts.folds.unwrap_or(table.n_members()), opts.seed)?;
    build_ensemble(table, &folds, constraint, &grid, opts.tie_break)
}

fn warn_small_cells(table: &ScoreTable, folds: &fairvote::dataio::FoldAssignment) {
    for c in folds.small_cells() {
        eprintln!(
            "warning: cell (label {}, group {}) has {} samples for {} folds",
            u8::from(c.label),
            table.group_set()[c.group],
            c.size,
            folds.n_folds
        );
    }
}

fn fit(a: &FitArgs, argv: &[String]) -> Result<()> {
    let table = load_score_table(&a.scores)?;
    let constraint = constraint_of(a.fit.constraint, a.fit.bound)?;
    let grid = GridSpec::new(a.fit.grid_resolution, a.fit.grid_range)?;
    let folds = stratified_kfold(&table, a.fit.folds.unwrap_or(table.n_members()), a.fit.seed)?;
    warn_small_cells(&table, &folds);
    let ensemble = build_ensemble(&table, &folds, &constraint, &grid, a.fit.tie_break)?;
    let fallbacks = ensemble.diagnostics.iter().filter(|d| d.fallback_used).count();
    if fallbacks > 0 {
        eprintln!("warning: {fallbacks} of {} members could not meet {constraint}", ensemble.n_members);
    }

    let mut m = RunManifest::new("fit", argv, a, Some(a.fit.seed))?;
    m.input(&a.scores)?;
    write_file(&a.out, ensemble.to_json()?.as_bytes())?;
    m.output(&a.out)?;
    if let Some(path) = &a.folds_out {
        let mut buf = Vec::new();
        write_fold_assignment(&table, &folds, &mut buf)?;
        write_file(path, &buf)?;
        m.output(path)?;
    }
    m.write(&manifest_path(&a.out))
}

fn predict_cmd(a: &PredictArgs, argv: &[String]) -> Result<()> {
    let ensemble = load_ensemble(&a.ensemble)?;
    let table = load_score_table(&a.scores)?;
    let out = predict(&ensemble, &table, a.split.split())?;
    let mut buf = Vec::new();
    out.write_csv(&mut buf)?;

    let mut m = RunManifest::new("predict", argv, a, None)?;
    m.input(&a.ensemble)?;
    m.input(&a.scores)?;
    write_file(&a.out, &buf)?;
    m.output(&a.out)?;
    m.write(&manifest_path(&a.out))
}

fn parse_restrictions(spec: &str, n_groups: usize) -> Result<Vec<Restriction>> {
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item {
            "all" => out.push(Restriction::All),
            "positives" => out.push(Restriction::Positives),
            "negatives" => out.push(Restriction::Negatives),
            "group-positives" => out.extend((0..n_groups).map(Restriction::GroupPositives)),
            "group-negatives" => out.extend((0..n_groups).map(Restriction::GroupNegatives)),
            other => return Err(Error::InvalidArgument(format!("unknown restriction `{other}`"))),
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("no restrictions requested".into()));
    }
    Ok(out)
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect::<String>()
        .trim_end_matches('_')
        .to_string()
}

fn diagnose(a: &DiagnoseArgs, argv: &[String]) -> Result<()> {
    let ensemble = load_ensemble(&a.ensemble)?;
    let table = load_score_table(&a.scores)?;
    let restrictions = parse_restrictions(&a.restrictions, table.n_groups())?;
    let out = predict(&ensemble, &table, a.split.split())?;
    let labels = table.labels_of(&out.indices)?;
    let groups = table.groups_of(&out.indices);
    let names = table.group_set();

    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut rows = Vec::new();
    for r in restrictions {
        let name = r.name(names);
        let curve = match restricted_competence(&out.member_predictions, &labels, &groups, r) {
            Ok(c) => c,
            Err(Error::EmptyRestriction) => {
                rows.push(json!({ "restriction": name, "n_samples": 0, "skipped": "no samples" }));
                continue;
            }
            Err(e) => return Err(e),
        };
        let file = format!("competence/{}.csv", file_stem(&name));
        let mut csv = String::from("t,c_value\n");
        for (t, c) in curve.t_grid.iter().zip(&curve.c_values) {
            csv.push_str(&format!("{t},{c}\n"));
        }
        files.push((file.clone(), csv.into_bytes()));
        let improvement = match improvement_report(&out.member_predictions, &out.predictions, &labels, &groups, r) {
            Ok(rep) => serde_json::to_value(rep).map_err(|e| Error::Io(e.to_string()))?,
            Err(Error::ZeroMemberError { ensemble_error }) => {
                json!({ "undefined": "no member errs", "ensemble_error": ensemble_error })
            }
            Err(e) => return Err(e),
        };
        rows.push(json!({
            "restriction": name,
            "n_samples": curve.n_samples,
            "violation": curve.violation,
            "competent": curve.is_competent(),
            "curve": file,
            "improvement": improvement,
        }));
    }
    let groupwise = fairvote::competence::groupwise_competence(&out.member_predictions, &labels, &groups, table.n_groups())?;
    let summary = json!({
        "n_samples": out.indices.len(),
        "n_members": ensemble.n_members,
        "constraint": ensemble.constraint.to_string(),
        "groupwise": {
            "competent": groupwise.competent,
            "mean_violation": groupwise.mean_violation(),
            "skipped": groupwise.skipped().iter().map(|&g| names[g].clone()).collect::<Vec<_>>(),
        },
        "restrictions": rows,
    });
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    files.push(("summary.json".into(), text.into_bytes()));

    let mut m = RunManifest::new("diagnose", argv, a, None)?;
    m.input(&a.ensemble)?;
    m.input(&a.scores)?;
    files.sort_by(|x, y| x.0.cmp(&y.0));
    for (rel, bytes) in &files {
        let path = a.out.join(rel);
        write_file(&path, bytes)?;
        m.output(&path)?;
    }
    m.write(&a.out.join("manifest.json"))
}

/// `start:end:count` over [0, 1], for baseline thresholds.
fn parse_thresholds(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("thresholds `{spec}` are not start:end:count"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].parse().map_err(|_| bad())?;
    let end: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    if count < 2 || !(0.0..=1.0).contains(&start) || !(0.0..=1.0).contains(&end) || start > end {
        return Err(bad());
    }
    Ok((0..count).map(|j| start + (end - start) * (j as f64 / (count - 1) as f64)).collect())
}

fn parse_list(spec: &str, what: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("{what}: `{s}` is not a number")))
        })
        .collect()
}

fn fairauc(a: &FairaucArgs, argv: &[String]) -> Result<()> {
    let table = load_score_table(&a.scores)?;
    let mut ensembles = a.ensemble.iter().map(|p| load_ensemble(p)).collect::<Result<Vec<_>>>()?;
    if let Some(sweep) = &a.sweep {
        for bound in parse_list(sweep, "--sweep")? {
            let c = constraint_of(a.fit.constraint, Some(bound))?;
            ensembles.push(fit_ensemble(&table, &a.fit, &c)?);
        }
    }
    let first = ensembles
        .first()
        .ok_or_else(|| Error::InvalidArgument("give --ensemble files or a --sweep".into()))?;
    let metric = FairnessMetric::for_constraint(first.constraint.kind);
    let data = evaluate_ensembles(&ensembles, &table, Split::Test, metric)?;
    let result = fair_auc_with_ci(&data, &a.t_grid, a.bootstrap_n, a.bootstrap_level, a.fit.seed)?;

    let mut frontier_csv = Vec::new();
    data.frontier()?.write_csv(&mut frontier_csv)?;
    let mut outputs = vec![(sibling(&a.out, "frontier.csv"), frontier_csv)];

    let mut report = json!({
        "metric": metric,
        "configs": ensembles.iter().map(|e| e.constraint.to_string()).collect::<Vec<_>>(),
        "fair_auc": result,
        "baseline": null,
        "difference": null,
    });
    if let Some(spec) = &a.baseline_thresholds {
        let mut base = baseline_frontier(
            &table,
            a.baseline_member,
            &parse_thresholds(spec)?,
            &a.t_grid.values(),
            a.select,
            metric,
        )?;
        base.include_constant_positive = true;
        let base_result = fair_auc_with_ci(&base, &a.t_grid, a.bootstrap_n, a.bootstrap_level, a.fit.seed)?;
        let mut csv = Vec::new();
        base.frontier()?.write_csv(&mut csv)?;
        outputs.push((sibling(&a.out, "baseline.csv"), csv));
        report["difference"] = difference(&data, &base, a)?;
        report["baseline"] = serde_json::to_value(base_result).map_err(|e| Error::Io(e.to_string()))?;
        report["select"] = json!(a.select);
    }

    let mut m = RunManifest::new("fairauc", argv, a, Some(a.fit.seed))?;
    m.input(&a.scores)?;
    for p in &a.ensemble {
        m.input(p)?;
    }
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    write_file(&a.out, text.as_bytes())?;
    m.output(&a.out)?;
    for (path, bytes) in &outputs {
        write_file(path, bytes)?;
        m.output(path)?;
    }
    m.write(&manifest_path(&a.out))
}

/// Paired bootstrap of `FairAUC(ensembles) - FairAUC(baseline)`.
fn difference(ens: &FrontierData, base: &FrontierData, a: &FairaucArgs) -> Result<serde_json::Value> {
    let ts = a.t_grid.values();
    let diff = |idx: &[usize]| Ok(fair_auc(&ens.frontier_on(idx)?, &ts)? - fair_auc(&base.frontier_on(idx)?, &ts)?);
    let all: Vec<usize> = (0..ens.len()).collect();
    let value = diff(&all)?;
    let ci = bootstrap_ci(ens.len(), diff, a.bootstrap_n, a.bootstrap_level, a.fit.seed)?;
    Ok(json!({ "value": value, "ci_low": ci.low.min(value), "ci_high": ci.high.max(value) }))
}

fn samplesize(a: &SamplesizeArgs, argv: &[String]) -> Result<()> {
    let req = min_observed_recall(a.m, a.n, a.alpha, a.k)?;
    let text = req.to_kv();
    match &a.out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            let mut m = RunManifest::new("samplesize", argv, a, None)?;
            write_file(path, text.as_bytes())?;
            m.output(path)?;
            m.write(&manifest_path(path))
        }
    }
}

fn synth_config(a: &SimulateArgs) -> Result<SynthConfig> {
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).map_err(|e| Error::MalformedFile(format!("{}: {e}", path.display())))?;
        let mut cfg: SynthConfig =
            serde_json::from_str(&text).map_err(|e| Error::MalformedFile(format!("{}: {e}", path.display())))?;
        if let Some(seed) = a.seed {
            cfg.seed = seed;
        }
        return Ok(cfg);
    }
    let group_names: Vec<String> = a.groups.split(',').map(|s| s.trim().to_string()).collect();
    let g = group_names.len();
    let cell_counts = a
        .counts
        .split(',')
        .map(|pair| {
            let bad = || Error::InvalidConfig(format!("count `{pair}` is not neg:pos"));
            let (neg, pos) = pair.trim().split_once(':').ok_or_else(bad)?;
            Ok([neg.parse().map_err(|_| bad())?, pos.parse().map_err(|_| bad())?])
        })
        .collect::<Result<Vec<[usize; 2]>>>()?;
    let per_group = |spec: &str, what: &str| -> Result<Vec<f64>> {
        let v = parse_list(spec, what)?;
        if v.len() != g {
            return Err(Error::InvalidConfig(format!("{what} needs {g} values, got {}", v.len())));
        }
        Ok(v)
    };
    let model = match a.model {
        ModelArg::Latent => {
            let pos = per_group(&a.pos_mean, "--pos-mean")?;
            let neg = per_group(&a.neg_mean, "--neg-mean")?;
            let class = |mean| LatentClass { mean, spread: a.spread };
            ScoreModel::Latent {
                classes: neg.iter().zip(&pos).map(|(&n, &p)| [class(n), class(p)]).collect(),
            }
        }
        ModelArg::Bernoulli => ScoreModel::Bernoulli {
            correct: per_group(&a.correct, "--correct")?.iter().map(|&p| vec![p; a.members]).collect(),
        },
    };
    Ok(SynthConfig {
        n_members: a.members,
        group_names,
        cell_counts,
        model,
        correlation: if a.rho == 0.0 {
            Correlation::Independent
        } else {
            Correlation::SharedLatent { rho: a.rho }
        },
        group_noise: a.group_noise,
        test_fraction: a.test_fraction,
        validation_fraction: a.validation_fraction,
        seed: a.seed.unwrap_or(0),
    })
}

fn simulate(a: &SimulateArgs, argv: &[String]) -> Result<()> {
    let cfg = synth_config(a)?;
    let mut table = synthesize(&cfg)?;
    if a.unlabeled_test {
        let samples = table
            .samples()
            .iter()
            .cloned()
            .map(|mut s| {
                if s.record.split == Split::Test {
                    s.record.label = None;
                }
                s
            })
            .collect();
        table = ScoreTable::new(table.group_set().to_vec(), table.n_members(), samples)?;
    }
    let params: BTreeMap<&str, serde_json::Value> = [
        ("args", serde_json::to_value(a).map_err(|e| Error::Io(e.to_string()))?),
        ("resolved_config", serde_json::to_value(&cfg).map_err(|e| Error::Io(e.to_string()))?),
    ]
    .into_iter()
    .collect();
    let mut m = RunManifest::new("simulate", argv, &params, Some(cfg.seed))?;
    if let Some(path) = &a.config {
        m.input(path)?;
    }
    save_score_table(&table, &a.out)?;
    m.output(&a.out)?;
    m.write(&manifest_path(&a.out))
}

fn replay(a: &ReplayArgs) -> Result<()> {
    let recorded = RunManifest::load(&a.manifest)?;
    RunManifest::verify(&recorded.inputs, "input")?;
    let cli = crate::reparse(&recorded.argv)?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(Error::MalformedFile("a manifest cannot record a replay".into()));
    }
    dispatch(&cli.command, &recorded.argv)?;
    RunManifest::verify(&recorded.outputs, "output")?;
    eprintln!("replayed `{}`: {} outputs reproduced", recorded.command, recorded.outputs.len());
    Ok(())
}
