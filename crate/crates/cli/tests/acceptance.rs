//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if
//! any criterion fails.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use agingrates_core::cohort::{
    associate_outcome, conover_posthoc, cost_compare, cumulative_costs, holm, kmeans_fit, kruskal_wallis,
    mann_whitney_with, Alternative, DEFAULT_RESTARTS, CostMode, Covariates, Exposure, MwMethod, MwOptions,
};
use agingrates_core::numeric::pearson;
use agingrates_core::select::{
    binarize, inter_model_similarity_of, intra_model_similarity, reconstruction_correlation, CorrelationMatrix,
};
use agingrates_core::synth::{generate, synth_events, PlantConfig, PLANTED_COST, PLANTED_OUTCOME};
use agingrates_core::vae::{gradients, infer_rates, init_model, loss, train, Batch, Trained};
use agingrates_core::{AgingModel, CrossSection, Matrix, ModelConfig, RateMatrix, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

// ---------------------------------------------------------------- 1

fn criterion_1() -> Outcome {
    let rows: [[f64; 3]; 5] = [
        [0.45, -0.05, 0.10],
        [-0.62, 0.31, 0.27],
        [0.12, 0.55, -0.15],
        [0.03, -0.24, 0.08],
        [-0.19, 0.40, 0.01],
    ];
    let corr = CorrelationMatrix {
        component_ids: (1..=5).map(|j| format!("f{j}")).collect(),
        dim_count: 3,
        values: Matrix::from_rows(&rows.map(|r| r.to_vec())).unwrap(),
        flagged: Vec::new(),
    };
    let b = binarize(&corr, 0.2).unwrap();
    let r = intra_model_similarity(&b).unwrap();
    let pair = |a: usize, c: usize| r.pairwise.iter().find(|p| p.a == a && p.b == c).map_or(f64::NAN, |p| p.score);
    let pairs = [pair(0, 1), pair(0, 2), pair(1, 2)];
    let pairs_ok = pairs.iter().zip([0.20, 0.50, 0.25]).all(|(g, w)| (g - w).abs() < 1e-12);
    let per_dim_ok = r.per_dim.iter().zip([0.350, 0.225, 0.375]).all(|(g, w)| (g - w).abs() < 1e-12);
    // Mean of the per-dimension scores; 0.475 would need a different averaging.
    let mean_ok = (r.intra_model - 0.95 / 3.0).abs() < 1e-12;
    check(
        pairs_ok && per_dim_ok && mean_ok,
        format!(
            "pairwise {pairs:?}, per-dim {:?}, mean {:.4}",
            r.per_dim, r.intra_model
        ),
    )
}

// ---------------------------------------------------------------- 2

fn small_cohort(n: usize, m: usize, seed: u64) -> CrossSection {
    generate(&SynthConfig {
        n_persons: n,
        n_features: m,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
    .cross_section
}

fn small_config(seed: u64) -> ModelConfig {
    ModelConfig {
        n_dims: 2,
        monotone_count: 2,
        poly_degrees: vec![0.5, 1.0, 2.0],
        encoder_widths: vec![5],
        decoder_widths: vec![4],
        learning_rate: 1e-3,
        batch_size: 64,
        max_epochs: 3,
        seed,
        ..ModelConfig::default()
    }
}

fn criterion_2() -> Outcome {
    let cs = small_cohort(200, 4, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (h, floor) = (1e-5, 1e-4);
    let mut worst = 0.0f64;
    let mut max_params = 0;
    let mut coords = 0;
    for seed in 0..20u64 {
        let (mut model, _) = init_model(&small_config(seed), &cs).unwrap();
        let dist = Normal::new(0.0, 0.5).unwrap();
        let flat: Vec<f64> = (0..model.params.n_params()).map(|_| dist.sample(&mut rng)).collect();
        model.params.assign(&flat);
        max_params = max_params.max(model.params.n_params());
        let x = model.scale(&cs).unwrap();
        let t = cs.t_scaled();
        let rows: Vec<usize> = (0..5).map(|_| rng.random_range(0..cs.n_persons())).collect();
        let eps: Vec<f64> = (0..rows.len() * 2).map(|_| normal(&mut rng)).collect();
        let batch = Batch {
            x: &x,
            t: &t,
            rows: &rows,
            eps: Some(&eps),
        };
        let analytic = gradients(&model, &batch, 0).unwrap().1.flatten();
        let mut probe = model.clone();
        for i in 0..flat.len() {
            let mut p = flat.clone();
            p[i] = flat[i] + h;
            probe.params.assign(&p);
            let up = loss(&probe, &batch, 0).unwrap().total;
            p[i] = flat[i] - h;
            probe.params.assign(&p);
            let down = loss(&probe, &batch, 0).unwrap().total;
            let numeric = (up - down) / (2.0 * h);
            let scale = analytic[i].abs().max(numeric.abs()).max(floor);
            worst = worst.max((analytic[i] - numeric).abs() / scale);
            coords += 1;
        }
    }
    check(
        worst <= 1e-4 && max_params <= 500,
        format!("20 models, {coords} coordinates, <= {max_params} params, worst relative error {worst:.2e}"),
    )
}

// ---------------------------------------------------------------- 3 and 5

struct Recovery {
    cohort_true: Matrix,
    train_cs: CrossSection,
    val_cs: CrossSection,
    first: Trained,
    cfg: ModelConfig,
    train_time: Duration,
}

fn recovery_config(seed: u64) -> ModelConfig {
    ModelConfig {
        n_dims: 2,
        sigma_r: 0.1,
        monotone_count: 6,
        encoder_widths: vec![64, 16],
        decoder_widths: vec![16, 64],
        learning_rate: 1e-4,
        batch_size: 4096,
        max_epochs: 300,
        seed,
        ..ModelConfig::default()
    }
}

fn recovery_setup() -> Recovery {
    let cohort = generate(&SynthConfig::default()).unwrap();
    let cs = &cohort.cross_section;
    let n = cs.n_persons();
    let n_train = n * 4 / 5;
    let train_rows: Vec<usize> = (0..n_train).collect();
    let val_rows: Vec<usize> = (n_train..n).collect();
    let train_cs = cs.select_rows(&train_rows);
    let val_cs = cs.select_rows(&val_rows);
    let cfg = recovery_config(1);
    let started = Instant::now();
    let first = train(&cfg, &train_cs, &val_cs).expect("training converges");
    Recovery {
        cohort_true: cohort.true_rates.select_rows(&val_rows),
        train_cs,
        val_cs,
        first,
        cfg,
        train_time: started.elapsed(),
    }
}

/// Best |Pearson| per true dimension over all matchings of inferred to
/// true dimensions (maximizing the summed |r|).
fn matched_correlations(inferred: &Matrix, truth: &Matrix) -> Vec<f64> {
    let d = truth.cols();
    let c: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            (0..inferred.cols())
                .map(|j| pearson(&truth.column(i), &inferred.column(j)).unwrap_or(0.0).abs())
                .collect()
        })
        .collect();
    fn search(c: &[Vec<f64>], i: usize, used: &mut Vec<bool>, cur: &mut Vec<f64>, best: &mut (f64, Vec<f64>)) {
        if i == c.len() {
            let s: f64 = cur.iter().sum();
            if s > best.0 {
                *best = (s, cur.clone());
            }
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                cur.push(c[i][j]);
                search(c, i + 1, used, cur, best);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (f64::NEG_INFINITY, Vec::new());
    search(&c, 0, &mut vec![false; inferred.cols()], &mut Vec::new(), &mut best);
    best.1
}

fn criterion_3(r: &Recovery) -> Outcome {
    let rates = infer_rates(&r.first.model, &r.val_cs).unwrap();
    let corr = matched_correlations(&rates.rates, &r.cohort_true);
    let recon = reconstruction_correlation(&r.first.model, &r.val_cs).unwrap();
    let budget = Duration::from_secs(15 * 60);
    check(
        corr.iter().all(|c| *c >= 0.8) && recon >= 0.85 && r.train_time <= budget,
        format!(
            "matched |r| {:?}, held-out reconstruction {recon:.4}, train {:.0}s (budget {}s), {} epochs",
            corr.iter().map(|c| format!("{c:.3}")).collect::<Vec<_>>(),
            r.train_time.as_secs_f64(),
            budget.as_secs(),
            r.cfg.max_epochs,
        ),
    )
}

fn criterion_5(r: &Recovery) -> Outcome {
    let started = Instant::now();
    let mut models: Vec<AgingModel> = vec![r.first.model.clone()];
    for seed in 2..=5 {
        match train(&r.cfg.with_seed(seed), &r.train_cs, &r.val_cs) {
            Ok(t) => models.push(t.model),
            Err(e) => return check(false, format!("seed {seed} failed: {e}")),
        }
    }
    let inter = inter_model_similarity_of(&models, &r.val_cs, 0.35).unwrap();
    let elapsed = started.elapsed() + r.train_time;
    check(
        inter >= 0.8 && elapsed <= Duration::from_secs(3600),
        format!("5 seeds, inter-model similarity {inter:.4} at delta 0.35, {:.0}s", elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let cs = small_cohort(100, 6, 11);
    let cfg = ModelConfig {
        n_dims: 3,
        monotone_count: 4,
        poly_degrees: agingrates_core::vae::default_poly_degrees(),
        ..small_config(11)
    };
    let (mut model, _) = init_model(&cfg, &cs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (draws, pairs) = (1000, 1000);
    let mut violations = 0usize;
    let mut checks = 0usize;
    for _ in 0..draws {
        let spread: f64 = rng.random_range(0.1..10.0);
        for v in model.params.monotone_raw.iter_mut() {
            *v = spread * normal(&mut rng);
        }
        for v in model.params.monotone_bias.iter_mut() {
            *v = normal(&mut rng);
        }
        for s in model.layout.signs.iter_mut() {
            *s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        }
        for _ in 0..pairs {
            let r: Vec<f64> = (0..3).map(|_| normal(&mut rng).exp()).collect();
            let t1: f64 = rng.random_range(0.0..1.5);
            let t2: f64 = t1 + rng.random_range(0.0..0.5);
            let x1 = model.decode(&r, t1).unwrap();
            let x2 = model.decode(&r, t2).unwrap();
            for (jj, &j) in model.layout.monotone.iter().enumerate() {
                checks += 1;
                if model.layout.signs[jj] * (x2[j] - x1[j]) < 0.0 {
                    violations += 1;
                }
            }
        }
    }
    check(
        violations == 0,
        format!("{draws} parameter draws x {pairs} (r, t) pairs, {checks} feature checks, {violations} violations"),
    )
}

// ---------------------------------------------------------------- 6

/// One-sided p-values of the observed U by full enumeration of splits.
fn enumerate_mw(a: &[f64], b: &[f64]) -> (f64, f64) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let ranks: Vec<f64> = pooled
        .iter()
        .map(|x| {
            let below = pooled.iter().filter(|y| *y < x).count() as f64;
            let equal = pooled.iter().filter(|y| *y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = ranks[..a.len()].iter().sum();
    let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        total += 1;
        if w <= observed + 1e-9 {
            le += 1;
        }
        if w >= observed - 1e-9 {
            ge += 1;
        }
    }
    (le as f64 / total as f64, ge as f64 / total as f64)
}

fn ks_uniform(mut p: Vec<f64>) -> f64 {
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    p.iter()
        .enumerate()
        .map(|(i, x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max)
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_mw = 0.0f64;
    let mut cases = 0;
    for n1 in 1..12usize {
        for n2 in 1..=(12 - n1) {
            for rep in 0..4 {
                let draw = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
                    (0..n)
                        .map(|_| if rep % 2 == 0 { normal(rng) } else { f64::from(rng.random_range(0..4u8)) })
                        .collect()
                };
                let a = draw(&mut rng, n1);
                let b = draw(&mut rng, n2);
                let (less, greater) = enumerate_mw(&a, &b);
                for (alt, want) in [
                    (Alternative::Less, less),
                    (Alternative::Greater, greater),
                    (Alternative::TwoSided, (2.0 * less.min(greater)).min(1.0)),
                ] {
                    let opts = MwOptions {
                        alternative: alt,
                        method: MwMethod::Exact,
                        ..MwOptions::default()
                    };
                    let got = mann_whitney_with(&a, &b, &opts).unwrap().p_value;
                    worst_mw = worst_mw.max((got - want).abs());
                    cases += 1;
                }
            }
        }
    }

    let sims = 10_000;
    let mut kw = Vec::with_capacity(sims);
    let mut conover = Vec::with_capacity(sims);
    for _ in 0..sims {
        let groups: Vec<Vec<f64>> = (0..3).map(|_| (0..30).map(|_| normal(&mut rng)).collect()).collect();
        kw.push(kruskal_wallis(&groups).unwrap().p_value);
        conover.push(conover_posthoc(&groups).unwrap()[0].result.p_value);
    }
    let (ks_kw, ks_con) = (ks_uniform(kw), ks_uniform(conover));

    let holm_cases: [(&[f64], &[f64]); 4] = [
        (&[0.01, 0.04, 0.03], &[0.03, 0.06, 0.06]),
        (&[0.01, 0.02, 0.03, 0.04], &[0.04, 0.06, 0.06, 0.06]),
        (&[0.5, 0.001, 0.2], &[0.5, 0.003, 0.4]),
        (&[0.4, 0.3], &[0.6, 0.6]),
    ];
    let holm_ok = holm_cases
        .iter()
        .all(|(p, want)| holm(p).iter().zip(*want).all(|(g, w)| (g - w).abs() < 1e-12));

    check(
        worst_mw < 1e-12 && ks_kw <= 0.02 && ks_con <= 0.02 && holm_ok,
        format!(
            "exact MW vs enumeration: {cases} cases, max |dp| {worst_mw:.1e}; KS Kruskal-Wallis {ks_kw:.4}, Conover {ks_con:.4} over {sims} null sims; Holm {}",
            if holm_ok { "matches" } else { "differs" }
        ),
    )
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let reps = 100;
    let (mut or1_sig, mut or2_null, mut mw1_sig, mut mw2_null) = (0, 0, 0, 0);
    for rep in 0..reps as u64 {
        let cohort = generate(&SynthConfig {
            n_persons: 10_000,
            n_features: 4,
            seed: 7000 + rep,
            ..SynthConfig::default()
        })
        .unwrap();
        let plant = PlantConfig {
            effect_dim: 0,
            strength: 1.0,
            seed: 8000 + rep,
            ..PlantConfig::default()
        };
        let events = synth_events(&cohort, &plant).unwrap();
        let cs = &cohort.cross_section;
        let rates = RateMatrix::new(cs.person_ids.clone(), cohort.true_rates.clone(), cs.age.clone()).unwrap();
        let cov = Covariates {
            sex: &cs.sex,
            window: &cs.window,
        };
        let fit = associate_outcome(&rates, &cov, &events.diagnoses, PLANTED_OUTCOME, Exposure::Dimensions)
            .unwrap()
            .fit;
        let col = |name: &str| fit.names.iter().position(|n| n == name).unwrap();
        let (r1, r2) = (col("r1"), col("r2"));
        if fit.odds_ratios[r1] > 1.0 && fit.p_values[r1] < 0.01 {
            or1_sig += 1;
        }
        if (0.9..=1.1).contains(&fit.odds_ratios[r2]) {
            or2_null += 1;
        }
        let costs = cumulative_costs(&events.costs, Some(PLANTED_COST), &cs.person_ids);
        let report = cost_compare(&rates, &costs, CostMode::FastVsSlow, 90.0, 10.0).unwrap();
        if report.tests[0].p_value < 0.05 {
            mw1_sig += 1;
        }
        if report.tests[1].p_value >= 0.05 {
            mw2_null += 1;
        }
    }
    let rate = |k: usize| k as f64 / reps as f64;
    check(
        [or1_sig, or2_null, mw1_sig, mw2_null].iter().all(|k| rate(*k) >= 0.9),
        format!(
            "{reps} replicates, n = 10^4: OR1 > 1 with p < 0.01 in {:.2}; OR2 in [0.9, 1.1] in {:.2}; fast1 vs slow1 significant in {:.2}; fast2 vs slow2 not significant in {:.2}",
            rate(or1_sig),
            rate(or2_null),
            rate(mw1_sig),
            rate(mw2_null)
        ),
    )
}

// ---------------------------------------------------------------- 8

/// Minimum inertia over every labeling of the points into at most k groups.
fn exhaustive_inertia(x: &[f64], k: usize) -> f64 {
    let n = x.len();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut sum = [0.0f64; 3];
        let mut sq = [0.0f64; 3];
        let mut cnt = [0usize; 3];
        for (v, l) in x.iter().zip(&labels) {
            sum[*l] += v;
            sq[*l] += v * v;
            cnt[*l] += 1;
        }
        let inertia: f64 = (0..k)
            .filter(|c| cnt[*c] > 0)
            .map(|c| sq[c] - sum[c] * sum[c] / cnt[c] as f64)
            .sum();
        best = best.min(inertia);
        let mut i = 0;
        loop {
            if i == n {
                return best.max(0.0);
            }
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
    }
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut instances, mut misses) = (0, 0);
    let mut worst_gap = 0.0f64;
    for n in 1..=12usize {
        for k in 1..=n.min(3) {
            for rep in 0..30 {
                let x: Vec<f64> = (0..n)
                    .map(|_| match rep % 3 {
                        0 => rng.random_range(0.0..10.0),
                        1 => f64::from(rng.random_range(0..5u8)),
                        _ => f64::from(rng.random_range(0..3u8)) * 5.0 + 0.3 * normal(&mut rng),
                    })
                    .collect();
                let points = Matrix::from_vec(n, 1, x.clone()).unwrap();
                let fit = kmeans_fit(&points, k, rep as u64, DEFAULT_RESTARTS).unwrap();
                // recompute inertia from the assignment so the oracle checks the partition itself
                let mut inertia = 0.0;
                for c in 0..k {
                    let members: Vec<f64> = x.iter().zip(&fit.assignments).filter(|(_, a)| **a == c).map(|(v, _)| *v).collect();
                    if !members.is_empty() {
                        let m = members.iter().sum::<f64>() / members.len() as f64;
                        inertia += members.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
                    }
                }
                let opt = exhaustive_inertia(&x, k);
                let gap = inertia - opt;
                worst_gap = worst_gap.max(gap);
                instances += 1;
                if gap > 1e-9 * (1.0 + opt) {
                    misses += 1;
                }
            }
        }
    }
    check(
        misses == 0,
        format!("{instances} instances (n <= 12, k <= 3, {DEFAULT_RESTARTS} restarts), {misses} above optimum, worst gap {worst_gap:.1e}"),
    )
}

// ---------------------------------------------------------------- 9

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_agingrates"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn pipeline(root: &Path, inputs: &Path) -> Result<(), String> {
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let d = |name: &str| s(&root.join(name));
    let i = |name: &str| s(&inputs.join(name));
    cli(&[
        "clean", "--seed", "5", "--out", &d("clean"), "--input", &i("observations.csv"), "--specs",
        &i("specs.csv"), "--demographics", &i("demographics.csv"),
    ])?;
    let cs = root.join("clean/cross_section.csv");
    cli(&[
        "train", "--seed", "5", "--out", &d("train"), "--data", &s(&cs), "--n-dims", "2", "--max-epochs", "40",
        "--batch-size", "512", "--learning-rate", "0.001",
    ])?;
    cli(&["rates", "--seed", "5", "--out", &d("rates"), "--model", &d("train/model.json"), "--data", &s(&cs)])?;
    cli(&["cluster", "--seed", "5", "--out", &d("cluster"), "--rates", &d("rates/rates.csv")])?;
    cli(&[
        "associate", "--seed", "5", "--out", &d("associate"), "--rates", &d("rates/rates.csv"), "--data", &s(&cs),
        "--outcomes", &i("diagnoses.csv"), "--clusters", &d("cluster/clusters.csv"),
    ])?;
    cli(&["costs", "--seed", "5", "--out", &d("costs"), "--rates", &d("rates/rates.csv"), "--costs", &i("costs.csv")])?;
    cli(&["report", "--seed", "5", "--out", &d("report"), "--analysis-dir", &s(root)])?;
    Ok(())
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
    let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect(root, &p, out);
        } else if p.file_name().unwrap() != "manifest.json" {
            out.push((p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap()));
        }
    }
}

fn criterion_9(budget: Duration) -> Outcome {
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let inputs = tmp.path().join("inputs");
    let run = || -> Result<(Vec<(String, Vec<u8>)>, Vec<(String, Vec<u8>)>), String> {
        cli(&["synth", "--seed", "5", "--out", inputs.to_str().unwrap(), "--n-persons", "5000", "--raw"])?;
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        pipeline(&a, &inputs)?;
        pipeline(&b, &inputs)?;
        let (mut fa, mut fb) = (Vec::new(), Vec::new());
        collect(&a, &a, &mut fa);
        collect(&b, &b, &mut fb);
        Ok((fa, fb))
    };
    match run() {
        Err(e) => check(false, format!("pipeline failed: {e}")),
        Ok((fa, fb)) => {
            let names_match = fa.iter().map(|f| &f.0).eq(fb.iter().map(|f| &f.0));
            let differing: Vec<&str> = fa
                .iter()
                .zip(&fb)
                .filter(|(x, y)| x.1 != y.1)
                .map(|(x, _)| x.0.as_str())
                .collect();
            let elapsed = started.elapsed();
            check(
                names_match && differing.is_empty() && fa.len() >= 15 && elapsed <= budget,
                format!(
                    "{} output files per run, {} differ {:?}, {:.0}s (budget {}s)",
                    fa.len(),
                    differing.len(),
                    differing,
                    elapsed.as_secs_f64(),
                    budget.as_secs()
                ),
            )
        }
    }
}

// ----------------------------------------------------------------

fn report(n: usize, name: &str, started: Instant, outcome: Outcome) -> bool {
    println!(
        "criterion {n} {}: {name}: {} [{:.1}s]",
        if outcome.pass { "PASS" } else { "FAIL" },
        outcome.detail,
        started.elapsed().as_secs_f64()
    );
    outcome.pass
}

fn timed(n: usize, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let mut outcome = f();
    if started.elapsed() > limit {
        outcome.pass = false;
        outcome.detail.push_str(&format!("; exceeded {}s limit", limit.as_secs()));
    }
    report(n, name, started, outcome)
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters: run everything only when unfiltered.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    // ACCEPTANCE_ONLY=3,5 restricts the run to the listed criteria.
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|c| c.trim().parse().ok()).collect());
    let want = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));
    let mut all = true;
    if want(1) {
        all &= timed(1, "intra-model similarity worked example", Duration::from_secs(1), criterion_1);
    }
    if want(2) {
        all &= timed(2, "gradient correctness", Duration::from_secs(60), criterion_2);
    }
    let recovery = (want(3) || want(5)).then(|| {
        let started = Instant::now();
        (recovery_setup(), started)
    });
    if let Some((r, started)) = &recovery {
        if want(3) {
            all &= report(3, "synthetic rate recovery", *started, criterion_3(r));
        }
    }
    if want(4) {
        all &= timed(4, "monotone decoder path", Duration::from_secs(60), criterion_4);
    }
    if let Some((r, _)) = &recovery {
        if want(5) {
            let started = Instant::now();
            all &= report(5, "inter-model stability", started, criterion_5(r));
        }
    }
    if want(6) {
        all &= timed(6, "statistical oracles", Duration::from_secs(300), criterion_6);
    }
    if want(7) {
        all &= timed(7, "planted effect end to end", Duration::from_secs(600), criterion_7);
    }
    if want(8) {
        all &= timed(8, "k-means exhaustive oracle", Duration::from_secs(60), criterion_8);
    }
    if want(9) {
        let started = Instant::now();
        all &= report(9, "CLI pipeline determinism", started, criterion_9(Duration::from_secs(2 * 15 * 60)));
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
