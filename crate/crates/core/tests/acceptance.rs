//! Acceptance checks. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits nonzero on any FAIL.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use common::{s, vforge, write_corpus, write_table};
use vicinity_forge::corpus::{self, Corpus, Domain, Instance, SplitSpec};
use vicinity_forge::embedding::{self, EmbeddingTable, OovPolicy};
use vicinity_forge::schedule;
use vicinity_forge::seed;
use vicinity_forge::ssmba::{self, EmbeddingReconstructor, MaskPolicy};
use vicinity_forge::stats::{self, PairedOutcome, SignificanceConfig};
use vicinity_forge::vicinal::{self, MixupConfig, Parent, ThetaRule};

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn angle(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (d / (na * nb)).clamp(-1.0, 1.0).acos()
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// A random pair whose angle keeps away from 0 and π.
fn non_colinear_pair(rng: &mut ChaCha8Rng, d: usize) -> (Vec<f64>, Vec<f64>) {
    loop {
        let (a, b) = (gaussian(rng, d), gaussian(rng, d));
        let t = angle(&a, &b);
        if t > 1e-3 && t < std::f64::consts::PI - 1e-3 {
            return (a, b);
        }
    }
}

fn combine(lambda: f64, a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| lambda * x + y).collect()
}

fn mixag_angle_law() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for d in [2, 8, 64] {
        for (rule, div) in [(ThetaRule::HalfAlpha, 2.0), (ThetaRule::ThirdAlpha, 3.0)] {
            for _ in 0..1000 {
                let (a, b) = non_colinear_pair(&mut rng, d);
                let target = angle(&a, &b) / div;
                let cos_t = vicinal::cos_theta_from_rule(vicinal::cos_alpha(&a, &b).unwrap(), rule);
                let lambda = vicinal::mixag_lambda(&a, &b, cos_t).map_err(|e| e.to_string())?;
                let err = (angle(&combine(lambda, &a, &b), &a) - target).abs();
                worst = worst.max(err);
                ensure(err <= 1e-6, || format!("d={d} θ=α/{div}: angle off by {err:e}"))?;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("6000 pairs, max error {worst:.2e} rad, {elapsed:.2?}"))
}

fn mixag_symmetry() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for d in [2, 8, 64] {
        for _ in 0..1000 {
            let (a, b) = non_colinear_pair(&mut rng, d);
            let r = rng.random_range(0.1..10.0);
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            let a: Vec<f64> = a.iter().map(|x| x * r / na).collect();
            let b: Vec<f64> = b.iter().map(|x| x * r / nb).collect();
            let cos_t = vicinal::cos_theta_from_rule(vicinal::cos_alpha(&a, &b).unwrap(), ThetaRule::HalfAlpha);
            let lambda = vicinal::mixag_lambda(&a, &b, cos_t).map_err(|e| e.to_string())?;
            worst = worst.max((lambda - 1.0).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("|λ-1| reached {worst:e}"))?;
    Ok(format!("3000 equal-norm pairs, max |λ-1| {worst:.2e}"))
}

/// Solves angle(λa + b, a) = θ by bisection; the angle falls monotonically
/// from α at λ = 0 towards 0 as λ grows.
fn bisect_lambda(a: &[f64], b: &[f64], theta: f64) -> f64 {
    let f = |l: f64| angle(&combine(l, a, b), a) - theta;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn lambda_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for k in 0..500 {
        let d = [2, 8, 64][k % 3];
        let (a, b) = non_colinear_pair(&mut rng, d);
        let a: Vec<f64> = a.iter().map(|x| x * rng.random_range(0.5..2.0)).collect();
        let alpha = angle(&a, &b);
        let (rule, theta) = if k % 2 == 0 {
            (ThetaRule::HalfAlpha, alpha / 2.0)
        } else {
            (ThetaRule::ThirdAlpha, alpha / 3.0)
        };
        let cos_t = vicinal::cos_theta_from_rule(vicinal::cos_alpha(&a, &b).unwrap(), rule);
        let lambda = vicinal::mixag_lambda(&a, &b, cos_t).map_err(|e| e.to_string())?;
        let err = (lambda - bisect_lambda(&a, &b, theta)).abs();
        worst = worst.max(err);
        ensure(err <= 1e-6, || format!("instance {k}: closed form {lambda} differs by {err:e}"))?;
    }
    Ok(format!("500 instances, max |Δλ| {worst:.2e}"))
}

fn schedule_arithmetic() -> Check {
    for s in schedule::mixag_schedule(10, 0, 10).map_err(|e| e.to_string())? {
        ensure(s.pairs.len() == 9, || format!("MIXAG n=10 gave {} pairs", s.pairs.len()))?;
    }
    for s in schedule::mixup_schedule(30, 29, 0).map_err(|e| e.to_string())? {
        ensure(s.pairs.len() == 15, || format!("MIXUP n=30 gave {} pairs", s.pairs.len()))?;
    }
    for n in 2..=12 {
        let capacity = if n % 2 == 0 { n - 1 } else { n };
        for seed in 0..5 {
            let schedules = schedule::mixup_schedule(n, capacity, seed).map_err(|e| e.to_string())?;
            let mut seen = std::collections::BTreeSet::new();
            for s in &schedules {
                let mut used = vec![false; n];
                for &(i, j) in &s.pairs {
                    ensure(i != j && !used[i] && !used[j], || format!("n={n}: not a matching"))?;
                    used[i] = true;
                    used[j] = true;
                    ensure(seen.insert((i.min(j), i.max(j))), || format!("n={n} seed={seed}: pair ({i},{j}) repeated"))?;
                }
                ensure(s.pairs.len() == n / 2, || format!("n={n}: {} pairs", s.pairs.len()))?;
            }
            // every unordered pair used exactly once at exhaustion when n is even
            if n % 2 == 0 {
                ensure(seen.len() == n * (n - 1) / 2, || format!("n={n}: {} distinct pairs", seen.len()))?;
            }
            ensure(schedule::mixup_schedule(n, capacity + 1, seed).is_err(), || {
                format!("n={n}: no error past exhaustion")
            })?;
        }
    }
    Ok("MIXAG 9/iteration, MIXUP 15/iteration, n=2..12 no repeats".into())
}

fn synthetic_corpus(sizes: &[(Domain, usize)]) -> Corpus {
    let mut instances = Vec::new();
    for (domain, n) in sizes {
        for k in 0..*n {
            instances.push(
                Instance::new(format!("{}-{k}", domain.as_str()), vec!["w00".into()], Some((k % 2) as u8), "en", *domain)
                    .unwrap(),
            );
        }
    }
    Corpus::new("all", instances).unwrap()
}

fn split_arithmetic() -> Check {
    let all = synthetic_corpus(&[(Domain::Gao, 99), (Domain::Trac, 300), (Domain::Wul, 600)]);
    let spec = SplitSpec::new(1, 10, 0).map_err(|e| e.to_string())?;
    let (few, eval) = corpus::split_few_shot(&all, &spec).map_err(|e| e.to_string())?;
    ensure((few.len(), eval.len()) == (100, 899), || format!("ALL {}/{}", few.len(), eval.len()))?;
    for (domain, want) in [(Domain::Gao, (10, 89)), (Domain::Trac, (30, 270)), (Domain::Wul, (60, 540))] {
        let part = corpus::filter(&all, None, Some(domain));
        let (f, e) = corpus::split_few_shot(&part, &spec).map_err(|e| e.to_string())?;
        ensure((f.len(), e.len()) == want, || format!("{}: {}/{}", domain.as_str(), f.len(), e.len()))?;
        ensure(few.domain_counts()[&domain] == want.0, || format!("{} stratum in ALL", domain.as_str()))?;
    }
    Ok("100/899, 10/89, 30/270, 60/540".into())
}

fn random_table(rng: &mut ChaCha8Rng, vocab: usize, dim: usize) -> EmbeddingTable {
    EmbeddingTable::new(dim, (0..vocab).map(|i| (common::token(i), gaussian(rng, dim)))).unwrap()
}

fn mixup_endpoints() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let table = random_table(&mut rng, 50, 16);
    for _ in 0..200 {
        let texts: Vec<Vec<String>> = (0..2)
            .map(|_| (0..rng.random_range(1..8)).map(|_| common::token(rng.random_range(0..50))).collect())
            .collect();
        let labels = [rng.random_range(0..2u8), rng.random_range(0..2u8)];
        let seqs: Vec<_> = texts.iter().map(|t| embedding::encode(t, &table, OovPolicy::Error).unwrap()).collect();
        let i = Parent { id: "i", label: labels[0], embedding: &seqs[0] };
        let j = Parent { id: "j", label: labels[1], embedding: &seqs[1] };
        for (lambda, want) in [(1.0, 0), (0.0, 1)] {
            let out = vicinal::mixup_combine(i, j, lambda, &table).map_err(|e| e.to_string())?;
            ensure(out.tokens == texts[want] && out.label == labels[want], || {
                format!("λ={lambda}: {:?} vs {:?}", out.tokens, texts[want])
            })?;
        }
    }
    let cfg = MixupConfig::default();
    let mut rng = seed::substream(0, seed::MIXUP_LAMBDA, "acceptance");
    let n = 100_000;
    let mut sum = 0.0;
    for _ in 0..n {
        sum += vicinal::sample_lambda(&cfg, &mut rng).map_err(|e| e.to_string())?;
    }
    let mean = sum / n as f64;
    ensure((0.48..=0.52).contains(&mean), || format!("Beta(0.2, 0.2) mean {mean}"))?;
    Ok(format!("200 endpoint pairs exact, Beta mean {mean:.4}"))
}

/// P(χ²₁ > x) = 1 − 2∫₀^√x φ(z) dz, with the integral by composite Simpson.
fn chi2_1_sf_oracle(x: f64) -> f64 {
    let upper = x.sqrt();
    let n = 20_000;
    let h = upper / n as f64;
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut acc = phi(0.0) + phi(upper);
    for k in 1..n {
        acc += phi(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - 2.0 * acc * h / 3.0
}

fn statistics_oracles() -> Check {
    let m = stats::mcnemar_from_counts(10, 2);
    ensure((m.statistic - 4.0833).abs() <= 1e-4, || format!("statistic {}", m.statistic))?;
    let oracle = chi2_1_sf_oracle(m.statistic);
    ensure((m.p_value - oracle).abs() <= 1e-3 && (m.p_value - 0.0433).abs() <= 1e-3, || {
        format!("p {} vs oracle {oracle}", m.p_value)
    })?;

    let r = stats::pearson(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]).map_err(|e| e.to_string())?.r;
    ensure((r - 0.8).abs() <= 1e-9, || format!("pearson {r}"))?;

    let bonf = stats::bonferroni(&SignificanceConfig { alpha: 0.05, comparisons: 5 }).map_err(|e| e.to_string())?;
    ensure(bonf == 0.01, || format!("bonferroni {bonf}"))?;

    let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= 1e-12,
        (None, None) => true,
        _ => false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pct = |num: usize, den: usize| (den > 0).then(|| 100.0 * num as f64 / den as f64);
    for _ in 0..1000 {
        let len = rng.random_range(1..=50);
        let v: Vec<PairedOutcome> = (0..len)
            .map(|_| PairedOutcome::new(rng.random_range(0..2), rng.random_range(0..2), rng.random_range(0..2)))
            .collect();
        let count = |f: &dyn Fn(&PairedOutcome) -> bool| v.iter().filter(|o| f(o)).count();
        let neg_base = count(&|o| o.gold == 0 && o.pred_a == 0);
        let neg_flip = count(&|o| o.gold == 0 && o.pred_a == 0 && o.pred_b == 1);
        let pos_base = count(&|o| o.gold == 1 && o.pred_a == 0);
        let pos_flip = count(&|o| o.gold == 1 && o.pred_a == 0 && o.pred_b == 1);
        let got = stats::flip_rates(&v).map_err(|e| e.to_string())?;
        ensure(
            close(got.neg_degraded_pct, pct(neg_flip, neg_base)) && close(got.pos_gained_pct, pct(pos_flip, pos_base)),
            || format!("flip rates {got:?} on {v:?}"),
        )?;

        let gold: Vec<u8> = v.iter().map(|o| o.gold).collect();
        let pred: Vec<u8> = v.iter().map(|o| o.pred_b).collect();
        let tp = count(&|o| o.gold == 1 && o.pred_b == 1);
        let predicted = count(&|o| o.pred_b == 1);
        let actual = count(&|o| o.gold == 1);
        let frac = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        let pr = stats::precision_recall(&gold, &pred).map_err(|e| e.to_string())?;
        ensure(close(pr.precision, frac(tp, predicted)) && close(pr.recall, frac(tp, actual)), || format!("{pr:?}"))?;
    }
    Ok(format!("McNemar {:.4} p={:.4} (oracle {oracle:.4}), r=0.8, α'=0.01, 1000 brute-force collections", m.statistic, m.p_value))
}

fn ssmba_contracts() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let random_one = MaskPolicy::random_one(0);
    let words: Vec<String> = (0..5).map(common::token).collect();
    let lexicon = MaskPolicy::lexicon(words.clone(), 0).map_err(|e| e.to_string())?;
    let mut fallbacks = 0;
    for _ in 0..1000 {
        let tokens: Vec<String> = (0..rng.random_range(1..12)).map(|_| common::token(rng.random_range(0..20))).collect();
        let c = ssmba::corrupt(&tokens, &random_one, &mut rng);
        let masks = c.masked.iter().filter(|t| *t == ssmba::DEFAULT_MASK_TOKEN).count();
        ensure(c.positions.len() == 1 && masks == 1, || format!("RANDOM_ONE masked {masks} of {tokens:?}"))?;

        let hits: Vec<usize> = (0..tokens.len()).filter(|&p| words.contains(&tokens[p])).collect();
        let c = ssmba::corrupt(&tokens, &lexicon, &mut rng);
        if hits.is_empty() {
            fallbacks += 1;
            ensure(c.positions.len() == 1, || "zero-hit fallback did not fire".into())?;
        } else {
            ensure(c.positions == hits, || format!("LEXICON masked {:?}, hits {hits:?}", c.positions))?;
        }
        for (p, t) in c.masked.iter().enumerate() {
            let is_masked = c.positions.contains(&p);
            ensure(is_masked == (t == ssmba::DEFAULT_MASK_TOKEN) && (is_masked || *t == tokens[p]), || {
                format!("position {p} of {:?}", c.masked)
            })?;
        }
    }
    ensure(fallbacks > 0, || "no zero-hit texts were generated".into())?;

    let table = random_table(&mut rng, 40, 8);
    let mut instances = Vec::new();
    for k in 0..60 {
        let tokens = (0..rng.random_range(1..8)).map(|_| common::token(rng.random_range(0..40))).collect();
        instances.push(Instance::new(format!("x{k}"), tokens, Some(rng.random_range(0..2)), "it", Domain::Wul).unwrap());
    }
    let source = Corpus::new("src", instances).unwrap();
    let reconstructor = EmbeddingReconstructor::new(&table, 2).map_err(|e| e.to_string())?;
    let render = |threads: usize| -> std::result::Result<Vec<u8>, String> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let out = pool
            .install(|| ssmba::ssmba_generate(&source, &lexicon, &reconstructor, 2))
            .map_err(|e| e.to_string())?;
        for (k, inst) in out.iter().enumerate() {
            let parent = &source.instances[k / 2];
            ensure(inst.label == parent.label, || format!("{} changed label", inst.id))?;
        }
        let mut bytes = Vec::new();
        corpus::write_corpus(&out, &mut bytes).unwrap();
        Ok(bytes)
    };
    let first = render(1)?;
    ensure(first == render(1)? && first == render(4)?, || "SSMBA output differs between runs".into())?;
    Ok(format!("1000 corruptions ({fallbacks} fallbacks), labels kept, output byte-identical"))
}

fn end_to_end_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let table = write_table(dir.path());
    let corpus = write_corpus(dir.path(), "fewshot", "es", &[("GAO", 10), ("TRAC", 30), ("WUL", 60)], 9);
    let out = dir.path().join("aug.jsonl");
    let manifest = dir.path().join("aug.jsonl.manifest.json");
    let mut runs = 0;
    for method in ["mixup", "mixag", "ssmba-then-mixag"] {
        let mut reference: Option<(Vec<u8>, Vec<u8>)> = None;
        for threads in ["1", "4", "1", "4"] {
            let o = vforge(&[
                "--threads", threads, "augment", "--method", method, "--corpus", s(&corpus), "--embeddings",
                s(&table), "--out", s(&out), "--iterations", "3", "--seed", "42",
            ]);
            ensure(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())?;
            let got = (fs::read(&out).unwrap(), fs::read(&manifest).unwrap());
            ensure(!got.0.is_empty(), || format!("{method}: empty output"))?;
            match &reference {
                None => reference = Some(got),
                Some(r) => ensure(*r == got, || format!("{method}: output differs with {threads} threads"))?,
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} runs over 3 methods, corpus and manifest byte-identical"))
}

/// Runs the sibling test executables built for this package and adds this
/// harness's own time.
fn suite_runtime(own: Duration) -> Check {
    let exe = std::env::current_exe().map_err(|e| e.to_string())?;
    let deps = exe.parent().ok_or("no deps directory")?;
    let mut total = own;
    let mut ran = Vec::new();
    for prefix in ["vicinity_forge-", "cli-"] {
        let Some(path) = newest_executable(deps, prefix) else {
            return Err(format!("no {prefix}* test executable next to {}", exe.display()));
        };
        let start = Instant::now();
        let o = Command::new(&path).arg("--quiet").output().map_err(|e| e.to_string())?;
        total += start.elapsed();
        ensure(o.status.success(), || format!("{} failed", path.display()))?;
        ran.push(prefix.trim_end_matches('-'));
    }
    ensure(total < Duration::from_secs(60), || format!("suite took {total:?}"))?;
    Ok(format!("{} + acceptance in {total:.2?}", ran.join(" + ")))
}

fn newest_executable(dir: &Path, prefix: &str) -> Option<PathBuf> {
    fs::read_dir(dir)
        .ok()?
        .filter_map(|e| e.ok())
        .filter(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.starts_with(prefix) && !name.contains('.') && e.path().is_file()
        })
        .filter(|e| {
            use std::os::unix::fs::PermissionsExt;
            e.metadata().map(|m| m.permissions().mode() & 0o111 != 0).unwrap_or(false)
        })
        .max_by_key(|e| e.metadata().and_then(|m| m.modified()).ok())
        .map(|e| e.path())
}

fn main() -> ExitCode {
    let start = Instant::now();
    let criteria: [Criterion; 9] = [
        ("MIXAG angle law", mixag_angle_law),
        ("MIXAG symmetry", mixag_symmetry),
        ("lambda oracle equivalence", lambda_oracle),
        ("schedule arithmetic", schedule_arithmetic),
        ("split arithmetic", split_arithmetic),
        ("MIXUP endpoints", mixup_endpoints),
        ("statistics oracles", statistics_oracles),
        ("SSMBA contracts", ssmba_contracts),
        ("end-to-end determinism", end_to_end_determinism),
    ];
    let mut failed = 0;
    let mut report = |k: usize, name: &str, result: Check| {
        match result {
            Ok(detail) => println!("criterion {k:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {k:>2} FAIL  {name}: {detail}");
            }
        }
    };
    for (k, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        report(k + 1, name, result);
    }
    report(10, "suite runtime", suite_runtime(start.elapsed()));
    if failed == 0 {
        println!("acceptance: all 10 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
