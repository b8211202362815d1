//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use dagrpo::grpo::{
    compute_advantages, difficulty_weight, objective, rollout_with_resampling, surrogate,
    GroupBatch, GrpoConfig, KlMode, PolicySampler, ResponseSampler, RolloutQuestion,
};
use dagrpo::harness::{train, ExperimentConfig, Mode};
use dagrpo::heatmap::{
    cosine_distance, layer_heatmap, project, synth_features, BatchNorm, FeatureGrid, FieldKind,
    Maps, ProjectorConfig, ProjectorMode, ProjectorParams, Rect, SynthSpec,
};
use dagrpo::policy::{logprob, ContextMode, PolicyParams, Response, Vocabulary};
use dagrpo::rewards::{
    classification_reward, cosine_reward, format_reward, score, CosineSchedule, Outcome,
    RewardConfig,
};
use dagrpo::taskgen::{mask_to_region, Mask, RegionLabel};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

// 1. advantages against direct evaluation

fn direct_advantages(r: &[f64]) -> Vec<f64> {
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let std = (r.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
    if std <= 1e-6 {
        return vec![0.0; r.len()];
    }
    r.iter().map(|x| (x - mean) / std).collect()
}

fn criterion_1() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut max_err: f64 = 0.0;
    let mut equal_ok = true;
    for case in 0..10_000 {
        let g = rng.random_range(2..=16);
        let totals: Vec<f64> = if case % 10 == 0 {
            vec![rng.random_range(-4.0..5.0); g]
        } else {
            (0..g).map(|_| rng.random_range(-4.0..5.0)).collect()
        };
        let got = compute_advantages(&totals, 1e-6).expect("valid group");
        if case % 10 == 0 {
            equal_ok &= got.iter().all(|&a| a == 0.0);
        }
        for (a, b) in got.iter().zip(direct_advantages(&totals)) {
            max_err = max_err.max((a - b).abs());
        }
    }
    let el = t0.elapsed();
    verdict(
        max_err < 1e-9 && equal_ok && within(el, 5.0),
        format!(
            "max |error| {max_err:.2e} over 10000 groups, all-equal groups zero: {equal_ok}, {:.2}s",
            el.as_secs_f64()
        ),
    )
}

// 2. difficulty weight

fn criterion_2() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut ok = true;
    let mut cases = 0;
    for g in 2..=16usize {
        for wrong in 0..=g {
            for _ in 0..4 {
                let mut flags: Vec<bool> = (0..g).map(|i| i >= wrong).collect();
                // any arrangement of the same count gives the same weight
                for i in (1..g).rev() {
                    flags.swap(i, rng.random_range(0..=i));
                }
                let w = difficulty_weight(&flags);
                ok &= w == wrong as f64 / g as f64 + 1.0 && (1.0..=2.0).contains(&w);
                cases += 1;
            }
        }
    }
    let el = t0.elapsed();
    verdict(
        ok && within(el, 1.0),
        format!("{cases} cases exact, {:.3}s", el.as_secs_f64()),
    )
}

// 3. gradient against central differences

struct GradFixture {
    batches: Vec<GroupBatch>,
    theta_old: PolicyParams,
    theta_ref: PolicyParams,
    cfg: GrpoConfig,
}

fn grad_fixture(seed: u64) -> GradFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = Vocabulary::new(4, 2).unwrap();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let (contexts, max_len) = (2, 8);
    let mut theta_old =
        PolicyParams::zeros(vocab.len(), max_len, contexts, ContextMode::QuestionAndPrevToken)
            .unwrap();
    for x in theta_old.logits_mut() {
        *x = normal.sample(&mut rng);
    }
    // make tagged answers likely enough to give varied rewards
    for ctx in 0..contexts {
        for t in 0..max_len {
            theta_old.row_mut(ctx, None, t)[vocab.think_open()] += 2.0;
            theta_old.row_mut(ctx, Some(vocab.think_close()), t)[vocab.answer_open()] += 2.0;
            theta_old.row_mut(ctx, Some(vocab.answer_close()), t)[vocab.eos()] += 3.0;
        }
    }
    let mut theta_ref = theta_old.clone();
    for x in theta_ref.logits_mut() {
        *x += 0.3 * normal.sample(&mut rng);
    }
    let cfg = GrpoConfig {
        group_size: 4,
        beta: 0.05,
        kl_mode: if seed % 2 == 0 {
            KlMode::Estimator
        } else {
            KlMode::Exact
        },
        ..GrpoConfig::default()
    };
    let batches = (0..contexts)
        .map(|ctx| {
            let q = RolloutQuestion {
                context: ctx,
                gold: ['A', 'B', 'C', 'D'][rng.random_range(0..4)],
                n_options: 4,
            };
            let mut sampler = PolicySampler {
                params: &theta_old,
                vocab: &vocab,
            };
            rollout_with_resampling(&q, &mut sampler, &RewardConfig::default(), &cfg, &mut rng)
                .unwrap()
        })
        .collect();
    GradFixture {
        batches,
        theta_old,
        theta_ref,
        cfg,
    }
}

fn visited_coords(fx: &GradFixture) -> Vec<usize> {
    let v = fx.theta_old.vocab_size();
    let mut rows = BTreeSet::new();
    for b in &fx.batches {
        for r in &b.responses {
            rows.extend(fx.theta_old.row_offsets(b.question.context, &r.token_ids));
        }
    }
    rows.into_iter().flat_map(|off| off..off + v).collect()
}

/// Clipped-branch flag of every token under `theta`.
fn branch_signature(fx: &GradFixture, theta: &PolicyParams) -> Vec<bool> {
    let mut sig = Vec::new();
    for b in &fx.batches {
        let adv = b.reweighted_advantages();
        for (r, a) in b.responses.iter().zip(adv) {
            let lp = logprob(theta, b.question.context, &r.token_ids).unwrap();
            for (l, old) in lp.iter().zip(&r.logprobs_old) {
                sig.push(surrogate((l - old).exp(), a, fx.cfg.clip_eps).2);
            }
        }
    }
    sig
}

fn value_at(fx: &GradFixture, theta: &PolicyParams) -> f64 {
    objective(&fx.batches, theta, &fx.theta_old, &fx.theta_ref, &fx.cfg)
        .unwrap()
        .value
}

/// Relative error `‖a − n‖ / max(‖a‖, ‖n‖)` over coordinates accepted by `keep`.
fn fd_relative_error(
    fx: &GradFixture,
    theta: &PolicyParams,
    coords: &[usize],
    stable_only: bool,
) -> (f64, usize) {
    let h = 1e-5;
    let analytic = objective(&fx.batches, theta, &fx.theta_old, &fx.theta_ref, &fx.cfg)
        .unwrap()
        .grad;
    let base_sig = branch_signature(fx, theta);
    let (mut diff, mut na, mut nn, mut used) = (0.0, 0.0, 0.0, 0);
    for &c in coords {
        let mut plus = theta.clone();
        plus.logits_mut()[c] += h;
        let mut minus = theta.clone();
        minus.logits_mut()[c] -= h;
        if stable_only
            && (branch_signature(fx, &plus) != base_sig || branch_signature(fx, &minus) != base_sig)
        {
            continue;
        }
        let numeric = (value_at(fx, &plus) - value_at(fx, &minus)) / (2.0 * h);
        let a = analytic[c];
        diff += (a - numeric) * (a - numeric);
        na += a * a;
        nn += numeric * numeric;
        used += 1;
    }
    let denom = na.sqrt().max(nn.sqrt());
    let rel = if denom == 0.0 { 0.0 } else { diff.sqrt() / denom };
    (rel, used)
}

fn criterion_3() -> Verdict {
    let t0 = Instant::now();
    let (mut worst_old, mut worst_pert, mut probes, mut clipped_tokens) = (0.0f64, 0.0f64, 0, 0);
    for seed in 0..20 {
        let fx = grad_fixture(seed);
        let coords = visited_coords(&fx);
        let (e, n) = fd_relative_error(&fx, &fx.theta_old, &coords, false);
        worst_old = worst_old.max(e);
        probes += n;

        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let normal = Normal::new(0.0, 0.4).unwrap();
        let mut theta = fx.theta_old.clone();
        for x in theta.logits_mut() {
            *x += normal.sample(&mut rng);
        }
        clipped_tokens += branch_signature(&fx, &theta).iter().filter(|&&c| c).count();
        let (e, n) = fd_relative_error(&fx, &theta, &coords, true);
        worst_pert = worst_pert.max(e);
        probes += n;
    }
    let el = t0.elapsed();
    verdict(
        worst_old < 1e-5 && worst_pert < 1e-4 && clipped_tokens > 0 && within(el, 30.0),
        format!(
            "worst relative error {worst_old:.2e} at theta_old, {worst_pert:.2e} perturbed ({clipped_tokens} clipped tokens), {probes} probes, {:.2}s",
            el.as_secs_f64()
        ),
    )
}

// 4. reweighting linearity

fn criterion_4() -> Verdict {
    let (mut worst, mut nonzero, mut seed) = (0.0f64, 0, 0u64);
    // groups with equal rewards have zero gradient and test nothing, so draw until 10 do not
    while nonzero < 10 && seed < 200 {
        seed += 1;
        let mut fx = grad_fixture(100 + seed);
        fx.cfg.beta = 0.0;
        let w = 1.0 + (seed % 10) as f64 / 10.0 + 0.05;
        for b in &mut fx.batches {
            b.weight = 1.0;
        }
        let g1 = objective(&fx.batches, &fx.theta_old, &fx.theta_old, &fx.theta_ref, &fx.cfg)
            .unwrap()
            .grad;
        for b in &mut fx.batches {
            b.weight = w;
        }
        let gw = objective(&fx.batches, &fx.theta_old, &fx.theta_old, &fx.theta_ref, &fx.cfg)
            .unwrap()
            .grad;
        // entries that cancel to roundoff have no meaningful relative error, so scale by the largest
        let scale = gw.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        if scale == 0.0 {
            continue;
        }
        nonzero += 1;
        for (a, b) in gw.iter().zip(&g1) {
            worst = worst.max((a - w * b).abs() / scale);
        }
    }
    verdict(
        worst < 1e-12 && nonzero == 10,
        format!("max deviation {worst:.2e} relative to the largest gradient entry over {nonzero} batches with nonzero gradient"),
    )
}

// 5. resampling contract

struct Scripted {
    vocab: Vocabulary,
    script: Vec<char>,
    calls: usize,
}

impl ResponseSampler for Scripted {
    fn sample_group(
        &mut self,
        _q: &RolloutQuestion,
        g: usize,
        _rng: &mut dyn RngCore,
    ) -> dagrpo::Result<Vec<Response>> {
        let letter = self.script[self.calls.min(self.script.len() - 1)];
        let round = self.calls;
        self.calls += 1;
        let v = &self.vocab;
        (0..g)
            .map(|i| {
                // the filler count tags each response with the round that produced it
                let mut ids = vec![v.think_open()];
                ids.extend(std::iter::repeat_n(v.filler_ids().start, round));
                let answer = if i == g - 1 { letter } else { 'D' };
                ids.extend([
                    v.think_close(),
                    v.answer_open(),
                    v.choice_id(answer).unwrap(),
                    v.answer_close(),
                    v.eos(),
                ]);
                let n = ids.len();
                Response::from_tokens(v, ids, vec![-1.0; n])
            })
            .collect()
    }
}

fn criterion_5() -> Verdict {
    let q = RolloutQuestion {
        context: 0,
        gold: 'A',
        n_options: 4,
    };
    let cfg = GrpoConfig::default();
    let rewards = RewardConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    let mut s = Scripted {
        vocab: Vocabulary::default(),
        script: vec!['B', 'C', 'A', 'A'],
        calls: 0,
    };
    let b = rollout_with_resampling(&q, &mut s, &rewards, &cfg, &mut rng).unwrap();
    let fresh = b.responses.iter().all(|r| r.token_ids.len() == 6 + 2);
    let first_ok = b.resample_rounds == 2 && s.calls == 3 && b.any_correct() && fresh;

    let mut s = Scripted {
        vocab: Vocabulary::default(),
        script: vec!['B'],
        calls: 0,
    };
    let b = rollout_with_resampling(&q, &mut s, &rewards, &cfg, &mut rng).unwrap();
    let exhaust_ok = b.resample_rounds == 4 && s.calls == 5 && b.weight == 2.0;
    verdict(
        first_ok && exhaust_ok,
        format!(
            "first correct batch used after 2 discarded rounds: {first_ok}; always-wrong returns after 4 extra rounds with w = 2: {exhaust_ok}"
        ),
    )
}

// 6. reward table

fn criterion_6() -> Verdict {
    let cfg = RewardConfig::default();
    let sched = CosineSchedule::default();
    let toks = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
    let total = |s: &str, gold: char| score(s, &toks(s), gold, 4, &cfg).unwrap().total;
    let checks = [
        ("format of a strict response is 1", format_reward("<think> f1 f2 </think> <answer> A </answer>") == 1),
        ("format without think span is 0", format_reward("<answer> A </answer>") == 0),
        ("classification correct is 1", classification_reward(Some('B'), 'B', 4).unwrap() == 1),
        ("classification wrong valid is 0", classification_reward(Some('C'), 'B', 4).unwrap() == 0),
        ("classification absent is -1", classification_reward(None, 'B', 4).unwrap() == -1),
        (
            "cosine invalid is -1 for every length",
            (0..=40).all(|l| cosine_reward(Outcome::Invalid, l, &sched).unwrap() == -1.0),
        ),
        ("total of perfect short answer is 5", total("<think> </think> <answer> A </answer>", 'A') == 5.0),
        ("total of wrong valid answer at length 0 is 0.5", total("<think> </think> <answer> B </answer>", 'A') == 0.5),
        ("total without tags is -4", total("no tags at all", 'A') == -4.0),
    ];
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    verdict(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} exact checks", checks.len())
        } else {
            format!("failed: {}", failed.join("; "))
        },
    )
}

// 7. heatmap oracle

fn random_grid(rng: &mut ChaCha8Rng, m: usize, n: usize, d: usize, layer: usize) -> FeatureGrid {
    let vals = (0..m * n * d)
        .map(|_| {
            // sparse values make zero vectors and exact ties appear
            if rng.random_bool(0.1) {
                0.0
            } else {
                rng.random_range(-2i32..=2) as f64
            }
        })
        .collect();
    FeatureGrid::new(layer, m, n, d, vals).unwrap()
}

fn brute_force(q: &FeatureGrid, r: &FeatureGrid, k: usize) -> Vec<f64> {
    let (m, n, _) = q.shape();
    let mut out = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            let mut best = f64::INFINITY;
            for a in 0..m {
                for b in 0..n {
                    if a.abs_diff(i) <= k && b.abs_diff(j) <= k {
                        best = best.min(cosine_distance(q.patch(i, j), r.patch(a, b)));
                    }
                }
            }
            out.push(best);
        }
    }
    out
}

fn independent_cosine(u: &[f64], v: &[f64]) -> f64 {
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    match (nu == 0.0, nv == 0.0) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        _ => 1.0 - u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / (nu * nv),
    }
}

fn criterion_7() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut oracle_ok, mut cos_err, mut self_max) = (true, 0.0f64, 0.0f64);
    for g in 0..200 {
        let (m, n, d) = (rng.random_range(1..=10), rng.random_range(1..=10), rng.random_range(1..=8));
        let k = rng.random_range(0..=2);
        let q = random_grid(&mut rng, m, n, d, g);
        let r = random_grid(&mut rng, m, n, d, g);
        let h = layer_heatmap(&q, &r, k).unwrap();
        oracle_ok &= h.values() == brute_force(&q, &r, k).as_slice();
        for i in 0..m {
            for j in 0..n {
                let (u, v) = (q.patch(i, j), r.patch(i, j));
                cos_err = cos_err.max((cosine_distance(u, v) - independent_cosine(u, v)).abs());
            }
        }
        let same = layer_heatmap(&q, &q, k).unwrap();
        self_max = self_max.max(same.values().iter().fold(0.0, |a, &b| a.max(b)));
    }

    let mut hits = 0;
    for f in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + f);
        let rows = rng.random_range(1..=3);
        let cols = rng.random_range(1..=3);
        let defect = Rect {
            top: rng.random_range(0..=16 - rows),
            left: rng.random_range(0..=16 - cols),
            rows,
            cols,
        };
        let spec = SynthSpec {
            defect: Some(defect),
            ..SynthSpec::default()
        };
        let layers: Vec<_> = synth_features(&spec, &mut rng)
            .unwrap()
            .iter()
            .map(|(r, q)| layer_heatmap(q, r, 1).unwrap())
            .collect();
        let (i, j) = dagrpo::heatmap::aggregate(&layers).unwrap().argmax();
        hits += usize::from(defect.contains(i, j));
    }

    let mut shift_zero = true;
    for (s, k) in [((1isize, 0isize), 1usize), ((-1, 1), 1), ((2, -1), 2), ((0, 2), 2)] {
        let spec = SynthSpec {
            shift: s,
            field: FieldKind::PiecewiseConstant { block: 4 },
            ..SynthSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for (r, q) in synth_features(&spec, &mut rng).unwrap() {
            shift_zero &= layer_heatmap(&q, &r, k).unwrap().values().iter().all(|&x| x == 0.0);
        }
    }
    let el = t0.elapsed();
    verdict(
        oracle_ok && cos_err < 1e-12 && self_max < 1e-12 && hits == 100 && shift_zero && within(el, 30.0),
        format!(
            "oracle exact on 200 grids: {oracle_ok}, identical inputs max {self_max:.1e}, planted defects {hits}/100, shifted fixtures all zero: {shift_zero}, {:.2}s",
            el.as_secs_f64()
        ),
    )
}

// 8. projector

fn criterion_8() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut shape_ok = true;
    let mut worst: f64 = 0.0;
    let configs = [
        (1, 8, 3, 1, 1, 16, 16),
        (1, 4, 3, 2, 1, 16, 16),
        (1, 32, 1, 1, 0, 7, 9),
        (3, 8, 5, 1, 2, 12, 10),
        (3, 6, 3, 3, 0, 13, 13),
        (2, 5, 2, 2, 0, 8, 11),
        (1, 16, 4, 2, 1, 15, 9),
        (4, 3, 3, 1, 0, 5, 5),
        (2, 7, 7, 1, 3, 6, 6),
        (1, 2, 3, 2, 2, 4, 17),
    ];
    for (cin, cout, k, s, p, h, w) in configs {
        let cfg = ProjectorConfig {
            in_channels: cin,
            out_channels: cout,
            kernel: k,
            stride: s,
            padding: p,
            eps: 1e-10,
            ..ProjectorConfig::default()
        };
        let mut params = ProjectorParams::init(&cfg, &mut rng).unwrap();
        let batch: Vec<Maps> = (0..4)
            .map(|_| Maps {
                channels: cin,
                height: h,
                width: w,
                data: (0..cin * h * w).map(|_| rng.random_range(-3.0..7.0)).collect(),
            })
            .collect();
        let seqs = project(&batch, &mut params).unwrap();
        let (oh, ow) = ((h + 2 * p - k) / s + 1, (w + 2 * p - k) / s + 1);
        shape_ok &= seqs.iter().all(|e| {
            e.spatial_shape == (oh, ow)
                && e.embeddings.len() == oh * ow
                && e.embeddings.iter().all(|v| v.len() == cout)
        });

        let mut bn = BatchNorm::new(cin, 1e-10, 0.1);
        let normed = bn.normalize(&batch, ProjectorMode::Train).unwrap();
        for ch in 0..cin {
            let xs: Vec<f64> = normed.iter().flat_map(|m| m.channel(ch).to_vec()).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
            worst = worst.max(mean.abs()).max((var - 1.0).abs());
        }
    }
    verdict(
        shape_ok && worst < 1e-6,
        format!("shapes match conv arithmetic on 10 configurations: {shape_ok}, worst moment deviation {worst:.2e}"),
    )
}

// 9. mask to region

fn region_oracle(mask: &Mask) -> RegionLabel {
    let (h, w) = (mask.height(), mask.width());
    let band = |x: usize, len: usize| {
        if x < len / 3 {
            0
        } else if x < 2 * len / 3 {
            1
        } else {
            2
        }
    };
    let mut counts = [0usize; 9];
    for i in 0..h {
        for j in 0..w {
            if mask.get(i, j) {
                counts[band(i, h) * 3 + band(j, w)] += 1;
            }
        }
    }
    let max = *counts.iter().max().unwrap();
    RegionLabel::ALL[counts.iter().position(|&c| c == max).unwrap()]
}

fn criterion_9() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut agree = 0;
    for _ in 0..1000 {
        let (h, w) = (rng.random_range(3..=64), rng.random_range(3..=48));
        let density = rng.random_range(0.001..0.3);
        let mut bits: Vec<bool> = (0..h * w).map(|_| rng.random_bool(density)).collect();
        if !bits.iter().any(|&b| b) {
            let at = rng.random_range(0..h * w);
            bits[at] = true;
        }
        let mask = Mask::from_bits(h, w, bits).unwrap();
        agree += usize::from(mask_to_region(&mask).unwrap() == region_oracle(&mask));
    }
    verdict(agree == 1000, format!("{agree}/1000 masks agree"))
}

// 10. end-to-end direction

fn criterion_10() -> Verdict {
    let t0 = Instant::now();
    let seeds = 5;
    let mut finals = Vec::new();
    for mode in Mode::ALL {
        let mut sums = [0.0; 4];
        for seed in 0..seeds {
            let cfg = ExperimentConfig {
                mode,
                seed,
                ..ExperimentConfig::default()
            };
            let out = train(&cfg).expect("training run");
            let r = out.rows.last().expect("final row");
            sums[0] += r.accuracy_easy;
            sums[1] += r.accuracy_hard;
            sums[2] += r.robust_accuracy;
            sums[3] += r.format_rate;
        }
        finals.push(sums.map(|s| s / seeds as f64));
    }
    let [sft, plain, aware] = [finals[0], finals[1], finals[2]];
    let el = t0.elapsed();
    let ok = aware[1] >= plain[1]
        && plain[2] >= sft[2]
        && aware[2] >= sft[2]
        && plain[0] >= 0.95
        && aware[0] >= 0.95
        && plain[3] >= 0.99
        && aware[3] >= 0.99
        && within(el, 600.0);
    verdict(
        ok,
        format!(
            "hard-tier accuracy aware {:.4} vs plain {:.4}; held-out-format robustness plain {:.4}, aware {:.4} vs sft {:.4}; easy {:.4}/{:.4}; format {:.4}/{:.4}; {:.1}s",
            aware[1], plain[1], plain[2], aware[2], sft[2], plain[0], aware[0], plain[3], aware[3],
            el.as_secs_f64()
        ),
    )
}

// 11. determinism of every subcommand

fn run_cli(dir: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_dagrpo"))
        .args(args)
        .current_dir(dir)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_files(&p, out);
        } else {
            out.push(p);
        }
    }
}

fn criterion_11() -> Verdict {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let f = |rel: &str| fixtures.join(rel).to_string_lossy().into_owned();
    let (records, knowledge) = (f("records.jsonl"), f("knowledge"));
    let (smoke, bench) = (f("configs/smoke.json"), f("configs/heatmap_bench.json"));
    let commands: Vec<Vec<&str>> = vec![
        vec!["gen-tasks", "--records", &records, "--knowledge", &knowledge, "--seed", "3", "--out-dir", "records"],
        vec!["gen-tasks", "--config", &smoke, "--out-dir", "synthetic"],
        vec!["train", "--config", &smoke, "--out-dir", "aware"],
        vec!["train", "--config", &smoke, "--mode", "grpo_plain", "--out-dir", "plain"],
        vec!["train", "--config", &smoke, "--mode", "sft", "--seed", "11", "--out-dir", "sft"],
        vec!["report", "aware/metrics.csv", "plain/metrics.csv", "sft/metrics.csv", "--out-dir", "report"],
        vec!["heatmap-bench", "--config", &bench, "--seed", "4", "--out-dir", "bench"],
    ];
    let roots = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut failures = Vec::new();
    for root in &roots {
        for args in &commands {
            if !run_cli(root.path(), args) {
                failures.push(args[0]);
            }
        }
    }
    let mut files = [Vec::new(), Vec::new()];
    for (root, list) in roots.iter().zip(files.iter_mut()) {
        collect_files(root.path(), list);
    }
    let rel = |root: &Path, p: &PathBuf| p.strip_prefix(root).unwrap().to_path_buf();
    let names: Vec<PathBuf> = files[0].iter().map(|p| rel(roots[0].path(), p)).collect();
    let same_names = names == files[1].iter().map(|p| rel(roots[1].path(), p)).collect::<Vec<_>>();
    let differing: Vec<String> = files[0]
        .iter()
        .zip(&files[1])
        .filter(|(a, b)| std::fs::read(a).unwrap() != std::fs::read(b).unwrap())
        .map(|(a, _)| rel(roots[0].path(), a).display().to_string())
        .collect();
    verdict(
        failures.is_empty() && same_names && differing.is_empty() && names.len() >= 15,
        format!(
            "{} output files from {} subcommand runs compared, failed runs {:?}, differing {:?}",
            names.len(),
            commands.len() * 2,
            failures,
            differing
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("advantage oracle", criterion_1),
        ("difficulty-weight oracle", criterion_2),
        ("gradient correctness", criterion_3),
        ("reweighting linearity", criterion_4),
        ("resampling contract", criterion_5),
        ("reward table", criterion_6),
        ("heatmap oracle", criterion_7),
        ("projector shape and normalization", criterion_8),
        ("mask_to_region oracle", criterion_9),
        ("end-to-end direction", criterion_10),
        ("determinism", criterion_11),
    ];
    let t0 = Instant::now();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        failed += usize::from(!v.pass);
        println!(
            "criterion {:>2} {}: {} ({})",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            name,
            v.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        t0.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
