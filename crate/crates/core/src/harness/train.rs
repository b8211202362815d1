use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Mode};
use super::eval::{evaluate, held_out_lengths, EvalSummary};
use super::init::{init_policy, vocabulary};
use super::tasks::TaskSet;
use crate::error::{Error, Result};
use crate::grpo::{rollout_with_resampling, GroupBatch, GrpoTrainer, PolicySampler};
use crate::policy::{checkpoint, letter_index, sample, softmax, PolicyParams, TokenId, Vocabulary};
use crate::rewards::score;
use crate::taskgen::derive_seed;

/// Column order of the metrics CSV.
pub const METRICS_COLUMNS: [&str; 11] = [
    "step",
    "mean_reward",
    "accuracy",
    "accuracy_easy",
    "accuracy_hard",
    "robust_accuracy",
    "mean_w",
    "resample_fraction",
    "format_rate",
    "objective",
    "grad_norm",
];

/// One logged evaluation point. Accuracies and format rate are exact expectations under the
/// policy; `mean_reward` averages a fixed-seed evaluation sample; the remaining fields
/// describe the optimisation step just taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: usize,
    pub mean_reward: f64,
    pub accuracy: f64,
    pub accuracy_easy: f64,
    pub accuracy_hard: f64,
    pub robust_accuracy: f64,
    pub mean_w: f64,
    pub resample_fraction: f64,
    pub format_rate: f64,
    pub objective: f64,
    pub grad_norm: f64,
}

impl MetricsRow {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.mean_reward,
            self.accuracy,
            self.accuracy_easy,
            self.accuracy_hard,
            self.robust_accuracy,
            self.mean_w,
            self.resample_fraction,
            self.format_rate,
            self.objective,
            self.grad_norm,
        ];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite metric at step {}", self.step)));
        }
        let unit = [self.accuracy, self.accuracy_easy, self.accuracy_hard, self.format_rate];
        if unit.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Numerical(format!("rate outside [0, 1] at step {}", self.step)));
        }
        Ok(())
    }
}

/// In-memory result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub rows: Vec<MetricsRow>,
    pub params: PolicyParams,
    pub final_eval: EvalSummary,
    pub tasks: TaskSet,
}

/// Step statistics shared by both training modes.
struct StepStats {
    objective: f64,
    grad_norm: f64,
    mean_w: f64,
    resample_fraction: f64,
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    vocab: Vocabulary,
    tasks: TaskSet,
    robust_lengths: Vec<usize>,
}

impl Context<'_> {
    fn eval_reward(&self, params: &PolicyParams) -> Result<f64> {
        let g = self.cfg.grpo.group_size;
        let per_question = (0..self.tasks.len())
            .into_par_iter()
            .map(|i| {
                let q = self.tasks.rollout_question(i);
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(self.cfg.seed, &format!("eval/{i}")));
                let group = sample(params, &self.vocab, i, g, &mut rng)?;
                let mut total = 0.0;
                for r in &group {
                    let toks: Vec<&str> = r.text.split_whitespace().collect();
                    total += score(&r.text, &toks, q.gold, q.n_options, &self.cfg.rewards)?.total;
                }
                Ok(total / g as f64)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(per_question.iter().sum::<f64>() / per_question.len().max(1) as f64)
    }

    fn row(&self, step: usize, params: &PolicyParams, stats: &StepStats) -> Result<(MetricsRow, EvalSummary)> {
        let ev = evaluate(params, &self.vocab, &self.tasks, &self.robust_lengths);
        let row = MetricsRow {
            step,
            mean_reward: self.eval_reward(params)?,
            accuracy: ev.accuracy,
            accuracy_easy: ev.accuracy_easy,
            accuracy_hard: ev.accuracy_hard,
            robust_accuracy: ev.robust_accuracy,
            mean_w: stats.mean_w,
            resample_fraction: stats.resample_fraction,
            format_rate: ev.format_rate,
            objective: stats.objective,
            grad_norm: stats.grad_norm,
        };
        row.validate()?;
        Ok((row, ev))
    }

    fn logs(&self, step: usize) -> bool {
        step % self.cfg.eval_every == 0 || step == self.cfg.steps
    }
}

/// Gold response used by the supervised baseline.
pub fn sft_template(vocab: &Vocabulary, gold: char, think_len: usize) -> Vec<TokenId> {
    let fillers: Vec<TokenId> = vocab.filler_ids().collect();
    let mut ids = vec![vocab.think_open()];
    ids.extend((0..think_len).map(|k| fillers[k % fillers.len()]));
    ids.extend([
        vocab.think_close(),
        vocab.answer_open(),
        vocab.choice_ids().start + letter_index(gold).expect("valid gold"),
        vocab.answer_close(),
        vocab.eos(),
    ]);
    ids
}

/// Mean per-token log-likelihood of each question's template and its gradient.
fn sft_objective(ctx: &Context<'_>, params: &PolicyParams) -> (f64, Vec<f64>) {
    let n = ctx.tasks.len() as f64;
    let terms: Vec<(f64, Vec<(usize, Vec<f64>)>)> = (0..ctx.tasks.len())
        .into_par_iter()
        .map(|i| {
            let ids = sft_template(&ctx.vocab, ctx.tasks.samples[i].gold_letter(), ctx.cfg.sft.think_len);
            let scale = 1.0 / (ids.len() as f64 * n);
            let mut value = 0.0;
            let mut rows = Vec::with_capacity(ids.len());
            for (off, &v) in params.row_offsets(i, &ids).into_iter().zip(&ids) {
                let mut g = softmax(&params.logits()[off..off + params.vocab_size()]);
                value += g[v].ln() * scale;
                g.iter_mut().for_each(|x| *x *= -scale);
                g[v] += scale;
                rows.push((off, g));
            }
            (value, rows)
        })
        .collect();
    let mut grad = vec![0.0; params.logits().len()];
    let mut value = 0.0;
    for (v, rows) in terms {
        value += v;
        for (off, g) in rows {
            for (a, b) in grad[off..off + g.len()].iter_mut().zip(g) {
                *a += b;
            }
        }
    }
    (value, grad)
}

fn run_sft(ctx: &Context<'_>, mut params: PolicyParams) -> Result<(Vec<MetricsRow>, PolicyParams, EvalSummary)> {
    let mut rows = Vec::new();
    let mut last = None;
    for step in 1..=ctx.cfg.steps {
        let (objective, grad) = sft_objective(ctx, &params);
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if ctx.cfg.sft.lr != 0.0 {
            for (p, g) in params.logits_mut().iter_mut().zip(&grad) {
                *p += ctx.cfg.sft.lr * g;
            }
        }
        if ctx.logs(step) {
            let stats = StepStats {
                objective,
                grad_norm,
                mean_w: 1.0,
                resample_fraction: 0.0,
            };
            let (row, ev) = ctx.row(step, &params, &stats)?;
            rows.push(row);
            last = Some(ev);
        }
    }
    Ok((rows, params, last.expect("final step is always logged")))
}

fn run_grpo(ctx: &Context<'_>, params: PolicyParams) -> Result<(Vec<MetricsRow>, PolicyParams, EvalSummary)> {
    let gcfg = ctx.cfg.effective_grpo();
    let mut trainer = GrpoTrainer::new(params, gcfg.optimizer);
    let n = ctx.tasks.len();
    let k = ctx.cfg.batch_questions.min(n);
    let mut rows = Vec::new();
    let mut last = None;
    for step in 1..=ctx.cfg.steps {
        let step_seed = derive_seed(ctx.cfg.seed, &format!("step/{step}"));
        let mut pick = ChaCha8Rng::seed_from_u64(step_seed);
        let chosen = index::sample(&mut pick, n, k).into_vec();
        let theta = &trainer.theta;
        let batches = chosen
            .par_iter()
            .map(|&i| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(step_seed, &format!("q/{i}")));
                let mut sampler = PolicySampler {
                    params: theta,
                    vocab: &ctx.vocab,
                };
                rollout_with_resampling(
                    &ctx.tasks.rollout_question(i),
                    &mut sampler,
                    &ctx.cfg.rewards,
                    &gcfg,
                    &mut rng,
                )
            })
            .collect::<Result<Vec<GroupBatch>>>()?;
        let report = trainer.step(&batches, &gcfg)?;
        if ctx.logs(step) {
            let stats = StepStats {
                objective: report.objective,
                grad_norm: report.grad_norm,
                mean_w: report.mean_weight,
                resample_fraction: report.resample_fraction,
            };
            let (row, ev) = ctx.row(step, &trainer.theta, &stats)?;
            rows.push(row);
            last = Some(ev);
        }
    }
    Ok((rows, trainer.theta, last.expect("final step is always logged")))
}

/// Build tasks and the initial policy for `cfg` without training.
pub fn prepare(cfg: &ExperimentConfig) -> Result<(TaskSet, Vocabulary, PolicyParams)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "tasks"));
    let tasks = TaskSet::load(&cfg.data, &mut rng)?;
    if tasks.is_empty() {
        return Err(crate::error::config("experiment has no questions"));
    }
    let vocab = vocabulary(&cfg.policy)?;
    let params = init_policy(&tasks, &vocab, &cfg.policy)?;
    Ok((tasks, vocab, params))
}

/// Train according to `cfg.mode` and keep everything in memory.
pub fn train(cfg: &ExperimentConfig) -> Result<TrainOutcome> {
    let (tasks, vocab, params) = prepare(cfg)?;
    let ctx = Context {
        cfg,
        vocab,
        tasks,
        robust_lengths: held_out_lengths(cfg.sft.think_len),
    };
    let (rows, params, final_eval) = match cfg.mode {
        Mode::Sft => run_sft(&ctx, params)?,
        Mode::GrpoPlain | Mode::GrpoDifficultyAware => run_grpo(&ctx, params)?,
    };
    Ok(TrainOutcome {
        rows,
        params,
        final_eval,
        tasks: ctx.tasks,
    })
}

pub fn write_metrics(rows: &[MetricsRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(METRICS_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != METRICS_COLUMNS {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize().enumerate() {
        let row: MetricsRow = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            message: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

/// Files written by [`run_experiment`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunArtifacts {
    pub metrics: PathBuf,
    pub checkpoint: PathBuf,
    pub config: PathBuf,
}

/// Train and write `metrics.csv`, `checkpoint.bin` and the resolved `config.json` to `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let outcome = train(cfg)?;
    fs::create_dir_all(&cfg.out_dir)?;
    let art = RunArtifacts {
        metrics: cfg.out_dir.join("metrics.csv"),
        checkpoint: cfg.out_dir.join("checkpoint.bin"),
        config: cfg.out_dir.join("config.json"),
    };
    write_metrics(&outcome.rows, &art.metrics)?;
    checkpoint::save(&outcome.params, &art.checkpoint)?;
    fs::write(&art.config, serde_json::to_string_pretty(cfg)? + "\n")?;
    Ok(art)
}
