//! Acceptance checks. One line per check, then a summary.
//!
//! Checks that need the public Kamei CSVs read them from the directory in
//! `JITLAB_KAMEI_DIR` (`bugzilla.csv`, `mozilla.csv`) and are reported as
//! NOT RUN when it is unset.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use jitlab::dataset::ChangeRecord;
use jitlab::evaluate::{kfold_cv, run_experiment, run_on, spec_from_report, ExperimentSpec, FoldPlan, ReportFormat, TrainedPipeline};
use jitlab::metrics::{average_age, entropy, FileChangeProfile};
use jitlab::mlp::{gradient_check, MlpModel, TrainConfig};
use jitlab::pca::{fit_pca, project};
use jitlab::preprocess::{apply_minmax, fit_minmax, log_transform, undersample, TransformPlan};
use jitlab::synth::{generate, SynthSpec};
use jitlab::{summarize, ColumnSchema, Dataset, Metric};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Checks whose stated expectation cannot be met. They still print FAIL.
const BLOCKED: &[(&str, &str)] = &[(
    "1a",
    "the stated value disagrees with the entropy formula itself, which gives 1.5 bits",
)];

const ENTROPY_TOL: f64 = 1e-9;
const GRADIENT_TOL: f64 = 1e-4;
const RECONSTRUCTION_TOL: f64 = 1e-8;
const RATIO_TOL: f64 = 1e-9;
const SEPARABLE_RECALL: f64 = 0.95;
const CHANCE_RECALL: f64 = 0.5;
const CHANCE_BAND: f64 = 0.1;
const REPRO_BAND: f64 = 0.15;
const RANDOM_DATASETS: u64 = 100;
const RERUNS: usize = 10;
const RERUN_WINS: usize = 7;

#[derive(Default)]
struct Tally {
    passed: usize,
    failed: usize,
    blocked: usize,
    not_run: usize,
}

impl Tally {
    fn check(&mut self, id: &str, name: &str, ok: bool, detail: String) {
        if ok {
            self.passed += 1;
            println!("PASS     {id:<4} {name} ({detail})");
            return;
        }
        match BLOCKED.iter().find(|(b, _)| *b == id) {
            Some((_, why)) => {
                self.blocked += 1;
                println!("FAIL     {id:<4} {name} ({detail}) [blocked: {why}]");
            }
            None => {
                self.failed += 1;
                println!("FAIL     {id:<4} {name} ({detail})");
            }
        }
    }

    fn not_run(&mut self, id: &str, name: &str, reason: &str) {
        self.not_run += 1;
        println!("NOT RUN  {id:<4} {name} ({reason})");
    }
}

fn entropy_of(p: &[f64]) -> f64 {
    entropy(&FileChangeProfile::new(p.to_vec()).unwrap())
}

fn criterion_1(t: &mut Tally) {
    let h = entropy_of(&[0.5, 0.25, 0.25]);
    t.check("1a", "entropy {0.5,0.25,0.25} = 1.0", (h - 1.0).abs() <= ENTROPY_TOL, format!("got {h}"));
    let h = entropy_of(&[1.0]);
    t.check("1b", "entropy {1} = 0", h.abs() <= ENTROPY_TOL, format!("got {h}"));
    let worst = (1..=64)
        .map(|n| (entropy_of(&vec![1.0 / n as f64; n]) - (n as f64).log2()).abs())
        .fold(0.0, f64::max);
    t.check("1c", "uniform n entropy = log2 n, n = 1..64", worst <= ENTROPY_TOL, format!("max error {worst:e}"));
}

fn criterion_2(t: &mut Tally) {
    let age = average_age(&[3.0, 5.0, 4.0]).unwrap();
    t.check("2", "average age {3,5,4} = 4", age == 4.0, format!("got {age}"));
}

fn criterion_3(t: &mut Tally) {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..8u64 {
        let model = MlpModel::init(10, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..4 {
            let x: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
            worst = worst.max(gradient_check(&model, &x, rng.gen()).unwrap());
        }
    }
    t.check(
        "3",
        "gradient check over 8 seeds, dropout off",
        worst < GRADIENT_TOL,
        format!("max relative error {worst:e}, {:.2?}", start.elapsed()),
    );
}

/// Random positive dataset; `zeros` rows get a zero in a log column.
fn random_dataset(seed: u64, zeros: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(20..200);
    let mut records: Vec<ChangeRecord> = (0..n)
        .map(|i| {
            let mut values = [0.0; Metric::COUNT];
            for m in Metric::ALL {
                values[m.index()] = match m {
                    Metric::Fix => f64::from(rng.gen_range(0..2u8)),
                    _ => rng.gen_range(0.01..500.0),
                };
            }
            // first two rows fix both classes
            let label = if i < 2 { i == 0 } else { rng.gen_bool(0.3) };
            ChangeRecord::new(values, label)
        })
        .collect();
    let log_columns = TransformPlan::default().log_columns;
    for _ in 0..zeros {
        let row = rng.gen_range(0..n);
        let col = log_columns[rng.gen_range(0..log_columns.len())];
        records[row].set(col, 0.0);
    }
    Dataset::new(format!("random-{seed}"), records).unwrap()
}

fn criterion_4(t: &mut Tally) {
    let plan = TransformPlan::default();
    let features = plan.training_features();
    let cfg = TrainConfig {
        epochs: 1,
        ..TrainConfig::default()
    };

    let mut balanced = 0;
    let mut untouched = 0;
    for seed in 0..RANDOM_DATASETS {
        let d = random_dataset(seed, 0);
        let folds = FoldPlan { k: 5, seed, stratified: false }.assign(&d).unwrap();
        let held = &folds[0];
        let train_rows: Vec<usize> = (0..d.len()).filter(|r| !held.contains(r)).collect();
        let train = d.subset(&train_rows);
        let Ok(under) = undersample(&train, seed) else { continue };
        let pos = under.defect_count();
        if pos * 2 == under.len() && pos == train.defect_count().min(train.len() - train.defect_count()) {
            balanced += 1;
        }
        let Ok(pipeline) = TrainedPipeline::fit(&train, &features, &plan, &TrainConfig { seed, ..cfg.clone() }, 0.5) else {
            continue;
        };
        let fitted_on = log_transform(&under.select_features(&features).unwrap(), &plan).unwrap();
        let expected = fit_minmax(&fitted_on, &features).unwrap();
        let test = d.subset(held);
        let prepared = pipeline.prepare(&test).unwrap();
        if pipeline.normalization.as_ref() == Some(&expected)
            && prepared.len() == held.len()
            && prepared.labels() == test.labels()
        {
            untouched += 1;
        }
    }
    let n = RANDOM_DATASETS as usize;
    t.check("4a", "undersampled training partitions exactly balanced", balanced == n, format!("{balanced}/{n} datasets"));
    t.check(
        "4a",
        "held-out partitions keep every row and never feed normalization",
        untouched == n,
        format!("{untouched}/{n} datasets"),
    );

    let mut raised = 0;
    let mut finite = 0;
    for seed in 0..RANDOM_DATASETS {
        let with_zeros = random_dataset(seed, 1 + seed as usize % 5);
        if matches!(log_transform(&with_zeros, &plan), Err(e) if e.code() == "E_LOG_DOMAIN") {
            raised += 1;
        }
        let clean = random_dataset(seed, 0);
        if let Ok(out) = log_transform(&clean, &plan) {
            if out.records().iter().all(|r| r.values().iter().all(|v| v.is_finite())) {
                finite += 1;
            }
        }
    }
    t.check("4b", "strict log raises E_LOG_DOMAIN on zeros", raised == n, format!("{raised}/{n} datasets"));
    t.check("4b", "strict log output finite without zeros", finite == n, format!("{finite}/{n} datasets"));

    let mut in_range = 0;
    for seed in 0..RANDOM_DATASETS {
        let d = random_dataset(seed, 0);
        let params = fit_minmax(&d, &Metric::ALL).unwrap();
        let scaled = apply_minmax(&d, &params).unwrap();
        if scaled
            .records()
            .iter()
            .all(|r| r.values().iter().all(|v| (0.0..=1.0).contains(v)))
        {
            in_range += 1;
        }
    }
    t.check("4c", "min-max of fitting data within [0, 1]", in_range == n, format!("{in_range}/{n} datasets"));
}

fn frobenius(rows: impl Iterator<Item = f64>) -> f64 {
    rows.map(|x| x * x).sum::<f64>().sqrt()
}

fn criterion_5(t: &mut Tally) {
    let mut worst_rec: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    for seed in 0..20 {
        let d = random_dataset(seed, 0);
        let model = fit_pca(&d, &Metric::ALL, Metric::COUNT, seed % 2 == 0).unwrap();
        let back = model.reconstruct(&project(&model, &d).unwrap());
        let x = d.feature_matrix();
        let err = frobenius(x.as_slice().iter().zip(back.as_slice()).map(|(a, b)| a - b));
        worst_rec = worst_rec.max(err / frobenius(x.as_slice().iter().copied()));
        worst_sum = worst_sum.max((model.explained_variance_ratio.iter().sum::<f64>() - 1.0).abs());
    }
    t.check("5a", "full-rank reconstruction relative error", worst_rec <= RECONSTRUCTION_TOL, format!("max {worst_rec:e}"));
    t.check("5b", "explained variance ratios sum to 1", worst_sum <= RATIO_TOL, format!("max deviation {worst_sum:e}"));

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let direction: Vec<f64> = (0..Metric::COUNT).map(|_| rng.gen_range(0.5..2.0)).collect();
    let rank_one: Vec<ChangeRecord> = (0..60)
        .map(|i| {
            let s: f64 = rng.gen_range(1.0..10.0);
            let mut values = [0.0; Metric::COUNT];
            for (j, v) in values.iter_mut().enumerate() {
                *v = s * direction[j];
            }
            values[Metric::Fix.index()] = 0.0;
            ChangeRecord::new(values, i % 2 == 0)
        })
        .collect();
    let d = Dataset::new("rank-one", rank_one).unwrap();
    let features: Vec<Metric> = Metric::ALL.iter().copied().filter(|&m| m != Metric::Fix).collect();
    let model = fit_pca(&d, &features, 2, false).unwrap();
    let first = model.explained_variance_ratio[0];
    t.check("5c", "rank-1 data first ratio = 1", (first - 1.0).abs() <= RATIO_TOL, format!("got {first}"));

    let mut stable = true;
    for seed in 0..20 {
        let d = random_dataset(seed, 0);
        let a = fit_pca(&d, &Metric::ALL, 4, true).unwrap();
        let b = fit_pca(&d, &Metric::ALL, 4, true).unwrap();
        let signs_ok = a.components.iter().all(|c| {
            let top = c.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            top > 0.0
        });
        stable &= a == b && signs_ok;
    }
    t.check("5d", "sign convention deterministic across reruns", stable, "20 datasets".into());
}

fn synthetic_recall(separation: f64) -> f64 {
    let d = generate(&SynthSpec {
        separation,
        ..SynthSpec::default()
    })
    .unwrap();
    let spec = ExperimentSpec::new(vec![], vec![vec![Metric::Lt, Metric::Age]]);
    kfold_cv(&d, &spec, &[Metric::Lt, Metric::Age]).unwrap().mean_recall().unwrap()
}

fn criterion_6(t: &mut Tally) {
    let start = Instant::now();
    let separable = synthetic_recall(4.0);
    let chance = synthetic_recall(0.0);
    let elapsed = start.elapsed();
    t.check(
        "6a",
        "separation 4, n = 1000, 10-fold mean recall >= 0.95",
        separable >= SEPARABLE_RECALL,
        format!("got {separable:.4}"),
    );
    t.check(
        "6b",
        "separation 0, n = 1000, 10-fold mean recall 0.5 +/- 0.1",
        (chance - CHANCE_RECALL).abs() <= CHANCE_BAND,
        format!("got {chance:.4}, both runs {elapsed:.2?}"),
    );
}

fn kamei(name: &str) -> Option<PathBuf> {
    let dir = std::env::var_os("JITLAB_KAMEI_DIR")?;
    let path = PathBuf::from(dir).join(name);
    path.exists().then_some(path)
}

const NO_DATA: &str = "set JITLAB_KAMEI_DIR to a directory with the Kamei CSVs";

fn criterion_7(t: &mut Tally) {
    let Some(path) = kamei("bugzilla.csv") else {
        t.not_run("7", "Bugzilla summary: 4620 changes, 36% +/- 0.5pp defective", NO_DATA);
        return;
    };
    let d = Dataset::load(&path, &ColumnSchema::kamei()).unwrap();
    let s = summarize(&d);
    let pct = s.pct_defect.unwrap_or(f64::NAN);
    t.check("7", "Bugzilla has 4620 changes", s.n_changes == 4620, format!("got {}", s.n_changes));
    t.check("7", "Bugzilla 36% +/- 0.5pp defective", (pct - 36.0).abs() <= 0.5, format!("got {pct:.2}%"));
}

fn reruns(path: PathBuf, combinations: Vec<Vec<Metric>>) -> jitlab::evaluate::ExperimentReport {
    let mut spec = ExperimentSpec::new(vec![path], combinations);
    spec.repetitions = RERUNS;
    run_experiment(&spec).unwrap()
}

fn wins(report: &jitlab::evaluate::ExperimentReport, a: &[Metric], b: &[Metric], precision: bool) -> usize {
    let find = |f: &[Metric]| report.results.iter().find(|c| c.features == f).unwrap();
    let (ra, rb) = (find(a), find(b));
    (0..RERUNS)
        .filter(|&r| {
            let (x, y) = if precision {
                (ra.repetition_precision(r), rb.repetition_precision(r))
            } else {
                (ra.repetition_recall(r), rb.repetition_recall(r))
            };
            matches!((x, y), (Some(x), Some(y)) if x > y)
        })
        .count()
}

fn criteria_8_and_10(t: &mut Tally) {
    let Some(path) = kamei("bugzilla.csv") else {
        t.not_run("8", "Bugzilla {LT,PD} recall 56.80% +/- 15pp, beats recommended set in >= 7/10 reruns", NO_DATA);
        t.not_run("10", "Bugzilla {LT,PD} precision 70.08% +/- 15pp, beats {PD,EXP} in >= 7/10 reruns", NO_DATA);
        return;
    };
    let lt_pd = vec![Metric::Lt, Metric::Age];
    let pd_exp = vec![Metric::Age, Metric::Exp];
    let recommended = Metric::RECOMMENDED.to_vec();
    let report = reruns(path, vec![lt_pd.clone(), recommended.clone(), pd_exp.clone()]);
    let target = report.results.iter().find(|c| c.features == lt_pd).unwrap();

    let recall = target.mean_recall().unwrap_or(f64::NAN);
    t.check("8", "Bugzilla {LT,PD} mean recall 56.80% +/- 15pp", (recall - 0.5680).abs() <= REPRO_BAND, format!("got {:.2}%", 100.0 * recall));
    let w = wins(&report, &lt_pd, &recommended, false);
    t.check("8", "{LT,PD} recall beats recommended set in >= 7/10 reruns", w >= RERUN_WINS, format!("{w}/{RERUNS}"));

    let precision = target.mean_precision().unwrap_or(f64::NAN);
    t.check("10", "Bugzilla {LT,PD} mean precision 70.08% +/- 15pp", (precision - 0.7008).abs() <= REPRO_BAND, format!("got {:.2}%", 100.0 * precision));
    let w = wins(&report, &lt_pd, &pd_exp, true);
    t.check("10", "{LT,PD} precision beats {PD,EXP} in >= 7/10 reruns", w >= RERUN_WINS, format!("{w}/{RERUNS}"));
}

fn criterion_9(t: &mut Tally) {
    let Some(path) = kamei("mozilla.csv") else {
        t.not_run("9", "Mozilla {LT,PD} recall 66.69% +/- 15pp", NO_DATA);
        return;
    };
    let lt_pd = vec![Metric::Lt, Metric::Age];
    let spec = ExperimentSpec::new(vec![path], vec![lt_pd]);
    let recall = run_experiment(&spec).unwrap().results[0].mean_recall().unwrap_or(f64::NAN);
    t.check("9", "Mozilla {LT,PD} mean recall 66.69% +/- 15pp", (recall - 0.6669).abs() <= REPRO_BAND, format!("got {:.2}%", 100.0 * recall));
}

fn criterion_11(t: &mut Tally) {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("det.csv");
    generate(&SynthSpec {
        n_rows: 300,
        separation: 1.5,
        seed: 11,
        ..SynthSpec::default()
    })
    .unwrap()
    .write_csv(&data)
    .unwrap();
    let mut spec = ExperimentSpec::new(vec![data], vec![vec![Metric::Lt, Metric::Age], vec![Metric::Exp, Metric::Nf]]);
    spec.repetitions = 2;
    spec.train.epochs = 40;
    let report = run_experiment(&spec).unwrap();

    for (id, format, name) in [("11a", ReportFormat::Csv, "r.csv"), ("11b", ReportFormat::Text, "r.txt")] {
        let path = dir.path().join(name);
        report.emit(format, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        let mut again_spec = spec_from_report(std::str::from_utf8(&first).unwrap()).unwrap();
        again_spec.parallelism = jitlab::Parallelism::Sequential;
        let again = run_on(&again_spec.load_data(&ColumnSchema::kamei()).unwrap(), &again_spec).unwrap();
        let path2 = dir.path().join(format!("again-{name}"));
        again.emit(format, &path2).unwrap();
        let second = std::fs::read(&path2).unwrap();
        t.check(id, &format!("{name} re-run from embedded config is byte-identical"), first == second, format!("{} bytes", first.len()));
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut t = Tally::default();
    criterion_1(&mut t);
    criterion_2(&mut t);
    criterion_3(&mut t);
    criterion_4(&mut t);
    criterion_5(&mut t);
    criterion_6(&mut t);
    criterion_7(&mut t);
    criteria_8_and_10(&mut t);
    criterion_9(&mut t);
    criterion_11(&mut t);
    println!(
        "acceptance: {} passed, {} failed, {} blocked, {} not run ({:.1?})",
        t.passed,
        t.failed,
        t.blocked,
        t.not_run,
        start.elapsed()
    );
    if t.failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
