mod common;

use std::fs;
use std::path::Path;

use common::{body, metawalk, set_algos, write_experiment};
use metawalk::pipeline::ExperimentConfig;

fn code(out: &std::process::Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn assert_ok(out: &std::process::Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn standalone_stages_reproduce_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_experiment(dir.path(), 90, "");
    set_algos(&cfg, &["dmf3"]);
    let run_dir = dir.path().join("run");
    assert_ok(&metawalk([
        "--config".as_ref(),
        cfg.as_os_str(),
        "--out".as_ref(),
        run_dir.as_os_str(),
        "run".as_ref(),
    ]));

    let rel_dir = dir.path().join("rels");
    assert_ok(&metawalk([
        "--config".as_ref(),
        cfg.as_os_str(),
        "--out".as_ref(),
        rel_dir.as_os_str(),
        "sample".as_ref(),
        "--fold".as_ref(),
        "0".as_ref(),
    ]));
    let mut names: Vec<String> = fs::read_dir(&rel_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert!(names.contains(&"umgm.tsv".to_string()), "{names:?}");
    for n in &names {
        assert_eq!(
            fs::read(rel_dir.join(n)).unwrap(),
            fs::read(run_dir.join("relations/fold0").join(n)).unwrap(),
            "{n}"
        );
    }

    let model = dir.path().join("dmf3.model");
    assert_ok(&metawalk([
        "--config".as_ref(),
        cfg.as_os_str(),
        "--out".as_ref(),
        model.as_os_str(),
        "train".as_ref(),
        "--relations".as_ref(),
        rel_dir.as_os_str(),
    ]));
    assert_eq!(
        fs::read_to_string(&model).unwrap(),
        fs::read_to_string(run_dir.join("models/dmf3_fold0.model")).unwrap()
    );
    assert_eq!(body(&model.with_extension("loss.csv")), body(&run_dir.join("loss/dmf3_fold0.csv")));

    let eval = metawalk([
        "--config".as_ref(),
        cfg.as_os_str(),
        "eval".as_ref(),
        "--model".as_ref(),
        model.as_os_str(),
        "--name".as_ref(),
        "dmf3".as_ref(),
    ]);
    assert_ok(&eval);
    let fold0 = |csv: &str| -> Vec<String> { csv.lines().filter(|l| l.starts_with("dmf3,0,")).map(String::from).collect() };
    let standalone = fold0(&String::from_utf8(eval.stdout).unwrap());
    assert_eq!(standalone.len(), 10);
    assert_eq!(standalone, fold0(&fs::read_to_string(run_dir.join("report_dmf3.csv")).unwrap()));
}

#[test]
fn every_artifact_carries_the_config_stamp() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_experiment(dir.path(), 60, "");
    set_algos(&cfg_path, &["dmf-ig", "p3"]);
    let out = dir.path().join("out");
    assert_ok(&metawalk([
        "--config".as_ref(),
        cfg_path.as_os_str(),
        "--out".as_ref(),
        out.as_os_str(),
        "run".as_ref(),
    ]));
    let stamp = format!("# {}", ExperimentConfig::load(&cfg_path).unwrap().stamp());
    let mut stack = vec![out.clone()];
    let mut seen = 0;
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
                continue;
            }
            let first = fs::read_to_string(&p).unwrap().lines().next().unwrap_or_default().to_string();
            assert_eq!(first, stamp, "{}", p.display());
            seen += 1;
        }
    }
    // config, folds, 5 x (relations, model, loss, nig, tuning), reports
    assert!(seen > 30, "only {seen} artifacts");
    assert!(out.join("nig/fold4.tsv").exists());
    assert!(out.join("tuning/p3_fold4.tsv").exists());
}

#[test]
fn seed_flag_changes_the_stamp_and_out_env_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_experiment(dir.path(), 60, "");
    let out = dir.path().join("via_env");
    let res = std::process::Command::new(env!("CARGO_BIN_EXE_metawalk"))
        .args(["--config".as_ref(), cfg.as_os_str(), "--seed".as_ref(), "99".as_ref()])
        .args(["baseline", "--algo", "p3", "--param", "0.8"])
        .env("RUST_LOG", "error")
        .env("METAWALK_OUT_DIR", &out)
        .output()
        .unwrap();
    assert_ok(&res);
    let topk = fs::read_to_string(out.join("p3_topk.tsv")).unwrap();
    assert!(topk.lines().next().unwrap().ends_with(" seed=99"), "{}", topk.lines().next().unwrap());
    assert_eq!(topk.lines().nth(1).unwrap(), "user\trank\titem\tscore");
    assert!(topk.lines().count() > 100);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_experiment(dir.path(), 40, "");
    let missing = dir.path().join("nope.toml");
    assert_eq!(code(&metawalk(["--config".as_ref(), missing.as_os_str(), "run".as_ref()])), 2);

    let unknown = dir.path().join("unknown.toml");
    fs::write(&unknown, fs::read_to_string(&cfg).unwrap() + "\n[extra]\nkey = 1\n").unwrap();
    let res = metawalk(["--config".as_ref(), unknown.as_os_str(), "run".as_ref()]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("extra"));

    let bad_path = dir.path().join("bad_path.toml");
    fs::write(&bad_path, fs::read_to_string(&cfg).unwrap().replace("\"um,>mg\"", "\"um,>zz\"")).unwrap();
    assert_eq!(code(&metawalk(["--config".as_ref(), bad_path.as_os_str(), "run".as_ref()])), 2);

    let long_path = dir.path().join("long.toml");
    fs::write(&long_path, fs::read_to_string(&cfg).unwrap().replace("\"um,>mg\"", "\"um,>mg,<mg,>mg\"")).unwrap();
    assert_eq!(code(&metawalk(["--config".as_ref(), long_path.as_os_str(), "run".as_ref()])), 2);

    // sample needs an output directory
    assert_eq!(code(&metawalk(["--config".as_ref(), cfg.as_os_str(), "sample".as_ref()])), 2);
    assert_eq!(code(&metawalk(["frobnicate"])), 2);
}

#[test]
fn stage_failures_exit_with_three_and_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_experiment(dir.path(), 40, "");
    let data = dir.path().join("data");
    let um = fs::read_to_string(data.join("um.tsv")).unwrap();
    fs::write(data.join("um.tsv"), um + "user0\tmovie1\tseven\n").unwrap();
    let out = dir.path().join("out");
    let res = metawalk(["--config".as_ref(), cfg.as_os_str(), "--out".as_ref(), out.as_os_str(), "run".as_ref()]);
    assert_eq!(code(&res), 3);
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("ingest"), "{err}");
    assert!(err.contains("um.tsv"), "{err}");

    let empty_rels = dir.path().join("empty");
    fs::create_dir_all(&empty_rels).unwrap();
    fs::write(data.join("um.tsv"), fs::read_to_string(data.join("um.tsv")).unwrap().replace("user0\tmovie1\tseven\n", "")).unwrap();
    let res = metawalk([
        "--config".as_ref(),
        cfg.as_os_str(),
        "--out".as_ref(),
        dir.path().join("m.model").as_os_str(),
        "train".as_ref(),
        "--relations".as_ref(),
        empty_rels.as_os_str(),
    ]);
    // no target relation in an empty directory is a usage problem
    assert_eq!(code(&res), 2);
}

#[test]
fn synth_and_ingest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    fs::write(&spec, common::small_movielens_spec(1, 30)).unwrap();
    let data = dir.path().join("data");
    assert_ok(&metawalk(["--out".as_ref(), data.as_os_str(), "synth".as_ref(), "--spec".as_ref(), spec.as_os_str()]));
    let cfg = dir.path().join("experiment.toml");
    fs::write(&cfg, common::experiment_toml("")).unwrap();
    let res = metawalk(["--config".as_ref(), cfg.as_os_str(), "ingest".as_ref()]);
    assert_ok(&res);
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.contains("nodes\tuser\t30"), "{stdout}");
    assert!(stdout.contains("edges\tum\t360"), "{stdout}");
    let pcore = dir.path().join("pcore");
    assert_ok(&metawalk([
        "--config".as_ref(),
        cfg.as_os_str(),
        "--out".as_ref(),
        pcore.as_os_str(),
        "pcore".as_ref(),
        "--k".as_ref(),
        "2".as_ref(),
    ]));
    assert!(Path::new(&pcore.join("um.tsv")).exists());
}
