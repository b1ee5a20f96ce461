use std::path::{Path, PathBuf};

use clap::Parser;
use pamlab::cli::{run, Cli, ExperimentConfig};
use pamlab::Error;
use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run_args(args: &[&str]) -> pamlab::Result<PathBuf> {
    let mut argv = vec!["pamlab"];
    argv.extend_from_slice(args);
    run(&Cli::try_parse_from(argv).expect("valid arguments"))
}

#[test]
fn white_hartree_preset_reproduces_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("white-hartree-1d.conf");
    let out = run_args(&["variational", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]).unwrap();
    let json: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    let value = json["summary"]["value"].as_f64().unwrap();
    assert!((value - 1.0 / 48.0).abs() <= 0.01 / 48.0, "{value}");
    assert_eq!(json["command"], "variational");
    assert_eq!(json["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn artifacts_do_not_depend_on_worker_count() {
    for (command, preset, format) in
        [("noise-sample", "noise-riesz-2d.conf", "csv"), ("pam-solve", "pam-solve.conf", "json"), ("moments", "moments-crt2.conf", "csv")]
    {
        let cfg = config(preset);
        let outputs: Vec<String> = ["1", "3"]
            .iter()
            .map(|workers| {
                let dir = tempfile::tempdir().unwrap();
                let path = run_args(&[
                    command,
                    "--config",
                    cfg.to_str().unwrap(),
                    "--out",
                    dir.path().to_str().unwrap(),
                    "--workers",
                    workers,
                    "--format",
                    format,
                ])
                .unwrap();
                std::fs::read_to_string(path).unwrap()
            })
            .collect();
        assert_eq!(outputs[0], outputs[1], "{command}");
    }
}

#[test]
fn csv_artifacts_start_with_a_provenance_comment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("regime-sub1.conf");
    let out =
        run_args(&["regime-table", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--format", "csv"])
            .unwrap();
    let text = std::fs::read_to_string(out).unwrap();
    let mut lines = text.lines();
    let first = lines.next().unwrap();
    assert!(first.starts_with("# pamlab ") && first.contains("command=regime-table") && first.contains("config_sha256="));
    assert!(lines.next().unwrap().starts_with("regime,"));
    assert!(!text.contains('\r'));
}

#[test]
fn config_hash_tracks_seeds_but_not_workers() {
    let text = std::fs::read_to_string(config("pam-solve.conf")).unwrap();
    let cli = |args: &[&str]| {
        let mut argv = vec!["pamlab", "pam-solve"];
        argv.extend_from_slice(args);
        Cli::try_parse_from(argv).unwrap()
    };
    let hash = |c: &Cli| ExperimentConfig::from_text(c.command, &text, c).unwrap().hash();
    let base = hash(&cli(&[]));
    assert_eq!(base, hash(&cli(&["--workers", "4"])));
    assert_ne!(base, hash(&cli(&["--seed", "99"])));
    // Same sections in reverse order, with a comment and blank lines added.
    let (root, rest) = text.split_at(text.find('[').unwrap());
    let mut sections: Vec<String> = rest.split("\n[").map(|s| s.trim_start_matches('[').trim().to_string()).collect();
    sections.reverse();
    let reordered = format!("# reordered\n{root}\n\n[{}\n", sections.join("\n\n["));
    let c = cli(&[]);
    assert_eq!(base, ExperimentConfig::from_text(c.command, &reordered, &c).unwrap().hash());
}

#[test]
fn missing_fields_are_reported_with_their_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.conf");
    std::fs::write(&path, "[kernel]\nfamily = riesz\nsigma = 1\ndimension = 2\n").unwrap();
    let err = run_args(&["regime-table", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]).unwrap_err();
    match err {
        Error::Config { path, .. } => assert!(path.contains("omega") || path.contains("regime"), "{path}"),
        other => panic!("expected a config error, got {other:?}"),
    }
}
