use std::path::Path;
use std::process::{Command, Output};

const TINY: &[&str] = &[
    "--set", "network.widths=4,6,8",
    "--set", "network.context_kernel=3",
    "--set", "optim.batch_size=2",
    "--set", "train.eval_every=2",
    "--set", "data.size=16",
    "--set", "data.object_min=3",
    "--set", "data.object_max=4",
    "--set", "data.max_gap=1",
    "--set", "data.train_count=6",
    "--set", "data.val_count=3",
];

fn svctx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svctx"))
        .args(args)
        .env("SVCTX_THREADS", "2")
        .output()
        .unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn train(out: &Path, seed: &str) -> Output {
    let mut args = vec!["train", "--out", out.to_str().unwrap(), "--seed", seed, "--max-iter", "4"];
    args.extend_from_slice(TINY);
    svctx(&args)
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(svctx(&["--help"]).status.code(), Some(0));
    assert_eq!(svctx(&["frobnicate"]).status.code(), Some(2));
    let bad_op = svctx(&["gradcheck", "--op", "nonsense"]);
    assert_eq!(bad_op.status.code(), Some(2));
    let err = text(&bad_op.stderr);
    assert!(err.contains("sv_conv") && err.contains("paired_conv"), "{err}");
    let bad_key = svctx(&["train", "--out", "/nonexistent/x", "--set", "optim.colour=red"]);
    assert_eq!(bad_key.status.code(), Some(2));
    assert!(text(&bad_key.stderr).contains("optim.colour"));
}

#[test]
fn gradcheck_with_zero_trials_is_vacuous() {
    let out = svctx(&["gradcheck", "--op", "sv_conv", "--trials", "0"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(text(&out.stdout).contains("0 trials"));
}

#[test]
fn gradcheck_single_op_passes() {
    let out = svctx(&["gradcheck", "--op", "sv_conv_separable", "--trials", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stdout));
    assert!(text(&out.stdout).contains(", ok"));
}

#[test]
fn train_eval_and_viz_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ra = train(&a, "5");
    assert_eq!(ra.status.code(), Some(0), "{}", text(&ra.stderr));
    let rb = train(&b, "5");
    assert_eq!(rb.status.code(), Some(0));
    let csv = std::fs::read(a.join("metrics.csv")).unwrap();
    assert_eq!(csv, std::fs::read(b.join("metrics.csv")).unwrap());
    assert_eq!(
        std::fs::read(a.join("model.ckpt")).unwrap(),
        std::fs::read(b.join("model.ckpt")).unwrap()
    );
    assert!(text(&csv).starts_with("iter,loss,lr,val_pixel_acc,val_mean_acc,val_miou\n"));
    assert_eq!(text(&csv).lines().count(), 3);

    // the saved config reproduces the run
    let c = dir.path().join("c");
    let rc = svctx(&[
        "train", "--config", a.join("config.txt").to_str().unwrap(),
        "--out", c.to_str().unwrap(), "--seed", "5",
    ]);
    assert_eq!(rc.status.code(), Some(0), "{}", text(&rc.stderr));
    assert_eq!(csv, std::fs::read(c.join("metrics.csv")).unwrap());

    let data = dir.path().join("data");
    let mut gen = vec!["gen-data", "--out", data.to_str().unwrap(), "--train", "2", "--val", "2"];
    gen.extend_from_slice(TINY);
    assert_eq!(svctx(&gen).status.code(), Some(0));
    let preds = dir.path().join("pred");
    let ev = svctx(&[
        "eval", "--checkpoint", a.join("model.ckpt").to_str().unwrap(),
        "--manifest", data.join("val.txt").to_str().unwrap(),
        "--out", preds.to_str().unwrap(),
    ]);
    assert_eq!(ev.status.code(), Some(0), "{}", text(&ev.stderr));
    let report = text(&ev.stdout);
    assert!(report.contains("pixel_acc") && report.contains("mean_iou"));
    assert!(preds.join("pred_0001.pgm").exists());

    let viz = dir.path().join("viz");
    let ckpt = a.join("model.ckpt");
    let image = data.join("val_0000.ppm");
    let run_viz = |points: &str| {
        svctx(&[
            "viz-mask", "--checkpoint", ckpt.to_str().unwrap(), "--image", image.to_str().unwrap(),
            "--points", points, "--out", viz.to_str().unwrap(),
        ])
    };
    assert_eq!(run_viz("5,6").status.code(), Some(0));
    let first = std::fs::read(viz.join("mask_5_6.pgm")).unwrap();
    assert_eq!(run_viz("5,6").status.code(), Some(0));
    assert_eq!(first, std::fs::read(viz.join("mask_5_6.pgm")).unwrap());
    let far = run_viz("3,3;16,0");
    assert_eq!(far.status.code(), Some(2));
    assert!(text(&far.stderr).contains("rows 0..16"));

    let missing = svctx(&["eval", "--checkpoint", "/nonexistent.ckpt", "--manifest", "x.txt"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn ablate_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.csv");
    let mut args = vec![
        "ablate", "--kernels", "0,3", "--variants", "svc", "--seeds", "2",
        "--out", table.to_str().unwrap(), "--set", "optim.max_iter=2",
    ];
    args.extend_from_slice(TINY);
    let out = svctx(&args);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let t = std::fs::read_to_string(&table).unwrap();
    let lines: Vec<&str> = t.lines().collect();
    assert_eq!(lines[0], "kernel,svc");
    assert!(lines[1].starts_with("0,") && lines[2].starts_with("3,"));
    assert_eq!(lines.len(), 3);
}
