//! CLI and output-contract tests: command surface, file schemas,
//! reproducibility.

use std::path::{Path, PathBuf};
use std::process::Command;

use tdb_spde::bench::config::{parse_config, Method, Preset, Sampling};
use tdb_spde::bench::runner::run_case;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tdb-spde"))
}

fn work_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("tdb_spde_cli_tests").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn small_config(out_dir: &Path) -> String {
    format!(
        "[case]\nname = linadv-dirichlet\n\n\
         [discretization]\nn = 33\nt_final = 0.05\nkernel_grid = 256\n\n\
         [stochastic]\nsampling = mc\ns = 8\nseed = 11\n\n\
         [run]\nranks = 3\noutput_stride = 50\nout_dir = {}\n",
        out_dir.display()
    )
}

#[test]
fn list_cases_names_all_six() {
    let out = bin().arg("list-cases").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "linadv-dirichlet",
        "linadv-neumann",
        "linadv-robin",
        "burgers-dirichlet",
        "conv2d-linear",
        "conv2d-nonlinear",
    ] {
        assert!(text.contains(name), "missing {name} in:\n{text}");
    }
}

#[test]
fn validate_accepts_good_and_rejects_bad() {
    let dir = work_dir("validate");
    let good = dir.join("good.conf");
    std::fs::write(&good, small_config(&dir.join("out"))).unwrap();
    let out = bin().arg("validate").arg(&good).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    // rank exceeding min(n, s) is called out by name
    let bad = dir.join("bad.conf");
    std::fs::write(
        &bad,
        "[case]\nname = linadv-dirichlet\n[stochastic]\nsampling = mc\ns = 4\nseed = 1\n\
         [run]\nranks = 9\n",
    )
    .unwrap();
    let out = bin().arg("validate").arg(&bad).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("min(n, s)"), "unexpected message: {err}");

    let missing = bin()
        .arg("validate")
        .arg(dir.join("nope.conf"))
        .output()
        .unwrap();
    assert!(!missing.status.success());
}

#[test]
fn run_emits_expected_files_and_schema() {
    let dir = work_dir("run");
    let out_root = dir.join("out");
    let conf = dir.join("case.conf");
    std::fs::write(&conf, small_config(&out_root)).unwrap();
    let out = bin().arg("run").arg(&conf).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    for file in [
        "r3/singvals.csv",
        "r3/err_global.csv",
        "r3/err_boundary.csv",
        "r3/boundary_modes_kl.csv",
        "r3/boundary_modes_dbo.csv",
        "r3/boundary_modes_do.csv",
        "report.txt",
    ] {
        assert!(out_root.join(file).exists(), "missing {file}");
    }
    let singvals = std::fs::read_to_string(out_root.join("r3/singvals.csv")).unwrap();
    let header = singvals.lines().next().unwrap();
    assert_eq!(
        header,
        "t,s1_kl,s1_dbo,s1_do,s2_kl,s2_dbo,s2_do,s3_kl,s3_dbo,s3_do"
    );
    // time column first, strictly increasing
    let times: Vec<f64> = singvals
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(times.windows(2).all(|w| w[1] > w[0]));

    let err_b = std::fs::read_to_string(out_root.join("r3/err_boundary.csv")).unwrap();
    assert_eq!(
        err_b.lines().next().unwrap(),
        "t,eps_b_pcm,eps_b_dbo,eps_b_do"
    );

    let report = std::fs::read_to_string(out_root.join("report.txt")).unwrap();
    assert!(
        report.contains("no-cost check"),
        "report missing timing hook:\n{report}"
    );
}

#[test]
fn out_flag_and_env_root_are_honored() {
    let dir = work_dir("outflag");
    let conf = dir.join("case.conf");
    // config without out_dir: falls back to env root / case name
    std::fs::write(
        &conf,
        "[case]\nname = linadv-dirichlet\n\
         [discretization]\nn = 33\nt_final = 0.02\nkernel_grid = 256\n\
         [stochastic]\nsampling = mc\ns = 6\nseed = 3\n\
         [run]\nranks = 2\noutput_stride = 40\nmethods = pcm,dbo\n",
    )
    .unwrap();
    let env_root = dir.join("env_root");
    let out = bin()
        .arg("run")
        .arg(&conf)
        .env("TDB_SPDE_OUT", &env_root)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(env_root.join("linadv-dirichlet/report.txt").exists());

    // --out overrides everything
    let explicit = dir.join("explicit");
    let out = bin()
        .arg("run")
        .arg(&conf)
        .arg("--out")
        .arg(&explicit)
        .env("TDB_SPDE_OUT", &env_root)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(explicit.join("report.txt").exists());

    // --threads is accepted and validated
    let out = bin()
        .arg("run")
        .arg(&conf)
        .arg("--out")
        .arg(dir.join("threads"))
        .arg("--threads")
        .arg("0")
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn identical_configs_produce_bit_identical_csvs() {
    let dir = work_dir("repro");
    let run_into = |sub: &str| -> PathBuf {
        let out_dir = dir.join(sub);
        let text = small_config(&out_dir);
        let mut cfg = parse_config(&text, None).unwrap();
        cfg.out_dir = out_dir.clone();
        run_case(&cfg).unwrap();
        out_dir
    };
    let a = run_into("a");
    let b = run_into("b");
    for file in [
        "r3/singvals.csv",
        "r3/err_global.csv",
        "r3/err_boundary.csv",
        "r3/boundary_modes_kl.csv",
        "r3/boundary_modes_dbo.csv",
        "r3/boundary_modes_do.csv",
    ] {
        let bytes_a = std::fs::read(a.join(file)).unwrap();
        let bytes_b = std::fs::read(b.join(file)).unwrap();
        assert_eq!(bytes_a, bytes_b, "{file} differs between identical runs");
    }
}

#[test]
fn preset_flag_reshapes_a_case() {
    let dir = work_dir("preset");
    let conf = dir.join("case.conf");
    std::fs::write(&conf, "[case]\nname = burgers-dirichlet\n").unwrap();
    let out = bin()
        .arg("validate")
        .arg(&conf)
        .arg("--preset")
        .arg("paper")
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.contains("s = 256"),
        "paper preset sample count missing: {text}"
    );
    assert!(
        text.contains("ranks [4, 6, 8]"),
        "paper ranks missing: {text}"
    );
}

#[test]
fn velocity_file_drives_the_2d_case() {
    let dir = work_dir("velfile");
    // uniform downward flow on a coarse source grid
    let vel_path = dir.join("vel.txt");
    let mut text = String::from("2 2\n");
    for x1 in [-5.0f64, 5.0] {
        for x2 in [0.0f64, 5.0] {
            text.push_str(&format!("{x1} {x2} 0.0 -0.25\n"));
        }
    }
    std::fs::write(&vel_path, text).unwrap();
    let conf_text = format!(
        "[case]\nname = conv2d-linear\n\
         [discretization]\nn1 = 9\nn2 = 9\nt_final = 0.02\nt_switch = 0.01\nkernel_grid = 256\n\
         [stochastic]\nsampling = tensor\nq = 2\n\
         [physics]\nvelocity_file = {}\n\
         [run]\nranks = 2\noutput_stride = 20\nmethods = pcm,dbo\nout_dir = {}\n",
        vel_path.display(),
        dir.join("out").display()
    );
    let mut cfg = parse_config(&conf_text, None).unwrap();
    cfg.methods = vec![Method::Pcm, Method::Dbo];
    let report = run_case(&cfg).unwrap();
    assert!(!report.ranks.is_empty());
    assert!(dir.join("out/r2/singvals.csv").exists());
}

#[test]
fn paper_preset_monte_carlo_stand_in_is_seeded() {
    // the 1D paper shapes replace the sparse grid by seeded Monte Carlo
    let text = "[case]\nname = linadv-dirichlet\npreset = paper\n";
    let cfg = parse_config(text, None).unwrap();
    match cfg.sampling {
        Sampling::MonteCarlo { s, seed } => {
            assert_eq!(s, 333);
            assert_eq!(seed, 2024);
        }
        other => panic!("expected Monte Carlo stand-in, got {other:?}"),
    }
    assert_eq!(cfg.d, 8);
    let desk = parse_config("[case]\nname = linadv-dirichlet\n", Some(Preset::Desk)).unwrap();
    assert!(matches!(desk.sampling, Sampling::Tensor { q: 4 }));
}
