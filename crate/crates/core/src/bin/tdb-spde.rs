//! Benchmark CLI: `run`, `validate`, `list-cases`.

use std::path::PathBuf;
use std::process::ExitCode;

use tdb_spde::bench::config::{self, CaseConfig, CaseKind, Preset};
use tdb_spde::bench::runner::run_case;

const USAGE: &str = "\
usage:
  tdb-spde run <config-path> [--out <dir>] [--threads <k>] [--preset desk|paper]
  tdb-spde validate <config-path> [--preset desk|paper]
  tdb-spde list-cases

Config files are flat key = value text with [case], [discretization],
[stochastic], [physics] and [run] sections; only [case] name is required.
The TDB_SPDE_OUT environment variable sets the default output root.
";

struct Flags {
    out: Option<PathBuf>,
    threads: Option<usize>,
    preset: Option<Preset>,
}

fn parse_flags(args: &[String]) -> Result<Flags, String> {
    let mut flags = Flags {
        out: None,
        threads: None,
        preset: None,
    };
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--out" => {
                let v = it.next().ok_or("--out needs a directory")?;
                flags.out = Some(PathBuf::from(v));
            }
            "--threads" => {
                let v = it.next().ok_or("--threads needs a count")?;
                let k: usize = v.parse().map_err(|_| format!("bad thread count '{v}'"))?;
                if k == 0 {
                    return Err("--threads must be at least 1".into());
                }
                flags.threads = Some(k);
            }
            "--preset" => {
                let v = it.next().ok_or("--preset needs desk or paper")?;
                flags.preset = Some(match v.as_str() {
                    "desk" => Preset::Desk,
                    "paper" => Preset::Paper,
                    other => return Err(format!("unknown preset '{other}'")),
                });
            }
            other => return Err(format!("unknown flag '{other}'")),
        }
    }
    Ok(flags)
}

fn load(path: &str, flags: &Flags) -> Result<CaseConfig, String> {
    let mut cfg =
        config::load_config(std::path::Path::new(path), flags.preset).map_err(|e| e.to_string())?;
    if let Some(out) = &flags.out {
        cfg.out_dir = out.clone();
        cfg.validate().map_err(|e| e.to_string())?;
    }
    Ok(cfg)
}

fn describe(cfg: &CaseConfig) -> String {
    let s = cfg.sample_count().unwrap_or(0);
    format!(
        "case {}: n = {}, d = {}, s = {}, ranks {:?}, dt = {:.3e}, t_final = {}, t_switch = {}",
        cfg.case.name(),
        cfg.point_count(),
        cfg.d,
        s,
        cfg.ranks,
        cfg.dt,
        cfg.t_final,
        cfg.t_switch
    )
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(command) = args.first() else {
        eprint!("{USAGE}");
        return ExitCode::FAILURE;
    };
    match command.as_str() {
        "list-cases" => {
            for kind in CaseKind::all() {
                println!("{:18} {}", kind.name(), kind.describe());
            }
            ExitCode::SUCCESS
        }
        "validate" => {
            let Some(path) = args.get(1) else {
                eprint!("{USAGE}");
                return ExitCode::FAILURE;
            };
            let flags = match parse_flags(&args[2..]) {
                Ok(f) => f,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            };
            match load(path, &flags) {
                Ok(cfg) => {
                    println!("ok: {}", describe(&cfg));
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("invalid: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        "run" => {
            let Some(path) = args.get(1) else {
                eprint!("{USAGE}");
                return ExitCode::FAILURE;
            };
            let flags = match parse_flags(&args[2..]) {
                Ok(f) => f,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            };
            if let Some(k) = flags.threads {
                // all kernels are single-threaded and deterministic; the flag
                // is accepted for interface stability and recorded only
                eprintln!("note: --threads {k} requested; kernels run single-threaded");
            }
            let cfg = match load(path, &flags) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("invalid config: {e}");
                    return ExitCode::FAILURE;
                }
            };
            println!("{}", describe(&cfg));
            match run_case(&cfg) {
                Ok(report) => {
                    println!(
                        "done: pcm {:.2} s, outputs under {}",
                        report.pcm_wall_s,
                        report.out_dir.display()
                    );
                    for series in &report.ranks {
                        if let Some(dbo) = &series.dbo {
                            println!(
                                "  r{} dbo: final eps_g {:.3e}, final eps_b {:.3e}",
                                series.rank, dbo.final_eps_g_plain, dbo.final_eps_b
                            );
                        }
                        if let Some(do_) = &series.do_ {
                            println!(
                                "  r{} do:  final eps_g {:.3e}, final eps_b {:.3e}",
                                series.rank, do_.final_eps_g_plain, do_.final_eps_b
                            );
                        }
                    }
                    if let Some(nc) = &report.nocost {
                        println!(
                            "  no-cost ratio (stochastic/homogeneous): {:.3}",
                            nc.ratio()
                        );
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("run failed: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        other => {
            eprintln!("unknown command '{other}'");
            eprint!("{USAGE}");
            ExitCode::FAILURE
        }
    }
}
