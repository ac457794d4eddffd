//! Case configuration: presets, file parsing and validation.
//!
//! Config files are flat `key = value` text with `[section]` headers and `#`
//! comments. Every key has a per-case default (desk or paper preset); the
//! file only overrides what it names.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// The benchmark families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    LinAdvDirichlet,
    LinAdvNeumann,
    LinAdvRobin,
    BurgersDirichlet,
    Conv2dLinear,
    Conv2dNonlinear,
}

impl CaseKind {
    pub fn all() -> [CaseKind; 6] {
        [
            CaseKind::LinAdvDirichlet,
            CaseKind::LinAdvNeumann,
            CaseKind::LinAdvRobin,
            CaseKind::BurgersDirichlet,
            CaseKind::Conv2dLinear,
            CaseKind::Conv2dNonlinear,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            CaseKind::LinAdvDirichlet => "linadv-dirichlet",
            CaseKind::LinAdvNeumann => "linadv-neumann",
            CaseKind::LinAdvRobin => "linadv-robin",
            CaseKind::BurgersDirichlet => "burgers-dirichlet",
            CaseKind::Conv2dLinear => "conv2d-linear",
            CaseKind::Conv2dNonlinear => "conv2d-nonlinear",
        }
    }

    pub fn parse(name: &str) -> Result<CaseKind> {
        Self::all()
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown case '{name}'")))
    }

    pub fn describe(&self) -> &'static str {
        match self {
            CaseKind::LinAdvDirichlet => {
                "1D advection-diffusion, stochastic Dirichlet left boundary"
            }
            CaseKind::LinAdvNeumann => "1D advection-diffusion, stochastic Neumann left boundary",
            CaseKind::LinAdvRobin => "1D advection-diffusion, stochastic Robin left boundary",
            CaseKind::BurgersDirichlet => "1D viscous Burgers, stochastic Dirichlet left boundary",
            CaseKind::Conv2dLinear => "2D forced convection, stochastic Dirichlet bottom wall",
            CaseKind::Conv2dNonlinear => "2D forced convection, temperature-dependent conduction",
        }
    }

    pub fn is_2d(&self) -> bool {
        matches!(self, CaseKind::Conv2dLinear | CaseKind::Conv2dNonlinear)
    }
}

/// Random-space sampling rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    Tensor { q: usize },
    MonteCarlo { s: usize, seed: u64 },
}

/// Solution methods a run may request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Pcm,
    Dbo,
    Do,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Pcm => "pcm",
            Method::Dbo => "dbo",
            Method::Do => "do",
        }
    }

    pub fn parse(name: &str) -> Result<Method> {
        match name {
            "pcm" => Ok(Method::Pcm),
            "dbo" => Ok(Method::Dbo),
            "do" => Ok(Method::Do),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// Default scale for a case's parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Shrunk random dimension and horizon; full suites run in minutes.
    Desk,
    /// Full-scale parameter shapes; hours of compute.
    Paper,
}

/// Complete description of one benchmark run.
#[derive(Debug, Clone)]
pub struct CaseConfig {
    pub case: CaseKind,
    // discretization
    pub n: usize,
    pub n1: usize,
    pub n2: usize,
    pub dt: f64,
    pub t_final: f64,
    pub t_switch: f64,
    pub kernel_grid: usize,
    // stochastic
    pub d: usize,
    pub sampling: Sampling,
    pub sample_cap: usize,
    // physics
    pub nu: f64,
    pub c: f64,
    pub a: f64,
    pub b: f64,
    pub reynolds: f64,
    pub prandtl: f64,
    pub alpha: f64,
    pub beta: f64,
    pub sigma_t: f64,
    pub sigma_x: f64,
    pub l_t: f64,
    pub l_x: f64,
    pub bc_mean_amp: f64,
    pub ic_mean_amp: f64,
    /// Shift boundary data so the initial condition satisfies it exactly.
    pub bc_shift: bool,
    pub velocity_file: Option<PathBuf>,
    // run
    pub ranks: Vec<usize>,
    pub methods: Vec<Method>,
    pub output_stride: usize,
    pub out_dir: PathBuf,
}

impl CaseConfig {
    /// Per-case defaults at the chosen scale.
    pub fn preset(case: CaseKind, preset: Preset) -> CaseConfig {
        let desk = preset == Preset::Desk;
        let mut cfg = CaseConfig {
            case,
            n: 129,
            n1: 33,
            n2: 33,
            dt: 5e-4,
            t_final: if desk { 1.0 } else { 5.0 },
            t_switch: 0.0,
            kernel_grid: 2048,
            d: if desk { 2 } else { 8 },
            sampling: if desk {
                Sampling::Tensor { q: 4 }
            } else {
                // full-scale 1D setups use a sparse grid; a seeded Monte
                // Carlo set of the same size stands in for it here
                Sampling::MonteCarlo { s: 333, seed: 2024 }
            },
            sample_cap: crate::stochastic::DEFAULT_SAMPLE_CAP,
            nu: 0.05,
            c: 1.0,
            a: 1.0,
            b: 0.0,
            reynolds: 3000.0,
            prandtl: 1.0 / 300.0,
            alpha: 1.0,
            beta: 0.9,
            sigma_t: 1.0,
            sigma_x: 1.0,
            l_t: 1.0,
            l_x: 1.0,
            bc_mean_amp: 1.0,
            ic_mean_amp: 1.0,
            bc_shift: desk,
            velocity_file: None,
            ranks: if desk { vec![3] } else { vec![5, 7, 9] },
            methods: vec![Method::Pcm, Method::Dbo, Method::Do],
            output_stride: 200,
            out_dir: PathBuf::new(),
        };
        if !desk {
            cfg.n = 405;
        }
        match case {
            CaseKind::LinAdvDirichlet => {
                cfg.bc_mean_amp = 0.5;
                cfg.ic_mean_amp = 0.5;
                cfg.sigma_t = 1.0;
                cfg.sigma_x = 1.0;
            }
            CaseKind::LinAdvNeumann => {
                cfg.a = 0.0;
                cfg.b = 1.0;
                cfg.sigma_t = 0.1;
                cfg.sigma_x = 0.5;
            }
            CaseKind::LinAdvRobin => {
                cfg.a = 0.1;
                cfg.b = 1.0;
                cfg.sigma_t = -0.1;
                cfg.sigma_x = 0.01;
            }
            CaseKind::BurgersDirichlet => {
                cfg.dt = 2.5e-4;
                cfg.t_switch = 0.3;
                cfg.l_t = 3.0;
                cfg.l_x = 3.0;
                cfg.sigma_t = 0.01;
                cfg.sigma_x = 0.005;
                cfg.output_stride = 400;
                if desk {
                    cfg.t_final = 1.0;
                } else {
                    cfg.d = 4;
                    cfg.sampling = Sampling::Tensor { q: 4 };
                    cfg.ranks = vec![4, 6, 8];
                }
            }
            CaseKind::Conv2dLinear | CaseKind::Conv2dNonlinear => {
                cfg.output_stride = 400;
                cfg.sigma_t = if case == CaseKind::Conv2dLinear {
                    0.05
                } else {
                    0.5
                };
                cfg.l_x = 5.0; // wall half-length
                cfg.l_t = 5.0; // temporal period scale
                cfg.t_switch = 1.0;
                if desk {
                    cfg.t_final = 2.0;
                    cfg.d = 2;
                    cfg.sampling = Sampling::Tensor { q: 3 };
                    if case == CaseKind::Conv2dNonlinear {
                        // boundary data is stochastic from t = 0 here
                        cfg.t_switch = 0.0;
                    }
                } else {
                    cfg.t_final = 11.0;
                    cfg.n1 = 205;
                    cfg.n2 = 125;
                    cfg.d = 6;
                    cfg.sampling = Sampling::Tensor { q: 3 };
                    cfg.ranks = vec![3, 5, 7];
                }
            }
        }
        cfg
    }

    /// Total sample count implied by the sampling rule.
    pub fn sample_count(&self) -> Result<usize> {
        match self.sampling {
            Sampling::Tensor { q } => q.checked_pow(self.d as u32).ok_or(Error::BudgetExceeded {
                requested: usize::MAX,
                cap: self.sample_cap,
            }),
            Sampling::MonteCarlo { s, .. } => Ok(s),
        }
    }

    /// Points in the spatial grid.
    pub fn point_count(&self) -> usize {
        if self.case.is_2d() {
            self.n1 * self.n2
        } else {
            self.n
        }
    }

    /// Check the cross-field constraints.
    pub fn validate(&self) -> Result<()> {
        if self.dt <= 0.0 || self.t_final <= 0.0 {
            return Err(Error::Config("dt and t_final must be positive".into()));
        }
        if self.t_switch < 0.0 || self.t_switch >= self.t_final {
            return Err(Error::Config(format!(
                "t_switch = {} must lie in [0, t_final = {})",
                self.t_switch, self.t_final
            )));
        }
        if self.d == 0 {
            return Err(Error::Config(
                "random dimension d must be at least 1".into(),
            ));
        }
        let s = self.sample_count()?;
        if s > self.sample_cap {
            return Err(Error::BudgetExceeded {
                requested: s,
                cap: self.sample_cap,
            });
        }
        if self.methods.is_empty() {
            return Err(Error::Config(
                "at least one method must be requested".into(),
            ));
        }
        if self.ranks.is_empty()
            && self
                .methods
                .iter()
                .any(|m| matches!(m, Method::Dbo | Method::Do))
        {
            return Err(Error::Config(
                "low-rank methods need at least one rank".into(),
            ));
        }
        let min_dim = self.point_count().min(s);
        for &r in &self.ranks {
            if r == 0 || r > min_dim {
                return Err(Error::Config(format!(
                    "rank {r} violates 1 <= r <= min(n, s) = {min_dim}"
                )));
            }
        }
        if self.output_stride == 0 {
            return Err(Error::Config("output_stride must be positive".into()));
        }
        if self.case.is_2d() && (self.n1 < 8 || self.n2 < 8) {
            return Err(Error::Config("2d grids need n1, n2 >= 8".into()));
        }
        if !self.case.is_2d() && self.n < 8 {
            return Err(Error::Config("1d grids need n >= 8".into()));
        }
        Ok(())
    }

    /// Methods actually run: a PCM reference is implied whenever a low-rank
    /// method is requested.
    pub fn effective_methods(&self) -> Vec<Method> {
        let mut out = self.methods.clone();
        if out.iter().any(|m| matches!(m, Method::Dbo | Method::Do)) && !out.contains(&Method::Pcm)
        {
            out.insert(0, Method::Pcm);
        }
        out
    }

    pub fn wants(&self, m: Method) -> bool {
        self.effective_methods().contains(&m)
    }
}

/// Raw parse of the flat key=value format: `section.key -> value`.
fn parse_raw(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| {
                Error::Config(format!("line {}: bad section '{raw}'", lineno + 1))
            })?;
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let full = if section.is_empty() {
            key.trim().to_string()
        } else {
            format!("{section}.{}", key.trim())
        };
        if map.insert(full.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!("duplicate key '{full}'")));
        }
    }
    Ok(map)
}

struct KeyReader {
    map: BTreeMap<String, String>,
    used: std::collections::BTreeSet<String>,
}

impl KeyReader {
    fn get(&mut self, key: &str) -> Option<String> {
        let v = self.map.get(key).cloned();
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, into: &mut T) -> Result<()> {
        if let Some(v) = self.get(key) {
            *into = v
                .parse()
                .map_err(|_| Error::Config(format!("key '{key}': cannot parse '{v}'")))?;
        }
        Ok(())
    }

    fn unused(&self) -> Vec<String> {
        self.map
            .keys()
            .filter(|k| !self.used.contains(*k))
            .cloned()
            .collect()
    }
}

/// Parse a config file. The `[case] name` key picks the case, `preset`
/// (desk's the default) picks the baseline, and every other key overrides
/// one field. Unknown keys are an error.
pub fn parse_config(text: &str, preset_flag: Option<Preset>) -> Result<CaseConfig> {
    let mut reader = KeyReader {
        map: parse_raw(text)?,
        used: Default::default(),
    };
    let case_name = reader
        .get("case.name")
        .ok_or_else(|| Error::Config("missing [case] name = <case>".into()))?;
    let case = CaseKind::parse(&case_name)?;
    let preset = match (preset_flag, reader.get("case.preset")) {
        (Some(p), _) => p, // command line wins
        (None, Some(p)) => match p.as_str() {
            "desk" => Preset::Desk,
            "paper" => Preset::Paper,
            other => return Err(Error::Config(format!("unknown preset '{other}'"))),
        },
        (None, None) => Preset::Desk,
    };
    let mut cfg = CaseConfig::preset(case, preset);

    reader.parse("discretization.n", &mut cfg.n)?;
    reader.parse("discretization.n1", &mut cfg.n1)?;
    reader.parse("discretization.n2", &mut cfg.n2)?;
    reader.parse("discretization.dt", &mut cfg.dt)?;
    reader.parse("discretization.t_final", &mut cfg.t_final)?;
    reader.parse("discretization.t_switch", &mut cfg.t_switch)?;
    reader.parse("discretization.kernel_grid", &mut cfg.kernel_grid)?;

    reader.parse("stochastic.d", &mut cfg.d)?;
    reader.parse("stochastic.sample_cap", &mut cfg.sample_cap)?;
    if let Some(kind) = reader.get("stochastic.sampling") {
        match kind.as_str() {
            "tensor" => {
                let mut q = match cfg.sampling {
                    Sampling::Tensor { q } => q,
                    _ => 3,
                };
                reader.parse("stochastic.q", &mut q)?;
                cfg.sampling = Sampling::Tensor { q };
            }
            "mc" => {
                let (mut s, mut seed) = match cfg.sampling {
                    Sampling::MonteCarlo { s, seed } => (s, seed),
                    _ => (64, 0),
                };
                reader.parse("stochastic.s", &mut s)?;
                reader.parse("stochastic.seed", &mut seed)?;
                cfg.sampling = Sampling::MonteCarlo { s, seed };
            }
            other => return Err(Error::Config(format!("unknown sampling '{other}'"))),
        }
    } else {
        // allow q / s / seed tweaks without restating the rule
        match cfg.sampling {
            Sampling::Tensor { mut q } => {
                reader.parse("stochastic.q", &mut q)?;
                cfg.sampling = Sampling::Tensor { q };
            }
            Sampling::MonteCarlo { mut s, mut seed } => {
                reader.parse("stochastic.s", &mut s)?;
                reader.parse("stochastic.seed", &mut seed)?;
                cfg.sampling = Sampling::MonteCarlo { s, seed };
            }
        }
    }

    reader.parse("physics.nu", &mut cfg.nu)?;
    reader.parse("physics.c", &mut cfg.c)?;
    reader.parse("physics.a", &mut cfg.a)?;
    reader.parse("physics.b", &mut cfg.b)?;
    reader.parse("physics.reynolds", &mut cfg.reynolds)?;
    reader.parse("physics.prandtl", &mut cfg.prandtl)?;
    reader.parse("physics.alpha", &mut cfg.alpha)?;
    reader.parse("physics.beta", &mut cfg.beta)?;
    reader.parse("physics.sigma_t", &mut cfg.sigma_t)?;
    reader.parse("physics.sigma_x", &mut cfg.sigma_x)?;
    reader.parse("physics.l_t", &mut cfg.l_t)?;
    reader.parse("physics.l_x", &mut cfg.l_x)?;
    reader.parse("physics.bc_mean_amp", &mut cfg.bc_mean_amp)?;
    reader.parse("physics.ic_mean_amp", &mut cfg.ic_mean_amp)?;
    reader.parse("physics.bc_shift", &mut cfg.bc_shift)?;
    if let Some(path) = reader.get("physics.velocity_file") {
        cfg.velocity_file = Some(PathBuf::from(path));
    }

    if let Some(ranks) = reader.get("run.ranks") {
        cfg.ranks = ranks
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad rank '{}'", tok.trim())))
            })
            .collect::<Result<_>>()?;
    }
    if let Some(methods) = reader.get("run.methods") {
        cfg.methods = methods
            .split(',')
            .map(|tok| Method::parse(tok.trim()))
            .collect::<Result<_>>()?;
    }
    reader.parse("run.output_stride", &mut cfg.output_stride)?;
    if let Some(dir) = reader.get("run.out_dir") {
        cfg.out_dir = PathBuf::from(dir);
    }

    let unused = reader.unused();
    if !unused.is_empty() {
        return Err(Error::Config(format!(
            "unknown keys: {}",
            unused.join(", ")
        )));
    }
    if cfg.out_dir.as_os_str().is_empty() {
        cfg.out_dir = default_out_root().join(case.name());
    } else if cfg.out_dir.is_relative() {
        if let Some(root) = std::env::var_os("TDB_SPDE_OUT") {
            cfg.out_dir = PathBuf::from(root).join(&cfg.out_dir);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `$TDB_SPDE_OUT` or `./out`.
pub fn default_out_root() -> PathBuf {
    std::env::var_os("TDB_SPDE_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Parse a config file from disk.
pub fn load_config(path: &Path, preset_flag: Option<Preset>) -> Result<CaseConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, preset_flag)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_desk_defaults() {
        let cfg = parse_config("[case]\nname = linadv-dirichlet\n", None).unwrap();
        assert_eq!(cfg.case, CaseKind::LinAdvDirichlet);
        assert_eq!(cfg.n, 129);
        assert_eq!(cfg.d, 2);
        assert_eq!(cfg.sampling, Sampling::Tensor { q: 4 });
        assert!((cfg.bc_mean_amp - 0.5).abs() < 1e-15);
        assert!(cfg.bc_shift);
        assert_eq!(cfg.sample_count().unwrap(), 16);
    }

    #[test]
    fn overrides_and_sections() {
        let text = "\
[case]
name = burgers-dirichlet

[discretization]
n = 65
dt = 1e-3     # coarse

[stochastic]
sampling = tensor
q = 3

[run]
ranks = 2, 3
methods = dbo
";
        let cfg = parse_config(text, None).unwrap();
        assert_eq!(cfg.n, 65);
        assert_eq!(cfg.dt, 1e-3);
        assert_eq!(cfg.sampling, Sampling::Tensor { q: 3 });
        assert_eq!(cfg.ranks, vec![2, 3]);
        // pcm implied for the reference
        assert_eq!(cfg.effective_methods(), vec![Method::Pcm, Method::Dbo]);
    }

    #[test]
    fn paper_preset_shapes() {
        let cfg = parse_config("[case]\nname = linadv-robin\npreset = paper\n", None).unwrap();
        assert_eq!(cfg.n, 405);
        assert_eq!(cfg.d, 8);
        assert_eq!(cfg.ranks, vec![5, 7, 9]);
        assert!((cfg.t_final - 5.0).abs() < 1e-15);
        assert!(!cfg.bc_shift);
        assert!(matches!(cfg.sampling, Sampling::MonteCarlo { s: 333, .. }));
        assert!((cfg.a - 0.1).abs() < 1e-15);
        assert!((cfg.sigma_t + 0.1).abs() < 1e-15);

        let burgers =
            parse_config("[case]\nname = burgers-dirichlet\npreset = paper\n", None).unwrap();
        assert_eq!(burgers.sample_count().unwrap(), 256);
        assert_eq!(burgers.d, 4);
        assert!((burgers.t_switch - 0.3).abs() < 1e-15);
        assert!((burgers.dt - 2.5e-4).abs() < 1e-18);
    }

    #[test]
    fn validation_catches_bad_ranks_and_keys() {
        let text = "[case]\nname = linadv-dirichlet\n[run]\nranks = 40\n";
        match parse_config(text, None) {
            Err(Error::Config(msg)) => assert!(msg.contains("min(n, s)"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
        let text = "[case]\nname = linadv-dirichlet\n[run]\nbogus = 1\n";
        match parse_config(text, None) {
            Err(Error::Config(msg)) => assert!(msg.contains("unknown keys"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
        let text =
            "[case]\nname = linadv-dirichlet\n[stochastic]\nd = 9\nsampling = tensor\nq = 4\n";
        assert!(matches!(
            parse_config(text, None),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn conv2d_desk_geometry() {
        let cfg = parse_config("[case]\nname = conv2d-linear\n", None).unwrap();
        assert_eq!((cfg.n1, cfg.n2), (33, 33));
        assert_eq!(cfg.sample_count().unwrap(), 9);
        assert!((cfg.t_switch - 1.0).abs() < 1e-15);
        let nl = parse_config("[case]\nname = conv2d-nonlinear\n", None).unwrap();
        assert_eq!(nl.t_switch, 0.0);
        assert!((nl.sigma_t - 0.5).abs() < 1e-15);
    }
}
