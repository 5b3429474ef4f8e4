//! Run configuration: a flat TOML subset with one table per stage. Every key
//! is checked, unknown keys and sections are rejected with their line.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn new(line: Option<usize>, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    AnalyzeOrbit,
    NormalForm,
    Controllability,
    DesignPerturbation,
    SigmaScan,
    Verify,
}

impl Task {
    pub const ALL: [Task; 6] = [
        Task::AnalyzeOrbit,
        Task::NormalForm,
        Task::Controllability,
        Task::DesignPerturbation,
        Task::SigmaScan,
        Task::Verify,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::AnalyzeOrbit => "analyze-orbit",
            Task::NormalForm => "normal-form",
            Task::Controllability => "controllability",
            Task::DesignPerturbation => "design-perturbation",
            Task::SigmaScan => "sigma-scan",
            Task::Verify => "verify",
        }
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Task::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = Task::ALL.iter().map(|t| t.as_str()).collect();
            format!("unknown task {s:?}, expected one of {}", names.join(", "))
        })
    }
}

/// Which Hamiltonian to load. Zoo entries carry their own orbit point and
/// period; the quadratic kinds need them in `[orbit]`.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Harmonic { omega: f64 },
    AnisotropicHarmonic { a: f64, b: f64 },
    NonconvexD1,
    NonconvexD2,
    PendulumWell { d: usize, kappa: f64, mu: f64, amplitude: f64 },
    PendulumRotation { d: usize, kappa: f64, p1: f64 },
    MomentumLinear { d: usize },
    LorentzTorus,
    FigureEight,
    FreeParticle { d: usize },
    /// `H = p^T G(q) p / 2 + V(q)` with `G(q) = G_0 + sum_k q_k G_k` and
    /// quadratic `V`. `natural` requires `G_0` positive definite.
    Quadratic {
        natural: bool,
        g: DMatrix<f64>,
        slopes: Vec<DMatrix<f64>>,
        v_const: f64,
        v_linear: DVector<f64>,
        v_quadratic: DMatrix<f64>,
        periods: Vec<Option<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Central differences instead of analytic derivatives.
    pub finite_differences: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OrbitSpec {
    pub x0: Option<Vec<f64>>,
    pub period: Option<f64>,
    /// Newton shooting from `x0` and `period` before the analysis.
    pub refine: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormSpec {
    pub delta: f64,
    /// Orbit time of the chart origin.
    pub t0: f64,
    /// Sample count of the `K(t)`, `a(t)` dump.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllabilitySpec {
    pub depth: usize,
    /// Constant control data that replaces the model's normal form.
    pub signs: Option<Vec<f64>>,
    pub k: Option<DMatrix<f64>>,
    pub dirac: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Direction {
    /// Unit Frobenius norm, uniform coordinates in the Hamiltonian basis.
    Random,
    Matrix(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    /// Start of the control window; `None` picks a neat interval.
    pub t0: Option<f64>,
    pub epsilon: f64,
    pub direction: Direction,
    pub basis_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSpec {
    pub t_end: f64,
    /// Coefficients of a linear potential added to drive the energy.
    pub drive: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifySpec {
    /// Criterion numbers to run; empty runs all.
    pub criteria: Vec<usize>,
}

/// Tolerances before `--tol-scale` is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub flow_rel: f64,
    pub flow_abs: f64,
    /// Orbit closure, relative to `max(1, |x0|)`.
    pub closure: f64,
    pub normal_form: f64,
    /// Distance of the return-map spectrum from 1.
    pub nondegeneracy: f64,
    /// Frobenius residual of the control-system synthesis, relative to the
    /// target.
    pub synthesis: f64,
    /// Value and gradient of the potential along the orbit.
    pub admissibility: f64,
    /// Full return map against its target, relative to `|target - L0|`.
    pub realization: f64,
    /// Sigma events against zero-energy times.
    pub sigma_match: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            flow_rel: 1e-12,
            flow_abs: 1e-13,
            closure: 1e-8,
            normal_form: 1e-6,
            nondegeneracy: 1e-6,
            synthesis: 1e-8,
            admissibility: 1e-7,
            realization: 0.1,
            sigma_match: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            flow_rel: self.flow_rel * s,
            flow_abs: self.flow_abs * s,
            closure: self.closure * s,
            normal_form: self.normal_form * s,
            nondegeneracy: self.nondegeneracy * s,
            synthesis: self.synthesis * s,
            admissibility: self.admissibility * s,
            realization: self.realization * s,
            sigma_match: self.sigma_match * s,
        }
    }

    pub fn entries(&self) -> [(&'static str, f64); 9] {
        [
            ("flow_rel", self.flow_rel),
            ("flow_abs", self.flow_abs),
            ("closure", self.closure),
            ("normal_form", self.normal_form),
            ("nondegeneracy", self.nondegeneracy),
            ("synthesis", self.synthesis),
            ("admissibility", self.admissibility),
            ("realization", self.realization),
            ("sigma_match", self.sigma_match),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub task: Option<Task>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub model: Option<ModelSpec>,
    pub orbit: OrbitSpec,
    pub normal_form: NormalFormSpec,
    pub controllability: ControllabilitySpec,
    pub perturbation: PerturbationSpec,
    pub sigma: SigmaSpec,
    pub verify: VerifySpec,
    pub tolerances: Tolerances,
}

const SECTIONS: [&str; 9] = [
    "run",
    "model",
    "orbit",
    "normal_form",
    "controllability",
    "perturbation",
    "sigma",
    "verify",
    "tolerances",
];

/// One-based line of `key` inside `[section]`, or of the header itself when
/// `key` is `None`.
fn locate(src: &str, section: &str, key: Option<&str>) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.split(']').next().unwrap_or("").trim().to_string();
            if key.is_none() && current == section {
                return Some(i + 1);
            }
            continue;
        }
        if let Some(k) = key {
            if current == section {
                let name = line.split('=').next().unwrap_or("").trim().trim_matches('"');
                if name == k {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    src: &'a str,
    used: RefCell<BTreeSet<String>>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &'static str, src: &'a str) -> Result<Self> {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                return Err(ConfigError::new(
                    locate(src, "", Some(name)),
                    format!("{name} must be a section header [{name}]"),
                ))
            }
        };
        Ok(Self {
            name,
            table,
            src,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    fn present(&self) -> bool {
        self.table.is_some()
    }

    fn err(&self, key: &str, msg: impl fmt::Display) -> ConfigError {
        ConfigError::new(
            locate(self.src, self.name, Some(key)),
            format!("[{}] {key}: {msg}", self.name),
        )
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.used.borrow_mut().insert(key.to_string());
        self.table.and_then(|t| t.get(key))
    }

    fn number(&self, key: &str, v: &Value) -> Result<f64> {
        match v {
            Value::Float(x) if x.is_finite() => Ok(*x),
            Value::Integer(i) => Ok(*i as f64),
            _ => Err(self.err(key, "expected a finite number")),
        }
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key).map(|v| self.number(key, v)).transpose()
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.f64_or(key, default)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(self.err(key, format!("must be positive, got {v}")))
        }
    }

    fn integer(&self, key: &str) -> Result<Option<i64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) => Ok(Some(*i)),
            Some(_) => Err(self.err(key, "expected an integer")),
        }
    }

    fn count(&self, key: &str, default: usize, min: usize) -> Result<usize> {
        match self.integer(key)? {
            None => Ok(default),
            Some(i) if i >= min as i64 => Ok(i as usize),
            Some(i) => Err(self.err(key, format!("must be at least {min}, got {i}"))),
        }
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(self.err(key, "expected true or false")),
        }
    }

    fn string(&self, key: &str) -> Result<Option<&'a str>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(_) => Err(self.err(key, "expected a quoted string")),
        }
    }

    fn numbers(&self, key: &str, v: &Value) -> Result<Vec<f64>> {
        match v {
            Value::Array(a) => a.iter().map(|x| self.number(key, x)).collect(),
            _ => Err(self.err(key, "expected an array of numbers")),
        }
    }

    fn vector(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key).map(|v| self.numbers(key, v)).transpose()
    }

    fn rows(&self, key: &str, v: &Value) -> Result<DMatrix<f64>> {
        let Value::Array(rows) = v else {
            return Err(self.err(key, "expected a matrix [[..], [..]]"));
        };
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| self.numbers(key, r)).collect::<Result<_>>()?;
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
            return Err(self.err(key, "matrix rows must be non-empty and of equal length"));
        }
        Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
    }

    fn matrix(&self, key: &str) -> Result<Option<DMatrix<f64>>> {
        self.get(key).map(|v| self.rows(key, v)).transpose()
    }

    fn matrices(&self, key: &str) -> Result<Option<Vec<DMatrix<f64>>>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(a)) => a.iter().map(|m| self.rows(key, m)).collect::<Result<_>>().map(Some),
            Some(_) => Err(self.err(key, "expected an array of matrices")),
        }
    }

    /// Rejects keys that no accessor asked for.
    fn finish(self) -> Result<()> {
        if let Some(t) = self.table {
            let used = self.used.borrow();
            if let Some(k) = t.keys().find(|k| !used.contains(*k)) {
                return Err(self.err(k, "unknown key"));
            }
        }
        Ok(())
    }
}

fn square(s: &Section, key: &str, m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.shape() != (n, n) {
        return Err(s.err(key, format!("expected {n} x {n}, got {} x {}", m.nrows(), m.ncols())));
    }
    Ok(())
}

fn parse_model(s: &Section) -> Result<Option<ModelSpec>> {
    if !s.present() {
        return Ok(None);
    }
    let kind_name = s.string("kind")?.ok_or_else(|| ConfigError::new(locate(s.src, "model", None), "[model] kind is required"))?;
    let dim = |key: &str| s.count(key, 1, 1);
    let kind = match kind_name {
        "harmonic" => ModelKind::Harmonic {
            omega: s.positive("omega", 1.0)?,
        },
        "anisotropic-harmonic" => ModelKind::AnisotropicHarmonic {
            a: s.positive("a", 1.0)?,
            b: s.positive("b", 1.7)?,
        },
        "nonconvex-d1" => ModelKind::NonconvexD1,
        "nonconvex-d2" => ModelKind::NonconvexD2,
        "pendulum-well" => ModelKind::PendulumWell {
            d: dim("d")?,
            kappa: s.positive("kappa", 1.5)?,
            mu: s.f64_or("mu", 0.3)?,
            amplitude: s.positive("amplitude", 1.0)?,
        },
        "pendulum-rotation" => ModelKind::PendulumRotation {
            d: dim("d")?,
            kappa: s.positive("kappa", 1.5)?,
            p1: {
                let p1 = s.f64_or("p1", 2.5)?;
                if p1 <= 2.0 {
                    return Err(s.err("p1", format!("rotation needs p1 > 2, got {p1}")));
                }
                p1
            },
        },
        "momentum-linear" => ModelKind::MomentumLinear { d: dim("d")? },
        "lorentz-torus" => ModelKind::LorentzTorus,
        "figure-eight" => ModelKind::FigureEight,
        "free-particle" => ModelKind::FreeParticle { d: dim("d")? },
        "fiberwise-quadratic" | "natural" => {
            let g = s.matrix("g")?.ok_or_else(|| s.err("g", "required for this kind"))?;
            let n = g.nrows();
            square(s, "g", &g, n)?;
            if n < 2 {
                return Err(s.err("g", "base dimension must be at least 2"));
            }
            let slopes = s.matrices("g_slopes")?.unwrap_or_else(|| vec![DMatrix::zeros(n, n); n]);
            if slopes.len() != n {
                return Err(s.err("g_slopes", format!("expected {n} matrices, got {}", slopes.len())));
            }
            for m in &slopes {
                square(s, "g_slopes", m, n)?;
            }
            let v_linear = s.vector("v_linear")?.unwrap_or_else(|| vec![0.0; n]);
            if v_linear.len() != n {
                return Err(s.err("v_linear", format!("expected {n} entries")));
            }
            let v_quadratic = s.matrix("v_quadratic")?.unwrap_or_else(|| DMatrix::zeros(n, n));
            square(s, "v_quadratic", &v_quadratic, n)?;
            let periods = s.vector("periods")?.unwrap_or_else(|| vec![0.0; n]);
            if periods.len() != n || periods.iter().any(|&p| p < 0.0) {
                return Err(s.err("periods", format!("expected {n} non-negative entries, 0 for a line")));
            }
            ModelKind::Quadratic {
                natural: kind_name == "natural",
                g,
                slopes,
                v_const: s.f64_or("v_const", 0.0)?,
                v_linear: DVector::from_vec(v_linear),
                v_quadratic,
                periods: periods.iter().map(|&p| (p > 0.0).then_some(p)).collect(),
            }
        }
        other => return Err(s.err("kind", format!("unknown model kind {other:?}"))),
    };
    let finite_differences = match s.string("derivatives")? {
        None | Some("analytic") => false,
        Some("central") => true,
        Some(other) => return Err(s.err("derivatives", format!("expected \"analytic\" or \"central\", got {other:?}"))),
    };
    Ok(Some(ModelSpec {
        kind,
        finite_differences,
    }))
}

impl Config {
    pub fn parse(src: &str) -> Result<Self> {
        let root: Table = src.parse().map_err(|e: toml::de::Error| {
            let line = e.span().map(|sp| src[..sp.start.min(src.len())].matches('\n').count() + 1);
            ConfigError::new(line, e.message().trim().to_string())
        })?;
        if let Some(k) = root.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            let line = locate(src, k, None).or_else(|| locate(src, "", Some(k)));
            return Err(ConfigError::new(line, format!("unknown section or top-level key {k:?}")));
        }
        let sec = |name| Section::new(&root, name, src);

        let run = sec("run")?;
        let task = run
            .string("task")?
            .map(|t| t.parse::<Task>().map_err(|e| run.err("task", e)))
            .transpose()?;
        let seed = match run.integer("seed")? {
            Some(i) if i < 0 => return Err(run.err("seed", "must be non-negative")),
            other => other.map(|i| i as u64),
        };
        let out = run.string("out")?.map(PathBuf::from);
        run.finish()?;

        let m = sec("model")?;
        let model = parse_model(&m)?;
        m.finish()?;

        let o = sec("orbit")?;
        let orbit = OrbitSpec {
            x0: o.vector("x0")?,
            period: match o.f64("period")? {
                Some(p) if p <= 0.0 => return Err(o.err("period", "must be positive")),
                p => p,
            },
            refine: o.bool("refine", false)?,
        };
        o.finish()?;

        let nf = sec("normal_form")?;
        let normal_form = NormalFormSpec {
            delta: nf.positive("delta", 0.5)?,
            t0: nf.f64_or("t0", 0.0)?,
            samples: nf.count("samples", 41, 2)?,
        };
        nf.finish()?;

        let c = sec("controllability")?;
        let depth = c.count("depth", 3, 3)?;
        if depth > 4 {
            return Err(c.err("depth", "bracket depth is capped at 4"));
        }
        let signs = c.vector("signs")?;
        let k = c.matrix("k")?;
        match (&signs, &k) {
            (Some(sg), Some(km)) => {
                if sg.iter().any(|v| *v != 1.0 && *v != -1.0) {
                    return Err(c.err("signs", "entries must be +1 or -1"));
                }
                square(&c, "k", km, sg.len())?;
                if (km - km.transpose()).amax() > 1e-12 * (1.0 + km.amax()) {
                    return Err(c.err("k", "must be symmetric"));
                }
            }
            (None, None) => {}
            (Some(_), None) => return Err(c.err("signs", "needs k as well")),
            (None, Some(_)) => return Err(c.err("k", "needs signs as well")),
        }
        let controllability = ControllabilitySpec {
            depth,
            signs,
            k,
            dirac: c.bool("dirac", true)?,
        };
        c.finish()?;

        let p = sec("perturbation")?;
        let direction = match p.get("direction") {
            None => Direction::Random,
            Some(Value::String(s)) if s == "random" => Direction::Random,
            Some(v @ Value::Array(_)) => Direction::Matrix(p.rows("direction", v)?),
            Some(_) => return Err(p.err("direction", "expected \"random\" or a Hamiltonian matrix")),
        };
        let perturbation = PerturbationSpec {
            t0: p.f64("t0")?,
            epsilon: p.positive("epsilon", 1e-3)?,
            direction,
            basis_count: p.count("basis_count", 8, 1)?,
        };
        p.finish()?;

        let sg = sec("sigma")?;
        let sigma = SigmaSpec {
            t_end: sg.positive("t_end", 2.0)?,
            drive: sg.vector("drive")?,
        };
        sg.finish()?;

        let v = sec("verify")?;
        let criteria = match v.vector("criteria")? {
            None => Vec::new(),
            Some(list) => list
                .iter()
                .map(|&x| {
                    if x.fract() == 0.0 && (1.0..=10.0).contains(&x) {
                        Ok(x as usize)
                    } else {
                        Err(v.err("criteria", format!("criterion numbers run from 1 to 10, got {x}")))
                    }
                })
                .collect::<Result<_>>()?,
        };
        v.finish()?;

        let t = sec("tolerances")?;
        let d = Tolerances::default();
        let tolerances = Tolerances {
            flow_rel: t.positive("flow_rel", d.flow_rel)?,
            flow_abs: t.positive("flow_abs", d.flow_abs)?,
            closure: t.positive("closure", d.closure)?,
            normal_form: t.positive("normal_form", d.normal_form)?,
            nondegeneracy: t.positive("nondegeneracy", d.nondegeneracy)?,
            synthesis: t.positive("synthesis", d.synthesis)?,
            admissibility: t.positive("admissibility", d.admissibility)?,
            realization: t.positive("realization", d.realization)?,
            sigma_match: t.positive("sigma_match", d.sigma_match)?,
        };
        t.finish()?;

        Ok(Self {
            task,
            seed,
            out,
            model,
            orbit,
            normal_form,
            controllability,
            perturbation,
            sigma,
            verify: VerifySpec { criteria },
            tolerances,
        })
    }
}
