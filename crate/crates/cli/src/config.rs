//! Run configuration: a TOML file with one section per module, overridden
//! field by field by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::Context;
use mixdim::analysis::SolverKind;
use mixdim::assembly::{Deltas, FaceBc, FaceConditions, VolumeData};
use mixdim::functions::Field3;
use mixdim::monolithic::Plane;
use serde::{Deserialize, Serialize};

/// Invalid user input; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid configuration: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub problems: ProblemSection,
    pub geom: GeomSection,
    pub trace: TraceSection,
    pub optsolver: SolverSection,
    pub analysis: AnalysisSection,
    pub monolithic: CompareSection,
    pub output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSection {
    pub name: Option<String>,
    pub seed: Option<u64>,
    pub count: Option<usize>,
    pub mesh: Option<PathBuf>,
    pub network: Option<PathBuf>,
    pub coefficients: Option<Coefficients>,
}

/// Constant 3D data for problems read from files.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Coefficients {
    pub k: f64,
    pub source: f64,
    pub boundary: BoundaryKind,
    /// Dirichlet value or outward Neumann flux on every face.
    pub boundary_value: f64,
}

impl Default for Coefficients {
    fn default() -> Self {
        Self {
            k: 1.0,
            source: 0.0,
            boundary: BoundaryKind::Dirichlet,
            boundary_value: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

impl Coefficients {
    pub fn volume_data(&self) -> VolumeData {
        let v = Field3::constant(self.boundary_value);
        let bc = match self.boundary {
            BoundaryKind::Dirichlet => FaceBc::Dirichlet(v),
            BoundaryKind::Neumann => FaceBc::Neumann(v),
        };
        VolumeData {
            k: self.k,
            source: Field3::constant(self.source),
            bc: FaceConditions::uniform(bc),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeomSection {
    /// Mesh subdivisions per box edge; a list for studies.
    pub n: Option<OneOrMany<usize>>,
}

/// δ values; lists define a sweep grid.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceSection {
    pub delta_uhat: Option<OneOrMany<f64>>,
    pub delta_psi_d: Option<OneOrMany<f64>>,
    pub delta_psi_sigma: Option<OneOrMany<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub solver: Option<String>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub preconditioner: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// Relative tolerance of the Lanczos estimate of cond(M).
    pub lanczos_tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    /// Planes such as `"z=0"`.
    pub planes: Option<Vec<String>>,
    pub samples: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
    }
}

/// Command-line values; `None` defers to the file, then to the default.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub problem: Option<String>,
    pub mesh: Option<PathBuf>,
    pub network: Option<PathBuf>,
    pub seed: Option<u64>,
    pub count: Option<usize>,
    pub n: Option<Vec<usize>>,
    pub delta_uhat: Option<Vec<f64>>,
    pub delta_psi_d: Option<Vec<f64>>,
    pub delta_psi_sigma: Option<Vec<f64>>,
    pub solver: Option<String>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub preconditioner: Option<bool>,
    pub lanczos_tol: Option<f64>,
    pub planes: Option<Vec<String>>,
    pub samples: Option<usize>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    Builtin { name: String, seed: u64, count: usize },
    Files { mesh: PathBuf, network: PathBuf, coefficients: Coefficients },
}

/// Fully resolved and validated run parameters.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub n: Vec<usize>,
    pub delta_uhat: Vec<f64>,
    pub delta_psi_d: Vec<f64>,
    pub delta_psi_sigma: Vec<f64>,
    pub solver: String,
    pub tol: f64,
    pub max_iter: Option<usize>,
    pub preconditioner: bool,
    pub lanczos_tol: f64,
    pub planes: Vec<String>,
    pub samples: usize,
    pub output: PathBuf,
}

pub const DEFAULT_OUTPUT: &str = "mixdim-out";

impl RunConfig {
    pub fn resolve(file: FileConfig, o: Overrides) -> anyhow::Result<Self> {
        let p = file.problems;
        let mesh = o.mesh.or(p.mesh);
        let network = o.network.or(p.network);
        let problem = match (mesh, network) {
            (Some(mesh), Some(network)) => {
                if o.problem.is_some() || p.name.is_some() {
                    return Err(invalid("give either a problem name or mesh and network files, not both"));
                }
                ProblemSpec::Files {
                    mesh,
                    network,
                    coefficients: p.coefficients.unwrap_or_default(),
                }
            }
            (None, None) => ProblemSpec::Builtin {
                name: o.problem.or(p.name).unwrap_or_else(|| "tp1".into()),
                seed: o.seed.or(p.seed).unwrap_or(0),
                count: o.count.or(p.count).unwrap_or(10),
            },
            _ => return Err(invalid("custom problems need both a mesh and a network file")),
        };
        let d = Deltas::default();
        let list = |flag: Option<Vec<f64>>, file: Option<OneOrMany<f64>>, default: f64| {
            flag.or(file.map(OneOrMany::into_vec)).unwrap_or_else(|| vec![default])
        };
        let cfg = Self {
            problem,
            n: o.n.or(file.geom.n.map(OneOrMany::into_vec)).unwrap_or_else(|| vec![4]),
            delta_uhat: list(o.delta_uhat, file.trace.delta_uhat, d.uhat),
            delta_psi_d: list(o.delta_psi_d, file.trace.delta_psi_d, d.psi_d),
            delta_psi_sigma: list(o.delta_psi_sigma, file.trace.delta_psi_sigma, d.psi_sigma),
            solver: o.solver.or(file.optsolver.solver).unwrap_or_else(|| "opt_pcg".into()),
            tol: o.tol.or(file.optsolver.tol).unwrap_or(1e-6),
            max_iter: o.max_iter.or(file.optsolver.max_iter),
            preconditioner: o.preconditioner.or(file.optsolver.preconditioner).unwrap_or(true),
            lanczos_tol: o.lanczos_tol.or(file.analysis.lanczos_tol).unwrap_or(1e-6),
            planes: o.planes.or(file.monolithic.planes).unwrap_or_else(|| vec!["z=0".into()]),
            samples: o.samples.or(file.monolithic.samples).unwrap_or(20),
            output: o.output.or(file.output.dir).unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT)),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> anyhow::Result<()> {
        if self.n.is_empty() || self.n.contains(&0) {
            return Err(invalid("mesh subdivisions must be positive"));
        }
        for (name, v) in [
            ("delta_uhat", &self.delta_uhat),
            ("delta_psi_d", &self.delta_psi_d),
            ("delta_psi_sigma", &self.delta_psi_sigma),
        ] {
            if v.is_empty() || v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(invalid(format!("{name} values must be positive")));
            }
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(invalid(format!("tol must lie in (0, 1), got {}", self.tol)));
        }
        if !(self.lanczos_tol > 0.0 && self.lanczos_tol < 1.0) {
            return Err(invalid(format!("lanczos_tol must lie in (0, 1), got {}", self.lanczos_tol)));
        }
        if self.max_iter == Some(0) {
            return Err(invalid("max_iter must be positive"));
        }
        if self.samples < 2 {
            return Err(invalid("samples must be at least 2"));
        }
        self.solver_kind()?;
        self.planes()?;
        if let ProblemSpec::Builtin { name, count, .. } = &self.problem {
            if !["tp1", "tp2_like", "cgtest_like"].contains(&name.as_str()) {
                return Err(invalid(format!(
                    "unknown problem '{name}' (expected tp1, tp2_like or cgtest_like)"
                )));
            }
            if *count == 0 {
                return Err(invalid("count must be positive"));
            }
        }
        Ok(())
    }

    /// `opt_pcg` with the preconditioner switched off is plain CG.
    pub fn solver_kind(&self) -> anyhow::Result<SolverKind> {
        match self.solver.as_str() {
            "opt_pcg" => Ok(SolverKind::OptPcg {
                preconditioned: self.preconditioner,
            }),
            "opt_cg" => Ok(SolverKind::OptPcg { preconditioned: false }),
            "opt_direct" => Ok(SolverKind::OptDirect),
            "coupled" => Ok(SolverKind::Coupled),
            s => Err(invalid(format!(
                "unknown solver '{s}' (expected opt_pcg, opt_cg, opt_direct or coupled)"
            ))),
        }
    }

    pub fn planes(&self) -> anyhow::Result<Vec<Plane>> {
        self.planes.iter().map(|s| parse_plane(s)).collect()
    }

    /// The single mesh size of commands that do not loop over meshes.
    pub fn single_n(&self) -> anyhow::Result<usize> {
        match self.n.as_slice() {
            [n] => Ok(*n),
            _ => Err(invalid("this command takes a single mesh size")),
        }
    }

    /// The single δ triple of commands that do not sweep.
    pub fn single_deltas(&self) -> anyhow::Result<Deltas> {
        match (&self.delta_uhat[..], &self.delta_psi_d[..], &self.delta_psi_sigma[..]) {
            ([u], [d], [s]) => Ok(Deltas {
                uhat: *u,
                psi_d: *d,
                psi_sigma: *s,
            }),
            _ => Err(invalid("δ lists are only accepted by `sweep`")),
        }
    }

    /// Cartesian product of the δ lists, δ̂_u slowest.
    pub fn delta_grid(&self) -> Vec<Deltas> {
        let mut g = Vec::new();
        for &uhat in &self.delta_uhat {
            for &psi_d in &self.delta_psi_d {
                for &psi_sigma in &self.delta_psi_sigma {
                    g.push(Deltas { uhat, psi_d, psi_sigma });
                }
            }
        }
        g
    }
}

/// `x=0.5`, `y=-1`, `z=0`.
pub fn parse_plane(s: &str) -> anyhow::Result<Plane> {
    let bad = || invalid(format!("plane must look like `z=0`, got `{s}`"));
    let (axis, value) = s.split_once('=').ok_or_else(bad)?;
    let axis = match axis.trim() {
        "x" => 0,
        "y" => 1,
        "z" => 2,
        _ => return Err(bad()),
    };
    let value: f64 = value.trim().parse().map_err(|_| bad())?;
    Ok(Plane { axis, value })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(toml_text: &str, o: Overrides) -> anyhow::Result<RunConfig> {
        RunConfig::resolve(toml::from_str(toml_text).unwrap(), o)
    }

    #[test]
    fn flags_override_file_values() {
        let text = "[geom]\nn = [2, 4]\n[optsolver]\ntol = 1e-4\nsolver = \"opt_direct\"\n";
        let c = resolve(text, Overrides::default()).unwrap();
        assert_eq!(c.n, vec![2, 4]);
        assert_eq!(c.solver_kind().unwrap(), SolverKind::OptDirect);
        let c = resolve(
            text,
            Overrides {
                tol: Some(1e-8),
                n: Some(vec![3]),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!((c.tol, c.single_n().unwrap()), (1e-8, 3));
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "[optsolver]\ntol = 1.5\n",
            "[trace]\ndelta_psi_d = -1.0\n",
            "[problems]\nname = \"tp9\"\n",
            "[problems]\nmesh = \"m.txt\"\n",
            "[monolithic]\nplanes = [\"w=1\"]\n",
        ] {
            let e = resolve(text, Overrides::default()).unwrap_err();
            assert!(e.downcast_ref::<ConfigError>().is_some(), "{text}");
        }
        assert!(toml::from_str::<FileConfig>("[geom]\nm = 3\n").is_err());
    }

    #[test]
    fn grid_is_cartesian() {
        let c = resolve("[trace]\ndelta_psi_d = [0.25, 0.5]\ndelta_psi_sigma = [1.0, 2.0, 3.0]\n", Overrides::default()).unwrap();
        assert_eq!(c.delta_grid().len(), 6);
        assert!(c.single_deltas().is_err());
        assert_eq!(parse_plane(" y = -0.5").unwrap(), Plane { axis: 1, value: -0.5 });
    }
}
