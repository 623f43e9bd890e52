//! JSON schemas for problem files and CSV writers for fields and tables.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dhym::DhymInstance;
use crate::error::Error;
use crate::forms::{power_form, FormBundle, FormComponent};
use crate::hermitian::{CMat, HermitianMatrix, C64};
use crate::operator::OperatorContext;
use crate::solver::torus::{kappa_from_classes, manufactured_problem, StepRecord};
use crate::solver::{Grid, TorusProblem};

/// JSON form of a Hermitian matrix: a nested real array, or separate real and
/// imaginary parts.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixRepr {
    Real(Vec<Vec<f64>>),
    Complex { re: Vec<Vec<f64>>, im: Vec<Vec<f64>> },
}

fn square(rows: &[Vec<f64>]) -> Result<usize, Error> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Input(format!("matrix must be a nonempty square array, got {n} rows")));
    }
    Ok(n)
}

impl TryFrom<MatrixRepr> for HermitianMatrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self, Error> {
        match r {
            MatrixRepr::Real(rows) => {
                let n = square(&rows)?;
                HermitianMatrix::new(CMat::from_fn(n, n, |i, j| C64::new(rows[i][j], 0.0)))
            }
            MatrixRepr::Complex { re, im } => {
                let n = square(&re)?;
                if square(&im)? != n {
                    return Err(Error::Input("real and imaginary parts differ in size".into()));
                }
                HermitianMatrix::new(CMat::from_fn(n, n, |i, j| C64::new(re[i][j], im[i][j])))
            }
        }
    }
}

impl From<HermitianMatrix> for MatrixRepr {
    fn from(h: HermitianMatrix) -> Self {
        let n = h.dim();
        let re: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| h.get(i, j).re).collect()).collect();
        let im: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| h.get(i, j).im).collect()).collect();
        if im.iter().flatten().all(|&x| x == 0.0) {
            MatrixRepr::Real(re)
        } else {
            MatrixRepr::Complex { re, im }
        }
    }
}

/// Error at a JSON pointer into the problem file.
pub fn at(pointer: impl Into<String>, err: Error) -> Error {
    match err {
        Error::InputAt { .. } => err,
        Error::Input(message) => Error::InputAt { pointer: pointer.into(), message },
        other => Error::InputAt { pointer: pointer.into(), message: other.to_string() },
    }
}

fn missing(pointer: &str) -> Error {
    Error::InputAt { pointer: pointer.into(), message: "required field is missing".into() }
}

/// One coefficient c_{I,J} with 1-based index lists; the conjugate partner
/// c_{J,I} is set along with it.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntrySpec {
    pub i: Vec<usize>,
    pub j: Vec<usize>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// A degree-k component: explicit entries plus an optional multiple of rho^k/k!.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub k: usize,
    #[serde(default)]
    pub entries: Vec<EntrySpec>,
    #[serde(default)]
    pub rho_power: Option<f64>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Wave {
    Cos,
    Sin,
}

/// amp * cos or sin of 2 pi k.x, with x in [0,1)^{2n}.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub amp: f64,
    pub k: Vec<i64>,
    #[serde(default = "default_wave")]
    pub wave: Wave,
}

fn default_wave() -> Wave {
    Wave::Cos
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManufacturedSpec {
    pub u_star: Vec<FourierTerm>,
}

/// The density f: a constant, grid values in row-major order, or the density
/// that makes a given field an exact solution.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DensitySpec {
    Constant(f64),
    Grid(Vec<f64>),
    Manufactured { manufactured: ManufacturedSpec },
}

/// A problem file. Which fields are needed depends on the subcommand.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub n: usize,
    /// Reference metric, the identity when absent.
    #[serde(default)]
    pub rho: Option<MatrixRepr>,
    #[serde(default)]
    pub omega0: Option<MatrixRepr>,
    /// Lower-degree components of the datum, degrees 1..n-1.
    #[serde(default)]
    pub components: Vec<ComponentSpec>,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub f: Option<DensitySpec>,
    /// Grid points per real axis.
    #[serde(default, rename = "N")]
    pub grid: Option<usize>,
    /// Points audited by check-cone; omega0 when absent.
    #[serde(default)]
    pub points: Option<Vec<MatrixRepr>>,
    /// Ray base point and direction.
    #[serde(default)]
    pub a: Option<MatrixRepr>,
    #[serde(default)]
    pub b: Option<MatrixRepr>,
    #[serde(default)]
    pub initial: Option<Vec<FourierTerm>>,
    #[serde(default)]
    pub potential: Option<Vec<FourierTerm>>,
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut s = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => s.push_str(&format!("/{index}")),
            Segment::Map { key } => s.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => s.push_str(&format!("/{variant}")),
            Segment::Unknown => {}
        }
    }
    s
}

/// Parses a problem; errors carry a JSON pointer, extended by the field name
/// for missing fields.
pub fn parse_problem(text: &str) -> Result<ProblemSpec, Error> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let mut pointer = pointer_of(e.path());
        let message = e.inner().to_string();
        if message.starts_with("missing field") {
            if let Some(name) = message.split('`').nth(1) {
                pointer.push('/');
                pointer.push_str(name);
            }
        }
        Error::InputAt { pointer, message }
    })
}

pub fn load_problem(path: &std::path::Path) -> Result<ProblemSpec, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_problem(&text)
}

fn mask(idx: &[usize], n: usize, k: usize) -> Result<u32, Error> {
    if idx.len() != k {
        return Err(Error::Input(format!("expected {k} indices, got {}", idx.len())));
    }
    let mut m = 0u32;
    for &i in idx {
        if i == 0 || i > n {
            return Err(Error::Input(format!("index {i} outside 1..={n}")));
        }
        if m & (1 << (i - 1)) != 0 {
            return Err(Error::Input(format!("repeated index {i}")));
        }
        m |= 1 << (i - 1);
    }
    Ok(m)
}

impl ProblemSpec {
    fn matrix(&self, repr: &MatrixRepr, pointer: &str) -> Result<HermitianMatrix, Error> {
        let h = HermitianMatrix::try_from(repr.clone()).map_err(|e| at(pointer, e))?;
        if h.dim() != self.n {
            return Err(Error::InputAt { pointer: pointer.into(), message: format!("expected a {0} x {0} matrix, got {1} x {1}", self.n, h.dim()) });
        }
        Ok(h)
    }

    fn required(&self, repr: &Option<MatrixRepr>, pointer: &str) -> Result<HermitianMatrix, Error> {
        self.matrix(repr.as_ref().ok_or_else(|| missing(pointer))?, pointer)
    }

    pub fn rho(&self) -> Result<HermitianMatrix, Error> {
        if self.n == 0 || self.n > 8 {
            return Err(Error::InputAt { pointer: "/n".into(), message: format!("n must lie in 1..=8, got {}", self.n) });
        }
        let rho = match &self.rho {
            Some(r) => self.matrix(r, "/rho")?,
            None => HermitianMatrix::identity(self.n),
        };
        if !rho.is_positive_definite() {
            return Err(Error::InputAt { pointer: "/rho".into(), message: format!("rho must be positive definite (min eigenvalue {:.3e})", rho.min_eig()) });
        }
        Ok(rho)
    }

    pub fn omega0(&self) -> Result<HermitianMatrix, Error> {
        self.required(&self.omega0, "/omega0")
    }

    /// Datum with the given top-degree density.
    pub fn bundle(&self, f: f64) -> Result<FormBundle, Error> {
        let rho = self.rho()?;
        let n = self.n;
        let mut comps = Vec::new();
        for (ci, c) in self.components.iter().enumerate() {
            let base = format!("/components/{ci}");
            if c.k == 0 || c.k >= n {
                return Err(Error::InputAt { pointer: format!("{base}/k"), message: format!("degree must lie in 1..{n}, got {}", c.k) });
            }
            let mut form = FormComponent::zero(n, c.k);
            for (ei, e) in c.entries.iter().enumerate() {
                let ptr = format!("{base}/entries/{ei}");
                let i = mask(&e.i, n, c.k).map_err(|err| at(format!("{ptr}/i"), err))?;
                let j = mask(&e.j, n, c.k).map_err(|err| at(format!("{ptr}/j"), err))?;
                let z = C64::new(e.re, e.im);
                if i == j && e.im != 0.0 {
                    return Err(Error::InputAt { pointer: format!("{ptr}/im"), message: "diagonal coefficients must be real".into() });
                }
                form.set(i, j, z);
                form.set(j, i, z.conj());
            }
            if let Some(s) = c.rho_power {
                form = form.add(&power_form(&rho, c.k, s));
            }
            comps.push(form);
        }
        FormBundle::new(rho, comps, f).map_err(|e| at("/components", e))
    }

    /// Constant density, required by the pointwise commands.
    pub fn constant_f(&self) -> Result<f64, Error> {
        match &self.f {
            None => Ok(0.0),
            Some(DensitySpec::Constant(f)) => Ok(*f),
            Some(_) => Err(Error::InputAt { pointer: "/f".into(), message: "a constant density is required here".into() }),
        }
    }

    /// Pointwise operator: kappa from /kappa, else from the classes of omega0.
    pub fn context(&self) -> Result<OperatorContext, Error> {
        let f = self.constant_f()?;
        let bundle = self.bundle(f)?;
        let kappa = match self.kappa {
            Some(k) => k,
            None if self.omega0.is_some() => kappa_from_classes(&self.omega0()?, &bundle, f).map_err(|e| at("/omega0", e))?,
            None => return Err(missing("/kappa")),
        };
        OperatorContext::new(bundle, kappa).map_err(|e| at("/kappa", e))
    }

    /// Points for check-cone.
    pub fn cone_points(&self) -> Result<Vec<HermitianMatrix>, Error> {
        match &self.points {
            Some(ps) if ps.is_empty() => Err(Error::InputAt { pointer: "/points".into(), message: "at least one point is required".into() }),
            Some(ps) => ps.iter().enumerate().map(|(i, p)| self.matrix(p, &format!("/points/{i}"))).collect(),
            None if self.omega0.is_some() => Ok(vec![self.omega0()?]),
            None => Err(missing("/points")),
        }
    }

    /// Ray base point (omega0 when absent) and direction.
    pub fn ray(&self) -> Result<(HermitianMatrix, HermitianMatrix), Error> {
        let a = match &self.a {
            Some(a) => self.matrix(a, "/a")?,
            None if self.omega0.is_some() => self.omega0()?,
            None => return Err(missing("/a")),
        };
        Ok((a, self.required(&self.b, "/b")?))
    }

    pub fn grid(&self, default: usize) -> Result<Grid, Error> {
        let size = self.grid.unwrap_or(default);
        let points = (size as f64).powi(2 * self.n as i32);
        if size < 2 || points > (1u64 << 22) as f64 {
            return Err(Error::InputAt { pointer: "/N".into(), message: format!("N = {size} gives an unsupported grid of {points} points") });
        }
        Grid::new(self.n, size).map_err(|e| at("/N", e))
    }

    /// A Fourier series sampled on the grid.
    pub fn sample(&self, terms: &[FourierTerm], grid: &Grid, pointer: &str) -> Result<Vec<f64>, Error> {
        let axes = 2 * self.n;
        for (i, t) in terms.iter().enumerate() {
            if t.k.len() != axes {
                return Err(Error::InputAt { pointer: format!("{pointer}/{i}/k"), message: format!("expected {axes} wave numbers, got {}", t.k.len()) });
            }
        }
        Ok(grid.sample(|x| {
            terms
                .iter()
                .map(|t| {
                    let phase = 2.0 * std::f64::consts::PI * t.k.iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum::<f64>();
                    t.amp * match t.wave {
                        Wave::Cos => phase.cos(),
                        Wave::Sin => phase.sin(),
                    }
                })
                .sum()
        }))
    }

    /// Exact solution of a manufactured problem, if any.
    pub fn u_star(&self, grid: &Grid) -> Result<Option<Vec<f64>>, Error> {
        match &self.f {
            Some(DensitySpec::Manufactured { manufactured }) => Ok(Some(self.sample(&manufactured.u_star, grid, "/f/manufactured/u_star")?)),
            _ => Ok(None),
        }
    }

    pub fn initial(&self, grid: &Grid) -> Result<Option<Vec<f64>>, Error> {
        self.initial.as_ref().map(|t| self.sample(t, grid, "/initial")).transpose()
    }

    pub fn potential(&self, grid: &Grid) -> Result<Vec<f64>, Error> {
        self.sample(self.potential.as_ref().ok_or_else(|| missing("/potential"))?, grid, "/potential")
    }

    /// The torus problem on an N^{2n} grid (N defaults to 8).
    pub fn torus_problem(&self) -> Result<TorusProblem, Error> {
        let grid = self.grid(8)?;
        let omega0 = self.omega0()?;
        match &self.f {
            Some(DensitySpec::Manufactured { .. }) => {
                let kappa = self.kappa.ok_or_else(|| missing("/kappa"))?;
                let u = self.u_star(&grid)?.expect("manufactured");
                manufactured_problem(grid, &u, self.bundle(0.0)?, omega0, kappa).map_err(|e| at("/f", e))
            }
            Some(DensitySpec::Grid(values)) => {
                if values.len() != grid.len() {
                    return Err(Error::InputAt { pointer: "/f".into(), message: format!("expected {} grid values, got {}", grid.len(), values.len()) });
                }
                let b = self.bundle(grid.mean(values))?;
                TorusProblem::new(grid, omega0, b, values.clone(), self.kappa).map_err(|e| at("/kappa", e))
            }
            _ => {
                let f = self.constant_f()?;
                let b = self.bundle(f)?;
                let values = vec![f; grid.len()];
                TorusProblem::new(grid, omega0, b, values, self.kappa).map_err(|e| at("/kappa", e))
            }
        }
    }

    /// dHYM instance from the classes of omega0 and rho.
    pub fn dhym_instance(&self) -> Result<DhymInstance, Error> {
        DhymInstance::from_classes(self.omega0()?, self.rho()?).map_err(|e| at("/omega0", e))
    }
}

/// The continuity-step table.
pub fn write_steps_csv<W: Write>(w: W, steps: &[StepRecord]) -> Result<(), Error> {
    let mut out = csv::Writer::from_writer(w);
    for s in steps {
        out.serialize(s)?;
    }
    out.flush()?;
    Ok(())
}

/// Grid fields in row-major point order with the point coordinates.
pub fn write_field_csv<W: Write>(w: W, grid: &Grid, columns: &[(&str, &[f64])]) -> Result<(), Error> {
    let mut out = csv::Writer::from_writer(w);
    let axes = 2 * grid.dim();
    let mut header: Vec<String> = vec!["point".into()];
    header.extend((0..axes).map(|a| format!("x{a}")));
    header.extend(columns.iter().map(|(name, _)| name.to_string()));
    out.write_record(&header)?;
    for p in 0..grid.len() {
        let mut row = vec![p.to_string()];
        row.extend(grid.coords(p).iter().map(|x| format!("{x:?}")));
        row.extend(columns.iter().map(|(_, v)| format!("{:?}", v[p])));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}
