//! Choi-operator calculus for linear maps on finite-dimensional operators.
//!
//! Index convention: the Choi matrix of a map `E` from dimension `d` to `d'` has entries
//! `E[(i,k),(j,l)] = <k| E(|i><j|) |l>` with flat index `i*d' + k`.

use crate::error::{dim_err, invalid, Error, Result};
use crate::linalg::{self, hermitian_part, hermiticity_defect, CMat, C64, ZERO};
use serde::{Deserialize, Serialize};

const HERMITIAN_GUARD: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChoiJson", into = "ChoiJson")]
pub struct ChoiOperator {
    dim_in: usize,
    dim_out: usize,
    matrix: CMat,
}

impl ChoiOperator {
    /// Wraps a Hermitian matrix; small asymmetries are averaged away.
    pub fn new(dim_in: usize, dim_out: usize, matrix: CMat) -> Result<Self> {
        let n = dim_in * dim_out;
        if dim_in == 0 || dim_out == 0 {
            return dim_err("Choi dimensions must be positive");
        }
        if matrix.nrows() != n || matrix.ncols() != n {
            return dim_err(format!(
                "Choi matrix for {dim_in}->{dim_out} must be {n}x{n}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            ));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("Choi matrix has non-finite entries");
        }
        let defect = hermiticity_defect(&matrix);
        if defect > HERMITIAN_GUARD {
            return invalid(format!("Choi matrix is not Hermitian (defect {defect:.3e})"));
        }
        Ok(Self { dim_in, dim_out, matrix: hermitian_part(&matrix) })
    }

    /// Same as [`ChoiOperator::new`] but symmetrizes whatever it is given.
    pub(crate) fn from_hermitian_part(dim_in: usize, dim_out: usize, matrix: CMat) -> Self {
        Self { dim_in, dim_out, matrix: hermitian_part(&matrix) }
    }

    pub fn identity(d: usize) -> Self {
        Self { dim_in: d, dim_out: d, matrix: linalg::phi_plus(d) }
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { matrix: self.matrix.scale(s), ..self.clone() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(Self { matrix: &self.matrix + &other.matrix, ..self.clone() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(Self { matrix: &self.matrix - &other.matrix, ..self.clone() })
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.dim_in != other.dim_in || self.dim_out != other.dim_out {
            return dim_err(format!("{}->{} versus {}->{}", self.dim_in, self.dim_out, other.dim_in, other.dim_out));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        linalg::max_abs_diff(&self.matrix, &other.matrix)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("Choi serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
struct ChoiJson {
    dim_in: usize,
    dim_out: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl From<ChoiOperator> for ChoiJson {
    fn from(c: ChoiOperator) -> Self {
        let n = c.matrix.nrows();
        let mut re = Vec::with_capacity(n * n);
        let mut im = Vec::with_capacity(n * n);
        for r in 0..n {
            for col in 0..n {
                re.push(c.matrix[(r, col)].re);
                im.push(c.matrix[(r, col)].im);
            }
        }
        ChoiJson { dim_in: c.dim_in, dim_out: c.dim_out, re, im }
    }
}

impl TryFrom<ChoiJson> for ChoiOperator {
    type Error = Error;

    fn try_from(j: ChoiJson) -> Result<Self> {
        let n = j.dim_in * j.dim_out;
        if j.re.len() != n * n || j.im.len() != n * n {
            return dim_err(format!("expected {} entries in re and im", n * n));
        }
        let m = CMat::from_fn(n, n, |r, c| C64::new(j.re[r * n + c], j.im[r * n + c]));
        ChoiOperator::new(j.dim_in, j.dim_out, m)
    }
}

/// The images of all matrix units: `images[i][j] = E(|i><j|)`.
#[derive(Clone, Debug)]
pub struct MapAction {
    pub images: Vec<Vec<CMat>>,
}

impl MapAction {
    pub fn from_fn(d: usize, f: impl Fn(usize, usize) -> CMat) -> Self {
        Self { images: (0..d).map(|i| (0..d).map(|j| f(i, j)).collect()).collect() }
    }

    pub fn dim(&self) -> usize {
        self.images.len()
    }
}

pub fn choi_from_action(action: &MapAction) -> Result<ChoiOperator> {
    let d = action.dim();
    if d == 0 || action.images.iter().any(|row| row.len() != d) {
        return dim_err("map action must be a square array of images");
    }
    let dout = action.images[0][0].nrows();
    for row in &action.images {
        for img in row {
            if img.nrows() != dout || img.ncols() != dout {
                return dim_err("image matrices differ in shape");
            }
        }
    }
    let mut m = CMat::zeros(d * dout, d * dout);
    for i in 0..d {
        for j in 0..d {
            let img = &action.images[i][j];
            for k in 0..dout {
                for l in 0..dout {
                    m[(i * dout + k, j * dout + l)] = img[(k, l)];
                }
            }
        }
    }
    ChoiOperator::new(d, dout, m)
}

pub fn action_from_choi(choi: &ChoiOperator) -> MapAction {
    let (d, dout) = (choi.dim_in, choi.dim_out);
    MapAction::from_fn(d, |i, j| CMat::from_fn(dout, dout, |k, l| choi.matrix[(i * dout + k, j * dout + l)]))
}

/// `E(rho) = sum_ij rho_ij E(|i><j|)`; works for any operator, not just states.
pub fn apply_channel(choi: &ChoiOperator, rho: &CMat) -> Result<CMat> {
    let (d, dout) = (choi.dim_in, choi.dim_out);
    if rho.nrows() != d || rho.ncols() != d {
        return dim_err(format!("operator is {}x{}, channel input dimension {d}", rho.nrows(), rho.ncols()));
    }
    let mut out = CMat::zeros(dout, dout);
    for i in 0..d {
        for j in 0..d {
            let r = rho[(i, j)];
            if r == ZERO {
                continue;
            }
            for k in 0..dout {
                for l in 0..dout {
                    out[(k, l)] += r * choi.matrix[(i * dout + k, j * dout + l)];
                }
            }
        }
    }
    Ok(out)
}

/// Choi operator of `second ∘ first`, contracted over the shared middle factor.
pub fn link_product(first: &ChoiOperator, second: &ChoiOperator) -> Result<ChoiOperator> {
    if first.dim_out != second.dim_in {
        return dim_err(format!(
            "cannot link {}->{} with {}->{}",
            first.dim_in, first.dim_out, second.dim_in, second.dim_out
        ));
    }
    let (a, m, b) = (first.dim_in, first.dim_out, second.dim_out);
    let mut out = CMat::zeros(a * b, a * b);
    for ai in 0..a {
        for aj in 0..a {
            for k in 0..m {
                for l in 0..m {
                    let f = first.matrix[(ai * m + k, aj * m + l)];
                    if f == ZERO {
                        continue;
                    }
                    for bi in 0..b {
                        for bj in 0..b {
                            out[(ai * b + bi, aj * b + bj)] += f * second.matrix[(k * b + bi, l * b + bj)];
                        }
                    }
                }
            }
        }
    }
    Ok(ChoiOperator::from_hermitian_part(a, b, out))
}

#[derive(Clone, Debug, Serialize)]
pub struct CptpReport {
    pub cptp: bool,
    pub min_eigenvalue: f64,
    pub trace_deviation: f64,
}

pub fn is_cptp(choi: &ChoiOperator, tol: f64) -> CptpReport {
    let min_eigenvalue = linalg::min_eigenvalue(&choi.matrix);
    let tr = linalg::partial_trace(&choi.matrix, &[choi.dim_in, choi.dim_out], 1)
        .expect("Choi shape is consistent by construction");
    let trace_deviation = linalg::max_abs_diff(&tr, &linalg::identity(choi.dim_in));
    CptpReport { cptp: min_eigenvalue >= -tol && trace_deviation <= tol, min_eigenvalue, trace_deviation }
}

pub fn is_psd(m: &CMat, tol: f64) -> bool {
    linalg::min_eigenvalue(m) >= -tol
}

/// A channel split into completely positive pieces.
#[derive(Clone, Debug)]
pub struct SubchannelDecomposition {
    parts: Vec<ChoiOperator>,
    parent: ChoiOperator,
}

impl SubchannelDecomposition {
    pub fn new(parts: Vec<ChoiOperator>, parent: ChoiOperator, tol: f64) -> Result<Self> {
        if parts.is_empty() {
            return invalid("a decomposition needs at least one part");
        }
        let mut sum = CMat::zeros(parent.matrix.nrows(), parent.matrix.ncols());
        for (k, p) in parts.iter().enumerate() {
            parent.same_shape(p)?;
            let ev = linalg::min_eigenvalue(&p.matrix);
            if ev < -tol {
                return invalid(format!("part {k} is not positive (min eigenvalue {ev:.3e})"));
            }
            sum += &p.matrix;
        }
        let dev = linalg::max_abs_diff(&sum, &parent.matrix);
        if dev > tol {
            return invalid(format!("parts do not sum to the parent (deviation {dev:.3e})"));
        }
        Ok(Self { parts, parent })
    }

    pub fn parts(&self) -> &[ChoiOperator] {
        &self.parts
    }

    pub fn parent(&self) -> &ChoiOperator {
        &self.parent
    }
}

pub fn unitary_channel(u: &CMat) -> Result<ChoiOperator> {
    let d = u.nrows();
    if u.ncols() != d {
        return dim_err("unitary must be square");
    }
    let dev = linalg::max_abs_diff(&(u.adjoint() * u), &linalg::identity(d));
    if dev > 1e-9 {
        return invalid(format!("matrix is not unitary (deviation {dev:.3e})"));
    }
    let action = MapAction::from_fn(d, |i, j| u.column(i) * u.column(j).adjoint());
    choi_from_action(&action)
}
