//! CSS code definitions: built-in rotated surface codes, ingestion of
//! parity-check matrices from JSON, and logical-operator computation.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{kernel_basis, rank, BitMatrix, BitVec, XorBasis};

/// Pauli type of a parity check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CheckType {
    X,
    Z,
}

impl CheckType {
    pub fn opposite(self) -> CheckType {
        match self {
            CheckType::X => CheckType::Z,
            CheckType::Z => CheckType::X,
        }
    }
}

/// One parity check of a CSS code. Stabilizer ids run over the X checks first,
/// then the Z checks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stabilizer {
    pub id: usize,
    pub kind: CheckType,
    pub support: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CssCode {
    name: String,
    n: usize,
    hx: BitMatrix,
    hz: BitMatrix,
    lx: BitMatrix,
    lz: BitMatrix,
    distance: Option<usize>,
}

/// On-disk code description. Rows are lists of column indices of one bits.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct CodeFile {
    pub name: String,
    pub n: usize,
    pub hx: Vec<Vec<usize>>,
    pub hz: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lx: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lz: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
}

impl CssCode {
    /// Builds a code from check matrices, computing logical operators when
    /// they are not supplied, and validates every CSS invariant.
    pub fn new(
        name: impl Into<String>,
        hx: BitMatrix,
        hz: BitMatrix,
        logicals: Option<(BitMatrix, BitMatrix)>,
    ) -> Result<Self> {
        let n = hx.cols();
        if hz.cols() != n {
            return Err(Error::CodeInvariant(format!(
                "Hx has {n} columns but Hz has {}",
                hz.cols()
            )));
        }
        if !hx.mul_transpose(&hz)?.is_zero() {
            return Err(Error::CodeInvariant(
                "orthogonality: Hx·Hzᵀ ≠ 0 mod 2".into(),
            ));
        }
        let (lx, lz) = match logicals {
            Some((lx, lz)) => normalize_pairing(lx, lz)?,
            None => compute_logicals(&hx, &hz)?,
        };
        let code = CssCode {
            name: name.into(),
            n,
            hx,
            hz,
            lx,
            lz,
            distance: None,
        };
        code.validate()?;
        Ok(code)
    }

    pub fn with_distance(mut self, d: usize) -> Self {
        self.distance = Some(d);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn k(&self) -> usize {
        self.lx.rows()
    }
    pub fn hx(&self) -> &BitMatrix {
        &self.hx
    }
    pub fn hz(&self) -> &BitMatrix {
        &self.hz
    }
    pub fn lx(&self) -> &BitMatrix {
        &self.lx
    }
    pub fn lz(&self) -> &BitMatrix {
        &self.lz
    }

    /// Code distance when known from construction or the input file.
    pub fn known_distance(&self) -> Option<usize> {
        self.distance
    }

    pub fn num_x_checks(&self) -> usize {
        self.hx.rows()
    }

    pub fn num_z_checks(&self) -> usize {
        self.hz.rows()
    }

    pub fn num_stabilizers(&self) -> usize {
        self.hx.rows() + self.hz.rows()
    }

    pub fn check_matrix(&self, kind: CheckType) -> &BitMatrix {
        match kind {
            CheckType::X => &self.hx,
            CheckType::Z => &self.hz,
        }
    }

    /// Logical operators measured by a memory experiment in `basis`: the
    /// Z-type logicals for a Z-basis experiment and vice versa.
    pub fn logicals(&self, basis: CheckType) -> &BitMatrix {
        match basis {
            CheckType::X => &self.lx,
            CheckType::Z => &self.lz,
        }
    }

    pub fn stabilizer_kind(&self, id: usize) -> CheckType {
        if id < self.hx.rows() {
            CheckType::X
        } else {
            CheckType::Z
        }
    }

    pub fn stabilizer_support(&self, id: usize) -> Vec<usize> {
        if id < self.hx.rows() {
            self.hx.row_ones(id)
        } else {
            self.hz.row_ones(id - self.hx.rows())
        }
    }

    pub fn stabilizers(&self) -> Vec<Stabilizer> {
        (0..self.num_stabilizers())
            .map(|id| Stabilizer {
                id,
                kind: self.stabilizer_kind(id),
                support: self.stabilizer_support(id),
            })
            .collect()
    }

    pub fn max_check_weight(&self) -> usize {
        (0..self.num_stabilizers())
            .map(|s| self.stabilizer_support(s).len())
            .max()
            .unwrap_or(0)
    }

    /// Checks the CSS invariants; reports which one fails.
    pub fn validate(&self) -> Result<()> {
        if !self.hx.mul_transpose(&self.hz)?.is_zero() {
            return Err(Error::CodeInvariant(
                "orthogonality: Hx·Hzᵀ ≠ 0 mod 2".into(),
            ));
        }
        if !self.lx.mul_transpose(&self.hz)?.is_zero() {
            return Err(Error::CodeInvariant(
                "Lx does not commute with the Z checks".into(),
            ));
        }
        if !self.lz.mul_transpose(&self.hx)?.is_zero() {
            return Err(Error::CodeInvariant(
                "Lz does not commute with the X checks".into(),
            ));
        }
        let k = self.lx.rows();
        if self.lz.rows() != k || self.lx.mul_transpose(&self.lz)? != BitMatrix::identity(k) {
            return Err(Error::CodeInvariant("Lx·Lzᵀ is not the identity".into()));
        }
        let expected_k = self.n - rank(&self.hx) - rank(&self.hz);
        if k != expected_k {
            return Err(Error::CodeInvariant(format!(
                "{k} logical pairs supplied but the checks encode {expected_k}"
            )));
        }
        for (name, l, h) in [("Lx", &self.lx, &self.hx), ("Lz", &self.lz, &self.hz)] {
            for r in 0..l.rows() {
                if crate::gf2::in_rowspace(h, &l.row(r))? {
                    return Err(Error::CodeInvariant(format!(
                        "{name} row {r} lies in the stabilizer rowspace"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_file(&self) -> CodeFile {
        CodeFile {
            name: self.name.clone(),
            n: self.n,
            hx: self.hx.to_sparse_rows(),
            hz: self.hz.to_sparse_rows(),
            lx: Some(self.lx.to_sparse_rows()),
            lz: Some(self.lz.to_sparse_rows()),
            d: self.distance,
        }
    }

    pub fn from_file(file: &CodeFile) -> Result<Self> {
        let hx = BitMatrix::from_sparse_rows(file.n, &file.hx)?;
        let hz = BitMatrix::from_sparse_rows(file.n, &file.hz)?;
        let logicals = match (&file.lx, &file.lz) {
            (Some(lx), Some(lz)) => Some((
                BitMatrix::from_sparse_rows(file.n, lx)?,
                BitMatrix::from_sparse_rows(file.n, lz)?,
            )),
            (None, None) => None,
            _ => {
                return Err(Error::CodeInvariant(
                    "lx and lz must be given together".into(),
                ))
            }
        };
        let code = CssCode::new(file.name.clone(), hx, hz, logicals)?;
        Ok(match file.d {
            Some(d) => code.with_distance(d),
            None => code,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.to_file())
            .map_err(|e| Error::Internal(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Reads and validates a code-spec JSON file.
pub fn load_code(path: impl AsRef<Path>) -> Result<CssCode> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: CodeFile = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
    CssCode::from_file(&file)
}

/// Logical operators for the code with checks `hx`, `hz`.
///
/// Lx rows are coset representatives of ker(Hz)/rowsp(Hx), Lz rows of
/// ker(Hx)/rowsp(Hz). Representatives are taken from the kernel basis in free
/// column order, greedily shortened by stabilizers, and Lz is re-paired so that
/// Lx·Lzᵀ = I.
pub fn compute_logicals(hx: &BitMatrix, hz: &BitMatrix) -> Result<(BitMatrix, BitMatrix)> {
    if !hx.mul_transpose(hz)?.is_zero() {
        return Err(Error::CodeInvariant(
            "orthogonality: Hx·Hzᵀ ≠ 0 mod 2".into(),
        ));
    }
    let lx = coset_representatives(hz, hx);
    let lz = coset_representatives(hx, hz);
    normalize_pairing(lx, lz)
}

/// Independent vectors of ker(`checks`) outside rowsp(`stabilizers`).
fn coset_representatives(checks: &BitMatrix, stabilizers: &BitMatrix) -> BitMatrix {
    let n = checks.cols();
    let mut span = XorBasis::new();
    for r in 0..stabilizers.rows() {
        span.insert(&stabilizers.row(r));
    }
    let mut reps = BitMatrix::zeros(0, n);
    for v in kernel_basis(checks) {
        if span.insert(&v) {
            reps.push_row(&shorten(v, stabilizers));
        }
    }
    reps
}

/// Greedy weight reduction by adding stabilizer rows.
fn shorten(mut v: BitVec, stabilizers: &BitMatrix) -> BitVec {
    let rows: Vec<BitVec> = (0..stabilizers.rows()).map(|r| stabilizers.row(r)).collect();
    loop {
        let weight = v.count_ones();
        let best = rows
            .iter()
            .map(|r| v.xor(r))
            .min_by_key(|c| c.count_ones())
            .filter(|c| c.count_ones() < weight);
        match best {
            Some(c) => v = c,
            None => return v,
        }
    }
}

fn normalize_pairing(lx: BitMatrix, lz: BitMatrix) -> Result<(BitMatrix, BitMatrix)> {
    if lx.rows() != lz.rows() {
        return Err(Error::CodeInvariant(format!(
            "{} X logicals but {} Z logicals",
            lx.rows(),
            lz.rows()
        )));
    }
    if lx.rows() == 0 {
        return Ok((lx, lz));
    }
    let pairing = lx.mul_transpose(&lz)?;
    if pairing == BitMatrix::identity(lx.rows()) {
        return Ok((lx, lz));
    }
    let inv = pairing
        .inverse()
        .ok_or_else(|| Error::CodeInvariant("Lx·Lzᵀ is singular".into()))?;
    let lz = inv.transpose().mul(&lz)?;
    Ok((lx, lz))
}

/// Position of one plaquette of the rotated surface code. Corners are data
/// qubit indices (row-major over the d×d grid); boundary plaquettes miss two.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Plaquette {
    pub kind: CheckType,
    pub top_left: Option<usize>,
    pub top_right: Option<usize>,
    pub bottom_left: Option<usize>,
    pub bottom_right: Option<usize>,
}

impl Plaquette {
    pub fn support(&self) -> Vec<usize> {
        let mut s: Vec<usize> = [
            self.top_left,
            self.top_right,
            self.bottom_left,
            self.bottom_right,
        ]
        .into_iter()
        .flatten()
        .collect();
        s.sort_unstable();
        s
    }
}

/// Plaquettes in stabilizer-id order: bulk X (row-major), left then right X
/// boundary, then bulk Z, top then bottom Z boundary.
pub(crate) fn surface_plaquettes(d: usize) -> Vec<Plaquette> {
    let d = d as isize;
    let at = |r: isize, c: isize| -> Option<usize> {
        (0..d)
            .contains(&r)
            .then_some(())
            .and((0..d).contains(&c).then_some((r * d + c) as usize))
    };
    let plaquette = |kind, r: isize, c: isize| Plaquette {
        kind,
        top_left: at(r, c),
        top_right: at(r, c + 1),
        bottom_left: at(r + 1, c),
        bottom_right: at(r + 1, c + 1),
    };
    let mut out = Vec::new();
    for kind in [CheckType::X, CheckType::Z] {
        let parity = match kind {
            CheckType::X => 0,
            CheckType::Z => 1,
        };
        for r in 0..d - 1 {
            for c in 0..d - 1 {
                if (r + c).rem_euclid(2) == parity {
                    out.push(plaquette(kind, r, c));
                }
            }
        }
        match kind {
            CheckType::X => {
                for c in [-1, d - 1] {
                    for r in 0..d - 1 {
                        if (r + c).rem_euclid(2) == 0 {
                            out.push(plaquette(kind, r, c));
                        }
                    }
                }
            }
            CheckType::Z => {
                for r in [-1, d - 1] {
                    for c in 0..d - 1 {
                        if (r + c).rem_euclid(2) == 1 {
                            out.push(plaquette(kind, r, c));
                        }
                    }
                }
            }
        }
    }
    out
}

/// The distance-`d` rotated surface code on a row-major d×d grid.
///
/// X logical: the middle row. Z logical: the middle column.
pub fn make_rotated_surface(d: usize) -> Result<CssCode> {
    if d < 3 || d % 2 == 0 {
        return Err(Error::Argument(format!(
            "surface code distance must be odd and at least 3, got {d}"
        )));
    }
    let plaquettes = surface_plaquettes(d);
    let rows_of = |kind| -> Vec<Vec<usize>> {
        plaquettes
            .iter()
            .filter(|p| p.kind == kind)
            .map(Plaquette::support)
            .collect()
    };
    let n = d * d;
    let hx = BitMatrix::from_sparse_rows(n, &rows_of(CheckType::X))?;
    let hz = BitMatrix::from_sparse_rows(n, &rows_of(CheckType::Z))?;
    let mid = (d - 1) / 2;
    let lx = BitMatrix::from_sparse_rows(n, &[(0..d).map(|c| mid * d + c).collect()])?;
    let lz = BitMatrix::from_sparse_rows(n, &[(0..d).map(|r| r * d + mid).collect()])?;
    Ok(CssCode::new(format!("surface:{d}"), hx, hz, Some((lx, lz)))?.with_distance(d))
}

/// Hypergraph product of two classical parity-check matrices.
pub fn hypergraph_product(name: &str, h1: &BitMatrix, h2: &BitMatrix) -> Result<CssCode> {
    let (m1, n1) = (h1.rows(), h1.cols());
    let (m2, n2) = (h2.rows(), h2.cols());
    let n = n1 * n2 + m1 * m2;
    // Qubits: (bit of code 1, bit of code 2) first, then (check 1, check 2).
    let left = |i: usize, j: usize| i * n2 + j;
    let right = |a: usize, b: usize| n1 * n2 + a * m2 + b;
    let mut hx_rows = Vec::new();
    for a in 0..m1 {
        for j in 0..n2 {
            let mut row: Vec<usize> = h1.row_ones(a).into_iter().map(|i| left(i, j)).collect();
            row.extend((0..m2).filter(|&b| h2.get(b, j)).map(|b| right(a, b)));
            hx_rows.push(row);
        }
    }
    let mut hz_rows = Vec::new();
    for i in 0..n1 {
        for b in 0..m2 {
            let mut row: Vec<usize> = h2.row_ones(b).into_iter().map(|j| left(i, j)).collect();
            row.extend((0..m1).filter(|&a| h1.get(a, i)).map(|a| right(a, b)));
            hz_rows.push(row);
        }
    }
    CssCode::new(
        name,
        BitMatrix::from_sparse_rows(n, &hx_rows)?,
        BitMatrix::from_sparse_rows(n, &hz_rows)?,
        None,
    )
}

/// Parses the built-in shorthand `surface:<d>`.
pub fn builtin_code(spec: &str) -> Option<Result<CssCode>> {
    let d = spec.strip_prefix("surface:")?;
    Some(
        d.parse::<usize>()
            .map_err(|_| Error::Argument(format!("bad surface distance in {spec:?}")))
            .and_then(make_rotated_surface),
    )
}
